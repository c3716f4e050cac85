#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <functional>
#include <unordered_map>
#include <vector>

namespace multicfv {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace ad {

class Tape;

/// Handle to a node on a Tape. Cheap to copy; only valid while its tape lives.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
};

// Reverse-mode tape over dense matrices. Nodes are appended in evaluation
// order, so a single reverse sweep visits every node after all its
// consumers.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  /// Constant referencing caller-owned storage; no copy is made.
  Var constant_ref(const Matrix& value);
  /// Trainable leaf. After backward(), its gradient is added into *grad_sink.
  Var parameter(const Matrix& value, Matrix* grad_sink);

  const Matrix& value(Var v) const { return node(v).ref ? *node(v).ref : node(v).value; }
  bool needs_grad(Var v) const { return node(v).needs_grad; }

  /// Seeds d(out)/d(out) = 1 for a 1x1 output and sweeps backwards.
  void backward(Var out);

  /// Gradient of the last backward() with respect to v (zero-sized if none).
  const Matrix& grad(Var v) const { return node(v).grad; }

  std::size_t size() const { return nodes_.size(); }

  // Used by op implementations.
  using Backprop = std::function<void(Tape&, std::size_t self)>;
  Var push(Matrix value, bool needs_grad, Backprop backprop);
  void accumulate(Var v, const Matrix& g);
  const Matrix& grad_of(std::size_t id) const { return nodes_[id].grad; }

 private:
  struct Node {
    Matrix value;
    const Matrix* ref = nullptr;
    Matrix grad;
    bool needs_grad = false;
    Matrix* sink = nullptr;
    Backprop backprop;
  };
  const Node& node(Var v) const { return nodes_[v.id]; }

  std::vector<Node> nodes_;
};

inline const Matrix& Var::value() const { return tape->value(*this); }

// Binds parameter matrices to tape nodes: trainable matrices (those with a
// registered gradient sink) become leaves, everything else a constant ref.
// Each matrix maps to one node regardless of how many times it is bound.
class Binder {
 public:
  explicit Binder(Tape& tape) : tape_(&tape) {}

  void set_trainable(const Matrix& value, Matrix* grad_sink) { sinks_[&value] = grad_sink; }

  Var operator()(const Matrix& value);

  Tape& tape() const { return *tape_; }

 private:
  Tape* tape_;
  std::unordered_map<const Matrix*, Matrix*> sinks_;
  std::unordered_map<const Matrix*, Var> bound_;
};

Var matmul(Var a, Var b);
/// a * bᵀ
Var matmul_bt(Var a, Var b);
Var add(Var a, Var b);
/// Adds a 1 x c row to every row of a.
Var add_row(Var a, Var row);
Var sub(Var a, Var b);
Var hadamard(Var a, Var b);
Var scale(Var a, double s);
/// 1 - a
Var one_minus(Var a);
Var relu(Var a);
Var sigmoid(Var a);
Var tanh(Var a);
Var transpose(Var a);
Var row(Var a, Eigen::Index i);
Var stack_rows(const std::vector<Var>& rows);
Var concat_cols(const std::vector<Var>& parts);
/// 1 x c vector of column sums.
Var sum_rows(Var a);
Var mean_rows(Var a);
Var softmax_rows(Var a);
/// Row i of the result is row (i + shift) of a, zero outside [0, rows).
Var shift_rows(Var a, Eigen::Index shift);
/// Mean binary cross-entropy of probabilities p (n x 1) against labels,
/// with both log arguments clamped to [eps, 1].
Var binary_cross_entropy(Var p, const Vector& labels, double eps = 1e-12);

double sigmoid(double x);

}  // namespace ad
}  // namespace multicfv
