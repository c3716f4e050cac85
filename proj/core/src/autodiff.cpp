#include "multicfv/autodiff.hpp"

#include <cmath>

#include "multicfv/error.hpp"

namespace multicfv::ad {
namespace {

void require(bool ok, const char* what) {
  if (!ok) throw Error(ErrorKind::DimensionMismatch, what);
}

bool any_grad(Var a) { return a.tape->needs_grad(a); }
bool any_grad(Var a, Var b) { return a.tape->needs_grad(a) || b.tape->needs_grad(b); }

}  // namespace

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Var Tape::constant(Matrix value) { return push(std::move(value), false, nullptr); }

Var Tape::constant_ref(const Matrix& value) {
  Node n;
  n.ref = &value;
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

Var Tape::parameter(const Matrix& value, Matrix* grad_sink) {
  Node n;
  n.ref = &value;
  n.needs_grad = true;
  n.sink = grad_sink;
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

Var Tape::push(Matrix value, bool needs_grad, Backprop backprop) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  if (needs_grad) n.backprop = std::move(backprop);
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

void Tape::accumulate(Var v, const Matrix& g) {
  Node& n = nodes_[v.id];
  if (!n.needs_grad) return;
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

void Tape::backward(Var out) {
  require(value(out).rows() == 1 && value(out).cols() == 1, "backward() needs a scalar output");
  for (auto& n : nodes_) n.grad.resize(0, 0);
  if (!nodes_[out.id].needs_grad) return;
  nodes_[out.id].grad = Matrix::Ones(1, 1);
  for (std::size_t i = out.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.needs_grad || n.grad.size() == 0) continue;
    if (n.backprop) n.backprop(*this, i);
    if (n.sink) {
      Node& leaf = nodes_[i];
      if (leaf.sink->size() == 0) *leaf.sink = Matrix::Zero(leaf.grad.rows(), leaf.grad.cols());
      *leaf.sink += leaf.grad;
    }
  }
}

Var Binder::operator()(const Matrix& value) {
  auto hit = bound_.find(&value);
  if (hit != bound_.end()) return hit->second;
  auto sink = sinks_.find(&value);
  Var v = sink == sinks_.end() ? tape_->constant_ref(value) : tape_->parameter(value, sink->second);
  bound_.emplace(&value, v);
  return v;
}

Var matmul(Var a, Var b) {
  require(a.cols() == b.rows(), "matmul inner dimensions");
  Tape& t = *a.tape;
  return t.push(a.value() * b.value(), any_grad(a, b), [a, b](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad_of(self);
    if (tp.needs_grad(a)) tp.accumulate(a, g * b.value().transpose());
    if (tp.needs_grad(b)) tp.accumulate(b, a.value().transpose() * g);
  });
}

Var matmul_bt(Var a, Var b) {
  require(a.cols() == b.cols(), "matmul_bt inner dimensions");
  Tape& t = *a.tape;
  return t.push(a.value() * b.value().transpose(), any_grad(a, b), [a, b](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad_of(self);
    if (tp.needs_grad(a)) tp.accumulate(a, g * b.value());
    if (tp.needs_grad(b)) tp.accumulate(b, g.transpose() * a.value());
  });
}

Var add(Var a, Var b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "add shapes");
  Tape& t = *a.tape;
  return t.push(a.value() + b.value(), any_grad(a, b), [a, b](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad_of(self);
    tp.accumulate(a, g);
    tp.accumulate(b, g);
  });
}

Var add_row(Var a, Var r) {
  require(r.rows() == 1 && r.cols() == a.cols(), "add_row shapes");
  Tape& t = *a.tape;
  Matrix out = a.value();
  out.rowwise() += r.value().row(0);
  return t.push(std::move(out), any_grad(a, r), [a, r](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad_of(self);
    tp.accumulate(a, g);
    if (tp.needs_grad(r)) tp.accumulate(r, g.colwise().sum());
  });
}

Var sub(Var a, Var b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "sub shapes");
  Tape& t = *a.tape;
  return t.push(a.value() - b.value(), any_grad(a, b), [a, b](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad_of(self);
    tp.accumulate(a, g);
    if (tp.needs_grad(b)) tp.accumulate(b, -g);
  });
}

Var hadamard(Var a, Var b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "hadamard shapes");
  Tape& t = *a.tape;
  return t.push(a.value().cwiseProduct(b.value()), any_grad(a, b), [a, b](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad_of(self);
    if (tp.needs_grad(a)) tp.accumulate(a, g.cwiseProduct(b.value()));
    if (tp.needs_grad(b)) tp.accumulate(b, g.cwiseProduct(a.value()));
  });
}

Var scale(Var a, double s) {
  Tape& t = *a.tape;
  return t.push(a.value() * s, any_grad(a), [a, s](Tape& tp, std::size_t self) { tp.accumulate(a, tp.grad_of(self) * s); });
}

Var one_minus(Var a) {
  Tape& t = *a.tape;
  return t.push((1.0 - a.value().array()).matrix(), any_grad(a),
                [a](Tape& tp, std::size_t self) { tp.accumulate(a, -tp.grad_of(self)); });
}

Var relu(Var a) {
  Tape& t = *a.tape;
  return t.push(a.value().cwiseMax(0.0), any_grad(a), [a](Tape& tp, std::size_t self) {
    tp.accumulate(a, (a.value().array() > 0.0).select(tp.grad_of(self), 0.0));
  });
}

Var sigmoid(Var a) {
  Tape& t = *a.tape;
  Matrix out = a.value().unaryExpr([](double x) { return sigmoid(x); });
  return t.push(std::move(out), any_grad(a), [a](Tape& tp, std::size_t self) {
    const Matrix& y = tp.value(Var{&tp, self});
    tp.accumulate(a, tp.grad_of(self).cwiseProduct((y.array() * (1.0 - y.array())).matrix()));
  });
}

Var tanh(Var a) {
  Tape& t = *a.tape;
  Matrix out = a.value().array().tanh().matrix();
  return t.push(std::move(out), any_grad(a), [a](Tape& tp, std::size_t self) {
    const Matrix& y = tp.value(Var{&tp, self});
    tp.accumulate(a, tp.grad_of(self).cwiseProduct((1.0 - y.array().square()).matrix()));
  });
}

Var transpose(Var a) {
  Tape& t = *a.tape;
  return t.push(a.value().transpose(), any_grad(a),
                [a](Tape& tp, std::size_t self) { tp.accumulate(a, tp.grad_of(self).transpose()); });
}

Var row(Var a, Eigen::Index i) {
  require(i >= 0 && i < a.rows(), "row index");
  Tape& t = *a.tape;
  return t.push(a.value().row(i), any_grad(a), [a, i](Tape& tp, std::size_t self) {
    Matrix g = Matrix::Zero(a.rows(), a.cols());
    g.row(i) = tp.grad_of(self);
    tp.accumulate(a, g);
  });
}

Var stack_rows(const std::vector<Var>& rows) {
  require(!rows.empty(), "stack_rows of nothing");
  Tape& t = *rows.front().tape;
  const Eigen::Index c = rows.front().cols();
  Matrix out(static_cast<Eigen::Index>(rows.size()), c);
  bool ng = false;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    require(rows[i].rows() == 1 && rows[i].cols() == c, "stack_rows shapes");
    out.row(static_cast<Eigen::Index>(i)) = rows[i].value();
    ng = ng || t.needs_grad(rows[i]);
  }
  return t.push(std::move(out), ng, [rows](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad_of(self);
    for (std::size_t i = 0; i < rows.size(); ++i)
      if (tp.needs_grad(rows[i])) tp.accumulate(rows[i], g.row(static_cast<Eigen::Index>(i)));
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_cols of nothing");
  Tape& t = *parts.front().tape;
  const Eigen::Index r = parts.front().rows();
  Eigen::Index total = 0;
  bool ng = false;
  for (const Var& p : parts) {
    require(p.rows() == r, "concat_cols row counts");
    total += p.cols();
    ng = ng || t.needs_grad(p);
  }
  Matrix out(r, total);
  Eigen::Index c = 0;
  for (const Var& p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  return t.push(std::move(out), ng, [parts](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad_of(self);
    Eigen::Index col = 0;
    for (const Var& p : parts) {
      if (tp.needs_grad(p)) tp.accumulate(p, g.middleCols(col, p.cols()));
      col += p.cols();
    }
  });
}

Var sum_rows(Var a) {
  Tape& t = *a.tape;
  return t.push(a.value().colwise().sum(), any_grad(a), [a](Tape& tp, std::size_t self) {
    tp.accumulate(a, tp.grad_of(self).replicate(a.rows(), 1));
  });
}

Var mean_rows(Var a) {
  require(a.rows() > 0, "mean_rows of empty matrix");
  return scale(sum_rows(a), 1.0 / static_cast<double>(a.rows()));
}

Var softmax_rows(Var a) {
  Tape& t = *a.tape;
  Matrix out = a.value();
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double m = out.row(i).maxCoeff();
    out.row(i) = (out.row(i).array() - m).exp().matrix();
    out.row(i) /= out.row(i).sum();
  }
  return t.push(std::move(out), any_grad(a), [a](Tape& tp, std::size_t self) {
    const Matrix& y = tp.value(Var{&tp, self});
    const Matrix& g = tp.grad_of(self);
    Matrix dx(y.rows(), y.cols());
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      const double dot = g.row(i).dot(y.row(i));
      dx.row(i) = y.row(i).cwiseProduct((g.row(i).array() - dot).matrix());
    }
    tp.accumulate(a, dx);
  });
}

Var shift_rows(Var a, Eigen::Index shift) {
  Tape& t = *a.tape;
  const Eigen::Index n = a.rows();
  Matrix out = Matrix::Zero(n, a.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index src = i + shift;
    if (src >= 0 && src < n) out.row(i) = a.value().row(src);
  }
  return t.push(std::move(out), any_grad(a), [a, shift, n](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad_of(self);
    Matrix dx = Matrix::Zero(n, g.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Index src = i + shift;
      if (src >= 0 && src < n) dx.row(src) += g.row(i);
    }
    tp.accumulate(a, dx);
  });
}

Var binary_cross_entropy(Var p, const Vector& labels, double eps) {
  require(p.cols() == 1 && p.rows() == labels.size() && p.rows() > 0, "binary_cross_entropy shapes");
  Tape& t = *p.tape;
  const Matrix& pv = p.value();
  const double n = static_cast<double>(pv.rows());
  double loss = 0.0;
  for (Eigen::Index i = 0; i < pv.rows(); ++i) {
    const double y = labels[i];
    loss -= y * std::log(std::max(pv(i, 0), eps)) + (1.0 - y) * std::log(std::max(1.0 - pv(i, 0), eps));
  }
  Matrix out(1, 1);
  out(0, 0) = loss / n;
  return t.push(std::move(out), any_grad(p), [p, labels, eps, n](Tape& tp, std::size_t self) {
    const double g = tp.grad_of(self)(0, 0);
    const Matrix& pv = p.value();
    Matrix dp(pv.rows(), 1);
    for (Eigen::Index i = 0; i < pv.rows(); ++i) {
      const double y = labels[i];
      const double q = pv(i, 0);
      double d = 0.0;
      if (q > eps) d -= y / q;
      if (1.0 - q > eps) d += (1.0 - y) / (1.0 - q);
      dp(i, 0) = g * d / n;
    }
    tp.accumulate(p, dp);
  });
}

}  // namespace multicfv::ad
