#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "multicfv/autodiff.hpp"
#include "multicfv/embedding.hpp"
#include "multicfv/random.hpp"

namespace multicfv::encoder {

struct EncoderDims {
  Eigen::Index input_dim = 128;   // node feature width
  Eigen::Index hidden_dim = 512;  // GCN output and GRU state width
  Eigen::Index fc_dim = 512;
  Eigen::Index output_dim = 512;
  std::size_t gru_layers = 3;
};

/// Weights of one GRU layer; all hidden x hidden, applied as W * x.
struct GruLayer {
  Matrix w_z, u_z, w_r, u_r, w, u;

  template <class F>
  void visit(const std::string& prefix, F&& f) { visit_impl(*this, prefix, f); }
  template <class F>
  void visit(const std::string& prefix, F&& f) const { visit_impl(*this, prefix, f); }

 private:
  template <class Self, class F>
  static void visit_impl(Self& self, const std::string& prefix, F& f) {
    f(prefix + "w_z", self.w_z);
    f(prefix + "u_z", self.u_z);
    f(prefix + "w_r", self.w_r);
    f(prefix + "u_r", self.u_r);
    f(prefix + "w", self.w);
    f(prefix + "u", self.u);
  }
};

struct EncoderParams {
  EncoderDims dims;
  double dropout_p = 0.3;
  Matrix gcn_weight;  // input_dim x hidden_dim
  std::vector<GruLayer> gru;
  Matrix fc_weight;   // hidden_dim x fc_dim
  Matrix fc_bias;     // 1 x fc_dim
  Matrix out_weight;  // fc_dim x output_dim
  Matrix out_bias;    // 1 x output_dim

  static EncoderParams zeros(const EncoderDims& dims);
  /// Xavier-uniform weights, zero biases.
  static EncoderParams init(const EncoderDims& dims, std::uint64_t seed);

  /// Throws Error(DimensionMismatch) on inconsistent shapes, Error(InvalidArgument) on non-finite entries.
  void validate() const;

  template <class F>
  void visit(F&& f) { visit_impl(*this, f); }
  template <class F>
  void visit(F&& f) const { visit_impl(*this, f); }

 private:
  template <class Self, class F>
  static void visit_impl(Self& self, F& f) {
    f("graph.gcn_weight", self.gcn_weight);
    for (std::size_t l = 0; l < self.gru.size(); ++l) self.gru[l].visit("graph.gru" + std::to_string(l) + ".", f);
    f("graph.fc_weight", self.fc_weight);
    f("graph.fc_bias", self.fc_bias);
    f("graph.out_weight", self.out_weight);
    f("graph.out_bias", self.out_bias);
  }
};

/// Inverted dropout; inactive when rng is null or p == 0.
struct Dropout {
  double p = 0.0;
  Rng* rng = nullptr;

  bool active() const { return rng != nullptr && p > 0.0; }
  ad::Var apply(ad::Var x) const;
};

/// D^-1/2 (A + I) D^-1/2 over the symmetrized, kind-agnostic adjacency,
/// indexed by block id.
Matrix normalized_adjacency(const cfg::ControlFlowGraph& cfg);

Matrix gcn_layer(const Matrix& features, const Matrix& adjacency, const Matrix& weight);

struct GruStepTrace {
  Vector update_gate;
  Vector reset_gate;
  Vector candidate;
  Vector hidden;
};

GruStepTrace gru_step_trace(const Vector& x, const Vector& h_prev, const GruLayer& layer);
Vector gru_step(const Vector& x, const Vector& h_prev, const GruLayer& layer);

/// Node features and adjacency permuted into ascending start_offset order,
/// the sequence order consumed by the recurrent layers.
struct GraphInput {
  Matrix features;
  Matrix adjacency;
};

GraphInput prepare_graph_input(const embed::ControlFlowRecord& record);

/// Differentiable encoder: GCN -> dropout -> stacked GRU over nodes ->
/// dropout -> mean pool -> FC + ReLU -> affine output head. Returns 1 x output_dim.
ad::Var encode_graph(ad::Binder& bind, const GraphInput& input, const EncoderParams& params, const Dropout& dropout);

Vector encode_graph(const embed::ControlFlowRecord& record, const EncoderParams& params);
/// Training-mode forward with dropout drawn from rng.
Vector encode_graph(const embed::ControlFlowRecord& record, const EncoderParams& params, Rng& rng);

// Building blocks shared with the tape-level encoder.
ad::Var gcn_layer(ad::Binder& bind, ad::Var features, ad::Var adjacency, const Matrix& weight);
/// One GRU step given the precomputed input projections W_z x, W_r x, W x (1 x hidden rows).
ad::Var gru_cell(ad::Binder& bind, ad::Var xz, ad::Var xr, ad::Var xh, ad::Var h_prev, const GruLayer& layer,
                 GruStepTrace* trace = nullptr);

}  // namespace multicfv::encoder
