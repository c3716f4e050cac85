#include "multicfv/graph_encoder.hpp"

#include <algorithm>
#include <numeric>

#include "detail.hpp"

namespace multicfv::encoder {

using ad::Var;

EncoderParams EncoderParams::zeros(const EncoderDims& d) {
  EncoderParams p;
  p.dims = d;
  p.gcn_weight = Matrix::Zero(d.input_dim, d.hidden_dim);
  p.gru.resize(d.gru_layers);
  for (auto& layer : p.gru)
    layer.visit("", [&](const std::string&, Matrix& m) { m = Matrix::Zero(d.hidden_dim, d.hidden_dim); });
  p.fc_weight = Matrix::Zero(d.hidden_dim, d.fc_dim);
  p.fc_bias = Matrix::Zero(1, d.fc_dim);
  p.out_weight = Matrix::Zero(d.fc_dim, d.output_dim);
  p.out_bias = Matrix::Zero(1, d.output_dim);
  return p;
}

EncoderParams EncoderParams::init(const EncoderDims& d, std::uint64_t seed) {
  EncoderParams p = zeros(d);
  Rng rng(seed);
  p.visit([&](const std::string& name, Matrix& m) {
    if (name.ends_with("bias")) return;
    m = detail::xavier_uniform(m.rows(), m.cols(), rng);
  });
  return p;
}

void EncoderParams::validate() const {
  const auto& d = dims;
  detail::expect_shape(gcn_weight, d.input_dim, d.hidden_dim, "graph.gcn_weight");
  if (gru.size() != d.gru_layers) throw Error(ErrorKind::DimensionMismatch, "GRU layer count mismatch");
  for (std::size_t l = 0; l < gru.size(); ++l)
    gru[l].visit("graph.gru" + std::to_string(l) + ".", [&](const std::string& n, const Matrix& m) {
      detail::expect_shape(m, d.hidden_dim, d.hidden_dim, n);
    });
  detail::expect_shape(fc_weight, d.hidden_dim, d.fc_dim, "graph.fc_weight");
  detail::expect_shape(fc_bias, 1, d.fc_dim, "graph.fc_bias");
  detail::expect_shape(out_weight, d.fc_dim, d.output_dim, "graph.out_weight");
  detail::expect_shape(out_bias, 1, d.output_dim, "graph.out_bias");
}

Var Dropout::apply(Var x) const {
  if (!active()) return x;
  Matrix mask(x.rows(), x.cols());
  const double keep = 1.0 / (1.0 - p);
  for (Eigen::Index r = 0; r < mask.rows(); ++r)
    for (Eigen::Index c = 0; c < mask.cols(); ++c) mask(r, c) = rng->bernoulli(p) ? 0.0 : keep;
  return ad::hadamard(x, x.tape->constant(std::move(mask)));
}

Matrix normalized_adjacency(const cfg::ControlFlowGraph& cfg) {
  const auto n = static_cast<Eigen::Index>(cfg.blocks.size());
  Matrix a = Matrix::Zero(n, n);
  for (const auto& e : cfg.edges) {
    const auto s = static_cast<Eigen::Index>(e.source);
    const auto t = static_cast<Eigen::Index>(e.target);
    a(s, t) = 1.0;
    a(t, s) = 1.0;
  }
  a += Matrix::Identity(n, n);
  Vector inv_sqrt_deg = a.rowwise().sum().array().rsqrt();
  return inv_sqrt_deg.asDiagonal() * a * inv_sqrt_deg.asDiagonal();
}

Var gcn_layer(ad::Binder& bind, Var features, Var adjacency, const Matrix& weight) {
  return ad::relu(ad::matmul(ad::matmul(adjacency, features), bind(weight)));
}

Matrix gcn_layer(const Matrix& features, const Matrix& adjacency, const Matrix& weight) {
  if (adjacency.rows() != adjacency.cols() || adjacency.cols() != features.rows() || features.cols() != weight.rows())
    throw Error(ErrorKind::DimensionMismatch, "gcn_layer dimension chain");
  ad::Tape tape;
  ad::Binder bind(tape);
  return gcn_layer(bind, tape.constant_ref(features), tape.constant_ref(adjacency), weight).value();
}

Var gru_cell(ad::Binder& bind, Var xz, Var xr, Var xh, Var h_prev, const GruLayer& layer, GruStepTrace* trace) {
  Var z = ad::sigmoid(ad::add(xz, ad::matmul_bt(h_prev, bind(layer.u_z))));
  Var r = ad::sigmoid(ad::add(xr, ad::matmul_bt(h_prev, bind(layer.u_r))));
  Var cand = ad::tanh(ad::add(xh, ad::hadamard(r, ad::matmul_bt(h_prev, bind(layer.u)))));
  Var h = ad::add(ad::hadamard(ad::one_minus(z), h_prev), ad::hadamard(z, cand));
  if (trace) {
    trace->update_gate = z.value().transpose();
    trace->reset_gate = r.value().transpose();
    trace->candidate = cand.value().transpose();
    trace->hidden = h.value().transpose();
  }
  return h;
}

GruStepTrace gru_step_trace(const Vector& x, const Vector& h_prev, const GruLayer& layer) {
  const Eigen::Index n = layer.u_z.rows();
  if (x.size() != layer.w_z.cols() || h_prev.size() != n) throw Error(ErrorKind::DimensionMismatch, "gru_step sizes");
  ad::Tape tape;
  ad::Binder bind(tape);
  Var xv = tape.constant(x.transpose());
  Var hv = tape.constant(h_prev.transpose());
  GruStepTrace trace;
  gru_cell(bind, ad::matmul_bt(xv, bind(layer.w_z)), ad::matmul_bt(xv, bind(layer.w_r)), ad::matmul_bt(xv, bind(layer.w)),
           hv, layer, &trace);
  return trace;
}

Vector gru_step(const Vector& x, const Vector& h_prev, const GruLayer& layer) {
  return gru_step_trace(x, h_prev, layer).hidden;
}

GraphInput prepare_graph_input(const embed::ControlFlowRecord& record) {
  const auto& blocks = record.graph.blocks;
  const auto n = static_cast<Eigen::Index>(blocks.size());
  std::vector<std::size_t> order(blocks.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return blocks[a].start_offset < blocks[b].start_offset;
  });
  // Position of each block id in the sequence.
  std::vector<Eigen::Index> position(blocks.size());
  for (std::size_t i = 0; i < order.size(); ++i) position[blocks[order[i]].id] = static_cast<Eigen::Index>(i);

  Matrix adj_by_id = normalized_adjacency(record.graph);
  GraphInput in;
  in.features.resize(n, record.node_features.cols());
  in.adjacency.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto src = static_cast<Eigen::Index>(order[static_cast<std::size_t>(i)]);
    in.features.row(i) = record.node_features.row(src);
  }
  for (std::size_t a = 0; a < blocks.size(); ++a)
    for (std::size_t b = 0; b < blocks.size(); ++b)
      in.adjacency(position[blocks[a].id], position[blocks[b].id]) =
          adj_by_id(static_cast<Eigen::Index>(blocks[a].id), static_cast<Eigen::Index>(blocks[b].id));
  return in;
}

Var encode_graph(ad::Binder& bind, const GraphInput& input, const EncoderParams& params, const Dropout& dropout) {
  ad::Tape& tape = bind.tape();
  const Eigen::Index n = input.features.rows();
  if (n == 0) throw Error(ErrorKind::DimensionMismatch, "graph has no nodes");
  if (input.features.cols() != params.dims.input_dim)
    throw Error(ErrorKind::DimensionMismatch, "node feature width " + std::to_string(input.features.cols()) +
                                                  " != encoder input_dim " + std::to_string(params.dims.input_dim));

  Var seq = gcn_layer(bind, tape.constant_ref(input.features), tape.constant_ref(input.adjacency), params.gcn_weight);
  seq = dropout.apply(seq);

  for (const GruLayer& layer : params.gru) {
    Var xz = ad::matmul_bt(seq, bind(layer.w_z));
    Var xr = ad::matmul_bt(seq, bind(layer.w_r));
    Var xh = ad::matmul_bt(seq, bind(layer.w));
    Var h = tape.constant(Matrix::Zero(1, params.dims.hidden_dim));
    std::vector<Var> states;
    states.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index t = 0; t < n; ++t) {
      h = gru_cell(bind, ad::row(xz, t), ad::row(xr, t), ad::row(xh, t), h, layer);
      states.push_back(h);
    }
    seq = ad::stack_rows(states);
  }
  seq = dropout.apply(seq);

  Var pooled = ad::mean_rows(seq);
  Var fc = ad::relu(ad::add_row(ad::matmul(pooled, bind(params.fc_weight)), bind(params.fc_bias)));
  return ad::add_row(ad::matmul(fc, bind(params.out_weight)), bind(params.out_bias));
}

namespace {
Vector run_encoder(const embed::ControlFlowRecord& record, const EncoderParams& params, Rng* rng) {
  ad::Tape tape;
  ad::Binder bind(tape);
  const GraphInput input = prepare_graph_input(record);
  return encode_graph(bind, input, params, Dropout{params.dropout_p, rng}).value().transpose();
}
}  // namespace

Vector encode_graph(const embed::ControlFlowRecord& record, const EncoderParams& params) {
  return run_encoder(record, params, nullptr);
}

Vector encode_graph(const embed::ControlFlowRecord& record, const EncoderParams& params, Rng& rng) {
  return run_encoder(record, params, &rng);
}

}  // namespace multicfv::encoder
