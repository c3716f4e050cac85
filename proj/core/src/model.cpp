#include "multicfv/model.hpp"

#include <fstream>
#include <sstream>

#include "binary_io.hpp"
#include "detail.hpp"
#include "multicfv/error.hpp"
#include "multicfv/feature_store.hpp"
#include "multicfv/random.hpp"

namespace multicfv::model {
namespace fs = std::filesystem;

namespace {
constexpr std::string_view kTensorMagic = "MCFVTEN1";
}

ClassifierHead ClassifierHead::init(Eigen::Index input_dim, Eigen::Index hidden_dim, std::uint64_t seed) {
  Rng rng(seed);
  ClassifierHead h;
  h.fc_weight = detail::xavier_uniform(input_dim, hidden_dim, rng);
  h.fc_bias = Matrix::Zero(1, hidden_dim);
  h.out_weight = detail::xavier_uniform(hidden_dim, 1, rng);
  h.out_bias = Matrix::Zero(1, 1);
  return h;
}

ad::Var classify(ad::Binder& bind, ad::Var features, const ClassifierHead& head, const encoder::Dropout& dropout) {
  ad::Var x = dropout.apply(features);
  ad::Var hidden = ad::relu(ad::add_row(ad::matmul(x, bind(head.fc_weight)), bind(head.fc_bias)));
  return ad::sigmoid(ad::add_row(ad::matmul(hidden, bind(head.out_weight)), bind(head.out_bias)));
}

double classify(const Vector& flattened_features, const ClassifierHead& head) {
  if (flattened_features.size() != head.input_dim())
    throw Error(ErrorKind::DimensionMismatch, "classifier expects " + std::to_string(head.input_dim()) + " features, got " +
                                                  std::to_string(flattened_features.size()));
  ad::Tape tape;
  ad::Binder bind(tape);
  return classify(bind, tape.constant(flattened_features.transpose()), head, {}).value()(0, 0);
}

fs::path manifest_path(const fs::path& tensor_path) {
  fs::path p = tensor_path;
  p += ".manifest";
  return p;
}

void save_tensors(const fs::path& path, const std::vector<std::pair<std::string, const Matrix*>>& tensors,
                  const Metadata& meta) {
  detail::ByteWriter w;
  w.raw(kTensorMagic);
  w.u64(tensors.size());
  for (const auto& [_, m] : tensors) {
    w.u64(static_cast<std::uint64_t>(m->rows()));
    w.u64(static_cast<std::uint64_t>(m->cols()));
  }
  for (const auto& [_, m] : tensors)
    for (Eigen::Index r = 0; r < m->rows(); ++r)
      for (Eigen::Index c = 0; c < m->cols(); ++c) w.f64((*m)(r, c));

  std::ostringstream man;
  man << "# multicfv tensors v1\n";
  for (const auto& [k, v] : meta) {
    if (k.find_first_of(" \t\n") != std::string::npos || v.find('\n') != std::string::npos)
      throw Error(ErrorKind::InvalidArgument, "metadata key/value not representable: " + k);
    man << "meta " << k << " " << v << "\n";
  }
  std::uint64_t offset = 0;
  for (const auto& [name, m] : tensors) {
    man << "tensor " << name << " " << m->rows() << " " << m->cols() << " " << offset << "\n";
    offset += static_cast<std::uint64_t>(m->size());
  }
  store::atomic_write(path, w.bytes());
  store::atomic_write(manifest_path(path), man.str());
}

const Matrix* TensorFile::find(const std::string& name) const {
  for (const auto& [n, m] : tensors)
    if (n == name) return &m;
  return nullptr;
}

TensorFile load_tensors(const fs::path& path) {
  if (!fs::exists(path)) throw Error(ErrorKind::ModelMissing, "no parameter file at " + path.string());
  const fs::path man_path = manifest_path(path);
  if (!fs::exists(man_path)) throw Error(ErrorKind::ModelMissing, "missing manifest " + man_path.string());

  TensorFile out;
  struct Declared {
    std::string name;
    std::uint64_t rows, cols;
  };
  std::vector<Declared> declared;
  std::istringstream man(store::read_file(man_path));
  std::string line;
  while (std::getline(man, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "meta") {
      std::string key, value;
      ls >> key;
      std::getline(ls >> std::ws, value);
      out.meta[key] = value;
    } else if (tag == "tensor") {
      Declared d;
      std::uint64_t offset;
      if (!(ls >> d.name >> d.rows >> d.cols >> offset))
        throw Error(ErrorKind::CorruptFile, man_path.string() + ": bad tensor line: " + line);
      declared.push_back(std::move(d));
    } else {
      throw Error(ErrorKind::CorruptFile, man_path.string() + ": unknown line: " + line);
    }
  }

  const std::string bytes = store::read_file(path);
  detail::ByteReader r(bytes, path.string());
  r.expect(kTensorMagic);
  const std::uint64_t count = r.u64();
  if (count != declared.size()) r.fail("tensor count disagrees with manifest");
  std::vector<std::pair<std::uint64_t, std::uint64_t>> shapes;
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint64_t rows = r.u64(), cols = r.u64();
    if (rows != declared[i].rows || cols != declared[i].cols) r.fail("shape of " + declared[i].name + " disagrees with manifest");
    shapes.emplace_back(rows, cols);
  }
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto [rows, cols] = shapes[i];
    if (rows * cols * 8 > r.remaining()) r.fail("tensor data truncated");
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index a = 0; a < m.rows(); ++a)
      for (Eigen::Index b = 0; b < m.cols(); ++b) m(a, b) = r.f64();
    out.tensors.emplace_back(declared[i].name, std::move(m));
  }
  if (!r.at_end()) r.fail("trailing bytes");
  return out;
}

template <class T>
void assign_tensors(T& params, const TensorFile& file) {
  params.visit([&](const std::string& name, Matrix& m) {
    const Matrix* src = file.find(name);
    if (!src) throw Error(ErrorKind::CorruptFile, "parameter file lacks tensor " + name);
    if (src->rows() != m.rows() || src->cols() != m.cols())
      throw Error(ErrorKind::CorruptFile, "tensor " + name + " has shape " + std::to_string(src->rows()) + "x" +
                                              std::to_string(src->cols()) + ", expected " + std::to_string(m.rows()) +
                                              "x" + std::to_string(m.cols()));
    m = *src;
  });
}

template void assign_tensors<FeatureModel>(FeatureModel&, const TensorFile&);
template void assign_tensors<ClassifierHead>(ClassifierHead&, const TensorFile&);
template void assign_tensors<encoder::EncoderParams>(encoder::EncoderParams&, const TensorFile&);

}  // namespace multicfv::model
