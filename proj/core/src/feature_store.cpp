#include "multicfv/feature_store.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "binary_io.hpp"
#include "multicfv/error.hpp"
#include "multicfv/random.hpp"

namespace multicfv::store {
namespace fs = std::filesystem;

namespace {
constexpr std::string_view kRecordMagic = "MCFVREC1";
constexpr std::string_view kFooterMagic = "MCFVEND1";

void check_name(std::string_view name) {
  if (name.empty()) throw Error(ErrorKind::InvalidArgument, "empty contract name");
  for (char c : name)
    if (c == '\t' || c == '\n' || c == '\r') throw Error(ErrorKind::InvalidArgument, "contract name contains tab or newline");
}
}  // namespace

std::string_view vulnerability_name(Vulnerability v) {
  switch (v) {
    case Vulnerability::Reentrancy: return "reentrancy";
    case Vulnerability::AccessControl: return "access_control";
    case Vulnerability::ExternalCall: return "external_call";
    case Vulnerability::Delegatecall: return "delegatecall";
  }
  return "?";
}

std::optional<Vulnerability> parse_vulnerability(std::string_view name) {
  for (Vulnerability v : kVulnerabilities)
    if (vulnerability_name(v) == name) return v;
  return std::nullopt;
}

bool Labels::any() const {
  for (const auto& v : values)
    if (v) return true;
  return false;
}

std::string Labels::to_string() const {
  std::string s;
  for (Vulnerability v : kVulnerabilities) {
    if (!(*this)[v]) continue;
    if (!s.empty()) s += ',';
    s += vulnerability_name(v);
    s += *(*this)[v] ? "=1" : "=0";
  }
  return s.empty() ? "-" : s;
}

Labels Labels::parse(std::string_view text) {
  Labels labels;
  if (text == "-" || text.empty()) return labels;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t comma = text.find(',', pos);
    if (comma == std::string_view::npos) comma = text.size();
    std::string_view item = text.substr(pos, comma - pos);
    pos = comma + 1;
    while (!item.empty() && std::isspace(static_cast<unsigned char>(item.front()))) item.remove_prefix(1);
    while (!item.empty() && std::isspace(static_cast<unsigned char>(item.back()))) item.remove_suffix(1);
    if (item.empty()) continue;
    const auto eq = item.find('=');
    const auto v = parse_vulnerability(item.substr(0, eq));
    const std::string_view val = eq == std::string_view::npos ? "" : item.substr(eq + 1);
    if (!v || (val != "0" && val != "1")) throw Error(ErrorKind::InvalidArgument, "bad label entry: " + std::string(item));
    labels[*v] = val == "1";
  }
  return labels;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void atomic_write(const fs::path& path, const std::string& bytes) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::IoError, "cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error(ErrorKind::IoError, "short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorKind::IoError, "rename to " + path.string() + " failed: " + ec.message());
}

void write_record_file(const fs::path& path, const StoreRecord& record) {
  check_name(record.name());
  const Matrix& F = record.features.F;
  detail::ByteWriter w;
  w.raw(kRecordMagic);
  w.u32(static_cast<std::uint32_t>(F.rows()));
  w.u32(static_cast<std::uint32_t>(F.cols()));
  for (Eigen::Index r = 0; r < F.rows(); ++r)
    for (Eigen::Index c = 0; c < F.cols(); ++c) w.f64(F(r, c));
  w.str(record.name());
  std::uint8_t present = 0, value = 0;
  for (std::size_t i = 0; i < record.labels.values.size(); ++i) {
    if (record.labels.values[i]) {
      present |= static_cast<std::uint8_t>(1u << i);
      if (*record.labels.values[i]) value |= static_cast<std::uint8_t>(1u << i);
    }
  }
  w.u8(present);
  w.u8(value);
  w.u8(record.source_path ? 1 : 0);
  w.str(record.source_path.value_or(""));
  w.u8(record.features.no_comments ? 1 : 0);
  w.raw(kFooterMagic);
  atomic_write(path, w.bytes());
}

StoreRecord read_record_file(const fs::path& path) {
  const std::string bytes = read_file(path);
  detail::ByteReader r(bytes, path.string());
  r.expect(kRecordMagic);
  const std::uint32_t rows = r.u32();
  const std::uint32_t cols = r.u32();
  if (static_cast<std::uint64_t>(rows) * cols * 8 > r.remaining()) r.fail("dimension header exceeds file size");
  StoreRecord rec;
  rec.features.F.resize(rows, cols);
  for (std::uint32_t i = 0; i < rows; ++i)
    for (std::uint32_t j = 0; j < cols; ++j) rec.features.F(i, j) = r.f64();
  rec.features.contract_name = r.str();
  const std::uint8_t present = r.u8();
  const std::uint8_t value = r.u8();
  for (std::size_t i = 0; i < rec.labels.values.size(); ++i)
    if (present & (1u << i)) rec.labels.values[i] = (value & (1u << i)) != 0;
  const bool has_source = r.u8() != 0;
  std::string source = r.str();
  if (has_source) rec.source_path = std::move(source);
  rec.features.no_comments = r.u8() != 0;
  r.expect(kFooterMagic);
  if (!r.at_end()) r.fail("trailing bytes");
  return rec;
}

std::string FeatureStore::record_file_name(std::string_view contract_name) {
  std::string s;
  for (char c : contract_name) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '.' || c == '_' || c == '-';
    s.push_back(ok ? c : '_');
  }
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a(contract_name)));
  return s + "-" + std::string(hash, 8) + ".rec";
}

FeatureStore FeatureStore::open(const fs::path& root, bool create) {
  std::error_code ec;
  if (!fs::exists(root)) {
    if (!create) throw Error(ErrorKind::NotFound, "store directory " + root.string() + " does not exist");
    fs::create_directories(root / "records", ec);
    if (ec) throw Error(ErrorKind::IoError, "cannot create store " + root.string() + ": " + ec.message());
  } else if (!fs::is_directory(root)) {
    throw Error(ErrorKind::IoError, root.string() + " is not a directory");
  } else {
    fs::create_directories(root / "records", ec);
  }
  FeatureStore store(root);
  if (fs::exists(root / kManifestName)) {
    store.load_manifest();
  } else if (create) {
    store.write_manifest();
  }
  return store;
}

void FeatureStore::load_manifest() {
  index_.clear();
  std::istringstream in(read_file(root_ / kManifestName));
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    if (t2 == std::string::npos)
      throw Error(ErrorKind::CorruptFile, (root_ / kManifestName).string() + ": malformed line " + std::to_string(lineno));
    index_[line.substr(0, t1)] = Entry{line.substr(t1 + 1, t2 - t1 - 1), line.substr(t2 + 1)};
  }
}

void FeatureStore::write_manifest() const {
  std::string out;
  for (const auto& [name, e] : index_) out += name + "\t" + e.file + "\t" + e.labels + "\n";
  atomic_write(root_ / kManifestName, out);
}

fs::path FeatureStore::record_path(std::string_view name) const {
  auto it = index_.find(name);
  return root_ / "records" / (it != index_.end() ? it->second.file : record_file_name(name));
}

void FeatureStore::put(const StoreRecord& record, bool overwrite) {
  check_name(record.name());
  if (!overwrite && contains(record.name()))
    throw Error(ErrorKind::Duplicate, "contract " + record.name() + " already in store");
  const std::string file = record_file_name(record.name());
  write_record_file(root_ / "records" / file, record);
  index_[record.name()] = Entry{file, record.labels.to_string()};
  write_manifest();
}

std::optional<StoreRecord> FeatureStore::find(std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end()) return std::nullopt;
  return read_record_file(root_ / "records" / it->second.file);
}

StoreRecord FeatureStore::get(std::string_view name) const {
  auto rec = find(name);
  if (!rec) throw Error(ErrorKind::NotFound, "contract " + std::string(name) + " not in store");
  return std::move(*rec);
}

std::vector<StoreRecord> FeatureStore::scan() const {
  std::vector<StoreRecord> out;
  out.reserve(index_.size());
  for (const auto& [name, e] : index_) out.push_back(read_record_file(root_ / "records" / e.file));
  return out;
}

std::vector<std::string> FeatureStore::names() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : index_) out.push_back(name);
  return out;
}

void FeatureStore::set_labels(std::string_view name, const Labels& labels) {
  StoreRecord rec = get(name);
  rec.labels = labels;
  put(rec, true);
}

std::size_t FeatureStore::rebuild_manifest() {
  index_.clear();
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(root_ / "records"))
    if (entry.is_regular_file() && entry.path().extension() == ".rec") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    const StoreRecord rec = read_record_file(f);
    index_[rec.name()] = Entry{f.filename().string(), rec.labels.to_string()};
  }
  write_manifest();
  return index_.size();
}

}  // namespace multicfv::store
