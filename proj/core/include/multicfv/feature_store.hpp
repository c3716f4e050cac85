#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "multicfv/fusion.hpp"

namespace multicfv::store {

enum class Vulnerability : std::uint8_t { Reentrancy, AccessControl, ExternalCall, Delegatecall };

inline constexpr std::array<Vulnerability, 4> kVulnerabilities = {
    Vulnerability::Reentrancy, Vulnerability::AccessControl, Vulnerability::ExternalCall, Vulnerability::Delegatecall};

std::string_view vulnerability_name(Vulnerability v);
std::optional<Vulnerability> parse_vulnerability(std::string_view name);

/// Per-vulnerability ground truth; unset entries are unlabeled.
struct Labels {
  std::array<std::optional<bool>, 4> values{};

  std::optional<bool>& operator[](Vulnerability v) { return values[static_cast<std::size_t>(v)]; }
  const std::optional<bool>& operator[](Vulnerability v) const { return values[static_cast<std::size_t>(v)]; }
  bool any() const;

  /// "reentrancy=1,delegatecall=0", or "-" when nothing is labeled.
  std::string to_string() const;
  static Labels parse(std::string_view text);
  bool operator==(const Labels&) const = default;
};

struct StoreRecord {
  fusion::ContractFeatures features;
  Labels labels;
  std::optional<std::string> source_path;

  const std::string& name() const { return features.contract_name; }
};

void write_record_file(const std::filesystem::path& path, const StoreRecord& record);
StoreRecord read_record_file(const std::filesystem::path& path);

/// Directory of one record file per contract plus a `manifest.tsv` index
/// (`name<TAB>file<TAB>labels`). Every file is replaced by write-then-rename,
/// and the manifest is rewritten after the record, so a put is either fully
/// visible or absent after reopen. Single writer, many readers.
class FeatureStore {
 public:
  static constexpr const char* kManifestName = "manifest.tsv";

  /// Opens (and with create, initializes) a store directory.
  static FeatureStore open(const std::filesystem::path& root, bool create = true);

  void put(const StoreRecord& record, bool overwrite = false);
  std::optional<StoreRecord> find(std::string_view name) const;
  /// Throws Error(NotFound).
  StoreRecord get(std::string_view name) const;
  bool contains(std::string_view name) const { return index_.count(std::string(name)) > 0; }

  /// All records, contract name ascending.
  std::vector<StoreRecord> scan() const;
  std::vector<std::string> names() const;
  std::size_t size() const { return index_.size(); }
  bool empty() const { return index_.empty(); }

  void set_labels(std::string_view name, const Labels& labels);
  /// Re-derives the manifest from the record files on disk.
  std::size_t rebuild_manifest();

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path record_path(std::string_view name) const;

  static std::string record_file_name(std::string_view contract_name);

 private:
  struct Entry {
    std::string file;
    std::string labels;
  };

  explicit FeatureStore(std::filesystem::path root) : root_(std::move(root)) {}
  void load_manifest();
  void write_manifest() const;

  std::filesystem::path root_;
  std::map<std::string, Entry, std::less<>> index_;
};

/// Writes bytes to path via a sibling temp file and rename.
void atomic_write(const std::filesystem::path& path, const std::string& bytes);
std::string read_file(const std::filesystem::path& path);

}  // namespace multicfv::store
