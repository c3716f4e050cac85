#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "multicfv/pipeline.hpp"
#include "multicfv/trainer.hpp"

namespace multicfv::config {

/// `key = value` lines grouped under `[section]` headers. `#` and `;` start
/// comments; values may be double-quoted. Keys are returned as "section.key".
std::map<std::string, std::string> parse_ini(std::string_view text, std::string_view label = "<config>");

enum class TrainMode { Head, EndToEnd };

struct PipelineConfig {
  pipeline::PipelineSettings pipeline;
  std::optional<double> gamma;  // default: 1 / flattened dimension
  double clone_threshold = 0.95;
  double verify_threshold = 0.95;
  train::TrainConfig train;
  TrainMode train_mode = TrainMode::Head;
  std::optional<std::filesystem::path> train_config_path;

  double effective_gamma() const;
  void validate() const;
};

/// Unknown sections or keys, unparsable values and missing referenced files
/// throw Error(ConfigError). Relative paths resolve against the file's directory.
PipelineConfig load(const std::filesystem::path& path);
PipelineConfig parse(std::string_view text, const std::filesystem::path& base_dir = {}, std::string_view label = "<config>");
/// Applies `[train]` keys from a separate file on top of cfg.
void merge_train_file(PipelineConfig& cfg, const std::filesystem::path& path);

/// Applies a global seed override to every seeded component.
void apply_seed(PipelineConfig& cfg, std::uint64_t seed);

}  // namespace multicfv::config
