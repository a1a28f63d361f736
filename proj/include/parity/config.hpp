#pragma once

#include "parity/debias.hpp"
#include "parity/model.hpp"
#include "parity/synth.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

namespace parity {

struct SplitConfig {
  std::optional<Date> split_date;  // first test target date
  std::size_t test_days = 21;      // used when split_date is unset
};

struct ExperimentConfig {
  std::uint64_t seed = 1;                   // model seed
  std::optional<std::uint64_t> synth_seed;  // defaults to seed
  SynthConfig synth;
  ModelConfig model;
  DebiasMethod debias;
  SplitConfig split;
  std::string cases_csv;         // empty: generate the synthetic panel in memory
  std::string demographics_csv;
  std::string mobility_csv;      // optional
  std::string out_dir = "out";
};

/// Flat `key = value` lines; `#` starts a comment. Unknown or repeated keys
/// and malformed values throw Error(Config) naming the key and line.
ExperimentConfig parse_config(std::string_view text, std::string_view origin = "config");
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical text form listing every key in a fixed order. Parsing it back
/// yields the same config.
std::string to_text(const ExperimentConfig& config);

/// 16 hex digits, FNV-1a 64 over to_text() with out_dir left empty.
std::string config_hash(const ExperimentConfig& config);

/// Applies seed/synth_seed to the nested configs and validates them.
ExperimentConfig resolve(ExperimentConfig config);

/// The split date for a panel ending on `last`.
Date split_date_for(const SplitConfig& split, Date last);

}  // namespace parity
