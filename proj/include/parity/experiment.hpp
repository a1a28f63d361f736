#pragma once

#include "parity/audit.hpp"
#include "parity/config.hpp"
#include "parity/train.hpp"

namespace parity {

struct ExperimentData {
  GroupedPanel panel;
  WindowSplit windows;
  Date split_date{};
  std::vector<UnitRecord> audited_units;  // units that kept their windows
};

/// Reads the panel CSVs named in the config, or generates the synthetic
/// panel when none are given, then windows it. `config` must be resolved.
ExperimentData prepare_data(const ExperimentConfig& config);

/// Trains with the config's model and de-biasing settings; the result carries
/// the method name and config_hash(config).
TrainedModel run_training(const ExperimentConfig& config, const ExperimentData& data,
                          const TrainOptions& options = {});

/// Audits `model` on the test windows of `data`. Throws Error(Dimension) when
/// the checkpoint's window shape differs from the data's.
ParityReport run_audit(const TrainedModel& model, const ExperimentData& data);

}  // namespace parity
