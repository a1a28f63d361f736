#include "parity/experiment.hpp"

#include "parity/error.hpp"

#include <algorithm>

namespace parity {

ExperimentData prepare_data(const ExperimentConfig& config) {
  ExperimentData data;
  if (config.cases_csv.empty()) {
    data.panel = generate(config.synth);
  } else {
    PanelFiles files{config.cases_csv, config.demographics_csv, std::nullopt};
    if (!config.mobility_csv.empty()) files.mobility = config.mobility_csv;
    data.panel = ingest_panel(files);
  }
  if (data.panel.size() == 0) throw Error(ErrorKind::EmptyInput, "panel has no units");
  Date last = data.panel.series.front().last_date();
  for (const auto& s : data.panel.series) last = std::max(last, s.last_date());
  data.split_date = split_date_for(config.split, last);
  data.windows = make_windows(data.panel, config.model.encoder_len, config.model.horizon, data.split_date);
  for (const auto& unit : data.panel.units) {
    const auto& ex = data.windows.excluded_units;
    if (std::find(ex.begin(), ex.end(), unit.unit_id) == ex.end()) data.audited_units.push_back(unit);
  }
  return data;
}

TrainedModel run_training(const ExperimentConfig& config, const ExperimentData& data, const TrainOptions& options) {
  TrainedModel model = train(data.windows.train, config.model, config.debias, options);
  model.method = std::string(debias_name(config.debias.kind));
  model.config_hash = config_hash(config);
  return model;
}

ParityReport run_audit(const TrainedModel& model, const ExperimentData& data) {
  if (data.windows.test.empty()) throw Error(ErrorKind::EmptyInput, "no test windows after the split date");
  const WindowSample& w = data.windows.test.front();
  if (w.encoder_len() != model.config.encoder_len || w.horizon() != model.config.horizon) {
    throw Error(ErrorKind::Dimension,
                "checkpoint expects encoder_len=" + std::to_string(model.config.encoder_len) +
                    " horizon=" + std::to_string(model.config.horizon) + ", panel windows have " +
                    std::to_string(w.encoder_len()) + " and " + std::to_string(w.horizon()));
  }
  return audit_model(model, data.windows.test, data.audited_units);
}

}  // namespace parity
