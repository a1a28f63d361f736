#include "parity/csv.hpp"
#include "parity/error.hpp"
#include "parity/experiment.hpp"
#include "parity/log.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#ifndef PARITY_VERSION
#define PARITY_VERSION "0.0.0-unknown"
#endif

namespace fs = std::filesystem;
using namespace parity;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string method;
};

ExperimentConfig load(const CommonArgs& args) {
  ExperimentConfig config = args.config_path.empty() ? ExperimentConfig{} : load_config(args.config_path);
  if (args.seed) config.seed = *args.seed;
  if (!args.method.empty()) config.debias.kind = parse_debias(args.method);
  if (!args.out.empty()) config.out_dir = args.out;
  return resolve(config);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw Error(ErrorKind::Io, "cannot write " + path.string());
}

fs::path make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());
  return dir;
}

void write_run_info(const fs::path& dir, const ExperimentConfig& config) {
  write_text(dir / "config.txt", to_text(config));
  write_text(dir / "run_info.txt", "version = " PARITY_VERSION "\nseed = " + std::to_string(config.seed) +
                                       "\nsynth_seed = " + std::to_string(*config.synth_seed) +
                                       "\nconfig_hash = " + config_hash(config) + "\n");
}

int cmd_synth(const CommonArgs& args) {
  const ExperimentConfig config = load(args);
  const fs::path dir = make_dir(config.out_dir);
  const GroupedPanel panel = generate(config.synth);
  write_panel(panel, PanelFiles{dir / "cases.csv", dir / "demographics.csv", dir / "mobility.csv"});
  write_run_info(dir, config);
  std::cout << "wrote " << panel.size() << " units x " << config.synth.n_days << " days to " << dir.string() << '\n';
  return 0;
}

int cmd_train(const CommonArgs& args) {
  const ExperimentConfig config = load(args);
  const ExperimentData data = prepare_data(config);
  const std::string method(debias_name(config.debias.kind));
  const fs::path dir = make_dir(fs::path(config.out_dir) / method);

  std::ofstream diag(dir / "diagnostics.csv", std::ios::binary);
  if (!diag) throw Error(ErrorKind::Io, "cannot write " + (dir / "diagnostics.csv").string());
  write_diagnostics_header(diag);

  std::ostringstream batches;
  batches << "epoch,batch,objective\n";
  TrainOptions options;
  options.diagnostics_log = &diag;
  options.observer = [&](const BatchRecord& r) {
    batches << r.epoch << ',' << r.batch << ',' << csv::format(r.objective) << '\n';
  };
  const TrainedModel model = run_training(config, data, options);
  diag.close();

  save_checkpoint(model, dir / "checkpoint.json");
  std::ostringstream history;
  history << "epoch,mean_pbl\n";
  for (std::size_t e = 0; e < model.loss_history.size(); ++e) {
    history << e << ',' << csv::format(model.loss_history[e]) << '\n';
  }
  write_text(dir / "training_loss.csv", history.str());
  write_text(dir / "batches.csv", batches.str());
  write_run_info(dir, config);
  std::cout << method << ": " << data.windows.train.size() << " training windows, mean pbl "
            << csv::format(model.loss_history.front()) << " -> " << csv::format(model.loss_history.back()) << '\n';
  return 0;
}

int cmd_audit(const CommonArgs& args, const std::vector<std::string>& checkpoints) {
  const ExperimentConfig config = load(args);
  const ExperimentData data = prepare_data(config);
  std::vector<ParityReport> reports;
  for (const auto& path : checkpoints) reports.push_back(run_audit(load_checkpoint(path), data));
  const fs::path dir = make_dir(config.out_dir);
  emit_report(reports, dir);
  write_run_info(dir, config);
  for (const auto& r : reports) {
    std::cout << r.method << ": anova p=" << csv::format(r.anova.p_value);
    double total = 0.0;
    for (const auto& [label, d] : r.distance) total += d;
    std::cout << " sum|1-AER|=" << csv::format(total) << '\n';
  }
  return 0;
}

int cmd_report(const CommonArgs& args, const std::vector<std::string>& inputs) {
  std::vector<ParityReport> reports;
  for (const auto& path : inputs) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot read " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    reports.push_back(report_from_json(buf.str()));
  }
  const fs::path dir = make_dir(args.out.empty() ? "report" : args.out);
  emit_report(reports, dir);
  std::cout << "wrote " << reports.size() << " report(s) to " << dir.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  log::init_from_env();
  CLI::App app{"Fairness-aware multi-horizon quantile forecasting"};
  app.set_version_flag("--version", PARITY_VERSION);
  app.require_subcommand(1);

  CommonArgs args;
  std::vector<std::string> positional;
  auto add_common = [&](CLI::App* sub, bool with_method) {
    sub->add_option("--config", args.config_path, "flat key = value experiment config")->check(CLI::ExistingFile);
    sub->add_option("--out", args.out, "output directory");
    sub->add_option("--seed", args.seed, "overrides the config seed");
    if (with_method) {
      sub->add_option("--method", args.method, "none, demopts, individual, group or sufficiency");
    }
  };
  auto* synth = app.add_subcommand("synth", "generate the synthetic panel CSVs");
  add_common(synth, false);
  auto* train = app.add_subcommand("train", "train one model and write its checkpoint");
  add_common(train, true);
  auto* audit = app.add_subcommand("audit", "audit checkpoints on the test windows");
  add_common(audit, false);
  audit->add_option("checkpoints", positional, "checkpoint files")->required()->check(CLI::ExistingFile);
  auto* report = app.add_subcommand("report", "combine report.json files into tables");
  report->add_option("--out", args.out, "output directory");
  report->add_option("reports", positional, "report.json files")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    std::cerr << "error: usage: " << msg << '\n';
    return 64;
  }

  try {
    if (*synth) return cmd_synth(args);
    if (*train) return cmd_train(args);
    if (*audit) return cmd_audit(args, positional);
    return cmd_report(args, positional);
  } catch (const Error& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    std::cerr << "error: " << to_string(e.kind()) << ": " << msg << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << '\n';
    return 1;
  }
}
