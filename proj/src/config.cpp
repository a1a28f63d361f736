#include "parity/config.hpp"

#include "parity/csv.hpp"
#include "parity/error.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace parity {

namespace {

std::vector<std::string> split_list(std::string_view value) {
  std::vector<std::string> out;
  for (auto item : csv::split(value, ',')) out.emplace_back(csv::trim(item));
  return out;
}

double to_double(std::string_view v) {
  double x = 0.0;
  if (!csv::parse_double(v, x)) throw Error(ErrorKind::Config, "expected a number, got '" + std::string(v) + "'");
  return x;
}

bool parse_bool(std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw Error(ErrorKind::Config, "expected true or false, got '" + std::string(v) + "'");
}

std::uint64_t parse_u64(std::string_view v) {
  long long x = 0;
  if (!csv::parse_int(v, x) || x < 0) throw Error(ErrorKind::Config, "expected a non-negative integer, got '" + std::string(v) + "'");
  return static_cast<std::uint64_t>(x);
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
  return out;
}

using Setter = std::function<void(ExperimentConfig&, std::string_view)>;

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = [] {
    std::map<std::string, Setter, std::less<>> t;
    auto group_u = [](Group g) {
      return [g](ExperimentConfig& c, std::string_view v) {
        c.synth.underreport[static_cast<std::size_t>(g)] = to_double(v);
      };
    };
    t["seed"] = [](ExperimentConfig& c, std::string_view v) { c.seed = parse_u64(v); };
    t["synth_seed"] = [](ExperimentConfig& c, std::string_view v) { c.synth_seed = parse_u64(v); };
    t["n_units"] = [](ExperimentConfig& c, std::string_view v) { c.synth.n_units = parse_u64(v); };
    t["n_days"] = [](ExperimentConfig& c, std::string_view v) { c.synth.n_days = parse_u64(v); };
    t["start_date"] = [](ExperimentConfig& c, std::string_view v) { c.synth.start_date = parse_date(v); };
    t["base_rate"] = [](ExperimentConfig& c, std::string_view v) { c.synth.epidemic.base_rate = to_double(v); };
    t["wave_amplitude"] = [](ExperimentConfig& c, std::string_view v) {
      c.synth.epidemic.wave_amplitude = to_double(v);
    };
    t["wave_period_days"] = [](ExperimentConfig& c, std::string_view v) {
      c.synth.epidemic.wave_period_days = to_double(v);
    };
    t["noise_sd"] = [](ExperimentConfig& c, std::string_view v) { c.synth.epidemic.noise_sd = to_double(v); };
    t["mobility_coupling"] = [](ExperimentConfig& c, std::string_view v) {
      c.synth.mobility_coupling = to_double(v);
    };
    t["u_asian"] = group_u(Group::Asian);
    t["u_black"] = group_u(Group::Black);
    t["u_hispanic"] = group_u(Group::Hispanic);
    t["u_white"] = group_u(Group::White);
    t["encoder_len"] = [](ExperimentConfig& c, std::string_view v) { c.model.encoder_len = parse_u64(v); };
    t["horizon"] = [](ExperimentConfig& c, std::string_view v) { c.model.horizon = parse_u64(v); };
    t["quantiles"] = [](ExperimentConfig& c, std::string_view v) {
      c.model.quantiles.clear();
      for (const auto& s : split_list(v)) c.model.quantiles.push_back(to_double(s));
    };
    t["hidden_sizes"] = [](ExperimentConfig& c, std::string_view v) {
      c.model.hidden_sizes.clear();
      if (csv::trim(v).empty()) return;
      for (const auto& s : split_list(v)) c.model.hidden_sizes.push_back(parse_u64(s));
    };
    t["learning_rate"] = [](ExperimentConfig& c, std::string_view v) { c.model.learning_rate = to_double(v); };
    t["batch_size"] = [](ExperimentConfig& c, std::string_view v) { c.model.batch_size = parse_u64(v); };
    t["epochs"] = [](ExperimentConfig& c, std::string_view v) { c.model.epochs = parse_u64(v); };
    t["use_static"] = [](ExperimentConfig& c, std::string_view v) { c.model.use_static = parse_bool(v); };
    t["sort_quantiles"] = [](ExperimentConfig& c, std::string_view v) { c.model.sort_quantiles = parse_bool(v); };
    t["optimizer"] = [](ExperimentConfig& c, std::string_view v) { c.model.optimizer = parse_optimizer(v); };
    t["momentum"] = [](ExperimentConfig& c, std::string_view v) { c.model.momentum = to_double(v); };
    t["method"] = [](ExperimentConfig& c, std::string_view v) { c.debias.kind = parse_debias(v); };
    t["p_threshold"] = [](ExperimentConfig& c, std::string_view v) { c.debias.p_threshold = to_double(v); };
    t["compounding"] = [](ExperimentConfig& c, std::string_view v) { c.debias.compounding = parse_bool(v); };
    t["penalty_weight"] = [](ExperimentConfig& c, std::string_view v) {
      c.debias.penalty_weight = to_double(v);
    };
    t["split_date"] = [](ExperimentConfig& c, std::string_view v) {
      if (v.empty()) c.split.split_date.reset(); else c.split.split_date = parse_date(v);
    };
    t["test_days"] = [](ExperimentConfig& c, std::string_view v) { c.split.test_days = parse_u64(v); };
    t["cases_csv"] = [](ExperimentConfig& c, std::string_view v) { c.cases_csv = v; };
    t["demographics_csv"] = [](ExperimentConfig& c, std::string_view v) { c.demographics_csv = v; };
    t["mobility_csv"] = [](ExperimentConfig& c, std::string_view v) { c.mobility_csv = v; };
    t["out_dir"] = [](ExperimentConfig& c, std::string_view v) { c.out_dir = v; };
    return t;
  }();
  return table;
}

}  // namespace

ExperimentConfig parse_config(std::string_view text, std::string_view origin) {
  ExperimentConfig config;
  std::set<std::string> seen;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string stripped(csv::trim(line));
    if (stripped.empty()) continue;
    const std::string where = std::string(origin) + ":" + std::to_string(line_no);
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::Config, where + ": expected key = value, got '" + stripped + "'");
    }
    const std::string key(csv::trim(std::string_view(stripped).substr(0, eq)));
    const std::string value(csv::trim(std::string_view(stripped).substr(eq + 1)));
    auto it = setters().find(key);
    if (it == setters().end()) throw Error(ErrorKind::Config, where + ": unknown key '" + key + "'");
    if (!seen.insert(key).second) throw Error(ErrorKind::Config, where + ": repeated key '" + key + "'");
    try {
      it->second(config, value);
    } catch (const Error& e) {
      throw Error(ErrorKind::Config, where + ": key '" + key + "': " + e.what());
    }
  }
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot read config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.string());
}

std::string to_text(const ExperimentConfig& c) {
  std::ostringstream out;
  auto kv = [&](std::string_view k, const std::string& v) { out << k << " = " << v << '\n'; };
  auto num = [](double v) { return csv::format(v); };
  kv("seed", std::to_string(c.seed));
  kv("synth_seed", std::to_string(c.synth_seed.value_or(c.seed)));
  kv("n_units", std::to_string(c.synth.n_units));
  kv("n_days", std::to_string(c.synth.n_days));
  kv("start_date", format_date(c.synth.start_date));
  kv("base_rate", num(c.synth.epidemic.base_rate));
  kv("wave_amplitude", num(c.synth.epidemic.wave_amplitude));
  kv("wave_period_days", num(c.synth.epidemic.wave_period_days));
  kv("noise_sd", num(c.synth.epidemic.noise_sd));
  kv("mobility_coupling", num(c.synth.mobility_coupling));
  for (Group g : kGroups) {
    kv("u_" + std::string(group_column(g)), num(c.synth.underreport[static_cast<std::size_t>(g)]));
  }
  kv("encoder_len", std::to_string(c.model.encoder_len));
  kv("horizon", std::to_string(c.model.horizon));
  std::vector<std::string> items;
  for (double q : c.model.quantiles) items.push_back(num(q));
  kv("quantiles", join(items));
  items.clear();
  for (auto h : c.model.hidden_sizes) items.push_back(std::to_string(h));
  kv("hidden_sizes", join(items));
  kv("learning_rate", num(c.model.learning_rate));
  kv("batch_size", std::to_string(c.model.batch_size));
  kv("epochs", std::to_string(c.model.epochs));
  kv("use_static", c.model.use_static ? "true" : "false");
  kv("sort_quantiles", c.model.sort_quantiles ? "true" : "false");
  kv("optimizer", std::string(optimizer_name(c.model.optimizer)));
  kv("momentum", num(c.model.momentum));
  kv("method", std::string(debias_name(c.debias.kind)));
  kv("p_threshold", num(c.debias.p_threshold));
  kv("compounding", c.debias.compounding ? "true" : "false");
  kv("penalty_weight", num(c.debias.penalty_weight));
  kv("split_date", c.split.split_date ? format_date(*c.split.split_date) : "");
  kv("test_days", std::to_string(c.split.test_days));
  kv("cases_csv", c.cases_csv);
  kv("demographics_csv", c.demographics_csv);
  kv("mobility_csv", c.mobility_csv);
  kv("out_dir", c.out_dir);
  return out.str();
}

std::string config_hash(const ExperimentConfig& config) {
  ExperimentConfig keyed = config;
  keyed.out_dir.clear();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : to_text(keyed)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = kHex[h & 0xF];
  return out;
}

ExperimentConfig resolve(ExperimentConfig config) {
  config.synth_seed = config.synth_seed.value_or(config.seed);
  config.synth.seed = *config.synth_seed;
  config.model.seed = config.seed;
  validate(config.synth);
  validate(config.model);
  validate(config.debias);
  if (!config.split.split_date && config.split.test_days == 0) {
    throw Error(ErrorKind::Config, "test_days must be positive when split_date is unset");
  }
  if (config.cases_csv.empty() != config.demographics_csv.empty()) {
    throw Error(ErrorKind::Config, "cases_csv and demographics_csv must be given together");
  }
  return config;
}

Date split_date_for(const SplitConfig& split, Date last) {
  if (split.split_date) return *split.split_date;
  return last - std::chrono::days{static_cast<long>(split.test_days) - 1};
}

}  // namespace parity
