#include "parity/audit.hpp"

#include "parity/csv.hpp"
#include "parity/error.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <unordered_map>

#include <json.hpp>

namespace parity {

MajorityLabel majority_label(const UnitRecord& unit) {
  MajorityLabel m;
  m.unit_id = unit.unit_id;
  m.label = dominant_group(unit.demo_fractions);
  m.protected_group = m.label != Group::White;
  return m;
}

std::map<Group, std::size_t> label_counts(std::span<const UnitRecord> units) {
  std::map<Group, std::size_t> counts;
  for (Group g : kGroups) counts[g] = 0;
  for (const auto& u : units) ++counts[majority_label(u).label];
  return counts;
}

AggregatedErrors aggregate_norm_errors(std::span<const WindowSample> windows,
                                       std::span<const QuantileForecast> forecasts,
                                       std::span<const double> quantiles, std::span<const UnitRecord> units) {
  if (windows.size() != forecasts.size()) {
    throw Error(ErrorKind::Dimension, "aggregate_norm_errors: " + std::to_string(forecasts.size()) +
                                          " forecasts for " + std::to_string(windows.size()) + " windows");
  }
  std::unordered_map<std::string, std::pair<double, std::size_t>> sums;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const WindowSample& w = windows[i];
    const QuantileForecast& f = forecasts[i];
    if (f.unit_id != w.unit_id || f.horizon != w.horizon() || f.n_quantiles != quantiles.size()) {
      throw Error(ErrorKind::Dimension, "forecast " + std::to_string(i) + " does not match its window");
    }
    auto& [total, rows] = sums[w.unit_id];
    for (std::size_t h = 0; h < w.horizon(); ++h) {
      total += pbl_avg(quantiles, w.horizon_targets[h], f.lookahead(h));
      ++rows;
    }
  }

  AggregatedErrors out;
  for (const auto& unit : units) {
    auto it = sums.find(unit.unit_id);
    if (it == sums.end()) {
      throw Error(ErrorKind::MissingUnit, "unit '" + unit.unit_id + "' has no test forecasts");
    }
    UnitError e;
    e.unit_id = unit.unit_id;
    e.label = majority_label(unit).label;
    e.population = unit.population;
    e.rows = it->second.second;
    e.mean_pbl = it->second.first / static_cast<double>(e.rows);
    e.norm_pbl = norm_pbl(e.mean_pbl, unit.population);
    const std::string key(group_name(e.label));
    out.norm_pbl_by_group[key].push_back(e.norm_pbl);
    out.pbl_by_group[key].push_back(e.mean_pbl);
    out.units.push_back(std::move(e));
  }
  return out;
}

HardParity hard_parity(const GroupedSamples& grouped) {
  HardParity out;
  out.anova = one_way_anova(grouped);
  out.tukey = tukey_hsd(grouped, AlphaLevels{0.01, 0.1});
  return out;
}

namespace {

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace

SoftParity soft_parity(const GroupedSamples& grouped) {
  const std::string white(group_name(Group::White));
  auto it = grouped.find(white);
  if (it == grouped.end() || it->second.empty()) {
    throw Error(ErrorKind::Degenerate, "soft_parity: no White-majority units");
  }
  const double reference = mean_of(it->second);
  if (reference == 0.0) throw Error(ErrorKind::Degenerate, "soft_parity: White mean error is 0");
  SoftParity out;
  for (const auto& [label, values] : grouped) {
    if (label == white || values.empty()) continue;
    const double aer = mean_of(values) / reference;
    out.aer[label] = aer;
    out.distance[label] = std::fabs(1.0 - aer);
  }
  return out;
}

ParityReport build_report(const std::string& method, const AggregatedErrors& errors) {
  ParityReport r;
  r.method = method;
  const HardParity hard = hard_parity(errors.norm_pbl_by_group);
  r.anova = hard.anova;
  r.tukey = hard.tukey;
  const SoftParity soft = soft_parity(errors.norm_pbl_by_group);
  r.aer = soft.aer;
  r.distance = soft.distance;
  for (const auto& [label, values] : errors.norm_pbl_by_group) {
    r.mean_norm_pbl_per_group[label] = mean_of(values);
    r.units_per_group[label] = values.size();
  }
  for (const auto& [label, values] : errors.pbl_by_group) r.mean_pbl_per_group[label] = mean_of(values);
  r.units = errors.units;
  return r;
}

ParityReport audit_model(const TrainedModel& model, std::span<const WindowSample> test_windows,
                         std::span<const UnitRecord> units) {
  const auto forecasts = forward(model, test_windows);
  ParityReport r = build_report(model.method, aggregate_norm_errors(test_windows, forecasts, model.config.quantiles, units));
  r.config_hash = model.config_hash;
  r.seed = model.config.seed;
  return r;
}

namespace {

using nlohmann::json;

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double read_number(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>();
}

}  // namespace

std::string report_json(const ParityReport& r) {
  json j;
  j["method"] = r.method;
  j["anova"] = {{"f_stat", number(r.anova.f_stat)},
                {"df_between", r.anova.df_between},
                {"df_within", r.anova.df_within},
                {"p_value", r.anova.p_value}};
  j["tukey_pairs"] = json::array();
  for (const auto& p : r.tukey) {
    j["tukey_pairs"].push_back({{"group1", p.group1},
                                {"group2", p.group2},
                                {"mean_diff", p.mean_diff},
                                {"q_stat", number(p.q_stat)},
                                {"p_adj", p.p_adj},
                                {"significant_01", p.significant_01},
                                {"significant_10", p.significant_10}});
  }
  j["aer"] = r.aer;
  j["distance"] = r.distance;
  j["mean_pbl_per_group"] = r.mean_pbl_per_group;
  j["mean_norm_pbl_per_group"] = r.mean_norm_pbl_per_group;
  j["units_per_group"] = r.units_per_group;
  j["config_hash"] = r.config_hash;
  j["seed"] = r.seed;
  return j.dump(2);
}

ParityReport report_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    ParityReport r;
    r.method = j.at("method").get<std::string>();
    const json& a = j.at("anova");
    r.anova.f_stat = read_number(a.at("f_stat"));
    r.anova.df_between = a.at("df_between").get<int>();
    r.anova.df_within = a.at("df_within").get<int>();
    r.anova.p_value = a.at("p_value").get<double>();
    for (const auto& p : j.at("tukey_pairs")) {
      TukeyPair t;
      t.group1 = p.at("group1").get<std::string>();
      t.group2 = p.at("group2").get<std::string>();
      t.mean_diff = p.at("mean_diff").get<double>();
      t.q_stat = read_number(p.at("q_stat"));
      t.p_adj = p.at("p_adj").get<double>();
      t.significant_01 = p.at("significant_01").get<bool>();
      t.significant_10 = p.at("significant_10").get<bool>();
      r.tukey.push_back(std::move(t));
    }
    r.aer = j.at("aer").get<std::map<std::string, double>>();
    r.distance = j.at("distance").get<std::map<std::string, double>>();
    r.mean_pbl_per_group = j.at("mean_pbl_per_group").get<std::map<std::string, double>>();
    r.mean_norm_pbl_per_group = j.value("mean_norm_pbl_per_group", std::map<std::string, double>{});
    r.units_per_group = j.value("units_per_group", std::map<std::string, std::size_t>{});
    r.config_hash = j.at("config_hash").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("report: ") + e.what());
  }
}

namespace {

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + p.string());
  return out;
}

std::string stars(double p) { return p < 0.01 ? "**" : (p < 0.1 ? "*" : ""); }

std::string fmt(double v) { return std::isfinite(v) ? csv::format(v) : (v > 0 ? "inf" : "nan"); }

}  // namespace

void emit_report(std::span<const ParityReport> reports, const std::filesystem::path& out_dir) {
  if (reports.empty()) throw Error(ErrorKind::Config, "emit_report: no reports");
  std::set<std::string> names;
  for (const auto& r : reports) {
    if (!names.insert(r.method).second) throw Error(ErrorKind::Config, "emit_report: duplicate method " + r.method);
  }
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create " + out_dir.string() + ": " + ec.message());

  {
    auto out = open_out(out_dir / "anova.csv");
    out << "method,f_stat,df_between,df_within,p_value,significance\n";
    for (const auto& r : reports) {
      out << r.method << ',' << fmt(r.anova.f_stat) << ',' << r.anova.df_between << ',' << r.anova.df_within << ','
          << fmt(r.anova.p_value) << ',' << stars(r.anova.p_value) << '\n';
    }
  }
  {
    // Pair rows in sorted label order, one column block per method.
    std::vector<std::pair<std::string, std::string>> pairs;
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& r : reports) {
      for (const auto& p : r.tukey) {
        if (seen.insert({p.group1, p.group2}).second) pairs.emplace_back(p.group1, p.group2);
      }
    }
    std::sort(pairs.begin(), pairs.end());
    auto out = open_out(out_dir / "tukey.csv");
    out << "group1,group2";
    for (const auto& r : reports) out << ',' << r.method << "_mean_diff," << r.method << "_p_adj," << r.method << "_sig";
    out << '\n';
    for (const auto& [g1, g2] : pairs) {
      out << g1 << ',' << g2;
      for (const auto& r : reports) {
        auto it = std::find_if(r.tukey.begin(), r.tukey.end(),
                               [&](const TukeyPair& p) { return p.group1 == g1 && p.group2 == g2; });
        if (it == r.tukey.end()) {
          out << ",,,";
        } else {
          out << ',' << fmt(it->mean_diff) << ',' << fmt(it->p_adj) << ',' << stars(it->p_adj);
        }
      }
      out << '\n';
    }
  }
  auto group_rows = [&](bool protected_only) {
    std::vector<std::string> rows;
    for (Group g : kGroups) {
      if (protected_only && g == Group::White) continue;
      rows.emplace_back(group_name(g));
    }
    return rows;
  };
  auto cell = [](const std::map<std::string, double>& m, const std::string& key) {
    auto it = m.find(key);
    return it == m.end() ? std::string() : fmt(it->second);
  };
  {
    auto out = open_out(out_dir / "soft_parity.csv");
    out << "group";
    for (const auto& r : reports) out << ',' << r.method << "_aer," << r.method << "_distance";
    out << '\n';
    for (const auto& g : group_rows(true)) {
      out << g;
      for (const auto& r : reports) out << ',' << cell(r.aer, g) << ',' << cell(r.distance, g);
      out << '\n';
    }
  }
  {
    auto out = open_out(out_dir / "mean_pbl.csv");
    out << "group";
    for (const auto& r : reports) out << ',' << r.method << "_mean_pbl," << r.method << "_mean_norm_pbl";
    out << '\n';
    for (const auto& g : group_rows(false)) {
      out << g;
      for (const auto& r : reports) out << ',' << cell(r.mean_pbl_per_group, g) << ',' << cell(r.mean_norm_pbl_per_group, g);
      out << '\n';
    }
  }
  for (const auto& r : reports) {
    std::filesystem::create_directories(out_dir / r.method, ec);
    if (ec) throw Error(ErrorKind::Io, "cannot create " + (out_dir / r.method).string());
    auto out = open_out(out_dir / r.method / "report.json");
    out << report_json(r) << '\n';
    if (r.units.empty()) continue;
    auto units = open_out(out_dir / r.method / "unit_errors.csv");
    units << "unit_id,label,population,rows,mean_pbl,norm_pbl\n";
    for (const auto& u : r.units) {
      units << u.unit_id << ',' << group_name(u.label) << ',' << u.population << ',' << u.rows << ','
            << fmt(u.mean_pbl) << ',' << fmt(u.norm_pbl) << '\n';
    }
  }
}

}  // namespace parity
