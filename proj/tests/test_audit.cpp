#include "parity/audit.hpp"
#include "parity/error.hpp"
#include "parity/rng.hpp"
#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace parity;
using test_support::read_file;

namespace {

const std::vector<double> kQ{0.1, 0.5, 0.9};

UnitRecord unit(const std::string& id, std::int64_t pop, Group major) {
  DemoFractions f{0.1, 0.1, 0.1, 0.1};
  f[static_cast<std::size_t>(major)] = 0.7;
  return {id, pop, f};
}

WindowSample window(const UnitRecord& u, std::vector<double> targets) {
  WindowSample w;
  w.unit_id = u.unit_id;
  w.population = u.population;
  w.demo = u.demo_fractions;
  w.encoder_target.assign(3, 0.0);
  w.encoder_exog.assign(3, 0.0);
  w.horizon_targets = std::move(targets);
  return w;
}

QuantileForecast forecast(const WindowSample& w, double offset) {
  QuantileForecast f;
  f.unit_id = w.unit_id;
  f.horizon = w.horizon();
  f.n_quantiles = kQ.size();
  for (double y : w.horizon_targets) {
    for (double q : kQ) f.values.push_back(y + offset + (q - 0.5) * 2.0);
  }
  return f;
}

struct Fixture {
  std::vector<UnitRecord> units;
  std::vector<WindowSample> windows;
  std::vector<QuantileForecast> forecasts;
};

// Two windows per unit, error offset grows with the group index.
Fixture fixture(std::uint64_t seed = 1) {
  Rng rng(seed);
  Fixture f;
  int id = 0;
  for (Group g : kGroups) {
    for (int k = 0; k < 4; ++k) {
      f.units.push_back(unit("u" + std::to_string(id++), 1000 + static_cast<std::int64_t>(rng.below(9000)), g));
    }
  }
  for (const auto& u : f.units) {
    for (int k = 0; k < 2; ++k) {
      f.windows.push_back(window(u, {rng.uniform(10, 50), rng.uniform(10, 50)}));
      const double offset = 1.0 + static_cast<double>(dominant_group(u.demo_fractions)) + rng.normal(0.0, 0.3);
      f.forecasts.push_back(forecast(f.windows.back(), offset));
    }
  }
  return f;
}

}  // namespace

TEST_CASE("majority labels are argmax and scale invariant") {
  const UnitRecord u{"x", 10, {0.2, 0.45, 0.3, 0.05}};
  CHECK(majority_label(u).label == Group::Black);
  CHECK(majority_label(u).protected_group);
  for (double c : {0.001, 0.5, 3.0, 1e6}) {
    UnitRecord scaled = u;
    for (double& x : scaled.demo_fractions) x *= c;
    CHECK(majority_label(scaled).label == Group::Black);
  }
  CHECK_FALSE(majority_label(unit("w", 5, Group::White)).protected_group);
  const std::vector<UnitRecord> units{unit("a", 1, Group::Asian), unit("b", 1, Group::White),
                                      unit("c", 1, Group::White)};
  const auto counts = label_counts(units);
  CHECK(counts.at(Group::Asian) == 1);
  CHECK(counts.at(Group::Black) == 0);
  CHECK(counts.at(Group::White) == 2);
}

TEST_CASE("aggregation averages rows per unit before normalizing") {
  const auto u = unit("solo", 2000, Group::Hispanic);
  std::vector<WindowSample> w{window(u, {10.0, 20.0}), window(u, {30.0, 40.0})};
  std::vector<QuantileForecast> f{forecast(w[0], 2.0), forecast(w[1], -1.0)};
  const auto agg = aggregate_norm_errors(w, f, kQ, std::vector<UnitRecord>{u});
  // offset +2: preds y+1.2, y+2, y+2.8 -> (0.9*1.2 + 0.5*2 + 0.1*2.8)/3 = 2.36/3
  // offset -1: preds y-1.8, y-1, y-0.2 -> (0.1*1.8 + 0.5*1 + 0.9*0.2)/3 = 0.86/3
  const double expect = (2.36 / 3 * 2 + 0.86 / 3 * 2) / 4.0;
  REQUIRE(agg.units.size() == 1);
  CHECK(agg.units[0].rows == 4);
  CHECK(agg.units[0].mean_pbl == doctest::Approx(expect).epsilon(1e-12));
  CHECK(agg.units[0].norm_pbl == doctest::Approx(expect / 2.0).epsilon(1e-12));
  CHECK(agg.norm_pbl_by_group.at("Hispanic").size() == 1);
}

TEST_CASE("aggregation errors") {
  auto fx = fixture();
  auto extra = fx.units;
  extra.push_back(unit("ghost", 100, Group::Black));
  try {
    aggregate_norm_errors(fx.windows, fx.forecasts, kQ, extra);
    FAIL("expected a missing unit");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::MissingUnit);
    CHECK(std::string(e.what()).find("ghost") != std::string::npos);
  }
  fx.forecasts.pop_back();
  CHECK_THROWS_AS(aggregate_norm_errors(fx.windows, fx.forecasts, kQ, fx.units), Error);
}

TEST_CASE("soft parity ratios and distances") {
  const GroupedSamples g{{"Asian", {1.0, 3.0}}, {"Black", {4.0, 6.0}}, {"White", {2.0, 2.0}}};
  const auto s = soft_parity(g);
  CHECK(s.aer.at("Asian") == doctest::Approx(1.0));
  CHECK(s.aer.at("Black") == doctest::Approx(2.5));
  CHECK(s.aer.count("White") == 0);
  for (const auto& [k, v] : s.aer) CHECK(s.distance.at(k) == std::fabs(1.0 - v));
  // White against itself is parity by construction.
  const GroupedSamples mirror{{"Asian", {2.0, 2.0}}, {"White", {2.0, 2.0}}};
  CHECK(soft_parity(mirror).distance.at("Asian") == 0.0);
}

TEST_CASE("soft parity needs a nonzero White mean") {
  try {
    soft_parity({{"Asian", {1.0}}, {"White", {0.0, 0.0}}});
    FAIL("expected degenerate");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Degenerate);
  }
  CHECK_THROWS_AS(soft_parity({{"Asian", {1.0}}, {"Black", {2.0}}}), Error);
}

TEST_CASE("reports do not depend on unit order") {
  const auto fx = fixture(4);
  const auto a = build_report("m", aggregate_norm_errors(fx.windows, fx.forecasts, kQ, fx.units));
  auto units = fx.units;
  std::reverse(units.begin(), units.end());
  std::vector<std::size_t> order(fx.windows.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = order.size() - 1 - i;
  std::vector<WindowSample> w;
  std::vector<QuantileForecast> f;
  for (auto i : order) {
    w.push_back(fx.windows[i]);
    f.push_back(fx.forecasts[i]);
  }
  const auto b = build_report("m", aggregate_norm_errors(w, f, kQ, units));
  CHECK(a.anova.f_stat == doctest::Approx(b.anova.f_stat).epsilon(1e-12));
  for (std::size_t i = 0; i < a.tukey.size(); ++i) CHECK(a.tukey[i].p_adj == doctest::Approx(b.tukey[i].p_adj));
  for (const auto& [k, v] : a.aer) CHECK(b.aer.at(k) == doctest::Approx(v).epsilon(1e-12));
}

TEST_CASE("per-group mean errors equal a direct recomputation") {
  const auto fx = fixture(6);
  const auto r = build_report("m", aggregate_norm_errors(fx.windows, fx.forecasts, kQ, fx.units));
  for (Group g : kGroups) {
    double pbl_sum = 0.0, norm_sum = 0.0, n = 0.0;
    for (const auto& u : fx.units) {
      if (dominant_group(u.demo_fractions) != g) continue;
      double total = 0.0, rows = 0.0;
      for (std::size_t i = 0; i < fx.windows.size(); ++i) {
        if (fx.windows[i].unit_id != u.unit_id) continue;
        for (std::size_t h = 0; h < fx.windows[i].horizon(); ++h) {
          double cell = 0.0;
          for (std::size_t q = 0; q < kQ.size(); ++q) {
            const double d = fx.windows[i].horizon_targets[h] - fx.forecasts[i].at(h, q);
            cell += std::max(kQ[q] * d, (kQ[q] - 1.0) * d);
          }
          total += cell / static_cast<double>(kQ.size());
          rows += 1.0;
        }
      }
      pbl_sum += total / rows;
      norm_sum += 1000.0 * total / rows / static_cast<double>(u.population);
      n += 1.0;
    }
    const std::string name(group_name(g));
    CHECK(std::fabs(r.mean_pbl_per_group.at(name) - pbl_sum / n) < 1e-9);
    CHECK(std::fabs(r.mean_norm_pbl_per_group.at(name) - norm_sum / n) < 1e-9);
    CHECK(r.units_per_group.at(name) == 4);
  }
  CHECK(r.tukey.size() == 6);
  CHECK(r.anova.df_between == 3);
  CHECK(r.anova.df_within == 12);
}

TEST_CASE("report JSON round trips with the required keys") {
  const auto fx = fixture(2);
  auto r = build_report("demopts", aggregate_norm_errors(fx.windows, fx.forecasts, kQ, fx.units));
  r.config_hash = "00ff00ff00ff00ff";
  r.seed = 42;
  const auto text = report_json(r);
  const auto j = nlohmann::json::parse(text);
  for (const char* key : {"method", "anova", "tukey_pairs", "aer", "distance", "mean_pbl_per_group", "config_hash",
                          "seed"}) {
    CHECK(j.contains(key));
  }
  const auto back = report_from_json(text);
  CHECK(back.method == "demopts");
  CHECK(back.seed == 42);
  CHECK(back.anova.f_stat == r.anova.f_stat);
  CHECK(back.aer == r.aer);
  CHECK(back.mean_pbl_per_group == r.mean_pbl_per_group);
  CHECK(report_json(back) == text);
  CHECK_THROWS_AS(report_from_json("{\"method\": 1}"), Error);
}

TEST_CASE("emit_report writes tables with one block per method") {
  const auto fx = fixture(3);
  const auto base = build_report("none", aggregate_norm_errors(fx.windows, fx.forecasts, kQ, fx.units));
  auto other = base;
  other.method = "demopts";
  const auto dir = test_support::scratch("emit");
  emit_report(std::vector<ParityReport>{base}, dir / "one");
  for (const char* f : {"anova.csv", "tukey.csv", "soft_parity.csv", "mean_pbl.csv", "none/report.json",
                        "none/unit_errors.csv"}) {
    CHECK(std::filesystem::exists(dir / "one" / f));
  }
  CHECK(report_from_json(read_file(dir / "one/none/report.json")).anova.f_stat == base.anova.f_stat);

  const std::vector<ParityReport> both{base, other};
  emit_report(both, dir / "two");
  const auto tukey = read_file(dir / "two/tukey.csv");
  CHECK(tukey.substr(0, tukey.find('\n')) ==
        "group1,group2,none_mean_diff,none_p_adj,none_sig,demopts_mean_diff,demopts_p_adj,demopts_sig");
  CHECK(std::count(tukey.begin(), tukey.end(), '\n') == 7);
  const auto anova = read_file(dir / "two/anova.csv");
  CHECK(std::count(anova.begin(), anova.end(), '\n') == 3);
  CHECK(read_file(dir / "two/soft_parity.csv").find("Hispanic,") != std::string::npos);

  emit_report(both, dir / "again");
  for (const char* f : {"anova.csv", "tukey.csv", "soft_parity.csv", "mean_pbl.csv", "demopts/report.json"}) {
    CHECK(read_file(dir / "two" / f) == read_file(dir / "again" / f));
  }
  CHECK_THROWS_AS(emit_report(std::vector<ParityReport>{base, base}, dir / "dup"), Error);
  CHECK_THROWS_AS(emit_report({}, dir / "none"), Error);
  try {
    test_support::write_file(dir / "blocker", "x");
    emit_report(both, dir / "blocker" / "sub");
    FAIL("expected an I/O error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Io);
  }
}
