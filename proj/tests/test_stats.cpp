#include "parity/distributions.hpp"
#include "parity/error.hpp"
#include "parity/stats.hpp"
#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace parity;

namespace {

Eigen::MatrixXd matrix_from(const nlohmann::json& rows) {
  Eigen::MatrixXd X(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) X(i, j) = rows[i][j].get<double>();
  }
  return X;
}

Eigen::VectorXd vector_from(const nlohmann::json& v) {
  Eigen::VectorXd y(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) y(i) = v[i].get<double>();
  return y;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

GroupedSamples samples_from(const nlohmann::json& j) {
  GroupedSamples g;
  for (const auto& [label, values] : j.items()) g[label] = values.get<std::vector<double>>();
  return g;
}

}  // namespace

TEST_CASE("ols_fit matches the reference on 100 systems") {
  const auto fx = test_support::load_fixture("ols.json");
  double worst_beta = 0.0, worst_se = 0.0, worst_p = 0.0;
  for (const auto& c : fx["cases"]) {
    const auto fit = ols_fit(matrix_from(c["X"]), vector_from(c["y"]));
    worst_beta = std::max(worst_beta, rel(fit.intercept, c["intercept"].get<double>()));
    worst_se = std::max(worst_se, rel(fit.intercept_se, c["intercept_se"].get<double>()));
    worst_p = std::max(worst_p, std::abs(fit.intercept_p - c["intercept_p"].get<double>()));
    for (std::size_t j = 0; j < fit.coefficients.size(); ++j) {
      worst_beta = std::max(worst_beta, rel(fit.coefficients[j], c["beta"][j].get<double>()));
      worst_se = std::max(worst_se, rel(fit.standard_errors[j], c["se"][j].get<double>()));
      worst_p = std::max(worst_p, std::abs(fit.p_values[j] - c["p"][j].get<double>()));
    }
  }
  CHECK(worst_beta < 1e-8);
  CHECK(worst_se < 1e-8);
  CHECK(worst_p < 1e-6);
}

TEST_CASE("ols_fit recovers an exact linear relation") {
  Eigen::MatrixXd X(6, 2);
  X << 1, 0, 2, 1, 3, 0, 4, 1, 5, 0, 6, 1;
  Eigen::VectorXd y = 2.0 + 3.0 * X.col(0).array() - 1.0 * X.col(1).array();
  const auto fit = ols_fit(X, y);
  CHECK(fit.exact_fit);
  CHECK(fit.coefficients[0] == doctest::Approx(3.0));
  CHECK(fit.coefficients[1] == doctest::Approx(-1.0));
  CHECK(fit.intercept == doctest::Approx(2.0));
  CHECK(fit.p_values[0] == 0.0);
}

TEST_CASE("ols_fit error conditions") {
  Eigen::MatrixXd X(5, 2);
  X << 1, 2, 2, 4, 3, 6, 4, 8, 5, 10;  // second column = 2 * first
  Eigen::VectorXd y(5);
  y << 1, 3, 2, 5, 4;
  try {
    ols_fit(X, y);
    FAIL("expected a singular design error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::SingularDesign);
  }
  Eigen::MatrixXd small(3, 2);
  small << 1, 0, 0, 1, 1, 1;
  try {
    ols_fit(small, Eigen::VectorXd::Ones(3));
    FAIL("expected a sample size error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::SampleSize);
  }
  Eigen::MatrixXd constant_col = Eigen::MatrixXd::Ones(8, 1);
  CHECK_THROWS_AS(ols_fit(constant_col, Eigen::VectorXd::LinSpaced(8, 0, 1)), Error);
}

TEST_CASE("one-way ANOVA on a textbook example") {
  // Three fertilizers, five plots each.
  const GroupedSamples g{{"a", {6, 8, 4, 5, 3}}, {"b", {8, 12, 9, 11, 6}}, {"c", {4, 3, 6, 5, 2}}};
  // Hand sums of squares.
  double grand = 0.0;
  std::size_t n = 0;
  for (const auto& [_, v] : g) {
    for (double x : v) grand += x;
    n += v.size();
  }
  grand /= static_cast<double>(n);
  double ssb = 0.0, ssw = 0.0;
  for (const auto& [_, v] : g) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    ssb += static_cast<double>(v.size()) * (m - grand) * (m - grand);
    for (double x : v) ssw += (x - m) * (x - m);
  }
  const double f_hand = (ssb / 2.0) / (ssw / 12.0);
  const auto res = one_way_anova(g);
  CHECK(res.df_between == 2);
  CHECK(res.df_within == 12);
  CHECK(std::abs(res.ss_between - ssb) < 1e-9);
  CHECK(std::abs(res.ss_within - ssw) < 1e-9);
  CHECK(std::abs(res.f_stat - f_hand) < 1e-9);
  CHECK(std::abs(res.f_stat - 9.344537815126055) < 1e-9);
  CHECK(res.p_value == doctest::Approx(f_sf(f_hand, 2, 12)));
}

TEST_CASE("two-group F equals the pooled t statistic squared") {
  const std::vector<double> a{2.1, 3.4, 1.9, 4.4, 3.0, 2.7};
  const std::vector<double> b{4.2, 5.1, 3.9, 6.0, 4.8};
  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  auto ss = [&](const std::vector<double>& v) {
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s;
  };
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double sp2 = (ss(a) + ss(b)) / (na + nb - 2.0);
  const double t = (mean(a) - mean(b)) / std::sqrt(sp2 * (1.0 / na + 1.0 / nb));
  const auto res = one_way_anova({{"a", a}, {"b", b}});
  CHECK(std::abs(res.f_stat - t * t) < 1e-9);
  CHECK(res.p_value == doctest::Approx(student_t_two_sided_p(t, na + nb - 2.0)).epsilon(1e-9));
}

TEST_CASE("ANOVA degenerate and undersized inputs") {
  const auto same = one_way_anova({{"a", {1, 1}}, {"b", {1, 1}}});
  CHECK(same.f_stat == 0.0);
  const auto apart = one_way_anova({{"a", {1, 1}}, {"b", {2, 2}}});
  CHECK(std::isinf(apart.f_stat));
  CHECK(apart.p_value == 0.0);
  try {
    one_way_anova({{"a", {1, 2}}, {"lonely", {3}}});
    FAIL("expected a sample size error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::SampleSize);
    CHECK(std::string(e.what()).find("lonely") != std::string::npos);
  }
  CHECK_THROWS_AS(one_way_anova({{"a", {1, 2, 3}}}), Error);
}

TEST_CASE("ANOVA and Tukey match the reference on 20 four-group datasets") {
  const auto fx = test_support::load_fixture("tukey.json");
  double worst_p = 0.0, worst_f = 0.0, worst_diff = 0.0;
  for (const auto& c : fx["cases"]) {
    const GroupedSamples g = samples_from(c["samples"]);
    const auto anova = one_way_anova(g);
    worst_f = std::max(worst_f, rel(anova.f_stat, c["f_stat"].get<double>()));
    const auto pairs = tukey_hsd(g);
    REQUIRE(pairs.size() == 6);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const auto& ref = c["pairs"][i];
      CHECK(pairs[i].group1 == ref["group1"].get<std::string>());
      CHECK(pairs[i].group2 == ref["group2"].get<std::string>());
      worst_diff = std::max(worst_diff, std::abs(pairs[i].mean_diff - ref["mean_diff"].get<double>()));
      worst_p = std::max(worst_p, std::abs(pairs[i].p_adj - ref["p_adj"].get<double>()));
    }
  }
  CHECK(worst_f < 1e-9);
  CHECK(worst_diff < 1e-12);
  CHECK(worst_p < 1e-3);
}

TEST_CASE("Tukey flags follow the two alpha levels") {
  const GroupedSamples g{{"a", {1.0, 1.1, 0.9, 1.05}}, {"b", {1.0, 1.2, 0.95, 1.1}}, {"c", {3.0, 3.2, 2.9, 3.1}}};
  for (const auto& p : tukey_hsd(g)) {
    CHECK(p.significant_01 == (p.p_adj < 0.01));
    CHECK(p.significant_10 == (p.p_adj < 0.1));
    if (p.group2 == "c") CHECK(p.significant_01);
    if (p.group1 == "a" && p.group2 == "b") CHECK_FALSE(p.significant_10);
  }
}

TEST_CASE("group statistics ignore insertion order") {
  GroupedSamples g1{{"x", {1, 2, 3}}, {"y", {2, 4, 4, 5}}, {"z", {0, 1}}};
  GroupedSamples g2;
  g2["z"] = {0, 1};
  g2["y"] = {2, 4, 4, 5};
  g2["x"] = {1, 2, 3};
  CHECK(one_way_anova(g1).f_stat == one_way_anova(g2).f_stat);
  const auto t1 = tukey_hsd(g1), t2 = tukey_hsd(g2);
  for (std::size_t i = 0; i < t1.size(); ++i) CHECK(t1[i].p_adj == t2[i].p_adj);
}
