#include "parity/stats.hpp"

#include "parity/distributions.hpp"
#include "parity/error.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

namespace parity {

RegressionDiagnostics ols_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  const auto n = static_cast<std::size_t>(X.rows());
  const auto k = static_cast<std::size_t>(X.cols());
  if (static_cast<std::size_t>(y.size()) != n) {
    throw Error(ErrorKind::Dimension, "ols_fit: X has " + std::to_string(n) + " rows, y has " +
                                          std::to_string(y.size()));
  }
  if (n <= k + 1) {
    throw Error(ErrorKind::SampleSize,
                "ols_fit: need n > k + 1 (n=" + std::to_string(n) + ", k=" + std::to_string(k) + ")");
  }

  Eigen::MatrixXd design(n, k + 1);
  design.leftCols(k) = X;
  design.col(k).setOnes();

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double smax = sv(0);
  const double smin = sv(sv.size() - 1);
  if (!(smin > 0.0) || smax / smin > kMaxDesignCondition) {
    char cond[32];
    std::snprintf(cond, sizeof(cond), "%.3g", smin > 0.0 ? smax / smin : INFINITY);
    throw Error(ErrorKind::SingularDesign,
                std::string("ols_fit: design condition number ") + cond + " exceeds 1e12 (rank deficient design)");
  }

  const Eigen::VectorXd inv_sv = sv.cwiseInverse();
  const Eigen::VectorXd beta = svd.matrixV() * (inv_sv.asDiagonal() * (svd.matrixU().transpose() * y));
  const Eigen::VectorXd resid = y - design * beta;
  const double rss = resid.squaredNorm();
  const auto dof = static_cast<double>(n - k - 1);

  RegressionDiagnostics out;
  out.n = n;
  out.k = k;
  out.rss = rss;

  const double y_scale = y.size() > 0 ? y.cwiseAbs().maxCoeff() : 0.0;
  out.exact_fit = std::sqrt(rss / static_cast<double>(n)) <= 1e-12 * y_scale || y_scale == 0.0;
  out.sigma2 = out.exact_fit ? 0.0 : rss / dof;

  // cov(beta) = sigma2 * V S^-2 V^T
  const Eigen::MatrixXd vs = svd.matrixV() * inv_sv.asDiagonal();
  const Eigen::VectorXd unscaled_var = vs.rowwise().squaredNorm();

  auto fill = [&](Eigen::Index j, double& coef, double& se, double& p) {
    coef = beta(j);
    se = std::sqrt(out.sigma2 * unscaled_var(j));
    if (out.exact_fit) {
      const double column_scale = design.col(j).cwiseAbs().maxCoeff();
      const bool zero = std::fabs(coef) * column_scale <= 1e-10 * y_scale || y_scale == 0.0;
      p = zero ? 1.0 : 0.0;
    } else {
      p = student_t_two_sided_p(coef / se, dof);
    }
  };

  out.coefficients.resize(k);
  out.standard_errors.resize(k);
  out.p_values.resize(k);
  for (std::size_t j = 0; j < k; ++j) {
    fill(static_cast<Eigen::Index>(j), out.coefficients[j], out.standard_errors[j], out.p_values[j]);
  }
  fill(static_cast<Eigen::Index>(k), out.intercept, out.intercept_se, out.intercept_p);
  return out;
}

namespace {

void check_groups(const GroupedSamples& groups) {
  if (groups.size() < 2) {
    throw Error(ErrorKind::SampleSize, "need at least 2 groups, got " + std::to_string(groups.size()));
  }
  for (const auto& [label, values] : groups) {
    if (values.size() < 2) {
      throw Error(ErrorKind::SampleSize, "group '" + label + "' has " + std::to_string(values.size()) +
                                             " value(s); need at least 2");
    }
  }
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

AnovaResult one_way_anova(const GroupedSamples& groups) {
  check_groups(groups);
  std::size_t total_n = 0;
  double total_sum = 0.0;
  for (const auto& [label, values] : groups) {
    total_n += values.size();
    for (double x : values) total_sum += x;
  }
  const double grand = total_sum / static_cast<double>(total_n);

  AnovaResult r;
  for (const auto& [label, values] : groups) {
    const double m = mean_of(values);
    r.ss_between += static_cast<double>(values.size()) * (m - grand) * (m - grand);
    for (double x : values) r.ss_within += (x - m) * (x - m);
  }
  r.df_between = static_cast<int>(groups.size()) - 1;
  r.df_within = static_cast<int>(total_n - groups.size());
  const double ms_between = r.ss_between / r.df_between;
  r.ms_within = r.ss_within / r.df_within;

  // Relative to the data scale so constant groups register as zero variance.
  const double scale = std::max(std::fabs(grand), 1e-300);
  const bool no_within = r.ms_within <= (1e-14 * scale) * (1e-14 * scale);
  const bool no_between = ms_between <= (1e-14 * scale) * (1e-14 * scale);
  if (no_within) {
    r.f_stat = no_between ? 0.0 : std::numeric_limits<double>::infinity();
    r.p_value = no_between ? 1.0 : 0.0;
  } else {
    r.f_stat = ms_between / r.ms_within;
    r.p_value = f_sf(r.f_stat, r.df_between, r.df_within);
  }
  return r;
}

std::vector<TukeyPair> tukey_hsd(const GroupedSamples& groups, AlphaLevels alpha) {
  const AnovaResult anova = one_way_anova(groups);
  const auto k = static_cast<double>(groups.size());
  const auto df = static_cast<double>(anova.df_within);

  struct Summary {
    const std::string* label;
    double mean;
    double n;
  };
  std::vector<Summary> summaries;
  for (const auto& [label, values] : groups) {
    summaries.push_back({&label, mean_of(values), static_cast<double>(values.size())});
  }

  std::vector<TukeyPair> pairs;
  for (std::size_t i = 0; i < summaries.size(); ++i) {
    for (std::size_t j = i + 1; j < summaries.size(); ++j) {
      TukeyPair p;
      p.group1 = *summaries[i].label;
      p.group2 = *summaries[j].label;
      p.mean_diff = summaries[i].mean - summaries[j].mean;
      const double se = std::sqrt(anova.ms_within / 2.0 * (1.0 / summaries[i].n + 1.0 / summaries[j].n));
      const double scale = std::max({std::fabs(summaries[i].mean), std::fabs(summaries[j].mean), 1e-300});
      if (std::fabs(p.mean_diff) <= 1e-14 * scale) {
        p.q_stat = 0.0;
        p.p_adj = 1.0;
      } else if (!(se > 1e-14 * scale)) {
        p.q_stat = std::numeric_limits<double>::infinity();
        p.p_adj = 0.0;
      } else {
        p.q_stat = std::fabs(p.mean_diff) / se;
        p.p_adj = studentized_range_sf(p.q_stat, k, df);
      }
      p.significant_01 = p.p_adj < alpha.strict;
      p.significant_10 = p.p_adj < alpha.loose;
      pairs.push_back(std::move(p));
    }
  }
  return pairs;
}

}  // namespace parity
