#pragma once

#include <Eigen/Dense>

#include <map>
#include <string>
#include <vector>

namespace parity {

/// OLS fit with an intercept column appended internally.
struct RegressionDiagnostics {
  std::vector<double> coefficients;     // one per covariate column
  std::vector<double> standard_errors;
  std::vector<double> p_values;         // two-sided t, n - k - 1 df
  double intercept = 0.0;
  double intercept_se = 0.0;
  double intercept_p = 1.0;
  std::size_t n = 0;
  std::size_t k = 0;
  double rss = 0.0;
  double sigma2 = 0.0;
  bool exact_fit = false;  // sigma2 treated as 0; p-values are 0 or 1
};

/// Condition numbers above this raise Error(SingularDesign).
inline constexpr double kMaxDesignCondition = 1e12;

/// Least squares through an SVD of [X | 1]. Throws Error(SampleSize) unless
/// n > k + 1, Error(SingularDesign) when the design is rank deficient or its
/// condition number exceeds kMaxDesignCondition.
///
/// On an exact fit (residual RMS <= 1e-12 * max|y|) the p-value of a
/// coefficient is 0 if it is nonzero and 1 if it is zero.
RegressionDiagnostics ols_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

/// Label -> sample. Labels iterate in sorted order, which fixes pair order and
/// summation order regardless of how the caller built the map.
using GroupedSamples = std::map<std::string, std::vector<double>>;

struct AnovaResult {
  double f_stat = 0.0;
  int df_between = 0;
  int df_within = 0;
  double p_value = 1.0;
  double ss_between = 0.0;
  double ss_within = 0.0;
  double ms_within = 0.0;
};

/// One-way ANOVA. Needs >= 2 groups of >= 2 values each (Error(SampleSize)
/// names the offending group). With zero within-group variance F is 0 when
/// the means agree and +inf otherwise.
AnovaResult one_way_anova(const GroupedSamples& groups);

struct TukeyPair {
  std::string group1;
  std::string group2;
  double mean_diff = 0.0;  // mean(group1) - mean(group2)
  double q_stat = 0.0;
  double p_adj = 1.0;
  bool significant_01 = false;  // p_adj < 0.01
  bool significant_10 = false;  // p_adj < 0.1
};

struct AlphaLevels {
  double strict = 0.01;
  double loose = 0.1;
};

/// Tukey HSD with the Tukey-Kramer standard error
/// sqrt(MSW / 2 * (1/n_i + 1/n_j)), p from the studentized range with
/// (groups, N - groups) parameters. Pairs come in sorted label order.
std::vector<TukeyPair> tukey_hsd(const GroupedSamples& groups, AlphaLevels alpha = {});

}  // namespace parity
