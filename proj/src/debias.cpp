#include "parity/debias.hpp"

#include "parity/error.hpp"
#include "parity/log.hpp"

#include <cmath>

namespace parity {

std::string_view debias_name(DebiasKind kind) noexcept {
  switch (kind) {
    case DebiasKind::None: return "none";
    case DebiasKind::DemOpts: return "demopts";
    case DebiasKind::Individual: return "individual";
    case DebiasKind::Group: return "group";
    case DebiasKind::Sufficiency: return "sufficiency";
  }
  return "none";
}

DebiasKind parse_debias(std::string_view name) {
  for (DebiasKind k : {DebiasKind::None, DebiasKind::DemOpts, DebiasKind::Individual, DebiasKind::Group,
                       DebiasKind::Sufficiency}) {
    if (debias_name(k) == name) return k;
  }
  throw Error(ErrorKind::Config, "unknown method '" + std::string(name) +
                                     "' (expected none, demopts, individual, group or sufficiency)");
}

void validate(const DebiasMethod& m) {
  if (!(m.p_threshold >= 0.0 && m.p_threshold < 1.0)) {
    throw Error(ErrorKind::Config, "p_threshold must be in [0,1)");
  }
  if (!(m.penalty_weight >= 0.0) || !std::isfinite(m.penalty_weight)) {
    throw Error(ErrorKind::Config, "penalty_weight must be a finite value >= 0");
  }
}

void check_aligned(const BatchContext& ctx) {
  const std::size_t n = ctx.rows();
  const bool ok = static_cast<std::size_t>(ctx.demographics.rows()) == n &&
                  ctx.demographics.cols() == static_cast<Eigen::Index>(kGroupCount) &&
                  (ctx.lookahead.empty() || ctx.lookahead.size() == n) &&
                  (ctx.labels.empty() || ctx.labels.size() == n) &&
                  (ctx.residuals.empty() || ctx.residuals.size() == n);
  if (!ok) throw Error(ErrorKind::Dimension, "batch context fields are not aligned");
}

DemOptsResult demopts_adjust(const BatchContext& ctx, double p_threshold, bool compounding) {
  check_aligned(ctx);
  const std::size_t n = ctx.rows();
  if (ctx.lookahead.size() != n) throw Error(ErrorKind::Dimension, "demopts_adjust: lookahead column missing");

  DemOptsResult r;
  r.adjusted = ctx.losses;
  r.weights.assign(n, 1.0);

  if (n < kLossCovariates + 2) {
    r.fallback_reason = "batch has " + std::to_string(n) + " rows; the loss fit needs at least " +
                        std::to_string(kLossCovariates + 2);
    log::warn("demopts: " + r.fallback_reason + "; loss left unadjusted");
    return r;
  }

  Eigen::MatrixXd X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(kLossCovariates));
  X.leftCols(kGroupCount) = ctx.demographics;
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(kGroupCount)) = ctx.lookahead[i];
    y(static_cast<Eigen::Index>(i)) = ctx.losses[i];
  }

  try {
    r.diagnostics = ols_fit(X, y);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::SingularDesign && e.kind() != ErrorKind::SampleSize) throw;
    r.fallback_reason = e.what();
    log::warn(std::string("demopts: ") + e.what() + "; loss left unadjusted");
    return r;
  }

  const auto& d = *r.diagnostics;
  for (std::size_t j = 0; j < kGroupCount; ++j) r.gates[j] = d.p_values[j] < p_threshold;

  for (std::size_t i = 0; i < n; ++i) {
    double w = 1.0;
    for (std::size_t j = 0; j < kGroupCount; ++j) {
      if (!r.gates[j]) continue;
      const double term = std::fabs(d.coefficients[j]) * ctx.demographics(static_cast<Eigen::Index>(i),
                                                                          static_cast<Eigen::Index>(j));
      w = compounding ? w * (1.0 + term) : w + term;
    }
    r.weights[i] = w;
    r.adjusted[i] = ctx.losses[i] * w;
  }
  return r;
}

namespace {

double mean_loss(const BatchContext& ctx) {
  if (ctx.rows() == 0) return 0.0;
  double s = 0.0;
  for (double l : ctx.losses) s += l;
  return s / static_cast<double>(ctx.rows());
}

struct LabelSums {
  std::array<double, kGroupCount> count{};
  std::array<double, kGroupCount> sum{};
  std::array<double, kGroupCount> sumsq{};
  std::size_t present = 0;
};

LabelSums label_sums(const BatchContext& ctx) {
  check_aligned(ctx);
  if (ctx.labels.size() != ctx.rows() || ctx.residuals.size() != ctx.rows()) {
    throw Error(ErrorKind::Dimension, "penalty needs labels and residuals for every row");
  }
  LabelSums s;
  for (std::size_t i = 0; i < ctx.rows(); ++i) {
    const auto g = static_cast<std::size_t>(ctx.labels[i]);
    s.count[g] += 1.0;
    s.sum[g] += ctx.residuals[i];
    s.sumsq[g] += ctx.residuals[i] * ctx.residuals[i];
  }
  for (double c : s.count) s.present += c > 0.0 ? 1 : 0;
  return s;
}

// Number of row pairs with different labels.
double cross_pairs(const LabelSums& s) {
  double pairs = 0.0;
  for (std::size_t a = 0; a < kGroupCount; ++a) {
    for (std::size_t b = a + 1; b < kGroupCount; ++b) pairs += s.count[a] * s.count[b];
  }
  return pairs;
}

}  // namespace

double individual_penalty(const BatchContext& ctx, double lambda) {
  const LabelSums s = label_sums(ctx);
  const double base = mean_loss(ctx);
  if (s.present < 2) return base;
  // sum over i in a, j in b of (r_i - r_j)^2 = n_b Q_a + n_a Q_b - 2 S_a S_b
  double total = 0.0;
  for (std::size_t a = 0; a < kGroupCount; ++a) {
    for (std::size_t b = a + 1; b < kGroupCount; ++b) {
      total += s.count[b] * s.sumsq[a] + s.count[a] * s.sumsq[b] - 2.0 * s.sum[a] * s.sum[b];
    }
  }
  return base + lambda * total / cross_pairs(s);
}

std::vector<double> individual_penalty_grad(const BatchContext& ctx) {
  const LabelSums s = label_sums(ctx);
  std::vector<double> grad(ctx.rows(), 0.0);
  if (s.present < 2) return grad;
  const double pairs = cross_pairs(s);
  double n_total = 0.0, sum_total = 0.0;
  for (std::size_t g = 0; g < kGroupCount; ++g) {
    n_total += s.count[g];
    sum_total += s.sum[g];
  }
  for (std::size_t i = 0; i < ctx.rows(); ++i) {
    const auto g = static_cast<std::size_t>(ctx.labels[i]);
    grad[i] = 2.0 * ((n_total - s.count[g]) * ctx.residuals[i] - (sum_total - s.sum[g])) / pairs;
  }
  return grad;
}

double group_penalty(const BatchContext& ctx, double lambda) {
  const LabelSums s = label_sums(ctx);
  const double base = mean_loss(ctx);
  if (s.present < 2) return base;
  double total = 0.0;
  double pairs = 0.0;
  for (std::size_t a = 0; a < kGroupCount; ++a) {
    if (s.count[a] == 0.0) continue;
    for (std::size_t b = a + 1; b < kGroupCount; ++b) {
      if (s.count[b] == 0.0) continue;
      const double diff = s.sum[a] / s.count[a] - s.sum[b] / s.count[b];
      total += diff * diff;
      pairs += 1.0;
    }
  }
  return base + lambda * total / pairs;
}

std::vector<double> group_penalty_grad(const BatchContext& ctx) {
  const LabelSums s = label_sums(ctx);
  std::vector<double> grad(ctx.rows(), 0.0);
  if (s.present < 2) return grad;
  const double pairs = static_cast<double>(s.present * (s.present - 1) / 2);
  std::array<double, kGroupCount> d_mean{};
  for (std::size_t a = 0; a < kGroupCount; ++a) {
    if (s.count[a] == 0.0) continue;
    for (std::size_t b = 0; b < kGroupCount; ++b) {
      if (b == a || s.count[b] == 0.0) continue;
      d_mean[a] += 2.0 * (s.sum[a] / s.count[a] - s.sum[b] / s.count[b]) / pairs;
    }
  }
  for (std::size_t i = 0; i < ctx.rows(); ++i) {
    const auto g = static_cast<std::size_t>(ctx.labels[i]);
    grad[i] = d_mean[g] / s.count[g];
  }
  return grad;
}

double sufficiency_penalty(double joint_loss, const std::map<Group, double>& group_gaps, double lambda) {
  if (group_gaps.empty()) return joint_loss;
  double total = 0.0;
  for (const auto& [g, gap] : group_gaps) total += gap;
  return joint_loss + lambda * total / static_cast<double>(group_gaps.size());
}

}  // namespace parity
