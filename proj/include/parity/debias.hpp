#pragma once

#include "parity/panel.hpp"
#include "parity/stats.hpp"

#include <Eigen/Dense>

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace parity {

enum class DebiasKind { None, DemOpts, Individual, Group, Sufficiency };

std::string_view debias_name(DebiasKind kind) noexcept;  // "none", "demopts", ...
DebiasKind parse_debias(std::string_view name);

struct DebiasMethod {
  DebiasKind kind = DebiasKind::None;
  double p_threshold = 0.05;   // DemOpts significance gate
  bool compounding = false;    // DemOpts: apply gated terms sequentially
  double penalty_weight = 1.0; // lambda for Individual, Group, Sufficiency
};

/// Throws Error(Config) unless p_threshold is in [0,1) and lambda >= 0.
/// p_threshold = 0 is accepted: it closes every gate.
void validate(const DebiasMethod& method);

/// Rows of one training batch, aligned by index. A row is one
/// (sample, lookahead) pair.
struct BatchContext {
  std::vector<double> losses;         // quantile-averaged pinball, >= 0
  Eigen::MatrixXd demographics;       // rows x 4, kGroups column order
  std::vector<int> lookahead;         // 1..H
  std::vector<Group> labels;          // majority label of the row's unit
  std::vector<double> residuals;      // y_true - median forecast (Individual, Group)

  std::size_t rows() const noexcept { return losses.size(); }
};

/// Throws Error(Dimension) if the fields are not aligned.
void check_aligned(const BatchContext& ctx);

/// Regression columns for the loss fit: the four fractions then lookahead.
inline constexpr std::size_t kLossCovariates = kGroupCount + 1;
inline constexpr std::array<std::string_view, kLossCovariates> kCovariateNames = {"asian", "black", "hispanic",
                                                                                  "white", "lookahead"};

struct DemOptsResult {
  std::vector<double> adjusted;               // per row
  std::vector<double> weights;                // adjusted / loss, constant w.r.t. the model
  std::optional<RegressionDiagnostics> diagnostics;  // empty when the fit fell back
  std::array<bool, kGroupCount> gates{};      // which demographic terms fired
  std::string fallback_reason;
};

/// Fits losses ~ [fractions, lookahead] + intercept by OLS and, for each
/// demographic column j with p_j < p_threshold, adds |beta_j| * D_j * L.
/// Non-compounding (default): every term uses the unadjusted L, so
///   L_adj = L * (1 + sum_j gate_j |beta_j| D_j).
/// Compounding: terms apply in column order to the running value,
///   L_adj = L * prod_j (1 + gate_j |beta_j| D_j).
/// The lookahead column is fitted but never penalized. A singular design or
/// fewer than 7 rows leaves L unchanged and sets fallback_reason.
DemOptsResult demopts_adjust(const BatchContext& ctx, double p_threshold, bool compounding = false);

/// Mean loss + lambda * mean over row pairs with different labels of
/// (r_i - r_j)^2. The penalty is 0 with fewer than two labels.
double individual_penalty(const BatchContext& ctx, double lambda);
/// d(penalty term without lambda) / d residual_i.
std::vector<double> individual_penalty_grad(const BatchContext& ctx);

/// Mean loss + lambda * mean over label pairs (a, b) of
/// (mean residual_a - mean residual_b)^2.
double group_penalty(const BatchContext& ctx, double lambda);
std::vector<double> group_penalty_grad(const BatchContext& ctx);

/// joint_loss + lambda * mean of `group_gaps`, which maps each group present
/// in the batch to its mean squared gap between joint and group-head
/// predictions.
double sufficiency_penalty(double joint_loss, const std::map<Group, double>& group_gaps, double lambda);

}  // namespace parity
