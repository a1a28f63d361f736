#pragma once

#include "parity/panel.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace parity {

inline constexpr std::array<double, 7> kDefaultQuantiles = {0.02, 0.1, 0.25, 0.5, 0.75, 0.9, 0.98};

/// Pinball loss for quantile q: q*(y - p) when y >= p, else (q-1)*(y - p).
/// Throws Error(Domain) unless 0 < q < 1.
double pinball(double q, double y_true, double y_pred);

/// d pinball / d y_pred. At y_true == y_pred this returns -q, the derivative
/// from the left.
inline double pinball_grad(double q, double y_true, double y_pred) noexcept {
  return y_true >= y_pred ? -q : 1.0 - q;
}

/// Mean pinball loss over the quantile set.
double pbl_avg(std::span<const double> quantiles, double y_true, std::span<const double> y_preds);

/// Loss per 1,000 persons.
double norm_pbl(double pbl, std::int64_t population);

/// One row per (sample, lookahead), carrying the quantile-averaged loss in
/// case units.
struct LossRow {
  std::string unit_id;
  int lookahead = 1;
  double pbl = 0.0;
  DemoFractions demo_fractions{};
  std::int64_t population = 1;
};

using LossMatrix = std::vector<LossRow>;

}  // namespace parity
