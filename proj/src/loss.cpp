#include "parity/loss.hpp"

#include "parity/error.hpp"

namespace parity {

double pinball(double q, double y_true, double y_pred) {
  if (!(q > 0.0 && q < 1.0)) throw Error(ErrorKind::Domain, "pinball: quantile must be in (0,1)");
  const double diff = y_true - y_pred;
  return diff >= 0.0 ? q * diff : (q - 1.0) * diff;
}

double pbl_avg(std::span<const double> quantiles, double y_true, std::span<const double> y_preds) {
  if (quantiles.size() != y_preds.size() || quantiles.empty()) {
    throw Error(ErrorKind::Dimension, "pbl_avg: " + std::to_string(y_preds.size()) + " predictions for " +
                                          std::to_string(quantiles.size()) + " quantiles");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < quantiles.size(); ++i) sum += pinball(quantiles[i], y_true, y_preds[i]);
  return sum / static_cast<double>(quantiles.size());
}

double norm_pbl(double pbl, std::int64_t population) {
  if (population < 1) throw Error(ErrorKind::Domain, "norm_pbl: population must be >= 1");
  return 1000.0 * pbl / static_cast<double>(population);
}

}  // namespace parity
