#include "parity/error.hpp"
#include "parity/loss.hpp"
#include "parity/rng.hpp"

#include <doctest.h>

#include <algorithm>
#include <vector>

using namespace parity;

namespace {

// max form: q*d if d >= 0 else (q-1)*d equals max(q*d, (q-1)*d)
double pinball_oracle(double q, double y, double p) { return std::max(q * (y - p), (q - 1.0) * (y - p)); }

}  // namespace

TEST_CASE("pinball worked examples") {
  CHECK(pinball(0.5, 10.0, 8.0) == doctest::Approx(1.0));
  CHECK(pinball(0.9, 10.0, 12.0) == doctest::Approx(0.2));
  CHECK(pinball(0.1, 10.0, 12.0) == doctest::Approx(1.8));
  CHECK(pinball(0.98, 5.0, 5.0) == 0.0);
}

TEST_CASE("pinball rejects quantiles outside (0,1)") {
  for (double q : {0.0, 1.0, -0.2, 1.5}) CHECK_THROWS_AS(pinball(q, 1.0, 2.0), Error);
  try {
    pinball(1.0, 1.0, 2.0);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Domain);
  }
}

TEST_CASE("pinball is nonnegative and zero only on the target") {
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    const double q = rng.uniform(0.01, 0.99);
    const double y = rng.normal(0.0, 10.0);
    const double p = rng.normal(0.0, 10.0);
    CHECK(pinball(q, y, p) >= 0.0);
    CHECK(pinball(q, y, p) == pinball_oracle(q, y, p));
  }
  CHECK(pinball(0.3, 2.5, 2.5) == 0.0);
}

TEST_CASE("pinball_grad matches central differences away from the kink") {
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const double q = rng.uniform(0.01, 0.99);
    const double y = rng.normal();
    double p = rng.normal();
    if (std::abs(y - p) < 1e-3) p += 0.1;
    const double h = 1e-6;
    const double numeric = (pinball(q, y, p + h) - pinball(q, y, p - h)) / (2 * h);
    CHECK(pinball_grad(q, y, p) == doctest::Approx(numeric).epsilon(1e-6));
  }
}

TEST_CASE("pbl_avg averages over the quantile set") {
  const std::vector<double> preds{9.0, 9.5, 9.8, 10.0, 10.2, 10.5, 11.0};
  double sum = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) sum += pinball_oracle(kDefaultQuantiles[i], 10.3, preds[i]);
  CHECK(pbl_avg(kDefaultQuantiles, 10.3, preds) == doctest::Approx(sum / 7.0).epsilon(1e-15));
}

TEST_CASE("pbl_avg dimension errors") {
  const std::vector<double> preds{1.0, 2.0};
  CHECK_THROWS_AS(pbl_avg(kDefaultQuantiles, 1.0, preds), Error);
  const std::vector<double> none;
  CHECK_THROWS_AS(pbl_avg(none, 1.0, none), Error);
}

TEST_CASE("norm_pbl scales to 1000 persons") {
  CHECK(norm_pbl(3.0, 150000) == doctest::Approx(0.02));
  CHECK(norm_pbl(0.0, 1) == 0.0);
  CHECK_THROWS_AS(norm_pbl(1.0, 0), Error);
}
