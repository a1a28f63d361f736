#include "parity/synth.hpp"

#include "parity/error.hpp"
#include "parity/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace parity {

void validate(const SynthConfig& config) {
  if (config.n_units < kGroupCount) {
    throw Error(ErrorKind::Config, "synth: n_units must be >= 4");
  }
  if (config.n_days < 2) throw Error(ErrorKind::Config, "synth: n_days must be >= 2");
  for (Group g : kGroups) {
    double u = config.underreport[static_cast<std::size_t>(g)];
    if (!(u >= 0.0 && u < 1.0)) {
      throw Error(ErrorKind::Config, "synth: u_" + std::string(group_column(g)) + " must be in [0,1)");
    }
  }
  const auto& e = config.epidemic;
  if (!(e.base_rate > 0.0)) throw Error(ErrorKind::Config, "synth: base_rate must be > 0");
  if (!(e.wave_amplitude >= 0.0 && e.wave_amplitude < 1.0)) {
    throw Error(ErrorKind::Config, "synth: wave_amplitude must be in [0,1)");
  }
  if (!(e.wave_period_days > 0.0)) throw Error(ErrorKind::Config, "synth: wave_period_days must be > 0");
  if (!(e.noise_sd >= 0.0)) throw Error(ErrorKind::Config, "synth: noise_sd must be >= 0");
  if (!std::isfinite(config.mobility_coupling)) throw Error(ErrorKind::Config, "synth: mobility_coupling not finite");
}

double reporting_factor(const DemoFractions& underreport, const DemoFractions& fractions) {
  double loss = 0.0;
  for (std::size_t g = 0; g < kGroupCount; ++g) loss += underreport[g] * fractions[g];
  return 1.0 - loss;
}

namespace {

constexpr double kWhiteShare = 0.4;
// Units share one national wave up to a small phase offset.
constexpr double kPhaseSpread = 0.1;

Group draw_dominant(Rng& rng, std::size_t unit) {
  if (unit < 2 * kGroupCount) return kGroups[unit % kGroupCount];
  double u = rng.uniform();
  if (u < kWhiteShare) return Group::White;
  double rest = (u - kWhiteShare) / ((1.0 - kWhiteShare) / 3.0);
  return kGroups[std::min<std::size_t>(static_cast<std::size_t>(rest), 2)];
}

DemoFractions draw_fractions(Rng& rng, Group dominant) {
  DemoFractions f{};
  const double major = rng.uniform(0.5, 0.9);
  const double other = rng.uniform(0.0, 0.1);  // groups outside the four columns
  std::array<double, 3> w{};
  double wsum = 0.0;
  for (double& x : w) {
    x = rng.uniform(0.05, 1.0);
    wsum += x;
  }
  const double remaining = 1.0 - major - other;
  std::size_t k = 0;
  for (Group g : kGroups) {
    if (g == dominant) {
      f[static_cast<std::size_t>(g)] = major;
    } else {
      f[static_cast<std::size_t>(g)] = remaining * w[k++] / wsum;
    }
  }
  return f;
}

}  // namespace

SynthPanel generate_detailed(const SynthConfig& config) {
  validate(config);
  Rng rng(config.seed);
  const auto& ep = config.epidemic;
  const std::size_t days = config.n_days;

  // Shared national inflow trend, AR(1).
  std::vector<double> national(days);
  {
    double x = 0.0;
    for (std::size_t t = 0; t < days; ++t) {
      x = 0.9 * x + 0.08 * rng.normal();
      national[t] = x;
    }
  }

  SynthPanel out;
  out.panel.units.reserve(config.n_units);
  out.panel.series.reserve(config.n_units);
  out.latent.reserve(config.n_units);

  for (std::size_t u = 0; u < config.n_units; ++u) {
    UnitRecord rec;
    char id[32];
    std::snprintf(id, sizeof(id), "U%03zu", u);
    rec.unit_id = id;
    Group dominant = draw_dominant(rng, u);
    rec.demo_fractions = draw_fractions(rng, dominant);
    rec.population = static_cast<std::int64_t>(std::llround(std::exp(rng.uniform(std::log(2.0e4), std::log(5.0e5)))));

    const double base = ep.base_rate * rng.uniform(0.95, 1.05);
    const double amplitude = ep.wave_amplitude * rng.uniform(0.7, 1.0);
    const double phase = rng.uniform(0.0, kPhaseSpread * ep.wave_period_days);

    std::vector<double> inflow(days);
    {
      double x = 0.0;
      for (std::size_t t = 0; t < days; ++t) {
        x = 0.85 * x + 0.03 * rng.normal();
        inflow[t] = national[t] + x;
      }
    }

    const double factor = reporting_factor(config.underreport, rec.demo_fractions);
    const double per_capita = static_cast<double>(rec.population) / 1000.0;
    std::vector<double> latent(days), reported(days);
    for (std::size_t t = 0; t < days; ++t) {
      const double lagged = inflow[t >= kMobilityLagDays ? t - kMobilityLagDays : 0];
      const double wave = 1.0 + amplitude * std::sin(2.0 * std::numbers::pi * (static_cast<double>(t) + phase) /
                                                     ep.wave_period_days);
      double rate = base * wave * std::exp(config.mobility_coupling * lagged) + ep.noise_sd * base * rng.normal();
      latent[t] = std::max(0.0, rate) * per_capita;
      reported[t] = std::max(0.0, latent[t] * factor);
    }

    PanelSeries s;
    s.unit_id = rec.unit_id;
    s.start = config.start_date;
    s.target_raw = std::move(reported);
    s.target_smoothed = rolling_average(s.target_raw);
    s.exog = std::move(inflow);

    out.panel.units.push_back(std::move(rec));
    out.panel.series.push_back(std::move(s));
    out.latent.push_back(std::move(latent));
  }
  return out;
}

GroupedPanel generate(const SynthConfig& config) { return generate_detailed(config).panel; }

}  // namespace parity
