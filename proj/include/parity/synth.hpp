#pragma once

#include "parity/panel.hpp"

#include <cstdint>
#include <vector>

namespace parity {

struct EpidemicParams {
  double base_rate = 0.5;          // latent cases per 1,000 persons per day
  double wave_amplitude = 0.6;     // relative, in [0, 1)
  double wave_period_days = 60.0;
  double noise_sd = 0.05;          // relative to the unit's base rate
};

struct SynthConfig {
  std::size_t n_units = 40;
  std::size_t n_days = 120;
  std::uint64_t seed = 1;
  EpidemicParams epidemic;
  DemoFractions underreport{};     // u_g per group, each in [0, 1)
  double mobility_coupling = 1.0;  // log-rate response to lagged inflow
  Date start_date = Date{std::chrono::year{2020} / 3 / 18};
};

/// Lag between inflow and its effect on latent cases.
inline constexpr std::size_t kMobilityLagDays = 7;

void validate(const SynthConfig& config);

/// 1 - sum_g u_g * frac_g
double reporting_factor(const DemoFractions& underreport, const DemoFractions& fractions);

struct SynthPanel {
  GroupedPanel panel;
  std::vector<std::vector<double>> latent;  // per unit, per day
};

/// Deterministic in config.seed. Every unit gets a dominant group; the first
/// 2 * 4 units cycle through all groups so each label is the majority of at
/// least two units, the rest draw White with probability 0.4 and each other
/// group with 0.2. Reported cases are latent * reporting_factor, floored at 0.
SynthPanel generate_detailed(const SynthConfig& config);
GroupedPanel generate(const SynthConfig& config);

}  // namespace parity
