#pragma once

#include "parity/debias.hpp"
#include "parity/model.hpp"

#include <functional>
#include <iosfwd>
#include <span>

namespace parity {

/// Handed to the observer after each parameter update.
struct BatchRecord {
  std::size_t epoch = 0;
  std::size_t batch = 0;
  const BatchContext& context;      // case-unit losses of this batch, before adjustment
  const DemOptsResult* demopts;     // DemOpts runs only
  double objective = 0.0;           // scalar batch loss after de-biasing, case units
  const TrainedModel& model;        // parameters after the update
};

using TrainObserver = std::function<void(const BatchRecord&)>;

struct TrainOptions {
  TrainObserver observer;
  /// DemOpts per-batch regression log, CSV
  /// `epoch,batch,covariate,beta,p_value,gate_fired`; the caller writes the
  /// header.
  std::ostream* diagnostics_log = nullptr;
};

void write_diagnostics_header(std::ostream& out);

/// Mini-batch training. Each epoch shuffles the windows (seeded from
/// config.seed), then per batch: forward pass, quantile-averaged pinball loss
/// per (sample, lookahead) row in case units, the de-biasing step, backprop,
/// parameter update.
///
/// The optimized scalar is the de-biased batch loss divided by the mean
/// training target in cases, a constant that keeps step sizes independent of
/// the panel's case scale. De-biasing weights and regression results are
/// constants for backprop.
///
/// Throws Error(EmptyInput) on an empty set and Error(Divergence) naming the
/// epoch and batch when the loss stops being finite.
TrainedModel train(std::span<const WindowSample> windows, const ModelConfig& config, const DebiasMethod& debias,
                   const TrainOptions& options = {});

/// Mean case-unit pbl over every (window, lookahead) row.
double mean_training_loss(const TrainedModel& model, std::span<const WindowSample> windows);

}  // namespace parity
