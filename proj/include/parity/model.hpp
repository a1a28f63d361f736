#pragma once

#include "parity/loss.hpp"
#include "parity/panel.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace parity {

enum class OptimizerKind { Sgd, Momentum, Adam };

std::string_view optimizer_name(OptimizerKind kind) noexcept;
OptimizerKind parse_optimizer(std::string_view name);

struct ModelConfig {
  std::size_t encoder_len = 21;
  std::size_t horizon = 7;
  std::vector<double> quantiles{kDefaultQuantiles.begin(), kDefaultQuantiles.end()};
  std::vector<std::size_t> hidden_sizes{16};
  double learning_rate = 0.05;
  std::size_t batch_size = 64;
  std::size_t epochs = 50;
  std::uint64_t seed = 1;
  bool use_static = true;       // demographics and log population as inputs
  bool sort_quantiles = false;  // post-sort forecasts per lookahead
  OptimizerKind optimizer = OptimizerKind::Sgd;
  double momentum = 0.9;        // Momentum only
};

/// Throws Error(Config) on invalid values.
void validate(const ModelConfig& config);

std::size_t input_size(const ModelConfig& config) noexcept;
std::size_t output_size(const ModelConfig& config) noexcept;
std::size_t parameter_count(const ModelConfig& config) noexcept;

/// Global affine scalings fitted on the training windows. Targets are turned
/// into rates per 1,000 persons before standardizing, so units of any size
/// share one scale:
///   z = (1000 * cases / population - target_mean) / target_scale
struct FeatureScaling {
  double target_mean = 0.0;
  double target_scale = 1.0;
  double exog_mean = 0.0;
  double exog_scale = 1.0;
  double log_pop_mean = 0.0;
  double log_pop_scale = 1.0;
};

FeatureScaling fit_scaling(std::span<const WindowSample> windows);

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;
};

struct TrainedModel {
  ModelConfig config;
  FeatureScaling scaling;
  std::vector<DenseLayer> layers;       // tanh hidden layers, then linear output
  std::vector<DenseLayer> group_heads;  // per-group output heads (sufficiency)
  std::string method = "none";
  std::vector<double> loss_history;     // [0] before training, [e] after epoch e
  std::string config_hash;

  /// Parameters of `layers` flattened in order (weights row-major, then bias).
  std::vector<double> flat_parameters() const;
  void set_flat_parameters(std::span<const double> values);
};

/// Random initialization: weights ~ N(0, 1/fan_in), biases 0.
TrainedModel init_model(const ModelConfig& config, const FeatureScaling& scaling);

/// Input matrix, one column per sample. Throws Error(Dimension) when a window
/// does not match the model's encoder length or horizon.
Eigen::MatrixXd encode_inputs(const TrainedModel& model, std::span<const WindowSample> batch);

/// Case units -> scaled target space, and back.
double to_scaled(const FeatureScaling& s, double cases, std::int64_t population);
double to_cases(const FeatureScaling& s, double z, std::int64_t population);

struct ForwardCache {
  std::vector<Eigen::MatrixXd> activations;  // [0] = input, then each hidden output
  Eigen::MatrixXd output;                    // (H*Q) x n, scaled space
};

ForwardCache forward_cached(const TrainedModel& model, const Eigen::MatrixXd& inputs);

/// Gradients shaped like model.layers.
struct Gradients {
  std::vector<DenseLayer> layers;
  Eigen::MatrixXd input;  // d/d(trunk output), used by group heads
};

/// Backpropagates d objective / d output (same shape as cache.output).
/// `d_trunk` optionally adds a gradient with respect to the input of the
/// output layer (the shared trunk that group heads also read).
Gradients backward(const TrainedModel& model, const ForwardCache& cache, const Eigen::MatrixXd& d_output,
                   const Eigen::MatrixXd* d_trunk = nullptr);

/// Per-sample forecast, H x |Q| values row-major.
struct QuantileForecast {
  std::string unit_id;
  std::size_t horizon = 0;
  std::size_t n_quantiles = 0;
  std::vector<double> values;

  double at(std::size_t h, std::size_t q) const { return values[h * n_quantiles + q]; }
  std::span<const double> lookahead(std::size_t h) const {
    return std::span<const double>(values).subspan(h * n_quantiles, n_quantiles);
  }
};

/// Raw network outputs in scaled space, one forecast per sample.
std::vector<QuantileForecast> forward_scaled(const TrainedModel& model, std::span<const WindowSample> batch);
/// Forecasts in case units (and sorted per lookahead when sort_quantiles).
std::vector<QuantileForecast> forward(const TrainedModel& model, std::span<const WindowSample> batch);

/// Averaged quantile loss of one sample in scaled space, mean over all
/// lookahead x quantile cells. Same ordering of samples as case-unit pbl up
/// to the positive per-unit factor target_scale * population / 1000.
double scaled_sample_loss(const TrainedModel& model, const WindowSample& sample);

/// Compares backprop gradients of scaled_sample_loss against central
/// differences over every parameter. Relative error per parameter is
/// |a - n| / max(|a|, |n|, 1e-7). Throws Error(Kink) if any output cell lies
/// within 10 * epsilon of its target.
double gradient_check(const TrainedModel& model, const WindowSample& sample, double epsilon);

/// JSON checkpoint; see README for the layout.
void save_checkpoint(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_checkpoint(const std::filesystem::path& path);
std::string checkpoint_json(const TrainedModel& model);
TrainedModel checkpoint_from_json(const std::string& text);

}  // namespace parity
