#include "parity/model.hpp"

#include "parity/error.hpp"
#include "parity/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace parity {

std::string_view optimizer_name(OptimizerKind kind) noexcept {
  switch (kind) {
    case OptimizerKind::Sgd: return "sgd";
    case OptimizerKind::Momentum: return "momentum";
    case OptimizerKind::Adam: return "adam";
  }
  return "sgd";
}

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "sgd") return OptimizerKind::Sgd;
  if (name == "momentum") return OptimizerKind::Momentum;
  if (name == "adam") return OptimizerKind::Adam;
  throw Error(ErrorKind::Config, "unknown optimizer '" + std::string(name) + "'");
}

void validate(const ModelConfig& c) {
  if (c.encoder_len == 0) throw Error(ErrorKind::Config, "encoder_len must be >= 1");
  if (c.horizon == 0) throw Error(ErrorKind::Config, "horizon must be >= 1");
  if (c.quantiles.empty()) throw Error(ErrorKind::Config, "quantiles must not be empty");
  for (std::size_t i = 0; i < c.quantiles.size(); ++i) {
    if (!(c.quantiles[i] > 0.0 && c.quantiles[i] < 1.0)) {
      throw Error(ErrorKind::Config, "quantiles must lie in (0,1)");
    }
    if (i > 0 && !(c.quantiles[i] > c.quantiles[i - 1])) {
      throw Error(ErrorKind::Config, "quantiles must be strictly increasing");
    }
  }
  for (std::size_t h : c.hidden_sizes) {
    if (h == 0) throw Error(ErrorKind::Config, "hidden sizes must be >= 1");
  }
  if (!(c.learning_rate >= 0.0) || !std::isfinite(c.learning_rate)) {
    throw Error(ErrorKind::Config, "learning_rate must be a finite value >= 0");
  }
  if (c.batch_size == 0) throw Error(ErrorKind::Config, "batch_size must be >= 1");
  if (!(c.momentum >= 0.0 && c.momentum < 1.0)) throw Error(ErrorKind::Config, "momentum must be in [0,1)");
}

std::size_t input_size(const ModelConfig& c) noexcept {
  return 2 * c.encoder_len + 1 + (c.use_static ? kGroupCount + 1 : 0);
}

std::size_t output_size(const ModelConfig& c) noexcept { return c.horizon * c.quantiles.size(); }

std::size_t parameter_count(const ModelConfig& c) noexcept {
  std::size_t total = 0;
  std::size_t in = input_size(c);
  for (std::size_t h : c.hidden_sizes) {
    total += h * in + h;
    in = h;
  }
  return total + output_size(c) * in + output_size(c);
}

FeatureScaling fit_scaling(std::span<const WindowSample> windows) {
  FeatureScaling s;
  if (windows.empty()) return s;
  auto mean_sd = [](const std::vector<double>& v, double& mean, double& sd) {
    if (v.empty()) return;
    double sum = 0.0;
    for (double x : v) sum += x;
    mean = sum / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    sd = std::sqrt(ss / static_cast<double>(v.size()));
    if (!(sd > 1e-12)) sd = 1.0;
  };
  std::vector<double> rates, exog, log_pop;
  for (const auto& w : windows) {
    const double per = 1000.0 / static_cast<double>(w.population);
    for (double y : w.encoder_target) rates.push_back(y * per);
    for (double y : w.horizon_targets) rates.push_back(y * per);
    if (w.exog_present) exog.insert(exog.end(), w.encoder_exog.begin(), w.encoder_exog.end());
    log_pop.push_back(std::log(static_cast<double>(w.population)));
  }
  mean_sd(rates, s.target_mean, s.target_scale);
  mean_sd(exog, s.exog_mean, s.exog_scale);
  mean_sd(log_pop, s.log_pop_mean, s.log_pop_scale);
  return s;
}

std::vector<double> TrainedModel::flat_parameters() const {
  std::vector<double> out;
  for (const auto& l : layers) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) out.push_back(l.weight(r, c));
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) out.push_back(l.bias(r));
  }
  return out;
}

void TrainedModel::set_flat_parameters(std::span<const double> values) {
  std::size_t i = 0;
  for (auto& l : layers) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) {
        if (i >= values.size()) throw Error(ErrorKind::Dimension, "set_flat_parameters: too few values");
        l.weight(r, c) = values[i++];
      }
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) {
      if (i >= values.size()) throw Error(ErrorKind::Dimension, "set_flat_parameters: too few values");
      l.bias(r) = values[i++];
    }
  }
  if (i != values.size()) throw Error(ErrorKind::Dimension, "set_flat_parameters: too many values");
}

TrainedModel init_model(const ModelConfig& config, const FeatureScaling& scaling) {
  validate(config);
  TrainedModel m;
  m.config = config;
  m.scaling = scaling;
  Rng rng(config.seed);
  std::size_t in = input_size(config);
  auto make = [&](std::size_t out_dim, std::size_t in_dim) {
    DenseLayer l;
    l.weight.resize(static_cast<Eigen::Index>(out_dim), static_cast<Eigen::Index>(in_dim));
    const double sd = 1.0 / std::sqrt(static_cast<double>(in_dim));
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = rng.normal(0.0, sd);
    }
    l.bias = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(out_dim));
    return l;
  };
  for (std::size_t h : config.hidden_sizes) {
    m.layers.push_back(make(h, in));
    in = h;
  }
  m.layers.push_back(make(output_size(config), in));
  return m;
}

double to_scaled(const FeatureScaling& s, double cases, std::int64_t population) {
  return (1000.0 * cases / static_cast<double>(population) - s.target_mean) / s.target_scale;
}

double to_cases(const FeatureScaling& s, double z, std::int64_t population) {
  return (z * s.target_scale + s.target_mean) * static_cast<double>(population) / 1000.0;
}

Eigen::MatrixXd encode_inputs(const TrainedModel& model, std::span<const WindowSample> batch) {
  const auto& c = model.config;
  const auto& s = model.scaling;
  Eigen::MatrixXd x(static_cast<Eigen::Index>(input_size(c)), static_cast<Eigen::Index>(batch.size()));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const WindowSample& w = batch[i];
    if (w.encoder_len() != c.encoder_len || w.horizon() != c.horizon || w.encoder_exog.size() != c.encoder_len) {
      throw Error(ErrorKind::Dimension, "window for unit '" + w.unit_id + "' has E=" +
                                            std::to_string(w.encoder_len()) + ", H=" + std::to_string(w.horizon()) +
                                            "; model expects E=" + std::to_string(c.encoder_len) +
                                            ", H=" + std::to_string(c.horizon));
    }
    const auto col = static_cast<Eigen::Index>(i);
    Eigen::Index r = 0;
    for (double y : w.encoder_target) x(r++, col) = to_scaled(s, y, w.population);
    for (double e : w.encoder_exog) x(r++, col) = w.exog_present ? (e - s.exog_mean) / s.exog_scale : 0.0;
    x(r++, col) = w.exog_present ? 1.0 : 0.0;
    if (c.use_static) {
      for (double f : w.demo) x(r++, col) = f;
      x(r++, col) = (std::log(static_cast<double>(w.population)) - s.log_pop_mean) / s.log_pop_scale;
    }
  }
  return x;
}

ForwardCache forward_cached(const TrainedModel& model, const Eigen::MatrixXd& inputs) {
  ForwardCache cache;
  cache.activations.reserve(model.layers.size());
  cache.activations.push_back(inputs);
  for (std::size_t l = 0; l + 1 < model.layers.size(); ++l) {
    const auto& layer = model.layers[l];
    Eigen::MatrixXd pre = layer.weight * cache.activations.back();
    pre.colwise() += layer.bias;
    cache.activations.push_back(pre.array().tanh().matrix());
  }
  const auto& out = model.layers.back();
  cache.output = out.weight * cache.activations.back();
  cache.output.colwise() += out.bias;
  return cache;
}

Gradients backward(const TrainedModel& model, const ForwardCache& cache, const Eigen::MatrixXd& d_output,
                   const Eigen::MatrixXd* d_trunk) {
  Gradients g;
  g.layers.resize(model.layers.size());
  Eigen::MatrixXd delta = d_output;
  for (std::size_t l = model.layers.size(); l-- > 0;) {
    const Eigen::MatrixXd& a_in = cache.activations[l];
    g.layers[l].weight = delta * a_in.transpose();
    g.layers[l].bias = delta.rowwise().sum();
    Eigen::MatrixXd d_in = model.layers[l].weight.transpose() * delta;
    if (d_trunk != nullptr && l + 1 == model.layers.size()) d_in += *d_trunk;
    if (l == 0) {
      g.input = std::move(d_in);
      break;
    }
    // a_in = tanh(pre), da/dpre = 1 - a^2
    delta = d_in.array() * (1.0 - a_in.array().square());
  }
  return g;
}

namespace {

std::vector<QuantileForecast> unpack(const TrainedModel& model, std::span<const WindowSample> batch,
                                     const Eigen::MatrixXd& out, bool to_case_units) {
  const std::size_t H = model.config.horizon;
  const std::size_t Q = model.config.quantiles.size();
  std::vector<QuantileForecast> result;
  result.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    QuantileForecast f;
    f.unit_id = batch[i].unit_id;
    f.horizon = H;
    f.n_quantiles = Q;
    f.values.resize(H * Q);
    for (std::size_t j = 0; j < H * Q; ++j) {
      const double z = out(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
      f.values[j] = to_case_units ? to_cases(model.scaling, z, batch[i].population) : z;
    }
    if (to_case_units && model.config.sort_quantiles) {
      for (std::size_t h = 0; h < H; ++h) {
        std::sort(f.values.begin() + static_cast<std::ptrdiff_t>(h * Q),
                  f.values.begin() + static_cast<std::ptrdiff_t>((h + 1) * Q));
      }
    }
    for (double v : f.values) {
      if (!std::isfinite(v)) throw Error(ErrorKind::Divergence, "non-finite forecast for unit '" + f.unit_id + "'");
    }
    result.push_back(std::move(f));
  }
  return result;
}

}  // namespace

std::vector<QuantileForecast> forward_scaled(const TrainedModel& model, std::span<const WindowSample> batch) {
  const ForwardCache cache = forward_cached(model, encode_inputs(model, batch));
  return unpack(model, batch, cache.output, false);
}

std::vector<QuantileForecast> forward(const TrainedModel& model, std::span<const WindowSample> batch) {
  const ForwardCache cache = forward_cached(model, encode_inputs(model, batch));
  return unpack(model, batch, cache.output, true);
}

double scaled_sample_loss(const TrainedModel& model, const WindowSample& sample) {
  const auto& c = model.config;
  const ForwardCache cache = forward_cached(model, encode_inputs(model, std::span(&sample, 1)));
  const std::size_t Q = c.quantiles.size();
  double total = 0.0;
  for (std::size_t h = 0; h < c.horizon; ++h) {
    const double y = to_scaled(model.scaling, sample.horizon_targets[h], sample.population);
    for (std::size_t q = 0; q < Q; ++q) {
      total += pinball(c.quantiles[q], y, cache.output(static_cast<Eigen::Index>(h * Q + q), 0));
    }
  }
  return total / static_cast<double>(c.horizon * Q);
}

double gradient_check(const TrainedModel& model, const WindowSample& sample, double epsilon) {
  if (!(epsilon > 0.0)) throw Error(ErrorKind::Domain, "gradient_check: epsilon must be > 0");
  const auto& c = model.config;
  const std::size_t H = c.horizon;
  const std::size_t Q = c.quantiles.size();
  const ForwardCache cache = forward_cached(model, encode_inputs(model, std::span(&sample, 1)));

  Eigen::MatrixXd d_out(static_cast<Eigen::Index>(H * Q), 1);
  const double cells = static_cast<double>(H * Q);
  for (std::size_t h = 0; h < H; ++h) {
    const double y = to_scaled(model.scaling, sample.horizon_targets[h], sample.population);
    for (std::size_t q = 0; q < Q; ++q) {
      const auto row = static_cast<Eigen::Index>(h * Q + q);
      const double p = cache.output(row, 0);
      if (std::fabs(y - p) < 10.0 * epsilon) {
        throw Error(ErrorKind::Kink, "gradient_check: lookahead " + std::to_string(h + 1) + ", quantile " +
                                         std::to_string(c.quantiles[q]) +
                                         " sits on the pinball kink; re-seed the model or pick another sample");
      }
      d_out(row, 0) = pinball_grad(c.quantiles[q], y, p) / cells;
    }
  }
  const Gradients g = backward(model, cache, d_out);

  std::vector<double> analytic;
  for (const auto& l : g.layers) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index col = 0; col < l.weight.cols(); ++col) analytic.push_back(l.weight(r, col));
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) analytic.push_back(l.bias(r));
  }

  TrainedModel probe = model;
  std::vector<double> params = model.flat_parameters();
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + epsilon;
    probe.set_flat_parameters(params);
    const double up = scaled_sample_loss(probe, sample);
    params[i] = saved - epsilon;
    probe.set_flat_parameters(params);
    const double down = scaled_sample_loss(probe, sample);
    params[i] = saved;
    const double numeric = (up - down) / (2.0 * epsilon);
    const double denom = std::max({std::fabs(analytic[i]), std::fabs(numeric), 1e-7});
    worst = std::max(worst, std::fabs(analytic[i] - numeric) / denom);
  }
  return worst;
}

namespace {

using nlohmann::json;

json layer_to_json(const DenseLayer& l) {
  json j;
  j["rows"] = l.weight.rows();
  j["cols"] = l.weight.cols();
  std::vector<double> w;
  w.reserve(static_cast<std::size_t>(l.weight.size()));
  for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
    for (Eigen::Index c = 0; c < l.weight.cols(); ++c) w.push_back(l.weight(r, c));
  }
  j["weight"] = w;
  j["bias"] = std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size());
  return j;
}

DenseLayer layer_from_json(const json& j) {
  DenseLayer l;
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto w = j.at("weight").get<std::vector<double>>();
  const auto b = j.at("bias").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(w.size()) != rows * cols || static_cast<Eigen::Index>(b.size()) != rows) {
    throw Error(ErrorKind::Parse, "checkpoint layer has inconsistent sizes");
  }
  l.weight.resize(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) l.weight(r, c) = w[static_cast<std::size_t>(r * cols + c)];
  }
  l.bias = Eigen::Map<const Eigen::VectorXd>(b.data(), rows);
  return l;
}

constexpr const char* kCheckpointFormat = "parity-forecast-checkpoint";
constexpr int kCheckpointVersion = 1;

}  // namespace

std::string checkpoint_json(const TrainedModel& m) {
  json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["method"] = m.method;
  j["config_hash"] = m.config_hash;
  const auto& c = m.config;
  j["config"] = {
      {"encoder_len", c.encoder_len}, {"horizon", c.horizon},
      {"quantiles", c.quantiles},     {"hidden_sizes", c.hidden_sizes},
      {"learning_rate", c.learning_rate}, {"batch_size", c.batch_size},
      {"epochs", c.epochs},           {"seed", c.seed},
      {"use_static", c.use_static},   {"sort_quantiles", c.sort_quantiles},
      {"optimizer", std::string(optimizer_name(c.optimizer))}, {"momentum", c.momentum},
  };
  const auto& s = m.scaling;
  j["scaling"] = {
      {"target_mean", s.target_mean},   {"target_scale", s.target_scale},
      {"exog_mean", s.exog_mean},       {"exog_scale", s.exog_scale},
      {"log_pop_mean", s.log_pop_mean}, {"log_pop_scale", s.log_pop_scale},
  };
  j["layers"] = json::array();
  for (const auto& l : m.layers) j["layers"].push_back(layer_to_json(l));
  j["group_heads"] = json::array();
  for (const auto& l : m.group_heads) j["group_heads"].push_back(layer_to_json(l));
  j["loss_history"] = m.loss_history;
  return j.dump(1);
}

TrainedModel checkpoint_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("checkpoint: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != kCheckpointFormat) {
      throw Error(ErrorKind::Parse, "checkpoint: unknown format tag");
    }
    if (j.at("version").get<int>() != kCheckpointVersion) {
      throw Error(ErrorKind::Parse, "checkpoint: unsupported version");
    }
    TrainedModel m;
    m.method = j.at("method").get<std::string>();
    m.config_hash = j.value("config_hash", "");
    const json& c = j.at("config");
    m.config.encoder_len = c.at("encoder_len").get<std::size_t>();
    m.config.horizon = c.at("horizon").get<std::size_t>();
    m.config.quantiles = c.at("quantiles").get<std::vector<double>>();
    m.config.hidden_sizes = c.at("hidden_sizes").get<std::vector<std::size_t>>();
    m.config.learning_rate = c.at("learning_rate").get<double>();
    m.config.batch_size = c.at("batch_size").get<std::size_t>();
    m.config.epochs = c.at("epochs").get<std::size_t>();
    m.config.seed = c.at("seed").get<std::uint64_t>();
    m.config.use_static = c.at("use_static").get<bool>();
    m.config.sort_quantiles = c.at("sort_quantiles").get<bool>();
    m.config.optimizer = parse_optimizer(c.at("optimizer").get<std::string>());
    m.config.momentum = c.at("momentum").get<double>();
    validate(m.config);
    const json& s = j.at("scaling");
    m.scaling.target_mean = s.at("target_mean").get<double>();
    m.scaling.target_scale = s.at("target_scale").get<double>();
    m.scaling.exog_mean = s.at("exog_mean").get<double>();
    m.scaling.exog_scale = s.at("exog_scale").get<double>();
    m.scaling.log_pop_mean = s.at("log_pop_mean").get<double>();
    m.scaling.log_pop_scale = s.at("log_pop_scale").get<double>();
    for (const auto& l : j.at("layers")) m.layers.push_back(layer_from_json(l));
    for (const auto& l : j.at("group_heads")) m.group_heads.push_back(layer_from_json(l));
    m.loss_history = j.at("loss_history").get<std::vector<double>>();

    // Shape check against the config.
    std::size_t in = input_size(m.config);
    std::vector<std::size_t> dims = m.config.hidden_sizes;
    dims.push_back(output_size(m.config));
    if (m.layers.size() != dims.size()) throw Error(ErrorKind::Dimension, "checkpoint: layer count mismatch");
    for (std::size_t l = 0; l < dims.size(); ++l) {
      if (static_cast<std::size_t>(m.layers[l].weight.rows()) != dims[l] ||
          static_cast<std::size_t>(m.layers[l].weight.cols()) != in) {
        throw Error(ErrorKind::Dimension, "checkpoint: layer " + std::to_string(l) + " shape mismatch");
      }
      in = dims[l];
    }
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const TrainedModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << checkpoint_json(model) << '\n';
}

TrainedModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return checkpoint_from_json(buf.str());
}

}  // namespace parity
