#include "parity/train.hpp"

#include "parity/csv.hpp"
#include "parity/error.hpp"
#include "parity/log.hpp"
#include "parity/rng.hpp"

#include <cmath>
#include <map>
#include <numeric>
#include <ostream>

namespace parity {

void write_diagnostics_header(std::ostream& out) { out << "epoch,batch,covariate,beta,p_value,gate_fired\n"; }

namespace {

// Seed offset for the shuffling stream, so shuffles do not reuse init draws.
constexpr std::uint64_t kShuffleStream = 0x9E3779B97F4A7C15ULL;

class Optimizer {
public:
  explicit Optimizer(const ModelConfig& config) : config_(config) {}

  void step(std::vector<Eigen::Map<Eigen::VectorXd>>& params, const std::vector<Eigen::VectorXd>& grads) {
    if (state_a_.empty()) {
      for (const auto& p : params) {
        state_a_.push_back(Eigen::VectorXd::Zero(p.size()));
        state_b_.push_back(Eigen::VectorXd::Zero(p.size()));
      }
    }
    ++t_;
    const double lr = config_.learning_rate;
    for (std::size_t i = 0; i < params.size(); ++i) {
      switch (config_.optimizer) {
        case OptimizerKind::Sgd:
          params[i] -= lr * grads[i];
          break;
        case OptimizerKind::Momentum:
          state_a_[i] = config_.momentum * state_a_[i] + grads[i];
          params[i] -= lr * state_a_[i];
          break;
        case OptimizerKind::Adam: {
          constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
          state_a_[i] = b1 * state_a_[i] + (1.0 - b1) * grads[i];
          state_b_[i] = b2 * state_b_[i] + (1.0 - b2) * grads[i].cwiseProduct(grads[i]);
          const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
          const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
          params[i].array() -= lr * (state_a_[i].array() / c1) / ((state_b_[i].array() / c2).sqrt() + eps);
          break;
        }
      }
    }
  }

private:
  const ModelConfig& config_;
  std::vector<Eigen::VectorXd> state_a_;
  std::vector<Eigen::VectorXd> state_b_;
  long t_ = 0;
};

Eigen::Map<Eigen::VectorXd> as_vector(Eigen::MatrixXd& m) { return {m.data(), m.size()}; }
Eigen::Map<Eigen::VectorXd> as_vector(Eigen::VectorXd& v) { return {v.data(), v.size()}; }

Eigen::VectorXd flatten(const Eigen::MatrixXd& m) { return Eigen::Map<const Eigen::VectorXd>(m.data(), m.size()); }

std::size_t median_index(const std::vector<double>& quantiles) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < quantiles.size(); ++i) {
    if (std::fabs(quantiles[i] - 0.5) < std::fabs(quantiles[best] - 0.5)) best = i;
  }
  return best;
}

void log_diagnostics(std::ostream& out, std::size_t epoch, std::size_t batch, const DemOptsResult& r) {
  for (std::size_t j = 0; j < kLossCovariates; ++j) {
    out << epoch << ',' << batch << ',' << kCovariateNames[j] << ',';
    if (r.diagnostics) {
      out << csv::format(r.diagnostics->coefficients[j]) << ',' << csv::format(r.diagnostics->p_values[j]);
    } else {
      out << "nan,nan";
    }
    const bool fired = j < kGroupCount && r.gates[j];
    out << ',' << (fired ? 1 : 0) << '\n';
  }
}

}  // namespace

double mean_training_loss(const TrainedModel& model, std::span<const WindowSample> windows) {
  if (windows.empty()) return 0.0;
  const auto forecasts = forward(model, windows);
  double total = 0.0;
  std::size_t rows = 0;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    for (std::size_t h = 0; h < model.config.horizon; ++h) {
      total += pbl_avg(model.config.quantiles, windows[i].horizon_targets[h], forecasts[i].lookahead(h));
      ++rows;
    }
  }
  return total / static_cast<double>(rows);
}

TrainedModel train(std::span<const WindowSample> windows, const ModelConfig& config, const DebiasMethod& debias,
                   const TrainOptions& options) {
  validate(config);
  validate(debias);
  if (windows.empty()) throw Error(ErrorKind::EmptyInput, "train: no training windows");

  TrainedModel model = init_model(config, fit_scaling(windows));
  model.method = std::string(debias_name(debias.kind));
  const bool sufficiency = debias.kind == DebiasKind::Sufficiency;
  if (sufficiency) model.group_heads.assign(kGroupCount, model.layers.back());

  const std::size_t H = config.horizon;
  const std::size_t Q = config.quantiles.size();
  const std::size_t median = median_index(config.quantiles);
  const Eigen::MatrixXd inputs = encode_inputs(model, windows);

  double normalizer = 0.0;
  for (const auto& w : windows) {
    for (double y : w.horizon_targets) normalizer += y;
  }
  normalizer /= static_cast<double>(windows.size() * H);
  if (!(normalizer > 0.0)) normalizer = 1.0;

  std::vector<std::size_t> order(windows.size());
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle_rng(config.seed ^ kShuffleStream);
  Optimizer optimizer(config);


  model.loss_history.push_back(mean_training_loss(model, windows));

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_index) {
      const std::size_t b = std::min(config.batch_size, order.size() - start);
      if (b == 0) throw Error(ErrorKind::Internal, "train: empty batch");
      Eigen::MatrixXd x(inputs.rows(), static_cast<Eigen::Index>(b));
      for (std::size_t i = 0; i < b; ++i) x.col(static_cast<Eigen::Index>(i)) = inputs.col(static_cast<Eigen::Index>(order[start + i]));

      const ForwardCache cache = forward_cached(model, x);
      const std::size_t rows = b * H;

      // Row r = i * H + h.
      BatchContext ctx;
      ctx.losses.resize(rows);
      ctx.demographics.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(kGroupCount));
      ctx.lookahead.resize(rows);
      ctx.labels.resize(rows);
      ctx.residuals.resize(rows);
      // d pbl_r / d z for every output cell, before row weights.
      Eigen::MatrixXd d_loss(static_cast<Eigen::Index>(H * Q), static_cast<Eigen::Index>(b));
      std::vector<double> preds(Q);
      for (std::size_t i = 0; i < b; ++i) {
        const WindowSample& w = windows[order[start + i]];
        const double cases_per_z = model.scaling.target_scale * static_cast<double>(w.population) / 1000.0;
        const Group label = dominant_group(w.demo);
        for (std::size_t h = 0; h < H; ++h) {
          const std::size_t r = i * H + h;
          const double y = w.horizon_targets[h];
          for (std::size_t q = 0; q < Q; ++q) {
            const auto cell = static_cast<Eigen::Index>(h * Q + q);
            preds[q] = to_cases(model.scaling, cache.output(cell, static_cast<Eigen::Index>(i)), w.population);
            d_loss(cell, static_cast<Eigen::Index>(i)) =
                pinball_grad(config.quantiles[q], y, preds[q]) / static_cast<double>(Q) * cases_per_z;
          }
          ctx.losses[r] = pbl_avg(config.quantiles, y, preds);
          for (std::size_t g = 0; g < kGroupCount; ++g) {
            ctx.demographics(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(g)) = w.demo[g];
          }
          ctx.lookahead[r] = WindowSample::lookahead(h);
          ctx.labels[r] = label;
          ctx.residuals[r] = y - preds[median];
        }
      }

      std::vector<double> row_weight(rows, 1.0);
      std::optional<DemOptsResult> demopts;
      double objective = 0.0;
      const double row_scale = 1.0 / (static_cast<double>(rows) * normalizer);
      Eigen::MatrixXd d_out(d_loss.rows(), d_loss.cols());

      if (debias.kind == DebiasKind::DemOpts) {
        demopts = demopts_adjust(ctx, debias.p_threshold, debias.compounding);
        row_weight = demopts->weights;
        for (double a : demopts->adjusted) objective += a;
        objective /= static_cast<double>(rows);
        if (options.diagnostics_log) log_diagnostics(*options.diagnostics_log, epoch, batch_index, *demopts);
      } else {
        for (double l : ctx.losses) objective += l;
        objective /= static_cast<double>(rows);
      }
      for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t h = 0; h < H; ++h) {
          const double wr = row_weight[i * H + h] * row_scale;
          for (std::size_t q = 0; q < Q; ++q) {
            const auto cell = static_cast<Eigen::Index>(h * Q + q);
            d_out(cell, static_cast<Eigen::Index>(i)) = wr * d_loss(cell, static_cast<Eigen::Index>(i));
          }
        }
      }

      if (debias.kind == DebiasKind::Individual || debias.kind == DebiasKind::Group) {
        BatchContext scaled = ctx;
        for (double& l : scaled.losses) l /= normalizer;
        for (double& r : scaled.residuals) r /= normalizer;
        const bool individual = debias.kind == DebiasKind::Individual;
        const double adjusted = individual ? individual_penalty(scaled, debias.penalty_weight)
                                           : group_penalty(scaled, debias.penalty_weight);
        objective = adjusted * normalizer;
        const std::vector<double> g = individual ? individual_penalty_grad(scaled) : group_penalty_grad(scaled);
        // residual = y - pred_median; d residual / d z = -cases_per_z / normalizer
        for (std::size_t i = 0; i < b; ++i) {
          const WindowSample& w = windows[order[start + i]];
          const double cases_per_z = model.scaling.target_scale * static_cast<double>(w.population) / 1000.0;
          for (std::size_t h = 0; h < H; ++h) {
            const auto cell = static_cast<Eigen::Index>(h * Q + median);
            d_out(cell, static_cast<Eigen::Index>(i)) -=
                debias.penalty_weight * g[i * H + h] * cases_per_z / normalizer;
          }
        }
      }

      std::vector<Gradients> head_grads;
      Eigen::MatrixXd d_trunk;
      if (sufficiency) {
        const Eigen::MatrixXd& trunk = cache.activations.back();
        d_trunk = Eigen::MatrixXd::Zero(trunk.rows(), trunk.cols());
        std::map<Group, double> gaps;
        std::vector<std::vector<std::size_t>> members(kGroupCount);
        for (std::size_t i = 0; i < b; ++i) {
          members[static_cast<std::size_t>(ctx.labels[i * H])].push_back(i);
        }
        std::size_t present = 0;
        for (const auto& m : members) present += m.empty() ? 0 : 1;
        head_grads.resize(kGroupCount);
        for (std::size_t g = 0; g < kGroupCount; ++g) {
          const DenseLayer& head = model.group_heads[g];
          head_grads[g].layers.resize(1);
          head_grads[g].layers[0].weight = Eigen::MatrixXd::Zero(head.weight.rows(), head.weight.cols());
          head_grads[g].layers[0].bias = Eigen::VectorXd::Zero(head.bias.size());
          if (members[g].empty()) continue;
          const auto m = static_cast<Eigen::Index>(members[g].size());
          Eigen::MatrixXd t(trunk.rows(), m), joint(cache.output.rows(), m);
          for (Eigen::Index c = 0; c < m; ++c) {
            t.col(c) = trunk.col(static_cast<Eigen::Index>(members[g][static_cast<std::size_t>(c)]));
            joint.col(c) = cache.output.col(static_cast<Eigen::Index>(members[g][static_cast<std::size_t>(c)]));
          }
          Eigen::MatrixXd z = head.weight * t;
          z.colwise() += head.bias;
          const double cells = static_cast<double>(z.size());
          const Eigen::MatrixXd diff = joint - z;
          gaps[kGroups[g]] = diff.squaredNorm() / cells;
          const double pen_scale = debias.penalty_weight / static_cast<double>(present) * 2.0 / cells;

          // Head's own pinball loss on its group's rows (trunk detached).
          Eigen::MatrixXd d_head_loss(z.rows(), m);
          for (Eigen::Index c = 0; c < m; ++c) {
            const std::size_t i = members[g][static_cast<std::size_t>(c)];
            const WindowSample& w = windows[order[start + i]];
            const double cases_per_z = model.scaling.target_scale * static_cast<double>(w.population) / 1000.0;
            for (std::size_t h = 0; h < H; ++h) {
              for (std::size_t q = 0; q < Q; ++q) {
                const auto cell = static_cast<Eigen::Index>(h * Q + q);
                preds[q] = to_cases(model.scaling, z(cell, c), w.population);
                d_head_loss(cell, c) = pinball_grad(config.quantiles[q], w.horizon_targets[h], preds[q]) /
                                       static_cast<double>(Q) * cases_per_z /
                                       (static_cast<double>(members[g].size() * H) * normalizer);
              }
            }
          }
          const Eigen::MatrixXd d_pen_head = -pen_scale * diff;
          for (Eigen::Index c = 0; c < m; ++c) {
            const auto col = static_cast<Eigen::Index>(members[g][static_cast<std::size_t>(c)]);
            d_out.col(col) += pen_scale * diff.col(c);
          }
          const Eigen::MatrixXd d_z = d_pen_head + d_head_loss;
          head_grads[g].layers[0].weight = d_z * t.transpose();
          head_grads[g].layers[0].bias = d_z.rowwise().sum();
          const Eigen::MatrixXd d_t = head.weight.transpose() * d_pen_head;
          for (Eigen::Index c = 0; c < m; ++c) {
            d_trunk.col(static_cast<Eigen::Index>(members[g][static_cast<std::size_t>(c)])) += d_t.col(c);
          }
        }
        // Sufficiency scalar in case units; gaps live in scaled space.
        objective = sufficiency_penalty(objective, gaps, debias.penalty_weight * normalizer);
      }

      if (!std::isfinite(objective)) {
        throw Error(ErrorKind::Divergence, "non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                               std::to_string(batch_index));
      }

      const Gradients grads = backward(model, cache, d_out, sufficiency && config.hidden_sizes.size() > 0 ? &d_trunk : nullptr);

      std::vector<Eigen::Map<Eigen::VectorXd>> params;
      std::vector<Eigen::VectorXd> flat_grads;
      for (std::size_t l = 0; l < model.layers.size(); ++l) {
        params.push_back(as_vector(model.layers[l].weight));
        flat_grads.push_back(flatten(grads.layers[l].weight));
        params.push_back(as_vector(model.layers[l].bias));
        flat_grads.push_back(grads.layers[l].bias);
      }
      for (std::size_t g = 0; g < model.group_heads.size(); ++g) {
        params.push_back(as_vector(model.group_heads[g].weight));
        flat_grads.push_back(flatten(head_grads[g].layers[0].weight));
        params.push_back(as_vector(model.group_heads[g].bias));
        flat_grads.push_back(head_grads[g].layers[0].bias);
      }
      for (const auto& g : flat_grads) {
        if (!g.allFinite()) {
          throw Error(ErrorKind::Divergence, "non-finite gradient at epoch " + std::to_string(epoch) + ", batch " +
                                                 std::to_string(batch_index));
        }
      }
      optimizer.step(params, flat_grads);

      if (options.observer) {
        options.observer(BatchRecord{epoch, batch_index, ctx, demopts ? &*demopts : nullptr, objective, model});
      }
    }
    const double epoch_loss = mean_training_loss(model, windows);
    if (!std::isfinite(epoch_loss)) {
      throw Error(ErrorKind::Divergence, "non-finite loss after epoch " + std::to_string(epoch));
    }
    model.loss_history.push_back(epoch_loss);
    log::debug("epoch " + std::to_string(epoch) + " loss " + csv::format(epoch_loss));
  }
  return model;
}

}  // namespace parity
