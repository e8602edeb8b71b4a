#include "eql/trainer.hpp"

#include "eql/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace eql {

void TrainConfig::validate() const {
  require(lambda >= 0.0 && std::isfinite(lambda), ErrorCode::InvalidArgument, "lambda must be >= 0");
  require(epochs >= 1, ErrorCode::InvalidArgument, "epochs must be >= 1");
  require(batch_size >= 1, ErrorCode::InvalidArgument, "batch_size must be >= 1");
  require(alpha > 0.0, ErrorCode::InvalidArgument, "alpha must be > 0");
  require(t1_frac >= 0.0 && t1_frac < t2_frac && t2_frac <= 1.0, ErrorCode::InvalidArgument,
          "phase breakpoints must satisfy 0 <= t1_frac < t2_frac <= 1");
  require(clamp_threshold > 0.0, ErrorCode::InvalidArgument, "clamp_threshold must be > 0");
}

AdamState AdamState::zeros_like(const NetworkParams& params) {
  return {Gradients::zeros_like(params), Gradients::zeros_like(params), 0};
}

SparsityMask SparsityMask::none_like(const NetworkParams& params) {
  SparsityMask mask;
  for (const auto& layer : params.hidden)
    mask.hidden.push_back(BoolMatrix::Constant(layer.linear.weights.rows(), layer.linear.weights.cols(), false));
  mask.readout = BoolMatrix::Constant(params.readout.weights.rows(), params.readout.weights.cols(), false);
  return mask;
}

std::size_t SparsityMask::frozen_count() const {
  std::size_t n = static_cast<std::size_t>(readout.count());
  for (const auto& m : hidden) n += static_cast<std::size_t>(m.count());
  return n;
}

void SparsityMask::apply(NetworkParams& params) const {
  if (hidden.empty() && readout.size() == 0) return;
  require(hidden.size() == params.hidden.size(), ErrorCode::DimensionMismatch, "mask depth differs from network");
  auto blocks = affine_blocks(params);
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const BoolMatrix& m = i < hidden.size() ? hidden[i] : readout;
    if (m.size() == 0) continue;
    require(m.rows() == blocks[i]->weights.rows() && m.cols() == blocks[i]->weights.cols(),
            ErrorCode::DimensionMismatch, "mask shape differs from weights");
    blocks[i]->weights = m.select(0.0, blocks[i]->weights.array()).matrix();
  }
}

double effective_lambda(int epoch, const TrainConfig& config) {
  const double T = config.epochs;
  if (epoch < config.t1_frac * T) return 0.0;
  if (epoch < config.t2_frac * T) return config.lambda;
  return 0.0;
}

int freeze_epoch(const TrainConfig& config) {
  return static_cast<int>(std::floor(config.t2_frac * config.epochs));
}

double l1_norm(const NetworkParams& params) {
  double s = 0.0;
  for (const Affine* block : affine_blocks(params)) s += block->weights.cwiseAbs().sum();
  return s;
}

double mse(const NetworkParams& params, const Matrix& x, const Matrix& y) {
  require(x.rows() > 0, ErrorCode::InvalidArgument, "empty batch");
  require(y.rows() == x.rows() && y.cols() == params.output_dim, ErrorCode::DimensionMismatch,
          "target shape does not match network output");
  const Matrix out = predict(params, x);
  return (out - y).squaredNorm() / static_cast<double>(x.rows());
}

double loss(const NetworkParams& params, const Matrix& x, const Matrix& y, double lambda_eff) {
  const double data_term = mse(params, x, y);
  return lambda_eff > 0.0 ? data_term + lambda_eff * l1_norm(params) : data_term;
}

namespace {

void add_l1_subgradient(const NetworkParams& params, Gradients& grads, double lambda_eff) {
  if (lambda_eff == 0.0) return;
  auto pblocks = affine_blocks(params);
  auto gblocks = affine_blocks(grads);
  for (std::size_t i = 0; i < pblocks.size(); ++i) {
    // sign(0) = 0
    gblocks[i]->weights.array() += lambda_eff * pblocks[i]->weights.array().sign();
  }
}

// Reusable buffers for one training run.
struct Workspace {
  ForwardCache cache;
  Matrix output;
  Matrix upstream;
  Matrix batch_x;
  Matrix batch_y;
  Gradients grads;
};

void gradient_into(const NetworkParams& params, const Matrix& x, const Matrix& y, double lambda_eff,
                   Workspace& ws) {
  forward_into(params, x, ws.cache, ws.output);
  ws.upstream = (2.0 / static_cast<double>(x.rows())) * (ws.output - y);
  backward_into(params, ws.cache, ws.upstream, ws.grads);
  add_l1_subgradient(params, ws.grads, lambda_eff);
}

}  // namespace

Gradients loss_gradient(const NetworkParams& params, const Matrix& x, const Matrix& y, double lambda_eff) {
  require(x.rows() > 0, ErrorCode::InvalidArgument, "empty batch");
  require(y.rows() == x.rows() && y.cols() == params.output_dim, ErrorCode::DimensionMismatch,
          "target shape does not match network output");
  Workspace ws;
  ws.grads = Gradients::zeros_like(params);
  gradient_into(params, x, y, lambda_eff, ws);
  return std::move(ws.grads);
}

void adam_step(NetworkParams& params, const Gradients& grads, AdamState& state, double alpha,
               const SparsityMask& mask) {
  auto pblocks = affine_blocks(params);
  auto gblocks = affine_blocks(grads);
  if (state.first.hidden.size() != params.hidden.size()) state = AdamState::zeros_like(params);
  auto mblocks = affine_blocks(state.first);
  auto vblocks = affine_blocks(state.second);
  require(gblocks.size() == pblocks.size(), ErrorCode::DimensionMismatch, "gradient depth differs from network");
  for (std::size_t i = 0; i < pblocks.size(); ++i) {
    require(gblocks[i]->weights.rows() == pblocks[i]->weights.rows() &&
                gblocks[i]->weights.cols() == pblocks[i]->weights.cols() &&
                gblocks[i]->bias.size() == pblocks[i]->bias.size(),
            ErrorCode::DimensionMismatch, "gradient shape differs from parameters");
    require(gblocks[i]->weights.allFinite() && gblocks[i]->bias.allFinite(), ErrorCode::NonFinite,
            "non-finite gradient");
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(kAdamBeta1, t);
  const double c2 = 1.0 - std::pow(kAdamBeta2, t);
  auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
    m = kAdamBeta1 * m + (1.0 - kAdamBeta1) * g;
    v = kAdamBeta2 * v + (1.0 - kAdamBeta2) * g.cwiseAbs2();
    param.array() -= alpha * (m.array() / c1) / ((v.array() / c2).sqrt() + kAdamEpsilon);
  };
  for (std::size_t i = 0; i < pblocks.size(); ++i) {
    update(pblocks[i]->weights, gblocks[i]->weights, mblocks[i]->weights, vblocks[i]->weights);
    update(pblocks[i]->bias, gblocks[i]->bias, mblocks[i]->bias, vblocks[i]->bias);
  }
  mask.apply(params);
}

SparsityMask freeze_small_weights(NetworkParams& params, double threshold) {
  require(threshold > 0.0, ErrorCode::InvalidArgument, "freeze threshold must be > 0");
  SparsityMask mask;
  for (auto& layer : params.hidden) mask.hidden.push_back(layer.linear.weights.array().abs() < threshold);
  mask.readout = params.readout.weights.array().abs() < threshold;
  mask.apply(params);
  return mask;
}

std::size_t active_weight_count(const NetworkParams& params, double threshold) {
  std::size_t n = 0;
  for (const Affine* block : affine_blocks(params))
    n += static_cast<std::size_t>((block->weights.array().abs() >= threshold).count());
  return n;
}

TrainedModel train(const LabeledDataset& data, const NetworkSpec& spec, const TrainConfig& config) {
  config.validate();
  data.validate();
  require(data.input_dim() == spec.input_dim && data.output_dim() == spec.output_dim,
          ErrorCode::DimensionMismatch, "dataset dimensions do not match the network spec");
  require(data.rows() >= config.batch_size, ErrorCode::InvalidArgument,
          "dataset has " + std::to_string(data.rows()) + " samples, fewer than batch size " +
              std::to_string(config.batch_size));

  TrainedModel model;
  model.config = config;
  model.params = build_network(spec, config.seed);
  model.mask = SparsityMask::none_like(model.params);
  model.history.reserve(static_cast<std::size_t>(config.epochs));

  std::seed_seq seq{static_cast<std::uint32_t>(config.seed), static_cast<std::uint32_t>(config.seed >> 32),
                    0xb47cu};
  std::mt19937_64 rng(seq);
  const auto n = static_cast<std::size_t>(data.rows());
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  AdamState adam = AdamState::zeros_like(model.params);
  Workspace ws;
  ws.grads = Gradients::zeros_like(model.params);
  const int freeze_at = freeze_epoch(config);
  const auto batch = static_cast<std::size_t>(config.batch_size);
  const SparsityMask no_mask;
  bool frozen = false;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    if (epoch == freeze_at) {
      model.mask = freeze_small_weights(model.params, config.clamp_threshold);
      frozen = true;
    }
    const double lambda_eff = effective_lambda(epoch, config);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += batch) {
      const auto count = static_cast<Eigen::Index>(std::min(batch, n - start));
      ws.batch_x.resize(count, data.x.cols());
      ws.batch_y.resize(count, data.y.cols());
      for (Eigen::Index r = 0; r < count; ++r) {
        ws.batch_x.row(r) = data.x.row(order[start + static_cast<std::size_t>(r)]);
        ws.batch_y.row(r) = data.y.row(order[start + static_cast<std::size_t>(r)]);
      }
      gradient_into(model.params, ws.batch_x, ws.batch_y, lambda_eff, ws);
      try {
        adam_step(model.params, ws.grads, adam, config.alpha, frozen ? model.mask : no_mask);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::NonFinite) throw;
        fail(ErrorCode::Diverged, "training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
      }
    }
    const double epoch_mse = mse(model.params, data.x, data.y);
    if (!std::isfinite(epoch_mse) || epoch_mse > kDivergenceLoss) {
      std::ostringstream msg;
      msg << "training diverged at epoch " << epoch << " (train mse " << epoch_mse << ", lambda "
          << config.lambda << ", seed " << config.seed << ")";
      fail(ErrorCode::Diverged, msg.str());
    }
    model.history.push_back(
        {epoch, epoch_mse, lambda_eff, active_weight_count(model.params, config.clamp_threshold)});
  }
  return model;
}

double rms(const NetworkParams& params, const LabeledDataset& data) {
  require(data.rows() > 0, ErrorCode::InvalidArgument, "rms of an empty dataset");
  require(data.input_dim() == params.input_dim && data.output_dim() == params.output_dim,
          ErrorCode::DimensionMismatch, "dataset dimensions do not match the model");
  return std::sqrt(mse(params, data.x, data.y));
}

}  // namespace eql
