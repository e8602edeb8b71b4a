#pragma once

// Lasso-style objective, Adam updates and the three-phase schedule:
// no penalty before t1, L1 penalty until t2, then L1 off with every weight
// that was below the clamp threshold at t2 pinned to zero.

#include "eql/datasets.hpp"
#include "eql/network.hpp"

#include <cstdint>
#include <vector>

namespace eql {

struct TrainConfig {
  double lambda = 0.0;
  int epochs = 1000;  // T
  int batch_size = 20;
  double alpha = 1e-3;
  double t1_frac = 0.25;
  double t2_frac = 0.95;
  double clamp_threshold = 1e-3;
  std::uint64_t seed = 0;

  void validate() const;
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEpsilon = 1e-8;
inline constexpr double kDivergenceLoss = 1e10;

struct AdamState {
  Gradients first;
  Gradients second;
  std::int64_t step = 0;

  static AdamState zeros_like(const NetworkParams& params);
};

using BoolMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

// true = weight frozen at zero. Empty matrices mean "nothing frozen".
struct SparsityMask {
  std::vector<BoolMatrix> hidden;
  BoolMatrix readout;

  static SparsityMask none_like(const NetworkParams& params);
  std::size_t frozen_count() const;
  bool empty() const { return frozen_count() == 0; }
  void apply(NetworkParams& params) const;
};

struct EpochRecord {
  int epoch = 0;
  double train_mse = 0.0;
  double effective_lambda = 0.0;
  std::size_t active_weights = 0;
};

struct TrainedModel {
  NetworkParams params;
  SparsityMask mask;
  TrainConfig config;
  std::vector<EpochRecord> history;
};

double effective_lambda(int epoch, const TrainConfig& config);
int freeze_epoch(const TrainConfig& config);

double l1_norm(const NetworkParams& params);
// Mean over rows of the squared residual norm.
double mse(const NetworkParams& params, const Matrix& x, const Matrix& y);
double loss(const NetworkParams& params, const Matrix& x, const Matrix& y, double lambda_eff);
Gradients loss_gradient(const NetworkParams& params, const Matrix& x, const Matrix& y, double lambda_eff);

void adam_step(NetworkParams& params, const Gradients& grads, AdamState& state, double alpha,
               const SparsityMask& mask);

SparsityMask freeze_small_weights(NetworkParams& params, double threshold);

std::size_t active_weight_count(const NetworkParams& params, double threshold);

TrainedModel train(const LabeledDataset& data, const NetworkSpec& spec, const TrainConfig& config);

double rms(const NetworkParams& params, const LabeledDataset& data);
inline double rms(const TrainedModel& model, const LabeledDataset& data) { return rms(model.params, data); }

}  // namespace eql
