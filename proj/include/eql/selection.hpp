#pragma once

// Model selection for extrapolation: a sparsity count of active hidden units,
// rank-space selection against validation error, and seeded sweeps.

#include "eql/datasets.hpp"
#include "eql/trainer.hpp"

#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace eql {

inline constexpr double kSparsityThreshold = 0.01;

// Hidden units whose (L1 in-norm) * (L1 out-norm) exceeds `threshold`. A
// product unit's in-norm is the sum over both of its incoming rows.
int sparsity(const NetworkParams& params, double threshold = kSparsityThreshold);

struct Hyperparams {
  double lambda = 0.0;
  int layers = 2;
  int u = 0;
  int v = 0;
  std::uint64_t seed = 0;
};

struct Candidate {
  TrainedModel model;
  Hyperparams hyper;
  double val_rms = 0.0;
  int sparsity = 0;
  std::map<std::string, double> test_rms;
  bool failed = false;
  std::string error;
};

enum class Criterion { RankNorm, ValidationOnly };
std::string_view to_string(Criterion c);
Criterion criterion_from_string(std::string_view name);

// 1-based ranks, ties get the average rank.
std::vector<double> average_ranks(std::span<const double> values);

// argmin r_v^2 + r_s^2 over non-failed candidates; ties go to the lower
// validation error, then the earlier candidate. Returns the index.
std::size_t rank_select(std::span<const Candidate> candidates);
std::size_t validation_select(std::span<const Candidate> candidates);
std::size_t select(std::span<const Candidate> candidates, Criterion criterion);

struct SweepGrid {
  std::vector<double> lambdas;
  std::vector<int> layer_counts;
  std::vector<std::pair<int, int>> units;  // (u, v)
  std::vector<std::uint64_t> seeds;
  TrainConfig base;  // lambda and seed are overwritten per run

  void validate() const;
  std::vector<Hyperparams> cells() const;  // cell-major, seeds innermost
};

struct SweepData {
  LabeledDataset train;
  LabeledDataset validation;
  std::map<std::string, LabeledDataset> tests;
};

using NetBuilder = std::function<NetworkSpec(const Hyperparams&)>;
NetBuilder eql_builder(int input_dim, int output_dim, std::vector<UnitType> menu = {std::begin(kDefaultMenu), std::end(kDefaultMenu)});
NetBuilder mlp_builder(int input_dim, int output_dim);

using SweepLog = std::function<void(const Candidate&, std::size_t index, std::size_t total)>;

// One training per (cell x seed); results in deterministic grid order for
// any `jobs`. Failed runs are flagged, not thrown.
std::vector<Candidate> sweep(const SweepGrid& grid, const NetBuilder& builder, const SweepData& data,
                             int jobs = 1, const SweepLog& log = {});

struct SplitSummary {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation
  int count = 0;
};
SplitSummary summarize(std::span<const double> values);

// Per test-split statistics over all seeds of the cell that `selected` belongs to.
std::map<std::string, SplitSummary> cell_summary(std::span<const Candidate> candidates, std::size_t selected);

struct NoiseGridCell {
  double sigma = 0.0;
  int count = 0;
  double interp_rms = 0.0;
  double extrap_rms = 0.0;
  bool failed = false;
  std::string error;
};

struct NoiseGridConfig {
  std::vector<double> sigmas;
  std::vector<int> counts;
  NetworkSpec network;
  TrainConfig train;
  int test_count = 1000;
  std::uint64_t data_seed = 1;
  std::string extrap_split = "far";
};

// For each (sigma, N): fresh training data, one training run, RMS on the
// noise-free interpolation and extrapolation sets. Row-major in sigma.
std::vector<NoiseGridCell> noise_data_grid(const Benchmark& benchmark, const NoiseGridConfig& config,
                                           int jobs = 1);

}  // namespace eql
