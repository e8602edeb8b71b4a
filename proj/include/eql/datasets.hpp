#pragma once

// Benchmark data: target systems, domain sampling with interpolation and
// near/far extrapolation shells, and loaders for externally supplied tables.

#include "eql/network.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace eql {

inline constexpr double kGravity = 9.81;

struct Domain {
  enum class Kind { Hypercube, Shell, Box };
  Kind kind = Kind::Hypercube;
  int dim = 0;
  double inner = 0.0;  // h (shell only)
  double outer = 1.0;  // half-width of the sampling cube
  double lower = 0.0;  // box only: [lower, upper]^n
  double upper = 0.0;

  static Domain hypercube(int dim, double h);
  static Domain shell(int dim, double h, double outer);
  static Domain box(int dim, double lower, double upper);
  bool contains(std::span<const double> x) const;
};

struct LabeledDataset {
  Matrix x;  // N x n
  Matrix y;  // N x m
  double noise_sigma = 0.0;
  Domain domain;
  std::string name;

  Eigen::Index rows() const noexcept { return x.rows(); }
  int input_dim() const noexcept { return static_cast<int>(x.cols()); }
  int output_dim() const noexcept { return static_cast<int>(y.cols()); }
  void validate() const;
};

// A noise-free map phi: R^n -> R^m.
struct TargetFunction {
  std::string name;
  int input_dim = 0;
  int output_dim = 0;
  std::function<void(std::span<const double> x, std::span<double> y)> eval;

  std::vector<double> operator()(std::span<const double> x) const;
};

TargetFunction pendulum_target();
TargetFunction double_pendulum_target();
enum class Formula { F1, F2, F3 };
TargetFunction formula_target(Formula which);
TargetFunction cartpend_target();
enum class ArmOutputs { EndOnly, AllJoints };
TargetFunction kin_arm_target(int segments, ArmOutputs outputs);
// Synthetic Moseley-law stand-in for the X-ray table, in scaled units.
TargetFunction moseley_target();

// Uniform samples from `domain` (rejection sampling for shells) with targets
// disturbed by N(0, sigma^2) per component.
LabeledDataset sample_dataset(const TargetFunction& target, const Domain& domain, int count,
                              double sigma, std::uint64_t seed);

LabeledDataset gen_pendulum(int count, double h, double sigma, std::uint64_t seed);
// Noise-free points in [-factor*h, factor*h]^n outside [-h, h]^n.
LabeledDataset gen_shell_testset(const TargetFunction& target, double h, double factor, int count,
                                 std::uint64_t seed);
LabeledDataset gen_double_pendulum_kinematics(int count, const Domain& domain, double sigma,
                                              std::uint64_t seed);
enum class TrajectoryCoverage { Partial, Full };
LabeledDataset gen_double_pendulum_trajectory(int count, TrajectoryCoverage coverage, double sigma,
                                              std::uint64_t seed);
LabeledDataset gen_kin_arm(int segments, int count, double amplitude, double sigma, std::uint64_t seed,
                           ArmOutputs outputs);
LabeledDataset gen_formula(Formula which, int count, double h, double sigma, std::uint64_t seed);
LabeledDataset gen_cartpend(int count, double h, double sigma, std::uint64_t seed);

// Rows assigned by a seeded permutation: ceil(fraction*N) to the first part.
std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& data, double fraction,
                                                std::uint64_t seed);

// Z/energy(eV) table; returns (Z <= 91 scaled, Z >= 92 scaled).
std::pair<LabeledDataset, LabeledDataset> load_xray(const std::string& path);
// Rows (Z, energy) of the bundled synthetic fixture: 70+10 rows with Z <= 91
// and 14 rows (isotope duplicates) with Z in [92, 100].
std::vector<std::pair<int, double>> moseley_fixture_rows();
void write_xray_csv(const std::string& path, const std::vector<std::pair<int, double>>& rows);

// Named experiment: training generator plus its noise-free test sets.
struct Benchmark {
  std::string name;
  TargetFunction target;
  double h = 1.0;
  std::function<LabeledDataset(int count, double sigma, std::uint64_t seed)> train;
  std::map<std::string, std::function<LabeledDataset(int count, std::uint64_t seed)>> tests;
};

struct BenchmarkOptions {
  double h = 0.0;  // 0 selects the benchmark's default half-width
};

// pendulum, double-pendulum, kin-3-end, kin-4-end, kin-5-all, f1, f2, f3,
// cartpend, moseley.
Benchmark make_benchmark(const std::string& name, BenchmarkOptions options = {});
std::vector<std::string> benchmark_names();

// Seed for a benchmark test set derived from the data seed: interp, near and
// far get fixed offsets 1000, 2000, 3000, so every command draws the same set.
std::uint64_t test_set_seed(std::uint64_t data_seed, const std::string& split);

}  // namespace eql
