#include "eql/datasets.hpp"

#include "eql/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

namespace eql {

namespace {

constexpr double kPi = std::numbers::pi;

std::mt19937_64 make_rng(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream};
  return std::mt19937_64(seq);
}

void add_noise(LabeledDataset& data, double sigma, std::mt19937_64& rng) {
  data.noise_sigma = sigma;
  if (sigma <= 0.0) return;
  std::normal_distribution<double> noise(0.0, sigma);
  for (Eigen::Index r = 0; r < data.y.rows(); ++r)
    for (Eigen::Index c = 0; c < data.y.cols(); ++c) data.y(r, c) += noise(rng);
}

void fill_targets(const TargetFunction& target, LabeledDataset& data) {
  data.y.resize(data.x.rows(), target.output_dim);
  std::vector<double> xin(static_cast<std::size_t>(target.input_dim));
  std::vector<double> yout(static_cast<std::size_t>(target.output_dim));
  for (Eigen::Index r = 0; r < data.x.rows(); ++r) {
    for (int c = 0; c < target.input_dim; ++c) xin[static_cast<std::size_t>(c)] = data.x(r, c);
    target.eval(xin, yout);
    for (int c = 0; c < target.output_dim; ++c) data.y(r, c) = yout[static_cast<std::size_t>(c)];
  }
}

double wrap_angle(double a) { return std::remainder(a, 2.0 * kPi); }

}  // namespace

Domain Domain::hypercube(int dim, double h) {
  require(dim > 0 && h > 0.0, ErrorCode::InvalidArgument, "hypercube needs dim > 0 and h > 0");
  Domain d;
  d.kind = Kind::Hypercube;
  d.dim = dim;
  d.inner = 0.0;
  d.outer = h;
  return d;
}

Domain Domain::shell(int dim, double h, double outer) {
  require(dim > 0 && h > 0.0 && outer > h, ErrorCode::InvalidArgument, "shell needs outer > h > 0");
  Domain d;
  d.kind = Kind::Shell;
  d.dim = dim;
  d.inner = h;
  d.outer = outer;
  return d;
}

Domain Domain::box(int dim, double lower, double upper) {
  require(dim > 0 && upper > lower, ErrorCode::InvalidArgument, "box needs upper > lower");
  Domain d;
  d.kind = Kind::Box;
  d.dim = dim;
  d.lower = lower;
  d.upper = upper;
  d.outer = std::max(std::abs(lower), std::abs(upper));
  return d;
}

bool Domain::contains(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != dim) return false;
  double max_abs = 0.0;
  for (double v : x) {
    if (kind == Kind::Box) {
      if (v < lower || v > upper) return false;
    }
    max_abs = std::max(max_abs, std::abs(v));
  }
  switch (kind) {
    case Kind::Hypercube: return max_abs <= outer;
    case Kind::Shell: return max_abs > inner && max_abs <= outer;
    case Kind::Box: return true;
  }
  return false;
}

void LabeledDataset::validate() const {
  require(x.rows() == y.rows(), ErrorCode::DimensionMismatch, "dataset input/target row counts differ");
  require(x.allFinite() && y.allFinite(), ErrorCode::NonFinite, "dataset contains non-finite values");
}

std::vector<double> TargetFunction::operator()(std::span<const double> x) const {
  require(static_cast<int>(x.size()) == input_dim, ErrorCode::DimensionMismatch,
          name + ": wrong input dimension");
  std::vector<double> y(static_cast<std::size_t>(output_dim));
  eval(x, y);
  return y;
}

TargetFunction pendulum_target() {
  return {"pendulum", 2, 2, [](std::span<const double> x, std::span<double> y) {
            y[0] = x[1] / kGravity;
            y[1] = -std::sin(x[0]);
          }};
}

TargetFunction double_pendulum_target() {
  return {"double-pendulum", 2, 4, [](std::span<const double> x, std::span<double> y) {
            y[0] = std::cos(x[0]);
            y[1] = std::cos(x[0]) + std::cos(x[0] + x[1]);
            y[2] = std::sin(x[0]);
            y[3] = std::sin(x[0]) + std::sin(x[0] + x[1]);
          }};
}

TargetFunction formula_target(Formula which) {
  switch (which) {
    case Formula::F1:
      return {"f1", 4, 1, [](std::span<const double> x, std::span<double> y) {
                y[0] = (std::sin(kPi * x[0]) + std::sin(2.0 * kPi * x[1] + kPi / 8.0) + x[1] -
                        x[2] * x[3]) / 3.0;
              }};
    case Formula::F2:
      return {"f2", 4, 1, [](std::span<const double> x, std::span<double> y) {
                y[0] = (std::sin(kPi * x[0]) + x[1] * std::cos(2.0 * kPi * x[0] + kPi / 4.0) + x[2] -
                        x[3] * x[3]) / 3.0;
              }};
    case Formula::F3:
      return {"f3", 4, 1, [](std::span<const double> x, std::span<double> y) {
                y[0] = ((1.0 + x[1]) * std::sin(kPi * x[0]) + x[1] * x[2] * x[3]) / 3.0;
              }};
  }
  fail(ErrorCode::InvalidArgument, "unknown formula");
}

TargetFunction cartpend_target() {
  return {"cartpend", 4, 4, [](std::span<const double> x, std::span<double> y) {
            const double s = std::sin(x[1]);
            const double c = std::cos(x[1]);
            const double denom = s * s + 1.0;
            y[0] = x[2];
            y[1] = x[3];
            y[2] = (-x[0] - 0.01 * x[2] + x[3] * x[3] * s + 0.1 * x[3] * c + 9.81 * s * c) / denom;
            y[3] = (-0.2 * x[3] - 19.62 * s + x[0] * c + 0.01 * x[2] * c - x[3] * x[3] * s * c) / denom;
          }};
}

TargetFunction kin_arm_target(int segments, ArmOutputs outputs) {
  require(segments >= 1, ErrorCode::InvalidArgument, "robot arm needs at least one segment");
  constexpr double kLink = 0.5;
  const int m = outputs == ArmOutputs::EndOnly ? 2 : 2 * segments;
  std::string name = "kin-" + std::to_string(segments) + (outputs == ArmOutputs::EndOnly ? "-end" : "-all");
  return {name, segments, m, [segments, outputs](std::span<const double> x, std::span<double> y) {
            double angle = 0.0;
            double px = 0.0;
            double py = 0.0;
            for (int j = 0; j < segments; ++j) {
              angle += x[static_cast<std::size_t>(j)];
              px += kLink * std::cos(angle);
              py += kLink * std::sin(angle);
              if (outputs == ArmOutputs::AllJoints) {
                y[static_cast<std::size_t>(2 * j)] = px;
                y[static_cast<std::size_t>(2 * j + 1)] = py;
              }
            }
            if (outputs == ArmOutputs::EndOnly) {
              y[0] = px;
              y[1] = py;
            }
          }};
}

TargetFunction moseley_target() {
  return {"moseley", 1, 1, [](std::span<const double> x, std::span<double> y) {
            y[0] = 1.3 * x[0] * x[0] - 0.2 * x[0] + 0.03;
          }};
}

LabeledDataset sample_dataset(const TargetFunction& target, const Domain& domain, int count, double sigma,
                              std::uint64_t seed) {
  require(count >= 1, ErrorCode::InvalidArgument, "sample count must be positive");
  require(sigma >= 0.0, ErrorCode::InvalidArgument, "noise sigma must be non-negative");
  require(domain.dim == target.input_dim, ErrorCode::DimensionMismatch,
          target.name + ": domain dimension differs from target input dimension");
  auto rng = make_rng(seed, 0x5eedu);
  const double lo = domain.kind == Domain::Kind::Box ? domain.lower : -domain.outer;
  const double hi = domain.kind == Domain::Kind::Box ? domain.upper : domain.outer;
  std::uniform_real_distribution<double> uniform(lo, hi);

  LabeledDataset data;
  data.name = target.name;
  data.domain = domain;
  data.x.resize(count, target.input_dim);
  std::vector<double> point(static_cast<std::size_t>(target.input_dim));
  for (int r = 0; r < count; ++r) {
    do {
      for (auto& p : point) p = uniform(rng);
    } while (domain.kind == Domain::Kind::Shell && !domain.contains(point));
    for (int c = 0; c < target.input_dim; ++c) data.x(r, c) = point[static_cast<std::size_t>(c)];
  }
  fill_targets(target, data);
  add_noise(data, sigma, rng);
  return data;
}

LabeledDataset gen_pendulum(int count, double h, double sigma, std::uint64_t seed) {
  return sample_dataset(pendulum_target(), Domain::hypercube(2, h), count, sigma, seed);
}

LabeledDataset gen_shell_testset(const TargetFunction& target, double h, double factor, int count,
                                 std::uint64_t seed) {
  require(factor > 1.0, ErrorCode::InvalidArgument, "shell factor must exceed 1");
  return sample_dataset(target, Domain::shell(target.input_dim, h, factor * h), count, 0.0, seed);
}

LabeledDataset gen_double_pendulum_kinematics(int count, const Domain& domain, double sigma,
                                              std::uint64_t seed) {
  require(domain.outer <= kPi, ErrorCode::InvalidArgument, "double-pendulum angles are confined to [-pi, pi]");
  return sample_dataset(double_pendulum_target(), domain, count, sigma, seed);
}

LabeledDataset gen_double_pendulum_trajectory(int count, TrajectoryCoverage coverage, double sigma,
                                              std::uint64_t seed) {
  require(count >= 1, ErrorCode::InvalidArgument, "sample count must be positive");
  auto rng = make_rng(seed, 0xd0b1u);
  std::uniform_real_distribution<double> offset(0.0, 1.0e4);
  const double t0 = offset(rng);
  constexpr double kPeriod = 100.0;
  const double w1 = 2.0 * kPi * std::sqrt(2.0) / kPeriod;
  const double w2 = 2.0 * kPi * std::sqrt(3.0) / kPeriod;

  const auto target = double_pendulum_target();
  LabeledDataset data;
  data.name = target.name;
  data.x.resize(count, 2);
  for (int i = 0; i < count; ++i) {
    const double t = t0 + i;
    if (coverage == TrajectoryCoverage::Partial) {
      // Slow swing that covers only part of the angle range.
      data.x(i, 0) = 1.2 * std::sin(w1 * t);
      data.x(i, 1) = 1.6 * std::sin(w2 * t + kPi / 7.0);
    } else {
      // Spinning segments, wrapped to [-pi, pi].
      data.x(i, 0) = wrap_angle(2.0 * w1 * t);
      data.x(i, 1) = wrap_angle(3.0 * w2 * t + kPi / 7.0);
    }
  }
  data.domain = Domain::hypercube(2, coverage == TrajectoryCoverage::Partial ? 1.6 : kPi);
  fill_targets(target, data);
  add_noise(data, sigma, rng);
  return data;
}

LabeledDataset gen_kin_arm(int segments, int count, double amplitude, double sigma, std::uint64_t seed,
                           ArmOutputs outputs) {
  require(count >= 1, ErrorCode::InvalidArgument, "sample count must be positive");
  require(amplitude > 0.0, ErrorCode::InvalidArgument, "amplitude must be positive");
  const auto target = kin_arm_target(segments, outputs);
  auto rng = make_rng(seed, 0xa53u);
  std::uniform_real_distribution<double> offset(0.0, 1.0e5);
  const double t0 = offset(rng);

  // Square roots of distinct primes keep the joint frequencies incommensurate
  // so the trajectory fills the joint torus instead of closing on itself.
  static constexpr double kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29};
  constexpr double kPeriod = 100.0;

  LabeledDataset data;
  data.name = target.name;
  data.domain = Domain::hypercube(segments, amplitude);
  data.x.resize(count, segments);
  for (int i = 0; i < count; ++i) {
    const double t = t0 + i;
    for (int j = 0; j < segments; ++j) {
      const double omega = 2.0 * kPi * std::sqrt(kPrimes[j % 10] + 10.0 * (j / 10)) / kPeriod;
      const double phase = j * kPi / 7.0;
      data.x(i, j) = amplitude * std::sin(omega * t + phase);
    }
  }
  fill_targets(target, data);
  add_noise(data, sigma, rng);
  return data;
}

LabeledDataset gen_formula(Formula which, int count, double h, double sigma, std::uint64_t seed) {
  return sample_dataset(formula_target(which), Domain::hypercube(4, h), count, sigma, seed);
}

LabeledDataset gen_cartpend(int count, double h, double sigma, std::uint64_t seed) {
  return sample_dataset(cartpend_target(), Domain::hypercube(4, h), count, sigma, seed);
}

std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& data, double fraction,
                                                std::uint64_t seed) {
  require(fraction > 0.0 && fraction < 1.0, ErrorCode::InvalidArgument, "split fraction must be in (0, 1)");
  const auto n = static_cast<std::size_t>(data.rows());
  const auto first_size = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n)));
  require(first_size >= 1 && first_size < n, ErrorCode::EmptyPartition,
          "split of " + std::to_string(n) + " rows would leave a partition empty");
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  auto rng = make_rng(seed, 0x5917u);
  std::shuffle(order.begin(), order.end(), rng);

  auto take = [&data](std::span<const Eigen::Index> rows) {
    LabeledDataset part;
    part.name = data.name;
    part.domain = data.domain;
    part.noise_sigma = data.noise_sigma;
    part.x.resize(static_cast<Eigen::Index>(rows.size()), data.x.cols());
    part.y.resize(static_cast<Eigen::Index>(rows.size()), data.y.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      part.x.row(static_cast<Eigen::Index>(i)) = data.x.row(rows[i]);
      part.y.row(static_cast<Eigen::Index>(i)) = data.y.row(rows[i]);
    }
    return part;
  };
  std::span<const Eigen::Index> all(order);
  return {take(all.subspan(0, first_size)), take(all.subspan(first_size))};
}

std::pair<LabeledDataset, LabeledDataset> load_xray(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open X-ray table '" + path + "'");
  std::vector<std::pair<int, double>> low;
  std::vector<std::pair<int, double>> high;
  std::string line;
  int line_no = 0;
  bool first_content = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string z_field;
    std::string e_field;
    std::getline(ss, z_field, ',');
    std::getline(ss, e_field, ',');
    std::string extra;
    const bool has_extra = static_cast<bool>(std::getline(ss, extra, ','));
    const std::string where = path + ":" + std::to_string(line_no);
    if (first_content && !z_field.empty() && std::isalpha(static_cast<unsigned char>(z_field.front()))) {
      first_content = false;
      continue;  // header
    }
    first_content = false;
    require(!has_extra, ErrorCode::Parse, where + ": expected two columns (Z, energy)");
    std::size_t used = 0;
    int z = 0;
    double energy = 0.0;
    try {
      z = std::stoi(z_field, &used);
      require(used == z_field.size(), ErrorCode::Parse, where + ": Z must be an integer");
      energy = std::stod(e_field, &used);
      require(used == e_field.size() || e_field.find_first_not_of(" \t", used) == std::string::npos,
              ErrorCode::Parse, where + ": malformed energy");
    } catch (const std::logic_error&) {
      fail(ErrorCode::Parse, where + ": malformed row '" + line + "'");
    }
    require(z > 0 && std::isfinite(energy), ErrorCode::Parse, where + ": invalid Z or energy");
    (z <= 91 ? low : high).emplace_back(z, energy);
  }
  require(!low.empty(), ErrorCode::EmptyPartition, path + ": no rows with Z <= 91");
  require(!high.empty(), ErrorCode::EmptyPartition, path + ": no rows with Z >= 92");

  auto make = [](const std::vector<std::pair<int, double>>& rows, double lo, double hi) {
    LabeledDataset d;
    d.name = "xray";
    d.domain = Domain::box(1, lo, hi);
    d.x.resize(static_cast<Eigen::Index>(rows.size()), 1);
    d.y.resize(static_cast<Eigen::Index>(rows.size()), 1);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      d.x(static_cast<Eigen::Index>(i), 0) = rows[i].first / 100.0;
      d.y(static_cast<Eigen::Index>(i), 0) = rows[i].second / 100000.0;
    }
    return d;
  };
  return {make(low, 0.0, 0.91), make(high, 0.92, 1.0)};
}

std::vector<std::pair<int, double>> moseley_fixture_rows() {
  // 13 Z^2 - 200 Z + 3000 eV equals 1e5 * (1.3 x^2 - 0.2 x + 0.03) at x = Z/100.
  auto energy = [](int z) { return 13.0 * z * z - 200.0 * z + 3000.0; };
  std::vector<std::pair<int, double>> rows;
  for (int z = 10; z <= 91; ++z) {
    if (z == 43 || z == 61) continue;  // no stable isotopes
    rows.emplace_back(z, energy(z));
  }
  for (int z = 92; z <= 100; ++z) {
    rows.emplace_back(z, energy(z));
    if (z == 92 || z == 94 || z == 95 || z == 96 || z == 98) rows.emplace_back(z, energy(z));
  }
  return rows;
}

void write_xray_csv(const std::string& path, const std::vector<std::pair<int, double>>& rows) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorCode::Io, "cannot write '" + path + "'");
  out << "Z,energy_eV\n" << std::setprecision(17);
  for (const auto& [z, e] : rows) out << z << ',' << e << '\n';
  require(static_cast<bool>(out), ErrorCode::Io, "failed writing '" + path + "'");
}

namespace {

Benchmark uniform_benchmark(const std::string& name, TargetFunction target, double h) {
  Benchmark b;
  b.name = name;
  b.h = h;
  b.target = target;
  const int n = target.input_dim;
  b.train = [target, h, n](int count, double sigma, std::uint64_t seed) {
    return sample_dataset(target, Domain::hypercube(n, h), count, sigma, seed);
  };
  b.tests["interp"] = [target, h, n](int count, std::uint64_t seed) {
    return sample_dataset(target, Domain::hypercube(n, h), count, 0.0, seed);
  };
  b.tests["near"] = [target, h](int count, std::uint64_t seed) {
    return gen_shell_testset(target, h, 1.5, count, seed);
  };
  b.tests["far"] = [target, h](int count, std::uint64_t seed) {
    return gen_shell_testset(target, h, 2.0, count, seed);
  };
  return b;
}

Benchmark arm_benchmark(const std::string& name, int segments, ArmOutputs outputs) {
  Benchmark b;
  b.name = name;
  b.h = kPi / 2.0;
  b.target = kin_arm_target(segments, outputs);
  b.train = [segments, outputs](int count, double sigma, std::uint64_t seed) {
    return gen_kin_arm(segments, count, kPi / 2.0, sigma, seed, outputs);
  };
  b.tests["interp"] = [segments, outputs](int count, std::uint64_t seed) {
    return gen_kin_arm(segments, count, kPi / 2.0, 0.0, seed, outputs);
  };
  b.tests["near"] = [segments, outputs](int count, std::uint64_t seed) {
    return gen_kin_arm(segments, count, 0.75 * kPi, 0.0, seed, outputs);
  };
  b.tests["far"] = [segments, outputs](int count, std::uint64_t seed) {
    return gen_kin_arm(segments, count, kPi, 0.0, seed, outputs);
  };
  return b;
}

}  // namespace

Benchmark make_benchmark(const std::string& name, BenchmarkOptions options) {
  auto pick = [&options](double fallback) { return options.h > 0.0 ? options.h : fallback; };
  if (name == "pendulum") return uniform_benchmark(name, pendulum_target(), pick(2.0));
  if (name == "f1") return uniform_benchmark(name, formula_target(Formula::F1), pick(1.0));
  if (name == "f2") return uniform_benchmark(name, formula_target(Formula::F2), pick(1.0));
  if (name == "f3") return uniform_benchmark(name, formula_target(Formula::F3), pick(1.0));
  if (name == "cartpend") return uniform_benchmark(name, cartpend_target(), pick(1.0));
  if (name == "kin-3-end") return arm_benchmark(name, 3, ArmOutputs::EndOnly);
  if (name == "kin-4-end") return arm_benchmark(name, 4, ArmOutputs::EndOnly);
  if (name == "kin-5-all") return arm_benchmark(name, 5, ArmOutputs::AllJoints);
  if (name == "double-pendulum") {
    Benchmark b;
    b.name = name;
    b.h = 1.6;
    b.target = double_pendulum_target();
    b.train = [](int count, double sigma, std::uint64_t seed) {
      return gen_double_pendulum_trajectory(count, TrajectoryCoverage::Partial, sigma, seed);
    };
    b.tests["interp"] = [](int count, std::uint64_t seed) {
      return gen_double_pendulum_trajectory(count, TrajectoryCoverage::Partial, 0.0, seed);
    };
    b.tests["far"] = [](int count, std::uint64_t seed) {
      return gen_double_pendulum_trajectory(count, TrajectoryCoverage::Full, 0.0, seed);
    };
    return b;
  }
  if (name == "moseley") {
    Benchmark b;
    b.name = name;
    b.h = 0.91;
    b.target = moseley_target();
    const auto target = b.target;
    b.train = [target](int count, double sigma, std::uint64_t seed) {
      return sample_dataset(target, Domain::box(1, 0.10, 0.91), count, sigma, seed);
    };
    b.tests["interp"] = [target](int count, std::uint64_t seed) {
      return sample_dataset(target, Domain::box(1, 0.10, 0.91), count, 0.0, seed);
    };
    b.tests["far"] = [target](int count, std::uint64_t seed) {
      return sample_dataset(target, Domain::box(1, 0.92, 1.0), count, 0.0, seed);
    };
    return b;
  }
  fail(ErrorCode::InvalidArgument, "unknown generator '" + name + "'");
}

std::uint64_t test_set_seed(std::uint64_t data_seed, const std::string& split) {
  if (split == "interp") return data_seed + 1000;
  if (split == "near") return data_seed + 2000;
  if (split == "far") return data_seed + 3000;
  fail(ErrorCode::InvalidArgument, "unknown test split '" + split + "'");
}

std::vector<std::string> benchmark_names() {
  return {"pendulum", "double-pendulum", "kin-3-end", "kin-4-end", "kin-5-all",
          "f1",       "f2",              "f3",        "cartpend",  "moseley"};
}

}  // namespace eql
