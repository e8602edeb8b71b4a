#include "eql/datasets.hpp"
#include "eql/error.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

using namespace eql;

namespace {

std::vector<double> row(const Matrix& m, Eigen::Index r) {
  std::vector<double> v(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index c = 0; c < m.cols(); ++c) v[static_cast<std::size_t>(c)] = m(r, c);
  return v;
}

double max_oracle_error(const std::string& name, const LabeledDataset& d) {
  double worst = 0.0;
  for (Eigen::Index r = 0; r < d.rows(); ++r) {
    const auto expect = oracles::by_name(name, row(d.x, r));
    EXPECT_EQ(static_cast<Eigen::Index>(expect.size()), d.y.cols()) << name;
    for (Eigen::Index c = 0; c < d.y.cols(); ++c)
      worst = std::max(worst, std::abs(d.y(r, c) - expect[static_cast<std::size_t>(c)]));
  }
  return worst;
}

double max_abs_row(const Matrix& x, Eigen::Index r) { return x.row(r).cwiseAbs().maxCoeff(); }

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::Internal;
}

std::string temp_path(const std::string& leaf) {
  return (std::filesystem::temp_directory_path() / ("eql_ds_" + leaf)).string();
}

}  // namespace

TEST(Datasets, PendulumExamples) {
  const auto t = pendulum_target();
  const double a[] = {0.0, 0.0};
  EXPECT_EQ(t(a), (std::vector<double>{0.0, 0.0}));
  const double b[] = {oracles::pi / 2, 9.81};
  const auto y = t(b);
  EXPECT_NEAR(y[0], 1.0, 1e-15);
  EXPECT_NEAR(y[1], -1.0, 1e-15);
}

TEST(Datasets, DoublePendulumExamples) {
  const auto t = double_pendulum_target();
  const double zero[] = {0.0, 0.0};
  EXPECT_EQ(t(zero), (std::vector<double>{1.0, 2.0, 0.0, 0.0}));
  const double right[] = {oracles::pi / 2, oracles::pi / 2};
  const auto y = t(right);
  const double expect[] = {0.0, -1.0, 1.0, 1.0};
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(y[static_cast<std::size_t>(i)], expect[i], 1e-15);
}

TEST(Datasets, DoublePendulumSecondSegmentHasUnitLength) {
  const auto d = gen_double_pendulum_kinematics(2000, Domain::hypercube(2, oracles::pi), 0.0, 4);
  for (Eigen::Index r = 0; r < d.rows(); ++r)
    EXPECT_NEAR(std::hypot(d.y(r, 1) - d.y(r, 0), d.y(r, 3) - d.y(r, 2)), 1.0, 1e-12);
  EXPECT_THROW(gen_double_pendulum_kinematics(10, Domain::hypercube(2, 4.0), 0.0, 0), Error);
}

TEST(Datasets, ArmExamples) {
  const auto t = kin_arm_target(3, ArmOutputs::EndOnly);
  const double straight[] = {0.0, 0.0, 0.0};
  auto y = t(straight);
  EXPECT_NEAR(y[0], 1.5, 1e-15);
  EXPECT_NEAR(y[1], 0.0, 1e-15);
  const double up[] = {oracles::pi / 2, 0.0, 0.0};
  y = t(up);
  EXPECT_NEAR(y[0], 0.0, 1e-15);
  EXPECT_NEAR(y[1], 1.5, 1e-15);
  EXPECT_EQ(kin_arm_target(5, ArmOutputs::AllJoints).output_dim, 10);
  EXPECT_THROW(kin_arm_target(0, ArmOutputs::EndOnly), Error);
}

TEST(Datasets, ArmJointAnglesStayWithinAmplitude) {
  const auto d = gen_kin_arm(4, 3000, 0.5 * oracles::pi, 0.0, 3, ArmOutputs::EndOnly);
  EXPECT_LE(d.x.cwiseAbs().maxCoeff(), 0.5 * oracles::pi);
  // Different joints follow different frequencies.
  EXPECT_GT((d.x.col(0) - d.x.col(1)).cwiseAbs().maxCoeff(), 0.5);
  EXPECT_LT(max_oracle_error("kin-4-end", d), 1e-12);
}

TEST(Datasets, FormulaExamples) {
  const double zero[] = {0.0, 0.0, 0.0, 0.0};
  EXPECT_NEAR(formula_target(Formula::F1)(zero)[0], std::sin(oracles::pi / 8) / 3, 1e-15);
  EXPECT_NEAR(formula_target(Formula::F1)(zero)[0], 0.1276, 1e-4);
  const double x3[] = {0.0, 0.7, -1.3, 0.4};
  EXPECT_NEAR(formula_target(Formula::F3)(x3)[0], 0.7 * -1.3 * 0.4 / 3, 1e-15);
}

TEST(Datasets, CartpendExamples) {
  const double zero[] = {0.0, 0.0, 0.0, 0.0};
  EXPECT_EQ(cartpend_target()(zero), (std::vector<double>{0.0, 0.0, 0.0, 0.0}));
  const auto d = gen_cartpend(500, 1.0, 0.0, 2);
  EXPECT_EQ(d.y.col(0), d.x.col(2));
  EXPECT_EQ(d.y.col(1), d.x.col(3));
  for (Eigen::Index r = 0; r < d.rows(); ++r) {
    const double den = 1 + std::pow(std::sin(d.x(r, 1)), 2);
    EXPECT_GE(den, 1.0);
    EXPECT_LE(den, 2.0);
  }
  EXPECT_TRUE(gen_cartpend(500, 50.0, 0.0, 2).y.allFinite());
}

TEST(Datasets, NoiseFreeSamplesSatisfyOracles) {
  for (const auto& name : benchmark_names()) {
    const auto b = make_benchmark(name);
    EXPECT_LT(max_oracle_error(name, b.train(2000, 0.0, 1)), 1e-12) << name;
    for (const auto& [split_name, gen] : b.tests)
      EXPECT_LT(max_oracle_error(name, gen(1000, 2)), 1e-12) << name << "/" << split_name;
  }
}

TEST(Datasets, ShellMembership) {
  const auto t = formula_target(Formula::F1);
  for (double factor : {1.5, 2.0}) {
    const auto d = gen_shell_testset(t, 1.0, factor, 2000, 5);
    EXPECT_EQ(d.noise_sigma, 0.0);
    for (Eigen::Index r = 0; r < d.rows(); ++r) {
      const double m = max_abs_row(d.x, r);
      EXPECT_GT(m, 1.0);
      EXPECT_LE(m, factor);
    }
  }
  EXPECT_THROW(gen_shell_testset(t, 1.0, 1.0, 10, 0), Error);
  EXPECT_THROW(Domain::shell(2, 2.0, 1.0), Error);
}

TEST(Datasets, ShellAcceptanceMatchesVolumeRatio) {
  // Fraction of uniform points in the outer cube that land in the shell.
  const auto cube = sample_dataset(pendulum_target(), Domain::hypercube(2, 3.0), 100000, 0.0, 9);
  const Domain shell = Domain::shell(2, 2.0, 3.0);
  int inside = 0;
  for (Eigen::Index r = 0; r < cube.rows(); ++r)
    if (shell.contains(row(cube.x, r))) ++inside;
  const double ratio = 1.0 - std::pow(2.0 / 3.0, 2);
  const double se = std::sqrt(ratio * (1 - ratio) / 100000.0);
  EXPECT_NEAR(inside / 100000.0, ratio, 5 * se);
}

TEST(Datasets, NoiseStandardDeviation) {
  const double sigma = 0.05;
  const auto noisy = gen_pendulum(50000, 2.0, sigma, 17);
  const auto clean = gen_pendulum(50000, 2.0, 0.0, 17);
  ASSERT_EQ(noisy.x, clean.x);
  const Matrix diff = noisy.y - clean.y;
  const Eigen::ArrayXd r = Eigen::Map<const Eigen::ArrayXd>(diff.data(), diff.size());
  const double mean = r.mean();
  const double sd = std::sqrt((r - mean).square().sum() / static_cast<double>(r.size() - 1));
  EXPECT_NEAR(sd, sigma, 0.02 * sigma);
  EXPECT_NEAR(mean, 0.0, 5 * sigma / std::sqrt(static_cast<double>(r.size())));
}

TEST(Datasets, GeneratorsAreDeterministic) {
  for (const auto& name : benchmark_names()) {
    const auto b = make_benchmark(name);
    const auto a1 = b.train(200, 0.01, 3);
    const auto a2 = b.train(200, 0.01, 3);
    const auto a3 = b.train(200, 0.01, 4);
    EXPECT_EQ(a1.x, a2.x) << name;
    EXPECT_EQ(a1.y, a2.y) << name;
    EXPECT_NE(a1.y, a3.y) << name;
  }
}

TEST(Datasets, PendulumBenchmarkDomains) {
  const auto b = make_benchmark("pendulum");
  EXPECT_EQ(b.h, 2.0);
  const auto train = b.train(1000, 0.01, 1);
  EXPECT_EQ(train.rows(), 1000);
  EXPECT_LE(train.x.cwiseAbs().maxCoeff(), 2.0);
  const auto far = b.tests.at("far")(1000, 2);
  for (Eigen::Index r = 0; r < far.rows(); ++r) EXPECT_GT(max_abs_row(far.x, r), 2.0);
  EXPECT_LE(far.x.cwiseAbs().maxCoeff(), 4.0);
  EXPECT_EQ(make_benchmark("pendulum", {.h = 1.0}).h, 1.0);
}

TEST(Datasets, SplitSizesAndDisjointness) {
  auto d = gen_pendulum(101, 2.0, 0.0, 1);
  // Tag each row with its index so membership is exact.
  for (Eigen::Index r = 0; r < d.rows(); ++r) d.x(r, 0) = static_cast<double>(r);
  const auto [a, b] = split(d, 0.1, 7);
  EXPECT_EQ(a.rows(), 11);
  EXPECT_EQ(b.rows(), 90);
  std::set<double> seen;
  for (Eigen::Index r = 0; r < a.rows(); ++r) seen.insert(a.x(r, 0));
  for (Eigen::Index r = 0; r < b.rows(); ++r) seen.insert(b.x(r, 0));
  EXPECT_EQ(seen.size(), 101u);
  const auto [a2, b2] = split(d, 0.1, 7);
  EXPECT_EQ(a.x, a2.x);
  EXPECT_EQ(b.y, b2.y);
  const auto [a3, b3] = split(d, 0.1, 8);
  EXPECT_NE(a.x, a3.x);
  (void)b3;
}

TEST(Datasets, SplitErrors) {
  const auto d = gen_pendulum(5, 2.0, 0.0, 1);
  EXPECT_EQ(code_of([&] { split(d, 0.0, 0); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([&] { split(d, 1.0, 0); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([&] { split(gen_pendulum(1, 2.0, 0.0, 1), 0.5, 0); }), ErrorCode::EmptyPartition);
  EXPECT_EQ(code_of([&] { split(d, 0.9, 0); }), ErrorCode::EmptyPartition);
}

TEST(Datasets, GeneratorPreconditions) {
  EXPECT_THROW(gen_pendulum(0, 2.0, 0.0, 1), Error);
  EXPECT_THROW(gen_pendulum(10, 2.0, -0.1, 1), Error);
  EXPECT_THROW(gen_pendulum(10, 0.0, 0.0, 1), Error);
  EXPECT_THROW(gen_kin_arm(3, 10, 0.0, 0.0, 1, ArmOutputs::EndOnly), Error);
  EXPECT_EQ(code_of([] { make_benchmark("lorenz"); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(benchmark_names().size(), 10u);
}

TEST(Datasets, XrayScalingAndPartition) {
  const auto path = temp_path("scale.csv");
  write_xray_csv(path, {{100, 100000.0}, {50, 20000.0}});
  const auto [low, high] = load_xray(path);
  ASSERT_EQ(high.rows(), 1);
  EXPECT_DOUBLE_EQ(high.x(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(high.y(0, 0), 1.0);
  ASSERT_EQ(low.rows(), 1);
  EXPECT_DOUBLE_EQ(low.x(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(low.y(0, 0), 0.2);
  std::remove(path.c_str());
}

TEST(Datasets, XrayErrors) {
  const auto path = temp_path("bad.csv");
  write_xray_csv(path, {{20, 1.0}, {91, 2.0}});
  EXPECT_EQ(code_of([&] { load_xray(path); }), ErrorCode::EmptyPartition);
  write_xray_csv(path, {{95, 1.0}});
  EXPECT_EQ(code_of([&] { load_xray(path); }), ErrorCode::EmptyPartition);
  for (const char* body : {"Z,E\n20,1,3\n95,2\n", "Z,E\n20.5,1\n95,2\n", "Z,E\n20,abc\n95,2\n"}) {
    std::ofstream(path) << body;
    EXPECT_EQ(code_of([&] { load_xray(path); }), ErrorCode::Parse) << body;
  }
  std::remove(path.c_str());
  EXPECT_EQ(code_of([] { load_xray("/nonexistent/xray.csv"); }), ErrorCode::Io);
}

TEST(Datasets, MoseleyFixtureRoundTrip) {
  const auto rows = moseley_fixture_rows();
  const auto path = temp_path("fixture.csv");
  write_xray_csv(path, rows);
  const auto [low, high] = load_xray(path);
  std::remove(path.c_str());
  EXPECT_EQ(low.rows(), 80);
  EXPECT_EQ(high.rows(), 14);
  // Undo the scaling and compare with the stored table.
  std::size_t i = 0;
  for (const auto* part : {&low, &high}) {
    for (Eigen::Index r = 0; r < part->rows(); ++r, ++i) {
      EXPECT_NEAR(part->x(r, 0) * 100.0, rows[i].first, 1e-12);
      EXPECT_NEAR(part->y(r, 0) * 1e5, rows[i].second, 1e-9);
      EXPECT_NEAR(part->y(r, 0), oracles::moseley({part->x(r, 0)})[0], 1e-12);
    }
  }
}
