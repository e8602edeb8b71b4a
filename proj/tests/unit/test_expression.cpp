#include "eql/error.hpp"
#include "eql/expression.hpp"
#include "eql/trainer.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <random>

using namespace eql;

namespace {

std::vector<double> row(const Matrix& m, Eigen::Index r) {
  std::vector<double> v(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index c = 0; c < m.cols(); ++c) v[static_cast<std::size_t>(c)] = m(r, c);
  return v;
}

double max_extraction_error(const NetworkParams& p, const Matrix& x) {
  const auto trees = to_expression(p, 0.0);
  const Matrix y = predict(p, x);
  double worst = 0.0;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const auto xr = row(x, r);
    for (int k = 0; k < p.output_dim; ++k)
      worst = std::max(worst, std::abs(expr_eval(trees[static_cast<std::size_t>(k)], xr) - y(r, k)));
  }
  return worst;
}

Expr random_tree(std::mt19937_64& rng, int depth, int vars) {
  std::uniform_int_distribution<int> pick(0, 5), var(0, vars - 1), fn(1, 4), arity(2, 3);
  std::uniform_real_distribution<double> coef(-2.0, 2.0);
  const int kind = depth <= 0 ? static_cast<int>(rng() % 2) : pick(rng);
  switch (kind) {
    case 0: return Expr::constant(coef(rng));
    case 1: return Expr::variable(var(rng));
    case 2:
    case 3: {
      std::vector<Expr> kids;
      for (int i = arity(rng); i > 0; --i) kids.push_back(random_tree(rng, depth - 1, vars));
      return kind == 2 ? Expr::sum(std::move(kids)) : Expr::product(std::move(kids));
    }
    case 4: {
      static constexpr UnitType fns[] = {UnitType::Sin, UnitType::Sin, UnitType::Cos, UnitType::Sigmoid,
                                         UnitType::Tanh};
      return Expr::apply(fns[fn(rng)], random_tree(rng, depth - 1, vars));
    }
    default: return Expr::scale(coef(rng), random_tree(rng, depth - 1, vars));
  }
}

// The tree with every printed number replaced by its value at `precision`
// significant digits: what a faithful render/parse cycle should reproduce.
Expr rounded(const Expr& e, int precision) {
  Expr out = e;
  if (e.kind == Expr::Kind::Constant || e.kind == Expr::Kind::Scale) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", precision, e.value);
    out.value = std::stod(buf);
  }
  for (auto& c : out.children) c = rounded(c, precision);
  return out;
}

NetworkParams hand_sine() {
  auto p = build_network(2, 1, {make_layer_spec(2, 0)}, 0);
  p.hidden[0].linear.weights.setZero();
  p.hidden[0].linear.weights(1, 0) = -1.0;
  p.readout.weights << 0.0, 1.0;
  p.readout.bias << 0.0;
  return p;
}

}  // namespace

TEST(Expression, ExactAtZeroThresholdOnRandomNetworks) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const auto arch = testing_support::random_architecture(rng);
    auto p = build_network(arch.spec, rng());
    testing_support::jitter(p, rng, 0.2);
    const Matrix x = testing_support::random_matrix(rng, 1000, arch.spec.input_dim, 2.0);
    EXPECT_LE(max_extraction_error(p, x), 1e-9) << "trial " << trial;
  }
}

TEST(Expression, ExactAtZeroThresholdOnTrainedNetwork) {
  LabeledDataset d;
  std::mt19937_64 rng(5);
  d.x = testing_support::random_matrix(rng, 200, 2, 1.0);
  d.y.resize(200, 1);
  for (Eigen::Index r = 0; r < 200; ++r) d.y(r, 0) = std::sin(d.x(r, 0)) * d.x(r, 1);
  TrainConfig cfg;
  cfg.epochs = 40;
  cfg.lambda = 1e-3;
  const auto model = train(d, eql_spec(2, 1, 3, 4, 1), cfg);
  EXPECT_LE(max_extraction_error(model.params, testing_support::random_matrix(rng, 1000, 2, 2.0)), 1e-9);
}

TEST(Expression, ZeroNetworkGivesBiasConstants) {
  auto p = build_network(eql_spec(2, 2, 3, 4, 1), 0);
  for (auto* a : affine_blocks(p)) a->weights.setZero();
  p.readout.bias << 0.25, -1.5;
  const auto trees = to_expression(p, 0.0);
  ASSERT_EQ(trees.size(), 2u);
  EXPECT_EQ(trees[0], Expr::constant(0.25));
  EXPECT_EQ(trees[1], Expr::constant(-1.5));
}

TEST(Expression, HandBuiltSineUnrolls) {
  const auto trees = to_expression(hand_sine());
  const Expr expected = Expr::scale(1.0, Expr::apply(UnitType::Sin, Expr::scale(-1.0, Expr::variable(0))));
  ASSERT_EQ(trees.size(), 1u);
  EXPECT_EQ(trees[0], expected);
  EXPECT_EQ(render(simplify(trees[0])), "sin(-x1)");
}

TEST(Expression, OrphanUnitsAreDropped) {
  // Cos unit (index 2) has an outgoing weight below the threshold: it must
  // vanish from the pruned tree, as must everything feeding only into it.
  auto p = build_network(eql_spec(2, 1, 2, 4, 0), 1);
  p.readout.weights(0, 2) = 0.004;
  const auto pruned = to_expression(p, 0.01);
  EXPECT_EQ(count_apply(pruned[0], UnitType::Cos), 0u);
  EXPECT_EQ(count_apply(to_expression(p, 0.0)[0], UnitType::Cos), 1u);

  // With the column exactly zero, pruning removes nothing that contributes.
  p.readout.weights(0, 2) = 0.0;
  for (Eigen::Index c = 0; c < p.hidden[0].linear.weights.cols(); ++c)
    if (std::abs(p.hidden[0].linear.weights(2, c)) < 0.01) p.hidden[0].linear.weights(2, c) = 0.5;
  for (auto* a : affine_blocks(p))
    for (Eigen::Index i = 0; i < a->weights.size(); ++i)
      if (std::abs(a->weights(i)) < 0.01) a->weights(i) = 0.0;
  std::mt19937_64 rng(2);
  const Matrix x = testing_support::random_matrix(rng, 100, 2, 2.0);
  const auto tree = to_expression(p, 0.01)[0];
  const Matrix y = predict(p, x);
  for (Eigen::Index r = 0; r < x.rows(); ++r) EXPECT_NEAR(expr_eval(tree, row(x, r)), y(r, 0), 1e-12);
}

TEST(Expression, ProductUnitsHaveTwoFactors) {
  std::mt19937_64 rng(8);
  auto p = build_network(eql_spec(3, 1, 3, 4, 3), 4);
  testing_support::jitter(p, rng, 0.2);
  std::function<void(const Expr&)> check = [&](const Expr& e) {
    if (e.kind == Expr::Kind::Product) {
      EXPECT_EQ(e.children.size(), 2u);
    }
    for (const auto& c : e.children) check(c);
  };
  for (const auto& t : to_expression(p, 0.0)) {
    check(t);
    EXPECT_LT(max_variable_index(t), 3);
  }
}

TEST(Expression, EvalBasics) {
  const double x[] = {0.3};
  EXPECT_EQ(expr_eval(Expr::constant(3.0), x), 3.0);
  EXPECT_EQ(expr_eval(Expr::apply(UnitType::Sigmoid, Expr::constant(0.0)), x), 0.5);
  EXPECT_THROW(expr_eval(Expr::variable(1), x), Error);
}

TEST(Expression, SimplifyExamples) {
  EXPECT_EQ(simplify(Expr::sum({Expr::constant(1.0), Expr::constant(2.0)})), Expr::constant(3.0));
  EXPECT_EQ(simplify(Expr::scale(0.0, Expr::apply(UnitType::Sin, Expr::variable(0)))), Expr::constant(0.0));
  EXPECT_EQ(simplify(Expr::scale(2.0, Expr::scale(3.0, Expr::variable(1)))), Expr::scale(6.0, Expr::variable(1)));
  // x1 - x1 cancels completely.
  EXPECT_EQ(simplify(Expr::sum({Expr::variable(0), Expr::scale(-1.0, Expr::variable(0))})), Expr::constant(0.0));
  const Expr nested = Expr::sum({Expr::variable(0), Expr::sum({Expr::variable(1), Expr::constant(1.0)})});
  EXPECT_EQ(simplify(nested).children.size(), 3u);
}

TEST(Expression, SimplifyPreservesValue) {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (int trial = 0; trial < 200; ++trial) {
    const Expr e = random_tree(rng, 4, 3);
    const Expr s = simplify(e);
    for (int k = 0; k < 20; ++k) {
      const double x[] = {u(rng), u(rng), u(rng)};
      EXPECT_NEAR(expr_eval(s, x), expr_eval(e, x), 1e-12) << render(e, 17);
    }
  }
}

TEST(Expression, RenderExamples) {
  EXPECT_EQ(render(Expr::constant(0.5)), "0.5");
  const Expr e = Expr::sum({Expr::scale(0.1019, Expr::variable(1)), Expr::constant(-0.002)});
  EXPECT_EQ(render(e), "0.102*x2 - 0.002");
  EXPECT_EQ(render(Expr::product({Expr::variable(0), Expr::sum({Expr::variable(1), Expr::constant(1.0)})})),
            "x1*(x2 + 1)");
  EXPECT_EQ(render(Expr::apply(UnitType::Cos, Expr::variable(0)), 3), "cos(x1)");
  EXPECT_THROW(render(Expr::constant(1.0), 0), Error);
}

TEST(Expression, RenderParseRoundTrip) {
  std::mt19937_64 rng(123);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (int trial = 0; trial < 100; ++trial) {
    const Expr e = simplify(random_tree(rng, 4, 3));
    for (int precision : {3, 6}) {
      const Expr back = parse_expression(render(e, precision));
      const Expr oracle = rounded(e, precision);
      for (int k = 0; k < 10; ++k) {
        const double x[] = {u(rng), u(rng), u(rng)};
        const double want = expr_eval(oracle, x);
        EXPECT_NEAR(expr_eval(back, x), want, 1e-9 * std::max(1.0, std::abs(want))) << render(e, precision);
      }
    }
    // At 17 digits every printed number is exact.
    const double x[] = {0.3, -0.7, 1.1};
    const double want = expr_eval(e, x);
    EXPECT_NEAR(expr_eval(parse_expression(render(e, 17)), x), want, 1e-12 * std::max(1.0, std::abs(want)));
  }
}

TEST(Expression, ParseErrors) {
  for (const char* bad : {"", "x1 +", "sin x1", "foo(x1)", "(x1", "x0", "1..2", "x1 $ 2"}) {
    try {
      parse_expression(bad);
      ADD_FAILURE() << "accepted '" << bad << "'";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::Parse) << bad;
    }
  }
  EXPECT_EQ(parse_expression("-x2 + 1e-3"),
            Expr::sum({Expr::scale(-1.0, Expr::variable(1)), Expr::constant(1e-3)}));
}

TEST(Expression, AffineView) {
  const auto form = as_affine(simplify(parse_expression("0.102*x2 + 0.5*(x1 - 3*x1) + 3")));
  ASSERT_TRUE(form.has_value());
  EXPECT_NEAR(form->constant, 3.0, 1e-15);
  EXPECT_NEAR(form->coefficients.at(1), 0.102, 1e-15);
  EXPECT_NEAR(form->coefficients.at(0), -1.0, 1e-15);
  EXPECT_FALSE(as_affine(parse_expression("x1*x2")).has_value());
  EXPECT_FALSE(as_affine(parse_expression("sin(x1)")).has_value());
  EXPECT_EQ(additive_terms(parse_expression("x1 + sin(x2) - 2")).size(), 3u);
}
