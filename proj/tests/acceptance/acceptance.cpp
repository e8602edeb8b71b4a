// End-to-end acceptance run: one PASS/FAIL line per criterion on stdout
// (copied to acceptance_results.txt), progress on stderr.
// EQL_ACCEPTANCE_ONLY=3,4 restricts the run; criteria 4 and 5 reuse the
// pendulum sweep of 3, so they trigger it as needed.

#include "eql/datasets.hpp"
#include "eql/expression.hpp"
#include "eql/selection.hpp"
#include "eql/serialization.hpp"
#include "eql/trainer.hpp"

#include "oracles.hpp"
#include "test_support.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>

using namespace eql;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool pass = false;
  std::string detail;
};

int jobs() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::vector<double> row(const Matrix& m, Eigen::Index r) {
  std::vector<double> v(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index c = 0; c < m.cols(); ++c) v[static_cast<std::size_t>(c)] = m(r, c);
  return v;
}

SweepLog progress(const std::string& tag) {
  return [tag](const Candidate& c, std::size_t done, std::size_t total) {
    std::cerr << "  [" << tag << " " << done << "/" << total << "] lambda=" << c.hyper.lambda
              << " L=" << c.hyper.layers << " v=" << c.hyper.v << " seed=" << c.hyper.seed;
    if (c.failed) {
      std::cerr << " failed: " << c.error << "\n";
    } else {
      std::cerr << " val=" << fmt(c.val_rms) << " s=" << c.sparsity;
      for (const auto& [k, v] : c.test_rms) std::cerr << " " << k << "=" << fmt(v);
      std::cerr << "\n";
    }
  };
}

std::vector<Expr> formulas(const NetworkParams& p) {
  std::vector<Expr> out;
  for (const auto& e : to_expression(p, kDisplayPruneThreshold)) out.push_back(simplify(e));
  return out;
}

std::string joined(const std::vector<Expr>& f) {
  std::string s;
  for (std::size_t i = 0; i < f.size(); ++i) s += (i ? "; y" : "y") + std::to_string(i + 1) + " = " + render(f[i]);
  return s;
}

// Trig applications (sin, or cos as a phase-shifted sine) whose argument is
// affine in exactly one input; returns |argument coefficient| per hit.
std::vector<double> trig_frequencies(const Expr& e) {
  std::vector<double> out;
  std::function<void(const Expr&)> walk = [&](const Expr& n) {
    if (n.kind == Expr::Kind::Apply && (n.fn == UnitType::Sin || n.fn == UnitType::Cos)) {
      if (const auto a = as_affine(n.child())) {
        std::vector<double> nonzero;
        for (const auto& [var, coef] : a->coefficients)
          if (coef != 0.0) nonzero.push_back(coef);
        if (nonzero.size() == 1) out.push_back(std::abs(nonzero.front()));
      }
    }
    for (const auto& c : n.children) walk(c);
  };
  walk(e);
  return out;
}

bool near_rel(double got, double want, double rel) { return std::abs(got - want) <= rel * std::abs(want); }

// ---------------------------------------------------------------- 1

Outcome gradient_correctness() {
  std::mt19937_64 rng(20240601);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto arch = testing_support::random_architecture(rng);
    auto p = build_network(arch.spec, rng());
    testing_support::jitter(p, rng, 0.3);
    const Matrix x = testing_support::random_matrix(rng, 5, arch.spec.input_dim, 1.5);
    const Matrix up = testing_support::random_matrix(rng, 5, arch.spec.output_dim, 1.0);
    worst = std::max(worst, testing_support::gradient_check(p, x, up));
  }
  return {worst < 1e-5, "100 architectures, max rel err " + fmt(worst) + " (< 1e-5)"};
}

// ---------------------------------------------------------------- 2

Outcome extraction_oracle() {
  std::mt19937_64 rng(99);
  double worst = 0.0;
  for (int net = 0; net < 20; ++net) {
    const auto arch = testing_support::random_architecture(rng);
    NetworkParams p;
    if (net % 2 == 0) {
      p = build_network(arch.spec, rng());
    } else {
      // Briefly trained on a random smooth target.
      LabeledDataset d;
      d.x = testing_support::random_matrix(rng, 100, arch.spec.input_dim, 1.0);
      d.y = (d.x * testing_support::random_matrix(rng, arch.spec.input_dim, arch.spec.output_dim, 1.0))
                .array()
                .sin()
                .matrix();
      TrainConfig cfg;
      cfg.epochs = 20;
      cfg.lambda = 1e-3;
      cfg.seed = rng();
      p = train(d, arch.spec, cfg).params;
    }
    const auto trees = to_expression(p, 0.0);
    const Matrix x = testing_support::random_matrix(rng, 1000, arch.spec.input_dim, 2.0);
    const Matrix y = predict(p, x);
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      const auto xr = row(x, r);
      for (int k = 0; k < p.output_dim; ++k)
        worst = std::max(worst, std::abs(expr_eval(trees[static_cast<std::size_t>(k)], xr) - y(r, k)));
    }
  }
  return {worst <= 1e-9, "20 networks x 1000 inputs, max |expr - net| " + fmt(worst) + " (<= 1e-9)"};
}

// ---------------------------------------------------------------- 3, 4, 5

struct PendulumSetup {
  SweepData data;
  std::vector<Candidate> candidates;
  std::size_t selected = 0;
};

const PendulumSetup& pendulum() {
  static const PendulumSetup setup = [] {
    PendulumSetup s;
    const auto b = make_benchmark("pendulum");
    s.data.train = b.train(1000, 0.01, 1);
    s.data.validation = b.train(1000, 0.01, 77);  // separate draw from the same distribution
    for (const char* t : {"interp", "near", "far"}) s.data.tests[t] = b.tests.at(t)(1000, test_set_seed(1, t));
    SweepGrid grid;
    grid.lambdas = {1e-5, 1e-4, 1e-3};
    grid.layer_counts = {2};
    grid.units = {{4, 1}, {12, 3}};
    grid.seeds = {0, 1, 2, 3};
    grid.base.epochs = 5000;
    s.candidates = sweep(grid, eql_builder(2, 2), s.data, jobs(), progress("pendulum"));
    s.selected = select(s.candidates, Criterion::RankNorm);
    return s;
  }();
  return setup;
}

Outcome pendulum_reproduction() {
  const auto& s = pendulum();
  const auto& c = s.candidates[s.selected];
  const double interp = c.test_rms.at("interp");
  const double far = c.test_rms.at("far");
  return {interp <= 0.015 && far <= 0.05,
          "reduced grid 3 lambda x v{1,3} x 4 seeds, T=5000: interp " + fmt(interp) + " (<= 0.015), far " +
              fmt(far) + " (<= 0.05)"};
}

Outcome pendulum_formula() {
  const auto& s = pendulum();
  const auto f = formulas(s.candidates[s.selected].model.params);
  bool y1_ok = false;
  if (const auto a = as_affine(f[0]); a && variables(f[0]) == std::set<int>{1})
    y1_ok = near_rel(a->coefficients.at(1), 1.0 / kGravity, 0.10);
  // y2: one trig term in x1 alone, every other additive term constant.
  bool y2_ok = variables(f[1]) == std::set<int>{0};
  int trig_terms = 0;
  for (const auto& t : additive_terms(f[1])) {
    if (t.is_constant()) continue;
    const auto freq = trig_frequencies(t);
    ++trig_terms;
    y2_ok = y2_ok && count_apply(t, UnitType::Sin) + count_apply(t, UnitType::Cos) == 1 && freq.size() == 1 &&
            near_rel(freq.front(), 1.0, 0.05);
  }
  y2_ok = y2_ok && trig_terms == 1;
  return {y1_ok && y2_ok, joined(f)};
}

Outcome mlp_baseline() {
  const auto& s = pendulum();
  SweepGrid grid;
  grid.lambdas = {1e-5};
  grid.layer_counts = {3};
  grid.units = {{20, 0}};
  grid.seeds = {0, 1};
  grid.base.epochs = 5000;
  const auto cands = sweep(grid, mlp_builder(2, 2), s.data, jobs(), progress("mlp"));
  const auto& c = cands[select(cands, Criterion::ValidationOnly)];
  const double interp = c.test_rms.at("interp");
  const double far = c.test_rms.at("far");
  return {interp <= 0.02 && far >= 0.1,
          "tanh 2x20: interp " + fmt(interp) + " (<= 0.02), far " + fmt(far) + " (>= 0.1)"};
}

// ---------------------------------------------------------------- 6, 7

struct FormulaRun {
  Candidate selected;
  std::vector<Candidate> all;
};

// u is |menu|*v so every unary type appears v times.
FormulaRun formula_sweep(const std::string& name, const std::vector<double>& lambdas, const std::vector<int>& layers,
                         int v, const std::vector<UnitType>& menu, int epochs) {
  const auto b = make_benchmark(name);
  const auto full = b.train(10000, 0.01, 1);
  auto [validation, train_part] = split(full, 0.1, 1);
  SweepData data{std::move(train_part), std::move(validation), {}};
  for (const char* t : {"interp", "near", "far"}) data.tests[t] = b.tests.at(t)(5000, test_set_seed(1, t));
  SweepGrid grid;
  grid.lambdas = lambdas;
  grid.layer_counts = layers;
  grid.units = {{static_cast<int>(menu.size()) * v, v}};
  grid.seeds = {0, 1};
  grid.base.epochs = epochs;
  FormulaRun run;
  run.all = sweep(grid, eql_builder(4, 1, menu), data, jobs(), progress(name));
  run.selected = run.all[select(run.all, Criterion::RankNorm)];
  return run;
}

Outcome f1_reproduction() {
  const auto run = formula_sweep("f1", {1e-5}, {2, 3, 4}, 10, {std::begin(kDefaultMenu), std::end(kDefaultMenu)}, 1000);
  const auto& c = run.selected;
  const double far = c.test_rms.at("far");
  const auto f = formulas(c.model.params);
  const auto freqs = trig_frequencies(f[0]);
  std::size_t pi_term = freqs.size(), two_pi_term = freqs.size();
  for (std::size_t i = 0; i < freqs.size(); ++i) {
    if (pi_term == freqs.size() && near_rel(freqs[i], kPi, 0.05)) {
      pi_term = i;
    } else if (two_pi_term == freqs.size() && near_rel(freqs[i], 2 * kPi, 0.05)) {
      two_pi_term = i;
    }
  }
  const bool sines = pi_term < freqs.size() && two_pi_term < freqs.size();
  return {far <= 0.06 && sines, "L=" + std::to_string(c.hyper.layers) + ", far " + fmt(far) +
                                    " (<= 0.06), sine frequencies ~pi and ~2pi " + (sines ? "found" : "missing") +
                                    "; " + joined(f)};
}

Outcome f3_sensitivity() {
  const std::vector<UnitType> no_cos = {UnitType::Identity, UnitType::Sin, UnitType::Sigmoid};
  const auto without = formula_sweep("f3", {1e-4, 1e-3}, {3}, 5, no_cos, 2000);
  const auto with = formula_sweep("f3", {1e-4, 1e-3}, {3}, 5, {std::begin(kDefaultMenu), std::end(kDefaultMenu)}, 2000);
  const double far = without.selected.test_rms.at("far");
  return {far <= 0.05, "no cosine: far " + fmt(far) + " (<= 0.05); with cosine (reported only): far " +
                           fmt(with.selected.test_rms.at("far")) + "; " + joined(formulas(without.selected.model.params))};
}

// ---------------------------------------------------------------- 8

Outcome sparsity_and_selection() {
  // Two-unit pendulum network: identity unit carries x2 to y1, sine unit
  // carries -x1 to y2, a weak cosine unit stays below the threshold.
  auto p = build_network(eql_spec(2, 2, 2, 4, 1), 0);
  for (auto* a : affine_blocks(p)) {
    a->weights.setZero();
    a->bias.setZero();
  }
  p.hidden[0].linear.weights(0, 1) = 1.0;
  p.hidden[0].linear.weights(1, 0) = -1.0;
  p.hidden[0].linear.weights(2, 0) = 0.05;
  p.readout.weights(0, 0) = 1.0 / kGravity;
  p.readout.weights(1, 1) = 1.0;
  p.readout.weights(1, 2) = 0.1;
  const int s = sparsity(p);

  std::vector<Candidate> three(3);
  const double vals[] = {0.1, 0.2, 0.3};
  const int sps[] = {5, 1, 10};
  for (int i = 0; i < 3; ++i) {
    three[static_cast<std::size_t>(i)].val_rms = vals[i];
    three[static_cast<std::size_t>(i)].sparsity = sps[i];
  }
  const std::size_t winner = rank_select(three);

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.001, 1.0);
  std::uniform_int_distribution<int> si(0, 12), size(1, 12);
  int invariant = 0;
  for (int set = 0; set < 100; ++set) {
    std::vector<Candidate> c(static_cast<std::size_t>(size(rng)));
    for (auto& x : c) {
      x.val_rms = u(rng);
      x.sparsity = si(rng);
    }
    auto t = c;
    for (auto& x : t) {
      x.val_rms = std::exp(3 * x.val_rms) + x.val_rms * x.val_rms * x.val_rms;
      x.sparsity = x.sparsity * 3 + 7;
    }
    invariant += rank_select(c) == rank_select(t);
  }
  return {s == 2 && winner == 0 && invariant == 100,
          "hand-built s=" + std::to_string(s) + " (2), 3-candidate winner #" + std::to_string(winner) +
              " (0), invariant on " + std::to_string(invariant) + "/100 sets"};
}

// ---------------------------------------------------------------- 9

Outcome cartpend_behavior() {
  const auto b = make_benchmark("cartpend", {.h = 1.0});
  const auto full = b.train(10000, 0.01, 1);
  auto [validation, train_part] = split(full, 0.1, 1);
  SweepData data{std::move(train_part), std::move(validation), {}};
  for (const char* t : {"interp", "near", "far"}) data.tests[t] = b.tests.at(t)(5000, test_set_seed(1, t));
  SweepGrid grid;
  grid.lambdas = {1e-5};
  grid.layer_counts = {2, 3};
  grid.units = {{20, 5}};
  grid.seeds = {0};
  grid.base.epochs = 1000;
  const auto cands = sweep(grid, eql_builder(4, 4), data, jobs(), progress("cartpend"));
  const auto& c = cands[select(cands, Criterion::RankNorm)];
  const double interp = c.test_rms.at("interp");
  return {interp <= 0.02, "interp " + fmt(interp) + " (<= 0.02); far (reported only) " + fmt(c.test_rms.at("far"))};
}

// ---------------------------------------------------------------- 10

bool is_quadratic_on(const Expr& e, double lo, double hi) {
  // Least-squares quadratic through 201 samples; the formula must match it.
  const int n = 201;
  Matrix a(n, 3);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    const double x = lo + (hi - lo) * i / (n - 1);
    a(i, 0) = 1;
    a(i, 1) = x;
    a(i, 2) = x * x;
    const double in[] = {x};
    y(i) = expr_eval(e, in);
  }
  const Eigen::VectorXd coef = a.colPivHouseholderQr().solve(y);
  return (a * coef - y).cwiseAbs().maxCoeff() <= 1e-3 && std::abs(coef(2)) > 0.1;
}

Outcome xray_analog() {
  const auto [known, extrapolation] = load_xray(EQL_DATA_DIR "/moseley_fixture.csv");
  auto [train_part, validation] = split(known, 70.0 / 80.0, 3);
  SweepData data{std::move(train_part), std::move(validation), {{"far", extrapolation}}};
  SweepGrid grid;
  grid.lambdas = {1e-4, 1e-3};
  grid.layer_counts = {2};
  grid.units = {{4, 1}};
  grid.seeds = {0, 1};
  grid.base.epochs = 50000;
  grid.base.batch_size = 2;
  const auto cands = sweep(grid, eql_builder(1, 1), data, jobs(), progress("xray"));
  const auto& c = cands[select(cands, Criterion::ValidationOnly)];
  const double far = c.test_rms.at("far");
  const auto f = formulas(c.model.params);
  const bool quadratic = count_kind(f[0], Expr::Kind::Product) >= 1 && is_quadratic_on(f[0], 0.1, 1.0);
  return {far <= 0.01 && quadratic, "70/10/14 rows, batch 2, T=50000: extrapolation " + fmt(far) +
                                        " (<= 0.01), quadratic " + (quadratic ? "yes" : "no") + "; " + joined(f)};
}

// ---------------------------------------------------------------- 11

Outcome dataset_exactness() {
  double worst = 0.0;
  long inside = 0;
  for (const auto& name : benchmark_names()) {
    const auto b = make_benchmark(name);
    std::vector<std::pair<std::string, LabeledDataset>> sets = {{"train", b.train(10000, 0.0, 11)}};
    for (const auto& [t, gen] : b.tests) sets.emplace_back(t, gen(10000, 12));
    for (const auto& [t, d] : sets) {
      for (Eigen::Index r = 0; r < d.rows(); ++r) {
        const auto x = row(d.x, r);
        const auto want = oracles::by_name(name, x);
        for (Eigen::Index k = 0; k < d.y.cols(); ++k)
          worst = std::max(worst, std::abs(d.y(r, k) - want[static_cast<std::size_t>(k)]));
        if (d.domain.kind == Domain::Kind::Shell && d.x.row(r).cwiseAbs().maxCoeff() <= d.domain.inner) ++inside;
      }
    }
  }
  return {worst <= 1e-12 && inside == 0, "10 generators x 1e4 points per split, max err " + fmt(worst) +
                                             " (<= 1e-12), shell points inside training cube " +
                                             std::to_string(inside)};
}

// ---------------------------------------------------------------- 12

Outcome noise_grid() {
  NoiseGridConfig cfg;
  cfg.sigmas = {0.0, 0.05, 0.2};
  cfg.counts = {300, 1000, 3000};
  cfg.network = eql_spec(3, 2, 2, 12, 3);
  cfg.train.epochs = 1500;
  cfg.train.lambda = 1e-4;
  cfg.test_count = 1000;
  const auto cells = noise_data_grid(make_benchmark("kin-3-end"), cfg, jobs());
  for (const auto& c : cells)
    std::cerr << "  [noise-grid] sigma=" << c.sigma << " N=" << c.count << " interp=" << fmt(c.interp_rms)
              << " far=" << fmt(c.extrap_rms) << (c.failed ? " failed" : "") << "\n";
  const auto& best = cells[2];   // smallest sigma, largest N
  const auto& worst = cells[6];  // largest sigma, smallest N
  const bool ok = !best.failed && !worst.failed && best.extrap_rms < worst.extrap_rms;
  return {ok, "kin-3-end far RMS at (sigma 0, N 3000) " + fmt(best.extrap_rms) + " < (sigma 0.2, N 300) " +
                  fmt(worst.extrap_rms)};
}

}  // namespace

int main() {
  struct Criterion_ {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion_> criteria = {
      {1, "gradient correctness", gradient_correctness},
      {2, "extraction oracle", extraction_oracle},
      {3, "pendulum reproduction", pendulum_reproduction},
      {4, "pendulum formula recovery", pendulum_formula},
      {5, "MLP baseline gap", mlp_baseline},
      {6, "F-1 reproduction", f1_reproduction},
      {7, "F-3 base-function sensitivity", f3_sensitivity},
      {8, "sparsity and selection", sparsity_and_selection},
      {9, "cart-pendulum out-of-class", cartpend_behavior},
      {10, "X-ray analog", xray_analog},
      {11, "dataset equation exactness", dataset_exactness},
      {12, "noise/data grid", noise_grid},
  };
  std::set<int> only;
  if (const char* env = std::getenv("EQL_ACCEPTANCE_ONLY")) {
    std::stringstream ss(env);
    for (std::string item; std::getline(ss, item, ',');)
      if (!item.empty()) only.insert(std::stoi(item));
  }
  // ctest hides the output of passing tests, so the lines also go to a file.
  std::ofstream results("acceptance_results.txt");
  int failures = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.contains(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += !o.pass;
    std::ostringstream line;
    line << (o.pass ? "PASS" : "FAIL") << " [" << c.id << "] " << c.name << ": " << o.detail << " (" << fmt(secs)
         << " s)";
    std::cout << line.str() << std::endl;
    results << line.str() << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
