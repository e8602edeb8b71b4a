#include "eql/selection.hpp"

#include "eql/error.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

namespace eql {

int sparsity(const NetworkParams& params, double threshold) {
  int active = 0;
  for (std::size_t l = 0; l < params.hidden.size(); ++l) {
    const auto& layer = params.hidden[l];
    const Matrix& next = l + 1 < params.hidden.size() ? params.hidden[l + 1].linear.weights : params.readout.weights;
    const auto& spec = layer.spec;
    const Matrix& w = layer.linear.weights;
    for (int i = 0; i < spec.output_width(); ++i) {
      double in_norm = 0.0;
      if (i < spec.u) {
        in_norm = w.row(i).cwiseAbs().sum();
      } else {
        const int a = spec.u + 2 * (i - spec.u);
        in_norm = w.row(a).cwiseAbs().sum() + w.row(a + 1).cwiseAbs().sum();
      }
      const double out_norm = next.col(i).cwiseAbs().sum();
      if (in_norm * out_norm > threshold) ++active;
    }
  }
  return active;
}

std::string_view to_string(Criterion c) {
  return c == Criterion::RankNorm ? "rank_norm" : "validation_only";
}

Criterion criterion_from_string(std::string_view name) {
  if (name == "rank_norm") return Criterion::RankNorm;
  if (name == "validation_only") return Criterion::ValidationOnly;
  fail(ErrorCode::InvalidArgument, "unknown selection criterion '" + std::string(name) +
                                       "' (expected rank_norm or validation_only)");
}

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

namespace {

std::vector<std::size_t> usable(std::span<const Candidate> candidates) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < candidates.size(); ++i)
    if (!candidates[i].failed) idx.push_back(i);
  require(!idx.empty(), ErrorCode::InvalidArgument,
          candidates.empty() ? "no candidates to select from" : "every candidate failed");
  return idx;
}

}  // namespace

std::size_t rank_select(std::span<const Candidate> candidates) {
  const auto idx = usable(candidates);
  std::vector<double> val;
  std::vector<double> sp;
  for (std::size_t i : idx) {
    val.push_back(candidates[i].val_rms);
    sp.push_back(static_cast<double>(candidates[i].sparsity));
  }
  const auto rv = average_ranks(val);
  const auto rs = average_ranks(sp);
  std::size_t best = 0;
  for (std::size_t k = 1; k < idx.size(); ++k) {
    const double norm = rv[k] * rv[k] + rs[k] * rs[k];
    const double best_norm = rv[best] * rv[best] + rs[best] * rs[best];
    if (norm < best_norm || (norm == best_norm && val[k] < val[best])) best = k;
  }
  return idx[best];
}

std::size_t validation_select(std::span<const Candidate> candidates) {
  const auto idx = usable(candidates);
  std::size_t best = idx.front();
  for (std::size_t i : idx)
    if (candidates[i].val_rms < candidates[best].val_rms) best = i;
  return best;
}

std::size_t select(std::span<const Candidate> candidates, Criterion criterion) {
  return criterion == Criterion::RankNorm ? rank_select(candidates) : validation_select(candidates);
}

void SweepGrid::validate() const {
  require(!lambdas.empty() && !layer_counts.empty() && !units.empty() && !seeds.empty(),
          ErrorCode::InvalidArgument, "sweep grid dimensions must all be nonempty");
  base.validate();
}

std::vector<Hyperparams> SweepGrid::cells() const {
  std::vector<Hyperparams> out;
  for (int layers : layer_counts)
    for (const auto& [u, v] : units)
      for (double lambda : lambdas)
        for (std::uint64_t seed : seeds) out.push_back({lambda, layers, u, v, seed});
  return out;
}

NetBuilder eql_builder(int input_dim, int output_dim, std::vector<UnitType> menu) {
  return [=](const Hyperparams& h) { return eql_spec(input_dim, output_dim, h.layers, h.u, h.v, menu); };
}

NetBuilder mlp_builder(int input_dim, int output_dim) {
  return [=](const Hyperparams& h) { return mlp_spec(input_dim, output_dim, h.layers, h.u); };
}

namespace {

// Runs job(i) for i in [0, count) on `jobs` threads.
template <class Job>
void run_pool(std::size_t count, int jobs, Job&& job) {
  const auto workers = static_cast<std::size_t>(std::max(1, jobs));
  if (workers == 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(workers, count); ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) job(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace

std::vector<Candidate> sweep(const SweepGrid& grid, const NetBuilder& builder, const SweepData& data, int jobs,
                             const SweepLog& log) {
  grid.validate();
  const auto cells = grid.cells();
  std::vector<Candidate> out(cells.size());
  std::mutex log_mutex;
  std::size_t done = 0;
  run_pool(cells.size(), jobs, [&](std::size_t i) {
    Candidate c;
    c.hyper = cells[i];
    try {
      TrainConfig config = grid.base;
      config.lambda = c.hyper.lambda;
      config.seed = c.hyper.seed;
      c.model = train(data.train, builder(c.hyper), config);
      c.val_rms = rms(c.model, data.validation);
      c.sparsity = sparsity(c.model.params);
      for (const auto& [name, test] : data.tests) c.test_rms[name] = rms(c.model, test);
      if (!std::isfinite(c.val_rms)) {
        c.failed = true;
        c.error = "non-finite validation error";
      }
    } catch (const std::exception& e) {
      c.failed = true;
      c.error = e.what();
    }
    out[i] = std::move(c);
    if (log) {
      std::lock_guard lock(log_mutex);
      log(out[i], ++done, cells.size());
    }
  });
  return out;
}

SplitSummary summarize(std::span<const double> values) {
  SplitSummary s;
  s.count = static_cast<int>(values.size());
  if (values.empty()) return s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

std::map<std::string, SplitSummary> cell_summary(std::span<const Candidate> candidates, std::size_t selected) {
  require(selected < candidates.size(), ErrorCode::InvalidArgument, "selected index out of range");
  const auto& h = candidates[selected].hyper;
  std::map<std::string, std::vector<double>> values;
  for (const auto& c : candidates) {
    if (c.failed || c.hyper.lambda != h.lambda || c.hyper.layers != h.layers || c.hyper.u != h.u || c.hyper.v != h.v)
      continue;
    values["validation"].push_back(c.val_rms);
    for (const auto& [name, value] : c.test_rms) values[name].push_back(value);
  }
  std::map<std::string, SplitSummary> out;
  for (const auto& [name, v] : values) out[name] = summarize(v);
  return out;
}

std::vector<NoiseGridCell> noise_data_grid(const Benchmark& benchmark, const NoiseGridConfig& config, int jobs) {
  require(!config.sigmas.empty() && !config.counts.empty(), ErrorCode::InvalidArgument,
          "noise grid needs at least one sigma and one data count");
  require(benchmark.tests.contains("interp") && benchmark.tests.contains(config.extrap_split),
          ErrorCode::InvalidArgument, benchmark.name + " lacks the requested test splits");
  const auto interp = benchmark.tests.at("interp")(config.test_count, test_set_seed(config.data_seed, "interp"));
  const auto extrap = benchmark.tests.at(config.extrap_split)(config.test_count, test_set_seed(config.data_seed, config.extrap_split));

  std::vector<NoiseGridCell> cells;
  for (double sigma : config.sigmas)
    for (int count : config.counts) cells.push_back({sigma, count, 0.0, 0.0, false, {}});

  run_pool(cells.size(), jobs, [&](std::size_t i) {
    auto& cell = cells[i];
    try {
      const auto data = benchmark.train(cell.count, cell.sigma, config.data_seed);
      const auto model = train(data, config.network, config.train);
      cell.interp_rms = rms(model, interp);
      cell.extrap_rms = rms(model, extrap);
    } catch (const std::exception& e) {
      cell.failed = true;
      cell.error = e.what();
      cell.interp_rms = cell.extrap_rms = std::numeric_limits<double>::quiet_NaN();
    }
  });
  return cells;
}

}  // namespace eql
