#include "eql/eql.h"

#include "eql/datasets.hpp"
#include "eql/error.hpp"
#include "eql/expression.hpp"
#include "eql/selection.hpp"
#include "eql/serialization.hpp"
#include "eql/trainer.hpp"

#include <cstring>
#include <memory>
#include <sstream>
#include <string>

struct eql_dataset {
  eql::LabeledDataset data;
};

struct eql_model {
  eql::TrainedModel model;
};

struct eql_sweep {
  std::vector<eql::Candidate> candidates;
};

namespace {

using eql::ErrorCode;
using eql::Json;

thread_local std::string g_last_error;

eql_status status_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return EQL_ERR_INVALID_ARGUMENT;
    case ErrorCode::DimensionMismatch: return EQL_ERR_DIMENSION_MISMATCH;
    case ErrorCode::NonFinite: return EQL_ERR_NON_FINITE;
    case ErrorCode::Diverged: return EQL_ERR_DIVERGED;
    case ErrorCode::Io: return EQL_ERR_IO;
    case ErrorCode::Parse: return EQL_ERR_PARSE;
    case ErrorCode::EmptyPartition: return EQL_ERR_EMPTY_PARTITION;
    case ErrorCode::Internal: return EQL_ERR_INTERNAL;
  }
  return EQL_ERR_INTERNAL;
}

template <class F>
eql_status guard(F&& f) {
  try {
    f();
    g_last_error.clear();
    return EQL_OK;
  } catch (const eql::Error& e) {
    g_last_error = e.what();
    return status_of(e.code());
  } catch (const Json::exception& e) {
    g_last_error = e.what();
    return EQL_ERR_PARSE;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return EQL_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return EQL_ERR_INTERNAL;
  }
}

template <class T>
const T& deref(const T* p, const char* what) {
  eql::require(p != nullptr, ErrorCode::InvalidArgument, std::string(what) + " is null");
  return *p;
}

void need(const void* p, const char* what) {
  eql::require(p != nullptr, ErrorCode::InvalidArgument, std::string(what) + " is null");
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

Json parse_or_empty(const char* text) {
  if (text == nullptr || *text == '\0') return Json::object();
  try {
    Json j = Json::parse(text);
    eql::require(j.is_object(), ErrorCode::Parse, "expected a JSON object");
    return j;
  } catch (const Json::parse_error& e) {
    eql::fail(ErrorCode::Parse, e.what());
  }
}

std::vector<eql::UnitType> menu_from(const Json& j) {
  std::vector<eql::UnitType> menu;
  if (!j.contains("menu")) return {std::begin(eql::kDefaultMenu), std::end(eql::kDefaultMenu)};
  for (const auto& t : j.at("menu")) menu.push_back(eql::unit_type_from_string(t.get<std::string>()));
  eql::require(!menu.empty(), ErrorCode::InvalidArgument, "unit menu must not be empty");
  return menu;
}

bool is_mlp(const Json& j) {
  const std::string kind = j.value("kind", std::string("eql"));
  eql::require(kind == "eql" || kind == "mlp", ErrorCode::InvalidArgument, "network kind must be eql or mlp");
  return kind == "mlp";
}

eql::NetworkSpec spec_from(const Json& j, int n, int m) {
  const int layers = j.value("layers", 2);
  if (is_mlp(j)) return eql::mlp_spec(n, m, layers, j.value("width", j.value("u", 20)));
  const int v = j.value("v", 1);
  const int u = j.value("u", 4 * v);
  const auto menu = menu_from(j);
  return eql::eql_spec(n, m, layers, u, v, menu);
}

eql_dataset* wrap(eql::LabeledDataset d) { return new eql_dataset{std::move(d)}; }

}  // namespace

extern "C" {

const char* eql_last_error(void) { return g_last_error.c_str(); }

const char* eql_status_string(eql_status status) {
  switch (status) {
    case EQL_OK: return "ok";
    case EQL_ERR_INVALID_ARGUMENT: return "invalid argument";
    case EQL_ERR_DIMENSION_MISMATCH: return "dimension mismatch";
    case EQL_ERR_NON_FINITE: return "non-finite value";
    case EQL_ERR_DIVERGED: return "training diverged";
    case EQL_ERR_IO: return "i/o error";
    case EQL_ERR_PARSE: return "parse error";
    case EQL_ERR_EMPTY_PARTITION: return "empty partition";
    case EQL_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* eql_version(void) { return "0.1.0"; }

void eql_string_free(char* s) { std::free(s); }

eql_status eql_benchmark_names(char** out_json) {
  return guard([&] {
    need(out_json, "out_json");
    *out_json = dup(Json(eql::benchmark_names()).dump());
  });
}

eql_status eql_benchmark_info_json(const char* benchmark, double h, char** out_json) {
  return guard([&] {
    need(benchmark, "benchmark");
    need(out_json, "out_json");
    eql::BenchmarkOptions options;
    options.h = h > 0 ? h : 0.0;
    const auto bench = eql::make_benchmark(benchmark, options);
    Json tests = Json::array();
    for (const auto& [name, fn] : bench.tests) tests.push_back(name);
    const Json j = {{"name", bench.name},
                    {"n", bench.target.input_dim},
                    {"m", bench.target.output_dim},
                    {"h", bench.h},
                    {"tests", tests}};
    *out_json = dup(j.dump());
  });
}

eql_status eql_dataset_generate(const char* benchmark, const char* split, int count, double sigma, uint64_t seed,
                                double h, eql_dataset** out) {
  return guard([&] {
    need(benchmark, "benchmark");
    need(out, "out");
    eql::BenchmarkOptions options;
    options.h = h > 0 ? h : 0.0;
    const auto bench = eql::make_benchmark(benchmark, options);
    const std::string which = split ? split : "train";
    if (which == "train") {
      *out = wrap(bench.train(count, sigma, seed));
      return;
    }
    const auto it = bench.tests.find(which);
    eql::require(it != bench.tests.end(), ErrorCode::InvalidArgument,
                 bench.name + " has no test set '" + which + "'");
    *out = wrap(it->second(count, eql::test_set_seed(seed, which)));
  });
}

eql_status eql_dataset_create(int64_t rows, int n, int m, const double* x, const double* y, eql_dataset** out) {
  return guard([&] {
    need(out, "out");
    eql::require(rows > 0 && n > 0 && m > 0, ErrorCode::InvalidArgument, "dataset dimensions must be positive");
    need(x, "x");
    need(y, "y");
    eql::LabeledDataset d;
    d.x = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(x, rows, n);
    d.y = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(y, rows, m);
    d.domain.dim = n;
    d.validate();
    *out = wrap(std::move(d));
  });
}

eql_status eql_dataset_load_csv(const char* csv_path, const char* meta_path, eql_dataset** out) {
  return guard([&] {
    need(csv_path, "csv_path");
    need(out, "out");
    *out = wrap(eql::load_dataset(csv_path, meta_path ? meta_path : ""));
  });
}

eql_status eql_dataset_save_csv(const eql_dataset* data, const char* csv_path, const char* meta_path) {
  return guard([&] {
    need(csv_path, "csv_path");
    eql::save_dataset(deref(data, "dataset").data, csv_path,
                      meta_path ? std::string(meta_path) : eql::default_meta_path(csv_path));
  });
}

eql_status eql_dataset_shape(const eql_dataset* data, int64_t* rows, int* n, int* m) {
  return guard([&] {
    const auto& d = deref(data, "dataset").data;
    if (rows) *rows = d.rows();
    if (n) *n = d.input_dim();
    if (m) *m = d.output_dim();
  });
}

eql_status eql_dataset_copy(const eql_dataset* data, double* x, double* y) {
  return guard([&] {
    const auto& d = deref(data, "dataset").data;
    for (Eigen::Index r = 0; r < d.rows(); ++r) {
      if (x)
        for (int c = 0; c < d.input_dim(); ++c) *x++ = d.x(r, c);
      if (y)
        for (int c = 0; c < d.output_dim(); ++c) *y++ = d.y(r, c);
    }
  });
}

eql_status eql_dataset_info_json(const eql_dataset* data, char** out_json) {
  return guard([&] {
    need(out_json, "out_json");
    const auto& d = deref(data, "dataset").data;
    const Json j = {{"name", d.name},   {"n", d.input_dim()},     {"m", d.output_dim()},
                    {"rows", d.rows()}, {"sigma", d.noise_sigma}, {"domain", eql::domain_to_json(d.domain)}};
    *out_json = dup(j.dump());
  });
}

eql_status eql_dataset_split(const eql_dataset* data, double fraction, uint64_t seed, eql_dataset** first,
                             eql_dataset** second) {
  return guard([&] {
    need(first, "first");
    need(second, "second");
    auto [a, b] = eql::split(deref(data, "dataset").data, fraction, seed);
    auto pa = std::make_unique<eql_dataset>(eql_dataset{std::move(a)});
    *second = wrap(std::move(b));
    *first = pa.release();
  });
}

eql_status eql_dataset_load_xray(const char* path, eql_dataset** known, eql_dataset** extrapolation) {
  return guard([&] {
    need(path, "path");
    need(known, "known");
    need(extrapolation, "extrapolation");
    auto [a, b] = eql::load_xray(path);
    auto pa = std::make_unique<eql_dataset>(eql_dataset{std::move(a)});
    *extrapolation = wrap(std::move(b));
    *known = pa.release();
  });
}

void eql_dataset_free(eql_dataset* data) { delete data; }

eql_status eql_train(const eql_dataset* train, const char* network_json, const char* config_json, eql_model** out) {
  return guard([&] {
    need(out, "out");
    const auto& d = deref(train, "train").data;
    const auto net = parse_or_empty(network_json);
    const auto config = eql::config_from_json(parse_or_empty(config_json));
    auto model = eql::train(d, spec_from(net, d.input_dim(), d.output_dim()), config);
    *out = new eql_model{std::move(model)};
  });
}

eql_status eql_model_load(const char* path, eql_model** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    *out = new eql_model{eql::load_model(path)};
  });
}

eql_status eql_model_save(const eql_model* model, const char* path, const char* metrics_json) {
  return guard([&] {
    need(path, "path");
    eql::save_model(path, deref(model, "model").model, parse_or_empty(metrics_json));
  });
}

eql_status eql_model_dims(const eql_model* model, int* n, int* m) {
  return guard([&] {
    const auto& p = deref(model, "model").model.params;
    if (n) *n = p.input_dim;
    if (m) *m = p.output_dim;
  });
}

eql_status eql_model_rms(const eql_model* model, const eql_dataset* data, double* out) {
  return guard([&] {
    need(out, "out");
    *out = eql::rms(deref(model, "model").model, deref(data, "dataset").data);
  });
}

eql_status eql_model_predict(const eql_model* model, int64_t rows, const double* x, double* y) {
  return guard([&] {
    const auto& p = deref(model, "model").model.params;
    eql::require(rows > 0, ErrorCode::InvalidArgument, "rows must be positive");
    need(x, "x");
    need(y, "y");
    using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const eql::Matrix in = Eigen::Map<const RowMajor>(x, rows, p.input_dim);
    Eigen::Map<RowMajor>(y, rows, p.output_dim) = eql::predict(p, in);
  });
}

eql_status eql_model_sparsity(const eql_model* model, int* out) {
  return guard([&] {
    need(out, "out");
    *out = eql::sparsity(deref(model, "model").model.params);
  });
}

eql_status eql_model_formula(const eql_model* model, double prune_threshold, int precision, char** out) {
  return guard([&] {
    need(out, "out");
    eql::require(prune_threshold >= 0, ErrorCode::InvalidArgument, "prune threshold must be non-negative");
    const auto exprs = eql::to_expression(deref(model, "model").model.params, prune_threshold);
    std::string text;
    for (std::size_t i = 0; i < exprs.size(); ++i)
      text += "y" + std::to_string(i + 1) + " = " + eql::render(eql::simplify(exprs[i]), precision) + "\n";
    *out = dup(text);
  });
}

eql_status eql_model_expression_json(const eql_model* model, double prune_threshold, int simplified, char** out) {
  return guard([&] {
    need(out, "out");
    eql::require(prune_threshold >= 0, ErrorCode::InvalidArgument, "prune threshold must be non-negative");
    Json arr = Json::array();
    for (const auto& e : eql::to_expression(deref(model, "model").model.params, prune_threshold))
      arr.push_back(eql::expr_to_json(simplified ? eql::simplify(e) : e));
    *out = dup(arr.dump(2));
  });
}

eql_status eql_model_save_history(const eql_model* model, const char* csv_path) {
  return guard([&] {
    need(csv_path, "csv_path");
    eql::save_history_csv(csv_path, deref(model, "model").model.history);
  });
}

void eql_model_free(eql_model* model) { delete model; }

eql_status eql_sweep_run(const char* grid_json, const eql_dataset* train, const eql_dataset* validation,
                         const char* const* test_names, const eql_dataset* const* tests, size_t test_count,
                         int jobs, eql_progress_fn progress, void* user, eql_sweep** out) {
  return guard([&] {
    need(out, "out");
    const Json j = parse_or_empty(grid_json);
    eql::SweepData data;
    data.train = deref(train, "train").data;
    data.validation = deref(validation, "validation").data;
    eql::require(data.train.input_dim() == data.validation.input_dim() &&
                     data.train.output_dim() == data.validation.output_dim(),
                 ErrorCode::DimensionMismatch, "validation set dimensions differ from training set");
    for (size_t i = 0; i < test_count; ++i) {
      need(test_names, "test_names");
      need(tests, "tests");
      need(test_names[i], "test name");
      data.tests[test_names[i]] = deref(tests[i], "test set").data;
    }

    eql::SweepGrid grid;
    grid.lambdas = j.value("lambdas", std::vector<double>{0.0});
    grid.layer_counts = j.value("layers", std::vector<int>{2});
    if (j.contains("units")) {
      for (const auto& uv : j.at("units")) grid.units.emplace_back(uv.at(0).get<int>(), uv.at(1).get<int>());
    } else {
      for (int v : j.value("v", std::vector<int>{1})) grid.units.emplace_back(4 * v, v);
    }
    grid.seeds = j.value("seeds", std::vector<std::uint64_t>{0});
    grid.base = eql::config_from_json(j.value("train", Json::object()));

    const int n = data.train.input_dim();
    const int m = data.train.output_dim();
    const auto builder = is_mlp(j) ? eql::mlp_builder(n, m) : eql::eql_builder(n, m, menu_from(j));

    eql::SweepLog log;
    if (progress) {
      log = [&](const eql::Candidate& c, std::size_t done, std::size_t total) {
        std::ostringstream msg;
        msg << "lambda=" << c.hyper.lambda << " layers=" << c.hyper.layers << " u=" << c.hyper.u
            << " v=" << c.hyper.v << " seed=" << c.hyper.seed;
        if (c.failed) {
          msg << " failed: " << c.error;
        } else {
          msg << " val_rms=" << c.val_rms << " sparsity=" << c.sparsity;
        }
        progress(done, total, msg.str().c_str(), user);
      };
    }
    auto result = std::make_unique<eql_sweep>();
    result->candidates = eql::sweep(grid, builder, data, jobs, log);
    *out = result.release();
  });
}

eql_status eql_sweep_count(const eql_sweep* sweep, size_t* out) {
  return guard([&] {
    need(out, "out");
    *out = deref(sweep, "sweep").candidates.size();
  });
}

eql_status eql_sweep_select(const eql_sweep* sweep, const char* criterion, size_t* index) {
  return guard([&] {
    need(index, "index");
    const auto c = eql::criterion_from_string(criterion ? criterion : "rank_norm");
    *index = eql::select(deref(sweep, "sweep").candidates, c);
  });
}

eql_status eql_sweep_model(const eql_sweep* sweep, size_t index, eql_model** out) {
  return guard([&] {
    need(out, "out");
    const auto& cs = deref(sweep, "sweep").candidates;
    eql::require(index < cs.size(), ErrorCode::InvalidArgument, "candidate index out of range");
    eql::require(!cs[index].failed, ErrorCode::InvalidArgument, "candidate " + std::to_string(index) + " failed");
    *out = new eql_model{cs[index].model};
  });
}

eql_status eql_sweep_report_csv(const eql_sweep* sweep, size_t selected, char** out) {
  return guard([&] {
    need(out, "out");
    std::ostringstream s;
    eql::write_sweep_csv(s, deref(sweep, "sweep").candidates, selected);
    *out = dup(s.str());
  });
}

eql_status eql_sweep_summary_json(const eql_sweep* sweep, size_t selected, char** out) {
  return guard([&] {
    need(out, "out");
    const auto& cs = deref(sweep, "sweep").candidates;
    const auto summary = eql::cell_summary(cs, selected);
    const auto& c = cs[selected];
    Json splits = Json::object();
    for (const auto& [name, s] : summary) splits[name] = {{"mean", s.mean}, {"stddev", s.stddev}, {"count", s.count}};
    std::size_t failed = 0;
    for (const auto& cand : cs) failed += cand.failed ? 1 : 0;
    const Json j = {{"selected",
                     {{"index", selected},
                      {"lambda", c.hyper.lambda},
                      {"layers", c.hyper.layers},
                      {"u", c.hyper.u},
                      {"v", c.hyper.v},
                      {"seed", c.hyper.seed},
                      {"val_rms", c.val_rms},
                      {"sparsity", c.sparsity},
                      {"test_rms", c.test_rms}}},
                    {"cell", splits},
                    {"candidates", cs.size()},
                    {"failed", failed}};
    *out = dup(j.dump(2));
  });
}

void eql_sweep_free(eql_sweep* sweep) { delete sweep; }

eql_status eql_noise_grid_run(const char* config_json, int jobs, char** out_csv) {
  return guard([&] {
    need(out_csv, "out_csv");
    const Json j = parse_or_empty(config_json);
    eql::BenchmarkOptions options;
    options.h = j.value("h", 0.0);
    const auto bench = eql::make_benchmark(j.value("benchmark", std::string("kin-4-end")), options);
    eql::NoiseGridConfig config;
    config.sigmas = j.value("sigmas", std::vector<double>{});
    config.counts = j.value("counts", std::vector<int>{});
    config.network = spec_from(j.value("network", Json::object()), bench.target.input_dim, bench.target.output_dim);
    config.train = eql::config_from_json(j.value("train", Json::object()));
    config.test_count = j.value("test_count", config.test_count);
    config.data_seed = j.value("data_seed", config.data_seed);
    config.extrap_split = j.value("extrap_split", config.extrap_split);
    std::ostringstream s;
    eql::write_noise_grid_csv(s, eql::noise_data_grid(bench, config, jobs));
    *out_csv = dup(s.str());
  });
}

}  // extern "C"
