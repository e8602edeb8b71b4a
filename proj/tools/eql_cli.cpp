// Experiment driver: data generation, training, sweeps, evaluation, formula
// extraction and noise/data grids on top of the C interface.

#include "eql/eql.h"

#include "CLI11.hpp"
#include "json.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

constexpr int kExitOther = 1;
constexpr int kExitConfig = 2;
constexpr int kExitDiverged = 3;
constexpr int kExitAssertion = 4;
constexpr int kSchemaVersion = 1;

struct CliError {
  int exit_code;
  std::string message;
};

int exit_code_for(eql_status s) {
  switch (s) {
    case EQL_ERR_DIVERGED:
    case EQL_ERR_NON_FINITE: return kExitDiverged;
    case EQL_ERR_INTERNAL: return kExitOther;
    default: return kExitConfig;
  }
}

void check(eql_status s, const std::string& context) {
  if (s != EQL_OK) throw CliError{exit_code_for(s), context + ": " + eql_last_error()};
}

[[noreturn]] void config_error(const std::string& msg) { throw CliError{kExitConfig, msg}; }

struct DatasetDeleter {
  void operator()(eql_dataset* d) const { eql_dataset_free(d); }
};
struct ModelDeleter {
  void operator()(eql_model* m) const { eql_model_free(m); }
};
struct SweepDeleter {
  void operator()(eql_sweep* s) const { eql_sweep_free(s); }
};
using Dataset = std::unique_ptr<eql_dataset, DatasetDeleter>;
using Model = std::unique_ptr<eql_model, ModelDeleter>;
using Sweep = std::unique_ptr<eql_sweep, SweepDeleter>;

std::string take(char* s) {
  std::string out = s ? s : "";
  eql_string_free(s);
  return out;
}

std::string output_root() {
  const char* env = std::getenv("EQL_OUTPUT_ROOT");
  return env && *env ? env : "runs";
}

fs::path prepare_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw CliError{kExitConfig, "cannot create output directory '" + dir + "': " + ec.message()};
  return fs::path(dir);
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw CliError{kExitConfig, "cannot write '" + path.string() + "'"};
  out << text;
}

// Snapshot of the effective configuration, loadable with --config.
void write_config(const fs::path& dir, Json cfg) {
  cfg["schema_version"] = kSchemaVersion;
  write_file(dir / "config.json", cfg.dump(2) + "\n");
}

Json load_config(const std::string& path) {
  if (path.empty()) return Json::object();
  std::ifstream in(path);
  if (!in) config_error("cannot open config '" + path + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::exception& e) {
    config_error(path + ": " + e.what());
  }
  if (!j.is_object()) config_error(path + ": top level must be an object");
  const int version = j.value("schema_version", kSchemaVersion);
  if (version != kSchemaVersion)
    config_error(path + ": unsupported schema_version " + std::to_string(version));
  return j;
}

template <class T>
void override(Json& cfg, const std::string& pointer, const std::optional<T>& value) {
  if (value) cfg[Json::json_pointer(pointer)] = *value;
}

template <class T>
T get(const Json& cfg, const std::string& pointer, T fallback) {
  const Json::json_pointer p(pointer);
  if (!cfg.contains(p)) return fallback;
  try {
    return cfg.at(p).get<T>();
  } catch (const Json::exception& e) {
    config_error("config field " + pointer + ": " + e.what());
  }
}

// Flags shared by train, sweep and noise-grid.
struct TrainFlags {
  std::optional<double> lambda, alpha, t1, t2, clamp;
  std::optional<int> epochs, batch_size;
  std::optional<std::uint64_t> seed;

  void add(CLI::App* app, bool with_lambda_and_seed) {
    if (with_lambda_and_seed) {
      app->add_option("--lambda", lambda, "L1 strength during the penalised phase");
      app->add_option("--seed", seed, "initialisation and shuffling seed");
    }
    app->add_option("--epochs", epochs, "number of epochs T");
    app->add_option("--batch-size", batch_size, "mini-batch size");
    app->add_option("--alpha", alpha, "Adam learning rate");
    app->add_option("--t1", t1, "fraction of T where the L1 phase starts");
    app->add_option("--t2", t2, "fraction of T where weights are frozen");
    app->add_option("--clamp", clamp, "freeze threshold for small weights");
  }
  void merge(Json& cfg) const {
    override(cfg, "/train/lambda", lambda);
    override(cfg, "/train/epochs", epochs);
    override(cfg, "/train/batch_size", batch_size);
    override(cfg, "/train/alpha", alpha);
    override(cfg, "/train/t1_frac", t1);
    override(cfg, "/train/t2_frac", t2);
    override(cfg, "/train/clamp_threshold", clamp);
    override(cfg, "/train/seed", seed);
  }
};

struct NetFlags {
  std::optional<std::string> kind;
  std::optional<int> layers, u, v, width;
  std::vector<std::string> menu;

  void add(CLI::App* app, bool with_sizes) {
    app->add_option("--kind", kind, "eql or mlp")->check(CLI::IsMember({"eql", "mlp"}));
    if (with_sizes) {
      app->add_option("--layers", layers, "layer count including the read-out");
      app->add_option("--u", u, "unary units per hidden layer (default 4v)");
      app->add_option("--v", v, "product units per hidden layer");
    }
    app->add_option("--width", width, "hidden width of the mlp baseline");
    app->add_option("--menu", menu, "unary unit cycle, e.g. id,sin,sigmoid")->delimiter(',');
  }
  void merge(Json& cfg, const std::string& root) const {
    override(cfg, root + "/kind", kind);
    override(cfg, root + "/layers", layers);
    override(cfg, root + "/u", u);
    override(cfg, root + "/v", v);
    override(cfg, root + "/width", width);
    if (!menu.empty()) cfg[Json::json_pointer(root + "/menu")] = menu;
  }
};

// "name=path" or "path"; the name then defaults to the stem minus "test_".
std::map<std::string, std::string> parse_named_paths(const std::vector<std::string>& specs) {
  std::map<std::string, std::string> out;
  for (const auto& s : specs) {
    const auto eq = s.find('=');
    if (eq != std::string::npos) {
      out[s.substr(0, eq)] = s.substr(eq + 1);
      continue;
    }
    std::string stem = fs::path(s).stem().string();
    if (stem.rfind("test_", 0) == 0) stem = stem.substr(5);
    out[stem] = s;
  }
  return out;
}

Dataset load_csv(const std::string& path) {
  eql_dataset* d = nullptr;
  check(eql_dataset_load_csv(path.c_str(), nullptr, &d), "loading " + path);
  return Dataset(d);
}

std::map<std::string, Dataset> load_tests(const Json& cfg) {
  std::map<std::string, Dataset> out;
  for (const auto& [name, path] : get(cfg, "/tests", std::map<std::string, std::string>{}))
    out.emplace(name, load_csv(path));
  return out;
}

double model_rms(const eql_model* m, const eql_dataset* d, const std::string& what) {
  double r = 0.0;
  check(eql_model_rms(m, d, &r), "evaluating " + what);
  return r;
}

// model.json, history.csv, metrics.json, formula.txt, expression.json.
Json write_model_bundle(const fs::path& dir, const eql_model* model, const eql_dataset* train,
                        const std::map<std::string, Dataset>& tests, double prune, int precision) {
  Json metrics;
  if (train) metrics["train_rms"] = model_rms(model, train, "training set");
  Json test_rms = Json::object();
  for (const auto& [name, d] : tests) test_rms[name] = model_rms(model, d.get(), name);
  metrics["test_rms"] = test_rms;
  int s = 0;
  check(eql_model_sparsity(model, &s), "sparsity");
  metrics["sparsity"] = s;

  check(eql_model_save(model, (dir / "model.json").c_str(), metrics.dump().c_str()), "saving model");
  check(eql_model_save_history(model, (dir / "history.csv").c_str()), "saving history");
  write_file(dir / "metrics.json", metrics.dump(2) + "\n");
  char* text = nullptr;
  check(eql_model_formula(model, prune, precision, &text), "extracting formula");
  const std::string formula = take(text);
  write_file(dir / "formula.txt", formula);
  check(eql_model_expression_json(model, prune, 1, &text), "extracting expression");
  write_file(dir / "expression.json", take(text) + "\n");
  metrics["formula"] = formula;
  return metrics;
}

void print_metrics(const Json& metrics) {
  if (metrics.contains("train_rms")) std::cout << "train_rms " << metrics["train_rms"].get<double>() << "\n";
  for (const auto& [name, v] : metrics["test_rms"].items()) std::cout << name << "_rms " << v.get<double>() << "\n";
  std::cout << "sparsity " << metrics["sparsity"].get<int>() << "\n";
  if (metrics.contains("formula")) std::cout << metrics["formula"].get<std::string>();
}

int cmd_gen_data(const Json& cfg) {
  const auto bench = get<std::string>(cfg, "/benchmark", "");
  if (bench.empty()) config_error("gen-data needs a benchmark name");
  const double h = get(cfg, "/h", 0.0);
  const int n = get(cfg, "/n", 1000);
  const int test_n = get(cfg, "/test_n", 1000);
  const double sigma = get(cfg, "/sigma", 0.01);
  const auto seed = get<std::uint64_t>(cfg, "/seed", 1);
  const auto dir = prepare_dir(get(cfg, "/out", output_root() + "/data-" + bench));

  char* info_text = nullptr;
  check(eql_benchmark_info_json(bench.c_str(), h, &info_text), "benchmark");
  const Json info = Json::parse(take(info_text));
  auto splits = get(cfg, "/splits", std::vector<std::string>{});
  if (splits.empty()) {
    splits.push_back("train");
    for (const auto& t : info["tests"]) splits.push_back(t.get<std::string>());
  }

  std::cout << bench << ": n=" << info["n"] << " m=" << info["m"] << " h=" << info["h"] << "\n";
  for (const auto& split : splits) {
    const bool is_train = split == "train";
    eql_dataset* raw = nullptr;
    check(eql_dataset_generate(bench.c_str(), split.c_str(), is_train ? n : test_n, sigma, seed, h, &raw),
          "generating " + split);
    Dataset d(raw);
    const auto csv = dir / (is_train ? std::string("train.csv") : "test_" + split + ".csv");
    check(eql_dataset_save_csv(d.get(), csv.c_str(), nullptr), "writing " + csv.string());
    char* meta = nullptr;
    check(eql_dataset_info_json(d.get(), &meta), "dataset info");
    const Json m = Json::parse(take(meta));
    std::cout << "  " << csv.string() << ": N=" << m["rows"] << " domain=" << m["domain"].dump() << "\n";
  }
  write_config(dir, cfg);
  return 0;
}

int cmd_train(const Json& cfg) {
  const auto data_path = get<std::string>(cfg, "/data", "");
  if (data_path.empty()) config_error("train needs --data");
  const auto train_data = load_csv(data_path);
  const auto tests = load_tests(cfg);
  const auto dir = prepare_dir(get(cfg, "/out", output_root() + "/train"));
  write_config(dir, cfg);

  eql_model* raw = nullptr;
  const std::string net = get(cfg, "/network", Json::object()).dump();
  const std::string train = get(cfg, "/train", Json::object()).dump();
  check(eql_train(train_data.get(), net.c_str(), train.c_str(), &raw), "training");
  Model model(raw);
  const Json metrics = write_model_bundle(dir, model.get(), train_data.get(), tests, get(cfg, "/prune", 0.01),
                                          get(cfg, "/precision", 3));
  print_metrics(metrics);
  return 0;
}

void progress_line(size_t done, size_t total, const char* message, void*) {
  std::cerr << "[" << done << "/" << total << "] " << message << "\n";
}

int cmd_sweep(const Json& cfg) {
  const auto data_path = get<std::string>(cfg, "/data", "");
  if (data_path.empty()) config_error("sweep needs --data");
  Dataset train_data = load_csv(data_path);
  Dataset val_data;
  if (const auto val_path = get<std::string>(cfg, "/validation", ""); !val_path.empty()) {
    val_data = load_csv(val_path);
  } else {
    eql_dataset* a = nullptr;
    eql_dataset* b = nullptr;
    check(eql_dataset_split(train_data.get(), 1.0 - get(cfg, "/val_fraction", 0.1),
                            get<std::uint64_t>(cfg, "/split_seed", 0), &a, &b),
          "splitting off validation data");
    train_data.reset(a);
    val_data.reset(b);
  }
  const auto tests = load_tests(cfg);
  std::vector<const char*> names;
  std::vector<const eql_dataset*> sets;
  for (const auto& [name, d] : tests) {
    names.push_back(name.c_str());
    sets.push_back(d.get());
  }
  const auto dir = prepare_dir(get(cfg, "/out", output_root() + "/sweep"));
  write_config(dir, cfg);

  Json grid = get(cfg, "/grid", Json::object());
  grid["train"] = get(cfg, "/train", Json::object());
  const Json net = get(cfg, "/network", Json::object());
  for (const char* key : {"kind", "menu", "width"})
    if (net.contains(key)) grid[key] = net[key];
  const int jobs = get(cfg, "/jobs", 1);
  const std::string criterion = get<std::string>(cfg, "/criterion", "rank_norm");

  eql_sweep* raw = nullptr;
  check(eql_sweep_run(grid.dump().c_str(), train_data.get(), val_data.get(), names.data(), sets.data(),
                      names.size(), jobs, progress_line, nullptr, &raw),
        "sweep");
  Sweep sw(raw);
  std::size_t selected = 0;
  check(eql_sweep_select(sw.get(), criterion.c_str(), &selected), "selection");

  char* text = nullptr;
  check(eql_sweep_report_csv(sw.get(), selected, &text), "sweep report");
  write_file(dir / "candidates.csv", take(text));
  check(eql_sweep_summary_json(sw.get(), selected, &text), "sweep summary");
  Json summary = Json::parse(take(text));
  summary["criterion"] = criterion;
  write_file(dir / "summary.json", summary.dump(2) + "\n");

  eql_model* best_raw = nullptr;
  check(eql_sweep_model(sw.get(), selected, &best_raw), "selected model");
  Model best(best_raw);
  const auto sel_dir = prepare_dir((dir / "selected").string());
  const Json metrics = write_model_bundle(sel_dir, best.get(), train_data.get(), tests, get(cfg, "/prune", 0.01),
                                          get(cfg, "/precision", 3));

  const auto& s = summary["selected"];
  std::cout << "selected #" << selected << " (" << criterion << "): lambda=" << s["lambda"] << " layers=" << s["layers"]
            << " u=" << s["u"] << " v=" << s["v"] << " seed=" << s["seed"] << " val_rms=" << s["val_rms"]
            << " sparsity=" << s["sparsity"] << "\n";
  std::cout << "cell mean +- std over seeds:\n";
  for (const auto& [name, st] : summary["cell"].items())
    std::cout << "  " << name << " " << st["mean"].get<double>() << " +- " << st["stddev"].get<double>() << " (n="
              << st["count"] << ")\n";
  print_metrics(metrics);
  return 0;
}

int cmd_eval(const Json& cfg) {
  const auto model_path = get<std::string>(cfg, "/model", "");
  if (model_path.empty()) config_error("eval needs --model");
  eql_model* raw = nullptr;
  check(eql_model_load(model_path.c_str(), &raw), "loading " + model_path);
  Model model(raw);
  const auto tests = load_tests(cfg);
  if (tests.empty()) config_error("eval needs at least one dataset");
  Json metrics = Json::object();
  for (const auto& [name, d] : tests) metrics[name] = model_rms(model.get(), d.get(), name);
  const std::string text = metrics.dump(2) + "\n";
  if (const auto out = get<std::string>(cfg, "/out", ""); !out.empty()) write_file(out, text);
  std::cout << text;

  if (cfg.contains("assert_below")) {
    const double bound = get(cfg, "/assert_below", 0.0);
    bool ok = true;
    for (const auto& [name, v] : metrics.items()) {
      if (!(v.get<double>() < bound)) {
        std::cerr << "assertion failed: " << name << " rms " << v.get<double>() << " >= " << bound << "\n";
        ok = false;
      }
    }
    if (!ok) return kExitAssertion;
  }
  return 0;
}

int cmd_extract(const Json& cfg) {
  const auto model_path = get<std::string>(cfg, "/model", "");
  if (model_path.empty()) config_error("extract needs --model");
  eql_model* raw = nullptr;
  check(eql_model_load(model_path.c_str(), &raw), "loading " + model_path);
  Model model(raw);
  const double prune = get(cfg, "/prune", 0.01);
  char* text = nullptr;
  check(eql_model_formula(model.get(), prune, get(cfg, "/precision", 3), &text), "extracting formula");
  std::cout << take(text);
  if (const auto json_path = get<std::string>(cfg, "/json", ""); !json_path.empty()) {
    check(eql_model_expression_json(model.get(), prune, get(cfg, "/simplify", true) ? 1 : 0, &text),
          "extracting expression");
    write_file(json_path, take(text) + "\n");
  }
  return 0;
}

int cmd_noise_grid(const Json& cfg) {
  Json grid = cfg;
  grid.erase("out");
  grid.erase("jobs");
  grid.erase("schema_version");
  const auto dir = prepare_dir(get(cfg, "/out", output_root() + "/noise-grid"));
  write_config(dir, cfg);
  char* text = nullptr;
  check(eql_noise_grid_run(grid.dump().c_str(), get(cfg, "/jobs", 1), &text), "noise grid");
  const std::string csv = take(text);
  write_file(dir / "grid.csv", csv);
  std::cout << csv;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Equation learner experiments"};
  app.set_help_flag("--help", "print help");
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(eql_version()));

  std::string config_path;
  std::optional<std::string> out;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config (flags override its values)")->check(CLI::ExistingFile);
    sub->add_option("--out", out, "output directory (default under $EQL_OUTPUT_ROOT)");
  };

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate benchmark datasets");
  std::optional<std::string> gen_bench;
  std::optional<int> gen_n, gen_test_n;
  std::optional<double> gen_h, gen_sigma;
  std::optional<std::uint64_t> gen_seed;
  std::vector<std::string> gen_splits;
  gen->add_option("benchmark", gen_bench, "benchmark name");
  gen->add_option("--n", gen_n, "training points");
  gen->add_option("--test-n", gen_test_n, "points per test set");
  gen->add_option("--h", gen_h, "training half-width (default per benchmark)");
  gen->add_option("--sigma", gen_sigma, "label noise standard deviation");
  gen->add_option("--seed", gen_seed, "data seed");
  gen->add_option("--splits", gen_splits, "subset of train,interp,near,far")->delimiter(',');
  common(gen);

  // train
  auto* tr = app.add_subcommand("train", "single training run");
  std::optional<std::string> data;
  std::vector<std::string> tests;
  std::optional<double> prune;
  std::optional<int> precision;
  TrainFlags tr_flags;
  NetFlags tr_net;
  tr->add_option("--data", data, "training CSV");
  tr->add_option("--test", tests, "test set as name=path (repeatable)");
  tr->add_option("--prune", prune, "formula pruning threshold");
  tr->add_option("--precision", precision, "significant digits in the formula");
  tr_flags.add(tr, true);
  tr_net.add(tr, true);
  common(tr);

  // sweep
  auto* sw = app.add_subcommand("sweep", "hyperparameter sweep with model selection");
  std::optional<std::string> validation, criterion;
  std::optional<double> val_fraction;
  std::optional<int> jobs;
  std::vector<double> lambdas;
  std::vector<int> layer_list, v_list;
  std::vector<std::string> unit_pairs;
  std::vector<std::uint64_t> seeds;
  std::optional<int> n_seeds;
  TrainFlags sw_flags;
  NetFlags sw_net;
  sw->add_option("--data", data, "training CSV");
  sw->add_option("--validation", validation, "validation CSV (default: split from --data)");
  sw->add_option("--val-fraction", val_fraction, "fraction split off for validation");
  sw->add_option("--test", tests, "test set as name=path (repeatable)");
  sw->add_option("--lambdas", lambdas, "lambda grid")->delimiter(',');
  sw->add_option("--layers", layer_list, "layer counts")->delimiter(',');
  sw->add_option("--v", v_list, "product-unit counts, with u = 4v")->delimiter(',');
  sw->add_option("--units", unit_pairs, "explicit u:v pairs")->delimiter(',');
  sw->add_option("--seeds", seeds, "seed list")->delimiter(',');
  sw->add_option("--n-seeds", n_seeds, "use seeds 0..k-1");
  sw->add_option("--jobs", jobs, "parallel workers");
  sw->add_option("--criterion", criterion, "rank_norm or validation_only")
      ->check(CLI::IsMember({"rank_norm", "validation_only"}));
  sw->add_option("--prune", prune, "formula pruning threshold");
  sw_flags.add(sw, false);
  sw_net.add(sw, false);
  common(sw);

  // eval
  auto* ev = app.add_subcommand("eval", "RMS of a saved model on datasets");
  std::optional<std::string> model_path;
  std::optional<double> assert_below;
  std::vector<std::string> eval_sets;
  ev->add_option("--model", model_path, "model JSON");
  ev->add_option("datasets", eval_sets, "datasets as name=path or path");
  ev->add_option("--assert-below", assert_below, "fail (exit 4) if any RMS is not below this");
  ev->add_option("--config", config_path, "JSON config")->check(CLI::ExistingFile);
  ev->add_option("--out", out, "write metrics JSON here");

  // extract
  auto* ex = app.add_subcommand("extract", "print the symbolic formula of a model");
  std::optional<std::string> json_out;
  ex->add_option("--model", model_path, "model JSON");
  ex->add_option("--prune", prune, "pruning threshold");
  ex->add_option("--precision", precision, "significant digits");
  ex->add_option("--json", json_out, "also write the expression tree here");
  ex->add_option("--config", config_path, "JSON config")->check(CLI::ExistingFile);

  // noise-grid
  auto* ng = app.add_subcommand("noise-grid", "extrapolation error over noise level and data size");
  std::optional<std::string> ng_bench, extrap_split;
  std::vector<double> sigmas;
  std::vector<int> counts;
  std::optional<int> ng_test_n;
  std::optional<std::uint64_t> data_seed;
  TrainFlags ng_flags;
  NetFlags ng_net;
  ng->add_option("--benchmark", ng_bench, "benchmark name");
  ng->add_option("--h", gen_h, "training half-width");
  ng->add_option("--sigmas", sigmas, "noise levels")->delimiter(',');
  ng->add_option("--counts", counts, "training set sizes")->delimiter(',');
  ng->add_option("--test-n", ng_test_n, "points per test set");
  ng->add_option("--data-seed", data_seed, "data seed");
  ng->add_option("--extrap-split", extrap_split, "test set used for extrapolation");
  ng->add_option("--jobs", jobs, "parallel workers");
  ng_flags.add(ng, true);
  ng_net.add(ng, true);
  common(ng);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    Json cfg = load_config(config_path);
    override(cfg, "/out", out);
    if (gen->parsed()) {
      override(cfg, "/benchmark", gen_bench);
      override(cfg, "/n", gen_n);
      override(cfg, "/test_n", gen_test_n);
      override(cfg, "/h", gen_h);
      override(cfg, "/sigma", gen_sigma);
      override(cfg, "/seed", gen_seed);
      if (!gen_splits.empty()) cfg["splits"] = gen_splits;
      return cmd_gen_data(cfg);
    }
    if (tr->parsed() || sw->parsed()) {
      override(cfg, "/data", data);
      override(cfg, "/prune", prune);
      override(cfg, "/precision", precision);
      for (const auto& [name, path] : parse_named_paths(tests)) cfg["tests"][name] = path;
    }
    if (tr->parsed()) {
      tr_flags.merge(cfg);
      tr_net.merge(cfg, "/network");
      return cmd_train(cfg);
    }
    if (sw->parsed()) {
      sw_flags.merge(cfg);
      sw_net.merge(cfg, "/network");
      override(cfg, "/validation", validation);
      override(cfg, "/val_fraction", val_fraction);
      override(cfg, "/criterion", criterion);
      override(cfg, "/jobs", jobs);
      if (!lambdas.empty()) cfg["grid"]["lambdas"] = lambdas;
      if (!layer_list.empty()) cfg["grid"]["layers"] = layer_list;
      if (!v_list.empty()) {
        cfg["grid"]["v"] = v_list;
        cfg["grid"].erase("units");
      }
      if (!unit_pairs.empty()) {
        Json units = Json::array();
        for (const auto& p : unit_pairs) {
          const auto colon = p.find(':');
          if (colon == std::string::npos) config_error("--units expects u:v, got '" + p + "'");
          try {
            units.push_back({std::stoi(p.substr(0, colon)), std::stoi(p.substr(colon + 1))});
          } catch (const std::exception&) {
            config_error("--units expects u:v, got '" + p + "'");
          }
        }
        cfg["grid"]["units"] = units;
      }
      if (n_seeds) {
        if (*n_seeds < 1) config_error("--n-seeds must be positive");
        seeds.clear();
        for (int s = 0; s < *n_seeds; ++s) seeds.push_back(static_cast<std::uint64_t>(s));
      }
      if (!seeds.empty()) cfg["grid"]["seeds"] = seeds;
      return cmd_sweep(cfg);
    }
    if (ev->parsed()) {
      override(cfg, "/model", model_path);
      override(cfg, "/assert_below", assert_below);
      for (const auto& [name, path] : parse_named_paths(eval_sets)) cfg["tests"][name] = path;
      return cmd_eval(cfg);
    }
    if (ex->parsed()) {
      override(cfg, "/model", model_path);
      override(cfg, "/prune", prune);
      override(cfg, "/precision", precision);
      override(cfg, "/json", json_out);
      return cmd_extract(cfg);
    }
    if (ng->parsed()) {
      override(cfg, "/benchmark", ng_bench);
      override(cfg, "/h", gen_h);
      if (!sigmas.empty()) cfg["sigmas"] = sigmas;
      if (!counts.empty()) cfg["counts"] = counts;
      override(cfg, "/test_count", ng_test_n);
      override(cfg, "/data_seed", data_seed);
      override(cfg, "/extrap_split", extrap_split);
      override(cfg, "/jobs", jobs);
      ng_flags.merge(cfg);
      ng_net.merge(cfg, "/network");
      return cmd_noise_grid(cfg);
    }
  } catch (const CliError& e) {
    std::cerr << "eql: " << e.message << "\n";
    return e.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "eql: " << e.what() << "\n";
    return kExitOther;
  }
  return kExitOther;
}
