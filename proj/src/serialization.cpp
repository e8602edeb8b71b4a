#include "eql/serialization.hpp"

#include "eql/error.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

namespace eql {

namespace {

Json flat(const Matrix& m) {
  Json arr = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) arr.push_back(m(r, c));
  return arr;
}

Json flat(const Vector& v) {
  Json arr = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

Matrix matrix_from(const Json& arr, Eigen::Index rows, Eigen::Index cols, const std::string& what) {
  require(arr.is_array() && arr.size() == static_cast<std::size_t>(rows * cols), ErrorCode::Parse,
          what + ": expected " + std::to_string(rows * cols) + " entries");
  Matrix m(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = arr[k++].get<double>();
  return m;
}

Vector vector_from(const Json& arr, Eigen::Index size, const std::string& what) {
  require(arr.is_array() && arr.size() == static_cast<std::size_t>(size), ErrorCode::Parse,
          what + ": expected " + std::to_string(size) + " entries");
  Vector v(size);
  for (Eigen::Index i = 0; i < size; ++i) v(i) = arr[static_cast<std::size_t>(i)].get<double>();
  return v;
}

template <class F>
auto guarded(const std::string& what, F&& f) {
  try {
    return f();
  } catch (const Json::exception& e) {
    fail(ErrorCode::Parse, what + ": " + e.what());
  }
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorCode::Io, "cannot write '" + path + "'");
  out << std::setprecision(17);
  return out;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string f;
  while (std::getline(ss, f, ',')) fields.push_back(f);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double parse_double(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    require(used == s.size(), ErrorCode::Parse, where + ": malformed number '" + s + "'");
    return v;
  } catch (const std::logic_error&) {
    fail(ErrorCode::Parse, where + ": malformed number '" + s + "'");
  }
}

}  // namespace

Json network_to_json(const NetworkParams& params) {
  Json j;
  j["kind"] = params.kind == NetworkKind::Eql ? "eql" : "mlp";
  j["input_dim"] = params.input_dim;
  j["output_dim"] = params.output_dim;
  Json layers = Json::array();
  for (const auto& layer : params.hidden) {
    Json types = Json::array();
    for (UnitType t : layer.spec.unary_types) types.push_back(std::string(to_string(t)));
    layers.push_back({{"u", layer.spec.u},
                      {"v", layer.spec.v},
                      {"unary_types", types},
                      {"W", flat(layer.linear.weights)},
                      {"b", flat(layer.linear.bias)}});
  }
  j["layers"] = layers;
  j["readout"] = {{"W", flat(params.readout.weights)}, {"b", flat(params.readout.bias)}};
  return j;
}

NetworkParams network_from_json(const Json& j) {
  return guarded("network document", [&] {
    NetworkParams p;
    p.kind = j.value("kind", std::string("eql")) == "mlp" ? NetworkKind::MlpBaseline : NetworkKind::Eql;
    p.input_dim = j.at("input_dim").get<int>();
    p.output_dim = j.at("output_dim").get<int>();
    require(p.input_dim > 0 && p.output_dim > 0, ErrorCode::Parse, "network dimensions must be positive");
    int width = p.input_dim;
    int index = 0;
    for (const auto& lj : j.at("layers")) {
      const std::string where = "layer " + std::to_string(++index);
      HiddenLayer layer;
      layer.spec.u = lj.at("u").get<int>();
      layer.spec.v = lj.at("v").get<int>();
      require(layer.spec.u >= 0 && layer.spec.v >= 0 && layer.spec.output_width() > 0, ErrorCode::Parse,
              where + ": invalid unit counts");
      for (const auto& t : lj.at("unary_types")) layer.spec.unary_types.push_back(unit_type_from_string(t.get<std::string>()));
      layer.linear.weights = matrix_from(lj.at("W"), layer.spec.linear_width(), width, where + " W");
      layer.linear.bias = vector_from(lj.at("b"), layer.spec.linear_width(), where + " b");
      width = layer.spec.output_width();
      p.hidden.push_back(std::move(layer));
    }
    p.readout.weights = matrix_from(j.at("readout").at("W"), p.output_dim, width, "readout W");
    p.readout.bias = vector_from(j.at("readout").at("b"), p.output_dim, "readout b");
    try {
      p.validate();
    } catch (const Error& e) {
      fail(ErrorCode::Parse, std::string("network document: ") + e.what());
    }
    return p;
  });
}

Json config_to_json(const TrainConfig& c) {
  return {{"lambda", c.lambda},   {"epochs", c.epochs},   {"batch_size", c.batch_size},
          {"alpha", c.alpha},     {"t1_frac", c.t1_frac}, {"t2_frac", c.t2_frac},
          {"clamp_threshold", c.clamp_threshold},         {"seed", c.seed}};
}

TrainConfig config_from_json(const Json& j, TrainConfig c) {
  return guarded("train config", [&] {
    c.lambda = j.value("lambda", c.lambda);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.alpha = j.value("alpha", c.alpha);
    c.t1_frac = j.value("t1_frac", c.t1_frac);
    c.t2_frac = j.value("t2_frac", c.t2_frac);
    c.clamp_threshold = j.value("clamp_threshold", c.clamp_threshold);
    c.seed = j.value("seed", c.seed);
    c.validate();
    return c;
  });
}

Json mask_to_json(const SparsityMask& mask) {
  auto encode = [](const BoolMatrix& m) {
    Json arr = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) arr.push_back(m(r, c) ? 1 : 0);
    return arr;
  };
  Json layers = Json::array();
  for (const auto& m : mask.hidden) layers.push_back(encode(m));
  return {{"layers", layers}, {"readout", encode(mask.readout)}};
}

SparsityMask mask_from_json(const Json& j, const NetworkParams& params) {
  return guarded("mask", [&] {
    auto decode = [](const Json& arr, const Matrix& w) {
      require(arr.is_array() && arr.size() == static_cast<std::size_t>(w.size()), ErrorCode::Parse,
              "mask shape differs from weights");
      BoolMatrix m(w.rows(), w.cols());
      std::size_t k = 0;
      for (Eigen::Index r = 0; r < w.rows(); ++r)
        for (Eigen::Index c = 0; c < w.cols(); ++c) m(r, c) = arr[k++].get<int>() != 0;
      return m;
    };
    SparsityMask mask;
    const auto& layers = j.at("layers");
    require(layers.size() == params.hidden.size(), ErrorCode::Parse, "mask depth differs from network");
    for (std::size_t l = 0; l < params.hidden.size(); ++l)
      mask.hidden.push_back(decode(layers[l], params.hidden[l].linear.weights));
    mask.readout = decode(j.at("readout"), params.readout.weights);
    return mask;
  });
}

Json model_to_json(const TrainedModel& model, const Json& final_metrics) {
  Json j = network_to_json(model.params);
  j["format"] = "eql-model";
  j["version"] = 1;
  j["mask"] = mask_to_json(model.mask);
  j["config"] = config_to_json(model.config);
  j["final_metrics"] = final_metrics;
  return j;
}

TrainedModel model_from_json(const Json& j) {
  TrainedModel m;
  m.params = network_from_json(j);
  m.mask = j.contains("mask") ? mask_from_json(j.at("mask"), m.params) : SparsityMask::none_like(m.params);
  if (j.contains("config")) m.config = config_from_json(j.at("config"));
  return m;
}

void save_model(const std::string& path, const TrainedModel& model, const Json& final_metrics) {
  write_text_file(path, model_to_json(model, final_metrics).dump(2) + "\n");
}

TrainedModel load_model(const std::string& path) { return model_from_json(read_json_file(path)); }

Json domain_to_json(const Domain& d) {
  switch (d.kind) {
    case Domain::Kind::Hypercube: return {{"kind", "hypercube"}, {"n", d.dim}, {"h", d.outer}};
    case Domain::Kind::Shell: return {{"kind", "shell"}, {"n", d.dim}, {"h", d.inner}, {"H", d.outer}};
    case Domain::Kind::Box: return {{"kind", "box"}, {"n", d.dim}, {"lower", d.lower}, {"upper", d.upper}};
  }
  return {};
}

Domain domain_from_json(const Json& j) {
  return guarded("domain", [&] {
    const std::string kind = j.at("kind").get<std::string>();
    const int n = j.at("n").get<int>();
    if (kind == "hypercube") return Domain::hypercube(n, j.at("h").get<double>());
    if (kind == "shell") return Domain::shell(n, j.at("h").get<double>(), j.at("H").get<double>());
    if (kind == "box") return Domain::box(n, j.at("lower").get<double>(), j.at("upper").get<double>());
    fail(ErrorCode::Parse, "unknown domain kind '" + kind + "'");
  });
}

std::string default_meta_path(const std::string& csv_path) {
  const auto dot = csv_path.rfind(".csv");
  return (dot != std::string::npos && dot + 4 == csv_path.size() ? csv_path.substr(0, dot) : csv_path) + ".json";
}

void save_dataset(const LabeledDataset& data, const std::string& csv_path, const std::string& meta_path) {
  auto out = open_out(csv_path);
  for (int c = 0; c < data.input_dim(); ++c) out << (c ? "," : "") << 'x' << c + 1;
  for (int c = 0; c < data.output_dim(); ++c) out << ",y" << c + 1;
  out << '\n';
  for (Eigen::Index r = 0; r < data.rows(); ++r) {
    for (int c = 0; c < data.input_dim(); ++c) out << (c ? "," : "") << data.x(r, c);
    for (int c = 0; c < data.output_dim(); ++c) out << ',' << data.y(r, c);
    out << '\n';
  }
  require(static_cast<bool>(out), ErrorCode::Io, "failed writing '" + csv_path + "'");
  if (!meta_path.empty()) {
    Json meta = {{"name", data.name},
                 {"n", data.input_dim()},
                 {"m", data.output_dim()},
                 {"rows", data.rows()},
                 {"sigma", data.noise_sigma},
                 {"domain", domain_to_json(data.domain)}};
    write_text_file(meta_path, meta.dump(2) + "\n");
  }
}

LabeledDataset load_dataset(const std::string& csv_path, const std::string& meta_path) {
  std::ifstream in(csv_path);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open dataset '" + csv_path + "'");
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::Parse, csv_path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv(line);
  int n = 0;
  int m = 0;
  for (const auto& h : header) {
    if (h.size() > 1 && h[0] == 'x' && m == 0) {
      ++n;
    } else if (h.size() > 1 && h[0] == 'y') {
      ++m;
    } else {
      fail(ErrorCode::Parse, csv_path + ": header must be x1..xn,y1..ym");
    }
  }
  require(n > 0 && m > 0, ErrorCode::Parse, csv_path + ": header needs at least one x and one y column");

  std::vector<double> values;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv(line);
    const std::string where = csv_path + ":" + std::to_string(line_no);
    require(static_cast<int>(fields.size()) == n + m, ErrorCode::Parse, where + ": wrong column count");
    for (const auto& f : fields) values.push_back(parse_double(f, where));
  }
  require(!values.empty(), ErrorCode::Parse, csv_path + ": no data rows");
  LabeledDataset data;
  const auto rows = static_cast<Eigen::Index>(values.size() / static_cast<std::size_t>(n + m));
  data.x.resize(rows, n);
  data.y.resize(rows, m);
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (int c = 0; c < n; ++c) data.x(r, c) = values[k++];
    for (int c = 0; c < m; ++c) data.y(r, c) = values[k++];
  }
  data.name = csv_path;
  data.domain.dim = n;

  const std::string meta = meta_path.empty() ? default_meta_path(csv_path) : meta_path;
  std::ifstream probe(meta);
  if (probe) {
    const Json j = read_json_file(meta);
    guarded(meta, [&] {
      require(j.at("n").get<int>() == n && j.at("m").get<int>() == m, ErrorCode::DimensionMismatch,
              meta + ": sidecar dimensions disagree with the CSV header");
      data.name = j.value("name", data.name);
      data.noise_sigma = j.value("sigma", 0.0);
      if (j.contains("domain")) data.domain = domain_from_json(j.at("domain"));
      return 0;
    });
  } else if (!meta_path.empty()) {
    fail(ErrorCode::Io, "cannot open dataset sidecar '" + meta_path + "'");
  }
  data.validate();
  return data;
}

void write_history_csv(std::ostream& out, const std::vector<EpochRecord>& history) {
  out << std::setprecision(17) << "epoch,train_mse,effective_lambda,active_weight_count\n";
  for (const auto& h : history)
    out << h.epoch << ',' << h.train_mse << ',' << h.effective_lambda << ',' << h.active_weights << '\n';
}

void save_history_csv(const std::string& path, const std::vector<EpochRecord>& history) {
  auto out = open_out(path);
  write_history_csv(out, history);
}

std::vector<EpochRecord> load_history_csv(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open history '" + path + "'");
  std::string line;
  std::getline(in, line);
  std::vector<EpochRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    require(f.size() == 4, ErrorCode::Parse, path + ": wrong column count");
    out.push_back({static_cast<int>(parse_double(f[0], path)), parse_double(f[1], path), parse_double(f[2], path),
                   static_cast<std::size_t>(parse_double(f[3], path))});
  }
  return out;
}

Json expr_to_json(const Expr& e) {
  switch (e.kind) {
    case Expr::Kind::Constant: return {{"type", "constant"}, {"value", e.value}};
    case Expr::Kind::Variable: return {{"type", "variable"}, {"index", e.index}};
    case Expr::Kind::Apply: return {{"type", "apply"}, {"fn", std::string(to_string(e.fn))}, {"child", expr_to_json(e.child())}};
    case Expr::Kind::Scale: return {{"type", "scale"}, {"coef", e.value}, {"child", expr_to_json(e.child())}};
    case Expr::Kind::Sum:
    case Expr::Kind::Product: {
      Json children = Json::array();
      for (const auto& c : e.children) children.push_back(expr_to_json(c));
      return {{"type", std::string(to_string(e.kind))}, {"children", children}};
    }
  }
  return {};
}

Expr expr_from_json(const Json& j) {
  return guarded("expression", [&]() -> Expr {
    const std::string type = j.at("type").get<std::string>();
    if (type == "constant") return Expr::constant(j.at("value").get<double>());
    if (type == "variable") return Expr::variable(j.at("index").get<int>());
    if (type == "apply") return Expr::apply(unit_type_from_string(j.at("fn").get<std::string>()), expr_from_json(j.at("child")));
    if (type == "scale") return Expr::scale(j.at("coef").get<double>(), expr_from_json(j.at("child")));
    if (type == "sum" || type == "product") {
      std::vector<Expr> children;
      for (const auto& c : j.at("children")) children.push_back(expr_from_json(c));
      return type == "sum" ? Expr::sum(std::move(children)) : Expr::product(std::move(children));
    }
    fail(ErrorCode::Parse, "unknown expression node '" + type + "'");
  });
}

void write_sweep_csv(std::ostream& out, const std::vector<Candidate>& candidates, std::size_t selected) {
  out << std::setprecision(17)
      << "index,lambda,layers,u,v,seed,val_rms,sparsity,interp_rms,near_rms,far_rms,selected,status\n";
  auto metric = [](const Candidate& c, const char* name) {
    std::ostringstream s;
    s << std::setprecision(17);
    if (auto it = c.test_rms.find(name); it != c.test_rms.end()) s << it->second;
    return s.str();
  };
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& c = candidates[i];
    out << i << ',' << c.hyper.lambda << ',' << c.hyper.layers << ',' << c.hyper.u << ',' << c.hyper.v << ','
        << c.hyper.seed << ',';
    if (c.failed) {
      out << ",,,,,0,failed\n";
      continue;
    }
    out << c.val_rms << ',' << c.sparsity << ',' << metric(c, "interp") << ',' << metric(c, "near") << ','
        << metric(c, "far") << ',' << (i == selected ? 1 : 0) << ",ok\n";
  }
}

void save_sweep_csv(const std::string& path, const std::vector<Candidate>& candidates, std::size_t selected) {
  auto out = open_out(path);
  write_sweep_csv(out, candidates, selected);
}

void write_noise_grid_csv(std::ostream& out, const std::vector<NoiseGridCell>& cells) {
  out << std::setprecision(17) << "sigma,n,interp_rms,extrap_rms,status\n";
  for (const auto& c : cells) {
    out << c.sigma << ',' << c.count << ',';
    if (c.failed) {
      out << ",,failed\n";
    } else {
      out << c.interp_rms << ',' << c.extrap_rms << ",ok\n";
    }
  }
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    fail(ErrorCode::Parse, path + ": " + e.what());
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorCode::Io, "cannot write '" + path + "'");
  out << text;
  require(static_cast<bool>(out), ErrorCode::Io, "failed writing '" + path + "'");
}

}  // namespace eql
