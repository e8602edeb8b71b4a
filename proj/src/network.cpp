#include "eql/network.hpp"

#include "eql/error.hpp"

#include <cmath>
#include <random>
#include <string>

namespace eql {

std::string_view to_string(UnitType type) {
  switch (type) {
    case UnitType::Identity: return "identity";
    case UnitType::Sin: return "sin";
    case UnitType::Cos: return "cos";
    case UnitType::Sigmoid: return "sigmoid";
    case UnitType::Tanh: return "tanh";
  }
  return "unknown";
}

UnitType unit_type_from_string(std::string_view name) {
  if (name == "identity" || name == "id") return UnitType::Identity;
  if (name == "sin") return UnitType::Sin;
  if (name == "cos") return UnitType::Cos;
  if (name == "sigmoid" || name == "sig") return UnitType::Sigmoid;
  if (name == "tanh") return UnitType::Tanh;
  fail(ErrorCode::Parse, "unknown unit type '" + std::string(name) + "'");
}

double sigmoid(double z) noexcept {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double apply_unit(UnitType type, double z) noexcept {
  switch (type) {
    case UnitType::Identity: return z;
    case UnitType::Sin: return std::sin(z);
    case UnitType::Cos: return std::cos(z);
    case UnitType::Sigmoid: return sigmoid(z);
    case UnitType::Tanh: return std::tanh(z);
  }
  return z;
}

double unit_derivative(UnitType type, double z) noexcept {
  switch (type) {
    case UnitType::Identity: return 1.0;
    case UnitType::Sin: return std::cos(z);
    case UnitType::Cos: return -std::sin(z);
    case UnitType::Sigmoid: {
      const double s = sigmoid(z);
      return s * (1.0 - s);
    }
    case UnitType::Tanh: {
      const double t = std::tanh(z);
      return 1.0 - t * t;
    }
  }
  return 1.0;
}

LayerSpec make_layer_spec(int u, int v, std::span<const UnitType> menu) {
  require(u >= 0 && v >= 0, ErrorCode::InvalidArgument, "unit counts must be non-negative");
  require(u == 0 || !menu.empty(), ErrorCode::InvalidArgument, "empty unit-type menu");
  LayerSpec spec;
  spec.u = u;
  spec.v = v;
  spec.unary_types.reserve(static_cast<std::size_t>(u));
  for (int i = 0; i < u; ++i) spec.unary_types.push_back(menu[static_cast<std::size_t>(i) % menu.size()]);
  return spec;
}

NetworkSpec eql_spec(int input_dim, int output_dim, int layers, int u, int v,
                     std::span<const UnitType> menu) {
  require(layers >= 2, ErrorCode::InvalidArgument, "an EQL network needs at least 2 layers");
  NetworkSpec spec;
  spec.input_dim = input_dim;
  spec.output_dim = output_dim;
  spec.kind = NetworkKind::Eql;
  for (int l = 0; l + 1 < layers; ++l) spec.hidden.push_back(make_layer_spec(u, v, menu));
  return spec;
}

NetworkSpec mlp_spec(int input_dim, int output_dim, int layers, int width) {
  require(layers >= 2, ErrorCode::InvalidArgument, "an MLP needs at least 2 layers");
  static constexpr UnitType kTanh[] = {UnitType::Tanh};
  NetworkSpec spec;
  spec.input_dim = input_dim;
  spec.output_dim = output_dim;
  spec.kind = NetworkKind::MlpBaseline;
  for (int l = 0; l + 1 < layers; ++l) spec.hidden.push_back(make_layer_spec(width, 0, kTanh));
  return spec;
}

NetworkSpec NetworkParams::spec() const {
  NetworkSpec s;
  s.input_dim = input_dim;
  s.output_dim = output_dim;
  s.kind = kind;
  for (const auto& layer : hidden) s.hidden.push_back(layer.spec);
  return s;
}

namespace {

void check_spec(const NetworkSpec& spec) {
  require(spec.input_dim > 0 && spec.output_dim > 0, ErrorCode::InvalidArgument,
          "network input and output dimensions must be positive");
  require(!spec.hidden.empty(), ErrorCode::InvalidArgument, "at least one hidden layer required");
  for (std::size_t l = 0; l < spec.hidden.size(); ++l) {
    const auto& layer = spec.hidden[l];
    const std::string where = "hidden layer " + std::to_string(l + 1);
    require(layer.u >= 0 && layer.v >= 0, ErrorCode::InvalidArgument, where + ": negative unit count");
    require(layer.output_width() > 0, ErrorCode::InvalidArgument, where + ": zero-width layer");
    require(static_cast<int>(layer.unary_types.size()) == layer.u, ErrorCode::InvalidArgument,
            where + ": unary_types length differs from u");
    for (UnitType t : layer.unary_types) {
      if (t == UnitType::Tanh) {
        require(spec.kind == NetworkKind::MlpBaseline, ErrorCode::InvalidArgument,
                where + ": tanh units are reserved for the MLP baseline");
      }
    }
    if (spec.kind == NetworkKind::MlpBaseline) {
      require(layer.v == 0, ErrorCode::InvalidArgument, where + ": MLP baseline has no product units");
    }
  }
}

}  // namespace

void NetworkParams::validate() const {
  check_spec(spec());
  int width = input_dim;
  for (std::size_t l = 0; l < hidden.size(); ++l) {
    const auto& layer = hidden[l];
    const std::string where = "hidden layer " + std::to_string(l + 1);
    require(layer.linear.weights.rows() == layer.spec.linear_width() &&
                layer.linear.weights.cols() == width,
            ErrorCode::DimensionMismatch, where + ": weight matrix shape does not chain");
    require(layer.linear.bias.size() == layer.spec.linear_width(), ErrorCode::DimensionMismatch,
            where + ": bias length differs from d");
    require(layer.linear.weights.allFinite() && layer.linear.bias.allFinite(), ErrorCode::NonFinite,
            where + ": non-finite parameter");
    width = layer.spec.output_width();
  }
  require(readout.weights.rows() == output_dim && readout.weights.cols() == width,
          ErrorCode::DimensionMismatch, "read-out weight matrix shape does not chain");
  require(readout.bias.size() == output_dim, ErrorCode::DimensionMismatch,
          "read-out bias length differs from output_dim");
  require(readout.weights.allFinite() && readout.bias.allFinite(), ErrorCode::NonFinite,
          "read-out: non-finite parameter");
}

Gradients Gradients::zeros_like(const NetworkParams& params) {
  Gradients g;
  for (const auto& layer : params.hidden) {
    g.hidden.push_back({Matrix::Zero(layer.linear.weights.rows(), layer.linear.weights.cols()),
                        Vector::Zero(layer.linear.bias.size())});
  }
  g.readout = {Matrix::Zero(params.readout.weights.rows(), params.readout.weights.cols()),
               Vector::Zero(params.readout.bias.size())};
  return g;
}

std::vector<Affine*> affine_blocks(NetworkParams& params) {
  std::vector<Affine*> out;
  for (auto& layer : params.hidden) out.push_back(&layer.linear);
  out.push_back(&params.readout);
  return out;
}

std::vector<const Affine*> affine_blocks(const NetworkParams& params) {
  std::vector<const Affine*> out;
  for (const auto& layer : params.hidden) out.push_back(&layer.linear);
  out.push_back(&params.readout);
  return out;
}

std::vector<Affine*> affine_blocks(Gradients& grads) {
  std::vector<Affine*> out;
  for (auto& block : grads.hidden) out.push_back(&block);
  out.push_back(&grads.readout);
  return out;
}

std::vector<const Affine*> affine_blocks(const Gradients& grads) {
  std::vector<const Affine*> out;
  for (const auto& block : grads.hidden) out.push_back(&block);
  out.push_back(&grads.readout);
  return out;
}

NetworkParams build_network(const NetworkSpec& spec, std::uint64_t seed) {
  check_spec(spec);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x1417u};
  std::mt19937_64 rng(seq);

  auto init = [&rng](int rows, int cols) {
    std::normal_distribution<double> normal(0.0, std::sqrt(1.0 / static_cast<double>(cols + rows)));
    Matrix w(rows, cols);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) w(r, c) = normal(rng);
    return w;
  };

  NetworkParams params;
  params.input_dim = spec.input_dim;
  params.output_dim = spec.output_dim;
  params.kind = spec.kind;
  int width = spec.input_dim;
  for (const auto& layer_spec : spec.hidden) {
    HiddenLayer layer;
    layer.spec = layer_spec;
    layer.linear.weights = init(layer_spec.linear_width(), width);
    layer.linear.bias = Vector::Zero(layer_spec.linear_width());
    params.hidden.push_back(std::move(layer));
    width = layer_spec.output_width();
  }
  params.readout.weights = init(spec.output_dim, width);
  params.readout.bias = Vector::Zero(spec.output_dim);
  return params;
}

NetworkParams build_network(int input_dim, int output_dim, const std::vector<LayerSpec>& layer_specs,
                            std::uint64_t seed, NetworkKind kind) {
  NetworkSpec spec;
  spec.input_dim = input_dim;
  spec.output_dim = output_dim;
  spec.hidden = layer_specs;
  spec.kind = kind;
  return build_network(spec, seed);
}

namespace {

void apply_nonlinear_stage(const LayerSpec& spec, const Matrix& z, Matrix& y) {
  y.resize(z.rows(), spec.output_width());
  for (int i = 0; i < spec.u; ++i) {
    switch (spec.unary_types[static_cast<std::size_t>(i)]) {
      case UnitType::Identity: y.col(i) = z.col(i); break;
      case UnitType::Sin: y.col(i) = z.col(i).array().sin(); break;
      case UnitType::Cos: y.col(i) = z.col(i).array().cos(); break;
      case UnitType::Sigmoid: y.col(i) = z.col(i).unaryExpr([](double t) { return sigmoid(t); }); break;
      case UnitType::Tanh: y.col(i) = z.col(i).array().tanh(); break;
    }
  }
  for (int j = 0; j < spec.v; ++j) {
    y.col(spec.u + j) = z.col(spec.u + 2 * j).cwiseProduct(z.col(spec.u + 2 * j + 1));
  }
}

}  // namespace

void forward_into(const NetworkParams& params, const Matrix& x, ForwardCache& cache, Matrix& output) {
  require(x.cols() == params.input_dim, ErrorCode::DimensionMismatch,
          "input has " + std::to_string(x.cols()) + " features, network expects " +
              std::to_string(params.input_dim));
  require(x.allFinite(), ErrorCode::NonFinite, "non-finite network input");
  cache.input = x;
  cache.pre.resize(params.hidden.size());
  cache.post.resize(params.hidden.size());
  const Matrix* prev = &cache.input;
  for (std::size_t l = 0; l < params.hidden.size(); ++l) {
    const auto& layer = params.hidden[l];
    Matrix& z = cache.pre[l];
    z.noalias() = *prev * layer.linear.weights.transpose();
    z.rowwise() += layer.linear.bias.transpose();
    apply_nonlinear_stage(layer.spec, z, cache.post[l]);
    prev = &cache.post[l];
  }
  output.noalias() = *prev * params.readout.weights.transpose();
  output.rowwise() += params.readout.bias.transpose();
}

ForwardResult forward(const NetworkParams& params, const Matrix& x) {
  ForwardResult result;
  forward_into(params, x, result.cache, result.output);
  return result;
}

Matrix predict(const NetworkParams& params, const Matrix& x) {
  ForwardCache cache;
  Matrix out;
  forward_into(params, x, cache, out);
  return out;
}

void backward_into(const NetworkParams& params, const ForwardCache& cache, const Matrix& upstream,
                   Gradients& grads) {
  const auto batch = cache.input.rows();
  require(cache.pre.size() == params.hidden.size() && cache.post.size() == params.hidden.size(),
          ErrorCode::DimensionMismatch, "forward cache does not match network depth");
  require(upstream.rows() == batch && upstream.cols() == params.output_dim,
          ErrorCode::DimensionMismatch, "upstream gradient shape does not match the cached batch");
  for (std::size_t l = 0; l < params.hidden.size(); ++l) {
    require(cache.pre[l].rows() == batch && cache.pre[l].cols() == params.hidden[l].spec.linear_width() &&
                cache.post[l].cols() == params.hidden[l].spec.output_width(),
            ErrorCode::DimensionMismatch, "forward cache does not match network layout");
  }
  if (grads.hidden.size() != params.hidden.size()) grads = Gradients::zeros_like(params);

  const Matrix& last = params.hidden.empty() ? cache.input : cache.post.back();
  grads.readout.weights.noalias() = upstream.transpose() * last;
  grads.readout.bias = upstream.colwise().sum().transpose();

  Matrix dy = upstream * params.readout.weights;
  Matrix dz;
  for (std::size_t idx = params.hidden.size(); idx-- > 0;) {
    const auto& layer = params.hidden[idx];
    const auto& spec = layer.spec;
    const Matrix& z = cache.pre[idx];
    dz.resize(batch, spec.linear_width());
    for (int i = 0; i < spec.u; ++i) {
      const UnitType type = spec.unary_types[static_cast<std::size_t>(i)];
      switch (type) {
        case UnitType::Identity: dz.col(i) = dy.col(i); break;
        case UnitType::Sin: dz.col(i) = dy.col(i).cwiseProduct(z.col(i).array().cos().matrix()); break;
        case UnitType::Cos: dz.col(i) = -dy.col(i).cwiseProduct(z.col(i).array().sin().matrix()); break;
        case UnitType::Sigmoid:
        case UnitType::Tanh:
          dz.col(i) = dy.col(i).cwiseProduct(z.col(i).unaryExpr([type](double t) { return unit_derivative(type, t); }));
          break;
      }
    }
    for (int j = 0; j < spec.v; ++j) {
      const int a = spec.u + 2 * j;
      dz.col(a) = dy.col(spec.u + j).cwiseProduct(z.col(a + 1));
      dz.col(a + 1) = dy.col(spec.u + j).cwiseProduct(z.col(a));
    }
    const Matrix& prev = idx == 0 ? cache.input : cache.post[idx - 1];
    grads.hidden[idx].weights.noalias() = dz.transpose() * prev;
    grads.hidden[idx].bias = dz.colwise().sum().transpose();
    if (idx > 0) dy.noalias() = dz * layer.linear.weights;
  }
}

Gradients backward(const NetworkParams& params, const ForwardCache& cache, const Matrix& upstream) {
  Gradients grads = Gradients::zeros_like(params);
  backward_into(params, cache, upstream, grads);
  return grads;
}

std::size_t weight_count(const NetworkParams& params) {
  std::size_t n = 0;
  for (const Affine* block : affine_blocks(params)) n += static_cast<std::size_t>(block->weights.size());
  return n;
}

}  // namespace eql
