#pragma once

// Equation-learner network: stacked layers of an affine map followed by a
// nonlinear stage of unary base functions and pairwise multiplication units,
// closed by an affine read-out. Batches are row-per-sample matrices.

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace eql {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class UnitType : int {
  Identity = 0,
  Sin = 1,
  Cos = 2,
  Sigmoid = 3,
  Tanh = 4,  // MLP baseline only
};

std::string_view to_string(UnitType type);
UnitType unit_type_from_string(std::string_view name);

double sigmoid(double z) noexcept;
double apply_unit(UnitType type, double z) noexcept;
double unit_derivative(UnitType type, double z) noexcept;

inline constexpr UnitType kDefaultMenu[] = {UnitType::Identity, UnitType::Sin,
                                            UnitType::Cos, UnitType::Sigmoid};

enum class NetworkKind { Eql, MlpBaseline };

struct LayerSpec {
  int u = 0;  // unary units
  int v = 0;  // product units
  std::vector<UnitType> unary_types;

  int linear_width() const noexcept { return u + 2 * v; }  // d
  int output_width() const noexcept { return u + v; }      // k
};

// Unary types cycle through `menu` in order, so u = |menu|*v gives equal counts.
LayerSpec make_layer_spec(int u, int v, std::span<const UnitType> menu = kDefaultMenu);

struct NetworkSpec {
  int input_dim = 0;
  int output_dim = 0;
  std::vector<LayerSpec> hidden;
  NetworkKind kind = NetworkKind::Eql;

  int layer_count() const noexcept { return static_cast<int>(hidden.size()) + 1; }
};

// `layers` counts the read-out, so layers = 2 means one hidden layer.
NetworkSpec eql_spec(int input_dim, int output_dim, int layers, int u, int v,
                     std::span<const UnitType> menu = kDefaultMenu);
NetworkSpec mlp_spec(int input_dim, int output_dim, int layers, int width);

struct Affine {
  Matrix weights;  // rows = outputs, cols = inputs
  Vector bias;
};

struct HiddenLayer {
  Affine linear;
  LayerSpec spec;
};

struct NetworkParams {
  int input_dim = 0;
  int output_dim = 0;
  NetworkKind kind = NetworkKind::Eql;
  std::vector<HiddenLayer> hidden;
  Affine readout;

  int layer_count() const noexcept { return static_cast<int>(hidden.size()) + 1; }
  NetworkSpec spec() const;

  // Structural check: dimension chaining, unit layout, finiteness.
  void validate() const;
};

struct Gradients {
  std::vector<Affine> hidden;
  Affine readout;

  static Gradients zeros_like(const NetworkParams& params);
};

// Views over every affine block in layer order, read-out last.
std::vector<Affine*> affine_blocks(NetworkParams& params);
std::vector<const Affine*> affine_blocks(const NetworkParams& params);
std::vector<Affine*> affine_blocks(Gradients& grads);
std::vector<const Affine*> affine_blocks(const Gradients& grads);

// Weights ~ N(0, 1/(k'+d)) per layer, biases zero.
NetworkParams build_network(const NetworkSpec& spec, std::uint64_t seed);
NetworkParams build_network(int input_dim, int output_dim,
                            const std::vector<LayerSpec>& layer_specs, std::uint64_t seed,
                            NetworkKind kind = NetworkKind::Eql);

struct ForwardCache {
  Matrix input;
  std::vector<Matrix> pre;   // z per hidden layer, width d
  std::vector<Matrix> post;  // y per hidden layer, width k
};

struct ForwardResult {
  Matrix output;
  ForwardCache cache;
};

ForwardResult forward(const NetworkParams& params, const Matrix& x);
// Allocation-reusing variant used by the trainer.
void forward_into(const NetworkParams& params, const Matrix& x, ForwardCache& cache,
                  Matrix& output);
Matrix predict(const NetworkParams& params, const Matrix& x);

Gradients backward(const NetworkParams& params, const ForwardCache& cache, const Matrix& upstream);
void backward_into(const NetworkParams& params, const ForwardCache& cache, const Matrix& upstream,
                   Gradients& grads);

std::size_t weight_count(const NetworkParams& params);

}  // namespace eql
