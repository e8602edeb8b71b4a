#pragma once

// Symbolic read-out of a trained network: unrolling into an expression tree,
// constant folding, infix rendering and a parser for the rendered form.

#include "eql/network.hpp"

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace eql {

struct Expr {
  enum class Kind { Constant, Variable, Sum, Product, Apply, Scale };

  Kind kind = Kind::Constant;
  double value = 0.0;  // Constant value or Scale coefficient
  int index = 0;       // Variable index (0-based)
  UnitType fn = UnitType::Identity;
  std::vector<Expr> children;

  static Expr constant(double v);
  static Expr variable(int i);
  static Expr sum(std::vector<Expr> terms);
  static Expr product(std::vector<Expr> factors);
  static Expr apply(UnitType fn, Expr arg);
  static Expr scale(double coef, Expr arg);

  const Expr& child() const { return children.front(); }
  bool is_constant() const noexcept { return kind == Kind::Constant; }

  friend bool operator==(const Expr& a, const Expr& b);
};

std::string_view to_string(Expr::Kind kind);

inline constexpr double kDisplayPruneThreshold = 0.01;

// One tree per network output. Weight terms with |w| < prune_threshold are
// dropped, and a unit is only emitted if a kept weight reaches it, so orphans
// never appear. prune_threshold = 0 gives an exact transcription.
std::vector<Expr> to_expression(const NetworkParams& params, double prune_threshold = kDisplayPruneThreshold);

double expr_eval(const Expr& expr, std::span<const double> x);

Expr simplify(const Expr& expr);

std::string render(const Expr& expr, int precision = 3);
Expr parse_expression(std::string_view text);

std::size_t count_nodes(const Expr& expr);
std::size_t count_kind(const Expr& expr, Expr::Kind kind);
std::size_t count_apply(const Expr& expr, UnitType fn);
std::set<int> variables(const Expr& expr);
int max_variable_index(const Expr& expr);  // -1 if none

// c + sum_i coef_i * x_i, if the tree only holds sums, scales, constants and variables.
struct AffineForm {
  double constant = 0.0;
  std::map<int, double> coefficients;
};
std::optional<AffineForm> as_affine(const Expr& expr);

// Top-level additive terms (the tree itself when it is not a sum).
std::vector<Expr> additive_terms(const Expr& expr);

}  // namespace eql
