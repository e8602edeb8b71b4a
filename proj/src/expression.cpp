#include "eql/expression.hpp"

#include "eql/error.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>

namespace eql {

Expr Expr::constant(double v) {
  Expr e;
  e.kind = Kind::Constant;
  e.value = v;
  return e;
}

Expr Expr::variable(int i) {
  Expr e;
  e.kind = Kind::Variable;
  e.index = i;
  return e;
}

Expr Expr::sum(std::vector<Expr> terms) {
  Expr e;
  e.kind = Kind::Sum;
  e.children = std::move(terms);
  return e;
}

Expr Expr::product(std::vector<Expr> factors) {
  Expr e;
  e.kind = Kind::Product;
  e.children = std::move(factors);
  return e;
}

Expr Expr::apply(UnitType fn, Expr arg) {
  Expr e;
  e.kind = Kind::Apply;
  e.fn = fn;
  e.children.push_back(std::move(arg));
  return e;
}

Expr Expr::scale(double coef, Expr arg) {
  Expr e;
  e.kind = Kind::Scale;
  e.value = coef;
  e.children.push_back(std::move(arg));
  return e;
}

bool operator==(const Expr& a, const Expr& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case Expr::Kind::Constant: return a.value == b.value;
    case Expr::Kind::Variable: return a.index == b.index;
    case Expr::Kind::Apply:
      if (a.fn != b.fn) return false;
      break;
    case Expr::Kind::Scale:
      if (a.value != b.value) return false;
      break;
    case Expr::Kind::Sum:
    case Expr::Kind::Product: break;
  }
  return a.children == b.children;
}

std::string_view to_string(Expr::Kind kind) {
  switch (kind) {
    case Expr::Kind::Constant: return "constant";
    case Expr::Kind::Variable: return "variable";
    case Expr::Kind::Sum: return "sum";
    case Expr::Kind::Product: return "product";
    case Expr::Kind::Apply: return "apply";
    case Expr::Kind::Scale: return "scale";
  }
  return "unknown";
}

namespace {

Expr collect(std::vector<Expr> terms) {
  if (terms.empty()) return Expr::constant(0.0);
  if (terms.size() == 1) return std::move(terms.front());
  return Expr::sum(std::move(terms));
}

}  // namespace

std::vector<Expr> to_expression(const NetworkParams& params, double prune_threshold) {
  params.validate();
  const auto keep = [prune_threshold](double w) { return w != 0.0 && !(std::abs(w) < prune_threshold); };
  const std::size_t depth = params.hidden.size();
  std::vector<std::vector<std::optional<Expr>>> memo(depth);
  for (std::size_t l = 0; l < depth; ++l) memo[l].resize(static_cast<std::size_t>(params.hidden[l].spec.output_width()));

  std::function<Expr(std::size_t, int)> unit;
  // Affine combination of the previous layer's outputs (inputs for l == 0).
  const auto affine = [&](const Affine& a, std::size_t l, int row) {
    std::vector<Expr> terms;
    for (int c = 0; c < a.weights.cols(); ++c) {
      const double w = a.weights(row, c);
      if (!keep(w)) continue;
      terms.push_back(Expr::scale(w, l == 0 ? Expr::variable(c) : unit(l - 1, c)));
    }
    if (a.bias(row) != 0.0) terms.push_back(Expr::constant(a.bias(row)));
    return collect(std::move(terms));
  };
  unit = [&](std::size_t l, int i) -> Expr {
    auto& slot = memo[l][static_cast<std::size_t>(i)];
    if (slot) return *slot;
    const auto& layer = params.hidden[l];
    const auto& spec = layer.spec;
    Expr e;
    if (i < spec.u) {
      const UnitType fn = spec.unary_types[static_cast<std::size_t>(i)];
      Expr z = affine(layer.linear, l, i);
      e = fn == UnitType::Identity ? std::move(z) : Expr::apply(fn, std::move(z));
    } else {
      const int a = spec.u + 2 * (i - spec.u);
      e = Expr::product({affine(layer.linear, l, a), affine(layer.linear, l, a + 1)});
    }
    slot = e;
    return e;
  };

  std::vector<Expr> outputs;
  for (int k = 0; k < params.output_dim; ++k) {
    std::vector<Expr> terms;
    for (int c = 0; c < params.readout.weights.cols(); ++c) {
      const double w = params.readout.weights(k, c);
      if (!keep(w)) continue;
      terms.push_back(Expr::scale(w, depth == 0 ? Expr::variable(c) : unit(depth - 1, c)));
    }
    if (terms.empty() || params.readout.bias(k) != 0.0) terms.push_back(Expr::constant(params.readout.bias(k)));
    outputs.push_back(collect(std::move(terms)));
  }
  return outputs;
}

double expr_eval(const Expr& expr, std::span<const double> x) {
  switch (expr.kind) {
    case Expr::Kind::Constant: return expr.value;
    case Expr::Kind::Variable:
      require(expr.index >= 0 && static_cast<std::size_t>(expr.index) < x.size(), ErrorCode::DimensionMismatch,
              "expression references x" + std::to_string(expr.index + 1) + " beyond the input");
      return x[static_cast<std::size_t>(expr.index)];
    case Expr::Kind::Sum: {
      double s = 0.0;
      for (const auto& c : expr.children) s += expr_eval(c, x);
      return s;
    }
    case Expr::Kind::Product: {
      double p = 1.0;
      for (const auto& c : expr.children) p *= expr_eval(c, x);
      return p;
    }
    case Expr::Kind::Apply: return apply_unit(expr.fn, expr_eval(expr.child(), x));
    case Expr::Kind::Scale: return expr.value * expr_eval(expr.child(), x);
  }
  return 0.0;
}

namespace {

// (coefficient, base) view of a sum term.
std::pair<double, Expr> split_coefficient(Expr term) {
  if (term.kind == Expr::Kind::Scale) return {term.value, std::move(term.children.front())};
  return {1.0, std::move(term)};
}

Expr with_coefficient(double coef, Expr base) {
  if (coef == 1.0) return base;
  return Expr::scale(coef, std::move(base));
}

Expr simplify_sum(std::vector<Expr> terms) {
  std::vector<Expr> flat;
  for (auto& t : terms) {
    if (t.kind == Expr::Kind::Sum) {
      for (auto& c : t.children) flat.push_back(std::move(c));
    } else {
      flat.push_back(std::move(t));
    }
  }
  double constant = 0.0;
  std::vector<std::pair<double, Expr>> merged;
  for (auto& t : flat) {
    if (t.is_constant()) {
      constant += t.value;
      continue;
    }
    auto [coef, base] = split_coefficient(std::move(t));
    bool found = false;
    for (auto& [c, b] : merged) {
      if (b == base) {
        c += coef;
        found = true;
        break;
      }
    }
    if (!found) merged.emplace_back(coef, std::move(base));
  }
  std::vector<Expr> out;
  for (auto& [c, b] : merged)
    if (c != 0.0) out.push_back(with_coefficient(c, std::move(b)));
  if (constant != 0.0 || out.empty()) out.push_back(Expr::constant(constant));
  return collect(std::move(out));
}

Expr scale_simplified(double coef, Expr child) {
  if (coef == 0.0) return Expr::constant(0.0);
  switch (child.kind) {
    case Expr::Kind::Constant: return Expr::constant(coef * child.value);
    case Expr::Kind::Scale: return scale_simplified(coef * child.value, std::move(child.children.front()));
    case Expr::Kind::Sum: {
      std::vector<Expr> terms;
      for (auto& t : child.children) terms.push_back(scale_simplified(coef, std::move(t)));
      return simplify_sum(std::move(terms));
    }
    default: return with_coefficient(coef, std::move(child));
  }
}

Expr simplify_product(std::vector<Expr> factors) {
  double coef = 1.0;
  std::vector<Expr> rest;
  std::function<void(Expr)> absorb = [&](Expr f) {
    switch (f.kind) {
      case Expr::Kind::Constant: coef *= f.value; break;
      case Expr::Kind::Scale:
        coef *= f.value;
        absorb(std::move(f.children.front()));
        break;
      case Expr::Kind::Product:
        for (auto& c : f.children) absorb(std::move(c));
        break;
      default: rest.push_back(std::move(f));
    }
  };
  for (auto& f : factors) absorb(std::move(f));
  if (coef == 0.0) return Expr::constant(0.0);
  if (rest.empty()) return Expr::constant(coef);
  Expr body = rest.size() == 1 ? std::move(rest.front()) : Expr::product(std::move(rest));
  return scale_simplified(coef, std::move(body));
}

}  // namespace

Expr simplify(const Expr& expr) {
  switch (expr.kind) {
    case Expr::Kind::Constant:
    case Expr::Kind::Variable: return expr;
    case Expr::Kind::Scale: return scale_simplified(expr.value, simplify(expr.child()));
    case Expr::Kind::Apply: {
      Expr arg = simplify(expr.child());
      if (arg.is_constant()) return Expr::constant(apply_unit(expr.fn, arg.value));
      if (expr.fn == UnitType::Identity) return arg;
      return Expr::apply(expr.fn, std::move(arg));
    }
    case Expr::Kind::Sum: {
      std::vector<Expr> terms;
      for (const auto& c : expr.children) terms.push_back(simplify(c));
      return simplify_sum(std::move(terms));
    }
    case Expr::Kind::Product: {
      std::vector<Expr> factors;
      for (const auto& c : expr.children) factors.push_back(simplify(c));
      return simplify_product(std::move(factors));
    }
  }
  return expr;
}

namespace {

std::string format_number(double v, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", precision, v);
  return buf;
}

bool is_negative(const Expr& e) {
  return (e.kind == Expr::Kind::Constant || e.kind == Expr::Kind::Scale) && std::signbit(e.value) && e.value != 0.0;
}

Expr negated(const Expr& e) {
  Expr n = e;
  n.value = -n.value;
  return n;
}

std::string render_node(const Expr& e, int precision);

std::string render_factor(const Expr& e, int precision) {
  const std::string s = render_node(e, precision);
  if (e.kind == Expr::Kind::Sum) return "(" + s + ")";
  return s;
}

std::string render_node(const Expr& e, int precision) {
  switch (e.kind) {
    case Expr::Kind::Constant: return format_number(e.value, precision);
    case Expr::Kind::Variable: return "x" + std::to_string(e.index + 1);
    case Expr::Kind::Apply: return std::string(to_string(e.fn)) + "(" + render_node(e.child(), precision) + ")";
    case Expr::Kind::Scale: {
      const std::string coef = format_number(e.value, precision);
      if (coef == "1") return render_factor(e.child(), precision);
      if (coef == "-1") return "-" + render_factor(e.child(), precision);
      return coef + "*" + render_factor(e.child(), precision);
    }
    case Expr::Kind::Product: {
      std::string s;
      for (std::size_t i = 0; i < e.children.size(); ++i) {
        if (i) s += "*";
        s += render_factor(e.children[i], precision);
      }
      return s;
    }
    case Expr::Kind::Sum: {
      if (e.children.empty()) return "0";
      std::string s = render_node(e.children.front(), precision);
      for (std::size_t i = 1; i < e.children.size(); ++i) {
        const auto& t = e.children[i];
        if (is_negative(t)) {
          s += " - " + render_node(negated(t), precision);
        } else {
          s += " + " + render_node(t, precision);
        }
      }
      return s;
    }
  }
  return "?";
}

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  Expr parse() {
    Expr e = parse_sum();
    skip_space();
    if (pos_ != text_.size()) error("unexpected trailing input");
    return e;
  }

 private:
  [[noreturn]] void error(const std::string& what) const {
    fail(ErrorCode::Parse, "expression parse error at offset " + std::to_string(pos_) + ": " + what);
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool consume(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Expr parse_sum() {
    std::vector<Expr> terms;
    terms.push_back(parse_product());
    for (;;) {
      if (consume('+')) {
        terms.push_back(parse_product());
      } else if (consume('-')) {
        terms.push_back(Expr::scale(-1.0, parse_product()));
      } else {
        break;
      }
    }
    return terms.size() == 1 ? std::move(terms.front()) : Expr::sum(std::move(terms));
  }

  Expr parse_product() {
    std::vector<Expr> factors;
    factors.push_back(parse_unary());
    while (consume('*')) factors.push_back(parse_unary());
    return factors.size() == 1 ? std::move(factors.front()) : Expr::product(std::move(factors));
  }

  Expr parse_unary() {
    if (consume('-')) {
      Expr inner = parse_unary();
      if (inner.is_constant()) return Expr::constant(-inner.value);
      return Expr::scale(-1.0, std::move(inner));
    }
    if (consume('+')) return parse_unary();
    return parse_primary();
  }

  Expr parse_primary() {
    skip_space();
    if (pos_ >= text_.size()) error("unexpected end of input");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      Expr e = parse_sum();
      if (!consume(')')) error("expected ')'");
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c))) {
      std::size_t end = pos_;
      while (end < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[end])) || text_[end] == '_')) ++end;
      const std::string_view word = text_.substr(pos_, end - pos_);
      if (word.size() > 1 && word[0] == 'x' && std::isdigit(static_cast<unsigned char>(word[1]))) {
        int idx = 0;
        const auto [ptr, ec] = std::from_chars(word.data() + 1, word.data() + word.size(), idx);
        if (ec != std::errc() || ptr != word.data() + word.size() || idx < 1) error("bad variable name");
        pos_ = end;
        return Expr::variable(idx - 1);
      }
      UnitType fn;
      try {
        fn = unit_type_from_string(word);
      } catch (const Error&) {
        error("unknown function '" + std::string(word) + "'");
      }
      pos_ = end;
      if (!consume('(')) error("expected '(' after function name");
      Expr arg = parse_sum();
      if (!consume(')')) error("expected ')'");
      return Expr::apply(fn, std::move(arg));
    }
    error(std::string("unexpected character '") + c + "'");
  }

  Expr parse_number() {
    std::size_t end = pos_;
    while (end < text_.size()) {
      const char ch = text_[end];
      if (std::isdigit(static_cast<unsigned char>(ch)) || ch == '.') {
        ++end;
      } else if ((ch == 'e' || ch == 'E') && end + 1 < text_.size()) {
        ++end;
        if (text_[end] == '+' || text_[end] == '-') ++end;
      } else {
        break;
      }
    }
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text_.data() + pos_, text_.data() + end, v);
    if (ec != std::errc() || ptr != text_.data() + end) error("malformed number");
    pos_ = end;
    return Expr::constant(v);
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string render(const Expr& expr, int precision) {
  require(precision >= 1 && precision <= 17, ErrorCode::InvalidArgument, "render precision must be in [1, 17]");
  return render_node(expr, precision);
}

Expr parse_expression(std::string_view text) { return Parser(text).parse(); }

std::size_t count_nodes(const Expr& expr) {
  std::size_t n = 1;
  for (const auto& c : expr.children) n += count_nodes(c);
  return n;
}

std::size_t count_kind(const Expr& expr, Expr::Kind kind) {
  std::size_t n = expr.kind == kind ? 1 : 0;
  for (const auto& c : expr.children) n += count_kind(c, kind);
  return n;
}

std::size_t count_apply(const Expr& expr, UnitType fn) {
  std::size_t n = expr.kind == Expr::Kind::Apply && expr.fn == fn ? 1 : 0;
  for (const auto& c : expr.children) n += count_apply(c, fn);
  return n;
}

std::set<int> variables(const Expr& expr) {
  std::set<int> out;
  if (expr.kind == Expr::Kind::Variable) out.insert(expr.index);
  for (const auto& c : expr.children) out.merge(variables(c));
  return out;
}

int max_variable_index(const Expr& expr) {
  const auto vars = variables(expr);
  return vars.empty() ? -1 : *vars.rbegin();
}

std::optional<AffineForm> as_affine(const Expr& expr) {
  AffineForm form;
  std::function<bool(const Expr&, double)> walk = [&](const Expr& e, double coef) {
    switch (e.kind) {
      case Expr::Kind::Constant: form.constant += coef * e.value; return true;
      case Expr::Kind::Variable: form.coefficients[e.index] += coef; return true;
      case Expr::Kind::Scale: return walk(e.child(), coef * e.value);
      case Expr::Kind::Sum:
        for (const auto& c : e.children)
          if (!walk(c, coef)) return false;
        return true;
      case Expr::Kind::Apply:
        return e.fn == UnitType::Identity && walk(e.child(), coef);
      case Expr::Kind::Product: return false;
    }
    return false;
  };
  if (!walk(expr, 1.0)) return std::nullopt;
  return form;
}

std::vector<Expr> additive_terms(const Expr& expr) {
  if (expr.kind == Expr::Kind::Sum) return expr.children;
  return {expr};
}

}  // namespace eql
