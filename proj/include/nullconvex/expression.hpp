#pragma once

// Scalar expression language for metric components, weights, seed maps and densities.
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := ('-' | '+') unary | power
//   power   := primary ('^' unary)?            right associative, binds tighter than unary minus
//   primary := number | name | name '(' expr ')' | '(' expr ')'
//
// Functions: sin cos exp log sqrt tanh. Constant: pi. Variables are declared by the
// caller (x0..x{d-1} for chart points); named parameters are folded in as literals.

#include "nullconvex/core.hpp"
#include "nullconvex/jet.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace nullconvex {

enum class Func { Sin, Cos, Exp, Log, Sqrt, Tanh };

inline const char* func_name(Func f) {
  switch (f) {
    case Func::Sin: return "sin";
    case Func::Cos: return "cos";
    case Func::Exp: return "exp";
    case Func::Log: return "log";
    case Func::Sqrt: return "sqrt";
    case Func::Tanh: return "tanh";
  }
  return "?";
}

struct ExprNode {
  enum class Kind { Literal, Variable, Neg, Add, Sub, Mul, Div, Pow, Call };
  Kind kind = Kind::Literal;
  double literal = 0.0;
  int variable = -1;
  Func func = Func::Sin;
  std::shared_ptr<const ExprNode> lhs;
  std::shared_ptr<const ExprNode> rhs;
};

using ExprPtr = std::shared_ptr<const ExprNode>;

inline std::string format_literal(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string print_node(const ExprNode& n, std::span<const std::string> names) {
  using K = ExprNode::Kind;
  switch (n.kind) {
    case K::Literal: {
      const std::string s = format_literal(n.literal);
      return n.literal < 0.0 ? "(" + s + ")" : s;
    }
    case K::Variable: return names[static_cast<std::size_t>(n.variable)];
    case K::Neg: return "(-" + print_node(*n.lhs, names) + ")";
    case K::Call: return std::string(func_name(n.func)) + "(" + print_node(*n.lhs, names) + ")";
    default: break;
  }
  const char* op = n.kind == K::Add ? "+" : n.kind == K::Sub ? "-" : n.kind == K::Mul ? "*" : n.kind == K::Div ? "/" : "^";
  return "(" + print_node(*n.lhs, names) + op + print_node(*n.rhs, names) + ")";
}

// Immutable parsed expression. Copies share the tree.
class Expression {
 public:
  Expression() = default;
  Expression(ExprPtr root, std::vector<std::string> names, std::string source)
      : root_(std::move(root)),
        names_(std::make_shared<const std::vector<std::string>>(std::move(names))),
        source_(std::move(source)) {}

  bool empty() const noexcept { return root_ == nullptr; }
  const ExprNode& root() const { return *root_; }
  const std::string& source() const noexcept { return source_; }
  int arity() const { return names_ ? static_cast<int>(names_->size()) : 0; }
  const std::vector<std::string>& variable_names() const { return *names_; }

  // Fully parenthesized text that parses back to an equivalent tree.
  std::string print() const { return print_node(*root_, *names_); }

  // True if the tree contains no variables.
  bool is_constant() const { return is_constant(*root_); }

 private:
  static bool is_constant(const ExprNode& n) {
    if (n.kind == ExprNode::Kind::Variable) return false;
    if (n.lhs && !is_constant(*n.lhs)) return false;
    if (n.rhs && !is_constant(*n.rhs)) return false;
    return true;
  }

  ExprPtr root_;
  std::shared_ptr<const std::vector<std::string>> names_;
  std::string source_;
};

inline std::vector<std::string> chart_variables(int dim, const std::string& prefix = "x") {
  std::vector<std::string> v;
  for (int i = 0; i < dim; ++i) v.push_back(prefix + std::to_string(i));
  return v;
}

namespace detail {

class Parser {
 public:
  Parser(std::string_view src, const std::vector<std::string>& vars, const std::map<std::string, double>& params)
      : src_(src), vars_(vars), params_(params) {}

  ExprPtr parse() {
    skip();
    if (pos_ >= src_.size()) throw ParseError("empty expression", pos_);
    ExprPtr e = expr();
    skip();
    if (pos_ < src_.size()) throw ParseError(std::string("unexpected '") + src_[pos_] + "'", pos_);
    return e;
  }

 private:
  static ExprPtr make(ExprNode::Kind k, ExprPtr l = nullptr, ExprPtr r = nullptr) {
    auto n = std::make_shared<ExprNode>();
    n->kind = k;
    n->lhs = std::move(l);
    n->rhs = std::move(r);
    return n;
  }

  static ExprPtr literal(double v) {
    auto n = std::make_shared<ExprNode>();
    n->kind = ExprNode::Kind::Literal;
    n->literal = v;
    return n;
  }

  void skip() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  ExprPtr expr() {
    ExprPtr lhs = term();
    for (;;) {
      if (accept('+')) lhs = make(ExprNode::Kind::Add, lhs, term());
      else if (accept('-')) lhs = make(ExprNode::Kind::Sub, lhs, term());
      else return lhs;
    }
  }

  ExprPtr term() {
    ExprPtr lhs = unary();
    for (;;) {
      if (accept('*')) lhs = make(ExprNode::Kind::Mul, lhs, unary());
      else if (accept('/')) lhs = make(ExprNode::Kind::Div, lhs, unary());
      else return lhs;
    }
  }

  ExprPtr unary() {
    if (accept('-')) return make(ExprNode::Kind::Neg, unary());
    if (accept('+')) return unary();
    return power();
  }

  ExprPtr power() {
    ExprPtr base = primary();
    if (accept('^')) return make(ExprNode::Kind::Pow, base, unary());
    return base;
  }

  ExprPtr primary() {
    skip();
    if (pos_ >= src_.size()) throw ParseError("unexpected end of input", pos_);
    const char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      ExprPtr e = expr();
      if (!accept(')')) throw ParseError("expected ')'", pos_);
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return name();
    throw ParseError(std::string("unexpected '") + c + "'", pos_);
  }

  ExprPtr number() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() && (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.')) ++pos_;
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t p = pos_ + 1;
      if (p < src_.size() && (src_[p] == '+' || src_[p] == '-')) ++p;
      if (p < src_.size() && std::isdigit(static_cast<unsigned char>(src_[p]))) {
        pos_ = p;
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
      }
    }
    const std::string text(src_.substr(start, pos_ - start));
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (end != text.c_str() + text.size()) throw ParseError("malformed number '" + text + "'", start);
    return literal(v);
  }

  ExprPtr name() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) ++pos_;
    const std::string id(src_.substr(start, pos_ - start));

    static const std::map<std::string, Func> funcs = {{"sin", Func::Sin}, {"cos", Func::Cos},   {"exp", Func::Exp},
                                                      {"log", Func::Log}, {"sqrt", Func::Sqrt}, {"tanh", Func::Tanh}};
    if (auto f = funcs.find(id); f != funcs.end()) {
      if (!accept('(')) throw ParseError("expected '(' after " + id, pos_);
      ExprPtr arg = expr();
      if (!accept(')')) throw ParseError("expected ')'", pos_);
      auto n = std::make_shared<ExprNode>();
      n->kind = ExprNode::Kind::Call;
      n->func = f->second;
      n->lhs = std::move(arg);
      return n;
    }
    for (std::size_t i = 0; i < vars_.size(); ++i) {
      if (vars_[i] == id) {
        auto n = std::make_shared<ExprNode>();
        n->kind = ExprNode::Kind::Variable;
        n->variable = static_cast<int>(i);
        return n;
      }
    }
    if (auto p = params_.find(id); p != params_.end()) return literal(p->second);
    if (id == "pi") return literal(std::numbers::pi);
    throw ParseError("undeclared variable '" + id + "'", start);
  }

  std::string_view src_;
  const std::vector<std::string>& vars_;
  const std::map<std::string, double>& params_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline Expression parse(std::string_view source, std::vector<std::string> variables,
                        const std::map<std::string, double>& params = {}) {
  detail::Parser p(source, variables, params);
  ExprPtr root = p.parse();
  return Expression(std::move(root), std::move(variables), std::string(source));
}

// Parses over chart variables x0..x{dim-1}.
inline Expression parse(std::string_view source, int dim, const std::map<std::string, double>& params = {}) {
  return parse(source, chart_variables(dim), params);
}

namespace detail {

inline bool is_integer(double v) { return std::isfinite(v) && v == std::floor(v) && std::abs(v) < 1e9; }

inline double identity(double v) { return v; }

inline bool node_is_constant(const ExprNode& n) {
  if (n.kind == ExprNode::Kind::Variable) return false;
  if (n.lhs && !node_is_constant(*n.lhs)) return false;
  if (n.rhs && !node_is_constant(*n.rhs)) return false;
  return true;
}

// Scalar is double or Jet2. `make_const` lifts a literal to Scalar.
template <class Scalar, class MakeConst>
Scalar eval_node(const ExprNode& n, std::span<const Scalar> vars, std::span<const std::string> names,
                 const MakeConst& make_const) {
  using K = ExprNode::Kind;
  auto value_of = [](const Scalar& s) {
    if constexpr (std::is_same_v<Scalar, double>) return s;
    else return s.value;
  };
  auto fail = [&](const std::string& what) -> DomainError {
    return DomainError(what + " in '" + print_node(n, names) + "'");
  };
  switch (n.kind) {
    case K::Literal: return make_const(n.literal);
    case K::Variable: return vars[static_cast<std::size_t>(n.variable)];
    case K::Neg: return -eval_node(*n.lhs, vars, names, make_const);
    case K::Add: return eval_node(*n.lhs, vars, names, make_const) + eval_node(*n.rhs, vars, names, make_const);
    case K::Sub: return eval_node(*n.lhs, vars, names, make_const) - eval_node(*n.rhs, vars, names, make_const);
    case K::Mul: return eval_node(*n.lhs, vars, names, make_const) * eval_node(*n.rhs, vars, names, make_const);
    case K::Div: {
      Scalar den = eval_node(*n.rhs, vars, names, make_const);
      if (value_of(den) == 0.0) throw fail("division by zero");
      return eval_node(*n.lhs, vars, names, make_const) / den;
    }
    case K::Pow: {
      Scalar base = eval_node(*n.lhs, vars, names, make_const);
      if (node_is_constant(*n.rhs)) {
        const double k = eval_node<double>(*n.rhs, std::span<const double>(), names, &identity);
        const double b = value_of(base);
        if (!is_integer(k) && b < 0.0) throw fail("non-integer power of negative base");
        if (b == 0.0 && k < 0.0) throw fail("division by zero");
        if constexpr (std::is_same_v<Scalar, double>) {
          return std::pow(base, k);
        } else {
          if (b == 0.0 && !is_integer(k) && k < 2.0) throw fail("power not differentiable at zero");
          return pow(base, k);
        }
      }
      Scalar ex = eval_node(*n.rhs, vars, names, make_const);
      if (value_of(base) <= 0.0) throw fail("power with variable exponent needs a positive base");
      if constexpr (std::is_same_v<Scalar, double>) return std::pow(base, ex);
      else return exp(ex * log(base));
    }
    case K::Call: {
      Scalar a = eval_node(*n.lhs, vars, names, make_const);
      const double v = value_of(a);
      switch (n.func) {
        case Func::Sin: { using std::sin; return sin(a); }
        case Func::Cos: { using std::cos; return cos(a); }
        case Func::Exp: { using std::exp; return exp(a); }
        case Func::Tanh: { using std::tanh; return tanh(a); }
        case Func::Log:
          if (v <= 0.0) throw fail("log of nonpositive value");
          { using std::log; return log(a); }
        case Func::Sqrt:
          if (v < 0.0) throw fail("sqrt of negative value");
          if constexpr (!std::is_same_v<Scalar, double>) {
            if (v == 0.0) throw fail("sqrt not differentiable at zero");
          }
          { using std::sqrt; return sqrt(a); }
      }
    }
  }
  throw DomainError("unknown node");
}

}  // namespace detail

inline double evaluate(const Expression& e, std::span<const double> x) {
  if (static_cast<int>(x.size()) < e.arity()) throw PreconditionError("point has fewer coordinates than the expression's variables");
  return detail::eval_node<double>(e.root(), x.first(static_cast<std::size_t>(e.arity())), e.variable_names(),
                                   [](double v) { return v; });
}

inline double evaluate(const Expression& e, const Vec& x) {
  return evaluate(e, std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
}

// Value, gradient and Hessian with respect to the expression's variables at x.
inline Jet2 eval_jet2(const Expression& e, std::span<const double> x) {
  const int d = e.arity();
  if (static_cast<int>(x.size()) < d) throw PreconditionError("point has fewer coordinates than the expression's variables");
  if (d > kMaxDim) throw PreconditionError("expression arity exceeds the supported chart dimension");
  std::vector<Jet2> vars;
  vars.reserve(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) vars.push_back(Jet2::variable(x[static_cast<std::size_t>(i)], i, d));
  return detail::eval_node<Jet2>(e.root(), std::span<const Jet2>(vars), e.variable_names(),
                                 [d](double v) { return Jet2::constant(v, d); });
}

inline Jet2 eval_jet2(const Expression& e, const Vec& x) {
  return eval_jet2(e, std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
}

// Central-difference gradient and Hessian; for cross-checking jets, never the default path.
inline Jet2 eval_jet2_fd(const Expression& e, std::span<const double> x, double h) {
  const int d = e.arity();
  std::vector<double> p(x.begin(), x.begin() + d);
  auto f = [&](const std::vector<double>& q) { return evaluate(e, std::span<const double>(q)); };
  Jet2 r(f(p), d);
  for (int i = 0; i < d; ++i) {
    auto pp = p, pm = p;
    pp[i] += h;
    pm[i] -= h;
    const double fp = f(pp), fm = f(pm);
    r.grad(i) = (fp - fm) / (2 * h);
    r.hess(i, i) = (fp - 2 * r.value + fm) / (h * h);
    for (int j = 0; j < i; ++j) {
      auto a = p, b = p, c = p, dd = p;
      a[i] += h; a[j] += h;
      b[i] += h; b[j] -= h;
      c[i] -= h; c[j] += h;
      dd[i] -= h; dd[j] -= h;
      const double v = (f(a) - f(b) - f(c) + f(dd)) / (4 * h * h);
      r.hess(i, j) = v;
      r.hess(j, i) = v;
    }
  }
  return r;
}

}  // namespace nullconvex
