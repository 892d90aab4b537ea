#include "nullconvex/expression.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace nullconvex;
using Kind = ExprNode::Kind;

TEST(Parse, ProductOfVariables) {
  const Expression e = parse("x0*x0", 4);
  ASSERT_EQ(e.root().kind, Kind::Mul);
  EXPECT_EQ(e.root().lhs->kind, Kind::Variable);
  EXPECT_EQ(e.root().lhs->variable, 0);
  EXPECT_EQ(e.root().rhs->variable, 0);
}

TEST(Parse, ExpOfPower) {
  const Expression e = parse("exp(x0^2)", 4);
  ASSERT_EQ(e.root().kind, Kind::Call);
  EXPECT_EQ(e.root().func, Func::Exp);
  const ExprNode& p = *e.root().lhs;
  ASSERT_EQ(p.kind, Kind::Pow);
  EXPECT_EQ(p.lhs->variable, 0);
  EXPECT_EQ(p.rhs->kind, Kind::Literal);
  EXPECT_EQ(p.rhs->literal, 2.0);
}

TEST(Parse, UndeclaredVariable) {
  try {
    parse("x5", 4);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("x5"), std::string::npos);
  }
}

TEST(Parse, Malformed) {
  EXPECT_THROW(parse("", 4), ParseError);
  EXPECT_THROW(parse("x0 +", 4), ParseError);
  EXPECT_THROW(parse("(x0", 4), ParseError);
  EXPECT_THROW(parse("foo(x0)", 4), ParseError);
  EXPECT_THROW(parse("x0 x1", 4), ParseError);
}

TEST(Parse, Precedence) {
  const std::vector<double> x = {2.0, 3.0};
  EXPECT_DOUBLE_EQ(evaluate(parse("-x0^2", 2), std::span<const double>(x)), -4.0);
  EXPECT_DOUBLE_EQ(evaluate(parse("x0^x1^0", 2), std::span<const double>(x)), 2.0);
  EXPECT_DOUBLE_EQ(evaluate(parse("1 - x0 - x1", 2), std::span<const double>(x)), -4.0);
  EXPECT_DOUBLE_EQ(evaluate(parse("x1 / x0 / 2", 2), std::span<const double>(x)), 0.75);
  EXPECT_DOUBLE_EQ(evaluate(parse("2*pi", 2), std::span<const double>(x)), 2 * std::numbers::pi);
}

TEST(Parse, ParametersFoldToLiterals) {
  const Expression e = parse("1 - 2*M/x1", 4, {{"M", 1.5}});
  const Vec x = (Vec(4) << 0, 3, 1, 1).finished();
  EXPECT_DOUBLE_EQ(evaluate(e, x), 0.0);
}

TEST(Parse, PrintRoundTrip) {
  for (const char* src : {"x0*x0", "exp(x0^2)", "-x1^2 + sin(x0)/3", "1 - 2*(x1 - x0)^-1", "sqrt(tanh(x0)+2)"}) {
    const Expression a = parse(src, 2);
    const Expression b = parse(a.print(), 2);
    const std::vector<double> x = {0.3, 1.7};
    EXPECT_EQ(evaluate(a, std::span<const double>(x)), evaluate(b, std::span<const double>(x))) << src;
  }
}

TEST(Evaluate, DomainErrors) {
  const std::vector<double> x = {-1.0};
  EXPECT_THROW(evaluate(parse("log(x0)", 1), std::span<const double>(x)), DomainError);
  EXPECT_THROW(evaluate(parse("sqrt(x0)", 1), std::span<const double>(x)), DomainError);
  EXPECT_THROW(evaluate(parse("1/(x0+1)", 1), std::span<const double>(x)), DomainError);
}

TEST(Jet, Square) {
  const std::vector<double> x = {3.0};
  const Jet2 j = eval_jet2(parse("x0*x0", 1), std::span<const double>(x));
  EXPECT_DOUBLE_EQ(j.value, 9.0);
  EXPECT_DOUBLE_EQ(j.grad(0), 6.0);
  EXPECT_DOUBLE_EQ(j.hess(0, 0), 2.0);
}

TEST(Jet, Sine) {
  const std::vector<double> x = {0.7, 0.0};
  const Jet2 j = eval_jet2(parse("sin(x1)", 2), std::span<const double>(x));
  EXPECT_DOUBLE_EQ(j.value, 0.0);
  EXPECT_DOUBLE_EQ(j.grad(1), 1.0);
  EXPECT_DOUBLE_EQ(j.grad(0), 0.0);
  EXPECT_DOUBLE_EQ(j.hess(1, 1), 0.0);
}

TEST(Jet, GaussianAgainstCentralDifferences) {
  const std::vector<double> x = {0.5};
  const Expression e = parse("exp(x0^2)", 1);
  const Jet2 j = eval_jet2(e, std::span<const double>(x));
  const Jet2 f = eval_jet2_fd(e, std::span<const double>(x), 1e-4);
  EXPECT_NEAR(j.grad(0), f.grad(0), 1e-6 * std::abs(j.grad(0)));
  EXPECT_NEAR(j.hess(0, 0), f.hess(0, 0), 1e-6 * std::abs(j.hess(0, 0)));
  // closed form: d/dx = 2x e^{x^2}, d2/dx2 = (2 + 4x^2) e^{x^2}
  EXPECT_NEAR(j.grad(0), std::exp(0.25), 1e-15);
  EXPECT_NEAR(j.hess(0, 0), 3 * std::exp(0.25), 1e-14);
}

namespace {

std::string random_expression(std::mt19937_64& rng, int depth, int dim) {
  std::uniform_int_distribution<int> pick(0, depth > 0 ? 9 : 1);
  std::uniform_int_distribution<int> var(0, dim - 1);
  std::uniform_real_distribution<double> lit(0.2, 2.0);
  auto sub = [&] { return random_expression(rng, depth - 1, dim); };
  switch (pick(rng)) {
    case 0: return "x" + std::to_string(var(rng));
    case 1: return format_literal(lit(rng));
    case 2: return "(" + sub() + " + " + sub() + ")";
    case 3: return "(" + sub() + " - " + sub() + ")";
    case 4: return "(" + sub() + " * " + sub() + ")";
    case 5: return "(" + sub() + " / (2 + " + sub() + "^2))";
    case 6: return "sin(" + sub() + ")";
    case 7: return "exp(0.3*" + sub() + ")";
    case 8: return "sqrt(1 + " + sub() + "^2)";
    default: return "(" + sub() + ")^3";
  }
}

}  // namespace

TEST(Jet, RandomExpressionsMatchFiniteDifferences) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> coord(-1.0, 1.0);
  const int dim = 3;
  for (int trial = 0; trial < 200; ++trial) {
    const std::string src = random_expression(rng, 3, dim);
    const Expression e = parse(src, dim);
    std::vector<double> x(dim);
    for (double& v : x) v = coord(rng);
    const Jet2 j = eval_jet2(e, std::span<const double>(x));
    const Jet2 f = eval_jet2_fd(e, std::span<const double>(x), 1e-4);
    const double scale = 1.0 + std::abs(j.value) + j.grad.cwiseAbs().maxCoeff() + j.hess.cwiseAbs().maxCoeff();
    EXPECT_LT((j.grad - f.grad).cwiseAbs().maxCoeff(), 1e-5 * scale) << src;
    EXPECT_LT((j.hess - f.hess).cwiseAbs().maxCoeff(), 1e-5 * scale) << src;
    EXPECT_NEAR(j.value, evaluate(e, std::span<const double>(x)), 1e-14 * (1 + std::abs(j.value))) << src;
  }
}

TEST(Jet, ArithmeticCommutesAndAssociates) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 100; ++trial) {
    const Jet2 a = Jet2::variable(u(rng), 0, 2) * Jet2::constant(u(rng), 2);
    const Jet2 b = sin(Jet2::variable(u(rng), 1, 2));
    const Jet2 c = exp(Jet2::variable(u(rng), 0, 2));
    EXPECT_NEAR((a + b).value, (b + a).value, 1e-15);
    EXPECT_NEAR((a * b).value, (b * a).value, 1e-15);
    EXPECT_NEAR(((a + b) + c).value, (a + (b + c)).value, 1e-14);
    EXPECT_NEAR(((a * b) * c).value, (a * (b * c)).value, 1e-13 * (1 + std::abs((a * b * c).value)));
    EXPECT_LT(((a * b) * c - a * (b * c)).hess.cwiseAbs().maxCoeff(), 1e-12);
  }
}
