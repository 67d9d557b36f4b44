#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "engel_lab/expression.hpp"
#include "engel_lab/models.hpp"

using namespace engel_lab;
using expr::Expression;

namespace {

const std::vector<std::string> kXYZT{"x", "y", "z", "t"};

double at(const Expression& e, double x, double y = 0, double z = 0, double t = 0) {
  const std::array<double, 4> v{x, y, z, t};
  return e(v);
}

int parse_column(const std::string& text) {
  try {
    Expression::parse(text, kXYZT);
  } catch (const ParseError& e) {
    return e.column();
  }
  return -1;
}

}  // namespace

TEST(Expression, CosAtZero) { EXPECT_DOUBLE_EQ(at(Expression::parse("cos(t)", kXYZT), 0, 0, 0, 0), 1.0); }

TEST(Expression, AlgebraicIdentity) {
  const auto a = Expression::parse("cos(t)*1 + sin(t)*0", kXYZT);
  const auto b = Expression::parse("cos(t)", kXYZT);
  Rng rng(7);
  for (int i = 0; i < 100; ++i) {
    const double t = rng.uniform(-10, 10);
    EXPECT_NEAR(at(a, 0, 0, 0, t), at(b, 0, 0, 0, t), 1e-15);
  }
}

TEST(Expression, DerivativeOfExp) {
  const auto e = Expression::parse("exp(2*x)", kXYZT);
  const double analytic = at(e.derivative(0), 0.0);
  const double h = 1e-5;
  const double fd = (at(e, h) - at(e, -h)) / (2 * h);
  EXPECT_NEAR(analytic, 2.0, 1e-15);
  EXPECT_NEAR(analytic, fd, 1e-8);
}

TEST(Expression, Precedence) {
  EXPECT_DOUBLE_EQ(at(Expression::parse("2+3*4", kXYZT), 0), 14.0);
  EXPECT_DOUBLE_EQ(at(Expression::parse("2^3^2", kXYZT), 0), 512.0);
  EXPECT_DOUBLE_EQ(at(Expression::parse("-x^2", kXYZT), 3.0), -9.0);
  EXPECT_DOUBLE_EQ(at(Expression::parse("(1-x)/4", kXYZT), 3.0), -0.5);
  EXPECT_NEAR(at(Expression::parse("tanh(y) + log(z)", kXYZT), 0, 0.5, 2.0), std::tanh(0.5) + std::log(2.0), 1e-15);
  EXPECT_NEAR(at(Expression::parse("pi", kXYZT), 0), M_PI, 0);
}

TEST(Expression, ErrorsCarryColumns) {
  EXPECT_EQ(parse_column("cos(q)"), 5);
  // Unclosed parentheses point at the '(' and arity errors at the function name.
  EXPECT_EQ(parse_column("(x+1"), 1);
  EXPECT_EQ(parse_column("2*(x+1"), 3);
  EXPECT_EQ(parse_column("x+1)"), 4);
  EXPECT_EQ(parse_column("sin()"), 1);
  EXPECT_EQ(parse_column("x+sin(x,y)"), 3);
  EXPECT_EQ(parse_column("x $ y"), 3);
  EXPECT_EQ(parse_column(""), 1);
  EXPECT_EQ(parse_column("foo(x)"), 1);
}

TEST(Expression, PrintReparseRoundTrip) {
  // Random trees built from a small grammar; printing and reparsing preserves evaluation.
  Rng rng(11);
  const std::vector<std::string> leaves{"x", "y", "z", "t", "2", "0.5", "3.25"};
  const std::vector<std::string> funcs{"sin", "cos", "exp", "tanh"};
  std::function<std::string(int)> gen = [&](int depth) -> std::string {
    const double r = rng.uniform();
    if (depth == 0 || r < 0.25) return leaves[static_cast<std::size_t>(rng.uniform() * leaves.size())];
    if (r < 0.45) return funcs[static_cast<std::size_t>(rng.uniform() * funcs.size())] + "(" + gen(depth - 1) + ")";
    if (r < 0.5) return "-" + gen(depth - 1);
    const char* ops[] = {"+", "-", "*", "/"};
    return "(" + gen(depth - 1) + ops[static_cast<int>(rng.uniform() * 4)] + gen(depth - 1) + ")";
  };
  for (int k = 0; k < 200; ++k) {
    const std::string src = gen(4);
    const auto a = Expression::parse(src, kXYZT);
    const auto b = Expression::parse(a.to_string(), kXYZT);
    EXPECT_EQ(a.to_string(), b.to_string()) << src;
    for (int i = 0; i < 10; ++i) {
      const std::array<double, 4> v{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(0.1, 1), rng.uniform(-3, 3)};
      const double va = a(v), vb = b(v);
      if (std::isfinite(va)) EXPECT_EQ(va, vb) << src;
    }
  }
}

TEST(Expression, DerivativeMatchesCentralDifferencesAtSecondOrder) {
  Rng rng(5);
  const std::vector<std::string> sources{"sin(x*y) + exp(z)*t", "tanh(x - y^2)/(2 + cos(t))", "x^3*exp(-z) - log(2+y)"};
  for (const auto& s : sources) {
    const auto e = Expression::parse(s, kXYZT);
    for (int i = 0; i < 4; ++i) {
      const auto d = e.derivative(i);
      const std::array<double, 4> base{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
      auto fd = [&](double h) {
        auto p = base, m = base;
        p[static_cast<std::size_t>(i)] += h;
        m[static_cast<std::size_t>(i)] -= h;
        return (e(p) - e(m)) / (2 * h);
      };
      const double exact = d(base);
      const double e1 = std::abs(fd(1e-2) - exact);
      const double e2 = std::abs(fd(5e-3) - exact);
      EXPECT_LT(std::abs(fd(1e-5) - exact), 1e-8);
      if (e1 > 1e-11) EXPECT_NEAR(std::log2(e1 / e2), 2.0, 0.2) << s << " d/d" << kXYZT[static_cast<std::size_t>(i)];
    }
  }
}
