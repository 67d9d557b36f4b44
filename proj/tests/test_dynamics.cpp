#include <gtest/gtest.h>

#include <sstream>

#include "engel_lab/dynamics.hpp"

using namespace engel_lab;

namespace {

ProjectivePoint pp(double a) { return ProjectivePoint(a); }

// Independent cross ratio: affine coordinates in a chart avoiding all four points.
double affine_cross_ratio(double a1, double a2, double a3, double az) {
  double shift = 0.0;
  for (double c = 0.05; c < kPi; c += 0.05) {
    bool ok = true;
    for (double a : {a1, a2, a3, az})
      if (std::abs(std::sin(a - c)) < 0.2) ok = false;
    if (ok) {
      shift = c;
      break;
    }
  }
  auto x = [&](double a) { return std::cos(a - shift) / std::sin(a - shift); };
  return (x(a3) - x(a1)) * (x(az) - x(a2)) / ((x(az) - x(a1)) * (x(a3) - x(a2)));
}

}  // namespace

TEST(IntegrateFlow, ZeroTimeIsIdentity) {
  const auto sol = builtin("sol");
  const Flow f(sol, FlowOptions{1e-3, false});
  const Point p(Vec4(0.1, 0.2, 0.3, 0.4));
  EXPECT_EQ(f(p, 0.0), p);
}

TEST(IntegrateFlow, FlowProperty) {
  const auto sol = builtin("sol");
  // A non-trivial invariant field so the RK4 path is exercised.
  const Flow f(sol, sol.invariant(Vec4(0.3, -0.2, 0.1, 1.0)), FlowOptions{1e-3, false});
  const Point p(Vec4(0.1, 0.2, 0.3, 0.4));
  for (double s : {-2.0, -0.5, 1.0, 2.0})
    for (double t : {-1.5, 0.7, 2.0}) {
      const Vec4 a = f(f(p, t), s).coords();
      const Vec4 b = f(p, s + t).coords();
      EXPECT_LT((a - b).norm(), 1e-9);
    }
}

TEST(IntegrateFlow, SuspensionCircleAdvances) {
  const auto m = builtin("sl2-suspension");
  const Flow f(m, FlowOptions{1e-3, false});
  const Point p = m.point(Vec4(0.2, 0.1, 0.3, 0.25));
  for (double t : {0.3, 1.0, 2.6}) {
    const double expect = std::fmod(0.25 + t, 1.0);
    EXPECT_NEAR(f(p, t)[3], expect, 1e-12);
  }
}

TEST(IntegrateFlow, RegionExitIsDomainError) {
  auto chart = std::make_shared<Chart>();
  chart->upper = Vec4(1, 1, 1, 1);
  const auto w = FieldHandle::symbolic(chart, std::array<std::string, 4>{"1", "0", "0", "0"});
  try {
    integrate_flow(w, *chart, Point(Vec4::Zero()), 3.0, 1e-2);
    FAIL();
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("t = 1"), std::string::npos) << e.what();
  }
}

TEST(LinearizedHolonomy, SolQuotientBlock) {
  const auto sol = builtin("sol");
  const Flow f(sol);
  const Point p(Vec4(0.1, 0.2, 0.3, 0.4));
  for (double t : {-1.0, 0.0, 2.0}) {
    const auto h = linearized_holonomy(f, p, t);
    EXPECT_NEAR(h.quotient(0, 0), std::exp(t), 1e-12 * std::exp(std::abs(t)));
    EXPECT_NEAR(h.quotient(1, 1), std::exp(-t), 1e-12 * std::exp(std::abs(t)));
    EXPECT_NEAR(h.quotient(0, 1), 0.0, 1e-12);
  }
  EXPECT_TRUE(linearized_holonomy(f, p, 0.0).quotient.isIdentity(0));
}

TEST(LinearizedHolonomy, NumericMatchesExact) {
  for (const char* name : {"sol", "sl2-suspension"}) {
    const auto m = builtin(name);
    const Flow exact(m);
    const Flow numeric(m, FlowOptions{1e-3, false});
    for (const auto& p : sample_points(m, 3, 2)) {
      for (double t : {-5.0, -1.0, 2.5, 5.0}) {
        const Mat4 a = exact.pushforward(p, t);
        const Mat4 b = numeric.pushforward(p, t);
        EXPECT_LT((a - b).cwiseAbs().maxCoeff() / a.cwiseAbs().maxCoeff(), 1e-6) << name << " t=" << t;
      }
    }
  }
}

TEST(LinearizedHolonomy, PreservesE) {
  for (bool exact : {true, false}) {
    const auto sol = builtin("sol");
    const Flow f(sol, FlowOptions{1e-3, exact});
    const Point p(Vec4(0.1, 0.2, 0.3, 0.4));
    for (double t : {-5.0, 3.0, 5.0}) EXPECT_LT(e_invariance_residual(linearized_holonomy(f, p, t), sol.distribution("E")), 1e-8);
  }
  const auto pro = builtin("prolongation");
  const Flow f(pro);
  EXPECT_LT(e_invariance_residual(linearized_holonomy(f, pro.point(Vec4(0.1, 0.2, 0.3, 0.4)), 2.0), pro.distribution("E")), 1e-10);
}

TEST(LinearizedHolonomy, QuotientBlocksCompose) {
  const auto m = builtin("sl2-suspension");
  const Flow f(m, FlowOptions{1e-3, false});
  const Point p = m.point(Vec4(0.1, -0.2, 0.3, 0.5));
  const auto h1 = linearized_holonomy(f, p, 1.2);
  const auto h2 = linearized_holonomy(f, h1.target, 0.8);
  const auto h = linearized_holonomy(f, p, 2.0);
  EXPECT_LT((h2.quotient * h1.quotient - h.quotient).norm(), 1e-8);
}

TEST(LinearizedHolonomy, SeriesMatchesSingleCalls) {
  const auto m = builtin("prolongation");
  const Flow f(m);
  const Point p = m.point(Vec4(0.1, 0.2, 0.3, 0.4));
  const auto series = holonomy_series(f, p, {0.5, 1.0, 2.0});
  EXPECT_LT((series[2].full - f.pushforward(p, 2.0)).norm(), 1e-12);
  EXPECT_THROW(f.pushforward_series(p, {1.0, 0.5}), UsageError);
}

TEST(Projective, ActionExamples) {
  EXPECT_NEAR(act_on_projective(Mat2::Identity(), pp(0.3)).angle(), 0.3, 1e-15);
  EXPECT_NEAR(act_on_projective(Mat2(Vec2(2, 1).asDiagonal()), pp(kPi / 4)).angle(), std::atan(0.5), 1e-15);
  EXPECT_NEAR(act_on_projective(Mat2(-Mat2::Identity()), pp(0.3)).angle(), 0.3, 1e-15);
  EXPECT_THROW(act_on_projective(Mat2::Zero(), pp(0.3)), DomainError);
}

TEST(Projective, ScalarAndGroupAction) {
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    Mat2 a, b;
    for (int k = 0; k < 4; ++k) {
      a(k / 2, k % 2) = rng.uniform(-1, 1);
      b(k / 2, k % 2) = rng.uniform(-1, 1);
    }
    const auto x = pp(rng.uniform(0, kPi));
    const double s = rng.uniform(-3, 3);
    EXPECT_LT(projective_distance(act_on_projective(Mat2(s * a), x), act_on_projective(a, x)), 1e-12);
    EXPECT_LT(projective_distance(act_on_projective(Mat2(b * a), x), act_on_projective(b, act_on_projective(a, x))), 1e-9);
    EXPECT_LT(projective_distance(pull_back(a, act_on_projective(a, x)), x), 1e-9);
  }
}

TEST(CrossRatio, Examples) {
  const auto x1 = pp(0.2), x2 = pp(1.0), x3 = pp(2.0);
  EXPECT_NEAR(cross_ratio(x1, x2, x3, x3), 1.0, 1e-14);
  EXPECT_NEAR(cross_ratio(x1, x2, x3, x2), 0.0, 1e-15);
  EXPECT_TRUE(std::isinf(cross_ratio(x1, x2, x3, x1)));
  const auto a = ProjectivePoint::from_affine;
  EXPECT_NEAR(cross_ratio(a(0), a(1), a(2), a(3)), 4.0 / 3.0, 1e-14);
  EXPECT_THROW(cross_ratio(x1, x1, x3, x2), UsageError);
}

TEST(CrossRatio, AgreesWithAffineFormula) {
  Rng rng(17);
  for (int i = 0; i < 1000; ++i) {
    const double a[4] = {rng.uniform(0, kPi), rng.uniform(0, kPi), rng.uniform(0, kPi), rng.uniform(0, kPi)};
    if (std::abs(std::sin(a[0] - a[1])) < 0.05 || std::abs(std::sin(a[0] - a[2])) < 0.05 ||
        std::abs(std::sin(a[1] - a[2])) < 0.05 || std::abs(std::sin(a[3] - a[0])) < 0.05)
      continue;
    const double ref = affine_cross_ratio(a[0], a[1], a[2], a[3]);
    EXPECT_NEAR(cross_ratio(pp(a[0]), pp(a[1]), pp(a[2]), pp(a[3])), ref, 1e-9 * (1 + std::abs(ref)));
  }
}

TEST(CrossRatio, HomographyInvariance) {
  Rng rng(1);
  int checked = 0;
  while (checked < 2000) {
    Mat2 f;
    for (int k = 0; k < 4; ++k) f(k / 2, k % 2) = rng.uniform(-1, 1);
    if (std::abs(f.determinant()) < 0.1) continue;
    std::array<ProjectivePoint, 4> x;
    for (auto& v : x) v = pp(rng.uniform(0, kPi));
    if (projective_distance(x[0], x[1]) < 0.05 || projective_distance(x[0], x[2]) < 0.05 ||
        projective_distance(x[1], x[2]) < 0.05 || projective_distance(x[3], x[0]) < 0.05)
      continue;
    const double a = cross_ratio(x[0], x[1], x[2], x[3]);
    const double b = cross_ratio(act_on_projective(f, x[0]), act_on_projective(f, x[1]), act_on_projective(f, x[2]),
                                 act_on_projective(f, x[3]));
    EXPECT_NEAR(a, b, 1e-9 * (1 + std::abs(a)));
    ++checked;
  }
}

TEST(ChainRelation, RandomTuples) {
  Rng rng(2);
  int checked = 0;
  while (checked < 1000) {
    std::array<double, 6> a;
    for (auto& v : a) v = rng.uniform(0, kPi);
    bool ok = true;
    for (int i = 0; i < 6; ++i)
      for (int j = i + 1; j < 6; ++j)
        if (projective_distance(pp(a[static_cast<std::size_t>(i)]), pp(a[static_cast<std::size_t>(j)])) < 0.05) ok = false;
    if (!ok) continue;
    EXPECT_LT(chain_relation_residual(pp(a[0]), pp(a[1]), pp(a[2]), pp(a[3]), pp(a[4]), pp(a[5])), 1e-9);
    ++checked;
  }
  EXPECT_THROW(chain_relation_residual(pp(0.1), pp(0.5), pp(0.5), pp(1.0), pp(1.5), pp(2.0)), UsageError);
}

TEST(ChainRelation, OrderedInequality) {
  Rng rng(4);
  for (int i = 0; i < 1000; ++i) {
    std::array<double, 6> a;
    for (auto& v : a) v = rng.uniform(0, kPi);
    std::sort(a.begin(), a.end());
    bool ok = true;
    for (int k = 0; k < 6; ++k)
      if (projective_distance(pp(a[static_cast<std::size_t>(k)]), pp(a[static_cast<std::size_t>((k + 1) % 6)])) < 1e-3) ok = false;
    if (!ok) continue;
    const auto x = pp(a[0]), s = pp(a[1]), s2 = pp(a[2]), t2 = pp(a[3]), t = pp(a[4]), y = pp(a[5]);
    EXPECT_GT(cross_ratio(x, s2, t2, y), cross_ratio(x, s, t, y) * cross_ratio(s, s2, t2, t));
  }
}

TEST(CyclicOrder, Examples) {
  EXPECT_TRUE(is_cyclically_ordered({pp(0.1), pp(0.5), pp(1.0)}));
  EXPECT_FALSE(is_cyclically_ordered({pp(0.1), pp(1.0), pp(0.5)}));
  EXPECT_TRUE(is_cyclically_ordered({pp(1.0), pp(3.0), pp(0.1)}));
  EXPECT_THROW(is_cyclically_ordered({pp(0.1), pp(0.1), pp(0.5)}), UsageError);
  EXPECT_THROW(is_cyclically_ordered({pp(0.1), pp(0.5)}), UsageError);
}

TEST(CyclicOrder, SolTransportedLines) {
  const auto sol = builtin("sol");
  const Flow f(sol);
  const Point p(Vec4(0.1, 0.2, 0.3, 0.4));
  const auto& dp = sol.distribution("D+");
  const auto& dm = sol.distribution("D-");
  std::vector<ProjectivePoint> pts;
  for (double t : {0.0, 1.0, 2.0}) pts.push_back(transported_line(f, dp, p, t));
  for (double t : {2.0, 1.0, 0.0}) pts.push_back(transported_line(f, dm, p, t));
  EXPECT_TRUE(is_cyclically_ordered(pts));
  // Oracle: d+(t) = [e^{-t} X + e^{t} Y] in the (X, Y) frame.
  EXPECT_NEAR(pts[1].angle(), std::atan2(std::exp(1.0), std::exp(-1.0)), 1e-12);
  EXPECT_NEAR(pts[4].angle(), std::atan2(-std::exp(1.0), std::exp(-1.0)) + kPi, 1e-12);
}

TEST(CrossRatioSeries, SolClosedForm) {
  const auto sol = builtin("sol");
  const Flow f(sol);
  const auto rows = cross_ratio_series(f, sol.distribution("D+"), sol.distribution("D-"), Point(), 5.0, 0.5);
  ASSERT_EQ(rows.size(), 11u);
  for (const auto& r : rows) {
    const double u = std::exp(2 * r.t);
    EXPECT_NEAR(r.cr, (u + 1) * (u + 1) / (4 * u), 1e-9 * r.cr);
  }
  std::ostringstream os;
  write_cross_ratio_csv(os, rows);
  EXPECT_EQ(os.str().substr(0, 27), "t,theta_plus,theta_minus,cr");
}
