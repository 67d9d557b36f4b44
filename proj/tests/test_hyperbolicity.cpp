#include <gtest/gtest.h>

#include "engel_lab/hyperbolicity.hpp"

using namespace engel_lab;

namespace {

std::vector<Point> grid(const ManifoldModel& m, int n = 4) { return sample_points(m, n, 12); }

// Oracle for Sol: Dφ_t = diag(e^t, e^-t) on (X, Y), so X is expanded and Y contracted.
constexpr double kSolEPlus = 0.0;
constexpr double kSolEMinus = kPi / 2;

}  // namespace

TEST(SplittingFromPlanes, SolLimits) {
  const auto sol = builtin("sol");
  const Flow f(sol);
  const auto s = estimate_splitting_from_planes(f, sol.distribution("D+"), sol.distribution("D-"), Point(), {});
  EXPECT_LT(projective_distance(s.e_plus, ProjectivePoint(kSolEPlus)), 1e-6);
  EXPECT_LT(projective_distance(s.e_minus, ProjectivePoint(kSolEMinus)), 1e-6);
  EXPECT_NEAR(gap_decay_rate(s, 2.0, 15.0), -2.0, 0.05);
}

TEST(SplittingFromPlanes, GapClosedForm) {
  const auto sol = builtin("sol");
  const Flow f(sol);
  SplittingOptions o;
  o.T = 15;
  o.checkpoints = 60;
  const auto s = estimate_splitting_from_planes(f, sol.distribution("D+"), sol.distribution("D-"), Point(), o);
  for (std::size_t i = 0; i < s.times.size(); ++i) {
    // sin of the angle between [e^{-t}X + e^{t}Y] and [e^{-t}X - e^{t}Y].
    const double t = s.times[i];
    EXPECT_NEAR(s.gaps[i], 2.0 / (std::exp(2 * t) + std::exp(-2 * t)), 1e-12 * s.gaps[i] + 1e-300);
  }
}

TEST(SplittingFromPlanes, ZeroHorizonReturnsRawPlanes) {
  const auto sol = builtin("sol");
  SplittingOptions o;
  o.T = 0;
  const auto s = estimate_splitting_from_planes(Flow(sol), sol.distribution("D+"), sol.distribution("D-"), Point(), o);
  EXPECT_NEAR(s.e_minus.angle(), kPi / 4, 1e-15);
  EXPECT_NEAR(s.e_plus.angle(), 3 * kPi / 4, 1e-15);
  EXPECT_NEAR(s.gap_forward, kPi / 2, 1e-15);
}

TEST(SplittingFromPlanes, ProlongationCoincides) {
  const auto m = builtin("prolongation");
  SplittingOptions o;
  o.T = 4;
  o.checkpoints = 8;
  const Point p = m.point(Vec4(0.1, 0.2, 0.3, 0.4));
  try {
    estimate_splitting_from_planes(Flow(m), m.distribution("D+"), m.distribution("D-"), p, o);
    FAIL();
  } catch (const CheckFailed& e) {
    SUCCEED() << e.what();
  }
}

TEST(SplittingFromPlanes, CrossRatioDivergence) {
  const auto sol = builtin("sol");
  const auto rows = cross_ratio_series(Flow(sol), sol.distribution("D+"), sol.distribution("D-"), Point(), 10.0, 0.25);
  const double alpha = rows[4].cr;  // t = 1
  EXPECT_GT(alpha, 1.0);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    EXPECT_GT(rows[i].cr, rows[i - 1].cr);
    const double bound = std::pow(alpha, std::floor(rows[i].t + 1e-12));
    if (std::abs(rows[i].t - 1.0) < 1e-12) {
      EXPECT_NEAR(rows[i].cr, bound, 1e-12);
    } else {
      EXPECT_GT(rows[i].cr, bound) << rows[i].t;
    }
  }
}

TEST(SplittingFromFlow, SolAgreesWithPlanes) {
  const auto sol = builtin("sol");
  const Flow f(sol);
  for (const auto& p : grid(sol)) {
    const auto a = estimate_splitting_from_flow(f, p, {});
    const auto b = estimate_splitting_from_planes(f, sol.distribution("D+"), sol.distribution("D-"), p, {});
    EXPECT_LT(projective_distance(a.e_plus, b.e_plus), 1e-8);
    EXPECT_LT(projective_distance(a.e_minus, b.e_minus), 1e-8);
  }
}

TEST(SplittingFromFlow, Sl2EigenDirections) {
  const auto m = builtin("sl2-suspension");
  const auto s = estimate_splitting_from_flow(Flow(m), m.point(Vec4(0.1, 0.2, 0.3, 0.4)), {});
  // Dφ_t U+ = e^{-t} U+, Dφ_t U- = e^{t} U- in the frame (U+, U-).
  EXPECT_LT(projective_distance(s.e_plus, ProjectivePoint(kPi / 2)), 1e-12);
  EXPECT_LT(projective_distance(s.e_minus, ProjectivePoint(0.0)), 1e-12);
  const auto b = estimate_splitting_from_planes(Flow(m), m.distribution("D+"), m.distribution("D-"), s.point, {});
  EXPECT_LT(projective_distance(s.e_plus, b.e_plus), 1e-6);
  EXPECT_LT(projective_distance(s.e_minus, b.e_minus), 1e-6);
}

TEST(SplittingFromFlow, RotationIsInconclusive) {
  const auto m = builtin("oscillator");
  for (double T : {1.0, 5.0, 20.0}) {
    SplittingOptions o;
    o.T = T;
    EXPECT_THROW(estimate_splitting_from_flow(Flow(m), Point(), o), InconclusiveError) << T;
  }
}

TEST(SplittingFromFlow, ReversedFieldSwapsLines) {
  for (const char* name : {"sol", "sl2-suspension"}) {
    const auto m = builtin(name);
    const Flow f(m);
    const Point p = grid(m, 1)[0];
    const auto a = estimate_splitting_from_flow(f, p, {});
    const auto b = estimate_splitting_from_flow(f.negated(), p, {});
    EXPECT_EQ(a.e_plus.angle(), b.e_minus.angle()) << name;
    EXPECT_EQ(a.e_minus.angle(), b.e_plus.angle()) << name;
  }
}

TEST(Certificate, SolExact) {
  const auto sol = builtin("sol");
  const Flow f(sol);
  const auto split = splitting_from_flow(f, grid(sol));
  const auto cert = certify_weak_hyperbolicity(f, split);
  EXPECT_TRUE(cert.valid) << cert.reason;
  EXPECT_NEAR(cert.c_hat, 2.0, 1e-3);
  EXPECT_NEAR(cert.K_hat, 1.0, 1e-5);
  EXPECT_TRUE(verify_certificate(cert));
  EXPECT_TRUE(cert.alpha_consistent);
  EXPECT_NEAR(cert.alpha_gap_inf, 2.0, 1e-6);
  ASSERT_TRUE(cert.strong_flags);
  EXPECT_NEAR(cert.strong_flags->first, 1.0, 1e-3);
}

TEST(Certificate, SolNumericChart) {
  const auto sol = builtin("sol");
  const Flow f(sol, FlowOptions{1e-3, false});
  SplittingOptions so;
  so.T = 10;
  const auto split = splitting_from_flow(f, grid(sol, 2), so);
  CertificateOptions co;
  co.T = 10;
  const auto cert = certify_weak_hyperbolicity(f, split, identity_metric(), co);
  EXPECT_TRUE(cert.valid);
  EXPECT_NEAR(cert.c_hat, 2.0, 5e-2);
}

TEST(Certificate, SwappedRolesRefused) {
  const auto sol = builtin("sol");
  const Flow f(sol);
  const auto cert = certify_weak_hyperbolicity(f, swapped(splitting_from_flow(f, grid(sol))));
  EXPECT_FALSE(cert.valid);
  for (double m : cert.margins) EXPECT_LT(m, 0.0);
}

TEST(Certificate, Sl2StrongFlags) {
  const auto m = builtin("sl2-suspension");
  const Flow f(m);
  const auto cert = certify_weak_hyperbolicity(f, splitting_from_flow(f, grid(m)));
  EXPECT_TRUE(cert.valid);
  EXPECT_NEAR(cert.c_hat, 2.0, 1e-3);
  ASSERT_TRUE(cert.strong_flags);
  EXPECT_NEAR(cert.strong_flags->first, 1.0, 1e-3);
  EXPECT_NEAR(cert.strong_flags->second, 1.0, 1e-3);
}

TEST(AverageMetric, SolRecertifiesWithUnitK) {
  const auto sol = builtin("sol");
  const Flow f(sol);
  const auto g = average_metric(f, identity_metric(), 5.0, 100);
  // Oracle: diag(∫e^{2t}, ∫e^{-2t}) / T over [0, 5] in the frame (X, Y).
  const Mat2 a = g(Point());
  EXPECT_NEAR(a(0, 0), (std::exp(10.0) - 1) / 10.0, 1e-3 * a(0, 0));
  EXPECT_NEAR(a(1, 1), (1 - std::exp(-10.0)) / 10.0, 1e-4);
  EXPECT_NEAR(a(0, 1), 0.0, 1e-12);
  const auto split = splitting_from_flow(f, grid(sol));
  const auto c1 = certify_weak_hyperbolicity(f, split);
  const auto c2 = certify_weak_hyperbolicity(f, split, g);
  EXPECT_NEAR(c2.K_hat, 1.0, 1e-6);
  EXPECT_NEAR(c1.c_hat, c2.c_hat, 1e-6);
  // Averaging an averaged metric costs quadrature^2 holonomies per evaluation.
  const auto g1 = average_metric(f, identity_metric(), 5.0, 20);
  const auto g2 = average_metric(f, g1, 5.0, 20);
  const auto one = splitting_from_flow(f, grid(sol, 1));
  EXPECT_NEAR(certify_weak_hyperbolicity(f, one, g1).c_hat, certify_weak_hyperbolicity(f, one, g2).c_hat, 1e-9);
}

TEST(AverageMetric, ZeroHorizonIsIdentity) {
  const auto sol = builtin("sol");
  const auto g = average_metric(Flow(sol), identity_metric(), 0.0);
  EXPECT_TRUE(g(Point()).isIdentity(0));
  const auto h = average_metric(Flow(sol), identity_metric(), 1e-6, 10);
  EXPECT_TRUE(h(Point()).isApprox(Mat2::Identity(), 1e-5));
}

TEST(AverageMetric, RejectsIndefiniteInput) {
  const auto sol = builtin("sol");
  const auto g = average_metric(Flow(sol), [](const Point&) { return Mat2(Vec2(1, -1).asDiagonal()); }, 1.0);
  EXPECT_THROW(g(Point()), DomainError);
}

TEST(Invariance, SolResiduals) {
  const auto sol = builtin("sol");
  const Flow f(sol);
  const auto split = splitting_from_flow(f, grid(sol));
  EXPECT_EQ(invariance_residual(f, split, 0.0), 0.0);
  for (double t : {0.5, 2.0, 5.0}) EXPECT_LT(invariance_residual(f, split, t), 1e-8);
  const auto bad = perturbed(split, 0.1);
  const double r1 = invariance_residual(f, bad, 0.5);
  const double r2 = invariance_residual(f, bad, 2.0);
  EXPECT_GT(r1, 1e-2);
  EXPECT_GT(r2, r1);
}

TEST(Isotropy, HyperbolicBuiltins) {
  const auto sol = builtin("sol");
  const Flow f(sol);
  const auto s = estimate_splitting_from_flow(f, Point(), {});
  const auto r = isotropy_residual(f, s);
  EXPECT_LT(r.residual, 1e-10);
  EXPECT_NEAR(std::abs(r.cross), 1.0, 1e-9);
  EXPECT_NEAR(dalpha(sol, Vec4(1, 0, 0, 0), Vec4(0, 1, 0, 0), Point()), -1.0, 1e-15);
  EXPECT_EQ(dalpha(sol, Vec4(1, 0, 0, 0), Vec4(1, 0, 0, 0), Point()), 0.0);

  const auto sl2 = builtin("sl2-suspension");
  const Flow g(sl2);
  const auto s2 = estimate_splitting_from_flow(g, Point(), {});
  const auto r2 = isotropy_residual(g, s2);
  EXPECT_LT(r2.residual, 1e-10);
  EXPECT_NEAR(std::abs(r2.cross), 2.0, 1e-9);
  EXPECT_NEAR(dalpha(sl2, Vec4(1, 0, 0, 0), Vec4(0, 1, 0, 0), Point()), -2.0, 1e-15);
}

TEST(Isotropy, NonzeroDivergenceUnsupported) {
  const auto m = builtin("prolongation");
  const auto w = FieldHandle::symbolic(m.chart, std::array<std::string, 4>{"x", "0", "0", "1"}, "W'");
  const Flow f(m, w);
  SplittingSample s;
  s.point = m.point(Vec4(0.5, 0, 0, 0));
  s.e_plus = ProjectivePoint(0.0);
  s.e_minus = ProjectivePoint(1.0);
  EXPECT_DOUBLE_EQ(divergence(m, w, s.point), 1.0);
  EXPECT_THROW(isotropy_residual(f, s), UnsupportedError);
}
