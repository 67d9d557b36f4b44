#include <gtest/gtest.h>

#include <cmath>

#include "engel_lab/engel.hpp"

using namespace engel_lab;

namespace {

std::vector<Point> grid(const ManifoldModel& m, int n = 4) { return sample_points(m, n, 5); }

double frac_to_grid(double t, double spacing) {
  const double k = std::round(t / spacing);
  return std::abs(t - k * spacing);
}

// Normalized bump moment ∫ h(u) e^{a u} du by a dense trapezoid rule.
double bump_moment(double a) {
  const int n = 20001;
  double num = 0.0, den = 0.0;
  for (int i = 1; i < n - 1; ++i) {
    const double u = -1.0 + 2.0 * i / (n - 1);
    const double b = std::exp(-1.0 / (1.0 - u * u));
    num += b * std::exp(a * u);
    den += b;
  }
  return num / den;
}

struct SolConstruction {
  ManifoldModel model = builtin("sol");
  Flow flow{model};
  SplittingEstimate split;
  HyperbolicityCertificate cert;
  BiEngelConstruction out;
};

const SolConstruction& sol_construction() {
  static const SolConstruction c = [] {
    SolConstruction s;
    s.split = splitting_from_flow(s.flow, grid(s.model, 3));
    s.cert = certify_weak_hyperbolicity(s.flow, s.split);
    s.out = construct_bi_engel(s.flow, s.split, s.cert);
    return s;
  }();
  return c;
}

}  // namespace

TEST(IsEngel, SolPlusMargins) {
  const auto sol = builtin("sol");
  const auto rep = is_engel(sol, sol.distribution("D+"), grid(sol));
  EXPECT_TRUE(rep.pass);
  // (W, X+Y, -X+Y) has singular values √2, √2, 1; adding X+Y and 2Z gives 2, 2, √2, 1.
  for (double m : rep.margin3) EXPECT_NEAR(m, 1 / std::sqrt(2.0), 1e-14);
  for (double m : rep.margin4) EXPECT_NEAR(m, 0.5, 1e-14);
}

TEST(IsEngel, AbelianFailsAtRankThree) {
  const auto ab = builtin("abelian");
  const auto rep = is_engel(ab, ab.distribution("D+"), grid(ab));
  EXPECT_FALSE(rep.pass);
  EXPECT_EQ(rep.failed_stage, "rank3");
}

TEST(IsEngel, ProlongationAndSl2Pass) {
  const auto pr = builtin("prolongation");
  EXPECT_TRUE(is_engel(pr, pr.distribution("D+"), grid(pr)).pass);
  EXPECT_TRUE(is_engel(pr, pr.distribution("D-"), grid(pr)).pass);
  const auto sl = builtin("sl2-suspension");
  EXPECT_TRUE(is_engel(sl, sl.distribution("D+"), grid(sl)).pass);
  EXPECT_TRUE(is_engel(sl, sl.distribution("D-"), grid(sl)).pass);
}

TEST(IsEngel, RejectsBadInput) {
  const auto sol = builtin("sol");
  EXPECT_THROW(is_engel(sol, sol.distribution("E"), grid(sol)), UsageError);
  EXPECT_THROW(is_engel(sol, sol.distribution("D+"), grid(sol), -1.0), UsageError);
}

TEST(IsEngel, InducedFrameSpansEvenContact) {
  for (const char* name : {"sol", "prolongation", "sl2-suspension"}) {
    const auto m = builtin(name);
    const auto pts = grid(m);
    const auto rep = is_engel(m, m.distribution("D+"), pts);
    const auto& e = m.distribution("E");
    for (std::size_t i = 0; i < pts.size(); ++i) {
      EXPECT_LT(subspace_distance(rep.induced[i], e.evaluate(pts[i])), 1e-8) << name;
      EXPECT_EQ(orientation_agreement(m.distribution("D+"), m.distribution("D+"), pts[i]), 1);
    }
  }
}

TEST(Containment, WIsInEveryEngelPlane) {
  for (const char* name : {"sol", "prolongation", "sl2-suspension"}) {
    const auto m = builtin(name);
    for (const char* d : {"D+", "D-"}) {
      EXPECT_LT(characteristic_containment(m, m.distribution(d), m.distribution("E"), grid(m)).max_angle, 1e-6)
          << name << " " << d;
    }
  }
}

TEST(Containment, WrongPlaneFlagged) {
  const auto sol = builtin("sol");
  const DistributionSpec xy{"XY", {sol.field("X"), sol.field("Y")}};
  EXPECT_NEAR(characteristic_containment(sol, xy, sol.distribution("E"), grid(sol)).max_angle, kPi / 2, 1e-12);
}

TEST(BiEngel, SolPasses) {
  const auto sol = builtin("sol");
  const auto c = certify_bi_engel(sol, sol.distribution("D+"), sol.distribution("D-"), grid(sol));
  EXPECT_TRUE(c.pass) << c.reason;
  EXPECT_EQ(c.orientation_product, -1);
  EXPECT_LT(c.shared_e_residual, 1e-12);
  EXPECT_NEAR(c.intersection_margin, kPi / 2, 1e-12);
  EXPECT_TRUE(c.witnesses.empty());
}

TEST(BiEngel, SelfPairFailsOnOrientation) {
  const auto sol = builtin("sol");
  BiEngelOptions o;
  o.scan_length = 0;
  const auto c = certify_bi_engel(sol, sol.distribution("D+"), sol.distribution("D+"), grid(sol), o);
  EXPECT_FALSE(c.pass);
  EXPECT_EQ(c.orientation_product, 1);
  EXPECT_EQ(c.reason, "induced orientations agree");
}

TEST(BiEngel, ProlongationFailsOnlyOnIntersection) {
  const auto pr = builtin("prolongation");
  const auto c = certify_bi_engel(pr, pr.distribution("D+"), pr.distribution("D-"), grid(pr, 3));
  EXPECT_FALSE(c.pass);
  EXPECT_TRUE(c.engel_plus.pass);
  EXPECT_TRUE(c.engel_minus.pass);
  EXPECT_LT(c.shared_e_residual, 1e-10);
  EXPECT_EQ(c.orientation_product, -1);
  EXPECT_EQ(c.reason, "D+ and D- coincide along an orbit");
  ASSERT_FALSE(c.witnesses.empty());
  // The E/W lines (cos t, ±sin t) coincide exactly where sin 2t = 0.
  bool at_zero = false, at_pi = false, at_half = false;
  for (const auto& w : c.witnesses) {
    const double t = w.point[3];
    EXPECT_LT(frac_to_grid(t, kPi / 2), 1e-6) << t;
    EXPECT_LT(w.margin, 1e-6);
    if (std::abs(t) < 1e-6 || std::abs(t - 2 * kPi) < 1e-6) at_zero = true;
    if (std::abs(t - kPi) < 1e-6) at_pi = true;
    if (std::abs(t - kPi / 2) < 1e-6 || std::abs(t - 3 * kPi / 2) < 1e-6) at_half = true;
  }
  EXPECT_TRUE(at_zero);
  EXPECT_TRUE(at_pi);
  EXPECT_TRUE(at_half);
}

TEST(Mollifier, NodesSumToOne) {
  double s = 0.0;
  for (const auto& [x, w] : mollifier_nodes({})) {
    EXPECT_LE(std::abs(x), 1.0 / 30.0);
    s += w;
  }
  EXPECT_NEAR(s, 1.0, 1e-15);
  EXPECT_THROW(mollifier_nodes({0.0, 61}), UsageError);
  EXPECT_THROW(mollifier_nodes({30.0, 2}), UsageError);
}

TEST(Mollifier, BumpIntegral) {
  const int n = 200001;
  double acc = 0.0;
  for (int i = 1; i < n - 1; ++i) acc += bump(-1.0 + 2.0 * i / (n - 1));
  EXPECT_NEAR(acc * 2.0 / (n - 1), kBumpIntegral, 1e-12);
}

TEST(Mollifier, EigenDirectionScalesByMoment) {
  const auto sol = builtin("sol");
  const Flow f(sol);
  for (double kappa : {10.0, 30.0}) {
    const auto z = mollify_along_flow(f, sol.field("X"), {kappa, 61});
    ASSERT_TRUE(z.is_invariant());
    // Dφ_s X = e^s X on Sol.
    const double m = bump_moment(1.0 / kappa);
    EXPECT_NEAR(z.constant_components()(0), m, 1e-8);
    EXPECT_NEAR(z.constant_components().tail<3>().norm(), 0.0, 1e-15);
  }
}

TEST(Mollifier, NumericMatchesInvariantPath) {
  const auto sol = builtin("sol");
  const Flow f(sol);
  const FieldHandle xy = linear_combination({{1.0, sol.field("X")}, {2.0, sol.field("Y")}});
  const auto chart = sol.realization->chart;
  const FieldHandle xn = FieldHandle::numeric(chart, [](const Point&) { return Vec4(1, 2, 0, 0); });
  const auto zi = mollify_along_flow(f, xy);
  const auto zn = mollify_along_flow(f, xn);
  for (const auto& p : grid(sol)) EXPECT_LT((zi(p) - zn(p)).norm(), 1e-13);
}

TEST(Mollifier, ConvergesAsKappaGrows) {
  const auto sol = builtin("sol");
  const Flow f(sol);
  const auto chart = sol.realization->chart;
  const FieldHandle x = FieldHandle::numeric(chart, [](const Point& p) {
    return Vec4(1.0 + p[0] * p[0], std::sin(3 * p[3]), 0, 0);
  });
  double prev = 1e300;
  for (double kappa : {10.0, 30.0, 100.0}) {
    const auto z = mollify_along_flow(f, x, {kappa, 61});
    double err = 0.0;
    for (const auto& p : grid(sol, 8)) err = std::max(err, (z(p) - x(p)).norm());
    EXPECT_LT(err, prev);
    prev = err;
  }
  EXPECT_LT(prev, 1e-3);
}

TEST(Mollifier, QuadratureRefinementStable) {
  const auto sol = builtin("sol");
  const Flow f(sol);
  const FieldHandle x = FieldHandle::numeric(sol.realization->chart, [](const Point& p) {
    return Vec4(1.0 + p[0] * p[0], std::sin(3 * p[3]), 0, 0);
  });
  const auto a = mollify_along_flow(f, x, {30.0, 61});
  const auto b = mollify_along_flow(f, x, {30.0, 122});
  for (const auto& p : grid(sol)) EXPECT_LT((a(p) - b(p)).norm(), 1e-8);
}

TEST(Mollifier, SignFlipIsExact) {
  const auto sol = builtin("sol");
  const Flow f(sol);
  const FieldHandle x = FieldHandle::numeric(sol.realization->chart, [](const Point& p) {
    return Vec4(std::cos(p[3]), 1.0 + p[1], 0, 0);
  });
  const auto a = mollify_along_flow(f, x);
  const auto b = mollify_along_flow(f, -x);
  for (const auto& p : grid(sol)) EXPECT_EQ(Vec4(-a(p)), b(p));
  const auto ai = mollify_along_flow(f, sol.field("X"));
  const auto bi = mollify_along_flow(f, -sol.field("X"));
  EXPECT_EQ(Vec4(-ai.constant_components()), bi.constant_components());
}

TEST(Mollifier, RefusesTangentInput) {
  const auto sol = builtin("sol");
  const Flow f(sol);
  EXPECT_THROW(mollify_along_flow(f, sol.field("W"), {}, grid(sol)), CheckFailed);
  EXPECT_NO_THROW(mollify_along_flow(f, sol.field("X"), {}, grid(sol)));
}

TEST(Construction, SolRecoversStandardPair) {
  const auto& c = sol_construction();
  const auto& sol = c.model;
  for (const auto& s : c.split.samples) {
    EXPECT_LT(largest_principal_angle(c.out.plus.evaluate(s.point), sol.distribution("D+").evaluate(s.point)), 1e-2);
    EXPECT_LT(largest_principal_angle(c.out.minus.evaluate(s.point), sol.distribution("D-").evaluate(s.point)), 1e-2);
  }
  EXPECT_TRUE(c.out.engel_plus.pass);
  EXPECT_TRUE(c.out.engel_minus.pass);
}

TEST(Construction, SectionMatchesFullConvolution) {
  const auto& c = sol_construction();
  const auto& sol = c.model;
  // Unit E+ section read from the estimator at every quadrature node.
  const auto est = c.split.estimator;
  const Flow flow = c.flow;
  const Vec2 ref = c.split.samples.front().e_plus.direction();
  const FieldHandle e_plus = FieldHandle::numeric(sol.realization->chart, [est, flow, ref](const Point& p) {
    Vec2 d = est(p).e_plus.direction();
    if (d.dot(ref) < 0) d = -d;
    return quotient_frame(flow.model(), flow.field(), p).lift(d);
  });
  const FieldHandle e_minus = FieldHandle::numeric(sol.realization->chart, [est, flow](const Point& p) {
    Vec2 d = est(p).e_minus.direction();
    if (d(1) < 0) d = -d;
    return quotient_frame(flow.model(), flow.field(), p).lift(d);
  });
  const auto zp = mollify_along_flow(c.flow, e_plus);
  const auto zm = mollify_along_flow(c.flow, e_minus);
  const Point p = c.split.samples[1].point;
  const Vec4 direct = zp(p) + zm(p);
  const Vec4 fast = c.out.plus.frame[1](p);
  EXPECT_LT((direct - fast).norm(), 1e-10);
}

TEST(Construction, RoundTripRecoversSplitting) {
  const auto& c = sol_construction();
  for (const auto& s : c.split.samples) {
    const auto back = estimate_splitting_from_planes(c.flow, c.out.plus, c.out.minus, s.point, {});
    EXPECT_LT(projective_distance(back.e_plus, s.e_plus), 1e-6);
    EXPECT_LT(projective_distance(back.e_minus, s.e_minus), 1e-6);
  }
}

TEST(Construction, SolPairCertifies) {
  const auto& c = sol_construction();
  BiEngelOptions o;
  o.scan_steps = 16;
  std::vector<Point> pts;
  for (const auto& s : c.split.samples) pts.push_back(s.point);
  const auto cert = certify_bi_engel(c.model, c.out.plus, c.out.minus, pts, o);
  EXPECT_TRUE(cert.pass) << cert.reason;
  EXPECT_GT(cert.intersection_margin, 1.0);
}

TEST(Construction, Sl2PairCertifies) {
  const auto sl = builtin("sl2-suspension");
  const Flow f(sl);
  const auto split = splitting_from_flow(f, grid(sl, 2));
  const auto cert = certify_weak_hyperbolicity(f, split);
  const auto out = construct_bi_engel(f, split, cert);
  BiEngelOptions o;
  o.scan_steps = 16;
  std::vector<Point> pts;
  for (const auto& s : split.samples) pts.push_back(s.point);
  const auto bi = certify_bi_engel(sl, out.plus, out.minus, pts, o);
  EXPECT_TRUE(bi.pass) << bi.reason;
  EXPECT_GT(bi.intersection_margin, 1.0);
}

TEST(Construction, RefusedWithoutRateGap) {
  const auto ab = builtin("abelian");
  const Flow f(ab);
  SplittingEstimate s;
  s.method = "manual";
  for (const auto& p : grid(ab, 2)) {
    SplittingSample x;
    x.point = p;
    x.e_plus = ProjectivePoint(0.0);
    x.e_minus = ProjectivePoint(kPi / 2);
    s.samples.push_back(x);
  }
  s.estimator = [](const Point& p) {
    SplittingSample x;
    x.point = p;
    x.e_plus = ProjectivePoint(0.0);
    x.e_minus = ProjectivePoint(kPi / 2);
    return x;
  };
  const auto cert = certify_weak_hyperbolicity(f, s);
  EXPECT_FALSE(cert.valid);
  EXPECT_THROW(construct_bi_engel(f, s, cert), CheckFailed);
}

TEST(Rotation, SolClosedForm) {
  const auto sol = builtin("sol");
  const Flow f(sol);
  RotationOptions o;
  o.T = 5;
  o.step = 0.1;
  const auto prof = rotation_profile(f, sol.distribution("D+"), sol.point(Vec4(0.3, -0.2, 0.1, 0.5)), o);
  ASSERT_EQ(prof.times.size(), prof.theta.size());
  for (std::size_t i = 0; i < prof.times.size(); ++i) {
    // [Dφ_{-t}(X+Y)] = [e^{-t}X + e^{t}Y].
    EXPECT_NEAR(prof.theta[i], std::atan(std::exp(2 * prof.times[i])), 1e-12);
  }
  EXPECT_TRUE(prof.monotone);
  EXPECT_FALSE(prof.full_turn);
  EXPECT_FALSE(prof.returns);
  EXPECT_NEAR(prof.tv_forward, std::atan(std::exp(10.0)) - kPi / 4, 1e-12);
  EXPECT_LT(prof.total_variation, kPi / 4 + 1e-12);
}

TEST(Rotation, ZeroHorizon) {
  const auto sol = builtin("sol");
  RotationOptions o;
  o.T = 0;
  const auto prof = rotation_profile(Flow(sol), sol.distribution("D+"), Point(), o);
  EXPECT_EQ(prof.times.size(), 1u);
  EXPECT_EQ(prof.total_variation, 0.0);
}

TEST(Rotation, ProlongationTurnsAtUnitRate) {
  const auto pr = builtin("prolongation");
  RotationOptions o;
  o.T = 4;
  o.step = 0.1;
  const auto prof = rotation_profile(Flow(pr), pr.distribution("D+"), pr.point(Vec4(0.2, 0.1, -0.3, 0.25)), o);
  for (std::size_t i = 0; i < prof.times.size(); ++i) EXPECT_NEAR(prof.theta[i] - 0.25, prof.times[i], 1e-9);
  EXPECT_TRUE(prof.full_turn);
  EXPECT_TRUE(prof.monotone);
  EXPECT_TRUE(prof.returns);
  ASSERT_TRUE(prof.first_return.has_value());
  EXPECT_NEAR(std::abs(*prof.first_return), kPi, 1e-9);
}

TEST(Rotation, RequiresW) {
  const auto sol = builtin("sol");
  const DistributionSpec xy{"XY", {sol.field("X"), sol.field("Y")}};
  EXPECT_THROW(rotation_profile(Flow(sol), xy, Point()), CheckFailed);
}

TEST(Rotation, BiEngelPairsHaveNoFullTurn) {
  for (const char* name : {"sol", "sl2-suspension"}) {
    const auto m = builtin(name);
    const Flow f(m);
    RotationOptions o;
    o.T = 10;
    o.step = 0.25;
    for (const auto& p : sample_points(m, 10, 3)) {
      for (const char* d : {"D+", "D-"}) EXPECT_LT(rotation_profile(f, m.distribution(d), p, o).total_variation, kPi);
    }
  }
}
