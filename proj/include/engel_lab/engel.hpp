#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hyperbolicity.hpp"

namespace engel_lab {

// ---------------------------------------------------------------------------
// Components

namespace detail {

inline std::shared_ptr<const Chart> point_chart_ptr(const ManifoldModel& m) {
  return m.realization ? m.realization->chart : m.chart;
}

/// The field in coordinate components of the point chart.
inline FieldHandle to_chart_field(const ManifoldModel& m, const FieldHandle& f) {
  if (f.is_invariant()) return m.coordinate_field(f);
  if (!m.is_algebraic()) return f;
  if (!m.realization) throw UsageError("model '" + m.name + "' has no chart realization");
  auto mp = std::make_shared<const ManifoldModel>(m);
  return FieldHandle::numeric(
      m.realization->chart, [mp, f](const Point& p) { return Vec4(mp->frame_matrix(p) * f(p)); }, f.step(), f.name());
}

inline bool all_invariant(const std::vector<const DistributionSpec*>& ds) {
  for (const auto* d : ds)
    for (const auto& f : d->frame)
      if (!f.is_invariant()) return false;
  return true;
}

/// Copies whose brackets can be evaluated: algebra brackets when every field
/// is invariant, chart brackets otherwise.
inline std::vector<DistributionSpec> bracket_ready(const ManifoldModel& m, const std::vector<const DistributionSpec*>& ds) {
  std::vector<DistributionSpec> out;
  const bool convert = m.is_algebraic() && !all_invariant(ds);
  for (const auto* d : ds) {
    DistributionSpec c{d->name, {}};
    for (const auto& f : d->frame) c.frame.push_back(convert ? to_chart_field(m, f) : f);
    out.push_back(std::move(c));
  }
  return out;
}

inline double sv_ratio(const RankResult& r, std::size_t k) {
  if (r.singular_values.size() <= k || r.singular_values[0] == 0.0) return 0.0;
  return r.singular_values[k] / r.singular_values[0];
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Engel check

struct EngelReport {
  bool pass = true;
  double tolerance = 0.0;
  std::vector<Point> samples;
  /// σ3/σ1 of (X, Y, [X,Y]).
  std::vector<double> margin3;
  /// σ4/σ1 of (X, Y, [X,Y], [X,[X,Y]], [Y,[X,Y]]).
  std::vector<double> margin4;
  double worst_margin = std::numeric_limits<double>::infinity();
  std::size_t worst_sample = 0;
  /// "rank3", "rank4" or empty.
  std::string failed_stage;
  /// Induced frame (X, Y, [X,Y]) per sample, in bracket components.
  std::vector<Mat4X> induced;
};

inline EngelReport is_engel(const ManifoldModel& model, const DistributionSpec& d, const std::vector<Point>& samples,
                            double tol = kDefaultRankTol) {
  if (d.rank() != 2) throw UsageError("Engel check needs a rank-2 distribution");
  if (!(tol > 0.0)) throw UsageError("tolerance must be positive");
  if (samples.empty()) throw UsageError("Engel check needs at least one sample");
  const DistributionSpec c = detail::bracket_ready(model, {&d}).front();
  const FieldHandle& x = c.frame[0];
  const FieldHandle& y = c.frame[1];
  const FieldHandle b = bracket_field(x, y);
  struct Row {
    double m3 = 0.0, m4 = 0.0;
    Mat4X induced;
  };
  const auto rows = parallel_map<Row>(samples.size(), [&](std::size_t i) {
    const Point& p = samples[i];
    Row r;
    const Mat4X f = c.checked_frame(p);
    Mat4X m3(4, 3);
    m3 << f, b(p);
    Mat4X m5(4, 5);
    m5 << m3, lie_bracket(x, b, p).components, lie_bracket(y, b, p).components;
    r.m3 = detail::sv_ratio(numerical_rank(m3, tol), 2);
    r.m4 = detail::sv_ratio(numerical_rank(m5, tol), 3);
    r.induced = m3;
    return r;
  });
  EngelReport rep;
  rep.tolerance = tol;
  rep.samples = samples;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rep.margin3.push_back(rows[i].m3);
    rep.margin4.push_back(rows[i].m4);
    rep.induced.push_back(rows[i].induced);
    const double m = std::min(rows[i].m3, rows[i].m4);
    if (m < rep.worst_margin) {
      rep.worst_margin = m;
      rep.worst_sample = i;
    }
    if (!(rows[i].m3 > tol)) {
      rep.pass = false;
      if (rep.failed_stage.empty()) rep.failed_stage = "rank3";
    } else if (!(rows[i].m4 > tol)) {
      rep.pass = false;
      if (rep.failed_stage.empty()) rep.failed_stage = "rank4";
    }
  }
  return rep;
}

struct ContainmentReport {
  double max_angle = 0.0;
  std::size_t worst_sample = 0;
  std::vector<double> angles;
};

/// Angle between the characteristic line of E and the plane D, per sample.
inline ContainmentReport characteristic_containment(const ManifoldModel& model, const DistributionSpec& d,
                                                    const DistributionSpec& e, const std::vector<Point>& samples) {
  const auto c = detail::bracket_ready(model, {&d, &e});
  ContainmentReport rep;
  rep.angles = parallel_map<double>(samples.size(), [&](std::size_t i) {
    const Vec4 w = characteristic_line(c[1], samples[i]).components;
    return angle_to_span(w, c[0].checked_frame(samples[i]));
  });
  for (std::size_t i = 0; i < rep.angles.size(); ++i) {
    if (rep.angles[i] > rep.max_angle) {
      rep.max_angle = rep.angles[i];
      rep.worst_sample = i;
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Bi-Engel certificate

struct BiEngelOptions {
  double tol = 1e-6;
  double engel_tol = kDefaultRankTol;
  /// Orbit segment [0, scan_length] searched for coincidences from each sample.
  double scan_length = 2.0 * kPi;
  int scan_steps = 128;
};

struct CoincidenceWitness {
  std::size_t sample = 0;
  double t = 0.0;
  Point point;
  double margin = 0.0;
};

struct BiEngelCertificate {
  bool pass = false;
  std::string reason;
  BiEngelOptions options;
  EngelReport engel_plus;
  EngelReport engel_minus;
  double shared_e_residual = 0.0;
  std::vector<int> orientation;
  /// +1 if any sample has agreeing orientations, else -1.
  int orientation_product = -1;
  std::vector<double> sample_margins;
  /// Min over samples and scanned orbit points of the angle between D+ and D- in E/W.
  double intersection_margin = std::numeric_limits<double>::infinity();
  std::vector<CoincidenceWitness> witnesses;
};

namespace detail {

inline Vec2 aligned(const Vec2& v, const Vec2& ref) { return v.dot(ref) < 0.0 ? Vec2(-v) : v; }

struct LinePair {
  Vec2 plus;
  Vec2 minus;
  double det() const { return plus(0) * minus(1) - plus(1) * minus(0); }
  double margin() const { return std::asin(std::min(1.0, std::abs(det()))); }
};

inline LinePair line_pair(const ManifoldModel& model, const DistributionSpec& dp, const DistributionSpec& dm,
                          const Point& q, const LinePair* ref) {
  const QuotientFrame fr = quotient_frame(model, model.flow_field(), q);
  LinePair out{plane_line(dp, fr).direction(), plane_line(dm, fr).direction()};
  if (ref) {
    out.plus = aligned(out.plus, ref->plus);
    out.minus = aligned(out.minus, ref->minus);
  }
  return out;
}

/// Orbit points where the E/W lines of D+ and D- coincide, located by sign
/// changes of det(v+, v-) with sign-continuous directions, refined by bisection.
inline std::vector<CoincidenceWitness> scan_coincidences(const ManifoldModel& model, const DistributionSpec& dp,
                                                         const DistributionSpec& dm, std::size_t sample,
                                                         const Point& p, const BiEngelOptions& opt, double& min_margin) {
  const Flow flow(model);
  std::vector<CoincidenceWitness> out;
  const double dt = opt.scan_length / opt.scan_steps;
  Point qa = p;
  LinePair la = line_pair(model, dp, dm, qa, nullptr);
  min_margin = la.margin();
  if (la.margin() <= opt.tol) out.push_back({sample, 0.0, qa, la.margin()});
  for (int k = 1; k <= opt.scan_steps; ++k) {
    const double ta = (k - 1) * dt;
    const Point qb = flow(qa, dt);
    const LinePair lb = line_pair(model, dp, dm, qb, &la);
    min_margin = std::min(min_margin, lb.margin());
    if (la.det() != 0.0 && lb.det() != 0.0 && (la.det() > 0.0) != (lb.det() > 0.0)) {
      double lo = 0.0, hi = dt;
      Point ql = qa;
      LinePair ll = la;
      for (int it = 0; it < 80 && hi - lo > 1e-13; ++it) {
        const double mid = 0.5 * (lo + hi);
        const Point qm = flow(ql, mid - lo);
        const LinePair lm = line_pair(model, dp, dm, qm, &ll);
        if ((lm.det() > 0.0) == (ll.det() > 0.0)) {
          lo = mid;
          ql = qm;
          ll = lm;
        } else {
          hi = mid;
        }
      }
      const double tw = ta + 0.5 * (lo + hi);
      const Point qw = flow(ql, 0.5 * (hi - lo));
      const double m = line_pair(model, dp, dm, qw, &ll).margin();
      min_margin = std::min(min_margin, m);
      out.push_back({sample, tw, qw, m});
    } else if (lb.margin() <= opt.tol && k < opt.scan_steps) {
      out.push_back({sample, ta + dt, qb, lb.margin()});
    }
    qa = qb;
    la = lb;
  }
  return out;
}

}  // namespace detail

inline BiEngelCertificate certify_bi_engel(const ManifoldModel& model, const DistributionSpec& dp,
                                           const DistributionSpec& dm, const std::vector<Point>& samples,
                                           const BiEngelOptions& opt = {}) {
  if (!(opt.tol > 0.0) || !(opt.engel_tol > 0.0)) throw UsageError("tolerances must be positive");
  if (opt.scan_steps < 1 || !(opt.scan_length >= 0.0)) throw UsageError("scan needs steps >= 1 and length >= 0");
  BiEngelCertificate cert;
  cert.options = opt;
  cert.engel_plus = is_engel(model, dp, samples, opt.engel_tol);
  cert.engel_minus = is_engel(model, dm, samples, opt.engel_tol);
  struct Row {
    int orientation = 1;
    double residual = 0.0, margin = 0.0, scan_min = 0.0;
    std::vector<CoincidenceWitness> witnesses;
  };
  const auto rows = parallel_map<Row>(samples.size(), [&](std::size_t i) {
    Row r;
    const Mat4X& b1 = cert.engel_plus.induced[i];
    const Mat4X& b2 = cert.engel_minus.induced[i];
    r.residual = subspace_distance(b1, b2);
    const Mat3 c = b1.colPivHouseholderQr().solve(b2);
    r.orientation = c.determinant() > 0.0 ? 1 : -1;
    r.margin = detail::line_pair(model, dp, dm, samples[i], nullptr).margin();
    if (opt.scan_length > 0.0) r.witnesses = detail::scan_coincidences(model, dp, dm, i, samples[i], opt, r.scan_min);
    else r.scan_min = r.margin;
    return r;
  });
  for (const auto& r : rows) {
    cert.shared_e_residual = std::max(cert.shared_e_residual, r.residual);
    cert.orientation.push_back(r.orientation);
    if (r.orientation > 0) cert.orientation_product = 1;
    cert.sample_margins.push_back(r.margin);
    cert.intersection_margin = std::min({cert.intersection_margin, r.margin, r.scan_min});
    cert.witnesses.insert(cert.witnesses.end(), r.witnesses.begin(), r.witnesses.end());
  }
  if (!cert.engel_plus.pass) cert.reason = "D+ is not Engel";
  else if (!cert.engel_minus.pass) cert.reason = "D- is not Engel";
  else if (!(cert.shared_e_residual < opt.tol)) cert.reason = "induced even contact structures differ";
  else if (cert.orientation_product != -1) cert.reason = "induced orientations agree";
  else if (!(cert.intersection_margin > opt.tol)) cert.reason = "D+ and D- coincide along an orbit";
  cert.pass = cert.reason.empty();
  return cert;
}

// ---------------------------------------------------------------------------
// Mollification along the flow

struct MollifierOptions {
  double kappa = 30.0;
  /// Simpson nodes on [-1/κ, 1/κ]; even counts are raised by one.
  int quadrature_steps = 61;
};

/// ∫_{-1}^{1} exp(-1/(1-s²)) ds.
inline constexpr double kBumpIntegral = 0.443993816168079;

inline double bump(double s) { return std::abs(s) < 1.0 ? std::exp(-1.0 / (1.0 - s * s)) : 0.0; }

/// (s_i, w_i) with Σ w_i f(s_i) ≈ ∫ h_κ(s) f(s) ds; weights sum to 1.
inline std::vector<std::pair<double, double>> mollifier_nodes(const MollifierOptions& opt) {
  if (!(opt.kappa > 0.0) || !std::isfinite(opt.kappa)) throw UsageError("kappa must be positive");
  if (opt.quadrature_steps < 3) throw UsageError("quadrature needs at least 3 nodes");
  const int n = opt.quadrature_steps | 1;
  std::vector<std::pair<double, double>> out;
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = -1.0 + 2.0 * i / (n - 1);
    const double simpson = (i == 0 || i == n - 1) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    const double w = simpson * bump(u);
    if (w == 0.0) continue;
    out.emplace_back(u / opt.kappa, w);
    total += w;
  }
  // Normalizing on the nodes makes constants exact and keeps the rule stable under refinement.
  for (auto& [s, w] : out) w /= total;
  return out;
}

/// (h_κ * X)(p) = ∫ h_κ(s) Dφ_s X(φ_{-s} p) ds.
inline FieldHandle mollify_along_flow(const Flow& flow, const FieldHandle& x, const MollifierOptions& opt = {},
                                      const std::vector<Point>& check_samples = {}) {
  const auto nodes = mollifier_nodes(opt);
  const ManifoldModel& model = flow.model();
  FieldHandle out;
  const std::string name = "moll(" + x.name() + ")";
  if (x.is_invariant() && flow.exact()) {
    Vec4 acc = Vec4::Zero();
    for (const auto& [s, w] : nodes) acc += w * (exact_holonomy(model, flow.field(), s) * x.constant_components());
    out = FieldHandle::invariant(model.algebra, acc, name);
  } else {
    out = FieldHandle::numeric(
        detail::point_chart_ptr(model),
        [flow, x, nodes](const Point& p) {
          Vec4 acc = Vec4::Zero();
          for (const auto& [s, w] : nodes) {
            const Point q = flow(p, -s);
            acc += w * (flow.pushforward(q, s) * x(q));
          }
          return acc;
        },
        x.is_invariant() ? kDefaultStep : x.step(), name);
  }
  for (std::size_t i = 0; i < check_samples.size(); ++i) {
    const Point& p = check_samples[i];
    const Mat4X w = flow.field()(p);
    for (const FieldHandle* f : {&x, static_cast<const FieldHandle*>(&out)}) {
      const double a = angle_to_span((*f)(p), w);
      if (!(a > 1e-8)) {
        throw CheckFailed("mollification refused: " + std::string(f == &x ? "input" : "output") +
                          " is tangent to W at sample " + std::to_string(i) + " (angle " + format_double(a) + ")");
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Forward construction

struct ConstructionOptions {
  MollifierOptions mollifier;
  /// Difference step for brackets of the constructed fields.
  double step = 1e-3;
  double engel_tol = kDefaultRankTol;
};

struct BiEngelConstruction {
  DistributionSpec plus;
  DistributionSpec minus;
  ConstructionOptions options;
  double c_hat = 0.0;
  EngelReport engel_plus;
  EngelReport engel_minus;
};

/// D± = span{W, Z+ ± Z-} with Z± the flow-mollified g-unit sections of E±.
///
/// E± is flow-invariant, so Dφ_s of the unit section at φ_{-s}p is the unit
/// vector of E±(p) scaled by 1/|Dφ_{-s} e±(p)|; the convolution reduces to that
/// scalar weight and one splitting evaluation per point.
inline BiEngelConstruction construct_bi_engel(const Flow& flow, const SplittingEstimate& splitting,
                                              const HyperbolicityCertificate& cert,
                                              const QuotientMetric& g = identity_metric(),
                                              const ConstructionOptions& opt = {}) {
  if (!cert.valid || !(cert.c_hat > 0.0)) {
    throw CheckFailed("construction refused: no positive rate certificate (c_hat = " + format_double(cert.c_hat) + ")");
  }
  if (!splitting.estimator || splitting.samples.empty()) throw UsageError("construction needs a splitting with an estimator");
  if (!(opt.step > 0.0)) throw UsageError("difference step must be positive");
  const auto nodes = mollifier_nodes(opt.mollifier);
  const Vec2 ref_plus = splitting.samples.front().e_plus.direction();
  const Vec2 ref_minus = splitting.samples.front().e_minus.direction();
  const SplittingEstimator est = splitting.estimator;

  auto sections = [flow, est, g, nodes, ref_plus, ref_minus](const Point& p) {
    const SplittingSample s = est(p);
    const QuotientFrame fr = quotient_frame(flow.model(), flow.field(), p);
    const Mat2 g0 = g(p);
    auto unit = [&](const ProjectivePoint& l, const Vec2& ref) {
      Vec2 c = l.direction();
      if (std::abs(c.dot(ref)) < 0.1) throw DomainError("section orientation is ambiguous at the query point");
      if (c.dot(ref) < 0.0) c = -c;
      return Vec2(c / metric_norm(g0, c));
    };
    const Vec2 cp = unit(s.e_plus, ref_plus);
    const Vec2 cm = unit(s.e_minus, ref_minus);
    double mp = 0.0, mm = 0.0;
    for (const auto& [sn, w] : nodes) {
      const HolonomyMap h = linearized_holonomy(flow, p, -sn);
      const Mat2 gt = g(h.target);
      mp += w / metric_norm(gt, h.quotient * cp);
      mm += w / metric_norm(gt, h.quotient * cm);
    }
    return std::make_pair(fr.lift(mp * cp), fr.lift(mm * cm));
  };
  const auto chart = detail::point_chart_ptr(flow.model());
  const FieldHandle yp = FieldHandle::numeric(
      chart, [sections](const Point& p) { auto [a, b] = sections(p); return Vec4(a + b); }, opt.step, "Z+ + Z-");
  const FieldHandle ym = FieldHandle::numeric(
      chart, [sections](const Point& p) { auto [a, b] = sections(p); return Vec4(a - b); }, opt.step, "Z+ - Z-");

  BiEngelConstruction out;
  out.options = opt;
  out.c_hat = cert.c_hat;
  out.plus = {"D+", {flow.field(), yp}};
  out.minus = {"D-", {flow.field(), ym}};
  std::vector<Point> grid;
  for (const auto& s : splitting.samples) grid.push_back(s.point);
  out.engel_plus = is_engel(flow.model(), out.plus, grid, opt.engel_tol);
  out.engel_minus = is_engel(flow.model(), out.minus, grid, opt.engel_tol);
  for (const auto* rep : {&out.engel_plus, &out.engel_minus}) {
    if (rep->pass) continue;
    const auto& s = splitting.samples[rep->worst_sample];
    const auto [ap, am] = alpha_functions(flow, s, g, 1e-4);
    throw CheckFailed("constructed " + std::string(rep == &out.engel_plus ? "D+" : "D-") +
                      " is not Engel at sample " + std::to_string(rep->worst_sample) + " (" + rep->failed_stage +
                      " margin " + format_double(rep->worst_margin) + ", local rate gap " + format_double(am - ap) + ")");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rotation profile

struct RotationProfile {
  Point seed;
  std::vector<double> times;
  /// Unwrapped angle of [Dφ_{-t} D(φ_t p)] in the quotient frame at p.
  std::vector<double> theta;
  /// Variation accumulated from t = 0 out to each time.
  std::vector<double> variation;
  double tv_forward = 0.0;
  double tv_backward = 0.0;
  double total_variation = 0.0;
  bool monotone = true;
  bool full_turn = false;
  bool returns = false;
  std::optional<double> first_return;
};

struct RotationOptions {
  double T = 20.0;
  double step = 0.05;
  /// Largest accepted angle jump between consecutive times before halving.
  double max_jump = kPi / 4;
  double min_step = 1e-5;
};

inline RotationProfile rotation_profile(const Flow& flow, const DistributionSpec& d, const Point& p,
                                        const RotationOptions& opt = {}) {
  if (!(opt.T >= 0.0) || !(opt.step > 0.0)) throw UsageError("rotation profile needs T >= 0 and step > 0");
  if (d.rank() != 2) throw UsageError("rotation profile needs a rank-2 distribution");
  const Mat4X w = flow.field()(p);
  const double a = angle_to_span(w.col(0), d.checked_frame(p));
  if (a > 1e-6) throw CheckFailed("plane does not contain W at the seed point (angle " + format_double(a) + ")");
  const ProjectivePoint l0 = plane_line(d, quotient_frame(flow.model(), flow.field(), p));

  RotationProfile prof;
  prof.seed = p;
  std::vector<std::vector<std::pair<double, double>>> sides;
  for (double sign : {1.0, -1.0}) {
    std::vector<double> times;
    const int n = static_cast<int>(std::ceil(opt.T / opt.step - 1e-9));
    for (int k = 1; k <= n; ++k) times.push_back(sign * std::min(opt.T, k * opt.step));
    std::vector<std::pair<double, double>> pts{{0.0, l0.angle()}};
    if (!times.empty()) {
      const auto hs = holonomy_series(flow, p, times);
      double prev_t = 0.0;
      ProjectivePoint prev = l0;
      double prev_unwrapped = l0.angle();
      // Recursive halving between two accepted neighbours.
      std::function<void(double, const ProjectivePoint&, double, double, const ProjectivePoint&)> refine =
          [&](double ta, const ProjectivePoint& la, double ua, double tb, const ProjectivePoint& lb) {
            const double jump = projective_difference(la, lb);
            if (std::abs(jump) < opt.max_jump) {
              pts.emplace_back(tb, ua + jump);
              prev_unwrapped = ua + jump;
              return;
            }
            if (std::abs(tb - ta) / 2 < opt.min_step) {
              throw InconclusiveError("rotation unwrapping ambiguous near t = " + format_double(tb) +
                                      "; refine the step below " + format_double(opt.min_step));
            }
            const double tm = 0.5 * (ta + tb);
            const ProjectivePoint lm = transported_line(flow, d, p, tm);
            refine(ta, la, ua, tm, lm);
            refine(tm, lm, prev_unwrapped, tb, lb);
          };
      for (const auto& h : hs) {
        const ProjectivePoint l = transported_line(d, h);
        refine(prev_t, prev, prev_unwrapped, h.t, l);
        prev_t = h.t;
        prev = l;
      }
    }
    sides.push_back(std::move(pts));
  }
  const double theta0 = l0.angle();
  int sign_seen = 0;
  auto scan = [&](const std::vector<std::pair<double, double>>& pts, double& tv, std::vector<double>& var) {
    var.assign(pts.size(), 0.0);
    for (std::size_t i = 1; i < pts.size(); ++i) {
      const double dth = pts[i].second - pts[i - 1].second;
      tv += std::abs(dth);
      var[i] = tv;
      const int sg = (dth > 0.0) - (dth < 0.0);
      if (sg != 0) {
        // Backward side runs in decreasing t, so flip to compare with the forward side.
        const int oriented = pts[i].first < 0.0 ? -sg : sg;
        if (sign_seen == 0) sign_seen = oriented;
        else if (oriented != sign_seen) prof.monotone = false;
      }
      const double dev = std::abs(pts[i].second - theta0);
      if (dev >= kPi - 1e-9) {
        prof.returns = true;
        const double prev_dev = std::abs(pts[i - 1].second - theta0);
        const double frac = prev_dev >= kPi - 1e-9 ? 0.0 : (kPi - prev_dev) / (dev - prev_dev);
        const double tr = pts[i - 1].first + frac * (pts[i].first - pts[i - 1].first);
        if (!prof.first_return || std::abs(tr) < std::abs(*prof.first_return)) prof.first_return = tr;
      }
    }
  };
  std::vector<double> var_f, var_b;
  scan(sides[0], prof.tv_forward, var_f);
  scan(sides[1], prof.tv_backward, var_b);
  for (std::size_t i = sides[1].size(); i-- > 1;) {
    prof.times.push_back(sides[1][i].first);
    prof.theta.push_back(sides[1][i].second);
    prof.variation.push_back(var_b[i]);
  }
  for (std::size_t i = 0; i < sides[0].size(); ++i) {
    prof.times.push_back(sides[0][i].first);
    prof.theta.push_back(sides[0][i].second);
    prof.variation.push_back(var_f[i]);
  }
  prof.total_variation = std::max(prof.tv_forward, prof.tv_backward);
  prof.full_turn = prof.total_variation >= kPi - 1e-9;
  return prof;
}

inline void write_rotation_csv(std::ostream& os, const RotationProfile& prof) {
  os << "t,theta,total_variation\n";
  for (std::size_t i = 0; i < prof.times.size(); ++i) {
    os << format_double(prof.times[i]) << ',' << format_double(prof.theta[i]) << ','
       << format_double(prof.variation[i]) << '\n';
  }
}

}  // namespace engel_lab
