#pragma once

#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "models.hpp"

namespace engel_lab {

// ---------------------------------------------------------------------------
// Fixed-step RK4 on a chart

struct VariationalState {
  Vec4 x = Vec4::Zero();
  Mat4 J = Mat4::Identity();
  double t = 0.0;
};

namespace detail {

inline void check_inside(const Chart& chart, const Vec4& x, double t) {
  if (!x.allFinite() || !chart.contains(x)) {
    std::ostringstream os;
    os << "trajectory leaves the valid region near t = " << t;
    throw DomainError(os.str());
  }
}

inline double step_count(double t, double step, int& n) {
  if (!(std::abs(step) > 0.0) || !std::isfinite(step)) throw UsageError("integration step must be positive");
  const double h = std::abs(step);
  n = static_cast<int>(std::ceil(std::abs(t) / h - 1e-9));
  return h;
}

}  // namespace detail

/// Advance (x, J) by dt with RK4 on x' = W(x), J' = DW(x) J; the last step is shortened.
inline void advance(const FieldHandle& w, const Chart& chart, VariationalState& s, double dt, double step,
                    bool with_jacobian = true) {
  if (dt == 0.0) return;
  int n = 0;
  const double h = detail::step_count(dt, step, n);
  const double dir = dt > 0.0 ? 1.0 : -1.0;
  double remaining = std::abs(dt);
  for (int i = 0; i < n && remaining > 0.0; ++i) {
    const double hh = dir * std::min(h, remaining);
    remaining -= std::min(h, remaining);
    detail::check_inside(chart, s.x, s.t);
    const Point p1(s.x);
    const Vec4 k1 = w(p1);
    const Vec4 x2 = s.x + 0.5 * hh * k1;
    detail::check_inside(chart, x2, s.t + 0.5 * hh);
    const Point p2(x2);
    const Vec4 k2 = w(p2);
    const Vec4 x3 = s.x + 0.5 * hh * k2;
    detail::check_inside(chart, x3, s.t + 0.5 * hh);
    const Point p3(x3);
    const Vec4 k3 = w(p3);
    const Vec4 x4 = s.x + hh * k3;
    detail::check_inside(chart, x4, s.t + hh);
    const Point p4(x4);
    const Vec4 k4 = w(p4);
    if (with_jacobian) {
      const Mat4 a1 = w.jacobian(p1);
      const Mat4 L1 = a1 * s.J;
      const Mat4 a2 = w.jacobian(p2);
      const Mat4 L2 = a2 * (s.J + 0.5 * hh * L1);
      const Mat4 a3 = w.jacobian(p3);
      const Mat4 L3 = a3 * (s.J + 0.5 * hh * L2);
      const Mat4 a4 = w.jacobian(p4);
      const Mat4 L4 = a4 * (s.J + hh * L3);
      s.J += hh / 6.0 * (L1 + 2.0 * L2 + 2.0 * L3 + L4);
    }
    s.x += hh / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    s.t += hh;
  }
  detail::check_inside(chart, s.x, s.t);
}

/// RK4 flow of a coordinate field on its chart.
inline Point integrate_flow(const FieldHandle& w, const Chart& chart, const Point& p, double t, double step) {
  VariationalState s;
  s.x = p.coords();
  advance(w, chart, s, t, step, false);
  return chart.point(s.x);
}

// ---------------------------------------------------------------------------
// Model-level flow

struct FlowOptions {
  double step = 1e-3;
  /// Use the closed-form Lie backend when the model and field allow it.
  bool exact = true;
};

/// Flow of a field W on a model, with exact or numeric linearization.
class Flow {
 public:
  Flow(const ManifoldModel& model, FieldHandle w, FlowOptions opt = {})
      : model_(std::make_shared<ManifoldModel>(model)), w_(std::move(w)), opt_(opt) {
    if (!(opt_.step > 0.0) || !std::isfinite(opt_.step)) throw UsageError("integration step must be positive");
    coord_ = model_->coordinate_field(w_);
    if (w_.is_invariant()) {
      const FieldHandle& f = model_->flow_field();
      if (f.is_invariant() && model_->exact_point_flow) {
        const Vec4 a = w_.constant_components();
        const Vec4 b = f.constant_components();
        const double s = a.dot(b) / b.squaredNorm();
        if ((a - s * b).norm() <= 1e-15 * a.norm()) point_scale_ = s;
      }
    }
  }

  Flow(const ManifoldModel& model, FlowOptions opt = {}) : Flow(model, model.flow_field(), opt) {}

  const ManifoldModel& model() const { return *model_; }
  const FieldHandle& field() const { return w_; }
  const FlowOptions& options() const { return opt_; }
  bool exact() const { return opt_.exact && model_->is_algebraic() && w_.is_invariant(); }
  const Chart& chart() const { return model_->point_chart(); }

  Flow negated() const { return Flow(*model_, -w_, opt_); }
  Flow with_options(FlowOptions o) const { return Flow(*model_, w_, o); }

  Point operator()(const Point& p, double t) const {
    if (t == 0.0) return p;
    if (opt_.exact && point_scale_) return chart().point(model_->exact_point_flow(p.coords(), *point_scale_ * t));
    return integrate_flow(coord_, chart(), p, t, opt_.step);
  }

  /// Dφ_t from T_p to T_{φ_t p} in model components; also reports the target.
  Mat4 pushforward(const Point& p, double t, Point* target = nullptr) const {
    if (exact()) {
      if (target) *target = (*this)(p, t);
      return exact_holonomy(*model_, w_, t);
    }
    VariationalState s;
    s.x = p.coords();
    advance(coord_, chart(), s, t, opt_.step, true);
    const Point q = chart().point(s.x);
    if (target) *target = q;
    return to_model_components(p, q, s.J);
  }

  /// Pushforwards at the given times, all of one sign, integrated in a single sweep.
  std::vector<std::pair<Point, Mat4>> pushforward_series(const Point& p, const std::vector<double>& times) const {
    std::vector<std::pair<Point, Mat4>> out;
    out.reserve(times.size());
    if (exact()) {
      for (double t : times) out.emplace_back((*this)(p, t), exact_holonomy(*model_, w_, t));
      return out;
    }
    VariationalState s;
    s.x = p.coords();
    for (double t : times) {
      if ((t > 0.0 && s.t < 0.0) || (t < 0.0 && s.t > 0.0) || std::abs(t) < std::abs(s.t)) throw UsageError("series times must move away from 0 monotonically");
      advance(coord_, chart(), s, t - s.t, opt_.step, true);
      s.t = t;
      const Point q = chart().point(s.x);
      out.emplace_back(q, to_model_components(p, q, s.J));
    }
    return out;
  }

 private:
  Mat4 to_model_components(const Point& p, const Point& q, const Mat4& j) const {
    if (!model_->is_algebraic()) return j;
    const Mat4 fp = model_->frame_matrix(p);
    const Mat4 fq = model_->frame_matrix(q);
    return fq.partialPivLu().solve(j * fp);
  }

  std::shared_ptr<const ManifoldModel> model_;
  FieldHandle w_;
  FieldHandle coord_;
  FlowOptions opt_;
  std::optional<double> point_scale_;
};

// ---------------------------------------------------------------------------
// Quotient E/W

/// Two vectors of E(p) transverse to W(p) plus W(p); coordinates are taken mod W.
struct QuotientFrame {
  Point base;
  Vec4 q1 = Vec4::Zero();
  Vec4 q2 = Vec4::Zero();
  Vec4 w = Vec4::Zero();

  Eigen::Matrix<double, 4, 3> matrix() const {
    Eigen::Matrix<double, 4, 3> m;
    m << q1, q2, w;
    return m;
  }

  /// Coordinates (a, b) with v = a q1 + b q2 + c w (least squares for v outside E).
  Vec2 coordinates(const Vec4& v) const {
    const Eigen::Matrix<double, 4, 3> m = matrix();
    const Vec3 c = m.colPivHouseholderQr().solve(v);
    return c.head<2>();
  }

  /// Norm of the part of v not in span{q1, q2, w}, relative to |v|.
  double residual(const Vec4& v) const {
    const Eigen::Matrix<double, 4, 3> m = matrix();
    const Vec3 c = m.colPivHouseholderQr().solve(v);
    const double n = v.norm();
    return n == 0.0 ? 0.0 : (m * c - v).norm() / n;
  }

  Vec4 lift(const Vec2& c) const { return c(0) * q1 + c(1) * q2; }
};

inline QuotientFrame quotient_frame(const ManifoldModel& model, const FieldHandle& w, const Point& p) {
  QuotientFrame f;
  f.base = p;
  f.q1 = model.field(model.quotient_fields[0])(p);
  f.q2 = model.field(model.quotient_fields[1])(p);
  f.w = w(p);
  if (numerical_rank((Mat4X(4, 3) << f.q1, f.q2, f.w).finished(), kDefaultRankTol).rank != 3) {
    throw RankError("quotient frame degenerate at the given point");
  }
  return f;
}

/// Linearized flow between two points with its compression to E/W.
struct HolonomyMap {
  Point source;
  Point target;
  double t = 0.0;
  /// Pushforward Dφ_t : T_source -> T_target in model components.
  Mat4 full = Mat4::Identity();
  /// Dφ_t on E/W in the quotient frames at source (columns) and target (rows).
  Mat2 quotient = Mat2::Identity();
  bool exact = false;
  QuotientFrame source_frame;
  QuotientFrame target_frame;
};

inline HolonomyMap make_holonomy(const Flow& flow, const Point& p, double t, const Point& q, const Mat4& full) {
  HolonomyMap h;
  h.source = p;
  h.target = q;
  h.t = t;
  h.full = full;
  h.exact = flow.exact();
  h.source_frame = quotient_frame(flow.model(), flow.field(), p);
  h.target_frame = quotient_frame(flow.model(), flow.field(), q);
  h.quotient.col(0) = h.target_frame.coordinates(full * h.source_frame.q1);
  h.quotient.col(1) = h.target_frame.coordinates(full * h.source_frame.q2);
  return h;
}

inline HolonomyMap linearized_holonomy(const Flow& flow, const Point& p, double t) {
  Point q;
  const Mat4 full = flow.pushforward(p, t, &q);
  return make_holonomy(flow, p, t, q, full);
}

/// Holonomy maps at the given one-signed monotone times from a single integration.
inline std::vector<HolonomyMap> holonomy_series(const Flow& flow, const Point& p, const std::vector<double>& times) {
  const auto raw = flow.pushforward_series(p, times);
  std::vector<HolonomyMap> out;
  out.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) out.push_back(make_holonomy(flow, p, times[i], raw[i].first, raw[i].second));
  return out;
}

/// Largest relative component of Dφ_t(E(source)) outside E(target).
inline double e_invariance_residual(const HolonomyMap& h, const DistributionSpec& e) {
  const Mat4X src = e.evaluate(h.source);
  const Mat4X dst = orthonormal_basis(e.evaluate(h.target));
  double worst = 0.0;
  for (Eigen::Index i = 0; i < src.cols(); ++i) {
    const Vec4 v = h.full * src.col(i);
    const Vec4 perp = v - dst * (dst.transpose() * v);
    worst = std::max(worst, perp.norm() / v.norm());
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Projective line

/// A line through 0 in a 2-frame, stored as its angle in [0, pi).
class ProjectivePoint {
 public:
  ProjectivePoint() = default;
  explicit ProjectivePoint(double angle) : angle_(normalize(angle)) {}

  static ProjectivePoint from_vector(const Vec2& v) {
    if (!(v.norm() > 0.0) || !v.allFinite()) throw DomainError("zero or non-finite direction");
    return ProjectivePoint(std::atan2(v(1), v(0)));
  }

  /// The point [x : 1] of the affine chart.
  static ProjectivePoint from_affine(double x) { return from_vector(Vec2(x, 1.0)); }

  double angle() const { return angle_; }
  Vec2 direction() const { return Vec2(std::cos(angle_), std::sin(angle_)); }

  static double normalize(double a) {
    if (!std::isfinite(a)) throw DomainError("non-finite projective angle");
    double r = std::fmod(a, kPi);
    if (r < 0.0) r += kPi;
    if (r >= kPi) r -= kPi;
    return r;
  }

 private:
  double angle_ = 0.0;
};

/// Signed angular distance from a to b, in (-pi/2, pi/2].
inline double projective_difference(const ProjectivePoint& a, const ProjectivePoint& b) {
  double d = b.angle() - a.angle();
  while (d > kPi / 2) d -= kPi;
  while (d <= -kPi / 2) d += kPi;
  return d;
}

inline double projective_distance(const ProjectivePoint& a, const ProjectivePoint& b) {
  return std::abs(projective_difference(a, b));
}

inline ProjectivePoint act_on_projective(const Mat2& m, const ProjectivePoint& x) {
  if (!m.allFinite() || m.determinant() == 0.0) throw DomainError("singular quotient block");
  return ProjectivePoint::from_vector(m * x.direction());
}

inline ProjectivePoint act_on_projective(const HolonomyMap& h, const ProjectivePoint& x) {
  return act_on_projective(h.quotient, x);
}

/// Inverse action, via the adjugate so that badly conditioned blocks stay accurate.
inline ProjectivePoint pull_back(const Mat2& m, const ProjectivePoint& x) {
  if (!m.allFinite() || m.determinant() == 0.0) throw DomainError("singular quotient block");
  Mat2 adj;
  adj << m(1, 1), -m(0, 1), -m(1, 0), m(0, 0);
  Vec2 v = adj * x.direction();
  if (m.determinant() < 0.0) v = -v;
  return ProjectivePoint::from_vector(v);
}

inline ProjectivePoint pull_back(const HolonomyMap& h, const ProjectivePoint& x) { return pull_back(h.quotient, x); }

inline constexpr double kDistinctTol = 1e-12;

/// [x1, x2, x3, z]: the homography sending x1, x2, x3 to inf, 0, 1, evaluated at z.
inline double cross_ratio(const ProjectivePoint& x1, const ProjectivePoint& x2, const ProjectivePoint& x3,
                          const ProjectivePoint& z, double tol = kDistinctTol) {
  if (projective_distance(x1, x2) <= tol || projective_distance(x1, x3) <= tol || projective_distance(x2, x3) <= tol) {
    throw UsageError("cross ratio needs three distinct base points");
  }
  // det of unit representatives: det(u_a, u_b) = sin(theta_b - theta_a).
  auto d = [](const ProjectivePoint& a, const ProjectivePoint& b) { return std::sin(b.angle() - a.angle()); };
  const double den = d(z, x1) * d(x3, x2);
  if (z.angle() == x1.angle() || den == 0.0) return std::numeric_limits<double>::infinity();
  return d(x3, x1) * d(z, x2) / den;
}

/// |[x,a',b',y] - [x,a,b,y][a,a',b',b][a,a',b,y][x,a,b',b]|.
inline double chain_relation_residual(const ProjectivePoint& x, const ProjectivePoint& a, const ProjectivePoint& a2,
                                      const ProjectivePoint& b2, const ProjectivePoint& b, const ProjectivePoint& y,
                                      double tol = kDistinctTol) {
  const std::array<ProjectivePoint, 6> pts{x, a, a2, b2, b, y};
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = i + 1; j < 6; ++j)
      if (projective_distance(pts[i], pts[j]) <= tol) throw UsageError("chain relation needs six distinct points");
  const double lhs = cross_ratio(x, a2, b2, y);
  const double f1 = cross_ratio(x, a, b, y);
  const double f2 = cross_ratio(a, a2, b2, b);
  const double f3 = cross_ratio(a, a2, b, y);
  const double f4 = cross_ratio(x, a, b2, b);
  for (double f : {lhs, f1, f2, f3, f4})
    if (!std::isfinite(f)) throw UsageError("chain relation factor is infinite");
  return std::abs(lhs - f1 * f2 * f3 * f4);
}

/// True iff the points are met in the given order when going once around [0, pi)
/// counter-clockwise from the first.
inline bool is_cyclically_ordered(const std::vector<ProjectivePoint>& pts, double tol = kDistinctTol) {
  if (pts.size() < 3) throw UsageError("cyclic order needs at least three points");
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j)
      if (projective_distance(pts[i], pts[j]) <= tol) throw UsageError("cyclic order of duplicate points");
  double prev = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const double off = ProjectivePoint::normalize(pts[i].angle() - pts[0].angle());
    if (off <= prev) return false;
    prev = off;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Plane fields on P(E/W)

/// The line D(p)/W(p) in the quotient frame at p.
inline ProjectivePoint plane_line(const DistributionSpec& d, const QuotientFrame& frame) {
  const Mat4X v = d.evaluate(frame.base);
  Mat2 c;
  c.col(0) = frame.coordinates(v.col(0));
  c.col(1) = frame.coordinates(v.col(1));
  Eigen::JacobiSVD<Mat2> svd(c, Eigen::ComputeFullU);
  const auto s = svd.singularValues();
  if (!(s(0) > 0.0) || s(1) > 1e-8 * s(0)) throw RankError("plane is not a line modulo W");
  return ProjectivePoint::from_vector(svd.matrixU().col(0));
}

/// d(t) = [Dφ_{-t}(D(φ_t p))] in P(E(p)/W(p)).
inline ProjectivePoint transported_line(const DistributionSpec& d, const HolonomyMap& h) {
  return pull_back(h, plane_line(d, h.target_frame));
}

inline ProjectivePoint transported_line(const Flow& flow, const DistributionSpec& d, const Point& p, double t) {
  return transported_line(d, linearized_holonomy(flow, p, t));
}

// ---------------------------------------------------------------------------
// CSV export

struct CrossRatioRow {
  double t = 0.0;
  double theta_plus = 0.0;
  double theta_minus = 0.0;
  double cr = 0.0;
};

inline std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_cross_ratio_csv(std::ostream& os, const std::vector<CrossRatioRow>& rows) {
  os << "t,theta_plus,theta_minus,cr\n";
  for (const auto& r : rows) {
    os << format_double(r.t) << ',' << format_double(r.theta_plus) << ',' << format_double(r.theta_minus) << ','
       << format_double(r.cr) << '\n';
  }
}

/// (t, d+(t), d-(t), [d+(0), d+(t), d-(t), d-(0)]) along the orbit of p for t = 0, dt, ..., T.
inline std::vector<CrossRatioRow> cross_ratio_series(const Flow& flow, const DistributionSpec& dp,
                                                     const DistributionSpec& dm, const Point& p, double T, double dt) {
  if (!(dt > 0.0) || T < 0.0) throw UsageError("series needs dt > 0 and T >= 0");
  std::vector<double> times;
  const int n = static_cast<int>(std::floor(T / dt + 1e-9));
  for (int i = 1; i <= n; ++i) times.push_back(i * dt);
  const QuotientFrame f0 = quotient_frame(flow.model(), flow.field(), p);
  const ProjectivePoint p0 = plane_line(dp, f0);
  const ProjectivePoint m0 = plane_line(dm, f0);
  std::vector<CrossRatioRow> rows;
  rows.push_back({0.0, p0.angle(), m0.angle(), 1.0});
  // At t = 0 the four points are p0, p0, m0, m0; the ratio degenerates to 1 by continuity.
  for (const auto& h : holonomy_series(flow, p, times)) {
    const ProjectivePoint a = transported_line(dp, h);
    const ProjectivePoint b = transported_line(dm, h);
    rows.push_back({h.t, a.angle(), b.angle(), cross_ratio(p0, a, b, m0)});
  }
  return rows;
}

}  // namespace engel_lab
