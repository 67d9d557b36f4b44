#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dynamics.hpp"
#include "parallel.hpp"

namespace engel_lab {

/// SPD form on E/W in the quotient frame at each point.
using QuotientMetric = std::function<Mat2(const Point&)>;

inline QuotientMetric identity_metric() {
  return [](const Point&) { return Mat2(Mat2::Identity()); };
}

inline double metric_norm(const Mat2& g, const Vec2& v) { return std::sqrt(v.dot(g * v)); }

struct SplittingSample {
  Point point;
  ProjectivePoint e_plus;
  ProjectivePoint e_minus;
  /// Angular distance between the two forward (resp. backward) surrogates at the source fiber.
  double gap_forward = 0.0;
  double gap_backward = 0.0;
  /// Checkpoint times with the forward gap at each (plane-limit method).
  std::vector<double> times;
  std::vector<double> gaps;
};

struct SplittingEstimate {
  std::vector<SplittingSample> samples;
  double T = 0.0;
  std::string method;
  double step = 0.0;
  bool exact = false;
  /// Recomputes the splitting at an arbitrary point with the same parameters.
  std::function<SplittingSample(const Point&)> estimator;
};

struct SplittingOptions {
  double T = 20.0;
  int checkpoints = 80;
  /// Gaps below this are beneath double resolution; nesting is not checked there.
  double resolution = 1e-12;
  /// Planes closer than this at a checkpoint count as coinciding.
  double coincidence_tol = 1e-10;
  /// Seed agreement and separation threshold of the power-direction method.
  double agreement_tol = 1e-6;
};

namespace detail {

inline double vector_gap(const Vec2& a, const Vec2& b) {
  const double det = a(0) * b(1) - a(1) * b(0);
  return std::abs(det) / (a.norm() * b.norm());
}

inline Vec2 adjugate_apply(const Mat2& m, const Vec2& v) {
  Vec2 out(m(1, 1) * v(0) - m(0, 1) * v(1), -m(1, 0) * v(0) + m(0, 0) * v(1));
  if (m.determinant() < 0.0) out = -out;
  return out;
}

/// x lies in the closed arc from a to b, counter-clockwise when ccw is set.
inline bool in_arc(const ProjectivePoint& a, const ProjectivePoint& b, const ProjectivePoint& x, bool ccw, double tol) {
  const ProjectivePoint& from = ccw ? a : b;
  const ProjectivePoint& to = ccw ? b : a;
  const double len = ProjectivePoint::normalize(to.angle() - from.angle());
  double off = ProjectivePoint::normalize(x.angle() - from.angle());
  if (off > kPi - tol) off -= kPi;
  return off >= -tol && off <= len + tol;
}

struct Transported {
  double t;
  Vec2 plus;
  Vec2 minus;
};

// d±(t) as vectors in the source quotient frame for each checkpoint of one sign.
inline std::vector<Transported> transport_planes(const Flow& flow, const DistributionSpec& dp, const DistributionSpec& dm,
                                                 const Point& p, const std::vector<double>& times, double coincidence_tol) {
  std::vector<Transported> out;
  for (const auto& h : holonomy_series(flow, p, times)) {
    const ProjectivePoint a = plane_line(dp, h.target_frame);
    const ProjectivePoint b = plane_line(dm, h.target_frame);
    if (projective_distance(a, b) <= coincidence_tol) {
      throw CheckFailed("D+ and D- coincide along the orbit at t = " + format_double(h.t));
    }
    out.push_back({h.t, adjugate_apply(h.quotient, a.direction()), adjugate_apply(h.quotient, b.direction())});
  }
  return out;
}

// Nested-interval check for one time direction; returns the time of the first violation.
inline std::optional<double> trapping_violation(const ProjectivePoint& a0, const ProjectivePoint& b0,
                                                const std::vector<Transported>& seq, double resolution) {
  ProjectivePoint a = a0, b = b0;
  std::optional<bool> ccw;
  double gap = projective_distance(a0, b0);
  for (const auto& s : seq) {
    if (gap <= resolution) break;
    const ProjectivePoint na = ProjectivePoint::from_vector(s.plus);
    const ProjectivePoint nb = ProjectivePoint::from_vector(s.minus);
    const double tol = 1e-13;
    if (!ccw) {
      if (in_arc(a, b, na, true, tol) && in_arc(a, b, nb, true, tol)) {
        ccw = true;
      } else if (in_arc(a, b, na, false, tol) && in_arc(a, b, nb, false, tol)) {
        ccw = false;
      } else {
        return s.t;
      }
    } else if (!in_arc(a, b, na, *ccw, tol) || !in_arc(a, b, nb, *ccw, tol)) {
      return s.t;
    }
    a = na;
    b = nb;
    gap = vector_gap(s.plus, s.minus);
  }
  return std::nullopt;
}

inline std::vector<double> checkpoint_times(double T, int n, double sign) {
  std::vector<double> times;
  for (int k = 1; k <= n; ++k) times.push_back(sign * T * k / n);
  return times;
}

}  // namespace detail

/// Plane-limit surrogates: E- = d+(T), E+ = d-(-T), with nesting of the
/// intervals [d+(t), d-(t)] checked at every checkpoint.
inline SplittingSample estimate_splitting_from_planes(const Flow& flow, const DistributionSpec& dp,
                                                      const DistributionSpec& dm, const Point& p,
                                                      const SplittingOptions& opt = {}) {
  if (opt.T < 0.0 || opt.checkpoints < 1) throw UsageError("splitting needs T >= 0 and at least one checkpoint");
  const QuotientFrame f0 = quotient_frame(flow.model(), flow.field(), p);
  const ProjectivePoint a0 = plane_line(dp, f0);
  const ProjectivePoint b0 = plane_line(dm, f0);
  if (projective_distance(a0, b0) <= opt.coincidence_tol) throw CheckFailed("D+ and D- coincide along the orbit at t = 0");
  SplittingSample s;
  s.point = p;
  if (opt.T == 0.0) {
    s.e_minus = a0;
    s.e_plus = b0;
    s.gap_forward = s.gap_backward = projective_distance(a0, b0);
    return s;
  }
  const auto fwd = detail::transport_planes(flow, dp, dm, p, detail::checkpoint_times(opt.T, opt.checkpoints, 1.0), opt.coincidence_tol);
  const auto bwd = detail::transport_planes(flow, dp, dm, p, detail::checkpoint_times(opt.T, opt.checkpoints, -1.0), opt.coincidence_tol);
  for (const auto* seq : {&fwd, &bwd}) {
    if (const auto bad = detail::trapping_violation(a0, b0, *seq, opt.resolution)) {
      throw CheckFailed("not bi-Engel along orbit: nesting of d+(t), d-(t) fails at t = " + format_double(*bad));
    }
  }
  s.e_minus = ProjectivePoint::from_vector(fwd.back().plus);
  s.e_plus = ProjectivePoint::from_vector(bwd.back().minus);
  s.gap_forward = detail::vector_gap(fwd.back().plus, fwd.back().minus);
  s.gap_backward = detail::vector_gap(bwd.back().plus, bwd.back().minus);
  for (const auto& tr : fwd) {
    s.times.push_back(tr.t);
    s.gaps.push_back(detail::vector_gap(tr.plus, tr.minus));
  }
  return s;
}

/// Power-direction surrogates: E+ = image at p of lines pushed forward from φ_{-T}(p),
/// E- = image of lines pulled back from φ_T(p); three seeds must agree.
inline SplittingSample estimate_splitting_from_flow(const Flow& flow, const Point& p, const SplittingOptions& opt = {}) {
  if (!(opt.T > 0.0)) throw UsageError("power-direction splitting needs T > 0");
  const HolonomyMap fwd = linearized_holonomy(flow, p, opt.T);
  const HolonomyMap bwd = linearized_holonomy(flow, p, -opt.T);
  const double seeds[3] = {kPi / 4, kPi / 4 + kPi / 3, kPi / 4 + 2 * kPi / 3};
  auto image = [&](const Mat2& q, double& spread) {
    std::vector<ProjectivePoint> lines;
    for (double a : seeds) lines.push_back(ProjectivePoint::from_vector(detail::adjugate_apply(q, ProjectivePoint(a).direction())));
    spread = 0.0;
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = i + 1; j < 3; ++j) spread = std::max(spread, projective_distance(lines[i], lines[j]));
    return lines[0];
  };
  SplittingSample s;
  s.point = p;
  s.e_plus = image(bwd.quotient, s.gap_backward);
  s.e_minus = image(fwd.quotient, s.gap_forward);
  if (s.gap_forward > opt.agreement_tol || s.gap_backward > opt.agreement_tol) {
    throw InconclusiveError("no dominance detected: seed lines disagree by " +
                            format_double(std::max(s.gap_forward, s.gap_backward)) + " rad at T = " + format_double(opt.T));
  }
  if (projective_distance(s.e_plus, s.e_minus) <= opt.agreement_tol) {
    throw InconclusiveError("no dominance detected: forward and backward limits do not separate");
  }
  return s;
}

inline SplittingEstimate splitting_from_planes(const Flow& flow, const DistributionSpec& dp, const DistributionSpec& dm,
                                               const std::vector<Point>& grid, const SplittingOptions& opt = {}) {
  SplittingEstimate est;
  est.T = opt.T;
  est.method = "plane-limit";
  est.step = flow.options().step;
  est.exact = flow.exact();
  est.estimator = [flow, dp, dm, opt](const Point& q) { return estimate_splitting_from_planes(flow, dp, dm, q, opt); };
  est.samples = parallel_map<SplittingSample>(grid.size(), [&](std::size_t i) { return est.estimator(grid[i]); });
  return est;
}

inline SplittingEstimate splitting_from_flow(const Flow& flow, const std::vector<Point>& grid,
                                             const SplittingOptions& opt = {}) {
  SplittingEstimate est;
  est.T = opt.T;
  est.method = "power-direction";
  est.step = flow.options().step;
  est.exact = flow.exact();
  est.estimator = [flow, opt](const Point& q) { return estimate_splitting_from_flow(flow, q, opt); };
  est.samples = parallel_map<SplittingSample>(grid.size(), [&](std::size_t i) { return est.estimator(grid[i]); });
  return est;
}

/// Same splitting with E+ and E- exchanged.
inline SplittingEstimate swapped(const SplittingEstimate& s) {
  SplittingEstimate out = s;
  for (auto& x : out.samples) std::swap(x.e_plus, x.e_minus);
  if (s.estimator) {
    out.estimator = [f = s.estimator](const Point& q) {
      auto x = f(q);
      std::swap(x.e_plus, x.e_minus);
      return x;
    };
  }
  return out;
}

/// Both lines rotated by delta, at the samples and in the estimator.
inline SplittingEstimate perturbed(const SplittingEstimate& s, double delta) {
  SplittingEstimate out = s;
  auto shift = [delta](SplittingSample x) {
    x.e_plus = ProjectivePoint(x.e_plus.angle() + delta);
    x.e_minus = ProjectivePoint(x.e_minus.angle() + delta);
    return x;
  };
  for (auto& x : out.samples) x = shift(x);
  if (s.estimator) out.estimator = [f = s.estimator, shift](const Point& q) { return shift(f(q)); };
  return out;
}

/// Least-squares slope of log(gap) against t over the checkpoints with t in [t0, t1].
inline double gap_decay_rate(const SplittingSample& s, double t0, double t1) {
  double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < s.times.size(); ++i) {
    const double t = s.times[i];
    if (t < t0 - 1e-12 || t > t1 + 1e-12 || !(s.gaps[i] > 0.0)) continue;
    const double y = std::log(s.gaps[i]);
    n += 1;
    sx += t;
    sy += y;
    sxx += t * t;
    sxy += t * y;
  }
  if (n < 2) throw UsageError("decay fit needs at least two checkpoints with positive gap");
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// ---------------------------------------------------------------------------
// Certificates

struct CertificateOptions {
  double T = 20.0;
  double dt = 0.25;
  double safety = 1e-6;
  /// Step of the central difference for the α± route.
  double alpha_step = 1e-4;
  double alpha_tol = 1e-3;
};

struct GrowthSeries {
  std::vector<double> t;
  std::vector<double> log_plus;
  std::vector<double> log_minus;
};

struct HyperbolicityCertificate {
  bool valid = false;
  std::string reason;
  double c_hat = 0.0;
  double K_hat = 0.0;
  double T = 0.0;
  double dt = 0.0;
  double step = 0.0;
  bool exact = false;
  std::string method;
  std::vector<Point> grid;
  /// Per sample: min over checkpoints of log(λ+/λ-) - log K_hat - c_hat t, or,
  /// when refused, min over checkpoints of log(λ+/λ-).
  std::vector<double> margins;
  std::size_t worst_sample = 0;
  std::optional<std::pair<double, double>> strong_flags;
  double b_plus = 0.0;
  double b_minus = 0.0;
  double alpha_gap_inf = 0.0;
  bool alpha_consistent = false;
  std::vector<GrowthSeries> series;
};

namespace detail {

inline double min_slope(const std::vector<double>& t, const std::vector<double>& y) {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < t.size(); ++i)
    for (std::size_t j = i + 1; j < t.size(); ++j) m = std::min(m, (y[j] - y[i]) / (t[j] - t[i]));
  return m;
}

inline std::pair<double, double> log_growth(const Mat2& q, const Vec2& vp, const Vec2& vm, const Mat2& g0, const Mat2& gt) {
  return {std::log(metric_norm(gt, q * vp) / metric_norm(g0, vp)), std::log(metric_norm(gt, q * vm) / metric_norm(g0, vm))};
}

}  // namespace detail

using SplittingEstimator = std::function<SplittingSample(const Point&)>;

/// log λ+(t), log λ-(t) at t = 0, dt, ..., T for one sample.
///
/// λ+ pushes E+(p) forward. λ- is read off a vector of E-(φ_T p) transported
/// backward to each checkpoint, since forward transport of E- amplifies its
/// rounding error by λ+/λ-. Without an estimator E-(p) is pushed forward.
inline GrowthSeries growth_series(const Flow& flow, const SplittingSample& s, const QuotientMetric& g, double T,
                                  double dt, const SplittingEstimator& estimator = {}) {
  if (!(dt > 0.0) || !(T > 0.0)) throw UsageError("growth series needs T > 0 and dt > 0");
  const int n = static_cast<int>(std::floor(T / dt + 1e-9));
  std::vector<double> times;
  for (int k = 1; k <= n; ++k) times.push_back(k * dt);
  const Mat2 g0 = g(s.point);
  if (!is_spd(g0)) throw DomainError("metric is not positive definite at a sample");
  const Vec2 vp = s.e_plus.direction();
  const Vec2 vm = s.e_minus.direction();
  GrowthSeries out;
  out.t.push_back(0.0);
  out.log_plus.push_back(0.0);
  out.log_minus.push_back(0.0);
  const auto fwd = holonomy_series(flow, s.point, times);
  for (const auto& h : fwd) {
    const auto [lp, lm] = detail::log_growth(h.quotient, vp, vm, g0, g(h.target));
    out.t.push_back(h.t);
    out.log_plus.push_back(lp);
    out.log_minus.push_back(lm);
  }
  if (!estimator) return out;
  const Point far = fwd.back().target;
  const Vec2 wn = estimator(far).e_minus.direction();
  // back[j] = t_{n-1-j} - T, from -dt down to -T (the last entry returns to p).
  std::vector<double> back;
  for (int k = n - 1; k >= 1; --k) back.push_back(times[static_cast<std::size_t>(k - 1)] - times.back());
  back.push_back(-times.back());
  const auto bwd = holonomy_series(flow, far, back);
  const Vec2 w0 = bwd.back().quotient * wn;
  const double norm0 = metric_norm(g0, w0);
  out.log_minus[static_cast<std::size_t>(n)] = std::log(metric_norm(g(far), wn) / norm0);
  for (int k = 1; k < n; ++k) {
    const auto& h = bwd[static_cast<std::size_t>(n - 1 - k)];
    out.log_minus[static_cast<std::size_t>(k)] = std::log(metric_norm(g(h.target), h.quotient * wn) / norm0);
  }
  return out;
}

/// -d/dt log λ± at t = 0 by central differences.
inline std::pair<double, double> alpha_functions(const Flow& flow, const SplittingSample& s, const QuotientMetric& g,
                                                 double h) {
  const Mat2 g0 = g(s.point);
  const HolonomyMap hp = linearized_holonomy(flow, s.point, h);
  const HolonomyMap hm = linearized_holonomy(flow, s.point, -h);
  const auto [pp, pm] = detail::log_growth(hp.quotient, s.e_plus.direction(), s.e_minus.direction(), g0, g(hp.target));
  const auto [mp, mm] = detail::log_growth(hm.quotient, s.e_plus.direction(), s.e_minus.direction(), g0, g(hm.target));
  return {-(pp - mp) / (2 * h), -(pm - mm) / (2 * h)};
}

inline HyperbolicityCertificate certify_weak_hyperbolicity(const Flow& flow, const SplittingEstimate& splitting,
                                                           const QuotientMetric& g = identity_metric(),
                                                           const CertificateOptions& opt = {}) {
  if (splitting.samples.empty()) throw UsageError("certificate needs at least one sample");
  HyperbolicityCertificate cert;
  cert.T = opt.T;
  cert.dt = opt.dt;
  cert.step = flow.options().step;
  cert.exact = flow.exact();
  cert.method = splitting.method;
  for (const auto& s : splitting.samples) cert.grid.push_back(s.point);
  const auto& samples = splitting.samples;
  cert.series = parallel_map<GrowthSeries>(samples.size(), [&](std::size_t i) {
    return growth_series(flow, samples[i], g, opt.T, opt.dt, splitting.estimator);
  });
  const auto alphas = parallel_map<std::pair<double, double>>(samples.size(), [&](std::size_t i) {
    return alpha_functions(flow, samples[i], g, opt.alpha_step);
  });

  double c = std::numeric_limits<double>::infinity();
  double bp = c, bm = c;
  std::vector<std::vector<double>> ratios;
  for (const auto& s : cert.series) {
    std::vector<double> r(s.t.size()), neg_minus(s.t.size());
    for (std::size_t k = 0; k < s.t.size(); ++k) {
      r[k] = s.log_plus[k] - s.log_minus[k];
      neg_minus[k] = -s.log_minus[k];
    }
    c = std::min(c, detail::min_slope(s.t, r));
    bp = std::min(bp, detail::min_slope(s.t, s.log_plus));
    bm = std::min(bm, detail::min_slope(s.t, neg_minus));
    ratios.push_back(std::move(r));
  }
  cert.c_hat = c - opt.safety;
  cert.b_plus = bp - opt.safety;
  cert.b_minus = bm - opt.safety;
  if (cert.b_plus > 0.0 && cert.b_minus > 0.0) cert.strong_flags = std::make_pair(cert.b_plus, cert.b_minus);

  cert.alpha_gap_inf = std::numeric_limits<double>::infinity();
  for (const auto& [ap, am] : alphas) cert.alpha_gap_inf = std::min(cert.alpha_gap_inf, am - ap);
  cert.alpha_consistent = cert.c_hat <= cert.alpha_gap_inf + opt.alpha_tol;

  auto worst_of = [&](const std::vector<double>& m) {
    return static_cast<std::size_t>(std::min_element(m.begin(), m.end()) - m.begin());
  };
  if (!(cert.c_hat > 0.0)) {
    cert.valid = false;
    cert.reason = "no positive exponential gap: c_hat = " + format_double(cert.c_hat);
    for (const auto& r : ratios) cert.margins.push_back(*std::min_element(r.begin(), r.end()));
    cert.worst_sample = worst_of(cert.margins);
    return cert;
  }
  double logk = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < ratios.size(); ++i)
    for (std::size_t k = 0; k < ratios[i].size(); ++k) logk = std::min(logk, ratios[i][k] - cert.c_hat * cert.series[i].t[k]);
  cert.K_hat = std::exp(logk);
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < ratios[i].size(); ++k) m = std::min(m, ratios[i][k] - logk - cert.c_hat * cert.series[i].t[k]);
    cert.margins.push_back(m);
  }
  cert.worst_sample = worst_of(cert.margins);
  cert.valid = cert.margins[cert.worst_sample] >= 0.0;
  if (!cert.valid) cert.reason = "negative margin at sample " + std::to_string(cert.worst_sample);
  return cert;
}

/// Recheck λ+/λ- >= K_hat e^{c_hat t} at every recorded checkpoint.
inline bool verify_certificate(const HyperbolicityCertificate& cert) {
  if (!cert.valid) return false;
  const double logk = std::log(cert.K_hat);
  for (const auto& s : cert.series)
    for (std::size_t k = 0; k < s.t.size(); ++k) {
      const double r = s.log_plus[k] - s.log_minus[k];
      if (r < logk + cert.c_hat * s.t[k] - 1e-12 * (1.0 + std::abs(r))) return false;
    }
  return true;
}

/// (1/T) ∫_0^T (φ_t)^* g0 dt by composite Simpson quadrature.
inline QuotientMetric average_metric(const Flow& flow, QuotientMetric g0, double T, int quadrature_steps = 100) {
  if (T < 0.0) throw UsageError("averaging horizon must be nonnegative");
  if (quadrature_steps < 2) throw UsageError("quadrature needs at least two steps");
  if (T == 0.0) return g0;
  const int n = quadrature_steps + (quadrature_steps % 2);
  return [flow, g0, T, n](const Point& p) {
    const Mat2 base = g0(p);
    if (!is_spd(base)) throw DomainError("initial metric is not positive definite");
    std::vector<double> times;
    for (int k = 1; k <= n; ++k) times.push_back(T * k / n);
    Mat2 acc = base;
    const auto series = holonomy_series(flow, p, times);
    for (int k = 1; k <= n; ++k) {
      const auto& h = series[static_cast<std::size_t>(k - 1)];
      const double w = (k == n) ? 1.0 : (k % 2 ? 4.0 : 2.0);
      acc += w * (h.quotient.transpose() * g0(h.target) * h.quotient);
    }
    Mat2 g = acc * (T / n / 3.0) / T;
    g = 0.5 * (g + g.transpose());
    if (!is_spd(g)) {
      std::ostringstream os;
      os << "averaged metric lost positive definiteness at (" << p.coords().transpose() << ")";
      throw DomainError(os.str());
    }
    return g;
  };
}

/// Max angle between Dφ_t(E±(p)) and E±(φ_t p) over the samples.
inline double invariance_residual(const Flow& flow, const SplittingEstimate& splitting, double t) {
  if (!splitting.estimator) throw UsageError("splitting has no estimator to evaluate at image points");
  if (t == 0.0) return 0.0;
  const auto res = parallel_map<double>(splitting.samples.size(), [&](std::size_t i) {
    const auto& s = splitting.samples[i];
    const HolonomyMap h = linearized_holonomy(flow, s.point, t);
    const SplittingSample there = splitting.estimator(h.target);
    return std::max(projective_distance(act_on_projective(h, s.e_plus), there.e_plus),
                    projective_distance(act_on_projective(h, s.e_minus), there.e_minus));
  });
  return *std::max_element(res.begin(), res.end());
}

// ---------------------------------------------------------------------------
// The defining form

/// dα(u, v) for u, v in E(p), with α normalized by α(n) = 1 on the transverse-form complement.
inline double dalpha(const ManifoldModel& model, const Vec4& u, const Vec4& v, const Point& p) {
  const DistributionSpec& e = model.distribution("E");
  const TransverseForm tf = transverse_form(e, p);
  const Eigen::ColPivHouseholderQR<Mat4X> qr(tf.frame);
  const Vec3 a = qr.solve(u);
  const Vec3 b = qr.solve(v);
  if ((tf.frame * a - u).norm() > 1e-9 * (1 + u.norm()) || (tf.frame * b - v).norm() > 1e-9 * (1 + v.norm())) {
    throw UsageError("dalpha arguments must lie in E");
  }
  return -a.dot(tf.omega * b);
}

struct IsotropyReport {
  /// max |dα(v, v)| over v in E+ and E-.
  double residual = 0.0;
  /// dα(v+, v-) for unit quotient representatives.
  double cross = 0.0;
};

inline IsotropyReport isotropy_residual(const Flow& flow, const SplittingSample& s) {
  const ManifoldModel& model = flow.model();
  const double div = divergence(model, flow.field(), s.point);
  if (std::abs(div) > 1e-9) throw UnsupportedError("no invariant defining form: divergence of W is " + format_double(div));
  const QuotientFrame f = quotient_frame(model, flow.field(), s.point);
  const Vec4 vp = f.lift(s.e_plus.direction());
  const Vec4 vm = f.lift(s.e_minus.direction());
  IsotropyReport r;
  r.residual = std::max(std::abs(dalpha(model, vp, vp, s.point)), std::abs(dalpha(model, vm, vm, s.point)));
  r.cross = dalpha(model, vp, vm, s.point);
  return r;
}

}  // namespace engel_lab
