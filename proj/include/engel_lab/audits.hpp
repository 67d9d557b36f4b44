#pragma once

#include <algorithm>
#include <array>
#include <limits>
#include <cmath>
#include <string>
#include <vector>

#include "dynamics.hpp"
#include "parallel.hpp"

namespace engel_lab {

struct CrossRatioAudit {
  std::uint64_t seed = 0;
  /// Tuples closer than this (projective distance) are redrawn.
  double separation = 0.05;
  int homography_tuples = 0;
  double homography_residual = 0.0;
  int chain_tuples = 0;
  double chain_residual = 0.0;
  int ordered_tuples = 0;
  int ordered_violations = 0;
  /// Smallest [x,s',t',y] / ([x,s,t,y][s,s',t',t]) - 1 over ordered tuples.
  double ordered_min_excess = std::numeric_limits<double>::infinity();
  std::vector<CrossRatioRow> series;
  double alpha = 0.0;
  bool series_monotone = true;
  /// Min over rows of cr(t) / α^⌊t⌋ - 1.
  double series_min_excess = std::numeric_limits<double>::infinity();
  bool series_dominates = true;
};

struct CrossRatioAuditOptions {
  std::uint64_t seed = 0;
  int homography_tuples = 10000;
  int chain_tuples = 1000;
  int ordered_tuples = 1000;
  double T = 10.0;
  double dt = 0.25;
};

/// Randomized cross-ratio identities plus the cross-ratio series of (D+, D-) along one orbit.
inline CrossRatioAudit cross_ratio_audit(const Flow& flow, const DistributionSpec& dp, const DistributionSpec& dm,
                                         const Point& p, const CrossRatioAuditOptions& opt = {}) {
  if (!(opt.dt > 0.0) || opt.T < 1.0) throw UsageError("series needs dt > 0 and T >= 1");
  CrossRatioAudit a;
  a.seed = opt.seed;
  Rng rng(opt.seed);
  auto separated = [&](const std::vector<ProjectivePoint>& v) {
    for (std::size_t i = 0; i < v.size(); ++i)
      for (std::size_t j = i + 1; j < v.size(); ++j)
        if (projective_distance(v[i], v[j]) < a.separation) return false;
    return true;
  };
  auto draw = [&](std::size_t n) {
    std::vector<ProjectivePoint> v;
    do {
      v.clear();
      for (std::size_t i = 0; i < n; ++i) v.emplace_back(rng.uniform(0.0, kPi));
    } while (!separated(v));
    return v;
  };
  while (a.homography_tuples < opt.homography_tuples) {
    Mat2 f;
    for (int k = 0; k < 4; ++k) f(k / 2, k % 2) = rng.uniform(-1.0, 1.0);
    if (std::abs(f.determinant()) < 0.1) continue;
    const auto x = draw(4);
    const double c0 = cross_ratio(x[0], x[1], x[2], x[3]);
    const double c1 = cross_ratio(act_on_projective(f, x[0]), act_on_projective(f, x[1]), act_on_projective(f, x[2]),
                                  act_on_projective(f, x[3]));
    a.homography_residual = std::max(a.homography_residual, std::abs(c0 - c1) / (1.0 + std::abs(c0)));
    ++a.homography_tuples;
  }
  while (a.chain_tuples < opt.chain_tuples) {
    const auto x = draw(6);
    a.chain_residual = std::max(a.chain_residual, chain_relation_residual(x[0], x[1], x[2], x[3], x[4], x[5]));
    ++a.chain_tuples;
  }
  while (a.ordered_tuples < opt.ordered_tuples) {
    auto x = draw(6);
    std::sort(x.begin(), x.end(), [](const ProjectivePoint& l, const ProjectivePoint& r) { return l.angle() < r.angle(); });
    // Order x < s < s' < t' < t < y.
    const double lhs = cross_ratio(x[0], x[2], x[3], x[5]);
    const double rhs = cross_ratio(x[0], x[1], x[4], x[5]) * cross_ratio(x[1], x[2], x[3], x[4]);
    a.ordered_min_excess = std::min(a.ordered_min_excess, lhs / rhs - 1.0);
    if (!(lhs > rhs)) ++a.ordered_violations;
    ++a.ordered_tuples;
  }
  a.series = cross_ratio_series(flow, dp, dm, p, opt.T, opt.dt);
  for (const auto& r : a.series)
    if (std::abs(r.t - 1.0) < 1e-12) a.alpha = r.cr;
  if (a.alpha == 0.0) throw UsageError("series step must hit t = 1");
  for (std::size_t i = 0; i < a.series.size(); ++i) {
    const auto& r = a.series[i];
    if (i > 0 && !(r.cr > a.series[i - 1].cr)) a.series_monotone = false;
    const double bound = std::pow(a.alpha, std::floor(r.t + 1e-12));
    const double excess = r.cr / bound - 1.0;
    a.series_min_excess = std::min(a.series_min_excess, excess);
    // Equality holds at t = 0 and t = 1 by construction of α.
    if (excess < -1e-12) a.series_dominates = false;
  }
  return a;
}

struct OracleDiff {
  double T = 0.0;
  double dt = 0.0;
  double step = 0.0;
  /// Max over samples and times of max|exact - numeric| / max|exact|.
  double holonomy_residual = 0.0;
  double worst_time = 0.0;
  std::vector<double> fd_steps;
  std::vector<double> fd_errors;
  double fd_slope = 0.0;
};

/// Exact Lie holonomy against the chart integrator, and chart brackets by
/// central differences against the structure constants.
inline OracleDiff oracle_diff(const ManifoldModel& model, const std::vector<Point>& samples, double T = 5.0,
                              double dt = 0.5, double step = 1e-3) {
  if (!model.is_algebraic() || !model.realization) throw UsageError("oracle-diff needs a Lie or suspension model");
  if (!(T > 0.0) || !(dt > 0.0) || !(step > 0.0)) throw UsageError("oracle-diff needs T, dt, step > 0");
  OracleDiff out;
  out.T = T;
  out.dt = dt;
  out.step = step;
  const Flow exact(model);
  const Flow numeric(model, FlowOptions{step, false});
  std::vector<double> fwd, bwd;
  const int n = static_cast<int>(std::floor(T / dt + 1e-9));
  for (int k = 1; k <= n; ++k) {
    fwd.push_back(k * dt);
    bwd.push_back(-k * dt);
  }
  struct Worst {
    double r = 0.0, t = 0.0;
  };
  const auto rows = parallel_map<Worst>(samples.size(), [&](std::size_t i) {
    Worst w;
    for (const auto* times : {&fwd, &bwd}) {
      const auto num = numeric.pushforward_series(samples[i], *times);
      for (std::size_t k = 0; k < times->size(); ++k) {
        const Mat4 a = exact.pushforward(samples[i], (*times)[k]);
        const double r = (a - num[k].second).cwiseAbs().maxCoeff() / a.cwiseAbs().maxCoeff();
        if (r > w.r) w = {r, (*times)[k]};
      }
    }
    return w;
  });
  for (const auto& w : rows)
    if (w.r >= out.holonomy_residual) {
      out.holonomy_residual = w.r;
      out.worst_time = w.t;
    }
  const auto& real = *model.realization;
  const auto& basis = model.algebra->basis_names();
  out.fd_steps = {4e-2, 2e-2, 1e-2};
  for (double h : out.fd_steps) {
    double worst = 0.0;
    for (const auto& p : samples) {
      const Mat4 f = model.frame_matrix(p);
      for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = i + 1; j < 4; ++j) {
          const auto a = real.field(basis[i]).with_central_difference(h);
          const auto b = real.field(basis[j]).with_central_difference(h);
          const Vec4 ref = f * lie_bracket(model.field(basis[i]), model.field(basis[j]), p).components;
          worst = std::max(worst, (lie_bracket(a, b, p).components - ref).norm());
        }
    }
    out.fd_errors.push_back(worst);
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double m = static_cast<double>(out.fd_steps.size());
  for (std::size_t i = 0; i < out.fd_steps.size(); ++i) {
    const double x = std::log(out.fd_steps[i]);
    const double y = std::log(out.fd_errors[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  out.fd_slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  return out;
}

}  // namespace engel_lab
