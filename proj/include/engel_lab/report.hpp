#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "audits.hpp"
#include "engel.hpp"
#include "json.hpp"

namespace engel_lab::report {

using nlohmann::json;

inline constexpr int kSchema = 1;
inline constexpr const char* kTool = "engel_lab";
inline constexpr const char* kVersion = "0.1.0";

/// Finite values as JSON numbers; inf and nan as strings, which JSON cannot hold.
inline json num(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

inline json nums(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}

inline json vec(const Vec4& v) { return json::array({num(v(0)), num(v(1)), num(v(2)), num(v(3))}); }

inline json point(const Point& p) { return vec(p.coords()); }

inline json points(const std::vector<Point>& ps) {
  json a = json::array();
  for (const auto& p : ps) a.push_back(point(p));
  return a;
}

inline json model(const ManifoldModel& m) {
  return {{"name", m.name},
          {"kind", to_string(m.kind)},
          {"jacobi_residual", m.is_algebraic() ? num(m.jacobi_residual) : json(nullptr)}};
}

inline json engel(const EngelReport& r) {
  json j{{"pass", r.pass},
         {"tolerance", num(r.tolerance)},
         {"margin3", nums(r.margin3)},
         {"margin4", nums(r.margin4)},
         {"worst_margin", num(r.worst_margin)},
         {"worst_sample", r.worst_sample},
         {"failed_stage", r.failed_stage.empty() ? json(nullptr) : json(r.failed_stage)}};
  if (!r.samples.empty()) j["worst_point"] = point(r.samples[r.worst_sample]);
  return j;
}

inline json even_contact(const EvenContactReport& r) {
  return {{"pass", r.pass},
          {"tolerance", num(r.tolerance)},
          {"margins", nums(r.margins)},
          {"worst_margin", num(r.worst_margin)},
          {"worst_sample", r.worst_sample}};
}

inline json containment(const ContainmentReport& r) {
  return {{"max_angle", num(r.max_angle)}, {"worst_sample", r.worst_sample}, {"angles", nums(r.angles)}};
}

inline json bi_engel(const BiEngelCertificate& c) {
  json w = json::array();
  for (const auto& x : c.witnesses)
    w.push_back({{"sample", x.sample}, {"t", num(x.t)}, {"point", point(x.point)}, {"margin", num(x.margin)}});
  return {{"pass", c.pass},
          {"reason", c.reason.empty() ? json(nullptr) : json(c.reason)},
          {"tol", num(c.options.tol)},
          {"engel_tol", num(c.options.engel_tol)},
          {"scan_length", num(c.options.scan_length)},
          {"scan_steps", c.options.scan_steps},
          {"engel_plus", engel(c.engel_plus)},
          {"engel_minus", engel(c.engel_minus)},
          {"shared_e_residual", num(c.shared_e_residual)},
          {"orientation", c.orientation},
          {"orientation_product", c.orientation_product},
          {"sample_margins", nums(c.sample_margins)},
          {"intersection_margin", num(c.intersection_margin)},
          {"witnesses", w}};
}

inline json splitting_sample(const SplittingSample& s) {
  return {{"point", point(s.point)},
          {"e_plus", num(s.e_plus.angle())},
          {"e_minus", num(s.e_minus.angle())},
          {"gap_forward", num(s.gap_forward)},
          {"gap_backward", num(s.gap_backward)}};
}

inline json hyperbolic(const HyperbolicityCertificate& c) {
  json strong = nullptr;
  if (c.strong_flags) strong = {{"b_plus", num(c.strong_flags->first)}, {"b_minus", num(c.strong_flags->second)}};
  return {{"valid", c.valid},
          {"verified", verify_certificate(c)},
          {"reason", c.reason.empty() ? json(nullptr) : json(c.reason)},
          {"c_hat", num(c.c_hat)},
          {"K_hat", num(c.K_hat)},
          {"T", num(c.T)},
          {"dt", num(c.dt)},
          {"step", num(c.step)},
          {"exact", c.exact},
          {"method", c.method},
          {"grid", points(c.grid)},
          {"margins", nums(c.margins)},
          {"worst_sample", c.worst_sample},
          {"strong_flags", strong},
          {"b_plus", num(c.b_plus)},
          {"b_minus", num(c.b_minus)},
          {"alpha_gap_inf", num(c.alpha_gap_inf)},
          {"alpha_consistent", c.alpha_consistent}};
}

inline json rotation(const RotationProfile& r) {
  return {{"seed", point(r.seed)},
          {"tv_forward", num(r.tv_forward)},
          {"tv_backward", num(r.tv_backward)},
          {"total_variation", num(r.total_variation)},
          {"monotone", r.monotone},
          {"full_turn", r.full_turn},
          {"returns", r.returns},
          {"first_return", r.first_return ? num(*r.first_return) : json(nullptr)},
          {"points", r.times.size()}};
}

inline json cross_ratio(const CrossRatioAudit& a) {
  json series = json::array();
  for (const auto& r : a.series) series.push_back({{"t", num(r.t)}, {"cr", num(r.cr)}});
  return {{"separation", num(a.separation)},
          {"homography", {{"tuples", a.homography_tuples}, {"max_residual", num(a.homography_residual)}}},
          {"chain", {{"tuples", a.chain_tuples}, {"max_residual", num(a.chain_residual)}}},
          {"ordered",
           {{"tuples", a.ordered_tuples}, {"violations", a.ordered_violations}, {"min_excess", num(a.ordered_min_excess)}}},
          {"series",
           {{"alpha", num(a.alpha)},
            {"monotone", a.series_monotone},
            {"dominates", a.series_dominates},
            {"min_excess", num(a.series_min_excess)},
            {"rows", series}}}};
}

inline json oracle(const OracleDiff& d) {
  return {{"T", num(d.T)},
          {"dt", num(d.dt)},
          {"step", num(d.step)},
          {"holonomy_residual", num(d.holonomy_residual)},
          {"worst_time", num(d.worst_time)},
          {"fd_steps", nums(d.fd_steps)},
          {"fd_errors", nums(d.fd_errors)},
          {"fd_slope", num(d.fd_slope)}};
}

inline void write_growth_csv(std::ostream& os, const HyperbolicityCertificate& c) {
  os << "sample,t,log_lambda_plus,log_lambda_minus\n";
  for (std::size_t i = 0; i < c.series.size(); ++i) {
    const auto& s = c.series[i];
    for (std::size_t k = 0; k < s.t.size(); ++k)
      os << i << ',' << format_double(s.t[k]) << ',' << format_double(s.log_plus[k]) << ','
         << format_double(s.log_minus[k]) << '\n';
  }
}

}  // namespace engel_lab::report
