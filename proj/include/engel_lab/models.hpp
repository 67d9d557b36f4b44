#pragma once

// Concrete 4-manifold backends: Lie-algebra models (exact holonomy), chart
// models built from parsed expressions, and the three built-in examples.

#include <unsupported/Eigen/MatrixFunctions>

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "geometry.hpp"

namespace engel_lab {

enum class ModelKind { lie, chart, suspension };

inline std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::lie: return "lie";
    case ModelKind::chart: return "chart";
    case ModelKind::suspension: return "suspension";
  }
  return "?";
}

/// A 4-manifold backend with named fields and declared distributions.
///
/// Algebraic models (lie, suspension) express tangent vectors in their
/// left-invariant frame and carry a chart `realization` whose fields have the
/// same names; chart models work in coordinate components throughout.
struct ManifoldModel {
  std::string name;
  ModelKind kind = ModelKind::chart;
  std::shared_ptr<const Chart> chart = std::make_shared<Chart>();
  std::shared_ptr<const LieAlgebra> algebra;
  /// Suspension only: the 3-dimensional base algebra.
  std::optional<LieAlgebra> base_algebra;
  std::map<std::string, FieldHandle> fields;
  /// Declaration order of `fields` (frame order for algebraic models).
  std::vector<std::string> field_order;
  std::string flow = "W";
  std::map<std::string, DistributionSpec> distributions;
  std::array<std::string, 2> quotient_fields;
  std::shared_ptr<const ManifoldModel> realization;
  /// Closed-form flow of the designated field on the (realization) chart, if known.
  std::function<Vec4(const Vec4&, double)> exact_point_flow;
  double jacobi_residual = 0.0;

  bool is_algebraic() const { return kind != ModelKind::chart; }

  const FieldHandle& field(const std::string& n) const {
    auto it = fields.find(n);
    if (it == fields.end()) throw UsageError("model '" + name + "' has no field '" + n + "'");
    return it->second;
  }

  const FieldHandle& flow_field() const { return field(flow); }

  const DistributionSpec& distribution(const std::string& n) const {
    auto it = distributions.find(n);
    if (it == distributions.end()) throw UsageError("model '" + name + "' has no distribution '" + n + "'");
    return it->second;
  }

  bool has_distribution(const std::string& n) const { return distributions.count(n) != 0; }

  /// The chart on which points live (the realization's chart for algebraic models).
  const Chart& point_chart() const { return realization ? *realization->chart : *chart; }

  Point point(const Vec4& c) const { return point_chart().point(c); }

  /// Columns are the coordinate components of the algebraic frame at p.
  Mat4 frame_matrix(const Point& p) const {
    if (!is_algebraic() || !realization) throw UsageError("frame matrix needs an algebraic model with a realization");
    Mat4 f;
    const auto& basis = algebra->basis_names();
    for (int i = 0; i < 4; ++i) f.col(i) = realization->field(basis[static_cast<std::size_t>(i)])(p);
    return f;
  }

  /// The field as a coordinate field on the point chart.
  FieldHandle coordinate_field(const FieldHandle& f) const {
    if (!f.is_invariant()) return f;
    if (!realization) throw UsageError("model '" + name + "' has no chart realization");
    std::vector<std::pair<double, FieldHandle>> terms;
    const auto& basis = algebra->basis_names();
    for (int i = 0; i < 4; ++i) {
      const double w = f.constant_components()(i);
      if (w != 0.0) terms.emplace_back(w, realization->field(basis[static_cast<std::size_t>(i)]));
    }
    if (terms.empty()) terms.emplace_back(0.0, realization->field(basis[0]));
    return linear_combination(terms, f.name());
  }

  /// Invariant field with the given frame components.
  FieldHandle invariant(const Vec4& comps, std::string n = {}) const {
    if (!is_algebraic()) throw UsageError("invariant fields need an algebraic model");
    return FieldHandle::invariant(algebra, comps, std::move(n));
  }
};

using ModelPtr = std::shared_ptr<const ManifoldModel>;

/// Frame roles for make_lie_model: role name -> basis index.
using FrameRoles = std::map<std::string, int>;

inline void validate_algebra(const LieAlgebra& a, double* jacobi_out = nullptr) {
  const double anti = a.antisymmetry_residual();
  if (anti > 1e-12) throw ModelError("structure constants are not antisymmetric (residual " + std::to_string(anti) + ")");
  const JacobiReport j = a.jacobi();
  if (j.residual > 1e-9) {
    const auto& n = a.basis_names();
    throw ModelError("Jacobi identity fails on (" + n[static_cast<std::size_t>(j.worst_triple[0])] + "," +
                     n[static_cast<std::size_t>(j.worst_triple[1])] + "," +
                     n[static_cast<std::size_t>(j.worst_triple[2])] + "), residual " + std::to_string(j.residual));
  }
  if (jacobi_out) *jacobi_out = j.residual;
}

namespace detail {

// Left-invariant frame in coordinates of the second kind,
// g = exp(x0 e0) exp(x1 e1) exp(x2 e2) exp(x3 e3).
inline std::shared_ptr<ManifoldModel> second_kind_realization(const std::shared_ptr<const LieAlgebra>& algebra) {
  auto real = std::make_shared<ManifoldModel>();
  real->name = "second-kind chart";
  real->kind = ModelKind::chart;
  auto chart = std::make_shared<Chart>();
  real->chart = chart;
  std::array<Mat4, 4> ads;
  for (int i = 0; i < 4; ++i) ads[static_cast<std::size_t>(i)] = Mat4(algebra->ad(Vec4::Unit(i)));
  auto coframe = [ads](const Point& p) {
    // Column i: Ad(exp(x_{i+1} e_{i+1}) ... exp(x3 e3))^{-1} e_i.
    Mat4 m;
    for (int i = 0; i < 4; ++i) {
      Vec4 v = Vec4::Unit(i);
      for (int j = i + 1; j < 4; ++j) {
        const Mat4 step = (-p[j] * ads[static_cast<std::size_t>(j)]).exp();
        v = step * v;
      }
      m.col(i) = v;
    }
    return m;
  };
  const auto& basis = algebra->basis_names();
  for (int k = 0; k < 4; ++k) {
    auto eval = [coframe, k](const Point& p) {
      const Eigen::FullPivLU<Mat4> lu(coframe(p));
      if (!lu.isInvertible()) throw DomainError("second-kind chart is singular here");
      return Vec4(lu.solve(Vec4::Unit(k)));
    };
    real->fields[basis[static_cast<std::size_t>(k)]] = FieldHandle::numeric(chart, eval, kDefaultStep, basis[static_cast<std::size_t>(k)]);
    real->field_order.push_back(basis[static_cast<std::size_t>(k)]);
  }
  return real;
}

inline std::shared_ptr<ManifoldModel> symbolic_realization(
    const std::string& name, const Chart& chart_in,
    const std::vector<std::pair<std::string, std::array<std::string, 4>>>& defs) {
  auto real = std::make_shared<ManifoldModel>();
  real->name = name;
  real->kind = ModelKind::chart;
  auto chart = std::make_shared<Chart>(chart_in);
  real->chart = chart;
  for (const auto& [n, comps] : defs) {
    real->fields[n] = FieldHandle::symbolic(chart, comps, n);
    real->field_order.push_back(n);
  }
  return real;
}

inline std::vector<double> pack_constants(int dim, const std::vector<std::tuple<int, int, int, double>>& entries) {
  std::vector<double> c(static_cast<std::size_t>(dim * dim * dim), 0.0);
  for (const auto& [i, j, k, v] : entries) {
    c[static_cast<std::size_t>((i * dim + j) * dim + k)] = v;
    c[static_cast<std::size_t>((j * dim + i) * dim + k)] = -v;
  }
  return c;
}

}  // namespace detail

/// Validated Lie-algebra model from a 4x4x4 constant array (c[i][j][k]).
/// Role names become field names; unnamed basis vectors are called e<i>.
inline ManifoldModel make_lie_model(const std::vector<double>& constants, const FrameRoles& roles,
                                    const std::string& name = "lie") {
  std::vector<std::string> basis(4);
  for (int i = 0; i < 4; ++i) basis[static_cast<std::size_t>(i)] = "e" + std::to_string(i);
  for (const auto& [role, idx] : roles) {
    if (idx < 0 || idx > 3) throw ModelError("role '" + role + "' has basis index out of range");
    basis[static_cast<std::size_t>(idx)] = role;
  }
  auto algebra = std::make_shared<LieAlgebra>(4, constants, basis);
  ManifoldModel m;
  m.name = name;
  m.kind = ModelKind::lie;
  validate_algebra(*algebra, &m.jacobi_residual);
  m.algebra = algebra;
  for (int i = 0; i < 4; ++i) {
    const auto& n = basis[static_cast<std::size_t>(i)];
    m.fields[n] = FieldHandle::invariant(algebra, Vec4::Unit(i), n);
    m.field_order.push_back(n);
  }
  if (m.fields.count("W") == 0) m.flow = basis[3];
  m.realization = detail::second_kind_realization(algebra);
  return m;
}

/// Declares D± = span{W, X±Y}, E = span{X, Y, W} and the line W when the model
/// has fields named X, Y and W.
inline void add_standard_distributions(ManifoldModel& m) {
  if (!m.fields.count("X") || !m.fields.count("Y") || !m.fields.count("W")) return;
  const auto& X = m.field("X");
  const auto& Y = m.field("Y");
  const auto& W = m.field("W");
  m.distributions["D+"] = {"D+", {W, linear_combination({{1.0, X}, {1.0, Y}}, "X+Y")}};
  m.distributions["D-"] = {"D-", {W, linear_combination({{1.0, X}, {-1.0, Y}}, "X-Y")}};
  m.distributions["E"] = {"E", {X, Y, W}};
  m.distributions["W"] = {"W", {W}};
  m.quotient_fields = {"X", "Y"};
}

namespace builtin_models {

inline ManifoldModel sol() {
  // Frame order (X, Y, Z, W): [X,Y]=Z, [W,X]=-X, [W,Y]=Y, [W,Z]=0.
  const auto c = detail::pack_constants(4, {{0, 1, 2, 1.0}, {3, 0, 0, -1.0}, {3, 1, 1, 1.0}});
  ManifoldModel m = make_lie_model(c, {{"X", 0}, {"Y", 1}, {"Z", 2}, {"W", 3}}, "sol");
  Chart chart;
  chart.names = {"x", "y", "z", "w"};
  m.realization = detail::symbolic_realization(
      "sol chart", chart,
      {{"X", {"exp(-w)", "0", "0", "0"}},
       {"Y", {"0", "exp(w)", "x*exp(w)", "0"}},
       {"Z", {"0", "0", "1", "0"}},
       {"W", {"0", "0", "0", "1"}}});
  m.exact_point_flow = [](const Vec4& x, double t) {
    Vec4 y = x;
    y(3) += t;
    return y;
  };
  add_standard_distributions(m);
  return m;
}

inline ManifoldModel prolongation() {
  ManifoldModel m;
  m.name = "prolongation";
  m.kind = ModelKind::chart;
  auto chart = std::make_shared<Chart>();
  chart->names = {"x", "y", "z", "t"};
  chart->periods = {0.0, 0.0, 0.0, 2.0 * kPi};
  m.chart = chart;
  const std::vector<std::pair<std::string, std::array<std::string, 4>>> defs = {
      {"X", {"1", "0", "0", "0"}},
      {"Y", {"0", "1", "x", "0"}},
      {"Z", {"0", "0", "1", "0"}},
      {"W", {"0", "0", "0", "1"}},
      {"V+", {"cos(t)", "sin(t)", "x*sin(t)", "0"}},
      {"V-", {"cos(t)", "-sin(t)", "-x*sin(t)", "0"}},
  };
  for (const auto& [n, comps] : defs) {
    m.fields[n] = FieldHandle::symbolic(chart, comps, n);
    m.field_order.push_back(n);
  }
  m.flow = "W";
  m.exact_point_flow = [](const Vec4& x, double t) {
    Vec4 y = x;
    y(3) += t;
    return y;
  };
  m.distributions["D+"] = {"D+", {m.field("W"), m.field("V+")}};
  m.distributions["D-"] = {"D-", {m.field("W"), m.field("V-")}};
  m.distributions["E"] = {"E", {m.field("X"), m.field("Y"), m.field("W")}};
  m.distributions["W"] = {"W", {m.field("W")}};
  m.quotient_fields = {"X", "Y"};
  return m;
}

inline ManifoldModel sl2_suspension() {
  // Base sl(2,R) in the order (U+, U-, X): [X,U+]=U+, [X,U-]=-U-, [U+,U-]=2X.
  const auto base_c = detail::pack_constants(3, {{2, 0, 0, 1.0}, {2, 1, 1, -1.0}, {0, 1, 2, 2.0}});
  LieAlgebra base(3, base_c, {"U+", "U-", "X"});
  validate_algebra(base);
  auto algebra = std::make_shared<LieAlgebra>(base.with_central_extension("T"));
  ManifoldModel m;
  m.name = "sl2-suspension";
  m.kind = ModelKind::suspension;
  validate_algebra(*algebra, &m.jacobi_residual);
  m.algebra = algebra;
  m.base_algebra = base;
  for (int i = 0; i < 4; ++i) {
    const auto& n = algebra->basis_names()[static_cast<std::size_t>(i)];
    m.fields[n] = FieldHandle::invariant(algebra, Vec4::Unit(i), n);
    m.field_order.push_back(n);
  }
  m.fields["W"] = FieldHandle::invariant(algebra, Vec4(0, 0, 1, 1), "W");
  m.field_order.push_back("W");
  m.flow = "W";
  Chart chart;
  chart.names = {"b", "a", "c", "theta"};
  chart.periods = {0.0, 0.0, 0.0, 1.0};
  // g = exp(b U+) exp(a X) exp(c U-) on the base, theta on the circle.
  m.realization = detail::symbolic_realization(
      "sl2-suspension chart", chart,
      {{"U+", {"exp(a)", "-2*c", "-c^2", "0"}},
       {"U-", {"0", "0", "1", "0"}},
       {"X", {"0", "1", "c", "0"}},
       {"T", {"0", "0", "0", "1"}},
       {"W", {"0", "1", "c", "1"}}});
  m.exact_point_flow = [](const Vec4& x, double t) {
    Vec4 y = x;
    y(1) += t;
    y(2) *= std::exp(t);
    y(3) += t;
    return y;
  };
  const auto& up = m.field("U+");
  const auto& um = m.field("U-");
  const auto& W = m.field("W");
  m.distributions["D+"] = {"D+", {W, linear_combination({{1.0, up}, {1.0, um}}, "U++U-")}};
  m.distributions["D-"] = {"D-", {W, linear_combination({{1.0, up}, {-1.0, um}}, "U+-U-")}};
  m.distributions["E"] = {"E", {up, um, W}};
  m.distributions["W"] = {"W", {W}};
  m.quotient_fields = {"U+", "U-"};
  return m;
}

/// 4-dimensional abelian algebra; every distribution is integrable.
inline ManifoldModel abelian() {
  ManifoldModel m = make_lie_model(std::vector<double>(64, 0.0), {{"X", 0}, {"Y", 1}, {"Z", 2}, {"W", 3}}, "abelian");
  Chart chart;
  chart.names = {"x", "y", "z", "w"};
  m.realization = detail::symbolic_realization(
      "abelian chart", chart,
      {{"X", {"1", "0", "0", "0"}}, {"Y", {"0", "1", "0", "0"}}, {"Z", {"0", "0", "1", "0"}}, {"W", {"0", "0", "0", "1"}}});
  add_standard_distributions(m);
  return m;
}

/// Oscillator algebra: ad_W rotates span{X, Y}, so E/W has no invariant line.
inline ManifoldModel oscillator() {
  const auto c = detail::pack_constants(4, {{0, 1, 2, 1.0}, {3, 0, 1, 1.0}, {3, 1, 0, -1.0}});
  ManifoldModel m = make_lie_model(c, {{"X", 0}, {"Y", 1}, {"Z", 2}, {"W", 3}}, "oscillator");
  add_standard_distributions(m);
  return m;
}

}  // namespace builtin_models

inline const std::vector<std::string>& builtin_names() {
  static const std::vector<std::string> names{"sol", "prolongation", "sl2-suspension", "abelian", "oscillator"};
  return names;
}

inline ManifoldModel builtin(const std::string& name) {
  if (name == "sol") return builtin_models::sol();
  if (name == "prolongation") return builtin_models::prolongation();
  if (name == "sl2-suspension") return builtin_models::sl2_suspension();
  if (name == "abelian") return builtin_models::abelian();
  if (name == "oscillator") return builtin_models::oscillator();
  throw UsageError("unknown built-in model '" + name + "'");
}

/// Pushforward of the algebraic frame under the time-t flow of W: exp(-t ad_W).
inline Mat4 exact_holonomy(const ManifoldModel& model, const FieldHandle& w, double t) {
  if (!model.is_algebraic()) throw UsageError("exact holonomy needs an algebraic model");
  if (!w.is_invariant()) throw UsageError("exact holonomy needs an invariant flow field");
  const Mat4 ad = model.algebra->ad(w.constant_components());
  return Mat4(-t * ad).exp();
}

inline Mat4 exact_holonomy(const ManifoldModel& model, double t) {
  return exact_holonomy(model, model.flow_field(), t);
}

/// Divergence of W with respect to the frame volume (coordinate volume for charts).
inline double divergence(const ManifoldModel& model, const FieldHandle& w, const Point& p) {
  if (w.is_invariant()) {
    if (!model.is_algebraic()) throw UsageError("invariant field on a chart model");
    return -model.algebra->ad(w.constant_components()).trace();
  }
  return w.jacobian(p).trace();
}

/// Deterministic uniform doubles in [0,1) from a 64-bit Mersenne twister.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

 private:
  std::mt19937_64 engine_;
};

/// Seeded sample points: periodic axes cover their period, other axes [-1,1]
/// clipped to the valid region.
inline std::vector<Point> sample_points(const ManifoldModel& model, int n, std::uint64_t seed = 0) {
  const Chart& chart = model.point_chart();
  Rng rng(seed);
  std::vector<Point> pts;
  pts.reserve(static_cast<std::size_t>(n));
  for (int s = 0; s < n; ++s) {
    Vec4 c;
    for (int i = 0; i < 4; ++i) {
      const double per = chart.periods[static_cast<std::size_t>(i)];
      if (per > 0.0) {
        c(i) = rng.uniform(0.0, per);
      } else {
        const double lo = std::max(-1.0, chart.lower(i));
        const double hi = std::min(1.0, chart.upper(i));
        c(i) = rng.uniform(lo, hi);
      }
    }
    pts.push_back(chart.point(c));
  }
  return pts;
}

}  // namespace engel_lab
