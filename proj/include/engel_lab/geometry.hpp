#pragma once

// Points, tangent vectors, vector-field handles and the bracket/rank machinery
// that the characteristic-foliation extraction is built on.

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "expression.hpp"
#include "lie_algebra.hpp"
#include "linalg.hpp"

namespace engel_lab {

inline constexpr double kDefaultStep = 1e-4;
inline constexpr double kDefaultRankTol = 1e-8;

/// A point of a 4-manifold chart. Coordinates are finite.
class Point {
 public:
  Point() : c_(Vec4::Zero()) {}
  explicit Point(const Vec4& c) : c_(c) {
    if (!c_.allFinite()) throw DomainError("point with non-finite coordinates");
  }
  const Vec4& coords() const { return c_; }
  double operator[](int i) const { return c_(i); }
  bool operator==(const Point& o) const { return c_ == o.c_; }

 private:
  Vec4 c_;
};

/// Coordinate chart: names, optional periods, and an axis-aligned valid region.
struct Chart {
  std::array<std::string, 4> names{"x0", "x1", "x2", "x3"};
  /// 0 means "not periodic".
  std::array<double, 4> periods{0.0, 0.0, 0.0, 0.0};
  Vec4 lower = Vec4::Constant(-std::numeric_limits<double>::infinity());
  Vec4 upper = Vec4::Constant(std::numeric_limits<double>::infinity());

  std::vector<std::string> name_list() const { return {names.begin(), names.end()}; }

  Vec4 normalize(Vec4 c) const {
    for (int i = 0; i < 4; ++i) {
      const double per = periods[static_cast<std::size_t>(i)];
      if (per > 0.0) {
        double r = std::fmod(c(i), per);
        if (r < 0.0) r += per;
        if (r >= per) r = 0.0;
        c(i) = r;
      }
    }
    return c;
  }

  bool contains(const Vec4& c) const {
    for (int i = 0; i < 4; ++i) {
      if (periods[static_cast<std::size_t>(i)] > 0.0) continue;
      if (c(i) < lower(i) || c(i) > upper(i)) return false;
    }
    return true;
  }

  /// Normalized point; throws DomainError outside the valid region.
  Point point(const Vec4& c) const {
    if (!c.allFinite()) throw DomainError("point with non-finite coordinates");
    if (!contains(c)) throw DomainError("point outside the chart's valid region");
    return Point(normalize(c));
  }

  /// Signed periodic difference a - b (plain difference on non-periodic axes).
  Vec4 difference(const Vec4& a, const Vec4& b) const {
    Vec4 d = a - b;
    for (int i = 0; i < 4; ++i) {
      const double per = periods[static_cast<std::size_t>(i)];
      if (per > 0.0) d(i) -= per * std::round(d(i) / per);
    }
    return d;
  }
};

/// Tangent vector: components in the model's distinguished frame
/// (left-invariant frame for algebraic models, coordinate frame for charts).
struct TangentVector {
  Point base;
  Vec4 components = Vec4::Zero();
};

enum class DerivativeScheme { analytic, central_difference };

/// Immutable, shareable handle to a vector field.
class FieldHandle {
 public:
  enum class Kind { invariant, symbolic, numeric };
  using Evaluator = std::function<Vec4(const Point&)>;
  using JacobianFn = std::function<Mat4(const Point&)>;

  FieldHandle() = default;

  /// Left-invariant field with constant frame components.
  static FieldHandle invariant(std::shared_ptr<const LieAlgebra> algebra, const Vec4& comps,
                               std::string name = {}) {
    if (!algebra || algebra->dimension() != 4) throw UsageError("invariant field needs a 4D algebra");
    FieldHandle f;
    f.kind_ = Kind::invariant;
    f.algebra_ = std::move(algebra);
    f.constant_ = comps;
    f.name_ = std::move(name);
    return f;
  }

  /// Field whose coordinate components are parsed expressions.
  static FieldHandle symbolic(std::shared_ptr<const Chart> chart, std::array<expr::Expression, 4> comps,
                              std::string name = {}) {
    auto data = std::make_shared<SymbolicData>();
    data->comps = std::move(comps);
    for (int k = 0; k < 4; ++k)
      for (int i = 0; i < 4; ++i) data->jac[static_cast<std::size_t>(k * 4 + i)] = data->comps[static_cast<std::size_t>(k)].derivative(i);
    FieldHandle f;
    f.kind_ = Kind::symbolic;
    f.chart_ = std::move(chart);
    f.symbolic_ = std::move(data);
    f.name_ = std::move(name);
    return f;
  }

  static FieldHandle symbolic(std::shared_ptr<const Chart> chart, const std::array<std::string, 4>& sources,
                              std::string name = {}) {
    const auto names = chart->name_list();
    std::array<expr::Expression, 4> comps;
    for (std::size_t i = 0; i < 4; ++i) comps[i] = expr::Expression::parse(sources[i], names);
    return symbolic(std::move(chart), std::move(comps), std::move(name));
  }

  /// Field given by an evaluator; derivatives by central differences with step h
  /// unless an analytic Jacobian is supplied.
  static FieldHandle numeric(std::shared_ptr<const Chart> chart, Evaluator eval, double h = kDefaultStep,
                             std::string name = {}, JacobianFn jac = {}) {
    if (!(h > 0.0)) throw UsageError("difference step must be positive");
    FieldHandle f;
    f.kind_ = Kind::numeric;
    f.chart_ = std::move(chart);
    f.eval_ = std::move(eval);
    f.jac_ = std::move(jac);
    f.h_ = h;
    f.name_ = std::move(name);
    return f;
  }

  Kind kind() const { return kind_; }
  bool valid() const { return kind_ == Kind::invariant || symbolic_ || eval_; }
  const std::string& name() const { return name_; }
  FieldHandle named(std::string n) const {
    FieldHandle f = *this;
    f.name_ = std::move(n);
    return f;
  }
  double step() const { return h_; }
  const std::shared_ptr<const Chart>& chart() const { return chart_; }
  const std::shared_ptr<const LieAlgebra>& algebra() const { return algebra_; }
  bool is_invariant() const { return kind_ == Kind::invariant; }
  const Vec4& constant_components() const { return constant_; }

  DerivativeScheme scheme() const {
    if (kind_ == Kind::symbolic) return DerivativeScheme::analytic;
    if (kind_ == Kind::numeric && jac_) return DerivativeScheme::analytic;
    return DerivativeScheme::central_difference;
  }

  /// Same field, derivatives forced to central differences with step h.
  FieldHandle with_central_difference(double h) const {
    if (kind_ == Kind::invariant) throw UsageError("invariant fields carry exact brackets");
    FieldHandle self = *this;
    return numeric(chart_, [self](const Point& p) { return self(p); }, h, name_);
  }

  Vec4 operator()(const Point& p) const {
    switch (kind_) {
      case Kind::invariant: return constant_;
      case Kind::symbolic: {
        const Vec4& c = p.coords();
        const std::array<double, 4> x{c(0), c(1), c(2), c(3)};
        Vec4 out;
        for (int k = 0; k < 4; ++k) out(k) = symbolic_->comps[static_cast<std::size_t>(k)](x);
        if (!out.allFinite()) throw DomainError("field '" + name_ + "' is not finite at the query point");
        return out;
      }
      case Kind::numeric: {
        if (!eval_) throw UsageError("empty field handle");
        return eval_(p);
      }
    }
    return Vec4::Zero();
  }

  /// Coordinate Jacobian (column i = derivative along coordinate i).
  Mat4 jacobian(const Point& p) const {
    if (kind_ == Kind::invariant) throw UsageError("coordinate Jacobian of an invariant field");
    if (kind_ == Kind::symbolic) {
      const Vec4& c = p.coords();
      const std::array<double, 4> x{c(0), c(1), c(2), c(3)};
      Mat4 m;
      for (int k = 0; k < 4; ++k)
        for (int i = 0; i < 4; ++i) m(k, i) = symbolic_->jac[static_cast<std::size_t>(k * 4 + i)](x);
      return m;
    }
    if (jac_) return jac_(p);
    return central_jacobian(p);
  }

  Mat4 central_jacobian(const Point& p) const {
    Mat4 m;
    for (int i = 0; i < 4; ++i) {
      Vec4 plus = p.coords();
      Vec4 minus = p.coords();
      plus(i) += h_;
      minus(i) -= h_;
      if (chart_ && (!chart_->contains(plus) || !chart_->contains(minus))) {
        throw DomainError("difference stencil leaves the chart's valid region");
      }
      const Point pp = chart_ ? Point(chart_->normalize(plus)) : Point(plus);
      const Point pm = chart_ ? Point(chart_->normalize(minus)) : Point(minus);
      m.col(i) = ((*this)(pp) - (*this)(pm)) / (2.0 * h_);
    }
    return m;
  }

  const std::array<expr::Expression, 4>& expressions() const {
    if (kind_ != Kind::symbolic) throw UsageError("field has no symbolic form");
    return symbolic_->comps;
  }

 private:
  struct SymbolicData {
    std::array<expr::Expression, 4> comps;
    std::array<expr::Expression, 16> jac;
  };

  Kind kind_ = Kind::numeric;
  std::string name_;
  std::shared_ptr<const LieAlgebra> algebra_;
  Vec4 constant_ = Vec4::Zero();
  std::shared_ptr<const Chart> chart_;
  std::shared_ptr<const SymbolicData> symbolic_;
  Evaluator eval_;
  JacobianFn jac_;
  double h_ = kDefaultStep;
};

/// sum_i weights[i] * fields[i]; stays invariant/symbolic when every term is.
inline FieldHandle linear_combination(const std::vector<std::pair<double, FieldHandle>>& terms,
                                      std::string name = {}) {
  if (terms.empty()) throw UsageError("empty linear combination");
  const auto kind = terms.front().second.kind();
  bool same = true;
  for (const auto& [w, f] : terms) same = same && f.kind() == kind;
  if (same && kind == FieldHandle::Kind::invariant) {
    Vec4 c = Vec4::Zero();
    for (const auto& [w, f] : terms) {
      if (f.algebra() != terms.front().second.algebra()) throw UsageError("fields from different algebras");
      c += w * f.constant_components();
    }
    return FieldHandle::invariant(terms.front().second.algebra(), c, std::move(name));
  }
  for (const auto& [w, f] : terms) {
    if (f.is_invariant()) throw UsageError("cannot mix invariant and chart fields");
  }
  if (same && kind == FieldHandle::Kind::symbolic) {
    std::array<expr::Expression, 4> comps;
    for (std::size_t k = 0; k < 4; ++k) {
      const auto names = terms.front().second.chart()->name_list();
      expr::Expression acc = expr::Expression::constant(0.0, names);
      for (const auto& [w, f] : terms) acc = acc + w * f.expressions()[k];
      comps[k] = acc;
    }
    return FieldHandle::symbolic(terms.front().second.chart(), std::move(comps), std::move(name));
  }
  auto captured = terms;
  double h = 0.0;
  bool analytic = true;
  for (const auto& [w, f] : terms) {
    h = std::max(h, f.step());
    analytic = analytic && f.scheme() == DerivativeScheme::analytic;
  }
  FieldHandle::JacobianFn jac;
  if (analytic) {
    jac = [captured](const Point& p) {
      Mat4 m = Mat4::Zero();
      for (const auto& [w, f] : captured) m += w * f.jacobian(p);
      return m;
    };
  }
  return FieldHandle::numeric(
      terms.front().second.chart(),
      [captured](const Point& p) {
        Vec4 v = Vec4::Zero();
        for (const auto& [w, f] : captured) v += w * f(p);
        return v;
      },
      h, std::move(name), std::move(jac));
}

inline FieldHandle operator-(const FieldHandle& f) { return linear_combination({{-1.0, f}}, f.name().empty() ? "" : "-" + f.name()); }

/// [X,Y](p) = DY.X - DX.Y, exact for invariant or symbolic pairs.
inline TangentVector lie_bracket(const FieldHandle& x, const FieldHandle& y, const Point& p) {
  if (x.is_invariant() && y.is_invariant()) {
    if (x.algebra() != y.algebra() && x.algebra()->constants() != y.algebra()->constants()) {
      throw UsageError("bracket of fields from different algebras");
    }
    const Eigen::VectorXd b = x.algebra()->bracket(x.constant_components(), y.constant_components());
    return {p, Vec4(b)};
  }
  if (x.is_invariant() || y.is_invariant()) {
    throw DomainError("bracket of an invariant field with a non-invariant one needs a chart realization");
  }
  const Vec4 xv = x(p);
  const Vec4 yv = y(p);
  return {p, Vec4(y.jacobian(p) * xv - x.jacobian(p) * yv)};
}

/// The bracket as a field handle (symbolic when both inputs are).
inline FieldHandle bracket_field(const FieldHandle& x, const FieldHandle& y) {
  std::string name = "[" + x.name() + "," + y.name() + "]";
  if (x.is_invariant() && y.is_invariant()) {
    return FieldHandle::invariant(x.algebra(), lie_bracket(x, y, Point()).components, std::move(name));
  }
  if (x.kind() == FieldHandle::Kind::symbolic && y.kind() == FieldHandle::Kind::symbolic) {
    const auto& xe = x.expressions();
    const auto& ye = y.expressions();
    const auto names = x.chart()->name_list();
    std::array<expr::Expression, 4> comps;
    for (int k = 0; k < 4; ++k) {
      expr::Expression acc = expr::Expression::constant(0.0, names);
      for (int i = 0; i < 4; ++i) {
        const auto& xi = xe[static_cast<std::size_t>(i)];
        const auto& yi = ye[static_cast<std::size_t>(i)];
        if (!xi.is_zero()) acc = acc + xi * ye[static_cast<std::size_t>(k)].derivative(i);
        if (!yi.is_zero()) acc = acc - yi * xe[static_cast<std::size_t>(k)].derivative(i);
      }
      comps[static_cast<std::size_t>(k)] = acc;
    }
    return FieldHandle::symbolic(x.chart(), std::move(comps), std::move(name));
  }
  if (x.is_invariant() || y.is_invariant()) {
    throw DomainError("bracket of an invariant field with a non-invariant one needs a chart realization");
  }
  return FieldHandle::numeric(
      x.chart(), [x, y](const Point& p) { return lie_bracket(x, y, p).components; },
      std::max(x.step(), y.step()), std::move(name));
}

/// Rank-k plane field spanned by k field handles.
struct DistributionSpec {
  std::string name;
  std::vector<FieldHandle> frame;

  int rank() const { return static_cast<int>(frame.size()); }

  Mat4X evaluate(const Point& p) const {
    Mat4X m(4, rank());
    for (int i = 0; i < rank(); ++i) m.col(i) = frame[static_cast<std::size_t>(i)](p);
    return m;
  }

  /// Frame at p, checked for linear independence.
  Mat4X checked_frame(const Point& p, double tol = kDefaultRankTol) const {
    if (rank() < 1 || rank() > 3) throw UsageError("distribution rank must be 1, 2 or 3");
    Mat4X m = evaluate(p);
    const auto r = numerical_rank(m, tol);
    if (r.rank != rank()) {
      throw RankError("frame of '" + name + "' is degenerate at the query point (rank " +
                      std::to_string(r.rank) + " < " + std::to_string(rank()) + ")");
    }
    return m;
  }
};

/// Numerical rank of vectors sharing one base point.
inline RankResult span_rank(const std::vector<TangentVector>& vectors, double tol = kDefaultRankTol) {
  if (vectors.empty()) throw UsageError("span_rank of an empty list");
  Mat4X m(4, static_cast<Eigen::Index>(vectors.size()));
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (!(vectors[i].base == vectors.front().base)) throw UsageError("span_rank: vectors at different base points");
    m.col(static_cast<Eigen::Index>(i)) = vectors[i].components;
  }
  return numerical_rank(m, tol);
}

/// Line-valued 2-form of a rank-3 distribution, in frame coordinates.
struct TransverseForm {
  Mat3 omega = Mat3::Zero();
  /// Index of the standard basis vector used as complement.
  int complement_index = 0;
  Vec4 complement = Vec4::Zero();
  Mat4X frame;

  double magnitude() const { return omega.cwiseAbs().maxCoeff(); }
};

inline TransverseForm transverse_form(const DistributionSpec& e, const Point& p, double tol = kDefaultRankTol) {
  if (e.rank() != 3) throw UsageError("transverse_form needs a rank-3 distribution");
  TransverseForm out;
  out.frame = e.checked_frame(p, tol);
  const Mat4X q = orthonormal_basis(out.frame);
  double best = -1.0;
  for (int k = 0; k < 4; ++k) {
    const Vec4 ek = Vec4::Unit(k);
    const double res = (ek - q * (q.transpose() * ek)).norm();
    if (res > best + 1e-12) {
      best = res;
      out.complement_index = k;
    }
  }
  out.complement = Vec4::Unit(out.complement_index);
  Mat4 basis;
  basis << out.frame, out.complement;
  const Eigen::PartialPivLU<Mat4> lu(basis);
  for (int i = 0; i < 3; ++i) {
    for (int j = i + 1; j < 3; ++j) {
      const Vec4 b = lie_bracket(e.frame[static_cast<std::size_t>(i)], e.frame[static_cast<std::size_t>(j)], p).components;
      const Vec4 coeff = lu.solve(b);
      out.omega(i, j) = coeff(3);
      out.omega(j, i) = -coeff(3);
    }
  }
  return out;
}

/// Unit vector spanning the kernel of the transverse form.
/// `orientation`, when given, fixes the sign (positive pairing with it).
inline TangentVector characteristic_line(const DistributionSpec& e, const Point& p,
                                         const FieldHandle* orientation = nullptr,
                                         double tol = kDefaultRankTol) {
  const TransverseForm tf = transverse_form(e, p, tol);
  const double scale = tf.frame.norm() * tf.frame.norm();
  if (tf.magnitude() <= 1e-13 * std::max(1.0, scale)) {
    throw DomainError("integrable point: transverse form vanishes");
  }
  const Vec3 k(tf.omega(1, 2), -tf.omega(0, 2), tf.omega(0, 1));
  Vec4 v = tf.frame * k;
  const double n = v.norm();
  if (n == 0.0) throw DomainError("integrable point: characteristic vector vanishes");
  v /= n;
  if (orientation) {
    if (v.dot((*orientation)(p)) < 0.0) v = -v;
  } else {
    for (int i = 0; i < 4; ++i) {
      if (std::abs(v(i)) > 1e-14) {
        if (v(i) < 0.0) v = -v;
        break;
      }
    }
  }
  return {p, v};
}

struct EvenContactReport {
  bool pass = true;
  double tolerance = 0.0;
  std::vector<double> margins;
  double worst_margin = std::numeric_limits<double>::infinity();
  std::size_t worst_sample = 0;
};

inline EvenContactReport is_even_contact(const DistributionSpec& e, const std::vector<Point>& samples,
                                         double tol = kDefaultRankTol) {
  if (e.rank() != 3) throw UsageError("even-contact check needs a rank-3 distribution");
  EvenContactReport rep;
  rep.tolerance = tol;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double m = transverse_form(e, samples[i]).magnitude();
    rep.margins.push_back(m);
    if (m < rep.worst_margin) {
      rep.worst_margin = m;
      rep.worst_sample = i;
    }
    if (!(m > tol)) rep.pass = false;
  }
  return rep;
}

/// Frame (X, Y, [X,Y]) of the 3-space induced by a rank-2 distribution.
inline Mat4X induced_frame(const DistributionSpec& d, const Point& p) {
  if (d.rank() != 2) throw UsageError("induced frame needs a rank-2 distribution");
  Mat4X m(4, 3);
  m.col(0) = d.frame[0](p);
  m.col(1) = d.frame[1](p);
  m.col(2) = lie_bracket(d.frame[0], d.frame[1], p).components;
  return m;
}

/// +1 when the orientations induced on the common 3-space agree, -1 otherwise.
inline int orientation_agreement(const DistributionSpec& d1, const DistributionSpec& d2, const Point& p,
                                 double tol = 1e-6) {
  const Mat4X b1 = induced_frame(d1, p);
  const Mat4X b2 = induced_frame(d2, p);
  if (numerical_rank(b1, kDefaultRankTol).rank != 3 || numerical_rank(b2, kDefaultRankTol).rank != 3) {
    throw RankError("induced frame is not of rank 3");
  }
  if (subspace_distance(b1, b2) >= tol) {
    throw CheckFailed("induced 3-spaces differ beyond tolerance");
  }
  const Mat3 c = b1.colPivHouseholderQr().solve(b2);
  const double det = c.determinant();
  return det > 0.0 ? 1 : -1;
}

}  // namespace engel_lab
