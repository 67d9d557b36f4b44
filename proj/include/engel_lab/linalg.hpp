#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "errors.hpp"

namespace engel_lab {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Mat4X = Eigen::Matrix<double, 4, Eigen::Dynamic>;

inline constexpr double kPi = std::numbers::pi;

/// Result of a numerical rank test.
struct RankResult {
  int rank = 0;
  /// Smallest retained singular value divided by the largest one.
  double margin = 0.0;
  std::vector<double> singular_values;
};

/// Numerical rank of the columns of `m`: singular values above rel_tol * sigma_max.
inline RankResult numerical_rank(const Mat4X& m, double rel_tol) {
  if (m.cols() == 0) throw UsageError("rank of an empty vector list");
  Eigen::JacobiSVD<Mat4X> svd(m);
  const auto& s = svd.singularValues();
  RankResult out;
  out.singular_values.assign(s.data(), s.data() + s.size());
  const double smax = s.size() ? s(0) : 0.0;
  if (smax == 0.0) return out;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > rel_tol * smax) {
      out.rank = static_cast<int>(i) + 1;
      out.margin = s(i) / smax;
    }
  }
  return out;
}

/// Orthonormal basis of the column span (numerical rank at rel_tol).
inline Mat4X orthonormal_basis(const Mat4X& m, double rel_tol = 1e-10) {
  Eigen::JacobiSVD<Mat4X> svd(m, Eigen::ComputeFullU);
  const int r = numerical_rank(m, rel_tol).rank;
  return svd.matrixU().leftCols(r);
}

/// sin of the largest principal angle between two column spans of equal dimension.
inline double subspace_distance(const Mat4X& a, const Mat4X& b) {
  const Mat4X qa = orthonormal_basis(a);
  const Mat4X qb = orthonormal_basis(b);
  if (qa.cols() != qb.cols()) return 1.0;
  const Mat4 pa = qa * qa.transpose();
  const Mat4 pb = qb * qb.transpose();
  // ||P_a - P_b||_2 equals the sine of the largest principal angle.
  Eigen::JacobiSVD<Mat4> svd(pa - pb);
  return std::min(1.0, svd.singularValues()(0));
}

/// Angle between a vector and the column span of `plane`, in [0, pi/2].
inline double angle_to_span(const Vec4& v, const Mat4X& plane) {
  const double n = v.norm();
  if (n == 0.0) throw RankError("angle of a zero vector");
  const Mat4X q = orthonormal_basis(plane);
  const Vec4 proj = q * (q.transpose() * v);
  const double s = (v - proj).norm() / n;
  return std::asin(std::clamp(s, 0.0, 1.0));
}

/// Largest principal angle between two column spans, in [0, pi/2].
inline double largest_principal_angle(const Mat4X& a, const Mat4X& b) {
  return std::asin(std::clamp(subspace_distance(a, b), 0.0, 1.0));
}

/// Symmetric positive-definite test via the smaller eigenvalue.
inline bool is_spd(const Mat2& g) {
  if (!g.allFinite()) return false;
  if (std::abs(g(0, 1) - g(1, 0)) > 1e-12 * (1.0 + g.norm())) return false;
  Eigen::SelfAdjointEigenSolver<Mat2> es(g);
  return es.eigenvalues()(0) > 0.0;
}

}  // namespace engel_lab
