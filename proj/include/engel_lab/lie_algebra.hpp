#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "errors.hpp"

namespace engel_lab {

/// Worst Jacobi violation over all basis triples.
struct JacobiReport {
  double residual = 0.0;
  std::array<int, 3> worst_triple{0, 0, 0};
};

/// Finite-dimensional real Lie algebra given by structure constants
/// [e_i, e_j] = sum_k c(i, j, k) e_k.
class LieAlgebra {
 public:
  LieAlgebra() = default;

  LieAlgebra(int dim, std::vector<double> constants, std::vector<std::string> basis_names = {})
      : dim_(dim), c_(std::move(constants)), names_(std::move(basis_names)) {
    if (dim_ <= 0 || static_cast<int>(c_.size()) != dim_ * dim_ * dim_) {
      throw ModelError("structure constants must be a " + std::to_string(dim_) + "x" +
                       std::to_string(dim_) + "x" + std::to_string(dim_) + " array");
    }
    for (double v : c_) {
      if (!std::isfinite(v)) throw ModelError("structure constants must be finite");
    }
    if (names_.empty()) {
      for (int i = 0; i < dim_; ++i) names_.push_back("e" + std::to_string(i));
    }
    if (static_cast<int>(names_.size()) != dim_) throw ModelError("basis name count != dimension");
  }

  int dimension() const { return dim_; }
  const std::vector<std::string>& basis_names() const { return names_; }
  const std::vector<double>& constants() const { return c_; }

  double c(int i, int j, int k) const { return c_[static_cast<std::size_t>((i * dim_ + j) * dim_ + k)]; }

  Eigen::VectorXd bracket(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(dim_);
    for (int i = 0; i < dim_; ++i) {
      if (a(i) == 0.0) continue;
      for (int j = 0; j < dim_; ++j) {
        const double w = a(i) * b(j);
        if (w == 0.0) continue;
        for (int k = 0; k < dim_; ++k) out(k) += w * c(i, j, k);
      }
    }
    return out;
  }

  /// Matrix of ad_a in the basis: column j holds the components of [a, e_j].
  Eigen::MatrixXd ad(const Eigen::VectorXd& a) const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dim_, dim_);
    for (int j = 0; j < dim_; ++j) {
      for (int k = 0; k < dim_; ++k) {
        double s = 0.0;
        for (int i = 0; i < dim_; ++i) s += a(i) * c(i, j, k);
        m(k, j) = s;
      }
    }
    return m;
  }

  double antisymmetry_residual() const {
    double worst = 0.0;
    for (int i = 0; i < dim_; ++i)
      for (int j = 0; j < dim_; ++j)
        for (int k = 0; k < dim_; ++k) worst = std::max(worst, std::abs(c(i, j, k) + c(j, i, k)));
    return worst;
  }

  JacobiReport jacobi() const {
    JacobiReport rep;
    auto e = [&](int i) {
      Eigen::VectorXd v = Eigen::VectorXd::Zero(dim_);
      v(i) = 1.0;
      return v;
    };
    for (int i = 0; i < dim_; ++i) {
      for (int j = i + 1; j < dim_; ++j) {
        for (int l = j + 1; l < dim_; ++l) {
          const Eigen::VectorXd r = bracket(e(i), bracket(e(j), e(l))) +
                                    bracket(e(j), bracket(e(l), e(i))) +
                                    bracket(e(l), bracket(e(i), e(j)));
          const double m = r.cwiseAbs().maxCoeff();
          if (m > rep.residual) {
            rep.residual = m;
            rep.worst_triple = {i, j, l};
          }
        }
      }
    }
    return rep;
  }

  /// Direct sum with a one-dimensional central ideal appended as the last basis vector.
  LieAlgebra with_central_extension(const std::string& name) const {
    const int n = dim_ + 1;
    std::vector<double> out(static_cast<std::size_t>(n * n * n), 0.0);
    for (int i = 0; i < dim_; ++i)
      for (int j = 0; j < dim_; ++j)
        for (int k = 0; k < dim_; ++k) out[static_cast<std::size_t>((i * n + j) * n + k)] = c(i, j, k);
    auto names = names_;
    names.push_back(name);
    return LieAlgebra(n, std::move(out), std::move(names));
  }

 private:
  int dim_ = 0;
  std::vector<double> c_;
  std::vector<std::string> names_;
};

}  // namespace engel_lab
