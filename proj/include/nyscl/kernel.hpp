#pragma once

#include "nyscl/types.hpp"

namespace nyscl {

/// Gaussian kernel exp(-|x - y|^2 / (2 sigma^2)), parameterized by sigma^2.
class GaussianKernel {
 public:
  explicit GaussianKernel(double bandwidth_sq);

  double bandwidth_sq() const { return bandwidth_sq_; }

  double eval(const Eigen::Ref<const Vector>& x,
              const Eigen::Ref<const Vector>& y) const;

  /// Rows of X against rows of Y; entry (i, j) = eval(X_i, Y_j).
  Matrix gram(const Matrix& X, const Matrix& Y) const;

 private:
  double bandwidth_sq_;
};

/// Square matrix stored with exact symmetry.
class SymMatrix {
 public:
  SymMatrix() = default;
  /// Throws InvalidArgument unless entries are exactly symmetric.
  explicit SymMatrix(Matrix entries);

  Index order() const { return entries_.rows(); }
  const Matrix& entries() const { return entries_; }
  double operator()(Index i, Index j) const { return entries_(i, j); }

 private:
  Matrix entries_;
};

/// gram(X, X) computed on the upper triangle and mirrored.
SymMatrix gram_sym(const GaussianKernel& kernel, const Matrix& X);

inline constexpr double kDefaultRelTol = 1e-12;

struct InvSqrt {
  SymMatrix w;
  Index rank = 0;
  // Projector onto the retained eigenspace, W K W.
  Matrix projector;
};

/// Pseudo-inverse square root via symmetric eigendecomposition.
/// Eigenvalues at or below rel_tol * lambda_max are treated as zero;
/// eigenvalues below -rel_tol * lambda_max raise a Numerical error.
InvSqrt psd_inv_sqrt(const SymMatrix& K, double rel_tol = kDefaultRelTol);

}  // namespace nyscl
