#include "nyscl/kernel.hpp"

#include <cmath>
#include <string>

#include "nyscl/error.hpp"

namespace nyscl {

GaussianKernel::GaussianKernel(double bandwidth_sq) : bandwidth_sq_(bandwidth_sq) {
  require(bandwidth_sq > 0.0 && std::isfinite(bandwidth_sq),
          "kernel bandwidth sigma^2 must be positive, got " + std::to_string(bandwidth_sq));
}

double GaussianKernel::eval(const Eigen::Ref<const Vector>& x,
                            const Eigen::Ref<const Vector>& y) const {
  require_dims(x.size() == y.size(), "kernel eval: dimension mismatch");
  double d2 = 0.0;
  for (Index j = 0; j < x.size(); ++j) {
    const double t = x[j] - y[j];
    d2 += t * t;
  }
  return std::exp(-d2 / (2.0 * bandwidth_sq_));
}

Matrix GaussianKernel::gram(const Matrix& X, const Matrix& Y) const {
  require_dims(X.cols() == Y.cols(), "gram: dimension mismatch");
  const Index n = X.rows(), p = Y.rows(), d = X.cols();
  const double scale = -1.0 / (2.0 * bandwidth_sq_);
  Matrix out(n, p);
  // Row-major copies keep the inner distance loop contiguous.
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> Xr = X, Yr = Y;
  for (Index j = 0; j < p; ++j) {
    const double* y = Yr.data() + j * d;
    for (Index i = 0; i < n; ++i) {
      const double* x = Xr.data() + i * d;
      double d2 = 0.0;
      for (Index t = 0; t < d; ++t) {
        const double u = x[t] - y[t];
        d2 += u * u;
      }
      out(i, j) = std::exp(d2 * scale);
    }
  }
  return out;
}

SymMatrix::SymMatrix(Matrix entries) : entries_(std::move(entries)) {
  require(entries_.rows() == entries_.cols(), "SymMatrix: matrix is not square");
  for (Index j = 0; j < entries_.cols(); ++j)
    for (Index i = 0; i < j; ++i)
      if (entries_(i, j) != entries_(j, i))
        fail(ErrorKind::InvalidArgument, "SymMatrix: input is not symmetric");
}

SymMatrix gram_sym(const GaussianKernel& kernel, const Matrix& X) {
  const Index n = X.rows(), d = X.cols();
  const double scale = -1.0 / (2.0 * kernel.bandwidth_sq());
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> Xr = X;
  Matrix K(n, n);
  for (Index j = 0; j < n; ++j) {
    K(j, j) = 1.0;
    const double* y = Xr.data() + j * d;
    for (Index i = 0; i < j; ++i) {
      const double* x = Xr.data() + i * d;
      double d2 = 0.0;
      for (Index t = 0; t < d; ++t) {
        const double u = x[t] - y[t];
        d2 += u * u;
      }
      K(i, j) = K(j, i) = std::exp(d2 * scale);
    }
  }
  return SymMatrix(std::move(K));
}

InvSqrt psd_inv_sqrt(const SymMatrix& K, double rel_tol) {
  require(rel_tol >= 0.0, "psd_inv_sqrt: rel_tol must be non-negative");
  const Index m = K.order();
  require(m > 0, "psd_inv_sqrt: empty matrix");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(K.entries());
  if (eig.info() != Eigen::Success)
    fail(ErrorKind::Numerical, "psd_inv_sqrt: eigendecomposition failed");
  const Vector& lam = eig.eigenvalues();
  const Matrix& V = eig.eigenvectors();
  const double lam_max = lam.cwiseAbs().maxCoeff();
  const double cutoff = rel_tol * lam_max;
  if (lam.minCoeff() < -cutoff && lam.minCoeff() < -1e-300)
    fail(ErrorKind::Numerical, "psd_inv_sqrt: matrix has a significantly negative eigenvalue (" +
                                   std::to_string(lam.minCoeff()) + ")");
  Vector g = Vector::Zero(m);
  Index rank = 0;
  for (Index i = 0; i < m; ++i) {
    if (lam[i] > cutoff) {
      g[i] = 1.0 / std::sqrt(lam[i]);
      ++rank;
    }
  }
  Matrix W = V * g.asDiagonal() * V.transpose();
  W = 0.5 * (W + W.transpose()).eval();
  Vector keep = (g.array() > 0.0).cast<double>();
  Matrix P = V * keep.asDiagonal() * V.transpose();
  return InvSqrt{SymMatrix(std::move(W)), rank, std::move(P)};
}

}  // namespace nyscl
