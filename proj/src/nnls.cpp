#include <cmath>
#include <limits>
#include <vector>

#include "nyscl/decoder.hpp"
#include "nyscl/error.hpp"

namespace nyscl {

namespace {

Vector solve_passive(const Matrix& A, const Vector& b, const std::vector<char>& passive) {
  std::vector<Index> cols;
  for (std::size_t j = 0; j < passive.size(); ++j)
    if (passive[j]) cols.push_back(static_cast<Index>(j));
  Matrix Ap(A.rows(), static_cast<Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) Ap.col(static_cast<Index>(c)) = A.col(cols[c]);
  const Vector zp = Ap.colPivHouseholderQr().solve(b);
  Vector z = Vector::Zero(A.cols());
  for (std::size_t c = 0; c < cols.size(); ++c) z[cols[c]] = zp[static_cast<Index>(c)];
  return z;
}

}  // namespace

NnlsResult nnls(const Matrix& A, const Vector& b, int max_iters) {
  require_dims(A.rows() == b.size(), "nnls: dimension mismatch");
  const Index n = A.cols();
  NnlsResult out;
  out.x = Vector::Zero(n);
  if (n == 0) return out;
  if (max_iters <= 0) max_iters = static_cast<int>(3 * n + 10);

  std::vector<char> passive(static_cast<std::size_t>(n), 0), blocked(static_cast<std::size_t>(n), 0);
  Vector& x = out.x;
  Vector w = A.transpose() * (b - A * x);
  const double tol = 1e-13 * std::max(1.0, A.cwiseAbs().maxCoeff() * b.cwiseAbs().maxCoeff());

  for (int outer = 0; outer < max_iters; ++outer) {
    Index j = -1;
    double best = tol;
    for (Index i = 0; i < n; ++i) {
      if (passive[static_cast<std::size_t>(i)] || blocked[static_cast<std::size_t>(i)]) continue;
      if (w[i] > best) {
        best = w[i];
        j = i;
      }
    }
    if (j < 0) break;
    passive[static_cast<std::size_t>(j)] = 1;
    ++out.iterations;

    for (int inner = 0; inner < 4 * n + 10; ++inner) {
      const Vector z = solve_passive(A, b, passive);
      bool feasible = true;
      for (Index i = 0; i < n; ++i)
        if (passive[static_cast<std::size_t>(i)] && z[i] <= 0.0) feasible = false;
      if (feasible) {
        x = z;
        break;
      }
      if (inner == 0 && z[j] <= 0.0) {
        // The newly freed variable cannot move: degenerate direction.
        passive[static_cast<std::size_t>(j)] = 0;
        blocked[static_cast<std::size_t>(j)] = 1;
        break;
      }
      double alpha = std::numeric_limits<double>::infinity();
      for (Index i = 0; i < n; ++i)
        if (passive[static_cast<std::size_t>(i)] && z[i] <= 0.0)
          alpha = std::min(alpha, x[i] / (x[i] - z[i]));
      x += alpha * (z - x);
      for (Index i = 0; i < n; ++i) {
        if (passive[static_cast<std::size_t>(i)] && x[i] <= 1e-300) {
          passive[static_cast<std::size_t>(i)] = 0;
          x[i] = 0.0;
        }
      }
    }
    w = A.transpose() * (b - A * x);
    // Variables blocked earlier may become admissible once the support changes.
    std::fill(blocked.begin(), blocked.end(), 0);
    blocked[static_cast<std::size_t>(j)] = passive[static_cast<std::size_t>(j)] ? 0 : 1;
  }
  x = x.cwiseMax(0.0);
  return out;
}

}  // namespace nyscl
