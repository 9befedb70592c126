#include "nyscl/landmarks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "nyscl/error.hpp"
#include "nyscl/rng.hpp"

namespace nyscl {

std::string to_string(Sampling s) {
  switch (s) {
    case Sampling::Uniform: return "uniform";
    case Sampling::ALS: return "als";
    case Sampling::Greedy: return "greedy";
  }
  return "?";
}

Sampling parse_sampling(const std::string& s) {
  if (s == "uniform") return Sampling::Uniform;
  if (s == "als") return Sampling::ALS;
  if (s == "greedy") return Sampling::Greedy;
  fail(ErrorKind::InvalidArgument, "unknown sampling scheme '" + s + "'");
}

LandmarkSet landmarks_from_indices(const Matrix& X, std::vector<Index> indices, Sampling method,
                                   std::uint64_t seed) {
  LandmarkSet out;
  out.points.resize(static_cast<Index>(indices.size()), X.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    require(indices[i] >= 0 && indices[i] < X.rows(), "landmark index out of range");
    out.points.row(static_cast<Index>(i)) = X.row(indices[i]);
  }
  out.source_indices = std::move(indices);
  out.method = method;
  out.seed = seed;
  return out;
}

LandmarkSet sample_uniform(const Matrix& X, Index m, std::uint64_t seed) {
  const Index n = X.rows();
  require(m >= 1, "sample_uniform: m must be at least 1");
  require(m <= n, "sample_uniform: m = " + std::to_string(m) + " exceeds n = " + std::to_string(n));
  std::vector<Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Index{0});
  Rng rng(seed, Stream::Landmarks);
  // Partial Fisher-Yates: the first m slots are a uniform m-subset.
  for (Index i = 0; i < m; ++i) {
    const auto j = i + static_cast<Index>(rng.below(static_cast<std::uint64_t>(n - i)));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  idx.resize(static_cast<std::size_t>(m));
  return landmarks_from_indices(X, std::move(idx), Sampling::Uniform, seed);
}

LeverageScores leverage_scores(const SymMatrix& K, double lambda) {
  require(lambda > 0.0, "leverage_scores: lambda must be positive");
  const Index n = K.order();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(K.entries());
  if (eig.info() != Eigen::Success) fail(ErrorKind::Numerical, "leverage_scores: eigensolver failed");
  const double ln = lambda * static_cast<double>(n);
  Vector ratio = eig.eigenvalues().unaryExpr([ln](double l) {
    const double lp = std::max(l, 0.0);
    return lp / (lp + ln);
  });
  const Matrix& V = eig.eigenvectors();
  LeverageScores out;
  out.lambda = lambda;
  out.scores = V.array().square().matrix() * ratio;
  return out;
}

LandmarkSet sample_als(const Matrix& X, const SymMatrix& K, Index m, double lambda,
                       std::uint64_t seed) {
  require_dims(K.order() == X.rows(), "sample_als: kernel matrix does not match dataset");
  return sample_als(X, leverage_scores(K, lambda), m, seed);
}

LandmarkSet sample_als(const Matrix& X, const LeverageScores& lev, Index m, std::uint64_t seed) {
  require(m >= 1, "sample_als: m must be at least 1");
  require_dims(lev.scores.size() == X.rows(), "sample_als: score count does not match dataset");
  const Index n = X.rows();
  std::vector<double> cdf(static_cast<std::size_t>(n));
  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    total += std::max(lev.scores[i], 0.0);
    cdf[static_cast<std::size_t>(i)] = total;
  }
  if (!(total > 0.0)) fail(ErrorKind::Numerical, "sample_als: all leverage scores are zero");

  Rng rng(seed, Stream::Landmarks);
  std::vector<char> taken(static_cast<std::size_t>(n), 0);
  std::vector<Index> idx;
  for (Index t = 0; t < m; ++t) {
    const double u = rng.uniform() * total;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    if (it == cdf.end()) {
      // u rounded up to total: take the last index with positive mass.
      --it;
      while (it != cdf.begin() && *(it - 1) == *it) --it;
    }
    const auto i = static_cast<Index>(it - cdf.begin());
    if (!taken[static_cast<std::size_t>(i)]) {
      taken[static_cast<std::size_t>(i)] = 1;
      idx.push_back(i);
    }
  }
  LandmarkSet out = landmarks_from_indices(X, std::move(idx), Sampling::ALS, seed);
  out.als_lambda = lev.lambda;
  return out;
}

LandmarkSet sample_greedy(const Matrix& X, const GaussianKernel& kernel, Index m,
                          std::uint64_t seed) {
  const Index n = X.rows();
  require(m >= 1, "sample_greedy: m must be at least 1");
  require(m <= n, "sample_greedy: m = " + std::to_string(m) + " exceeds n = " + std::to_string(n));

  // residual[i] = k(x_i, x_i) - phi(x_i)^T K_{t-1}^{-1} phi(x_i), maintained
  // through the columns L of an incremental Cholesky factor.
  Vector residual(n);
  for (Index i = 0; i < n; ++i) residual[i] = kernel.eval(X.row(i).transpose(), X.row(i).transpose());
  Matrix L(n, m);
  std::vector<char> chosen(static_cast<std::size_t>(n), 0);
  std::vector<Index> idx;
  bool exhausted = false;

  for (Index t = 0; t < m; ++t) {
    Index best = -1;
    double best_val = -std::numeric_limits<double>::infinity();
    for (Index i = 0; i < n; ++i) {
      if (chosen[static_cast<std::size_t>(i)]) continue;
      if (residual[i] > best_val) {
        best_val = residual[i];
        best = i;
      }
    }
    if (best < 0 || best_val < kGreedyRankTol) {
      exhausted = true;
      break;
    }
    chosen[static_cast<std::size_t>(best)] = 1;
    idx.push_back(best);
    const double pivot = std::sqrt(best_val);
    const Matrix col = kernel.gram(X, X.row(best));
    for (Index i = 0; i < n; ++i) {
      double v = col(i, 0);
      for (Index s = 0; s < t; ++s) v -= L(i, s) * L(best, s);
      L(i, t) = v / pivot;
    }
    for (Index i = 0; i < n; ++i) residual[i] -= L(i, t) * L(i, t);
    residual[best] = 0.0;
  }
  LandmarkSet out = landmarks_from_indices(X, std::move(idx), Sampling::Greedy, seed);
  out.rank_exhausted = exhausted;
  return out;
}

}  // namespace nyscl
