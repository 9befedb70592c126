#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nyscl/kernel.hpp"
#include "nyscl/types.hpp"

namespace nyscl {

enum class Sampling { Uniform, ALS, Greedy };

std::string to_string(Sampling s);
Sampling parse_sampling(const std::string& s);

struct LandmarkSet {
  Matrix points;                     // m x d, row i is dataset row source_indices[i]
  std::vector<Index> source_indices;
  Sampling method = Sampling::Uniform;
  std::uint64_t seed = 0;
  std::optional<double> als_lambda;
  // Greedy only: selection stopped early because every remaining Schur
  // complement fell below the rank threshold.
  bool rank_exhausted = false;

  Index size() const { return points.rows(); }
};

/// Builds a landmark set from explicit dataset indices.
LandmarkSet landmarks_from_indices(const Matrix& X, std::vector<Index> indices, Sampling method,
                                   std::uint64_t seed);

/// m distinct rows drawn uniformly without replacement.
LandmarkSet sample_uniform(const Matrix& X, Index m, std::uint64_t seed);

struct LeverageScores {
  double lambda = 0.0;
  Vector scores;
};

/// Exact ridge leverage scores diag(K (K + lambda n I)^{-1}).
LeverageScores leverage_scores(const SymMatrix& K, double lambda);

/// m i.i.d. draws proportional to the leverage scores, then deduplicated in
/// draw order, so the result may hold fewer than m landmarks.
LandmarkSet sample_als(const Matrix& X, const SymMatrix& K, Index m, double lambda,
                       std::uint64_t seed);
/// Same, from precomputed scores.
LandmarkSet sample_als(const Matrix& X, const LeverageScores& scores, Index m,
                       std::uint64_t seed);

inline constexpr double kGreedyRankTol = 1e-12;

/// Greedy Schur-complement (pivoted Cholesky) selection. Ties go to the
/// lowest index. Deterministic; the seed is only recorded.
LandmarkSet sample_greedy(const Matrix& X, const GaussianKernel& kernel, Index m,
                          std::uint64_t seed);

}  // namespace nyscl
