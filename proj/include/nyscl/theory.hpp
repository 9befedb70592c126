#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nyscl/decoder.hpp"
#include "nyscl/kernel.hpp"
#include "nyscl/rng.hpp"
#include "nyscl/types.hpp"

namespace nyscl {

inline constexpr Index kAmbientCap = 2000;

/// Finite-dimensional stand-in for the feature space: the span of the
/// canonical features of n points, in the eigenbasis of K_n. Every operator
/// quantity below is an empirical proxy computed in these coordinates, where
/// Sigma_hat = diag(lambda_j / n).
struct AmbientSpace {
  Matrix points;        // n x d, possibly a uniform subsample of the input
  double bandwidth_sq = 0.0;
  Vector eigvals;       // retained eigenvalues of K_n, descending
  Matrix eigvecs;       // n x r
  Index source_n = 0;   // rows in the input before subsampling
  bool subsampled = false;

  Index n() const { return points.rows(); }
  Index rank() const { return eigvals.size(); }
  /// Eigenvalues of Sigma_hat.
  Vector sigma() const { return eigvals / static_cast<double>(n()); }
  /// n x r; row i = coordinates of Phi(x_i). F F^T reproduces K_n.
  Matrix features() const;
  /// Coordinates of the projection of Phi(x) onto the span.
  Vector embed(const Vector& x) const;
};

/// Eigendecomposes the Gram of X (uniformly subsampled to `cap` rows when
/// larger), dropping eigenvalues <= rel_tol * lambda_max.
AmbientSpace build_ambient(const Matrix& X, double bandwidth_sq, std::uint64_t seed,
                           Index cap = kAmbientCap, double rel_tol = kDefaultRelTol);

/// tr((K/n)(K/n + lambda I)^{-1}).
double effective_dimension(const SymMatrix& K, double lambda);
double effective_dimension(const AmbientSpace& amb, double lambda);

/// max_i F_i^T (Sigma_hat + lambda I)^{-1} F_i.
double n_infty(const AmbientSpace& amb, double lambda);

/// Largest eigenvalue of (Sigma_hat + lambda I)^{1/2} P^perp (Sigma_hat + lambda I)^{1/2},
/// P the projector onto the span of the landmark feature rows. Computed
/// within span(F), so all n landmarks give 0 and none gives sigma_max + lambda.
double projection_defect(const AmbientSpace& amb, const std::vector<Index>& landmarks,
                         double lambda);

/// max(67, 5 n_infty) log(4 K^2 / (lambda delta)).
double required_m_uniform(double lambda, double delta, double n_infty_val, double K = 1.0);
/// max(334, 78 z^2 eff_dim) log(16 n / delta).
double required_m_als(double lambda, double delta, Index n, double eff_dim_val, double z);

/// Draws a pair of mixtures to compare.
using PairSampler = std::function<std::pair<Mixture, Mixture>(Rng&)>;

/// Pairs of k-Dirac mixtures with centers pairwise >= 2 epsilon apart,
/// norms <= radius and random weights.
PairSampler separated_dirac_pairs(Index d, int k, double epsilon, double radius);

struct SecantProbe {
  double sup = 0.0;
  std::optional<double> source_sum;  // max over trials, when s is given
  std::vector<double> values;        // one per non-skipped trial
  int skipped = 0;
};

/// Monte-Carlo sup of N_u(lambda) = u^T (Sigma_hat + lambda I)^{-1} u over
/// normalized secants u = (A(p) - A(q)) / |A(p) - A(q)|. With s in (0, 1/2)
/// also reports max sum_l <u, e_l>^2 / sigma_l^{2s}.
SecantProbe secant_probe(const AmbientSpace& amb, const PairSampler& sampler, double lambda,
                         int trials, std::uint64_t seed, std::optional<double> s = std::nullopt);

struct TheoryOptions {
  double delta = 0.1;
  double z = 1.0;
  int defect_trials = 50;
  int probe_trials = 0;  // 0 disables the secant probe
  int probe_k = 3;
  double probe_epsilon = 1.0;
  double probe_radius = 0.0;  // <= 0: largest data norm
  std::optional<double> source_s;
  std::uint64_t seed = 0;
};

struct TheoryReport {
  double lambda = 0.0;
  double eff_dim = 0.0;
  double n_infty = 0.0;
  double required_m_uniform = 0.0;
  double required_m_als = 0.0;
  Index m_used = 0;  // ceil(required_m_uniform) capped at n
  double projection_defect = 0.0;  // median over defect trials
  double defect_pass_rate = 0.0;   // fraction of trials with defect <= 3 lambda
  bool bound_3lambda_ok = false;   // pass rate >= 1 - delta
  std::optional<double> secant_sup_estimate;
  std::optional<double> source_condition_sum;
  Index ambient_n = 0;
  bool subsampled = false;
};

TheoryReport theory_report(const AmbientSpace& amb, double lambda, const TheoryOptions& opts);

std::string format_report(const TheoryReport& r);
std::string report_csv_header();
std::string report_csv_row(const TheoryReport& r);

}  // namespace nyscl
