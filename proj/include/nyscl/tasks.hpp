#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nyscl/types.hpp"

namespace nyscl {

struct Dataset {
  Matrix rows;  // n x d
  std::optional<std::vector<int>> labels;

  Index n() const { return rows.rows(); }
  Index d() const { return rows.cols(); }
};

enum class Task { KMeans, GaussianModel };

std::string to_string(Task t);
Task parse_task(const std::string& s);

/// Output of the learning step. Gaussian models carry weights and diagonal
/// covariances; k-means hypotheses are centers only.
struct Hypothesis {
  Task task = Task::KMeans;
  Matrix centers;  // k x d
  Vector weights;  // GaussianModel only
  Matrix gammas;   // k x d, GaussianModel only

  Index k() const { return centers.rows(); }
};

// --- synthetic data --------------------------------------------------------

struct SyntheticSpec {
  int k = 10;
  int d = 10;
  std::int64_t n = 10000;
  double separation = 2.0;
  std::uint64_t seed = 0;
};

struct SyntheticData {
  Dataset data;
  Matrix means;  // k x d planted component means
  double sigma_inter = 0.0;
};

/// Equal-weight mixture of unit-covariance Gaussians whose means are drawn
/// from N(0, (s k^{1/d})^2 I). Labels are component indices.
SyntheticData gen_synthetic(const SyntheticSpec& spec);

// --- dataset files ---------------------------------------------------------

inline constexpr std::uint32_t kDatasetFormatVersion = 1;

std::vector<std::uint8_t> encode_dataset(const Dataset& ds);
Dataset decode_dataset(const std::vector<std::uint8_t>& bytes);
void save_dataset(const std::string& path, const Dataset& ds);
Dataset load_dataset(const std::string& path);
/// Comma-separated rows; with `last_column_label` the final column is parsed
/// as an integer label.
Dataset parse_csv(const std::string& text, bool last_column_label);
Dataset load_csv(const std::string& path, bool last_column_label);

// --- risks and metrics -----------------------------------------------------

/// Mean over rows of min_i |x - c_i|^p, p in {1, 2}.
double kmeans_risk(const Matrix& X, const Matrix& centers, int p = 2);
/// Index of the nearest center for each row.
std::vector<int> assign_nearest(const Matrix& X, const Matrix& centers);

/// Mean negative log-likelihood under a diagonal Gaussian mixture.
double gmm_nll(const Matrix& X, const Hypothesis& h);
/// Most probable component for each row.
std::vector<int> assign_gmm(const Matrix& X, const Hypothesis& h);

/// Task risk: k-means MSE or GMM NLL.
double task_risk(const Matrix& X, const Hypothesis& h);
std::vector<int> predict_labels(const Matrix& X, const Hypothesis& h);

double adjusted_rand_index(const std::vector<int>& pred, const std::vector<int>& truth);

/// Minimum-cost assignment between rows of A and rows of B (equal counts);
/// perm[i] is the row of B matched to row i of A.
std::vector<int> hungarian_match(const Matrix& cost);
/// Largest center-to-center distance after optimal matching.
double matched_max_distance(const Matrix& truth, const Matrix& estimate);

// --- baselines -------------------------------------------------------------

struct BaselineFit {
  Hypothesis hypothesis;
  double risk = 0.0;                // kmeans_risk (p = 2) or gmm_nll
  std::vector<double> trace;        // per-iteration objective of the winning restart
  int iterations = 0;
};

/// k-means++ seeding, Lloyd iterations to an assignment fixpoint, best of
/// `restarts` by SSE.
BaselineFit lloyd_baseline(const Matrix& X, int k, int restarts, std::uint64_t seed,
                           int max_iters = 300);

/// Diagonal-covariance EM seeded by k-means++, best of `restarts` by NLL.
/// Variances are floored at gamma_floor.
BaselineFit em_baseline(const Matrix& X, int k, int restarts, std::uint64_t seed,
                        double gamma_floor = 1e-6, int max_iters = 500, double tol = 1e-10);

/// One EM update from a given diagonal mixture (exposed for monotonicity checks).
Hypothesis em_step(const Matrix& X, const Hypothesis& h, double gamma_floor);

}  // namespace nyscl
