#include "nyscl/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>

#include "nyscl/error.hpp"
#include "nyscl/rng.hpp"

namespace nyscl {

std::string to_string(Task t) { return t == Task::KMeans ? "kmeans" : "gmm"; }

Task parse_task(const std::string& s) {
  if (s == "kmeans") return Task::KMeans;
  if (s == "gmm") return Task::GaussianModel;
  fail(ErrorKind::InvalidArgument, "unknown task '" + s + "'");
}

SyntheticData gen_synthetic(const SyntheticSpec& spec) {
  require(spec.k >= 1 && spec.d >= 1 && spec.n >= 1, "gen_synthetic: k, d, n must be positive");
  require(spec.separation > 0.0, "gen_synthetic: separation must be positive");
  SyntheticData out;
  out.sigma_inter = spec.separation * std::pow(static_cast<double>(spec.k), 1.0 / spec.d);

  Rng mean_rng(spec.seed, Stream::Means);
  out.means.resize(spec.k, spec.d);
  for (int c = 0; c < spec.k; ++c)
    for (int t = 0; t < spec.d; ++t) out.means(c, t) = out.sigma_inter * mean_rng.normal();

  Rng assign_rng(spec.seed, Stream::Assignments);
  Rng noise_rng(spec.seed, Stream::Noise);
  const Index n = spec.n;
  out.data.rows.resize(n, spec.d);
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const int c = static_cast<int>(assign_rng.below(static_cast<std::uint64_t>(spec.k)));
    labels[static_cast<std::size_t>(i)] = c;
    for (int t = 0; t < spec.d; ++t) out.data.rows(i, t) = out.means(c, t) + noise_rng.normal();
  }
  out.data.labels = std::move(labels);
  return out;
}

// ---------------------------------------------------------------------------

std::vector<int> assign_nearest(const Matrix& X, const Matrix& centers) {
  require(centers.rows() >= 1, "assign: no centers");
  require_dims(X.cols() == centers.cols(), "assign: dimension mismatch");
  std::vector<int> out(static_cast<std::size_t>(X.rows()));
  for (Index i = 0; i < X.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (Index c = 0; c < centers.rows(); ++c) {
      const double d2 = (X.row(i) - centers.row(c)).squaredNorm();
      if (d2 < best) {
        best = d2;
        arg = static_cast<int>(c);
      }
    }
    out[static_cast<std::size_t>(i)] = arg;
  }
  return out;
}

double kmeans_risk(const Matrix& X, const Matrix& centers, int p) {
  require(p == 1 || p == 2, "kmeans_risk: p must be 1 or 2");
  require(centers.rows() >= 1, "kmeans_risk: no centers");
  require_dims(X.cols() == centers.cols(), "kmeans_risk: dimension mismatch");
  require(X.rows() >= 1, "kmeans_risk: empty dataset");
  double total = 0.0;
  for (Index i = 0; i < X.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (Index c = 0; c < centers.rows(); ++c)
      best = std::min(best, (X.row(i) - centers.row(c)).squaredNorm());
    total += p == 2 ? best : std::sqrt(best);
  }
  return total / static_cast<double>(X.rows());
}

namespace {

void check_gmm(const Matrix& X, const Hypothesis& h) {
  require(h.task == Task::GaussianModel, "gmm: hypothesis is not a Gaussian model");
  require(h.k() >= 1, "gmm: empty hypothesis");
  require_dims(X.cols() == h.centers.cols() && h.gammas.rows() == h.k() &&
                   h.gammas.cols() == h.centers.cols() && h.weights.size() == h.k(),
               "gmm: hypothesis shape mismatch");
  if (!(h.gammas.minCoeff() > 0.0))
    fail(ErrorKind::InvalidArgument, "gmm: variances must be positive");
}

// log alpha_c + log N(x_i; mu_c, diag gamma_c), one column per component.
Matrix component_log_densities(const Matrix& X, const Hypothesis& h) {
  const Index k = h.k(), d = X.cols();
  Matrix out(X.rows(), k);
  for (Index c = 0; c < k; ++c) {
    const double log_w = h.weights[c] > 0.0 ? std::log(h.weights[c])
                                            : -std::numeric_limits<double>::infinity();
    double log_norm = 0.0;
    for (Index t = 0; t < d; ++t) log_norm += std::log(2.0 * std::numbers::pi * h.gammas(c, t));
    const Eigen::RowVectorXd inv = h.gammas.row(c).cwiseInverse();
    for (Index i = 0; i < X.rows(); ++i) {
      const double q = ((X.row(i) - h.centers.row(c)).array().square() * inv.array()).sum();
      out(i, c) = log_w - 0.5 * (log_norm + q);
    }
  }
  return out;
}

double log_sum_exp(const Eigen::Ref<const Eigen::RowVectorXd>& v) {
  const double mx = v.maxCoeff();
  if (!std::isfinite(mx)) return mx;
  return mx + std::log((v.array() - mx).exp().sum());
}

}  // namespace

double gmm_nll(const Matrix& X, const Hypothesis& h) {
  check_gmm(X, h);
  require(X.rows() >= 1, "gmm_nll: empty dataset");
  const Matrix L = component_log_densities(X, h);
  double total = 0.0;
  for (Index i = 0; i < X.rows(); ++i) total -= log_sum_exp(L.row(i));
  return total / static_cast<double>(X.rows());
}

std::vector<int> assign_gmm(const Matrix& X, const Hypothesis& h) {
  check_gmm(X, h);
  const Matrix L = component_log_densities(X, h);
  std::vector<int> out(static_cast<std::size_t>(X.rows()));
  for (Index i = 0; i < X.rows(); ++i) {
    Index arg;
    L.row(i).maxCoeff(&arg);
    out[static_cast<std::size_t>(i)] = static_cast<int>(arg);
  }
  return out;
}

double task_risk(const Matrix& X, const Hypothesis& h) {
  return h.task == Task::KMeans ? kmeans_risk(X, h.centers, 2) : gmm_nll(X, h);
}

std::vector<int> predict_labels(const Matrix& X, const Hypothesis& h) {
  return h.task == Task::KMeans ? assign_nearest(X, h.centers) : assign_gmm(X, h);
}

double adjusted_rand_index(const std::vector<int>& pred, const std::vector<int>& truth) {
  require_dims(pred.size() == truth.size(), "adjusted_rand_index: label vectors differ in length");
  require(!pred.empty(), "adjusted_rand_index: empty labelings");
  std::map<std::pair<int, int>, double> cells;
  std::map<int, double> rows, cols;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    cells[{pred[i], truth[i]}] += 1.0;
    rows[pred[i]] += 1.0;
    cols[truth[i]] += 1.0;
  }
  auto pairs = [](double c) { return c * (c - 1.0) / 2.0; };
  double index = 0.0, a = 0.0, b = 0.0;
  for (const auto& [_, c] : cells) index += pairs(c);
  for (const auto& [_, c] : rows) a += pairs(c);
  for (const auto& [_, c] : cols) b += pairs(c);
  const double total = pairs(static_cast<double>(pred.size()));
  const double expected = total > 0.0 ? a * b / total : 0.0;
  const double max_index = 0.5 * (a + b);
  // Degenerate partitions (both trivial): identical up to relabeling.
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

std::vector<int> hungarian_match(const Matrix& cost) {
  require(cost.rows() == cost.cols(), "hungarian_match: cost matrix must be square");
  const int n = static_cast<int>(cost.rows());
  const double inf = std::numeric_limits<double>::infinity();
  // Potentials formulation, 1-based with a sentinel column 0.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> perm(n);
  for (int j = 1; j <= n; ++j) perm[p[j] - 1] = j - 1;
  return perm;
}

double matched_max_distance(const Matrix& truth, const Matrix& estimate) {
  require_dims(truth.rows() == estimate.rows() && truth.cols() == estimate.cols(),
               "matched_max_distance: shape mismatch");
  Matrix cost(truth.rows(), estimate.rows());
  for (Index i = 0; i < truth.rows(); ++i)
    for (Index j = 0; j < estimate.rows(); ++j)
      cost(i, j) = (truth.row(i) - estimate.row(j)).norm();
  const auto perm = hungarian_match(cost);
  double worst = 0.0;
  for (Index i = 0; i < truth.rows(); ++i)
    worst = std::max(worst, cost(i, perm[static_cast<std::size_t>(i)]));
  return worst;
}

}  // namespace nyscl
