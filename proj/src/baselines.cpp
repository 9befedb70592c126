#include <algorithm>
#include <cmath>
#include <limits>

#include "nyscl/error.hpp"
#include "nyscl/rng.hpp"
#include "nyscl/tasks.hpp"

namespace nyscl {

namespace {

Matrix kmeans_plus_plus(const Matrix& X, int k, Rng& rng) {
  const Index n = X.rows();
  Matrix centers(k, X.cols());
  centers.row(0) = X.row(static_cast<Index>(rng.below(static_cast<std::uint64_t>(n))));
  Vector d2(n);
  for (Index i = 0; i < n; ++i) d2[i] = (X.row(i) - centers.row(0)).squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    Index pick = 0;
    if (total > 0.0) {
      const double u = rng.uniform() * total;
      double acc = 0.0;
      pick = n - 1;
      for (Index i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc > u) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
    }
    centers.row(c) = X.row(pick);
    for (Index i = 0; i < n; ++i)
      d2[i] = std::min(d2[i], (X.row(i) - centers.row(c)).squaredNorm());
  }
  return centers;
}

}  // namespace

BaselineFit lloyd_baseline(const Matrix& X, int k, int restarts, std::uint64_t seed, int max_iters) {
  require(k >= 1, "lloyd_baseline: k must be at least 1");
  require(k <= X.rows(), "lloyd_baseline: k exceeds the number of samples");
  require(restarts >= 1, "lloyd_baseline: restarts must be at least 1");
  BaselineFit best;
  best.risk = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    Rng rng(seed, Stream::Baseline, static_cast<std::uint64_t>(r));
    Matrix centers = kmeans_plus_plus(X, k, rng);
    std::vector<int> assign = assign_nearest(X, centers);
    std::vector<double> trace{kmeans_risk(X, centers, 2)};
    int it = 0;
    for (; it < max_iters; ++it) {
      Matrix sums = Matrix::Zero(k, X.cols());
      Vector counts = Vector::Zero(k);
      for (Index i = 0; i < X.rows(); ++i) {
        sums.row(assign[static_cast<std::size_t>(i)]) += X.row(i);
        counts[assign[static_cast<std::size_t>(i)]] += 1.0;
      }
      for (int c = 0; c < k; ++c)
        if (counts[c] > 0.0) centers.row(c) = sums.row(c) / counts[c];
      trace.push_back(kmeans_risk(X, centers, 2));
      std::vector<int> next = assign_nearest(X, centers);
      if (next == assign) break;
      assign = std::move(next);
    }
    const double risk = trace.back();
    if (risk < best.risk) {
      best.hypothesis = Hypothesis{Task::KMeans, centers, Vector(), Matrix()};
      best.risk = risk;
      best.trace = std::move(trace);
      best.iterations = it + 1;
    }
  }
  return best;
}

Hypothesis em_step(const Matrix& X, const Hypothesis& h, double gamma_floor) {
  const Index n = X.rows(), k = h.k(), d = X.cols();
  // Responsibilities via the shared log-density path.
  Matrix L(n, k);
  {
    for (Index c = 0; c < k; ++c) {
      double log_norm = 0.0;
      for (Index t = 0; t < d; ++t) log_norm += std::log(2.0 * M_PI * h.gammas(c, t));
      const double log_w = h.weights[c] > 0.0 ? std::log(h.weights[c])
                                              : -std::numeric_limits<double>::infinity();
      for (Index i = 0; i < n; ++i) {
        const double q =
            ((X.row(i) - h.centers.row(c)).array().square() / h.gammas.row(c).array()).sum();
        L(i, c) = log_w - 0.5 * (log_norm + q);
      }
    }
  }
  for (Index i = 0; i < n; ++i) {
    const double mx = L.row(i).maxCoeff();
    L.row(i) = (L.row(i).array() - mx).exp();
    L.row(i) /= L.row(i).sum();
  }
  Hypothesis out = h;
  for (Index c = 0; c < k; ++c) {
    const double nk = L.col(c).sum();
    if (nk <= 0.0) continue;  // dead component keeps its parameters
    out.weights[c] = nk / static_cast<double>(n);
    const Eigen::RowVectorXd mu = (L.col(c).transpose() * X) / nk;
    out.centers.row(c) = mu;
    Eigen::RowVectorXd var = Eigen::RowVectorXd::Zero(d);
    for (Index i = 0; i < n; ++i) var += L(i, c) * (X.row(i) - mu).array().square().matrix();
    out.gammas.row(c) = (var / nk).cwiseMax(gamma_floor);
  }
  out.weights /= out.weights.sum();
  return out;
}

BaselineFit em_baseline(const Matrix& X, int k, int restarts, std::uint64_t seed,
                        double gamma_floor, int max_iters, double tol) {
  require(k >= 1, "em_baseline: k must be at least 1");
  require(k <= X.rows(), "em_baseline: k exceeds the number of samples");
  require(restarts >= 1, "em_baseline: restarts must be at least 1");
  require(gamma_floor > 0.0, "em_baseline: gamma_floor must be positive");
  const Eigen::RowVectorXd mean = X.colwise().mean();
  const Eigen::RowVectorXd var =
      ((X.rowwise() - mean).array().square().colwise().sum() / static_cast<double>(X.rows()))
          .matrix()
          .cwiseMax(gamma_floor);
  BaselineFit best;
  best.risk = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    Rng rng(seed, Stream::Baseline, static_cast<std::uint64_t>(r));
    Hypothesis h;
    h.task = Task::GaussianModel;
    h.centers = kmeans_plus_plus(X, k, rng);
    h.gammas = var.replicate(k, 1);
    h.weights = Vector::Constant(k, 1.0 / k);
    std::vector<double> trace{gmm_nll(X, h)};
    int it = 0;
    for (; it < max_iters; ++it) {
      h = em_step(X, h, gamma_floor);
      trace.push_back(gmm_nll(X, h));
      const double prev = trace[trace.size() - 2], cur = trace.back();
      if (prev - cur <= tol * std::max(1.0, std::fabs(cur))) break;
    }
    if (trace.back() < best.risk) {
      best.risk = trace.back();
      best.hypothesis = h;
      best.trace = std::move(trace);
      best.iterations = it + 1;
    }
  }
  return best;
}

}  // namespace nyscl
