// Acceptance runner: one PASS/FAIL line per criterion, exit status 0 only if
// all selected criteria pass. `--only N` runs a single criterion.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "nyscl/decoder.hpp"
#include "nyscl/error.hpp"
#include "nyscl/features.hpp"
#include "nyscl/kernel.hpp"
#include "nyscl/landmarks.hpp"
#include "nyscl/pipeline.hpp"
#include "nyscl/sweep.hpp"
#include "nyscl/tasks.hpp"
#include "nyscl/theory.hpp"
#include "support.hpp"

using namespace nyscl;
using testing::fd_gradient;
using testing::normal_matrix;
using testing::normal_vector;
using testing::rel_err;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

Dataset synthetic(std::int64_t n, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.n = n;
  spec.k = 10;
  spec.d = 10;
  spec.separation = 2.0;
  spec.seed = seed;
  return gen_synthetic(spec).data;
}

std::vector<Index> iota(Index n) {
  std::vector<Index> v(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = i;
  return v;
}

// 1. Nystrom inner products reproduce the kernel on the landmarks.
Outcome gram_reproduction() {
  const GaussianKernel kernel(81.0);
  double worst = 0.0;
  for (int run = 0; run < 20; ++run) {
    const Dataset ds = synthetic(2000, 100 + run);
    for (Index m : {10, 50, 200}) {
      const LandmarkSet lm = sample_uniform(ds.rows, m, 1000 + run);
      const NystromMap map = NystromMap::build(lm, kernel);
      if (map.rank() != m) return {false, "rank-deficient K_m at m=" + std::to_string(m)};
      const Matrix F = map.embed_rows(lm.points);
      const Matrix K = kernel.gram(lm.points, lm.points);
      worst = std::max(worst, (F * F.transpose() - K).cwiseAbs().maxCoeff());
    }
  }
  return {worst <= 1e-8, fmt("max |<phi,phi> - k| = %.3g", worst)};
}

// 2. Every JVP against central differences of <y, A(theta)>.
Outcome jvp_finite_differences() {
  Rng rng(2);
  double worst = 0.0;
  const Index d = 4;
  for (MapFamily fam : {MapFamily::Nystrom, MapFamily::Rff}) {
    for (int inst = 0; inst < 50; ++inst) {
      const double s2 = 1.0 + 3.0 * rng.uniform();
      FeatureMap map = fam == MapFamily::Nystrom
                           ? FeatureMap(NystromMap::build(
                                 landmarks_from_indices(normal_matrix(rng, 30, d, 1.5), iota(30),
                                                        Sampling::Uniform, 0),
                                 GaussianKernel(s2)))
                           : FeatureMap(RffMap::build(d, 40, s2, 500 + inst));
      const Vector y = normal_vector(rng, map.dim());
      const Vector c = normal_vector(rng, d);
      const Vector mu = normal_vector(rng, d);
      Vector gamma(d);
      for (Index t = 0; t < d; ++t) gamma[t] = 0.2 + rng.uniform();

      const Vector fd_c = fd_gradient([&](const Vector& v) { return y.dot(atom_sketch_dirac(map, v)); }, c);
      worst = std::max(worst, rel_err(dirac_jvp(map, c, y), fd_c));

      const GaussianJvp j = gaussian_jvp(map, mu, gamma, y);
      const Vector fd_mu = fd_gradient(
          [&](const Vector& v) { return y.dot(atom_sketch_gaussian(map, v, gamma)); }, mu);
      const Vector fd_g = fd_gradient(
          [&](const Vector& v) { return y.dot(atom_sketch_gaussian(map, mu, v)); }, gamma);
      worst = std::max({worst, rel_err(j.d_mu, fd_mu), rel_err(j.d_gamma, fd_g)});
    }
  }
  return {worst <= 1e-5, fmt("max relative error = %.3g", worst)};
}

// 3. A zero-variance Gaussian atom sketches like a Dirac.
Outcome dirac_limit() {
  Rng rng(3);
  const Index d = 5;
  const FeatureMap ny = NystromMap::build(
      landmarks_from_indices(normal_matrix(rng, 40, d, 2.0), iota(40), Sampling::Uniform, 0),
      GaussianKernel(4.0));
  const FeatureMap rff = RffMap::build(d, 50, 4.0, 3);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Vector mu = normal_vector(rng, d, 2.0);
    for (const FeatureMap* map : {&ny, &rff}) {
      const Vector a = atom_sketch_gaussian(*map, mu, Vector::Zero(d));
      worst = std::max(worst, (a - atom_sketch_dirac(*map, mu)).cwiseAbs().maxCoeff());
    }
  }
  return {worst <= 1e-12, fmt("max inf-norm gap = %.3g", worst)};
}

// 4. Chunked and permuted accumulation is bit-identical to one pass.
Outcome sketch_algebra() {
  const Dataset ds = synthetic(5000, 4);
  SketchConfig ny;
  ny.m = 100;
  ny.seed = 4;
  SketchConfig rf = ny;
  rf.family = MapFamily::Rff;
  for (const SketchConfig& cfg : {ny, rf}) {
    const FeatureMap map = build_map(ds.rows, cfg);
    const Sketch whole = sketch_dataset(map, ds.rows);
    const std::vector<Index> cuts{0, 700, 1234, 2500, 4100, 5000};
    std::vector<Sketch> parts;
    for (std::size_t c = 0; c + 1 < cuts.size(); ++c)
      parts.push_back(sketch_dataset(map, ds.rows.middleRows(cuts[c], cuts[c + 1] - cuts[c])));
    Sketch fwd = parts[0];
    for (std::size_t c = 1; c < parts.size(); ++c) fwd = merge(fwd, parts[c]);
    const std::vector<std::size_t> order{3, 0, 4, 2, 1};
    Sketch perm = parts[order[0]];
    for (std::size_t c = 1; c < order.size(); ++c) perm = merge(perm, parts[order[c]]);
    if (encode_sketch(map, fwd) != encode_sketch(map, whole) ||
        encode_sketch(map, perm) != encode_sketch(map, whole) || fwd.values() != whole.values() ||
        perm.values() != whole.values())
      return {false, to_string(cfg.family) + " sketch differs after chunking"};
  }
  return {true, "nystrom and rff bit-identical over 5 chunks and a permutation"};
}

// 5. Sum of ridge leverage scores equals the effective dimension.
Outcome leverage_trace() {
  Rng rng(5);
  double worst = 0.0;
  for (int g = 0; g < 10; ++g) {
    const Index n = 20 + static_cast<Index>(rng.below(181));
    const Index d = 1 + static_cast<Index>(rng.below(6));
    const Matrix X = normal_matrix(rng, n, d);
    const SymMatrix K = gram_sym(GaussianKernel(0.5 + 4.0 * rng.uniform()), X);
    for (double lambda : {1e-3, 1e-1, 1.0}) {
      const double sum = leverage_scores(K, lambda).scores.sum();
      worst = std::max(worst, std::abs(sum - effective_dimension(K, lambda)));
    }
  }
  return {worst <= 1e-10, fmt("max |sum l - N(lambda)| = %.3g", worst)};
}

// 6. Projection defect <= 3 lambda at the uniform-sampling size.
Outcome projection_bound() {
  const Dataset ds = synthetic(2000, 6);
  const AmbientSpace amb = build_ambient(ds.rows, 81.0, 6);
  const double lambda = 0.1 * amb.sigma().maxCoeff();
  TheoryOptions opts;
  opts.defect_trials = 50;
  opts.seed = 6;
  const TheoryReport r = theory_report(amb, lambda, opts);
  const int passed = static_cast<int>(std::lround(r.defect_pass_rate * 50));
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "lambda = %.4g, m = %ld (required %.1f), median defect = %.3g, %d/50 within 3 lambda",
                lambda, static_cast<long>(r.m_used), r.required_m_uniform, r.projection_defect, passed);
  return {passed >= 45, buf};
}

std::map<std::string, double> medians_by_series(const std::vector<SweepRow>& rows, double m_over_p,
                                                double sigma_sq) {
  std::map<std::string, double> out;
  for (const SweepSummary& s : summarize(rows))
    if (s.m_over_p == m_over_p && s.sigma_sq == sigma_sq) out[s.series] = s.median;
  return out;
}

// 7. Compressive k-means: Nystrom beats RFF, and stays near Lloyd.
Outcome kmeans_ordering() {
  const Dataset ds = synthetic(10000, 7);
  SweepConfig cfg;
  cfg.task = Task::KMeans;
  cfg.m_over_p = {1.0, 2.0, 4.0};
  cfg.sigma_sq = {81.0};
  cfg.trials = 20;
  cfg.seed = 7;
  const auto rows = run_sweep(ds, cfg);
  const double lloyd = lloyd_baseline(ds.rows, 10, 10, 7).risk;
  bool ok = true;
  std::string detail;
  for (double r : {1.0, 2.0}) {
    const auto med = medians_by_series(rows, r, 81.0);
    const double ny = med.at("nystrom-uniform"), rf = med.at("rff");
    ok = ok && ny <= rf;
    char buf[128];
    std::snprintf(buf, sizeof buf, "m/p=%g: nystrom %.4g vs rff %.4g; ", r, ny, rf);
    detail += buf;
  }
  const double ny4 = medians_by_series(rows, 4.0, 81.0).at("nystrom-uniform");
  ok = ok && ny4 <= 2.0 * lloyd;
  char buf[128];
  std::snprintf(buf, sizeof buf, "m/p=4: nystrom %.4g vs 2 x lloyd %.4g", ny4, 2.0 * lloyd);
  return {ok, detail + buf};
}

// 8. Compressive GMM: Nystrom median NLL <= RFF.
Outcome gmm_ordering() {
  const Dataset ds = synthetic(10000, 8);
  SweepConfig cfg;
  cfg.task = Task::GaussianModel;
  cfg.m_over_p = {2.0};
  cfg.sigma_sq = {24.0};
  cfg.trials = 20;
  cfg.seed = 8;
  const auto med = medians_by_series(run_sweep(ds, cfg), 2.0, 24.0);
  const double ny = med.at("nystrom-uniform"), rf = med.at("rff");
  char buf[128];
  std::snprintf(buf, sizeof buf, "median NLL nystrom %.4g vs rff %.4g", ny, rf);
  return {ny <= rf, buf};
}

// Log-span of the sigma^2 values whose median is within 5% of the best.
double good_span(const std::vector<double>& grid, const std::vector<double>& med) {
  const double best = *std::min_element(med.begin(), med.end());
  const double cut = best + 0.05 * std::abs(best);
  double lo = INFINITY, hi = -INFINITY;
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (med[i] <= cut) {
      lo = std::min(lo, std::log(grid[i]));
      hi = std::max(hi, std::log(grid[i]));
    }
  return hi - lo;
}

// 9. Bandwidth robustness on the GMM task.
Outcome bandwidth_robustness() {
  const Dataset ds = synthetic(10000, 9);
  SweepConfig cfg;
  cfg.task = Task::GaussianModel;
  cfg.m_over_p = {2.0};
  cfg.sigma_sq = {3.0, 6.0, 12.0, 24.0, 48.0, 96.0, 192.0};
  cfg.trials = 20;
  cfg.seed = 9;
  const auto rows = run_sweep(ds, cfg);
  std::vector<double> ny, rf;
  std::string detail = "medians (nystrom/rff):";
  for (double s2 : cfg.sigma_sq) {
    const auto med = medians_by_series(rows, 2.0, s2);
    ny.push_back(med.at("nystrom-uniform"));
    rf.push_back(med.at("rff"));
    char buf[96];
    std::snprintf(buf, sizeof buf, " %g: %.4g/%.4g", s2, ny.back(), rf.back());
    detail += buf;
  }
  const double sn = good_span(cfg.sigma_sq, ny), sr = good_span(cfg.sigma_sq, rf);
  char buf[128];
  std::snprintf(buf, sizeof buf, "; log-span nystrom %.3g vs rff %.3g", sn, sr);
  return {sn >= sr, detail + buf};
}

// 10. Secant probe values are bounded by 1/lambda and shrink as lambda grows.
Outcome secant_sanity() {
  const Dataset ds = synthetic(2000, 10);
  const AmbientSpace amb = build_ambient(ds.rows, 81.0, 10);
  double radius = 0.0;
  for (Index i = 0; i < ds.n(); ++i) radius = std::max(radius, ds.rows.row(i).norm());
  const PairSampler sampler = separated_dirac_pairs(10, 3, 1.0, radius);
  const double smax = amb.sigma().maxCoeff();
  bool ok = true;
  double worst_bound = -INFINITY, worst_increase = -INFINITY;
  int compared = 0;
  for (double lambda : {1e-3 * smax, 1e-2 * smax, 0.1 * smax}) {
    const SecantProbe a = secant_probe(amb, sampler, lambda, 200, 10);
    const SecantProbe b = secant_probe(amb, sampler, 2.0 * lambda, 200, 10);
    if (a.skipped != b.skipped || a.values.size() != b.values.size() || a.values.empty())
      return {false, "probe trials differ between lambda and 2 lambda"};
    for (std::size_t i = 0; i < a.values.size(); ++i) {
      worst_bound = std::max(worst_bound, a.values[i] - 1.0 / lambda);
      worst_bound = std::max(worst_bound, b.values[i] - 0.5 / lambda);
      worst_increase = std::max(worst_increase, b.values[i] - a.values[i]);
      ++compared;
    }
  }
  ok = worst_bound <= 1e-8 && worst_increase <= 0.0;
  char buf[192];
  std::snprintf(buf, sizeof buf, "%d pairs; max(N - 1/lambda) = %.3g; max(N(2 lambda) - N(lambda)) = %.3g",
                compared, worst_bound, worst_increase);
  return {ok, buf};
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) {
      only = std::atoi(argv[++i]);
    } else {
      std::fprintf(stderr, "usage: %s [--only N]\n", argv[0]);
      return 2;
    }
  }
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gram reproduction", gram_reproduction},
      {"jvp finite differences", jvp_finite_differences},
      {"dirac limit", dirac_limit},
      {"sketch algebra", sketch_algebra},
      {"leverage trace identity", leverage_trace},
      {"projection bound", projection_bound},
      {"compressive k-means ordering", kmeans_ordering},
      {"compressive gmm ordering", gmm_ordering},
      {"bandwidth robustness", bandwidth_robustness},
      {"secant probe sanity", secant_sanity},
  };
  if (only < 0 || only > static_cast<int>(criteria.size())) {
    std::fprintf(stderr, "--only must be in 1..%zu\n", criteria.size());
    return 2;
  }
  int failed = 0;
  for (std::size_t c = 0; c < criteria.size(); ++c) {
    if (only != 0 && static_cast<int>(c) + 1 != only) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = criteria[c].second();
    } catch (const std::exception& e) {
      out = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %2zu %s: %s (%.1f s)\n", out.pass ? "PASS" : "FAIL", c + 1,
                criteria[c].first.c_str(), out.detail.c_str(), secs);
    std::fflush(stdout);
    if (!out.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
