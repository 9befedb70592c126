#include "nyscl/pipeline.hpp"

#include <cmath>

#include "nyscl/error.hpp"

namespace nyscl {

double default_bandwidth_sq(Task task) { return task == Task::KMeans ? 81.0 : 24.0; }

Index model_size(int k, Index d) {
  require(k >= 1 && d >= 1, "model size needs k >= 1 and d >= 1");
  return 2 * static_cast<Index>(k) * d;
}

Index sketch_size_from_ratio(double m_over_p, int k, Index d) {
  require(m_over_p > 0.0, "m/p multiplier must be positive");
  return std::max<Index>(1, std::llround(m_over_p * static_cast<double>(model_size(k, d))));
}

FeatureMap build_map(const Matrix& X, const SketchConfig& cfg, const LeverageScores* scores) {
  require(cfg.bandwidth_sq > 0.0, "sigma^2 must be positive");
  require(cfg.m >= 1, "sketch size m must be at least 1");
  if (cfg.family == MapFamily::Rff) {
    require(cfg.m >= 2, "RFF sketch size must be at least 2");
    return RffMap::build(X.cols(), cfg.m / 2, cfg.bandwidth_sq, cfg.seed);
  }
  const GaussianKernel kern(cfg.bandwidth_sq);
  LandmarkSet ls;
  switch (cfg.sampling) {
    case Sampling::Uniform:
      ls = sample_uniform(X, cfg.m, cfg.seed);
      break;
    case Sampling::Greedy:
      ls = sample_greedy(X, kern, cfg.m, cfg.seed);
      break;
    case Sampling::ALS:
      if (scores) {
        require_dims(scores->scores.size() == X.rows(), "leverage scores do not match dataset");
        ls = sample_als(X, *scores, cfg.m, cfg.seed);
      } else {
        ls = sample_als(X, gram_sym(kern, X), cfg.m, cfg.als_lambda, cfg.seed);
      }
      break;
  }
  return NystromMap::build(std::move(ls), kern, cfg.rel_tol);
}

SketchFile sketch_data(const Matrix& X, const SketchConfig& cfg, const LeverageScores* scores) {
  FeatureMap map = build_map(X, cfg, scores);
  Sketch sk = sketch_dataset(map, X);
  return SketchFile{std::move(map), std::move(sk)};
}

DecodeResult learn_from_sketch(const SketchFile& file, Task task, const DecoderOptions& opts) {
  return cl_ompr(file.sketch, file.map, family_for(task), opts);
}

EvalResult evaluate(const Dataset& ds, const Hypothesis& h, bool want_ari) {
  require_dims(h.centers.cols() == ds.d(), "hypothesis dimension does not match dataset");
  EvalResult out;
  out.risk = task_risk(ds.rows, h);
  if (want_ari) {
    require(ds.labels.has_value(), "ARI requested but the dataset has no labels");
    out.ari = adjusted_rand_index(predict_labels(ds.rows, h), *ds.labels);
  }
  return out;
}

}  // namespace nyscl
