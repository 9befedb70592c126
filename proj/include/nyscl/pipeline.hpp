#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "nyscl/decoder.hpp"
#include "nyscl/features.hpp"
#include "nyscl/landmarks.hpp"
#include "nyscl/tasks.hpp"

namespace nyscl {

/// Default kernel variance per task on the synthetic benchmark.
double default_bandwidth_sq(Task task);

/// p = 2 k d, the sketch-size normalization.
Index model_size(int k, Index d);
/// round(m_over_p * 2 k d), at least 1.
Index sketch_size_from_ratio(double m_over_p, int k, Index d);

struct SketchConfig {
  MapFamily family = MapFamily::Nystrom;
  Sampling sampling = Sampling::Uniform;
  double bandwidth_sq = 81.0;
  /// Nystrom: landmark count (ALS: draws before deduplication).
  /// RFF: output dimension, m' = m / 2 frequencies.
  Index m = 100;
  double als_lambda = 1e-3;
  double rel_tol = kDefaultRelTol;
  std::uint64_t seed = 0;
};

/// Samples landmarks (or frequencies) for X. `scores` lets callers reuse
/// leverage scores across ALS draws.
FeatureMap build_map(const Matrix& X, const SketchConfig& cfg,
                     const LeverageScores* scores = nullptr);

/// Builds the map and sketches X in one streaming pass.
SketchFile sketch_data(const Matrix& X, const SketchConfig& cfg,
                       const LeverageScores* scores = nullptr);

/// Runs the decoder on a sketch and its map; nothing else is consulted.
DecodeResult learn_from_sketch(const SketchFile& file, Task task, const DecoderOptions& opts);

struct EvalResult {
  double risk = 0.0;  // k-means SSE per point or GMM NLL per point
  std::optional<double> ari;
};

/// Risk of h on ds; ARI against the stored labels when `want_ari`.
EvalResult evaluate(const Dataset& ds, const Hypothesis& h, bool want_ari);

}  // namespace nyscl
