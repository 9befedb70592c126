#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "nyscl/kernel.hpp"
#include "nyscl/landmarks.hpp"
#include "nyscl/types.hpp"

namespace nyscl {

enum class MapFamily { Nystrom, Rff };

std::string to_string(MapFamily f);
MapFamily parse_map_family(const std::string& s);

/// Nystrom features K_m^{-1/2} [k(x~_1, x), ..., k(x~_m, x)].
class NystromMap {
 public:
  static NystromMap build(LandmarkSet landmarks, GaussianKernel kernel,
                          double rel_tol = kDefaultRelTol);

  const LandmarkSet& landmarks() const { return landmarks_; }
  const GaussianKernel& kernel() const { return kernel_; }
  const SymMatrix& w() const { return w_; }
  Index rank() const { return rank_; }
  double rel_tol() const { return rel_tol_; }
  Index dim() const { return landmarks_.size(); }
  Index input_dim() const { return landmarks_.points.cols(); }

  /// [k(x~_i, x)]_i, before the corrective factor.
  Vector kernel_vector(const Eigen::Ref<const Vector>& x) const;
  Vector embed(const Eigen::Ref<const Vector>& x) const;
  /// One embedded row per input row.
  Matrix embed_rows(const Matrix& X) const;

 private:
  NystromMap(LandmarkSet l, GaussianKernel k, SymMatrix w, Index rank, double rel_tol)
      : landmarks_(std::move(l)), kernel_(k), w_(std::move(w)), rank_(rank), rel_tol_(rel_tol) {}

  LandmarkSet landmarks_;
  GaussianKernel kernel_;
  SymMatrix w_;
  Index rank_;
  double rel_tol_;
};

/// Random Fourier features [cos(Omega^T x), sin(Omega^T x)] / sqrt(m'),
/// Omega entries i.i.d. N(0, 1/sigma^2).
class RffMap {
 public:
  static RffMap build(Index d, Index m_half, double bandwidth_sq, std::uint64_t seed);

  const Matrix& omega() const { return omega_; }  // d x m'
  double bandwidth_sq() const { return bandwidth_sq_; }
  std::uint64_t seed() const { return seed_; }
  Index m_half() const { return omega_.cols(); }
  Index dim() const { return 2 * omega_.cols(); }
  Index input_dim() const { return omega_.rows(); }

  Vector embed(const Eigen::Ref<const Vector>& x) const;
  Matrix embed_rows(const Matrix& X) const;

 private:
  RffMap(Matrix omega, double bw, std::uint64_t seed)
      : omega_(std::move(omega)), bandwidth_sq_(bw), seed_(seed) {}

  Matrix omega_;
  double bandwidth_sq_;
  std::uint64_t seed_;
};

/// Either map family behind one interface. Immutable once built.
class FeatureMap {
 public:
  FeatureMap(NystromMap m) : map_(std::move(m)) {}  // NOLINT(implicit)
  FeatureMap(RffMap m) : map_(std::move(m)) {}      // NOLINT(implicit)

  MapFamily family() const;
  Index dim() const;
  Index input_dim() const;
  double bandwidth_sq() const;

  Vector embed(const Eigen::Ref<const Vector>& x) const;
  Matrix embed_rows(const Matrix& X) const;

  const NystromMap* nystrom() const { return std::get_if<NystromMap>(&map_); }
  const RffMap* rff() const { return std::get_if<RffMap>(&map_); }

  /// Serialized map parameters (enough to rebuild the map).
  std::vector<std::uint8_t> param_bytes() const;
  /// FNV-1a 64 of param_bytes().
  std::uint64_t fingerprint() const;

 private:
  std::variant<NystromMap, RffMap> map_;
};

struct Bounds {
  Vector lo, hi;
};

/// Mean of feature vectors over a dataset. The running sum is kept in
/// 128-bit fixed point, so sketching and merging are exact and independent
/// of chunking or chunk order.
class Sketch {
 public:
  using Fixed = __int128;
  static constexpr int kFracBits = 80;

  Sketch() = default;

  const Vector& values() const { return values_; }
  std::uint64_t n_samples() const { return n_samples_; }
  std::uint64_t map_fingerprint() const { return fingerprint_; }
  const std::optional<Bounds>& bounds() const { return bounds_; }
  Index dim() const { return values_.size(); }
  const std::vector<Fixed>& exact_sum() const { return sum_; }

  /// Reassembles a sketch from stored parts; values are recomputed and
  /// checked against `values` when given.
  static Sketch from_parts(std::vector<Fixed> sum, std::uint64_t n, std::uint64_t fingerprint,
                           std::optional<Bounds> bounds);
  /// Sketch with plain values and no exact accumulator (e.g. a theoretical
  /// mean embedding). Such sketches cannot be merged.
  static Sketch from_values(Vector values, std::uint64_t n, std::uint64_t fingerprint);

  bool mergeable() const { return !sum_.empty() || values_.size() == 0; }

 private:
  friend class SketchAccumulator;
  friend Sketch merge(const Sketch&, const Sketch&);
  void refresh_values();

  Vector values_;
  std::vector<Fixed> sum_;
  std::uint64_t n_samples_ = 0;
  std::uint64_t fingerprint_ = 0;
  std::optional<Bounds> bounds_;
};

/// Streaming sketcher: feed rows in any grouping, then finish().
class SketchAccumulator {
 public:
  static constexpr Index kChunkRows = 1024;

  explicit SketchAccumulator(const FeatureMap& map);

  void add_rows(const Matrix& rows);
  std::uint64_t count() const { return n_; }
  Sketch finish() const;

 private:
  void add_chunk(const Matrix& rows);

  const FeatureMap* map_;
  std::uint64_t fingerprint_;
  std::vector<Sketch::Fixed> sum_;
  std::uint64_t n_ = 0;
  Vector lo_, hi_;
};

Sketch sketch_dataset(const FeatureMap& map, const Matrix& X);

/// Count-weighted combination of two sketches of the same map.
Sketch merge(const Sketch& a, const Sketch& b);

struct SketchFile {
  FeatureMap map;
  Sketch sketch;
};

inline constexpr std::uint32_t kSketchFormatVersion = 1;

void save_sketch(const std::string& path, const FeatureMap& map, const Sketch& sketch);
std::vector<std::uint8_t> encode_sketch(const FeatureMap& map, const Sketch& sketch);
SketchFile load_sketch(const std::string& path);
SketchFile decode_sketch(const std::vector<std::uint8_t>& bytes);

}  // namespace nyscl
