#include "nyscl/features.hpp"

#include <algorithm>
#include <cmath>

#include "binary_io.hpp"
#include "nyscl/error.hpp"
#include "nyscl/rng.hpp"

namespace nyscl {

std::string to_string(MapFamily f) { return f == MapFamily::Nystrom ? "nystrom" : "rff"; }

MapFamily parse_map_family(const std::string& s) {
  if (s == "nystrom") return MapFamily::Nystrom;
  if (s == "rff") return MapFamily::Rff;
  fail(ErrorKind::InvalidArgument, "unknown map family '" + s + "'");
}

namespace {

// out = K * W with each output entry summed in a fixed order (l = 0..m-1),
// so a row's embedding does not depend on which other rows share its chunk.
Matrix fixed_order_product(const Matrix& K, const Matrix& W) {
  const Index c = K.rows(), m = K.cols(), p = W.cols();
  Matrix out(c, p);
  constexpr Index kBlock = 64;
  double acc[kBlock];
  for (Index r0 = 0; r0 < c; r0 += kBlock) {
    const Index bs = std::min(kBlock, c - r0);
    for (Index j = 0; j < p; ++j) {
      for (Index r = 0; r < bs; ++r) acc[r] = 0.0;
      for (Index l = 0; l < m; ++l) {
        const double w = W(l, j);
        const double* kcol = K.data() + l * c + r0;
        for (Index r = 0; r < bs; ++r) acc[r] += kcol[r] * w;
      }
      for (Index r = 0; r < bs; ++r) out(r0 + r, j) = acc[r];
    }
  }
  return out;
}

}  // namespace

NystromMap NystromMap::build(LandmarkSet landmarks, GaussianKernel kernel, double rel_tol) {
  require(landmarks.size() >= 1, "build_nystrom: landmark set is empty");
  InvSqrt inv = psd_inv_sqrt(gram_sym(kernel, landmarks.points), rel_tol);
  return NystromMap(std::move(landmarks), kernel, std::move(inv.w), inv.rank, rel_tol);
}

Vector NystromMap::kernel_vector(const Eigen::Ref<const Vector>& x) const {
  require_dims(x.size() == input_dim(), "nystrom: input dimension mismatch");
  return kernel_.gram(landmarks_.points, x.transpose());
}

Vector NystromMap::embed(const Eigen::Ref<const Vector>& x) const {
  require_dims(x.size() == input_dim(), "nystrom embed: input dimension mismatch");
  return embed_rows(x.transpose()).row(0).transpose();
}

Matrix NystromMap::embed_rows(const Matrix& X) const {
  require_dims(X.cols() == input_dim(), "nystrom embed: input dimension mismatch");
  return fixed_order_product(kernel_.gram(X, landmarks_.points), w_.entries());
}

RffMap RffMap::build(Index d, Index m_half, double bandwidth_sq, std::uint64_t seed) {
  require(d >= 1, "build_rff: d must be at least 1");
  require(m_half >= 1, "build_rff: m' must be at least 1");
  require(bandwidth_sq > 0.0, "build_rff: sigma^2 must be positive");
  Rng rng(seed, Stream::Frequencies);
  const double inv_sigma = 1.0 / std::sqrt(bandwidth_sq);
  Matrix omega(d, m_half);
  // Column-by-column draw order is part of the format (seed -> Omega).
  for (Index l = 0; l < m_half; ++l)
    for (Index t = 0; t < d; ++t) omega(t, l) = rng.normal() * inv_sigma;
  return RffMap(std::move(omega), bandwidth_sq, seed);
}

Vector RffMap::embed(const Eigen::Ref<const Vector>& x) const {
  require_dims(x.size() == input_dim(), "rff embed: input dimension mismatch");
  return embed_rows(x.transpose()).row(0).transpose();
}

Matrix RffMap::embed_rows(const Matrix& X) const {
  require_dims(X.cols() == input_dim(), "rff embed: input dimension mismatch");
  const Index n = X.rows(), d = X.cols(), mh = m_half();
  const double scale = 1.0 / std::sqrt(static_cast<double>(mh));
  Matrix out(n, 2 * mh);
  for (Index l = 0; l < mh; ++l) {
    for (Index i = 0; i < n; ++i) {
      double p = 0.0;
      for (Index t = 0; t < d; ++t) p += X(i, t) * omega_(t, l);
      out(i, l) = std::cos(p) * scale;
      out(i, mh + l) = std::sin(p) * scale;
    }
  }
  return out;
}

MapFamily FeatureMap::family() const {
  return nystrom() ? MapFamily::Nystrom : MapFamily::Rff;
}

Index FeatureMap::dim() const {
  return std::visit([](const auto& m) { return m.dim(); }, map_);
}

Index FeatureMap::input_dim() const {
  return std::visit([](const auto& m) { return m.input_dim(); }, map_);
}

double FeatureMap::bandwidth_sq() const {
  if (const auto* n = nystrom()) return n->kernel().bandwidth_sq();
  return rff()->bandwidth_sq();
}

Vector FeatureMap::embed(const Eigen::Ref<const Vector>& x) const {
  return std::visit([&](const auto& m) { return m.embed(x); }, map_);
}

Matrix FeatureMap::embed_rows(const Matrix& X) const {
  return std::visit([&](const auto& m) { return m.embed_rows(X); }, map_);
}

std::vector<std::uint8_t> FeatureMap::param_bytes() const {
  detail::ByteWriter w;
  if (const auto* ny = nystrom()) {
    const LandmarkSet& l = ny->landmarks();
    w.u8(0);
    w.f64(ny->kernel().bandwidth_sq());
    w.f64(ny->rel_tol());
    w.u8(static_cast<std::uint8_t>(l.method));
    w.u64(l.seed);
    w.u8(l.als_lambda ? 1 : 0);
    w.f64(l.als_lambda.value_or(0.0));
    w.u8(l.rank_exhausted ? 1 : 0);
    w.u64(static_cast<std::uint64_t>(l.size()));
    w.u32(static_cast<std::uint32_t>(l.points.cols()));
    for (Index i : l.source_indices) w.u64(static_cast<std::uint64_t>(i));
    // Row-major landmark payload.
    for (Index i = 0; i < l.points.rows(); ++i)
      for (Index t = 0; t < l.points.cols(); ++t) w.f64(l.points(i, t));
  } else {
    const RffMap* r = rff();
    w.u8(1);
    w.f64(r->bandwidth_sq());
    w.u64(r->seed());
    w.u32(static_cast<std::uint32_t>(r->input_dim()));
    w.u64(static_cast<std::uint64_t>(r->m_half()));
  }
  return std::move(w.bytes());
}

std::uint64_t FeatureMap::fingerprint() const {
  const auto bytes = param_bytes();
  return detail::fnv1a64(bytes.data(), bytes.size());
}

// ---------------------------------------------------------------------------

namespace {

constexpr double kMaxAbsFeature = 0x1.0p20;

Sketch::Fixed to_fixed(double v) {
  if (!(std::fabs(v) < kMaxAbsFeature))
    fail(ErrorKind::Numerical, "sketch: feature value out of range (" + std::to_string(v) + ")");
  return static_cast<Sketch::Fixed>(std::ldexp(v, Sketch::kFracBits));
}

}  // namespace

void Sketch::refresh_values() {
  values_.resize(static_cast<Index>(sum_.size()));
  const double n = static_cast<double>(n_samples_);
  for (std::size_t i = 0; i < sum_.size(); ++i)
    values_[static_cast<Index>(i)] = std::ldexp(static_cast<double>(sum_[i]), -kFracBits) / n;
}

Sketch Sketch::from_parts(std::vector<Fixed> sum, std::uint64_t n, std::uint64_t fingerprint,
                          std::optional<Bounds> bounds) {
  require(n >= 1, "sketch: n_samples must be at least 1");
  Sketch s;
  s.sum_ = std::move(sum);
  s.n_samples_ = n;
  s.fingerprint_ = fingerprint;
  s.bounds_ = std::move(bounds);
  s.refresh_values();
  return s;
}

Sketch Sketch::from_values(Vector values, std::uint64_t n, std::uint64_t fingerprint) {
  require(n >= 1, "sketch: n_samples must be at least 1");
  Sketch s;
  s.values_ = std::move(values);
  s.n_samples_ = n;
  s.fingerprint_ = fingerprint;
  return s;
}

SketchAccumulator::SketchAccumulator(const FeatureMap& map)
    : map_(&map),
      fingerprint_(map.fingerprint()),
      sum_(static_cast<std::size_t>(map.dim()), Sketch::Fixed{0}),
      lo_(Vector::Constant(map.input_dim(), std::numeric_limits<double>::infinity())),
      hi_(Vector::Constant(map.input_dim(), -std::numeric_limits<double>::infinity())) {}

void SketchAccumulator::add_rows(const Matrix& rows) {
  require_dims(rows.cols() == map_->input_dim(), "sketch: row dimension does not match map");
  for (Index r0 = 0; r0 < rows.rows(); r0 += kChunkRows) {
    const Index bs = std::min(kChunkRows, rows.rows() - r0);
    add_chunk(rows.middleRows(r0, bs));
  }
}

void SketchAccumulator::add_chunk(const Matrix& rows) {
  const Matrix feats = map_->embed_rows(rows);
  for (Index j = 0; j < feats.cols(); ++j) {
    Sketch::Fixed acc = 0;
    for (Index i = 0; i < feats.rows(); ++i) acc += to_fixed(feats(i, j));
    sum_[static_cast<std::size_t>(j)] += acc;
  }
  lo_ = lo_.cwiseMin(rows.colwise().minCoeff().transpose());
  hi_ = hi_.cwiseMax(rows.colwise().maxCoeff().transpose());
  n_ += static_cast<std::uint64_t>(rows.rows());
}

Sketch SketchAccumulator::finish() const {
  if (n_ == 0) fail(ErrorKind::InvalidArgument, "sketch: empty stream");
  return Sketch::from_parts(sum_, n_, fingerprint_, Bounds{lo_, hi_});
}

Sketch sketch_dataset(const FeatureMap& map, const Matrix& X) {
  SketchAccumulator acc(map);
  acc.add_rows(X);
  return acc.finish();
}

Sketch merge(const Sketch& a, const Sketch& b) {
  if (a.map_fingerprint() != b.map_fingerprint())
    fail(ErrorKind::FingerprintMismatch, "merge: sketches come from different feature maps");
  require(a.mergeable() && b.mergeable(), "merge: sketch has no exact accumulator");
  require_dims(a.dim() == b.dim(), "merge: sketch dimensions differ");
  std::vector<Sketch::Fixed> sum(a.sum_.size());
  for (std::size_t i = 0; i < sum.size(); ++i) sum[i] = a.sum_[i] + b.sum_[i];
  std::optional<Bounds> bounds;
  if (a.bounds_ && b.bounds_)
    bounds = Bounds{a.bounds_->lo.cwiseMin(b.bounds_->lo), a.bounds_->hi.cwiseMax(b.bounds_->hi)};
  return Sketch::from_parts(std::move(sum), a.n_samples_ + b.n_samples_, a.fingerprint_,
                            std::move(bounds));
}

}  // namespace nyscl
