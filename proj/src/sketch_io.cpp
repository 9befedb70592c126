#include <cmath>
#include <cstring>

#include "binary_io.hpp"
#include "nyscl/error.hpp"
#include "nyscl/features.hpp"

// Sketch container, little-endian:
//   "CLSK" | u32 version | u64 len | map params (len bytes) | u64 fingerprint
//   | u64 n_samples | u64 dim | f64 values[dim] | {u64 lo, u64 hi} exact sums[dim]
//   | u8 has_bounds [u32 d | f64 lo[d] | f64 hi[d]] | u64 FNV-1a of all preceding bytes

namespace nyscl {

namespace {

constexpr char kMagic[] = "CLSK";

FeatureMap decode_map(const std::vector<std::uint8_t>& params) {
  detail::ByteReader r(params.data(), params.size(), "sketch map parameters");
  const std::uint8_t family = r.u8();
  if (family == 0) {
    const double bw = r.f64();
    const double rel_tol = r.f64();
    const std::uint8_t method = r.u8();
    if (method > 2) fail(ErrorKind::CorruptPayload, "sketch: unknown sampling tag");
    const std::uint64_t seed = r.u64();
    const bool has_lambda = r.u8() != 0;
    const double lambda = r.f64();
    const bool exhausted = r.u8() != 0;
    const std::uint64_t m = r.u64();
    const std::uint32_t d = r.u32();
    if (m == 0 || d == 0 || m > params.size() / 8 || d > params.size() / 8)
      fail(ErrorKind::CorruptPayload, "sketch: invalid landmark shape");
    LandmarkSet l;
    l.method = static_cast<Sampling>(method);
    l.seed = seed;
    if (has_lambda) l.als_lambda = lambda;
    l.rank_exhausted = exhausted;
    l.source_indices.resize(m);
    for (auto& i : l.source_indices) i = static_cast<Index>(r.u64());
    l.points.resize(static_cast<Index>(m), d);
    for (Index i = 0; i < l.points.rows(); ++i)
      for (Index t = 0; t < l.points.cols(); ++t) l.points(i, t) = r.f64();
    if (r.remaining() != 0) fail(ErrorKind::CorruptPayload, "sketch: trailing map bytes");
    return NystromMap::build(std::move(l), GaussianKernel(bw), rel_tol);
  }
  if (family == 1) {
    const double bw = r.f64();
    const std::uint64_t seed = r.u64();
    const std::uint32_t d = r.u32();
    const std::uint64_t mh = r.u64();
    if (r.remaining() != 0) fail(ErrorKind::CorruptPayload, "sketch: trailing map bytes");
    if (d == 0 || mh == 0 || mh > (std::uint64_t{1} << 32))
      fail(ErrorKind::CorruptPayload, "sketch: invalid rff shape");
    return RffMap::build(d, static_cast<Index>(mh), bw, seed);
  }
  fail(ErrorKind::CorruptPayload, "sketch: unknown map family tag");
}

}  // namespace

std::vector<std::uint8_t> encode_sketch(const FeatureMap& map, const Sketch& sketch) {
  require(sketch.map_fingerprint() == map.fingerprint(),
          "save_sketch: sketch was not produced by this feature map");
  require(sketch.mergeable(), "save_sketch: sketch has no exact accumulator");
  detail::ByteWriter w;
  w.magic(std::string_view(kMagic, 4));
  w.u32(kSketchFormatVersion);
  const auto params = map.param_bytes();
  w.u64(params.size());
  w.raw(params.data(), params.size());
  w.u64(sketch.map_fingerprint());
  w.u64(sketch.n_samples());
  w.u64(static_cast<std::uint64_t>(sketch.dim()));
  w.f64s(sketch.values().data(), static_cast<std::size_t>(sketch.dim()));
  for (const Sketch::Fixed& s : sketch.exact_sum()) {
    const auto u = static_cast<unsigned __int128>(s);
    w.u64(static_cast<std::uint64_t>(u));
    w.u64(static_cast<std::uint64_t>(u >> 64));
  }
  if (const auto& b = sketch.bounds()) {
    w.u8(1);
    w.u32(static_cast<std::uint32_t>(b->lo.size()));
    w.f64s(b->lo.data(), static_cast<std::size_t>(b->lo.size()));
    w.f64s(b->hi.data(), static_cast<std::size_t>(b->hi.size()));
  } else {
    w.u8(0);
  }
  const std::uint64_t checksum = detail::fnv1a64(w.bytes().data(), w.bytes().size());
  w.u64(checksum);
  return std::move(w.bytes());
}

void save_sketch(const std::string& path, const FeatureMap& map, const Sketch& sketch) {
  detail::write_file(path, encode_sketch(map, sketch));
}

SketchFile decode_sketch(const std::vector<std::uint8_t>& bytes) {
  detail::ByteReader r(bytes.data(), bytes.size(), "sketch");
  if (r.magic(4) != std::string(kMagic, 4)) fail(ErrorKind::CorruptPayload, "sketch: bad magic");
  const std::uint32_t version = r.u32();
  if (version != kSketchFormatVersion)
    fail(ErrorKind::VersionMismatch, "sketch: unsupported format version " + std::to_string(version));
  if (bytes.size() < 16) fail(ErrorKind::CorruptPayload, "sketch: truncated payload");
  std::uint64_t stored_sum;
  std::memcpy(&stored_sum, bytes.data() + bytes.size() - 8, 8);
  if (detail::fnv1a64(bytes.data(), bytes.size() - 8) != stored_sum)
    fail(ErrorKind::CorruptPayload, "sketch: checksum mismatch (truncated or corrupt file)");

  const std::uint64_t plen = r.u64();
  if (plen > r.remaining()) fail(ErrorKind::CorruptPayload, "sketch: truncated payload");
  std::vector<std::uint8_t> params(plen);
  r.raw(params.data(), plen);
  const std::uint64_t fingerprint = r.u64();
  const std::uint64_t n = r.u64();
  const std::uint64_t dim = r.u64();
  if (n == 0) fail(ErrorKind::CorruptPayload, "sketch: zero sample count");
  if (dim > r.remaining() / 24) fail(ErrorKind::CorruptPayload, "sketch: truncated payload");
  Vector values(static_cast<Index>(dim));
  r.f64s(values.data(), dim);
  std::vector<Sketch::Fixed> sum(dim);
  for (auto& s : sum) {
    const std::uint64_t lo = r.u64(), hi = r.u64();
    s = static_cast<Sketch::Fixed>((static_cast<unsigned __int128>(hi) << 64) | lo);
  }
  std::optional<Bounds> bounds;
  if (r.u8() != 0) {
    const std::uint32_t d = r.u32();
    if (d > r.remaining() / 16) fail(ErrorKind::CorruptPayload, "sketch: truncated payload");
    Bounds b{Vector(d), Vector(d)};
    r.f64s(b.lo.data(), d);
    r.f64s(b.hi.data(), d);
    bounds = std::move(b);
  }
  if (r.remaining() != 8) fail(ErrorKind::CorruptPayload, "sketch: unexpected trailing bytes");

  if (detail::fnv1a64(params.data(), params.size()) != fingerprint)
    fail(ErrorKind::FingerprintMismatch, "sketch: stored fingerprint does not match map parameters");
  FeatureMap map = decode_map(params);
  if (static_cast<std::uint64_t>(map.dim()) != dim)
    fail(ErrorKind::CorruptPayload, "sketch: dimension does not match map");
  if (bounds && bounds->lo.size() != map.input_dim())
    fail(ErrorKind::CorruptPayload, "sketch: bounds dimension does not match map");
  Sketch sketch = Sketch::from_parts(std::move(sum), n, fingerprint, std::move(bounds));
  for (Index i = 0; i < sketch.dim(); ++i)
    if (std::memcmp(&sketch.values()[i], &values[i], sizeof(double)) != 0)
      fail(ErrorKind::CorruptPayload, "sketch: values disagree with exact accumulator");
  return SketchFile{std::move(map), std::move(sketch)};
}

SketchFile load_sketch(const std::string& path) { return decode_sketch(detail::read_file(path)); }

}  // namespace nyscl
