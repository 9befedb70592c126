#include <cerrno>
#include <cstdlib>
#include <sstream>

#include "binary_io.hpp"
#include "nyscl/error.hpp"
#include "nyscl/tasks.hpp"

// CLDS layout, little-endian:
//   "CLDS" | u32 version | u64 n | u32 d | f64 rows[n*d] (row-major)
//   | u8 has_labels | i32 labels[n] (when has_labels = 1)

namespace nyscl {

std::vector<std::uint8_t> encode_dataset(const Dataset& ds) {
  require(ds.n() >= 1 && ds.d() >= 1, "save_dataset: dataset must be non-empty");
  require(!ds.labels || static_cast<Index>(ds.labels->size()) == ds.n(),
          "save_dataset: label count does not match rows");
  detail::ByteWriter w;
  w.magic("CLDS");
  w.u32(kDatasetFormatVersion);
  w.u64(static_cast<std::uint64_t>(ds.n()));
  w.u32(static_cast<std::uint32_t>(ds.d()));
  for (Index i = 0; i < ds.n(); ++i)
    for (Index t = 0; t < ds.d(); ++t) w.f64(ds.rows(i, t));
  w.u8(ds.labels ? 1 : 0);
  if (ds.labels)
    for (int l : *ds.labels) w.i32(l);
  return std::move(w.bytes());
}

Dataset decode_dataset(const std::vector<std::uint8_t>& bytes) {
  detail::ByteReader r(bytes.data(), bytes.size(), "dataset");
  if (r.magic(4) != "CLDS") fail(ErrorKind::CorruptPayload, "dataset: bad magic (not a CLDS file)");
  const std::uint32_t version = r.u32();
  if (version != kDatasetFormatVersion)
    fail(ErrorKind::VersionMismatch, "dataset: unsupported format version " + std::to_string(version));
  const std::uint64_t n = r.u64();
  const std::uint32_t d = r.u32();
  if (n == 0 || d == 0) fail(ErrorKind::CorruptPayload, "dataset: empty shape");
  if (n > r.remaining() / 8 / d) fail(ErrorKind::CorruptPayload, "dataset: truncated payload");
  Dataset ds;
  ds.rows.resize(static_cast<Index>(n), d);
  for (Index i = 0; i < ds.n(); ++i)
    for (Index t = 0; t < ds.d(); ++t) ds.rows(i, t) = r.f64();
  const std::uint8_t has_labels = r.u8();
  if (has_labels > 1) fail(ErrorKind::CorruptPayload, "dataset: bad label flag");
  if (has_labels) {
    if (n > r.remaining() / 4) fail(ErrorKind::CorruptPayload, "dataset: truncated label block");
    std::vector<int> labels(n);
    for (auto& l : labels) l = r.i32();
    ds.labels = std::move(labels);
  }
  if (r.remaining() != 0) fail(ErrorKind::CorruptPayload, "dataset: unexpected trailing bytes");
  return ds;
}

void save_dataset(const std::string& path, const Dataset& ds) {
  detail::write_file(path, encode_dataset(ds));
}

Dataset load_dataset(const std::string& path) { return decode_dataset(detail::read_file(path)); }

namespace {

bool parse_double(const std::string& tok, double& out) {
  const char* b = tok.c_str();
  char* e = nullptr;
  errno = 0;
  out = std::strtod(b, &e);
  if (e == b) return false;
  while (*e == ' ' || *e == '\t' || *e == '\r') ++e;
  return *e == '\0' && errno != ERANGE;
}

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

Dataset parse_csv(const std::string& text, bool last_column_label) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::size_t width = 0, lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto toks = split_commas(line);
    std::vector<double> vals(toks.size());
    bool numeric = true;
    for (std::size_t j = 0; j < toks.size(); ++j) numeric = numeric && parse_double(toks[j], vals[j]);
    if (!numeric) {
      // A leading non-numeric line is a header.
      if (rows.empty() && width == 0) {
        width = toks.size();
        continue;
      }
      fail(ErrorKind::InvalidArgument, "csv: non-numeric value on line " + std::to_string(lineno));
    }
    if (width == 0) width = toks.size();
    if (toks.size() != width)
      fail(ErrorKind::InvalidArgument, "csv: inconsistent column count on line " + std::to_string(lineno));
    if (last_column_label) {
      const double l = vals.back();
      if (l != static_cast<double>(static_cast<int>(l)))
        fail(ErrorKind::InvalidArgument, "csv: non-integer label on line " + std::to_string(lineno));
      labels.push_back(static_cast<int>(l));
      vals.pop_back();
    }
    rows.push_back(std::move(vals));
  }
  require(!rows.empty(), "csv: no data rows");
  const std::size_t d = rows.front().size();
  require(d >= 1, "csv: no feature columns");
  Dataset ds;
  ds.rows.resize(static_cast<Index>(rows.size()), static_cast<Index>(d));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t t = 0; t < d; ++t) ds.rows(static_cast<Index>(i), static_cast<Index>(t)) = rows[i][t];
  if (last_column_label) ds.labels = std::move(labels);
  return ds;
}

Dataset load_csv(const std::string& path, bool last_column_label) {
  const auto bytes = detail::read_file(path);
  return parse_csv(std::string(bytes.begin(), bytes.end()), last_column_label);
}

}  // namespace nyscl
