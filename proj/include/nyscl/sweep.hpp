#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nyscl/pipeline.hpp"

namespace nyscl {

struct SweepSeries {
  MapFamily family = MapFamily::Nystrom;
  Sampling sampling = Sampling::Uniform;  // ignored for RFF
};

/// "nystrom-uniform", "nystrom-als", "nystrom-greedy" or "rff".
std::string series_label(const SweepSeries& s);
SweepSeries parse_series(const std::string& label);

struct SweepConfig {
  Task task = Task::KMeans;
  std::vector<double> m_over_p{0.5, 1.0, 2.0, 4.0};
  std::vector<double> sigma_sq;  // empty: the task default
  std::vector<SweepSeries> series{{MapFamily::Nystrom, Sampling::Uniform}, {MapFamily::Rff, Sampling::Uniform}};
  int trials = 50;
  std::uint64_t seed = 0;
  double als_lambda = 1e-3;
  DecoderOptions decoder;  // k and seed are overwritten per job
  int k = 10;
  /// Worker threads; <= 0 reads NYSCL_THREADS, falling back to the hardware count.
  int threads = 0;
};

struct SweepRow {
  std::string family;
  std::string sampling;
  Index m = 0;  // realized sketch dimension
  double m_over_p = 0.0;
  double sigma_sq = 0.0;
  int trial = 0;
  double risk = 0.0;
  std::optional<double> ari;
  double wall_time = 0.0;
};

/// Every (m/p, sigma^2, series, trial) job: build map, sketch, decode,
/// evaluate. Trial t shares its map and decoder seeds across grid points.
/// Rows come back in grid order whatever the thread count.
std::vector<SweepRow> run_sweep(const Dataset& ds, const SweepConfig& cfg);

int sweep_threads(int requested);

std::string sweep_csv(const std::vector<SweepRow>& rows);

struct SweepSummary {
  std::string series;
  double m_over_p = 0.0;
  double sigma_sq = 0.0;
  int count = 0;
  double median = 0.0;
  double std = 0.0;  // across-trial sample standard deviation
};

double median(std::vector<double> v);
double sample_std(const std::vector<double>& v);

/// Median and std of the risk per (series, m/p, sigma^2), in first-seen order.
std::vector<SweepSummary> summarize(const std::vector<SweepRow>& rows);
std::string summary_csv(const std::vector<SweepSummary>& s);

/// Median risk with a +-std band. The x axis is m/p, or sigma^2 (log scale)
/// when only sigma^2 varies; otherwise one polyline per series and sigma^2.
std::string sweep_svg(const std::vector<SweepSummary>& s, Task task);

}  // namespace nyscl
