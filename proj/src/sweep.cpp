#include "nyscl/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "nyscl/error.hpp"
#include "nyscl/rng.hpp"
#include "nyscl/svg.hpp"

namespace nyscl {

std::string series_label(const SweepSeries& s) {
  if (s.family == MapFamily::Rff) return "rff";
  return "nystrom-" + to_string(s.sampling);
}

SweepSeries parse_series(const std::string& label) {
  if (label == "rff") return {MapFamily::Rff, Sampling::Uniform};
  if (label == "nystrom") return {MapFamily::Nystrom, Sampling::Uniform};
  if (label.rfind("nystrom-", 0) == 0) return {MapFamily::Nystrom, parse_sampling(label.substr(8))};
  fail(ErrorKind::InvalidArgument, "unknown series '" + label + "'");
}

int sweep_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("NYSCL_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

struct Job {
  double m_over_p;
  double sigma_sq;
  std::size_t series;
  int trial;
};

}  // namespace

std::vector<SweepRow> run_sweep(const Dataset& ds, const SweepConfig& cfg) {
  require(!cfg.m_over_p.empty(), "sweep: empty m/p grid");
  require(!cfg.series.empty(), "sweep: no series");
  require(cfg.trials >= 1, "sweep: trials must be positive");
  require(cfg.k >= 1, "sweep: k must be positive");
  const std::vector<double> sigmas =
      cfg.sigma_sq.empty() ? std::vector<double>{default_bandwidth_sq(cfg.task)} : cfg.sigma_sq;
  for (double s : sigmas) require(s > 0.0, "sweep: sigma^2 must be positive");
  for (double r : cfg.m_over_p) require(r > 0.0, "sweep: m/p must be positive");
  const bool want_ari = ds.labels.has_value();

  // Leverage scores depend only on sigma^2; compute once per value.
  std::map<double, LeverageScores> scores;
  for (const auto& s : cfg.series)
    if (s.family == MapFamily::Nystrom && s.sampling == Sampling::ALS)
      for (double sg : sigmas)
        if (!scores.count(sg))
          scores.emplace(sg, leverage_scores(gram_sym(GaussianKernel(sg), ds.rows), cfg.als_lambda));

  std::vector<Job> jobs;
  for (double r : cfg.m_over_p)
    for (double sg : sigmas)
      for (std::size_t si = 0; si < cfg.series.size(); ++si)
        for (int t = 0; t < cfg.trials; ++t) jobs.push_back({r, sg, si, t});

  std::vector<SweepRow> rows(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr first_error;

  auto worker = [&]() {
    for (;;) {
      const std::size_t j = next.fetch_add(1);
      if (j >= jobs.size()) return;
      try {
        const Job& job = jobs[j];
        const SweepSeries& ser = cfg.series[job.series];
        Rng trial_rng(cfg.seed, Stream::Landmarks, static_cast<std::uint64_t>(job.trial));
        SketchConfig sc;
        sc.family = ser.family;
        sc.sampling = ser.sampling;
        sc.bandwidth_sq = job.sigma_sq;
        sc.m = sketch_size_from_ratio(job.m_over_p, cfg.k, ds.d());
        sc.als_lambda = cfg.als_lambda;
        sc.seed = trial_rng.next_u64();
        DecoderOptions dopt = cfg.decoder;
        dopt.k = cfg.k;
        dopt.seed = trial_rng.next_u64();

        const auto t0 = std::chrono::steady_clock::now();
        const LeverageScores* lev = nullptr;
        if (auto it = scores.find(job.sigma_sq); it != scores.end()) lev = &it->second;
        const SketchFile sf = sketch_data(ds.rows, sc, lev);
        const DecodeResult dr = learn_from_sketch(sf, cfg.task, dopt);
        const auto t1 = std::chrono::steady_clock::now();
        const EvalResult ev = evaluate(ds, extract_hypothesis(dr.mixture, cfg.task), want_ari);

        SweepRow& row = rows[j];
        row.family = to_string(ser.family);
        row.sampling = ser.family == MapFamily::Rff ? "none" : to_string(ser.sampling);
        row.m = sf.map.dim();
        row.m_over_p = job.m_over_p;
        row.sigma_sq = job.sigma_sq;
        row.trial = job.trial;
        row.risk = ev.risk;
        row.ari = ev.ari;
        row.wall_time = std::chrono::duration<double>(t1 - t0).count();
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!first_error) first_error = std::current_exception();
        next.store(jobs.size());
        return;
      }
    }
  };

  const int nt = std::min<int>(sweep_threads(cfg.threads), static_cast<int>(jobs.size()));
  if (nt <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < nt; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);
  return rows;
}

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << "family,sampling,m,m_over_p,sigma_sq,trial,risk,ari,wall_time\n";
  for (const auto& r : rows)
    os << r.family << ',' << r.sampling << ',' << r.m << ',' << num(r.m_over_p) << ','
       << num(r.sigma_sq) << ',' << r.trial << ',' << num(r.risk) << ','
       << (r.ari ? num(*r.ari) : "") << ',' << num(r.wall_time) << '\n';
  return os.str();
}

double median(std::vector<double> v) {
  require(!v.empty(), "median of an empty set");
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

std::vector<SweepSummary> summarize(const std::vector<SweepRow>& rows) {
  std::vector<SweepSummary> out;
  std::vector<std::vector<double>> vals;
  for (const auto& r : rows) {
    const std::string label = r.family == "rff" ? "rff" : r.family + "-" + r.sampling;
    std::size_t i = 0;
    for (; i < out.size(); ++i)
      if (out[i].series == label && out[i].m_over_p == r.m_over_p && out[i].sigma_sq == r.sigma_sq) break;
    if (i == out.size()) {
      out.push_back({label, r.m_over_p, r.sigma_sq, 0, 0.0, 0.0});
      vals.emplace_back();
    }
    vals[i].push_back(r.risk);
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].count = static_cast<int>(vals[i].size());
    out[i].median = median(vals[i]);
    out[i].std = sample_std(vals[i]);
  }
  return out;
}

std::string summary_csv(const std::vector<SweepSummary>& s) {
  std::ostringstream os;
  os << "series,m_over_p,sigma_sq,trials,median_risk,std_risk\n";
  for (const auto& r : s)
    os << r.series << ',' << num(r.m_over_p) << ',' << num(r.sigma_sq) << ',' << r.count << ','
       << num(r.median) << ',' << num(r.std) << '\n';
  return os.str();
}

std::string sweep_svg(const std::vector<SweepSummary>& s, Task task) {
  require(!s.empty(), "sweep_svg: empty summary");
  std::vector<double> ratios, sigmas;
  for (const auto& r : s) {
    if (std::find(ratios.begin(), ratios.end(), r.m_over_p) == ratios.end()) ratios.push_back(r.m_over_p);
    if (std::find(sigmas.begin(), sigmas.end(), r.sigma_sq) == sigmas.end()) sigmas.push_back(r.sigma_sq);
  }
  const bool by_sigma = ratios.size() == 1 && sigmas.size() > 1;
  std::vector<SvgSeries> series;
  for (const auto& r : s) {
    std::string label = r.series;
    if (!by_sigma && sigmas.size() > 1) label += " s2=" + num(r.sigma_sq);
    if (by_sigma && ratios.size() > 1) label += " m/p=" + num(r.m_over_p);
    auto it = std::find_if(series.begin(), series.end(), [&](const SvgSeries& x) { return x.label == label; });
    if (it == series.end()) {
      series.push_back({label, {}, {}, {}, {}});
      it = series.end() - 1;
    }
    it->x.push_back(by_sigma ? r.sigma_sq : r.m_over_p);
    it->y.push_back(r.median);
    it->band_lo.push_back(r.median - r.std);
    it->band_hi.push_back(r.median + r.std);
  }
  for (auto& ser : series) {
    std::vector<std::size_t> idx(ser.x.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return ser.x[a] < ser.x[b]; });
    SvgSeries sorted{ser.label, {}, {}, {}, {}};
    for (std::size_t i : idx) {
      sorted.x.push_back(ser.x[i]);
      sorted.y.push_back(ser.y[i]);
      sorted.band_lo.push_back(ser.band_lo[i]);
      sorted.band_hi.push_back(ser.band_hi[i]);
    }
    ser = std::move(sorted);
  }
  const std::string risk = task == Task::KMeans ? "SSE / n" : "NLL / n";
  return line_chart_svg(series, "median " + risk + " (band: +-1 std)", by_sigma ? "sigma^2" : "m / p",
                        risk, by_sigma);
}

}  // namespace nyscl
