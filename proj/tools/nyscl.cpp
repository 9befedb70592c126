// nyscl: compressive clustering and Gaussian modeling from Nystrom sketches.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "nyscl/decoder.hpp"
#include "nyscl/error.hpp"
#include "nyscl/features.hpp"
#include "nyscl/pipeline.hpp"
#include "nyscl/sweep.hpp"
#include "nyscl/tasks.hpp"
#include "nyscl/theory.hpp"

namespace {

using namespace nyscl;

constexpr int kExitArgument = 2;
constexpr int kExitIo = 3;
constexpr int kExitNumerical = 4;

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::Io:
    case ErrorKind::CorruptPayload:
    case ErrorKind::VersionMismatch:
      return kExitIo;
    case ErrorKind::Numerical:
      return kExitNumerical;
    default:
      return kExitArgument;
  }
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

Dataset read_data(const std::string& path, bool csv_labels) {
  return ends_with(path, ".csv") ? load_csv(path, csv_labels) : load_dataset(path);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot open '" + path + "' for writing");
  out << text;
  if (!out) fail(ErrorKind::Io, "write error on '" + path + "'");
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorKind::Io, "cannot create directory '" + dir + "': " + ec.message());
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Common {
  std::string task = "kmeans";
  std::uint64_t seed = 0;
  int k = 10;
  std::string out;
};

// --- gen --------------------------------------------------------------------

struct GenArgs {
  Common c;
  std::int64_t n = 10000;
  int d = 10;
  double separation = 2.0;
};

void cmd_gen(const GenArgs& a) {
  SyntheticSpec spec;
  spec.k = a.c.k;
  spec.d = a.d;
  spec.n = a.n;
  spec.separation = a.separation;
  spec.seed = a.c.seed;
  const SyntheticData syn = gen_synthetic(spec);
  save_dataset(a.c.out, syn.data);
  std::printf("n=%lld d=%d k=%d s=%g seed=%llu sigma_inter=%.6g -> %s\n",
              static_cast<long long>(spec.n), spec.d, spec.k, spec.separation,
              static_cast<unsigned long long>(spec.seed), syn.sigma_inter, a.c.out.c_str());
}

// --- sketch -----------------------------------------------------------------

struct SketchArgs {
  Common c;
  std::string data;
  bool csv_labels = false;
  std::string map = "nystrom";
  std::string sampling = "uniform";
  std::optional<double> sigma_sq;
  std::optional<std::int64_t> m;
  std::optional<double> m_over_p;
  double lambda = 1e-3;
};

void cmd_sketch(const SketchArgs& a) {
  const Task task = parse_task(a.c.task);
  const Dataset ds = read_data(a.data, a.csv_labels);
  SketchConfig sc;
  sc.family = parse_map_family(a.map);
  sc.sampling = parse_sampling(a.sampling);
  sc.bandwidth_sq = a.sigma_sq.value_or(default_bandwidth_sq(task));
  require(a.m.has_value() != a.m_over_p.has_value(), "give exactly one of --m and --m-over-p");
  sc.m = a.m ? static_cast<Index>(*a.m) : sketch_size_from_ratio(*a.m_over_p, a.c.k, ds.d());
  sc.als_lambda = a.lambda;
  sc.seed = a.c.seed;
  const auto t0 = std::chrono::steady_clock::now();
  const SketchFile sf = sketch_data(ds.rows, sc);
  const double secs = seconds_since(t0);
  save_sketch(a.c.out, sf.map, sf.sketch);
  std::printf("map=%s sampling=%s sigma_sq=%g m=%lld n=%lld wall_time=%.3fs -> %s\n",
              to_string(sf.map.family()).c_str(),
              sf.map.family() == MapFamily::Rff ? "none" : to_string(sc.sampling).c_str(),
              sc.bandwidth_sq, static_cast<long long>(sf.map.dim()),
              static_cast<long long>(ds.n()), secs, a.c.out.c_str());
  if (const auto* ny = sf.map.nystrom(); ny && ny->landmarks().rank_exhausted)
    std::fprintf(stderr, "warning: greedy selection stopped early (rank exhausted)\n");
}

// --- learn ------------------------------------------------------------------

struct LearnArgs {
  Common c;
  std::string sketch;
  int sweeps = -1;
  int init_candidates = 50;
  int local_iters = 100;
  int global_iters = 200;
};

// Reads the sketch file only; the dataset is never opened here.
void cmd_learn(const LearnArgs& a) {
  const Task task = parse_task(a.c.task);
  const SketchFile sf = load_sketch(a.sketch);
  DecoderOptions opts;
  opts.k = a.c.k;
  opts.seed = a.c.seed;
  opts.replacement_sweeps = a.sweeps;
  opts.init_candidates = a.init_candidates;
  opts.local_iters = a.local_iters;
  opts.global_iters = a.global_iters;
  const auto t0 = std::chrono::steady_clock::now();
  const DecodeResult dr = learn_from_sketch(sf, task, opts);
  const double secs = seconds_since(t0);
  save_mixture(a.c.out, dr.mixture, task);
  if (dr.underdetermined)
    std::fprintf(stderr, "warning: sketch dimension %lld is below 2kd = %lld\n",
                 static_cast<long long>(sf.map.dim()),
                 static_cast<long long>(model_size(opts.k, sf.map.input_dim())));
  std::printf("task=%s k=%lld residual=%.10g iterations=%d wall_time=%.3fs -> %s\n",
              to_string(task).c_str(), static_cast<long long>(dr.mixture.size()), dr.residual,
              dr.iterations, secs, a.c.out.c_str());
}

// --- eval -------------------------------------------------------------------

struct EvalArgs {
  Common c;
  std::string data;
  bool csv_labels = false;
  std::string hypothesis;
  bool ari = false;
  int baseline_restarts = 0;
};

void cmd_eval(const EvalArgs& a) {
  const Dataset ds = read_data(a.data, a.csv_labels);
  const MixtureFile mf = load_mixture(a.hypothesis);
  const Hypothesis h = extract_hypothesis(mf.mixture, mf.task);
  const EvalResult ev = evaluate(ds, h, a.ari);
  std::optional<double> base;
  if (a.baseline_restarts > 0) {
    const int k = static_cast<int>(h.k());
    base = mf.task == Task::KMeans ? lloyd_baseline(ds.rows, k, a.baseline_restarts, a.c.seed).risk
                                   : em_baseline(ds.rows, k, a.baseline_restarts, a.c.seed).risk;
  }
  std::string text = "task,risk,ari,baseline_risk\n" + to_string(mf.task) + ",";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", ev.risk);
  text += buf;
  text += ",";
  if (ev.ari) {
    std::snprintf(buf, sizeof buf, "%.12g", *ev.ari);
    text += buf;
  }
  text += ",";
  if (base) {
    std::snprintf(buf, sizeof buf, "%.12g", *base);
    text += buf;
  }
  text += "\n";
  if (a.c.out.empty())
    std::fputs(text.c_str(), stdout);
  else
    write_text(a.c.out, text);
}

// --- sweep ------------------------------------------------------------------

struct SweepArgs {
  Common c;
  std::string data;
  bool csv_labels = false;
  std::int64_t n = 10000;
  int d = 10;
  double separation = 2.0;
  std::vector<double> m_over_p{0.5, 1.0, 2.0, 4.0};
  std::vector<double> sigma_sq;
  std::vector<std::string> series{"nystrom-uniform", "rff"};
  int trials = 50;
  double lambda = 1e-3;
};

void cmd_sweep(const SweepArgs& a) {
  SweepConfig cfg;
  cfg.task = parse_task(a.c.task);
  cfg.k = a.c.k;
  cfg.m_over_p = a.m_over_p;
  cfg.sigma_sq = a.sigma_sq;
  cfg.series.clear();
  for (const auto& s : a.series) cfg.series.push_back(parse_series(s));
  cfg.trials = a.trials;
  cfg.seed = a.c.seed;
  cfg.als_lambda = a.lambda;
  Dataset ds;
  if (!a.data.empty()) {
    ds = read_data(a.data, a.csv_labels);
  } else {
    SyntheticSpec spec;
    spec.k = a.c.k;
    spec.d = a.d;
    spec.n = a.n;
    spec.separation = a.separation;
    spec.seed = a.c.seed;
    ds = gen_synthetic(spec).data;
  }
  ensure_dir(a.c.out);
  const auto rows = run_sweep(ds, cfg);
  const auto summary = summarize(rows);
  const std::filesystem::path dir(a.c.out);
  write_text((dir / "sweep.csv").string(), sweep_csv(rows));
  write_text((dir / "summary.csv").string(), summary_csv(summary));
  write_text((dir / "sweep.svg").string(), sweep_svg(summary, cfg.task));
  std::fputs(summary_csv(summary).c_str(), stdout);
}

// --- theory -----------------------------------------------------------------

struct TheoryArgs {
  Common c;
  std::string data;
  bool csv_labels = false;
  std::optional<double> sigma_sq;
  std::vector<double> lambdas;
  double delta = 0.1;
  double z = 1.0;
  int trials = 50;
  int probe_trials = 0;
  int probe_k = 3;
  double epsilon = 1.0;
  std::optional<double> source_s;
};

void cmd_theory(const TheoryArgs& a) {
  const Task task = parse_task(a.c.task);
  const Dataset ds = read_data(a.data, a.csv_labels);
  for (double l : a.lambdas) require(l > 0.0, "--lambda values must be positive");
  const AmbientSpace amb = build_ambient(ds.rows, a.sigma_sq.value_or(default_bandwidth_sq(task)), a.c.seed);
  TheoryOptions opts;
  opts.delta = a.delta;
  opts.z = a.z;
  opts.defect_trials = a.trials;
  opts.probe_trials = a.probe_trials;
  opts.probe_k = a.probe_k;
  opts.probe_epsilon = a.epsilon;
  opts.source_s = a.source_s;
  opts.seed = a.c.seed;
  std::string csv = report_csv_header(), text;
  for (double l : a.lambdas) {
    const TheoryReport r = theory_report(amb, l, opts);
    csv += report_csv_row(r);
    text += format_report(r) + "\n";
  }
  ensure_dir(a.c.out);
  const std::filesystem::path dir(a.c.out);
  write_text((dir / "theory.csv").string(), csv);
  write_text((dir / "theory.txt").string(), text);
  std::fputs(text.c_str(), stdout);
}

void add_common(CLI::App* sub, Common& c, bool out_required) {
  sub->add_option("--task", c.task, "kmeans or gmm")->check(CLI::IsMember({"kmeans", "gmm"}));
  sub->add_option("--seed", c.seed, "random seed");
  sub->add_option("--k", c.k, "number of clusters / components");
  auto* o = sub->add_option("--out", c.out, "output path");
  if (out_required) o->required();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compressive clustering and Gaussian modeling from Nystrom sketches"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "write a synthetic Gaussian-mixture dataset");
  add_common(g, gen.c, true);
  g->add_option("--n", gen.n, "number of points");
  g->add_option("--d", gen.d, "dimension");
  g->add_option("--separation", gen.separation, "separation s");

  SketchArgs sk;
  auto* s = app.add_subcommand("sketch", "sample a feature map and sketch a dataset");
  add_common(s, sk.c, true);
  s->add_option("--data", sk.data, "dataset (.clds or .csv)")->required();
  s->add_flag("--csv-labels", sk.csv_labels, "last CSV column holds integer labels");
  s->add_option("--map", sk.map, "nystrom or rff")->check(CLI::IsMember({"nystrom", "rff"}));
  s->add_option("--sampling", sk.sampling, "uniform, als or greedy")
      ->check(CLI::IsMember({"uniform", "als", "greedy"}));
  s->add_option("--sigma-sq", sk.sigma_sq, "kernel variance (default: 81 kmeans, 24 gmm)");
  auto* om = s->add_option("--m", sk.m, "sketch size");
  auto* omp = s->add_option("--m-over-p", sk.m_over_p, "sketch size as a multiple of p = 2kd");
  om->excludes(omp);
  s->add_option("--lambda", sk.lambda, "ridge parameter for ALS sampling");

  LearnArgs le;
  auto* l = app.add_subcommand("learn", "decode a mixture from a sketch file");
  add_common(l, le.c, true);
  l->add_option("--sketch", le.sketch, "sketch file")->required();
  l->add_option("--sweeps", le.sweeps, "replacement sweeps (default k)");
  l->add_option("--init-candidates", le.init_candidates, "random candidates per atom search");
  l->add_option("--local-iters", le.local_iters, "gradient steps per atom search");
  l->add_option("--global-iters", le.global_iters, "joint refinement steps");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "evaluate a hypothesis table on a dataset");
  add_common(e, ev.c, false);
  e->add_option("--data", ev.data, "dataset (.clds or .csv)")->required();
  e->add_flag("--csv-labels", ev.csv_labels, "last CSV column holds integer labels");
  e->add_option("--hypothesis", ev.hypothesis, "mixture table")->required();
  e->add_flag("--ari", ev.ari, "report the adjusted Rand index against dataset labels");
  e->add_option("--baseline-restarts", ev.baseline_restarts, "also fit Lloyd/EM with this many restarts");

  SweepArgs sw;
  auto* w = app.add_subcommand("sweep", "risk versus sketch size and kernel variance");
  add_common(w, sw.c, true);
  w->add_option("--data", sw.data, "dataset (default: synthetic from --n/--d/--k/--separation/--seed)");
  w->add_flag("--csv-labels", sw.csv_labels, "last CSV column holds integer labels");
  w->add_option("--n", sw.n, "synthetic points");
  w->add_option("--d", sw.d, "synthetic dimension");
  w->add_option("--separation", sw.separation, "synthetic separation s");
  w->add_option("--m-over-p", sw.m_over_p, "m/p grid")->delimiter(',');
  w->add_option("--sigma-sq", sw.sigma_sq, "sigma^2 grid (default: task default)")->delimiter(',');
  w->add_option("--series", sw.series, "nystrom-uniform, nystrom-als, nystrom-greedy, rff")->delimiter(',');
  w->add_option("--trials", sw.trials, "trials per grid point");
  w->add_option("--lambda", sw.lambda, "ridge parameter for ALS sampling");

  TheoryArgs th;
  auto* t = app.add_subcommand("theory", "sketch-size diagnostics on a dataset");
  add_common(t, th.c, true);
  t->add_option("--data", th.data, "dataset (.clds or .csv)")->required();
  t->add_flag("--csv-labels", th.csv_labels, "last CSV column holds integer labels");
  t->add_option("--sigma-sq", th.sigma_sq, "kernel variance (default: task default)");
  t->add_option("--lambda", th.lambdas, "lambda values")->delimiter(',')->required();
  t->add_option("--delta", th.delta, "failure probability");
  t->add_option("--z", th.z, "ALS approximation factor");
  t->add_option("--trials", th.trials, "projection-defect trials");
  t->add_option("--probe-trials", th.probe_trials, "secant-probe pairs (0: off)");
  t->add_option("--probe-k", th.probe_k, "Diracs per probe mixture");
  t->add_option("--epsilon", th.epsilon, "probe half-separation");
  t->add_option("--source-s", th.source_s, "source-condition exponent in (0, 1/2)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    app.exit(ex);
    return kExitArgument;
  }

  try {
    if (*g) cmd_gen(gen);
    else if (*s) cmd_sketch(sk);
    else if (*l) cmd_learn(le);
    else if (*e) cmd_eval(ev);
    else if (*w) cmd_sweep(sw);
    else if (*t) cmd_theory(th);
  } catch (const Error& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return exit_code(ex.kind());
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return kExitIo;
  }
  return 0;
}
