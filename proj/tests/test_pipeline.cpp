#include <doctest.h>

#include <sys/wait.h>

#include <unistd.h>

#include <algorithm>
#include <cstring>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <vector>

#include "nyscl/error.hpp"
#include "nyscl/pipeline.hpp"
#include "nyscl/svg.hpp"
#include "nyscl/sweep.hpp"

using namespace nyscl;
namespace fs = std::filesystem;

namespace {

Dataset synthetic(std::int64_t n, int k, int d, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.n = n;
  spec.k = k;
  spec.d = d;
  spec.seed = seed;
  return gen_synthetic(spec).data;
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

// Tag balance check: every element is closed in order.
bool well_formed_xml(const std::string& s) {
  std::vector<std::string> stack;
  std::size_t pos = 0;
  while ((pos = s.find('<', pos)) != std::string::npos) {
    const std::size_t end = s.find('>', pos);
    if (end == std::string::npos) return false;
    const std::string tag = s.substr(pos + 1, end - pos - 1);
    pos = end + 1;
    if (tag.empty()) return false;
    if (tag[0] == '?' || tag[0] == '!') continue;
    if (tag.back() == '/') continue;
    if (tag[0] == '/') {
      if (stack.empty() || stack.back() != tag.substr(1)) return false;
      stack.pop_back();
      continue;
    }
    stack.push_back(tag.substr(0, tag.find(' ')));
  }
  return stack.empty();
}

std::size_t count_of(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (std::size_t p = s.find(needle); p != std::string::npos; p = s.find(needle, p + 1)) ++n;
  return n;
}

std::string read_all(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(NYSCL_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::uint64_t fnv(const std::string& bytes, std::size_t len) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= static_cast<unsigned char>(bytes[i]);
    h *= 0x100000001b3ULL;
  }
  return h;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("nyscl_pipeline_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("sketch sizes from the m/p multiplier") {
  CHECK(model_size(10, 10) == 200);
  CHECK(sketch_size_from_ratio(2.0, 10, 10) == 400);
  CHECK(sketch_size_from_ratio(0.5, 10, 10) == 100);
  CHECK_THROWS_AS(sketch_size_from_ratio(0.0, 10, 10), Error);

  const Dataset ds = synthetic(500, 10, 10, 1);
  SketchConfig sc;
  sc.family = MapFamily::Rff;
  sc.m = sketch_size_from_ratio(2.0, 10, 10);
  CHECK(build_map(ds.rows, sc).dim() == 400);
  sc.family = MapFamily::Nystrom;
  sc.m = 501;
  CHECK_THROWS_AS(build_map(ds.rows, sc), Error);
}

TEST_CASE("sketching is deterministic per seed") {
  const Dataset ds = synthetic(3000, 10, 10, 2);
  for (Sampling s : {Sampling::Uniform, Sampling::Greedy}) {
    SketchConfig sc;
    sc.sampling = s;
    sc.m = 100;
    sc.seed = 5;
    const SketchFile a = sketch_data(ds.rows, sc), b = sketch_data(ds.rows, sc);
    CHECK(encode_sketch(a.map, a.sketch) == encode_sketch(b.map, b.sketch));
  }
  SketchConfig als;
  als.sampling = Sampling::ALS;
  als.m = 60;
  als.als_lambda = 1e-2;
  const Dataset small = synthetic(400, 3, 2, 3);
  const SketchFile c = sketch_data(small.rows, als);
  CHECK(c.map.nystrom()->landmarks().size() <= 60);
  CHECK(c.map.nystrom()->landmarks().als_lambda.value() == 1e-2);
}

TEST_CASE("evaluate: Lloyd centers and planted parameters") {
  SyntheticSpec spec;
  spec.n = 3000;
  spec.k = 4;
  spec.d = 3;
  spec.seed = 4;
  const SyntheticData syn = gen_synthetic(spec);
  const BaselineFit lloyd = lloyd_baseline(syn.data.rows, 4, 3, 1);
  CHECK(std::abs(evaluate(syn.data, lloyd.hypothesis, false).risk - lloyd.risk) <= 1e-12);

  Hypothesis truth{Task::GaussianModel, syn.means, Vector::Constant(4, 0.25), Matrix::Ones(4, 3)};
  const BaselineFit em = em_baseline(syn.data.rows, 4, 5, 1);
  const EvalResult ev = evaluate(syn.data, truth, true);
  CHECK(ev.risk <= em.risk + 0.05);
  CHECK(ev.ari.has_value());

  Dataset unlabeled{syn.data.rows, std::nullopt};
  CHECK_THROWS_AS(evaluate(unlabeled, truth, true), Error);
}

TEST_CASE("sweep: row count, grid order, thread independence, summaries") {
  const Dataset ds = synthetic(2000, 10, 10, 6);
  SweepConfig cfg;
  cfg.task = Task::KMeans;
  cfg.m_over_p = {1.0, 2.0, 4.0};
  cfg.series = {parse_series("nystrom-uniform"), parse_series("rff")};
  cfg.trials = 20;
  cfg.seed = 3;
  cfg.threads = 1;
  const auto rows = run_sweep(ds, cfg);
  REQUIRE(rows.size() == 3 * 2 * 20);
  CHECK(rows[0].family == "nystrom");
  CHECK(rows[0].sampling == "uniform");
  CHECK(rows[0].m == 200);
  CHECK(rows[20].family == "rff");
  CHECK(rows[119].m_over_p == 4.0);
  CHECK(rows[119].trial == 19);
  for (const auto& r : rows) {
    CHECK(r.sigma_sq == 81.0);
    CHECK(r.ari.has_value());
  }

  const std::string csv = sweep_csv(rows);
  const auto lines = split_lines(csv);
  REQUIRE(lines.size() == 121);
  CHECK(lines[0] == "family,sampling,m,m_over_p,sigma_sq,trial,risk,ari,wall_time");

  // Medians recomputed from the CSV text.
  const auto summary = summarize(rows);
  REQUIRE(summary.size() == 6);
  for (const auto& s : summary) {
    std::vector<double> risks;
    for (std::size_t i = 1; i < lines.size(); ++i) {
      const auto f = split_fields(lines[i]);
      const std::string label = f[0] == "rff" ? "rff" : f[0] + "-" + f[1];
      if (label == s.series && std::stod(f[3]) == s.m_over_p) risks.push_back(std::stod(f[6]));
    }
    REQUIRE(risks.size() == 20);
    std::sort(risks.begin(), risks.end());
    CHECK(s.median == doctest::Approx(0.5 * (risks[9] + risks[10])).epsilon(1e-9));
    CHECK(s.count == 20);
  }

  const std::string svg = sweep_svg(summary, Task::KMeans);
  CHECK(svg.rfind("<?xml", 0) == 0);
  CHECK(well_formed_xml(svg));
  CHECK(count_of(svg, "<polyline") == 2);
  CHECK(count_of(svg, "<polygon") == 2);

  SweepConfig small = cfg;
  small.m_over_p = {1.0};
  small.trials = 3;
  small.threads = 3;
  const auto threaded = run_sweep(ds, small);
  small.threads = 1;
  const auto serial = run_sweep(ds, small);
  REQUIRE(threaded.size() == serial.size());
  for (std::size_t i = 0; i < serial.size(); ++i) {
    CHECK(threaded[i].risk == serial[i].risk);
    CHECK(threaded[i].trial == serial[i].trial);
    CHECK(threaded[i].family == serial[i].family);
  }

  SweepConfig empty = cfg;
  empty.m_over_p.clear();
  CHECK_THROWS_AS(run_sweep(ds, empty), Error);
}

TEST_CASE("sweep statistics helpers") {
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
  CHECK(sample_std({1.0, 2.0, 3.0, 4.0}) == doctest::Approx(std::sqrt(5.0 / 3.0)).epsilon(1e-15));
  CHECK_THROWS_AS(median({}), Error);
  CHECK_THROWS_AS(parse_series("fourier"), Error);
  CHECK(series_label(parse_series("nystrom-greedy")) == "nystrom-greedy");

  SvgSeries s{"a&b", {1.0, 2.0}, {0.5, 0.7}, {}, {}};
  const std::string svg = line_chart_svg({s}, "t<1>", "x", "y");
  CHECK(well_formed_xml(svg));
  CHECK(svg.find("a&amp;b") != std::string::npos);
}

TEST_CASE("cli: end-to-end pipeline and exit codes") {
  TempDir tmp;
  const std::string data = tmp / "d.clds";
  REQUIRE(run_cli("gen --n 2000 --k 4 --d 3 --seed 7 --out " + data) == 0);
  REQUIRE(run_cli("gen --n 2000 --k 4 --d 3 --seed 7 --out " + (tmp / "d2.clds")) == 0);
  CHECK(read_all(data) == read_all(tmp / "d2.clds"));
  CHECK(read_all(data).size() == 4 + 4 + 8 + 4 + 2000 * 3 * 8 + 1 + 2000 * 4);
  CHECK(run_cli("gen --d 0 --out " + (tmp / "bad.clds")) == 2);
  CHECK(run_cli("gen --out /nonexistent-dir/x.clds") == 3);
  CHECK(run_cli("gen --bogus-flag --out " + data) == 2);

  const std::string sk = tmp / "s.clsk";
  REQUIRE(run_cli("sketch --data " + data + " --k 4 --m-over-p 4 --seed 1 --out " + sk) == 0);
  REQUIRE(run_cli("sketch --data " + data + " --k 4 --m-over-p 4 --seed 1 --out " + (tmp / "s2.clsk")) == 0);
  CHECK(read_all(sk) == read_all(tmp / "s2.clsk"));
  CHECK(load_sketch(sk).sketch.dim() == 96);
  CHECK(run_cli("sketch --data " + data + " --m 10 --m-over-p 1 --out " + (tmp / "x.clsk")) == 2);
  CHECK(run_cli("sketch --data " + data + " --out " + (tmp / "x.clsk")) == 2);
  CHECK(run_cli("sketch --data " + data + " --m 2001 --out " + (tmp / "x.clsk")) == 2);
  CHECK(run_cli("sketch --data " + (tmp / "missing.clds") + " --m 10 --out " + (tmp / "x.clsk")) == 3);

  const std::string hyp = tmp / "h.txt";
  REQUIRE(run_cli("learn --sketch " + sk + " --k 4 --seed 2 --out " + hyp) == 0);
  REQUIRE(run_cli("learn --sketch " + sk + " --k 4 --seed 2 --out " + (tmp / "h2.txt")) == 0);
  CHECK(read_all(hyp) == read_all(tmp / "h2.txt"));
  CHECK(parse_mixture(read_all(hyp)).mixture.size() == 4);

  // Rewrite the stored fingerprint and patch the trailing checksum.
  std::string bytes = read_all(sk);
  std::uint64_t plen = 0;
  std::memcpy(&plen, bytes.data() + 8, 8);
  bytes[16 + plen] ^= 0x01;
  const std::uint64_t sum = fnv(bytes, bytes.size() - 8);
  std::memcpy(bytes.data() + bytes.size() - 8, &sum, 8);
  std::ofstream(tmp / "fp.clsk", std::ios::binary) << bytes;
  CHECK(run_cli("learn --sketch " + (tmp / "fp.clsk") + " --k 4 --out " + (tmp / "h3.txt")) == 2);

  const std::string ev = tmp / "eval.csv";
  REQUIRE(run_cli("eval --data " + data + " --hypothesis " + hyp + " --ari --baseline-restarts 3 --out " + ev) == 0);
  const auto lines = split_lines(read_all(ev));
  REQUIRE(lines.size() == 2);
  CHECK(lines[0] == "task,risk,ari,baseline_risk");
  const auto f = split_fields(lines[1]);
  REQUIRE(f.size() == 4);
  CHECK(std::stod(f[2]) > 0.5);
  CHECK(std::stod(f[1]) <= 2.0 * std::stod(f[3]));

  std::ofstream(tmp / "bad.txt") << "# nyscl-mixture v1 task=kmeans family=dirac k=2 d=3\nweight,c0,c1,c2\n1,2,3\n";
  CHECK(run_cli("eval --data " + data + " --hypothesis " + (tmp / "bad.txt")) == 3);
  std::ofstream(tmp / "nolabels.csv") << "1,2,3\n4,5,6\n";
  CHECK(run_cli("eval --data " + (tmp / "nolabels.csv") + " --hypothesis " + hyp + " --ari") == 2);

  REQUIRE(run_cli("theory --data " + data + " --lambda 0.05,0.1 --trials 5 --probe-trials 10 --out " + (tmp / "th")) == 0);
  CHECK(split_lines(read_all(tmp / "th/theory.csv")).size() == 3);
  CHECK(run_cli("theory --data " + data + " --lambda -1 --out " + (tmp / "th")) == 2);

  REQUIRE(run_cli("sweep --data " + data + " --k 4 --m-over-p 1,2 --trials 2 --out " + (tmp / "sw")) == 0);
  CHECK(split_lines(read_all(tmp / "sw/sweep.csv")).size() == 1 + 2 * 2 * 2);
  CHECK(well_formed_xml(read_all(tmp / "sw/sweep.svg")));
  CHECK(run_cli("sweep --data " + data + " --series fourier --out " + (tmp / "sw")) == 2);
}
