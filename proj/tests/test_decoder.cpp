#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "nyscl/decoder.hpp"
#include "nyscl/error.hpp"
#include "support.hpp"

using namespace nyscl;
using testing::fd_gradient;
using testing::normal_matrix;
using testing::normal_vector;
using testing::rel_err;

namespace {

FeatureMap random_nystrom(Rng& rng, Index m, Index d, double s2) {
  const Matrix P = normal_matrix(rng, m, d, 1.5);
  std::vector<Index> idx(static_cast<std::size_t>(m));
  for (Index i = 0; i < m; ++i) idx[static_cast<std::size_t>(i)] = i;
  return NystromMap::build(landmarks_from_indices(P, idx, Sampling::Uniform, 0), GaussianKernel(s2));
}

FeatureMap grid_nystrom(double s2, double spacing, int side) {
  Matrix P(side * side, 2);
  for (int i = 0; i < side; ++i)
    for (int j = 0; j < side; ++j) {
      P(i * side + j, 0) = spacing * (i - (side - 1) / 2.0);
      P(i * side + j, 1) = spacing * (j - (side - 1) / 2.0);
    }
  std::vector<Index> idx(static_cast<std::size_t>(P.rows()));
  for (Index i = 0; i < P.rows(); ++i) idx[static_cast<std::size_t>(i)] = i;
  return NystromMap::build(landmarks_from_indices(P, idx, Sampling::Uniform, 0), GaussianKernel(s2));
}

Matrix sample_gaussian(Rng& rng, const Vector& mu, const Vector& gamma, Index n) {
  Matrix X(n, mu.size());
  for (Index i = 0; i < n; ++i)
    for (Index t = 0; t < mu.size(); ++t) X(i, t) = mu[t] + std::sqrt(gamma[t]) * rng.normal();
  return X;
}

}  // namespace

TEST_CASE("dirac atom sketch equals embed; one-point dataset") {
  Rng rng(1);
  const Matrix X = normal_matrix(rng, 1, 3);
  for (const FeatureMap& map : {random_nystrom(rng, 15, 3, 2.0), FeatureMap(RffMap::build(3, 20, 2.0, 1))}) {
    for (int i = 0; i < 10; ++i) {
      const Vector c = normal_vector(rng, 3);
      CHECK(atom_sketch_dirac(map, c) == map.embed(c));
    }
    const Vector c = X.row(0).transpose();
    CHECK((sketch_dataset(map, X).values() - atom_sketch_dirac(map, c)).cwiseAbs().maxCoeff() <= 1e-15);
  }
}

TEST_CASE("dirac atom sketches reproduce the kernel at landmarks") {
  Rng rng(2);
  const FeatureMap map = random_nystrom(rng, 25, 3, 3.0);
  const NystromMap& ny = *map.nystrom();
  for (Index i = 0; i < 25; ++i)
    for (Index j = 0; j < 25; ++j) {
      const Vector a = ny.landmarks().points.row(i).transpose(), b = ny.landmarks().points.row(j).transpose();
      CHECK(std::abs(atom_sketch_dirac(map, a).dot(atom_sketch_dirac(map, b)) - ny.kernel().eval(a, b)) <= 1e-8);
    }
}

TEST_CASE("dirac_jvp: zero direction, finite differences, symmetry") {
  Rng rng(3);
  for (int fam = 0; fam < 2; ++fam) {
    const FeatureMap map = fam == 0 ? random_nystrom(rng, 20, 3, 2.0) : FeatureMap(RffMap::build(3, 30, 2.0, 4));
    CHECK(dirac_jvp(map, normal_vector(rng, 3), Vector::Zero(map.dim())).norm() == 0.0);
    for (int t = 0; t < 50; ++t) {
      const Vector c = normal_vector(rng, 3), y = normal_vector(rng, map.dim());
      const Vector fd = fd_gradient([&](const Vector& x) { return atom_sketch_dirac(map, x).dot(y); }, c);
      CHECK(rel_err(dirac_jvp(map, c, y), fd) <= 1e-5);
    }
    CHECK_THROWS_AS(dirac_jvp(map, Vector::Zero(2), Vector::Zero(map.dim())), Error);
    CHECK_THROWS_AS(dirac_jvp(map, Vector::Zero(3), Vector::Zero(map.dim() + 1)), Error);
  }

  Matrix P(3, 2);
  P << -1.0, 0.0, 1.0, 0.0, 0.0, 2.0;
  const FeatureMap sym = NystromMap::build(landmarks_from_indices(P, {0, 1, 2}, Sampling::Uniform, 0), GaussianKernel(1.5));
  Vector c(2), y(3);
  c << 0.0, 0.3;
  y << 0.7, 0.7, -0.2;
  CHECK(std::abs(dirac_jvp(sym, c, y)[0]) <= 1e-10);
}

TEST_CASE("gaussian atom: Dirac limit, prefactor, errors") {
  Rng rng(4);
  for (const FeatureMap& map : {random_nystrom(rng, 30, 4, 2.0), FeatureMap(RffMap::build(4, 40, 2.0, 2))}) {
    for (int i = 0; i < 100; ++i) {
      const Vector mu = normal_vector(rng, 4, 2.0);
      CHECK((atom_sketch_gaussian(map, mu, Vector::Zero(4)) - atom_sketch_dirac(map, mu)).cwiseAbs().maxCoeff() <= 1e-12);
    }
    CHECK_THROWS_AS(atom_sketch_gaussian(map, Vector::Zero(4), -Vector::Ones(4)), Error);
    CHECK_THROWS_AS(atom_sketch_gaussian(map, Vector::Zero(3), Vector::Ones(3)), Error);
  }
  // d = 1, gamma = sigma^2, atom centered on the landmark: sigma / sqrt(2 sigma^2).
  const double s2 = 5.0;
  Matrix P(1, 1);
  P << 0.7;
  Vector mu(1), g(1);
  mu << 0.7;
  g << s2;
  CHECK(kernel_mean_vector(P, GaussianKernel(s2), mu, &g)[0] == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
}

TEST_CASE("gaussian atom sketch matches Monte-Carlo sketches") {
  Rng rng(5);
  Vector mu(2), gamma(2);
  mu << 0.4, -0.3;
  gamma << 0.5, 1.3;
  const Matrix X = sample_gaussian(rng, mu, gamma, 1000000);
  for (const FeatureMap& map : {grid_nystrom(1.0, 1.5, 4), FeatureMap(RffMap::build(2, 30, 1.0, 8))}) {
    const Vector mc = sketch_dataset(map, X).values();
    CHECK((mc - atom_sketch_gaussian(map, mu, gamma)).cwiseAbs().maxCoeff() <= 0.01);
  }
}

TEST_CASE("gaussian_jvp: zero direction, finite differences, widening sign") {
  Rng rng(6);
  for (int fam = 0; fam < 2; ++fam) {
    const FeatureMap map = fam == 0 ? random_nystrom(rng, 20, 3, 2.0) : FeatureMap(RffMap::build(3, 30, 2.0, 9));
    const GaussianJvp z = gaussian_jvp(map, Vector::Zero(3), Vector::Ones(3), Vector::Zero(map.dim()));
    CHECK(z.d_mu.norm() == 0.0);
    CHECK(z.d_gamma.norm() == 0.0);
    for (int t = 0; t < 50; ++t) {
      const Vector mu = normal_vector(rng, 3);
      Vector gamma(3);
      for (Index j = 0; j < 3; ++j) gamma[j] = 0.2 + 2.0 * rng.uniform();
      const Vector y = normal_vector(rng, map.dim());
      const GaussianJvp j = gaussian_jvp(map, mu, gamma, y);
      const Vector fd_mu = fd_gradient([&](const Vector& x) { return atom_sketch_gaussian(map, x, gamma).dot(y); }, mu);
      const Vector fd_g = fd_gradient([&](const Vector& x) { return atom_sketch_gaussian(map, mu, x).dot(y); }, gamma);
      CHECK(rel_err(j.d_mu, fd_mu) <= 1e-5);
      CHECK(rel_err(j.d_gamma, fd_g) <= 1e-5);
    }
  }
  Matrix P(1, 1);
  P << 0.0;
  const FeatureMap one = NystromMap::build(landmarks_from_indices(P, {0}, Sampling::Uniform, 0), GaussianKernel(2.0));
  const GaussianJvp j = gaussian_jvp(one, Vector::Zero(1), Vector::Constant(1, 0.5), Vector::Ones(1));
  CHECK(j.d_gamma[0] < 0.0);
  CHECK(std::abs(j.d_mu[0]) < 1e-15);
}

TEST_CASE("nnls: KKT conditions and single-atom comparison") {
  Rng rng(7);
  for (int t = 0; t < 30; ++t) {
    const Matrix A = normal_matrix(rng, 20, 6);
    const Vector b = normal_vector(rng, 20);
    const Vector x = nnls(A, b).x;
    CHECK((x.array() >= 0.0).all());
    const Vector g = A.transpose() * (A * x - b);
    for (Index i = 0; i < 6; ++i) {
      if (x[i] > 0.0) CHECK(std::abs(g[i]) <= 1e-8);
      else CHECK(g[i] >= -1e-8);
    }
    const double res = (A * x - b).norm();
    for (Index i = 0; i < 6; ++i) {
      const double a = std::max(0.0, A.col(i).dot(b) / A.col(i).squaredNorm());
      CHECK(res <= (a * A.col(i) - b).norm() + 1e-12);
    }
  }
  CHECK_THROWS_AS(nnls(Matrix::Zero(3, 2), Vector::Zero(4)), Error);
}

TEST_CASE("cl_ompr: planted point masses are recovered") {
  Matrix C(3, 2);
  C << -3.0, 0.0, 2.5, 1.5, 0.5, -3.0;
  Matrix X(300, 2);
  for (Index i = 0; i < 300; ++i) X.row(i) = C.row(i % 3);
  Rng rng(8);
  const Matrix cloud = normal_matrix(rng, 40, 2, 2.5);
  std::vector<Index> idx(40);
  for (Index i = 0; i < 40; ++i) idx[static_cast<std::size_t>(i)] = i;
  const FeatureMap map = NystromMap::build(landmarks_from_indices(cloud, idx, Sampling::Uniform, 0), GaussianKernel(4.0));
  const Sketch sk = sketch_dataset(map, X);
  DecoderOptions opts;
  opts.k = 3;
  opts.seed = 1;
  const DecodeResult r = cl_ompr(sk, map, AtomFamily::Dirac, opts);
  CHECK(!r.underdetermined);
  REQUIRE(r.mixture.size() == 3);
  CHECK(matched_max_distance(C, r.mixture.centers) <= 1e-3);
  CHECK(std::abs(r.mixture.weights.sum() - 1.0) <= 1e-12);
  for (Index i = 0; i < 3; ++i) CHECK(r.mixture.weights[i] == doctest::Approx(1.0 / 3.0).epsilon(1e-3));
  for (std::size_t i = 1; i < r.refine_trace.size(); ++i) CHECK(r.refine_trace[i] <= r.refine_trace[i - 1]);
}

TEST_CASE("cl_ompr: single repeated point") {
  Rng rng(9);
  const Vector p = normal_vector(rng, 3);
  const Matrix X = p.transpose().replicate(50, 1);
  const Matrix cloud = normal_matrix(rng, 30, 3, 2.0);
  std::vector<Index> idx(30);
  for (Index i = 0; i < 30; ++i) idx[static_cast<std::size_t>(i)] = i;
  for (const FeatureMap& map : {FeatureMap(NystromMap::build(landmarks_from_indices(cloud, idx, Sampling::Uniform, 0), GaussianKernel(3.0))),
                                FeatureMap(RffMap::build(3, 30, 3.0, 2))}) {
    DecoderOptions opts;
    opts.k = 1;
    const DecodeResult r = cl_ompr(sketch_dataset(map, X), map, AtomFamily::Dirac, opts);
    REQUIRE(r.mixture.size() == 1);
    CHECK((r.mixture.centers.row(0).transpose() - p).norm() <= 1e-6);
  }
}

TEST_CASE("cl_ompr: determinism, permutation invariance, errors") {
  Rng rng(10);
  Matrix X(400, 2);
  for (Index i = 0; i < 400; ++i) {
    X(i, 0) = (i % 2 ? 3.0 : -3.0) + 0.5 * rng.normal();
    X(i, 1) = 0.5 * rng.normal();
  }
  const FeatureMap map = RffMap::build(2, 20, 2.0, 3);
  DecoderOptions opts;
  opts.k = 2;
  opts.seed = 4;
  for (AtomFamily fam : {AtomFamily::Dirac, AtomFamily::Gaussian}) {
    const DecodeResult a = cl_ompr(sketch_dataset(map, X), map, fam, opts);
    const DecodeResult b = cl_ompr(sketch_dataset(map, X), map, fam, opts);
    CHECK(a.mixture.centers == b.mixture.centers);
    CHECK(a.mixture.weights == b.mixture.weights);
    CHECK(a.residual == b.residual);
    Matrix Xr = X.colwise().reverse();
    const DecodeResult c = cl_ompr(sketch_dataset(map, Xr), map, fam, opts);
    CHECK(c.mixture.centers == a.mixture.centers);
    for (std::size_t i = 1; i < a.refine_trace.size(); ++i) CHECK(a.refine_trace[i] <= a.refine_trace[i - 1]);
  }

  const FeatureMap other = RffMap::build(2, 20, 2.0, 5);
  try {
    cl_ompr(sketch_dataset(map, X), other, AtomFamily::Dirac, opts);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::FingerprintMismatch);
  }
  const Sketch zero = Sketch::from_values(Vector::Zero(map.dim()), 1, map.fingerprint());
  CHECK_THROWS_AS(cl_ompr(zero, map, AtomFamily::Dirac, opts), Error);
  DecoderOptions bad = opts;
  bad.k = 0;
  CHECK_THROWS_AS(cl_ompr(sketch_dataset(map, X), map, AtomFamily::Dirac, bad), Error);
  bad = opts;
  bad.k = 20;
  CHECK(cl_ompr(sketch_dataset(map, X), map, AtomFamily::Dirac, bad).underdetermined);
}

TEST_CASE("cl_ompr: residual is monotone in model size with warm starts") {
  Rng rng(11);
  Matrix X(600, 2);
  for (Index i = 0; i < 600; ++i) {
    const double a = 2.0 * M_PI * static_cast<double>(i % 4) / 4.0;
    X(i, 0) = 3.0 * std::cos(a) + 0.6 * rng.normal();
    X(i, 1) = 3.0 * std::sin(a) + 0.6 * rng.normal();
  }
  for (const FeatureMap& map : {FeatureMap(RffMap::build(2, 30, 2.0, 1)),
                                FeatureMap(NystromMap::build(sample_uniform(X, 40, 2), GaussianKernel(2.0)))}) {
    const Sketch sk = sketch_dataset(map, X);
    for (AtomFamily fam : {AtomFamily::Dirac, AtomFamily::Gaussian}) {
      DecoderOptions opts;
      opts.seed = 3;
      opts.k = 1;
      DecodeResult prev = cl_ompr(sk, map, fam, opts);
      for (int k = 2; k <= 5; ++k) {
        opts.k = k;
        opts.warm_start = prev.mixture;
        const DecodeResult cur = cl_ompr(sk, map, fam, opts);
        CHECK(cur.mixture.size() <= k);
        CHECK(cur.residual <= prev.residual);
        prev = cur;
      }
    }
  }
}

TEST_CASE("extract_hypothesis") {
  Mixture d;
  d.family = AtomFamily::Dirac;
  d.centers = Matrix::Random(3, 2);
  d.weights = Vector::Constant(3, 1.0 / 3.0);
  const Hypothesis h = extract_hypothesis(d, Task::KMeans);
  CHECK(h.centers == d.centers);
  CHECK(h.weights.size() == 0);
  CHECK_THROWS_AS(extract_hypothesis(d, Task::GaussianModel), Error);

  Mixture g = d;
  g.family = AtomFamily::Gaussian;
  g.gammas = Matrix::Constant(3, 2, 0.5);
  const Hypothesis hg = extract_hypothesis(g, Task::GaussianModel);
  CHECK(hg.centers == g.centers);
  CHECK(hg.gammas == g.gammas);
  CHECK(hg.weights == g.weights);

  Mixture empty;
  empty.centers.resize(0, 2);
  CHECK_THROWS_AS(extract_hypothesis(empty, Task::KMeans), Error);
}

TEST_CASE("mixture table round trip and malformed input") {
  Mixture g;
  g.family = AtomFamily::Gaussian;
  g.centers = Matrix::Random(4, 3);
  g.gammas = Matrix::Random(4, 3).cwiseAbs() + Matrix::Constant(4, 3, 0.1);
  g.weights = Vector::Constant(4, 0.25);
  g.weights[0] = 1.0 / 3.0;
  const MixtureFile back = parse_mixture(format_mixture(g, Task::GaussianModel));
  CHECK(back.task == Task::GaussianModel);
  CHECK(back.mixture.centers == g.centers);
  CHECK(back.mixture.gammas == g.gammas);
  CHECK(back.mixture.weights == g.weights);

  const std::string ok = format_mixture(g, Task::GaussianModel);
  auto expect_parse_error = [](const std::string& text) {
    try {
      parse_mixture(text);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::CorruptPayload);
    }
  };
  expect_parse_error("");
  expect_parse_error("hello\n");
  expect_parse_error(ok.substr(0, ok.rfind('\n', ok.size() - 2) + 1));
  std::string bad = ok;
  bad.replace(bad.rfind('\n', bad.size() - 2) + 1, 4, "abcd");
  expect_parse_error(bad);
  std::string wrong_task = ok;
  wrong_task.replace(wrong_task.find("task=gmm"), 8, "task=kmeans");
  expect_parse_error(wrong_task);
  CHECK_THROWS_AS(format_mixture(g, Task::KMeans), Error);
}
