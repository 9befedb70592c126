#include "nyscl/theory.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "nyscl/error.hpp"
#include "nyscl/landmarks.hpp"

namespace nyscl {

namespace {

void check_lambda(double lambda) {
  if (!(lambda > 0.0)) fail(ErrorKind::InvalidArgument, "lambda must be positive");
}

void check_delta(double delta) {
  if (!(delta > 0.0 && delta < 1.0)) fail(ErrorKind::InvalidArgument, "delta must lie in (0, 1)");
}

}  // namespace

Matrix AmbientSpace::features() const {
  return eigvecs * eigvals.cwiseSqrt().asDiagonal();
}

Vector AmbientSpace::embed(const Vector& x) const {
  require_dims(x.size() == points.cols(), "ambient embed: dimension mismatch");
  const GaussianKernel kern(bandwidth_sq);
  Vector kx(n());
  for (Index i = 0; i < n(); ++i) kx[i] = kern.eval(points.row(i).transpose(), x);
  return (eigvecs.transpose() * kx).cwiseQuotient(eigvals.cwiseSqrt());
}

AmbientSpace build_ambient(const Matrix& X, double bandwidth_sq, std::uint64_t seed, Index cap,
                           double rel_tol) {
  require(X.rows() >= 1 && X.cols() >= 1, "build_ambient: empty dataset");
  require(cap >= 1, "build_ambient: cap must be positive");
  AmbientSpace amb;
  amb.bandwidth_sq = bandwidth_sq;
  amb.source_n = X.rows();
  if (X.rows() > cap) {
    amb.points = sample_uniform(X, cap, seed).points;
    amb.subsampled = true;
  } else {
    amb.points = X;
  }
  const SymMatrix K = gram_sym(GaussianKernel(bandwidth_sq), amb.points);
  Eigen::SelfAdjointEigenSolver<Matrix> es(K.entries());
  if (es.info() != Eigen::Success) fail(ErrorKind::Numerical, "build_ambient: eigensolver failed");
  const Vector& ev = es.eigenvalues();  // ascending
  const double top = ev[ev.size() - 1];
  if (!(top > 0.0)) fail(ErrorKind::Numerical, "build_ambient: Gram matrix is zero");
  Index r = 0;
  for (Index j = 0; j < ev.size(); ++j)
    if (ev[j] > rel_tol * top) ++r;
  amb.eigvals.resize(r);
  amb.eigvecs.resize(K.order(), r);
  for (Index j = 0; j < r; ++j) {
    const Index src = ev.size() - 1 - j;
    amb.eigvals[j] = ev[src];
    amb.eigvecs.col(j) = es.eigenvectors().col(src);
  }
  return amb;
}

double effective_dimension(const SymMatrix& K, double lambda) {
  check_lambda(lambda);
  require(K.order() >= 1, "effective_dimension: empty Gram");
  Eigen::SelfAdjointEigenSolver<Matrix> es(K.entries(), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) fail(ErrorKind::Numerical, "effective_dimension: eigensolver failed");
  const double ln = lambda * static_cast<double>(K.order());
  double sum = 0.0;
  for (Index j = 0; j < K.order(); ++j) {
    const double mu = std::max(es.eigenvalues()[j], 0.0);
    sum += mu / (mu + ln);
  }
  return sum;
}

double effective_dimension(const AmbientSpace& amb, double lambda) {
  check_lambda(lambda);
  const Vector s = amb.sigma();
  return (s.array() / (s.array() + lambda)).sum();
}

double n_infty(const AmbientSpace& amb, double lambda) {
  check_lambda(lambda);
  const Vector inv = (amb.sigma().array() + lambda).inverse().matrix();
  const Matrix F = amb.features();
  return (F.array().square().matrix() * inv).maxCoeff();
}

double projection_defect(const AmbientSpace& amb, const std::vector<Index>& landmarks,
                         double lambda) {
  check_lambda(lambda);
  const Vector dsqrt = (amb.sigma().array() + lambda).sqrt().matrix();
  if (landmarks.empty()) return dsqrt.squaredNorm() > 0.0 ? dsqrt[0] * dsqrt[0] : lambda;
  const Index r = amb.rank();
  Matrix Lt(r, static_cast<Index>(landmarks.size()));
  for (std::size_t c = 0; c < landmarks.size(); ++c) {
    const Index i = landmarks[c];
    require(i >= 0 && i < amb.n(), "projection_defect: landmark index out of range");
    Lt.col(static_cast<Index>(c)) = amb.eigvecs.row(i).transpose().cwiseProduct(amb.eigvals.cwiseSqrt());
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(Lt);
  qr.setThreshold(1e-10);
  const Index q = qr.rank();
  const Matrix Q = Matrix(qr.householderQ()).leftCols(q);
  const Matrix DQ = dsqrt.asDiagonal() * Q;
  Matrix M = -DQ * DQ.transpose();
  M.diagonal() += dsqrt.cwiseAbs2();
  Eigen::SelfAdjointEigenSolver<Matrix> es(M, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) fail(ErrorKind::Numerical, "projection_defect: eigensolver failed");
  return std::max(es.eigenvalues()[r - 1], 0.0);
}

double required_m_uniform(double lambda, double delta, double n_infty_val, double K) {
  check_lambda(lambda);
  check_delta(delta);
  require(n_infty_val >= 0.0 && K > 0.0, "required_m_uniform: invalid n_infty or K");
  return std::max(67.0, 5.0 * n_infty_val) * std::log(4.0 * K * K / (lambda * delta));
}

double required_m_als(double lambda, double delta, Index n, double eff_dim_val, double z) {
  check_lambda(lambda);
  check_delta(delta);
  require(n >= 1 && eff_dim_val >= 0.0 && z > 0.0, "required_m_als: invalid arguments");
  return std::max(334.0, 78.0 * z * z * eff_dim_val) *
         std::log(16.0 * static_cast<double>(n) / delta);
}

PairSampler separated_dirac_pairs(Index d, int k, double epsilon, double radius) {
  require(d >= 1 && k >= 1, "separated_dirac_pairs: d and k must be positive");
  require(epsilon >= 0.0 && radius > 0.0, "separated_dirac_pairs: invalid epsilon or radius");
  auto draw = [d, k, epsilon, radius](Rng& rng) {
    Mixture mix;
    mix.family = AtomFamily::Dirac;
    mix.centers.resize(k, d);
    mix.weights.resize(k);
    for (int i = 0; i < k; ++i) {
      bool placed = false;
      for (int attempt = 0; attempt < 10000 && !placed; ++attempt) {
        Vector dir(d);
        for (Index t = 0; t < d; ++t) dir[t] = rng.normal();
        const double nrm = dir.norm();
        if (nrm == 0.0) continue;
        const double rad = radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(d));
        const Vector c = dir * (rad / nrm);
        placed = true;
        for (int j = 0; j < i && placed; ++j)
          if ((mix.centers.row(j).transpose() - c).norm() < 2.0 * epsilon) placed = false;
        if (placed) mix.centers.row(i) = c.transpose();
      }
      if (!placed) fail(ErrorKind::InvalidArgument, "separated_dirac_pairs: cannot place separated centers");
      mix.weights[i] = -std::log1p(-rng.uniform());
    }
    mix.finalize();
    return mix;
  };
  return [draw](Rng& rng) { return std::make_pair(draw(rng), draw(rng)); };
}

SecantProbe secant_probe(const AmbientSpace& amb, const PairSampler& sampler, double lambda,
                         int trials, std::uint64_t seed, std::optional<double> s) {
  check_lambda(lambda);
  require(trials >= 1, "secant_probe: trials must be positive");
  if (s) require(*s > 0.0 && *s < 0.5, "secant_probe: s must lie in (0, 1/2)");
  const Vector sig = amb.sigma();
  const Vector inv = (sig.array() + lambda).inverse().matrix();
  auto mean_embedding = [&](const Mixture& mix) {
    Vector e = Vector::Zero(amb.rank());
    for (Index i = 0; i < mix.size(); ++i) e += mix.weights[i] * amb.embed(mix.centers.row(i).transpose());
    return e;
  };
  SecantProbe out;
  Rng rng(seed, Stream::Probe);
  for (int t = 0; t < trials; ++t) {
    const auto [p, q] = sampler(rng);
    Vector u = mean_embedding(p) - mean_embedding(q);
    const double nrm = u.norm();
    if (!(nrm >= 1e-10)) {
      ++out.skipped;
      continue;
    }
    u /= nrm;
    const double val = u.cwiseAbs2().dot(inv);
    out.values.push_back(val);
    out.sup = std::max(out.sup, val);
    if (s) {
      const double src = (u.cwiseAbs2().array() / sig.array().pow(2.0 * *s)).sum();
      out.source_sum = std::max(out.source_sum.value_or(0.0), src);
    }
  }
  if (out.values.empty()) fail(ErrorKind::InvalidArgument, "secant_probe: every sampled pair coincides");
  return out;
}

TheoryReport theory_report(const AmbientSpace& amb, double lambda, const TheoryOptions& opts) {
  check_lambda(lambda);
  check_delta(opts.delta);
  require(opts.defect_trials >= 1, "theory_report: defect_trials must be positive");
  TheoryReport r;
  r.lambda = lambda;
  r.ambient_n = amb.n();
  r.subsampled = amb.subsampled;
  r.eff_dim = effective_dimension(amb, lambda);
  r.n_infty = n_infty(amb, lambda);
  r.required_m_uniform = required_m_uniform(lambda, opts.delta, r.n_infty);
  r.required_m_als = required_m_als(lambda, opts.delta, amb.n(), r.eff_dim, opts.z);
  r.m_used = std::min<Index>(amb.n(), static_cast<Index>(std::ceil(r.required_m_uniform)));

  std::vector<double> defects;
  int pass = 0;
  for (int t = 0; t < opts.defect_trials; ++t) {
    const std::uint64_t lseed = Rng(opts.seed, Stream::Probe, 1000 + static_cast<std::uint64_t>(t)).next_u64();
    const LandmarkSet ls = sample_uniform(amb.points, r.m_used, lseed);
    const double def = projection_defect(amb, ls.source_indices, lambda);
    defects.push_back(def);
    if (def <= 3.0 * lambda) ++pass;
  }
  std::sort(defects.begin(), defects.end());
  const std::size_t h = defects.size() / 2;
  r.projection_defect = defects.size() % 2 ? defects[h] : 0.5 * (defects[h - 1] + defects[h]);
  r.defect_pass_rate = static_cast<double>(pass) / opts.defect_trials;
  r.bound_3lambda_ok = r.defect_pass_rate >= 1.0 - opts.delta;

  if (opts.probe_trials > 0) {
    double radius = opts.probe_radius;
    if (radius <= 0.0) radius = amb.points.rowwise().norm().maxCoeff();
    const auto sampler = separated_dirac_pairs(amb.points.cols(), opts.probe_k, opts.probe_epsilon, radius);
    const SecantProbe sp = secant_probe(amb, sampler, lambda, opts.probe_trials, opts.seed, opts.source_s);
    r.secant_sup_estimate = sp.sup;
    r.source_condition_sum = sp.source_sum;
  }
  return r;
}

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : ""; }

}  // namespace

std::string format_report(const TheoryReport& r) {
  std::ostringstream os;
  os << "# empirical proxy: ambient space spanned by " << r.ambient_n << " data points"
     << (r.subsampled ? " (uniform subsample)" : "") << "\n";
  os << "lambda=" << num(r.lambda) << "\n";
  os << "eff_dim=" << num(r.eff_dim) << "\n";
  os << "n_infty=" << num(r.n_infty) << "\n";
  os << "required_m_uniform=" << num(r.required_m_uniform) << "\n";
  os << "required_m_als=" << num(r.required_m_als) << "\n";
  os << "m_used=" << r.m_used << "\n";
  os << "projection_defect=" << num(r.projection_defect) << "\n";
  os << "defect_pass_rate=" << num(r.defect_pass_rate) << "\n";
  os << "bound_3lambda_ok=" << (r.bound_3lambda_ok ? "true" : "false") << "\n";
  if (r.secant_sup_estimate) os << "secant_sup_estimate=" << num(*r.secant_sup_estimate) << "\n";
  if (r.source_condition_sum) os << "source_condition_sum=" << num(*r.source_condition_sum) << "\n";
  return os.str();
}

std::string report_csv_header() {
  return "lambda,eff_dim,n_infty,required_m_uniform,required_m_als,m_used,projection_defect,"
         "defect_pass_rate,bound_3lambda_ok,secant_sup_estimate,source_condition_sum,ambient_n,"
         "subsampled\n";
}

std::string report_csv_row(const TheoryReport& r) {
  std::ostringstream os;
  os << num(r.lambda) << ',' << num(r.eff_dim) << ',' << num(r.n_infty) << ','
     << num(r.required_m_uniform) << ',' << num(r.required_m_als) << ',' << r.m_used << ','
     << num(r.projection_defect) << ',' << num(r.defect_pass_rate) << ','
     << (r.bound_3lambda_ok ? 1 : 0) << ',' << opt_num(r.secant_sup_estimate) << ','
     << opt_num(r.source_condition_sum) << ',' << r.ambient_n << ',' << (r.subsampled ? 1 : 0)
     << "\n";
  return os.str();
}

}  // namespace nyscl
