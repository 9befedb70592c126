#include "nyscl/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "nyscl/error.hpp"
#include "nyscl/rng.hpp"

namespace nyscl {

std::string to_string(AtomFamily f) { return f == AtomFamily::Dirac ? "dirac" : "gaussian"; }

AtomFamily family_for(Task t) {
  return t == Task::KMeans ? AtomFamily::Dirac : AtomFamily::Gaussian;
}

void Mixture::finalize() {
  const double total = weights.sum();
  require(total > 0.0, "mixture: weights sum to zero");
  weights /= total;
}

// ---------------------------------------------------------------------------
// Atom sketches

Vector kernel_mean_vector(const Matrix& points, const GaussianKernel& kernel, const Vector& mu,
                          const Vector* gamma) {
  require_dims(points.cols() == mu.size(), "atom sketch: dimension mismatch");
  const double s2 = kernel.bandwidth_sq();
  const Index m = points.rows(), d = points.cols();
  Vector f(m);
  if (gamma == nullptr) {
    for (Index i = 0; i < m; ++i) {
      double d2 = 0.0;
      for (Index t = 0; t < d; ++t) {
        const double u = points(i, t) - mu[t];
        d2 += u * u;
      }
      f[i] = std::exp(-d2 / (2.0 * s2));
    }
    return f;
  }
  require_dims(gamma->size() == d, "atom sketch: gamma dimension mismatch");
  Vector inv(d);
  double log_pref = 0.0;
  for (Index t = 0; t < d; ++t) {
    const double g = (*gamma)[t];
    if (g < 0.0) fail(ErrorKind::InvalidArgument, "atom sketch: negative gamma entry");
    inv[t] = 1.0 / (g + s2);
    log_pref -= 0.5 * std::log1p(g / s2);
  }
  const double pref = std::exp(log_pref);
  for (Index i = 0; i < m; ++i) {
    double q = 0.0;
    for (Index t = 0; t < d; ++t) {
      const double u = points(i, t) - mu[t];
      q += u * u * inv[t];
    }
    f[i] = pref * std::exp(-0.5 * q);
  }
  return f;
}

namespace {

// RFF atom sketch: cos/sin(omega^T mu) * exp(-0.5 omega^T Gamma omega) / sqrt(m').
Vector rff_atom(const RffMap& r, const Vector& mu, const Vector* gamma) {
  require_dims(mu.size() == r.input_dim(), "atom sketch: dimension mismatch");
  const Index mh = r.m_half();
  const double scale = 1.0 / std::sqrt(static_cast<double>(mh));
  const Matrix& om = r.omega();
  Vector a(2 * mh);
  for (Index l = 0; l < mh; ++l) {
    double p = 0.0, e = 0.0;
    for (Index t = 0; t < om.rows(); ++t) {
      p += om(t, l) * mu[t];
      if (gamma) e += om(t, l) * om(t, l) * (*gamma)[t];
    }
    const double damp = gamma ? std::exp(-0.5 * e) * scale : scale;
    a[l] = std::cos(p) * damp;
    a[mh + l] = std::sin(p) * damp;
  }
  return a;
}

// (J_mu)^T y and (J_gamma)^T y of the RFF atom; gamma == nullptr for a Dirac.
void rff_jvp(const RffMap& r, const Vector& mu, const Vector* gamma, const Vector& y,
             Vector& d_mu, Vector* d_gamma) {
  const Index mh = r.m_half(), d = r.input_dim();
  require_dims(y.size() == 2 * mh, "jvp: sketch dimension mismatch");
  const double scale = 1.0 / std::sqrt(static_cast<double>(mh));
  const Matrix& om = r.omega();
  d_mu = Vector::Zero(d);
  if (d_gamma) *d_gamma = Vector::Zero(d);
  for (Index l = 0; l < mh; ++l) {
    double p = 0.0, e = 0.0;
    for (Index t = 0; t < d; ++t) {
      p += om(t, l) * mu[t];
      if (gamma) e += om(t, l) * om(t, l) * (*gamma)[t];
    }
    const double damp = gamma ? std::exp(-0.5 * e) * scale : scale;
    const double c = std::cos(p), s = std::sin(p);
    const double h = damp * (-s * y[l] + c * y[mh + l]);
    d_mu += h * om.col(l);
    if (d_gamma) {
      const double q = damp * (c * y[l] + s * y[mh + l]);
      *d_gamma -= 0.5 * q * om.col(l).cwiseAbs2();
    }
  }
}

// Nystrom Dirac gradient with z = W y already applied:
// -(1/sigma^2) [ (f^T z) c - X~ (z .* f) ].
Vector nystrom_dirac_jvp(const NystromMap& ny, const Vector& c, const Vector& z) {
  const Matrix& P = ny.landmarks().points;
  const Vector f = kernel_mean_vector(P, ny.kernel(), c, nullptr);
  const Vector zf = z.cwiseProduct(f);
  return -(f.dot(z) * c - P.transpose() * zf) / ny.kernel().bandwidth_sq();
}

// Nystrom Gaussian gradients with z = W y already applied, v = 1/(gamma + sigma^2):
//   mu:    v .* (X~ (z.*f) - mu * sum(z.*f))
//   gamma: 0.5 v .* ((-1 + v .* mu^2) sum(z.*f) + v .* (X~^2 - 2 mu .* X~)(z.*f))
void nystrom_gauss_jvp(const NystromMap& ny, const Vector& mu, const Vector& gamma,
                       const Vector& z, Vector& d_mu, Vector& d_gamma) {
  const Matrix& P = ny.landmarks().points;
  const double s2 = ny.kernel().bandwidth_sq();
  const Vector f = kernel_mean_vector(P, ny.kernel(), mu, &gamma);
  const Vector zf = z.cwiseProduct(f);
  const double total = zf.sum();
  const Vector v = (gamma.array() + s2).inverse().matrix();
  const Vector px = P.transpose() * zf;
  const Vector px2 = P.array().square().matrix().transpose() * zf;
  d_mu = v.cwiseProduct(px - mu * total);
  d_gamma = 0.5 * v.cwiseProduct(
                      ((v.cwiseProduct(mu.cwiseAbs2())).array() - 1.0).matrix() * total +
                      v.cwiseProduct(px2 - 2.0 * mu.cwiseProduct(px)));
}

}  // namespace

Vector atom_sketch_dirac(const FeatureMap& map, const Vector& c) { return map.embed(c); }

Vector dirac_jvp(const FeatureMap& map, const Vector& c, const Vector& y) {
  require_dims(c.size() == map.input_dim(), "dirac_jvp: center dimension mismatch");
  require_dims(y.size() == map.dim(), "dirac_jvp: sketch dimension mismatch");
  if (const auto* ny = map.nystrom()) return nystrom_dirac_jvp(*ny, c, ny->w().entries() * y);
  Vector d_mu;
  rff_jvp(*map.rff(), c, nullptr, y, d_mu, nullptr);
  return d_mu;
}

Vector atom_sketch_gaussian(const FeatureMap& map, const Vector& mu, const Vector& gamma) {
  require_dims(mu.size() == map.input_dim() && gamma.size() == map.input_dim(),
               "atom_sketch_gaussian: dimension mismatch");
  if ((gamma.array() < 0.0).any())
    fail(ErrorKind::InvalidArgument, "atom_sketch_gaussian: negative gamma entry");
  if (const auto* ny = map.nystrom())
    return ny->w().entries() * kernel_mean_vector(ny->landmarks().points, ny->kernel(), mu, &gamma);
  return rff_atom(*map.rff(), mu, &gamma);
}

GaussianJvp gaussian_jvp(const FeatureMap& map, const Vector& mu, const Vector& gamma,
                         const Vector& y) {
  require_dims(mu.size() == map.input_dim() && gamma.size() == map.input_dim(),
               "gaussian_jvp: dimension mismatch");
  require_dims(y.size() == map.dim(), "gaussian_jvp: sketch dimension mismatch");
  GaussianJvp out;
  if (const auto* ny = map.nystrom())
    nystrom_gauss_jvp(*ny, mu, gamma, ny->w().entries() * y, out.d_mu, out.d_gamma);
  else
    rff_jvp(*map.rff(), mu, &gamma, y, out.d_mu, &out.d_gamma);
  return out;
}

Vector mixture_sketch(const FeatureMap& map, const Mixture& mix) {
  require_dims(mix.dim() == map.input_dim(), "mixture_sketch: dimension mismatch");
  Vector s = Vector::Zero(map.dim());
  for (Index i = 0; i < mix.size(); ++i) {
    if (mix.family == AtomFamily::Dirac)
      s += mix.weights[i] * atom_sketch_dirac(map, mix.centers.row(i).transpose());
    else
      s += mix.weights[i] *
           atom_sketch_gaussian(map, mix.centers.row(i).transpose(), mix.gammas.row(i).transpose());
  }
  return s;
}

// ---------------------------------------------------------------------------
// Decoder internals

namespace {

// Optimizer-side atom parameters: Dirac theta = c, Gaussian theta = [mu; log gamma].
class AtomModel {
 public:
  AtomModel(const FeatureMap& map, AtomFamily family, double gamma_floor, double box_radius)
      : map_(map),
        family_(family),
        d_(map.input_dim()),
        log_floor_(std::log(gamma_floor)),
        log_cap_(std::log(std::max(4.0 * box_radius * box_radius, 100.0 * gamma_floor))),
        radius_(box_radius) {}

  Index d() const { return d_; }
  Index pdim() const { return family_ == AtomFamily::Dirac ? d_ : 2 * d_; }
  AtomFamily family() const { return family_; }

  Vector mu(const Vector& theta) const { return theta.head(d_); }
  Vector gamma(const Vector& theta) const { return theta.tail(d_).array().exp().matrix(); }

  Vector sketch(const Vector& theta) const {
    if (family_ == AtomFamily::Dirac) {
      if (const auto* ny = map_.nystrom())
        return ny->w().entries() * kernel_mean_vector(ny->landmarks().points, ny->kernel(), theta, nullptr);
      return rff_atom(*map_.rff(), theta, nullptr);
    }
    const Vector g = gamma(theta), m = mu(theta);
    if (const auto* ny = map_.nystrom())
      return ny->w().entries() * kernel_mean_vector(ny->landmarks().points, ny->kernel(), m, &g);
    return rff_atom(*map_.rff(), m, &g);
  }

  Matrix sketches(const Matrix& thetas) const {
    const Index K = thetas.cols();
    if (const auto* ny = map_.nystrom()) {
      Matrix F(ny->dim(), K);
      for (Index i = 0; i < K; ++i) {
        const Vector th = thetas.col(i);
        if (family_ == AtomFamily::Dirac) {
          F.col(i) = kernel_mean_vector(ny->landmarks().points, ny->kernel(), th, nullptr);
        } else {
          const Vector g = gamma(th);
          F.col(i) = kernel_mean_vector(ny->landmarks().points, ny->kernel(), mu(th), &g);
        }
      }
      return ny->w().entries() * F;
    }
    Matrix A(map_.dim(), K);
    for (Index i = 0; i < K; ++i) A.col(i) = sketch(thetas.col(i));
    return A;
  }

  // The vector the gradient formulas consume in place of y.
  Vector dual(const Vector& y) const {
    if (const auto* ny = map_.nystrom()) return ny->w().entries() * y;
    return y;
  }

  // d/dtheta <a(theta), y>, given dual(y).
  Vector grad(const Vector& theta, const Vector& dual_y) const {
    if (family_ == AtomFamily::Dirac) {
      if (const auto* ny = map_.nystrom()) return nystrom_dirac_jvp(*ny, theta, dual_y);
      Vector d_mu;
      rff_jvp(*map_.rff(), theta, nullptr, dual_y, d_mu, nullptr);
      return d_mu;
    }
    const Vector g = gamma(theta), m = mu(theta);
    Vector d_mu, d_gamma;
    if (const auto* ny = map_.nystrom())
      nystrom_gauss_jvp(*ny, m, g, dual_y, d_mu, d_gamma);
    else
      rff_jvp(*map_.rff(), m, &g, dual_y, d_mu, &d_gamma);
    Vector out(2 * d_);
    out << d_mu, d_gamma.cwiseProduct(g);  // chain rule through log gamma
    return out;
  }

  void project(Eigen::Ref<Vector> theta) const {
    for (Index t = 0; t < d_; ++t) theta[t] = std::clamp(theta[t], -radius_, radius_);
    if (family_ == AtomFamily::Gaussian)
      for (Index t = d_; t < 2 * d_; ++t) theta[t] = std::clamp(theta[t], log_floor_, log_cap_);
  }

  Vector to_theta(const Vector& mu, const Vector* gamma) const {
    Vector th(pdim());
    th.head(d_) = mu;
    if (family_ == AtomFamily::Gaussian) th.tail(d_) = gamma->array().log().matrix();
    project(th);
    return th;
  }

 private:
  const FeatureMap& map_;
  AtomFamily family_;
  Index d_;
  double log_floor_, log_cap_, radius_;
};

struct PgOutcome {
  Vector x;
  double f = 0.0;
  std::vector<double> trace;
};

// Projected gradient with Barzilai-Borwein step proposals and Armijo
// backtracking; every accepted step strictly decreases f.
template <class Eval, class Project>
PgOutcome minimize_projected(Eval&& eval, Project&& project, Vector x, int max_iters,
                             double grad_tol, double step_tol, double init_move) {
  project(x);
  auto [f, g] = eval(x);
  PgOutcome out;
  out.trace.push_back(f);
  const double gmax = g.cwiseAbs().maxCoeff();
  double t = gmax > 0.0 ? init_move / gmax : 1.0;
  for (int it = 0; it < max_iters; ++it) {
    if (!(f > 1e-300)) break;
    Vector probe = x - g;
    project(probe);
    if ((x - probe).cwiseAbs().maxCoeff() <= grad_tol) break;

    bool accepted = false;
    Vector xn, gn, dx;
    double fn = 0.0;
    for (int bt = 0; bt < 60; ++bt) {
      xn = x - t * g;
      project(xn);
      dx = xn - x;
      if (dx.cwiseAbs().maxCoeff() == 0.0) break;
      auto [ft, gt] = eval(xn);
      if (ft <= f + 1e-4 * g.dot(dx)) {
        fn = ft;
        gn = std::move(gt);
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;
    const Vector yv = gn - g;
    x = std::move(xn);
    f = fn;
    g = std::move(gn);
    out.trace.push_back(f);
    if (dx.cwiseAbs().maxCoeff() <= step_tol * (1.0 + x.cwiseAbs().maxCoeff())) break;
    const double sy = dx.dot(yv);
    t = sy > 0.0 ? dx.squaredNorm() / sy : 4.0 * t;
    t = std::clamp(t, 1e-20, 1e20);
  }
  out.x = std::move(x);
  out.f = f;
  return out;
}

Vector flatten(const Matrix& m) { return Eigen::Map<const Vector>(m.data(), m.size()); }

Matrix unflatten(const Vector& v, Index rows) {
  return Eigen::Map<const Matrix>(v.data(), rows, v.size() / rows);
}

Matrix keep_columns(const Matrix& m, const std::vector<Index>& cols) {
  Matrix out(m.rows(), static_cast<Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) out.col(static_cast<Index>(i)) = m.col(cols[i]);
  return out;
}

struct Support {
  Matrix thetas;  // pdim x K
  Vector alpha;
  double residual = std::numeric_limits<double>::infinity();
};

class Decoder {
 public:
  Decoder(const Sketch& sketch, const FeatureMap& map, AtomFamily family, const DecoderOptions& opts)
      : s_(sketch.values()), map_(map), opts_(opts), family_(family),
        sigma_(std::sqrt(map.bandwidth_sq())),
        gamma_floor_(opts.gamma_floor > 0.0 ? opts.gamma_floor : 1e-6 * map.bandwidth_sq()),
        radius_(resolve_radius(sketch, opts)),
        model_(map, family, gamma_floor_, radius_),
        rng_(opts.seed, Stream::Decoder) {
    const Index d = map.input_dim();
    if (sketch.bounds()) {
      lo_ = sketch.bounds()->lo.cwiseMax(-radius_);
      hi_ = sketch.bounds()->hi.cwiseMin(radius_);
    } else {
      lo_ = Vector::Constant(d, -radius_ / 1.5);
      hi_ = Vector::Constant(d, radius_ / 1.5);
    }
  }

  DecodeResult run() {
    DecodeResult res;
    const int k = opts_.k;
    res.underdetermined = map_.dim() < 2 * static_cast<Index>(k) * map_.input_dim();

    Support cur;
    cur.thetas.resize(model_.pdim(), 0);
    Support best;
    if (opts_.warm_start) {
      const Mixture& w = *opts_.warm_start;
      require(w.family == family_, "cl_ompr: warm start has the wrong atom family");
      require_dims(w.dim() == map_.input_dim(), "cl_ompr: warm start dimension mismatch");
      require(w.size() <= k, "cl_ompr: warm start has more than k atoms");
      cur.thetas.resize(model_.pdim(), w.size());
      for (Index i = 0; i < w.size(); ++i) {
        const Vector g = family_ == AtomFamily::Gaussian ? Vector(w.gammas.row(i).transpose()) : Vector();
        cur.thetas.col(i) = model_.to_theta(w.centers.row(i).transpose(),
                                            family_ == AtomFamily::Gaussian ? &g : nullptr);
      }
      if (w.size() > 0) {
        fit_weights(cur);
        best = cur;
      }
    }

    const int sweeps = opts_.replacement_sweeps < 0 ? k : opts_.replacement_sweeps;
    const int total = std::max<int>(0, k - static_cast<int>(cur.thetas.cols())) + sweeps;
    for (int it = 0; it < total; ++it) {
      // (a) new atom most correlated with the residual
      const Vector r = cur.thetas.cols() > 0 ? Vector(s_ - model_.sketches(cur.thetas) * cur.alpha)
                                             : s_;
      const Vector theta = select_atom(r);
      cur.thetas.conservativeResize(Eigen::NoChange, cur.thetas.cols() + 1);
      cur.thetas.col(cur.thetas.cols() - 1) = theta;
      // (b) hard thresholding back to k atoms
      if (cur.thetas.cols() > k) threshold(cur, k);
      // (c) nonnegative weights, evicting dead atoms
      fit_weights(cur);
      evict(cur);
      // (d) joint refinement
      refine(cur, res.refine_trace);
      evict(cur);
      ++res.iterations;
      if (cur.thetas.cols() <= k && cur.residual < best.residual) best = cur;
    }
    if (!std::isfinite(best.residual)) best = cur;

    res.residual = best.residual;
    res.mixture = to_mixture(best);
    res.mixture.finalize();
    return res;
  }

 private:
  static double resolve_radius(const Sketch& sketch, const DecoderOptions& opts) {
    if (opts.box_radius > 0.0) return opts.box_radius;
    require(sketch.bounds().has_value(),
            "cl_ompr: sketch carries no data bounds; set box_radius explicitly");
    const double r = std::max(sketch.bounds()->lo.cwiseAbs().maxCoeff(),
                              sketch.bounds()->hi.cwiseAbs().maxCoeff());
    return 1.5 * std::max(r, 1e-12);
  }

  Vector select_atom(const Vector& r) {
    const Index d = model_.d();
    const int nc = std::max(1, opts_.init_candidates);
    const std::vector<double> gamma_levels =
        family_ == AtomFamily::Gaussian
            ? std::vector<double>{map_.bandwidth_sq() / 4.0, map_.bandwidth_sq() / 16.0,
                                  map_.bandwidth_sq() / 64.0}
            : std::vector<double>{0.0};
    Matrix cands(model_.pdim(), nc * static_cast<Index>(gamma_levels.size()));
    Index col = 0;
    for (int c = 0; c < nc; ++c) {
      Vector mu(d);
      for (Index t = 0; t < d; ++t) mu[t] = rng_.uniform(lo_[t], hi_[t]);
      for (double gl : gamma_levels) {
        const Vector g = Vector::Constant(d, std::max(gl, gamma_floor_));
        cands.col(col++) = model_.to_theta(mu, family_ == AtomFamily::Gaussian ? &g : nullptr);
      }
    }
    const Matrix A = model_.sketches(cands);
    Index best = 0;
    double best_val = -std::numeric_limits<double>::infinity();
    for (Index j = 0; j < A.cols(); ++j) {
      const double nrm = A.col(j).norm();
      if (!(nrm > 0.0)) continue;
      const double v = A.col(j).dot(r) / nrm;
      if (v > best_val) {
        best_val = v;
        best = j;
      }
    }

    const Vector rdual = model_.dual(r);
    auto eval = [&](const Vector& th) -> std::pair<double, Vector> {
      const Vector a = model_.sketch(th);
      const double nrm = a.norm();
      if (!(nrm > 1e-300)) return {0.0, Vector::Zero(th.size())};
      const double corr = a.dot(r);
      const Vector g1 = model_.grad(th, rdual);
      const Vector g2 = model_.grad(th, model_.dual(a));
      return {-corr / nrm, -(g1 / nrm - (corr / (nrm * nrm * nrm)) * g2)};
    };
    auto project = [&](Vector& th) { model_.project(th); };
    return minimize_projected(eval, project, cands.col(best), opts_.local_iters, opts_.grad_tol,
                              opts_.step_tol, 0.1 * sigma_)
        .x;
  }

  void threshold(Support& sup, int k) {
    Matrix A = model_.sketches(sup.thetas);
    for (Index j = 0; j < A.cols(); ++j) {
      const double nrm = A.col(j).norm();
      if (nrm > 0.0) A.col(j) /= nrm;
    }
    const Vector beta = nnls(A, s_).x;
    std::vector<Index> order(static_cast<std::size_t>(beta.size()));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return beta[a] > beta[b]; });
    order.resize(static_cast<std::size_t>(k));
    std::sort(order.begin(), order.end());
    sup.thetas = keep_columns(sup.thetas, order);
  }

  void fit_weights(Support& sup) {
    const Matrix A = model_.sketches(sup.thetas);
    sup.alpha = nnls(A, s_).x;
    sup.residual = (A * sup.alpha - s_).norm();
  }

  void evict(Support& sup) {
    std::vector<Index> keep;
    for (Index i = 0; i < sup.alpha.size(); ++i)
      if (sup.alpha[i] >= 1e-8) keep.push_back(i);
    if (keep.empty() || static_cast<Index>(keep.size()) == sup.alpha.size()) return;
    sup.thetas = keep_columns(sup.thetas, keep);
    fit_weights(sup);
  }

  void refine(Support& sup, std::vector<double>& trace) {
    const Index pdim = model_.pdim();
    Vector alpha_last = sup.alpha;
    auto eval = [&](const Vector& x) -> std::pair<double, Vector> {
      const Matrix th = unflatten(x, pdim);
      const Matrix A = model_.sketches(th);
      const Vector alpha = nnls(A, s_).x;
      const Vector rv = A * alpha - s_;
      const Vector rdual = model_.dual(rv);
      Matrix g(pdim, th.cols());
      for (Index i = 0; i < th.cols(); ++i)
        g.col(i) = alpha[i] > 0.0 ? Vector(2.0 * alpha[i] * model_.grad(th.col(i), rdual))
                                  : Vector::Zero(pdim);
      alpha_last = alpha;
      return {rv.squaredNorm(), flatten(g)};
    };
    auto project = [&](Vector& x) {
      for (Index i = 0; i < x.size() / pdim; ++i) model_.project(x.segment(i * pdim, pdim));
    };
    PgOutcome out = minimize_projected(eval, project, flatten(sup.thetas), opts_.global_iters,
                                       opts_.grad_tol, opts_.step_tol, 0.01 * sigma_);
    for (double f : out.trace) trace.push_back(std::sqrt(f));
    sup.thetas = unflatten(out.x, pdim);
    fit_weights(sup);
  }

  Mixture to_mixture(const Support& sup) const {
    Mixture mix;
    mix.family = family_;
    const Index K = sup.thetas.cols(), d = model_.d();
    mix.centers.resize(K, d);
    if (family_ == AtomFamily::Gaussian) mix.gammas.resize(K, d);
    for (Index i = 0; i < K; ++i) {
      const Vector th = sup.thetas.col(i);
      mix.centers.row(i) = model_.mu(th).transpose();
      if (family_ == AtomFamily::Gaussian) mix.gammas.row(i) = model_.gamma(th).transpose();
    }
    mix.weights = sup.alpha;
    return mix;
  }

  const Vector& s_;
  const FeatureMap& map_;
  const DecoderOptions& opts_;
  AtomFamily family_;
  double sigma_;
  double gamma_floor_;
  double radius_;
  AtomModel model_;
  Rng rng_;
  Vector lo_, hi_;
};

}  // namespace

DecodeResult cl_ompr(const Sketch& sketch, const FeatureMap& map, AtomFamily family,
                     const DecoderOptions& opts) {
  if (sketch.map_fingerprint() != map.fingerprint())
    fail(ErrorKind::FingerprintMismatch, "cl_ompr: sketch was produced by a different feature map");
  require_dims(sketch.dim() == map.dim(), "cl_ompr: sketch dimension does not match map");
  require(opts.k >= 1, "cl_ompr: k must be at least 1");
  require(opts.grad_tol > 0.0 && opts.step_tol > 0.0, "cl_ompr: tolerances must be positive");
  if (!(sketch.values().norm() > 0.0)) fail(ErrorKind::InvalidArgument, "cl_ompr: zero sketch");
  Decoder dec(sketch, map, family, opts);
  return dec.run();
}

Hypothesis extract_hypothesis(const Mixture& mixture, Task task) {
  require(mixture.size() >= 1, "extract_hypothesis: empty mixture");
  require(mixture.family == family_for(task),
          "extract_hypothesis: mixture family does not match task " + to_string(task));
  Hypothesis h;
  h.task = task;
  h.centers = mixture.centers;
  if (task == Task::GaussianModel) {
    h.weights = mixture.weights;
    h.gammas = mixture.gammas;
  }
  return h;
}

// ---------------------------------------------------------------------------
// Mixture table

std::string format_mixture(const Mixture& mix, Task task) {
  require(mix.family == family_for(task), "format_mixture: family does not match task");
  std::ostringstream os;
  const Index d = mix.dim();
  os << "# nyscl-mixture v1 task=" << to_string(task) << " family=" << to_string(mix.family)
     << " k=" << mix.size() << " d=" << d << "\n";
  os << "weight";
  for (Index t = 0; t < d; ++t) os << ",c" << t;
  if (mix.family == AtomFamily::Gaussian)
    for (Index t = 0; t < d; ++t) os << ",g" << t;
  os << "\n";
  char buf[32];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << buf;
  };
  for (Index i = 0; i < mix.size(); ++i) {
    put(mix.weights[i]);
    for (Index t = 0; t < d; ++t) {
      os << ',';
      put(mix.centers(i, t));
    }
    if (mix.family == AtomFamily::Gaussian)
      for (Index t = 0; t < d; ++t) {
        os << ',';
        put(mix.gammas(i, t));
      }
    os << "\n";
  }
  return os.str();
}

void save_mixture(const std::string& path, const Mixture& mixture, Task task) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot open '" + path + "' for writing");
  out << format_mixture(mixture, task);
  if (!out) fail(ErrorKind::Io, "write error on '" + path + "'");
}

MixtureFile parse_mixture(const std::string& text) {
  auto bad = [](const std::string& why) -> void {
    fail(ErrorKind::CorruptPayload, "mixture table parse error: " + why);
  };
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("# nyscl-mixture v1", 0) != 0) bad("missing header");
  std::string task_s, family_s;
  long k = -1, d = -1;
  {
    std::istringstream hs(line.substr(18));
    std::string tok;
    while (hs >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos) bad("malformed header field '" + tok + "'");
      const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
      try {
        if (key == "task") task_s = val;
        else if (key == "family") family_s = val;
        else if (key == "k") k = std::stol(val);
        else if (key == "d") d = std::stol(val);
      } catch (const std::exception&) {
        bad("malformed header value '" + tok + "'");
      }
    }
  }
  if (k < 1 || d < 1) bad("header must give positive k and d");
  MixtureFile out{};
  try {
    out.task = parse_task(task_s);
  } catch (const Error&) {
    bad("unknown task '" + task_s + "'");
  }
  const AtomFamily fam = family_for(out.task);
  if (family_s != to_string(fam)) bad("family does not match task");
  if (!std::getline(in, line) || line.rfind("weight", 0) != 0) bad("missing column header");
  const Index cols = 1 + d * (fam == AtomFamily::Gaussian ? 2 : 1);
  Mixture& mix = out.mixture;
  mix.family = fam;
  mix.centers.resize(k, d);
  if (fam == AtomFamily::Gaussian) mix.gammas.resize(k, d);
  mix.weights.resize(k);
  for (long i = 0; i < k; ++i) {
    if (!std::getline(in, line)) bad("expected " + std::to_string(k) + " rows");
    std::vector<double> vals;
    std::istringstream ls(line);
    std::string tok;
    while (std::getline(ls, tok, ',')) {
      char* end = nullptr;
      const double v = std::strtod(tok.c_str(), &end);
      if (end == tok.c_str() || *end != '\0') bad("non-numeric field '" + tok + "'");
      vals.push_back(v);
    }
    if (static_cast<Index>(vals.size()) != cols) bad("wrong column count on row " + std::to_string(i));
    mix.weights[i] = vals[0];
    for (long t = 0; t < d; ++t) mix.centers(i, t) = vals[static_cast<std::size_t>(1 + t)];
    if (fam == AtomFamily::Gaussian)
      for (long t = 0; t < d; ++t) mix.gammas(i, t) = vals[static_cast<std::size_t>(1 + d + t)];
  }
  if ((mix.weights.array() < 0.0).any()) bad("negative weight");
  if (fam == AtomFamily::Gaussian && !(mix.gammas.array() > 0.0).all()) bad("non-positive variance");
  return out;
}

MixtureFile load_mixture(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open '" + path + "' for reading");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_mixture(ss.str());
}

}  // namespace nyscl
