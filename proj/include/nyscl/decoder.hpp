#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nyscl/features.hpp"
#include "nyscl/tasks.hpp"
#include "nyscl/types.hpp"

namespace nyscl {

enum class AtomFamily { Dirac, Gaussian };

std::string to_string(AtomFamily f);
AtomFamily family_for(Task t);

struct DiracAtom {
  Vector c;
};

struct GaussianAtom {
  Vector mu;
  Vector gamma_diag;
};

/// Weighted atoms of one family. Row i of `centers` (and `gammas` for the
/// Gaussian family) holds atom i.
struct Mixture {
  AtomFamily family = AtomFamily::Dirac;
  Matrix centers;  // k x d
  Matrix gammas;   // k x d, Gaussian only
  Vector weights;

  Index size() const { return centers.rows(); }
  Index dim() const { return centers.cols(); }
  DiracAtom dirac(Index i) const { return {centers.row(i).transpose()}; }
  GaussianAtom gaussian(Index i) const {
    return {centers.row(i).transpose(), gammas.row(i).transpose()};
  }
  /// Rescales weights to sum to one.
  void finalize();
};

struct DecoderOptions {
  int k = 10;
  int replacement_sweeps = -1;  // < 0: k sweeps
  int local_iters = 100;
  int global_iters = 200;
  double grad_tol = 1e-12;
  double step_tol = 1e-9;
  int init_candidates = 50;
  std::uint64_t seed = 0;
  double box_radius = 0.0;   // <= 0: 1.5 x the sketch's data bounding-box radius
  double gamma_floor = 0.0;  // <= 0: 1e-6 sigma^2
  /// Start from these atoms instead of an empty support.
  std::optional<Mixture> warm_start;
};

struct DecodeResult {
  Mixture mixture;            // finalized (weights sum to 1)
  double residual = 0.0;      // |sum_i alpha_i a(theta_i) - s| before finalization
  std::vector<double> refine_trace;  // residual after every global-refinement step
  bool underdetermined = false;      // m < 2 k d
  int iterations = 0;
};

// --- atom sketches and their Jacobian-vector products ----------------------

/// Sketch of a Dirac at c; identical to map.embed(c).
Vector atom_sketch_dirac(const FeatureMap& map, const Vector& c);
/// (J(c))^T y for the Dirac atom sketch.
Vector dirac_jvp(const FeatureMap& map, const Vector& c, const Vector& y);

/// Sketch of N(mu, diag(gamma)). Nystrom: closed-form Gaussian convolution
/// of the kernel; RFF: characteristic function.
Vector atom_sketch_gaussian(const FeatureMap& map, const Vector& mu, const Vector& gamma);

struct GaussianJvp {
  Vector d_mu;
  Vector d_gamma;
};
GaussianJvp gaussian_jvp(const FeatureMap& map, const Vector& mu, const Vector& gamma,
                         const Vector& y);

/// E_{x ~ atom} k(x, p_i) for each row p_i of `points`. gamma == nullptr
/// gives the Dirac case.
Vector kernel_mean_vector(const Matrix& points, const GaussianKernel& kernel, const Vector& mu,
                          const Vector* gamma);

/// sum_i alpha_i a(theta_i).
Vector mixture_sketch(const FeatureMap& map, const Mixture& mixture);

// --- weights ---------------------------------------------------------------

struct NnlsResult {
  Vector x;
  int iterations = 0;
};

/// argmin_{x >= 0} |A x - b| (Lawson-Hanson active set).
NnlsResult nnls(const Matrix& A, const Vector& b, int max_iters = 0);

// --- decoding --------------------------------------------------------------

/// Greedy moment matching with replacement: alternates atom addition against
/// the residual, hard thresholding to k atoms, nonnegative weights and a joint
/// projected-gradient refinement of all atoms.
DecodeResult cl_ompr(const Sketch& sketch, const FeatureMap& map, AtomFamily family,
                     const DecoderOptions& opts);

Hypothesis extract_hypothesis(const Mixture& mixture, Task task);

// --- hypothesis table -------------------------------------------------------

/// Plain-text table, one atom per row:
///   # nyscl-mixture v1 task=<kmeans|gmm> family=<dirac|gaussian> k=<k> d=<d>
///   weight,c0,...,c{d-1}[,g0,...,g{d-1}]
///   <rows>
std::string format_mixture(const Mixture& mixture, Task task);
void save_mixture(const std::string& path, const Mixture& mixture, Task task);

struct MixtureFile {
  Task task;
  Mixture mixture;
};
MixtureFile parse_mixture(const std::string& text);
MixtureFile load_mixture(const std::string& path);

}  // namespace nyscl
