#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "foldlab/dense.hpp"
#include "foldlab/spectral.hpp"

namespace foldlab::ops {

enum class OperatorKind {
  dirichlet_laplacian_1d,
  dirichlet_laplacian_2d,
  neumann_laplacian_1d,
  periodic_laplacian_1d,
  harmonic_oscillator,
  nondivergence_1d,
  coupled_system,
  fractional_power,
};

const char* kind_name(OperatorKind k);
OperatorKind kind_from_name(const std::string& name);  // throws Validation

// Kind-specific parameters: a size-1 vector broadcasts as a constant, a
// size-n vector gives per-grid-point samples.
struct ProblemSpec {
  OperatorKind kind = OperatorKind::dirichlet_laplacian_1d;
  std::vector<int> grid_sizes;    // {n} or {nx, ny}
  std::vector<double> extents;    // {x0, x1} (+ {y0, y1}); kind default when empty
  std::map<std::string, Vec> parameters;   // alpha, s, diffusion, drift, potential
  std::shared_ptr<const ProblemSpec> base;  // coupled_system / fractional_power source
};

// Finite-scale linear operator with its certified bottom-of-spectrum data:
// triple.primary_value = lambda_m, triple.gap_value = mu_m (smallest other
// spectral value), phi strictly positive, <phi*, phi> = 1.
struct ModelOperator {
  DenseOperator L;
  SpectralTriple triple;
  ProblemSpec spec;
  bool self_adjoint = true;
};

// Conformal image T = gamma (L - lambda_m I + gamma I)^{-1}: r(T) = 1 with
// the same eigenvectors; gap_value holds the subdominant modulus.
struct RFormProblem {
  DenseOperator T;
  SpectralTriple triple;
  double shift = 0.0;  // the lambda_m subtracted before inversion
  double gamma = 0.0;
};

struct ResolventSample {
  double mu = 0.0;
  bool in_range = true;   // mu < lambda_m - tol as required
  bool positive = true;   // (L - mu I)^{-1} entrywise > 0
  int row = -1, col = -1; // first offending entry when not positive
  double entry = 0.0;
};

struct MSpecialReport {
  bool resolvent_positive = true;
  bool simple_bottom = true;  // spectral gap above tol
  bool mu_in_range = true;
  double gap = 0.0;           // mu_m - lambda_m
  std::vector<ResolventSample> samples;
  bool ok() const { return resolvent_positive && simple_bottom && mu_in_range; }
};

// A^s in the eigenbasis of a symmetric A with nonnegative spectrum; exact at
// matrix scale for any s > 0. Throws SpecInvalid on negative spectrum.
DenseOperator matrix_power(const DenseOperator& A, double s);

// Throws SpecInvalid on malformed specs, CertificationFailed when the
// spectral triple cannot be witnessed (ground state leaves the cone, bottom
// eigenvalue not simple, oscillatory drift mesh).
ModelOperator build_model_operator(const ProblemSpec& spec);

// Tests resolvent positivity below lambda_m at each mu and simplicity of the
// bottom eigenvalue. Violations are report content, never errors.
MSpecialReport verify_m_special(const ModelOperator& M, const std::vector<double>& mu_samples,
                                double tol = 1e-10);

// Throws CertificationFailed when T is not ergodic (reducible source) or
// r(T) strays from 1 beyond 1e-8.
RFormProblem to_r_form(const ModelOperator& M, double gamma);

}  // namespace foldlab::ops
