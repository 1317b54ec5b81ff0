#pragma once

#include <optional>

#include "foldlab/dense.hpp"
#include "foldlab/spectral.hpp"

namespace foldlab::cones {

// Positivity classification over the standard cone K = {v : v_i >= 0}.
struct ConeCheckReport {
  bool preserving = false;  // all entries >= -pos_tol
  bool ergodic = false;     // all entries > pos_tol: maps K\{0} to strictly positive vectors
  std::optional<int> primitive_exponent;  // smallest k with A^k > 0, searched up to dim^2
};

// Witnessed basic eigenvalue: r simple, dominant, with positive left/right
// eigenvectors. gap_margin = r - |second largest modulus|.
struct BasicEigenvalueCertificate {
  SpectralTriple triple;  // primary_value = r, gap_value = second modulus
  double gap_margin = 0.0;
  double simplicity_witness = 0.0;  // <phi*, phi> before normalization
};

// Membership data for the symmetric-perturbation class: symmetric A with
// ||A|| <= b < mu_m and A + p_min I entrywise nonnegative.
struct FinePerturbationCertificate {
  double norm_bound = 0.0;  // measured ||A||_2
  double b = 0.0;
  double p_min = 0.0;  // max(0, -min_ij A_ij)
  bool symmetric = false;
  bool member = false;
};

// pos_tol < 0 selects the default 1e-12 * max|A|.
ConeCheckReport positivity_class(const DenseOperator& A, double pos_tol = -1.0);

// Requires ergodicity or a primitive exponent; throws NotErgodic otherwise.
// GapTooSmall when gap_margin <= tol, DegenerateWitness when |<phi*,phi>| <= tol.
BasicEigenvalueCertificate certify_basic_eigenvalue(const DenseOperator& S, double tol = 1e-10);

// Never throws: non-membership is data.
FinePerturbationCertificate certify_fine_perturbation(const DenseOperator& A, double mu_m,
                                                      double b);

}  // namespace foldlab::cones
