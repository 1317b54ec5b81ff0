#include "foldlab/cones.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "foldlab/errors.hpp"

namespace foldlab::cones {

ConeCheckReport positivity_class(const DenseOperator& A, double pos_tol) {
  if (pos_tol < 0.0) pos_tol = 1e-12 * std::max(A.max_abs(), 1e-300);
  ConeCheckReport r;
  const double lo = A.min_entry();
  r.preserving = lo >= -pos_tol;
  r.ergodic = lo > pos_tol;
  r.primitive_exponent = primitive_exponent(A, pos_tol);
  return r;
}

BasicEigenvalueCertificate certify_basic_eigenvalue(const DenseOperator& S, double tol) {
  const auto cls = positivity_class(S);
  if (!cls.ergodic && !cls.primitive_exponent.has_value())
    fail(Err::NotErgodic, "no power of the operator is entrywise positive");

  const int n = S.dim();
  const double power_tol = std::min(tol, 1e-11);
  BasicEigenvalueCertificate cert;
  SpectralTriple& t = cert.triple;

  if (S.is_symmetric()) {
    const auto eig = symmetric_eigendecompose(S);
    t.primary_value = eig.eigenvalues.back();
    t.phi = eig.eigenvector(n - 1);
    t.phi_star = t.phi;
    cert.simplicity_witness = dot(t.phi_star, t.phi);  // unit vector: 1
    t.gap_value = n >= 2 ? std::max(std::abs(eig.eigenvalues[0]),
                                    std::abs(eig.eigenvalues[n - 2]))
                         : 0.0;
  } else {
    const auto right = dominant_eigenpair(S, power_tol);
    const auto left = dominant_eigenpair(S.transpose(), power_tol);
    if (std::abs(right.value - left.value) > 1e-8 * std::max(1.0, std::abs(right.value)))
      fail(Err::NoConvergence, "left and right spectral radius estimates disagree");
    t.primary_value = right.value;
    t.phi = right.vector;
    cert.simplicity_witness = dot(left.vector, t.phi);
    if (std::abs(cert.simplicity_witness) <= tol)
      fail(Err::DegenerateWitness,
           "<phi*, phi> = " + std::to_string(cert.simplicity_witness));
    const auto second = second_eigenvalue(S, right.value, t.phi, left.vector, power_tol);
    if (!second.converged)
      fail(Err::NoConvergence, "subdominant modulus iteration stalled");
    t.gap_value = second.modulus;
    t.phi_star = scaled(left.vector, 1.0 / cert.simplicity_witness);
  }

  if (min_element(t.phi) <= 0.0 || min_element(t.phi_star) <= 0.0)
    fail(Err::NotErgodic, "an eigenvector of the dominant pair leaves the cone");
  if (std::abs(cert.simplicity_witness) <= tol)
    fail(Err::DegenerateWitness,
         "<phi*, phi> = " + std::to_string(cert.simplicity_witness));

  cert.gap_margin = t.primary_value - t.gap_value;
  if (cert.gap_margin <= tol)
    fail(Err::GapTooSmall, "gap margin " + std::to_string(cert.gap_margin));
  return cert;
}

FinePerturbationCertificate certify_fine_perturbation(const DenseOperator& A, double mu_m,
                                                      double b) {
  FinePerturbationCertificate c;
  c.b = b;
  c.symmetric = A.is_symmetric();
  c.norm_bound = operator_norm(A);
  c.p_min = std::max(0.0, -A.min_entry());
  c.member = c.symmetric && c.norm_bound <= b && b < mu_m;
  return c;
}

}  // namespace foldlab::cones
