#pragma once

#include <optional>

#include "foldlab/dense.hpp"

namespace foldlab {

struct EigenDecomposition {
  Vec eigenvalues;             // sorted ascending
  DenseOperator eigenvectors;  // orthonormal columns, column k pairs with eigenvalues[k]

  Vec eigenvector(int k) const;
};

// Certified basic-eigenvalue data. primary_value is lambda_m (m-form) or r
// (r-form); gap_value is mu_m, or the largest non-primary modulus.
// Normalization: <phi_star, phi> = 1 and ||phi||_2 = 1.
struct SpectralTriple {
  double primary_value = 0.0;
  double gap_value = 0.0;
  Vec phi;
  Vec phi_star;
};

struct PowerResult {
  double value = 0.0;
  Vec vector;
  double residual = 0.0;
  int iterations = 0;
};

struct DeflatedSecond {
  double value = 0.0;    // signed estimate; real part when complex_pair
  double modulus = 0.0;  // |second eigenvalue|
  Vec vector;
  bool converged = false;
  bool complex_pair = false;  // subdominant spectrum is a conjugate pair
};

// Cyclic Jacobi sweeps. Throws NonSymmetricInput, NoConvergence.
EigenDecomposition symmetric_eigendecompose(const DenseOperator& A, double tol = 1e-12);

// Power iteration for primitive nonnegative matrices, all-ones start.
// Converges when ||A v - rho v|| <= tol * ||A||_2. Throws NotPrimitive, NoConvergence.
PowerResult dominant_eigenpair(const DenseOperator& A, double tol = 1e-10, int max_iter = 50000);

// Same iteration, arbitrary start vector, no primitivity demand. Used for
// warm-started spectral radius tracking along fibers.
PowerResult power_iterate(const DenseOperator& A, const Vec& start, double tol = 1e-10,
                          int max_iter = 50000);

// Largest modulus in the spectrum of A after deflating the known dominant
// pair (rho, phi, phi_star). Seeded deterministic start. When the subdominant
// eigenvalues form a conjugate pair the Rayleigh quotient stagnates; the
// modulus is then recovered from a two-term Krylov recurrence fit, which
// stays in real arithmetic.
DeflatedSecond second_eigenvalue(const DenseOperator& A, double rho, const Vec& phi,
                                 const Vec& phi_star, double tol = 1e-10, int max_iter = 50000);

// Partial-pivot LU, reusable across right-hand sides.
class LuSolver {
 public:
  explicit LuSolver(const DenseOperator& A);  // throws SingularMatrix
  Vec solve(const Vec& rhs) const;
  int dim() const { return dim_; }

 private:
  int dim_ = 0;
  std::vector<double> lu_;
  std::vector<int> perm_;
};

Vec linear_solve(const DenseOperator& A, const Vec& rhs);
DenseOperator invert(const DenseOperator& A);

// T = gamma * (L + gamma I)^{-1}; spectral map z -> gamma/(z + gamma),
// eigenvectors unchanged. Throws SingularShift.
DenseOperator cayley_transform(const DenseOperator& L, double gamma);

// Spectral norm ||A||_2 = sqrt(r(A^T A)), within 1e-8 relative.
double operator_norm(const DenseOperator& A);

// Smallest k <= dim^2 with A^k entrywise > pos_tol level, for entrywise
// nonnegative A (Perron-Frobenius primitivity index, Wielandt bound).
// nullopt when A is not primitive or has significantly negative entries.
std::optional<int> primitive_exponent(const DenseOperator& A, double pos_tol = 0.0);

// Eigenvalue residuals for a triple against S (right and left).
double triple_right_residual(const DenseOperator& S, const SpectralTriple& t);
double triple_left_residual(const DenseOperator& S, const SpectralTriple& t);

}  // namespace foldlab
