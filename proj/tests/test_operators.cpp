#include <cmath>
#include <memory>

#include "doctest.h"
#include "foldlab/errors.hpp"
#include "foldlab/operators.hpp"

using namespace foldlab;
using namespace foldlab::ops;

namespace {

ProblemSpec dirichlet_1d(int n) {
  ProblemSpec s;
  s.kind = OperatorKind::dirichlet_laplacian_1d;
  s.grid_sizes = {n};
  return s;
}

// Diagonal similarity D L D^{-1} for a tridiagonal matrix with positive
// off-diagonal products: an independent, symmetric route to the same
// spectrum, used as the oracle for the power-iteration path.
EigenDecomposition symmetrized_tridiag_spectrum(const DenseOperator& L) {
  const int n = L.dim();
  Vec d(n, 1.0);
  for (int i = 0; i + 1 < n; ++i) {
    const double prod = L(i + 1, i) * L(i, i + 1);
    REQUIRE(prod > 0.0);
    d[i + 1] = d[i] * std::sqrt(L(i, i + 1) / L(i + 1, i));
  }
  DenseOperator S(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) S(i, j) = d[i] * L(i, j) / d[j];
  REQUIRE(S.symmetry_defect() <= 1e-9 * S.max_abs());
  for (int i = 0; i + 1 < n; ++i) {
    const double v = 0.5 * (S(i, i + 1) + S(i + 1, i));
    S(i, i + 1) = v;
    S(i + 1, i) = v;
  }
  return symmetric_eigendecompose(S);
}

}  // namespace

TEST_CASE("dirichlet 1d: closed-form triple") {
  auto M = build_model_operator(dirichlet_1d(3));
  const double s2 = std::sqrt(2.0);
  CHECK(M.self_adjoint);
  CHECK(M.triple.primary_value == doctest::Approx(16.0 * (2.0 - s2)).epsilon(1e-12));
  CHECK(M.triple.gap_value == doctest::Approx(32.0).epsilon(1e-12));
  Vec expect = normalized({s2 / 2.0, 1.0, s2 / 2.0});
  for (int i = 0; i < 3; ++i)
    CHECK(M.triple.phi[i] == doctest::Approx(expect[i]).epsilon(1e-10));
  CHECK(triple_right_residual(M.L, M.triple) <= 1e-9 * operator_norm(M.L));
}

TEST_CASE("dirichlet 1d: lambda_m increases to pi^2 at second order") {
  const double pi2 = M_PI * M_PI;
  double lam[3];
  int idx = 0;
  for (int n : {15, 31, 63}) lam[idx++] = build_model_operator(dirichlet_1d(n)).triple.primary_value;
  CHECK(lam[0] < lam[1]);
  CHECK(lam[1] < lam[2]);
  CHECK(lam[2] < pi2);
  const double e0 = pi2 - lam[0], e1 = pi2 - lam[1], e2 = pi2 - lam[2];
  CHECK(e0 / e1 >= 3.5);
  CHECK(e0 / e1 <= 4.5);
  CHECK(e1 / e2 >= 3.5);
  CHECK(e1 / e2 <= 4.5);
}

TEST_CASE("dirichlet 2d: product ground state, positive and simple") {
  ProblemSpec s;
  s.kind = OperatorKind::dirichlet_laplacian_2d;
  s.grid_sizes = {4, 3};
  auto M = build_model_operator(s);
  CHECK(M.L.dim() == 12);
  CHECK(M.self_adjoint);
  // lambda_m = 4(n+1)^2 sin^2(pi/(2(n+1))) summed over the two directions
  const double lx = 4.0 * 25.0 * std::pow(std::sin(M_PI / 10.0), 2);
  const double ly = 4.0 * 16.0 * std::pow(std::sin(M_PI / 8.0), 2);
  CHECK(M.triple.primary_value == doctest::Approx(lx + ly).epsilon(1e-10));
  CHECK(min_element(M.triple.phi) > 0.0);
}

TEST_CASE("neumann and periodic: zero bottom eigenvalue, constant ground state") {
  ProblemSpec s;
  s.kind = OperatorKind::neumann_laplacian_1d;
  s.grid_sizes = {4};
  auto N = build_model_operator(s);
  CHECK(std::abs(N.triple.primary_value) <= 1e-10);
  CHECK(N.triple.gap_value == doctest::Approx(32.0 - 16.0 * std::sqrt(2.0)).epsilon(1e-10));
  for (double v : N.triple.phi) CHECK(v == doctest::Approx(0.5).epsilon(1e-9));

  s.kind = OperatorKind::periodic_laplacian_1d;
  auto P = build_model_operator(s);
  CHECK(std::abs(P.triple.primary_value) <= 1e-10);
  CHECK(P.triple.gap_value == doctest::Approx(32.0).epsilon(1e-10));
  for (double v : P.triple.phi) CHECK(v == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("harmonic oscillator: truncated ground energy near the continuum value") {
  ProblemSpec s;
  s.kind = OperatorKind::harmonic_oscillator;
  s.grid_sizes = {64};
  auto M = build_model_operator(s);
  CHECK(std::abs(M.triple.primary_value - 1.0) <= 0.02);
  CHECK(min_element(M.triple.phi) > 0.0);  // Gaussian tails stay positive
  auto rep = verify_m_special(M, {0.0});
  CHECK(rep.ok());
}

TEST_CASE("nondivergence: drift-free case reproduces the symmetric triple") {
  ProblemSpec s;
  s.kind = OperatorKind::nondivergence_1d;
  s.grid_sizes = {3};
  auto M = build_model_operator(s);
  CHECK(!M.self_adjoint);  // built by the power path regardless of symmetry
  CHECK(M.triple.primary_value == doctest::Approx(16.0 * (2.0 - std::sqrt(2.0))).epsilon(1e-9));
  CHECK(M.triple.gap_value == doctest::Approx(32.0).epsilon(1e-7));
}

TEST_CASE("nondivergence with drift: power path matches the similarity oracle") {
  ProblemSpec s;
  s.kind = OperatorKind::nondivergence_1d;
  s.grid_sizes = {31};
  s.parameters["drift"] = {5.0};
  auto M = build_model_operator(s);
  CHECK(!M.self_adjoint);
  auto oracle = symmetrized_tridiag_spectrum(M.L);
  CHECK(M.triple.primary_value == doctest::Approx(oracle.eigenvalues[0]).epsilon(1e-9));
  CHECK(M.triple.gap_value == doctest::Approx(oracle.eigenvalues[1]).epsilon(1e-7));
  // continuum reference B^2/4 + pi^2 ~ 16.1
  CHECK(M.triple.primary_value > 15.5);
  CHECK(M.triple.primary_value < 16.5);
  CHECK(min_element(M.triple.phi) > 0.0);
  CHECK(min_element(M.triple.phi_star) > 0.0);
  CHECK(dot(M.triple.phi_star, M.triple.phi) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("nondivergence: oscillatory drift mesh fails certification") {
  ProblemSpec s;
  s.kind = OperatorKind::nondivergence_1d;
  s.grid_sizes = {7};
  s.parameters["drift"] = {200.0};  // |B| h / 2 far above the diffusion
  CHECK_THROWS_WITH_AS(build_model_operator(s), doctest::Contains("CertificationFailed"), Error);
}

TEST_CASE("coupled system: spectrum splits by +/- alpha") {
  ProblemSpec s;
  s.kind = OperatorKind::coupled_system;
  s.grid_sizes = {};
  s.parameters["alpha"] = {1.0};
  s.base = std::make_shared<ProblemSpec>(dirichlet_1d(3));
  auto M = build_model_operator(s);
  CHECK(M.L.dim() == 6);
  CHECK(M.triple.primary_value ==
        doctest::Approx(16.0 * (2.0 - std::sqrt(2.0)) - 1.0).epsilon(1e-10));
  // ground state proportional to (phi, phi)
  Vec base_phi = normalized({std::sqrt(2.0) / 2.0, 1.0, std::sqrt(2.0) / 2.0});
  for (int i = 0; i < 3; ++i) {
    CHECK(M.triple.phi[i] == doctest::Approx(base_phi[i] / std::sqrt(2.0)).epsilon(1e-9));
    CHECK(M.triple.phi[3 + i] == doctest::Approx(base_phi[i] / std::sqrt(2.0)).epsilon(1e-9));
  }

  // multiset identity sigma(coupled) = {lambda +/- alpha}
  auto base = build_model_operator(dirichlet_1d(3));
  auto base_eig = symmetric_eigendecompose(base.L);
  Vec expect;
  for (double lam : base_eig.eigenvalues) {
    expect.push_back(lam - 1.0);
    expect.push_back(lam + 1.0);
  }
  std::sort(expect.begin(), expect.end());
  auto coupled_eig = symmetric_eigendecompose(M.L);
  for (std::size_t k = 0; k < expect.size(); ++k)
    CHECK(coupled_eig.eigenvalues[k] == doctest::Approx(expect[k]).epsilon(1e-8));

  // gap identity mu~ = min(lambda_m + alpha, mu_m - alpha)
  const double expect_gap =
      std::min(base.triple.primary_value + 1.0, base.triple.gap_value - 1.0);
  CHECK(M.triple.gap_value == doctest::Approx(expect_gap).epsilon(1e-9));
}

TEST_CASE("coupled system rejects alpha outside the spectral window") {
  ProblemSpec s;
  s.kind = OperatorKind::coupled_system;
  s.parameters["alpha"] = {40.0};  // above mu_m = 32
  s.base = std::make_shared<ProblemSpec>(dirichlet_1d(3));
  CHECK_THROWS_WITH_AS(build_model_operator(s), doctest::Contains("SpecInvalid"), Error);
}

TEST_CASE("matrix_power: diagonal case and roundtrip") {
  DenseOperator half = matrix_power(DenseOperator::diagonal({1.0, 4.0}), 0.5);
  CHECK(half(0, 0) == doctest::Approx(1.0));
  CHECK(half(1, 1) == doctest::Approx(2.0));
  CHECK(std::abs(half(0, 1)) <= 1e-12);

  // (L^s)^(1/s) = L on symmetric positive-definite input
  auto M = build_model_operator(dirichlet_1d(5));
  for (double s : {0.3, 0.5, 0.8}) {
    DenseOperator back = matrix_power(matrix_power(M.L, s), 1.0 / s);
    back.add_scaled(M.L, -1.0);
    CHECK(back.max_abs() <= 1e-8 * M.L.max_abs());
  }
}

TEST_CASE("fractional power kind: ordered spectrum, same ground state") {
  ProblemSpec s;
  s.kind = OperatorKind::fractional_power;
  s.parameters["s"] = {0.5};
  s.base = std::make_shared<ProblemSpec>(dirichlet_1d(5));
  auto M = build_model_operator(s);
  auto base = build_model_operator(dirichlet_1d(5));
  CHECK(M.triple.primary_value ==
        doctest::Approx(std::sqrt(base.triple.primary_value)).epsilon(1e-10));
  CHECK(M.triple.gap_value == doctest::Approx(std::sqrt(base.triple.gap_value)).epsilon(1e-10));
  for (int i = 0; i < 5; ++i)
    CHECK(M.triple.phi[i] == doctest::Approx(base.triple.phi[i]).epsilon(1e-9));

  s.parameters["s"] = {1.5};
  CHECK_THROWS_WITH_AS(build_model_operator(s), doctest::Contains("SpecInvalid"), Error);
}

TEST_CASE("verify_m_special: resolvent positivity below lambda_m") {
  auto M = build_model_operator(dirichlet_1d(3));
  auto rep = verify_m_special(M, {-1.0, 0.0, 9.0});
  CHECK(rep.ok());
  CHECK(rep.resolvent_positive);
  for (const auto& s : rep.samples) CHECK(s.positive);

  // cross-check one resolvent against the hand inverse of tridiag(-1,2,-1)/16:
  // (L)^{-1}(0,0) = 3/64
  DenseOperator R = invert(M.L);
  CHECK(R(0, 0) == doctest::Approx(3.0 / 64.0).epsilon(1e-12));
  CHECK(R(1, 1) == doctest::Approx(4.0 / 64.0).epsilon(1e-12));
  CHECK(R(0, 2) == doctest::Approx(1.0 / 64.0).epsilon(1e-12));

  // mu above lambda_m is flagged as out of range, not an error
  auto bad = verify_m_special(M, {20.0});
  CHECK(!bad.mu_in_range);
  CHECK(!bad.ok());
}

TEST_CASE("verify_m_special: reducible operator is not positivity improving") {
  ModelOperator M;
  M.L = DenseOperator::diagonal({1.0, 2.0});
  M.triple.primary_value = 1.0;
  M.triple.gap_value = 2.0;
  M.triple.phi = {1.0, 0.0};
  M.triple.phi_star = M.triple.phi;
  auto rep = verify_m_special(M, {0.0});
  CHECK(!rep.resolvent_positive);
  CHECK(!rep.ok());
  CHECK(rep.samples[0].entry == doctest::Approx(0.0));
}

TEST_CASE("to_r_form: conformal image of the grid operator") {
  auto M = build_model_operator(dirichlet_1d(3));
  auto R = to_r_form(M, 1.0);
  CHECK(R.T.min_entry() > 0.0);
  CHECK(R.triple.primary_value == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(R.triple.gap_value ==
        doctest::Approx(1.0 / (1.0 + 16.0 * std::sqrt(2.0))).epsilon(1e-8));
  CHECK(R.shift == doctest::Approx(M.triple.primary_value));
  // eigenvectors pass through the resolvent unchanged
  for (int i = 0; i < 3; ++i)
    CHECK(R.triple.phi[i] == doctest::Approx(M.triple.phi[i]).epsilon(1e-8));
}

TEST_CASE("to_r_form: reducible source fails ergodicity") {
  ModelOperator M;
  M.L = DenseOperator::diagonal({0.0, 3.0});
  M.triple.primary_value = 0.0;
  M.triple.gap_value = 3.0;
  M.triple.phi = {1.0, 0.0};
  M.triple.phi_star = M.triple.phi;
  CHECK_THROWS_WITH_AS(to_r_form(M, 1.0), doctest::Contains("CertificationFailed"), Error);
}

TEST_CASE("to_r_form preserves the ground state across kinds") {
  for (auto kind : {OperatorKind::periodic_laplacian_1d, OperatorKind::neumann_laplacian_1d}) {
    ProblemSpec s;
    s.kind = kind;
    s.grid_sizes = {8};
    auto M = build_model_operator(s);
    auto R = to_r_form(M, 2.5);
    CHECK(R.T.min_entry() > 0.0);
    CHECK(R.triple.primary_value == doctest::Approx(1.0).epsilon(1e-9));
    Vec diff = sub(R.triple.phi, M.triple.phi);
    CHECK(norm2(diff) <= 1e-8);
  }
}

TEST_CASE("spec validation failures") {
  CHECK_THROWS_WITH_AS(build_model_operator(dirichlet_1d(1)), doctest::Contains("SpecInvalid"),
                       Error);
  ProblemSpec s = dirichlet_1d(4);
  s.extents = {1.0, 0.0};
  CHECK_THROWS_WITH_AS(build_model_operator(s), doctest::Contains("SpecInvalid"), Error);
  ProblemSpec nd;
  nd.kind = OperatorKind::nondivergence_1d;
  nd.grid_sizes = {5};
  nd.parameters["diffusion"] = {-1.0};
  CHECK_THROWS_WITH_AS(build_model_operator(nd), doctest::Contains("SpecInvalid"), Error);
  ProblemSpec c;
  c.kind = OperatorKind::coupled_system;
  CHECK_THROWS_WITH_AS(build_model_operator(c), doctest::Contains("SpecInvalid"), Error);
}

TEST_CASE("kind names round-trip") {
  for (auto kind : {OperatorKind::dirichlet_laplacian_1d, OperatorKind::harmonic_oscillator,
                    OperatorKind::coupled_system, OperatorKind::fractional_power})
    CHECK(kind_from_name(kind_name(kind)) == kind);
  CHECK_THROWS_WITH_AS(kind_from_name("spherical_harmonics"), doctest::Contains("Validation"),
                       Error);
}
