#include <cmath>
#include <random>

#include "doctest.h"
#include "foldlab/errors.hpp"
#include "foldlab/nonlinear.hpp"
#include "foldlab/operators.hpp"

using namespace foldlab;
using namespace foldlab::nonlinear;

namespace {

Vec random_vec(int n, std::mt19937_64& rng, double lo = -5.0, double hi = 5.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vec v(n);
  for (double& x : v) x = u(rng);
  return v;
}

// relative error of the exact linearization identity
double identity_defect(const NonlinearMap& P, const Vec& u, const Vec& v) {
  Vec lhs = sub(P.eval(u), P.eval(v));
  Vec rhs = P.linearize(u, v).apply(sub(u, v));
  return norm2(sub(lhs, rhs)) / std::max(1.0, norm2(lhs));
}

}  // namespace

TEST_CASE("convex profile: closed-form values and guards") {
  auto p = make_convex_profile(5.0, 15.0, 1.0);
  CHECK(p.f(0.0) == 0.0);
  CHECK(p.fprime(0.0) == doctest::Approx(10.0));
  CHECK(p.fprime(1e8) == doctest::Approx(15.0).epsilon(1e-7));
  CHECK(p.fprime(-1e8) == doctest::Approx(5.0).epsilon(1e-7));
  CHECK(p.q(1.0, -1.0) == doctest::Approx(10.0).epsilon(1e-14));  // odd-part symmetry
  CHECK(p.q(2.0, 0.0) == doctest::Approx(p.f(2.0) / 2.0).epsilon(1e-14));

  CHECK_THROWS_WITH_AS(make_convex_profile(0.0, 0.0, 1.0), doctest::Contains("BadSlopes"),
                       Error);
  CHECK_THROWS_WITH_AS(make_convex_profile(3.0, 1.0, 1.0), doctest::Contains("BadSlopes"),
                       Error);
  CHECK_THROWS_WITH_AS(make_convex_profile(0.0, 1.0, 0.0), doctest::Contains("InvalidArgument"),
                       Error);
}

TEST_CASE("convex profile: slope and quotient ranges are strictly (a, b)") {
  auto p = make_convex_profile(-2.0, 7.0, 0.5);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  double prev = p.fprime(-60.0);
  for (double t = -59.0; t <= 60.0; t += 1.0) {
    const double cur = p.fprime(t);
    CHECK(cur > prev);  // strictly increasing
    prev = cur;
  }
  for (int k = 0; k < 1000; ++k) {
    const double r = u(rng), s = u(rng);
    const double quot = p.q(r, s);
    CHECK(quot > p.a);
    CHECK(quot < p.b);
    CHECK(p.q(r, r) == doctest::Approx(p.fprime(r)).epsilon(1e-14));
  }
}

TEST_CASE("nemitskii: componentwise evaluation and diagonal linearization") {
  auto p = make_convex_profile(5.0, 15.0, 1.0);
  auto P = nemitskii(p, 3);
  CHECK(norm2(P->eval(Vec(3, 0.0))) == 0.0);

  Vec ones(3, 1.0);
  Vec val = P->eval(ones);
  for (double v : val) CHECK(v == doctest::Approx(p.f(1.0)));
  auto J = P->jacobian(ones);
  for (int i = 0; i < 3; ++i) {
    CHECK(J(i, i) == doctest::Approx(p.fprime(1.0)));
    for (int j = 0; j < 3; ++j)
      if (i != j) CHECK(J(i, j) == 0.0);
  }

  std::mt19937_64 rng(11);
  for (int k = 0; k < 100; ++k) {
    Vec u = random_vec(3, rng), v = random_vec(3, rng);
    CHECK(identity_defect(*P, u, v) <= 1e-12);
    // G(u,u) = J(u)
    DenseOperator D = P->linearize(u, u);
    D.add_scaled(P->jacobian(u), -1.0);
    CHECK(D.max_abs() <= 1e-14 * p.b);
    // Newton-quotient bounds: diagonal strictly inside (a, b)
    auto G = P->linearize(u, v);
    for (int i = 0; i < 3; ++i) {
      CHECK(G(i, i) > p.a);
      CHECK(G(i, i) < p.b);
    }
  }
}

TEST_CASE("nonlocal: reduction, symmetry, and guards") {
  auto p = make_convex_profile(1.0, 4.0, 2.0);
  auto plain = nemitskii(p, 4);
  auto mixed = nonlocal_map(DenseOperator::identity(4), Vec(4, 1.0), p);

  std::mt19937_64 rng(13);
  for (int k = 0; k < 20; ++k) {
    Vec u = random_vec(4, rng);
    CHECK(norm2(sub(mixed->eval(u), plain->eval(u))) <= 1e-14 * std::max(1.0, norm2(u)));
    DenseOperator D = mixed->jacobian(u);
    D.add_scaled(plain->jacobian(u), -1.0);
    CHECK(D.max_abs() <= 1e-14 * p.b);
  }

  DenseOperator A(3, {0.5, 0.25, 0, 0.25, 0.5, 0.25, 0, 0.25, 0.5});
  Vec g = {1.0, 2.0, 0.5};
  auto P = nonlocal_map(A, g, p);
  for (int k = 0; k < 20; ++k) {
    Vec u = random_vec(3, rng);
    CHECK(P->jacobian(u).symmetry_defect() <= 1e-14 * P->jacobian(u).max_abs());
    Vec v = random_vec(3, rng);
    CHECK(identity_defect(*P, u, v) <= 1e-12);
  }

  DenseOperator zero_row(2, {1, 1, 0, 0});
  CHECK_THROWS_WITH_AS(nonlocal_map(zero_row, Vec(2, 1.0), p),
                       doctest::Contains("NotPositivelyStable"), Error);
  DenseOperator neg(2, {1, -0.1, 0, 1});
  CHECK_THROWS_WITH_AS(nonlocal_map(neg, Vec(2, 1.0), p),
                       doctest::Contains("NotPositivelyStable"), Error);
  CHECK_THROWS_WITH_AS(nonlocal_map(DenseOperator::identity(2), Vec{1.0, 0.0}, p),
                       doctest::Contains("NonPositiveWeight"), Error);
}

TEST_CASE("vertical sine: height function through the grid operator") {
  auto M = ops::build_model_operator([] {
    ops::ProblemSpec s;
    s.kind = ops::OperatorKind::dirichlet_laplacian_1d;
    s.grid_sizes = {3};
    return s;
  }());
  const Vec phi = M.triple.phi;
  auto P = vertical_sine_map(phi, phi, M.triple.primary_value);

  std::mt19937_64 rng(17);
  auto height_of_F = [&](double t, const Vec& w) {
    Vec u = w;
    axpy(u, t, phi);
    Vec F = sub(M.L.apply(u), P->eval(u));
    return dot(phi, F);
  };
  for (int k = 0; k < 10; ++k) {
    // w in the orthogonal complement of phi
    Vec w = random_vec(3, rng);
    axpy(w, -dot(phi, w), phi);
    CHECK(height_of_F(0.0, w) == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(std::abs(height_of_F(M_PI, w)) <= 1e-10);
    CHECK(height_of_F(M_PI / 2.0, w) == doctest::Approx(M_PI / 2.0).epsilon(1e-10));
    const double t = std::uniform_real_distribution<double>(-10.0, 10.0)(rng);
    CHECK(height_of_F(t, w) == doctest::Approx(t * std::sin(t)).epsilon(1e-10));
  }

  for (int k = 0; k < 100; ++k) {
    Vec u = random_vec(3, rng), v = random_vec(3, rng);
    CHECK(identity_defect(*P, u, v) <= 1e-12);
  }

  CHECK_THROWS_WITH_AS(vertical_sine_map(phi, scaled(phi, 2.0), 1.0),
                       doctest::Contains("BadNormalization"), Error);
}

TEST_CASE("vertical sine: scalar preimage counting oracle") {
  // roots of t sin t = c for c in (0, pi/2) are at least 3 on [0, 8pi]
  auto height = [](double t) { return t * std::sin(t); };
  for (double c : {0.3, 0.9, 1.4}) {
    int count = 0;
    const int steps = 20000;
    double prev = height(0.0) - c;
    for (int i = 1; i <= steps; ++i) {
      const double t = 8.0 * M_PI * i / steps;
      const double cur = height(t) - c;
      if ((prev < 0.0 && cur >= 0.0) || (prev > 0.0 && cur <= 0.0)) ++count;
      prev = cur;
    }
    CHECK(count >= 3);
  }
}

TEST_CASE("jacobian matches centered differences at second order") {
  std::mt19937_64 rng(23);
  auto p = make_convex_profile(5.0, 15.0, 1.0);
  DenseOperator A(3, {0.5, 0.25, 0, 0.25, 0.5, 0.25, 0, 0.25, 0.5});
  Vec phi = normalized({1.0, 2.0, 1.0});

  std::vector<MapPtr> maps = {nemitskii(p, 3), nonlocal_map(A, Vec(3, 1.0), p),
                              vertical_sine_map(phi, phi, 9.0)};
  for (const auto& P : maps) {
    for (int k = 0; k < 10; ++k) {
      Vec u = random_vec(3, rng), e = normalized(random_vec(3, rng));
      auto fd_err = [&](double h) {
        Vec up = u, dn = u;
        axpy(up, h, e);
        axpy(dn, -h, e);
        Vec diff = scaled(sub(P->eval(up), P->eval(dn)), 0.5 / h);
        return norm2(sub(diff, P->jacobian(u).apply(e)));
      };
      CHECK(fd_err(1e-3) <= 100.0 * 1e-6);
      CHECK(fd_err(1e-4) <= 100.0 * 1e-8);
    }
  }
}

TEST_CASE("ordered inputs: jacobian difference is positive diagonal for nemitskii") {
  auto p = make_convex_profile(-1.0, 3.0, 1.0);
  auto P = nemitskii(p, 5);
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> gap(0.1, 1.0);
  for (int k = 0; k < 100; ++k) {
    Vec v = random_vec(5, rng);
    Vec u = v;
    for (double& x : u) x -= gap(rng);  // u < v componentwise
    DenseOperator D = P->jacobian(v);
    D.add_scaled(P->jacobian(u), -1.0);
    for (int i = 0; i < 5; ++i) {
      CHECK(D(i, i) > 0.0);
      for (int j = 0; j < 5; ++j)
        if (i != j) CHECK(D(i, j) == 0.0);
    }
  }
}

TEST_CASE("cyclic convexity inequality on ordered triples") {
  auto p = make_convex_profile(2.0, 9.0, 0.7);
  DenseOperator A(3, {0.5, 0.25, 0, 0.25, 0.5, 0.25, 0, 0.25, 0.5});
  std::vector<MapPtr> maps = {nemitskii(p, 3), nonlocal_map(A, Vec{1.0, 0.5, 2.0}, p)};
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> gap(0.1, 1.0);
  for (const auto& P : maps) {
    for (int k = 0; k < 1000; ++k) {
      Vec u = random_vec(3, rng);
      Vec v = u, w;
      for (double& x : v) x += gap(rng);
      w = v;
      for (double& x : w) x += gap(rng);
      const double cyc = dot(sub(v, u), P->eval(w)) + dot(sub(w, v), P->eval(u)) +
                         dot(sub(u, w), P->eval(v));
      CHECK(cyc > 0.0);
    }
  }
}

TEST_CASE("slice slope bounds dominate measured projected linearizations") {
  auto p = make_convex_profile(5.0, 15.0, 1.0);
  auto P = nemitskii(p, 4);
  std::mt19937_64 rng(37);
  for (double center : {0.0, 10.0, 12.5}) {
    const double bound = P->slice_slope_bound(center);
    for (int k = 0; k < 25; ++k) {
      Vec u = random_vec(4, rng), v = random_vec(4, rng);
      DenseOperator G = P->linearize(u, v);
      G.add_scaled_identity(-center);
      CHECK(operator_norm(G) <= bound + 1e-12);
    }
  }
}
