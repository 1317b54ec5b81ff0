#include "foldlab/nonlinear.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "foldlab/errors.hpp"
#include "foldlab/spectral.hpp"

namespace foldlab::nonlinear {

double ConvexProfile::f(double t) const {
  return 0.5 * (a + b) * t + 0.5 * (b - a) * (std::hypot(t, kappa) - kappa);
}

double ConvexProfile::fprime(double t) const {
  return 0.5 * (a + b) + 0.5 * (b - a) * t / std::hypot(t, kappa);
}

double ConvexProfile::q(double r, double s) const {
  return 0.5 * (a + b) + 0.5 * (b - a) * (r + s) / (std::hypot(r, kappa) + std::hypot(s, kappa));
}

ConvexProfile make_convex_profile(double a, double b, double kappa) {
  if (!(a < b)) fail(Err::BadSlopes, "need a < b, got a = " + std::to_string(a) +
                                         ", b = " + std::to_string(b));
  if (!(kappa > 0.0)) fail(Err::InvalidArgument, "curvature scale kappa must be positive");
  return ConvexProfile{a, b, kappa};
}

const char* map_kind_name(MapKind k) {
  switch (k) {
    case MapKind::zero: return "zero";
    case MapKind::nemitskii: return "nemitskii";
    case MapKind::nonlocal: return "nonlocal";
    case MapKind::vertical_sine: return "vertical_sine";
  }
  return "unknown";
}

double NonlinearMap::slice_slope_bound(double center) const {
  const auto [lo, hi] = linearization_range();
  return std::max(std::abs(lo - center), std::abs(hi - center));
}

namespace {

void check_dim(const NonlinearMap& map, const Vec& u) {
  if (int(u.size()) != map.dim())
    fail(Err::InvalidArgument, "vector dimension " + std::to_string(u.size()) +
                                   " does not match map dimension " +
                                   std::to_string(map.dim()));
}

class NemitskiiMap final : public NonlinearMap {
 public:
  NemitskiiMap(const ConvexProfile& profile, int dim) : profile_(profile), dim_(dim) {
    if (dim < 1) fail(Err::InvalidArgument, "map dimension must be at least 1");
  }

  MapKind kind() const override { return MapKind::nemitskii; }
  int dim() const override { return dim_; }

  Vec eval(const Vec& u) const override {
    check_dim(*this, u);
    Vec out(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) out[i] = profile_.f(u[i]);
    return out;
  }

  DenseOperator jacobian(const Vec& u) const override {
    check_dim(*this, u);
    Vec d(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) d[i] = profile_.fprime(u[i]);
    return DenseOperator::diagonal(d);
  }

  DenseOperator linearize(const Vec& u, const Vec& v) const override {
    check_dim(*this, u);
    check_dim(*this, v);
    Vec d(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) d[i] = profile_.q(u[i], v[i]);
    return DenseOperator::diagonal(d);
  }

  std::pair<double, double> linearization_range() const override {
    return {profile_.a, profile_.b};
  }

  const ConvexProfile* profile() const override { return &profile_; }

 private:
  ConvexProfile profile_;
  int dim_;
};

class NonlocalMap final : public NonlinearMap {
 public:
  NonlocalMap(const DenseOperator& A, const Vec& g, const ConvexProfile& profile)
      : A_(A), At_(A.transpose()), g_(g), profile_(profile) {
    const int n = A.dim();
    if (int(g.size()) != n)
      fail(Err::InvalidArgument, "weight vector must match the operator dimension");
    if (A.min_entry() < 0.0)
      fail(Err::NotPositivelyStable, "mixing operator has a negative entry");
    for (int i = 0; i < n; ++i) {
      bool has = false;
      for (int j = 0; j < n; ++j)
        if (A(i, j) > 0.0) { has = true; break; }
      if (!has) fail(Err::NotPositivelyStable, "mixing operator row " + std::to_string(i) +
                                                   " is identically zero");
    }
    if (min_element(g) <= 0.0) fail(Err::NonPositiveWeight, "weights must be strictly positive");

    DenseOperator gram = At_.multiply(A_);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        const double v = 0.5 * (gram(i, j) + gram(j, i));
        gram(i, j) = v;
        gram(j, i) = v;
      }
    const auto eig = symmetric_eigendecompose(gram);
    s_min_ = std::max(eig.eigenvalues.front(), 0.0);
    s_max_ = std::max(eig.eigenvalues.back(), 0.0);
  }

  MapKind kind() const override { return MapKind::nonlocal; }
  int dim() const override { return A_.dim(); }

  Vec eval(const Vec& u) const override {
    check_dim(*this, u);
    Vec inner = A_.apply(u);
    for (std::size_t i = 0; i < inner.size(); ++i) inner[i] = g_[i] * profile_.f(inner[i]);
    return At_.apply(inner);
  }

  DenseOperator jacobian(const Vec& u) const override { return linearize(u, u); }

  DenseOperator linearize(const Vec& u, const Vec& v) const override {
    check_dim(*this, u);
    check_dim(*this, v);
    const Vec au = A_.apply(u), av = A_.apply(v);
    const int n = A_.dim();
    // A^T diag(g q) A without forming the diagonal matrix
    DenseOperator out(n);
    for (int k = 0; k < n; ++k) {
      const double d = g_[k] * profile_.q(au[k], av[k]);
      for (int i = 0; i < n; ++i) {
        const double aki = A_(k, i) * d;
        if (aki == 0.0) continue;
        for (int j = 0; j < n; ++j) out(i, j) += aki * A_(k, j);
      }
    }
    return out;
  }

  std::pair<double, double> linearization_range() const override {
    const double gmin = min_element(g_), gmax = max_element(g_);
    const double alpha = profile_.a >= 0.0 ? profile_.a * gmin : profile_.a * gmax;
    const double beta = profile_.b >= 0.0 ? profile_.b * gmax : profile_.b * gmin;
    const double lo = std::min(alpha * s_min_, alpha * s_max_);
    const double hi = std::max(beta * s_min_, beta * s_max_);
    return {lo, hi};
  }

  const ConvexProfile* profile() const override { return &profile_; }

 private:
  DenseOperator A_, At_;
  Vec g_;
  ConvexProfile profile_;
  double s_min_ = 0.0, s_max_ = 0.0;
};

class VerticalSineMap final : public NonlinearMap {
 public:
  VerticalSineMap(const Vec& phi, const Vec& phi_star, double lambda_m)
      : phi_(phi), phi_star_(phi_star), lambda_m_(lambda_m) {
    if (phi.size() != phi_star.size() || phi.empty())
      fail(Err::InvalidArgument, "phi and phi* must share a nonzero dimension");
    const double pairing = dot(phi_star_, phi_);
    if (std::abs(pairing - 1.0) > 1e-10)
      fail(Err::BadNormalization,
           "<phi*, phi> = " + std::to_string(pairing) + ", expected 1");
  }

  MapKind kind() const override { return MapKind::vertical_sine; }
  int dim() const override { return int(phi_.size()); }

  Vec eval(const Vec& u) const override {
    check_dim(*this, u);
    const double t = dot(phi_star_, u);
    Vec out = scaled(u, lambda_m_);
    axpy(out, -t * std::sin(t), phi_);
    return out;
  }

  DenseOperator jacobian(const Vec& u) const override {
    check_dim(*this, u);
    const double t = dot(phi_star_, u);
    return rank_one(std::sin(t) + t * std::cos(t));
  }

  DenseOperator linearize(const Vec& u, const Vec& v) const override {
    check_dim(*this, u);
    check_dim(*this, v);
    return rank_one(height_quotient(dot(phi_star_, u), dot(phi_star_, v)));
  }

  std::pair<double, double> linearization_range() const override {
    const double inf = std::numeric_limits<double>::infinity();
    return {-inf, inf};  // d/dt (t sin t) is unbounded
  }

  // Pi phi = 0 for the splitting this map is built against, so the rank-one
  // term vanishes under the projection and only the lambda_m shift survives.
  double slice_slope_bound(double center) const override {
    return std::abs(lambda_m_ - center);
  }

 private:
  DenseOperator rank_one(double coeff) const {
    DenseOperator G = DenseOperator::outer(phi_, phi_star_);
    G.scale(-coeff);
    G.add_scaled_identity(lambda_m_);
    return G;
  }

  // Newton quotient of t sin t; midpoint derivative below the cancellation
  // threshold.
  static double height_quotient(double r, double s) {
    const double scale = std::max({1.0, std::abs(r), std::abs(s)});
    if (std::abs(r - s) <= 1e-5 * scale) {
      const double m = 0.5 * (r + s);
      return std::sin(m) + m * std::cos(m);
    }
    return (r * std::sin(r) - s * std::sin(s)) / (r - s);
  }

  Vec phi_, phi_star_;
  double lambda_m_;
};

class ZeroMap final : public NonlinearMap {
 public:
  explicit ZeroMap(int dim) : dim_(dim) {
    if (dim < 1) fail(Err::InvalidArgument, "map dimension must be at least 1");
  }

  MapKind kind() const override { return MapKind::zero; }
  int dim() const override { return dim_; }

  Vec eval(const Vec& u) const override {
    check_dim(*this, u);
    return Vec(u.size(), 0.0);
  }

  DenseOperator jacobian(const Vec& u) const override {
    check_dim(*this, u);
    return DenseOperator(dim_);
  }

  DenseOperator linearize(const Vec& u, const Vec& v) const override {
    check_dim(*this, u);
    check_dim(*this, v);
    return DenseOperator(dim_);
  }

  std::pair<double, double> linearization_range() const override { return {0.0, 0.0}; }

 private:
  int dim_;
};

}  // namespace

MapPtr zero_map(int dim) { return std::make_shared<ZeroMap>(dim); }

MapPtr nemitskii(const ConvexProfile& profile, int dim) {
  return std::make_shared<NemitskiiMap>(profile, dim);
}

MapPtr nonlocal_map(const DenseOperator& A, const Vec& g, const ConvexProfile& profile) {
  return std::make_shared<NonlocalMap>(A, g, profile);
}

MapPtr vertical_sine_map(const Vec& phi, const Vec& phi_star, double lambda_m) {
  return std::make_shared<VerticalSineMap>(phi, phi_star, lambda_m);
}

DenseOperator linearize(const NonlinearMap& P, const Vec& u, const Vec& v) {
  return P.linearize(u, v);
}

}  // namespace foldlab::nonlinear
