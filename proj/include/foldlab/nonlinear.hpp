#pragma once

#include <memory>
#include <utility>

#include "foldlab/dense.hpp"

namespace foldlab::nonlinear {

// Smooth hyperbola ramp between asymptotic slopes a (at -inf) and b (at +inf):
// f(t) = ((a+b)/2) t + ((b-a)/2) (sqrt(t^2 + kappa^2) - kappa), f(0) = 0.
// f' is strictly increasing with open range (a, b); the Newton quotient has
// the cancellation-free closed form
//   q(r,s) = (a+b)/2 + ((b-a)/2) (r+s) / (sqrt(r^2+k^2) + sqrt(s^2+k^2)),
// which extends continuously to q(r,r) = f'(r).
struct ConvexProfile {
  double a = 0.0;
  double b = 1.0;
  double kappa = 1.0;

  double f(double t) const;
  double fprime(double t) const;
  double q(double r, double s) const;
};

// Throws BadSlopes when a >= b, InvalidArgument when kappa <= 0.
ConvexProfile make_convex_profile(double a, double b, double kappa);

enum class MapKind { zero, nemitskii, nonlocal, vertical_sine };
const char* map_kind_name(MapKind k);

// Nonlinear map with a closed-form two-point linearization:
// P(u) - P(v) = G(u,v)(u - v) exactly, and G(u,u) = J(u).
class NonlinearMap {
 public:
  virtual ~NonlinearMap() = default;

  virtual MapKind kind() const = 0;
  virtual int dim() const = 0;
  virtual Vec eval(const Vec& u) const = 0;
  virtual DenseOperator jacobian(const Vec& u) const = 0;
  virtual DenseOperator linearize(const Vec& u, const Vec& v) const = 0;

  // Closed interval containing the spectrum of every G(u,v); kinds without a
  // uniform bound return infinities.
  virtual std::pair<double, double> linearization_range() const = 0;

  // Upper bound on ||Pi (G(u,v) - center I)|| over all u, v, where Pi is the
  // orthogonal projection along the phi the map was built against (the
  // identity for kinds with no distinguished phi). Feeds the slice
  // contraction constant.
  virtual double slice_slope_bound(double center) const;

  // The scalar profile for profile-driven kinds, nullptr otherwise.
  virtual const ConvexProfile* profile() const { return nullptr; }
};

using MapPtr = std::shared_ptr<const NonlinearMap>;

// P = 0: the linear problem F = Lu (or u) falls out of the same pipeline.
MapPtr zero_map(int dim);

// Componentwise u_i -> f(u_i). J and G diagonal.
MapPtr nemitskii(const ConvexProfile& profile, int dim);

// u -> A^T (g ⊙ f(Au)). Throws NotPositivelyStable (A negative entry or zero
// row), NonPositiveWeight (g_i <= 0). J(u) = A^T diag(g ⊙ f'(Au)) A symmetric.
MapPtr nonlocal_map(const DenseOperator& A, const Vec& g, const ConvexProfile& profile);

// P(u) = lambda_m u - t sin(t) phi with t = <phi*, u>, so F = Lu - P(u) has
// height t sin t over any L with L phi = lambda_m phi, lambda_m simple.
// Throws BadNormalization unless <phi*, phi> = 1.
MapPtr vertical_sine_map(const Vec& phi, const Vec& phi_star, double lambda_m);

DenseOperator linearize(const NonlinearMap& P, const Vec& u, const Vec& v);

}  // namespace foldlab::nonlinear
