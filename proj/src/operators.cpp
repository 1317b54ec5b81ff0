#include "foldlab/operators.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "foldlab/cones.hpp"
#include "foldlab/errors.hpp"

namespace foldlab::ops {

namespace {

struct KindRow {
  OperatorKind kind;
  const char* name;
};

constexpr KindRow kKinds[] = {
    {OperatorKind::dirichlet_laplacian_1d, "dirichlet_laplacian_1d"},
    {OperatorKind::dirichlet_laplacian_2d, "dirichlet_laplacian_2d"},
    {OperatorKind::neumann_laplacian_1d, "neumann_laplacian_1d"},
    {OperatorKind::periodic_laplacian_1d, "periodic_laplacian_1d"},
    {OperatorKind::harmonic_oscillator, "harmonic_oscillator"},
    {OperatorKind::nondivergence_1d, "nondivergence_1d"},
    {OperatorKind::coupled_system, "coupled_system"},
    {OperatorKind::fractional_power, "fractional_power"},
};

int grid_size(const ProblemSpec& spec, std::size_t slot) {
  if (slot >= spec.grid_sizes.size())
    fail(Err::SpecInvalid, std::string(kind_name(spec.kind)) + " needs " +
                               std::to_string(slot + 1) + " grid size(s)");
  const int n = spec.grid_sizes[slot];
  if (n < 2) fail(Err::SpecInvalid, "grid sizes must be at least 2");
  return n;
}

// extents with per-kind defaults; validated ordered
std::pair<double, double> extent_pair(const ProblemSpec& spec, std::size_t pair_index,
                                      double d0, double d1) {
  double x0 = d0, x1 = d1;
  if (!spec.extents.empty()) {
    if (spec.extents.size() < 2 * (pair_index + 1))
      fail(Err::SpecInvalid, "extents must come in (lo, hi) pairs");
    x0 = spec.extents[2 * pair_index];
    x1 = spec.extents[2 * pair_index + 1];
  }
  if (!(x0 < x1)) fail(Err::SpecInvalid, "extent lower bound must be below upper bound");
  return {x0, x1};
}

Vec param_samples(const ProblemSpec& spec, const std::string& key, int n, double fallback) {
  auto it = spec.parameters.find(key);
  if (it == spec.parameters.end()) return Vec(std::size_t(n), fallback);
  const Vec& v = it->second;
  if (v.size() == 1) return Vec(std::size_t(n), v[0]);
  if (int(v.size()) == n) return v;
  fail(Err::SpecInvalid,
       key + " needs 1 or " + std::to_string(n) + " samples, got " + std::to_string(v.size()));
}

double param_scalar(const ProblemSpec& spec, const std::string& key) {
  auto it = spec.parameters.find(key);
  if (it == spec.parameters.end() || it->second.size() != 1)
    fail(Err::SpecInvalid, std::string(kind_name(spec.kind)) + " needs scalar parameter " + key);
  return it->second[0];
}

DenseOperator laplacian_1d_dirichlet(int n, double x0, double x1) {
  const double h = (x1 - x0) / (n + 1);
  const double s = 1.0 / (h * h);
  DenseOperator L(n);
  for (int i = 0; i < n; ++i) {
    L(i, i) = 2.0 * s;
    if (i > 0) L(i, i - 1) = -s;
    if (i + 1 < n) L(i, i + 1) = -s;
  }
  return L;
}

// Bottom-of-spectrum triple for a symmetric operator. The Jacobi ground
// state is refined through the resolvent below lambda_m: for the Z-matrix
// stencils built here that resolvent is entrywise positive, so the refined
// vector is strictly positive by construction (sums of positive terms), which
// keeps e.g. Gaussian tails from rounding to -0.
SpectralTriple certify_bottom_symmetric(const DenseOperator& L) {
  const auto eig = symmetric_eigendecompose(L);
  const int n = L.dim();
  const double scale =
      std::max({std::abs(eig.eigenvalues.front()), std::abs(eig.eigenvalues.back()), 1.0});
  if (n < 2 || eig.eigenvalues[1] - eig.eigenvalues[0] <= 1e-9 * scale)
    fail(Err::CertificationFailed, "bottom eigenvalue is not simple at this scale");

  Vec phi = eig.eigenvector(0);
  double total = 0.0;
  for (double v : phi) total += v;
  if (total < 0.0) phi = scaled(phi, -1.0);

  const double gap = eig.eigenvalues[1] - eig.eigenvalues[0];
  const double sigma = eig.eigenvalues[0] - gap;
  try {
    DenseOperator shifted = L;
    shifted.add_scaled_identity(-sigma);
    LuSolver lu(shifted);
    Vec x = phi;
    for (double& v : x) v = std::max(v, 0.0);
    if (norm2(x) > 0.0) {
      x = normalized(lu.solve(x));
      x = normalized(lu.solve(x));
      if (min_element(x) > 0.0) phi = x;
    }
  } catch (const Error&) {
    // refinement is best-effort; the strictness check below decides
  }
  if (min_element(phi) <= 0.0)
    fail(Err::CertificationFailed, "ground state is not strictly positive");

  SpectralTriple t;
  t.primary_value = eig.eigenvalues[0];
  t.gap_value = eig.eigenvalues[1];
  t.phi = phi;
  t.phi_star = phi;
  return t;
}

// Bottom of spectrum through the Perron data of sigma I - L, which is
// entrywise nonnegative exactly when the mesh resolves the drift. The
// two-sided Rayleigh quotient keeps the eigenvalue error quadratic in the
// iteration residual despite non-normality.
SpectralTriple certify_bottom_perron(const DenseOperator& L) {
  const int n = L.dim();
  double sigma = 0.0;
  for (int i = 0; i < n; ++i) {
    double row = L(i, i);
    for (int j = 0; j < n; ++j)
      if (j != i) row += std::abs(L(i, j));
    sigma = std::max(sigma, row);
  }
  sigma += 1.0;

  DenseOperator M = L;
  M.scale(-1.0);
  M.add_scaled_identity(sigma);

  PowerResult right, left;
  try {
    right = dominant_eigenpair(M, 1e-12);
    left = dominant_eigenpair(M.transpose(), 1e-12);
  } catch (const Error& e) {
    fail(Err::CertificationFailed,
         std::string("shifted operator is not primitive (oscillatory drift mesh?): ") +
             e.what());
  }
  const double pairing = dot(left.vector, right.vector);
  if (pairing <= 1e-12)
    fail(Err::CertificationFailed, "left/right ground states nearly orthogonal");
  const double rho = dot(left.vector, M.apply(right.vector)) / pairing;

  const auto second = second_eigenvalue(M, rho, right.vector, left.vector, 1e-12);
  if (!second.converged)
    fail(Err::CertificationFailed, "subdominant iteration for the spectral gap stalled");
  if (second.complex_pair || second.value <= 0.0)
    fail(Err::CertificationFailed, "spectrum is not real-positive after the shift");
  if (min_element(right.vector) <= 0.0 || min_element(left.vector) <= 0.0)
    fail(Err::CertificationFailed, "ground state is not strictly positive");

  SpectralTriple t;
  t.primary_value = sigma - rho;
  t.gap_value = sigma - second.value;
  t.phi = right.vector;
  t.phi_star = scaled(left.vector, 1.0 / pairing);
  return t;
}

SpectralTriple certify_bottom(const DenseOperator& L, bool self_adjoint) {
  return self_adjoint ? certify_bottom_symmetric(L) : certify_bottom_perron(L);
}

}  // namespace

const char* kind_name(OperatorKind k) {
  for (const auto& row : kKinds)
    if (row.kind == k) return row.name;
  return "unknown";
}

OperatorKind kind_from_name(const std::string& name) {
  for (const auto& row : kKinds)
    if (name == row.name) return row.kind;
  fail(Err::Validation, "unknown operator kind '" + name + "'");
}

DenseOperator matrix_power(const DenseOperator& A, double s) {
  if (!(s > 0.0)) fail(Err::SpecInvalid, "matrix power exponent must be positive");
  const auto eig = symmetric_eigendecompose(A);
  const double scale = std::max(std::abs(eig.eigenvalues.back()), 1.0);
  if (eig.eigenvalues.front() < -1e-12 * scale)
    fail(Err::SpecInvalid, "negative spectrum has no real fractional power");
  Vec powered(eig.eigenvalues.size());
  for (std::size_t k = 0; k < powered.size(); ++k)
    powered[k] = std::pow(std::max(eig.eigenvalues[k], 0.0), s);
  DenseOperator R = eig.eigenvectors.multiply(DenseOperator::diagonal(powered))
                        .multiply(eig.eigenvectors.transpose());
  for (int i = 0; i < R.dim(); ++i)
    for (int j = i + 1; j < R.dim(); ++j) {
      const double v = 0.5 * (R(i, j) + R(j, i));
      R(i, j) = v;
      R(j, i) = v;
    }
  return R;
}

ModelOperator build_model_operator(const ProblemSpec& spec) {
  ModelOperator out;
  out.spec = spec;
  out.self_adjoint = true;

  switch (spec.kind) {
    case OperatorKind::dirichlet_laplacian_1d: {
      const int n = grid_size(spec, 0);
      const auto [x0, x1] = extent_pair(spec, 0, 0.0, 1.0);
      out.L = laplacian_1d_dirichlet(n, x0, x1);
      break;
    }
    case OperatorKind::dirichlet_laplacian_2d: {
      const int nx = grid_size(spec, 0);
      const int ny = grid_size(spec, 1);
      const auto [x0, x1] = extent_pair(spec, 0, 0.0, 1.0);
      const auto [y0, y1] = extent_pair(spec, 1, 0.0, 1.0);
      const double sx = 1.0 / std::pow((x1 - x0) / (nx + 1), 2);
      const double sy = 1.0 / std::pow((y1 - y0) / (ny + 1), 2);
      DenseOperator L(nx * ny);
      for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
          const int k = i + nx * j;
          L(k, k) = 2.0 * sx + 2.0 * sy;
          if (i > 0) L(k, k - 1) = -sx;
          if (i + 1 < nx) L(k, k + 1) = -sx;
          if (j > 0) L(k, k - nx) = -sy;
          if (j + 1 < ny) L(k, k + nx) = -sy;
        }
      out.L = std::move(L);
      break;
    }
    case OperatorKind::neumann_laplacian_1d: {
      // cell-centered discretization keeps the matrix symmetric with the
      // constant vector exactly in the kernel
      const int n = grid_size(spec, 0);
      const auto [x0, x1] = extent_pair(spec, 0, 0.0, 1.0);
      const double s = std::pow(double(n) / (x1 - x0), 2);
      DenseOperator L(n);
      for (int i = 0; i < n; ++i) {
        L(i, i) = (i == 0 || i == n - 1) ? s : 2.0 * s;
        if (i > 0) L(i, i - 1) = -s;
        if (i + 1 < n) L(i, i + 1) = -s;
      }
      out.L = std::move(L);
      break;
    }
    case OperatorKind::periodic_laplacian_1d: {
      const int n = grid_size(spec, 0);
      const auto [x0, x1] = extent_pair(spec, 0, 0.0, 1.0);
      const double s = std::pow(double(n) / (x1 - x0), 2);
      DenseOperator L(n);
      for (int i = 0; i < n; ++i) {
        L(i, i) = 2.0 * s;
        L(i, (i + 1) % n) += -s;
        L(i, (i + n - 1) % n) += -s;
      }
      out.L = std::move(L);
      break;
    }
    case OperatorKind::harmonic_oscillator: {
      const int n = grid_size(spec, 0);
      const auto [x0, x1] = extent_pair(spec, 0, -8.0, 8.0);
      const double h = (x1 - x0) / (n + 1);
      const double s = 1.0 / (h * h);
      DenseOperator L(n);
      for (int i = 0; i < n; ++i) {
        const double x = x0 + (i + 1) * h;
        L(i, i) = 2.0 * s + x * x;
        if (i > 0) L(i, i - 1) = -s;
        if (i + 1 < n) L(i, i + 1) = -s;
      }
      out.L = std::move(L);
      break;
    }
    case OperatorKind::nondivergence_1d: {
      const int n = grid_size(spec, 0);
      const auto [x0, x1] = extent_pair(spec, 0, 0.0, 1.0);
      const double h = (x1 - x0) / (n + 1);
      const Vec a = param_samples(spec, "diffusion", n, 1.0);
      const Vec drift = param_samples(spec, "drift", n, 0.0);
      const Vec q = param_samples(spec, "potential", n, 0.0);
      if (min_element(a) <= 0.0) fail(Err::SpecInvalid, "diffusion must be strictly positive");
      DenseOperator L(n);
      for (int i = 0; i < n; ++i) {
        L(i, i) = 2.0 * a[i] / (h * h) - q[i];
        if (i > 0) L(i, i - 1) = -a[i] / (h * h) + drift[i] / (2.0 * h);
        if (i + 1 < n) L(i, i + 1) = -a[i] / (h * h) - drift[i] / (2.0 * h);
      }
      out.L = std::move(L);
      out.self_adjoint = false;
      break;
    }
    case OperatorKind::coupled_system: {
      if (!spec.base) fail(Err::SpecInvalid, "coupled_system needs a base spec");
      const ModelOperator base = build_model_operator(*spec.base);
      const double alpha = param_scalar(spec, "alpha");
      if (!(alpha > -base.triple.primary_value && alpha < base.triple.gap_value))
        fail(Err::SpecInvalid, "alpha must lie in (-lambda_m, mu_m) of the base operator");
      const int n = base.L.dim();
      DenseOperator L(2 * n);
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          L(i, j) = base.L(i, j);
          L(n + i, n + j) = base.L(i, j);
        }
        L(i, n + i) = -alpha;
        L(n + i, i) = -alpha;
      }
      out.L = std::move(L);
      out.self_adjoint = base.self_adjoint;
      break;
    }
    case OperatorKind::fractional_power: {
      if (!spec.base) fail(Err::SpecInvalid, "fractional_power needs a base spec");
      const ModelOperator base = build_model_operator(*spec.base);
      if (!base.self_adjoint)
        fail(Err::SpecInvalid, "fractional powers are defined for self-adjoint bases only");
      const double s = param_scalar(spec, "s");
      if (!(s > 0.0 && s < 1.0)) fail(Err::SpecInvalid, "exponent s must lie in (0, 1)");
      out.L = matrix_power(base.L, s);
      break;
    }
  }

  out.triple = certify_bottom(out.L, out.self_adjoint);
  return out;
}

MSpecialReport verify_m_special(const ModelOperator& M, const std::vector<double>& mu_samples,
                                double tol) {
  MSpecialReport report;
  report.gap = M.triple.gap_value - M.triple.primary_value;
  report.simple_bottom = report.gap > tol;

  for (double mu : mu_samples) {
    ResolventSample s;
    s.mu = mu;
    s.in_range = mu < M.triple.primary_value - tol;
    if (!s.in_range) {
      report.mu_in_range = false;
      report.samples.push_back(s);
      continue;
    }
    DenseOperator shifted = M.L;
    shifted.add_scaled_identity(-mu);
    const DenseOperator R = invert(shifted);
    s.entry = R(0, 0);
    s.row = s.col = 0;
    for (int i = 0; i < R.dim(); ++i)
      for (int j = 0; j < R.dim(); ++j)
        if (R(i, j) < s.entry) {
          s.entry = R(i, j);
          s.row = i;
          s.col = j;
        }
    s.positive = s.entry > 0.0;
    if (!s.positive) report.resolvent_positive = false;
    report.samples.push_back(s);
  }
  return report;
}

RFormProblem to_r_form(const ModelOperator& M, double gamma) {
  if (!(gamma > 0.0)) fail(Err::InvalidArgument, "gamma must be positive");
  DenseOperator shifted = M.L;
  shifted.add_scaled_identity(-M.triple.primary_value);
  DenseOperator T = cayley_transform(shifted, gamma);

  cones::BasicEigenvalueCertificate cert;
  try {
    cert = cones::certify_basic_eigenvalue(T);
  } catch (const Error& e) {
    fail(Err::CertificationFailed, std::string("conformal image not certifiable: ") + e.what());
  }
  if (std::abs(cert.triple.primary_value - 1.0) > 1e-8)
    fail(Err::CertificationFailed,
         "spectral radius of the conformal image strays from 1 by " +
             std::to_string(cert.triple.primary_value - 1.0));

  RFormProblem out;
  out.T = std::move(T);
  out.triple = cert.triple;
  out.shift = M.triple.primary_value;
  out.gamma = gamma;
  return out;
}

}  // namespace foldlab::ops
