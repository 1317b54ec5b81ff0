#include "foldlab/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>

#include "foldlab/errors.hpp"

namespace foldlab {

namespace {

// Deterministic start vector for deflated iterations: all-ones is structurally
// orthogonal to the second eigenvector on symmetric grids, so perturb it with a
// fixed pseudo-random sequence instead.
std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

Vec seeded_start(int dim) {
  std::uint64_t state = 0x5DEECE66Dull;
  Vec v(dim);
  for (int i = 0; i < dim; ++i) {
    double u = double(splitmix64(state) >> 11) * 0x1.0p-53;  // [0,1)
    v[i] = 0.5 + u;
  }
  return normalized(v);
}

double max_column_norm(const DenseOperator& A) {
  const int n = A.dim();
  double best = 0.0;
  for (int j = 0; j < n; ++j) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += A(i, j) * A(i, j);
    best = std::max(best, s);
  }
  return std::sqrt(best);
}

// Shared power-iteration core; never throws on stagnation.
PowerResult power_core(const DenseOperator& A, Vec v, double tol, int max_iter) {
  const double scale = std::max(max_column_norm(A), 1e-300);
  v = normalized(v);
  PowerResult out;
  for (int it = 1; it <= max_iter; ++it) {
    Vec w = A.apply(v);
    const double rho = dot(v, w);
    Vec resid = w;
    axpy(resid, -rho, v);
    const double res = norm2(resid);
    out.value = rho;
    out.residual = res;
    out.iterations = it;
    if (res <= tol * scale) {
      out.vector = std::move(v);
      return out;
    }
    const double wn = norm2(w);
    if (wn == 0.0) {  // nilpotent direction collapsed; eigenvalue 0 exactly
      out.value = 0.0;
      out.residual = 0.0;
      out.vector = std::move(v);
      return out;
    }
    v = scaled(w, 1.0 / wn);
  }
  out.vector = std::move(v);
  return out;
}

}  // namespace

Vec EigenDecomposition::eigenvector(int k) const {
  Vec v(eigenvectors.dim());
  for (int i = 0; i < eigenvectors.dim(); ++i) v[i] = eigenvectors(i, k);
  return v;
}

EigenDecomposition symmetric_eigendecompose(const DenseOperator& A, double tol) {
  const int n = A.dim();
  if (!A.is_symmetric())
    fail(Err::NonSymmetricInput, "symmetry defect " + std::to_string(A.symmetry_defect()));

  DenseOperator M = A;
  DenseOperator V = DenseOperator::identity(n);
  const double fro = std::max(M.frobenius_norm(), 1e-300);

  auto off_norm = [&]() {
    double s = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) s += M(i, j) * M(i, j);
    return std::sqrt(2.0 * s);
  };

  const int max_sweeps = 64;
  int sweep = 0;
  while (off_norm() > tol * fro) {
    if (++sweep > max_sweeps) fail(Err::NoConvergence, "Jacobi sweep limit exceeded");
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = M(p, q);
        if (std::abs(apq) <= 1e-300) continue;
        const double theta = (M(q, q) - M(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double mkp = M(k, p), mkq = M(k, q);
          M(k, p) = c * mkp - s * mkq;
          M(k, q) = s * mkp + c * mkq;
        }
        for (int k = 0; k < n; ++k) {
          const double mpk = M(p, k), mqk = M(q, k);
          M(p, k) = c * mpk - s * mqk;
          M(q, k) = s * mpk + c * mqk;
        }
        for (int k = 0; k < n; ++k) {
          const double vkp = V(k, p), vkq = V(k, q);
          V(k, p) = c * vkp - s * vkq;
          V(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int i, int j) { return M(i, i) < M(j, j); });

  EigenDecomposition out;
  out.eigenvalues.resize(n);
  out.eigenvectors = DenseOperator(n);
  for (int k = 0; k < n; ++k) {
    const int src = order[k];
    out.eigenvalues[k] = M(src, src);
    // deterministic sign: largest-magnitude component positive
    int arg = 0;
    for (int i = 1; i < n; ++i)
      if (std::abs(V(i, src)) > std::abs(V(arg, src))) arg = i;
    const double sign = V(arg, src) >= 0.0 ? 1.0 : -1.0;
    for (int i = 0; i < n; ++i) out.eigenvectors(i, k) = sign * V(i, src);
  }
  return out;
}

PowerResult dominant_eigenpair(const DenseOperator& A, double tol, int max_iter) {
  const double pos_tol = 1e-12 * std::max(A.max_abs(), 1e-300);
  if (!primitive_exponent(A, pos_tol).has_value())
    fail(Err::NotPrimitive, "matrix is not an entrywise-nonnegative primitive matrix");
  PowerResult r = power_core(A, Vec(A.dim(), 1.0), tol, max_iter);
  const double scale = std::max(max_column_norm(A), 1e-300);
  if (r.residual > tol * scale)
    fail(Err::NoConvergence,
         "power iteration residual " + std::to_string(r.residual) + " after " +
             std::to_string(r.iterations) + " iterations");
  // Perron vector of a primitive matrix is strictly positive; enforce sign.
  if (r.vector[0] < 0.0) r.vector = scaled(r.vector, -1.0);
  return r;
}

PowerResult power_iterate(const DenseOperator& A, const Vec& start, double tol, int max_iter) {
  return power_core(A, start, tol, max_iter);
}

DeflatedSecond second_eigenvalue(const DenseOperator& A, double rho, const Vec& phi,
                                 const Vec& phi_star, double tol, int max_iter) {
  const double pairing = dot(phi_star, phi);
  if (std::abs(pairing) <= 1e-300) fail(Err::DegenerateWitness, "<phi*, phi> vanishes");
  DenseOperator B = A;
  B.add_scaled(DenseOperator::outer(phi, phi_star), -rho / pairing);
  const double scale = std::max(max_column_norm(B), 1e-300);

  PowerResult r = power_core(B, seeded_start(A.dim()), tol, max_iter);
  DeflatedSecond out;
  out.value = r.value;
  out.modulus = std::abs(r.value);
  out.vector = r.vector;
  out.converged = r.residual <= tol * scale;
  if (out.converged) return out;

  // Rayleigh stagnation: the two leading eigenvalues of B are a conjugate
  // pair or a +/- real pair. Both satisfy a real quadratic x^2 = a x + b,
  // so fit B^2 v = a Bv + b v on the power iterate and read the moduli off
  // the quadratic. Each pass advances the iterate two power steps.
  Vec v = std::move(r.vector);
  for (int it = 0; it < max_iter; ++it) {
    Vec w1 = B.apply(v);
    Vec w2 = B.apply(w1);
    const double g11 = dot(w1, w1), g01 = dot(v, w1), g00 = dot(v, v);
    const double det = g11 * g00 - g01 * g01;
    if (det <= 1e-28 * std::max(g11 * g00, 1e-300)) break;  // iterate collapsed to a line
    const double r1 = dot(w1, w2), r0 = dot(v, w2);
    const double a = (g00 * r1 - g01 * r0) / det;
    const double b = (g11 * r0 - g01 * r1) / det;
    Vec resid = w2;
    axpy(resid, -a, w1);
    axpy(resid, -b, v);
    if (norm2(resid) <= tol * scale * std::max(norm2(w1), 1e-300)) {
      const double disc = a * a + 4.0 * b;
      if (disc >= 0.0) {
        const double sq = std::sqrt(disc);
        const double x1 = 0.5 * (a + sq), x2 = 0.5 * (a - sq);
        out.value = std::abs(x1) >= std::abs(x2) ? x1 : x2;
        out.modulus = std::abs(out.value);
        out.complex_pair = false;
      } else {
        out.value = 0.5 * a;             // real part
        out.modulus = std::sqrt(-b);     // |pair|^2 = -b
        out.complex_pair = true;
      }
      out.vector = normalized(w2);
      out.converged = true;
      return out;
    }
    const double wn = norm2(w2);
    if (wn == 0.0) break;
    v = scaled(w2, 1.0 / wn);
  }
  return out;
}

LuSolver::LuSolver(const DenseOperator& A)
    : dim_(A.dim()), lu_(A.data()), perm_(A.dim()) {
  const int n = dim_;
  std::iota(perm_.begin(), perm_.end(), 0);
  const double threshold = 1e-14 * std::max(A.frobenius_norm(), 1e-300);
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    for (int i = col + 1; i < n; ++i)
      if (std::abs(lu_[std::size_t(i) * n + col]) > std::abs(lu_[std::size_t(pivot) * n + col]))
        pivot = i;
    if (std::abs(lu_[std::size_t(pivot) * n + col]) < threshold)
      fail(Err::SingularMatrix, "pivot below 1e-14 * scale at column " + std::to_string(col));
    if (pivot != col) {
      for (int j = 0; j < n; ++j)
        std::swap(lu_[std::size_t(pivot) * n + j], lu_[std::size_t(col) * n + j]);
      std::swap(perm_[pivot], perm_[col]);
    }
    const double d = lu_[std::size_t(col) * n + col];
    for (int i = col + 1; i < n; ++i) {
      double& m = lu_[std::size_t(i) * n + col];
      m /= d;
      if (m == 0.0) continue;
      for (int j = col + 1; j < n; ++j)
        lu_[std::size_t(i) * n + j] -= m * lu_[std::size_t(col) * n + j];
    }
  }
}

Vec LuSolver::solve(const Vec& rhs) const {
  const int n = dim_;
  if (int(rhs.size()) != n) fail(Err::InvalidArgument, "rhs dimension mismatch");
  Vec x(n);
  for (int i = 0; i < n; ++i) x[i] = rhs[perm_[i]];
  for (int i = 1; i < n; ++i) {
    double s = x[i];
    for (int j = 0; j < i; ++j) s -= lu_[std::size_t(i) * n + j] * x[j];
    x[i] = s;
  }
  for (int i = n - 1; i >= 0; --i) {
    double s = x[i];
    for (int j = i + 1; j < n; ++j) s -= lu_[std::size_t(i) * n + j] * x[j];
    x[i] = s / lu_[std::size_t(i) * n + i];
  }
  return x;
}

Vec linear_solve(const DenseOperator& A, const Vec& rhs) { return LuSolver(A).solve(rhs); }

DenseOperator invert(const DenseOperator& A) {
  const int n = A.dim();
  LuSolver lu(A);
  DenseOperator R(n);
  Vec e(n, 0.0);
  for (int j = 0; j < n; ++j) {
    e[j] = 1.0;
    Vec col = lu.solve(e);
    e[j] = 0.0;
    for (int i = 0; i < n; ++i) R(i, j) = col[i];
  }
  return R;
}

DenseOperator cayley_transform(const DenseOperator& L, double gamma) {
  DenseOperator shifted = L;
  shifted.add_scaled_identity(gamma);
  try {
    DenseOperator T = invert(shifted);
    T.scale(gamma);
    return T;
  } catch (const Error& e) {
    if (e.code() == Err::SingularMatrix)
      fail(Err::SingularShift, "L + gamma I is numerically singular");
    throw;
  }
}

double operator_norm(const DenseOperator& A) {
  DenseOperator gram = A.transpose().multiply(A);
  // force exact symmetry against roundoff before the Jacobi pass
  for (int i = 0; i < gram.dim(); ++i)
    for (int j = i + 1; j < gram.dim(); ++j) {
      const double v = 0.5 * (gram(i, j) + gram(j, i));
      gram(i, j) = v;
      gram(j, i) = v;
    }
  EigenDecomposition eig = symmetric_eigendecompose(gram);
  return std::sqrt(std::max(eig.eigenvalues.back(), 0.0));
}

std::optional<int> primitive_exponent(const DenseOperator& A, double pos_tol) {
  const int n = A.dim();
  using Pattern = std::vector<std::uint8_t>;
  Pattern base(std::size_t(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double v = A(i, j);
      if (v < -pos_tol) return std::nullopt;  // not cone preserving
      base[std::size_t(i) * n + j] = v > pos_tol ? 1 : 0;
    }

  auto all_positive = [n](const Pattern& p) {
    for (std::uint8_t v : p)
      if (!v) return false;
    return true;
  };
  auto bool_multiply = [n](const Pattern& x, const Pattern& y) {
    Pattern r(std::size_t(n) * n, 0);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k) {
        if (!x[std::size_t(i) * n + k]) continue;
        const std::uint8_t* yrow = y.data() + std::size_t(k) * n;
        std::uint8_t* rrow = r.data() + std::size_t(i) * n;
        for (int j = 0; j < n; ++j) rrow[j] |= yrow[j];
      }
    return r;
  };

  const long long cap = (long long)n * n;  // Wielandt: index <= (n-1)^2 + 1 <= n^2
  if (all_positive(base)) return 1;

  // Repeated squaring until positive, then binary search on the exponent
  // (positivity of powers is monotone once it occurs).
  std::vector<Pattern> pow2{base};  // pow2[i] = pattern of A^(2^i)
  std::vector<long long> exps{1};
  while (exps.back() < cap) {
    Pattern next = bool_multiply(pow2.back(), pow2.back());
    pow2.push_back(next);
    exps.push_back(exps.back() * 2);
    if (all_positive(next)) break;
  }
  if (!all_positive(pow2.back())) return std::nullopt;

  auto pattern_of = [&](long long k) {
    Pattern acc;
    bool has = false;
    for (std::size_t bit = 0; bit < pow2.size(); ++bit)
      if (k & (1ll << bit)) {
        acc = has ? bool_multiply(acc, pow2[bit]) : pow2[bit];
        has = true;
      }
    return acc;
  };

  long long lo = exps[exps.size() - 2];  // known not all-positive
  long long hi = exps.back();            // known all-positive
  while (hi - lo > 1) {
    const long long mid = lo + (hi - lo) / 2;
    if (all_positive(pattern_of(mid)))
      hi = mid;
    else
      lo = mid;
  }
  if (hi > cap) return std::nullopt;
  return int(hi);
}

double triple_right_residual(const DenseOperator& S, const SpectralTriple& t) {
  Vec r = S.apply(t.phi);
  axpy(r, -t.primary_value, t.phi);
  return norm2(r);
}

double triple_left_residual(const DenseOperator& S, const SpectralTriple& t) {
  Vec r = S.apply_transpose(t.phi_star);
  axpy(r, -t.primary_value, t.phi_star);
  return norm2(r);
}

}  // namespace foldlab
