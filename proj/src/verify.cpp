#include "foldlab/verify.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <utility>

#include "foldlab/cones.hpp"
#include "foldlab/errors.hpp"
#include "foldlab/nonlinear.hpp"
#include "foldlab/operators.hpp"
#include "foldlab/spectral.hpp"

namespace foldlab::verify {

namespace {

// splitmix finalizer: per-sample streams independent of loop order
std::mt19937_64 sample_rng(std::uint64_t seed, int sample) {
  std::uint64_t x = seed + 0x9E3779B97F4A7C15ULL * (std::uint64_t(sample) + 1);
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBULL;
  x ^= x >> 31;
  return std::mt19937_64(x);
}

Vec uniform_vec(std::mt19937_64& rng, int n, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Vec v(std::size_t(n), 0.0);
  for (double& x : v) x = dist(rng);
  return v;
}

struct Audit {
  std::vector<Violation> violations;
  std::map<std::string, double> margins;

  void record(int sample, const std::string& check, double measured, double limit, double slack,
              bool bad, std::vector<Vec> inputs) {
    auto [it, fresh] = margins.emplace(check, slack);
    if (!fresh) it->second = std::min(it->second, slack);
    if (bad) violations.push_back({sample, check, std::move(inputs), measured, limit});
  }
};

HypothesisReport finish(const char* name, int n_samples, Audit&& audit) {
  HypothesisReport rep;
  rep.hypothesis = name;
  rep.samples = n_samples;
  rep.violations = std::move(audit.violations);
  std::stable_sort(rep.violations.begin(), rep.violations.end(),
                   [](const Violation& a, const Violation& b) { return a.sample < b.sample; });
  rep.margins = std::move(audit.margins);
  rep.pass = rep.violations.empty();
  std::ostringstream os;
  if (rep.pass)
    os << "no violation found in " << n_samples << " samples";
  else
    os << rep.violations.size() << " violation(s) found in " << n_samples << " samples";
  rep.summary = os.str();
  return rep;
}

// Pi M = M - phi (phi*^T M), the W-restriction of M's output
DenseOperator project_rows(const fibers::SplitSpace& split, const DenseOperator& M) {
  DenseOperator out = M;
  const Vec row = M.apply_transpose(split.phi_star);
  const int n = M.dim();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out(i, j) -= split.phi[i] * row[j];
  return out;
}

struct AboveOne {
  int count = 0;
  double runner_up = 0.0;  // best estimate of the second-largest eigenvalue
  bool exact = false;
};

// Eigenvalues of `left * T` strictly above one. The nonzero spectra of
// left*T and left^{1/2} T left^{1/2} coincide, so symmetric inputs get an
// exact Jacobi count; otherwise Perron dominant plus deflated second, which
// resolves counts 0/1/2 for entrywise positive products.
AboveOne count_above_one(const DenseOperator& left, const DenseOperator& T) {
  if (left.is_symmetric(1e-10) && T.is_symmetric(1e-10)) {
    try {
      const DenseOperator s = ops::matrix_power(left, 0.5);
      DenseOperator m = s.multiply(T).multiply(s);
      for (int i = 0; i < m.dim(); ++i)
        for (int j = i + 1; j < m.dim(); ++j) {
          const double v = 0.5 * (m(i, j) + m(j, i));
          m(i, j) = v;
          m(j, i) = v;
        }
      const EigenDecomposition eig = symmetric_eigendecompose(m);
      AboveOne r;
      r.exact = true;
      for (double ev : eig.eigenvalues)
        if (ev > 1.0) ++r.count;
      const std::size_t n = eig.eigenvalues.size();
      r.runner_up = n >= 2 ? eig.eigenvalues[n - 2] : 0.0;
      return r;
    } catch (const Error&) {
      // negative spectrum in `left`: fall through to the power route
    }
  }
  const DenseOperator K = left.multiply(T);
  const PowerResult right = dominant_eigenpair(K, 1e-11);
  const PowerResult dual = dominant_eigenpair(K.transpose(), 1e-11);
  const DeflatedSecond second = second_eigenvalue(K, right.value, right.vector, dual.vector);
  AboveOne r;
  if (right.value > 1.0) ++r.count;
  if (second.converged && !second.complex_pair && second.value > 1.0) ++r.count;
  r.runner_up = second.complex_pair ? second.modulus : second.value;
  return r;
}

}  // namespace

HypothesisReport check_m_hypotheses(const fibers::FoldProblem& prob, int n_samples,
                                    std::uint64_t seed) {
  if (prob.form != fibers::FormKind::m_form)
    fail(Err::InvalidArgument, "check_m_hypotheses needs an m-form problem");
  if (n_samples < 1) fail(Err::InvalidArgument, "n_samples must be positive");
  const int n = prob.dim();
  const double mu_hat = 1.0 / prob.w_solve_norm;
  const double b_hat = prob.slope_bound;
  const double norm_tol = 1e-10 * std::max({1.0, prob.op_scale, b_hat});

  Audit audit;
  audit.record(-1, "threshold_gap", b_hat, mu_hat, mu_hat - b_hat, !(b_hat < mu_hat), {});

  for (int s = 0; s < n_samples; ++s) {
    auto rng = sample_rng(seed, s);
    const Vec u = uniform_vec(rng, n, -3.0, 3.0);
    const Vec v = uniform_vec(rng, n, -3.0, 3.0);
    DenseOperator ghat = prob.P->linearize(u, v);
    ghat.add_scaled_identity(-prob.gamma_center);

    const double wnorm = operator_norm(project_rows(prob.split, ghat));
    audit.record(s, "w_slope_norm", wnorm, b_hat, b_hat + norm_tol - wnorm,
                 wnorm > b_hat + norm_tol, {u, v});

    const auto cert = cones::certify_fine_perturbation(ghat, mu_hat, b_hat);
    const bool member =
        cert.symmetric && cert.norm_bound <= b_hat + norm_tol && b_hat < mu_hat;
    const double mem_slack = cert.symmetric ? b_hat + norm_tol - cert.norm_bound : -1.0;
    audit.record(s, "perturbation_class", cert.norm_bound, b_hat, mem_slack, !member, {u, v});

    // ordered triple cu < cv < cw through strictly positive increments
    const Vec cu = uniform_vec(rng, n, -3.0, 3.0);
    const Vec cv = add(cu, uniform_vec(rng, n, 0.1, 1.0));
    const Vec cw = add(cv, uniform_vec(rng, n, 0.1, 1.0));
    const Vec pu = prob.P->eval(cu);
    const Vec pv = prob.P->eval(cv);
    const Vec pw = prob.P->eval(cw);
    const double t1 = dot(sub(cv, cu), pw);
    const double t2 = dot(sub(cw, cv), pu);
    const double t3 = dot(sub(cu, cw), pv);
    const double expr = t1 + t2 + t3;
    const double floor = 1e-12 * (std::abs(t1) + std::abs(t2) + std::abs(t3));
    audit.record(s, "convexity_triple", expr, floor, expr - floor, expr <= floor, {cu, cv, cw});

    DenseOperator ju = prob.P->jacobian(cu);
    DenseOperator jv = prob.P->jacobian(cv);
    const double jtol = 1e-12 * std::max({1.0, ju.max_abs(), jv.max_abs()});
    jv.add_scaled(ju, -1.0);
    const double jworst = jv.min_entry();
    audit.record(s, "jacobian_monotone", jworst, 0.0, jworst + jtol, jworst < -jtol, {cu, cv});
  }
  return finish("m_form_hypotheses", n_samples, std::move(audit));
}

RDecompositionScheme canonical_scheme(const fibers::FoldProblem& prob) {
  if (prob.form != fibers::FormKind::r_form)
    fail(Err::InvalidArgument, "canonical_scheme needs an r-form problem");
  const nonlinear::ConvexProfile* pr = prob.P ? prob.P->profile() : nullptr;
  if (!prob.P || prob.P->kind() != nonlinear::MapKind::nemitskii || pr == nullptr)
    fail(Err::SupplierMissing,
         std::string("no canonical decomposition for map kind '") +
             (prob.P ? nonlinear::map_kind_name(prob.P->kind()) : "null") + "'");
  RDecompositionScheme scheme;
  scheme.s_floor = prob.T;
  scheme.s_floor.scale(pr->a);
  scheme.b_cap = std::max(0.0, pr->b - 1.0);
  const nonlinear::ConvexProfile profile = *pr;
  const int n = prob.dim();
  scheme.split = [profile, n](const Vec& u, const Vec& v) {
    if (int(u.size()) != n || int(v.size()) != n)
      fail(Err::InvalidArgument, "decomposition sample dimension mismatch");
    Vec qa(std::size_t(n), 0.0), qb(std::size_t(n), 0.0);
    for (int i = 0; i < n; ++i) {
      const double q = profile.q(u[std::size_t(i)], v[std::size_t(i)]);
      qa[std::size_t(i)] = std::min(q, 1.0);
      qb[std::size_t(i)] = q - qa[std::size_t(i)];
    }
    return RDecomposition{DenseOperator::diagonal(qa), DenseOperator::diagonal(qb)};
  };
  return scheme;
}

HypothesisReport check_r_hypotheses(const fibers::FoldProblem& prob,
                                    std::optional<RDecompositionScheme> scheme, int n_samples,
                                    std::uint64_t seed) {
  if (prob.form != fibers::FormKind::r_form)
    fail(Err::InvalidArgument, "check_r_hypotheses needs an r-form problem");
  if (n_samples < 1) fail(Err::InvalidArgument, "n_samples must be positive");
  const RDecompositionScheme sch = scheme ? std::move(*scheme) : canonical_scheme(prob);
  const int n = prob.dim();
  if (!sch.split || sch.s_floor.dim() != n)
    fail(Err::InvalidArgument, "decomposition scheme must carry a split and a matching floor");
  const DenseOperator& T = prob.T;
  const double sf_scale = std::max(1.0, sch.s_floor.max_abs());

  Audit audit;
  // the class floor must be a positive operator; without it the eigenvalue
  // count below loses its meaning, so gate that check on this one
  const double floor_min = sch.s_floor.min_entry();
  const bool floor_ok = floor_min > 0.0;
  audit.record(-1, "floor_positive", floor_min, 0.0, floor_min, !floor_ok, {});

  for (int s = 0; s < n_samples; ++s) {
    auto rng = sample_rng(seed, s);
    const Vec u = uniform_vec(rng, n, -3.0, 3.0);
    const Vec v = uniform_vec(rng, n, -3.0, 3.0);
    const DenseOperator g = prob.P->linearize(u, v);
    const auto parts = sch.split(u, v);
    if (parts.A.dim() != n || parts.B.dim() != n)
      fail(Err::InvalidArgument, "decomposition parts dimension mismatch");

    const double gscale = std::max(1.0, g.max_abs());
    DenseOperator defect = parts.A;
    defect.add_scaled(parts.B, 1.0);
    defect.add_scaled(g, -1.0);
    const double dmax = defect.max_abs();
    audit.record(s, "decomposition_sum", dmax, 1e-10 * gscale, 1e-10 * gscale - dmax,
                 dmax > 1e-10 * gscale, {u, v});

    const DenseOperator at = parts.A.multiply(T);
    const double atol = 1e-12 * std::max({1.0, at.max_abs(), sf_scale, T.max_abs()});

    DenseOperator lower = at;
    lower.add_scaled(sch.s_floor, -1.0);
    const double wlo = lower.min_entry();
    audit.record(s, "floor_bound", wlo, 0.0, wlo + atol, wlo < -atol, {u, v});

    DenseOperator upper = T;
    upper.add_scaled(at, -1.0);
    const double whi = upper.min_entry();
    audit.record(s, "upper_bound", whi, 0.0, whi + atol, whi < -atol, {u, v});

    const double bmin = parts.B.min_entry();
    const double btol = 1e-12 * std::max(1.0, parts.B.max_abs());
    audit.record(s, "remainder_nonneg", bmin, 0.0, bmin + btol, bmin < -btol, {u, v});

    const double bnorm = operator_norm(parts.B);
    const double ctol = 1e-12 * std::max(1.0, sch.b_cap);
    audit.record(s, "remainder_norm", bnorm, sch.b_cap, sch.b_cap + ctol - bnorm,
                 bnorm > sch.b_cap + ctol, {u, v});

    if (floor_ok) {
      const AboveOne above = count_above_one(g, T);
      audit.record(s, "eigenvalues_above_one", above.runner_up, 1.0, 1.0 - above.runner_up,
                   above.count > 1, {u, v});
    }

    // ordered quadruple y1 > z1, y2 > z2, y1 > y2, z1 > z2
    const Vec z2 = uniform_vec(rng, n, -3.0, 3.0);
    const Vec p1 = uniform_vec(rng, n, 0.1, 1.0);
    const Vec p2 = uniform_vec(rng, n, 0.1, 1.0);
    const Vec p3 = uniform_vec(rng, n, 0.1, 1.0);
    const Vec z1 = add(z2, p1);
    const Vec y2 = add(z2, p2);
    const Vec y1 = add(z1, add(p2, p3));
    DenseOperator delta = prob.P->linearize(y1, z1);
    delta.add_scaled(prob.P->linearize(y2, z2), -1.0);
    const double ntol = 1e-12 * std::max(1.0, delta.max_abs());
    const double dmin = delta.min_entry();
    audit.record(s, "monotone_nonneg", dmin, 0.0, dmin + ntol, dmin < -ntol, {y1, z1, y2, z2});
    const DenseOperator dt = delta.multiply(T);
    const double strict_floor = 1e-12 * std::max(1.0, dt.max_abs());
    const double smin = dt.min_entry();
    audit.record(s, "monotone_strict", smin, strict_floor, smin - strict_floor,
                 smin <= strict_floor, {y1, z1, y2, z2});
  }
  return finish("r_form_hypotheses", n_samples, std::move(audit));
}

OracleReport brute_force_oracle(const fibers::FoldProblem& prob, const Vec& g, const Box& box,
                                int grid_per_axis, double t_min, double t_max, int nt,
                                double tol) {
  const int n = prob.dim();
  if (n > 3)
    fail(Err::DimensionTooLarge,
         "brute_force_oracle grids up to dimension 3, got " + std::to_string(n));
  if (n < 1 || int(g.size()) != n) fail(Err::InvalidArgument, "target dimension mismatch");
  if (int(box.lo.size()) != n || int(box.hi.size()) != n)
    fail(Err::InvalidArgument, "box bounds must match the problem dimension");
  for (int i = 0; i < n; ++i) {
    const double lo = box.lo[std::size_t(i)], hi = box.hi[std::size_t(i)];
    if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi))
      fail(Err::InvalidArgument, "box must be bounded with lo < hi");
  }
  if (grid_per_axis < 2) fail(Err::InvalidArgument, "grid_per_axis must be at least 2");
  if (std::isnan(t_min) != std::isnan(t_max))
    fail(Err::InvalidArgument, "give both window bounds or neither");

  // height range of the box corners; the default window widens it enough for
  // the engine's end-slope fits to stabilize
  double box_lo = 0.0, box_hi = 0.0;
  for (int i = 0; i < n; ++i) {
    const double a = prob.split.phi_star[std::size_t(i)] * box.lo[std::size_t(i)];
    const double b = prob.split.phi_star[std::size_t(i)] * box.hi[std::size_t(i)];
    box_lo += std::min(a, b);
    box_hi += std::max(a, b);
  }
  if (std::isnan(t_min)) {
    const double center = 0.5 * (box_lo + box_hi);
    const double half = std::max(50.0, 12.5 * (box_hi - box_lo));
    t_min = center - half;
    t_max = center + half;
  }
  if (!(t_min < t_max)) fail(Err::InvalidArgument, "window must satisfy t_min < t_max");

  OracleReport rep;
  rep.target = g;
  const double res_tol = 1e-10 * std::max({1.0, norm_inf(g), prob.op_scale});
  const double t_slack = 1e-9 * (t_max - t_min);

  std::vector<Vec> roots;
  std::vector<double> root_res;
  std::vector<int> node(std::size_t(n), 0);
  const long total = [&] {
    long p = 1;
    for (int i = 0; i < n; ++i) p *= grid_per_axis;
    return p;
  }();
  for (long flat = 0; flat < total; ++flat) {
    long rem = flat;
    Vec u(std::size_t(n), 0.0);
    for (int i = 0; i < n; ++i) {
      const int k = int(rem % grid_per_axis);
      rem /= grid_per_axis;
      u[std::size_t(i)] = box.lo[std::size_t(i)] +
                          (box.hi[std::size_t(i)] - box.lo[std::size_t(i)]) * double(k) /
                              double(grid_per_axis - 1);
    }
    double res = 0.0;
    bool ok = false;
    for (int iter = 0; iter < 80; ++iter) {
      const Vec r = sub(prob.F(u), g);
      res = norm_inf(r);
      if (res <= res_tol) {
        ok = true;
        break;
      }
      try {
        const Vec du = linear_solve(prob.DF(u), r);
        axpy(u, -1.0, du);
      } catch (const Error&) {
        break;  // singular Jacobian: abandon this start
      }
      if (!all_finite(u) || norm_inf(u) > 1e9) break;
    }
    if (!ok) continue;
    const double t = prob.split.height(u);
    if (t < t_min - t_slack || t > t_max + t_slack) continue;
    bool merged = false;
    for (std::size_t k = 0; k < roots.size(); ++k) {
      if (norm_inf(sub(roots[k], u)) <= 1e-6) {
        if (res < root_res[k]) {
          roots[k] = u;
          root_res[k] = res;
        }
        merged = true;
        break;
      }
    }
    if (!merged) {
      roots.push_back(u);
      root_res.push_back(res);
    }
  }
  std::sort(roots.begin(), roots.end(), [&](const Vec& a, const Vec& b) {
    return prob.split.height(a) < prob.split.height(b);
  });
  rep.oracle_solutions = std::move(roots);

  const fibers::SolveReport engine = fibers::solve_preimages(prob, g, t_min, t_max, nt, tol);
  rep.engine_solutions.reserve(engine.solutions.size());
  for (const auto& sol : engine.solutions) rep.engine_solutions.push_back(sol.u);

  rep.match = rep.oracle_solutions.size() == rep.engine_solutions.size();
  rep.max_pair_distance = 0.0;
  if (rep.match) {
    for (std::size_t k = 0; k < rep.oracle_solutions.size(); ++k) {
      const double d = norm2(sub(rep.oracle_solutions[k], rep.engine_solutions[k]));
      rep.max_pair_distance = std::max(rep.max_pair_distance, d);
    }
    if (rep.max_pair_distance > 1e-6) rep.match = false;
  }
  return rep;
}

IndexReport index_at(const fibers::FoldProblem& prob, const Vec& u, double tol) {
  if (int(u.size()) != prob.dim()) fail(Err::InvalidArgument, "point dimension mismatch");
  if (!(tol >= 0.0)) fail(Err::InvalidArgument, "tol must be nonnegative");
  IndexReport rep;
  rep.u = u;
  rep.lambda_value = fibers::lambda_at(prob, u);
  if (std::abs(rep.lambda_value) <= tol) {
    std::ostringstream os;
    os << "index undefined at a critical point: |lambda| = " << std::abs(rep.lambda_value)
       << " <= " << tol;
    fail(Err::CriticalPoint, os.str());
  }
  if (prob.form == fibers::FormKind::m_form) {
    const EigenDecomposition eig = symmetric_eigendecompose(prob.DF(u));
    for (double ev : eig.eigenvalues)
      if (ev < 0.0) ++rep.parity_count;
  } else {
    const DenseOperator j = prob.P->jacobian(prob.T.apply(u));
    rep.parity_count = count_above_one(j, prob.T).count;
  }
  rep.index = rep.parity_count % 2 == 0 ? 1 : -1;
  rep.sign_consistent = rep.index == (rep.lambda_value > 0.0 ? 1 : -1);
  return rep;
}

}  // namespace foldlab::verify
