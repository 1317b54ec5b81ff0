#include "foldlab/fibers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "foldlab/errors.hpp"

namespace foldlab::fibers {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

const char* form_name(FormKind k) {
  switch (k) {
    case FormKind::m_form: return "m_form";
    case FormKind::r_form: return "r_form";
  }
  return "unknown";
}

const char* verdict_name(FoldVerdict v) {
  switch (v) {
    case FoldVerdict::homeomorphism: return "homeomorphism";
    case FoldVerdict::fold_down: return "fold_down";
    case FoldVerdict::fold_up: return "fold_up";
    case FoldVerdict::non_simple: return "non_simple";
    case FoldVerdict::inconclusive: return "inconclusive";
  }
  return "unknown";
}

const char* order_name(OrderOutcome o) {
  switch (o) {
    case OrderOutcome::strictly_less: return "strictly_less";
    case OrderOutcome::strictly_greater: return "strictly_greater";
    case OrderOutcome::equal: return "equal";
    case OrderOutcome::incomparable: return "incomparable";
  }
  return "unknown";
}

Vec SplitSpace::project_W(const Vec& u) const {
  Vec out = u;
  axpy(out, -dot(phi_star, u), phi);
  return out;
}

double SplitSpace::height(const Vec& u) const { return dot(phi_star, u); }

SplitSpace build_split(const SpectralTriple& triple) {
  const double pairing = dot(triple.phi_star, triple.phi);
  if (!(pairing > 1e-12))
    fail(Err::BadNormalization,
         "<phi*, phi> = " + std::to_string(pairing) + " cannot anchor the splitting");
  SplitSpace sp;
  sp.phi = triple.phi;
  sp.phi_star = scaled(triple.phi_star, 1.0 / pairing);
  return sp;
}

Vec FoldProblem::F(const Vec& u) const {
  if (form == FormKind::m_form) {
    Vec out = L.apply(u);
    axpy(out, -1.0, P->eval(u));
    return out;
  }
  Vec out = u;
  axpy(out, -1.0, P->eval(T.apply(u)));
  return out;
}

DenseOperator FoldProblem::DF(const Vec& u) const {
  if (form == FormKind::m_form) {
    DenseOperator out = L;
    out.add_scaled(P->jacobian(u), -1.0);
    return out;
  }
  DenseOperator out = DenseOperator::identity(dim());
  out.add_scaled(P->jacobian(T.apply(u)).multiply(T), -1.0);
  return out;
}

FoldProblem build_fold_problem(const ops::ModelOperator& M, MapPtr P, double gamma_center) {
  if (!P) fail(Err::InvalidArgument, "null nonlinear map");
  if (!M.self_adjoint)
    fail(Err::InvalidArgument,
         "the direct form needs a self-adjoint operator; route non-self-adjoint "
         "problems through the compact form");
  if (P->dim() != M.L.dim())
    fail(Err::InvalidArgument, "map dimension " + std::to_string(P->dim()) +
                                   " does not match operator dimension " +
                                   std::to_string(M.L.dim()));

  FoldProblem prob;
  prob.form = FormKind::m_form;
  prob.L = M.L;
  prob.P = std::move(P);
  prob.split = build_split(M.triple);
  double gc = gamma_center;
  if (std::isnan(gc)) {
    const auto [lo, hi] = prob.P->linearization_range();
    gc = (std::isfinite(lo) && std::isfinite(hi)) ? 0.5 * (lo + hi) : 0.0;
  }
  prob.gamma_center = gc;
  prob.threshold = M.triple.primary_value;
  prob.slope_bound = prob.P->slice_slope_bound(gc);
  prob.op_scale = std::max(1.0, M.L.max_abs());

  // Distance from the centering to the spectrum of L on W: all eigenvalues
  // except the one carried by phi.
  const EigenDecomposition eig = symmetric_eigendecompose(M.L);
  const int n = M.L.dim();
  int ground = 0;
  for (int i = 1; i < n; ++i)
    if (std::abs(eig.eigenvalues[i] - M.triple.primary_value) <
        std::abs(eig.eigenvalues[ground] - M.triple.primary_value))
      ground = i;
  double sep = kInf;
  for (int i = 0; i < n; ++i)
    if (i != ground) sep = std::min(sep, std::abs(eig.eigenvalues[i] - gc));
  if (!(sep > 1e-12 * prob.op_scale))
    fail(Err::NotAContraction,
         "centering " + std::to_string(gc) + " meets the W spectrum of the operator");
  prob.w_solve_norm = std::isfinite(sep) ? 1.0 / sep : 0.0;
  prob.contraction = prob.slope_bound * prob.w_solve_norm;
  if (prob.contraction >= 1.0)
    fail(Err::NotAContraction, "slice contraction constant c = " +
                                   std::to_string(prob.contraction) + " is not below 1");

  // Bordered W-restricted solver: [L - gc I, phi; phi*^T, 0]. The extra row
  // pins the solution to W, the extra column absorbs the phi component.
  DenseOperator B(n + 1);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) B(i, j) = M.L(i, j);
    B(i, i) -= gc;
    B(i, n) = prob.split.phi[i];
    B(n, i) = prob.split.phi_star[i];
  }
  prob.w_lu = std::make_shared<LuSolver>(B);
  return prob;
}

FoldProblem build_fold_problem(const ops::RFormProblem& R, MapPtr P) {
  if (!P) fail(Err::InvalidArgument, "null nonlinear map");
  if (P->dim() != R.T.dim())
    fail(Err::InvalidArgument, "map dimension " + std::to_string(P->dim()) +
                                   " does not match operator dimension " +
                                   std::to_string(R.T.dim()));

  FoldProblem prob;
  prob.form = FormKind::r_form;
  prob.T = R.T;
  prob.P = std::move(P);
  prob.split = build_split(R.triple);
  prob.gamma_center = 0.0;
  prob.threshold = 1.0;
  prob.slope_bound = prob.P->slice_slope_bound(0.0);
  prob.op_scale = std::max(1.0, R.T.max_abs());

  // ||T restricted to W|| through the oblique projector Pi = I - phi phi*^T,
  // which fixes W and annihilates phi. Diagnostic only: the direct iteration
  // is rescued by Newton when it fails to contract.
  const int n = R.T.dim();
  DenseOperator pi = DenseOperator::identity(n);
  pi.add_scaled(DenseOperator::outer(prob.split.phi, prob.split.phi_star), -1.0);
  prob.w_solve_norm = operator_norm(pi.multiply(R.T).multiply(pi));
  prob.contraction = prob.slope_bound * prob.w_solve_norm;
  return prob;
}

namespace {

// x in W with (L - gc I) x = y, via the prefactored bordered system.
Vec w_restricted_solve(const FoldProblem& prob, const Vec& y) {
  const int n = prob.dim();
  Vec rhs(std::size_t(n) + 1, 0.0);
  std::copy(y.begin(), y.end(), rhs.begin());
  const Vec sol = prob.w_lu->solve(rhs);
  return Vec(sol.begin(), sol.begin() + n);
}

// P(u) - gamma_center u, the nonlinearity of the regrouped splitting.
Vec centered_map(const FoldProblem& prob, const Vec& u) {
  Vec out = prob.P->eval(u);
  if (prob.gamma_center != 0.0) axpy(out, -prob.gamma_center, u);
  return out;
}

// Newton on the W-restricted system project_W(F(w + t phi)) = z; the bordered
// matrix [DF, phi; phi*^T, 0] keeps the step inside W. Returns the step count,
// or -1 when the residual will not drop below tol.
int newton_polish(const FoldProblem& prob, const Vec& z, double t, Vec& w, double tol,
                  double& residual_out) {
  const int n = prob.dim();
  const auto& sp = prob.split;
  int steps = 0;
  for (int it = 0; it <= 8; ++it) {
    const Vec u = add(w, scaled(sp.phi, t));
    const Vec r = sub(sp.project_W(prob.F(u)), z);
    residual_out = norm2(r);
    if (residual_out <= tol) return steps;
    if (it == 8) break;
    const DenseOperator J = prob.DF(u);
    DenseOperator B(n + 1);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) B(i, j) = J(i, j);
      B(i, n) = sp.phi[i];
      B(n, i) = sp.phi_star[i];
    }
    Vec rhs(std::size_t(n) + 1, 0.0);
    std::copy(r.begin(), r.end(), rhs.begin());
    Vec d;
    try {
      d = LuSolver(B).solve(rhs);
    } catch (const Error&) {
      break;
    }
    if (!all_finite(d)) break;
    for (int i = 0; i < n; ++i) w[i] -= d[i];
    ++steps;
  }
  return -1;
}

}  // namespace

SliceSolve invert_slice(const FoldProblem& prob, const Vec& z, double t, const Vec& w0,
                        double tol) {
  const int n = prob.dim();
  if (int(z.size()) != n || int(w0.size()) != n)
    fail(Err::InvalidArgument, "slice anchor/seed dimension mismatch");
  if (!(tol > 0.0)) fail(Err::InvalidArgument, "slice tolerance must be positive");
  const auto& sp = prob.split;
  if (std::abs(sp.height(z)) > 1e-10 * std::max(1.0, norm2(z)))
    fail(Err::InvalidArgument, "anchor has height " + std::to_string(sp.height(z)) +
                                   "; project it into W first");

  Vec w = sp.project_W(w0);
  int iters = 0;
  double ratio_max = 0.0;
  // Ratios are only meaningful while steps sit clear of evaluation roundoff.
  const double ratio_floor =
      std::max(0.5 * tol, 100.0 * kEps * prob.op_scale * std::max(1.0, std::abs(t)));
  const int cap = 600;
  double prev_step = -1.0;
  int stall = 0;

  if (prob.form == FormKind::m_form) {
    // Contraction in y = (L - gc I) w: y <- project_W(Phat(Lhat_W^{-1} y + t phi)) + z.
    Vec y = prob.L.apply(w);
    axpy(y, -prob.gamma_center, w);
    y = sp.project_W(y);
    for (int k = 0; k < cap; ++k) {
      const Vec x = w_restricted_solve(prob, y);
      const Vec u = add(x, scaled(sp.phi, t));
      Vec next = sp.project_W(centered_map(prob, u));
      axpy(next, 1.0, z);
      const double step = norm2(sub(next, y));
      ++iters;
      if (prev_step > ratio_floor && step > ratio_floor)
        ratio_max = std::max(ratio_max, step / prev_step);
      if (prev_step >= 0.0 && step > 0.95 * prev_step)
        ++stall;
      else
        stall = 0;
      prev_step = step;
      y = next;
      if (step <= 0.05 * tol || stall >= 12) break;
    }
    w = w_restricted_solve(prob, y);
  } else {
    // Direct form: w <- project_W(P(T(w + t phi))) + z.
    for (int k = 0; k < cap; ++k) {
      const Vec u = add(w, scaled(sp.phi, t));
      Vec next = sp.project_W(prob.P->eval(prob.T.apply(u)));
      axpy(next, 1.0, z);
      const double step = norm2(sub(next, w));
      ++iters;
      if (prev_step > ratio_floor && step > ratio_floor)
        ratio_max = std::max(ratio_max, step / prev_step);
      if (prev_step >= 0.0 && step > 0.95 * prev_step)
        ++stall;
      else
        stall = 0;
      prev_step = step;
      w = next;
      if (step <= 0.05 * tol || stall >= 12) break;
    }
  }

  SliceSolve out;
  double residual = 0.0;
  const int polish = newton_polish(prob, z, t, w, tol, residual);
  if (polish < 0)
    fail(Err::NoConvergence, "slice at t = " + std::to_string(t) +
                                 " stalled with residual " + std::to_string(residual));
  out.w = sp.project_W(w);
  out.iterations = iters + polish;
  out.observed_ratio = ratio_max;
  out.residual = residual;
  return out;
}

namespace {

// Tracks the slice eigenvalue along a fiber. m-form: smallest eigenvalue of
// the symmetric DF(u), warm-started Rayleigh iteration with periodic full
// re-anchoring; r-form: 1 - r(J(Tu)T), warm-started power iteration.
class LambdaTracker {
 public:
  explicit LambdaTracker(const FoldProblem& prob) : prob_(prob) {}

  double eval(const Vec& u) { return prob_.form == FormKind::m_form ? eval_m(u) : eval_r(u); }

 private:
  double eval_m(const Vec& u) {
    const DenseOperator A = prob_.DF(u);
    const double scale = std::max(A.max_abs(), 1e-300);
    if (!have_ || since_anchor_ >= 256 || gap_above_ <= 1e-8 * scale) return anchor(A);
    double sigma = lam_;
    Vec v = v_;
    for (int it = 0; it < 6; ++it) {
      DenseOperator B = A;
      B.add_scaled_identity(-sigma);
      Vec x;
      try {
        x = LuSolver(B).solve(v);
      } catch (const Error&) {
        sigma += 1e-8 * scale;  // shift sat on an eigenvalue
        continue;
      }
      if (!all_finite(x)) return anchor(A);
      v = normalized(x);
      const Vec av = A.apply(v);
      const double next = dot(v, av);
      const double res = norm2(sub(av, scaled(v, next)));
      sigma = next;
      if (res <= 1e-10 * scale) {
        // A drift beyond half the anchor gap means the iteration locked onto
        // a neighboring eigenvalue.
        if (std::abs(sigma - lam_) <= 0.45 * gap_above_) {
          lam_ = sigma;
          v_ = v;
          ++since_anchor_;
          return lam_;
        }
        break;
      }
    }
    return anchor(A);
  }

  double anchor(const DenseOperator& A) {
    const EigenDecomposition eig = symmetric_eigendecompose(A);
    lam_ = eig.eigenvalues.front();
    v_ = eig.eigenvector(0);
    gap_above_ = eig.eigenvalues.size() > 1
                     ? eig.eigenvalues[1] - eig.eigenvalues[0]
                     : kInf;
    have_ = true;
    since_anchor_ = 0;
    return lam_;
  }

  double eval_r(const Vec& u) {
    const Vec tu = prob_.T.apply(u);
    const DenseOperator M = prob_.P->jacobian(tu).multiply(prob_.T);
    const Vec start = have_ ? v_ : Vec(std::size_t(prob_.dim()), 1.0);
    const PowerResult pr = power_iterate(M, start, 1e-11, 5000);
    v_ = pr.vector;
    have_ = true;
    return 1.0 - std::abs(pr.value);
  }

  const FoldProblem& prob_;
  bool have_ = false;
  Vec v_;
  double lam_ = 0.0;
  double gap_above_ = 0.0;
  int since_anchor_ = 0;
};

}  // namespace

double lambda_at(const FoldProblem& prob, const Vec& u) {
  if (int(u.size()) != prob.dim()) fail(Err::InvalidArgument, "point dimension mismatch");
  if (prob.form == FormKind::m_form)
    return symmetric_eigendecompose(prob.DF(u)).eigenvalues.front();
  const Vec tu = prob.T.apply(u);
  const DenseOperator M = prob.P->jacobian(tu).multiply(prob.T);
  const PowerResult pr = power_iterate(M, Vec(std::size_t(prob.dim()), 1.0), 1e-11, 20000);
  return 1.0 - std::abs(pr.value);
}

Fiber trace_fiber(const FoldProblem& prob, const Vec& z, double t_min, double t_max, int nt,
                  double slice_tol) {
  if (!(t_min < t_max)) fail(Err::InvalidArgument, "need t_min < t_max");
  if (nt < 3) fail(Err::InvalidArgument, "need at least 3 fiber samples");
  const int n = prob.dim();

  Fiber fb;
  fb.form = prob.form;
  fb.z = z;
  fb.slice_tol = slice_tol;
  fb.t_samples.reserve(nt);
  fb.w_samples.reserve(nt);
  fb.h_samples.reserve(nt);
  fb.lambda_samples.reserve(nt);
  fb.residuals.reserve(nt);

  LambdaTracker tracker(prob);
  Vec w(std::size_t(n), 0.0);
  for (int k = 0; k < nt; ++k) {
    const double t = t_min + (t_max - t_min) * (double(k) / (nt - 1));
    try {
      const SliceSolve s = invert_slice(prob, z, t, w, slice_tol);
      w = s.w;
      fb.max_observed_ratio = std::max(fb.max_observed_ratio, s.observed_ratio);
      const Vec u = add(w, scaled(prob.split.phi, t));
      fb.t_samples.push_back(t);
      fb.w_samples.push_back(w);
      fb.h_samples.push_back(prob.split.height(prob.F(u)));
      fb.lambda_samples.push_back(tracker.eval(u));
      fb.residuals.push_back(s.residual);
    } catch (const Error& e) {
      if (e.code() == Err::NoConvergence)
        fail(Err::NoConvergence,
             "fiber sample at t = " + std::to_string(t) + ": " + e.what());
      throw;
    }
  }
  fb.problem = std::make_shared<FoldProblem>(prob);
  return fb;
}

namespace {

double ls_slope(const std::vector<double>& t, const std::vector<double>& h, int begin,
                int count) {
  double tm = 0.0, hm = 0.0;
  for (int i = begin; i < begin + count; ++i) {
    tm += t[i];
    hm += h[i];
  }
  tm /= count;
  hm /= count;
  double num = 0.0, den = 0.0;
  for (int i = begin; i < begin + count; ++i) {
    num += (t[i] - tm) * (h[i] - hm);
    den += (t[i] - tm) * (t[i] - tm);
  }
  return den > 0.0 ? num / den : 0.0;
}

int sign_with_floor(double x, double floor) { return x > floor ? 1 : (x < -floor ? -1 : 0); }

}  // namespace

FoldClassification classify_fold(const Fiber& fiber, double slope_window, double slope_rtol,
                                 double lambda_floor) {
  const int nt = int(fiber.t_samples.size());
  if (nt < 32) fail(Err::InvalidArgument, "classification needs at least 32 samples");
  if (!(slope_window > 0.0 && slope_window <= 0.5))
    fail(Err::InvalidArgument, "slope_window must lie in (0, 0.5]");
  const auto& t = fiber.t_samples;
  const auto& h = fiber.h_samples;
  const auto& lam = fiber.lambda_samples;

  FoldClassification out;
  double hscale = 0.0;
  for (double v : h) hscale = std::max(hscale, std::abs(v));
  const double dfloor = 1e-10 * std::max(1.0, hscale);

  int last = 0;
  int first_dir = 0;
  for (int k = 0; k + 1 < nt; ++k) {
    const int s = sign_with_floor(h[k + 1] - h[k], dfloor);
    if (s == 0) continue;
    if (last != 0 && s != last) {
      ++out.sign_changes;
      out.critical_ts.push_back(t[k]);
    }
    if (last == 0) first_dir = s;
    last = s;
  }

  const int m = std::min(nt, std::max(8, int(slope_window * nt)));
  const int m2 = std::max(4, m / 2);
  out.end_slope_left = ls_slope(t, h, 0, m);
  out.end_slope_right = ls_slope(t, h, nt - m, m);
  const double s_l2 = ls_slope(t, h, 0, m2);
  const double s_r2 = ls_slope(t, h, nt - m2, m2);
  const double sref = 1e-12 * std::max(1.0, hscale);
  out.stabilized_left =
      std::abs(s_l2 - out.end_slope_left) <=
      slope_rtol * std::max(std::abs(s_l2), std::abs(out.end_slope_left)) + sref;
  out.stabilized_right =
      std::abs(s_r2 - out.end_slope_right) <=
      slope_rtol * std::max(std::abs(s_r2), std::abs(out.end_slope_right)) + sref;

  // Sign identity h'(t) = lambda(t) alpha(t), alpha > 0, away from the
  // critical level.
  for (int k = 1; k + 1 < nt; ++k) {
    if (std::abs(lam[k]) <= lambda_floor) continue;
    const double hp = (h[k + 1] - h[k - 1]) / (t[k + 1] - t[k - 1]);
    const int sh = hp > 0.0 ? 1 : (hp < 0.0 ? -1 : 0);
    if (sh != (lam[k] > 0.0 ? 1 : -1)) ++out.handr_mismatches;
  }

  const double tspan = t[nt - 1] - t[0];
  const double sfloor = 1e-9 * std::max(1.0, hscale / std::max(tspan, 1e-300));
  const int sgn_l = sign_with_floor(out.end_slope_left, sfloor);
  const int sgn_r = sign_with_floor(out.end_slope_right, sfloor);

  if (out.handr_mismatches > 0) {
    out.verdict = FoldVerdict::inconclusive;
  } else if (out.sign_changes == 0) {
    out.verdict = (sgn_l != 0 && sgn_l == sgn_r) ? FoldVerdict::homeomorphism
                                                 : FoldVerdict::inconclusive;
  } else if (out.sign_changes == 1) {
    if (first_dir > 0)
      out.verdict = (sgn_l > 0 && sgn_r < 0) ? FoldVerdict::fold_down
                                             : FoldVerdict::inconclusive;
    else
      out.verdict = (sgn_l < 0 && sgn_r > 0) ? FoldVerdict::fold_up
                                             : FoldVerdict::inconclusive;
  } else {
    out.verdict = FoldVerdict::non_simple;
  }
  return out;
}

namespace {

CriticalPoint refine_lambda_crossing(const FoldProblem& prob, const Fiber& fiber, int ia, int ib,
                                     double refine_tol) {
  double a = fiber.t_samples[ia];
  double b = fiber.t_samples[ib];
  double la = fiber.lambda_samples[ia];
  const double span = std::max(1.0, fiber.t_samples.back() - fiber.t_samples.front());
  Vec w = fiber.w_samples[ia];
  LambdaTracker tracker(prob);
  CriticalPoint best;
  best.lambda = kInf;
  for (int it = 0; it < 200; ++it) {
    const double tm = 0.5 * (a + b);
    const SliceSolve s = invert_slice(prob, fiber.z, tm, w, fiber.slice_tol);
    w = s.w;
    const Vec u = add(w, scaled(prob.split.phi, tm));
    const double lm = tracker.eval(u);
    if (std::abs(lm) < std::abs(best.lambda)) {
      best.t = tm;
      best.u = u;
      best.lambda = lm;
      best.h = prob.split.height(prob.F(u));
    }
    if (std::abs(lm) <= refine_tol || (b - a) <= 1e-13 * span) break;
    if ((lm > 0.0) == (la > 0.0)) {
      a = tm;
      la = lm;
    } else {
      b = tm;
    }
  }
  return best;
}

}  // namespace

std::vector<CriticalPoint> critical_points_on_fiber(const Fiber& fiber, double refine_tol) {
  if (!fiber.problem) fail(Err::InvalidArgument, "fiber does not carry its originating problem");
  if (!(refine_tol > 0.0)) fail(Err::InvalidArgument, "refine_tol must be positive");
  if (fiber.lambda_samples.empty()) fail(Err::InvalidArgument, "fiber has no lambda samples");

  const FoldProblem& prob = *fiber.problem;
  const auto& lam = fiber.lambda_samples;
  std::vector<CriticalPoint> out;
  int last_idx = -1;
  for (int k = 0; k < int(lam.size()); ++k) {
    if (lam[k] == 0.0) continue;
    if (last_idx >= 0 && (lam[k] > 0.0) != (lam[last_idx] > 0.0))
      out.push_back(refine_lambda_crossing(prob, fiber, last_idx, k, refine_tol));
    last_idx = k;
  }
  return out;
}

namespace {

int index_sign(const FoldProblem& prob, double lambda) {
  const double floor = 1e-7 * std::max(1.0, std::abs(prob.threshold));
  return lambda > floor ? 1 : (lambda < -floor ? -1 : 0);
}

}  // namespace

SolveReport solve_preimages(const FoldProblem& prob, const Vec& g, double t_min, double t_max,
                            int nt, double tol) {
  if (int(g.size()) != prob.dim()) fail(Err::InvalidArgument, "target dimension mismatch");
  if (!(tol > 0.0)) fail(Err::InvalidArgument, "solve tolerance must be positive");
  const auto& sp = prob.split;

  SolveReport rep;
  rep.target = g;
  rep.z = sp.project_W(g);
  rep.target_height = sp.height(g);

  const double slice_tol = std::min(1e-8, 0.5 * tol);
  const Fiber fiber = trace_fiber(prob, rep.z, t_min, t_max, nt, slice_tol);
  rep.classification = classify_fold(fiber);
  if (rep.classification.verdict != FoldVerdict::non_simple &&
      !(rep.classification.stabilized_left && rep.classification.stabilized_right))
    fail(Err::WindowTooNarrow, "end slopes have not stabilized on [" + std::to_string(t_min) +
                                   ", " + std::to_string(t_max) + "]; widen the window");

  const auto& t = fiber.t_samples;
  const auto& h = fiber.h_samples;
  const int m = int(t.size());
  const double merge_radius = 10.0 * std::sqrt(tol);

  auto probe = [&](double tt, Vec& wseed) {
    const SliceSolve s = invert_slice(prob, rep.z, tt, wseed, slice_tol);
    wseed = s.w;
    const Vec u = add(s.w, scaled(sp.phi, tt));
    return sp.height(prob.F(u)) - rep.target_height;
  };

  std::vector<Solution> sols;
  auto push_solution = [&](Vec u, double lam, int idx, double residual) {
    Solution s;
    s.u = std::move(u);
    s.t = sp.height(s.u);
    s.residual = residual;
    s.lambda = lam;
    s.index = idx;
    for (const auto& other : sols)
      if (std::abs(other.t - s.t) <= merge_radius) return;  // tangency merge
    sols.push_back(std::move(s));
  };

  // Fold tangencies first: critical points whose image already matches the
  // target. Pushing them before the bracket roots lets a marginal bracketed
  // crossing near the critical level merge into the refined tangency.
  const double lam_refine = 1e-6 * std::max(1.0, std::abs(prob.threshold));
  for (const auto& c : critical_points_on_fiber(fiber, lam_refine)) {
    const double rc = norm2(sub(prob.F(c.u), g));
    if (rc <= 10.0 * tol) push_solution(c.u, c.lambda, 0, rc);
  }

  // Full-space Newton on F(u) = g from a near-solution seed; a seed that
  // Newton cannot improve is still accepted inside the tangency band.
  auto accept_root = [&](Vec u) {
    Vec best = u;
    double best_rn = norm2(sub(prob.F(u), g));
    for (int it = 0; it <= 10; ++it) {
      const Vec r = sub(prob.F(u), g);
      const double rn = norm2(r);
      if (rn < best_rn) {
        best = u;
        best_rn = rn;
      }
      if (rn <= tol) {
        const double lam = lambda_at(prob, u);
        push_solution(std::move(u), lam, index_sign(prob, lam), rn);
        return;
      }
      if (it == 10) break;
      Vec d;
      try {
        d = LuSolver(prob.DF(u)).solve(r);
      } catch (const Error&) {
        break;
      }
      if (!all_finite(d)) break;
      axpy(u, -1.0, d);
    }
    if (best_rn <= 10.0 * tol) {
      const double lam = lambda_at(prob, best);
      push_solution(std::move(best), lam, index_sign(prob, lam), best_rn);
      return;
    }
    fail(Err::NoConvergence, "root polish stalled with residual " + std::to_string(best_rn) +
                                 " at t = " + std::to_string(sp.height(u)));
  };

  // Bracketed height crossings, refined by bisection then Newton.
  for (int k = 0; k + 1 < m; ++k) {
    const double d0 = h[k] - rep.target_height;
    const double d1 = h[k + 1] - rep.target_height;
    if (d0 == 0.0) {
      accept_root(add(fiber.w_samples[k], scaled(sp.phi, t[k])));
      continue;
    }
    if (k + 2 == m && d1 == 0.0) {
      accept_root(add(fiber.w_samples[k + 1], scaled(sp.phi, t[k + 1])));
      continue;
    }
    if (!((d0 < 0.0 && d1 > 0.0) || (d0 > 0.0 && d1 < 0.0))) continue;
    double ta = t[k], tb = t[k + 1], da = d0;
    Vec wseed = fiber.w_samples[k];
    double tm = 0.5 * (ta + tb);
    for (int it = 0; it < 120; ++it) {
      tm = 0.5 * (ta + tb);
      const double dm = probe(tm, wseed);
      if (std::abs(dm) <= 0.2 * tol || (tb - ta) <= 1e-14 * std::max(1.0, std::abs(tm))) break;
      if ((dm > 0.0) == (da > 0.0)) {
        ta = tm;
        da = dm;
      } else {
        tb = tm;
      }
    }
    accept_root(add(wseed, scaled(sp.phi, tm)));
  }

  std::sort(sols.begin(), sols.end(),
            [](const Solution& a, const Solution& b) { return a.t < b.t; });
  rep.solutions = std::move(sols);
  rep.count = int(rep.solutions.size());

  for (int i = 0; i < rep.count; ++i) {
    for (int j = i + 1; j < rep.count; ++j) {
      const Vec d = sub(rep.solutions[i].u, rep.solutions[j].u);
      const double uscale = std::max(
          {1.0, norm_inf(rep.solutions[i].u), norm_inf(rep.solutions[j].u)});
      PairOrder po;
      po.i = i;
      po.j = j;
      if (norm_inf(d) <= 1e-12 * uscale) {
        po.outcome = OrderOutcome::equal;
      } else {
        bool all_pos = true, all_neg = true;
        double gap = kInf;
        for (double dc : d) {
          all_pos = all_pos && dc > 0.0;
          all_neg = all_neg && dc < 0.0;
          gap = std::min(gap, std::abs(dc));
        }
        if (all_pos) {
          po.outcome = OrderOutcome::strictly_greater;
          po.min_gap = gap;
        } else if (all_neg) {
          po.outcome = OrderOutcome::strictly_less;
          po.min_gap = gap;
        } else {
          po.outcome = OrderOutcome::incomparable;
        }
      }
      rep.ordering.push_back(po);
    }
  }
  return rep;
}

}  // namespace foldlab::fibers
