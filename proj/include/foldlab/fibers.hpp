#pragma once

#include <limits>
#include <memory>
#include <vector>

#include "foldlab/dense.hpp"
#include "foldlab/nonlinear.hpp"
#include "foldlab/operators.hpp"
#include "foldlab/spectral.hpp"

namespace foldlab::fibers {

using nonlinear::MapPtr;

enum class FormKind { m_form, r_form };
const char* form_name(FormKind k);

// Splitting H = W + <phi> against the dual pair <phi*, phi> = 1, W = Ker phi*.
struct SplitSpace {
  Vec phi;
  Vec phi_star;

  Vec project_W(const Vec& u) const;  // u - <phi*, u> phi
  double height(const Vec& u) const;  // <phi*, u>
};

// Throws BadNormalization when <phi_star, phi> <= 1e-12; otherwise rescales
// phi_star so the pairing is exactly one.
SplitSpace build_split(const SpectralTriple& triple);

// One nonlinear problem in fiber coordinates. m-form: F(u) = Lu - P(u) with L
// self-adjoint; gamma_center regroups F = (L - g I) - (P - g I) so the W-part
// of the linearization obeys ||Pi(G - g I)|| <= slope_bound (F itself is
// unchanged by the regrouping). r-form: F(u) = u - P(Tu), no centering.
struct FoldProblem {
  FormKind form = FormKind::m_form;
  DenseOperator L;  // m-form only
  DenseOperator T;  // r-form only
  MapPtr P;
  SplitSpace split;
  double gamma_center = 0.0;
  double threshold = 0.0;     // critical level of the slice spectrum: lambda_m (m), 1 (r)
  double slope_bound = 0.0;   // b-hat
  double w_solve_norm = 0.0;  // m: ||(L - g I)^-1 restricted to W||; r: ||T restricted to W||
  double contraction = 0.0;   // c = slope_bound * w_solve_norm
  double op_scale = 1.0;      // roundoff scale proxy for step-ratio floors
  std::shared_ptr<const LuSolver> w_lu;  // m-form bordered solver [L - g I, phi; phi*^T, 0]

  int dim() const { return P ? P->dim() : 0; }
  Vec F(const Vec& u) const;
  DenseOperator DF(const Vec& u) const;
};

// m-form assembly. gamma_center = NaN picks the midpoint of the map's
// linearization range (0 when unbounded). Throws InvalidArgument on a
// non-self-adjoint operator or dimension mismatch, NotAContraction when
// c = slope_bound * w_solve_norm >= 1 (the slice iteration has no certificate).
FoldProblem build_fold_problem(const ops::ModelOperator& M, MapPtr P,
                               double gamma_center = std::numeric_limits<double>::quiet_NaN());

// r-form assembly. The direct slice iteration is not required to contract
// (Newton finishes the solve), so the recorded contraction is diagnostic only.
FoldProblem build_fold_problem(const ops::RFormProblem& R, MapPtr P);

struct SliceSolve {
  Vec w;
  int iterations = 0;           // fixed-point updates plus Newton steps
  double observed_ratio = 0.0;  // max consecutive fixed-point step-norm ratio
  double residual = 0.0;        // ||project_W(F(w + t phi)) - z|| at exit
};

// Solve project_W(F(w + t phi)) = z for w in W, starting from w0. m-form runs
// the contraction y <- project_W(Phat(Lhat_W^{-1} y + t phi)) + z in y = Lhat w;
// r-form iterates w <- project_W(P(T(w + t phi))) + z. Both finish with Newton
// on the W-restricted system (bordered with phi / phi*). Throws InvalidArgument
// when z leaves W, NoConvergence (message carries t and the last residual).
SliceSolve invert_slice(const FoldProblem& prob, const Vec& z, double t, const Vec& w0,
                        double tol);

struct Fiber {
  FormKind form = FormKind::m_form;
  Vec z;
  double slice_tol = 0.0;
  std::vector<double> t_samples;  // ascending, uniform
  std::vector<Vec> w_samples;
  std::vector<double> h_samples;       // height(F(w + t phi))
  std::vector<double> lambda_samples;  // smallest eig of DF (m) / 1 - r(J(Tu)T) (r)
  std::vector<double> residuals;
  double max_observed_ratio = 0.0;
  std::shared_ptr<const FoldProblem> problem;  // set by trace_fiber
};

// Uniform grid of nt samples on [t_min, t_max], warm-started left to right.
Fiber trace_fiber(const FoldProblem& prob, const Vec& z, double t_min, double t_max, int nt,
                  double slice_tol = 1e-8);

enum class FoldVerdict { homeomorphism, fold_down, fold_up, non_simple, inconclusive };
const char* verdict_name(FoldVerdict v);

struct FoldClassification {
  FoldVerdict verdict = FoldVerdict::inconclusive;
  int sign_changes = 0;         // of the discrete height slope
  double end_slope_left = 0.0;  // least-squares fit over the outer window fraction
  double end_slope_right = 0.0;
  std::vector<double> critical_ts;  // t at each detected slope flip
  bool stabilized_left = false;     // outer-half slope agrees within slope_rtol
  bool stabilized_right = false;
  int handr_mismatches = 0;  // interior samples where sign(h') != sign(lambda)
};

// Verdict from discrete monotonicity/unimodality plus end slopes, cross-checked
// against the sign identity h'(t) = lambda(t) * alpha(t), alpha > 0: any
// mismatch at a sample with |lambda| > lambda_floor forces inconclusive.
// Requires >= 32 samples.
FoldClassification classify_fold(const Fiber& fiber, double slope_window = 0.2,
                                 double slope_rtol = 0.05, double lambda_floor = 1e-2);

struct CriticalPoint {
  double t = 0.0;
  Vec u;
  double lambda = 0.0;
  double h = 0.0;
};

// Bisection on lambda(t) across each sign change, re-solving the slice per
// probe, until |lambda| <= refine_tol. Empty for fibers without sign changes.
std::vector<CriticalPoint> critical_points_on_fiber(const Fiber& fiber, double refine_tol);

enum class OrderOutcome { strictly_less, strictly_greater, equal, incomparable };
const char* order_name(OrderOutcome o);

struct PairOrder {
  int i = 0;
  int j = 0;  // outcome states u_i vs u_j componentwise
  OrderOutcome outcome = OrderOutcome::incomparable;
  double min_gap = 0.0;  // smallest |difference| over components for strict orders
};

struct Solution {
  Vec u;
  double t = 0.0;
  double residual = 0.0;  // ||F(u) - g||
  double lambda = 0.0;
  int index = 0;  // sgn lambda; 0 at tangency-merged (critical) solutions
};

struct SolveReport {
  Vec target;
  Vec z;
  double target_height = 0.0;
  std::vector<Solution> solutions;  // ascending in t
  int count = 0;
  std::vector<PairOrder> ordering;
  FoldClassification classification;
};

// Preimages of g: trace the fiber through project_W(g), bracket every crossing
// of height(g), refine by bisection + full-space Newton, then add critical
// points whose image matches g (fold tangencies, index 0). Solutions closer
// than 10*sqrt(tol) in t merge into one. Throws WindowTooNarrow when the end
// slopes have not stabilized (unless the fiber classifies non_simple, which
// proceeds flagged), NoConvergence from the underlying solves.
SolveReport solve_preimages(const FoldProblem& prob, const Vec& g, double t_min, double t_max,
                            int nt, double tol);

// Distance of the critical spectrum from the threshold at u: smallest
// eigenvalue of DF(u) (m-form) or 1 - r(J(Tu)T) (r-form).
double lambda_at(const FoldProblem& prob, const Vec& u);

}  // namespace foldlab::fibers
