// Acceptance gate: every release-blocking behavior, one line of output each.
// Each criterion states its tolerance inline; a FAIL anywhere fails the run.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "foldlab/cones.hpp"
#include "foldlab/errors.hpp"
#include "foldlab/fibers.hpp"
#include "foldlab/nonlinear.hpp"
#include "foldlab/operators.hpp"
#include "foldlab/spectral.hpp"
#include "foldlab/verify.hpp"
#include "scenario.hpp"

using namespace foldlab;
namespace fb = foldlab::fibers;
namespace nl = foldlab::nonlinear;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int g_failed = 0;

void line(int num, const char* name, bool ok, const std::string& detail) {
  std::printf("criterion %02d %-28s %s  %s\n", num, name, ok ? "PASS" : "FAIL", detail.c_str());
  if (!ok) ++g_failed;
}

template <class F>
void guarded(int num, const char* name, F&& body) {
  try {
    body();
  } catch (const std::exception& e) {
    line(num, name, false, std::string("threw: ") + e.what());
  }
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct DemoRun {
  cli::ScenarioConfig cfg;
  cli::RunResults rr;
  double seconds = 0.0;
};

DemoRun run_demo(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("foldlab_acceptance_" + name);
  fs::remove_all(dir);
  DemoRun d;
  d.cfg = cli::demo_config(name, dir.string());
  const auto t0 = Clock::now();
  d.rr = cli::run_scenario("demo", d.cfg);
  d.seconds = seconds_since(t0);
  return d;
}

ops::ModelOperator dirichlet(int n) {
  ops::ProblemSpec spec;
  spec.kind = ops::OperatorKind::dirichlet_laplacian_1d;
  spec.grid_sizes = {n};
  return ops::build_model_operator(spec);
}

Vec random_w(std::mt19937_64& rng, const fb::FoldProblem& prob, double amp) {
  std::uniform_real_distribution<double> u(-amp, amp);
  Vec v(std::size_t(prob.dim()), 0.0);
  for (auto& x : v) x = u(rng);
  return prob.split.project_W(v);
}

Vec target_at(const fb::FoldProblem& prob, const Vec& z, double h) {
  Vec g = scaled(prob.split.phi, h);
  axpy(g, 1.0, z);
  return g;
}

double fiber_crest_height(const fb::FoldProblem& prob, double t_min, double t_max, int nt,
                          double refine_tol) {
  const Vec zero(std::size_t(prob.dim()), 0.0);
  const fb::Fiber f = fb::trace_fiber(prob, zero, t_min, t_max, nt);
  const auto crits = fb::critical_points_on_fiber(f, refine_tol);
  double best = -1e300;
  for (const auto& c : crits) best = std::max(best, c.h);
  return best;
}

// A small problem plus the sampling recipe for its multistart oracle audit.
struct Analogue {
  std::string name;
  fb::FoldProblem prob;
  double box_half = 0.0;
  int grid = 5;
  double t_min = 0.0, t_max = 0.0;
  int nt = 512;
  double tol = 1e-9;
  double h_lo = 0.0, h_hi = 0.0;
  double z_amp = 0.2;
  std::uint64_t seed = 0;
};

std::vector<Analogue> small_analogues() {
  std::vector<Analogue> out;
  const ops::ModelOperator m3 = dirichlet(3);

  out.push_back({"ap_fold", fb::build_fold_problem(m3, nl::nemitskii(nl::make_convex_profile(5, 15, 1), 3), 10.0),
                 6.0, 5, -40.0, 40.0, 512, 1e-9, -3.0, 0.5, 0.2, 101});
  out.push_back({"dolph_hammerstein",
                 fb::build_fold_problem(m3, nl::nemitskii(nl::make_convex_profile(11, 30, 1), 3), 20.5),
                 6.0, 5, -40.0, 40.0, 512, 1e-9, -5.0, 5.0, 0.3, 102});
  out.push_back({"sine_nonsimple",
                 fb::build_fold_problem(m3, nl::vertical_sine_map(m3.triple.phi, m3.triple.phi_star,
                                                                  m3.triple.primary_value),
                                        m3.triple.primary_value),
                 9.5, 7, -12.566370614359172, 12.566370614359172, 2048, 1e-9, -2.0, 2.0, 0.2, 103});

  ops::ProblemSpec bspec;
  bspec.kind = ops::OperatorKind::nondivergence_1d;
  bspec.grid_sizes = {3};
  bspec.parameters["diffusion"] = {1.0};
  bspec.parameters["drift"] = {5.0};
  const ops::ModelOperator bnv3 = ops::build_model_operator(bspec);
  const double lm = bnv3.triple.primary_value;
  const double gamma = 10.0;
  const ops::RFormProblem r3 = ops::to_r_form(bnv3, gamma);
  out.push_back({"bnv_nonselfadjoint",
                 fb::build_fold_problem(r3, nl::nemitskii(nl::make_convex_profile(
                                                (gamma + 10.0 - lm) / gamma,
                                                (gamma + 25.0 - lm) / gamma, gamma * 0.1),
                                            3)),
                 14.0, 6, -100.0, 100.0, 512, 1e-9, -4.0, 1.0, 0.2, 104});

  // dimension-2 operator with the cross-coupled block structure
  ops::ModelOperator pair;
  pair.L = DenseOperator(2, {8.0, -2.0, -2.0, 8.0});
  pair.triple.primary_value = 6.0;
  pair.triple.gap_value = 10.0;
  pair.triple.phi = {std::sqrt(0.5), std::sqrt(0.5)};
  pair.triple.phi_star = pair.triple.phi;
  out.push_back({"coupled_system",
                 fb::build_fold_problem(pair, nl::nemitskii(nl::make_convex_profile(5, 9, 1), 2)),
                 5.0, 6, -30.0, 30.0, 256, 1e-9, -3.0, 0.5, 0.2, 105});

  DenseOperator A(3);
  for (int i = 0; i < 3; ++i) {
    A(i, i) = 1.075;
    if (i + 1 < 3) {
      A(i, i + 1) = 0.0375;
      A(i + 1, i) = 0.0375;
    }
  }
  out.push_back({"nonlocal_gradient",
                 fb::build_fold_problem(m3, nl::nonlocal_map(A, {1.1, 0.9, 1.05},
                                                             nl::make_convex_profile(4.5, 12, 1))),
                 5.0, 6, -40.0, 40.0, 512, 1e-9, -3.0, 0.5, 0.2, 106});
  return out;
}

}  // namespace

int main() {
  std::map<std::string, DemoRun> demos;
  for (const std::string& name : cli::demo_names()) demos.emplace(name, run_demo(name));

  // 1. three-point Dirichlet spectrum and ground state match the closed forms
  guarded(1, "spectral_triple_exact", [&] {
    const auto t0 = Clock::now();
    const ops::ModelOperator m3 = dirichlet(3);
    const double s2 = std::sqrt(2.0);
    const Vec want = {16.0 * (2.0 - s2), 32.0, 16.0 * (2.0 + s2)};
    const EigenDecomposition eig = symmetric_eigendecompose(m3.L);
    double eig_err = 0.0;
    for (int i = 0; i < 3; ++i) eig_err = std::max(eig_err, std::abs(eig.eigenvalues[i] - want[i]));
    const Vec ground = normalized({s2 / 2.0, 1.0, s2 / 2.0});
    double vec_err = 0.0;
    for (int i = 0; i < 3; ++i) vec_err = std::max(vec_err, std::abs(m3.triple.phi[i] - ground[i]));
    const double prim_err = std::abs(m3.triple.primary_value - want[0]);
    const double secs = seconds_since(t0);
    line(1, "spectral_triple_exact",
         eig_err <= 1e-9 && vec_err <= 1e-9 && prim_err <= 1e-9 && secs < 1.0,
         fmt("eig err %.2e, ground err %.2e, %.3fs", std::max(eig_err, prim_err), vec_err, secs));
  });

  // 2. conformal image realizes the spectral map gamma / (lambda - lambda_m + gamma)
  guarded(2, "conformal_spectrum_map", [&] {
    const ops::ModelOperator m3 = dirichlet(3);
    const double gamma = 10.0;
    const ops::RFormProblem r3 = ops::to_r_form(m3, gamma);
    const Vec lam = symmetric_eigendecompose(m3.L).eigenvalues;
    Vec want;
    for (double l : lam) want.push_back(gamma / (l - m3.triple.primary_value + gamma));
    std::sort(want.begin(), want.end());
    const Vec got = symmetric_eigendecompose(r3.T).eigenvalues;
    double map_err = 0.0;
    for (std::size_t i = 0; i < want.size(); ++i)
      map_err = std::max(map_err, std::abs(got[i] - want[i]));
    const double radius_err = std::abs(r3.triple.primary_value - 1.0);
    line(2, "conformal_spectrum_map", map_err <= 1e-8 && radius_err <= 1e-10,
         fmt("map err %.2e (tol 1e-8), radius err %.2e (tol 1e-10)", map_err, radius_err));
  });

  // 3. centered slice iteration contracts at the certified 5/22 rate
  guarded(3, "slice_contraction_rate", [&] {
    const ops::ModelOperator m3 = dirichlet(3);
    const fb::FoldProblem prob =
        fb::build_fold_problem(m3, nl::nemitskii(nl::make_convex_profile(5, 15, 1), 3), 10.0);
    const auto t0 = Clock::now();
    const Vec zero(3, 0.0);
    const fb::Fiber f0 = fb::trace_fiber(prob, zero, -40.0, 40.0, 512);
    const double secs = seconds_since(t0);
    std::mt19937_64 rng(33);
    const fb::Fiber f1 = fb::trace_fiber(prob, random_w(rng, prob, 1.0), -40.0, 40.0, 512);
    const double bound = 5.0 / 22.0 + 0.05;
    const double worst = std::max(f0.max_observed_ratio, f1.max_observed_ratio);
    line(3, "slice_contraction_rate", worst <= bound && secs < 5.0,
         fmt("max step ratio %.4f <= %.4f, 512 samples in %.3fs", worst, bound, secs));
  });

  // 4. the flagship fold demo: verdict, asymptotic slopes, 2/1/0 counts, budget
  guarded(4, "global_fold_demo", [&] {
    const DemoRun& ap = demos.at("ap_fold");
    const cli::Scenario sc = cli::build_scenario(ap.cfg);
    const double lm = sc.lambda_m;
    const auto& cls = *ap.rr.classification;
    const bool folded = cls.verdict == fb::FoldVerdict::fold_down;
    const double want_l = lm - 5.0, want_r = lm - 15.0;
    const double rel_l = std::abs(cls.end_slope_left - want_l) / std::abs(want_l);
    const double rel_r = std::abs(cls.end_slope_right - want_r) / std::abs(want_r);
    const auto& sv = ap.rr.solves;
    const bool counts = sv.size() == 3 && sv[0].count == 2 && sv[1].count == 1 &&
                        sv[2].count == 0 && sv[1].solutions.size() == 1 &&
                        sv[1].solutions[0].index == 0;
    line(4, "global_fold_demo",
         folded && rel_l <= 0.05 && rel_r <= 0.05 && counts && ap.seconds < 30.0,
         fmt("%s, slope errs %.2f%%/%.2f%%, counts %d/%d/%d, %.1fs", fb::verdict_name(cls.verdict),
             100 * rel_l, 100 * rel_r, sv.size() > 0 ? sv[0].count : -1,
             sv.size() > 1 ? sv[1].count : -1, sv.size() > 2 ? sv[2].count : -1, ap.seconds));
  });

  // 5. twenty random two-preimage targets: strict order, indices cancel
  guarded(5, "two_preimage_structure", [&] {
    const DemoRun& ap = demos.at("ap_fold");
    const cli::Scenario sc = cli::build_scenario(ap.cfg);
    double crest_h = -1e300;
    for (const auto& c : ap.rr.critical_points) crest_h = std::max(crest_h, c.h);
    std::mt19937_64 rng(2026);
    int violations = 0;
    for (int k = 0; k < 20; ++k) {
      const Vec z = k < 10 ? Vec(std::size_t(sc.prob.dim()), 0.0) : random_w(rng, sc.prob, 0.3);
      const double h = crest_h - 1.0 - 0.35 * k;
      const fb::SolveReport rep = fb::solve_preimages(sc.prob, target_at(sc.prob, z, h), -200.0,
                                                      200.0, 2048, 1e-6);
      const bool ordered = rep.ordering.size() == 1 &&
                           (rep.ordering[0].outcome == fb::OrderOutcome::strictly_less ||
                            rep.ordering[0].outcome == fb::OrderOutcome::strictly_greater);
      const bool indices = rep.count == 2 && std::abs(rep.solutions[0].index) == 1 &&
                           rep.solutions[0].index + rep.solutions[1].index == 0;
      if (!(ordered && indices)) ++violations;
    }
    line(5, "two_preimage_structure", violations == 0,
         fmt("%d/20 targets violated strict order or index cancellation", violations));
  });

  // 6. discrete height slopes agree with the slice spectrum sign on every demo
  guarded(6, "height_slope_sign_identity", [&] {
    int mismatches = 0;
    std::string per;
    for (const auto& [name, d] : demos) {
      const int m = d.rr.classification ? d.rr.classification->handr_mismatches : -1;
      mismatches += std::max(m, 0);
      per += (per.empty() ? "" : " ") + name.substr(0, 4) + "=" + std::to_string(m);
    }
    line(6, "height_slope_sign_identity", mismatches == 0, "mismatches " + per);
  });

  // 7. the oscillating scalar model reproduces t sin t and defeats simplicity
  guarded(7, "oscillating_heights", [&] {
    const DemoRun& sine = demos.at("sine_nonsimple");
    double err = 0.0;
    const auto& f = *sine.rr.fiber;
    for (std::size_t k = 0; k < f.t_samples.size(); ++k)
      err = std::max(err, std::abs(f.h_samples[k] - f.t_samples[k] * std::sin(f.t_samples[k])));
    const bool nonsimple = sine.rr.classification->verdict == fb::FoldVerdict::non_simple;
    const int count = sine.rr.solves.empty() ? 0 : sine.rr.solves[0].count;
    line(7, "oscillating_heights", err <= 1e-8 && nonsimple && count >= 3,
         fmt("max height err %.2e (tol 1e-8), %s, %d preimages of the unit height", err,
             fb::verdict_name(sine.rr.classification->verdict), count));
  });

  // 8. multistart oracle agrees with the fiber engine on every small analogue
  guarded(8, "oracle_equivalence", [&] {
    std::string per;
    int total = 0, matched = 0;
    for (const Analogue& a : small_analogues()) {
      std::mt19937_64 rng(a.seed);
      std::uniform_real_distribution<double> hgt(a.h_lo, a.h_hi);
      int good = 0;
      for (int k = 0; k < 10; ++k) {
        const Vec z = random_w(rng, a.prob, a.z_amp);
        const double h = hgt(rng);
        const verify::Box box{Vec(std::size_t(a.prob.dim()), -a.box_half),
                              Vec(std::size_t(a.prob.dim()), a.box_half)};
        const verify::OracleReport rep = verify::brute_force_oracle(
            a.prob, target_at(a.prob, z, h), box, a.grid, a.t_min, a.t_max, a.nt, a.tol);
        good += rep.match ? 1 : 0;
      }
      total += 10;
      matched += good;
      per += (per.empty() ? "" : " ") + a.name.substr(0, 4) + "=" + std::to_string(good);
    }
    line(8, "oracle_equivalence", matched == total,
         fmt("%d/%d matched (count and locations to 1e-6): %s", matched, total, per.c_str()));
  });

  // 9. strictly monotone scenario inverts uniquely on random targets
  guarded(9, "homeomorphism_solves", [&] {
    const DemoRun& dolph = demos.at("dolph_hammerstein");
    const bool homeo = dolph.rr.classification->verdict == fb::FoldVerdict::homeomorphism;
    int unique = 0;
    for (const auto& r : dolph.rr.solves) unique += r.count == 1 ? 1 : 0;
    line(9, "homeomorphism_solves",
         homeo && dolph.rr.solves.size() == 50 && unique == int(dolph.rr.solves.size()),
         fmt("%s, %d/%zu targets with exactly one preimage", fb::verdict_name(dolph.rr.classification->verdict),
             unique, dolph.rr.solves.size()));
  });

  // 10. drift operator: certified conformal image, clean hypotheses above the
  //     slope threshold, and a finished fold run inside the budget
  guarded(10, "nonselfadjoint_pipeline", [&] {
    const DemoRun& bnv = demos.at("bnv_nonselfadjoint");
    const cli::Scenario sc = cli::build_scenario(bnv.cfg);
    const double radius_err = std::abs(sc.rform->triple.primary_value - 1.0);
    const auto pos = cones::positivity_class(sc.rform->T);
    const bool certified = radius_err <= 1e-10 && pos.preserving && pos.ergodic;
    const double threshold = sc.lambda_m - bnv.cfg.a;  // gamma above this keeps the floor positive
    bool clean = true;
    std::string per;
    for (double gamma : {threshold + 1.0, 10.0, 50.0}) {
      cli::ScenarioConfig cfg2 = bnv.cfg;
      cfg2.gamma = gamma;
      const cli::Scenario s2 = cli::build_scenario(cfg2);
      const verify::HypothesisReport rep = verify::check_r_hypotheses(s2.prob, std::nullopt, 80, 4);
      clean = clean && rep.pass;
      per += fmt("%sg=%.1f:%s", per.empty() ? "" : " ", gamma, rep.pass ? "ok" : "VIOLATED");
    }
    const bool folded = bnv.rr.classification->verdict == fb::FoldVerdict::fold_down;
    line(10, "nonselfadjoint_pipeline",
         certified && clean && folded && bnv.seconds < 60.0,
         fmt("radius err %.1e, %s, %s, %.1fs", radius_err, per.c_str(),
             fb::verdict_name(bnv.rr.classification->verdict), bnv.seconds));
  });

  // 11. coupling shifts the primary eigenvalue by exactly alpha; the fold
  //     pipeline runs unchanged at doubled dimension
  guarded(11, "coupled_reduction", [&] {
    const DemoRun& cp = demos.at("coupled_system");
    const cli::Scenario sc = cli::build_scenario(cp.cfg);
    const ops::ModelOperator base = dirichlet(15);
    const double shift_err = std::abs(sc.lambda_m - (base.triple.primary_value - 2.0));
    const bool folded = cp.rr.classification->verdict == fb::FoldVerdict::fold_down;
    const auto& sv = cp.rr.solves;
    const bool counts = sv.size() == 3 && sv[0].count == 2 && sv[1].count == 1 && sv[2].count == 0;
    line(11, "coupled_reduction",
         shift_err <= 1e-9 && sc.prob.dim() == 30 && folded && counts,
         fmt("shift err %.2e (tol 1e-9), dim %d, %s with 2/1/0 counts", shift_err, sc.prob.dim(),
             fb::verdict_name(cp.rr.classification->verdict)));
  });

  std::printf("acceptance: %d/11 criteria passed\n", 11 - g_failed);
  return g_failed == 0 ? 0 : 1;
}
