#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "foldlab/dense.hpp"
#include "foldlab/fibers.hpp"

namespace foldlab::verify {

// One sampled counterexample: which sub-check tripped, on which sample, the
// inputs that produced it, and the measured quantity against its limit.
// sample = -1 marks problem-level checks that need no sample inputs.
struct Violation {
  int sample = 0;
  std::string check;
  std::vector<Vec> inputs;
  double measured = 0.0;
  double limit = 0.0;
};

// Sampled hypothesis audit. Sampling never proves a hypothesis: a clean
// report only means no violation was found in `samples` draws. margins hold
// the worst slack seen per sub-check; a nonpositive slack pairs with a
// recorded violation.
struct HypothesisReport {
  std::string hypothesis;
  int samples = 0;
  std::vector<Violation> violations;  // ascending sample index
  std::map<std::string, double> margins;
  bool pass = false;  // <=> violations.empty()
  std::string summary;
};

// Degree bookkeeping at a regular point. parity_count: negative eigenvalues
// of DF(u) (m-form) or eigenvalues of J(Tu) T above one (r-form); the index
// is +1 exactly when the parity is even and must agree with sign(lambda).
struct IndexReport {
  Vec u;
  double lambda_value = 0.0;
  int index = 0;
  int parity_count = 0;
  bool sign_consistent = false;
};

// Axis-aligned box of Newton starting points for the multistart oracle.
struct Box {
  Vec lo;
  Vec hi;
};

// Independent preimage count, compared against the fiber engine's answer.
struct OracleReport {
  Vec target;
  std::vector<Vec> oracle_solutions;  // ascending height
  std::vector<Vec> engine_solutions;
  double max_pair_distance = 0.0;
  bool match = false;  // same count and pairwise distance <= 1e-6 after pairing
};

struct RDecomposition {
  DenseOperator A;
  DenseOperator B;
};

// Per-sample split G(u,v) = A + B audited against the positivity class:
// s_floor <= A T <= T entrywise with s_floor entrywise positive, B >= 0,
// and ||B|| <= b_cap.
struct RDecompositionScheme {
  DenseOperator s_floor;
  double b_cap = 0.0;
  std::function<RDecomposition(const Vec&, const Vec&)> split;
};

// min(q,1) / remainder split of the scalar profile, floor a * T and budget
// b - 1 from the profile slopes. Throws SupplierMissing for map kinds
// without a componentwise profile to split.
RDecompositionScheme canonical_scheme(const fibers::FoldProblem& prob);

// m-form audit on seeded uniform samples in [-3,3]^n: the W-restricted
// linearization norm against slope_bound (with slope_bound below the
// certified 1 / w_solve_norm), symmetric-perturbation membership, strict
// positivity of the convexity triple pairing, and entrywise monotonicity of
// the Jacobian along positive increments.
HypothesisReport check_m_hypotheses(const fibers::FoldProblem& prob, int n_samples,
                                    std::uint64_t seed);

// r-form audit: decomposition checks per `scheme` (canonical when absent),
// at most one eigenvalue of G(u,v) T above one, and entrywise positivity of
// linearization increments along ordered sample quadruples.
HypothesisReport check_r_hypotheses(const fibers::FoldProblem& prob,
                                    std::optional<RDecompositionScheme> scheme, int n_samples,
                                    std::uint64_t seed);

// Newton on F(u) = g from every node of a grid_per_axis^dim lattice in
// `box`, deduplicated at 1e-6 and restricted to heights inside
// [t_min, t_max] (NaN bounds derive a window from the box heights), then
// compared against solve_preimages on the same window. Throws
// DimensionTooLarge above dimension 3.
OracleReport brute_force_oracle(const fibers::FoldProblem& prob, const Vec& g, const Box& box,
                                int grid_per_axis,
                                double t_min = std::numeric_limits<double>::quiet_NaN(),
                                double t_max = std::numeric_limits<double>::quiet_NaN(),
                                int nt = 1024, double tol = 1e-9);

// Throws CriticalPoint when |lambda(u)| <= tol.
IndexReport index_at(const fibers::FoldProblem& prob, const Vec& u, double tol = 1e-8);

}  // namespace foldlab::verify
