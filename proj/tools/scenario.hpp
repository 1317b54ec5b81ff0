#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "foldlab/fibers.hpp"
#include "foldlab/operators.hpp"
#include "foldlab/verify.hpp"
#include "json.hpp"

// Batch front door: scenario configs, built-in demos, pipeline runners and
// their CSV/JSON artifacts. Everything here is deterministic for a fixed
// config and seed; the only varying manifest field is the wall clock.
namespace foldlab::cli {

using Json = nlohmann::ordered_json;

struct ScenarioConfig {
  // [operator]
  std::string op_kind = "dirichlet_laplacian_1d";
  std::vector<int> grid;
  std::vector<double> extents;
  std::map<std::string, std::vector<double>> op_params;  // alpha, s, diffusion, drift, potential
  std::string base_kind;  // coupled_system / fractional_power source
  std::vector<int> base_grid;

  // [nonlinearity]
  std::string map_kind = "nemitskii";  // zero | nemitskii | nonlocal | vertical_sine
  double a = 0.0;
  double b = 1.0;
  double kappa = 1.0;
  std::string matrix_path;  // nonlocal A, whitespace table, dim x dim
  std::string weight_path;  // nonlocal g, dim entries

  // [form] m_form: gamma = centering (NaN = map default); r_form: conformal
  // parameter, required positive. Nemitskii slopes are always given in the
  // direct form; the compact form conjugates them internally.
  std::string form = "m_form";
  double gamma = std::numeric_limits<double>::quiet_NaN();

  // [run]
  double t_min = -50.0;
  double t_max = 50.0;
  int nt = 1024;
  double tol = 1e-9;
  double slice_tol = 1e-8;
  double refine_tol = 1e-3;
  std::uint64_t seed = 1;
  int jobs = 1;
  int samples = 200;                    // hypothesis-check sample count
  std::vector<double> target_heights;   // absolute solve targets along phi
  std::vector<double> crest_offsets;    // solve targets at h_crest + offset
  int random_targets = 0;               // seeded full-vector targets
  double target_amp = 2.0;
  double box = 0.0;      // oracle box half-width (0 = skip)
  int grid_per_axis = 0;  // oracle grid (0 = skip)
  std::string expect;     // optional verdict assertion

  // [output]
  std::string out_dir = "out";

  std::string scenario_name = "custom";
  std::string base_dir;  // resolves relative asset paths (config location)
};

// Parse + validate. Format by extension/content: .json or leading '{' is
// JSON, anything else the sectioned key = value format. Throws Io, Parse
// (with file:line diagnostics), Validation (naming every unknown key).
ScenarioConfig load_config(const std::string& path);
ScenarioConfig config_from_json(const Json& j, const std::string& where);

Json echo_config(const ScenarioConfig& cfg);            // defaults filled
std::string config_to_ini(const ScenarioConfig& cfg);   // round-trippable

// Assembled problem plus the spectral data the artifacts report.
struct Scenario {
  ScenarioConfig cfg;
  ops::ModelOperator model;
  std::optional<ops::RFormProblem> rform;
  fibers::FoldProblem prob;
  double lambda_m = 0.0;  // bottom of the direct-form spectrum
};

Scenario build_scenario(const ScenarioConfig& cfg);

struct Expectation {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct RunResults {
  std::optional<fibers::Fiber> fiber;                    // anchored at z = 0
  std::optional<fibers::FoldClassification> classification;
  std::vector<fibers::CriticalPoint> critical_points;
  std::vector<fibers::SolveReport> solves;
  std::optional<verify::HypothesisReport> hypotheses;
  std::optional<verify::OracleReport> oracle;
  std::vector<Expectation> expectations;
  std::map<std::string, std::string> files;  // artifact name -> bytes
  Json manifest;
  int exit_code = 0;
};

// Stages: spectrum | fiber | solve | classify | verify | demo (all stages +
// built-in expectations). Writes every artifact plus manifest.json into
// cfg.out_dir. Throws on module errors; exit_code 1 means an expectation or
// asserted verdict failed.
RunResults run_scenario(const std::string& command, const ScenarioConfig& cfg);

const std::vector<std::string>& demo_names();
// Pinned demo scenario; writes matrix/weight assets beside the config.
ScenarioConfig demo_config(const std::string& name, const std::string& out_dir);

std::uint64_t fnv1a64(const std::string& bytes);

}  // namespace foldlab::cli
