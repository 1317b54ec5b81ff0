#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "foldlab/errors.hpp"
#include "scenario.hpp"

namespace cli = foldlab::cli;

namespace {

struct Overrides {
  std::string out;
  std::uint64_t seed = 0;
  int nt = 0;
  double t_min = 0.0, t_max = 0.0, tol = 0.0;
  int jobs = 0;
};

// Only flags the user actually passed override the config / demo defaults.
void attach_overrides(CLI::App* cmd, Overrides& ov) {
  cmd->add_option("--out", ov.out, "output directory");
  cmd->add_option("--seed", ov.seed, "RNG seed");
  cmd->add_option("--nt", ov.nt, "fiber sample count");
  cmd->add_option("--t-min", ov.t_min, "window lower end");
  cmd->add_option("--t-max", ov.t_max, "window upper end");
  cmd->add_option("--tol", ov.tol, "solve tolerance");
  cmd->add_option("--jobs", ov.jobs, "worker threads");
}

void apply_overrides(const CLI::App* cmd, const Overrides& ov, cli::ScenarioConfig& cfg) {
  if (cmd->count("--out")) cfg.out_dir = ov.out;
  if (cmd->count("--seed")) cfg.seed = ov.seed;
  if (cmd->count("--nt")) cfg.nt = ov.nt;
  if (cmd->count("--t-min")) cfg.t_min = ov.t_min;
  if (cmd->count("--t-max")) cfg.t_max = ov.t_max;
  if (cmd->count("--tol")) cfg.tol = ov.tol;
  if (cmd->count("--jobs")) cfg.jobs = ov.jobs;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fold geometry toolkit: spectra, fibers, preimage counts"};
  app.require_subcommand(1);

  const std::vector<std::string> stages = {"spectrum", "fiber", "solve", "classify", "verify"};
  std::map<const CLI::App*, std::string> stage_of;
  std::string config_path;
  std::string demo_name;
  Overrides ov;

  for (const auto& stage : stages) {
    CLI::App* cmd = app.add_subcommand(stage, "run the " + stage + " stage of a scenario");
    cmd->add_option("--config", config_path, "scenario config (.ini or .json)")->required();
    attach_overrides(cmd, ov);
    stage_of[cmd] = stage;
  }
  CLI::App* demo = app.add_subcommand("demo", "run a built-in scenario end to end");
  demo->add_option("name", demo_name, "one of: ap_fold, dolph_hammerstein, sine_nonsimple, "
                                      "bnv_nonselfadjoint, coupled_system, nonlocal_gradient")
      ->required();
  attach_overrides(demo, ov);
  stage_of[demo] = "demo";

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // --help and friends exit clean
  }

  const CLI::App* cmd = app.get_subcommands().front();
  const std::string stage = stage_of.at(cmd);

  cli::ScenarioConfig cfg;
  try {
    if (stage == "demo") {
      const std::string out = cmd->count("--out") ? ov.out : "out/" + demo_name;
      cfg = cli::demo_config(demo_name, out);
    } else {
      cfg = cli::load_config(config_path);
    }
    apply_overrides(cmd, ov, cfg);
    cli::build_scenario(cfg);  // surface construction problems as usage errors
  } catch (const foldlab::Error& e) {
    std::fprintf(stderr, "foldlab: %s\n", e.what());
    return 2;
  }

  try {
    const cli::RunResults rr = cli::run_scenario(stage, cfg);
    for (const auto& e : rr.expectations)
      std::printf("%-22s %s  %s\n", e.name.c_str(), e.pass ? "pass" : "FAIL", e.detail.c_str());
    std::printf("wrote %zu file(s) to %s\n", rr.files.size() + 1, cfg.out_dir.c_str());
    return rr.exit_code;
  } catch (const foldlab::Error& e) {
    std::fprintf(stderr, "foldlab: scenario '%s' failed: %s\n", cfg.scenario_name.c_str(),
                 e.what());
    return 1;
  }
}
