#include "scenario.hpp"

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "foldlab/cones.hpp"
#include "foldlab/errors.hpp"
#include "foldlab/nonlinear.hpp"

namespace foldlab::cli {

namespace fs = std::filesystem;
namespace fb = foldlab::fibers;
namespace nl = foldlab::nonlinear;

namespace {

constexpr const char* kVersion = "1.0.0";
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string num17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Err::Io, "cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Err::Io, "cannot write '" + path.string() + "'");
  out << bytes;
  if (!out) fail(Err::Io, "short write to '" + path.string() + "'");
}

std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

// --- config ingestion -------------------------------------------------------

// Scalar tokens become typed numbers so seeds round-trip exactly.
Json scalar_value(const std::string& tok) {
  if (tok.empty()) return Json(tok);
  const char* c = tok.c_str();
  char* end = nullptr;
  const bool has_dot = tok.find_first_of(".eE") != std::string::npos;
  if (!has_dot) {
    if (tok[0] != '-') {
      errno = 0;
      const unsigned long long u = std::strtoull(c, &end, 10);
      if (end == c + tok.size() && errno == 0) return Json(std::uint64_t(u));
    } else {
      errno = 0;
      const long long v = std::strtoll(c, &end, 10);
      if (end == c + tok.size() && errno == 0) return Json(std::int64_t(v));
    }
  }
  end = nullptr;
  const double d = std::strtod(c, &end);
  if (end == c + tok.size()) return Json(d);
  return Json(tok);
}

Json ini_value(const std::string& raw) {
  if (raw.find(',') == std::string::npos) return scalar_value(raw);
  Json arr = Json::array();
  std::size_t start = 0;
  while (start <= raw.size()) {
    const std::size_t comma = raw.find(',', start);
    const std::string tok =
        trim(comma == std::string::npos ? raw.substr(start) : raw.substr(start, comma - start));
    Json v = scalar_value(tok);
    if (v.is_string()) return Json(raw);  // not a numeric list after all
    arr.push_back(std::move(v));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return arr;
}

Json parse_ini(const std::string& text, const std::string& path) {
  Json root = Json::object();
  Json* section = nullptr;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string s = trim(line);
    if (s.empty() || s[0] == '#' || s[0] == ';') continue;
    const std::string at = path + ":" + std::to_string(lineno);
    if (s[0] == '[') {
      if (s.back() != ']') fail(Err::Parse, at + ": unterminated section header");
      const std::string name = trim(s.substr(1, s.size() - 2));
      if (name.empty()) fail(Err::Parse, at + ": empty section name");
      if (!root.contains(name)) root[name] = Json::object();
      section = &root[name];
      continue;
    }
    const std::size_t eq = s.find('=');
    if (eq == std::string::npos) fail(Err::Parse, at + ": expected 'key = value'");
    const std::string key = trim(s.substr(0, eq));
    const std::string val = trim(s.substr(eq + 1));
    if (key.empty()) fail(Err::Parse, at + ": empty key");
    if (!section) fail(Err::Parse, at + ": key '" + key + "' appears outside any [section]");
    (*section)[key] = ini_value(val);
  }
  return root;
}

double as_double(const Json& v, const std::string& ctx) {
  if (!v.is_number()) fail(Err::Validation, ctx + ": expected a number");
  return v.get<double>();
}

int as_int(const Json& v, const std::string& ctx) {
  const double d = as_double(v, ctx);
  if (d != std::floor(d) || std::abs(d) > 1e9) fail(Err::Validation, ctx + ": expected an integer");
  return int(d);
}

std::uint64_t as_u64(const Json& v, const std::string& ctx) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0)
    return std::uint64_t(v.get<std::int64_t>());
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (d >= 0.0 && d == std::floor(d)) return std::uint64_t(d);
  }
  fail(Err::Validation, ctx + ": expected a nonnegative integer");
}

std::string as_string(const Json& v, const std::string& ctx) {
  if (!v.is_string()) fail(Err::Validation, ctx + ": expected a string");
  return v.get<std::string>();
}

std::vector<double> as_double_list(const Json& v, const std::string& ctx) {
  if (v.is_number()) return {v.get<double>()};
  if (!v.is_array()) fail(Err::Validation, ctx + ": expected a number or list of numbers");
  std::vector<double> out;
  for (const auto& e : v) out.push_back(as_double(e, ctx));
  return out;
}

using Setter = std::function<void(const Json&, ScenarioConfig&, const std::string&)>;

const std::map<std::string, std::map<std::string, Setter>>& key_table() {
  auto dbl = [](double ScenarioConfig::* f) {
    return Setter([f](const Json& v, ScenarioConfig& c, const std::string& x) {
      c.*f = as_double(v, x);
    });
  };
  auto str = [](std::string ScenarioConfig::* f) {
    return Setter([f](const Json& v, ScenarioConfig& c, const std::string& x) {
      c.*f = as_string(v, x);
    });
  };
  auto param = [](const char* name) {
    return Setter([name](const Json& v, ScenarioConfig& c, const std::string& x) {
      c.op_params[name] = as_double_list(v, x);
    });
  };
  static const std::map<std::string, std::map<std::string, Setter>> table = {
      {"operator",
       {
           {"kind", str(&ScenarioConfig::op_kind)},
           {"n",
            [](const Json& v, ScenarioConfig& c, const std::string& x) {
              c.grid = {as_int(v, x)};
            }},
           {"nx",
            [](const Json& v, ScenarioConfig& c, const std::string& x) {
              c.grid.resize(2, 2);
              c.grid[0] = as_int(v, x);
            }},
           {"ny",
            [](const Json& v, ScenarioConfig& c, const std::string& x) {
              c.grid.resize(2, 2);
              c.grid[1] = as_int(v, x);
            }},
           {"extents",
            [](const Json& v, ScenarioConfig& c, const std::string& x) {
              c.extents = as_double_list(v, x);
            }},
           {"alpha", param("alpha")},
           {"s", param("s")},
           {"diffusion", param("diffusion")},
           {"drift", param("drift")},
           {"potential", param("potential")},
           {"base_kind", str(&ScenarioConfig::base_kind)},
           {"base_n",
            [](const Json& v, ScenarioConfig& c, const std::string& x) {
              c.base_grid = {as_int(v, x)};
            }},
       }},
      {"nonlinearity",
       {
           {"kind", str(&ScenarioConfig::map_kind)},
           {"a", dbl(&ScenarioConfig::a)},
           {"b", dbl(&ScenarioConfig::b)},
           {"kappa", dbl(&ScenarioConfig::kappa)},
           {"matrix", str(&ScenarioConfig::matrix_path)},
           {"weight", str(&ScenarioConfig::weight_path)},
       }},
      {"form",
       {
           {"kind", str(&ScenarioConfig::form)},
           {"gamma",
            [](const Json& v, ScenarioConfig& c, const std::string& x) {
              c.gamma = v.is_null() ? kNaN : as_double(v, x);
            }},
       }},
      {"run",
       {
           {"t_min", dbl(&ScenarioConfig::t_min)},
           {"t_max", dbl(&ScenarioConfig::t_max)},
           {"nt",
            [](const Json& v, ScenarioConfig& c, const std::string& x) {
              c.nt = as_int(v, x);
            }},
           {"tol", dbl(&ScenarioConfig::tol)},
           {"slice_tol", dbl(&ScenarioConfig::slice_tol)},
           {"refine_tol", dbl(&ScenarioConfig::refine_tol)},
           {"seed",
            [](const Json& v, ScenarioConfig& c, const std::string& x) {
              c.seed = as_u64(v, x);
            }},
           {"jobs",
            [](const Json& v, ScenarioConfig& c, const std::string& x) {
              c.jobs = as_int(v, x);
            }},
           {"samples",
            [](const Json& v, ScenarioConfig& c, const std::string& x) {
              c.samples = as_int(v, x);
            }},
           {"target_heights",
            [](const Json& v, ScenarioConfig& c, const std::string& x) {
              c.target_heights = as_double_list(v, x);
            }},
           {"crest_offsets",
            [](const Json& v, ScenarioConfig& c, const std::string& x) {
              c.crest_offsets = as_double_list(v, x);
            }},
           {"random_targets",
            [](const Json& v, ScenarioConfig& c, const std::string& x) {
              c.random_targets = as_int(v, x);
            }},
           {"target_amp", dbl(&ScenarioConfig::target_amp)},
           {"box", dbl(&ScenarioConfig::box)},
           {"grid",
            [](const Json& v, ScenarioConfig& c, const std::string& x) {
              c.grid_per_axis = as_int(v, x);
            }},
           {"expect", str(&ScenarioConfig::expect)},
       }},
      {"output",
       {
           {"dir", str(&ScenarioConfig::out_dir)},
       }},
  };
  return table;
}

void validate_semantics(const ScenarioConfig& c, const std::string& where) {
  auto bad = [&](const std::string& msg) { fail(Err::Validation, where + ": " + msg); };
  static const std::set<std::string> forms = {"m_form", "r_form"};
  static const std::set<std::string> maps = {"zero", "nemitskii", "nonlocal", "vertical_sine"};
  static const std::set<std::string> verdicts = {"homeomorphism", "fold_down", "fold_up",
                                                 "non_simple", "inconclusive"};
  if (!forms.count(c.form)) bad("form.kind: unknown form '" + c.form + "'");
  if (!maps.count(c.map_kind)) bad("nonlinearity.kind: unknown map kind '" + c.map_kind + "'");
  if (!c.expect.empty() && !verdicts.count(c.expect))
    bad("run.expect: unknown verdict '" + c.expect + "'");
  if (c.nt < 3) bad("run.nt: need at least 3 samples");
  if (!(c.t_min < c.t_max)) bad("run: need t_min < t_max");
  if (c.jobs < 1) bad("run.jobs: need at least 1");
  if (c.samples < 1) bad("run.samples: need at least 1");
  if (c.random_targets < 0) bad("run.random_targets: must be nonnegative");
  if (!(c.tol > 0.0) || !(c.slice_tol > 0.0) || !(c.refine_tol > 0.0))
    bad("run: tolerances must be positive");
}

}  // namespace

ScenarioConfig config_from_json(const Json& j, const std::string& where) {
  if (!j.is_object()) fail(Err::Parse, where + ": top level must be an object of sections");
  ScenarioConfig cfg;
  std::vector<std::string> unknown;
  const auto& table = key_table();
  for (const auto& [section, body] : j.items()) {
    const auto sec = table.find(section);
    if (sec == table.end()) {
      unknown.push_back(section + " (unknown section)");
      continue;
    }
    if (!body.is_object()) fail(Err::Parse, where + ": [" + section + "] must hold key = value pairs");
    for (const auto& [key, value] : body.items()) {
      const auto setter = sec->second.find(key);
      if (setter == sec->second.end()) {
        unknown.push_back(section + "." + key);
        continue;
      }
      setter->second(value, cfg, where + ": " + section + "." + key);
    }
  }
  if (!unknown.empty()) {
    std::string list;
    for (const auto& k : unknown) list += (list.empty() ? "" : ", ") + k;
    fail(Err::Validation, where + ": unknown key(s): " + list);
  }
  validate_semantics(cfg, where);
  return cfg;
}

ScenarioConfig load_config(const std::string& path) {
  const std::string text = read_file(path);
  const std::string lead = trim(text.substr(0, std::min<std::size_t>(64, text.size())));
  Json tree;
  const bool json_like =
      (!lead.empty() && lead[0] == '{') || fs::path(path).extension() == ".json";
  if (json_like) {
    try {
      tree = Json::parse(text);
    } catch (const Json::parse_error& e) {
      fail(Err::Parse, path + ": " + e.what());
    }
  } else {
    tree = parse_ini(text, path);
  }
  ScenarioConfig cfg = config_from_json(tree, path);
  cfg.base_dir = fs::path(path).parent_path().string();
  return cfg;
}

Json echo_config(const ScenarioConfig& c) {
  Json op;
  op["kind"] = c.op_kind;
  if (c.grid.size() == 1) op["n"] = c.grid[0];
  if (c.grid.size() == 2) {
    op["nx"] = c.grid[0];
    op["ny"] = c.grid[1];
  }
  if (!c.extents.empty()) op["extents"] = c.extents;
  for (const auto& [k, v] : c.op_params) op[k] = v.size() == 1 ? Json(v[0]) : Json(v);
  if (!c.base_kind.empty()) op["base_kind"] = c.base_kind;
  if (!c.base_grid.empty()) op["base_n"] = c.base_grid[0];

  Json map;
  map["kind"] = c.map_kind;
  if (c.map_kind == "nemitskii" || c.map_kind == "nonlocal") {
    map["a"] = c.a;
    map["b"] = c.b;
    map["kappa"] = c.kappa;
  }
  if (!c.matrix_path.empty()) map["matrix"] = c.matrix_path;
  if (!c.weight_path.empty()) map["weight"] = c.weight_path;

  Json form;
  form["kind"] = c.form;
  form["gamma"] = std::isnan(c.gamma) ? Json(nullptr) : Json(c.gamma);

  Json run;
  run["t_min"] = c.t_min;
  run["t_max"] = c.t_max;
  run["nt"] = c.nt;
  run["tol"] = c.tol;
  run["slice_tol"] = c.slice_tol;
  run["refine_tol"] = c.refine_tol;
  run["seed"] = c.seed;
  run["jobs"] = c.jobs;
  run["samples"] = c.samples;
  run["target_heights"] = c.target_heights;
  run["crest_offsets"] = c.crest_offsets;
  run["random_targets"] = c.random_targets;
  run["target_amp"] = c.target_amp;
  run["box"] = c.box;
  run["grid"] = c.grid_per_axis;
  run["expect"] = c.expect;

  Json out;
  out["dir"] = c.out_dir;

  Json j;
  j["operator"] = std::move(op);
  j["nonlinearity"] = std::move(map);
  j["form"] = std::move(form);
  j["run"] = std::move(run);
  j["output"] = std::move(out);
  return j;
}

std::string config_to_ini(const ScenarioConfig& c) {
  std::ostringstream o;
  auto num = [](const Json& v) -> std::string {
    if (v.is_number_float()) return num17(v.get<double>());
    return v.dump();
  };
  const Json echo = echo_config(c);
  for (const auto& [section, body] : echo.items()) {
    o << "[" << section << "]\n";
    for (const auto& [key, value] : body.items()) {
      if (value.is_null()) continue;
      if (value.is_string()) {
        if (!value.get<std::string>().empty()) o << key << " = " << value.get<std::string>() << "\n";
      } else if (value.is_array()) {
        if (value.empty()) continue;
        o << key << " = ";
        for (std::size_t i = 0; i < value.size(); ++i) o << (i ? ", " : "") << num(value[i]);
        o << "\n";
      } else {
        o << key << " = " << num(value) << "\n";
      }
    }
    o << "\n";
  }
  return o.str();
}

// --- scenario assembly ------------------------------------------------------

namespace {

std::string resolve_path(const ScenarioConfig& cfg, const std::string& p) {
  fs::path path(p);
  if (path.is_absolute() || cfg.base_dir.empty()) return p;
  return (fs::path(cfg.base_dir) / path).string();
}

std::vector<double> read_numbers(const std::string& path, std::size_t want,
                                 const std::string& what) {
  std::istringstream in(read_file(path));
  std::vector<double> v;
  double x = 0.0;
  while (in >> x) v.push_back(x);
  if (v.size() != want)
    fail(Err::Parse, path + ": " + what + " needs " + std::to_string(want) + " numbers, got " +
                         std::to_string(v.size()));
  return v;
}

ops::ProblemSpec spec_from_config(const ScenarioConfig& cfg) {
  ops::ProblemSpec spec;
  spec.kind = ops::kind_from_name(cfg.op_kind);
  spec.grid_sizes = cfg.grid;
  spec.extents = cfg.extents;
  for (const auto& [k, v] : cfg.op_params) spec.parameters[k] = v;
  if (!cfg.base_kind.empty() || !cfg.base_grid.empty()) {
    auto base = std::make_shared<ops::ProblemSpec>();
    base->kind = ops::kind_from_name(cfg.base_kind.empty() ? cfg.op_kind : cfg.base_kind);
    base->grid_sizes = cfg.base_grid;
    spec.base = std::move(base);
  }
  return spec;
}

}  // namespace

Scenario build_scenario(const ScenarioConfig& cfg) {
  Scenario s;
  s.cfg = cfg;
  s.model = ops::build_model_operator(spec_from_config(cfg));
  s.lambda_m = s.model.triple.primary_value;
  const int n = s.model.L.dim();
  const bool r_form = cfg.form == "r_form";

  nl::MapPtr P;
  if (cfg.map_kind == "zero") {
    P = nl::zero_map(n);
  } else if (cfg.map_kind == "nemitskii") {
    if (r_form) {
      if (!(cfg.gamma > 0.0))
        fail(Err::Validation, "form.gamma: the compact form needs a positive gamma");
      // slopes are stated in the direct form; the conformal change of
      // variables renormalizes them around 1 and scales the curvature
      P = nl::nemitskii(nl::make_convex_profile((cfg.gamma + cfg.a - s.lambda_m) / cfg.gamma,
                                                (cfg.gamma + cfg.b - s.lambda_m) / cfg.gamma,
                                                cfg.gamma * cfg.kappa),
                        n);
    } else {
      P = nl::nemitskii(nl::make_convex_profile(cfg.a, cfg.b, cfg.kappa), n);
    }
  } else if (cfg.map_kind == "nonlocal") {
    if (r_form) fail(Err::Validation, "the compact form supports zero and nemitskii maps");
    if (cfg.matrix_path.empty() || cfg.weight_path.empty())
      fail(Err::Validation, "nonlinearity: nonlocal maps need both matrix and weight paths");
    const auto entries =
        read_numbers(resolve_path(cfg, cfg.matrix_path), std::size_t(n) * n, "mixing matrix");
    const auto weights = read_numbers(resolve_path(cfg, cfg.weight_path), std::size_t(n), "weight");
    P = nl::nonlocal_map(DenseOperator(n, entries), weights,
                         nl::make_convex_profile(cfg.a, cfg.b, cfg.kappa));
  } else {  // vertical_sine
    if (r_form) fail(Err::Validation, "the compact form supports zero and nemitskii maps");
    P = nl::vertical_sine_map(s.model.triple.phi, s.model.triple.phi_star, s.lambda_m);
  }

  if (r_form) {
    if (!(cfg.gamma > 0.0))
      fail(Err::Validation, "form.gamma: the compact form needs a positive gamma");
    s.rform = ops::to_r_form(s.model, cfg.gamma);
    s.prob = fb::build_fold_problem(*s.rform, std::move(P));
  } else {
    double gc = cfg.gamma;
    if (std::isnan(gc) && cfg.map_kind == "vertical_sine") gc = s.lambda_m;
    s.prob = fb::build_fold_problem(s.model, std::move(P), gc);
  }
  return s;
}

// --- artifact serialization -------------------------------------------------

namespace {

Json vec_json(const Vec& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(x);
  return a;
}

Json triple_json(const Scenario& s) {
  Json t;
  t["form"] = fb::form_name(s.prob.form);
  t["dim"] = s.prob.dim();
  Json op;
  op["kind"] = s.cfg.op_kind;
  if (!s.cfg.grid.empty()) op["grid"] = s.cfg.grid;
  if (!s.cfg.base_kind.empty()) {
    op["base_kind"] = s.cfg.base_kind;
    op["base_n"] = s.cfg.base_grid.empty() ? Json(nullptr) : Json(s.cfg.base_grid[0]);
  }
  t["operator"] = std::move(op);
  t["lambda_m"] = s.lambda_m;
  if (s.rform) {
    t["spectral_radius"] = s.rform->triple.primary_value;
    t["subdominant_modulus"] = s.rform->triple.gap_value;
    t["gamma"] = s.rform->gamma;
    t["shift"] = s.rform->shift;
  } else {
    t["primary_value"] = s.model.triple.primary_value;
    t["gap_value"] = s.model.triple.gap_value;
  }
  t["phi"] = vec_json(s.prob.split.phi);
  t["phi_star"] = vec_json(s.prob.split.phi_star);
  return t;
}

std::string fiber_csv(const fb::Fiber& f) {
  const int n = f.w_samples.empty() ? 0 : int(f.w_samples[0].size());
  std::string out = "t,h,lambda,residual";
  for (int i = 0; i < n; ++i) out += ",w_" + std::to_string(i);
  out += "\n";
  for (std::size_t k = 0; k < f.t_samples.size(); ++k) {
    out += num17(f.t_samples[k]);
    out += ",";
    out += num17(f.h_samples[k]);
    out += ",";
    out += num17(f.lambda_samples[k]);
    out += ",";
    out += num17(f.residuals[k]);
    for (int i = 0; i < n; ++i) {
      out += ",";
      out += num17(f.w_samples[k][std::size_t(i)]);
    }
    out += "\n";
  }
  return out;
}

Json classification_json(const fb::FoldClassification& c) {
  Json j;
  j["verdict"] = fb::verdict_name(c.verdict);
  j["sign_changes"] = c.sign_changes;
  j["end_slope_left"] = c.end_slope_left;
  j["end_slope_right"] = c.end_slope_right;
  j["stabilized_left"] = c.stabilized_left;
  j["stabilized_right"] = c.stabilized_right;
  j["handr_mismatches"] = c.handr_mismatches;
  j["critical_ts"] = vec_json(c.critical_ts);
  return j;
}

Json classify_json(const Scenario& s, const fb::FoldClassification& c,
                   const std::vector<fb::CriticalPoint>& crits) {
  Json j = classification_json(c);
  Json cps = Json::array();
  for (const auto& cp : crits) {
    Json e;
    e["t"] = cp.t;
    e["h"] = cp.h;
    e["lambda"] = cp.lambda;
    cps.push_back(std::move(e));
  }
  j["critical_points"] = std::move(cps);
  Json w;
  w["t_min"] = s.cfg.t_min;
  w["t_max"] = s.cfg.t_max;
  w["nt"] = s.cfg.nt;
  j["window"] = std::move(w);
  j["refine_tol"] = s.cfg.refine_tol;
  return j;
}

Json solve_json(const Scenario& s, const std::vector<fb::SolveReport>& reps,
                const std::vector<std::string>& origins) {
  Json j;
  Json w;
  w["t_min"] = s.cfg.t_min;
  w["t_max"] = s.cfg.t_max;
  w["nt"] = s.cfg.nt;
  j["window"] = std::move(w);
  j["tol"] = s.cfg.tol;
  Json targets = Json::array();
  for (std::size_t i = 0; i < reps.size(); ++i) {
    const auto& r = reps[i];
    Json e;
    e["origin"] = origins[i];
    e["target"] = vec_json(r.target);
    e["target_height"] = r.target_height;
    e["z"] = vec_json(r.z);
    e["count"] = r.count;
    e["verdict"] = fb::verdict_name(r.classification.verdict);
    Json sols = Json::array();
    for (const auto& sol : r.solutions) {
      Json sj;
      sj["t"] = sol.t;
      sj["lambda"] = sol.lambda;
      sj["residual"] = sol.residual;
      sj["index"] = sol.index;
      sj["u"] = vec_json(sol.u);
      sols.push_back(std::move(sj));
    }
    e["solutions"] = std::move(sols);
    Json ords = Json::array();
    for (const auto& o : r.ordering) {
      Json oj;
      oj["i"] = o.i;
      oj["j"] = o.j;
      oj["outcome"] = fb::order_name(o.outcome);
      oj["min_gap"] = o.min_gap;
      ords.push_back(std::move(oj));
    }
    e["ordering"] = std::move(ords);
    targets.push_back(std::move(e));
  }
  j["targets"] = std::move(targets);
  return j;
}

Json hypothesis_json(const verify::HypothesisReport& r) {
  Json j;
  j["hypothesis"] = r.hypothesis;
  j["samples"] = r.samples;
  j["pass"] = r.pass;
  j["summary"] = r.summary;
  Json margins;
  for (const auto& [k, v] : r.margins) margins[k] = v;
  j["margins"] = std::move(margins);
  Json viols = Json::array();
  for (const auto& v : r.violations) {
    Json e;
    e["sample"] = v.sample;
    e["check"] = v.check;
    e["measured"] = v.measured;
    e["limit"] = v.limit;
    Json inputs = Json::array();
    for (const auto& in : v.inputs) inputs.push_back(vec_json(in));
    e["inputs"] = std::move(inputs);
    viols.push_back(std::move(e));
  }
  j["violations"] = std::move(viols);
  return j;
}

Json oracle_json(const verify::OracleReport& r) {
  Json j;
  j["target"] = vec_json(r.target);
  Json os = Json::array();
  for (const auto& u : r.oracle_solutions) os.push_back(vec_json(u));
  Json es = Json::array();
  for (const auto& u : r.engine_solutions) es.push_back(vec_json(u));
  j["oracle_solutions"] = std::move(os);
  j["engine_solutions"] = std::move(es);
  j["max_pair_distance"] = r.max_pair_distance;
  j["match"] = r.match;
  return j;
}

Json certificates_json(const Scenario& s) {
  Json c;
  if (s.rform) {
    c["kind"] = "r_form";
    c["spectral_radius"] = s.rform->triple.primary_value;
    c["subdominant_modulus"] = s.rform->triple.gap_value;
    const auto pos = cones::positivity_class(s.rform->T);
    c["preserving"] = pos.preserving;
    c["ergodic"] = pos.ergodic;
    c["primitive_exponent"] =
        pos.primitive_exponent ? Json(*pos.primitive_exponent) : Json(nullptr);
    c["gamma"] = s.rform->gamma;
  } else {
    c["kind"] = "m_form";
    c["self_adjoint"] = s.model.self_adjoint;
    c["lambda_m"] = s.lambda_m;
    c["gap_value"] = s.model.triple.gap_value;
    c["gamma_center"] = s.prob.gamma_center;
    c["slope_bound"] = s.prob.slope_bound;
    c["separation"] = s.prob.w_solve_norm > 0.0 ? Json(1.0 / s.prob.w_solve_norm) : Json(nullptr);
    c["contraction"] = s.prob.contraction;
  }
  return c;
}

// --- run orchestration ------------------------------------------------------

template <class F>
void parallel_for(int nitems, int jobs, F&& body) {
  jobs = std::max(1, std::min(jobs, nitems));
  if (jobs <= 1) {
    for (int i = 0; i < nitems; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex err_mu;
  std::vector<std::thread> pool;
  pool.reserve(std::size_t(jobs));
  for (int j = 0; j < jobs; ++j)
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < nitems; i = next.fetch_add(1)) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mu);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

struct TargetSpec {
  Vec g;
  std::string origin;
};

std::vector<TargetSpec> assemble_targets(const Scenario& s, const RunResults& rr) {
  const auto& cfg = s.cfg;
  std::vector<TargetSpec> targets;
  for (double h : cfg.target_heights)
    targets.push_back({scaled(s.prob.split.phi, h), "height " + num17(h)});
  if (!cfg.crest_offsets.empty()) {
    if (rr.critical_points.empty())
      fail(Err::Validation,
           "crest_offsets need a critical point on the anchor fiber; none was found");
    const bool up = rr.classification && rr.classification->verdict == fb::FoldVerdict::fold_up;
    const fb::CriticalPoint* crest = &rr.critical_points.front();
    for (const auto& c : rr.critical_points)
      if (up ? (c.h < crest->h) : (c.h > crest->h)) crest = &c;
    for (double d : cfg.crest_offsets)
      targets.push_back({scaled(s.prob.split.phi, crest->h + d), "crest " + num17(d)});
  }
  if (cfg.random_targets > 0) {
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> amp(-cfg.target_amp, cfg.target_amp);
    for (int k = 0; k < cfg.random_targets; ++k) {
      Vec g(std::size_t(s.prob.dim()), 0.0);
      for (auto& x : g) x = amp(rng);
      targets.push_back({std::move(g), "random " + std::to_string(k)});
    }
  }
  return targets;
}

void add_demo_expectations(const Scenario& s, RunResults& rr) {
  const std::string& name = s.cfg.scenario_name;
  auto add = [&](std::string n, bool ok, std::string detail) {
    rr.expectations.push_back({std::move(n), ok, std::move(detail)});
  };
  auto hyp_clean = [&](bool want_pass) {
    const bool have = rr.hypotheses.has_value();
    const bool ok = have && rr.hypotheses->pass == want_pass;
    add(want_pass ? "hypotheses_clean" : "hypotheses_fail_by_design", ok,
        have ? rr.hypotheses->summary : "no hypothesis report");
  };
  auto fold_counts = [&] {
    std::string got;
    for (const auto& r : rr.solves) got += (got.empty() ? "" : ",") + std::to_string(r.count);
    const bool ok = rr.solves.size() == 3 && rr.solves[0].count == 2 && rr.solves[1].count == 1 &&
                    rr.solves[2].count == 0;
    add("preimage_counts", ok, "want 2,1,0 under/at/over the fold height, got " + got);
    const bool tang = rr.solves.size() == 3 && rr.solves[1].count == 1 &&
                      rr.solves[1].solutions.size() == 1 && rr.solves[1].solutions[0].index == 0;
    add("tangency_merged", tang, "the critical-height target merges to one index-0 solution");
  };

  if (name == "ap_fold" || name == "bnv_nonselfadjoint" || name == "coupled_system" ||
      name == "nonlocal_gradient") {
    fold_counts();
    hyp_clean(true);
  } else if (name == "dolph_hammerstein") {
    int bad = 0;
    for (const auto& r : rr.solves)
      if (r.count != 1) ++bad;
    add("unique_preimages", !rr.solves.empty() && bad == 0,
        std::to_string(rr.solves.size() - std::size_t(bad)) + "/" +
            std::to_string(rr.solves.size()) + " targets with exactly one preimage");
    hyp_clean(true);
  } else if (name == "sine_nonsimple") {
    double err = 0.0;
    if (rr.fiber)
      for (std::size_t k = 0; k < rr.fiber->t_samples.size(); ++k) {
        const double t = rr.fiber->t_samples[k];
        err = std::max(err, std::abs(rr.fiber->h_samples[k] - t * std::sin(t)));
      }
    add("height_profile", rr.fiber && err <= 1e-8, "max |h - t sin t| = " + num17(err));
    const bool many = !rr.solves.empty() && rr.solves[0].count >= 3;
    add("multiple_preimages", many,
        rr.solves.empty() ? "no solve ran"
                          : std::to_string(rr.solves[0].count) + " preimages of the unit height");
    hyp_clean(false);  // the oscillating profile is the designed counterexample
  }
  if (name == "bnv_nonselfadjoint" && s.rform) {
    const auto pos = cones::positivity_class(s.rform->T);
    const bool special = (pos.ergodic || pos.primitive_exponent.has_value()) &&
                         std::abs(s.rform->triple.primary_value - 1.0) <= 1e-10;
    add("r_special_certified", special,
        "conformal image ergodic with unit spectral radius");
  }
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

RunResults run_scenario(const std::string& command, const ScenarioConfig& cfg) {
  static const std::set<std::string> commands = {"spectrum", "fiber",  "solve",
                                                 "classify", "verify", "demo"};
  if (!commands.count(command))
    fail(Err::Validation, "unknown subcommand '" + command + "'");

  const auto t0 = std::chrono::steady_clock::now();
  const Scenario s = build_scenario(cfg);
  RunResults rr;
  const bool demo = command == "demo";
  const bool want_solve = demo || command == "solve";
  const bool want_classify = demo || command == "classify";
  const bool needs_fiber = demo || command == "fiber" || command == "classify" ||
                           (want_solve && !cfg.crest_offsets.empty());

  if (needs_fiber) {
    const Vec zero(std::size_t(s.prob.dim()), 0.0);
    rr.fiber = fb::trace_fiber(s.prob, zero, cfg.t_min, cfg.t_max, cfg.nt, cfg.slice_tol);
    if (cfg.nt >= 32) {
      rr.classification = fb::classify_fold(*rr.fiber, 0.2, 0.05, 10.0 * cfg.refine_tol);
      rr.critical_points = fb::critical_points_on_fiber(*rr.fiber, cfg.refine_tol);
    } else if (want_classify || !cfg.crest_offsets.empty()) {
      fail(Err::Validation, "classification needs run.nt >= 32");
    }
  }

  if (demo || command == "spectrum") rr.files["triple.json"] = dump_json(triple_json(s));
  if (demo || command == "fiber") rr.files["fiber.csv"] = fiber_csv(*rr.fiber);
  if (want_classify)
    rr.files["classify.json"] =
        dump_json(classify_json(s, *rr.classification, rr.critical_points));

  std::vector<std::string> origins;
  if (want_solve) {
    auto targets = assemble_targets(s, rr);
    if (targets.empty())
      fail(Err::Validation, "solve needs target_heights, crest_offsets, or random_targets");
    rr.solves.resize(targets.size());
    parallel_for(int(targets.size()), cfg.jobs, [&](int i) {
      rr.solves[std::size_t(i)] = fb::solve_preimages(s.prob, targets[std::size_t(i)].g,
                                                      cfg.t_min, cfg.t_max, cfg.nt, cfg.tol);
    });
    for (auto& t : targets) origins.push_back(std::move(t.origin));
    rr.files["solve.json"] = dump_json(solve_json(s, rr.solves, origins));
  }

  if (demo || command == "verify") {
    rr.hypotheses = s.prob.form == fb::FormKind::m_form
                        ? verify::check_m_hypotheses(s.prob, cfg.samples, cfg.seed)
                        : verify::check_r_hypotheses(s.prob, std::nullopt, cfg.samples, cfg.seed);
    Json v;
    v["form"] = fb::form_name(s.prob.form);
    v["samples"] = cfg.samples;
    v["seed"] = cfg.seed;
    v["certificates"] = certificates_json(s);
    v["hypotheses"] = Json::array({hypothesis_json(*rr.hypotheses)});
    if (s.prob.dim() <= 3 && cfg.box > 0.0 && cfg.grid_per_axis >= 2) {
      const int n = s.prob.dim();
      const verify::Box box{Vec(std::size_t(n), -cfg.box), Vec(std::size_t(n), cfg.box)};
      Vec target(std::size_t(n), 0.0);
      if (!cfg.target_heights.empty()) target = scaled(s.prob.split.phi, cfg.target_heights[0]);
      rr.oracle = verify::brute_force_oracle(s.prob, target, box, cfg.grid_per_axis, cfg.t_min,
                                             cfg.t_max, cfg.nt, cfg.tol);
      v["oracle"] = oracle_json(*rr.oracle);
    } else {
      v["oracle"] = {{"skipped", s.prob.dim() > 3 ? "grid oracle is capped at dimension 3"
                                                  : "set run.box and run.grid to enable"}};
    }
    rr.files["verify.json"] = dump_json(v);
  }

  if (demo) {
    rr.files["scenario.ini"] = config_to_ini(cfg);
    if (cfg.map_kind == "nonlocal") {
      // re-emit the assets the config references so the manifest covers them
      rr.files[fs::path(cfg.matrix_path).filename().string()] =
          read_file(resolve_path(cfg, cfg.matrix_path));
      rr.files[fs::path(cfg.weight_path).filename().string()] =
          read_file(resolve_path(cfg, cfg.weight_path));
    }
  }

  if (!cfg.expect.empty()) {
    const fb::FoldClassification* cls = nullptr;
    if (rr.classification)
      cls = &*rr.classification;
    else if (!rr.solves.empty())
      cls = &rr.solves.front().classification;
    if (cls) {
      const std::string got = fb::verdict_name(cls->verdict);
      rr.expectations.push_back(
          {"verdict", got == cfg.expect, "expected " + cfg.expect + ", classified " + got});
    }
  }
  if (demo) add_demo_expectations(s, rr);

  for (const auto& e : rr.expectations)
    if (!e.pass) rr.exit_code = 1;

  Json manifest;
  manifest["tool"] = "foldlab";
  manifest["version"] = kVersion;
  manifest["command"] = command;
  manifest["scenario"] = cfg.scenario_name;
  manifest["config"] = echo_config(cfg);
  Json exps = Json::array();
  for (const auto& e : rr.expectations) {
    Json ej;
    ej["name"] = e.name;
    ej["pass"] = e.pass;
    ej["detail"] = e.detail;
    exps.push_back(std::move(ej));
  }
  manifest["expectations"] = std::move(exps);
  manifest["status"] =
      rr.expectations.empty() ? "none" : (rr.exit_code == 0 ? "pass" : "fail");
  manifest["versions"] = Json{{"foldlab", kVersion}, {"compiler", __VERSION__}};
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  manifest["wall_clock_seconds"] = std::round(secs * 1000.0) / 1000.0;
  Json files = Json::array();
  for (const auto& [name, bytes] : rr.files) {
    Json fj;
    fj["name"] = name;
    fj["bytes"] = bytes.size();
    fj["fnv1a64"] = hex64(fnv1a64(bytes));
    files.push_back(std::move(fj));
  }
  manifest["files"] = std::move(files);
  rr.manifest = std::move(manifest);

  fs::create_directories(cfg.out_dir);
  for (const auto& [name, bytes] : rr.files) write_file(fs::path(cfg.out_dir) / name, bytes);
  write_file(fs::path(cfg.out_dir) / "manifest.json", dump_json(rr.manifest));
  return rr;
}

// --- demo catalog -----------------------------------------------------------

const std::vector<std::string>& demo_names() {
  static const std::vector<std::string> names = {
      "ap_fold",            "dolph_hammerstein", "sine_nonsimple",
      "bnv_nonselfadjoint", "coupled_system",    "nonlocal_gradient"};
  return names;
}

ScenarioConfig demo_config(const std::string& name, const std::string& out_dir) {
  ScenarioConfig c;
  c.scenario_name = name;
  c.out_dir = out_dir;
  c.base_dir = out_dir;

  if (name == "ap_fold") {
    c.op_kind = "dirichlet_laplacian_1d";
    c.grid = {63};
    c.map_kind = "nemitskii";
    c.a = 5.0;
    c.b = 15.0;
    c.kappa = 1.0;
    c.form = "m_form";
    c.gamma = 10.0;
    c.t_min = -200.0;
    c.t_max = 200.0;
    c.nt = 2048;
    c.tol = 1e-6;
    c.refine_tol = 1e-3;
    c.seed = 1;
    c.samples = 200;
    c.crest_offsets = {-1.0, 0.0, 1.0};
    c.expect = "fold_down";
  } else if (name == "dolph_hammerstein") {
    c.op_kind = "dirichlet_laplacian_1d";
    c.grid = {63};
    c.map_kind = "nemitskii";
    c.a = 11.0;
    c.b = 30.0;
    c.kappa = 1.0;
    c.form = "m_form";
    c.gamma = 20.5;
    c.t_min = -60.0;
    c.t_max = 60.0;
    c.nt = 1024;
    c.tol = 1e-9;
    c.refine_tol = 1e-3;
    c.seed = 2;
    c.samples = 200;
    c.random_targets = 50;
    c.target_amp = 2.0;
    c.expect = "homeomorphism";
  } else if (name == "sine_nonsimple") {
    c.op_kind = "dirichlet_laplacian_1d";
    c.grid = {15};
    c.map_kind = "vertical_sine";
    c.form = "m_form";  // centering defaults to lambda_m for this map
    c.t_min = -12.566370614359172;
    c.t_max = 12.566370614359172;
    c.nt = 2048;
    c.tol = 1e-9;
    c.slice_tol = 1e-10;
    c.refine_tol = 1e-3;
    c.seed = 3;
    c.samples = 80;
    c.target_heights = {1.0};
    c.expect = "non_simple";
  } else if (name == "bnv_nonselfadjoint") {
    c.op_kind = "nondivergence_1d";
    c.grid = {31};
    c.op_params["diffusion"] = {1.0};
    c.op_params["drift"] = {5.0};
    c.map_kind = "nemitskii";
    c.a = 10.0;
    c.b = 25.0;
    // conjugation scales the curvature by gamma; kappa = 1/gamma keeps the
    // compact-form ramp on unit scale so the window ends stabilize
    c.kappa = 0.1;
    c.form = "r_form";
    c.gamma = 10.0;
    c.t_min = -400.0;
    c.t_max = 400.0;
    c.nt = 1024;
    c.tol = 1e-6;
    c.refine_tol = 1e-5;
    c.seed = 4;
    c.samples = 100;
    c.crest_offsets = {-5.0, 0.0, 5.0};
    c.expect = "fold_down";
  } else if (name == "coupled_system") {
    c.op_kind = "coupled_system";
    c.base_kind = "dirichlet_laplacian_1d";
    c.base_grid = {15};
    c.op_params["alpha"] = {2.0};
    c.map_kind = "nemitskii";
    c.a = 5.0;
    c.b = 10.0;
    c.kappa = 1.0;
    c.form = "m_form";
    c.gamma = 7.5;
    c.t_min = -150.0;
    c.t_max = 150.0;
    c.nt = 1024;
    c.tol = 1e-6;
    c.refine_tol = 1e-3;
    c.seed = 5;
    c.samples = 150;
    c.crest_offsets = {-1.0, 0.0, 1.0};
    c.expect = "fold_down";
  } else if (name == "nonlocal_gradient") {
    c.op_kind = "dirichlet_laplacian_1d";
    c.grid = {15};
    c.map_kind = "nonlocal";
    c.a = 4.5;
    c.b = 12.0;
    c.kappa = 1.0;
    c.matrix_path = "nonlocal_A.txt";
    c.weight_path = "nonlocal_g.txt";
    c.form = "m_form";
    c.gamma = 8.25;
    c.t_min = -150.0;
    c.t_max = 150.0;
    c.nt = 1024;
    c.tol = 1e-6;
    c.refine_tol = 1e-3;
    c.seed = 6;
    c.samples = 150;
    c.crest_offsets = {-1.0, 0.0, 1.0};
    c.expect = "fold_down";

    // near-identity banded mixing with a gently varying weight
    const int n = 15;
    std::string amat;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        double v = 0.0;
        if (i == j) v = 1.0 + 0.15 * 0.5;
        if (std::abs(i - j) == 1) v = 0.15 * 0.25;
        amat += (j ? " " : "") + num17(v);
      }
      amat += "\n";
    }
    std::string gvec;
    for (int i = 0; i < n; ++i) gvec += num17(1.0 + 0.1 * std::sin(double(i + 1))) + "\n";
    fs::create_directories(out_dir);
    write_file(fs::path(out_dir) / c.matrix_path, amat);
    write_file(fs::path(out_dir) / c.weight_path, gvec);
  } else {
    fail(Err::Validation, "unknown demo '" + name + "'; expected one of ap_fold, "
                          "dolph_hammerstein, sine_nonsimple, bnv_nonselfadjoint, "
                          "coupled_system, nonlocal_gradient");
  }
  return c;
}

}  // namespace foldlab::cli
