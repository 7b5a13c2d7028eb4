#include "gevrey/harness.hpp"

#include <Eigen/Core>
#include <gmp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>

#include "gevrey/error.hpp"
#include "gevrey/integrators.hpp"
#include "gevrey/parallel.hpp"

namespace gevrey {

namespace {

using nlohmann::json;

constexpr const char* kVersion = "0.1.0";

// ---- JSON access with field paths in the error messages ----

void reject_unknown(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ValidationError("'" + path + "' must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ValidationError("unknown key '" + (path.empty() ? "" : path + ".") + it.key() + "'");
  }
}

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

double get_number(const json& j, const std::string& key, const std::string& path) {
  const auto& v = j.at(key);
  if (!v.is_number()) throw ValidationError("'" + join(path, key) + "' must be a number");
  return v.get<double>();
}

long long get_integer(const json& j, const std::string& key, const std::string& path) {
  const auto& v = j.at(key);
  if (!v.is_number_integer() && !v.is_number_unsigned()) throw ValidationError("'" + join(path, key) + "' must be an integer");
  return v.get<long long>();
}

std::string get_string(const json& j, const std::string& key, const std::string& path) {
  const auto& v = j.at(key);
  if (!v.is_string()) throw ValidationError("'" + join(path, key) + "' must be a string");
  return v.get<std::string>();
}

bool get_bool(const json& j, const std::string& key, const std::string& path) {
  const auto& v = j.at(key);
  if (!v.is_boolean()) throw ValidationError("'" + join(path, key) + "' must be true or false");
  return v.get<bool>();
}

ExperimentKind parse_kind(const std::string& s) {
  if (s == "gauss-sweep") return ExperimentKind::GaussSweep;
  if (s == "qmc-sweep") return ExperimentKind::QmcSweep;
  if (s == "mc-sweep") return ExperimentKind::McSweep;
  if (s == "derivative-check") return ExperimentKind::DerivativeCheck;
  if (s == "suite") return ExperimentKind::Suite;
  throw ValidationError("'experiment' must be one of gauss-sweep, qmc-sweep, mc-sweep, derivative-check, suite");
}

RateModel parse_model(const std::string& s) {
  if (s == "semilog-n") return RateModel::SemilogN;
  if (s == "semilog-sqrt-n") return RateModel::SemilogSqrtN;
  if (s == "loglog") return RateModel::LogLog;
  throw ValidationError("'rate_model' must be one of semilog-n, semilog-sqrt-n, loglog");
}

bool lattice_like(ExperimentKind k) {
  return k == ExperimentKind::QmcSweep || k == ExperimentKind::McSweep || k == ExperimentKind::DerivativeCheck;
}

FieldConfig named(const std::string& name) {
  FieldConfig f;
  f.name = name;
  return f;
}

ExperimentConfig defaults(ExperimentKind kind, const std::string& profile) {
  ExperimentConfig c;
  c.experiment = kind;
  c.profile = profile;
  const bool full = profile == "full";
  auto& p = c.problem;
  p.a = named("unit-a");
  if (lattice_like(kind)) {
    p.b = named(full ? "b1-hd(100)" : "b1-hd(20)");
    p.f = named("const(1)");
    p.mesh_n = full ? 128 : 16;
    p.qoi = Qoi::point();
    c.rate_model = RateModel::LogLog;
    c.reference = {ReferenceSpec::Kind::Qmc, 0, full ? 1 << 16 : 1 << 13, 0};
  } else {
    p.b = named("b1-1d");
    p.f = named("f-trig");
    p.mesh_n = full ? 128 : 32;
    p.qoi = Qoi::mean();
    c.rate_model = RateModel::SemilogN;
    c.reference = {ReferenceSpec::Kind::Gauss, 0, 50, 0};
  }
  p.tol = full ? 1e-14 : 1e-12;
  p.solve_rel_tol = full ? 1e-15 : 1e-13;
  return c;
}

FieldConfig field_from_json(const json& j, const std::string& path) {
  FieldConfig f;
  if (j.is_string()) {
    f.name = j.get<std::string>();
    make_field(f.name);  // validate the name now
    return f;
  }
  reject_unknown(j, path, {"expr", "param_dim", "half_width", "envelope", "label"});
  if (!j.contains("expr")) throw ValidationError("'" + path + "' needs 'expr' or a built-in field name");
  f.expr = get_string(j, "expr", path);
  if (j.contains("param_dim")) f.param_dim = static_cast<int>(get_integer(j, "param_dim", path));
  if (j.contains("half_width")) f.half_width = get_number(j, "half_width", path);
  if (j.contains("label")) f.label = get_string(j, "label", path);
  if (j.contains("envelope")) {
    try {
      f.envelope = GevreyEnvelope::from_json(j.at("envelope"));
    } catch (const ValidationError& e) {
      throw ValidationError("'" + path + ".envelope': " + e.what());
    } catch (const json::exception& e) {
      throw ValidationError("'" + path + ".envelope': " + e.what());
    }
  }
  return f;
}

json qoi_json(const Qoi& q) { return q.to_json(); }

Qoi qoi_from_json(const json& j, const std::string& path) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "mean") return Qoi::mean();
    if (s == "point") return Qoi::point();
    throw ValidationError("'" + path + "' must be mean or point");
  }
  reject_unknown(j, path, {"kind", "x"});
  const auto kind = get_string(j, "kind", path);
  if (kind == "mean") return Qoi::mean();
  if (kind != "point") throw ValidationError("'" + path + ".kind' must be mean or point");
  Qoi q = Qoi::point();
  if (j.contains("x")) {
    const auto& x = j.at("x");
    if (!x.is_array() || x.size() != 2 || !x[0].is_number() || !x[1].is_number())
      throw ValidationError("'" + path + ".x' must be a pair of numbers");
    q.x0 = {x[0].get<double>(), x[1].get<double>()};
    if (q.x0[0] < 0 || q.x0[0] > 1 || q.x0[1] < 0 || q.x0[1] > 1)
      throw ValidationError("'" + path + ".x' must lie in [0,1]^2");
  }
  return q;
}

std::string c_m_string(const json& v, const std::string& path) {
  if (v.is_number()) {
    std::ostringstream os;
    os.precision(17);
    os << v.get<double>();
    return os.str();
  }
  if (v.is_string()) return v.get<std::string>();
  throw ValidationError("'" + path + "' must be a number, \"poincare-chain\" or \"rayleigh\"");
}

double c_m_value(const std::string& s, int m) {
  if (s == "poincare-chain") return embedding_constant(m + 1, EmbeddingMethod::poincare_chain());
  if (s == "rayleigh") return embedding_constant(m + 1, EmbeddingMethod::rayleigh());
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || !(v > 0)) throw ValidationError("'problem.c_m' must be positive, \"poincare-chain\" or \"rayleigh\"");
  return v;
}

double wrap_c_m(const std::string& s) {
  try {
    return std::stod(s);
  } catch (const std::exception&) {
    return 0;
  }
}

}  // namespace

std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::GaussSweep: return "gauss-sweep";
    case ExperimentKind::QmcSweep: return "qmc-sweep";
    case ExperimentKind::McSweep: return "mc-sweep";
    case ExperimentKind::DerivativeCheck: return "derivative-check";
    case ExperimentKind::Suite: return "suite";
  }
  return "?";
}

std::string to_string(RateModel m) {
  switch (m) {
    case RateModel::SemilogN: return "semilog-n";
    case RateModel::SemilogSqrtN: return "semilog-sqrt-n";
    case RateModel::LogLog: return "loglog";
  }
  return "?";
}

ParamField FieldConfig::build() const {
  if (!name.empty()) return make_field(name);
  return custom_field(expr, param_dim, half_width, envelope, label);
}

nlohmann::json FieldConfig::to_json() const {
  if (!name.empty()) return name;
  json j = {{"expr", expr}, {"param_dim", param_dim}, {"half_width", half_width}};
  if (envelope) j["envelope"] = envelope->to_json();
  if (!label.empty()) j["label"] = label;
  return j;
}

ProblemSpec ProblemConfig::build() const {
  ProblemSpec s;
  s.m = m;
  s.c_m = c_m_value(c_m, m);
  s.a = a.build();
  s.b = b.build();
  s.f = f.build();
  if (mode == "positive-b" || mode == "positive-b-odd-m") {
    s.mode = AssumptionMode::positive_b();
  } else if (mode == "general-b") {
    s.mode = AssumptionMode::general_b();
  } else {
    throw ValidationError("'problem.mode' must be positive-b or general-b");
  }
  s.mesh_n = mesh_n;
  s.quad_degree = quad_degree;
  if (solver == "direct-cholesky") {
    s.method = SolveMethod::DirectCholesky;
  } else if (solver == "cg") {
    s.method = SolveMethod::Cg;
  } else {
    throw ValidationError("'problem.solver' must be direct-cholesky or cg");
  }
  s.solve_rel_tol = solve_rel_tol;
  s.c_1 = c_1;
  s.c_2m_minus_1 = c_2m_minus_1;
  // parameter box from the y-dependent fields
  int dim = 0;
  double hw = 0;
  for (const ParamField* f : {&s.a, &s.b, &s.f}) {
    if (f->param_dim() == 0) continue;
    if (hw != 0 && f->box().half_width != hw)
      throw ValidationError("fields disagree on the parameter box half width");
    hw = f->box().half_width;
    dim = std::max(dim, f->param_dim());
  }
  s.box = {dim, hw == 0 ? 0.5 : hw};
  return s;
}

nlohmann::json ExperimentConfig::to_json() const {
  json p = {{"m", problem.m},
            {"a", problem.a.to_json()},
            {"b", problem.b.to_json()},
            {"f", problem.f.to_json()},
            {"mode", problem.mode},
            {"mesh_n", problem.mesh_n},
            {"quad_degree", problem.quad_degree},
            {"solver", problem.solver},
            {"solve_rel_tol", problem.solve_rel_tol},
            {"tol", problem.tol},
            {"max_iter", problem.max_iter},
            {"c_1", problem.c_1},
            {"c_2m_minus_1", problem.c_2m_minus_1},
            {"qoi", qoi_json(problem.qoi)}};
  const double cm = wrap_c_m(problem.c_m);
  if (cm > 0 && c_m_string(json(cm), "") == problem.c_m) {
    p["c_m"] = cm;
  } else {
    p["c_m"] = problem.c_m;
  }
  json ref;
  switch (reference.kind) {
    case ReferenceSpec::Kind::SelfFinest: ref = {{"kind", "self-finest"}}; break;
    case ReferenceSpec::Kind::Explicit: ref = {{"kind", "explicit"}, {"value", reference.value}}; break;
    case ReferenceSpec::Kind::Gauss: ref = {{"kind", "gauss"}, {"n", reference.n}}; break;
    case ReferenceSpec::Kind::Qmc: ref = {{"kind", "qmc"}, {"n", reference.n}, {"seed", reference.seed}}; break;
  }
  json dc = {{"y", derivative_check.y},
             {"max_order", derivative_check.max_order},
             {"indices", derivative_check.indices},
             {"norm", derivative_check.norm},
             {"fd",
              {{"order", derivative_check.fd.order},
               {"step", derivative_check.fd.step},
               {"richardson", derivative_check.fd.richardson}}},
             {"laplacian", derivative_check.laplacian}};
  dc["power"] = json::array();
  for (const auto& [k, nu] : derivative_check.power) dc["power"].push_back({{"k", k}, {"nu", nu}});
  json j = {{"schema_version", schema_version},
            {"experiment", gevrey::to_string(experiment)},
            {"profile", profile},
            {"problem", p},
            {"n_values", n_values},
            {"reference", ref},
            {"R", R},
            {"seed", seed},
            {"output_dir", output_dir},
            {"rate_model", gevrey::to_string(rate_model)},
            {"lattice", {{"weight_decay", lattice_weight_decay}, {"generating_vector_file", generating_vector_file}}},
            {"noise_window", noise_window},
            {"threads", threads},
            {"derivative_check", dc},
            {"suite", {{"depth", suite_depth == SuiteDepth::Quick ? "quick" : "full"}}}};
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  reject_unknown(j, "", {"schema_version", "experiment", "profile", "problem", "n_values", "reference", "R", "seed",
                         "output_dir", "rate_model", "lattice", "noise_window", "threads", "derivative_check", "suite"});
  if (!j.contains("schema_version")) throw ValidationError("'schema_version' is required (current version: 1)");
  if (get_integer(j, "schema_version", "") != 1) throw ValidationError("'schema_version' must be 1");
  if (!j.contains("experiment")) throw ValidationError("'experiment' is required");
  const auto kind = parse_kind(get_string(j, "experiment", ""));
  std::string profile = "desk";
  if (j.contains("profile")) profile = get_string(j, "profile", "");
  if (profile != "desk" && profile != "full") throw ValidationError("'profile' must be desk or full");
  ExperimentConfig c = defaults(kind, profile);
  bool explicit_reference = false;

  if (j.contains("problem")) {
    const auto& p = j.at("problem");
    reject_unknown(p, "problem", {"m", "c_m", "a", "b", "f", "mode", "mesh_n", "quad_degree", "solver", "solve_rel_tol",
                                  "tol", "max_iter", "c_1", "c_2m_minus_1", "qoi"});
    auto& q = c.problem;
    if (p.contains("m")) q.m = static_cast<int>(get_integer(p, "m", "problem"));
    if (p.contains("c_m")) q.c_m = c_m_string(p.at("c_m"), "problem.c_m");
    if (p.contains("a")) q.a = field_from_json(p.at("a"), "problem.a");
    if (p.contains("b")) q.b = field_from_json(p.at("b"), "problem.b");
    if (p.contains("f")) q.f = field_from_json(p.at("f"), "problem.f");
    if (p.contains("mode")) q.mode = get_string(p, "mode", "problem");
    if (p.contains("mesh_n")) q.mesh_n = static_cast<int>(get_integer(p, "mesh_n", "problem"));
    if (p.contains("quad_degree")) q.quad_degree = static_cast<int>(get_integer(p, "quad_degree", "problem"));
    if (p.contains("solver")) q.solver = get_string(p, "solver", "problem");
    if (p.contains("solve_rel_tol")) q.solve_rel_tol = get_number(p, "solve_rel_tol", "problem");
    if (p.contains("tol")) q.tol = get_number(p, "tol", "problem");
    if (p.contains("max_iter")) q.max_iter = static_cast<int>(get_integer(p, "max_iter", "problem"));
    if (p.contains("c_1")) q.c_1 = get_number(p, "c_1", "problem");
    if (p.contains("c_2m_minus_1")) q.c_2m_minus_1 = get_number(p, "c_2m_minus_1", "problem");
    if (p.contains("qoi")) q.qoi = qoi_from_json(p.at("qoi"), "problem.qoi");
  }
  if (j.contains("n_values")) {
    const auto& v = j.at("n_values");
    if (!v.is_array()) throw ValidationError("'n_values' must be an array of integers");
    for (const auto& x : v) {
      if (!x.is_number_integer()) throw ValidationError("'n_values' must be an array of integers");
      c.n_values.push_back(x.get<int>());
    }
  }
  if (j.contains("seed")) {
    const auto& v = j.at("seed");
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
      throw ValidationError("'seed' must be a nonnegative integer");
    c.seed = v.get<std::uint64_t>();
  }
  if (j.contains("reference")) {
    const auto& r = j.at("reference");
    reject_unknown(r, "reference", {"kind", "value", "n", "seed"});
    const auto k = get_string(r, "kind", "reference");
    explicit_reference = true;
    if (k == "self-finest") {
      c.reference = {ReferenceSpec::Kind::SelfFinest, 0, 0, 0};
    } else if (k == "explicit") {
      c.reference = {ReferenceSpec::Kind::Explicit, get_number(r, "value", "reference"), 0, 0};
    } else if (k == "gauss") {
      c.reference = {ReferenceSpec::Kind::Gauss, 0, static_cast<int>(get_integer(r, "n", "reference")), 0};
    } else if (k == "qmc") {
      c.reference = {ReferenceSpec::Kind::Qmc, 0, static_cast<int>(get_integer(r, "n", "reference")),
                     r.contains("seed") ? static_cast<std::uint64_t>(get_integer(r, "seed", "reference")) : c.seed + 1};
    } else {
      throw ValidationError("'reference.kind' must be self-finest, explicit, gauss or qmc");
    }
  }
  if (j.contains("R")) c.R = static_cast<int>(get_integer(j, "R", ""));
  if (j.contains("output_dir")) c.output_dir = get_string(j, "output_dir", "");
  if (j.contains("rate_model")) c.rate_model = parse_model(get_string(j, "rate_model", ""));
  if (j.contains("lattice")) {
    const auto& l = j.at("lattice");
    reject_unknown(l, "lattice", {"weight_decay", "generating_vector_file"});
    if (l.contains("weight_decay")) c.lattice_weight_decay = get_number(l, "weight_decay", "lattice");
    if (l.contains("generating_vector_file"))
      c.generating_vector_file = get_string(l, "generating_vector_file", "lattice");
  }
  if (j.contains("noise_window")) c.noise_window = get_number(j, "noise_window", "");
  if (j.contains("threads")) c.threads = static_cast<int>(get_integer(j, "threads", ""));
  if (j.contains("derivative_check")) {
    const auto& d = j.at("derivative_check");
    reject_unknown(d, "derivative_check", {"y", "max_order", "indices", "norm", "fd", "laplacian", "power"});
    auto& dc = c.derivative_check;
    if (d.contains("y")) {
      if (!d.at("y").is_array()) throw ValidationError("'derivative_check.y' must be an array of numbers");
      for (const auto& x : d.at("y")) {
        if (!x.is_number()) throw ValidationError("'derivative_check.y' must be an array of numbers");
        dc.y.push_back(x.get<double>());
      }
    }
    if (d.contains("max_order")) dc.max_order = static_cast<int>(get_integer(d, "max_order", "derivative_check"));
    if (d.contains("indices")) {
      if (!d.at("indices").is_array()) throw ValidationError("'derivative_check.indices' must be an array of strings");
      for (const auto& x : d.at("indices")) {
        if (!x.is_string()) throw ValidationError("'derivative_check.indices' must be an array of strings");
        MultiIndex::parse(x.get<std::string>());
        dc.indices.push_back(x.get<std::string>());
      }
    }
    if (d.contains("norm")) dc.norm = get_string(d, "norm", "derivative_check");
    if (d.contains("fd")) {
      const auto& f = d.at("fd");
      reject_unknown(f, "derivative_check.fd", {"order", "step", "richardson"});
      if (f.contains("order")) dc.fd.order = static_cast<int>(get_integer(f, "order", "derivative_check.fd"));
      if (f.contains("step")) dc.fd.step = get_number(f, "step", "derivative_check.fd");
      if (f.contains("richardson")) dc.fd.richardson = get_bool(f, "richardson", "derivative_check.fd");
    }
    if (d.contains("laplacian")) dc.laplacian = get_bool(d, "laplacian", "derivative_check");
    if (d.contains("power")) {
      if (!d.at("power").is_array()) throw ValidationError("'derivative_check.power' must be an array");
      for (const auto& x : d.at("power")) {
        reject_unknown(x, "derivative_check.power[]", {"k", "nu"});
        dc.power.emplace_back(static_cast<int>(get_integer(x, "k", "derivative_check.power[]")),
                              get_string(x, "nu", "derivative_check.power[]"));
      }
    }
  }
  if (j.contains("suite")) {
    const auto& s = j.at("suite");
    reject_unknown(s, "suite", {"depth"});
    const auto d = get_string(s, "depth", "suite");
    if (d == "quick") {
      c.suite_depth = SuiteDepth::Quick;
    } else if (d == "full") {
      c.suite_depth = SuiteDepth::Full;
    } else {
      throw ValidationError("'suite.depth' must be quick or full");
    }
  }
  // default references scale with the sweep
  if (!explicit_reference && !c.n_values.empty()) {
    const int finest = *std::max_element(c.n_values.begin(), c.n_values.end());
    if (c.reference.kind == ReferenceSpec::Kind::Gauss) c.reference.n = std::min(200, std::max(c.reference.n, 2 * finest));
    if (c.reference.kind == ReferenceSpec::Kind::Qmc) {
      while (c.reference.n < 2 * finest) c.reference.n *= 2;
    }
  }
  if (c.reference.kind == ReferenceSpec::Kind::Qmc && !explicit_reference) c.reference.seed = c.seed + 1;
  c.validate();
  return c;
}

void ExperimentConfig::validate() const {
  if (schema_version != 1) throw ValidationError("'schema_version' must be 1");
  const bool sweep = experiment == ExperimentKind::GaussSweep || experiment == ExperimentKind::QmcSweep ||
                     experiment == ExperimentKind::McSweep;
  if (sweep) {
    if (n_values.empty()) throw ValidationError("'n_values' is required for " + gevrey::to_string(experiment));
    for (std::size_t i = 0; i < n_values.size(); ++i) {
      if (n_values[i] < 1) throw ValidationError("'n_values' entries must be positive");
      if (i > 0 && n_values[i] <= n_values[i - 1]) throw ValidationError("'n_values' must be strictly increasing");
    }
  }
  if (experiment == ExperimentKind::GaussSweep && n_values.back() > 200)
    throw ValidationError("'n_values' for gauss-sweep must not exceed 200");
  if (experiment == ExperimentKind::QmcSweep)
    for (int n : n_values)
      if (!is_power_of_two(n) || n < 4)
        throw ValidationError("'n_values' for qmc-sweep must be powers of 2 (>= 4); got " + std::to_string(n));
  if (R < 1) throw ValidationError("'R' must be at least 1");
  if (!(noise_window >= 1)) throw ValidationError("'noise_window' must be >= 1");
  if (threads < 0) throw ValidationError("'threads' must be >= 0");
  if (!(lattice_weight_decay > 0)) throw ValidationError("'lattice.weight_decay' must be positive");
  if (problem.mesh_n < 2) throw ValidationError("'problem.mesh_n' must be at least 2");
  if (!(problem.tol > 0)) throw ValidationError("'problem.tol' must be positive");
  if (problem.max_iter < 1) throw ValidationError("'problem.max_iter' must be positive");
  if (sweep) {
    const int finest = n_values.back();
    switch (reference.kind) {
      case ReferenceSpec::Kind::Gauss:
        if (experiment != ExperimentKind::GaussSweep)
          throw ValidationError("'reference.kind' gauss only applies to gauss-sweep");
        if (reference.n < 1 || reference.n > 200) throw ValidationError("'reference.n' must lie in [1, 200]");
        if (finest > reference.n / 2)
          throw ValidationError("'reference.n' = " + std::to_string(reference.n) + " is too coarse: the finest sweep point " +
                                std::to_string(finest) + " must not exceed half of it");
        break;
      case ReferenceSpec::Kind::Qmc:
        if (experiment == ExperimentKind::GaussSweep)
          throw ValidationError("'reference.kind' qmc does not apply to gauss-sweep");
        if (!is_power_of_two(reference.n) || reference.n < 4)
          throw ValidationError("'reference.n' must be a power of 2 for a qmc reference");
        if (finest > reference.n / 2)
          throw ValidationError("'reference.n' = " + std::to_string(reference.n) + " is too coarse: the finest sweep point " +
                                std::to_string(finest) + " must not exceed half of it");
        break;
      case ReferenceSpec::Kind::Explicit:
        if (reference.value == 0 || !std::isfinite(reference.value))
          throw ValidationError("'reference.value' must be finite and nonzero");
        break;
      case ReferenceSpec::Kind::SelfFinest: break;
    }
  }
  if (experiment == ExperimentKind::DerivativeCheck) {
    if (derivative_check.max_order < 0 || derivative_check.max_order > 3)
      throw ValidationError("'derivative_check.max_order' must lie in [0, 3]");
    derivative_check.fd.validate();
    parse_norm_kind(derivative_check.norm);
  }
  if (experiment != ExperimentKind::Suite) {
    // builds fields, mode and box; throws ValidationError on bad input
    const auto spec = problem.build();
    spec.validate();
    if (experiment == ExperimentKind::GaussSweep && (spec.box.dim != 1 || spec.box.half_width != 1))
      throw ValidationError("gauss-sweep needs exactly one parameter on [-1, 1]");
    if ((experiment == ExperimentKind::QmcSweep || experiment == ExperimentKind::McSweep) &&
        (spec.box.dim < 1 || spec.box.half_width != 0.5))
      throw ValidationError(gevrey::to_string(experiment) + " needs parameters on [-1/2, 1/2]^s");
  }
}

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ValidationError("config parse error at line " + std::to_string(line) + ", column " + std::to_string(col) +
                          ": " + e.what());
  }
  return ExperimentConfig::from_json(j);
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

RateFit fit_rate(const std::vector<SweepRow>& rows, RateModel model, double noise_floor, double window) {
  std::vector<double> xs, ys;
  for (const auto& r : rows) {
    if (!(r.error > 0) || !std::isfinite(r.error)) continue;
    if (r.error <= noise_floor * window) continue;
    const double n = r.n;
    xs.push_back(model == RateModel::SemilogN ? n : model == RateModel::SemilogSqrtN ? std::sqrt(n) : std::log(n));
    ys.push_back(std::log(r.error));
  }
  if (xs.size() < 3)
    throw ValidationError("rate fit needs at least 3 rows above the noise floor, got " + std::to_string(xs.size()));
  const double k = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i] / k;
    my += ys[i] / k;
  }
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (!(sxx > 0)) throw ValidationError("rate fit has degenerate abscissae");
  RateFit f;
  f.model = model;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ssr = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double e = ys[i] - (f.intercept + f.slope * xs[i]);
    ssr += e * e;
  }
  f.r_squared = syy > 0 ? 1 - ssr / syy : 1.0;
  f.used = static_cast<int>(xs.size());
  return f;
}

bool RunResult::passed_checks() const {
  for (const auto& c : checks)
    if (!c.passed) return false;
  return !suite || suite->passed();
}

namespace {

// Shared solver plus bookkeeping of the ball invariant over all solves.
class Evaluator {
 public:
  Evaluator(const ProblemSpec& spec, const ProblemConfig& pc) : solver_(spec), pc_(pc) {
    try {
      bundle_ = theory_constants(spec);
    } catch (const ValidationError& e) {
      bundle_note_ = e.what();
    }
  }

  double operator()(std::span<const double> y) const {
    const auto r = solver_.solve(y, pc_.tol, pc_.max_iter);
    if (!r.trace.converged) {
      std::ostringstream os;
      os.precision(6);
      os << "fixed-point iteration " << r.trace.status_name() << " after " << r.trace.iterations
         << " iterations at y[0] = " << (y.empty() ? 0.0 : y[0]);
      throw NumericalError(os.str());
    }
    double worst = 0;
    for (double n : r.trace.iterate_norms) worst = std::max(worst, solver_.spec().c_m * n);
    {
      std::lock_guard<std::mutex> lock(mu_);
      ++solves_;
      max_iterations_ = std::max(max_iterations_, r.trace.iterations);
      max_norm_ = std::max(max_norm_, worst);
      if (bundle_ && worst > bundle_->u_bar + 1e-8) ++ball_violations_;
    }
    return qoi(r.u, pc_.qoi);
  }

  const SemilinearSolver& solver() const { return solver_; }
  const std::optional<ConstantBundle>& bundle() const { return bundle_; }

  json stats() const {
    std::lock_guard<std::mutex> lock(mu_);
    json j = {{"solves", solves_}, {"max_iterations", max_iterations_}, {"max_iterate_v_norm", max_norm_}};
    if (bundle_) {
      j["u_bar"] = bundle_->u_bar;
      j["ball_violations"] = ball_violations_;
    }
    return j;
  }
  json constants() const {
    if (bundle_) return bundle_->to_json();
    return {{"unavailable", bundle_note_}};
  }

 private:
  SemilinearSolver solver_;
  const ProblemConfig& pc_;
  std::optional<ConstantBundle> bundle_;
  std::string bundle_note_;
  mutable std::mutex mu_;
  mutable long long solves_ = 0, ball_violations_ = 0;
  mutable int max_iterations_ = 0;
  mutable double max_norm_ = 0;
};

double gauss_value(const Evaluator& ev, int n, int threads) {
  const auto rule = gauss_rule(n);
  std::vector<double> vals(static_cast<std::size_t>(n));
  parallel_for(
      vals.size(),
      [&](std::size_t i) {
        const double y = rule.nodes[i];
        vals[i] = ev(std::span<const double>(&y, 1));
      },
      threads);
  double s = 0;
  for (int i = 0; i < n; ++i) s += rule.weights[i] * vals[i];
  return s;
}

struct LatticeSource {
  const ExperimentConfig& cfg;
  int s;
  std::optional<LatticeRule> file_rule;
  mutable json vectors = json::object();

  LatticeSource(const ExperimentConfig& c, int dim) : cfg(c), s(dim) {
    if (!c.generating_vector_file.empty()) {
      file_rule = read_generating_vector_file(c.generating_vector_file);
      if (file_rule->s() < s)
        throw ValidationError("generating vector file has " + std::to_string(file_rule->s()) +
                              " components but the problem has " + std::to_string(s) + " parameters");
    }
  }

  LatticeRule rule(int n) const {
    LatticeRule r;
    if (file_rule && file_rule->n == n) {
      r = *file_rule;
      r.z.resize(static_cast<std::size_t>(s));
    } else {
      r = cbc_generating_vector(s, n, product_weights(s, cfg.lattice_weight_decay));
    }
    vectors[std::to_string(n)] = r.z;
    return r;
  }
};

std::vector<double> qmc_shift_estimates(const Evaluator& ev, const LatticeRule& rule, int R, std::uint64_t seed,
                                        int threads) {
  return qmc_estimate([&](std::span<const double> y) { return ev(y); }, rule, make_shifts(R, rule.s(), seed), threads);
}

std::vector<MultiIndex> check_indices(const DerivativeCheckConfig& dc, int s) {
  std::vector<MultiIndex> out;
  if (!dc.indices.empty()) {
    for (const auto& t : dc.indices) out.push_back(MultiIndex::parse(t));
    return out;
  }
  // all nu with 1 <= |nu| <= max_order over s dimensions, by order then lexicographic
  std::vector<MultiIndex> level{MultiIndex()};
  for (int k = 1; k <= dc.max_order; ++k) {
    std::set<MultiIndex> next;
    for (const auto& nu : level)
      for (int j = 1; j <= s; ++j) next.insert(nu + MultiIndex::unit(j));
    level.assign(next.begin(), next.end());
    out.insert(out.end(), level.begin(), level.end());
  }
  return out;
}

json versions() {
  return {{"gevrey", kVersion},
          {"compiler", __VERSION__},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"gmp", gmp_version}};
}

json fit_json(const RateFit& f) {
  return {{"slope", f.slope}, {"intercept", f.intercept}, {"r_squared", f.r_squared}, {"model", to_string(f.model)},
          {"rows_used", f.used}};
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& cfg, RunResult* partial_out) {
  cfg.validate();
  RunResult res;
  res.kind = cfg.experiment;
  res.meta["config"] = cfg.to_json();
  res.meta["versions"] = versions();
  res.meta["seed"] = cfg.seed;
  {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.15g", zeta(5));
    res.meta["zeta5"] = buf;
  }

  if (cfg.experiment == ExperimentKind::Suite) {
    res.suite = invariants_suite(cfg.suite_depth, cfg.seed);
    return res;
  }

  const ProblemSpec spec = cfg.problem.build();
  Evaluator ev(spec, cfg.problem);
  res.meta["problem"] = spec.to_json();
  res.meta["mesh_h"] = std::sqrt(2.0) / spec.mesh_n;
  res.meta["constants"] = ev.constants();
  res.meta["notes"] = json::array(
      {"b2-1d uses its continuous extension at y = -1 (0 for x != 0, 1 at x = 0)",
       "b2-hd uses exp(-1/(y_j + 1/2)) = 0 at y_j = -1/2", "quadrature degree " + std::to_string(spec.quad_degree)});

  auto finish = [&]() {
    res.meta["solver_stats"] = ev.stats();
    if (!res.rows.empty()) {
      try {
        res.fit = fit_rate(res.rows, cfg.rate_model, res.noise_floor, cfg.noise_window);
      } catch (const ValidationError& e) {
        res.meta["fit_warning"] = e.what();
      }
    }
  };

  try {
    if (cfg.experiment == ExperimentKind::GaussSweep) {
      switch (cfg.reference.kind) {
        case ReferenceSpec::Kind::Gauss: {
          res.reference = gauss_value(ev, cfg.reference.n, cfg.threads);
          const int coarser = cfg.reference.n - std::max(1, cfg.reference.n / 4);
          const double est = std::abs(res.reference - gauss_value(ev, coarser, cfg.threads));
          res.noise_floor = est + cfg.problem.tol;
          res.meta["reference_error_estimate"] = est;
          break;
        }
        case ReferenceSpec::Kind::Explicit:
          res.reference = cfg.reference.value;
          res.noise_floor = cfg.problem.tol;
          break;
        case ReferenceSpec::Kind::SelfFinest:
          res.reference = gauss_value(ev, cfg.n_values.back(), cfg.threads);
          res.noise_floor = cfg.problem.tol;
          break;
        case ReferenceSpec::Kind::Qmc: throw ValidationError("qmc reference is not valid for gauss-sweep");
      }
      for (int n : cfg.n_values) {
        const double q = gauss_value(ev, n, cfg.threads);
        res.rows.push_back({n, std::abs(res.reference - q), {q}});
      }
    } else if (cfg.experiment == ExperimentKind::QmcSweep || cfg.experiment == ExperimentKind::McSweep) {
      const int s = spec.box.dim;
      LatticeSource lattice(cfg, s);
      res.meta["lattice_weights"] = {{"kind", "product"}, {"gamma_j", "j^-" + std::to_string(cfg.lattice_weight_decay)}};
      switch (cfg.reference.kind) {
        case ReferenceSpec::Kind::Qmc: {
          const auto est = qmc_shift_estimates(ev, lattice.rule(cfg.reference.n), cfg.R, cfg.reference.seed, cfg.threads);
          double mean = 0;
          for (double e : est) mean += e / est.size();
          double var = 0;
          for (double e : est) var += (e - mean) * (e - mean);
          const double se = est.size() > 1 ? std::sqrt(var / (est.size() - 1) / est.size()) : 0;
          res.reference = mean;
          res.noise_floor = se / std::abs(mean) + cfg.problem.tol / std::abs(mean);
          res.meta["reference_estimates"] = est;
          res.meta["reference_error_estimate"] = se / std::abs(mean);
          break;
        }
        case ReferenceSpec::Kind::Explicit:
          res.reference = cfg.reference.value;
          res.noise_floor = cfg.problem.tol / std::abs(res.reference);
          break;
        case ReferenceSpec::Kind::SelfFinest: {
          const int n = cfg.n_values.back();
          std::vector<double> est;
          if (cfg.experiment == ExperimentKind::QmcSweep) {
            est = qmc_shift_estimates(ev, lattice.rule(n), cfg.R, cfg.seed, cfg.threads);
          } else {
            for (int r = 0; r < cfg.R; ++r)
              est.push_back(mc_estimate([&](std::span<const double> y) { return ev(y); }, n, s, cfg.seed, r, cfg.threads));
          }
          double mean = 0;
          for (double e : est) mean += e / est.size();
          res.reference = mean;
          res.noise_floor = cfg.problem.tol / std::abs(mean);
          break;
        }
        case ReferenceSpec::Kind::Gauss: throw ValidationError("gauss reference is not valid for lattice sweeps");
      }
      if (res.reference == 0) throw NumericalError("reference value is zero; relative errors are undefined");
      res.meta["reference_kind"] = cfg.reference.kind == ReferenceSpec::Kind::Qmc ? "qmc" : "other";
      for (int n : cfg.n_values) {
        std::vector<double> est;
        if (cfg.experiment == ExperimentKind::QmcSweep) {
          est = qmc_shift_estimates(ev, lattice.rule(n), cfg.R, cfg.seed, cfg.threads);
        } else {
          for (int r = 0; r < cfg.R; ++r)
            est.push_back(mc_estimate([&](std::span<const double> y) { return ev(y); }, n, s, cfg.seed, r, cfg.threads));
        }
        res.rows.push_back({n, rmse_relative(est, res.reference), est});
      }
      res.meta["generating_vectors"] = lattice.vectors;
    } else if (cfg.experiment == ExperimentKind::DerivativeCheck) {
      if (!ev.bundle()) throw ValidationError("derivative checks need envelopes on a, b and f");
      const auto& bundle = *ev.bundle();
      const auto env = problem_envelope(spec);
      const auto& dc = cfg.derivative_check;
      std::vector<double> y = dc.y;
      if (y.empty()) y.assign(static_cast<std::size_t>(spec.box.dim), 0.0);
      if (static_cast<int>(y.size()) != spec.box.dim)
        throw ValidationError("'derivative_check.y' has " + std::to_string(y.size()) + " entries, expected " +
                              std::to_string(spec.box.dim));
      const auto norm = parse_norm_kind(dc.norm);
      const auto& solver = ev.solver();
      res.meta["radii"] = env.radii.to_json();
      res.meta["delta"] = env.delta;
      res.checks.push_back(gevrey_bound_check(solver, bundle, env, MultiIndex(), y, dc.fd, norm, cfg.problem.tol));
      for (const auto& nu : check_indices(dc, spec.box.dim))
        res.checks.push_back(gevrey_bound_check(solver, bundle, env, nu, y, dc.fd, norm, cfg.problem.tol));
      if (dc.laplacian) {
        res.checks.push_back(laplacian_bound_check(solver, bundle, env, y, MultiIndex(), dc.fd, cfg.problem.tol));
        for (int j = 1; j <= spec.box.dim; ++j)
          res.checks.push_back(laplacian_bound_check(solver, bundle, env, y, MultiIndex::unit(j), dc.fd, cfg.problem.tol));
      }
      for (const auto& [k, nu] : dc.power)
        res.checks.push_back(power_derivative_check(solver, bundle, env, y, k, MultiIndex::parse(nu), dc.fd, cfg.problem.tol));
      double worst = 0;
      for (const auto& c : res.checks) worst = std::max(worst, c.ratio);
      res.meta["max_ratio"] = worst;
    }
  } catch (const std::exception& e) {
    res.partial = true;
    res.failure = e.what();
    finish();
    if (partial_out) *partial_out = res;
    throw;
  }
  finish();
  return res;
}

void write_outputs(const RunResult& result, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
  auto open = [&](const std::string& name) {
    std::ofstream out(fs::path(dir) / name, std::ios::binary);
    if (!out) throw IoError("cannot write '" + (fs::path(dir) / name).string() + "'");
    return out;
  };
  {
    auto out = open("sweep.csv");
    out << "n,error\n";
    char buf[64];
    for (const auto& r : result.rows) {
      std::snprintf(buf, sizeof buf, "%d,%.17g\n", r.n, r.error);
      out << buf;
    }
  }
  {
    json f;
    if (result.fit) {
      f = fit_json(*result.fit);
    } else {
      f = {{"warning", result.rows.empty() ? "no sweep rows; fit omitted" : "too few rows above the noise floor; fit omitted"}};
    }
    f["reference"] = result.reference;
    f["noise_floor"] = result.noise_floor;
    auto out = open("fit.json");
    out << f.dump(2) << '\n';
  }
  {
    json m = result.meta;
    m["experiment"] = to_string(result.kind);
    m["partial"] = result.partial;
    if (result.partial) m["failure"] = result.failure;
    json rows = json::array();
    for (const auto& r : result.rows) rows.push_back({{"n", r.n}, {"error", r.error}, {"estimates", r.estimates}});
    m["rows"] = rows;
    auto out = open("meta.json");
    out << m.dump(2) << '\n';
  }
  if (!result.checks.empty()) {
    auto out = open("checks.csv");
    write_reports_csv(out, result.checks);
  }
  if (result.suite) {
    json s = {{"checks", result.suite->checks}, {"failures", result.suite->failures}, {"passed", result.suite->passed()}};
    if (result.suite->first_counterexample) s["first_counterexample"] = *result.suite->first_counterexample;
    auto out = open("suite.json");
    out << s.dump(2) << '\n';
  }
}

std::vector<SweepRow> read_sweep_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line != "n,error") throw IoError("'" + path + "' lacks the header n,error");
  std::vector<SweepRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw IoError("malformed row in '" + path + "': " + line);
    SweepRow r;
    r.n = std::stoi(line.substr(0, comma));
    r.error = std::strtod(line.c_str() + comma + 1, nullptr);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace gevrey
