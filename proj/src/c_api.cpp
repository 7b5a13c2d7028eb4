#include "gevrey/gevrey.h"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <new>
#include <string>
#include <vector>

#include "gevrey/combinatorics.hpp"
#include "gevrey/error.hpp"
#include "gevrey/harness.hpp"
#include "gevrey/integrators.hpp"

struct gv_config {
  gevrey::ExperimentConfig cfg;
};

struct gv_result {
  gevrey::RunResult res;
};

namespace {

thread_local std::string last_error;

gv_status fail(gv_status s, const std::string& msg) {
  last_error = msg;
  return s;
}

template <class Fn>
gv_status guard(Fn&& fn) {
  try {
    last_error.clear();
    fn();
    return GV_OK;
  } catch (const gevrey::ValidationError& e) {
    return fail(GV_ERR_VALIDATION, e.what());
  } catch (const gevrey::NumericalError& e) {
    return fail(GV_ERR_NUMERICAL, e.what());
  } catch (const gevrey::IoError& e) {
    return fail(GV_ERR_IO, e.what());
  } catch (const std::bad_alloc&) {
    return fail(GV_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(GV_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(GV_ERR_INTERNAL, "unknown failure");
  }
}

char* dup(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

#define GV_REQUIRE(cond, what) \
  if (!(cond)) return fail(GV_ERR_INVALID_ARGUMENT, what)

}  // namespace

extern "C" {

const char* gv_version(void) { return "0.1.0"; }
const char* gv_last_error(void) { return last_error.c_str(); }
void gv_string_free(char* s) { std::free(s); }

gv_status gv_config_load(const char* path, gv_config** out) {
  GV_REQUIRE(path && out, "null argument");
  *out = nullptr;
  return guard([&] { *out = new gv_config{gevrey::load_config(path)}; });
}

gv_status gv_config_from_json(const char* text, gv_config** out) {
  GV_REQUIRE(text && out, "null argument");
  *out = nullptr;
  return guard([&] { *out = new gv_config{gevrey::parse_config(text)}; });
}

gv_status gv_config_set_seed(gv_config* cfg, uint64_t seed) {
  GV_REQUIRE(cfg, "null config");
  return guard([&] {
    const bool follow = cfg->cfg.reference.kind == gevrey::ReferenceSpec::Kind::Qmc &&
                        cfg->cfg.reference.seed == cfg->cfg.seed + 1;
    cfg->cfg.seed = seed;
    if (follow) cfg->cfg.reference.seed = seed + 1;
  });
}

gv_status gv_config_set_output_dir(gv_config* cfg, const char* dir) {
  GV_REQUIRE(cfg && dir, "null argument");
  return guard([&] { cfg->cfg.output_dir = dir; });
}

gv_status gv_config_set_threads(gv_config* cfg, int threads) {
  GV_REQUIRE(cfg, "null config");
  GV_REQUIRE(threads >= 0, "threads must be >= 0");
  cfg->cfg.threads = threads;
  return GV_OK;
}

gv_status gv_config_experiment(const gv_config* cfg, const char** name) {
  GV_REQUIRE(cfg && name, "null argument");
  switch (cfg->cfg.experiment) {
    case gevrey::ExperimentKind::GaussSweep: *name = "gauss-sweep"; break;
    case gevrey::ExperimentKind::QmcSweep: *name = "qmc-sweep"; break;
    case gevrey::ExperimentKind::McSweep: *name = "mc-sweep"; break;
    case gevrey::ExperimentKind::DerivativeCheck: *name = "derivative-check"; break;
    case gevrey::ExperimentKind::Suite: *name = "suite"; break;
  }
  return GV_OK;
}

gv_status gv_config_output_dir(const gv_config* cfg, char** out) {
  GV_REQUIRE(cfg && out, "null argument");
  return guard([&] { *out = dup(cfg->cfg.output_dir); });
}

gv_status gv_config_to_json(const gv_config* cfg, char** out) {
  GV_REQUIRE(cfg && out, "null argument");
  return guard([&] { *out = dup(cfg->cfg.to_json().dump(2)); });
}

void gv_config_free(gv_config* cfg) { delete cfg; }

gv_status gv_run(const gv_config* cfg, gv_result** out) {
  GV_REQUIRE(cfg && out, "null argument");
  *out = nullptr;
  gevrey::RunResult partial;
  const gv_status s = guard([&] { *out = new gv_result{gevrey::run_experiment(cfg->cfg, &partial)}; });
  if (s == GV_ERR_NUMERICAL && partial.partial) {
    const std::string msg = last_error;
    guard([&] { *out = new gv_result{std::move(partial)}; });
    last_error = msg;
  }
  return s;
}

gv_status gv_result_num_rows(const gv_result* r, size_t* count) {
  GV_REQUIRE(r && count, "null argument");
  *count = r->res.rows.size();
  return GV_OK;
}

gv_status gv_result_row(const gv_result* r, size_t i, int* n, double* error) {
  GV_REQUIRE(r && n && error, "null argument");
  GV_REQUIRE(i < r->res.rows.size(), "row index out of range");
  *n = r->res.rows[i].n;
  *error = r->res.rows[i].error;
  return GV_OK;
}

gv_status gv_result_fit(const gv_result* r, int* has_fit, double* slope, double* intercept, double* r_squared) {
  GV_REQUIRE(r && has_fit && slope && intercept && r_squared, "null argument");
  *has_fit = r->res.fit.has_value();
  *slope = *intercept = *r_squared = 0;
  if (r->res.fit) {
    *slope = r->res.fit->slope;
    *intercept = r->res.fit->intercept;
    *r_squared = r->res.fit->r_squared;
  }
  return GV_OK;
}

gv_status gv_result_checks(const gv_result* r, size_t* total, size_t* failed) {
  GV_REQUIRE(r && total && failed, "null argument");
  *total = r->res.checks.size();
  *failed = 0;
  for (const auto& c : r->res.checks) *failed += !c.passed;
  if (r->res.suite) {
    *total += static_cast<size_t>(r->res.suite->checks);
    *failed += static_cast<size_t>(r->res.suite->failures);
  }
  return GV_OK;
}

gv_status gv_result_partial(const gv_result* r, int* partial) {
  GV_REQUIRE(r && partial, "null argument");
  *partial = r->res.partial;
  return GV_OK;
}

gv_status gv_result_summary_json(const gv_result* r, char** out) {
  GV_REQUIRE(r && out, "null argument");
  return guard([&] {
    const auto& res = r->res;
    nlohmann::json j = {{"experiment", gevrey::to_string(res.kind)}, {"rows", res.rows.size()},
                        {"reference", res.reference}, {"noise_floor", res.noise_floor}, {"partial", res.partial}};
    if (res.partial) j["failure"] = res.failure;
    if (res.fit)
      j["fit"] = {{"slope", res.fit->slope}, {"r_squared", res.fit->r_squared}, {"model", gevrey::to_string(res.fit->model)},
                  {"rows_used", res.fit->used}};
    if (!res.checks.empty()) {
      int failed = 0;
      double worst = 0;
      for (const auto& c : res.checks) {
        failed += !c.passed;
        worst = std::max(worst, c.ratio);
      }
      j["checks"] = {{"total", res.checks.size()}, {"failed", failed}, {"max_ratio", worst}};
    }
    if (res.suite) j["suite"] = {{"checks", res.suite->checks}, {"failures", res.suite->failures}};
    *out = dup(j.dump());
  });
}

gv_status gv_result_write(const gv_result* r, const char* dir) {
  GV_REQUIRE(r && dir, "null argument");
  return guard([&] { gevrey::write_outputs(r->res, dir); });
}

void gv_result_free(gv_result* r) { delete r; }

gv_status gv_constants_json(const gv_config* cfg, char** out) {
  GV_REQUIRE(cfg && out, "null argument");
  return guard([&] {
    const auto spec = cfg->cfg.problem.build();
    spec.validate();
    *out = dup(gevrey::theory_constants(spec).to_json().dump(2));
  });
}

gv_status gv_half_falling_factorial(unsigned n, char** out) {
  GV_REQUIRE(out, "null argument");
  return guard([&] { *out = dup(gevrey::to_string(gevrey::half_falling_factorial(n))); });
}

gv_status gv_gauss_rule(int n, double* nodes, double* weights) {
  GV_REQUIRE(nodes && weights, "null argument");
  return guard([&] {
    const auto rule = gevrey::gauss_rule(n);
    for (int i = 0; i < n; ++i) {
      nodes[i] = rule.nodes[i];
      weights[i] = rule.weights[i];
    }
  });
}

gv_status gv_fit_rate(const int* n, const double* error, size_t count, gv_rate_model model, double noise_floor,
                      double window, double* slope, double* intercept, double* r_squared) {
  GV_REQUIRE((n && error) || count == 0, "null argument");
  GV_REQUIRE(slope && intercept && r_squared, "null argument");
  GV_REQUIRE(model >= GV_RATE_SEMILOG_N && model <= GV_RATE_LOGLOG, "unknown rate model");
  return guard([&] {
    std::vector<gevrey::SweepRow> rows;
    for (size_t i = 0; i < count; ++i) rows.push_back({n[i], error[i], {}});
    const auto f = gevrey::fit_rate(rows, static_cast<gevrey::RateModel>(model), noise_floor, window);
    *slope = f.slope;
    *intercept = f.intercept;
    *r_squared = f.r_squared;
  });
}

gv_status gv_embedding_constant(int p, const char* method, double* out) {
  GV_REQUIRE(method && out, "null argument");
  return guard([&] {
    const std::string m = method;
    if (m == "poincare-chain") {
      *out = gevrey::embedding_constant(p, gevrey::EmbeddingMethod::poincare_chain());
    } else if (m == "rayleigh") {
      *out = gevrey::embedding_constant(p, gevrey::EmbeddingMethod::rayleigh());
    } else {
      throw gevrey::ValidationError("method must be poincare-chain or rayleigh");
    }
  });
}

}  // extern "C"
