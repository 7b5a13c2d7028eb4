// Command-line front end over the C API.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "gevrey/gevrey.h"

namespace {

int exit_code(gv_status s) {
  switch (s) {
    case GV_OK: return 0;
    case GV_ERR_VALIDATION:
    case GV_ERR_INVALID_ARGUMENT: return 2;
    case GV_ERR_NUMERICAL: return 3;
    default: return 1;
  }
}

int report(gv_status s, const std::string& what) {
  std::fprintf(stderr, "gevrey: %s: %s\n", what.c_str(), gv_last_error());
  return exit_code(s);
}

std::string take(char* s) {
  std::string out = s ? s : "";
  gv_string_free(s);
  return out;
}

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

gv_status load(const std::string& sub, const Options& o, gv_config** cfg) {
  if (o.config.empty()) {
    if (sub != "suite") return GV_ERR_VALIDATION;
    return gv_config_from_json(R"({"schema_version":1,"experiment":"suite"})", cfg);
  }
  return gv_config_load(o.config.c_str(), cfg);
}

int run(const std::string& sub, const Options& o) {
  static const std::map<std::string, std::string> expected = {{"gauss", "gauss-sweep"},  {"qmc", "qmc-sweep"},
                                                              {"mc", "mc-sweep"},        {"fdcheck", "derivative-check"},
                                                              {"suite", "suite"},        {"constants", ""}};
  gv_config* cfg = nullptr;
  gv_status s = load(sub, o, &cfg);
  if (s != GV_OK) {
    if (o.config.empty()) {
      std::fprintf(stderr, "gevrey: %s needs --config\n", sub.c_str());
      return 2;
    }
    return report(s, "config");
  }
  struct Free {
    gv_config* c;
    ~Free() { gv_config_free(c); }
  } guard{cfg};

  if (sub == "constants") {
    char* js = nullptr;
    s = gv_constants_json(cfg, &js);
    if (s != GV_OK) return report(s, "constants");
    std::cout << take(js) << '\n';
    return 0;
  }
  const char* kind = nullptr;
  gv_config_experiment(cfg, &kind);
  if (expected.at(sub) != kind) {
    std::fprintf(stderr, "gevrey: config describes a %s experiment, not %s\n", kind, expected.at(sub).c_str());
    return 2;
  }
  if (o.seed && (s = gv_config_set_seed(cfg, *o.seed)) != GV_OK) return report(s, "seed");
  if (o.threads && (s = gv_config_set_threads(cfg, *o.threads)) != GV_OK) return report(s, "threads");
  if (!o.out.empty()) gv_config_set_output_dir(cfg, o.out.c_str());
  char* dir_c = nullptr;
  gv_config_output_dir(cfg, &dir_c);
  const std::string dir = take(dir_c);

  gv_result* res = nullptr;
  const gv_status rs = gv_run(cfg, &res);
  const std::string failure = rs == GV_OK ? "" : gv_last_error();
  if (res) {
    const gv_status ws = gv_result_write(res, dir.c_str());
    char* summary = nullptr;
    gv_result_summary_json(res, &summary);
    std::cout << take(summary) << '\n';
    size_t total = 0, failed = 0;
    gv_result_checks(res, &total, &failed);
    gv_result_free(res);
    if (ws != GV_OK) return report(ws, "write");
    if (rs != GV_OK) {
      std::fprintf(stderr, "gevrey: run aborted, partial results in %s: %s\n", dir.c_str(), failure.c_str());
      return exit_code(rs);
    }
    if (failed > 0) {
      std::fprintf(stderr, "gevrey: %zu of %zu checks failed\n", failed, total);
      return 1;
    }
    return 0;
  }
  std::fprintf(stderr, "gevrey: run: %s\n", failure.c_str());
  return exit_code(rs);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Parametric semilinear reaction-diffusion: regularity checks and quadrature sweeps"};
  app.set_version_flag("--version", std::string(gv_version()));
  app.require_subcommand(1);
  Options o;
  std::uint64_t seed = 0;
  int threads = 0;
  const std::map<std::string, std::string> help = {
      {"suite", "exact combinatorial identity suite"},
      {"gauss", "Gauss-Legendre sweep in one parameter"},
      {"qmc", "randomly shifted lattice sweep"},
      {"mc", "Monte Carlo sweep"},
      {"fdcheck", "finite-difference checks of the derivative bounds"},
      {"constants", "print the constant chain of the configured problem"}};
  for (const auto& [name, text] : help) {
    auto* sub = app.add_subcommand(name, text);
    sub->add_option("--config", o.config, "JSON config (schema_version 1)")->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "output directory (overrides output_dir)");
    sub->add_option("--seed", seed, "seed (overrides the config)");
    sub->add_option("--threads", threads, "worker threads, 0 = all cores")->check(CLI::NonNegativeNumber);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  const auto* sub = app.get_subcommands().front();
  if (sub->count("--seed")) o.seed = seed;
  if (sub->count("--threads")) o.threads = threads;
  return run(sub->get_name(), o);
}
