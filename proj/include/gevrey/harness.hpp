#pragma once

// Experiment configuration, sweeps, rate fits and result files.

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

#include "gevrey/semilinear.hpp"
#include "gevrey/verification.hpp"

namespace gevrey {

enum class ExperimentKind { GaussSweep, QmcSweep, McSweep, DerivativeCheck, Suite };
enum class RateModel { SemilogN, SemilogSqrtN, LogLog };

std::string to_string(ExperimentKind k);
std::string to_string(RateModel m);

struct ReferenceSpec {
  enum class Kind { SelfFinest, Explicit, Gauss, Qmc };
  Kind kind = Kind::Gauss;
  double value = 0;          // Explicit
  int n = 0;                 // Gauss / Qmc
  std::uint64_t seed = 0;    // Qmc
};

// Field given by built-in name or closed-form expression.
struct FieldConfig {
  std::string name;                        // built-in, empty for expressions
  std::string expr;
  int param_dim = 0;
  double half_width = 0.5;
  std::optional<GevreyEnvelope> envelope;
  std::string label;

  ParamField build() const;
  nlohmann::json to_json() const;
};

struct ProblemConfig {
  int m = 3;
  std::string c_m = "1";                   // number, "poincare-chain" or "rayleigh"
  FieldConfig a, b, f;
  std::string mode = "positive-b";
  int mesh_n = 32;
  int quad_degree = 4;
  std::string solver = "direct-cholesky";
  double solve_rel_tol = 1e-13;
  double tol = 1e-12;                      // fixed-point tolerance
  int max_iter = 200;
  double c_1 = 0, c_2m_minus_1 = 0;        // 0: poincare-chain
  Qoi qoi;

  ProblemSpec build() const;
};

struct DerivativeCheckConfig {
  std::vector<double> y;                   // empty: centre of the box
  int max_order = 2;                       // all nu with 1 <= |nu| <= max_order
  std::vector<std::string> indices;        // explicit list instead, when non-empty
  std::string norm = "H1";
  FdScheme fd;
  bool laplacian = true;                   // nu = 0 and every |nu| = 1 index
  std::vector<std::pair<int, std::string>> power;  // (k, nu)
};

struct ExperimentConfig {
  int schema_version = 1;
  ExperimentKind experiment = ExperimentKind::GaussSweep;
  std::string profile = "desk";
  ProblemConfig problem;
  std::vector<int> n_values;
  ReferenceSpec reference;
  int R = 8;
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  RateModel rate_model = RateModel::SemilogN;
  double lattice_weight_decay = 5;
  std::string generating_vector_file;      // optional, used for every n it matches
  double noise_window = 10;
  int threads = 0;
  DerivativeCheckConfig derivative_check;
  SuiteDepth suite_depth = SuiteDepth::Quick;

  /// Fully expanded form; from_json(to_json()) reproduces the config.
  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
  void validate() const;
};

/// Parse errors report line and column; validation errors name the field.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const std::string& text);

struct SweepRow {
  int n = 0;
  double error = 0;
  std::vector<double> estimates;           // per shift / replicate, or the single rule value
};

struct RateFit {
  double slope = 0, intercept = 0, r_squared = 0;
  RateModel model = RateModel::SemilogN;
  int used = 0;                            // rows inside the fit window
};

/// Least squares of log(error) on n, sqrt(n) or log(n). Rows with error 0 or
/// error <= noise_floor * window are skipped.
RateFit fit_rate(const std::vector<SweepRow>& rows, RateModel model, double noise_floor = 0, double window = 10);

struct RunResult {
  ExperimentKind kind = ExperimentKind::GaussSweep;
  std::vector<SweepRow> rows;
  std::optional<RateFit> fit;
  double reference = 0;
  double noise_floor = 0;
  std::vector<BoundCheckReport> checks;
  std::optional<SuiteReport> suite;
  bool partial = false;                    // aborted by a solver failure
  std::string failure;
  nlohmann::json meta;

  bool passed_checks() const;
};

/// Throws on failure after storing what was computed in `partial_out` when given.
RunResult run_experiment(const ExperimentConfig& cfg, RunResult* partial_out = nullptr);

/// sweep.csv, fit.json, meta.json (+ checks.csv, suite.json). Byte-identical
/// for identical inputs.
void write_outputs(const RunResult& result, const std::string& dir);

std::vector<SweepRow> read_sweep_csv(const std::string& path);

}  // namespace gevrey
