#pragma once

// Explicit constants of the regularity theory and the Gevrey envelopes that
// turn them into pass/fail thresholds.

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

#include "gevrey/combinatorics.hpp"

namespace gevrey {

// j -> R_j. Infinite radii describe coefficients that do not depend on y.
struct RadiiRule {
  enum class Kind { Constant, Sequence, PowerLaw, Infinite };
  Kind kind = Kind::Infinite;
  double value = 0;          // Constant
  std::vector<double> seq;   // Sequence; entries past the end repeat the last one
  double r0 = 0, power = 0;  // PowerLaw: r0 * j^power

  static RadiiRule constant(double r);
  static RadiiRule sequence(std::vector<double> radii);
  static RadiiRule power_law(double r0, double power);
  static RadiiRule infinite();

  /// R_j for 1-based j.
  double operator()(int j) const;
  bool is_infinite() const { return kind == Kind::Infinite; }
  /// sum_j nu_j log R_j (+inf if any factor is infinite).
  double log_power(const MultiIndex& nu) const;

  nlohmann::json to_json() const;
  static RadiiRule from_json(const nlohmann::json& j);
};

struct GevreyEnvelope {
  double scale = 0;  // C-bar. Zero is allowed only for identically vanishing fields.
  double delta = 1;
  RadiiRule radii;
  // Provenance of the radii: "analytic", "y-independent", "fd-calibrated ...", "user".
  std::string radii_note;

  void validate() const;
  nlohmann::json to_json() const;
  static GevreyEnvelope from_json(const nlohmann::json& j);
};

enum class EnvelopeForm { Assumption, Halved };

/// Assumption form: (C/2) (|nu|!)^delta / (2R)^nu.
/// Halved form:     C [1/2]_{|nu|} (|nu|!)^(delta-1) / R^nu.
double envelope_bound(const GevreyEnvelope& env, const MultiIndex& nu, EnvelopeForm form);

/// log([1/2]_n) and log(n!) with the |nu| > 20 switch to lgamma.
double log_half_ff(int n);
double log_factorial(int n);

bool admissible(int d, int m);

struct EmbeddingMethod {
  enum class Kind { PoincareChain, RayleighNumeric, Override };
  Kind kind = Kind::PoincareChain;
  double value = 0;  // Override
  int mesh_n = 64;
  double safety = 1.05;
  int max_iter = 2000;

  static EmbeddingMethod poincare_chain() { return {}; }
  static EmbeddingMethod rayleigh(int mesh_n = 64, double safety = 1.05) {
    return {Kind::RayleighNumeric, 0, mesh_n, safety, 2000};
  }
  static EmbeddingMethod override_value(double v) { return {Kind::Override, v, 64, 1.0, 0}; }
};

/// Constant C with ||u||_{L^p} <= C |u|_{H^1_0} on the unit square.
double embedding_constant(int p, const EmbeddingMethod& method = {});

/// Unsafeguarded discrete maximum of ||u_h||_{L^p} / |u_h|_{H^1} on an n x n
/// mesh; `iterations` receives the iteration count.
double rayleigh_quotient_max(int p, int mesh_n, int max_iter, int* iterations = nullptr);

struct AssumptionMode {
  enum class Kind { GeneralB, PositiveBOddM };
  Kind kind = Kind::PositiveBOddM;

  static AssumptionMode general_b() { return {Kind::GeneralB}; }
  static AssumptionMode positive_b() { return {Kind::PositiveBOddM}; }
  std::string name() const { return kind == Kind::GeneralB ? "general-b" : "positive-b-odd-m"; }
};

struct ConstantInputs {
  double a_bar = 0, b_bar = 0, f_bar = 0;
  int m = 1;
  int d = 2;
  AssumptionMode mode;
  double c_m = 1;             // H^1_0 -> L^{m+1}
  double c_1 = 0;             // H^1_0 -> L^2; 0 means poincare-chain
  double c_2m_minus_1 = 0;    // H^1_0 -> L^{2m}; 0 means poincare-chain
};

struct ConstantBundle {
  double u_bar = 0, c_A = 0, c_u = 0, rho = 0, c_delta = 0, rho_tilde = 0;
  double c_m = 0, c_1 = 0, c_2m_minus_1 = 0;
  double a_bar = 0, b_bar = 0, f_bar = 0;
  int m = 1;
  AssumptionMode mode;
  double gamma = 0;  // only meaningful in general-b mode

  /// Right side of C_m^2 ||Delta u|| <= (1/2)(b (u/C_m)^m + C_m a u + C_m f).
  double laplacian_base_bound() const;

  nlohmann::json to_json() const;
};

/// Derives gamma in general-b mode and rejects inconsistent inputs.
ConstantBundle theory_constants(const ConstantInputs& in);

enum class NormKind { V, H1, H2, LaplacianL2 };
std::string to_string(NormKind k);
NormKind parse_norm_kind(const std::string& s);

/// Bounds on parametric derivatives of the solution; |nu| >= 1.
double derivative_bound(const ConstantBundle& b, const RadiiRule& radii, const MultiIndex& nu, double delta,
                        NormKind norm);

/// 3^(k-1) C_u^k rho^(|nu|-1) [1/2]_{|nu|} (|nu|!)^(delta-1) / R^nu, bound for
/// ||d^nu (u^k)|| in L^{(m+1)/k}; |nu| >= 1.
double power_derivative_bound(const ConstantBundle& b, const RadiiRule& radii, const MultiIndex& nu, double delta,
                              int k);

}  // namespace gevrey
