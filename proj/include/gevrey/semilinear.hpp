#pragma once

// Fixed-point solver for -C_m^2 div(a grad u) + b u^m = C_m f, u = 0 on the
// boundary of the unit square.

#include <json.hpp>

#include <memory>
#include <span>
#include <vector>

#include "gevrey/fem.hpp"
#include "gevrey/fields.hpp"
#include "gevrey/regularity_constants.hpp"

namespace gevrey {

struct ProblemSpec {
  int d = 2;
  int m = 3;
  double c_m = 1.0;
  ParamField a, b, f;
  AssumptionMode mode;
  ParameterBox box;
  int mesh_n = 32;
  int quad_degree = 4;
  double solve_rel_tol = 1e-13;  // linear solves (CG only)
  SolveMethod method = SolveMethod::DirectCholesky;
  // Optional embedding constants for the Laplacian/H2 chain; 0 -> poincare-chain.
  double c_1 = 0, c_2m_minus_1 = 0;

  /// Checks admissibility, field dimensions and the sign condition of the
  /// chosen assumption mode.
  void validate() const;
  nlohmann::json to_json() const;
};

ConstantBundle theory_constants(const ProblemSpec& spec);

struct FixedPointTrace {
  enum class Status { Converged, MaxIterations, Diverged };
  std::vector<double> iterate_norms;  // |u_{n+1}|_{H^1_0}
  std::vector<double> diffs;          // |u_{n+1} - u_n|_{H^1_0}
  int iterations = 0;
  bool converged = false;
  Status status = Status::MaxIterations;

  std::string status_name() const;
};

struct SolveResult {
  FemFunction u;
  FixedPointTrace trace;
};

// Mesh, quadrature, prepared coefficients and (for y-independent a) the
// factored stiffness matrix, shared by all solves at different y.
class SemilinearSolver {
 public:
  explicit SemilinearSolver(ProblemSpec spec);

  SolveResult solve(std::span<const double> y, double tol, int max_iter = 200) const;

  const ProblemSpec& spec() const { return spec_; }
  const MeshQuadrature& quadrature() const { return quad_; }
  std::shared_ptr<const Mesh> mesh() const { return quad_.mesh; }
  /// |u|_{H^1_0} through the a = 1 stiffness matrix.
  double seminorm(std::span<const double> interior) const;

 private:
  ProblemSpec spec_;
  MeshQuadrature quad_;
  std::unique_ptr<PreparedField> a_, b_, f_;
  SparseSymMatrix unit_stiffness_;
  std::shared_ptr<const SpdSolver> fixed_solver_;
};

SolveResult fixed_point_solve(const ProblemSpec& spec, std::span<const double> y, double tol, int max_iter = 200);

struct ContractionReport {
  double max_ratio = 0;
  std::vector<double> ratios;  // diffs[k+1] / diffs[k]
  int used = 0;                // ratios entering max_ratio
};

/// max over k >= 1 of the ratios whose numerator lies above noise_floor.
ContractionReport contraction_diagnostics(const FixedPointTrace& trace, double noise_floor = 1e-13);

struct StrongLaplacian {
  std::vector<double> values;  // Delta u at the quadrature points
  double l2 = 0;               // ||Delta u||_{L^2}
};

/// Delta u = (b u^m - C_m^2 grad a . grad u - C_m f) / (C_m^2 a).
StrongLaplacian strong_laplacian(const SemilinearSolver& solver, std::span<const double> y, const FemFunction& u);

struct Qoi {
  enum class Kind { Mean, Point };
  Kind kind = Kind::Mean;
  Point x0{0.5, 0.5};

  static Qoi mean() { return {}; }
  static Qoi point(Point x = {0.5, 0.5}) { return {Kind::Point, x}; }
  nlohmann::json to_json() const;
};

double qoi(const FemFunction& u, const Qoi& kind);

nlohmann::json solve_record(std::span<const double> y, const SolveResult& r, const std::vector<Qoi>& qois);

}  // namespace gevrey
