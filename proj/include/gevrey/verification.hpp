#pragma once

// Finite-difference checks of the parametric regularity bounds, and the
// exact combinatorial suite.

#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gevrey/combinatorics.hpp"
#include "gevrey/regularity_constants.hpp"
#include "gevrey/semilinear.hpp"

namespace gevrey {

struct FdScheme {
  int order = 2;        // 2 or 4
  double step = 1e-3;   // in [1e-6, 0.1]
  bool richardson = false;
  void validate() const;
};

/// Applies the nested central-difference stencil for nu to an arbitrary
/// vector-valued function of y; 1-D stencils in ascending dimension order.
/// Every stencil point must lie in `box`. |nu| <= 3.
std::vector<double> fd_apply(const std::function<std::vector<double>(std::span<const double>)>& g,
                             std::span<const double> y, const MultiIndex& nu, const FdScheme& scheme,
                             const ParameterBox& box, int threads = 0);

/// FD approximation of d^nu u(y); nu = 0 is the solve itself.
FemFunction fd_partial(const SemilinearSolver& solver, std::span<const double> y, const MultiIndex& nu,
                       const FdScheme& scheme, double tol = 1e-12, int threads = 0);

/// Radii (componentwise minimum) and delta (maximum) over the y-dependent
/// coefficients. Infinite radii when nothing depends on y.
struct ProblemEnvelope {
  RadiiRule radii;
  double delta = 1;
};
ProblemEnvelope problem_envelope(const ProblemSpec& spec);

struct BoundCheckReport {
  MultiIndex nu;
  std::string norm;
  double measured = 0;
  double bound = 0;
  double ratio = 0;
  bool passed = false;
};

inline constexpr double kBoundTolerance = 1e-2;

/// nu = 0: C_m |u|_{H^1} against u_bar. Otherwise the FD derivative in the
/// V or H1 norm against derivative_bound.
BoundCheckReport gevrey_bound_check(const SemilinearSolver& solver, const ConstantBundle& bundle,
                                    const ProblemEnvelope& env, const MultiIndex& nu, std::span<const double> y,
                                    const FdScheme& scheme, NormKind norm = NormKind::H1, double tol = 1e-12);

/// L^{(m+1)/k} norm of the FD nu-derivative of (I_h u)^k against
/// power_derivative_bound. 1 <= |nu| <= 2, 1 <= k <= m + 1.
BoundCheckReport power_derivative_check(const SemilinearSolver& solver, const ConstantBundle& bundle,
                                        const ProblemEnvelope& env, std::span<const double> y, int k,
                                        const MultiIndex& nu, const FdScheme& scheme, double tol = 1e-12);
/// Same measurement for an arbitrary family y -> u(y) on a mesh.
double power_derivative_measure(const MeshQuadrature& q, const std::function<FemFunction(std::span<const double>)>& u,
                                std::span<const double> y, int k, int m, const MultiIndex& nu, const FdScheme& scheme,
                                const ParameterBox& box);

/// C_m^2 |d^nu Delta u|_{L^2}, Delta u from the strong form; nu = 0 against
/// the base bound, |nu| = 1 against the laplacian-L2 derivative bound.
BoundCheckReport laplacian_bound_check(const SemilinearSolver& solver, const ConstantBundle& bundle,
                                       const ProblemEnvelope& env, std::span<const double> y, const MultiIndex& nu,
                                       const FdScheme& scheme, double tol = 1e-12);

/// Header "nu,norm,measured,bound,ratio,passed".
void write_reports_csv(std::ostream& os, const std::vector<BoundCheckReport>& rows);

enum class SuiteDepth { Quick, Full };

struct SuiteReport {
  long long checks = 0;
  long long failures = 0;
  std::optional<std::string> first_counterexample;  // kind, argument, exact lhs and rhs
  bool passed() const { return failures == 0; }
};

/// quick: n <= 12 and 50 random multi-indices; full: n <= 25 and 200.
SuiteReport invariants_suite(SuiteDepth depth, std::uint64_t seed = 2024);

}  // namespace gevrey
