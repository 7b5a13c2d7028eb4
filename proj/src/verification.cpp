#include "gevrey/verification.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "gevrey/error.hpp"
#include "gevrey/parallel.hpp"
#include "gevrey/rng.hpp"

namespace gevrey {

void FdScheme::validate() const {
  if (order != 2 && order != 4) throw ValidationError("FD order must be 2 or 4");
  if (!(step >= 1e-6 && step <= 0.1)) throw ValidationError("FD step must lie in [1e-6, 0.1]");
}

namespace {

using Stencil = std::vector<std::pair<int, double>>;  // (offset in steps, weight)

const Stencil& stencil(int order, int k) {
  static const Stencil o2[3] = {
      {{-1, -0.5}, {1, 0.5}},
      {{-1, 1.0}, {0, -2.0}, {1, 1.0}},
      {{-2, -0.5}, {-1, 1.0}, {1, -1.0}, {2, 0.5}},
  };
  static const Stencil o4[3] = {
      {{-2, 1.0 / 12}, {-1, -8.0 / 12}, {1, 8.0 / 12}, {2, -1.0 / 12}},
      {{-2, -1.0 / 12}, {-1, 16.0 / 12}, {0, -30.0 / 12}, {1, 16.0 / 12}, {2, -1.0 / 12}},
      {{-3, 1.0 / 8}, {-2, -1.0}, {-1, 13.0 / 8}, {1, -13.0 / 8}, {2, 1.0}, {3, -1.0 / 8}},
  };
  return order == 2 ? o2[k - 1] : o4[k - 1];
}

std::vector<double> fd_raw(const std::function<std::vector<double>(std::span<const double>)>& g,
                           std::span<const double> y, const MultiIndex& nu, int order, double h,
                           const ParameterBox& box, int threads) {
  // tensor product of the 1-D stencils, dimensions ascending
  struct Node {
    std::vector<double> y;
    double w;
  };
  std::vector<Node> nodes{{std::vector<double>(y.begin(), y.end()), 1.0}};
  double scale = 1;
  for (const auto& [dim, k] : nu.entries()) {
    if (dim > static_cast<int>(y.size()))
      throw ValidationError("multi-index " + nu.to_string() + " addresses dimension " + std::to_string(dim) +
                            " beyond the parameter dimension " + std::to_string(y.size()));
    std::vector<Node> next;
    for (const auto& node : nodes)
      for (const auto& [off, w] : stencil(order, k)) {
        Node n = node;
        n.y[dim - 1] += off * h;
        n.w *= w;
        next.push_back(std::move(n));
      }
    nodes = std::move(next);
    scale *= std::pow(h, k);
  }
  for (const auto& node : nodes)
    if (!box.contains(node.y))
      throw ValidationError("FD stencil for " + nu.to_string() + " with step " + std::to_string(h) +
                            " leaves the parameter box");
  std::vector<std::vector<double>> vals(nodes.size());
  parallel_for(
      nodes.size(), [&](std::size_t i) { vals[i] = g(nodes[i].y); }, threads);
  std::vector<double> out(vals.front().size(), 0.0);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (vals[i].size() != out.size()) throw NumericalError("FD stencil values have inconsistent sizes");
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += nodes[i].w * vals[i][k];
  }
  for (double& v : out) v /= scale;
  return out;
}

double weighted_lp(const MeshQuadrature& q, std::span<const double> v, double p) {
  double s = 0;
  for (std::size_t i = 0; i < q.size(); ++i) s += q.jw[i] * std::pow(std::abs(v[i]), p);
  return std::pow(s, 1 / p);
}

BoundCheckReport make_report(const MultiIndex& nu, std::string norm, double measured, double bound) {
  BoundCheckReport r{nu, std::move(norm), measured, bound, 0, false};
  r.ratio = bound > 0 ? measured / bound : (measured == 0 ? 0 : INFINITY);
  r.passed = r.ratio <= 1 + kBoundTolerance;
  return r;
}

void require_solved(const SolveResult& r, std::span<const double> y) {
  if (!r.trace.converged) {
    std::ostringstream os;
    os << "fixed-point solve did not converge at y = (";
    for (std::size_t i = 0; i < y.size() && i < 4; ++i) os << (i ? ", " : "") << y[i];
    os << (y.size() > 4 ? ", ...)" : ")") << ": " << r.trace.status_name();
    throw NumericalError(os.str());
  }
}

void check_bundle(const SemilinearSolver& solver, const ConstantBundle& bundle) {
  if (bundle.c_m != solver.spec().c_m || bundle.m != solver.spec().m)
    throw ValidationError("constant bundle does not belong to this problem (C_m or m differ)");
}

}  // namespace

std::vector<double> fd_apply(const std::function<std::vector<double>(std::span<const double>)>& g,
                             std::span<const double> y, const MultiIndex& nu, const FdScheme& scheme,
                             const ParameterBox& box, int threads) {
  scheme.validate();
  for (const auto& [dim, k] : nu.entries())
    if (k > 3) throw ValidationError("FD derivatives are limited to order 3 per direction");
  if (nu.order() > 3) throw ValidationError("FD derivatives are limited to |nu| <= 3");
  if (nu.is_zero()) return g(y);
  auto d = fd_raw(g, y, nu, scheme.order, scheme.step, box, threads);
  if (!scheme.richardson) return d;
  const auto half = fd_raw(g, y, nu, scheme.order, scheme.step / 2, box, threads);
  const double f = std::pow(2.0, scheme.order);
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = (f * half[i] - d[i]) / (f - 1);
  return d;
}

FemFunction fd_partial(const SemilinearSolver& solver, std::span<const double> y, const MultiIndex& nu,
                       const FdScheme& scheme, double tol, int threads) {
  if (!(tol > 0 && tol <= 1e-12)) throw ValidationError("FD solves need a tolerance in (0, 1e-12]");
  auto g = [&](std::span<const double> yy) {
    auto r = solver.solve(yy, tol);
    require_solved(r, yy);
    return r.u.interior();
  };
  return FemFunction::from_interior(solver.mesh(), fd_apply(g, y, nu, scheme, solver.spec().box, threads));
}

ProblemEnvelope problem_envelope(const ProblemSpec& spec) {
  ProblemEnvelope env;
  std::vector<const GevreyEnvelope*> finite;
  for (const ParamField* f : {&spec.a, &spec.b, &spec.f}) {
    if (f->y_independent() || f->param_dim() == 0) continue;
    if (!f->envelope()) throw ValidationError("field '" + f->label() + "' carries no envelope");
    env.delta = std::max(env.delta, f->envelope()->delta);
    if (!f->envelope()->radii.is_infinite()) finite.push_back(&*f->envelope());
  }
  if (finite.empty()) {
    env.radii = RadiiRule::infinite();
  } else if (finite.size() == 1) {
    env.radii = finite.front()->radii;
  } else {
    std::vector<double> seq;
    for (int j = 1; j <= std::max(spec.box.dim, 1); ++j) {
      double r = INFINITY;
      for (const auto* e : finite) r = std::min(r, e->radii(j));
      seq.push_back(r);
    }
    env.radii = RadiiRule::sequence(seq);
  }
  return env;
}

BoundCheckReport gevrey_bound_check(const SemilinearSolver& solver, const ConstantBundle& bundle,
                                    const ProblemEnvelope& env, const MultiIndex& nu, std::span<const double> y,
                                    const FdScheme& scheme, NormKind norm, double tol) {
  check_bundle(solver, bundle);
  if (norm != NormKind::V && norm != NormKind::H1)
    throw ValidationError("gevrey_bound_check measures the V or H1 norm; use laplacian_bound_check for Delta u");
  const double cm = solver.spec().c_m;
  if (nu.is_zero()) {
    auto r = solver.solve(y, tol);
    require_solved(r, y);
    return make_report(nu, "V", cm * solver.seminorm(r.u.interior()), bundle.u_bar);
  }
  if (nu.order() > 3) throw ValidationError("bound checks are limited to |nu| <= 3");
  const auto d = fd_partial(solver, y, nu, scheme, tol);
  const double h1 = solver.seminorm(d.interior());
  const double measured = norm == NormKind::V ? cm * h1 : h1;
  return make_report(nu, to_string(norm), measured, derivative_bound(bundle, env.radii, nu, env.delta, norm));
}

double power_derivative_measure(const MeshQuadrature& q, const std::function<FemFunction(std::span<const double>)>& u,
                                std::span<const double> y, int k, int m, const MultiIndex& nu, const FdScheme& scheme,
                                const ParameterBox& box) {
  if (k < 1 || k > m + 1) throw ValidationError("power k must satisfy 1 <= k <= m + 1");
  auto g = [&](std::span<const double> yy) {
    auto v = values_at_points(q, u(yy));
    for (double& x : v) x = std::pow(x, k);
    return v;
  };
  const auto d = fd_apply(g, y, nu, scheme, box);
  return weighted_lp(q, d, static_cast<double>(m + 1) / k);
}

BoundCheckReport power_derivative_check(const SemilinearSolver& solver, const ConstantBundle& bundle,
                                        const ProblemEnvelope& env, std::span<const double> y, int k,
                                        const MultiIndex& nu, const FdScheme& scheme, double tol) {
  check_bundle(solver, bundle);
  if (nu.is_zero() || nu.order() > 2) throw ValidationError("power-derivative checks need 1 <= |nu| <= 2");
  const int m = solver.spec().m;
  auto u = [&](std::span<const double> yy) {
    auto r = solver.solve(yy, tol);
    require_solved(r, yy);
    return r.u;
  };
  const double measured = power_derivative_measure(solver.quadrature(), u, y, k, m, nu, scheme, solver.spec().box);
  const std::string norm = "L(" + std::to_string(m + 1) + "/" + std::to_string(k) + ")";
  return make_report(nu, norm, measured, power_derivative_bound(bundle, env.radii, nu, env.delta, k));
}

BoundCheckReport laplacian_bound_check(const SemilinearSolver& solver, const ConstantBundle& bundle,
                                       const ProblemEnvelope& env, std::span<const double> y, const MultiIndex& nu,
                                       const FdScheme& scheme, double tol) {
  check_bundle(solver, bundle);
  if (nu.order() > 1) throw ValidationError("Laplacian checks are limited to |nu| <= 1");
  const double cm2 = solver.spec().c_m * solver.spec().c_m;
  auto g = [&](std::span<const double> yy) {
    auto r = solver.solve(yy, tol);
    require_solved(r, yy);
    return strong_laplacian(solver, yy, r.u).values;
  };
  const auto d = fd_apply(g, y, nu, scheme, solver.spec().box);
  const double measured = cm2 * weighted_lp(solver.quadrature(), d, 2.0);
  const double bound = nu.is_zero() ? bundle.laplacian_base_bound()
                                    : cm2 * derivative_bound(bundle, env.radii, nu, env.delta, NormKind::LaplacianL2);
  return make_report(nu, "laplacian-L2", measured, bound);
}

void write_reports_csv(std::ostream& os, const std::vector<BoundCheckReport>& rows) {
  os << "nu,norm,measured,bound,ratio,passed\n";
  char buf[128];
  for (const auto& r : rows) {
    os << '"' << r.nu.to_string() << "\"," << r.norm;
    std::snprintf(buf, sizeof buf, ",%.17g,%.17g,%.17g,", r.measured, r.bound, r.ratio);
    os << buf << (r.passed ? "true" : "false") << '\n';
  }
}

namespace {

MultiIndex random_index(Stream& st, int max_order, int max_support, int max_dim) {
  auto uniform_int = [&](int lo, int hi) { return lo + static_cast<int>(st.next() % static_cast<std::uint64_t>(hi - lo + 1)); };
  const int order = uniform_int(1, max_order);
  std::vector<int> dims;
  while (static_cast<int>(dims.size()) < max_support) {
    const int d = uniform_int(1, max_dim);
    if (std::find(dims.begin(), dims.end(), d) == dims.end()) dims.push_back(d);
  }
  const int support = std::min(uniform_int(1, max_support), order);
  MultiIndex nu;
  for (int i = 0; i < support; ++i) nu.set(dims[i], 1);
  for (int k = support; k < order; ++k) {
    const int d = dims[uniform_int(0, support - 1)];
    nu.set(d, nu[d] + 1);
  }
  return nu;
}

}  // namespace

SuiteReport invariants_suite(SuiteDepth depth, std::uint64_t seed) {
  const int max_n = depth == SuiteDepth::Quick ? 12 : 25;
  const int indices = depth == SuiteDepth::Quick ? 50 : 200;
  SuiteReport rep;
  auto record = [&](const IdentityResult& r, const std::string& arg) {
    ++rep.checks;
    if (r.holds()) return;
    ++rep.failures;
    if (!rep.first_counterexample)
      rep.first_counterexample = std::string(to_string(r.kind)) + " at " + arg + ": lhs = " + to_string(r.lhs) +
                                 ", rhs = " + to_string(r.rhs);
  };
  for (int n = 0; n <= max_n; ++n) {
    const std::string arg = "n = " + std::to_string(n);
    for (auto kind : {IdentityKind::ShiftedConvolution, IdentityKind::InteriorConvolution,
                      IdentityKind::FullConvolution, IdentityKind::Sandwich})
      record(identity_sum(kind, n), arg);
  }
  Stream st(seed, "invariants-suite", 0);
  for (int t = 0; t < indices; ++t) {
    const auto nu = random_index(st, 12, 5, 10);
    const auto e = MultiIndex::unit(1 + static_cast<int>(st.next() % 10));
    const std::string arg = "nu = " + nu.to_string() + ", e = " + e.to_string();
    for (auto kind : {IdentityKind::Est1, IdentityKind::Est7, IdentityKind::Est3})
      record(identity_sum(kind, nu), arg);
    for (auto kind : {IdentityKind::Est6, IdentityKind::Est5}) record(identity_sum(kind, nu, e), arg);
    for (double delta : {1.0, 1.5, 2.0})
      for (const auto& eta : enumerate_lower(nu, false, false)) {
        const auto [lhs, rhs] = est1_log_sides(nu, eta, delta);
        ++rep.checks;
        if (lhs > rhs + 1e-12 * std::max(1.0, std::abs(rhs))) {
          ++rep.failures;
          if (!rep.first_counterexample)
            rep.first_counterexample = "est-1 (delta " + std::to_string(delta) + ") at " + arg +
                                       ", eta = " + eta.to_string();
        }
      }
    if (nu.order() <= 10)
      for (int r = 0; r <= nu.order(); ++r)
        record(identity_sum(IdentityKind::ChuVandermonde, nu, std::nullopt, r), arg + ", r = " + std::to_string(r));
  }
  return rep;
}

}  // namespace gevrey
