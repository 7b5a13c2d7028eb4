#include "gevrey/semilinear.hpp"

#include <cmath>

#include "gevrey/error.hpp"

namespace gevrey {

void ProblemSpec::validate() const {
  if (d != 2) throw ValidationError("only d = 2 is supported");
  if (!admissible(d, m)) throw ValidationError("(d, m) violates the admissibility table");
  if (!(c_m > 0) || !std::isfinite(c_m)) throw ValidationError("C_m must be positive");
  if (!a.valid() || !b.valid() || !f.valid()) throw ValidationError("problem needs fields a, b and f");
  for (const ParamField* field : {&a, &b, &f})
    if (field->param_dim() != 0 && field->param_dim() != box.dim)
      throw ValidationError("field '" + field->label() + "' has " + std::to_string(field->param_dim()) +
                            " parameters but the parameter box has " + std::to_string(box.dim));
  if (mesh_n < 2) throw ValidationError("mesh needs at least 2 cells per side");
  if (!(solve_rel_tol > 0 && solve_rel_tol <= 1e-6)) throw ValidationError("solve_rel_tol must lie in (0, 1e-6]");
  tri_quad_rule(quad_degree);
  if (mode.kind == AssumptionMode::Kind::PositiveBOddM) {
    if (m % 2 == 0) throw ValidationError("the nonnegative-b assumption requires odd m");
    const auto range = field_range_scan(b, 17, 16, 0);
    if (range.min < 0)
      throw ValidationError("the nonnegative-b assumption fails: b reaches " + std::to_string(range.min));
  }
  const auto ar = field_range_scan(a, 17, 16, 0);
  if (ar.min < 1) throw ValidationError("diffusion coefficient must satisfy a >= 1");
}

nlohmann::json ProblemSpec::to_json() const {
  auto env = [](const ParamField& field) {
    nlohmann::json j = {{"label", field.label()}};
    if (field.envelope()) j["envelope"] = field.envelope()->to_json();
    return j;
  };
  return {{"d", d},
          {"m", m},
          {"c_m", c_m},
          {"a", env(a)},
          {"b", env(b)},
          {"f", env(f)},
          {"mode", mode.name()},
          {"param_dim", box.dim},
          {"half_width", box.half_width},
          {"mesh_n", mesh_n},
          {"quad_degree", quad_degree},
          {"solve_rel_tol", solve_rel_tol},
          {"solver", method == SolveMethod::Cg ? "cg" : "direct-cholesky"}};
}

ConstantBundle theory_constants(const ProblemSpec& spec) {
  for (const ParamField* field : {&spec.a, &spec.b, &spec.f})
    if (!field->envelope()) throw ValidationError("field '" + field->label() + "' carries no envelope");
  ConstantInputs in;
  in.a_bar = spec.a.envelope()->scale;
  in.b_bar = spec.b.envelope()->scale;
  in.f_bar = spec.f.envelope()->scale;
  in.m = spec.m;
  in.d = spec.d;
  in.mode = spec.mode;
  in.c_m = spec.c_m;
  in.c_1 = spec.c_1;
  in.c_2m_minus_1 = spec.c_2m_minus_1;
  return theory_constants(in);
}

std::string FixedPointTrace::status_name() const {
  switch (status) {
    case Status::Converged: return "converged";
    case Status::MaxIterations: return "max-iterations";
    case Status::Diverged: return "diverged";
  }
  return "?";
}

SemilinearSolver::SemilinearSolver(ProblemSpec spec)
    : spec_(std::move(spec)), quad_(build_mesh(spec_.mesh_n), tri_quad_rule(spec_.quad_degree)) {
  spec_.validate();
  a_ = spec_.a.prepare(quad_.points);
  b_ = spec_.b.prepare(quad_.points);
  f_ = spec_.f.prepare(quad_.points);
  std::vector<double> ones(quad_.size(), 1.0);
  unit_stiffness_ = assemble_stiffness(quad_, ones, 1.0);
  if (spec_.a.y_independent()) {
    std::vector<double> a_vals;
    a_->values({}, a_vals);
    const auto k = assemble_stiffness(quad_, a_vals, spec_.c_m * spec_.c_m);
    fixed_solver_ = std::make_shared<const SpdSolver>(k, spec_.method);
  }
}

double SemilinearSolver::seminorm(std::span<const double> v) const {
  const auto kv = unit_stiffness_.multiply(v);
  double s = 0;
  for (std::size_t i = 0; i < v.size(); ++i) s += v[i] * kv[i];
  return std::sqrt(std::max(s, 0.0));
}

SolveResult SemilinearSolver::solve(std::span<const double> y, double tol, int max_iter) const {
  if (!(tol > 0)) throw ValidationError("fixed-point tolerance must be positive");
  if (!spec_.box.contains(y)) throw ValidationError("parameter vector lies outside the parameter box");
  std::shared_ptr<const SpdSolver> solver = fixed_solver_;
  if (!solver) {
    std::vector<double> a_vals;
    a_->values(y, a_vals);
    for (double v : a_vals)
      if (!(v > 0)) throw NumericalError("diffusion coefficient is not positive at a quadrature point");
    solver = std::make_shared<const SpdSolver>(assemble_stiffness(quad_, a_vals, spec_.c_m * spec_.c_m), spec_.method);
  }
  std::vector<double> b_vals, f_vals;
  b_->values(y, b_vals);
  f_->values(y, f_vals);
  const auto load = assemble_load(quad_, f_vals, spec_.c_m);

  const auto& mesh = quad_.mesh;
  SolveResult res{FemFunction::zero(mesh), {}};
  std::vector<double> current(static_cast<std::size_t>(mesh->num_interior()), 0.0), reaction, rhs(current.size()),
      diff(current.size());
  auto& tr = res.trace;
  for (int it = 0; it < max_iter; ++it) {
    const auto u_vals = values_at_points(quad_, res.u);
    assemble_reaction_from_values(quad_, b_vals, u_vals, spec_.m, reaction);
    for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] = load[i] - reaction[i];
    auto next = solver->solve(rhs, spec_.solve_rel_tol);
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = next[i] - current[i];
    const double d = seminorm(diff);
    current = std::move(next);
    res.u = FemFunction::from_interior(mesh, current);
    tr.diffs.push_back(d);
    tr.iterate_norms.push_back(seminorm(current));
    tr.iterations = it + 1;
    if (!std::isfinite(d)) {
      tr.status = FixedPointTrace::Status::Diverged;
      return res;
    }
    if (d <= tol) {
      tr.converged = true;
      tr.status = FixedPointTrace::Status::Converged;
      return res;
    }
    const std::size_t k = tr.diffs.size();
    if (k > 5 && tr.diffs[k - 1] > 10 * tr.diffs[k - 6]) {
      tr.status = FixedPointTrace::Status::Diverged;
      return res;
    }
  }
  tr.status = FixedPointTrace::Status::MaxIterations;
  return res;
}

SolveResult fixed_point_solve(const ProblemSpec& spec, std::span<const double> y, double tol, int max_iter) {
  return SemilinearSolver(spec).solve(y, tol, max_iter);
}

ContractionReport contraction_diagnostics(const FixedPointTrace& trace, double noise_floor) {
  if (trace.diffs.size() < 3) throw ValidationError("contraction diagnostics need at least 3 iterations");
  ContractionReport r;
  for (std::size_t k = 0; k + 1 < trace.diffs.size(); ++k)
    r.ratios.push_back(trace.diffs[k] > 0 ? trace.diffs[k + 1] / trace.diffs[k] : 0.0);
  // ratio 0 involves u_0 = 0 and is skipped as the transient
  for (std::size_t k = 1; k < r.ratios.size(); ++k) {
    if (trace.diffs[k + 1] <= noise_floor) continue;
    r.max_ratio = std::max(r.max_ratio, r.ratios[k]);
    ++r.used;
  }
  return r;
}

StrongLaplacian strong_laplacian(const SemilinearSolver& solver, std::span<const double> y, const FemFunction& u) {
  const auto& spec = solver.spec();
  const auto& q = solver.quadrature();
  if (!spec.a.has_gradient()) throw ValidationError("strong Laplacian needs the spatial gradient of a");
  const double cm = spec.c_m, cm2 = cm * cm;
  const auto u_vals = values_at_points(q, u);
  const int nq = q.per_triangle();
  const Mesh& mesh = *q.mesh;
  StrongLaplacian out;
  out.values.resize(q.size());
  double sum = 0;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    const auto& g = q.grads[t];
    Point gu{0, 0};
    for (int k = 0; k < 3; ++k) {
      gu[0] += u.values[tri[k]] * g[k][0];
      gu[1] += u.values[tri[k]] * g[k][1];
    }
    for (int k = 0; k < nq; ++k) {
      const std::size_t idx = static_cast<std::size_t>(t) * nq + k;
      const Point& x = q.points[idx];
      const double a = spec.a(x, y);
      if (!(a > 0)) throw ValidationError("diffusion coefficient is not positive; the strong form needs a >= 1");
      const Point ga = spec.a.gradient(x, y);
      const double bv = spec.b(x, y), fv = spec.f(x, y);
      const double lap = (bv * std::pow(u_vals[idx], spec.m) - cm2 * (ga[0] * gu[0] + ga[1] * gu[1]) - cm * fv) /
                         (cm2 * a);
      out.values[idx] = lap;
      sum += q.jw[idx] * lap * lap;
    }
  }
  out.l2 = std::sqrt(sum);
  return out;
}

nlohmann::json Qoi::to_json() const {
  if (kind == Kind::Mean) return {{"kind", "mean"}};
  return {{"kind", "point"}, {"x", {x0[0], x0[1]}}};
}

double qoi(const FemFunction& u, const Qoi& kind) {
  return kind.kind == Qoi::Kind::Mean ? mean_value(u) : point_value(u, kind.x0);
}

nlohmann::json solve_record(std::span<const double> y, const SolveResult& r, const std::vector<Qoi>& qois) {
  nlohmann::json j;
  j["y"] = std::vector<double>(y.begin(), y.end());
  j["iterations"] = r.trace.iterations;
  j["status"] = r.trace.status_name();
  j["final_diff"] = r.trace.diffs.empty() ? 0.0 : r.trace.diffs.back();
  j["h1_seminorm"] = r.trace.iterate_norms.empty() ? 0.0 : r.trace.iterate_norms.back();
  auto& q = j["qoi"] = nlohmann::json::array();
  for (const auto& k : qois) q.push_back({{"kind", k.to_json()}, {"value", qoi(r.u, k)}});
  return j;
}

}  // namespace gevrey
