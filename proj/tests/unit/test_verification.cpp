#include <cmath>
#include <sstream>

#include "doctest.h"
#include "gevrey/error.hpp"
#include "gevrey/verification.hpp"

using namespace gevrey;

namespace {

ProblemSpec linear_spec(const std::string& f_expr, int s, int n = 12) {
  ProblemSpec p;
  p.a = unit_a();
  p.b = constant_field(0.0);
  p.f = custom_field(f_expr, s, 1.0, GevreyEnvelope{20.0, 1.0, RadiiRule::constant(1.0), "test"});
  p.m = 3;
  p.mesh_n = n;
  p.mode = AssumptionMode::positive_b();
  p.box = {s, 1.0};
  return p;
}

ProblemSpec qmc_spec(int s, int n = 8) {
  ProblemSpec p;
  p.a = unit_a();
  p.b = b1_hd(s);
  p.f = constant_field(1.0);
  p.m = 3;
  p.mesh_n = n;
  p.mode = AssumptionMode::positive_b();
  p.box = {s, 0.5};
  return p;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

}  // namespace

TEST_CASE("FD stencils on polynomials") {
  const ParameterBox box{2, 1.0};
  auto g = [](std::span<const double> y) {
    return std::vector<double>{y[0] * y[0] * y[0], y[0] * y[1], std::pow(y[0], 4)};
  };
  const std::vector<double> y{0.3, -0.2};
  FdScheme s2{2, 1e-2, false}, s4{4, 1e-2, false};
  const auto d1 = fd_apply(g, y, MultiIndex::unit(1), s2, box);
  CHECK(d1[0] == doctest::Approx(3 * 0.09 + 1e-4).epsilon(1e-10));  // h^2 f'''/6 = h^2
  CHECK(d1[1] == doctest::Approx(-0.2).epsilon(1e-12));
  const auto d1b = fd_apply(g, y, MultiIndex::unit(1), s4, box);
  CHECK(d1b[0] == doctest::Approx(0.27).epsilon(1e-11));
  const auto d2 = fd_apply(g, y, MultiIndex::from_dense({2}), s2, box);
  CHECK(d2[0] == doctest::Approx(6 * 0.3).epsilon(1e-9));
  const auto d3 = fd_apply(g, y, MultiIndex::from_dense({3}), s2, box);
  CHECK(d3[0] == doctest::Approx(6).epsilon(1e-6));
  const auto d3b = fd_apply(g, y, MultiIndex::from_dense({3}), s4, box);
  CHECK(d3b[0] == doctest::Approx(6).epsilon(1e-6));
  CHECK(d3b[2] == doctest::Approx(24 * 0.3).epsilon(1e-6));
  const auto d2b = fd_apply(g, y, MultiIndex::from_dense({2}), s4, box);
  CHECK(d2b[2] == doctest::Approx(12 * 0.09).epsilon(1e-8));
  const auto mixed = fd_apply(g, y, MultiIndex::parse("(1,1)"), s2, box);
  CHECK(mixed[1] == doctest::Approx(1).epsilon(1e-12));
  CHECK(mixed[0] == doctest::Approx(0).scale(1));

  // Richardson removes the h^2 term of the order-2 first derivative
  const auto rich = fd_apply(g, y, MultiIndex::unit(1), FdScheme{2, 1e-2, true}, box);
  CHECK(rich[0] == doctest::Approx(0.27).epsilon(1e-10));

  CHECK_THROWS_AS(fd_apply(g, std::vector<double>{0.999, 0.0}, MultiIndex::unit(1), s2, box), ValidationError);
  CHECK_THROWS_AS(fd_apply(g, y, MultiIndex::unit(3), s2, box), ValidationError);
  CHECK_THROWS_AS(fd_apply(g, y, MultiIndex::from_dense({4}), s2, box), ValidationError);
  CHECK_THROWS_AS(fd_apply(g, y, MultiIndex::unit(1), FdScheme{3, 1e-3, false}, box), ValidationError);
  CHECK_THROWS_AS(fd_apply(g, y, MultiIndex::unit(1), FdScheme{2, 0.5, false}, box), ValidationError);
}

TEST_CASE("FD derivatives of the solution: linearity oracles") {
  const double tol = 1e-12;
  SemilinearSolver lin(linear_spec("y1*(1 + sin(pi*x1))*x2", 1));
  const std::vector<double> y{0.4};
  const auto d = fd_partial(lin, y, MultiIndex::unit(1), FdScheme{});
  SemilinearSolver ref(linear_spec("(1 + sin(pi*x1))*x2", 1));
  const auto g = ref.solve(y, tol);
  CHECK(max_abs_diff(d.values, g.u.values) <= 10 * tol);

  const auto zero = fd_partial(lin, y, MultiIndex(), FdScheme{});
  CHECK(zero.values == lin.solve(y, tol).u.values);

  SemilinearSolver bil(linear_spec("(1 + y1)*(1 + y2)*(1 + sin(pi*x1))*x2", 2));
  const std::vector<double> y2{0.1, -0.3};
  const auto dm = fd_partial(bil, y2, MultiIndex::parse("(1,1)"), FdScheme{});
  CHECK(max_abs_diff(dm.values, g.u.values) <= 1e-8);
  // commutativity is checked, not assumed: the same stencil in either order
  const auto d21 = fd_apply(
      [&](std::span<const double> yy) {
        const std::vector<double> sw{yy[1], yy[0]};
        return bil.solve(sw, tol).u.values;
      },
      std::vector<double>{-0.3, 0.1}, MultiIndex::parse("(1,1)"), FdScheme{}, ParameterBox{2, 1.0});
  CHECK(max_abs_diff(d21, dm.values) <= 1e-8);
}

TEST_CASE("Gevrey bound checks on a small lattice configuration") {
  SemilinearSolver solver(qmc_spec(4));
  const auto bundle = theory_constants(solver.spec());
  const auto env = problem_envelope(solver.spec());
  CHECK(env.delta == 1);
  CHECK(env.radii(1) == doctest::Approx(0.5));
  CHECK(env.radii(2) == doctest::Approx(16));
  const std::vector<double> y{0.1, -0.2, 0.3, 0.0};
  for (const auto& nu : {MultiIndex(), MultiIndex::unit(1), MultiIndex::unit(3), MultiIndex::parse("(1,1)"),
                         MultiIndex::from_dense({2})}) {
    const auto r = gevrey_bound_check(solver, bundle, env, nu, y, FdScheme{});
    CHECK(r.passed);
    CHECK(r.ratio < 1);
    CHECK(r.measured > 0);
  }
  const auto lap0 = laplacian_bound_check(solver, bundle, env, y, MultiIndex(), FdScheme{});
  CHECK(lap0.passed);
  const auto lap1 = laplacian_bound_check(solver, bundle, env, y, MultiIndex::unit(1), FdScheme{});
  CHECK(lap1.passed);
  const auto pw = power_derivative_check(solver, bundle, env, y, 2, MultiIndex::unit(1), FdScheme{});
  CHECK(pw.passed);
  CHECK(pw.norm == "L(4/2)");

  // order 2 and order 4 agree to O(h^2)
  const auto a = fd_partial(solver, y, MultiIndex::unit(1), FdScheme{2, 1e-3, false});
  const auto b = fd_partial(solver, y, MultiIndex::unit(1), FdScheme{4, 1e-3, false});
  double diff = 0, norm = 0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    diff = std::max(diff, std::abs(a.values[i] - b.values[i]));
    norm = std::max(norm, std::abs(b.values[i]));
  }
  CHECK(diff <= 1e-5 * norm + 1e-9);

  CHECK_THROWS_AS(laplacian_bound_check(solver, bundle, env, y, MultiIndex::from_dense({2}), FdScheme{}),
                  ValidationError);
  CHECK_THROWS_AS(gevrey_bound_check(solver, bundle, env, MultiIndex::unit(1), y, FdScheme{}, NormKind::H2),
                  ValidationError);
}

TEST_CASE("power-derivative measure of a y-independent family is zero") {
  MeshQuadrature q(build_mesh(6), tri_quad_rule(4));
  auto family = [&](std::span<const double>) { return interpolate(q.mesh, [](const Point&) { return 0.7; }, true); };
  const std::vector<double> y{0.0, 0.1};
  const double v = power_derivative_measure(q, family, y, 2, 3, MultiIndex::unit(2), FdScheme{}, ParameterBox{2, 0.5});
  CHECK(v == 0);
  CHECK_THROWS_AS(power_derivative_measure(q, family, y, 5, 3, MultiIndex::unit(2), FdScheme{}, ParameterBox{2, 0.5}),
                  ValidationError);
}

TEST_CASE("reports and the exact suite") {
  std::vector<BoundCheckReport> rows{{MultiIndex::parse("(1,1)"), "H1", 0.5, 2.0, 0.25, true}};
  std::ostringstream os;
  write_reports_csv(os, rows);
  CHECK(os.str() == "nu,norm,measured,bound,ratio,passed\n\"(1,1)\",H1,0.5,2,0.25,true\n");

  const auto quick = invariants_suite(SuiteDepth::Quick);
  CHECK(quick.passed());
  CHECK(quick.checks > 1000);
  CHECK_FALSE(quick.first_counterexample.has_value());
}
