#include <cmath>

#include "doctest.h"
#include "gevrey/error.hpp"
#include "gevrey/semilinear.hpp"

using namespace gevrey;

namespace {

ProblemSpec base(ParamField b, ParamField f, int n = 16) {
  ProblemSpec s;
  s.a = unit_a();
  s.b = std::move(b);
  s.f = std::move(f);
  s.m = 3;
  s.mesh_n = n;
  s.mode = AssumptionMode::positive_b();
  s.box = {std::max(s.b.param_dim(), s.f.param_dim()), 1.0};
  return s;
}

ProblemSpec gauss_config(const std::string& b, int n = 32) {
  auto s = base(make_field(b), f_trig(), n);
  s.box = {1, 1.0};
  return s;
}

ProblemSpec general_b_config() {
  auto s = base(constant_field(-1.0 / 24), constant_field(1.0));
  s.mode = AssumptionMode::general_b();
  return s;
}

}  // namespace

TEST_CASE("linear problem terminates after two iterations") {
  const auto spec = base(constant_field(0.0), f_trig());
  const auto r = fixed_point_solve(spec, {}, 1e-12);
  CHECK(r.trace.converged);
  CHECK(r.trace.iterations == 2);
  CHECK(r.trace.diffs[1] == 0.0);

  const auto z = fixed_point_solve(base(make_field("b1-1d"), constant_field(0.0)), std::vector<double>{0.2}, 1e-12);
  CHECK(z.trace.iterations == 1);
  CHECK(h1_seminorm(z.u) == 0);
  CHECK(qoi(z.u, Qoi::mean()) == 0);
  CHECK(qoi(z.u, Qoi::point()) == 0);
}

TEST_CASE("Gauss experiment configurations converge") {
  for (const std::string b : {"b1-1d", "b2-1d"}) {
    SemilinearSolver solver(gauss_config(b));
    const auto bundle = theory_constants(solver.spec());
    for (double y : {-0.9, 0.0, 0.7}) {
      const std::vector<double> yv{y};
      const auto r = solver.solve(yv, 1e-12);
      CHECK(r.trace.converged);
      if (b == "b1-1d" && y == 0.0) CHECK(r.trace.iterations <= 60);
      for (double n : r.trace.iterate_norms) CHECK(solver.spec().c_m * n <= bundle.u_bar + 1e-8);
    }
  }
}

TEST_CASE("contraction under the general-b assumption") {
  const auto spec = general_b_config();
  const auto bundle = theory_constants(spec);
  CHECK(bundle.gamma == doctest::Approx(0.5).epsilon(1e-12));
  const auto r = fixed_point_solve(spec, {}, 1e-13);
  REQUIRE(r.trace.converged);
  const auto c = contraction_diagnostics(r.trace);
  CHECK(c.used >= 1);
  CHECK(c.max_ratio <= 0.55);
  for (double n : r.trace.iterate_norms) CHECK(spec.c_m * n <= bundle.u_bar + 1e-8);

  FixedPointTrace geo;
  for (int k = 0; k < 8; ++k) geo.diffs.push_back(std::ldexp(1.0, -k));
  CHECK(contraction_diagnostics(geo).max_ratio == 0.5);
  geo.diffs.resize(2);
  CHECK_THROWS_AS(contraction_diagnostics(geo), ValidationError);
}

TEST_CASE("divergence is reported") {
  auto spec = gauss_config("b1-1d", 8);
  spec.c_m = 0.1;
  const auto r = fixed_point_solve(spec, std::vector<double>{0.0}, 1e-12);
  CHECK_FALSE(r.trace.converged);
  CHECK(r.trace.status == FixedPointTrace::Status::Diverged);
}

TEST_CASE("validation") {
  auto spec = gauss_config("b1-1d");
  spec.m = 2;
  CHECK_THROWS_AS(SemilinearSolver{spec}, ValidationError);
  spec = base(constant_field(-1.0), f_trig());
  CHECK_THROWS_AS(SemilinearSolver{spec}, ValidationError);  // positive-b with b < 0
  spec = gauss_config("b1-1d");
  spec.box = {2, 1.0};
  CHECK_THROWS_AS(SemilinearSolver{spec}, ValidationError);
  spec = gauss_config("b1-1d");
  SemilinearSolver ok(spec);
  CHECK_THROWS_AS(ok.solve(std::vector<double>{1.5}, 1e-12), ValidationError);
  CHECK_THROWS_AS(ok.solve(std::vector<double>{0.5}, 0.0), ValidationError);
}

TEST_CASE("strong-form Laplacian") {
  const auto spec = base(constant_field(0.0), f_trig());
  SemilinearSolver solver(spec);
  const auto r = solver.solve({}, 1e-12);
  const auto lap = strong_laplacian(solver, {}, r.u);
  const auto& q = solver.quadrature();
  for (std::size_t i = 0; i < q.size(); i += 7) CHECK(lap.values[i] == doctest::Approx(-f_trig()(q.points[i], {})));

  const auto zero = base(constant_field(0.0), constant_field(0.0));
  SemilinearSolver zs(zero);
  const auto zr = zs.solve({}, 1e-12);
  CHECK(strong_laplacian(zs, {}, zr.u).l2 == 0);

  // C_m^2 |Delta u| <= (b_bar (u_bar / C_m)^m + C_m a_bar u_bar + C_m f_bar) / 2
  SemilinearSolver g(gauss_config("b1-1d"));
  const auto bundle = theory_constants(g.spec());
  const std::vector<double> y{0.0};
  const auto ur = g.solve(y, 1e-12);
  const double cm = g.spec().c_m;
  CHECK(bundle.b_bar == 400);
  CHECK(bundle.a_bar == 2);
  CHECK(bundle.f_bar == 9);
  const double bound = 0.5 * (400 * std::pow(9 / cm, 3) + cm * 2 * 9 + cm * 9);
  CHECK(cm * cm * strong_laplacian(g, y, ur.u).l2 <= bound);
  CHECK(bundle.laplacian_base_bound() == doctest::Approx(bound));
}

TEST_CASE("quantities of interest") {
  const auto spec = base(constant_field(0.0), constant_field(1.0), 16);
  const auto r = fixed_point_solve(spec, {}, 1e-12);
  CHECK(qoi(r.u, Qoi::point()) == r.u.values[8 * 17 + 8]);
  CHECK(qoi(r.u, Qoi::mean()) == doctest::Approx(mean_value(r.u)));
  // -Δu = 1 on the square: mean ≈ 0.0351, centre ≈ 0.0737
  const auto fine = fixed_point_solve(base(constant_field(0.0), constant_field(1.0), 32), {}, 1e-12);
  const double m16 = qoi(r.u, Qoi::mean()), m32 = qoi(fine.u, Qoi::mean());
  CHECK(m32 == doctest::Approx(0.035144).epsilon(2e-3));
  CHECK(qoi(fine.u, Qoi::point()) == doctest::Approx(0.073671).epsilon(3e-3));
  const auto finer = fixed_point_solve(base(constant_field(0.0), constant_field(1.0), 64), {}, 1e-12);
  const double ratio = (m16 - m32) / (m32 - qoi(finer.u, Qoi::mean()));
  CHECK(ratio > 3.5);
  CHECK(ratio < 4.5);

  // y-continuity
  SemilinearSolver s(gauss_config("b2-1d", 16));
  const auto a = s.solve(std::vector<double>{0.3}, 1e-13);
  const auto b = s.solve(std::vector<double>{0.3 + 1e-6}, 1e-13);
  CHECK(std::abs(qoi(a.u, Qoi::mean()) - qoi(b.u, Qoi::mean())) < 1e-5);

  const auto rec = solve_record(std::vector<double>{0.3}, a, {Qoi::mean(), Qoi::point()});
  CHECK(rec["status"] == "converged");
  CHECK(rec["qoi"].size() == 2);
}
