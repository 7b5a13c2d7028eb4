#include <algorithm>
#include <cmath>
#include <sstream>

#include "doctest.h"
#include "gevrey/error.hpp"
#include "gevrey/integrators.hpp"

using namespace gevrey;

namespace {

// least-squares slope of log(err) against log(n)
double loglog_slope(const std::vector<double>& n, const std::vector<double>& e) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double k = static_cast<double>(n.size());
  for (std::size_t i = 0; i < n.size(); ++i) {
    const double x = std::log(n[i]), y = std::log(e[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (k * sxy - sx * sy) / (k * sxx - sx * sx);
}

}  // namespace

TEST_CASE("Gauss rules") {
  const auto g1 = gauss_rule(1);
  CHECK(g1.nodes[0] == 0);
  CHECK(g1.weights[0] == 2);
  const auto g2 = gauss_rule(2);
  CHECK(g2.nodes[1] == doctest::Approx(1 / std::sqrt(3.0)).epsilon(1e-15));
  CHECK(g2.weights[0] == doctest::Approx(1).epsilon(1e-15));
  CHECK(std::abs(gauss_integrate([](double x) { return std::pow(x, 8); }, 5) - 2.0 / 9) < 1e-13);
  CHECK(gauss_integrate([](double) { return 3.5; }, 7) == doctest::Approx(7).epsilon(1e-14));
  CHECK(std::abs(gauss_integrate([](double x) { return x * x; }, 2) - 2.0 / 3) < 1e-15);
  CHECK(std::abs(gauss_integrate([](double x) { return std::exp(x); }, 8) - (M_E - 1 / M_E)) < 1e-12);
  CHECK_THROWS_AS(gauss_rule(0), ValidationError);
  CHECK_THROWS_AS(gauss_rule(201), ValidationError);

  for (int n = 1; n <= 40; ++n) {
    const auto r = gauss_rule(n);
    double ws = 0;
    for (int i = 0; i < n; ++i) {
      CHECK(r.weights[i] > 0);
      CHECK(r.nodes[i] == -r.nodes[n - 1 - i]);
      if (i > 0) CHECK(r.nodes[i] > r.nodes[i - 1]);
      ws += r.weights[i];
    }
    CHECK(std::abs(ws - 2) < 1e-13);
    for (int k = 0; k <= 2 * n - 1; ++k) {
      double q = 0;
      for (int i = 0; i < n; ++i) q += r.weights[i] * std::pow(r.nodes[i], k);
      const double exact = k % 2 ? 0.0 : 2.0 / (k + 1);
      CHECK(std::abs(q - exact) <= 1e-13);
    }
  }
  CHECK(gauss_rule(200).nodes.size() == 200);
}

TEST_CASE("CBC construction") {
  const std::vector<double> w1{1.0};
  CHECK(cbc_generating_vector(1, 64, w1).z == std::vector<std::int64_t>{1});

  for (auto [s, n] : {std::pair{3, 16}, std::pair{5, 32}}) {
    const auto w = product_weights(s, 2);
    const auto res = cbc_construct(s, n, w);
    CHECK(std::abs(res.e2.back() - lattice_e2_direct(res.rule, w)) <= 1e-12);
    for (auto z : res.rule.z) CHECK(z % 2 == 1);
    CHECK(cbc_generating_vector(s, n, w).z == res.rule.z);  // deterministic
  }
  // greedy step: each chosen z_j minimises e^2 over every odd candidate
  const auto w = product_weights(2, 2);
  const auto res = cbc_construct(2, 8, w);
  for (std::int64_t z2 = 1; z2 < 8; z2 += 2) {
    LatticeRule alt{8, {res.rule.z[0], z2}};
    CHECK(lattice_e2_direct(alt, w) >= res.e2[1] - 1e-14);
  }
  for (std::int64_t z1 = 1; z1 < 8; z1 += 2) CHECK(lattice_e2_direct(LatticeRule{8, {z1}}, w) >= res.e2[0] - 1e-14);

  CHECK_THROWS_AS(cbc_construct(2, 24, w), ValidationError);
  CHECK_THROWS_AS(cbc_construct(3, 16, w), ValidationError);
}

TEST_CASE("lattice points") {
  LatticeRule r{4, {1}};
  const std::vector<double> zero{0.0};
  CHECK(lattice_points(r, zero) == std::vector<double>{-0.25, 0.0, 0.25, -0.5});
  const std::vector<double> half{0.5};
  const auto p = lattice_points(r, half);
  // direct: frac(i/4 + 1/2) - 1/2 for i = 1..4
  for (int i = 1; i <= 4; ++i) {
    double x = i / 4.0 + 0.5;
    x -= std::floor(x);
    CHECK(p[i - 1] == x - 0.5);
  }

  // i = 1..n and i = 0..n-1 describe the same set; projections are shifted grids
  const auto w = product_weights(6, 5);
  const auto rule = cbc_generating_vector(6, 64, w);
  const auto shifts = make_shifts(3, 6, 42);
  for (const auto& d : shifts.shifts) {
    const auto pts = lattice_points(rule, d);
    for (double v : pts) {
      CHECK(v >= -0.5);
      CHECK(v < 0.5);
    }
    for (int j = 0; j < 6; ++j) {
      std::vector<double> col, grid;
      for (int i = 0; i < 64; ++i) {
        col.push_back(pts[i * 6 + j]);
        double x = i / 64.0 + d[j];
        x -= std::floor(x);
        grid.push_back(x - 0.5);
      }
      std::sort(col.begin(), col.end());
      std::sort(grid.begin(), grid.end());
      CHECK(col == grid);
    }
  }
  CHECK(make_shifts(3, 6, 42).shifts == shifts.shifts);
  CHECK(make_shifts(3, 6, 43).shifts != shifts.shifts);
  CHECK_THROWS_AS(lattice_points(LatticeRule{4, {2}}, zero), ValidationError);
  CHECK_THROWS_AS(lattice_points(r, std::vector<double>{1.0}), ValidationError);
}

TEST_CASE("QMC and MC estimates") {
  const auto w = product_weights(2, 2);
  const auto shifts = make_shifts(4, 2, 7);
  auto rule = cbc_generating_vector(2, 64, w);
  for (double q : qmc_estimate([](std::span<const double>) { return 2.5; }, rule, shifts)) CHECK(q == 2.5);
  CHECK(mc_estimate([](std::span<const double>) { return 2.5; }, 100, 3, 1) == 2.5);

  // product y1 y2: direct summation oracle
  const auto est = qmc_estimate([](std::span<const double> y) { return y[0] * y[1]; }, rule, shifts);
  for (int r = 0; r < 4; ++r) {
    const auto pts = lattice_points(rule, shifts.shifts[r]);
    double sum = 0;
    for (int i = 0; i < 64; ++i) sum += pts[2 * i] * pts[2 * i + 1];
    CHECK(est[r] == doctest::Approx(sum / 64).epsilon(1e-14));
    CHECK(std::abs(est[r]) < 5e-3);
  }
  const auto sq = qmc_estimate([](std::span<const double> y) { return y[0] * y[0]; }, rule, shifts);
  for (double q : sq) CHECK(std::abs(q - 1.0 / 12) < 1.0 / (64.0 * 64.0));

  // QMC beats MC on a smooth product integrand with unit integral
  const int s = 8;
  const auto ws = product_weights(s, 5);
  Integrand f = [](std::span<const double> y) {
    double p = 1;
    for (std::size_t j = 0; j < y.size(); ++j) p *= 1 + y[j] / ((j + 1.0) * (j + 1.0));
    return p;
  };
  std::vector<double> ns, eq, em;
  const auto sh = make_shifts(8, s, 3);
  for (int n = 32; n <= 2048; n *= 2) {
    ns.push_back(n);
    eq.push_back(rmse_relative(qmc_estimate(f, cbc_generating_vector(s, n, ws), sh), 1.0));
    std::vector<double> mc;
    for (int r = 0; r < 16; ++r) mc.push_back(mc_estimate(f, n, s, 3, r));
    em.push_back(rmse_relative(mc, 1.0));
  }
  const double qmc_rate = loglog_slope(ns, eq), mc_rate = loglog_slope(ns, em);
  CHECK(qmc_rate <= -0.9);
  CHECK(mc_rate >= -0.7);
  CHECK(mc_rate <= -0.3);
}

TEST_CASE("MC sampling statistics") {
  // CLT envelope: F = y1 has sigma = 1/sqrt(12)
  const int n = 10000, seeds = 64;
  double mean = 0;
  std::vector<double> e;
  for (int k = 0; k < seeds; ++k) {
    e.push_back(mc_estimate([](std::span<const double> y) { return y[0]; }, n, 1, 100 + k));
    mean += e.back() / seeds;
  }
  const double se = 1 / std::sqrt(12.0 * n * seeds);
  CHECK(std::abs(mean) < 3 * se);

  auto variance = [](int m) {
    std::vector<double> v;
    for (int r = 0; r < 200; ++r) v.push_back(mc_estimate([](std::span<const double> y) { return y[0]; }, m, 1, 9, r));
    double mu = 0, var = 0;
    for (double x : v) mu += x / v.size();
    for (double x : v) var += (x - mu) * (x - mu) / (v.size() - 1);
    return var;
  };
  const double ratio = variance(100) / variance(400);
  CHECK(ratio > 3);
  CHECK(ratio < 5.3);
  CHECK(variance(100) == doctest::Approx(1.0 / 1200).epsilon(0.25));
}

TEST_CASE("relative RMSE") {
  const std::vector<double> same{2.0, 2.0, 2.0};
  CHECK(rmse_relative(same, 2.0) == 0);
  const std::vector<double> pm{2.0 * 1.01, 2.0 * 0.99};
  CHECK(rmse_relative(pm, 2.0) == doctest::Approx(0.01).epsilon(1e-12));
  const std::vector<double> mixed{1.1, 0.9, 1.05, 0.97, 1.2, 1.0, 0.8, 1.01};
  double acc = 0;
  for (double q : mixed) acc += (1.04 - q) * (1.04 - q) / (1.04 * 1.04);
  CHECK(rmse_relative(mixed, 1.04) == doctest::Approx(std::sqrt(acc / 8)).epsilon(1e-14));
  CHECK_THROWS_AS(rmse_relative(mixed, 0.0), ValidationError);
}

TEST_CASE("generating vector files") {
  const auto rule = cbc_generating_vector(4, 32, product_weights(4, 5));
  std::stringstream ss;
  write_generating_vector(ss, rule);
  const auto back = read_generating_vector(ss);
  CHECK(back.n == 32);
  CHECK(back.z == rule.z);
  std::stringstream bad("16 2\n1 4\n");
  CHECK_THROWS_AS(read_generating_vector(bad), ValidationError);
  std::stringstream short_file("16 3\n1 3\n");
  CHECK_THROWS_AS(read_generating_vector(short_file), IoError);
}
