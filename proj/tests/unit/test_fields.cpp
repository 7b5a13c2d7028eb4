#include <cmath>

#include "doctest.h"
#include "gevrey/error.hpp"
#include "gevrey/fields.hpp"

using namespace gevrey;

TEST_CASE("zeta") {
  CHECK(std::abs(zeta(2) - M_PI * M_PI / 6) < 1e-12);
  // independent: 10^6 terms plus the integral tail bracket
  double direct = 0;
  for (int j = 1000000; j >= 1; --j) direct += std::pow(static_cast<double>(j), -5.0);
  const double tail_hi = std::pow(1e6, -4.0) / 4;
  CHECK(zeta(5) >= direct - 1e-14);
  CHECK(zeta(5) <= direct + tail_hi + 1e-14);
  CHECK(std::abs(zeta(50) - 1) < 1e-12);
  CHECK_THROWS_AS(zeta(1.0), ValidationError);
}

TEST_CASE("built-in fields at fixed points") {
  const std::vector<double> y0{0.0};
  CHECK(b1_1d()({0, 0}, y0) == doctest::Approx(200).epsilon(1e-15));
  CHECK(f_trig()({0, 0}, {}) == doctest::Approx(12).epsilon(1e-15));
  CHECK(b2_1d()({0, 0}, std::vector<double>{0.3}) == doctest::Approx(8).epsilon(1e-15));
  CHECK(b2_1d()({0, 0}, std::vector<double>{-1.0}) == doctest::Approx(8).epsilon(1e-15));
  CHECK(b2_1d()({0.5, 0.5}, std::vector<double>{-1.0}) == doctest::Approx(1.0).epsilon(1e-12));
  const std::vector<double> zeros(20, 0.0);
  CHECK(b1_hd(20)({0.3, 0.7}, zeros) == doctest::Approx(2 + 2 * std::exp(-zeta(5))).epsilon(1e-14));
  CHECK(b1_hd(20)({0.3, 0.7}, zeros) == doctest::Approx(2.709).epsilon(1e-3));
  std::vector<double> lo(20, -0.5);
  CHECK(b2_hd(20)({0.3, 0.7}, lo) == 3.0);

  const auto a = unit_a();
  CHECK(eval_field(a, {0.2, 0.9}, {})[0] == 1.0);
  CHECK(eval_field(a, {0.2, 0.9}, {}, FieldQuery::GradientX) == std::vector<double>{0.0, 0.0});
  CHECK_THROWS_AS(eval_field(b1_1d(), {0.2, 0.9}, y0, FieldQuery::GradientX), ValidationError);
  CHECK_THROWS_AS(eval_field(b1_1d(), {0.2, 0.9}, {}), ValidationError);
}

TEST_CASE("prepared evaluation matches pointwise evaluation bit for bit") {
  std::vector<Point> pts;
  for (int i = 0; i < 7; ++i) pts.push_back({0.13 * i, 0.9 - 0.11 * i});
  for (const auto& field : {b1_1d(), b2_1d(), b1_hd(6), b2_hd(6), f_trig()}) {
    std::vector<double> y(static_cast<std::size_t>(field.param_dim()));
    for (std::size_t j = 0; j < y.size(); ++j) y[j] = 0.37 * field.box().half_width * std::cos(1.0 + j);
    const auto prep = field.prepare(pts);
    std::vector<double> vals;
    prep->values(y, vals);
    for (std::size_t i = 0; i < pts.size(); ++i) CHECK(vals[i] == field(pts[i], y));
  }
}

TEST_CASE("range scans") {
  const auto ra = field_range_scan(unit_a(), 5, 4, 1);
  CHECK(ra.min == 1);
  CHECK(ra.max == 1);
  const auto r1 = field_range_scan(b1_1d(), 21, 32, 1);
  CHECK(r1.min >= 50);
  CHECK(r1.max <= 200);
  CHECK(field_range_scan(b1_hd(20), 11, 16, 1).min > 2);
  CHECK(field_range_scan(b2_1d(), 21, 32, 1).min >= 0);
  CHECK(field_range_scan(b2_hd(20), 21, 32, 1).min >= 2.8);
  CHECK(field_range_scan(b2_1d(), 21, 32, 1).max <= 8);
}

TEST_CASE("custom expressions") {
  auto f = custom_field("2*pi^2*sin(pi*x1)*sin(pi*x2)", 0, 0.5);
  CHECK(f({0.5, 0.5}, {}) == doctest::Approx(2 * M_PI * M_PI));
  CHECK(f.y_independent());
  const Point g = f.gradient({0.25, 0.5}, {});
  CHECK(g[0] == doctest::Approx(2 * M_PI * M_PI * M_PI * std::cos(M_PI / 4)));
  CHECK(g[1] == doctest::Approx(0).scale(1));

  auto h = custom_field("(1 + y1)*(1 + y2)*exp(-x1^2) / 3 - abs(x2 - 0.5)", 2, 0.5);
  CHECK_FALSE(h.y_independent());
  const std::vector<double> y{0.2, -0.1};
  CHECK(h({0.3, 0.1}, y) == doctest::Approx(1.2 * 0.9 * std::exp(-0.09) / 3 - 0.4));
  const Point gh = h.gradient({0.3, 0.1}, y);
  CHECK(gh[0] == doctest::Approx(1.2 * 0.9 * std::exp(-0.09) * (-0.6) / 3));
  CHECK(gh[1] == doctest::Approx(1.0));

  CHECK_THROWS_AS(custom_field("log(x1)", 0, 0.5), ValidationError);
  CHECK_THROWS_AS(custom_field("y3", 2, 0.5), ValidationError);
  CHECK_THROWS_AS(custom_field("sin(x1", 0, 0.5), ValidationError);
  CHECK_THROWS_AS(custom_field("foo(x1)", 0, 0.5), ValidationError);
}

TEST_CASE("make_field names") {
  CHECK(make_field("b1-hd(7)").param_dim() == 7);
  CHECK(make_field("const(-0.25)")({0.1, 0.1}, {}) == -0.25);
  CHECK(make_field("b2-1d").envelope()->delta == 2);
  CHECK(make_field("b1-1d").envelope()->delta == 1);
  CHECK_THROWS_AS(make_field("b3"), ValidationError);
  CHECK_THROWS_AS(make_field("b1-hd(x)"), ValidationError);
}

TEST_CASE("envelopes cover the coefficients") {
  // b1-hd: |d^{e_j} b| <= (scale/2) / (2 R_j) with R_j = j^5 / 2
  const auto b = b1_hd(5);
  const auto& env = *b.envelope();
  for (int j = 1; j <= 5; ++j) {
    double sup = 0;
    const double h = 1e-4;
    for (int i = 1; i < 10; ++i) {
      const Point x{i / 10.0, (10 - i) / 10.0};
      std::vector<double> yp(5, 0.5), ym(5, 0.5);
      yp[j - 1] = 0.5;
      ym[j - 1] = 0.5 - h;
      sup = std::max(sup, std::abs(b(x, yp) - b(x, ym)) / h);
    }
    CHECK(sup <= env.scale / 2 / (2 * env.radii(j)) * 1.01);
  }
  // calibrated radii are positive and finite
  CHECK(b1_1d().envelope()->radii(1) > 0);
  CHECK(b2_1d().envelope()->radii(1) > 0);
  CHECK(b2_hd(3).envelope()->radii(3) > b2_hd(3).envelope()->radii(1));
}
