#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "gevrey/gevrey.h"

TEST_CASE("status codes and error messages") {
  gv_config* cfg = nullptr;
  CHECK(gv_config_from_json("{", &cfg) == GV_ERR_VALIDATION);
  CHECK(cfg == nullptr);
  CHECK(std::string(gv_last_error()).find("line 1") != std::string::npos);
  CHECK(gv_config_from_json(R"({"schema_version":1,"experiment":"qmc-sweep","n_values":[8,16,24]})", &cfg) ==
        GV_ERR_VALIDATION);
  CHECK(std::string(gv_last_error()).find("powers of 2") != std::string::npos);
  CHECK(gv_config_load("/nonexistent.json", &cfg) == GV_ERR_IO);
  CHECK(gv_config_from_json(nullptr, &cfg) == GV_ERR_INVALID_ARGUMENT);
  CHECK(gv_config_set_seed(nullptr, 1) == GV_ERR_INVALID_ARGUMENT);
  CHECK(gv_gauss_rule(0, nullptr, nullptr) == GV_ERR_INVALID_ARGUMENT);
  double x = 0;
  CHECK(gv_embedding_constant(4, "bogus", &x) == GV_ERR_VALIDATION);
  CHECK(std::strlen(gv_version()) > 0);
}

TEST_CASE("exact and closed-form helpers") {
  const char* expected[] = {"1", "1/2", "1/4", "3/8", "15/16"};
  for (unsigned n = 0; n < 5; ++n) {
    char* s = nullptr;
    REQUIRE(gv_half_falling_factorial(n, &s) == GV_OK);
    CHECK(std::string(s) == expected[n]);
    gv_string_free(s);
  }
  double nodes[3], weights[3];
  REQUIRE(gv_gauss_rule(3, nodes, weights) == GV_OK);
  CHECK(nodes[0] == doctest::Approx(-std::sqrt(0.6)).epsilon(1e-15));
  CHECK(nodes[1] == 0);
  CHECK(weights[1] == doctest::Approx(8.0 / 9).epsilon(1e-15));
  CHECK(gv_gauss_rule(0, nodes, weights) == GV_ERR_VALIDATION);

  const int n[] = {2, 4, 8, 16};
  double err[4];
  for (int i = 0; i < 4; ++i) err[i] = 2 * std::pow(n[i], -1.0);
  double slope = 0, icpt = 0, r2 = 0;
  REQUIRE(gv_fit_rate(n, err, 4, GV_RATE_LOGLOG, 0, 10, &slope, &icpt, &r2) == GV_OK);
  CHECK(slope == doctest::Approx(-1).epsilon(1e-12));
  CHECK(icpt == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(gv_fit_rate(n, err, 2, GV_RATE_LOGLOG, 0, 10, &slope, &icpt, &r2) == GV_ERR_VALIDATION);

  double c = 0;
  REQUIRE(gv_embedding_constant(4, "poincare-chain", &c) == GV_OK);
  CHECK(c > 0);
}

TEST_CASE("configure, run and inspect a sweep") {
  gv_config* cfg = nullptr;
  REQUIRE(gv_config_from_json(R"({"schema_version":1,"experiment":"gauss-sweep","n_values":[1,2,3],
      "problem":{"mesh_n":6},"reference":{"kind":"gauss","n":8}})",
                              &cfg) == GV_OK);
  const char* name = nullptr;
  REQUIRE(gv_config_experiment(cfg, &name) == GV_OK);
  CHECK(std::string(name) == "gauss-sweep");
  CHECK(gv_config_set_seed(cfg, 42) == GV_OK);
  CHECK(gv_config_set_output_dir(cfg, "/tmp/gevrey_capi_out") == GV_OK);
  char* js = nullptr;
  REQUIRE(gv_config_to_json(cfg, &js) == GV_OK);
  CHECK(std::string(js).find("\"seed\": 42") != std::string::npos);
  gv_config* again = nullptr;
  CHECK(gv_config_from_json(js, &again) == GV_OK);
  gv_config_free(again);
  gv_string_free(js);

  char* constants = nullptr;
  REQUIRE(gv_constants_json(cfg, &constants) == GV_OK);
  CHECK(std::string(constants).find("u_bar") != std::string::npos);
  gv_string_free(constants);

  gv_result* res = nullptr;
  REQUIRE(gv_run(cfg, &res) == GV_OK);
  size_t rows = 0;
  CHECK(gv_result_num_rows(res, &rows) == GV_OK);
  CHECK(rows == 3);
  int nn = 0;
  double e = 0;
  CHECK(gv_result_row(res, 2, &nn, &e) == GV_OK);
  CHECK(nn == 3);
  CHECK(e >= 0);
  CHECK(gv_result_row(res, 3, &nn, &e) == GV_ERR_INVALID_ARGUMENT);
  int has = 0;
  double s = 0, i = 0, r2 = 0;
  CHECK(gv_result_fit(res, &has, &s, &i, &r2) == GV_OK);
  char* summary = nullptr;
  REQUIRE(gv_result_summary_json(res, &summary) == GV_OK);
  CHECK(std::string(summary).find("gauss-sweep") != std::string::npos);
  gv_string_free(summary);
  CHECK(gv_result_write(res, "/tmp/gevrey_capi_out") == GV_OK);
  gv_result_free(res);
  gv_config_free(cfg);
}

TEST_CASE("numerical failure hands back a partial result") {
  gv_config* cfg = nullptr;
  REQUIRE(gv_config_from_json(R"({"schema_version":1,"experiment":"gauss-sweep","n_values":[1,2],
      "problem":{"mesh_n":4,"max_iter":2},"reference":{"kind":"explicit","value":1}})",
                              &cfg) == GV_OK);
  gv_result* res = nullptr;
  CHECK(gv_run(cfg, &res) == GV_ERR_NUMERICAL);
  REQUIRE(res != nullptr);
  int partial = 0;
  CHECK(gv_result_partial(res, &partial) == GV_OK);
  CHECK(partial == 1);
  CHECK(std::string(gv_last_error()).find("iteration") != std::string::npos);
  gv_result_free(res);
  gv_config_free(cfg);
}
