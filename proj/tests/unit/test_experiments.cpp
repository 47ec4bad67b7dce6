#include "doctest.h"

#include <cmath>
#include <sstream>

#include "gfflab/experiments.hpp"
#include "gfflab/gff.hpp"
#include "gfflab/rng.hpp"

using namespace gfflab;
using nlohmann::json;

namespace {

json base_config() {
  return {{"experiment", "onearm"}, {"d", 3}, {"grid", {0, 1, 2}}, {"padding", 2},
          {"samples", 200},         {"seed", 7}, {"precision", "double"}, {"out", "out"}};
}

RunResult quick(json j) {
  RunOptions o;
  o.audit = false;
  return run(ExperimentConfig::from_json(j), o);
}

}  // namespace

TEST_CASE("config accepts exactly the documented keys") {
  const auto c = ExperimentConfig::from_json(base_config());
  CHECK(c.experiment == ExperimentId::onearm);
  CHECK(c.grid.size() == 3);
  CHECK(ExperimentConfig::from_json(c.to_json()).to_json() == c.to_json());

  auto extra = base_config();
  extra["threads"] = 4;
  CHECK_THROWS_AS(ExperimentConfig::from_json(extra), std::invalid_argument);
  auto missing = base_config();
  missing.erase("out");
  CHECK_THROWS_AS(ExperimentConfig::from_json(missing), std::invalid_argument);
  auto bad = base_config();
  bad["precision"] = "half";
  CHECK_THROWS_AS(ExperimentConfig::from_json(bad), std::invalid_argument);
  bad = base_config();
  bad["grid"] = json::array();
  CHECK_THROWS_AS(ExperimentConfig::from_json(bad), std::invalid_argument);
  bad = base_config();
  bad["padding"] = 0;
  CHECK_THROWS_AS(ExperimentConfig::from_json(bad), std::invalid_argument);
  bad = base_config();
  bad["samples"] = 0;
  CHECK_THROWS_AS(ExperimentConfig::from_json(bad), std::invalid_argument);
  bad = base_config();
  bad["experiment"] = "percolate";
  CHECK_THROWS_AS(ExperimentConfig::from_json(bad), std::invalid_argument);
}

TEST_CASE("fit_exponent on exact power laws") {
  std::vector<FitPoint> p;
  for (double N : {2.0, 4.0, 8.0, 16.0}) p.push_back({N, std::pow(N, -2.0), 0.0});
  auto f = fit_exponent(p);
  CHECK(f.slope == doctest::Approx(-2.0).epsilon(1e-12));
  CHECK(f.slope_se == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(f.residual == doctest::Approx(0.0).epsilon(1e-12));
  p.clear();
  for (double M : {4.0, 16.0, 64.0, 256.0}) p.push_back({M, 3.0 * std::pow(M, -0.5), 0.01});
  f = fit_exponent(p);
  CHECK(f.slope == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(f.intercept == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  CHECK(f.residual == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("fit_exponent rejects bad input") {
  std::vector<FitPoint> p{{1, 1, 0}, {2, 0.5, 0}};
  CHECK_THROWS_AS(fit_exponent(p), std::invalid_argument);
  p.push_back({3, 0.0, 0});
  CHECK_THROWS_AS(fit_exponent(p), std::invalid_argument);
  p.back().y = -1.0;
  CHECK_THROWS_AS(fit_exponent(p), std::invalid_argument);
}

TEST_CASE("fit_exponent covers a noisy slope within two standard errors") {
  Rng rng(2024);
  int covered = 0;
  const int trials = 1000;
  for (int t = 0; t < trials; ++t) {
    std::vector<FitPoint> p;
    for (double N : {2.0, 4.0, 8.0, 16.0, 32.0}) {
      const double y = std::pow(N, -2.0);
      const double se = 0.05 * y;
      p.push_back({N, y * std::exp(0.05 * rng.normal()), se});
    }
    const auto f = fit_exponent(p);
    covered += std::fabs(f.slope + 2.0) < 2.0 * f.slope_se;
  }
  CHECK(covered >= 950);
}

TEST_CASE("one-arm at N = 0 is the probability that the origin is open") {
  auto j = base_config();
  j["grid"] = {0};
  j["samples"] = 4000;
  const auto r = quick(j);
  REQUIRE(r.records.size() == 1);
  CHECK(std::fabs(r.records[0].estimate - 0.5) < 3 * r.records[0].stderr_);
}

TEST_CASE("coupled one-arm estimates are monotone in N") {
  auto j = base_config();
  j["grid"] = {1, 2, 3, 4};
  j["samples"] = 500;
  const auto r = quick(j);
  for (std::size_t k = 1; k < r.records.size(); ++k) CHECK(r.records[k].estimate <= r.records[k - 1].estimate);
  auto j7 = j;
  j7["d"] = 7;
  j7["grid"] = {1, 2};
  j7["samples"] = 300;
  const auto r7 = quick(j7);
  CHECK(r7.records[1].estimate <= r7.records[0].estimate);
}

TEST_CASE("runs are reproducible from the seed") {
  auto j = base_config();
  j["samples"] = 300;
  const auto a = quick(j), b = quick(j);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t k = 0; k < a.records.size(); ++k) {
    CHECK(a.records[k].estimate == b.records[k].estimate);
    CHECK(a.records[k].stderr_ == b.records[k].stderr_);
  }
  j["seed"] = 8;
  const auto c = quick(j);
  bool differs = false;
  for (std::size_t k = 0; k < a.records.size(); ++k) differs |= a.records[k].estimate != c.records[k].estimate;
  CHECK(differs);
}

TEST_CASE("doubling the budget halves the squared standard error") {
  auto j = base_config();
  j["grid"] = {2};
  j["samples"] = 4000;
  const double s1 = quick(j).records[0].stderr_;
  j["samples"] = 8000;
  const double s2 = quick(j).records[0].stderr_;
  CHECK(s2 * s2 / (s1 * s1) == doctest::Approx(0.5).epsilon(0.15));
}

TEST_CASE("two-point connectivity of a vertex with itself is exactly one") {
  auto j = base_config();
  j["experiment"] = "twopoint";
  j["grid"] = {0, 1};
  j["padding"] = 2;
  j["samples"] = 100;
  const auto r = quick(j);
  CHECK(r.records[0].estimate == 1.0);
  CHECK(r.records[0].stderr_ == 0.0);
  CHECK(r.details["pairs"][0]["arcsin_target"].get<double>() == doctest::Approx(1.0));
}

TEST_CASE("memory ceiling truncates the d=7 grid and rejects infeasible runs") {
  auto j = base_config();
  j["d"] = 7;
  j["grid"] = {2, 3};
  j["padding"] = 3;
  j["samples"] = 50;
  RunOptions o;
  o.audit = false;
  // B(5)^7 fits in 300 MB for the completion buffers, B(6)^7 does not
  o.memory_cap = 300ull << 20;
  const auto r = run(ExperimentConfig::from_json(j), o);
  REQUIRE(r.records.size() == 1);
  CHECK(r.records[0].param == 2);
  REQUIRE(r.truncated.size() == 1);
  CHECK(r.truncated[0] == 3);
  o.memory_cap = 1 << 20;
  CHECK_THROWS_AS(run(ExperimentConfig::from_json(j), o), MemoryBudgetExceeded);
}

TEST_CASE("audit re-runs the first grid point with doubled padding") {
  auto j = base_config();
  j["grid"] = {1, 2};
  j["samples"] = 200;
  const auto r = run(ExperimentConfig::from_json(j));
  CHECK(r.audit.performed);
  CHECK(r.audit.padding == 4);
  CHECK(r.audit.param == 1);
  CHECK(r.audit.delta == doctest::Approx(r.audit.audit_estimate - r.audit.estimate));
}

TEST_CASE("csv output uses the fixed header and shortest round-trip numbers") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1.0 / 3.0) == "0.3333333333333333");
  CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
  CHECK(format_double(2.0) == "2");
  EstimateRecord r;
  r.experiment = ExperimentId::ghost;
  r.d = 7;
  r.param = 0.25;
  r.estimate = 0.125;
  r.stderr_ = 0.5;
  r.n = 10;
  r.seed = 3;
  r.wall_ms = 1.5;
  std::ostringstream os;
  write_csv(os, std::vector<EstimateRecord>{r});
  CHECK(os.str() == "experiment,d,param,estimate,stderr,n,seed,wall_ms\nghost,7,0.25,0.125,0.5,10,3,1.5\n");
}

TEST_CASE("volume and ghost records share draws") {
  const auto draws = sample_volumes(3, 4, 500, 11, Precision::dual);
  CHECK(draws.volumes.size() == 500);
  CHECK(draws.attempts == 500 + draws.censored);
  const std::vector<double> Ms{1, 2, 4}, hs{0.25, 0.5};
  const auto v = volume_tail_records(draws, 3, Ms, 11);
  const auto g = ghost_records(draws, 3, hs, 11);
  CHECK(v[0].estimate >= v[1].estimate);
  CHECK(v[1].estimate >= v[2].estimate);
  CHECK(g[0].estimate <= g[1].estimate);
  const auto again = sample_volumes(3, 4, 500, 11, Precision::dual);
  CHECK(again.volumes == draws.volumes);
}

TEST_CASE("validation suite passes, isolates the bridge mutation and is reproducible") {
  const auto a = validate(1);
  CHECK(a.passed());
  CHECK(a.to_json().dump() == validate(1).to_json().dump());
  ValidationOptions mut;
  mut.corrupt_bridge = true;
  const auto m = validate(1, mut);
  CHECK_FALSE(m.passed());
  for (const auto &c : m.checks) CHECK(c.passed == (c.name.rfind("bridge", 0) != 0));
}
