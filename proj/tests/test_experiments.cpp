#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "fpc/errors.hpp"
#include "fpc/experiments.hpp"
#include "oracles.hpp"

using namespace fpc;

TEST_CASE("picone functional") {
  std::mt19937_64 rng(61);
  std::uniform_real_distribution<double> d(0.1, 2.0);
  for (double p : {1.5, 2.0, 3.0})
    for (int t = 0; t < 1000; ++t) {
      const double fx = d(rng), fy = d(rng), gx = d(rng), gy = d(rng);
      CHECK(picone_l(fx, fy, gx, gy, p) == doctest::Approx(oracle::picone(fx, fy, gx, gy, p)).epsilon(1e-12));
      CHECK(picone_l(fx, fy, gx, gy, p) >= -1e-12);
    }
  CHECK(std::abs(picone_l(0.7, 1.3, 0.7, 1.3, 2.5)) <= 1e-14);
  CHECK(std::abs(picone_l(2 * 0.7, 2 * 1.3, 0.7, 1.3, 3.0)) <= 1e-12);
}

TEST_CASE("picone experiment is deterministic") {
  const auto a = run_picone(200, 16, 2.0, 7), b = run_picone(200, 16, 2.0, 7);
  CHECK(a.pass);
  CHECK(a.measurements == b.measurements);
  CHECK_THROWS_AS(run_picone(10, 8, 1.0, 7), DomainError);
}

TEST_CASE("least squares recovers an exact model") {
  // y = 1 + 2 x^-0.5 - 3 x^-1
  std::vector<double> X, y;
  for (double x : {2.0, 4.0, 8.0, 16.0, 32.0}) {
    X.insert(X.end(), {1.0, std::pow(x, -0.5), 1 / x});
    y.push_back(1 + 2 * std::pow(x, -0.5) - 3 / x);
  }
  const auto [c, rms] = least_squares(X, y, 3);
  CHECK(c[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(c[1] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(c[2] == doctest::Approx(-3.0).epsilon(1e-12));
  CHECK(rms <= 1e-12);
}

TEST_CASE("dilation experiment") {
  const DomainSpec d = DomainSpec::box({{-1, 1}});
  const auto r1 = run_dilation(d, 1.0, 0.5, 2.0, 1.0 / 32);
  CHECK(r1.pass);
  for (const auto& [name, v] : r1.measurements)
    if (name.find("rel_err") != std::string::npos) CHECK(v == 0.0);
  const auto r2 = run_dilation(d, 2.0, 0.5, 2.0, 1.0 / 32);
  CHECK(r2.pass);
  CHECK_THROWS(run_dilation(d, -1.0, 0.5, 2.0, 1.0 / 32));
}

TEST_CASE("sweep preconditions") {
  const std::vector<Interval> w{{-1, 1}};
  CHECK_THROWS_AS(run_monotonicity({4.0, 2.0}, w, w, 0.5, 2.0, 0.25), ConfigError);
  CHECK_THROWS_AS(run_cylinder_limit({2.0, 4.0}, w, w, 0.5, 2.0, 0.25), ConfigError);
  CHECK(run_monotonicity({2.0}, w, w, 0.5, 2.0, 0.25).pass);
}

TEST_CASE("sweep on a coarse grid") {
  const std::vector<Interval> w{{-1, 1}};
  const std::vector<double> ells{1.0, 2.0, 4.0};
  const auto m = run_monotonicity(ells, w, w, 0.5, 2.0, 1.0 / 8);
  const auto s = run_sandwich(ells, w, w, 0.5, 2.0, 1.0 / 8);
  CHECK(m.pass);
  CHECK(s.pass);
  CHECK(s.fit.has_value());
}

TEST_CASE("job runner keeps order and rethrows") {
  std::vector<std::function<ExperimentReport()>> jobs;
  for (int i = 0; i < 6; ++i)
    jobs.push_back([i] {
      ExperimentReport r;
      r.experiment_id = std::to_string(i);
      return r;
    });
  const auto out = run_jobs(jobs, 3);
  for (int i = 0; i < 6; ++i) CHECK(out[i].experiment_id == std::to_string(i));
  jobs.push_back([]() -> ExperimentReport { throw std::runtime_error("boom"); });
  CHECK_THROWS_AS(run_jobs(jobs, 2), std::runtime_error);
}

TEST_CASE("every tolerance is listed once") {
  const auto t = tolerance_table(default_tolerances());
  for (std::size_t i = 0; i < t.size(); ++i)
    for (std::size_t j = i + 1; j < t.size(); ++j) CHECK(t[i].first != t[j].first);
  CHECK(t.size() >= 18);
}

TEST_CASE("report pass is the conjunction of its checks") {
  ExperimentReport r;
  CHECK(r.check("a", 1.0, "<=", 2.0));
  CHECK(r.pass);
  CHECK_FALSE(r.check("b", 3.0, "<=", 2.0));
  CHECK_FALSE(r.pass);
  CHECK(r.check("c", 2.0, ">=", 1.0));
  CHECK_FALSE(r.pass);
}
