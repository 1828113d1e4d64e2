#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <random>
#include <vector>

#include "fpc/assembly.hpp"
#include "fpc/errors.hpp"
#include "fpc/special_fn.hpp"
#include "oracles.hpp"

using namespace fpc;

namespace {

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

std::shared_ptr<const Grid> grid(std::vector<Interval> f, double h) {
  return std::make_shared<const Grid>(DomainSpec::box(std::move(f)), h);
}

GridFunction random_u(std::shared_ptr<const Grid> g, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  GridFunction u(g);
  for (auto& v : u.values) v = d(rng);
  return u;
}

// sum over i < j of 2 w_ij |u_i - u_j|^p plus the exterior part, from pair_weight
double brute_energy(const NonlocalOperator& op, const GridFunction& u) {
  double e = 0.0;
  const std::size_t n = u.values.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      e += 2 * op.pair_weight(i, j) * std::pow(std::abs(u.values[i] - u.values[j]), op.p());
  if (op.kind() == SeminormKind::Dirichlet)
    for (std::size_t i = 0; i < n; ++i) e += op.exterior_weights()[i] * std::pow(std::abs(u.values[i]), op.p());
  return e;
}

}  // namespace

TEST_CASE("energy basics") {
  auto g = grid({{-1, 1}, {0, 1}}, 1.0 / 8);
  const auto reg = assemble(g, 0.5, 2.0, SeminormKind::Regional);
  const auto dir = assemble(g, 0.5, 2.0, SeminormKind::Dirichlet);
  CHECK(energy(reg, GridFunction(g, 0.0)) == 0.0);
  CHECK(std::abs(energy(reg, GridFunction(g, 1.0))) <= 1e-14);
  double ext = 0.0;
  for (double e : dir.exterior_weights()) {
    CHECK(e > 0.0);
    ext += e;
  }
  CHECK(rel(energy(dir, GridFunction(g, 1.0)), ext) <= 1e-13);
  for (double e : reg.exterior_weights()) CHECK(e == 0.0);
}

TEST_CASE("energy agrees with the pairwise definition") {
  std::mt19937_64 rng(3);
  for (auto [f, h] : {std::pair{std::vector<Interval>{{-1, 1}}, 1.0 / 16}, {{{-1, 1}, {0, 0.5}}, 1.0 / 8}})
    for (double s : {0.25, 0.75})
      for (double p : {1.5, 2.0, 3.0})
        for (auto kind : {SeminormKind::Regional, SeminormKind::Dirichlet}) {
          auto g = grid(f, h);
          const auto op = assemble(g, s, p, kind);
          const auto u = random_u(g, rng);
          CHECK(rel(energy(op, u), brute_energy(op, u)) <= 1e-12);
        }
}

TEST_CASE("weights are symmetric and positive") {
  auto g = grid({{-1, 1}, {0, 1}}, 1.0 / 4);
  const auto op = assemble(g, 0.6, 2.5, SeminormKind::Dirichlet);
  for (std::size_t i = 0; i < g->size(); ++i)
    for (std::size_t j = 0; j < g->size(); ++j) {
      CHECK(op.pair_weight(i, j) == op.pair_weight(j, i));
      if (i != j) CHECK(op.pair_weight(i, j) > 0.0);
    }
}

TEST_CASE("far field midpoint weight") {
  // sp < 1 keeps the bare kernel, so beyond the near field the weight is the midpoint value
  const double s = 0.25, p = 2.0, h = 1.0 / 16;
  auto g = grid({{-1, 1}}, h);
  AssemblyConfig cfg;
  cfg.far_field_rule = FarFieldRule::Midpoint;
  cfg.near_field_radius = 2;
  const auto op = assemble(g, s, p, SeminormKind::Regional, cfg);
  const double c = c_flap(1, s, p);
  for (std::size_t k : {3u, 7u, 20u}) {
    const double want = c / 2 * h * h * std::pow(k * h, -1 - s * p);
    CHECK(rel(op.pair_weight(0, k), want) <= 1e-14);
  }
}

TEST_CASE("bare-kernel weights are exact cell integrals in 1D") {
  for (double s : {0.2, 0.45}) {
    const double p = 2.0, sp = s * p, h = 1.0 / 32;
    auto g = grid({{-1, 1}}, h);
    const auto op = assemble(g, s, p, SeminormKind::Dirichlet);
    REQUIRE(op.eps() == 0.0);
    const double c = c_flap(1, s, p);
    for (std::size_t k : {1u, 2u, 4u, 5u, 30u})
      CHECK(rel(op.pair_weight(0, k), c / 2 * oracle::cell_pair_1d(k * h, h, sp)) <= 1e-10);
    // exterior weight = C * integral over the cell of kappa
    for (std::size_t i : {0u, 5u, 31u}) {
      const double lo = -1 + i * h;
      CHECK(rel(op.exterior_weights()[i], c * oracle::kappa_1d_cell(lo, lo + h, -1, 1, sp)) <= 1e-10);
    }
  }
}

TEST_CASE("homogeneity, kind ordering and translation") {
  std::mt19937_64 rng(11);
  auto g = grid({{-1, 1}, {0, 1}}, 1.0 / 8);
  auto gt = grid({{2, 4}, {-3, -2}}, 1.0 / 8);
  for (double p : {1.5, 2.0, 3.0}) {
    const auto dir = assemble(g, 0.5, p, SeminormKind::Dirichlet);
    const auto reg = assemble(g, 0.5, p, SeminormKind::Regional);
    const auto dirt = assemble(gt, 0.5, p, SeminormKind::Dirichlet);
    const auto u = random_u(g, rng);
    const double e = energy(dir, u);
    for (double c : {-2.0, 0.5, 10.0}) {
      GridFunction cu(g);
      for (std::size_t i = 0; i < u.values.size(); ++i) cu.values[i] = c * u.values[i];
      CHECK(rel(energy(dir, cu), std::pow(std::abs(c), p) * e) <= 1e-12);
      CHECK(rel(lp_norm_p(cu, p), std::pow(std::abs(c), p) * lp_norm_p(u, p)) <= 1e-12);
    }
    CHECK(energy(dir, u) >= energy(reg, u));
    GridFunction ut(gt, u.values);
    CHECK(rel(energy(dirt, ut), e) <= 1e-12);
  }
}

TEST_CASE("lp norm") {
  for (double h : {0.5, 1.0 / 64}) {
    auto g = grid({{-1, 1}}, h);
    CHECK(rel(lp_norm_p(GridFunction(g, 1.0), 2.0), 2.0) <= 1e-14);
    CHECK(lp_norm_p(GridFunction(g, 0.0), 1.5) == 0.0);
  }
}

TEST_CASE("rayleigh quotient") {
  std::mt19937_64 rng(5);
  auto g = grid({{-1, 1}}, 1.0 / 32);
  for (double p : {1.5, 2.0, 3.0}) {
    const auto dir = assemble(g, 0.5, p, SeminormKind::Dirichlet);
    const auto reg = assemble(g, 0.5, p, SeminormKind::Regional);
    for (int t = 0; t < 100; ++t) {
      const auto u = random_u(g, rng);
      GridFunction au(g), cu(g);
      for (std::size_t i = 0; i < u.values.size(); ++i) {
        au.values[i] = std::abs(u.values[i]);
        cu.values[i] = -3 * u.values[i];
      }
      CHECK(rayleigh(dir, au) <= rayleigh(dir, u) * (1 + 1e-14));
      CHECK(rel(rayleigh(dir, cu), rayleigh(dir, u)) <= 1e-12);
      CHECK(rayleigh(dir, u) >= rayleigh(reg, u));
    }
    CHECK_THROWS_AS(rayleigh(dir, GridFunction(g, 0.0)), UndefinedQuotientError);
  }
}

TEST_CASE("p = 1 evaluates energy but has no gradient") {
  auto g = grid({{-1, 1}}, 1.0 / 16);
  const auto op = assemble(g, 0.5, 1.0, SeminormKind::Regional);
  GridFunction u = sample(g, [](std::span<const double> x) { return std::cos(x[0]); });
  CHECK(energy(op, u) > 0.0);
  CHECK_THROWS_AS(energy_gradient(op, u), UnsupportedError);
}

TEST_CASE("gradient matches central differences with second order") {
  std::mt19937_64 rng(17);
  for (auto [f, h] : {std::pair{std::vector<Interval>{{-1, 1}}, 1.0 / 16}, {{{-1, 1}, {0, 1}}, 1.0 / 6}})
    for (double p : {1.5, 2.0, 3.0}) {
      auto g = grid(f, h);
      const auto op = assemble(g, 0.5, p, SeminormKind::Dirichlet);
      double worst_order = 1e9;
      for (int trial = 0; trial < 5; ++trial) {
        // positive, well-separated values keep |u_i - u_j|^p smooth at p = 1.5
        GridFunction u(g);
        for (std::size_t i = 0; i < u.values.size(); ++i) u.values[i] = 1.0 + 0.5 * static_cast<double>(i) / u.values.size();
        const auto d = random_u(g, rng);
        const auto gr = energy_gradient(op, u);
        double dir = 0.0;
        for (std::size_t i = 0; i < d.values.size(); ++i) dir += gr.values[i] * d.values[i];
        auto fd = [&](double e) {
          GridFunction a(g), b(g);
          for (std::size_t i = 0; i < u.values.size(); ++i) {
            a.values[i] = u.values[i] + e * d.values[i];
            b.values[i] = u.values[i] - e * d.values[i];
          }
          return std::abs((energy(op, a) - energy(op, b)) / (2 * e) - dir);
        };
        const double e1 = fd(1e-3), e2 = fd(5e-4);
        if (e1 > 1e-11 * std::abs(dir)) worst_order = std::min(worst_order, std::log2(e1 / e2));
      }
      CHECK(worst_order >= 1.9);
    }
}

TEST_CASE("p = 2 gradient is 2 A u") {
  std::mt19937_64 rng(23);
  auto g = grid({{-1, 1}, {0, 1}}, 1.0 / 6);
  const auto op = assemble(g, 0.5, 2.0, SeminormKind::Dirichlet);
  const auto u = random_u(g, rng);
  const auto gr = energy_gradient(op, u);
  const std::size_t n = g->size();
  double scale = 0.0, err = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double au = op.exterior_weights()[i] * u.values[i];
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) au += 2 * op.pair_weight(i, j) * (u.values[i] - u.values[j]);
    err = std::max(err, std::abs(gr.values[i] - 2 * au));
    scale = std::max(scale, std::abs(gr.values[i]));
  }
  CHECK(err <= 1e-12 * scale);
}

TEST_CASE("constant is regional-harmonic") {
  auto g = grid({{-1, 1}}, 1.0 / 16);
  const auto op = assemble(g, 0.5, 3.0, SeminormKind::Regional);
  for (double v : energy_gradient(op, GridFunction(g, 2.0)).values) CHECK(v == 0.0);
}

TEST_CASE("discrete dilation of the energy") {
  std::mt19937_64 rng(29);
  const DomainSpec d = DomainSpec::box({{-1, 1}, {0, 1}});
  for (double t : {0.5, 2.0})
    for (double sp : {0.8, 1.5}) {
      const double s = sp / 2, h = 1.0 / 8;
      auto g = std::make_shared<const Grid>(d, h);
      auto gt = std::make_shared<const Grid>(dilate(d, t), t * h);
      for (auto kind : {SeminormKind::Regional, SeminormKind::Dirichlet}) {
        const auto a = assemble(g, s, 2.0, kind), b = assemble(gt, s, 2.0, kind);
        const auto u = random_u(g, rng);
        CHECK(rel(energy(b, GridFunction(gt, u.values)), std::pow(t, 2 - sp) * energy(a, u)) <= 1e-10);
      }
    }
}

TEST_CASE("weight file round trip") {
  auto g = grid({{-1, 1}, {0, 1}}, 1.0 / 8);
  const auto op = assemble(g, 0.7, 2.0, SeminormKind::Dirichlet);
  const auto path = (std::filesystem::temp_directory_path() / "fpc_test_weights.fpnl").string();
  write_weights(op, path);
  const auto back = read_weights(path, g);
  CHECK(back.offset_weights() == op.offset_weights());
  CHECK(back.exterior_weights() == op.exterior_weights());
  CHECK(back.s() == op.s());
  CHECK(back.eps() == op.eps());
  auto other = grid({{-1, 1}, {0, 1}}, 1.0 / 4);
  CHECK_THROWS(read_weights(path, other));
  std::remove(path.c_str());
}

TEST_CASE("node budget") {
  AssemblyConfig cfg;
  cfg.max_nodes = 100;
  auto g = grid({{-1, 1}, {-1, 1}}, 1.0 / 16);
  try {
    assemble(g, 0.5, 2.0, SeminormKind::Dirichlet, cfg);
    FAIL("no resource error");
  } catch (const ResourceError& e) {
    CHECK(std::string(e.what()).find("1024") != std::string::npos);
  }
}

TEST_CASE("directional decomposition") {
  auto g1 = grid({{-1, 1}}, 1.0 / 32);
  const auto z = directional_decomposition(GridFunction(g1, 0.0), 0.5, 2.0, 16, 16);
  CHECK(z.lhs == 0.0);
  CHECK(z.rhs == 0.0);
  // one dimension: both sides are the same double integral
  const auto u = sample(g1, [](std::span<const double> x) { return std::cos(M_PI * x[0] / 2); });
  const auto one = directional_decomposition(u, 0.5, 2.0, 2, 256);
  CHECK(std::abs(one.lhs - one.rhs) <= 1e-6 * one.lhs);
  auto g3 = grid({{0, 1}, {0, 1}, {0, 1}}, 0.5);
  CHECK_THROWS_AS(directional_decomposition(GridFunction(g3, 1.0), 0.5, 2.0, 8, 8), UnsupportedError);
}
