#include <doctest.h>
#include <omp.h>

#include <cmath>
#include <random>
#include <vector>

#include "fpc/pair_kernels.hpp"

using namespace fpc;

namespace {

struct Case {
  std::vector<std::size_t> counts;
  bool mirror;
};

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

}  // namespace

TEST_CASE("optimized pair kernel matches the serial reference") {
  std::mt19937_64 rng(41);
  const std::vector<Case> cases{{{17}, false}, {{17}, true}, {{16}, true}, {{9, 6}, false},
                                {{9, 6}, true}, {{8, 7}, true}, {{5, 4, 3}, true}};
  for (const auto& c : cases) {
    const auto layout = c.mirror ? PairLayout::mirrored(c.counts) : PairLayout::whole(c.counts);
    const auto table = random_vec(layout.table_size(), rng, 0.1, 1.0);
    const auto u = random_vec(layout.size(), rng, -1.0, 1.0);
    for (double p : {1.5, 2.0, 3.0}) {
      std::vector<double> g(layout.size()), gr(layout.size());
      const double e = pair_energy(layout, table.data(), u.data(), p, g.data());
      const double er = pair_energy_reference(layout, table.data(), u.data(), p, gr.data());
      CHECK(std::abs(e - er) <= 1e-12 * er);
      for (std::size_t i = 0; i < g.size(); ++i) CHECK(std::abs(g[i] - gr[i]) <= 1e-11 * (1 + std::abs(gr[i])));
      CHECK(pair_energy(layout, table.data(), u.data(), p, nullptr) == e);
    }
  }
}

TEST_CASE("mirrored layout reproduces the full energy of symmetric data") {
  std::mt19937_64 rng(43);
  const std::vector<std::size_t> counts{7, 6};
  const auto full = PairLayout::whole(counts), half = PairLayout::mirrored(counts);
  const auto table = random_vec(full.table_size(), rng, 0.1, 1.0);
  const auto r = random_vec(half.size(), rng, 0.0, 1.0);
  std::vector<double> u(full.size());
  for (std::size_t i = 0; i < full.size(); ++i) u[i] = r[half.full_to_rep(i)];
  const double ef = pair_energy(full, table.data(), u.data(), 2.5, nullptr);
  const double eh = pair_energy(half, table.data(), r.data(), 2.5, nullptr);
  CHECK(std::abs(ef - eh) <= 1e-12 * ef);
  double mult = 0.0;
  for (std::size_t i = 0; i < half.size(); ++i) mult += half.multiplicity(i);
  CHECK(mult == static_cast<double>(full.size()));
}

TEST_CASE("p = 2 pair matrix is the quadratic form") {
  std::mt19937_64 rng(47);
  const auto layout = PairLayout::mirrored({9, 5});
  const auto table = random_vec(layout.table_size(), rng, 0.1, 1.0);
  const auto u = random_vec(layout.size(), rng, -1.0, 1.0);
  const auto A = pair_matrix(layout, table.data());
  const std::size_t n = layout.size();
  double q = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) q += u[i] * A[i * n + j] * u[j];
  const double e = pair_energy(layout, table.data(), u.data(), 2.0, nullptr);
  CHECK(std::abs(q - e) <= 1e-12 * e);
}

TEST_CASE("fixed thread count gives identical bits") {
  std::mt19937_64 rng(53);
  const auto layout = PairLayout::mirrored({40, 30});
  const auto table = random_vec(layout.table_size(), rng, 0.1, 1.0);
  const auto u = random_vec(layout.size(), rng, -1.0, 1.0);
  std::vector<double> g1(layout.size()), g2(layout.size());
  const double e1 = pair_energy(layout, table.data(), u.data(), 1.7, g1.data());
  const double e2 = pair_energy(layout, table.data(), u.data(), 1.7, g2.data());
  CHECK(e1 == e2);
  CHECK(g1 == g2);
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  std::vector<double> g3(layout.size()), g4(layout.size());
  CHECK(pair_energy(layout, table.data(), u.data(), 1.7, g3.data()) ==
        pair_energy(layout, table.data(), u.data(), 1.7, g4.data()));
  CHECK(g3 == g4);
  omp_set_num_threads(saved);
}
