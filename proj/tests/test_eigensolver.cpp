#include <doctest.h>

#include <cmath>
#include <memory>
#include <vector>

#include "fpc/eigensolver.hpp"
#include "fpc/errors.hpp"
#include "oracles.hpp"

using namespace fpc;

namespace {

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

std::shared_ptr<const Grid> grid(std::vector<Interval> f, double h) {
  return std::make_shared<const Grid>(DomainSpec::box(std::move(f)), h);
}

// smallest eigenvalue of E(u) / (vol |u|^2), matrix built from the weights
double dense_oracle(const NonlocalOperator& op) {
  const int n = static_cast<int>(op.grid()->size());
  std::vector<double> a(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) {
    double diag = op.kind() == SeminormKind::Dirichlet ? op.exterior_weights()[i] : 0.0;
    for (int j = 0; j < n; ++j)
      if (j != i) {
        const double w = 2 * op.pair_weight(i, j);
        a[i * n + j] = -w;
        diag += w;
      }
    a[i * n + i] = diag;
  }
  return oracle::jacobi_min_eigenvalue(a, n) / op.grid()->cell_volume();
}

SolverConfig descent() {
  SolverConfig c;
  c.method = SolveMethod::Descent;
  return c;
}

}  // namespace

TEST_CASE("p = 2 solve against a Jacobi eigenvalue oracle") {
  for (double s : {0.25, 0.5, 0.75}) {
    const auto op1 = assemble(grid({{-1, 1}}, 1.0 / 32), s, 2.0, SeminormKind::Dirichlet);
    CHECK(rel(solve(op1, {}).lambda, dense_oracle(op1)) <= 1e-10);
    const auto op2 = assemble(grid({{-1, 1}, {0, 1}}, 1.0 / 8), s, 2.0, SeminormKind::Dirichlet);
    CHECK(rel(solve(op2, {}).lambda, dense_oracle(op2)) <= 1e-10);
  }
}

TEST_CASE("refinement in h is Cauchy for the Dirichlet constant") {
  std::vector<double> lam;
  for (double h : {1.0 / 64, 1.0 / 128, 1.0 / 256})
    lam.push_back(solve(assemble(grid({{-1, 1}}, h), 0.5, 2.0, SeminormKind::Dirichlet), {}).lambda);
  const double d1 = std::abs(lam[1] - lam[0]), d2 = std::abs(lam[2] - lam[1]);
  CHECK(d2 < d1);
  CHECK(d2 <= 1e-2 * lam[2]);
}

TEST_CASE("descent agrees with the linear path at p = 2") {
  for (double s : {0.25, 0.75}) {
    const auto op = assemble(grid({{-1, 1}}, 1.0 / 64), s, 2.0, SeminormKind::Dirichlet);
    const auto lin = solve(op, {});
    const auto des = solve(op, descent());
    CHECK(lin.method != des.method);
    CHECK(des.converged);
    CHECK(rel(des.lambda, lin.lambda) <= 1e-5);
  }
}

TEST_CASE("descent history never increases") {
  for (double p : {1.5, 3.0}) {
    const auto op = assemble(grid({{-1, 1}}, 1.0 / 64), 0.5, p, SeminormKind::Dirichlet);
    const auto r = solve(op, descent());
    REQUIRE(r.history.size() > 2);
    for (std::size_t k = 1; k < r.history.size(); ++k) CHECK(r.history[k] <= r.history[k - 1] + 1e-14);
    CHECK(r.converged);
  }
}

TEST_CASE("eigenfunction is nonnegative with unit norm") {
  for (double p : {1.5, 2.0, 3.0}) {
    const auto op = assemble(grid({{-1, 1}, {0, 1}}, 1.0 / 8), 0.5, p, SeminormKind::Dirichlet);
    const auto r = solve(op, {});
    CHECK(r.lambda >= 0.0);
    for (double v : r.eigenfunction.values) CHECK(v >= 0.0);
    CHECK(rel(lp_norm_p(r.eigenfunction, p), 1.0) <= 1e-12);
    CHECK(rel(rayleigh(op, r.eigenfunction), r.lambda) <= 1e-12);
    GridFunction neg = r.eigenfunction;
    for (auto& v : neg.values) v = -v;
    CHECK(rel(rayleigh(op, neg), r.lambda) <= 1e-14);
  }
}

TEST_CASE("scaling the initial guess does not move lambda") {
  const auto g = grid({{-1, 1}}, 1.0 / 32);
  const auto op = assemble(g, 0.5, 3.0, SeminormKind::Dirichlet);
  const auto u0 = sample(g, [](std::span<const double> x) { return 1.0 - x[0] * x[0]; });
  GridFunction u1 = u0;
  for (auto& v : u1.values) v *= 7.5;
  const double a = solve(op, descent(), &u0).lambda, b = solve(op, descent(), &u1).lambda;
  CHECK(rel(a, b) <= 1e-12);
}

TEST_CASE("regional constants give zero without the boundary layer") {
  const auto op = assemble(grid({{-1, 1}}, 1.0 / 32), 0.75, 2.0, SeminormKind::Regional);
  SolverConfig c;
  c.boundary_layer = false;
  const auto r = solve(op, c);
  GridFunction one(op.grid(), 1.0);
  CHECK(r.lambda <= rayleigh(op, one) + 1e-12);
  CHECK(r.lambda <= 1e-10);
  // with the layer pinned the constant is positive
  CHECK(solve(op, {}).lambda > 0.1);
}

TEST_CASE("domain monotonicity on nested grids") {
  for (double p : {1.5, 2.0}) {
    const double small = solve(assemble(grid({{-1, 1}}, 1.0 / 32), 0.5, p, SeminormKind::Dirichlet), {}).lambda;
    const double big = solve(assemble(grid({{-2, 2}}, 1.0 / 32), 0.5, p, SeminormKind::Dirichlet), {}).lambda;
    CHECK(big <= small + 1e-9);
  }
}

TEST_CASE("first eigenpair properties") {
  const auto op = assemble(grid({{-1, 1}}, 1.0 / 64), 0.5, 2.0, SeminormKind::Dirichlet);
  const auto lin = solve(op, {});
  const auto chk = check_first_eigen_properties(lin, op, 1e-10);
  CHECK(chk.weak_residual <= 1e-10);
  CHECK(chk.pass());

  const auto op3 = assemble(grid({{-1, 1}}, 1.0 / 64), 0.5, 3.0, SeminormKind::Dirichlet);
  SolverConfig c = descent();
  c.restarts = 5;
  const auto r = solve(op3, c);
  CHECK(r.restart_spread <= 1e-6 * r.lambda);
  CHECK(check_first_eigen_properties(r, op3).pass());
  // a shifted lambda breaks the weak form
  EigenResult off = lin;
  off.lambda *= 1.01;
  CHECK_FALSE(check_first_eigen_properties(off, op).weak_form);
}

TEST_CASE("non-convergence is reported, not thrown") {
  const auto op = assemble(grid({{-1, 1}}, 1.0 / 64), 0.5, 1.5, SeminormKind::Dirichlet);
  SolverConfig c = descent();
  c.max_iterations = 3;
  c.coarse_start_nodes = 0;
  const auto r = solve(op, c);
  CHECK_FALSE(r.converged);
  CHECK(std::isfinite(r.residual));
}

TEST_CASE("solver preconditions") {
  const auto op1 = assemble(grid({{-1, 1}}, 1.0 / 16), 0.5, 1.0, SeminormKind::Dirichlet);
  CHECK_THROWS_AS(solve(op1, {}), UnsupportedError);
  const auto op15 = assemble(grid({{-1, 1}}, 1.0 / 16), 0.5, 1.5, SeminormKind::Dirichlet);
  SolverConfig lin;
  lin.method = SolveMethod::Linear;
  CHECK_THROWS(solve(op15, lin));
  SolverConfig bad;
  bad.step_rule.shrink = 1.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("separable upper bound") {
  const double P = 1.14, v = 0.8, s = 0.5;
  for (double p : {1.5, 2.0, 3.0}) {
    const auto b = separable_upper_bound(1e12, P, v, true, s, p);
    CHECK(rel(b.product, P) <= 1e-5);
    CHECK(rel(b.expanded, P) <= 1e-5);
    CHECK(rel(b.c1, p * std::pow(2, p - 1) * std::pow(P, (p - 1) / p) * v) <= 1e-14);
    CHECK(rel(b.c2, p * std::pow(2, p - 1) * std::pow(v, p)) <= 1e-14);
    for (double ell : {0.5, 1.0, 2.0, 8.0}) {
      const auto a = separable_upper_bound(ell, P, v, true, s, p), a2 = separable_upper_bound(2 * ell, P, v, true, s, p);
      CHECK(a.product >= a2.product);
      CHECK(a.expanded >= a2.expanded);
      CHECK(rel(a.product, std::pow(std::pow(P, 1 / p) + v / std::pow(ell, s), p)) <= 1e-14);
      CHECK(a.expanded >= a.product);
    }
  }
  CHECK_THROWS_AS(separable_upper_bound(0.0, P, v, true, s, 2.0), DomainError);
}

TEST_CASE("cutoff seminorm is cached and positive") {
  const auto a = cutoff_seminorm(1, 0.5, 2.0, 1.0 / 64);
  const auto b = cutoff_seminorm(1, 0.5, 2.0, 1.0 / 64);
  CHECK(a.value > 0.0);
  CHECK(a.value == b.value);
  CHECK(a.h == 1.0 / 64);
}
