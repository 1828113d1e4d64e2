#include <omp.h>

#include <cmath>
#include <numbers>

#include "fpc/assembly.hpp"
#include "fpc/errors.hpp"
#include "fpc/toeplitz.hpp"

namespace fpc {

namespace {

// sum over ordered pairs a != b of |f_a - f_b|^p |a - b|^{-1-sp}
double chord_sum_direct(const std::vector<double>& f, double p, const std::vector<double>& k) {
  const std::size_t n = f.size();
  double acc = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    double row = 0.0;
    for (std::size_t b = a + 1; b < n; ++b) row += std::pow(std::abs(f[a] - f[b]), p) * k[b - a];
    acc += row;
  }
  return 2.0 * acc;
}

// Cell-centred lattice with m points per axis over the domain of u.
std::shared_ptr<const Grid> lattice(const GridFunction& u, int m) {
  const auto& dom = u.grid->domain();
  double shortest = dom.factors[0].length();
  for (const auto& iv : dom.factors) shortest = std::min(shortest, iv.length());
  // pick target spacing so that every axis gets m cells when the domain is a cube;
  // otherwise the shortest axis gets m cells
  return std::make_shared<const Grid>(DomainSpec::box(dom.factors), shortest / m);
}

}  // namespace

DirectionalSplit directional_decomposition(const GridFunction& u, double s, double p, int angular_nodes,
                                           int line_nodes) {
  if (!u.grid) throw UsageError("directional_decomposition: grid function without grid");
  const int n = u.grid->dim();
  if (n > 2) throw UnsupportedError("directional decomposition is limited to n <= 2");
  if (angular_nodes < 2 || line_nodes < 4) throw ConfigError("directional decomposition needs more nodes");
  if (!(p >= 1.0)) throw DomainError("directional decomposition needs p >= 1");
  const double sp = s * p;
  const auto& dom = u.grid->domain();
  DirectionalSplit out;

  // left side: lattice double sum with midpoint weights, self pairs dropped
  {
    const auto lat = lattice(u, line_nodes);
    std::vector<double> vals(lat->size());
    for (std::size_t i = 0; i < lat->size(); ++i) {
      const auto x = lat->node(i);
      vals[i] = u.interpolate(x);
    }
    const double vol = lat->cell_volume();
    std::vector<double> table(lat->size(), 0.0);
    for (std::size_t flat = 1; flat < table.size(); ++flat) {
      const auto d = lat->unflatten(flat);
      double r2 = 0.0;
      for (int k = 0; k < n; ++k) r2 += std::pow(static_cast<double>(d[k]) * lat->h()[k], 2);
      table[flat] = vol * vol * std::pow(r2, -0.5 * (n + sp));
    }
    double pairs;
    if (p == 2.0) {
      const ToeplitzProduct tp(lat->counts(), table);
      pairs = toeplitz_quadratic_energy(tp, lattice_row_sums(table, lat->counts()), 0.0, vals.data());
    } else {
      pairs = pair_energy(PairLayout::whole(lat->counts()), table.data(), vals.data(), p, nullptr);
    }
    out.lhs = 2.0 * pairs;
  }

  // right side
  const std::size_t L = static_cast<std::size_t>(line_nodes);
  std::vector<double> kern(L, 0.0);
  for (std::size_t d = 1; d < L; ++d) kern[d] = std::pow(static_cast<double>(d), -1.0 - sp);
  const auto kern_rows = lattice_row_sums(kern, {L});

  auto chord_energy = [&](const double* z, const double* w, ToeplitzProduct* tp, std::vector<double>& f) {
    double t0 = -INFINITY, t1 = INFINITY;
    for (int k = 0; k < n; ++k) {
      const auto& iv = dom.factors[k];
      if (std::abs(w[k]) < 1e-15) {
        if (!(z[k] > iv.lo && z[k] < iv.hi)) return 0.0;
        continue;
      }
      double a = (iv.lo - z[k]) / w[k], b = (iv.hi - z[k]) / w[k];
      if (a > b) std::swap(a, b);
      t0 = std::max(t0, a);
      t1 = std::min(t1, b);
    }
    if (!(t1 > t0)) return 0.0;
    const double dt = (t1 - t0) / static_cast<double>(L);
    double x[2];
    for (std::size_t a = 0; a < L; ++a) {
      const double t = t0 + (static_cast<double>(a) + 0.5) * dt;
      for (int k = 0; k < n; ++k) x[k] = z[k] + t * w[k];
      f[a] = u.interpolate(std::span<const double>(x, n));
    }
    const double sum = tp ? toeplitz_quadratic_energy(*tp, kern_rows, 0.0, f.data()) : chord_sum_direct(f, p, kern);
    return std::pow(dt, 1.0 - sp) * sum;
  };

  if (n == 1) {
    std::vector<double> f(L);
    const double z = 0.0, w = 1.0;
    std::unique_ptr<ToeplitzProduct> tp;
    if (p == 2.0) tp = std::make_unique<ToeplitzProduct>(std::vector<std::size_t>{L}, kern);
    // the two directions of S^0 traverse the same chord
    out.rhs = 2.0 * chord_energy(&z, &w, tp.get(), f);
    return out;
  }

  // n = 2: directions theta and theta + pi give the same lines, so sum over a half circle
  const int half = angular_nodes / 2;
  const bool even = angular_nodes % 2 == 0;
  const int nang = even ? half : angular_nodes;
  const double dtheta = 2.0 * std::numbers::pi / angular_nodes;
  const double cx = 0.5 * (dom.factors[0].lo + dom.factors[0].hi);
  const double cy = 0.5 * (dom.factors[1].lo + dom.factors[1].hi);
  const double lx = dom.factors[0].length(), ly = dom.factors[1].length();

  const int nt = omp_get_max_threads();
  std::vector<double> partial(nt, 0.0);
#pragma omp parallel num_threads(nt)
  {
    const int tid = omp_get_thread_num();
    std::unique_ptr<ToeplitzProduct> tp;
    if (p == 2.0) tp = std::make_unique<ToeplitzProduct>(std::vector<std::size_t>{L}, kern);
    std::vector<double> f(L);
    double acc = 0.0;
#pragma omp for schedule(static, 1)
    for (int k = 0; k < nang; ++k) {
      const double th = (k + 0.5) * dtheta;
      const double w[2] = {std::cos(th), std::sin(th)};
      const double perp[2] = {-w[1], w[0]};
      const double centre = cx * perp[0] + cy * perp[1];
      const double reach = 0.5 * (std::abs(perp[0]) * lx + std::abs(perp[1]) * ly);
      const double dtau = 2.0 * reach / static_cast<double>(L);
      double line_acc = 0.0;
      for (std::size_t j = 0; j < L; ++j) {
        const double tau = centre - reach + (static_cast<double>(j) + 0.5) * dtau;
        const double z[2] = {tau * perp[0], tau * perp[1]};
        line_acc += chord_energy(z, w, tp.get(), f);
      }
      acc += line_acc * dtau * dtheta;
    }
    partial[tid] = acc;
  }
  double rhs = 0.0;
  for (double v : partial) rhs += v;
  out.rhs = even ? 2.0 * rhs : rhs;
  return out;
}

}  // namespace fpc
