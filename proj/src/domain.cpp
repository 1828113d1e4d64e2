#include "fpc/domain.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "fpc/errors.hpp"
#include "fpc/quadrature.hpp"

namespace fpc {

namespace {

void check_factors(const std::vector<Interval>& f) {
  if (f.empty()) throw DomainError("domain needs at least one factor");
  for (const auto& iv : f)
    if (!(iv.lo < iv.hi) || !std::isfinite(iv.lo) || !std::isfinite(iv.hi))
      throw DomainError("empty or unbounded factor interval");
}

}  // namespace

DomainSpec DomainSpec::box(std::vector<Interval> factors) {
  check_factors(factors);
  return DomainSpec{std::move(factors), BoxTag{}};
}

double DomainSpec::volume() const {
  double v = 1.0;
  for (const auto& iv : factors) v *= iv.length();
  return v;
}

bool DomainSpec::contains(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != dim()) return false;
  for (int k = 0; k < dim(); ++k)
    if (!(x[k] > factors[k].lo && x[k] < factors[k].hi)) return false;
  return true;
}

DomainSpec dilate(const DomainSpec& domain, double t) {
  if (!(t > 0.0) || !std::isfinite(t)) throw DomainError("dilation factor must be positive");
  if (t == 1.0) return domain;
  // collapse nested dilations so that dilate(dilate(D, t), 1/t) returns D itself
  if (const auto* d = std::get_if<DilationTag>(&domain.tag)) {
    const double tt = d->t * t;
    if (tt == 1.0) return *d->base;
    return dilate(*d->base, tt);
  }
  DomainSpec out;
  out.factors.reserve(domain.factors.size());
  for (const auto& iv : domain.factors) out.factors.push_back({t * iv.lo, t * iv.hi});
  out.tag = DilationTag{std::make_shared<const DomainSpec>(domain), t};
  return out;
}

DomainSpec cylinder(double ell, const std::vector<Interval>& omega1, const std::vector<Interval>& omega) {
  if (!(ell > 0.0)) throw DomainError("cylinder: ell must be positive");
  check_factors(omega1);
  check_factors(omega);
  DomainSpec out;
  for (const auto& iv : omega1) out.factors.push_back({ell * iv.lo, ell * iv.hi});
  for (const auto& iv : omega) out.factors.push_back(iv);
  out.tag = CylinderTag{ell, static_cast<int>(omega1.size()), omega1, omega};
  return out;
}

Grid::Grid(DomainSpec domain, double target_h) : domain_(std::move(domain)), target_h_(target_h) {
  check_factors(domain_.factors);
  if (!(target_h > 0.0)) throw ConfigError("grid spacing must be positive");
  for (const auto& iv : domain_.factors) {
    const double len = iv.length();
    // h = len / 2 is allowed: it still gives the two nodes per axis a grid needs
    if (!(target_h <= 0.5 * len))
      throw ConfigError("grid spacing " + std::to_string(target_h) + " exceeds half the factor length " +
                        std::to_string(len));
    const double cells = len / target_h;
    auto c = static_cast<std::size_t>(std::ceil(cells * (1.0 - 1e-12)));
    c = std::max<std::size_t>(c, 2);
    counts_.push_back(c);
    h_.push_back(len / static_cast<double>(c));
    size_ *= c;
    cell_volume_ *= h_.back();
  }
}

Grid build_grid(const DomainSpec& domain, double target_h) { return Grid(domain, target_h); }

double Grid::coordinate(int axis, std::size_t index) const {
  return domain_.factors[axis].lo + (static_cast<double>(index) + 0.5) * h_[axis];
}

std::vector<std::size_t> Grid::unflatten(std::size_t flat) const {
  std::vector<std::size_t> idx(dim());
  for (int k = dim() - 1; k >= 0; --k) {
    idx[k] = flat % counts_[k];
    flat /= counts_[k];
  }
  return idx;
}

std::size_t Grid::flatten(std::span<const std::size_t> idx) const {
  std::size_t flat = 0;
  for (int k = 0; k < dim(); ++k) flat = flat * counts_[k] + idx[k];
  return flat;
}

std::vector<double> Grid::node(std::size_t flat) const {
  const auto idx = unflatten(flat);
  std::vector<double> x(dim());
  for (int k = 0; k < dim(); ++k) x[k] = coordinate(k, idx[k]);
  return x;
}

bool Grid::in_boundary_layer(std::size_t flat) const {
  for (int k = dim() - 1; k >= 0; --k) {
    const std::size_t i = flat % counts_[k];
    flat /= counts_[k];
    if (i == 0 || i + 1 == counts_[k]) return true;
  }
  return false;
}

bool Grid::same_lattice(const Grid& o) const {
  return domain_.factors == o.domain_.factors && counts_ == o.counts_;
}

GridFunction::GridFunction(std::shared_ptr<const Grid> g, std::vector<double> v)
    : grid(std::move(g)), values(std::move(v)) {
  if (!grid || values.size() != grid->size()) throw UsageError("grid function size does not match its grid");
}

GridFunction::GridFunction(std::shared_ptr<const Grid> g, double fill) : grid(std::move(g)) {
  if (!grid) throw UsageError("grid function needs a grid");
  values.assign(grid->size(), fill);
}

double GridFunction::interpolate(std::span<const double> x) const {
  const Grid& g = *grid;
  const int n = g.dim();
  if (!g.domain().contains(x)) return 0.0;
  std::size_t base[8];
  double frac[8];
  for (int k = 0; k < n; ++k) {
    const auto& iv = g.domain().factors[k];
    const double last = static_cast<double>(g.counts()[k] - 1);
    const double xi = std::clamp((x[k] - iv.lo) / g.h()[k] - 0.5, 0.0, last);
    double i0 = std::floor(xi);
    if (i0 >= last) i0 = last - 1.0;
    base[k] = static_cast<std::size_t>(i0);
    frac[k] = xi - i0;
  }
  double acc = 0.0;
  std::size_t idx[8];
  for (int corner = 0; corner < (1 << n); ++corner) {
    double w = 1.0;
    for (int k = 0; k < n; ++k) {
      const int bit = (corner >> k) & 1;
      idx[k] = base[k] + bit;
      w *= bit ? frac[k] : 1.0 - frac[k];
    }
    if (w != 0.0) acc += w * values[g.flatten(std::span<const std::size_t>(idx, n))];
  }
  return acc;
}

namespace {

// Iterated adaptive integral of f over the box lo..hi (dimension d = lo.size()),
// splitting every axis at the matching coordinate of `foot`.
double integrate_box(const std::function<double(std::span<const double>)>& f, const std::vector<double>& lo,
                     const std::vector<double>& hi, const std::vector<double>& foot, std::vector<double>& y,
                     std::size_t axis, double rel_tol) {
  if (axis == lo.size()) return f(y);
  auto inner = [&](double t) {
    y[axis] = t;
    return integrate_box(f, lo, hi, foot, y, axis + 1, rel_tol);
  };
  return quad::gauss_kronrod(inner, lo[axis], hi[axis], std::vector<double>{foot[axis]}, 0.0, rel_tol).value;
}

}  // namespace

double exterior_kernel_weight(std::span<const double> x, const DomainSpec& domain, double s, double p) {
  const double sp = s * p;
  if (!(sp > 0.0)) throw DomainError("exterior_kernel_weight: sp must be positive");
  const int n = domain.dim();
  if (static_cast<int>(x.size()) != n) throw DomainError("exterior_kernel_weight: dimension mismatch");
  if (!domain.contains(x)) throw DomainError("exterior_kernel_weight: point not strictly inside the domain");
  // Polar coordinates about x turn the exterior integral into (1/sp) * integral over the
  // unit sphere of dist(theta)^{-sp}; mapping the sphere onto the box faces gives
  // (1/sp) * sum over faces of d_face * integral_face |y-x|^{-n-sp} dA.
  if (n == 1) {
    const auto& iv = domain.factors[0];
    return (std::pow(iv.hi - x[0], -sp) + std::pow(x[0] - iv.lo, -sp)) / sp;
  }
  double total = 0.0;
  for (int k = 0; k < n; ++k) {
    std::vector<double> lo, hi, foot;
    for (int j = 0; j < n; ++j) {
      if (j == k) continue;
      lo.push_back(domain.factors[j].lo);
      hi.push_back(domain.factors[j].hi);
      foot.push_back(x[j]);
    }
    for (int side = 0; side < 2; ++side) {
      const double d = side ? domain.factors[k].hi - x[k] : x[k] - domain.factors[k].lo;
      const double d2 = d * d;
      auto f = [&](std::span<const double> y) {
        double r2 = d2;
        for (std::size_t j = 0; j < y.size(); ++j) r2 += (y[j] - foot[j]) * (y[j] - foot[j]);
        return std::pow(r2, -0.5 * (n + sp));
      };
      std::vector<double> y(n - 1);
      total += d * integrate_box(f, lo, hi, foot, y, 0, 1e-11);
    }
  }
  return total / sp;
}

}  // namespace fpc
