#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <variant>
#include <vector>

namespace fpc {

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
  double length() const { return hi - lo; }
  bool operator==(const Interval&) const = default;
};

struct DomainSpec;

struct BoxTag {};
struct CylinderTag {
  double ell = 1.0;
  int free_dims = 1;
  std::vector<Interval> omega1;         // unscaled free-direction factors
  std::vector<Interval> cross_section;  // omega
};
struct DilationTag {
  std::shared_ptr<const DomainSpec> base;
  double t = 1.0;
};

struct DomainSpec {
  std::vector<Interval> factors;
  std::variant<BoxTag, CylinderTag, DilationTag> tag;

  static DomainSpec box(std::vector<Interval> factors);

  int dim() const { return static_cast<int>(factors.size()); }
  double volume() const;
  bool contains(std::span<const double> x) const;  // open domain
  // Geometric equality of the factors; the tag is provenance only.
  bool operator==(const DomainSpec& o) const { return factors == o.factors; }
};

DomainSpec dilate(const DomainSpec& domain, double t);
DomainSpec cylinder(double ell, const std::vector<Interval>& omega1, const std::vector<Interval>& omega);

class Grid {
 public:
  Grid(DomainSpec domain, double target_h);

  const DomainSpec& domain() const { return domain_; }
  int dim() const { return domain_.dim(); }
  double target_h() const { return target_h_; }
  const std::vector<double>& h() const { return h_; }
  const std::vector<std::size_t>& counts() const { return counts_; }
  std::size_t size() const { return size_; }
  double cell_volume() const { return cell_volume_; }

  double coordinate(int axis, std::size_t index) const;
  std::vector<std::size_t> unflatten(std::size_t flat) const;
  std::size_t flatten(std::span<const std::size_t> idx) const;
  std::vector<double> node(std::size_t flat) const;
  // True for nodes whose cell touches the boundary of the domain.
  bool in_boundary_layer(std::size_t flat) const;

  bool same_lattice(const Grid& o) const;

 private:
  DomainSpec domain_;
  double target_h_;
  std::vector<double> h_;
  std::vector<std::size_t> counts_;
  std::size_t size_ = 1;
  double cell_volume_ = 1.0;
};

Grid build_grid(const DomainSpec& domain, double target_h);

struct GridFunction {
  std::shared_ptr<const Grid> grid;
  std::vector<double> values;

  GridFunction() = default;
  GridFunction(std::shared_ptr<const Grid> g, std::vector<double> v);
  explicit GridFunction(std::shared_ptr<const Grid> g, double fill = 0.0);

  // Multilinear interpolation of node values; points in the outer half cell use the
  // nearest node layer, points outside the open domain give 0.
  double interpolate(std::span<const double> x) const;
};

// Sample f at every node.
template <class F>
GridFunction sample(std::shared_ptr<const Grid> g, F&& f) {
  GridFunction u(g);
  for (std::size_t i = 0; i < g->size(); ++i) {
    const auto x = g->node(i);
    u.values[i] = f(std::span<const double>(x));
  }
  return u;
}

// Integral over the complement of the box of |x-y|^{-n-sp} dy.
double exterior_kernel_weight(std::span<const double> x, const DomainSpec& domain, double s, double p);

}  // namespace fpc
