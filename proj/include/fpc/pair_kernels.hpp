#pragma once

#include <cstddef>
#include <vector>

namespace fpc {

// Index space of the pair kernels. Every axis is either kept whole or folded by the
// mirror symmetry i -> n-1-i, in which case only indices below ceil(n/2) are kept and
// each represents its mirror orbit. Pair weights come from a table over nonnegative
// lattice offsets laid out row-major with extents `full`.
struct PairLayout {
  std::vector<std::size_t> full;
  std::vector<std::size_t> reps;
  std::vector<bool> folded;

  static PairLayout whole(const std::vector<std::size_t>& counts);
  static PairLayout mirrored(const std::vector<std::size_t>& counts);

  int dim() const { return static_cast<int>(full.size()); }
  std::size_t size() const;
  std::size_t table_size() const;
  // Number of full-grid nodes represented by rep index `flat`.
  double multiplicity(std::size_t flat) const;
  // Full-grid flat index of the rep (its member in the lower half).
  std::size_t rep_to_full(std::size_t flat) const;
  // Rep flat index representing full-grid node `flat`.
  std::size_t full_to_rep(std::size_t flat) const;
};

// Pair part of the discrete energy, sum over ordered rep pairs a != b of
// F(a,b) |u_a - u_b|^p, where F(a,b) sums the table weight over every pair of full-grid
// nodes in the two orbits. If grad is non-null it receives the gradient with respect to
// the rep values. Parallel over the first index with per-thread buffers reduced in
// thread order, so results are reproducible for a fixed thread count.
double pair_energy(const PairLayout& layout, const double* table, const double* u, double p, double* grad);

// Plain serial loop over all ordered pairs with explicit orbit enumeration. Kept as the
// reference the optimized kernel is tested and benchmarked against.
double pair_energy_reference(const PairLayout& layout, const double* table, const double* u, double p,
                             double* grad);

// Orbit-summed weight F(a,b) for reps a != b.
double folded_weight(const PairLayout& layout, const double* table, std::size_t a, std::size_t b);

// Dense matrix of the quadratic pair energy in rep coordinates: the pair energy at p = 2
// equals u^T A u. Row-major, size() x size().
std::vector<double> pair_matrix(const PairLayout& layout, const double* table);

}  // namespace fpc
