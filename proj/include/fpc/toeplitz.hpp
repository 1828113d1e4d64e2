#pragma once

#include <cstddef>
#include <memory>
#include <vector>

namespace fpc {

// Multilevel symmetric Toeplitz product y_i = sum_j T(|i - j|) x_j over a tensor lattice,
// evaluated by circulant embedding and FFT. T is given over nonnegative offsets, row-major
// with the lattice extents. Instances own scratch buffers: use one per thread.
class ToeplitzProduct {
 public:
  ToeplitzProduct(const std::vector<std::size_t>& counts, const std::vector<double>& table);
  ~ToeplitzProduct();
  ToeplitzProduct(const ToeplitzProduct&) = delete;
  ToeplitzProduct& operator=(const ToeplitzProduct&) = delete;

  std::size_t size() const { return size_; }
  void apply(const double* x, double* y) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::size_t size_ = 0;
};

// sum over ordered pairs i != j of T(|i-j|) (x_i - x_j)^2, using precomputed row sums
// (sum_j T(|i-j|) including j = i).
double toeplitz_quadratic_energy(const ToeplitzProduct& op, const std::vector<double>& row_sums, double t0,
                                 const double* x);

}  // namespace fpc
