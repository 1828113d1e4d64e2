#include "fpc/toeplitz.hpp"

#include <fftw3.h>

#include <algorithm>
#include <mutex>

#include "fpc/errors.hpp"

namespace fpc {

namespace {

std::mutex& planner_mutex() {
  static std::mutex mu;
  return mu;
}

}  // namespace

struct ToeplitzProduct::Impl {
  std::vector<std::size_t> counts;
  std::vector<int> ext;  // 2 * counts
  std::size_t real_size = 1, complex_size = 1;
  double* rbuf = nullptr;
  fftw_complex* cbuf = nullptr;
  fftw_complex* kernel = nullptr;
  fftw_plan fwd = nullptr, bwd = nullptr;

  ~Impl() {
    std::lock_guard lock(planner_mutex());
    if (fwd) fftw_destroy_plan(fwd);
    if (bwd) fftw_destroy_plan(bwd);
    fftw_free(rbuf);
    fftw_free(cbuf);
    fftw_free(kernel);
  }
};

ToeplitzProduct::ToeplitzProduct(const std::vector<std::size_t>& counts, const std::vector<double>& table)
    : impl_(std::make_unique<Impl>()) {
  auto& m = *impl_;
  const int n = static_cast<int>(counts.size());
  if (n < 1) throw UsageError("toeplitz product needs at least one axis");
  m.counts = counts;
  size_ = 1;
  for (auto c : counts) size_ *= c;
  if (table.size() != size_) throw UsageError("toeplitz table size mismatch");
  for (int k = 0; k < n; ++k) {
    m.ext.push_back(static_cast<int>(2 * counts[k]));
    m.real_size *= 2 * counts[k];
    m.complex_size *= (k + 1 < n) ? 2 * counts[k] : counts[k] + 1;
  }
  m.rbuf = fftw_alloc_real(m.real_size);
  m.cbuf = fftw_alloc_complex(m.complex_size);
  m.kernel = fftw_alloc_complex(m.complex_size);
  {
    std::lock_guard lock(planner_mutex());
    m.fwd = fftw_plan_dft_r2c(n, m.ext.data(), m.rbuf, m.cbuf, FFTW_ESTIMATE);
    m.bwd = fftw_plan_dft_c2r(n, m.ext.data(), m.cbuf, m.rbuf, FFTW_ESTIMATE);
  }
  // circulant embedding: position q along axis k holds offset q for q < n_k, 2n_k - q for
  // q > n_k, and zero at q = n_k
  std::vector<std::size_t> q(n, 0);
  for (std::size_t flat = 0; flat < m.real_size; ++flat) {
    std::size_t rest = flat;
    for (int k = n - 1; k >= 0; --k) {
      q[k] = rest % m.ext[k];
      rest /= m.ext[k];
    }
    bool zero = false;
    std::size_t tidx = 0;
    for (int k = 0; k < n; ++k) {
      const std::size_t nk = counts[k];
      std::size_t off;
      if (q[k] < nk) {
        off = q[k];
      } else if (q[k] == nk) {
        zero = true;
        off = 0;
      } else {
        off = 2 * nk - q[k];
      }
      tidx = tidx * nk + off;
    }
    m.rbuf[flat] = zero ? 0.0 : table[tidx];
  }
  fftw_execute(m.fwd);
  const double scale = 1.0 / static_cast<double>(m.real_size);
  for (std::size_t i = 0; i < m.complex_size; ++i) {
    m.kernel[i][0] = m.cbuf[i][0] * scale;
    m.kernel[i][1] = m.cbuf[i][1] * scale;
  }
}

ToeplitzProduct::~ToeplitzProduct() = default;

void ToeplitzProduct::apply(const double* x, double* y) const {
  auto& m = *impl_;
  const int n = static_cast<int>(m.counts.size());
  std::fill(m.rbuf, m.rbuf + m.real_size, 0.0);
  // scatter x into the lower corner of the extended lattice
  std::vector<std::size_t> idx(n, 0);
  for (std::size_t flat = 0; flat < size_; ++flat) {
    std::size_t ext_flat = 0;
    for (int k = 0; k < n; ++k) ext_flat = ext_flat * m.ext[k] + idx[k];
    m.rbuf[ext_flat] = x[flat];
    for (int k = n - 1; k >= 0; --k) {
      if (++idx[k] < m.counts[k]) break;
      idx[k] = 0;
    }
  }
  fftw_execute(m.fwd);
  for (std::size_t i = 0; i < m.complex_size; ++i) {
    const double a = m.cbuf[i][0], b = m.cbuf[i][1];
    const double c = m.kernel[i][0], d = m.kernel[i][1];
    m.cbuf[i][0] = a * c - b * d;
    m.cbuf[i][1] = a * d + b * c;
  }
  fftw_execute(m.bwd);
  std::fill(idx.begin(), idx.end(), 0);
  for (std::size_t flat = 0; flat < size_; ++flat) {
    std::size_t ext_flat = 0;
    for (int k = 0; k < n; ++k) ext_flat = ext_flat * m.ext[k] + idx[k];
    y[flat] = m.rbuf[ext_flat];
    for (int k = n - 1; k >= 0; --k) {
      if (++idx[k] < m.counts[k]) break;
      idx[k] = 0;
    }
  }
}

double toeplitz_quadratic_energy(const ToeplitzProduct& op, const std::vector<double>& row_sums, double t0,
                                 const double* x) {
  const std::size_t N = op.size();
  std::vector<double> y(N);
  op.apply(x, y.data());
  double diag = 0.0, cross = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    diag += x[i] * x[i] * (row_sums[i] - t0);
    cross += x[i] * (y[i] - t0 * x[i]);
  }
  return 2.0 * (diag - cross);
}

}  // namespace fpc
