#include "fpc/pair_kernels.hpp"

#include <omp.h>

#include <cmath>
#include <cstdlib>

#include "fpc/errors.hpp"

namespace fpc {

namespace {

constexpr int kMaxDim = 6;

std::size_t mirror(std::size_t i, std::size_t n) { return n - 1 - i; }

}  // namespace

PairLayout PairLayout::whole(const std::vector<std::size_t>& counts) {
  PairLayout l;
  l.full = counts;
  l.reps = counts;
  l.folded.assign(counts.size(), false);
  return l;
}

PairLayout PairLayout::mirrored(const std::vector<std::size_t>& counts) {
  PairLayout l;
  l.full = counts;
  for (auto c : counts) l.reps.push_back((c + 1) / 2);
  l.folded.assign(counts.size(), true);
  return l;
}

std::size_t PairLayout::size() const {
  std::size_t s = 1;
  for (auto r : reps) s *= r;
  return s;
}

std::size_t PairLayout::table_size() const {
  std::size_t s = 1;
  for (auto r : full) s *= r;
  return s;
}

double PairLayout::multiplicity(std::size_t flat) const {
  double m = 1.0;
  for (int k = dim() - 1; k >= 0; --k) {
    const std::size_t i = flat % reps[k];
    flat /= reps[k];
    if (folded[k] && mirror(i, full[k]) != i) m *= 2.0;
  }
  return m;
}

std::size_t PairLayout::rep_to_full(std::size_t flat) const {
  std::size_t idx[kMaxDim];
  for (int k = dim() - 1; k >= 0; --k) {
    idx[k] = flat % reps[k];
    flat /= reps[k];
  }
  std::size_t out = 0;
  for (int k = 0; k < dim(); ++k) out = out * full[k] + idx[k];
  return out;
}

std::size_t PairLayout::full_to_rep(std::size_t flat) const {
  std::size_t idx[kMaxDim];
  for (int k = dim() - 1; k >= 0; --k) {
    idx[k] = flat % full[k];
    flat /= full[k];
  }
  std::size_t out = 0;
  for (int k = 0; k < dim(); ++k) {
    std::size_t i = idx[k];
    if (folded[k] && i >= reps[k]) i = mirror(i, full[k]);
    out = out * reps[k] + i;
  }
  return out;
}

namespace {

// Offsets along one axis from rep index a to every member of the orbit of rep index b.
int axis_offsets(const PairLayout& l, int k, std::size_t a, std::size_t b, std::size_t out[2]) {
  out[0] = a > b ? a - b : b - a;
  if (l.folded[k]) {
    const std::size_t mb = mirror(b, l.full[k]);
    if (mb != b) {
      out[1] = mb - a;
      return 2;
    }
  }
  return 1;
}

struct Rows {
  std::size_t base[1 << (kMaxDim - 1)];
  int count = 0;
};

class RowBuilder {
 public:
  RowBuilder(const PairLayout& l, const double* table) : l_(l), t_(table), n_(l.dim()) {
    stride_.assign(n_, 1);
    for (int k = n_ - 2; k >= 0; --k) stride_[k] = stride_[k + 1] * l.full[k + 1];
  }

  // Table row bases for all leading-axis offset combinations between a and b.
  void rows(const std::size_t* ai, const std::size_t* bl, Rows& r) const {
    r.count = 1;
    r.base[0] = 0;
    for (int k = 0; k < n_ - 1; ++k) {
      std::size_t off[2];
      const int c = axis_offsets(l_, k, ai[k], bl[k], off);
      if (c == 2) {
        for (int q = 0; q < r.count; ++q) r.base[r.count + q] = r.base[q] + off[1] * stride_[k];
      }
      for (int q = 0; q < r.count; ++q) r.base[q] += off[0] * stride_[k];
      r.count *= c;
    }
  }

  // R[b] for b in [start, rL): summed table weight between rep a and the orbit of b,
  // restricted to the leading combination rows.
  void fill(const Rows& r, std::size_t aL, std::size_t start, double* R) const {
    const int L = n_ - 1;
    const std::size_t nL = l_.full[L], rL = l_.reps[L];
    const bool fold = l_.folded[L];
    for (std::size_t b = start; b < rL; ++b) R[b] = 0.0;
    for (int q = 0; q < r.count; ++q) {
      const double* row = t_ + r.base[q];
      std::size_t b = start;
      for (; b < aL && b < rL; ++b) R[b] += row[aL - b];
      for (; b < rL; ++b) R[b] += row[b - aL];
      if (fold) {
        const std::size_t top = (nL % 2 == 1) ? rL - 1 : rL;  // exclude the self-mirrored centre
        for (std::size_t bb = start; bb < top; ++bb) R[bb] += row[nL - 1 - bb - aL];
      }
    }
  }

 private:
  const PairLayout& l_;
  const double* t_;
  int n_;
  std::vector<std::size_t> stride_;
};

enum class Mode { Generic, P1, P15, P2, P3 };

Mode pick_mode(double p) {
  if (p == 2.0) return Mode::P2;
  if (p == 3.0) return Mode::P3;
  if (p == 1.5) return Mode::P15;
  if (p == 1.0) return Mode::P1;
  return Mode::Generic;
}

// |d|^p, with phi = |d|^{p-2} d
template <Mode M>
inline double powp(double d, double p, double& phi) {
  if constexpr (M == Mode::P2) {
    phi = d;
    return d * d;
  } else if constexpr (M == Mode::P3) {
    const double ad = std::abs(d);
    phi = ad * d;
    return ad * ad * ad;
  } else if constexpr (M == Mode::P15) {
    const double ad = std::abs(d);
    const double sq = std::sqrt(ad);
    phi = std::copysign(sq, d);
    return ad * sq;
  } else if constexpr (M == Mode::P1) {
    phi = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
    return std::abs(d);
  } else {
    const double ad = std::abs(d);
    const double t = ad > 0.0 ? std::pow(ad, p - 1.0) : 0.0;
    phi = std::copysign(t, d);
    return ad * t;
  }
}

template <Mode M, bool Grad>
double kernel(const PairLayout& l, const double* table, const double* u, double p, double* grad) {
  const int n = l.dim();
  const int L = n - 1;
  const std::size_t N = l.size();
  const std::size_t rL = l.reps[L];
  const std::size_t lead_count = N / rL;
  const RowBuilder rb(l, table);
  const double two_p = 2.0 * p;

  const int nt = omp_get_max_threads();
  std::vector<double> partial(nt, 0.0);
  std::vector<std::vector<double>> gbuf(Grad ? nt : 0);

#pragma omp parallel num_threads(nt)
  {
    const int tid = omp_get_thread_num();
    double e = 0.0;
    double* g = nullptr;
    if constexpr (Grad) {
      gbuf[tid].assign(N, 0.0);
      g = gbuf[tid].data();
    }
    std::vector<double> R(rL);
    std::size_t ai[kMaxDim], bl[kMaxDim];
    Rows rows;

#pragma omp for schedule(static, 1)
    for (std::size_t a = 0; a < N; ++a) {
      std::size_t rest = a;
      for (int k = L; k >= 0; --k) {
        ai[k] = rest % l.reps[k];
        rest /= l.reps[k];
      }
      const double ma = l.multiplicity(a);
      const double ua = u[a];
      double ga = 0.0;
      const std::size_t alead = a / rL;
      for (int k = 0; k < L; ++k) bl[k] = ai[k];
      for (std::size_t lf = alead; lf < lead_count; ++lf) {
        if (lf != alead) {
          // advance the leading multi-index
          for (int k = L - 1; k >= 0; --k) {
            if (++bl[k] < l.reps[k]) break;
            bl[k] = 0;
          }
        }
        const std::size_t start = (lf == alead) ? ai[L] + 1 : 0;
        if (start >= rL) continue;
        rb.rows(ai, bl, rows);
        rb.fill(rows, ai[L], start, R.data());
        const double* ub = u + lf * rL;
        double* gb = Grad ? g + lf * rL : nullptr;
        double el = 0.0;
#pragma omp simd reduction(+ : el, ga)
        for (std::size_t b = start; b < rL; ++b) {
          const double F = ma * R[b];
          double phi;
          const double v = powp<M>(ua - ub[b], p, phi);
          el += F * v;
          if constexpr (Grad) {
            const double t = two_p * F * phi;
            ga += t;
            gb[b] -= t;
          }
        }
        e += el;
      }
      if constexpr (Grad) g[a] += ga;
    }
    partial[tid] = e;
  }

  double energy = 0.0;
  for (int t = 0; t < nt; ++t) energy += partial[t];
  if constexpr (Grad) {
    for (std::size_t i = 0; i < N; ++i) {
      double s = 0.0;
      for (int t = 0; t < nt; ++t) s += gbuf[t][i];
      grad[i] = s;
    }
  }
  return 2.0 * energy;
}

template <Mode M>
double dispatch_grad(const PairLayout& l, const double* table, const double* u, double p, double* grad) {
  return grad ? kernel<M, true>(l, table, u, p, grad) : kernel<M, false>(l, table, u, p, nullptr);
}

}  // namespace

double pair_energy(const PairLayout& layout, const double* table, const double* u, double p, double* grad) {
  if (layout.dim() < 1 || layout.dim() > kMaxDim) throw UnsupportedError("pair kernel dimension out of range");
  switch (pick_mode(p)) {
    case Mode::P2: return dispatch_grad<Mode::P2>(layout, table, u, p, grad);
    case Mode::P3: return dispatch_grad<Mode::P3>(layout, table, u, p, grad);
    case Mode::P15: return dispatch_grad<Mode::P15>(layout, table, u, p, grad);
    case Mode::P1: return dispatch_grad<Mode::P1>(layout, table, u, p, grad);
    default: return dispatch_grad<Mode::Generic>(layout, table, u, p, grad);
  }
}

double folded_weight(const PairLayout& l, const double* table, std::size_t a, std::size_t b) {
  const int n = l.dim();
  std::size_t ai[kMaxDim], bi[kMaxDim];
  for (int k = n - 1; k >= 0; --k) {
    ai[k] = a % l.reps[k];
    a /= l.reps[k];
    bi[k] = b % l.reps[k];
    b /= l.reps[k];
  }
  // enumerate orbit(a) x orbit(b) explicitly
  double total = 0.0;
  std::size_t ia[kMaxDim], jb[kMaxDim];
  const int combos = 1 << (2 * n);
  for (int c = 0; c < combos; ++c) {
    bool ok = true;
    for (int k = 0; k < n && ok; ++k) {
      const bool fa = (c >> (2 * k)) & 1, fb = (c >> (2 * k + 1)) & 1;
      if ((fa || fb) && !l.folded[k]) ok = false;
      ia[k] = fa ? mirror(ai[k], l.full[k]) : ai[k];
      jb[k] = fb ? mirror(bi[k], l.full[k]) : bi[k];
      if (fa && ia[k] == ai[k]) ok = false;  // orbit of size one
      if (fb && jb[k] == bi[k]) ok = false;
    }
    if (!ok) continue;
    std::size_t idx = 0;
    for (int k = 0; k < n; ++k) {
      const std::size_t d = ia[k] > jb[k] ? ia[k] - jb[k] : jb[k] - ia[k];
      idx = idx * l.full[k] + d;
    }
    total += table[idx];
  }
  return total;
}

double pair_energy_reference(const PairLayout& layout, const double* table, const double* u, double p,
                             double* grad) {
  const std::size_t N = layout.size();
  if (grad)
    for (std::size_t i = 0; i < N; ++i) grad[i] = 0.0;
  double e = 0.0;
  for (std::size_t a = 0; a < N; ++a) {
    for (std::size_t b = 0; b < N; ++b) {
      if (a == b) continue;
      const double F = folded_weight(layout, table, a, b);
      const double d = u[a] - u[b];
      const double ad = std::abs(d);
      e += F * std::pow(ad, p);
      if (grad && ad > 0.0) grad[a] += 2.0 * p * F * std::pow(ad, p - 2.0) * d;
    }
  }
  return e;
}

std::vector<double> pair_matrix(const PairLayout& l, const double* table) {
  const int n = l.dim();
  const int L = n - 1;
  const std::size_t N = l.size();
  const std::size_t rL = l.reps[L];
  const std::size_t lead_count = N / rL;
  const RowBuilder rb(l, table);
  std::vector<double> A(N * N, 0.0);

#pragma omp parallel
  {
    std::vector<double> R(rL);
    std::size_t ai[kMaxDim], bl[kMaxDim];
    Rows rows;
#pragma omp for schedule(static, 1)
    for (std::size_t a = 0; a < N; ++a) {
      std::size_t rest = a;
      for (int k = L; k >= 0; --k) {
        ai[k] = rest % l.reps[k];
        rest /= l.reps[k];
      }
      const double ma = l.multiplicity(a);
      double* Arow = A.data() + a * N;
      for (std::size_t lf = 0; lf < lead_count; ++lf) {
        std::size_t r2 = lf;
        for (int k = L - 1; k >= 0; --k) {
          bl[k] = r2 % l.reps[k];
          r2 /= l.reps[k];
        }
        rb.rows(ai, bl, rows);
        rb.fill(rows, ai[L], 0, R.data());
        for (std::size_t b = 0; b < rL; ++b) Arow[lf * rL + b] = -2.0 * ma * R[b];
      }
      double diag = 0.0;
      Arow[a] = 0.0;
      for (std::size_t b = 0; b < N; ++b) diag -= Arow[b];
      Arow[a] = diag;
    }
  }
  return A;
}

}  // namespace fpc
