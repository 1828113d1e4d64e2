#pragma once
// Reference computations for the tests. Nothing here calls into the library: gamma comes
// from libm, integrals from a local tanh-sinh rule, eigenvalues from cyclic Jacobi.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

namespace oracle {

inline double gamma(double x) { return std::tgamma(x); }
inline double beta(double x, double y) { return std::exp(std::lgamma(x) + std::lgamma(y) - std::lgamma(x + y)); }

// C_{n,s,p} straight from its formula, via lgamma
inline double c_flap(int n, double s, double p) {
  const double sp = s * p;
  const double logc = std::log(sp) + (2 * s - 1) * std::log(2.0) + std::lgamma((n + sp) / 2) - std::log(2.0) -
                      (n - 1) / 2.0 * std::log(std::numbers::pi) - std::lgamma(1 - s) - std::lgamma((p + 1) / 2);
  return std::exp(logc);
}

// tanh-sinh on (a, b); fine for integrable endpoint singularities
inline double tanh_sinh(const std::function<double(double)>& f, double a, double b, int levels = 9) {
  const double c = 0.5 * (a + b), r = 0.5 * (b - a);
  double step = 1.0, sum = 0.0;
  auto term = [&](double t) {
    const double u = 0.5 * std::numbers::pi * std::sinh(t);
    const double x = std::tanh(u);
    const double w = 0.5 * std::numbers::pi * std::cosh(t) / (std::cosh(u) * std::cosh(u));
    const double xp = c + r * x;
    if (!(xp > a && xp < b) || w < 1e-300) return 0.0;
    return w * f(xp);
  };
  // level 0
  for (int k = -40; k <= 40; ++k) sum += term(k * step);
  double est = sum * step;
  for (int l = 1; l <= levels; ++l) {
    step *= 0.5;
    for (int k = -(40 << l) + 1; k < (40 << l); k += 2) sum += term(k * step);
    est = sum * step;
  }
  return r * est;
}

// Composite tanh-sinh over [a, b] split at the given interior breakpoints.
inline double integrate(const std::function<double(double)>& f, double a, double b, std::vector<double> cuts = {}) {
  cuts.push_back(a);
  cuts.push_back(b);
  std::sort(cuts.begin(), cuts.end());
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
    if (cuts[i + 1] > cuts[i]) s += tanh_sinh(f, cuts[i], cuts[i + 1]);
  return s;
}

// Smallest eigenvalue of a symmetric matrix (row-major) by cyclic Jacobi.
inline double jacobi_min_eigenvalue(std::vector<double> a, int n) {
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0, diag = 0.0;
    for (int i = 0; i < n; ++i) {
      diag += a[i * n + i] * a[i * n + i];
      for (int j = i + 1; j < n; ++j) off += a[i * n + j] * a[i * n + j];
    }
    if (off <= 1e-30 * diag) break;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) {
        const double apq = a[p * n + q];
        if (std::abs(apq) < 1e-300) continue;
        const double theta = (a[q * n + q] - a[p * n + p]) / (2 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1));
        const double c = 1 / std::sqrt(t * t + 1), s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = a[k * n + p], akq = a[k * n + q];
          a[k * n + p] = c * akp - s * akq;
          a[k * n + q] = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = a[p * n + k], aqk = a[q * n + k];
          a[p * n + k] = c * apk - s * aqk;
          a[q * n + k] = s * apk + c * aqk;
        }
      }
  }
  double m = a[0];
  for (int i = 1; i < n; ++i) m = std::min(m, a[i * n + i]);
  return m;
}

// 1D exterior mass of (a, b) seen from x
inline double kappa_1d(double x, double a, double b, double sp) {
  return (std::pow(b - x, -sp) + std::pow(x - a, -sp)) / sp;
}

// integral of kappa_1d over [lo, hi] inside (a, b), sp < 1
inline double kappa_1d_cell(double lo, double hi, double a, double b, double sp) {
  auto prim = [&](double x) { return (std::pow(x - a, 1 - sp) - std::pow(b - x, 1 - sp)) / (sp * (1 - sp)); };
  return prim(hi) - prim(lo);
}

// integral over [0,h] x [d, d+h] of |x - y|^{-1-sp}, d >= h, sp < 1
inline double cell_pair_1d(double d, double h, double sp) {
  auto G = [&](double t) { return std::pow(std::abs(t), 1 - sp) / (-sp * (1 - sp)); };
  return G(d + h) + G(d - h) - 2 * G(d);
}

// 2D exterior mass of a box by rays: kappa(x) = (1/sp) * integral over the circle of rho^{-sp},
// rho the distance to the boundary along the ray.
inline double kappa_box_2d(double x, double y, double ax, double bx, double ay, double by, double sp) {
  auto rho = [&](double th) {
    const double c = std::cos(th), s = std::sin(th);
    double r = 1e300;
    if (c > 0) r = std::min(r, (bx - x) / c);
    if (c < 0) r = std::min(r, (ax - x) / c);
    if (s > 0) r = std::min(r, (by - y) / s);
    if (s < 0) r = std::min(r, (ay - y) / s);
    return r;
  };
  std::vector<double> cuts;
  for (auto [cx, cy] : {std::pair{bx, by}, {ax, by}, {ax, ay}, {bx, ay}}) {
    double t = std::atan2(cy - y, cx - x);
    if (t < 0) t += 2 * std::numbers::pi;
    cuts.push_back(t);
  }
  for (double t : {0.5 * std::numbers::pi, std::numbers::pi, 1.5 * std::numbers::pi}) cuts.push_back(t);
  return integrate([&](double th) { return std::pow(rho(th), -sp); }, 0.0, 2 * std::numbers::pi, cuts) / sp;
}

// Picone functional written out from its definition
inline double picone(double fx, double fy, double gx, double gy, double p) {
  const double dg = gx - gy;
  const double phi = dg == 0.0 ? 0.0 : std::pow(std::abs(dg), p - 2) * dg;
  return std::pow(std::abs(fx - fy), p) - phi * (std::pow(fx, p) / std::pow(gx, p - 1) - std::pow(fy, p) / std::pow(gy, p - 1));
}

}  // namespace oracle
