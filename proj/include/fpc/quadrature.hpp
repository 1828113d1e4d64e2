#pragma once

#include <functional>
#include <vector>

namespace fpc::quad {

struct Rule {
  std::vector<double> x;  // nodes on [-1, 1]
  std::vector<double> w;
};

// Gauss-Legendre rule with n points; cached, safe to call concurrently.
const Rule& gauss_legendre(int n);

struct Result {
  double value = 0.0;
  double error = 0.0;
  int evaluations = 0;
};

// Globally adaptive 7/15-point Gauss-Kronrod on [a, b].
Result gauss_kronrod(const std::function<double(double)>& f, double a, double b, double abs_tol,
                     double rel_tol, int max_intervals = 2000);

// Same, with the interval pre-split at the given breakpoints (those outside (a,b) are ignored).
Result gauss_kronrod(const std::function<double(double)>& f, double a, double b,
                     const std::vector<double>& breaks, double abs_tol, double rel_tol);

// Double-exponential rule on [a, b]; tolerates integrable endpoint singularities.
Result tanh_sinh(const std::function<double(double)>& f, double a, double b, double rel_tol);

}  // namespace fpc::quad
