#pragma once

#include <optional>
#include <span>

namespace fpc {

struct FracParams {
  int n = 1;
  std::optional<int> m;
  double s = 0.5;
  double p = 2.0;

  // Throws DomainError when an invariant is violated.
  void validate() const;
};

double gamma(double x);
double beta(double x, double y);

// Hausdorff measure of the unit sphere S^{k-1} in R^k.
double sphere_area(int k);

// Normalizing constant C_{n,s,p} of the Gagliardo seminorm.
double c_flap(const FracParams& params);
double c_flap(int n, double s, double p);

// Theta_{m,n,p} = pi^{m/2} Gamma((n-m+sp)/2) / Gamma((n+sp)/2). Requires params.m.
double theta(const FracParams& params);
double theta(int m, int n, double s, double p);

// Hyperspherical surface element g_{n-1}; sigma has n-1 angles.
double surface_element(std::span<const double> sigma);

// Integral of |cos sigma_1|^{sp} g_{n-1} over the angle box, in closed form.
double cos_power_integral(int n, double s, double p);

// (C_{n,s,p} / (2 C_{1,s,p})) * cos_power_integral(n,s,p); equals 1 in exact arithmetic.
double angle_prefactor(int n, double s, double p);

// Mass of the regularized kernel (|r|^2 + eps^2)^{-(n+sp)/2} over R^n.
double regularized_kernel_mass(int n, double sp, double eps);

}  // namespace fpc
