#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fpc/assembly.hpp"
#include "fpc/eigensolver.hpp"

namespace fpc {

// Every tolerance used by the experiments, in one place. Reports echo the ones they use.
struct Tolerances {
  double dilation_rel = 1e-8;
  double monotone_slack = 1e-6;
  double sandwich_slack = 1e-6;
  double cylinder_limit_rel = 0.05;
  double linear_vs_descent_rel = 1e-5;
  double strip_decay_ratio = 0.9;     // sp <= 1: successive lambda(h/2)/lambda(h)
  double strip_overall_ratio = 0.5;   // sp <= 1: lambda(h_last)/lambda(h_first)
  double strip_cauchy_rel = 0.05;     // sp > 1: successive relative change
  double picone_min = -1e-12;
  double picone_proportional = 1e-12;
  double identity_c_theta = 1e-10;
  double identity_reduction = 1e-5;
  double identity_cos = 1e-6;
  double identity_prefactor = 1e-10;
  double directional_gap = 1e-2;     // |lhs - rhs| / lhs at the base node counts
  double directional_halving = 0.5;  // gap(2x nodes) / gap(base)
  double eigen_weak_form = 1e-6;
  double eigen_simplicity = 1e-6;
  double cutoff_h_1d = 1.0 / 128.0;  // grid for [v] when m = 1
  double cutoff_h_2d = 1.0 / 32.0;   // and m = 2
};

const Tolerances& default_tolerances();
std::vector<std::pair<std::string, double>> tolerance_table(const Tolerances& tol);

struct ExperimentSetup {
  SolverConfig solver;
  AssemblyConfig assembly;
  Tolerances tol;
};

struct BoundCheck {
  std::string description;
  double lhs = 0.0;
  std::string relation;  // "<=", ">=", "=="
  double rhs = 0.0;
  bool pass = false;
};

struct Fit {
  std::string model;
  std::vector<double> coefficients;
  double residual = 0.0;
};

struct ExperimentReport {
  std::string experiment_id;
  std::vector<std::pair<std::string, std::string>> parameters;
  std::vector<std::pair<std::string, double>> measurements;
  std::vector<BoundCheck> bounds_checked;
  std::optional<Fit> fit;
  std::vector<std::string> notes;
  bool pass = true;
  bool converged = true;  // every solve behind the report converged
  double wall_time = 0.0;

  void param(const std::string& key, const std::string& value);
  void param(const std::string& key, double value);
  void measure(const std::string& name, double value);
  // relation is "<=" or ">="
  bool check(const std::string& description, double lhs, const std::string& relation, double rhs);
  void merge(const ExperimentReport& other, const std::string& prefix);
};

// Solve with a process-wide memo keyed by (domain, s, p, kind, h, solver/assembly settings).
std::shared_ptr<const EigenResult> solve_cached(const DomainSpec& domain, double s, double p, SeminormKind kind,
                                                double h, const ExperimentSetup& setup);
void clear_solve_cache();

ExperimentReport run_dilation(const DomainSpec& domain, double t, double s, double p, double h,
                              const ExperimentSetup& setup = {});

ExperimentReport run_monotonicity(const std::vector<double>& ell_list, const std::vector<Interval>& omega1,
                                  const std::vector<Interval>& omega, double s, double p, double h,
                                  const ExperimentSetup& setup = {});

ExperimentReport run_sandwich(const std::vector<double>& ell_list, const std::vector<Interval>& omega1,
                              const std::vector<Interval>& omega, double s, double p, double h,
                              const ExperimentSetup& setup = {});

ExperimentReport run_cylinder_limit(const std::vector<double>& ell_list, const std::vector<Interval>& omega1,
                                    const std::vector<Interval>& omega, double s, double p, double h,
                                    const ExperimentSetup& setup = {});

// 1D regional trend on (-1,1) over h_list (coarse to fine), plus strip solves of
// (-1,1) x (-w,w) for each width at strip_h and the angle certificate when sp > 1.
ExperimentReport run_regional_strip(double s, double p, const std::vector<double>& h_list,
                                    const std::vector<double>& widths, double strip_h,
                                    const ExperimentSetup& setup = {});

enum class CertificateFunction { Bump, Constant };

// energy(u)/lp_norm_p(u) >= P1 of (-1,1) for a fixed u on a regional strip grid.
// p1_1d < 0 solves the 1D constant at the grid's spacing along axis 0.
ExperimentReport run_angle_certificate(std::shared_ptr<const Grid> strip_grid, double s, double p,
                                       const ExperimentSetup& setup = {}, double p1_1d = -1.0,
                                       CertificateFunction fn = CertificateFunction::Bump);

// Both sides of the directional decomposition for u = prod cos(pi (x_k - c_k) / L_k) on a
// box (n <= 2), at (angular, line) nodes and at twice both counts.
ExperimentReport run_directional(const DomainSpec& domain, double s, double p, double h, int angular_nodes,
                                 int line_nodes, const ExperimentSetup& setup = {});

// Sign, interior positivity, weak form and simplicity of the first eigenpair.
ExperimentReport run_eigen_properties(const DomainSpec& domain, double s, double p, SeminormKind kind, double h,
                                      const ExperimentSetup& setup = {});

// L(f,g)(x,y) = |f(x)-f(y)|^p - |g(x)-g(y)|^{p-2}(g(x)-g(y)) (f(x)^p/g(x)^{p-1} - f(y)^p/g(y)^{p-1})
double picone_l(double fx, double fy, double gx, double gy, double p);

ExperimentReport run_picone(int trials, int grid_size, double p, std::uint64_t seed,
                            const ExperimentSetup& setup = {});

struct IdentityGrid {
  int n_max = 6;
  std::vector<double> s_list{0.1, 0.25, 0.5, 0.75, 0.9};
  std::vector<double> p_list{1.0, 1.5, 2.0, 3.0, 5.0};
  std::vector<double> a_list{0.5, 1.0, 3.0};
  std::vector<int> m_list{1, 2};
  // the quadrature checks run on this smaller (s, p) subset
  std::vector<double> quad_s_list{0.25, 0.5, 0.75};
  std::vector<double> quad_p_list{1.5, 2.0, 3.0};
};

// Integral over R^m of (1 + |x - z|^2/a^2)^{-(n+sp)/2} by truncated adaptive quadrature
// (radius R) plus the binomial-series tail; z has m entries.
double reduction_integral(int m, int n, double s, double p, double a, const std::vector<double>& z,
                          double radius = 1e4);
// Closed-form-free evaluation of the cos-power integral as a product of 1D quadratures.
double cos_power_quadrature(int n, double s, double p);

ExperimentReport run_identities(const IdentityGrid& grid = {}, const ExperimentSetup& setup = {});

// Runs jobs on at most `workers` threads; results keep the job order. The first
// exception thrown by a job is rethrown after every job has finished.
std::vector<ExperimentReport> run_jobs(const std::vector<std::function<ExperimentReport()>>& jobs, int workers);

// Least squares for columns X (row-major, rows x cols); returns coefficients and RMS residual.
std::pair<std::vector<double>, double> least_squares(const std::vector<double>& X, const std::vector<double>& y,
                                                     int cols);

}  // namespace fpc
