#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fpc/assembly.hpp"

namespace fpc {

enum class SolveMethod { Auto, Linear, Descent };

struct StepRule {
  double initial_step = 1.0;  // first trial step, as a fraction of 0.1 * |u|
  double shrink = 0.5;
  double sufficient_decrease = 1e-4;
};

struct SolverConfig {
  int max_iterations = 20000;
  double tolerance = 1e-11;  // relative Rayleigh stall per accepted step
  int restarts = 1;
  std::uint64_t rng_seed = 7;
  StepRule step_rule;
  SolveMethod method = SolveMethod::Auto;
  bool boundary_layer = true;  // Regional kind: pin the outermost cell layer to zero
  bool use_symmetry = true;    // solve on mirror-symmetric functions
  std::size_t dense_limit = 2048;  // p = 2: dense solve up to this many free (folded) unknowns
  // p >= 2: converged needs residual <= residual_tolerance. For p < 2 the gradient is only
  // (p-1)-Hoelder in u, so the same accuracy in u shows as tolerance^{max(p-1, 1/2)}.
  double residual_tolerance = 1e-4;
  int history = 8;                        // quasi-Newton memory
  bool precondition = true;               // descent: p = 2 operator as initial inverse Hessian
  std::size_t coarse_start_nodes = 2048;  // warm start from a coarser grid above this many unknowns; 0 = off

  void validate() const;
};

struct EigenResult {
  double lambda = 0.0;
  GridFunction eigenfunction;  // nonnegative, lp_norm_p = 1
  double residual = 0.0;       // relative, |grad E - p lambda M |u|^{p-2}u| / |p lambda M |u|^{p-2}u|
  int iterations = 0;
  double restart_spread = 0.0;
  bool converged = false;
  std::string method;
  std::vector<double> history;  // accepted Rayleigh values of the best restart (descent)
};

double residual_threshold(const SolverConfig& cfg, double p);

EigenResult solve(const NonlocalOperator& op, const SolverConfig& cfg, const GridFunction* initial = nullptr);

// Relative weak-form residual of (lambda, u) on the operator's free nodes.
double eigen_residual(const NonlocalOperator& op, const GridFunction& u, double lambda, bool boundary_layer);

struct SeparableBound {
  double product = 0.0;   // (P^{1/p} + [v]/ell^s)^p
  double expanded = 0.0;  // P + C1/ell^s + C2/ell^{sp}
  double c1 = 0.0;
  double c2 = 0.0;
};

// Upper bound for the cylinder constant from the cross-section constant `cross_lambda`
// and the seminorm [v] of a unit-norm cutoff in the free directions.
SeparableBound separable_upper_bound(double ell, double cross_lambda, double cutoff_seminorm, bool cutoff_norm_is_one,
                                     double s, double p);

struct CutoffSeminorm {
  double value = 0.0;  // [v]_{s,p,R^m}, with v normalised to unit L^p norm
  double h = 0.0;      // grid spacing used
};

// [v] for v(x) = prod cos(pi x_k / 2) on (-1,1)^m, zero outside, measured with the
// Dirichlet energy on a grid over (-3,3)^m. Cached per (m, s, p, h).
CutoffSeminorm cutoff_seminorm(int m, double s, double p, double h);

struct EigenCheck {
  bool nonnegative = false;
  bool interior_positive = false;
  double weak_residual = 0.0;
  bool weak_form = false;
  bool simple = false;
  bool pass() const { return nonnegative && interior_positive && weak_form && simple; }
};

EigenCheck check_first_eigen_properties(const EigenResult& result, const NonlocalOperator& op,
                                        double weak_tolerance = 1e-6, double simplicity_tolerance = 1e-6,
                                        bool boundary_layer = true);

}  // namespace fpc
