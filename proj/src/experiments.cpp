#include "fpc/experiments.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <map>
#include <mutex>
#include <numbers>
#include <random>
#include <thread>

#include "fpc/errors.hpp"
#include "fpc/quadrature.hpp"
#include "fpc/special_fn.hpp"

namespace fpc {

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string list(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + num(v[i]);
  return out;
}

std::string intervals(const std::vector<Interval>& f) {
  std::string out;
  for (std::size_t i = 0; i < f.size(); ++i) out += (i ? "x" : "") + ("(" + num(f[i].lo) + "," + num(f[i].hi) + ")");
  return out;
}

const char* kind_name(SeminormKind k) { return k == SeminormKind::Dirichlet ? "dirichlet" : "regional"; }

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

void validate_ells(const std::vector<double>& ells, const std::vector<Interval>& omega1) {
  if (ells.empty()) throw ConfigError("ell list is empty");
  for (std::size_t i = 0; i < ells.size(); ++i) {
    if (!(ells[i] > 0.0)) throw ConfigError("ell values must be positive");
    if (i && !(ells[i] > ells[i - 1])) throw ConfigError("ell list must be strictly increasing");
  }
  if (omega1.empty()) throw ConfigError("omega1 needs at least one factor");
  for (const auto& iv : omega1)
    if (!(iv.lo < 0.0 && 0.0 < iv.hi)) throw ConfigError("0 must lie inside omega1 so that the cylinders are nested");
}

void cylinder_params(ExperimentReport& r, const std::vector<double>& ells, const std::vector<Interval>& omega1,
                     const std::vector<Interval>& omega, double s, double p, double h) {
  r.param("ell_list", list(ells));
  r.param("omega1", intervals(omega1));
  r.param("omega", intervals(omega));
  r.param("s", s);
  r.param("p", p);
  r.param("h", h);
}

void echo_tolerances(ExperimentReport& r, const Tolerances& tol, std::initializer_list<const char*> keys) {
  const auto table = tolerance_table(tol);
  for (const char* k : keys)
    for (const auto& [name, v] : table)
      if (name == k) r.param(std::string("tol.") + name, v);
}

std::string at(const char* name, double v) { return std::string(name) + "@" + num(v); }

}  // namespace

const Tolerances& default_tolerances() {
  static const Tolerances t{};
  return t;
}

std::vector<std::pair<std::string, double>> tolerance_table(const Tolerances& t) {
  return {{"dilation_rel", t.dilation_rel},
          {"monotone_slack", t.monotone_slack},
          {"sandwich_slack", t.sandwich_slack},
          {"cylinder_limit_rel", t.cylinder_limit_rel},
          {"linear_vs_descent_rel", t.linear_vs_descent_rel},
          {"strip_decay_ratio", t.strip_decay_ratio},
          {"strip_overall_ratio", t.strip_overall_ratio},
          {"strip_cauchy_rel", t.strip_cauchy_rel},
          {"picone_min", t.picone_min},
          {"picone_proportional", t.picone_proportional},
          {"identity_c_theta", t.identity_c_theta},
          {"identity_reduction", t.identity_reduction},
          {"identity_cos", t.identity_cos},
          {"identity_prefactor", t.identity_prefactor},
          {"directional_gap", t.directional_gap},
          {"directional_halving", t.directional_halving},
          {"eigen_weak_form", t.eigen_weak_form},
          {"eigen_simplicity", t.eigen_simplicity},
          {"cutoff_h_1d", t.cutoff_h_1d},
          {"cutoff_h_2d", t.cutoff_h_2d}};
}

void ExperimentReport::param(const std::string& key, const std::string& value) { parameters.emplace_back(key, value); }
void ExperimentReport::param(const std::string& key, double value) { parameters.emplace_back(key, num(value)); }

void ExperimentReport::measure(const std::string& name, double value) {
  if (!std::isfinite(value)) throw std::runtime_error("non-finite measurement " + name);
  measurements.emplace_back(name, value);
}

bool ExperimentReport::check(const std::string& description, double lhs, const std::string& relation, double rhs) {
  bool ok;
  if (relation == "<=")
    ok = lhs <= rhs;
  else if (relation == ">=")
    ok = lhs >= rhs;
  else
    throw UsageError("unknown relation " + relation);
  bounds_checked.push_back({description, lhs, relation, rhs, ok});
  pass = pass && ok;
  return ok;
}

void ExperimentReport::merge(const ExperimentReport& o, const std::string& prefix) {
  for (const auto& [k, v] : o.measurements) measurements.emplace_back(prefix + k, v);
  for (auto b : o.bounds_checked) {
    b.description = prefix + b.description;
    bounds_checked.push_back(b);
  }
  for (const auto& n : o.notes) notes.push_back(prefix + n);
  pass = pass && o.pass;
  converged = converged && o.converged;
}

namespace {

std::mutex cache_mu;
std::map<std::string, std::shared_ptr<const EigenResult>>& cache_map() {
  static std::map<std::string, std::shared_ptr<const EigenResult>> m;
  return m;
}

std::string solve_key(const DomainSpec& d, double s, double p, SeminormKind kind, double h, const ExperimentSetup& e) {
  const auto& c = e.solver;
  const auto& a = e.assembly;
  std::string k = intervals(d.factors) + "|" + num(s) + "|" + num(p) + "|" + kind_name(kind) + "|" + num(h);
  k += "|" + std::to_string(c.max_iterations) + "," + num(c.tolerance) + "," + std::to_string(c.restarts) + "," +
       std::to_string(c.rng_seed) + "," + num(c.step_rule.initial_step) + "," + num(c.step_rule.shrink) + "," +
       num(c.step_rule.sufficient_decrease) + "," + std::to_string(static_cast<int>(c.method)) + "," +
       std::to_string(c.boundary_layer) + std::to_string(c.use_symmetry) + std::to_string(c.precondition) + "," +
       std::to_string(c.dense_limit) + "," + num(c.residual_tolerance) + "," + std::to_string(c.history) + "," +
       std::to_string(c.coarse_start_nodes);
  k += "|" + std::to_string(a.near_field_radius) + "," + std::to_string(a.subdivision_order) + "," +
       std::to_string(static_cast<int>(a.far_field_rule)) + "," + num(a.regularization) + "," +
       std::to_string(a.smooth_integrable) + "," +
       std::to_string(a.max_nodes);
  return k;
}

}  // namespace

std::shared_ptr<const EigenResult> solve_cached(const DomainSpec& domain, double s, double p, SeminormKind kind,
                                                double h, const ExperimentSetup& setup) {
  const std::string key = solve_key(domain, s, p, kind, h, setup);
  {
    std::lock_guard lock(cache_mu);
    auto it = cache_map().find(key);
    if (it != cache_map().end()) return it->second;
  }
  auto grid = std::make_shared<const Grid>(domain, h);
  const auto op = assemble(grid, s, p, kind, setup.assembly);
  auto res = std::make_shared<const EigenResult>(solve(op, setup.solver));
  std::lock_guard lock(cache_mu);
  return cache_map().emplace(key, res).first->second;
}

void clear_solve_cache() {
  std::lock_guard lock(cache_mu);
  cache_map().clear();
}

ExperimentReport run_dilation(const DomainSpec& domain, double t, double s, double p, double h,
                              const ExperimentSetup& setup) {
  if (!(t > 0.0)) throw ConfigError("dilation factor must be positive");
  Timer timer;
  ExperimentReport r;
  r.experiment_id = "dilation";
  r.param("domain", intervals(domain.factors));
  r.param("t", t);
  r.param("s", s);
  r.param("p", p);
  r.param("h", h);
  echo_tolerances(r, setup.tol, {"dilation_rel"});
  const DomainSpec scaled = dilate(domain, t);
  for (SeminormKind kind : {SeminormKind::Dirichlet, SeminormKind::Regional}) {
    const auto base = solve_cached(domain, s, p, kind, h, setup);
    const auto big = solve_cached(scaled, s, p, kind, t * h, setup);
    r.converged = r.converged && base->converged && big->converged;
    const double lhs = big->lambda * std::pow(t, s * p);
    const double denom = base->lambda != 0.0 ? std::abs(base->lambda) : 1.0;
    const double rel = std::abs(lhs - base->lambda) / denom;
    const std::string k = kind_name(kind);
    r.measure("lambda_" + k, base->lambda);
    r.measure("lambda_scaled_" + k, big->lambda);
    r.measure("lambda_scaled_times_t_sp_" + k, lhs);
    r.measure("rel_error_" + k, rel);
    r.check("relative error of lambda(t Omega, t h) t^sp against lambda(Omega, h), " + k, rel, "<=",
            setup.tol.dilation_rel);
  }
  r.wall_time = timer.seconds();
  return r;
}

ExperimentReport run_directional(const DomainSpec& domain, double s, double p, double h, int angular_nodes,
                                 int line_nodes, const ExperimentSetup& setup) {
  Timer timer;
  ExperimentReport r;
  r.experiment_id = "directional";
  r.param("domain", intervals(domain.factors));
  r.param("s", s);
  r.param("p", p);
  r.param("h", h);
  r.param("angular_nodes", std::to_string(angular_nodes));
  r.param("line_nodes", std::to_string(line_nodes));
  echo_tolerances(r, setup.tol, {"directional_gap", "directional_halving"});
  const auto grid = std::make_shared<const Grid>(domain, h);
  const GridFunction u = sample(grid, [&](std::span<const double> x) {
    double v = 1.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      const auto& iv = domain.factors[k];
      v *= std::cos(std::numbers::pi * (x[k] - 0.5 * (iv.lo + iv.hi)) / iv.length());
    }
    return v;
  });
  double gaps[2];
  for (int level = 0; level < 2; ++level) {
    const int a = angular_nodes << level, l = line_nodes << level;
    const auto split = directional_decomposition(u, s, p, a, l);
    gaps[level] = std::abs(split.lhs - split.rhs) / split.lhs;
    const std::string tag = "@" + std::to_string(a) + "x" + std::to_string(l);
    r.measure("lhs" + tag, split.lhs);
    r.measure("rhs" + tag, split.rhs);
    r.measure("gap" + tag, gaps[level]);
  }
  r.check("|lhs - rhs| / lhs at the base node counts", gaps[0], "<=", setup.tol.directional_gap);
  r.check("gap at doubled node counts / gap at base", gaps[1] / gaps[0], "<=", setup.tol.directional_halving);
  r.wall_time = timer.seconds();
  return r;
}

ExperimentReport run_eigen_properties(const DomainSpec& domain, double s, double p, SeminormKind kind, double h,
                                      const ExperimentSetup& setup) {
  Timer timer;
  ExperimentReport r;
  r.experiment_id = "eigen_properties";
  r.param("domain", intervals(domain.factors));
  r.param("s", s);
  r.param("p", p);
  r.param("kind", kind_name(kind));
  r.param("h", h);
  echo_tolerances(r, setup.tol, {"eigen_weak_form", "eigen_simplicity"});
  const auto grid = std::make_shared<const Grid>(domain, h);
  const auto op = assemble(grid, s, p, kind, setup.assembly);
  const auto res = solve_cached(domain, s, p, kind, h, setup);
  r.converged = res->converged;
  const auto c = check_first_eigen_properties(*res, op, setup.tol.eigen_weak_form, setup.tol.eigen_simplicity,
                                              setup.solver.boundary_layer);
  r.measure("lambda", res->lambda);
  r.measure("weak_residual", c.weak_residual);
  r.measure("restart_spread", res->restart_spread);
  r.check("eigenfunction >= 0 (1 = yes)", c.nonnegative ? 1.0 : 0.0, ">=", 1.0);
  r.check("interior minimum > 0 (1 = yes)", c.interior_positive ? 1.0 : 0.0, ">=", 1.0);
  r.check("weak-form residual", c.weak_residual, "<=", setup.tol.eigen_weak_form);
  r.check("restart spread", res->restart_spread, "<=", setup.tol.eigen_simplicity);
  r.wall_time = timer.seconds();
  return r;
}

ExperimentReport run_monotonicity(const std::vector<double>& ells, const std::vector<Interval>& omega1,
                                  const std::vector<Interval>& omega, double s, double p, double h,
                                  const ExperimentSetup& setup) {
  validate_ells(ells, omega1);
  Timer timer;
  ExperimentReport r;
  r.experiment_id = "monotonicity";
  cylinder_params(r, ells, omega1, omega, s, p, h);
  echo_tolerances(r, setup.tol, {"monotone_slack", "sandwich_slack"});
  const auto cross = solve_cached(DomainSpec::box(omega), s, p, SeminormKind::Dirichlet, h, setup);
  r.converged = cross->converged;
  r.measure("lambda_cross_section", cross->lambda);
  std::vector<double> lam;
  for (double ell : ells) {
    const auto res = solve_cached(cylinder(ell, omega1, omega), s, p, SeminormKind::Dirichlet, h, setup);
    r.converged = r.converged && res->converged;
    lam.push_back(res->lambda);
    r.measure(at("lambda", ell), res->lambda);
  }
  for (std::size_t i = 0; i + 1 < ells.size(); ++i)
    r.check("lambda(ell=" + num(ells[i]) + ") >= lambda(ell=" + num(ells[i + 1]) + ") - slack", lam[i], ">=",
            lam[i + 1] - setup.tol.monotone_slack);
  for (std::size_t i = 0; i < ells.size(); ++i)
    r.check("lambda(ell=" + num(ells[i]) + ") >= cross-section lambda - slack", lam[i], ">=",
            cross->lambda - setup.tol.sandwich_slack);
  r.wall_time = timer.seconds();
  return r;
}

std::pair<std::vector<double>, double> least_squares(const std::vector<double>& X, const std::vector<double>& y,
                                                     int cols) {
  const int rows = static_cast<int>(y.size());
  if (rows < cols) throw ConfigError("least squares: fewer data points than coefficients");
  Eigen::MatrixXd A(rows, cols);
  Eigen::VectorXd b(rows);
  for (int i = 0; i < rows; ++i) {
    b(i) = y[i];
    for (int j = 0; j < cols; ++j) A(i, j) = X[i * cols + j];
  }
  const Eigen::VectorXd c = A.colPivHouseholderQr().solve(b);
  const double rms = std::sqrt((A * c - b).squaredNorm() / rows);
  return {std::vector<double>(c.data(), c.data() + cols), rms};
}

ExperimentReport run_sandwich(const std::vector<double>& ells, const std::vector<Interval>& omega1,
                              const std::vector<Interval>& omega, double s, double p, double h,
                              const ExperimentSetup& setup) {
  validate_ells(ells, omega1);
  const int m = static_cast<int>(omega1.size());
  if (m > 2) throw UnsupportedError("sandwich: at most two free directions");
  Timer timer;
  ExperimentReport r;
  r.experiment_id = "sandwich";
  cylinder_params(r, ells, omega1, omega, s, p, h);
  echo_tolerances(r, setup.tol, {"sandwich_slack", m == 1 ? "cutoff_h_1d" : "cutoff_h_2d"});
  for (const auto& iv : omega1)
    if (!(iv.lo <= -1.0 && iv.hi >= 1.0))
      throw ConfigError("sandwich: the cutoff lives on (-1,1)^m, so omega1 must contain it");
  const auto cross = solve_cached(DomainSpec::box(omega), s, p, SeminormKind::Dirichlet, h, setup);
  r.converged = cross->converged;
  const double P = cross->lambda;
  r.measure("lambda_cross_section", P);
  const auto cut = cutoff_seminorm(m, s, p, m == 1 ? setup.tol.cutoff_h_1d : setup.tol.cutoff_h_2d);
  r.measure("cutoff_seminorm", cut.value);
  r.measure("cutoff_grid_h", cut.h);
  std::vector<double> gaps;
  for (double ell : ells) {
    const auto res = solve_cached(cylinder(ell, omega1, omega), s, p, SeminormKind::Dirichlet, h, setup);
    r.converged = r.converged && res->converged;
    const auto b = separable_upper_bound(ell, P, cut.value, true, s, p);
    r.measure(at("lambda", ell), res->lambda);
    r.measure(at("bound_product", ell), b.product);
    r.measure(at("bound_expanded", ell), b.expanded);
    if (gaps.empty()) {
      r.measure("C1", b.c1);
      r.measure("C2", b.c2);
    }
    r.check("lambda(ell=" + num(ell) + ") >= cross-section lambda - slack", res->lambda, ">=",
            P - setup.tol.sandwich_slack);
    r.check("lambda(ell=" + num(ell) + ") <= P + C1/ell^s + C2/ell^sp + slack", res->lambda, "<=",
            b.expanded + setup.tol.sandwich_slack);
    gaps.push_back(res->lambda - P);
  }
  // gap model a ell^-s + b ell^-sp
  const bool two = std::abs(s * p - s) > 1e-12;
  const int cols = two ? 2 : 1;
  if (static_cast<int>(ells.size()) >= cols) {
    std::vector<double> X;
    for (double ell : ells) {
      X.push_back(std::pow(ell, -s));
      if (two) X.push_back(std::pow(ell, -s * p));
    }
    const auto [c, rms] = least_squares(X, gaps, cols);
    r.fit = Fit{two ? "gap = a ell^-s + b ell^-sp" : "gap = a ell^-s", c, rms};
  }
  if (ells.size() >= 2) {
    const std::size_t k = ells.size() - 1;
    if (gaps[k] > 0.0 && gaps[k - 1] > 0.0) {
      const double slope = std::log(gaps[k - 1] / gaps[k]) / std::log(ells[k] / ells[k - 1]);
      r.measure("decay_exponent", slope);
      r.measure("decay_exponent_over_s", slope / s);
      if (std::abs(slope / s - 1.0) > 0.15)
        r.notes.push_back("two-point decay exponent " + num(slope) + " is not within 15% of s");
    } else {
      r.notes.push_back("gap not positive at the two largest ell; no decay exponent");
    }
  }
  r.wall_time = timer.seconds();
  return r;
}

ExperimentReport run_cylinder_limit(const std::vector<double>& ells, const std::vector<Interval>& omega1,
                                    const std::vector<Interval>& omega, double s, double p, double h,
                                    const ExperimentSetup& setup) {
  validate_ells(ells, omega1);
  if (ells.size() < 3) throw ConfigError("cylinder limit needs at least 3 ell values");
  Timer timer;
  ExperimentReport r;
  r.experiment_id = "cylinder_limit";
  cylinder_params(r, ells, omega1, omega, s, p, h);
  echo_tolerances(r, setup.tol, {"cylinder_limit_rel", "linear_vs_descent_rel"});
  const auto cross = solve_cached(DomainSpec::box(omega), s, p, SeminormKind::Dirichlet, h, setup);
  r.converged = cross->converged;
  r.measure("lambda_cross_section", cross->lambda);
  const int m = static_cast<int>(omega1.size());
  const bool two = std::abs(s * p - s) > 1e-12;
  const int cols = two ? 3 : 2;
  std::vector<double> X, y;
  for (double ell : ells) {
    const auto res = solve_cached(cylinder(ell, omega1, omega), s, p, SeminormKind::Dirichlet, h, setup);
    r.converged = r.converged && res->converged;
    r.measure(at("lambda", ell), res->lambda);
    X.push_back(1.0);
    X.push_back(std::pow(ell, -s));
    if (two) X.push_back(std::pow(ell, -s * p));
    y.push_back(res->lambda);
    // share of L^p mass in the outer half of the free directions
    const auto& u = res->eigenfunction;
    const Grid& g = *u.grid;
    double outer = 0.0, total = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const auto x = g.node(i);
      const double w = std::pow(std::abs(u.values[i]), p);
      total += w;
      bool out = false;
      for (int k = 0; k < m; ++k) {
        const double lo = ell * omega1[k].lo, hi = ell * omega1[k].hi;
        const double c = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
        out = out || std::abs(x[k] - c) > 0.5 * half;
      }
      if (out) outer += w;
    }
    r.measure(at("outer_mass_fraction", ell), total > 0.0 ? outer / total : 0.0);
  }
  const auto [c, rms] = least_squares(X, y, cols);
  r.fit = Fit{two ? "lambda = a + b ell^-s + c ell^-sp" : "lambda = a + b ell^-s", c, rms};
  const double rel = std::abs(c[0] - cross->lambda) / cross->lambda;
  r.measure("extrapolated_lambda", c[0]);
  r.measure("extrapolation_rel_error", rel);
  r.check("|extrapolated - cross-section lambda| / cross-section lambda", rel, "<=", setup.tol.cylinder_limit_rel);
  if (p == 2.0) {
    ExperimentSetup alt = setup;
    alt.solver.method = SolveMethod::Descent;
    const DomainSpec d = cylinder(ells.front(), omega1, omega);
    const auto lin = solve_cached(d, s, p, SeminormKind::Dirichlet, h, setup);
    const auto des = solve_cached(d, s, p, SeminormKind::Dirichlet, h, alt);
    r.converged = r.converged && des->converged;
    const double d_rel = std::abs(des->lambda - lin->lambda) / lin->lambda;
    r.measure("descent_lambda@" + num(ells.front()), des->lambda);
    r.check("|descent - linear| / linear at ell=" + num(ells.front()), d_rel, "<=", setup.tol.linear_vs_descent_rel);
  }
  r.notes.push_back("outer_mass_fraction is a diagnostic of spreading, not a check");
  r.wall_time = timer.seconds();
  return r;
}

ExperimentReport run_angle_certificate(std::shared_ptr<const Grid> grid, double s, double p,
                                       const ExperimentSetup& setup, double p1_1d, CertificateFunction fn) {
  if (!grid) throw UsageError("angle certificate: no grid");
  const int n = grid->dim();
  if (n != 2) throw UnsupportedError("angle certificate is implemented for n = 2");
  Timer timer;
  ExperimentReport r;
  r.experiment_id = "angle_certificate";
  r.param("domain", intervals(grid->domain().factors));
  r.param("h", grid->target_h());
  r.param("s", s);
  r.param("p", p);
  r.param("test_function", fn == CertificateFunction::Bump ? "bump" : "constant");
  echo_tolerances(r, setup.tol, {"identity_prefactor"});
  const double pref = angle_prefactor(n, s, p);
  r.measure("angle_prefactor", pref);
  r.check("|angle prefactor - 1|", std::abs(pref - 1.0), "<=", setup.tol.identity_prefactor);
  if (!(s * p > 1.0)) {
    r.notes.push_back("sp <= 1: the 1D regional constant tends to 0, the certificate is vacuous");
    r.wall_time = timer.seconds();
    return r;
  }
  if (p1_1d < 0.0) {
    const auto one = solve_cached(DomainSpec::box({grid->domain().factors[0]}), s, p, SeminormKind::Regional,
                                  grid->target_h(), setup);
    r.converged = one->converged;
    p1_1d = one->lambda;
  }
  const auto op = assemble(grid, s, p, SeminormKind::Regional, setup.assembly);
  const auto& dom = grid->domain();
  GridFunction u(grid);
  for (std::size_t i = 0; i < grid->size(); ++i) {
    if (grid->in_boundary_layer(i)) continue;
    double v = 1.0;
    if (fn == CertificateFunction::Bump) {
      const auto x = grid->node(i);
      for (int k = 0; k < n; ++k) {
        const double c = 0.5 * (dom.factors[k].lo + dom.factors[k].hi);
        v *= std::cos(std::numbers::pi * (x[k] - c) / dom.factors[k].length());
      }
    }
    u.values[i] = v;
  }
  const double q = energy(op, u) / lp_norm_p(u, p);
  r.measure("rayleigh_test_function", q);
  r.measure("p1_1d", p1_1d);
  r.measure("slack", q - p1_1d);
  r.check("energy(u)/|u|^p >= P1 of (-1,1)", q, ">=", p1_1d);
  r.wall_time = timer.seconds();
  return r;
}

ExperimentReport run_regional_strip(double s, double p, const std::vector<double>& h_list,
                                    const std::vector<double>& widths, double strip_h, const ExperimentSetup& setup) {
  if (h_list.empty()) throw ConfigError("regional strip needs at least one h");
  for (std::size_t i = 1; i < h_list.size(); ++i)
    if (!(h_list[i] < h_list[i - 1])) throw ConfigError("h list must go from coarse to fine");
  Timer timer;
  ExperimentReport r;
  r.experiment_id = "regional_strip";
  r.param("s", s);
  r.param("p", p);
  r.param("h_list", list(h_list));
  r.param("widths", list(widths));
  r.param("strip_h", strip_h);
  r.param("boundary_layer", setup.solver.boundary_layer ? "pinned" : "free");
  const double sp = s * p;
  const DomainSpec line = DomainSpec::box({Interval{-1.0, 1.0}});
  if (!(p > 1.0)) {
    // energy only
    for (double h : h_list) {
      auto g = std::make_shared<const Grid>(line, h);
      const auto op = assemble(g, s, p, SeminormKind::Regional, setup.assembly);
      const auto u = sample(g, [](std::span<const double> x) { return std::cos(0.5 * std::numbers::pi * x[0]); });
      r.measure(at("rayleigh_bump", h), energy(op, u) / lp_norm_p(u, p));
    }
    r.notes.push_back("p <= 1: energy evaluation only, no eigenvalue solve");
    r.wall_time = timer.seconds();
    return r;
  }
  std::vector<double> lam;
  for (double h : h_list) {
    const auto res = solve_cached(line, s, p, SeminormKind::Regional, h, setup);
    r.converged = r.converged && res->converged;
    lam.push_back(res->lambda);
    r.measure(at("lambda_1d", h), res->lambda);
  }
  if (sp <= 1.0) {
    echo_tolerances(r, setup.tol, {"strip_decay_ratio", "strip_overall_ratio"});
    for (std::size_t i = 0; i + 1 < lam.size(); ++i)
      r.check("lambda(h=" + num(h_list[i + 1]) + ") / lambda(h=" + num(h_list[i]) + ")", lam[i + 1] / lam[i], "<=",
              setup.tol.strip_decay_ratio);
    if (lam.size() >= 2)
      r.check("lambda(h=" + num(h_list.back()) + ") / lambda(h=" + num(h_list.front()) + ")", lam.back() / lam.front(),
              "<=", setup.tol.strip_overall_ratio);
    r.notes.push_back("sp <= 1: the continuum regional constant is 0; no strip comparison");
  } else {
    echo_tolerances(r, setup.tol, {"strip_cauchy_rel"});
    for (std::size_t i = 0; i + 1 < lam.size(); ++i)
      r.check("|lambda(h=" + num(h_list[i + 1]) + ") - lambda(h=" + num(h_list[i]) + ")| / lambda(h=" +
                  num(h_list[i]) + ")",
              std::abs(lam[i + 1] - lam[i]) / lam[i], "<=", setup.tol.strip_cauchy_rel);
    if (!widths.empty()) {
      const auto one = solve_cached(line, s, p, SeminormKind::Regional, strip_h, setup);
      r.converged = r.converged && one->converged;
      r.measure("lambda_1d_at_strip_h", one->lambda);
      for (double w : widths) {
        const DomainSpec strip = DomainSpec::box({Interval{-1.0, 1.0}, Interval{-w, w}});
        const auto res = solve_cached(strip, s, p, SeminormKind::Regional, strip_h, setup);
        r.converged = r.converged && res->converged;
        r.measure(at("lambda_strip", w), res->lambda);
        r.measure(at("strip_minus_1d", w), res->lambda - one->lambda);
        auto grid = std::make_shared<const Grid>(strip, strip_h);
        r.merge(run_angle_certificate(grid, s, p, setup, one->lambda), "width " + num(w) + ": ");
      }
      r.notes.push_back("strip_minus_1d is diagnostic; the finite strips are not nested for the regional kind");
    }
  }
  r.wall_time = timer.seconds();
  return r;
}

double picone_l(double fx, double fy, double gx, double gy, double p) {
  const double df = fx - fy, dg = gx - gy;
  const double a = std::pow(std::abs(df), p);
  const double phi = dg == 0.0 ? 0.0 : std::pow(std::abs(dg), p - 2.0) * dg;
  const double qx = fx == 0.0 ? 0.0 : fx * std::pow(fx / gx, p - 1.0);
  const double qy = fy == 0.0 ? 0.0 : fy * std::pow(fy / gy, p - 1.0);
  return a - phi * (qx - qy);
}

ExperimentReport run_picone(int trials, int grid_size, double p, std::uint64_t seed, const ExperimentSetup& setup) {
  if (!(p > 1.0)) throw DomainError("picone: p must exceed 1");
  if (trials < 1 || grid_size < 2) throw ConfigError("picone: need trials >= 1 and grid_size >= 2");
  Timer timer;
  ExperimentReport r;
  r.experiment_id = "picone";
  r.param("trials", trials);
  r.param("grid_size", grid_size);
  r.param("p", p);
  r.param("seed", static_cast<double>(seed));
  echo_tolerances(r, setup.tol, {"picone_min", "picone_proportional"});
  std::mt19937_64 rng(seed);
  auto u01 = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  std::vector<double> f(grid_size), g(grid_size), fp(grid_size), q(grid_size), qp(grid_size);
  // f^p / g^(p-1) per point, same form as in picone_l
  auto quotient = [p](double fx, double gx) { return fx == 0.0 ? 0.0 : fx * std::pow(fx / gx, p - 1.0); };
  double min_l = INFINITY, max_prop = 0.0;
  long retries = 0;
  for (int t = 0; t < trials; ++t) {
    for (int i = 0; i < grid_size; ++i) {
      double gi;
      while (!((gi = 1.0 - u01()) > 0.0)) ++retries;
      g[i] = gi;
      f[i] = u01();
    }
    const double alpha = t == 0 ? 1.0 : 0.5 + 1.5 * u01();
    for (int i = 0; i < grid_size; ++i) {
      fp[i] = alpha * g[i];
      q[i] = quotient(f[i], g[i]);
      qp[i] = quotient(fp[i], g[i]);
    }
    // L(f,g)(x,y) is symmetric in x and y, so each unordered pair once
    for (int i = 0; i < grid_size; ++i)
      for (int j = i + 1; j < grid_size; ++j) {
        const double dg = g[i] - g[j];
        const double phi = dg == 0.0 ? 0.0 : std::pow(std::abs(dg), p - 2.0) * dg;
        min_l = std::min(min_l, std::pow(std::abs(f[i] - f[j]), p) - phi * (q[i] - q[j]));
        max_prop = std::max(max_prop, std::abs(std::pow(std::abs(fp[i] - fp[j]), p) - phi * (qp[i] - qp[j])));
      }
  }
  r.measure("min_L", min_l);
  r.measure("max_abs_L_proportional", max_prop);
  r.measure("g_retries", static_cast<double>(retries));
  r.check("min over random pairs of L(f,g)", min_l, ">=", setup.tol.picone_min);
  r.check("max |L(alpha g, g)|", max_prop, "<=", setup.tol.picone_proportional);
  r.wall_time = timer.seconds();
  return r;
}

double reduction_integral(int m, int n, double s, double p, double a, const std::vector<double>& z, double R) {
  if (m < 1 || m > 2) throw UnsupportedError("reduction integral: m must be 1 or 2");
  if (static_cast<int>(z.size()) != m) throw DomainError("reduction integral: z must have m entries");
  if (!(a > 0.0) || !(R > 10.0 * a)) throw DomainError("reduction integral: need a > 0 and R >> a");
  const double k = 0.5 * (n + s * p);
  if (!(2.0 * k > m)) throw DomainError("reduction integral diverges");
  // tail of the integrand outside radius R, from the binomial series of (1 + a^2/r^2)^{-k}
  auto tail = [&](double area_power) {
    double sum = 0.0, binom = 1.0;
    for (int j = 0; j < 200; ++j) {
      const double e = 2.0 * k + 2.0 * j;
      const double term = binom * std::pow(R, area_power) * std::pow(a / R, e) / (e - area_power);
      sum += term;
      if (std::abs(term) < 1e-18 * std::abs(sum)) break;
      binom *= (-k - j) / (j + 1.0);
    }
    return sum;
  };
  std::vector<double> breaks;
  for (double c : {1.0, 10.0, 100.0, 1000.0}) breaks.push_back(c * a);
  if (m == 1) {
    std::vector<double> br{z[0]};
    for (double b : breaks) {
      br.push_back(z[0] - b);
      br.push_back(z[0] + b);
    }
    std::sort(br.begin(), br.end());
    const auto res = quad::gauss_kronrod(
        [&](double x) {
          const double t = (x - z[0]) / a;
          return std::pow(1.0 + t * t, -k);
        },
        z[0] - R, z[0] + R, br, 0.0, 1e-13);
    return res.value + 2.0 * tail(1.0);
  }
  // m = 2 in polar coordinates about z
  const auto res = quad::gauss_kronrod(
      [&](double rho) {
        const double t = rho / a;
        return 2.0 * std::numbers::pi * rho * std::pow(1.0 + t * t, -k);
      },
      0.0, R, breaks, 0.0, 1e-13);
  return res.value + 2.0 * std::numbers::pi * tail(2.0);
}

double cos_power_quadrature(int n, double s, double p) {
  if (n < 2) throw DomainError("cos_power_quadrature: n must be >= 2");
  const double sp = s * p;
  constexpr double pi = std::numbers::pi;
  if (n == 2) {
    // the single angle is the azimuth on (0, 2pi)
    return 4.0 * quad::tanh_sinh([&](double t) { return std::pow(std::cos(t), sp); }, 0.0, 0.5 * pi, 1e-14).value;
  }
  double total = 2.0 * quad::tanh_sinh([&](double t) { return std::pow(std::cos(t), sp) * std::pow(std::sin(t), n - 2); },
                                       0.0, 0.5 * pi, 1e-14)
                           .value;
  const auto& rule = quad::gauss_legendre(48);
  for (int k = 2; k <= n - 2; ++k) {
    double acc = 0.0;
    for (std::size_t i = 0; i < rule.x.size(); ++i) {
      const double t = 0.5 * pi * (rule.x[i] + 1.0);
      acc += rule.w[i] * std::pow(std::sin(t), n - 1 - k);
    }
    total *= 0.5 * pi * acc;
  }
  return total * 2.0 * pi;
}

ExperimentReport run_identities(const IdentityGrid& grid, const ExperimentSetup& setup) {
  Timer timer;
  ExperimentReport r;
  r.experiment_id = "identities";
  r.param("n_max", grid.n_max);
  r.param("s_list", list(grid.s_list));
  r.param("p_list", list(grid.p_list));
  r.param("a_list", list(grid.a_list));
  echo_tolerances(r, setup.tol, {"identity_c_theta", "identity_reduction", "identity_cos", "identity_prefactor"});

  double worst_ct = 0.0;
  for (int n = 2; n <= grid.n_max; ++n)
    for (int m = 1; m < n; ++m)
      for (double s : grid.s_list)
        for (double p : grid.p_list) {
          const double want = c_flap(n - m, s, p);
          worst_ct = std::max(worst_ct, std::abs(c_flap(n, s, p) * theta(m, n, s, p) - want) / want);
        }
  r.measure("max_rel_err_c_theta", worst_ct);
  r.check("max relative error of C_n Theta_m,n = C_n-m", worst_ct, "<=", setup.tol.identity_c_theta);

  double worst_red = 0.0;
  const std::vector<double> zs{0.3, -0.7};
  for (int m : grid.m_list)
    for (int n : {m + 1, m + 2})
      for (double s : grid.quad_s_list)
        for (double p : grid.quad_p_list)
          for (double a : grid.a_list) {
            const std::vector<double> z(zs.begin(), zs.begin() + m);
            const double want = std::pow(a, m) * theta(m, n, s, p);
            const double got = reduction_integral(m, n, s, p, a, z);
            worst_red = std::max(worst_red, std::abs(got - want) / want);
          }
  r.measure("max_rel_err_reduction", worst_red);
  r.check("max relative error of the reduction integral against a^m Theta", worst_red, "<=",
          setup.tol.identity_reduction);

  double worst_cos = 0.0, worst_pref = 0.0;
  for (int n = 2; n <= grid.n_max; ++n)
    for (double s : grid.s_list)
      for (double p : grid.p_list) {
        const double closed = cos_power_integral(n, s, p);
        worst_cos = std::max(worst_cos, std::abs(cos_power_quadrature(n, s, p) - closed) / closed);
        worst_pref = std::max(worst_pref, std::abs(angle_prefactor(n, s, p) - 1.0));
      }
  r.measure("max_rel_err_cos_integral", worst_cos);
  r.measure("max_abs_err_prefactor", worst_pref);
  r.check("max relative error of the cos-power integral closed form", worst_cos, "<=", setup.tol.identity_cos);
  r.check("max |C_n/(2 C_1) cos-integral - 1|", worst_pref, "<=", setup.tol.identity_prefactor);
  r.wall_time = timer.seconds();
  return r;
}

std::vector<ExperimentReport> run_jobs(const std::vector<std::function<ExperimentReport()>>& jobs, int workers) {
  std::vector<ExperimentReport> out(jobs.size());
  std::vector<std::exception_ptr> errs(jobs.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < jobs.size();) {
      try {
        out[i] = jobs[i]();
      } catch (...) {
        errs[i] = std::current_exception();
      }
    }
  };
  const int w = std::max(1, std::min<int>(workers, static_cast<int>(jobs.size())));
  if (w == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < w; ++i) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errs)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace fpc
