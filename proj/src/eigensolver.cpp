#include "fpc/eigensolver.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <random>
#include <tuple>

#include "fpc/errors.hpp"
#include "fpc/pair_kernels.hpp"
#include "fpc/special_fn.hpp"
#include "fpc/toeplitz.hpp"

namespace fpc {

void SolverConfig::validate() const {
  if (!(tolerance > 0.0)) throw ConfigError("solver tolerance must be positive");
  if (restarts < 1) throw ConfigError("solver restarts must be >= 1");
  if (max_iterations < 1) throw ConfigError("solver max_iterations must be >= 1");
  if (!(step_rule.shrink > 0.0 && step_rule.shrink < 1.0)) throw ConfigError("step shrink must lie in (0,1)");
  if (!(step_rule.initial_step > 0.0)) throw ConfigError("initial step must be positive");
  if (!(step_rule.sufficient_decrease > 0.0 && step_rule.sufficient_decrease < 1.0))
    throw ConfigError("sufficient decrease constant must lie in (0,1)");
  if (history < 1) throw ConfigError("solver history must be >= 1");
  if (!(residual_tolerance > 0.0)) throw ConfigError("residual tolerance must be positive");
}

double residual_threshold(const SolverConfig& cfg, double p) {
  return std::pow(cfg.residual_tolerance, std::clamp(p - 1.0, 0.5, 1.0));
}

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double phi(double v, double p) {
  const double av = std::abs(v);
  if (av == 0.0) return 0.0;
  if (p == 2.0) return v;
  return std::pow(av, p - 2.0) * v;
}

// The eigenproblem restricted to rep coordinates (mirror-folded or whole grid).
struct Reduced {
  const NonlocalOperator& op;
  PairLayout layout;
  double p;
  std::vector<double> mass;    // multiplicity * cell volume
  std::vector<double> ext;     // multiplicity * exterior weight
  std::vector<char> fixed;     // pinned to zero
  std::vector<std::size_t> rep_of_full;
  std::vector<std::size_t> full_of_rep;

  Reduced(const NonlocalOperator& o, bool symmetric, bool pin_layer)
      : op(o),
        layout(symmetric ? PairLayout::mirrored(o.grid()->counts()) : PairLayout::whole(o.grid()->counts())),
        p(o.p()) {
    const Grid& g = *op.grid();
    const std::size_t n = layout.size();
    mass.resize(n);
    ext.resize(n);
    fixed.assign(n, 0);
    full_of_rep.resize(n);
    for (std::size_t a = 0; a < n; ++a) {
      const double m = layout.multiplicity(a);
      full_of_rep[a] = layout.rep_to_full(a);
      mass[a] = m * g.cell_volume();
      ext[a] = op.kind() == SeminormKind::Dirichlet ? m * op.exterior_weights()[full_of_rep[a]] : 0.0;
      if (pin_layer && g.in_boundary_layer(full_of_rep[a])) fixed[a] = 1;
    }
    rep_of_full.resize(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) rep_of_full[i] = layout.full_to_rep(i);
  }

  std::size_t size() const { return layout.size(); }

  double energy(const std::vector<double>& x, std::vector<double>* grad) const {
    double e = pair_energy(layout, op.offset_weights().data(), x.data(), p, grad ? grad->data() : nullptr);
    double ex = 0.0;
    for (std::size_t a = 0; a < x.size(); ++a) {
      if (ext[a] == 0.0) continue;
      const double av = std::abs(x[a]);
      ex += ext[a] * std::pow(av, p);
      if (grad) (*grad)[a] += p * ext[a] * phi(x[a], p);
    }
    if (grad)
      for (std::size_t a = 0; a < x.size(); ++a)
        if (fixed[a]) (*grad)[a] = 0.0;
    return e + ex;
  }

  double norm(const std::vector<double>& x) const {
    double s = 0.0;
    for (std::size_t a = 0; a < x.size(); ++a) s += mass[a] * std::pow(std::abs(x[a]), p);
    return s;
  }

  // relative residual measured on the full grid
  double residual(const std::vector<double>& x, const std::vector<double>& gE, double lambda) const {
    double num = 0.0, den = 0.0;
    for (std::size_t a = 0; a < x.size(); ++a) {
      if (fixed[a]) continue;
      const double m = layout.multiplicity(a);
      const double rhs = p * lambda * mass[a] * phi(x[a], p);
      const double r = (gE[a] - rhs) / m;
      num += m * r * r;
      den += m * (rhs / m) * (rhs / m);
    }
    if (den == 0.0) return std::sqrt(num);
    return std::sqrt(num / den);
  }

  GridFunction unfold(const std::vector<double>& x) const {
    GridFunction u(op.grid());
    for (std::size_t i = 0; i < u.values.size(); ++i) u.values[i] = x[rep_of_full[i]];
    return u;
  }

  std::vector<double> fold(const GridFunction& u) const {
    std::vector<double> x(size());
    for (std::size_t a = 0; a < size(); ++a) x[a] = fixed[a] ? 0.0 : u.values[full_of_rep[a]];
    return x;
  }
};

struct Outcome {
  double lambda = 0.0;
  std::vector<double> x;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> history;
};

std::vector<std::size_t> free_indices(const Reduced& red) {
  std::vector<std::size_t> idx;
  for (std::size_t a = 0; a < red.size(); ++a)
    if (!red.fixed[a]) idx.push_back(a);
  return idx;
}

// smallest eigenpair of the dense generalized problem A x = lambda M x, M diagonal
Outcome solve_dense(const Reduced& red) {
  const auto idx = free_indices(red);
  const std::size_t n = idx.size();
  if (n == 0) throw ConfigError("no free unknowns left on this grid");
  const std::size_t N = red.size();
  std::vector<double> full = pair_matrix(red.layout, red.op.offset_weights().data());
  std::vector<double> B(n * n);
  std::vector<double> isq(n);
  for (std::size_t i = 0; i < n; ++i) isq[i] = 1.0 / std::sqrt(red.mass[idx[i]]);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = full.data() + idx[i] * N;
    for (std::size_t j = 0; j < n; ++j) B[i * n + j] = row[idx[j]] * isq[i] * isq[j];
    B[i * n + i] += red.ext[idx[i]] * isq[i] * isq[i];
  }
  full.clear();
  full.shrink_to_fit();
  // Householder tridiagonalisation, smallest eigenvalue of T, then one solve of the
  // shifted T (positive definite below lambda_min) and the back transform
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> Bm(B.data(), n, n);
  Eigen::MatrixXd Bc = Bm;
  B.clear();
  B.shrink_to_fit();
  Eigen::Tridiagonalization<Eigen::MatrixXd> tri(Bc);
  const Eigen::VectorXd diag = tri.diagonal();
  const Eigen::VectorXd sub = tri.subDiagonal();
  double lambda_min;
  if (n == 1) {
    lambda_min = diag(0);
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
    lambda_min = es.eigenvalues()(0);
  }
  const double scale = std::max(diag.cwiseAbs().maxCoeff(), sub.size() ? sub.cwiseAbs().maxCoeff() : 0.0);
  const double shift = lambda_min - 64.0 * std::numeric_limits<double>::epsilon() * scale;
  Eigen::VectorXd y = Eigen::VectorXd::Ones(n);
  for (int sweep = 0; sweep < 3; ++sweep) {
    // LDL^T of T - shift I
    std::vector<double> d(n), l(n);
    d[0] = diag(0) - shift;
    for (std::size_t i = 1; i < n; ++i) {
      l[i] = sub(i - 1) / d[i - 1];
      d[i] = diag(i) - shift - l[i] * sub(i - 1);
    }
    for (std::size_t i = 1; i < n; ++i) y(i) -= l[i] * y(i - 1);
    for (std::size_t i = 0; i < n; ++i) y(i) /= d[i];
    for (std::size_t i = n - 1; i-- > 0;) y(i) -= l[i + 1] * y(i + 1);
    y.normalize();
  }
  const Eigen::VectorXd z = tri.matrixQ() * y;
  Outcome out;
  out.lambda = std::max(lambda_min, 0.0);
  out.x.assign(N, 0.0);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += z(i);
  const double sign = sum < 0.0 ? -1.0 : 1.0;
  for (std::size_t i = 0; i < n; ++i) out.x[idx[i]] = sign * z(i) * isq[i];
  out.iterations = 1;
  out.converged = true;
  return out;
}

// p = 2 operator `quad` (same grid as red) applied through the FFT Toeplitz product on
// the full grid, in the rep coordinates of red
class QuadraticApply {
 public:
  QuadraticApply(const Reduced& red, const NonlocalOperator& quad)
      : red_(red), tp_(quad.grid()->counts(), quad.offset_weights()), self_(quad.offset_weights()[0]) {
    const auto rows = lattice_row_sums(quad.offset_weights(), quad.grid()->counts());
    const auto& ext = quad.exterior_weights();
    diag_.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
      diag_[i] = 2.0 * rows[i] + (quad.kind() == SeminormKind::Dirichlet ? ext[i] : 0.0);
    u_.resize(rows.size());
    y_.resize(rows.size());
  }
  explicit QuadraticApply(const Reduced& red) : QuadraticApply(red, red.op) {}

  // y = A_f x, with A_f the Hessian / 2 of the folded energy
  void operator()(const std::vector<double>& x, std::vector<double>& y) {
    for (std::size_t i = 0; i < u_.size(); ++i) u_[i] = x[red_.rep_of_full[i]];
    tp_.apply(u_.data(), y_.data());
    y.resize(x.size());
    for (std::size_t a = 0; a < x.size(); ++a) {
      const std::size_t i = red_.full_of_rep[a];
      y[a] = red_.fixed[a] ? 0.0 : red_.layout.multiplicity(a) * (diag_[i] * u_[i] - 2.0 * y_[i]);
    }
  }

  double diagonal(std::size_t a) const {
    const std::size_t i = red_.full_of_rep[a];
    // exact diagonal of A_f includes the orbit partners' coupling; the full-grid diagonal is close enough
    return red_.layout.multiplicity(a) * (diag_[i] - 2.0 * self_);
  }

 private:
  const Reduced& red_;
  ToeplitzProduct tp_;
  double self_;
  std::vector<double> diag_, u_, y_;
};

// p = 2 surrogate with the same kernel exponent n + sp (s' = sp/2), so the Hessian and
// the preconditioner scale alike under refinement. s' must stay below 1.
double surrogate_s(const NonlocalOperator& op) { return std::min(0.5 * op.s() * op.p(), 0.95); }

AssemblyConfig surrogate_config(const NonlocalOperator& op) {
  AssemblyConfig c = op.config();
  // eps = 0 is only integrable while 2 s' < 1
  if (c.regularization == 0.0 && 2.0 * surrogate_s(op) >= 1.0) c.regularization = AssemblyConfig{}.regularization;
  return c;
}

// Approximate inverse of K = A_2 + mu M (A_2 the p = 2 operator of the same s) by a few
// Jacobi-preconditioned CG steps. Used as the initial inverse Hessian of the descent.
class LinearPreconditioner {
 public:
  explicit LinearPreconditioner(const Reduced& red)
      : red_(red),
        quad_(assemble(red.op.grid(), surrogate_s(red.op), 2.0, red.op.kind(), surrogate_config(red.op))),
        apply_(red, quad_) {
    const std::size_t N = red.size();
    bool pinned = red.op.kind() == SeminormKind::Dirichlet;
    for (char f : red.fixed) pinned = pinned || f;
    jac_.assign(N, 0.0);
    double mean = 0.0;
    for (std::size_t a = 0; a < N; ++a) mean += apply_.diagonal(a) / red.mass[a];
    mean /= static_cast<double>(N);
    mu_ = pinned ? 0.0 : 1e-2 * mean;
    for (std::size_t a = 0; a < N; ++a)
      if (!red.fixed[a]) jac_[a] = 1.0 / (apply_.diagonal(a) + mu_ * red.mass[a]);
  }

  void solve(const std::vector<double>& g, std::vector<double>& z) {
    const std::size_t N = g.size();
    z.assign(N, 0.0);
    r_ = g;
    for (std::size_t a = 0; a < N; ++a)
      if (red_.fixed[a]) r_[a] = 0.0;
    const double r0 = std::sqrt(dot(r_, r_));
    if (r0 == 0.0) return;
    w_.resize(N);
    for (std::size_t a = 0; a < N; ++a) w_[a] = jac_[a] * r_[a];
    d_ = w_;
    double rz = dot(r_, w_);
    for (int it = 0; it < 50; ++it) {
      apply_(d_, q_);
      for (std::size_t a = 0; a < N; ++a) q_[a] += mu_ * red_.mass[a] * d_[a];
      const double dq = dot(d_, q_);
      if (!(dq > 0.0)) break;
      const double alpha = rz / dq;
      for (std::size_t a = 0; a < N; ++a) {
        z[a] += alpha * d_[a];
        r_[a] -= alpha * q_[a];
      }
      if (std::sqrt(dot(r_, r_)) <= 1e-3 * r0) break;
      for (std::size_t a = 0; a < N; ++a) w_[a] = jac_[a] * r_[a];
      const double rz_new = dot(r_, w_);
      const double beta = rz_new / rz;
      rz = rz_new;
      for (std::size_t a = 0; a < N; ++a) d_[a] = w_[a] + beta * d_[a];
    }
  }

 private:
  const Reduced& red_;
  NonlocalOperator quad_;
  QuadraticApply apply_;
  double mu_ = 0.0;
  std::vector<double> jac_, r_, w_, d_, q_;
};

// Smallest eigenpair by locally optimal preconditioned conjugate gradients (one vector).
Outcome solve_lobpcg(const Reduced& red, std::vector<double> x, const SolverConfig& cfg) {
  const std::size_t N = red.size();
  QuadraticApply A(red);
  std::vector<double> prec(N, 0.0);
  for (std::size_t a = 0; a < N; ++a)
    if (!red.fixed[a]) prec[a] = 1.0 / A.diagonal(a);
  auto mdot = [&](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < N; ++i) s += red.mass[i] * a[i] * b[i];
    return s;
  };
  for (std::size_t a = 0; a < N; ++a)
    if (red.fixed[a]) x[a] = 0.0;
  double nx = std::sqrt(mdot(x, x));
  for (auto& v : x) v /= nx;
  std::vector<double> Ax, w, Aw, pdir, Ap, r(N);
  A(x, Ax);
  double lambda = dot(x, Ax);
  Outcome out;
  bool have_p = false;
  const double target = std::min(1e-10, cfg.residual_tolerance);
  for (int it = 1; it <= cfg.max_iterations; ++it) {
    out.iterations = it;
    double rn = 0.0, mn = 0.0;
    for (std::size_t a = 0; a < N; ++a) {
      r[a] = red.fixed[a] ? 0.0 : Ax[a] - lambda * red.mass[a] * x[a];
      const double m = red.layout.multiplicity(a);
      rn += r[a] * r[a] / m;
      mn += std::pow(lambda * red.mass[a] * x[a], 2) / m;
    }
    out.residual = mn > 0.0 ? std::sqrt(rn / mn) : std::sqrt(rn);
    out.history.push_back(lambda);
    if (out.residual <= target) {
      out.converged = true;
      break;
    }
    w.assign(N, 0.0);
    for (std::size_t a = 0; a < N; ++a) w[a] = prec[a] * r[a];
    A(w, Aw);
    // basis [x, w, p], M-orthonormalised by modified Gram-Schmidt; A-images follow along
    std::vector<std::vector<double>> V{x}, AV{Ax};
    auto add = [&](std::vector<double> v, std::vector<double> av) {
      for (std::size_t k = 0; k < V.size(); ++k) {
        const double c = mdot(V[k], v);
        for (std::size_t i = 0; i < N; ++i) {
          v[i] -= c * V[k][i];
          av[i] -= c * AV[k][i];
        }
      }
      const double nv = std::sqrt(mdot(v, v));
      if (!(nv > 1e-14)) return;
      for (std::size_t i = 0; i < N; ++i) {
        v[i] /= nv;
        av[i] /= nv;
      }
      V.push_back(std::move(v));
      AV.push_back(std::move(av));
    };
    add(w, Aw);
    if (have_p) add(pdir, Ap);
    const int k = static_cast<int>(V.size());
    std::vector<double> G(k * k);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) G[i * k + j] = 0.5 * (dot(V[i], AV[j]) + dot(V[j], AV[i]));
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> Gm(G.data(), k, k);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ritz(Gm);
    if (ritz.info() != Eigen::Success) throw std::runtime_error("Rayleigh-Ritz step failed");
    std::vector<double> c(k);
    for (int i = 0; i < k; ++i) c[i] = ritz.eigenvectors()(i, 0);
    std::vector<double> xn(N, 0.0), Axn(N, 0.0), pn(N, 0.0), Apn(N, 0.0);
    for (int j = 0; j < k; ++j)
      for (std::size_t i = 0; i < N; ++i) {
        xn[i] += c[j] * V[j][i];
        Axn[i] += c[j] * AV[j][i];
        if (j > 0) {
          pn[i] += c[j] * V[j][i];
          Apn[i] += c[j] * AV[j][i];
        }
      }
    x.swap(xn);
    Ax.swap(Axn);
    pdir.swap(pn);
    Ap.swap(Apn);
    have_p = true;
    nx = std::sqrt(mdot(x, x));
    for (std::size_t i = 0; i < N; ++i) {
      x[i] /= nx;
      Ax[i] /= nx;
    }
    if (it % 25 == 0) A(x, Ax);  // shed accumulated drift
    lambda = dot(x, Ax);
  }
  double sum = 0.0;
  for (double v : x) sum += v;
  if (sum < 0.0)
    for (auto& v : x) v = -v;
  out.lambda = std::max(lambda, 0.0);
  out.x = std::move(x);
  return out;
}

// Quasi-Newton descent of the Rayleigh quotient on the unit L^p sphere with |u| projection.
Outcome solve_descent(const Reduced& red, std::vector<double> x, const SolverConfig& cfg) {
  const std::size_t N = red.size();
  const double p = red.p;
  auto project = [&](std::vector<double>& v) -> bool {
    for (std::size_t a = 0; a < N; ++a) v[a] = red.fixed[a] ? 0.0 : std::abs(v[a]);
    const double nrm = red.norm(v);
    if (!(nrm > 0.0) || !std::isfinite(nrm)) return false;
    const double sc = std::pow(nrm, -1.0 / p);
    for (auto& val : v) val *= sc;
    return true;
  };
  if (!project(x)) throw UndefinedQuotientError("initial guess vanishes on the free nodes");

  std::vector<double> gE(N), gR(N);
  auto rayleigh_grad = [&](const std::vector<double>& v, std::vector<double>& gE_, std::vector<double>& gR_) {
    const double R = red.energy(v, &gE_);
    for (std::size_t a = 0; a < N; ++a) gR_[a] = red.fixed[a] ? 0.0 : gE_[a] - R * p * red.mass[a] * phi(v[a], p);
    return R;
  };
  double R = rayleigh_grad(x, gE, gR);
  Outcome out;
  out.history.push_back(R);

  struct Pair {
    std::vector<double> s, y;
    double rho;
    double gamma;  // s.y / y.H0 y
  };
  std::deque<Pair> mem;
  std::vector<double> d(N), xt(N), gEt(N), gRt(N), q(N), hy(N), alpha_k;
  std::unique_ptr<LinearPreconditioner> pre;
  if (cfg.precondition) pre = std::make_unique<LinearPreconditioner>(red);
  int stall = 0;
  for (int it = 1; it <= cfg.max_iterations; ++it) {
    out.iterations = it;
    if (R == 0.0) {
      stall = 10;
      break;
    }
    // two-loop recursion
    q = gR;
    alpha_k.assign(mem.size(), 0.0);
    for (int k = static_cast<int>(mem.size()) - 1; k >= 0; --k) {
      alpha_k[k] = mem[k].rho * dot(mem[k].s, q);
      for (std::size_t i = 0; i < N; ++i) q[i] -= alpha_k[k] * mem[k].y[i];
    }
    if (pre) {
      pre->solve(q, hy);
      const double gamma = mem.empty() ? 1.0 : mem.back().gamma;
      for (std::size_t i = 0; i < N; ++i) q[i] = gamma * hy[i];
    } else {
      const double gamma = mem.empty() ? 1.0 : dot(mem.back().s, mem.back().y) / dot(mem.back().y, mem.back().y);
      for (std::size_t i = 0; i < N; ++i) q[i] *= gamma;
    }
    for (std::size_t k = 0; k < mem.size(); ++k) {
      const double b = mem[k].rho * dot(mem[k].y, q);
      for (std::size_t i = 0; i < N; ++i) q[i] += (alpha_k[k] - b) * mem[k].s[i];
    }
    for (std::size_t i = 0; i < N; ++i) d[i] = -q[i];
    double gd = dot(gR, d);
    if (!(gd < 0.0)) {
      mem.clear();
      for (std::size_t i = 0; i < N; ++i) d[i] = -gR[i];
      gd = dot(gR, d);
    }
    if (!(gd < 0.0)) {
      stall = 10;  // stationary to machine precision
      break;
    }
    double step = 1.0;
    if (mem.empty()) {
      step = cfg.step_rule.initial_step * 0.1 * std::sqrt(dot(x, x) / dot(d, d));
      if (pre) step = std::min(cfg.step_rule.initial_step, 10.0 * step);
    }
    bool accepted = false;
    double Rt = R;
    for (int bt = 0; bt < 60; ++bt) {
      for (std::size_t i = 0; i < N; ++i) xt[i] = x[i] + step * d[i];
      if (project(xt)) {
        // with the gradient: the first trial is usually accepted, which saves a second pass
        Rt = red.energy(xt, &gEt);
        if (Rt <= R + cfg.step_rule.sufficient_decrease * step * gd && Rt <= R) {
          accepted = true;
          break;
        }
      }
      step *= cfg.step_rule.shrink;
    }
    if (!accepted) {
      if (!mem.empty()) {
        mem.clear();
        continue;
      }
      stall = 10;
      break;
    }
    for (std::size_t a = 0; a < N; ++a) gRt[a] = red.fixed[a] ? 0.0 : gEt[a] - Rt * p * red.mass[a] * phi(xt[a], p);
    Pair pr;
    pr.s.resize(N);
    pr.y.resize(N);
    for (std::size_t i = 0; i < N; ++i) {
      pr.s[i] = xt[i] - x[i];
      pr.y[i] = gRt[i] - gR[i];
    }
    const double sy = dot(pr.s, pr.y);
    if (sy > 1e-14 * std::sqrt(dot(pr.s, pr.s) * dot(pr.y, pr.y))) {
      pr.rho = 1.0 / sy;
      pr.gamma = 1.0;
      if (pre) {
        pre->solve(pr.y, hy);
        const double yhy = dot(pr.y, hy);
        if (yhy > 0.0) pr.gamma = sy / yhy;
      }
      mem.push_back(std::move(pr));
      if (static_cast<int>(mem.size()) > cfg.history) mem.pop_front();
    }
    const double rel = (R - Rt) / R;
    stall = rel < cfg.tolerance ? stall + 1 : 0;
    x.swap(xt);
    gE.swap(gEt);
    gR.swap(gRt);
    R = Rt;
    out.history.push_back(R);
    if (stall >= 10) break;
  }
  out.lambda = R;
  out.residual = red.residual(x, gE, R);
  out.converged = stall >= 10 && out.residual <= residual_threshold(cfg, p);
  out.x = std::move(x);
  return out;
}

std::uint64_t splitmix(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::vector<double> initial_guess(const Reduced& red, int restart, std::uint64_t seed) {
  const Grid& g = *red.op.grid();
  const std::size_t N = red.size();
  std::vector<double> x(N);
  const bool constant = red.op.kind() == SeminormKind::Regional &&
                        std::none_of(red.fixed.begin(), red.fixed.end(), [](char c) { return c != 0; });
  std::uint64_t state = seed ^ (0xD1B54A32D192ED03ull * static_cast<std::uint64_t>(restart + 1));
  for (std::size_t a = 0; a < N; ++a) {
    const auto xyz = g.node(red.full_of_rep[a]);
    double v = 1.0;
    if (!constant) {
      for (int k = 0; k < g.dim(); ++k) {
        const auto& iv = g.domain().factors[k];
        const double c = 0.5 * (iv.lo + iv.hi);
        v *= std::cos(std::numbers::pi * (xyz[k] - c) / iv.length());
      }
    }
    if (restart > 0) {
      const double u01 = static_cast<double>(splitmix(state) >> 11) * 0x1.0p-53;
      v *= 1.0 + 0.6 * (u01 - 0.5);
    }
    x[a] = v;
  }
  return x;
}

GridFunction normalized(GridFunction u, double p) {
  for (auto& v : u.values) v = std::abs(v);
  const double n = lp_norm_p(u, p);
  if (n > 0.0) {
    const double sc = std::pow(n, -1.0 / p);
    for (auto& v : u.values) v *= sc;
  }
  return u;
}

}  // namespace

EigenResult solve(const NonlocalOperator& op, const SolverConfig& cfg, const GridFunction* initial) {
  cfg.validate();
  if (!(op.p() > 1.0)) throw UnsupportedError("the eigensolver needs p > 1");
  const bool pin = op.kind() == SeminormKind::Regional && cfg.boundary_layer;
  const Reduced red(op, cfg.use_symmetry, pin);
  if (cfg.method == SolveMethod::Linear && op.p() != 2.0)
    throw UnsupportedError("solver.method = linear needs p = 2");
  const bool linear = op.p() == 2.0 && cfg.method != SolveMethod::Descent;
  const std::size_t nfree = free_indices(red).size();
  if (nfree == 0) throw ConfigError("no free unknowns left on this grid");

  EigenResult res;
  if (linear && nfree <= cfg.dense_limit) {
    Outcome o = solve_dense(red);
    std::vector<double> gE(red.size());
    red.energy(o.x, &gE);
    const double scale = std::pow(red.norm(o.x), -1.0 / op.p());
    for (auto& v : o.x) v *= scale;
    for (auto& v : gE) v *= scale;
    res.lambda = o.lambda;
    res.eigenfunction = normalized(red.unfold(o.x), op.p());
    res.residual = red.residual(o.x, gE, o.lambda);
    res.iterations = 1;
    res.converged = true;
    res.method = "dense";
    return res;
  }

  // warm start from a coarser grid
  std::vector<double> warm;
  if (initial) {
    if (!initial->grid) throw UsageError("initial guess without grid");
    if (initial->grid->same_lattice(*op.grid())) {
      warm = red.fold(*initial);
    } else {
      GridFunction prolonged(op.grid());
      for (std::size_t i = 0; i < prolonged.values.size(); ++i) {
        const auto x = op.grid()->node(i);
        prolonged.values[i] = initial->interpolate(x);
      }
      warm = red.fold(prolonged);
    }
  } else if (cfg.coarse_start_nodes > 0 && nfree > cfg.coarse_start_nodes) {
    const double coarse_h = 2.0 * op.grid()->target_h();
    bool ok = true;
    for (const auto& iv : op.grid()->domain().factors) ok = ok && coarse_h < 0.25 * iv.length();
    if (ok) {
      auto cg = std::make_shared<const Grid>(op.grid()->domain(), coarse_h);
      const auto cop = assemble(cg, op.s(), op.p(), op.kind(), op.config());
      SolverConfig ccfg = cfg;
      ccfg.restarts = 1;
      ccfg.tolerance = std::max(cfg.tolerance, 1e-9);
      const auto cres = solve(cop, ccfg);
      GridFunction prolonged(op.grid());
      for (std::size_t i = 0; i < prolonged.values.size(); ++i) {
        const auto x = op.grid()->node(i);
        prolonged.values[i] = cres.eigenfunction.interpolate(x);
      }
      warm = red.fold(prolonged);
      if (std::all_of(warm.begin(), warm.end(), [](double v) { return v == 0.0; })) warm.clear();
    }
  }

  std::vector<Outcome> runs;
  const int restarts = linear ? 1 : cfg.restarts;
  for (int r = 0; r < restarts; ++r) {
    std::vector<double> x0 = initial_guess(red, r, cfg.rng_seed);
    if (!warm.empty()) {
      if (r == 0) {
        x0 = warm;
      } else {
        // warm profile times the random factor of restart r
        const auto base = initial_guess(red, 0, cfg.rng_seed);
        for (std::size_t a = 0; a < x0.size(); ++a) x0[a] = base[a] != 0.0 ? warm[a] * (x0[a] / base[a]) : warm[a];
      }
    }
    runs.push_back(linear ? solve_lobpcg(red, std::move(x0), cfg) : solve_descent(red, std::move(x0), cfg));
  }
  std::size_t best = 0;
  double lo = runs[0].lambda, hi = runs[0].lambda;
  for (std::size_t r = 1; r < runs.size(); ++r) {
    if (runs[r].lambda < runs[best].lambda) best = r;
    lo = std::min(lo, runs[r].lambda);
    hi = std::max(hi, runs[r].lambda);
  }
  Outcome& o = runs[best];
  const double scale = std::pow(red.norm(o.x), -1.0 / op.p());
  for (auto& v : o.x) v = std::abs(v) * scale;
  if (linear) {
    std::vector<double> gE(red.size());
    red.energy(o.x, &gE);
    o.residual = red.residual(o.x, gE, o.lambda);
  }
  res.lambda = o.lambda;
  res.eigenfunction = normalized(red.unfold(o.x), op.p());
  res.residual = o.residual;
  res.iterations = o.iterations;
  res.restart_spread = hi - lo;
  res.converged = o.converged;
  res.method = linear ? "lobpcg" : "descent";
  res.history = std::move(o.history);
  return res;
}

double eigen_residual(const NonlocalOperator& op, const GridFunction& u, double lambda, bool boundary_layer) {
  const auto g = energy_gradient(op, u);
  const Grid& grid = *op.grid();
  const bool pin = op.kind() == SeminormKind::Regional && boundary_layer;
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (pin && grid.in_boundary_layer(i)) continue;
    const double rhs = op.p() * lambda * grid.cell_volume() * phi(u.values[i], op.p());
    num += std::pow(g.values[i] - rhs, 2);
    den += rhs * rhs;
  }
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

SeparableBound separable_upper_bound(double ell, double cross_lambda, double cutoff_seminorm, bool cutoff_norm_is_one,
                                     double s, double p) {
  if (!(ell > 0.0)) throw DomainError("separable bound: ell must be positive");
  if (!cutoff_norm_is_one) throw DomainError("separable bound: the cutoff must have unit L^p norm");
  if (!(cross_lambda >= 0.0) || !(cutoff_seminorm >= 0.0)) throw DomainError("separable bound: negative input");
  SeparableBound b;
  const double ls = std::pow(ell, -s);
  b.product = std::pow(std::pow(cross_lambda, 1.0 / p) + cutoff_seminorm * ls, p);
  const double k = p * std::pow(2.0, p - 1.0);
  b.c1 = k * std::pow(cross_lambda, (p - 1.0) / p) * cutoff_seminorm;
  b.c2 = k * std::pow(cutoff_seminorm, p);
  b.expanded = cross_lambda + b.c1 * ls + b.c2 * std::pow(ell, -s * p);
  return b;
}

CutoffSeminorm cutoff_seminorm(int m, double s, double p, double h) {
  static std::mutex mu;
  static std::map<std::tuple<int, std::uint64_t, std::uint64_t, std::uint64_t>, CutoffSeminorm> cache;
  const auto key = std::make_tuple(m, std::bit_cast<std::uint64_t>(s), std::bit_cast<std::uint64_t>(p),
                                   std::bit_cast<std::uint64_t>(h));
  {
    std::lock_guard lock(mu);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
  }
  std::vector<Interval> f(m, Interval{-3.0, 3.0});
  auto grid = std::make_shared<const Grid>(DomainSpec::box(f), h);
  const auto op = assemble(grid, s, p, SeminormKind::Dirichlet);
  const auto v = sample(grid, [&](std::span<const double> x) {
    double val = 1.0;
    for (double xk : x) val *= std::abs(xk) < 1.0 ? std::cos(0.5 * std::numbers::pi * xk) : 0.0;
    return val;
  });
  CutoffSeminorm out;
  out.value = std::pow(energy(op, v) / lp_norm_p(v, p), 1.0 / p);
  out.h = grid->h()[0];
  std::lock_guard lock(mu);
  cache.emplace(key, out);
  return out;
}

EigenCheck check_first_eigen_properties(const EigenResult& result, const NonlocalOperator& op, double weak_tolerance,
                                        double simplicity_tolerance, bool boundary_layer) {
  EigenCheck c;
  const auto& u = result.eigenfunction.values;
  const Grid& g = *op.grid();
  const bool pin = op.kind() == SeminormKind::Regional && boundary_layer;
  c.nonnegative = std::all_of(u.begin(), u.end(), [](double v) { return v >= 0.0; });
  c.interior_positive = true;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (pin && g.in_boundary_layer(i)) continue;
    if (!(u[i] > 0.0)) c.interior_positive = false;
  }
  c.weak_residual = eigen_residual(op, result.eigenfunction, result.lambda, boundary_layer);
  c.weak_form = c.weak_residual <= weak_tolerance;
  c.simple = result.restart_spread <= simplicity_tolerance * std::max(result.lambda, 1e-300);
  return c;
}

}  // namespace fpc
