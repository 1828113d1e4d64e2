#include "fpc/assembly.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>

#include "fpc/errors.hpp"
#include "fpc/quadrature.hpp"
#include "fpc/special_fn.hpp"

namespace fpc {

void AssemblyConfig::validate() const {
  if (near_field_radius < 1) throw ConfigError("near_field_radius must be >= 1");
  if (subdivision_order < 1) throw ConfigError("subdivision_order must be >= 1");
  if (!(regularization >= 0.0) || !std::isfinite(regularization)) throw ConfigError("regularization must be >= 0");
  if (max_nodes < 2) throw ConfigError("max_nodes must be >= 2");
}

NonlocalOperator::NonlocalOperator(std::shared_ptr<const Grid> grid, double s, double p, SeminormKind kind,
                                   AssemblyConfig cfg, std::vector<double> offset_weights,
                                   std::vector<double> exterior)
    : grid_(std::move(grid)),
      s_(s),
      p_(p),
      kind_(kind),
      cfg_(cfg),
      offsets_(std::move(offset_weights)),
      exterior_(std::move(exterior)) {
  if (!grid_) throw UsageError("operator needs a grid");
  if (offsets_.size() != grid_->size() || exterior_.size() != grid_->size())
    throw UsageError("operator weight sizes do not match the grid");
}

double NonlocalOperator::eps() const { return cfg_.regularization * grid_->target_h(); }

double NonlocalOperator::constant() const { return c_flap(grid_->dim(), s_, p_); }

double NonlocalOperator::pair_weight(std::size_t i, std::size_t j) const {
  if (i == j) return 0.0;
  const auto a = grid_->unflatten(i), b = grid_->unflatten(j);
  std::size_t idx = 0;
  for (int k = 0; k < grid_->dim(); ++k) idx = idx * grid_->counts()[k] + (a[k] > b[k] ? a[k] - b[k] : b[k] - a[k]);
  return offsets_[idx];
}

namespace {

// Tent-weighted nodes for one axis: points r in (-h, h) with weights (h - |r|) * dr,
// each half split into `sub` panels of `g` Gauss points.
struct AxisRule {
  std::vector<double> r, w;
  bool shifted = false;  // r already includes the offset d * h
};

AxisRule axis_rule(double h, int sub, int g) {
  const auto& gl = quad::gauss_legendre(g);
  AxisRule out;
  const double ph = h / sub;
  for (int side = -1; side <= 1; side += 2) {
    for (int j = 0; j < sub; ++j) {
      const double a = j * ph, c = a + 0.5 * ph;
      for (int q = 0; q < g; ++q) {
        const double t = c + 0.5 * ph * gl.x[q];
        out.r.push_back(side * t);
        out.w.push_back(0.5 * ph * gl.w[q] * (h - t));
      }
    }
  }
  return out;
}

// Same tent weights, but for eps = 0 on touching cells: panels shrink geometrically toward
// the point where the kernel blows up. d = 0 grades both halves toward r = 0; d = 1 grades
// the negative half toward r = -h (the shared face).
AxisRule graded_axis_rule(double h, std::size_t d, double sp, int sub) {
  constexpr double sigma = 0.2;
  constexpr int g = 16;
  const auto& gl = quad::gauss_legendre(g);
  // drop the innermost panel once its share, ~sigma^{L(1-sp)}, is below 1e-13
  const int levels = std::clamp(static_cast<int>(std::ceil(29.9 / ((1.0 - sp) * std::log(1.0 / sigma)))), 8, 600);
  AxisRule out;
  out.shifted = true;
  // u in (a, b) is the distance from the singular end; x = d*h + r is stored exactly
  auto panel = [&](int side, bool graded, double a, double b) {
    const double c = 0.5 * (a + b), hw = 0.5 * (b - a);
    for (int q = 0; q < g; ++q) {
      const double u = c + hw * gl.x[q];
      if (!graded) {  // u is t itself
        out.r.push_back(static_cast<double>(d) * h + side * u);
        out.w.push_back(hw * gl.w[q] * (h - u));
      } else if (d == 0) {  // t = u
        out.r.push_back(side * u);
        out.w.push_back(hw * gl.w[q] * (h - u));
      } else {  // t = h - u, x = h - t = u
        out.r.push_back(u);
        out.w.push_back(hw * gl.w[q] * u);
      }
    }
  };
  for (int side = -1; side <= 1; side += 2) {
    const bool graded = d == 0 || side == -1;
    if (!graded) {
      const double ph = h / sub;
      for (int j = 0; j < sub; ++j) panel(side, false, j * ph, (j + 1) * ph);
      continue;
    }
    double outer = h;
    for (int l = 0; l < levels; ++l) {
      const double inner = outer * sigma;
      panel(side, true, inner, outer);
      outer = inner;
    }
    panel(side, true, 0.0, outer);
  }
  return out;
}

int points_for(double ratio) {
  // Gauss error on an analytic integrand decays like rho^{-2g}, with rho the Bernstein
  // ellipse parameter reaching the nearest singularity; aim for 1e-16.
  if (!(ratio > 0.0)) return 24;
  const double rho = ratio + std::sqrt(ratio * ratio + 1.0);
  const int g = static_cast<int>(std::ceil(18.42 / std::log(rho)));
  return std::clamp(g, 3, 24);
}

double tensor_sum(int n, const std::vector<const AxisRule*>& rules, const double* shift, double eps2,
                  double expo) {
  double total = 0.0;
  if (n == 1) {
    const auto& a = *rules[0];
    for (std::size_t i = 0; i < a.r.size(); ++i) {
      const double x = (a.shifted ? 0.0 : shift[0]) + a.r[i];
      total += a.w[i] * std::pow(x * x + eps2, expo);
    }
  } else if (n == 2) {
    const auto &a = *rules[0], &b = *rules[1];
    for (std::size_t i = 0; i < a.r.size(); ++i) {
      const double x = (a.shifted ? 0.0 : shift[0]) + a.r[i];
      const double x2 = x * x + eps2;
      double row = 0.0;
      for (std::size_t j = 0; j < b.r.size(); ++j) {
        const double y = (b.shifted ? 0.0 : shift[1]) + b.r[j];
        row += b.w[j] * std::pow(x2 + y * y, expo);
      }
      total += a.w[i] * row;
    }
  } else if (n == 3) {
    const auto &a = *rules[0], &b = *rules[1], &c = *rules[2];
    for (std::size_t i = 0; i < a.r.size(); ++i) {
      const double x = (a.shifted ? 0.0 : shift[0]) + a.r[i];
      double plane = 0.0;
      for (std::size_t j = 0; j < b.r.size(); ++j) {
        const double y = (b.shifted ? 0.0 : shift[1]) + b.r[j];
        const double xy2 = x * x + y * y + eps2;
        double row = 0.0;
        for (std::size_t k = 0; k < c.r.size(); ++k) {
          const double z = (c.shifted ? 0.0 : shift[2]) + c.r[k];
          row += c.w[k] * std::pow(xy2 + z * z, expo);
        }
        plane += b.w[j] * row;
      }
      total += a.w[i] * plane;
    }
  } else {
    throw UnsupportedError("weight assembly supports dimensions 1 to 3");
  }
  return total;
}

}  // namespace

std::vector<double> offset_table(const std::vector<double>& h, const std::vector<std::size_t>& counts, double sp,
                                 double eps, const AssemblyConfig& cfg) {
  cfg.validate();
  const int n = static_cast<int>(h.size());
  if (n < 1 || n > 3) throw UnsupportedError("weight assembly supports dimensions 1 to 3");
  if (eps == 0.0 && sp >= 1.0)
    throw ConfigError("the unsmoothed kernel is not integrable between adjacent cells when sp >= 1");
  std::size_t total = 1;
  for (auto c : counts) total *= c;
  std::vector<double> table(total, 0.0);
  const double expo = -0.5 * (n + sp);
  const double eps2 = eps * eps;
  double vol = 1.0, hmax = 0.0;
  for (double hk : h) {
    vol *= hk;
    hmax = std::max(hmax, hk);
  }

  // rules keyed by (axis, sub, g); built up front so the parallel loop only reads
  std::map<std::tuple<int, int, int>, AxisRule> rules;
  auto plan = [&](const std::vector<std::size_t>& d, int& sub, int& g) {
    std::size_t dmax = 0;
    double dist2 = 0.0;
    for (int k = 0; k < n; ++k) {
      dmax = std::max(dmax, d[k]);
      if (d[k] > 1) dist2 += std::pow((static_cast<double>(d[k]) - 1.0) * h[k], 2);
    }
    const bool near = dmax <= static_cast<std::size_t>(cfg.near_field_radius);
    if (!near && cfg.far_field_rule == FarFieldRule::Midpoint) {
      sub = 0;
      g = 0;
      return;
    }
    sub = near ? cfg.subdivision_order : 1;
    const double half_panel = 0.5 * hmax / sub;
    g = points_for(std::sqrt(dist2 + eps2) / half_panel);
  };
  std::vector<std::size_t> d(n);
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t rest = flat;
    for (int k = n - 1; k >= 0; --k) {
      d[k] = rest % counts[k];
      rest /= counts[k];
    }
    int sub, g;
    plan(d, sub, g);
    if (sub == 0) continue;
    for (int k = 0; k < n; ++k) {
      auto key = std::make_tuple(k, sub, g);
      if (!rules.count(key)) rules.emplace(key, axis_rule(h[k], sub, g));
    }
  }

#pragma omp parallel
  {
    std::vector<std::size_t> dd(n);
    std::vector<const AxisRule*> rp(n);
    double shift[3];
#pragma omp for schedule(dynamic, 64)
    for (std::size_t flat = 0; flat < total; ++flat) {
      std::size_t rest = flat;
      for (int k = n - 1; k >= 0; --k) {
        dd[k] = rest % counts[k];
        rest /= counts[k];
      }
      for (int k = 0; k < n; ++k) shift[k] = static_cast<double>(dd[k]) * h[k];
      if (flat == 0 && eps == 0.0) {
        table[0] = 0.0;  // self term diverges without smoothing and is never a pair weight
        continue;
      }
      if (eps == 0.0 && std::all_of(dd.begin(), dd.end(), [](std::size_t v) { return v <= 1; })) {
        std::vector<AxisRule> graded;
        for (int k = 0; k < n; ++k) graded.push_back(graded_axis_rule(h[k], dd[k], sp, cfg.subdivision_order));
        for (int k = 0; k < n; ++k) rp[k] = &graded[k];
        table[flat] = tensor_sum(n, rp, shift, eps2, expo);
        continue;
      }
      int sub, g;
      plan(dd, sub, g);
      if (sub == 0) {
        double r2 = eps2;
        for (int k = 0; k < n; ++k) r2 += shift[k] * shift[k];
        table[flat] = vol * vol * std::pow(r2, expo);
        continue;
      }
      for (int k = 0; k < n; ++k) rp[k] = &rules.at(std::make_tuple(k, sub, g));
      table[flat] = tensor_sum(n, rp, shift, eps2, expo);
    }
  }
  return table;
}

double cell_complement_mass(const std::vector<double>& h, double sp) {
  const int n = static_cast<int>(h.size());
  if (n < 1 || n > 3) throw UnsupportedError("weight assembly supports dimensions 1 to 3");
  if (!(sp > 0.0 && sp < 1.0)) throw DomainError("cell_complement_mass needs 0 < sp < 1");
  // = integral over R^n of |r|^{-n-sp} |Q \ (Q + r)|. Outside B = [-h, h]^n the overlap is
  // empty, which leaves vol * (exterior weight of B at 0); inside, fold to [0, h]^n.
  double vol = 1.0;
  std::vector<Interval> box;
  for (double hk : h) {
    vol *= hk;
    box.push_back({-hk, hk});
  }
  const std::vector<double> origin(n, 0.0);
  const double outside = vol * exterior_kernel_weight(origin, DomainSpec::box(box), sp, 1.0);

  constexpr double sigma = 0.2;
  constexpr int g = 16;
  const auto& gl = quad::gauss_legendre(g);
  const int levels = std::clamp(static_cast<int>(std::ceil(29.9 / ((1.0 - sp) * std::log(1.0 / sigma)))), 8, 600);
  std::vector<std::vector<double>> x(n), w(n);
  for (int k = 0; k < n; ++k) {
    double outer = h[k];
    for (int l = 0; l <= levels; ++l) {
      const double inner = l == levels ? 0.0 : outer * sigma;
      const double c = 0.5 * (inner + outer), hw = 0.5 * (outer - inner);
      for (int q = 0; q < g; ++q) {
        x[k].push_back(c + hw * gl.x[q]);
        w[k].push_back(hw * gl.w[q]);
      }
      outer = inner;
    }
  }
  const double expo = -0.5 * (n + sp);
  // 1 - prod(1 - r_k/h_k) without cancellation for small r
  auto missing = [&](const double* r) {
    double lg = 0.0;
    for (int k = 0; k < n; ++k) lg += std::log1p(-r[k] / h[k]);
    return -std::expm1(lg);
  };
  double inside = 0.0;
  double r[3];
  if (n == 1) {
    for (std::size_t i = 0; i < x[0].size(); ++i) {
      r[0] = x[0][i];
      inside += w[0][i] * missing(r) * std::pow(r[0] * r[0], expo);
    }
  } else if (n == 2) {
    for (std::size_t i = 0; i < x[0].size(); ++i) {
      r[0] = x[0][i];
      double row = 0.0;
      for (std::size_t j = 0; j < x[1].size(); ++j) {
        r[1] = x[1][j];
        row += w[1][j] * missing(r) * std::pow(r[0] * r[0] + r[1] * r[1], expo);
      }
      inside += w[0][i] * row;
    }
  } else {
#pragma omp parallel for reduction(+ : inside) private(r)
    for (std::size_t i = 0; i < x[0].size(); ++i) {
      r[0] = x[0][i];
      double plane = 0.0;
      for (std::size_t j = 0; j < x[1].size(); ++j) {
        r[1] = x[1][j];
        double row = 0.0;
        for (std::size_t k = 0; k < x[2].size(); ++k) {
          r[2] = x[2][k];
          row += w[2][k] * missing(r) * std::pow(r[0] * r[0] + r[1] * r[1] + r[2] * r[2], expo);
        }
        plane += w[1][j] * row;
      }
      inside += w[0][i] * plane;
    }
  }
  return outside + vol * std::ldexp(inside, n);
}

std::vector<double> lattice_row_sums(const std::vector<double>& table, const std::vector<std::size_t>& counts) {
  // Along each axis in turn replace the offset index o by a node index i:
  // X'(i) = sum_j X(|i - j|) = P(i) + P(n-1-i) - X(0), P the prefix sums.
  const int n = static_cast<int>(counts.size());
  std::vector<double> cur = table, next(table.size());
  std::size_t inner = 1;
  for (int k = n - 1; k >= 0; --k) {
    const std::size_t nk = counts[k];
    const std::size_t outer = cur.size() / (nk * inner);
    std::vector<double> prefix(nk);
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t in = 0; in < inner; ++in) {
        const std::size_t base = o * nk * inner + in;
        double acc = 0.0;
        for (std::size_t i = 0; i < nk; ++i) {
          acc += cur[base + i * inner];
          prefix[i] = acc;
        }
        const double x0 = cur[base];
        for (std::size_t i = 0; i < nk; ++i) next[base + i * inner] = prefix[i] + prefix[nk - 1 - i] - x0;
      }
    }
    std::swap(cur, next);
    inner *= nk;
  }
  return cur;
}

NonlocalOperator assemble(std::shared_ptr<const Grid> grid, double s, double p, SeminormKind kind,
                          const AssemblyConfig& cfg) {
  if (!grid) throw UsageError("assemble: null grid");
  cfg.validate();
  FracParams{grid->dim(), std::nullopt, s, p}.validate();
  if (grid->size() > cfg.max_nodes)
    throw ResourceError("grid needs " + std::to_string(grid->size()) + " nodes; the configured limit is " +
                        std::to_string(cfg.max_nodes));
  const int n = grid->dim();
  const double sp = s * p;
  const double half_c = 0.5 * c_flap(n, s, p);
  AssemblyConfig used = cfg;
  if (sp < 1.0 && !cfg.smooth_integrable) used.regularization = 0.0;
  const double eps = used.regularization * grid->target_h();
  std::vector<double> table = offset_table(grid->h(), grid->counts(), sp, eps, used);
  for (double& w : table) w *= half_c;

  std::vector<double> exterior(grid->size(), 0.0);
  if (kind == SeminormKind::Dirichlet) {
    if (eps > 0.0) {
      const double cell_mass = half_c * grid->cell_volume() * regularized_kernel_mass(n, sp, eps);
      const auto rows = lattice_row_sums(table, grid->counts());
      for (std::size_t i = 0; i < exterior.size(); ++i) exterior[i] = 2.0 * (cell_mass - rows[i]);
    } else {
      // same complement, with the bare kernel's cell self-complement in place of the mass
      const double cell_mass = half_c * cell_complement_mass(grid->h(), sp);
      const auto rows = lattice_row_sums(table, grid->counts());
      for (std::size_t i = 0; i < exterior.size(); ++i) exterior[i] = 2.0 * (cell_mass - rows[i]);
    }
  }
  return NonlocalOperator(std::move(grid), s, p, kind, used, std::move(table), std::move(exterior));
}

namespace {

void check_grid(const NonlocalOperator& op, const GridFunction& u) {
  if (!u.grid || (u.grid != op.grid() && !u.grid->same_lattice(*op.grid())))
    throw UsageError("grid function does not live on the operator's grid");
}

}  // namespace

double energy(const NonlocalOperator& op, const GridFunction& u) {
  check_grid(op, u);
  const auto layout = op.layout();
  double e = pair_energy(layout, op.offset_weights().data(), u.values.data(), op.p(), nullptr);
  const auto& ext = op.exterior_weights();
  if (op.kind() == SeminormKind::Dirichlet) {
    double x = 0.0;
    for (std::size_t i = 0; i < ext.size(); ++i) x += ext[i] * std::pow(std::abs(u.values[i]), op.p());
    e += x;
  }
  return e;
}

double lp_norm_p(const GridFunction& u, double p) {
  if (!(p >= 1.0)) throw DomainError("lp_norm_p: p must be >= 1");
  if (!u.grid) throw UsageError("lp_norm_p: grid function without grid");
  double acc = 0.0;
  for (double v : u.values) acc += std::pow(std::abs(v), p);
  return acc * u.grid->cell_volume();
}

double rayleigh(const NonlocalOperator& op, const GridFunction& u) {
  const double norm = lp_norm_p(u, op.p());
  if (!(norm > 0.0)) throw UndefinedQuotientError("rayleigh quotient of the zero function");
  return energy(op, u) / norm;
}

GridFunction energy_gradient(const NonlocalOperator& op, const GridFunction& u) {
  check_grid(op, u);
  if (!(op.p() > 1.0)) throw UnsupportedError("energy gradient needs p > 1");
  GridFunction g(op.grid());
  const auto layout = op.layout();
  pair_energy(layout, op.offset_weights().data(), u.values.data(), op.p(), g.values.data());
  if (op.kind() == SeminormKind::Dirichlet) {
    const auto& ext = op.exterior_weights();
    const double p = op.p();
    for (std::size_t i = 0; i < ext.size(); ++i) {
      const double v = u.values[i];
      const double av = std::abs(v);
      if (av > 0.0) g.values[i] += p * ext[i] * std::pow(av, p - 2.0) * v;
    }
  }
  return g;
}

namespace {

static_assert(std::endian::native == std::endian::little, "weight cache assumes a little-endian host");

constexpr char kMagic[4] = {'F', 'P', 'N', 'L'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ofstream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::ifstream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw ConfigError("weight cache truncated");
  return v;
}

}  // namespace

void write_weights(const NonlocalOperator& op, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw ConfigError("cannot open weight cache for writing: " + path);
  const Grid& g = *op.grid();
  os.write(kMagic, 4);
  put<std::uint32_t>(os, kVersion);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(g.dim()));
  put<std::uint64_t>(os, g.size());
  put<double>(os, op.s());
  put<double>(os, op.p());
  put<double>(os, op.kind() == SeminormKind::Dirichlet ? 1.0 : 0.0);
  for (double h : g.h()) put<double>(os, h);
  for (auto c : g.counts()) put<double>(os, static_cast<double>(c));
  put<double>(os, op.eps());
  for (double w : op.offset_weights()) put<double>(os, w);
  for (double e : op.exterior_weights()) put<double>(os, e);
  if (!os) throw ConfigError("failed writing weight cache: " + path);
}

NonlocalOperator read_weights(const std::string& path, std::shared_ptr<const Grid> grid) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open weight cache: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) throw ConfigError("not a weight cache: " + path);
  if (get<std::uint32_t>(is) != kVersion) throw ConfigError("unsupported weight cache version");
  const auto n = get<std::uint32_t>(is);
  const auto count = get<std::uint64_t>(is);
  if (!grid || static_cast<int>(n) != grid->dim() || count != grid->size())
    throw UsageError("weight cache does not match the grid");
  const double s = get<double>(is), p = get<double>(is);
  const auto kind = get<double>(is) != 0.0 ? SeminormKind::Dirichlet : SeminormKind::Regional;
  for (std::uint32_t k = 0; k < n; ++k)
    if (get<double>(is) != grid->h()[k]) throw UsageError("weight cache spacing does not match the grid");
  for (std::uint32_t k = 0; k < n; ++k)
    if (get<double>(is) != static_cast<double>(grid->counts()[k]))
      throw UsageError("weight cache extents do not match the grid");
  const double eps = get<double>(is);
  std::vector<double> table(count), ext(count);
  for (auto& w : table) w = get<double>(is);
  for (auto& e : ext) e = get<double>(is);
  AssemblyConfig cfg;
  cfg.regularization = eps / grid->target_h();
  return NonlocalOperator(std::move(grid), s, p, kind, cfg, std::move(table), std::move(ext));
}

}  // namespace fpc
