#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "fpc/domain.hpp"
#include "fpc/pair_kernels.hpp"

namespace fpc {

enum class SeminormKind { Regional, Dirichlet };
enum class FarFieldRule { Gauss, Midpoint };

struct AssemblyConfig {
  int near_field_radius = 4;
  int subdivision_order = 8;
  FarFieldRule far_field_rule = FarFieldRule::Gauss;
  // Kernel smoothing length in units of the grid's target spacing. Zero selects the
  // unsmoothed kernel, which is only integrable cell-to-cell when sp < 1.
  double regularization = 0.5;
  // When sp < 1 the bare kernel is used (piecewise constants then have finite energy and
  // the cell-pair weights are exact); set this to smooth there as well.
  bool smooth_integrable = false;
  std::size_t max_nodes = std::size_t{1} << 18;

  void validate() const;
};

// Discrete Gagliardo energy on a grid.
//
// The kernel is (C/2) (|r|^2 + eps^2)^{-(n+sp)/2} with eps = regularization * target_h,
// or eps = 0 when sp < 1 (see AssemblyConfig::smooth_integrable); config() holds the
// regularization actually used.
// The pair weight of nodes i, j is the exact cell-pair integral of that kernel and
// depends only on |i - j|, so it is stored once per nonnegative lattice offset. The
// Dirichlet exterior weight is twice the kernel mass of cell i that falls outside the
// domain, i.e. the total cell mass minus the weights to every grid cell.
class NonlocalOperator {
 public:
  NonlocalOperator(std::shared_ptr<const Grid> grid, double s, double p, SeminormKind kind,
                   AssemblyConfig cfg, std::vector<double> offset_weights, std::vector<double> exterior);

  const std::shared_ptr<const Grid>& grid() const { return grid_; }
  double s() const { return s_; }
  double p() const { return p_; }
  SeminormKind kind() const { return kind_; }
  const AssemblyConfig& config() const { return cfg_; }
  double eps() const;
  double constant() const;  // C_{n,s,p}

  // Weights over nonnegative offsets, extents = grid counts; entry 0 is the self term
  // (kept for mass bookkeeping, never used as a pair weight).
  const std::vector<double>& offset_weights() const { return offsets_; }
  const std::vector<double>& exterior_weights() const { return exterior_; }
  PairLayout layout() const { return PairLayout::whole(grid_->counts()); }

  double pair_weight(std::size_t i, std::size_t j) const;

 private:
  std::shared_ptr<const Grid> grid_;
  double s_, p_;
  SeminormKind kind_;
  AssemblyConfig cfg_;
  std::vector<double> offsets_;
  std::vector<double> exterior_;
};

NonlocalOperator assemble(std::shared_ptr<const Grid> grid, double s, double p, SeminormKind kind,
                          const AssemblyConfig& cfg = {});

// Offset weight table for a lattice with spacing h and extents `counts`, without the
// C/2 factor. eps = 0 gives the bare kernel.
std::vector<double> offset_table(const std::vector<double>& h, const std::vector<std::size_t>& counts, double sp,
                                 double eps, const AssemblyConfig& cfg);

// Integral over one cell Q (sides h) and over R^n \ Q of |x - y|^{-n-sp}, sp < 1.
double cell_complement_mass(const std::vector<double>& h, double sp);

// Sum over every grid cell j (including i) of the offset weight |i - j|, for all i.
std::vector<double> lattice_row_sums(const std::vector<double>& table, const std::vector<std::size_t>& counts);

double energy(const NonlocalOperator& op, const GridFunction& u);
double lp_norm_p(const GridFunction& u, double p);
double rayleigh(const NonlocalOperator& op, const GridFunction& u);
GridFunction energy_gradient(const NonlocalOperator& op, const GridFunction& u);

// Binary weight cache: "FPNL", u32 version, u32 n, u64 node count, then little-endian
// doubles: s, p, kind, h[n], counts[n], eps, the offset table, the exterior weights.
void write_weights(const NonlocalOperator& op, const std::string& path);
NonlocalOperator read_weights(const std::string& path, std::shared_ptr<const Grid> grid);

struct DirectionalSplit {
  double lhs = 0.0;  // lattice double sum over Omega x Omega
  double rhs = 0.0;  // sphere x hyperplane x line-pair decomposition
};

// Both sides of the directional decomposition of 2 * integral_{Omega x Omega}
// |u(x)-u(y)|^p |x-y|^{-n-sp}, for n in {1, 2}, with u the multilinear interpolant.
DirectionalSplit directional_decomposition(const GridFunction& u, double s, double p, int angular_nodes,
                                           int line_nodes);

}  // namespace fpc
