#include "fpc/cli.hpp"

#include <omp.h>

#include <CLI11.hpp>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "fpc/errors.hpp"
#include "fpc/report.hpp"

namespace fpc {

namespace fs = std::filesystem;

const char* command_name(Command c) {
  switch (c) {
    case Command::Constant: return "constant";
    case Command::Sweep: return "sweep";
    case Command::Verify: return "verify";
    case Command::Picone: return "picone";
    case Command::Identities: return "identities";
  }
  return "?";
}

RunConfig default_run_config(Command c) {
  RunConfig rc;
  rc.command = c;
  rc.out_dir = std::string("fpc_") + command_name(c);
  switch (c) {
    case Command::Constant: rc.h = 1.0 / 128.0; break;
    case Command::Sweep: rc.h = 1.0 / 32.0; break;
    case Command::Verify: rc.h = 1.0 / 64.0; break;
    case Command::Picone: rc.p = {1.5, 2.0, 3.0}; break;
    case Command::Identities: break;
  }
  return rc;
}

namespace {

// shortest text that reads back to the same double
std::string short_num(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string join_nums(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + short_num(v[i]);
  return out;
}

std::string join_ints(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + std::to_string(v[i]);
  return out;
}

std::string join_strings(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + v[i];
  return out;
}

std::string join_intervals(const std::vector<Interval>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + short_num(v[i].lo) + ":" + short_num(v[i].hi);
  return out;
}

const char* kind_text(SeminormKind k) { return k == SeminormKind::Dirichlet ? "dirichlet" : "regional"; }
const char* method_text(SolveMethod m) {
  return m == SolveMethod::Linear ? "linear" : m == SolveMethod::Descent ? "descent" : "auto";
}

constexpr unsigned kC = 1u << static_cast<int>(Command::Constant);
constexpr unsigned kS = 1u << static_cast<int>(Command::Sweep);
constexpr unsigned kV = 1u << static_cast<int>(Command::Verify);
constexpr unsigned kP = 1u << static_cast<int>(Command::Picone);
constexpr unsigned kI = 1u << static_cast<int>(Command::Identities);
constexpr unsigned kAll = kC | kS | kV | kP | kI;
constexpr unsigned kSolve = kC | kS | kV;

struct Key {
  const char* name;
  unsigned commands;
  const char* help;
  std::function<void(const Config&, const char*, RunConfig&)> read;
  std::function<std::string(const RunConfig&)> show;
};

std::string one_of(const Config& cfg, const char* key, const std::string& fallback,
                   std::initializer_list<const char*> allowed) {
  const std::string v = cfg.get_string(key, fallback);
  for (const char* a : allowed)
    if (v == a) return v;
  std::string list;
  for (const char* a : allowed) list += std::string(list.empty() ? "" : ", ") + a;
  const int line = cfg.line_of(key);
  throw ConfigError((line > 0 ? cfg.source() + ":" + std::to_string(line) : std::string("--") + key) + ": " + key +
                        ": expected one of " + list + ", got '" + v + "'",
                    line);
}

int to_int(const Config& cfg, const char* key, long long fallback) {
  const long long v = cfg.get_int(key, fallback);
  if (v < INT32_MIN || v > INT32_MAX) throw ConfigError(std::string(key) + ": out of range", cfg.line_of(key));
  return static_cast<int>(v);
}

std::vector<int> to_ints(const Config& cfg, const char* key, const std::vector<int>& fallback) {
  std::vector<double> fb(fallback.begin(), fallback.end());
  std::vector<int> out;
  for (double v : cfg.get_doubles(key, fb)) {
    if (v != std::floor(v)) throw ConfigError(std::string(key) + ": expected integers", cfg.line_of(key));
    out.push_back(static_cast<int>(v));
  }
  return out;
}

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      {"domain.factors", kC | kV, "box factors lo:hi, one per axis",
       [](const Config& c, const char* k, RunConfig& r) { r.factors = c.get_intervals(k, r.factors); },
       [](const RunConfig& r) { return join_intervals(r.factors); }},
      {"domain.ell", kC, "cylinder scale; 0 uses domain.factors",
       [](const Config& c, const char* k, RunConfig& r) { r.ell = c.get_double(k, r.ell); },
       [](const RunConfig& r) { return short_num(r.ell); }},
      {"domain.omega1", kC | kS, "free factors of the cylinder",
       [](const Config& c, const char* k, RunConfig& r) { r.omega1 = c.get_intervals(k, r.omega1); },
       [](const RunConfig& r) { return join_intervals(r.omega1); }},
      {"domain.omega", kC | kS, "cross-section factors",
       [](const Config& c, const char* k, RunConfig& r) { r.omega = c.get_intervals(k, r.omega); },
       [](const RunConfig& r) { return join_intervals(r.omega); }},
      {"domain.ells", kS, "cylinder scales, increasing, at least 3",
       [](const Config& c, const char* k, RunConfig& r) { r.ells = c.get_doubles(k, r.ells); },
       [](const RunConfig& r) { return join_nums(r.ells); }},
      {"domain.dilation", kC, "dilate the domain by t (spacing follows)",
       [](const Config& c, const char* k, RunConfig& r) { r.dilation = c.get_double(k, r.dilation); },
       [](const RunConfig& r) { return short_num(r.dilation); }},
      {"params.s", kSolve, "fractional order",
       [](const Config& c, const char* k, RunConfig& r) { r.s = c.get_double(k, r.s); },
       [](const RunConfig& r) { return short_num(r.s); }},
      {"params.p", kSolve | kP, "exponent (a list runs each)",
       [](const Config& c, const char* k, RunConfig& r) { r.p = c.get_doubles(k, r.p); },
       [](const RunConfig& r) { return join_nums(r.p); }},
      {"params.kind", kC | kV, "dirichlet or regional",
       [](const Config& c, const char* k, RunConfig& r) {
         r.kind = one_of(c, k, kind_text(r.kind), {"dirichlet", "regional"}) == "dirichlet" ? SeminormKind::Dirichlet
                                                                                            : SeminormKind::Regional;
       },
       [](const RunConfig& r) { return std::string(kind_text(r.kind)); }},
      {"params.h", kSolve, "target grid spacing",
       [](const Config& c, const char* k, RunConfig& r) { r.h = c.get_double(k, r.h); },
       [](const RunConfig& r) { return short_num(r.h); }},
      {"solver.max_iterations", kSolve, "descent iteration cap",
       [](const Config& c, const char* k, RunConfig& r) {
         r.solver.max_iterations = to_int(c, k, r.solver.max_iterations);
       },
       [](const RunConfig& r) { return std::to_string(r.solver.max_iterations); }},
      {"solver.tolerance", kSolve, "relative Rayleigh stall per accepted step",
       [](const Config& c, const char* k, RunConfig& r) { r.solver.tolerance = c.get_double(k, r.solver.tolerance); },
       [](const RunConfig& r) { return short_num(r.solver.tolerance); }},
      {"solver.residual_tolerance", kSolve, "relative residual for convergence (p >= 2)",
       [](const Config& c, const char* k, RunConfig& r) {
         r.solver.residual_tolerance = c.get_double(k, r.solver.residual_tolerance);
       },
       [](const RunConfig& r) { return short_num(r.solver.residual_tolerance); }},
      {"solver.restarts", kSolve, "independent starts per solve",
       [](const Config& c, const char* k, RunConfig& r) { r.solver.restarts = to_int(c, k, r.solver.restarts); },
       [](const RunConfig& r) { return std::to_string(r.solver.restarts); }},
      {"solver.method", kSolve, "auto, linear (p = 2 only) or descent",
       [](const Config& c, const char* k, RunConfig& r) {
         const auto m = one_of(c, k, method_text(r.solver.method), {"auto", "linear", "descent"});
         r.solver.method = m == "linear" ? SolveMethod::Linear : m == "descent" ? SolveMethod::Descent : SolveMethod::Auto;
       },
       [](const RunConfig& r) { return std::string(method_text(r.solver.method)); }},
      {"solver.boundary_layer", kSolve, "regional kind: pin the outer cell layer",
       [](const Config& c, const char* k, RunConfig& r) {
         r.solver.boundary_layer = c.get_bool(k, r.solver.boundary_layer);
       },
       [](const RunConfig& r) { return std::string(r.solver.boundary_layer ? "true" : "false"); }},
      {"solver.use_symmetry", kSolve, "solve on mirror-symmetric functions",
       [](const Config& c, const char* k, RunConfig& r) { r.solver.use_symmetry = c.get_bool(k, r.solver.use_symmetry); },
       [](const RunConfig& r) { return std::string(r.solver.use_symmetry ? "true" : "false"); }},
      {"solver.dense_limit", kSolve, "p = 2: dense solve up to this many free unknowns",
       [](const Config& c, const char* k, RunConfig& r) {
         const auto v = c.get_int(k, static_cast<long long>(r.solver.dense_limit));
         if (v < 0) throw ConfigError(std::string(k) + ": must be >= 0", c.line_of(k));
         r.solver.dense_limit = static_cast<std::size_t>(v);
       },
       [](const RunConfig& r) { return std::to_string(r.solver.dense_limit); }},
      {"solver.history", kSolve, "quasi-Newton memory",
       [](const Config& c, const char* k, RunConfig& r) { r.solver.history = to_int(c, k, r.solver.history); },
       [](const RunConfig& r) { return std::to_string(r.solver.history); }},
      {"solver.precondition", kSolve, "descent: p = 2 surrogate as initial inverse Hessian",
       [](const Config& c, const char* k, RunConfig& r) { r.solver.precondition = c.get_bool(k, r.solver.precondition); },
       [](const RunConfig& r) { return std::string(r.solver.precondition ? "true" : "false"); }},
      {"solver.coarse_start_nodes", kSolve, "warm start from a coarser grid above this size; 0 = off",
       [](const Config& c, const char* k, RunConfig& r) {
         const auto v = c.get_int(k, static_cast<long long>(r.solver.coarse_start_nodes));
         if (v < 0) throw ConfigError(std::string(k) + ": must be >= 0", c.line_of(k));
         r.solver.coarse_start_nodes = static_cast<std::size_t>(v);
       },
       [](const RunConfig& r) { return std::to_string(r.solver.coarse_start_nodes); }},
      {"solver.initial_step", kSolve, "first trial step, fraction of 0.1 |u|",
       [](const Config& c, const char* k, RunConfig& r) {
         r.solver.step_rule.initial_step = c.get_double(k, r.solver.step_rule.initial_step);
       },
       [](const RunConfig& r) { return short_num(r.solver.step_rule.initial_step); }},
      {"solver.shrink", kSolve, "backtracking factor",
       [](const Config& c, const char* k, RunConfig& r) {
         r.solver.step_rule.shrink = c.get_double(k, r.solver.step_rule.shrink);
       },
       [](const RunConfig& r) { return short_num(r.solver.step_rule.shrink); }},
      {"solver.sufficient_decrease", kSolve, "Armijo constant",
       [](const Config& c, const char* k, RunConfig& r) {
         r.solver.step_rule.sufficient_decrease = c.get_double(k, r.solver.step_rule.sufficient_decrease);
       },
       [](const RunConfig& r) { return short_num(r.solver.step_rule.sufficient_decrease); }},
      {"assembly.near_field_radius", kSolve, "offsets up to this use subdivided quadrature",
       [](const Config& c, const char* k, RunConfig& r) {
         r.assembly.near_field_radius = to_int(c, k, r.assembly.near_field_radius);
       },
       [](const RunConfig& r) { return std::to_string(r.assembly.near_field_radius); }},
      {"assembly.subdivision_order", kSolve, "panels per half cell in the near field",
       [](const Config& c, const char* k, RunConfig& r) {
         r.assembly.subdivision_order = to_int(c, k, r.assembly.subdivision_order);
       },
       [](const RunConfig& r) { return std::to_string(r.assembly.subdivision_order); }},
      {"assembly.far_field", kSolve, "gauss or midpoint",
       [](const Config& c, const char* k, RunConfig& r) {
         const auto v = one_of(c, k, r.assembly.far_field_rule == FarFieldRule::Gauss ? "gauss" : "midpoint",
                               {"gauss", "midpoint"});
         r.assembly.far_field_rule = v == "gauss" ? FarFieldRule::Gauss : FarFieldRule::Midpoint;
       },
       [](const RunConfig& r) {
         return std::string(r.assembly.far_field_rule == FarFieldRule::Gauss ? "gauss" : "midpoint");
       }},
      {"assembly.regularization", kSolve, "kernel smoothing length in grid spacings (used when sp >= 1)",
       [](const Config& c, const char* k, RunConfig& r) {
         r.assembly.regularization = c.get_double(k, r.assembly.regularization);
       },
       [](const RunConfig& r) { return short_num(r.assembly.regularization); }},
      {"assembly.smooth_integrable", kSolve, "also smooth when sp < 1",
       [](const Config& c, const char* k, RunConfig& r) {
         r.assembly.smooth_integrable = c.get_bool(k, r.assembly.smooth_integrable);
       },
       [](const RunConfig& r) { return std::string(r.assembly.smooth_integrable ? "true" : "false"); }},
      {"assembly.max_nodes", kSolve, "refuse grids larger than this",
       [](const Config& c, const char* k, RunConfig& r) {
         const auto v = c.get_int(k, static_cast<long long>(r.assembly.max_nodes));
         if (v < 2) throw ConfigError(std::string(k) + ": must be >= 2", c.line_of(k));
         r.assembly.max_nodes = static_cast<std::size_t>(v);
       },
       [](const RunConfig& r) { return std::to_string(r.assembly.max_nodes); }},
      {"assembly.load", kC, "read weights from this FPNL file instead of assembling",
       [](const Config& c, const char* k, RunConfig& r) { r.load_weights = c.get_string(k, r.load_weights); },
       [](const RunConfig& r) { return r.load_weights.empty() ? std::string("(none)") : r.load_weights; }},
      {"assembly.save", kC, "write weights.fpnl into the output directory",
       [](const Config& c, const char* k, RunConfig& r) { r.save_weights = c.get_bool(k, r.save_weights); },
       [](const RunConfig& r) { return std::string(r.save_weights ? "true" : "false"); }},
      {"output.dir", kAll, "output directory",
       [](const Config& c, const char* k, RunConfig& r) { r.out_dir = c.get_string(k, r.out_dir); },
       [](const RunConfig& r) { return r.out_dir; }},
      {"output.overwrite", kAll, "allow a non-empty output directory",
       [](const Config& c, const char* k, RunConfig& r) { r.overwrite = c.get_bool(k, r.overwrite); },
       [](const RunConfig& r) { return std::string(r.overwrite ? "true" : "false"); }},
      {"run.seed", kAll, "seed for restarts and random trials",
       [](const Config& c, const char* k, RunConfig& r) {
         const auto v = c.get_int(k, static_cast<long long>(r.seed));
         if (v < 0) throw ConfigError(std::string(k) + ": must be >= 0", c.line_of(k));
         r.seed = static_cast<std::uint64_t>(v);
       },
       [](const RunConfig& r) { return std::to_string(r.seed); }},
      {"run.threads", kAll, "thread cap; 0 = OpenMP default",
       [](const Config& c, const char* k, RunConfig& r) { r.threads = to_int(c, k, r.threads); },
       [](const RunConfig& r) { return std::to_string(r.threads); }},
      {"verify.checks", kV, "any of dilation, strip, directional, properties",
       [](const Config& c, const char* k, RunConfig& r) { r.checks = c.get_strings(k, r.checks); },
       [](const RunConfig& r) { return join_strings(r.checks); }},
      {"verify.t", kV, "dilation factors",
       [](const Config& c, const char* k, RunConfig& r) { r.t_list = c.get_doubles(k, r.t_list); },
       [](const RunConfig& r) { return join_nums(r.t_list); }},
      {"verify.h_list", kV, "strip: 1D refinement, coarse to fine",
       [](const Config& c, const char* k, RunConfig& r) { r.h_list = c.get_doubles(k, r.h_list); },
       [](const RunConfig& r) { return join_nums(r.h_list); }},
      {"verify.widths", kV, "strip: half widths of (-1,1) x (-w,w)",
       [](const Config& c, const char* k, RunConfig& r) { r.widths = c.get_doubles(k, r.widths); },
       [](const RunConfig& r) { return join_nums(r.widths); }},
      {"verify.strip_h", kV, "strip: spacing of the 2D solves",
       [](const Config& c, const char* k, RunConfig& r) { r.strip_h = c.get_double(k, r.strip_h); },
       [](const RunConfig& r) { return short_num(r.strip_h); }},
      {"verify.angular_nodes", kV, "directional: directions on the circle",
       [](const Config& c, const char* k, RunConfig& r) { r.angular_nodes = to_int(c, k, r.angular_nodes); },
       [](const RunConfig& r) { return std::to_string(r.angular_nodes); }},
      {"verify.line_nodes", kV, "directional: nodes per line and lattice axis",
       [](const Config& c, const char* k, RunConfig& r) { r.line_nodes = to_int(c, k, r.line_nodes); },
       [](const RunConfig& r) { return std::to_string(r.line_nodes); }},
      {"picone.trials", kP, "random (f, g) pairs per p",
       [](const Config& c, const char* k, RunConfig& r) { r.trials = to_int(c, k, r.trials); },
       [](const RunConfig& r) { return std::to_string(r.trials); }},
      {"picone.grid_size", kP, "points per sample",
       [](const Config& c, const char* k, RunConfig& r) { r.grid_size = to_int(c, k, r.grid_size); },
       [](const RunConfig& r) { return std::to_string(r.grid_size); }},
      {"identities.n_max", kI, "largest dimension",
       [](const Config& c, const char* k, RunConfig& r) { r.identities.n_max = to_int(c, k, r.identities.n_max); },
       [](const RunConfig& r) { return std::to_string(r.identities.n_max); }},
      {"identities.s", kI, "s values",
       [](const Config& c, const char* k, RunConfig& r) { r.identities.s_list = c.get_doubles(k, r.identities.s_list); },
       [](const RunConfig& r) { return join_nums(r.identities.s_list); }},
      {"identities.p", kI, "p values",
       [](const Config& c, const char* k, RunConfig& r) { r.identities.p_list = c.get_doubles(k, r.identities.p_list); },
       [](const RunConfig& r) { return join_nums(r.identities.p_list); }},
      {"identities.a", kI, "scales a for the reduction integral",
       [](const Config& c, const char* k, RunConfig& r) { r.identities.a_list = c.get_doubles(k, r.identities.a_list); },
       [](const RunConfig& r) { return join_nums(r.identities.a_list); }},
      {"identities.m", kI, "reduced dimensions for the quadrature check",
       [](const Config& c, const char* k, RunConfig& r) { r.identities.m_list = to_ints(c, k, r.identities.m_list); },
       [](const RunConfig& r) { return join_ints(r.identities.m_list); }},
      {"identities.quad_s", kI, "s values for the quadrature checks",
       [](const Config& c, const char* k, RunConfig& r) {
         r.identities.quad_s_list = c.get_doubles(k, r.identities.quad_s_list);
       },
       [](const RunConfig& r) { return join_nums(r.identities.quad_s_list); }},
      {"identities.quad_p", kI, "p values for the quadrature checks",
       [](const Config& c, const char* k, RunConfig& r) {
         r.identities.quad_p_list = c.get_doubles(k, r.identities.quad_p_list);
       },
       [](const RunConfig& r) { return join_nums(r.identities.quad_p_list); }},
  };
  return table;
}

unsigned bit(Command c) { return 1u << static_cast<int>(c); }

void validate(const RunConfig& r) {
  auto bad = [](const std::string& m) { throw ConfigError(m); };
  const bool solves = bit(r.command) & kSolve;
  if (solves) {
    if (!(r.s > 0.0 && r.s < 1.0)) bad("params.s must lie in (0, 1)");
    if (!(r.h > 0.0)) bad("params.h must be positive");
    r.solver.validate();
    r.assembly.validate();
  }
  if (r.p.empty()) bad("params.p is empty");
  for (double p : r.p)
    if (!(p > 1.0)) bad("params.p must be > 1 for every entry");
  if (r.command == Command::Constant && r.p.size() != 1) bad("constant takes a single params.p");
  if (r.command == Command::Constant && !(r.dilation > 0.0)) bad("domain.dilation must be positive");
  if (r.command == Command::Constant && r.ell < 0.0) bad("domain.ell must be >= 0");
  if (r.command == Command::Sweep && r.ells.size() < 3) bad("sweep needs at least 3 values in domain.ells");
  if (r.command == Command::Verify) {
    for (const auto& c : r.checks)
      if (c != "dilation" && c != "strip" && c != "directional" && c != "properties")
        bad("verify.checks: unknown check '" + c + "'");
    if (r.checks.empty()) bad("verify.checks is empty");
  }
  if (r.command == Command::Picone && (r.trials < 1 || r.grid_size < 2)) bad("picone needs trials >= 1, grid_size >= 2");
  if (r.threads < 0) bad("run.threads must be >= 0");
  if (r.out_dir.empty()) bad("output.dir is empty");
}

std::string table_text(const RunConfig& rc) {
  std::ostringstream os;
  for (const auto& k : keys())
    if (k.commands & bit(rc.command)) os << "  " << k.name << " = " << k.show(rc) << "\n";
  return os.str();
}

// Refuse to clobber a non-empty directory unless asked.
void prepare_output(const RunConfig& rc) {
  const fs::path dir(rc.out_dir);
  std::error_code ec;
  if (fs::exists(dir, ec)) {
    if (!fs::is_directory(dir, ec)) throw ConfigError("output path '" + rc.out_dir + "' is not a directory");
    if (!fs::is_empty(dir, ec) && !rc.overwrite)
      throw ConfigError("output directory '" + rc.out_dir + "' is not empty; pass --overwrite to reuse it");
  }
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + rc.out_dir + "': " + ec.message());
}

void write_file(const RunConfig& rc, const std::string& name, const std::string& text) {
  const fs::path path = fs::path(rc.out_dir) / name;
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  os << text;
  if (!os) throw ResourceError("cannot write " + path.string());
}

ExperimentSetup setup_of(const RunConfig& rc) {
  ExperimentSetup e;
  e.solver = rc.solver;
  e.solver.rng_seed = rc.seed;
  e.assembly = rc.assembly;
  e.tol = rc.tol;
  return e;
}

struct Outcome {
  bool pass = true;
  bool converged = true;
};

Outcome write_reports(const RunConfig& rc, const std::vector<std::pair<std::string, std::vector<ExperimentReport>>>& files,
                      std::ostream& out) {
  Outcome o;
  std::vector<ExperimentReport> all;
  std::string summary = std::string("command ") + command_name(rc.command) + "\n" + table_text(rc) + "\n";
  for (const auto& [name, reports] : files) {
    std::ostringstream csv;
    write_bounds_csv(csv, reports);
    write_file(rc, name + ".csv", csv.str());
    for (const auto& r : reports) {
      o.pass = o.pass && r.pass;
      o.converged = o.converged && r.converged;
      summary += text_summary(r) + "\n";
      out << (r.pass ? "PASS " : "FAIL ") << r.experiment_id << " " << param_hash(r)
          << (r.converged ? "" : " (not converged)") << "\n";
      all.push_back(r);
    }
  }
  std::ostringstream m;
  write_measurements_csv(m, all);
  write_file(rc, "measurements.csv", m.str());
  write_file(rc, "summary.txt", summary);
  return o;
}

int exit_code(const Outcome& o) { return o.pass && o.converged ? 0 : 2; }

int cmd_constant(const RunConfig& rc, std::ostream& out) {
  DomainSpec dom = rc.ell > 0.0 ? cylinder(rc.ell, rc.omega1, rc.omega) : DomainSpec::box(rc.factors);
  double h = rc.h;
  if (rc.dilation != 1.0) {
    dom = dilate(dom, rc.dilation);
    h *= rc.dilation;
  }
  const double p = rc.p.front();
  const auto grid = std::make_shared<const Grid>(dom, h);
  const NonlocalOperator op =
      rc.load_weights.empty() ? assemble(grid, rc.s, p, rc.kind, rc.assembly) : read_weights(rc.load_weights, grid);
  if (op.s() != rc.s || op.p() != p || op.kind() != rc.kind)
    throw ConfigError("weight file '" + rc.load_weights + "' was built for other s, p or kind");
  SolverConfig sc = rc.solver;
  sc.rng_seed = rc.seed;
  const EigenResult res = solve(op, sc);

  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g\n", res.lambda);
  out << buf;

  std::ostringstream csv;
  csv << "name,value\r\n";
  csv << "lambda," << format_double(res.lambda) << "\r\n";
  csv << "residual," << format_double(res.residual) << "\r\n";
  csv << "iterations," << res.iterations << "\r\n";
  csv << "converged," << (res.converged ? "true" : "false") << "\r\n";
  csv << "restart_spread," << format_double(res.restart_spread) << "\r\n";
  csv << "method," << csv_field(res.method) << "\r\n";
  csv << "nodes," << grid->size() << "\r\n";
  csv << "eps," << format_double(op.eps()) << "\r\n";
  for (int k = 0; k < grid->dim(); ++k) csv << "h" << k << "," << format_double(grid->h()[k]) << "\r\n";
  write_file(rc, "result.csv", csv.str());

  std::ostringstream ef;
  for (int k = 0; k < grid->dim(); ++k) ef << "x" << k << ",";
  ef << "u\r\n";
  for (std::size_t i = 0; i < grid->size(); ++i) {
    const auto x = grid->node(i);
    for (int k = 0; k < grid->dim(); ++k) ef << format_double(x[k]) << ",";
    ef << format_double(res.eigenfunction.values[i]) << "\r\n";
  }
  write_file(rc, "eigenfunction.csv", ef.str());

  std::ostringstream sm;
  sm << "command constant\n" << table_text(rc) << "\n";
  sm << "lambda = " << format_double(res.lambda) << "\nresidual = " << format_double(res.residual)
     << "\niterations = " << res.iterations << "\nconverged = " << (res.converged ? "true" : "false")
     << "\nmethod = " << res.method << "\nnodes = " << grid->size() << "\n";
  write_file(rc, "summary.txt", sm.str());
  if (rc.save_weights) write_weights(op, (fs::path(rc.out_dir) / "weights.fpnl").string());
  return res.converged ? 0 : 2;
}

int cmd_sweep(const RunConfig& rc, std::ostream& out) {
  const auto setup = setup_of(rc);
  std::vector<ExperimentReport> mono, sand, lim;
  for (double p : rc.p) {
    mono.push_back(run_monotonicity(rc.ells, rc.omega1, rc.omega, rc.s, p, rc.h, setup));
    sand.push_back(run_sandwich(rc.ells, rc.omega1, rc.omega, rc.s, p, rc.h, setup));
    lim.push_back(run_cylinder_limit(rc.ells, rc.omega1, rc.omega, rc.s, p, rc.h, setup));
  }
  return exit_code(write_reports(rc, {{"monotonicity", mono}, {"sandwich", sand}, {"cylinder_limit", lim}}, out));
}

int cmd_verify(const RunConfig& rc, std::ostream& out) {
  const auto setup = setup_of(rc);
  const DomainSpec dom = DomainSpec::box(rc.factors);
  std::vector<std::pair<std::string, std::vector<ExperimentReport>>> files;
  for (const auto& check : rc.checks) {
    std::vector<ExperimentReport> reps;
    for (double p : rc.p) {
      if (check == "dilation") {
        for (double t : rc.t_list) reps.push_back(run_dilation(dom, t, rc.s, p, rc.h, setup));
      } else if (check == "strip") {
        reps.push_back(run_regional_strip(rc.s, p, rc.h_list, rc.widths, rc.strip_h, setup));
      } else if (check == "directional") {
        reps.push_back(run_directional(dom, rc.s, p, rc.h, rc.angular_nodes, rc.line_nodes, setup));
      } else {
        reps.push_back(run_eigen_properties(dom, rc.s, p, rc.kind, rc.h, setup));
      }
    }
    files.emplace_back(check, std::move(reps));
  }
  return exit_code(write_reports(rc, files, out));
}

int cmd_picone(const RunConfig& rc, std::ostream& out) {
  const auto setup = setup_of(rc);
  std::vector<ExperimentReport> reps;
  for (double p : rc.p) reps.push_back(run_picone(rc.trials, rc.grid_size, p, rc.seed, setup));
  return exit_code(write_reports(rc, {{"picone", reps}}, out));
}

int cmd_identities(const RunConfig& rc, std::ostream& out) {
  return exit_code(write_reports(rc, {{"identities", {run_identities(rc.identities, setup_of(rc))}}}, out));
}

}  // namespace

RunConfig make_run_config(Command c, const Config& cfg) {
  RunConfig rc = default_run_config(c);
  for (const auto& k : keys())
    if (k.commands & bit(c)) k.read(cfg, k.name, rc);
  cfg.reject_unused();
  validate(rc);
  return rc;
}

std::vector<KeyHelp> command_keys(Command c) {
  const RunConfig rc = default_run_config(c);
  std::vector<KeyHelp> out;
  for (const auto& k : keys())
    if (k.commands & bit(c)) out.push_back({k.name, k.show(rc), k.help});
  return out;
}

int run_command(const RunConfig& rc, std::ostream& out, std::ostream& err) {
  try {
    prepare_output(rc);
    if (rc.threads > 0) omp_set_num_threads(rc.threads);
    switch (rc.command) {
      case Command::Constant: return cmd_constant(rc, out);
      case Command::Sweep: return cmd_sweep(rc, out);
      case Command::Verify: return cmd_verify(rc, out);
      case Command::Picone: return cmd_picone(rc, out);
      case Command::Identities: return cmd_identities(rc, out);
    }
    return 3;
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
    return 1;
  } catch (const UsageError& e) {
    err << "configuration error: " << e.what() << "\n";
    return 1;
  } catch (const DomainError& e) {
    err << "configuration error: " << e.what() << "\n";
    return 1;
  } catch (const UnsupportedError& e) {
    err << "configuration error: " << e.what() << "\n";
    return 1;
  } catch (const ResourceError& e) {
    err << "resource error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return 3;
  }
}

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  // --section.key value / --section.key=value overrides are peeled off before CLI11 sees
  // the rest; they are the only flags whose name holds a dot.
  std::vector<std::pair<std::string, std::string>> overrides;
  std::vector<std::string> rest;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a.rfind("--", 0) == 0 && a.find('.') != std::string::npos && a.find('.') < a.find('=')) {
      const auto eq = a.find('=');
      if (eq != std::string::npos) {
        overrides.emplace_back(a.substr(2, eq - 2), a.substr(eq + 1));
      } else if (i + 1 < argc) {
        overrides.emplace_back(a.substr(2), argv[++i]);
      } else {
        err << "configuration error: " << a << " needs a value\n";
        return 1;
      }
    } else {
      rest.push_back(a);
    }
  }

  CLI::App app{"Fractional Poincare constants: solves, sweeps and checks"};
  app.require_subcommand(1);
  std::string config_path;
  int threads = -1;
  long long seed = -1;
  std::string out_dir;
  bool overwrite = false;
  app.add_option("--config", config_path, "config file of 'section.key = value' lines");
  app.add_option("--threads", threads, "thread cap (run.threads); 1 gives the golden byte stream");
  app.add_option("--seed", seed, "seed (run.seed)");
  app.add_option("--out", out_dir, "output directory (output.dir)");
  app.add_flag("--overwrite", overwrite, "reuse a non-empty output directory (output.overwrite)");
  app.fallthrough();
  app.footer("Every config key can also be given as --section.key VALUE. Keys and defaults: "
             "<command> --help.");

  const std::vector<std::pair<Command, const char*>> commands = {
      {Command::Constant, "first eigenvalue of one domain"},
      {Command::Sweep, "cylinder monotonicity, sandwich bound and limit"},
      {Command::Verify, "dilation, regional strip, directional and eigenpair checks"},
      {Command::Picone, "random Picone inequality trials"},
      {Command::Identities, "constant identities and quadrature checks"}};
  std::vector<std::pair<Command, CLI::App*>> subs;
  for (const auto& [c, desc] : commands) {
    auto* sub = app.add_subcommand(command_name(c), desc);
    std::string foot = "Config keys (defaults):\n";
    for (const auto& k : command_keys(c)) foot += "  --" + k.key + " = " + k.fallback + "    " + k.help + "\n";
    sub->footer(foot);
    subs.emplace_back(c, sub);
  }

  std::vector<std::string> reversed(rest.rbegin(), rest.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      // help for a subcommand
      for (const auto& [c, sub] : subs)
        if (sub->parsed() || std::find(rest.begin(), rest.end(), command_name(c)) != rest.end()) {
          out << sub->help();
          return 0;
        }
      out << app.help();
      return 0;
    }
    err << "configuration error: " << e.what() << "\n";
    return 1;
  }

  Command cmd = Command::Constant;
  for (const auto& [c, sub] : subs)
    if (sub->parsed()) cmd = c;

  RunConfig rc;
  try {
    Config cfg = config_path.empty() ? Config{} : Config::parse_file(config_path);
    for (const auto& [k, v] : overrides) cfg.set(k, v);
    if (threads >= 0) cfg.set("run.threads", std::to_string(threads));
    if (seed >= 0) cfg.set("run.seed", std::to_string(seed));
    if (!out_dir.empty()) cfg.set("output.dir", out_dir);
    if (overwrite) cfg.set("output.overwrite", "true");
    rc = make_run_config(cmd, cfg);
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "configuration error: " << e.what() << "\n";
    return 1;
  }
  return run_command(rc, out, err);
}

}  // namespace fpc
