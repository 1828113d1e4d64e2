#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "fpc/assembly.hpp"
#include "fpc/config.hpp"
#include "fpc/eigensolver.hpp"
#include "fpc/experiments.hpp"

namespace fpc {

enum class Command { Constant, Sweep, Verify, Picone, Identities };

const char* command_name(Command c);

// Everything a command needs, with the defaults that reproduce the acceptance runs.
struct RunConfig {
  Command command = Command::Constant;

  // domain: a box from `factors`, or the cylinder ell*omega1 x omega when ell > 0,
  // then dilated by `dilation`. sweep uses ells/omega1/omega.
  std::vector<Interval> factors{{-1.0, 1.0}};
  double ell = 0.0;
  std::vector<Interval> omega1{{-1.0, 1.0}};
  std::vector<Interval> omega{{-1.0, 1.0}};
  std::vector<double> ells{2.0, 4.0, 8.0, 16.0};
  double dilation = 1.0;

  double s = 0.5;
  std::vector<double> p{2.0};
  SeminormKind kind = SeminormKind::Dirichlet;
  double h = 1.0 / 128.0;

  SolverConfig solver;
  AssemblyConfig assembly;
  Tolerances tol;
  std::string load_weights;   // FPNL file to read instead of assembling (constant)
  bool save_weights = false;  // write weights.fpnl into the output directory (constant)

  std::string out_dir;
  bool overwrite = false;
  int threads = 0;  // 0 = OpenMP default
  std::uint64_t seed = 7;

  // verify
  std::vector<std::string> checks{"dilation"};
  std::vector<double> t_list{0.5, 2.0};
  std::vector<double> h_list{1.0 / 32, 1.0 / 64, 1.0 / 128, 1.0 / 256};
  std::vector<double> widths{1.0, 2.0, 4.0};
  double strip_h = 1.0 / 16.0;
  int angular_nodes = 256;
  int line_nodes = 256;

  // picone
  int trials = 10000;
  int grid_size = 32;

  IdentityGrid identities;
};

RunConfig default_run_config(Command c);

// Reads every key the command understands; unknown keys are configuration errors.
RunConfig make_run_config(Command c, const Config& cfg);

struct KeyHelp {
  std::string key;
  std::string fallback;
  std::string help;
};
std::vector<KeyHelp> command_keys(Command c);

// Runs a command and writes its files; returns the process exit code
// (0 pass, 1 configuration error, 2 non-convergence or a failed check, 3 internal error).
int run_command(const RunConfig& rc, std::ostream& out, std::ostream& err);

// Full front end: flags, config file, overrides, dispatch.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace fpc
