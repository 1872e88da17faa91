#pragma once

// Experiment runner and report emitter.
//
// A flat key-value config (dotted section names, comma lists — see README)
// describes one sweep: equation data, oscillatory phases, scheme, mesh lists,
// time-step rule, and the reference used to measure errors.  run_experiment
// executes every (epsilon, h) cell — adjust the wave numbers to the grid,
// sample the initial data, step to the final time, assemble, compare — and
// collects an ErrorReport that emit_csv / emit_svg render deterministically.
// Failed cells carry an error tag instead of aborting the sweep.
//
// Reports for the stability analysis, the resonance enumeration, and the
// defect-scaling study are emitted as CSV by the corresponding subcommands.

#include <functional>
#include <string>
#include <vector>

#include "oscidiff/core.hpp"

namespace oscidiff {

// ---------------------------------------------------------------------------
// Configuration.
// ---------------------------------------------------------------------------

struct ProfileSpec {
  enum class Kind { kGaussian, kConstant };
  Kind kind = Kind::kGaussian;
  // gaussian{center,width,amplitude}: amplitude * exp(-((x-center)/width)^2)
  double center = 0.0;
  double width = 1.0;
  double amplitude = 1.0;
  // constant{c}
  double value = 1.0;

  std::function<Complex(double)> make() const;
};

struct PhaseSpec {
  double kappa = 0.0;
  ProfileSpec profile;
};

enum class SchemeKind {
  kWlf,           // weighted leapfrog, single phase
  kWcn,           // weighted Crank-Nicolson, single phase
  kTwoPhase,      // explicitly written two-mode leapfrog, case 0..3
  kMultiphaseLf,  // general weighted leapfrog with chi switching
  kMultiphaseCn,  // general weighted Crank-Nicolson with chi switching
  kStandardLf,    // classical leapfrog baseline
  kStandardCn,    // classical Crank-Nicolson baseline
};

enum class TauRule { kFixed, kHalfH, kCfl };
enum class GammaArg { kBeta, kThreeBeta, kMax };
enum class ReferenceKind { kOracle, kMfe, kClosedForm };

struct ExperimentConfig {
  std::vector<double> epsilons;  // equation.epsilon (comma list)
  double lambda = 1.0;           // equation.lambda
  double x_left = -6.0;          // equation.x_left
  double length = 12.0;          // equation.length
  double T = 0.5;                // equation.T

  std::vector<PhaseSpec> phases;  // phase.<n>.kappa / phase.<n>.profile

  SchemeKind scheme = SchemeKind::kWlf;  // scheme
  int tp_case = 3;                       // encoded in two_phase_case<n>

  std::vector<double> hs;            // grid.h (comma list)
  TauRule tau_rule = TauRule::kCfl;  // time.rule = fixed | h/2 | cfl
  double tau_fixed = 0.0;            // time.tau (required for fixed)
  GammaArg gamma_arg = GammaArg::kMax;  // time.gamma = beta | 3beta | max

  double chi_c = 5.0;  // chi.c, the mesh-resolution switching constant

  ReferenceKind reference = ReferenceKind::kOracle;  // reference.kind
  int oracle_steps = 256;    // reference.steps: initial oracle step count
  double oracle_tol = 1e-8;  // reference.tol: oracle self-convergence target
  int mfe_modes = 256;       // reference.modes: envelope grid size

  std::string out_csv;  // output.csv
  std::string out_svg;  // output.svg
};

// Parses the config text / file.  Throws std::invalid_argument naming the
// offending key on unknown keys, missing required keys, malformed values, or
// unsatisfiable combinations (e.g. a fixed tau rule without time.tau).
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

// Canonical token for the scheme (what the CSV scheme column carries).
std::string scheme_name(const ExperimentConfig& config);
std::string reference_name(ReferenceKind kind);

// ---------------------------------------------------------------------------
// Sweep results.
// ---------------------------------------------------------------------------

struct ErrorRow {
  double epsilon = 0.0;
  double h = 0.0;
  double tau = 0.0;
  std::string scheme;
  std::string reference;
  double linf_error = 0.0;
  double wiener_error = 0.0;
  double runtime_s = 0.0;  // wall time of the scheme integration (not bytes-reproducible)
  double theta = 0.0;      // stability quantity eps*tau*gamma/h^2 of the cell
  int chi = 0;             // regime switch of the cell (0 for single-phase schemes)
  std::string error;       // empty on success, tag on failure
};

struct ErrorReport {
  std::vector<ErrorRow> rows;
};

// Runs every (epsilon, h) cell.  References are prepared once per epsilon and
// shared across the h list (oracle grids refine all configured meshes).  With
// jobs > 1 the cells execute on a small worker pool; the row order is always
// (epsilon in config order) x (h in config order), independent of jobs.
// Throws only on configuration-level errors; per-cell failures land in the
// row's error tag.
ErrorReport run_experiment(const ExperimentConfig& config, int jobs = 1);

// CSV with the exact header
//   epsilon,h,tau,scheme,reference,linf_error,wiener_error,runtime_s,theta,chi
// All numeric fields are written with round-trip precision; failed rows carry
// "error[<tag>]" in the linf_error column and nan in wiener_error.
std::string to_csv(const ErrorReport& report);
ErrorReport parse_csv(const std::string& text);

// Deterministic log-log SVG: linf_error vs epsilon, one polyline per distinct
// h, decade gridlines, labeled axes.  Failed rows and nonpositive errors are
// skipped.
std::string to_svg(const ErrorReport& report);

void emit_csv(const ErrorReport& report, const std::string& path);
void emit_svg(const ErrorReport& report, const std::string& path);

// ---------------------------------------------------------------------------
// Subcommand reports.
// ---------------------------------------------------------------------------

// Per-mode linear stability table of the single-phase weighted leapfrog for
// every (epsilon, h) in the config:
//   epsilon,h,tau,k,mu,abs_lambda_plus,abs_lambda_minus,stable
std::string stability_csv(const ExperimentConfig& config);

// Saturation + channel table for the given carrier wave numbers (dim
// components per vector):
//   kind,kappa,omega,omega_star,delta,i,j,k
// with one carrier row per element of K and one channel row per element of N.
std::string resonance_csv(const std::vector<double>& kappas, int dim = 1);

// (tau, h)-halving table of the scheme defect on the constant-profile exact
// solution, one block per configured epsilon:
//   epsilon,level,h,tau,max_defect,wiener_defect,max_defect_over_eps
// Requires a single constant-profile phase.  If fitted_order is non-null it
// receives the per-epsilon least-squares slope of log(max_defect) against
// log(h), averaged over the epsilon list (the observed halving order).
std::string defect_csv(const ExperimentConfig& config, int levels = 4,
                       double* fitted_order = nullptr);

// ---------------------------------------------------------------------------
// Entry point (argv interface; used by the oscidiff binary and the tests).
// Exit codes: 0 full success, 1 config/usage error, 2 partial sweep failure.
// ---------------------------------------------------------------------------

int cli_main(int argc, const char* const* argv);

}  // namespace oscidiff
