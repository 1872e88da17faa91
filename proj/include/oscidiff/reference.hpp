#pragma once

// Reference solutions used to measure the error of the discrete schemes:
//
//  * solve_modulation integrates the slowly varying envelope system that the
//    oscillatory solution rides on: advected cubic Schroedinger equations for
//    the carrier envelopes a_r, algebraic responses b_nu on the nonresonant
//    combination channels, and freely advected corrections b*_nu.  All of
//    these functions are smooth uniformly in epsilon, so a coarse spectral
//    grid and a step-doubling self-convergence check give oracle accuracy.
//
//  * assemble_mfe evaluates the oscillatory sum
//      sum_r a_r e^{i(kappa_r x - omega_r t)/eps}
//        + eps*lambda * sum_nu b*_nu e^{i(kappa_nu x - omega*_nu t)/eps}
//        + eps*lambda * sum_nu b_nu  e^{i(kappa_nu x - omega_nu  t)/eps}
//    on an arbitrary grid by trigonometric interpolation of the envelopes.
//
//  * splitstep_oracle solves the full equation by Strang-split Fourier
//    stepping on a grid fine enough to resolve the eps-oscillations.
//
//  * standard_lf_* / standard_cn_step are the classical (unweighted) finite
//    difference schemes, the alpha = beta = 0 limit of the weighted ones,
//    kept as an independent baseline.

#include <functional>
#include <string>
#include <vector>

#include "oscidiff/core.hpp"
#include "oscidiff/resonance.hpp"
#include "oscidiff/single_phase.hpp"

namespace oscidiff {

struct ModulationOptions {
  int modes = 256;          // spatial modes of the envelope grid
  int steps = 2048;         // initial number of time steps over [0, T]
  int max_doublings = 10;   // refinement budget; 0 accepts `steps` unchecked
  double self_tol = 1e-9;   // required agreement between n and 2n steps
  double blowup_cap = 1e6;  // sup-norm cap on the carrier envelopes
  std::vector<double> store_times;  // snapshot times; default 9 evenly spaced
};

// Envelope trajectories at the stored snapshot times: per carrier the
// envelope a_r, per combination channel the algebraic response
// b_nu = (1/delta_nu) a_k conj(a_l) a_m and the free correction b*_nu with
// b*_nu(0) = -b_nu(0).
struct ModulationSolution {
  ResonanceStructure rs;
  TorusGrid grid;  // envelope grid (modes nodes on the problem domain)
  double epsilon = 0.0;
  double lambda = 0.0;
  double T = 0.0;
  int seeded = 0;             // carriers with given initial envelopes
  double tau_mod = 0.0;       // accepted time step of the final run
  double self_residual = 0.0; // measured step-halving difference (-1 if unchecked)
  std::vector<double> times;
  std::vector<std::vector<ComplexField>> a;   // [time][r]
  std::vector<std::vector<ComplexField>> b;   // [time][nu]
  std::vector<std::vector<ComplexField>> bs;  // [time][nu]

  // Index of a stored snapshot time.  Throws std::out_of_range for t beyond
  // the solved range and std::invalid_argument for an unstored interior time.
  int time_index(double t) const;
};

// Integrates the coupled envelope system on [0, T] over the domain box of
// `domain` (only its extent is used; the node count comes from options):
//
//   d_t a_r + kappa_r d_x a_r - (i eps/2) d_x^2 a_r
//     = -i lambda     sum_{resonant (k,l,m) -> r} a_k conj(a_l) a_m
//       -2i eps lambda^2 sum_{direct} b_nu conj(a_p) a_q
//       - i eps lambda^2 sum_{conjugate} a_p conj(b_nu) a_q,
//   d_t b*_nu + kappa_nu d_x b*_nu - (i eps/2) d_x^2 b*_nu
//     = -2i lambda (sum_r |a_r|^2) b*_nu,
//
// with b_nu eliminated algebraically, a_r(0) given for the seeded carriers
// and zero beyond, and b*_nu(0) = -b_nu(0).  The integrator is a Strang
// splitting: the advection-dispersion factor is applied as an exact
// per-mode exponential, the nonlinear factor by the explicit midpoint rule.
// The step count is doubled until two consecutive runs agree to self_tol.
//
// Throws std::invalid_argument for inconsistent input (profile count,
// non-1-D wave vectors, violated nonresonance condition) and
// std::runtime_error for near-resonant detunings, "modulation blow-up" when
// an envelope exceeds the cap, and "self-convergence failure" when the
// doubling budget is exhausted.
ModulationSolution solve_modulation(
    const ResonanceStructure& rs,
    const std::vector<std::function<Complex(double)>>& profiles,
    const TorusGrid& domain, double epsilon, double lambda, double T,
    const ModulationOptions& opts = {});

// Samples the modulated sum at a stored time t on the requested grid, which
// must live on the same domain box.  epsilon must be positive (it enters the
// phases); it normally equals ms.epsilon.
ComplexField assemble_mfe(const ModulationSolution& ms, double t,
                          const TorusGrid& grid, double epsilon);

// Trigonometric interpolation of a periodic grid function onto another grid
// over the same domain box.  Exact (up to roundoff) when target nodes
// coincide with source nodes.
ComplexField eval_trig(const ComplexField& coarse, const TorusGrid& target);

// Fine reference grid for the split-step solver: the coarsest refinement of
// `coarse` whose spacing is at most min(eps/8, h/4), capped at 2^20 nodes.
// The returned node set contains the nodes of `coarse`.
TorusGrid oracle_grid(const TorusGrid& coarse, double epsilon);

// Restriction of a fine-grid field to a coarser grid whose nodes form a
// subset of the fine nodes.  Throws std::invalid_argument otherwise.
ComplexField restrict_to(const ComplexField& fine, const TorusGrid& coarse);

// Strang-split Fourier solution of the full equation at time T:
// exact per-mode solve of the free part alternated with the exact pointwise
// phase rotation u -> u e^{-i lambda |u|^2 s} of the nonlinear part.
// Requires h <= eps/8.  Starting from `steps` time steps, the step count is
// doubled until halving changes the result by less than self_tol in the
// maximum norm; the finer result is returned.  Results are cached in the
// directory named by the OSCIDIFF_CACHE environment variable when set.
ComplexField splitstep_oracle(const ComplexField& u0, double epsilon,
                              double lambda, double T, int steps,
                              double self_tol = 1e-8);

// Classical leapfrog scheme (plain central differences, no exponential
// weights): the kappa = 0 limit of the weighted scheme, independently coded.
// The returned state carries kappa = 0 in its parameters.
LeapfrogState standard_lf_start(const ComplexField& u0,
                                const SchemeParams& params);
void standard_lf_step(LeapfrogState& state);

// Classical Crank-Nicolson step: delegates to the shared level solver with
// zero weight angles.  The state's parameters must have kappa = 0.
void standard_cn_step(CnState& state);

// Binary field cache.  reference_cache_dir() reads OSCIDIFF_CACHE (empty
// when unset, which disables caching).  Load returns false when the entry is
// missing or malformed; store is best-effort and never throws.
std::string reference_cache_dir();
std::string oracle_cache_key(const ComplexField& u0, double epsilon,
                             double lambda, double T, int steps,
                             double self_tol);
bool cache_load_field(const std::string& dir, const std::string& key,
                      ComplexField& out);
void cache_store_field(const std::string& dir, const std::string& key,
                       const ComplexField& f);

}  // namespace oscidiff
