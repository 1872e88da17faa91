#pragma once

// Multiphase weighted steppers.  The solution is approximated by the ansatz
//
//   u(t_n, x_j) ~ sum_r u_[r],j^n + sum_nu w*_[nu],j^n + sum_nu w_[nu],j^n,
//
// where each carrier component u_[r] rides the free wave (kappa_r, omega_r =
// kappa_r^2/2), each w*_[nu] is a freely propagating correction on the
// combination wave number kappa_nu with free frequency omega*_nu =
// kappa_nu^2/2, and each w_[nu] is an algebraically slaved response at the
// driving frequency omega_nu = omega_k - omega_l + omega_m.  Every evolved
// channel is advanced by the weighted leapfrog / Crank-Nicolson operator with
// its own exponential weights (alpha, beta); the cross couplings between
// channels are dictated by the index sets of a saturated ResonanceStructure.

#include <functional>
#include <vector>

#include "oscidiff/core.hpp"
#include "oscidiff/resonance.hpp"

namespace oscidiff {

// Oscillation filter: 1 when the mesh resolves the epsilon-oscillations well
// enough that the plain coupled scheme is preferable (h^2 <= c eps^5), else 0.
int chi_switch(double h, double epsilon, double c);

// Weighted leapfrog finite difference operator evaluated on a level triple:
//   i eps (e^{i alpha} u_next - e^{-i alpha} u_prev)/(2 tau)
//     + (eps^2 / 2 h^2) S_beta(u_curr).
// Used to form residuals in tests; the steppers use its rearranged form.
ComplexField dlf_apply(const ComplexField& u_prev, const ComplexField& u_curr,
                       const ComplexField& u_next, double alpha, double beta,
                       double epsilon, double tau);

// One cubic interaction u_k conj(u_l) u_m between carrier components
// (0-based indices into the carrier list).
struct TripleTerm {
  int k = 0, l = 0, m = 0;
};

// One filtered interaction u_k conj(u_l) u_r (the r factor is implicit: the
// term lives in equation r and is switched by chi).
struct PairTerm {
  int k = 0, l = 0;
};

// One coupling through a slaved channel: w_nu conj(u_p) u_q (direct) or
// u_p conj(w_nu) u_q (conjugate).  nu indexes the nonresonant triple list.
struct SlaveTerm {
  int nu = 0, p = 0, q = 0;
};

// Right-hand-side term sets for one carrier equation.
struct CarrierTerms {
  std::vector<TripleTerm> resonant;  // frequency-matched cubic products
  std::vector<PairTerm> chi_pairs;   // nonresonant products kept when chi = 1
  std::vector<SlaveTerm> w_direct;   // 2 w_nu conj(u_p) u_q
  std::vector<SlaveTerm> w_conj;     // u_p conj(w_nu) u_q
};

// Enumerates the interaction index sets of a saturated one-dimensional
// ResonanceStructure, one CarrierTerms per carrier: resonant ordered triples
// are routed to the carrier whose wave number matches their combination,
// nonresonant triples to the chi term of their third factor and, through the
// slaved channels, to every wave-number-matching carrier equation.  Throws
// std::invalid_argument for non-1-D input or when a resonant combination has
// no matching carrier (unsaturated input).  Shared by the discrete steppers
// and the envelope-system solver.
std::vector<CarrierTerms> build_carrier_terms(const ResonanceStructure& rs);

// Immutable description of the general multiphase scheme on one grid: channel
// wave numbers and frequencies, the precomputed interaction index sets, and
// the shared discretization parameters.  Build with make_multiphase_scheme.
struct MultiphaseScheme {
  TorusGrid grid;
  double epsilon = 1.0;
  double lambda = 0.0;
  double tau = 0.0;
  int chi = 0;     // 0 or 1
  int seeded = 0;  // carriers with initial data; the rest start at zero

  std::vector<double> kappa_u;  // carrier wave numbers (0-based over r)
  std::vector<double> omega_u;  // omega_r = kappa_r^2 / 2
  std::vector<NuTriple> nus;    // nonresonant triples (channel list)
  std::vector<CarrierTerms> terms;

  int R() const { return static_cast<int>(kappa_u.size()); }
  int W() const { return static_cast<int>(nus.size()); }
  double h() const { return grid.h(); }

  double alpha_u(int r) const { return omega_u[static_cast<size_t>(r)] * tau / epsilon; }
  double beta_u(int r) const { return kappa_u[static_cast<size_t>(r)] * grid.h() / epsilon; }
  // Free correction w*_nu: free dispersion frequency omega*_nu = kappa_nu^2/2.
  double alpha_ws(int nu) const { return nus[static_cast<size_t>(nu)].omega_star * tau / epsilon; }
  // Slaved response w_nu: driving frequency omega_nu (enters only through the
  // Crank-Nicolson weighted averages; w_nu itself is never time stepped).
  double alpha_w(int nu) const { return nus[static_cast<size_t>(nu)].omega * tau / epsilon; }
  double beta_w(int nu) const {
    return nus[static_cast<size_t>(nu)].kappa.components[0] * grid.h() / epsilon;
  }

  // Parameter bundle for the shared level-advance kernels (kappa is the
  // channel's own wave number; alpha/beta are passed explicitly anyway).
  SchemeParams channel_params(double kappa) const {
    return SchemeParams{epsilon, lambda, kappa, tau, grid.h()};
  }
};

// Builds the scheme description from a saturated one-dimensional
// ResonanceStructure: extracts channel data, forms the interaction index sets
// (resonant triples routed to the carrier whose wave number matches their
// combination, nonresonant triples to their chi term and slaved-channel
// couplings), and validates the detunings.  Throws std::invalid_argument for
// non-1-D input or invalid discretization parameters, and std::runtime_error
// ("near-resonant detuning ...") when some |delta_nu| < 1e-6, since the
// slaved amplitudes carry 1/delta_nu.
MultiphaseScheme make_multiphase_scheme(const ResonanceStructure& rs,
                                        const TorusGrid& grid, double epsilon,
                                        double lambda, double tau, int chi);

// Largest of eps*tau*gamma(beta_mu)/h^2 over all evolved channels
// (carriers and corrections); the general leapfrog scheme requires this to
// be < 1.
double multiphase_theta(const MultiphaseScheme& scheme);

// Same quotient restricted to the carrier channels; this is the bound the
// explicit two-mode case schemes enforce.
double carrier_theta(const MultiphaseScheme& scheme);

// Two stored levels of every evolved channel plus the slaved responses.
struct MultiphaseLfState {
  MultiphaseScheme scheme;
  std::vector<ComplexField> u_prev, u_curr;    // carriers
  std::vector<ComplexField> w_prev, w_curr;    // slaved responses
  std::vector<ComplexField> ws_prev, ws_curr;  // free corrections
  int n = 0;

  double t() const { return scheme.tau * static_cast<double>(n); }
};

// Initial data plus one weighted Euler starting step per evolved channel:
//   u_[r](0) = a0_r(x) e^{i kappa_r x / eps} for seeded carriers, 0 beyond;
//   w_[nu](0) slaved, w*_[nu](0) = -w_[nu](0).
// profiles must have exactly scheme.seeded entries.  Throws
// std::runtime_error on a violated leapfrog stability bound
// (eps*tau >= h^2/gamma(beta_mu) for some channel mu).
MultiphaseLfState multiphase_lf_start(
    const MultiphaseScheme& scheme,
    const std::vector<std::function<Complex(double)>>& profiles);

// One step of the general weighted leapfrog scheme: every carrier and free
// correction advances through its own weighted leapfrog relation with the
// coupled right-hand sides, then the slaved responses are refreshed at the
// new level.
void multiphase_lf_step(MultiphaseLfState& state);

// Single stored level for the Crank-Nicolson variant.
struct MultiphaseCnState {
  MultiphaseScheme scheme;
  std::vector<ComplexField> u_curr, w_curr, ws_curr;
  int n = 0;
  double fp_tol = 1e-12;
  int fp_maxit = 50;

  double t() const { return scheme.tau * static_cast<double>(n); }
};

// Initial data for the Crank-Nicolson variant (no starting step needed).
MultiphaseCnState multiphase_cn_start(
    const MultiphaseScheme& scheme,
    const std::vector<std::function<Complex(double)>>& profiles);

// One implicit step: the modulus-type resonant products become level-averaged
// coefficients (|u_l^n|^2 + |u_l^{n+1}|^2)/2 of the weighted average of the
// carrier, all remaining products are formed from the weighted averages of
// their factors, and the coupled system is resolved by an outer Picard
// iteration around the shared per-channel solver.  Throws std::runtime_error
// ("fixed-point non-convergence ...") on budget exhaustion.
void multiphase_cn_step(MultiphaseCnState& state);

// Pointwise sum of all component fields at the current level.
ComplexField assemble_solution(const MultiphaseLfState& state);
ComplexField assemble_solution(const MultiphaseCnState& state);

// The explicitly written two-mode schemes for opposite wave numbers
// kappa_{1,2} = +-kappa, as a cross-check on the index machinery above:
//   case 0: naive coupling        eps*lambda*|u_1 + u_2|^2 u_r,
//   case 1: separated phases      (|u_1|^2 + 2|u_2|^2 + u_1 conj(u_2)) u_1,
//   case 2: filtered              (|u_1|^2 + 2|u_2|^2) u_1,
//   case 3: filtered + slaved corrections on the +-3 kappa combination waves.
// The scheme must come from saturate({+kappa, -kappa}) with chi = 0.
// two_phase_start leaves the correction channels identically zero for cases
// 0-2.  Throws like multiphase_lf_start, except that the stability gate
// covers the carrier pair only (carrier_theta < 1): the reference runs for
// these schemes use carrier-scaled steps, and over the short horizons they
// cover the formally unstable +-3 kappa channels of case 3 grow only from
// roundoff and stay far below the scheme's own error.
MultiphaseLfState two_phase_start(
    const MultiphaseScheme& scheme,
    const std::vector<std::function<Complex(double)>>& profiles, int tp_case);

// One leapfrog step of the selected two-mode scheme.
void two_phase_step_case(int tp_case, MultiphaseLfState& state);

}  // namespace oscidiff
