#pragma once

// Single-phase weighted time steppers.  The schemes difference only the slow
// modulation: the fast carrier e^{i(kappa x - omega t)/eps} is absorbed into
// exponential weights e^{+-i alpha}, e^{+-i beta} on the standard leapfrog /
// Crank-Nicolson stencils (alpha = omega tau/eps, beta = kappa h/eps).

#include <functional>

#include "oscidiff/core.hpp"

namespace oscidiff {

// Weighted second difference
//   S_beta(u)_j = e^{-i beta}(1+i beta) u_{j+1} - 2 u_j + e^{i beta}(1-i beta) u_{j-1}.
// Its Fourier symbol is 2*gamma_at_phase(beta, phi); it annihilates the plane
// wave whose per-cell phase advance equals beta.
ComplexField weighted_stencil(const ComplexField& u, double beta);

// Solves the two-level weighted leapfrog relation for the new top level:
//   i eps (e^{i a} u_next - e^{-i a} u_prev)/(2 tau) + (eps^2/2h^2) S_b(u_curr) = rhs,
// i.e.  u_next = e^{-i a} [ e^{-i a} u_prev + (i tau eps / h^2) S_b(u_curr)
//                           - (2 i tau / eps) rhs ].
ComplexField lf_advance(const ComplexField& u_prev, const ComplexField& u_curr,
                        const ComplexField& rhs, double alpha, double beta,
                        const SchemeParams& params);

// Solves the one-sided weighted Euler starting relation for the first level:
//   i eps (e^{i a} u1 - u0)/tau + (eps^2/2h^2) S_b(u0) = rhs,
// i.e.  u1 = e^{-i a} [ u0 + (i tau eps / 2h^2) S_b(u0) - (i tau / eps) rhs ].
ComplexField euler_start(const ComplexField& u0, const ComplexField& rhs,
                         double alpha, double beta, const SchemeParams& params);

// Two stored levels of the leapfrog iteration; u_curr is the solution at
// step index n.
struct LeapfrogState {
  SchemeParams params;
  ComplexField u_prev;  // step n-1
  ComplexField u_curr;  // step n
  int n = 0;

  double t() const { return params.tau * static_cast<double>(n); }
};

// Weighted Euler starting step: builds (u^0, u^1) from the initial data.
LeapfrogState wlf_start(const ComplexField& u0, const SchemeParams& params);

// One weighted leapfrog step with the cubic right-hand side
// rhs = eps*lambda*|u^n|^2 u^n.  Advances the state in place.
void wlf_step(LeapfrogState& state);

// Single stored level of the Crank-Nicolson iteration.
struct CnState {
  SchemeParams params;
  ComplexField u_curr;  // step n
  int n = 0;
  double fp_tol = 1e-12;
  int fp_maxit = 50;

  double t() const { return params.tau * static_cast<double>(n); }
};

// Implicit weighted Crank-Nicolson step over one tau (the two-level scheme
// applied with halved step, so the tilde average couples steps n and n+1 with
// half-angle weights e^{+-i alpha/2}).  The nonlinear coefficient
// (|u^n|^2 + |u^{n+1}|^2)/2 is resolved by an outer Picard iteration; each
// frozen-coefficient linear problem is solved by a fixed-point splitting that
// inverts the stencil part exactly in Fourier space.  Throws
// std::runtime_error("fixed-point non-convergence ...") on budget exhaustion.
void wcn_step(CnState& state);

// Shared implicit kernel (also used by the multiphase Crank-Nicolson scheme):
// solves for v in
//   (i eps/tau)(e^{i a} v - e^{-i a} u) + (eps^2/2h^2) S_b(m) = F + G .* m,
// where m = (e^{i a} v + e^{-i a} u)/2 is the weighted average, F collects
// fully frozen right-hand-side terms and G the (frozen) coefficient of m.
ComplexField cn_solve_level(const ComplexField& u, const ComplexField& F,
                            const ComplexField& G, double alpha, double beta,
                            const SchemeParams& params, double fp_tol,
                            int fp_maxit);

// Defect of the weighted leapfrog scheme on the exact modulated solution
// u(t,x) = a_exact(t,x) e^{i(kappa x - omega t)/eps}: inserts u into the
// scheme at time t and returns the residual field.  a_exact must be
// L-periodic in x.
ComplexField compute_defect(const std::function<Complex(double, double)>& a_exact,
                            const SchemeParams& params, const TorusGrid& grid,
                            double t);

}  // namespace oscidiff
