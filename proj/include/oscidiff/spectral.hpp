#pragma once

// Fourier-side tooling: discrete transforms, the Wiener (ell^1-of-coefficients)
// norm, the weighted-stencil symbol gamma_k, the per-mode amplification matrix
// of the two-level scheme, the CFL-type stability check, and the conserved
// triple norm of the linearized leapfrog iteration.

#include <utility>
#include <vector>

#include "oscidiff/core.hpp"

namespace oscidiff {

// Forward transform with 1/M normalization: coefficient in slot i multiplies
// e^{2 pi i k (x - x_left)/L} where k = signed_mode(i, M).  Slot order is the
// usual FFT layout (non-negative modes first, then negative).
std::vector<Complex> dft(const ComplexField& u);

// Inverse of dft(); coef.size() must equal grid.size.
ComplexField idft(const std::vector<Complex>& coef, const TorusGrid& grid);

// Signed mode index for FFT slot i of an M-point transform (Nyquist slot maps
// to +M/2; the stencil symbol is even across the Nyquist pair).
int signed_mode(int slot, int M);

// Phase advance per mesh cell of mode k: 2 pi k / M.
double mode_phase(int k, int M);

// ell^1 norm of the dft() coefficients.
double wiener_norm(const ComplexField& u);

// Stability weight gamma(beta) = 1 + max(|beta|, 1) used in the CFL-type
// condition eps*tau < h^2/gamma.
double gamma_of_beta(double beta);

// Symbol of the weighted second-difference stencil on the mode whose phase
// advance per cell is phi:  cos(beta - phi) + beta*sin(beta - phi) - 1.
// The stencil multiplies the mode by 2*gamma.
double gamma_at_phase(double beta, double phi);

// gamma for integer mode k on the 2*pi-normalized mesh (phase advance k*h).
double gamma_k(double beta, long k, double h);

// Everything the two-level linear recurrence does to one Fourier mode.
struct ModeAnalysis {
  int k = 0;                 // signed mode index
  double gamma = 0.0;        // stencil symbol
  double mu = 0.0;           // eps*tau*gamma/h^2
  Complex lambda_plus{};     // roots of the characteristic polynomial
  Complex lambda_minus{};
  double norm_p = 0.0;       // ||P_k||_2      = sqrt(2(1+|mu|))
  double norm_p_inv = 0.0;   // ||P_k^{-1}||_2 = 1/sqrt(2(1-|mu|)), inf if |mu|>=1
  bool stable = false;       // |mu| < 1  (both roots on the unit circle)
};

// Mode analysis at a given per-cell phase advance phi.
ModeAnalysis analyze_mode_at_phase(const SchemeParams& params, double phi);

// Mode analysis for integer k on the 2*pi-normalized mesh (phi = k*h).
ModeAnalysis amplification_matrix(const SchemeParams& params, long k);

// All modes of an M-point mesh, slots 0..M-1 (phi = 2 pi k / M).
std::vector<ModeAnalysis> analyze_spectrum(const SchemeParams& params, int M);

// CFL-type check: returns (eps*tau*gamma(beta)/h^2 < 1, theta).
std::pair<bool, double> stability_check(const SchemeParams& params);

// Conserved norm of the linearized leapfrog two-level iterate
// sum_k |P_k^{-1} (hat u_next_k, hat u_curr_k)^T|_2.  Throws
// std::runtime_error("unstable mode ...") if any mode has |mu_k| >= 1.
double triple_norm(const ComplexField& u_next, const ComplexField& u_curr,
                   const SchemeParams& params);

}  // namespace oscidiff
