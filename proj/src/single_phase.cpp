#include "oscidiff/single_phase.hpp"

#include <cmath>
#include <utility>
#include <stdexcept>
#include <string>

#include "oscidiff/spectral.hpp"

namespace oscidiff {

ComplexField weighted_stencil(const ComplexField& u, double beta) {
  const Complex wp = std::polar(1.0, -beta) * Complex{1.0, beta};   // e^{-ib}(1+ib)
  const Complex wm = std::polar(1.0, beta) * Complex{1.0, -beta};   // e^{+ib}(1-ib)
  ComplexField s(u.grid());
  const int M = u.size();
  for (int j = 0; j < M; ++j) {
    s[j] = wp * u.at(j + 1) - 2.0 * u[j] + wm * u.at(j - 1);
  }
  return s;
}

ComplexField lf_advance(const ComplexField& u_prev, const ComplexField& u_curr,
                        const ComplexField& rhs, double alpha, double beta,
                        const SchemeParams& params) {
  const double tau = params.tau;
  const double eps = params.epsilon;
  const Complex back = std::polar(1.0, -alpha);
  const Complex c_stencil = kI * tau * eps / (params.h * params.h);
  const Complex c_rhs = -2.0 * kI * tau / eps;
  const ComplexField s = weighted_stencil(u_curr, beta);
  ComplexField next(u_curr.grid());
  for (int j = 0; j < next.size(); ++j) {
    next[j] = back * (back * u_prev[j] + c_stencil * s[j] + c_rhs * rhs[j]);
  }
  return next;
}

ComplexField euler_start(const ComplexField& u0, const ComplexField& rhs,
                         double alpha, double beta, const SchemeParams& params) {
  const double tau = params.tau;
  const double eps = params.epsilon;
  const Complex back = std::polar(1.0, -alpha);
  const Complex c_stencil = kI * tau * eps / (2.0 * params.h * params.h);
  const Complex c_rhs = -kI * tau / eps;
  const ComplexField s = weighted_stencil(u0, beta);
  ComplexField u1(u0.grid());
  for (int j = 0; j < u1.size(); ++j) {
    u1[j] = back * (u0[j] + c_stencil * s[j] + c_rhs * rhs[j]);
  }
  return u1;
}

namespace {

// eps*lambda*|u|^2 u, the cubic right-hand side of the single-phase schemes.
ComplexField cubic_rhs(const ComplexField& u, const SchemeParams& params) {
  ComplexField rhs(u.grid());
  const double c = params.epsilon * params.lambda;
  for (int j = 0; j < u.size(); ++j) {
    rhs[j] = c * std::norm(u[j]) * u[j];
  }
  return rhs;
}

}  // namespace

LeapfrogState wlf_start(const ComplexField& u0, const SchemeParams& params) {
  validate(params);
  LeapfrogState state;
  state.params = params;
  state.u_prev = u0;
  state.u_curr =
      euler_start(u0, cubic_rhs(u0, params), params.alpha(), params.beta(), params);
  state.n = 1;
  return state;
}

void wlf_step(LeapfrogState& state) {
  const SchemeParams& p = state.params;
  ComplexField next = lf_advance(state.u_prev, state.u_curr,
                                 cubic_rhs(state.u_curr, p), p.alpha(), p.beta(), p);
  state.u_prev = std::move(state.u_curr);
  state.u_curr = std::move(next);
  ++state.n;
}

ComplexField cn_solve_level(const ComplexField& u, const ComplexField& F,
                            const ComplexField& G, double alpha, double beta,
                            const SchemeParams& params, double fp_tol,
                            int fp_maxit) {
  const TorusGrid& grid = u.grid();
  const int M = grid.size;
  const double eps = params.epsilon;
  const double tau = params.tau;
  const Complex it = kI * eps / tau;

  // Diagonal (Fourier) part of the implicit operator and the frozen data
  //   D_k = i eps/tau + eps^2 gamma_k/(2h^2),
  //   b_k = (i eps/tau - eps^2 gamma_k/(2h^2)) c_k + (F + G.*c/2)_k,
  // where c = e^{-i alpha} u is the weighted lower level.
  ComplexField c(grid);
  const Complex back = std::polar(1.0, -alpha);
  for (int j = 0; j < M; ++j) c[j] = back * u[j];

  std::vector<Complex> chat = dft(c);
  std::vector<Complex> D(static_cast<size_t>(M));
  std::vector<Complex> bhat(static_cast<size_t>(M));
  {
    ComplexField fc(grid);
    for (int j = 0; j < M; ++j) fc[j] = F[j] + 0.5 * G[j] * c[j];
    std::vector<Complex> fchat = dft(fc);
    const double s = eps * eps / (2.0 * params.h * params.h);
    for (int slot = 0; slot < M; ++slot) {
      const double g = gamma_at_phase(beta, mode_phase(signed_mode(slot, M), M));
      D[static_cast<size_t>(slot)] = it + s * g;
      bhat[static_cast<size_t>(slot)] =
          (it - s * g) * chat[static_cast<size_t>(slot)] +
          fchat[static_cast<size_t>(slot)];
    }
  }

  // Fixed-point splitting on y = e^{i alpha} v:  y <- D^{-1}[b + (G/2).*y].
  ComplexField y = u;  // initial guess: carry the lower level forward
  const double scale = std::max(1.0, linf_norm(u));
  for (int it_count = 0; it_count < fp_maxit; ++it_count) {
    ComplexField gy(grid);
    for (int j = 0; j < M; ++j) gy[j] = 0.5 * G[j] * y[j];
    std::vector<Complex> rhs_hat = dft(gy);
    for (int slot = 0; slot < M; ++slot) {
      rhs_hat[static_cast<size_t>(slot)] =
          (bhat[static_cast<size_t>(slot)] + rhs_hat[static_cast<size_t>(slot)]) /
          D[static_cast<size_t>(slot)];
    }
    ComplexField y_new = idft(rhs_hat, grid);
    const double diff = linf_error(y_new, y);
    y = std::move(y_new);
    if (diff <= fp_tol * scale) {
      ComplexField v(grid);
      for (int j = 0; j < M; ++j) v[j] = back * y[j];
      return v;
    }
  }
  throw std::runtime_error("fixed-point non-convergence in cn_solve_level after " +
                           std::to_string(fp_maxit) + " iterations");
}

void wcn_step(CnState& state) {
  const SchemeParams& p = state.params;
  validate(p);
  const TorusGrid& grid = state.u_curr.grid();
  const int M = grid.size;
  const double half_alpha = 0.5 * p.alpha();
  const double scale = std::max(1.0, linf_norm(state.u_curr));
  const ComplexField zero(grid);

  // Outer Picard iteration on the frozen modulus coefficient
  // G = eps*lambda*(|u^n|^2 + |v|^2)/2.
  ComplexField v = state.u_curr;
  for (int outer = 0; outer < state.fp_maxit; ++outer) {
    ComplexField G(grid);
    const double cl = p.epsilon * p.lambda;
    for (int j = 0; j < M; ++j) {
      G[j] = cl * 0.5 * (std::norm(state.u_curr[j]) + std::norm(v[j]));
    }
    ComplexField v_new = cn_solve_level(state.u_curr, zero, G, half_alpha,
                                        p.beta(), p, state.fp_tol, state.fp_maxit);
    const double diff = linf_error(v_new, v);
    v = std::move(v_new);
    if (diff <= state.fp_tol * scale) {
      state.u_curr = std::move(v);
      ++state.n;
      return;
    }
  }
  throw std::runtime_error("fixed-point non-convergence in wcn_step after " +
                           std::to_string(state.fp_maxit) + " outer iterations");
}

ComplexField compute_defect(const std::function<Complex(double, double)>& a_exact,
                            const SchemeParams& params, const TorusGrid& grid,
                            double t) {
  validate(params);
  const double eps = params.epsilon;
  const double tau = params.tau;
  const double kappa = params.kappa;
  const double omega = params.omega();

  auto u_exact = [&](double s, double x) {
    return a_exact(s, x) * std::polar(1.0, (kappa * x - omega * s) / eps);
  };

  ComplexField u_minus(grid), u_mid(grid), u_plus(grid);
  for (int j = 0; j < grid.size; ++j) {
    const double x = grid.node(j);
    u_minus[j] = u_exact(t - tau, x);
    u_mid[j] = u_exact(t, x);
    u_plus[j] = u_exact(t + tau, x);
  }

  const ComplexField s = weighted_stencil(u_mid, params.beta());
  const Complex fwd = std::polar(1.0, params.alpha());
  const Complex back = std::polar(1.0, -params.alpha());
  const double c_stencil = eps * eps / (2.0 * params.h * params.h);
  ComplexField d(grid);
  for (int j = 0; j < grid.size; ++j) {
    const Complex dt = kI * eps * (fwd * u_plus[j] - back * u_minus[j]) / (2.0 * tau);
    const Complex nl = eps * params.lambda * std::norm(u_mid[j]) * u_mid[j];
    d[j] = dt + c_stencil * s[j] - nl;
  }
  return d;
}

}  // namespace oscidiff
