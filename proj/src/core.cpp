#include "oscidiff/core.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace oscidiff {

TorusGrid::TorusGrid(double x_left_, double length_, int size_)
    : x_left(x_left_), length(length_), size(size_) {
  if (!(length > 0.0) || !std::isfinite(length)) {
    throw std::invalid_argument("TorusGrid: length must be positive");
  }
  if (size <= 0) {
    throw std::invalid_argument("TorusGrid: size must be positive");
  }
}

TimeGrid::TimeGrid(double T_, int steps_) : T(T_), steps(steps_) {
  if (!(T > 0.0) || !std::isfinite(T)) {
    throw std::invalid_argument("TimeGrid: T must be positive");
  }
  if (steps <= 0) {
    throw std::invalid_argument("TimeGrid: steps must be positive");
  }
}

void validate(const SchemeParams& params) {
  auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
  if (!positive(params.epsilon)) {
    throw std::invalid_argument("SchemeParams: epsilon must be positive");
  }
  if (!positive(params.tau)) {
    throw std::invalid_argument("SchemeParams: tau must be positive");
  }
  if (!positive(params.h)) {
    throw std::invalid_argument("SchemeParams: h must be positive");
  }
  if (!std::isfinite(params.lambda) || !std::isfinite(params.kappa)) {
    throw std::invalid_argument("SchemeParams: lambda/kappa must be finite");
  }
}

double adjust_wavenumber(double kappa, double epsilon, double L) {
  const double spacing = 2.0 * kPi * epsilon / L;
  return spacing * std::round(kappa / spacing);
}

namespace {

// Integer winding number of e^{i kappa x / eps} over one period, or throws if
// the exponential is not L-periodic.
long phase_winding(double kappa, double epsilon, double L) {
  const double cycles = kappa * L / (2.0 * kPi * epsilon);
  const double nearest = std::round(cycles);
  if (std::abs(cycles - nearest) > 1e-9 * std::max(1.0, std::abs(cycles))) {
    throw std::invalid_argument(
        "non-periodic phase: kappa*L/(2*pi*eps) = " + std::to_string(cycles) +
        " is not an integer; adjust_wavenumber() first");
  }
  return static_cast<long>(nearest);
}

}  // namespace

ComplexField make_initial_data(const PhaseSet& phases, const TorusGrid& grid,
                               double epsilon) {
  ComplexField u(grid);
  for (const Phase& p : phases.phases) {
    phase_winding(p.kappa, epsilon, grid.length);  // reject non-periodic data
    const double rate = p.kappa / epsilon;
    for (int j = 0; j < grid.size; ++j) {
      const double x = grid.node(j);
      u[j] += p.profile(x) * std::polar(1.0, rate * x);
    }
  }
  return u;
}

ComplexField demodulate(const ComplexField& u, double kappa, double omega,
                        double t, double epsilon) {
  const TorusGrid& grid = u.grid();
  ComplexField out(grid);
  for (int j = 0; j < grid.size; ++j) {
    const double phase = -(kappa * grid.node(j) - omega * t) / epsilon;
    out[j] = u[j] * std::polar(1.0, phase);
  }
  return out;
}

ComplexField modulate(const ComplexField& u, double kappa, double omega,
                      double t, double epsilon) {
  const TorusGrid& grid = u.grid();
  ComplexField out(grid);
  for (int j = 0; j < grid.size; ++j) {
    const double phase = (kappa * grid.node(j) - omega * t) / epsilon;
    out[j] = u[j] * std::polar(1.0, phase);
  }
  return out;
}

double linf_error(const ComplexField& u, const ComplexField& v) {
  if (!(u.grid() == v.grid())) {
    throw std::invalid_argument("linf_error: fields live on different grids");
  }
  double m = 0.0;
  for (int j = 0; j < u.size(); ++j) {
    m = std::max(m, std::abs(u[j] - v[j]));
  }
  return m;
}

double linf_norm(const ComplexField& u) {
  double m = 0.0;
  for (int j = 0; j < u.size(); ++j) {
    m = std::max(m, std::abs(u[j]));
  }
  return m;
}

}  // namespace oscidiff
