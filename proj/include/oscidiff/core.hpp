#pragma once

// Core value types shared by every solver in the suite: the periodic spatial
// mesh, the uniform time mesh, complex grid functions, the parameter bundle of
// the weighted finite-difference schemes, and oscillatory WKB-type initial
// data  u0(x) = sum_m a0_m(x) e^{i kappa_m x / eps}.

#include <complex>
#include <functional>
#include <utility>
#include <vector>

namespace oscidiff {

using Complex = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846264338327950288;
inline constexpr Complex kI{0.0, 1.0};

// Uniform periodic mesh with M nodes on [x_left, x_left + length); node M
// coincides with node 0.
struct TorusGrid {
  double x_left = 0.0;
  double length = 2.0 * kPi;
  int size = 0;

  TorusGrid() = default;
  TorusGrid(double x_left_, double length_, int size_);

  double h() const { return length / size; }

  // Periodic index reduction into [0, size).
  int wrap(long j) const {
    long m = j % size;
    return static_cast<int>(m < 0 ? m + size : m);
  }

  // Physical coordinate of node j (not wrapped; x(j + size) = x(j) + length).
  double node(long j) const { return x_left + static_cast<double>(j) * h(); }

  bool operator==(const TorusGrid&) const = default;
};

// Uniform time mesh 0 = t_0 < t_1 < ... < t_N = T with step tau = T/N.
struct TimeGrid {
  double T = 0.0;
  int steps = 0;

  TimeGrid() = default;
  TimeGrid(double T_, int steps_);

  double tau() const { return T / steps; }
  double t(int n) const { return tau() * static_cast<double>(n); }
};

// Complex-valued grid function on a TorusGrid.  Storage is node-ordered;
// at() gives periodic access for stencil code.
class ComplexField {
 public:
  ComplexField() = default;
  explicit ComplexField(const TorusGrid& grid)
      : grid_(grid), values_(static_cast<size_t>(grid.size), Complex{}) {}

  const TorusGrid& grid() const { return grid_; }
  int size() const { return grid_.size; }

  Complex& operator[](int j) { return values_[static_cast<size_t>(j)]; }
  const Complex& operator[](int j) const { return values_[static_cast<size_t>(j)]; }

  // Periodic access: any integer index is reduced onto the mesh.
  Complex at(long j) const { return values_[static_cast<size_t>(grid_.wrap(j))]; }

  std::vector<Complex>& data() { return values_; }
  const std::vector<Complex>& data() const { return values_; }

 private:
  TorusGrid grid_;
  std::vector<Complex> values_;
};

// Parameter bundle of the weighted schemes.  alpha and beta are derived
// quantities; they are recomputed on every use so they can never go stale
// against (epsilon, kappa, tau, h).
struct SchemeParams {
  double epsilon = 1.0;  // semiclassical parameter
  double lambda = 0.0;   // cubic coupling
  double kappa = 0.0;    // wavenumber carried by the exponential weights
  double tau = 0.0;      // time step
  double h = 0.0;        // mesh width

  double omega() const { return 0.5 * kappa * kappa; }
  double alpha() const { return omega() * tau / epsilon; }
  double beta() const { return kappa * h / epsilon; }
};

// Throws std::invalid_argument unless epsilon, tau, h are positive and finite.
void validate(const SchemeParams& params);

// One oscillatory component of the initial data: slowly varying profile a0
// carried by e^{i kappa x / eps}.
struct Phase {
  double kappa = 0.0;
  std::function<Complex(double)> profile;
};

struct PhaseSet {
  std::vector<Phase> phases;
};

// Nearest wavenumber to kappa such that e^{i kappa' x / eps} is L-periodic,
// i.e. kappa' L / (2 pi eps) is an integer.  |kappa' - kappa| <= pi*eps/L.
double adjust_wavenumber(double kappa, double epsilon, double L);

// Samples  sum_m a0_m(x_j) e^{i kappa_m x_j / eps}  on the grid.  Every
// kappa_m must already be grid-periodic; otherwise throws std::invalid_argument
// ("non-periodic phase").
ComplexField make_initial_data(const PhaseSet& phases, const TorusGrid& grid,
                               double epsilon);

// Strips one oscillatory carrier: returns u(x_j) * e^{-i(kappa x_j - omega t)/eps}.
ComplexField demodulate(const ComplexField& u, double kappa, double omega,
                        double t, double epsilon);

// Restores one oscillatory carrier: returns u(x_j) * e^{+i(kappa x_j - omega t)/eps}.
ComplexField modulate(const ComplexField& u, double kappa, double omega,
                      double t, double epsilon);

// max_j |u_j - v_j|; throws std::invalid_argument if the grids differ.
double linf_error(const ComplexField& u, const ComplexField& v);

// max_j |u_j|.
double linf_norm(const ComplexField& u);

}  // namespace oscidiff
