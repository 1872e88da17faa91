#include "oscidiff/spectral.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>

namespace oscidiff {

namespace {

// One cached in-place plan pair per transform size.  Plan creation is not
// thread-safe in FFTW, so the registry is locked; execution locks only the
// per-size entry (concurrent transforms of different sizes do not serialize).
// FFTW_ESTIMATE keeps the algorithm choice deterministic across runs, which
// in turn keeps every downstream byte (CSV, cache files) reproducible.
struct PlanEntry {
  fftw_complex* buf = nullptr;
  fftw_plan fwd = nullptr;
  fftw_plan bwd = nullptr;
  std::mutex mutex;

  explicit PlanEntry(int n) {
    buf = fftw_alloc_complex(static_cast<size_t>(n));
    if (buf == nullptr) throw std::bad_alloc();
    fwd = fftw_plan_dft_1d(n, buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
    bwd = fftw_plan_dft_1d(n, buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  ~PlanEntry() {
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(bwd);
    fftw_free(buf);
  }
};

PlanEntry& plan_for(int n) {
  static std::mutex registry_mutex;
  static std::map<int, std::unique_ptr<PlanEntry>> registry;
  std::lock_guard<std::mutex> lock(registry_mutex);
  auto it = registry.find(n);
  if (it == registry.end()) {
    it = registry.emplace(n, std::make_unique<PlanEntry>(n)).first;
  }
  return *it->second;
}

void execute(int n, const Complex* in, Complex* out, bool forward) {
  PlanEntry& entry = plan_for(n);
  std::lock_guard<std::mutex> lock(entry.mutex);
  auto* buf = reinterpret_cast<Complex*>(entry.buf);
  std::copy(in, in + n, buf);
  fftw_execute(forward ? entry.fwd : entry.bwd);
  std::copy(buf, buf + n, out);
}

}  // namespace

std::vector<Complex> dft(const ComplexField& u) {
  const int n = u.size();
  if (n == 0) throw std::invalid_argument("dft: empty field");
  std::vector<Complex> coef(static_cast<size_t>(n));
  execute(n, u.data().data(), coef.data(), /*forward=*/true);
  const double scale = 1.0 / static_cast<double>(n);
  for (Complex& c : coef) c *= scale;
  return coef;
}

ComplexField idft(const std::vector<Complex>& coef, const TorusGrid& grid) {
  if (static_cast<int>(coef.size()) != grid.size) {
    throw std::invalid_argument("idft: coefficient count does not match grid");
  }
  ComplexField u(grid);
  execute(grid.size, coef.data(), u.data().data(), /*forward=*/false);
  return u;
}

int signed_mode(int slot, int M) { return slot <= M / 2 ? slot : slot - M; }

double mode_phase(int k, int M) {
  return 2.0 * kPi * static_cast<double>(k) / static_cast<double>(M);
}

double wiener_norm(const ComplexField& u) {
  double s = 0.0;
  for (const Complex& c : dft(u)) s += std::abs(c);
  return s;
}

double gamma_of_beta(double beta) { return 1.0 + std::max(std::abs(beta), 1.0); }

double gamma_at_phase(double beta, double phi) {
  return std::cos(beta - phi) + beta * std::sin(beta - phi) - 1.0;
}

double gamma_k(double beta, long k, double h) {
  return gamma_at_phase(beta, static_cast<double>(k) * h);
}

ModeAnalysis analyze_mode_at_phase(const SchemeParams& params, double phi) {
  ModeAnalysis m;
  m.gamma = gamma_at_phase(params.beta(), phi);
  m.mu = params.epsilon * params.tau * m.gamma / (params.h * params.h);
  // Characteristic roots of  g^2 - 2 i mu e^{-i alpha} g - e^{-2 i alpha} = 0:
  // (i mu +- sqrt(1 - mu^2)) e^{-i alpha}.  For |mu| < 1 both lie on the unit
  // circle; for |mu| > 1 the square root turns imaginary and one root leaves it.
  const Complex root = std::sqrt(Complex{1.0 - m.mu * m.mu, 0.0});
  const Complex rot = std::polar(1.0, -params.alpha());
  m.lambda_plus = (kI * m.mu + root) * rot;
  m.lambda_minus = (kI * m.mu - root) * rot;
  m.stable = std::abs(m.mu) < 1.0;
  m.norm_p = std::sqrt(2.0 * (1.0 + std::abs(m.mu)));
  m.norm_p_inv = m.stable
                     ? 1.0 / std::sqrt(2.0 * (1.0 - std::abs(m.mu)))
                     : std::numeric_limits<double>::infinity();
  return m;
}

ModeAnalysis amplification_matrix(const SchemeParams& params, long k) {
  ModeAnalysis m = analyze_mode_at_phase(params, static_cast<double>(k) * params.h);
  m.k = static_cast<int>(k);
  return m;
}

std::vector<ModeAnalysis> analyze_spectrum(const SchemeParams& params, int M) {
  std::vector<ModeAnalysis> out;
  out.reserve(static_cast<size_t>(M));
  for (int slot = 0; slot < M; ++slot) {
    const int k = signed_mode(slot, M);
    ModeAnalysis m = analyze_mode_at_phase(params, mode_phase(k, M));
    m.k = k;
    out.push_back(m);
  }
  return out;
}

std::pair<bool, double> stability_check(const SchemeParams& params) {
  const double theta = params.epsilon * params.tau * gamma_of_beta(params.beta()) /
                       (params.h * params.h);
  return {theta < 1.0, theta};
}

double triple_norm(const ComplexField& u_next, const ComplexField& u_curr,
                   const SchemeParams& params) {
  if (!(u_next.grid() == u_curr.grid())) {
    throw std::invalid_argument("triple_norm: fields live on different grids");
  }
  const int M = u_next.size();
  const std::vector<Complex> a = dft(u_next);
  const std::vector<Complex> b = dft(u_curr);
  double total = 0.0;
  for (int slot = 0; slot < M; ++slot) {
    const int k = signed_mode(slot, M);
    const ModeAnalysis m = analyze_mode_at_phase(params, mode_phase(k, M));
    if (!m.stable) {
      throw std::runtime_error("unstable mode k=" + std::to_string(k) +
                               " (|mu|=" + std::to_string(std::abs(m.mu)) +
                               ") in triple_norm");
    }
    // P_k^{-1} (a, b)^T with P_k = [[lambda+, lambda-], [1, 1]].
    const Complex det = m.lambda_plus - m.lambda_minus;
    const Complex c1 = (a[static_cast<size_t>(slot)] -
                        m.lambda_minus * b[static_cast<size_t>(slot)]) / det;
    const Complex c2 = (m.lambda_plus * b[static_cast<size_t>(slot)] -
                        a[static_cast<size_t>(slot)]) / det;
    total += std::sqrt(std::norm(c1) + std::norm(c2));
  }
  return total;
}

}  // namespace oscidiff
