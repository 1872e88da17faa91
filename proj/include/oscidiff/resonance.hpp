#pragma once

// Wave-vector combinatorics behind the multiphase solvers: alternating-sign
// multi-index sums, resonance detection against the dispersion relation
// omega = |kappa|^2/2, the saturation fixed point that closes a wave-vector
// set under resonant combinations, and the nonresonant triple set N with its
// detunings delta_nu (which divide the slaved correction amplitudes).

#include <array>
#include <utility>
#include <string>
#include <vector>

namespace oscidiff {

// Wave vector in R^d (d = 1 for the solvers, general d for the analysis).
struct WaveVector {
  std::vector<double> components;

  WaveVector() = default;
  explicit WaveVector(double k1) : components{k1} {}
  explicit WaveVector(std::vector<double> c) : components(std::move(c)) {}

  int dim() const { return static_cast<int>(components.size()); }
  double norm2() const;                      // |kappa|^2
  double omega() const { return 0.5 * norm2(); }
};

WaveVector operator+(const WaveVector& a, const WaveVector& b);
WaveVector operator-(const WaveVector& a, const WaveVector& b);
bool close(const WaveVector& a, const WaveVector& b, double tol);

// Nonresonant triple nu = (i, j, k) over the saturated set (1-based indices,
// matching the usual tabulation), with its combined wave vector and
// frequencies.
struct NuTriple {
  std::array<int, 3> idx{};  // 1-based indices into K
  WaveVector kappa;          // kappa_i - kappa_j + kappa_k
  double omega = 0.0;        // omega_i - omega_j + omega_k
  double omega_star = 0.0;   // |kappa_nu|^2 / 2
  double delta = 0.0;        // omega - omega_star (nonzero by construction)
};

// Saturated wave-vector set plus the nonresonant triple table.
struct ResonanceStructure {
  std::vector<WaveVector> K;   // kappa_1..kappa_R; the first `inputs` are the data
  std::vector<double> omegas;  // omega_r = |kappa_r|^2 / 2
  std::vector<NuTriple> N;     // all nonresonant ordered triples over K
  int inputs = 0;              // M, number of originally supplied vectors
  int k_star = 0;              // augmentation rounds until the set stopped growing
  double tol_res = 1e-9;

  int size() const { return static_cast<int>(K.size()); }
};

// Alternating-sign sums kappa_mu = sum (-1)^i kappa_{m_i},
// omega_mu = sum (-1)^i omega_{m_i} for a 1-based odd-length multi-index.
// Throws std::invalid_argument on even length or out-of-range indices.
std::pair<WaveVector, double> kappa_omega_of_multiindex(
    const std::vector<int>& mu, const std::vector<WaveVector>& K);

// True iff |omega_mu - |kappa_mu|^2/2| <= tol_res.
bool is_resonant(const std::vector<int>& mu, const std::vector<WaveVector>& K,
                 double tol_res = 1e-9);

// Closes `input` under the two augmentation rules:
//   (i)  resonant triple mu            -> add kappa_mu,
//   (ii) nonresonant triple mu with a resonant bracketing (mu,p,q) or (p,mu,q)
//        -> add the bracketing's wave vector.
// Enumerates N over the final set.  Throws std::runtime_error
// ("saturation failure") if the set still grows after max_rounds rounds or
// exceeds max_size vectors (admissible closures are small; divergent growth
// signals an input outside the method's scope, and the size guard rejects it
// before the combinatorics explode), and std::runtime_error
// ("near-resonant detuning ...") if any classification falls between the
// roundoff floor and tol_res (the theory's constants blow up as delta -> 0,
// so the dichotomy must be clean).
ResonanceStructure saturate(const std::vector<WaveVector>& input,
                            int max_rounds = 8, double tol_res = 1e-9,
                            int max_size = 24);

// One offending tuple of the nonresonance condition.
struct Assumption2Violation {
  std::array<int, 3> nu{};  // the triple from N (1-based)
  int p = 0;                // 1-based; 0 when the first inequality is violated
  int q = 0;                // 1-based; 0 when the second inequality is violated
  int r = 0;                // 1-based
  double lhs = 0.0;         // frequency combination
  double rhs = 0.0;         // |combined kappa|^2 / 2
};

// Checks, for every nu in N and all p,q,r with q != r, that
//   omega*_nu - omega_q + omega_r != |kappa_nu - kappa_q + kappa_r|^2/2   and
//   omega_p - omega*_nu + omega_r != |kappa_p - kappa_nu + kappa_r|^2/2.
// Returns true with an empty list when the condition holds.
std::pair<bool, std::vector<Assumption2Violation>> check_assumption2(
    const ResonanceStructure& rs);

}  // namespace oscidiff
