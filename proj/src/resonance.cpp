#include "oscidiff/resonance.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace oscidiff {

double WaveVector::norm2() const {
  double s = 0.0;
  for (double c : components) s += c * c;
  return s;
}

WaveVector operator+(const WaveVector& a, const WaveVector& b) {
  if (a.dim() != b.dim()) {
    throw std::invalid_argument("WaveVector: dimension mismatch");
  }
  WaveVector r = a;
  for (int i = 0; i < r.dim(); ++i) r.components[static_cast<size_t>(i)] += b.components[static_cast<size_t>(i)];
  return r;
}

WaveVector operator-(const WaveVector& a, const WaveVector& b) {
  if (a.dim() != b.dim()) {
    throw std::invalid_argument("WaveVector: dimension mismatch");
  }
  WaveVector r = a;
  for (int i = 0; i < r.dim(); ++i) r.components[static_cast<size_t>(i)] -= b.components[static_cast<size_t>(i)];
  return r;
}

bool close(const WaveVector& a, const WaveVector& b, double tol) {
  if (a.dim() != b.dim()) return false;
  for (int i = 0; i < a.dim(); ++i) {
    if (std::abs(a.components[static_cast<size_t>(i)] -
                 b.components[static_cast<size_t>(i)]) > tol) {
      return false;
    }
  }
  return true;
}

std::pair<WaveVector, double> kappa_omega_of_multiindex(
    const std::vector<int>& mu, const std::vector<WaveVector>& K) {
  if (mu.empty() || mu.size() % 2 == 0) {
    throw std::invalid_argument(
        "kappa_omega_of_multiindex: multi-index length must be odd");
  }
  const int R = static_cast<int>(K.size());
  WaveVector kappa;
  kappa.components.assign(K.front().components.size(), 0.0);
  double omega = 0.0;
  double sign = 1.0;
  for (int m : mu) {
    if (m < 1 || m > R) {
      throw std::invalid_argument("kappa_omega_of_multiindex: index out of range");
    }
    const WaveVector& k = K[static_cast<size_t>(m - 1)];
    if (k.dim() != kappa.dim()) {
      throw std::invalid_argument("kappa_omega_of_multiindex: mixed dimensions");
    }
    for (int i = 0; i < kappa.dim(); ++i) {
      kappa.components[static_cast<size_t>(i)] +=
          sign * k.components[static_cast<size_t>(i)];
    }
    omega += sign * k.omega();
    sign = -sign;
  }
  return {kappa, omega};
}

namespace {

enum class Kind { Resonant, Nonresonant };

// Clean dichotomy or refusal: detunings below the roundoff floor are exact
// resonances, detunings above tol_res are honest nonresonances, and anything
// caught between cannot be classified reliably.
Kind classify_detuning(double delta, double scale, double tol_res) {
  const double floor = 1e-12 * std::max(1.0, scale);
  const double mag = std::abs(delta);
  if (mag <= floor) return Kind::Resonant;
  if (mag <= tol_res) {
    throw std::runtime_error("near-resonant detuning |delta| = " +
                             std::to_string(mag) +
                             " falls between the roundoff floor and tol_res");
  }
  return Kind::Nonresonant;
}

struct Combo {
  WaveVector kappa;
  double omega = 0.0;
};

Kind classify(const Combo& c, double tol_res) {
  const double omega_star = 0.5 * c.kappa.norm2();
  return classify_detuning(c.omega - omega_star,
                           std::abs(c.omega) + omega_star, tol_res);
}

bool contains(const std::vector<WaveVector>& K, const WaveVector& v, double tol) {
  for (const WaveVector& k : K) {
    if (close(k, v, tol)) return true;
  }
  return false;
}

// Distinct (kappa_mu, omega_mu) values of the nonresonant triples over K, in
// first-appearance (lexicographic triple) order.  Rule (ii) only depends on a
// triple through this pair, so the quintuple scan runs per value class.
std::vector<Combo> nonresonant_classes(const std::vector<WaveVector>& K,
                                       double tol, double tol_res) {
  const int R = static_cast<int>(K.size());
  std::vector<Combo> classes;
  for (int i = 0; i < R; ++i) {
    for (int j = 0; j < R; ++j) {
      for (int k = 0; k < R; ++k) {
        Combo c;
        c.kappa = K[static_cast<size_t>(i)] - K[static_cast<size_t>(j)] +
                  K[static_cast<size_t>(k)];
        c.omega = K[static_cast<size_t>(i)].omega() -
                  K[static_cast<size_t>(j)].omega() +
                  K[static_cast<size_t>(k)].omega();
        if (classify(c, tol_res) == Kind::Resonant) continue;
        bool seen = false;
        for (const Combo& other : classes) {
          if (close(other.kappa, c.kappa, tol) &&
              std::abs(other.omega - c.omega) <= tol) {
            seen = true;
            break;
          }
        }
        if (!seen) classes.push_back(std::move(c));
      }
    }
  }
  return classes;
}

// One augmentation round: all additions mandated by rules (i) and (ii), in
// canonical order, de-duplicated against K and against each other.
std::vector<WaveVector> augment(const std::vector<WaveVector>& K, double tol,
                                double tol_res) {
  const int R = static_cast<int>(K.size());
  std::vector<WaveVector> added;
  auto fresh = [&](const WaveVector& v) {
    return !contains(K, v, tol) && !contains(added, v, tol);
  };

  // Rule (i): resonant triples contribute their combined wave vector.
  for (int i = 0; i < R; ++i) {
    for (int j = 0; j < R; ++j) {
      for (int k = 0; k < R; ++k) {
        Combo c;
        c.kappa = K[static_cast<size_t>(i)] - K[static_cast<size_t>(j)] +
                  K[static_cast<size_t>(k)];
        c.omega = K[static_cast<size_t>(i)].omega() -
                  K[static_cast<size_t>(j)].omega() +
                  K[static_cast<size_t>(k)].omega();
        if (classify(c, tol_res) == Kind::Resonant && fresh(c.kappa)) {
          added.push_back(c.kappa);
        }
      }
    }
  }

  // Rule (ii): nonresonant mu whose bracketing (mu,p,q) or (p,mu,q) is
  // resonant contributes the bracketing's wave vector.
  for (const Combo& mu : nonresonant_classes(K, tol, tol_res)) {
    for (int p = 0; p < R; ++p) {
      for (int q = 0; q < R; ++q) {
        const WaveVector& kp = K[static_cast<size_t>(p)];
        const WaveVector& kq = K[static_cast<size_t>(q)];
        {
          Combo c;  // (mu, p, q): signs continue alternating after mu
          c.kappa = mu.kappa - kp + kq;
          c.omega = mu.omega - kp.omega() + kq.omega();
          if (classify(c, tol_res) == Kind::Resonant && fresh(c.kappa)) {
            added.push_back(c.kappa);
          }
        }
        {
          Combo c;  // (p, mu, q): mu enters with flipped signs
          c.kappa = kp - mu.kappa + kq;
          c.omega = kp.omega() - mu.omega + kq.omega();
          if (classify(c, tol_res) == Kind::Resonant && fresh(c.kappa)) {
            added.push_back(c.kappa);
          }
        }
      }
    }
  }
  return added;
}

}  // namespace

bool is_resonant(const std::vector<int>& mu, const std::vector<WaveVector>& K,
                 double tol_res) {
  auto [kappa, omega] = kappa_omega_of_multiindex(mu, K);
  return std::abs(omega - 0.5 * kappa.norm2()) <= tol_res;
}

ResonanceStructure saturate(const std::vector<WaveVector>& input,
                            int max_rounds, double tol_res, int max_size) {
  if (input.empty()) {
    throw std::invalid_argument("saturate: empty input");
  }
  const int d = input.front().dim();
  const double tol = 1e-9;  // vector-equality tolerance for deduplication
  for (size_t i = 0; i < input.size(); ++i) {
    if (input[i].dim() != d) {
      throw std::invalid_argument("saturate: mixed dimensions");
    }
    if (input[i].norm2() == 0.0) {
      throw std::invalid_argument("saturate: zero wave vector in input");
    }
    for (size_t j = i + 1; j < input.size(); ++j) {
      if (close(input[i], input[j], tol)) {
        throw std::invalid_argument("saturate: duplicate wave vectors in input");
      }
    }
  }

  ResonanceStructure rs;
  rs.K = input;
  rs.inputs = static_cast<int>(input.size());
  rs.tol_res = tol_res;
  rs.k_star = 0;
  for (int round = 0;; ++round) {
    std::vector<WaveVector> added = augment(rs.K, tol, tol_res);
    if (added.empty()) {
      rs.k_star = round;
      break;
    }
    if (round >= max_rounds) {
      throw std::runtime_error("saturation failure: set still grows after " +
                               std::to_string(max_rounds) + " rounds");
    }
    rs.K.insert(rs.K.end(), added.begin(), added.end());
    // Divergent inputs can double the set every round; cutting them off by
    // size keeps the failure cheap instead of grinding through cubically
    // larger rounds that are doomed anyway.
    if (static_cast<int>(rs.K.size()) > max_size) {
      throw std::runtime_error("saturation failure: working set exceeded " +
                               std::to_string(max_size) + " wave vectors");
    }
  }

  const int R = rs.size();
  rs.omegas.resize(static_cast<size_t>(R));
  for (int r = 0; r < R; ++r) {
    rs.omegas[static_cast<size_t>(r)] = rs.K[static_cast<size_t>(r)].omega();
  }

  for (int i = 0; i < R; ++i) {
    for (int j = 0; j < R; ++j) {
      for (int k = 0; k < R; ++k) {
        Combo c;
        c.kappa = rs.K[static_cast<size_t>(i)] - rs.K[static_cast<size_t>(j)] +
                  rs.K[static_cast<size_t>(k)];
        c.omega = rs.omegas[static_cast<size_t>(i)] -
                  rs.omegas[static_cast<size_t>(j)] +
                  rs.omegas[static_cast<size_t>(k)];
        if (classify(c, tol_res) == Kind::Nonresonant) {
          NuTriple nu;
          nu.idx = {i + 1, j + 1, k + 1};
          nu.kappa = c.kappa;
          nu.omega = c.omega;
          nu.omega_star = 0.5 * c.kappa.norm2();
          nu.delta = nu.omega - nu.omega_star;
          rs.N.push_back(std::move(nu));
        }
      }
    }
  }
  return rs;
}

std::pair<bool, std::vector<Assumption2Violation>> check_assumption2(
    const ResonanceStructure& rs) {
  std::vector<Assumption2Violation> violations;
  const int R = rs.size();
  const double tol = rs.tol_res;
  for (const NuTriple& nu : rs.N) {
    // First inequality: over (q, r) with q != r.
    for (int q = 0; q < R; ++q) {
      for (int r = 0; r < R; ++r) {
        if (q == r) continue;
        const WaveVector combo =
            nu.kappa - rs.K[static_cast<size_t>(q)] + rs.K[static_cast<size_t>(r)];
        const double lhs = nu.omega_star - rs.omegas[static_cast<size_t>(q)] +
                           rs.omegas[static_cast<size_t>(r)];
        const double rhs = 0.5 * combo.norm2();
        if (std::abs(lhs - rhs) <= tol) {
          violations.push_back({nu.idx, 0, q + 1, r + 1, lhs, rhs});
        }
      }
    }
    // Second inequality: over (p, r); the printed quantifier couples it to
    // some q != r, which exists whenever R >= 2.
    if (R >= 2) {
      for (int p = 0; p < R; ++p) {
        for (int r = 0; r < R; ++r) {
          const WaveVector combo =
              rs.K[static_cast<size_t>(p)] - nu.kappa + rs.K[static_cast<size_t>(r)];
          const double lhs = rs.omegas[static_cast<size_t>(p)] - nu.omega_star +
                             rs.omegas[static_cast<size_t>(r)];
          const double rhs = 0.5 * combo.norm2();
          if (std::abs(lhs - rhs) <= tol) {
            violations.push_back({nu.idx, p + 1, 0, r + 1, lhs, rhs});
          }
        }
      }
    }
  }
  return {violations.empty(), violations};
}

}  // namespace oscidiff
