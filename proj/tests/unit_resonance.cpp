#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "oscidiff/resonance.hpp"

using namespace oscidiff;

namespace {

std::vector<WaveVector> wv(std::initializer_list<double> ks) {
  std::vector<WaveVector> out;
  for (double k : ks) out.emplace_back(k);
  return out;
}

}  // namespace

TEST_CASE("multi-index sums alternate signs") {
  auto K = wv({1.0, -1.0});

  auto [k1, w1] = kappa_omega_of_multiindex({1}, K);
  CHECK(k1.components[0] == doctest::Approx(1.0));
  CHECK(w1 == doctest::Approx(0.5));

  auto [k121, w121] = kappa_omega_of_multiindex({1, 2, 1}, K);
  CHECK(k121.components[0] == doctest::Approx(3.0));  // 1 - (-1) + 1
  CHECK(w121 == doctest::Approx(0.5));                // 1/2 - 1/2 + 1/2

  // Telescoping (m, m, m) collapses to the singleton.
  auto [kmmm, wmmm] = kappa_omega_of_multiindex({2, 2, 2}, K);
  CHECK(kmmm.components[0] == doctest::Approx(-1.0));
  CHECK(wmmm == doctest::Approx(0.5));

  CHECK_THROWS_AS(kappa_omega_of_multiindex({1, 2}, K), std::invalid_argument);
  CHECK_THROWS_AS(kappa_omega_of_multiindex({}, K), std::invalid_argument);
  CHECK_THROWS_AS(kappa_omega_of_multiindex({1, 2, 3}, K), std::invalid_argument);
}

TEST_CASE("1-D resonance is equivalent to the vanishing product (ki-kj)(kk-kj)") {
  std::mt19937_64 rng(37);
  std::uniform_real_distribution<double> dist(-3.0, 3.0);
  int resonant_seen = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    double a = dist(rng), b = dist(rng), c = dist(rng);
    if (trial % 3 == 1) b = a;  // force j = i resonances
    if (trial % 3 == 2) b = c;  // force j = k resonances
    auto K = std::vector<WaveVector>{WaveVector(a), WaveVector(b), WaveVector(c)};
    const bool res = is_resonant({1, 2, 3}, K);
    const double product = (a - b) * (c - b);
    if (std::abs(product) > 1e-6) {
      CHECK_FALSE(res);
    } else {
      CHECK(res);
      ++resonant_seen;
    }
  }
  CHECK(resonant_seen > 500);  // both forced branches actually fired
}

TEST_CASE("the opposite-phase pair produces exactly the two detuned triples") {
  ResonanceStructure rs = saturate(wv({1.0, -1.0}));
  CHECK(rs.size() == 2);
  CHECK(rs.k_star == 0);
  CHECK(rs.inputs == 2);
  REQUIRE(rs.N.size() == 2);

  const NuTriple& plus = rs.N[0];
  CHECK(plus.idx == std::array<int, 3>{1, 2, 1});
  CHECK(plus.kappa.components[0] == doctest::Approx(3.0));
  CHECK(plus.omega == doctest::Approx(0.5));
  CHECK(plus.omega_star == doctest::Approx(4.5));
  CHECK(plus.delta == doctest::Approx(-4.0));  // -4 kappa^2 with kappa = 1

  const NuTriple& minus = rs.N[1];
  CHECK(minus.idx == std::array<int, 3>{2, 1, 2});
  CHECK(minus.kappa.components[0] == doctest::Approx(-3.0));
  CHECK(minus.delta == doctest::Approx(-4.0));

  // delta = -4 kappa^2 scales exactly with the wavenumber.
  for (double kappa : {0.5, 2.0, 0.9424777960769379}) {
    ResonanceStructure s = saturate(wv({kappa, -kappa}));
    REQUIRE(s.N.size() == 2);
    CHECK(s.N[0].delta == doctest::Approx(-4.0 * kappa * kappa).epsilon(1e-12));
  }
}

TEST_CASE("single phase saturates trivially with empty N") {
  ResonanceStructure rs = saturate(wv({1.3}));
  CHECK(rs.size() == 1);
  CHECK(rs.k_star == 0);
  CHECK(rs.N.empty());  // (1,1,1) is resonant
}

TEST_CASE("saturate validates its input") {
  CHECK_THROWS_AS(saturate({}), std::invalid_argument);
  CHECK_THROWS_AS(saturate(wv({1.0, 1.0})), std::invalid_argument);
  CHECK_THROWS_AS(saturate(wv({0.0, 1.0})), std::invalid_argument);
}

TEST_CASE("saturate is idempotent and generically immediate in 1-D") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> dist(0.3, 4.0);
  for (int trial = 0; trial < 50; ++trial) {
    // Generic triples: irrational-looking spacings, no arithmetic relations.
    std::vector<WaveVector> input =
        wv({dist(rng), -dist(rng), dist(rng) + 4.0});
    ResonanceStructure rs = saturate(input);
    CHECK(rs.k_star == 0);

    ResonanceStructure again = saturate(rs.K);
    CHECK(again.size() == rs.size());
    CHECK(again.k_star == 0);
    CHECK(again.N.size() == rs.N.size());
  }
}

TEST_CASE("arithmetic relations force genuine growth before closure") {
  // {-2, -1, 1}: bracketing the nonresonant combination (-2) - (-1) + 1 = 0
  // against the pair (-1, 1) lands on 2, which is resonant, so one round
  // adds it and the enlarged set {-2, -1, 1, 2} is closed.
  ResonanceStructure rs = saturate(wv({-2.0, -1.0, 1.0}));
  CHECK(rs.k_star == 1);
  REQUIRE(rs.size() == 4);
  std::vector<double> got;
  for (const WaveVector& k : rs.K) got.push_back(k.components[0]);
  std::sort(got.begin(), got.end());
  CHECK(got == std::vector<double>{-2.0, -1.0, 1.0, 2.0});
  CHECK(rs.inputs == 3);

  // Closing the result again is a fixed point.
  ResonanceStructure again = saturate(rs.K);
  CHECK(again.k_star == 0);
  CHECK(again.size() == 4);

  // {-5, -4, -2, 5} needs two rounds and ends at six wavenumbers.
  ResonanceStructure two = saturate(wv({-5.0, -4.0, -2.0, 5.0}));
  CHECK(two.k_star == 2);
  CHECK(two.size() == 6);
}

TEST_CASE("the closure may grow a zero wavenumber even though input cannot") {
  // Bracketing one of the detuned combinations of {1, 3, 4} lands on zero
  // resonantly, so the closed set legitimately contains a zero wavenumber;
  // only the caller-supplied phases are required to be nonzero.
  ResonanceStructure rs = saturate(wv({1.0, 3.0, 4.0}));
  CHECK(rs.k_star == 1);
  REQUIRE(rs.size() == 4);
  std::vector<double> got;
  for (const WaveVector& k : rs.K) got.push_back(k.components[0]);
  std::sort(got.begin(), got.end());
  CHECK(got == std::vector<double>{0.0, 1.0, 3.0, 4.0});
}

TEST_CASE("divergent growth fails fast instead of exploding") {
  // Consecutive integers breed new resonant brackets every round; the set
  // passes the size limit within a few rounds and the call must reject the
  // input rather than grind through ever-larger rounds.
  CHECK_THROWS_WITH_AS(saturate(wv({1.0, 2.0, 3.0, 4.0})),
                       doctest::Contains("saturation failure"),
                       std::runtime_error);
  CHECK_THROWS_WITH_AS(saturate(wv({-3.0, -1.0, 1.0, 3.0})),
                       doctest::Contains("saturation failure"),
                       std::runtime_error);
}

TEST_CASE("every recorded triple is honestly detuned") {
  ResonanceStructure rs = saturate(wv({1.0, -1.0, 2.5}));
  for (const NuTriple& nu : rs.N) {
    CHECK(std::abs(nu.delta) > rs.tol_res);
    CHECK(nu.delta == doctest::Approx(nu.omega - nu.omega_star));
    CHECK(nu.omega_star == doctest::Approx(0.5 * nu.kappa.norm2()));
  }
}

TEST_CASE("assumption 2 holds for generic 1-D structures") {
  std::mt19937_64 rng(43);
  std::uniform_real_distribution<double> dist(0.3, 3.0);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<WaveVector> input = wv({dist(rng), -dist(rng)});
    ResonanceStructure rs = saturate(input);
    auto [ok, violations] = check_assumption2(rs);
    CHECK(ok);
    CHECK(violations.empty());
  }
}

TEST_CASE("assumption 2 detects the degenerate case kappa_nu already in K") {
  // {1, 2, 3}: the nonresonant triple (1,2,3) combines back to kappa = 2,
  // which lies in K, so picking q (or p) at that vector produces equality.
  ResonanceStructure rs = saturate(wv({1.0, 2.0, 3.0}));
  bool has_123 = false;
  for (const NuTriple& nu : rs.N) {
    if (nu.idx == std::array<int, 3>{1, 2, 3}) has_123 = true;
  }
  CHECK(has_123);
  auto [ok, violations] = check_assumption2(rs);
  CHECK_FALSE(ok);
  CHECK_FALSE(violations.empty());
}

TEST_CASE("assumption 2 detects a handcrafted 2-D violation") {
  // Violation of the first inequality is equivalent (by the d-dimensional
  // product identity) to (kappa_nu - kappa_q) . (kappa_r - kappa_q) = 0.
  // With A=(1,0), B=(0,1/2), C=(0,1) and nu=(1,2,3): kappa_nu = (1,1/2) and
  // (kappa_nu - B) . (C - B) = (1,0).(0,1/2) = 0.
  ResonanceStructure rs;
  rs.K = {WaveVector({1.0, 0.0}), WaveVector({0.0, 0.5}), WaveVector({0.0, 1.0})};
  rs.inputs = 3;
  for (const WaveVector& k : rs.K) rs.omegas.push_back(k.omega());
  NuTriple nu;
  nu.idx = {1, 2, 3};
  nu.kappa = rs.K[0] - rs.K[1] + rs.K[2];
  nu.omega = rs.omegas[0] - rs.omegas[1] + rs.omegas[2];
  nu.omega_star = 0.5 * nu.kappa.norm2();
  nu.delta = nu.omega - nu.omega_star;
  REQUIRE(std::abs(nu.delta) > 1e-9);
  rs.N.push_back(nu);

  auto [ok, violations] = check_assumption2(rs);
  CHECK_FALSE(ok);
  bool found = false;
  for (const auto& v : violations) {
    if (v.q == 2 && v.r == 3 && v.p == 0) found = true;
  }
  CHECK(found);
}
