#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "helpers.hpp"
#include "iit/models.hpp"
#include "iit/rng.hpp"
#include "iit/spectral.hpp"

using namespace iit;
using namespace iit::models;

TEST_CASE("decay chain: masses and normalization") {
  SUBCASE("smallest flat-top instance") {
    const ToyChain toy(2, 10.0);
    const auto chain = spectral::build_exact(toy, BalancingRule::sqrt_rule());
    CHECK(chain.pi[0] == doctest::Approx(10.0 / 21.0).epsilon(1e-14));
    CHECK(chain.pi[1] == doctest::Approx(10.0 / 21.0).epsilon(1e-14));
    CHECK(chain.pi[2] == doctest::Approx(1.0 / 21.0).epsilon(1e-14));
  }
  SUBCASE("head mass approaches one half as the decay sharpens") {
    const ToyChain toy(20, 1000.0);
    const auto chain = spectral::build_exact(toy, BalancingRule::sqrt_rule());
    CHECK(std::abs(chain.pi[0] - 0.5) < 1e-3);
  }
  SUBCASE("curved profile ratios") {
    const ToyChain toy(6, 10.0, ToyChain::Profile::power_law, 2.0);
    CHECK(toy.log_mass(2) - toy.log_mass(1) == doctest::Approx(-3.0 * std::log(10.0)));
    CHECK(toy.log_mass(0) == toy.log_mass(1));
  }
  SUBCASE("strict profile has exact unit ratio") {
    const ToyChain toy(8, 50.0, ToyChain::Profile::strict);
    for (int k = 0; k < 8; ++k)
      CHECK(toy.log_mass(k) - toy.log_mass(k + 1) == doctest::Approx(std::log(50.0)));
  }
}

TEST_CASE("two-mode hypercube: mass table, modes, and normalizer expectation") {
  const TwoModeHypercube cube(3, 2.0);
  const auto states = cube.enumerate_states();
  const std::vector<double> expected = {1.0, 1.0, 0.5, 0.5, 0.5, 0.5, 0.25, 0.25};
  REQUIRE(states.size() == expected.size());
  for (std::size_t i = 0; i < states.size(); ++i)
    CHECK(std::exp(cube.log_mass(states[i])) == doctest::Approx(expected[i]).epsilon(1e-14));

  // exactly two global maxima by construction: the empty model and {1}
  const double top = cube.log_mass(0);
  CHECK(cube.log_mass(1) == top);
  CHECK(std::count_if(states.begin(), states.end(),
                      [&](std::uint64_t x) { return cube.log_mass(x) == top; }) == 2);
  // they are adjacent and tied, so neither is a strict local mode
  CHECK(count_local_modes(cube, states) == 0);

  for (const int p : {4, 6}) {
    const TwoModeHypercube big(p, 3.0);
    const auto chain = spectral::build_exact(big, BalancingRule::plus_one_rule());
    CHECK(chain.expected_zh == doctest::Approx(2.0 * p).epsilon(1e-13));
  }
}

TEST_CASE("weighted permutations: neighborhood size and mode structure") {
  const WeightedPermutations perms(5, 2.0, PermutationScenario::one, 3);
  const auto tau = perms.identity_state();
  CHECK(perms.neighbors(tau).size() == 10);  // p(p-1)/2
  CHECK(perms.degree(tau) == 10);

  // the identity is the global argmax and the only local mode, exhaustively
  for (const int p : {4, 5, 6}) {
    for (const std::uint64_t seed : {1ull, 2ull, 3ull}) {
      const WeightedPermutations target(p, 2.0, PermutationScenario::one, seed);
      const auto states = target.enumerate_states();
      const auto best = *std::max_element(
          states.begin(), states.end(), [&target](const auto& a, const auto& b) {
            return target.log_mass(a) < target.log_mass(b);
          });
      CHECK(best == target.identity_state());
      // swapping an adjacent sorted pair strictly lowers the mass
      auto swapped = target.identity_state();
      std::swap(swapped[1], swapped[2]);
      CHECK(target.log_mass(swapped) < target.log_mass(best));
      CHECK(count_local_modes(target, states) == 1);
    }
  }
}

TEST_CASE("weighted permutations: incremental evaluation tracks the direct one") {
  const WeightedPermutations target(8, 1.5, PermutationScenario::two, 9);
  auto walker = target.make_walker(target.identity_state());
  SplitRng rng(4);
  double worst = 0.0;
  for (int step = 0; step < 10000; ++step) {
    const auto masses = walker.neighbor_log_masses();
    const std::size_t j = rng.uniform_int(masses.size());
    walker.move_to(j);
    if (step % 500 == 0)
      worst = std::max(worst, std::abs(walker.log_mass() - target.log_mass(walker.state())));
  }
  worst = std::max(worst, std::abs(walker.log_mass() - target.log_mass(walker.state())));
  CHECK(worst < 1e-8);
}

TEST_CASE("regression simulation matches its sampling design") {
  SUBCASE("zero signal means zero coefficients") {
    const auto data = simulate_regression(50, 10, 3, 0.0, 1);
    CHECK(data.beta.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("neighboring columns correlate at exp(-1)") {
    const auto data = simulate_regression(10000, 6, 0, 0.0, 2);
    for (int j = 0; j + 1 < 6; ++j) {
      const Eigen::VectorXd a = data.design.col(j).array() - data.design.col(j).mean();
      const Eigen::VectorXd b = data.design.col(j + 1).array() - data.design.col(j + 1).mean();
      const double corr = a.dot(b) / std::sqrt(a.squaredNorm() * b.squaredNorm());
      CHECK(std::abs(corr - std::exp(-1.0)) < 0.05);
    }
  }
  SUBCASE("causal coefficients live on the scaled two-to-three band") {
    const int n = 100, p = 30, s = 7;
    const double snr = 2.0;
    const auto data = simulate_regression(n, p, s, snr, 3);
    const double unit = snr * std::sqrt(std::log(static_cast<double>(p)) / n);
    for (int j = 0; j < s; ++j) {
      CHECK(std::abs(data.beta[j]) >= 2.0 * unit - 1e-12);
      CHECK(std::abs(data.beta[j]) <= 3.0 * unit + 1e-12);
    }
    for (int j = s; j < p; ++j) CHECK(data.beta[j] == 0.0);
  }
  SUBCASE("csv round trip") {
    const auto data = simulate_regression(12, 5, 2, 1.5, 4);
    std::stringstream buffer;
    data.to_csv(buffer);
    const auto loaded = RegressionData::from_csv(buffer);
    CHECK((loaded.design - data.design).cwiseAbs().maxCoeff() == 0.0);
    CHECK((loaded.response - data.response).cwiseAbs().maxCoeff() == 0.0);
    CHECK((loaded.beta - data.beta).cwiseAbs().maxCoeff() == 0.0);
    CHECK(loaded.s_star == data.s_star);
    CHECK(loaded.seed == data.seed);
  }
}

TEST_CASE("variable selection posterior identities") {
  const int n = 60, p = 12;
  const auto data = simulate_regression(n, p, 3, 2.0, 11);
  const double g = std::pow(static_cast<double>(p), 3.0) - 1.0;
  const double c0 = 2.0;
  const VariableSelection target(data, g, c0);

  SUBCASE("empty model carries only the null likelihood term") {
    CHECK(target.log_mass({}) ==
          doctest::Approx(-0.5 * n * std::log(1.0 + g)).epsilon(1e-13));
  }
  SUBCASE("single-column fit equals the textbook correlation form") {
    const Eigen::VectorXd x0 = data.design.col(0).array() - data.design.col(0).mean();
    const Eigen::VectorXd y = data.response.array() - data.response.mean();
    const double r2 = std::pow(x0.dot(y), 2.0) / (x0.squaredNorm() * y.squaredNorm());
    const double expected =
        -c0 * std::log(static_cast<double>(p)) - 0.5 * std::log(1.0 + g) -
        0.5 * n * std::log1p(g * (1.0 - r2));
    CHECK(target.log_mass({0}) == doctest::Approx(expected).epsilon(1e-12));
  }
  SUBCASE("size penalty at equal fit") {
    const double explained = 0.37 * target.total_ss();
    const double step = target.log_mass_value(explained, 4) - target.log_mass_value(explained, 5);
    CHECK(step ==
          doctest::Approx(c0 * std::log(static_cast<double>(p)) + 0.5 * std::log(1.0 + g))
              .epsilon(1e-13));
  }
  SUBCASE("saturated fits stay finite") {
    CHECK(std::isfinite(target.log_mass_value(target.total_ss(), 3)));
    CHECK(std::isfinite(target.log_mass_value(2.0 * target.total_ss(), 3)));
  }
  SUBCASE("neighbor lists flip one variable in index order") {
    const auto nb = target.neighbors({2, 5});
    REQUIRE(nb.size() == static_cast<std::size_t>(p));
    CHECK(nb[0] == VariableSelection::state_type{0, 2, 5});
    CHECK(nb[2] == VariableSelection::state_type{5});
    CHECK(target.degree({2, 5}) == static_cast<std::size_t>(p));
  }
  SUBCASE("size cap drops add moves at the cap") {
    const VariableSelection capped(data, g, c0, 2);
    CHECK(capped.degree({1, 4}) == 2);
    CHECK(capped.neighbors({1, 4}).size() == 2);
    const auto moves = capped.ads_moves({1, 4});
    CHECK(moves.add.empty());
    CHECK(moves.swap.size() == 2 * (p - 2));
  }
  SUBCASE("state formatting round trip") {
    const VariableSelection::state_type x = {0, 3, 11};
    CHECK(target.parse_state(target.format_state(x)) == x);
    CHECK(target.format_state({}) == std::string(static_cast<std::size_t>(p), '0'));
  }
}

TEST_CASE("variable selection: incremental factorization matches direct evaluation") {
  const int n = 60, p = 25;
  const auto data = simulate_regression(n, p, 4, 2.0, 21);
  const VariableSelection target(data, std::pow(double(p), 3.0) - 1.0, 2.0);
  auto walker = target.make_walker({});
  SplitRng rng(77);
  double worst = 0.0;
  for (int step = 0; step < 10000; ++step) {
    const auto masses = walker.neighbor_log_masses();
    std::size_t j = rng.uniform_int(masses.size());
    // bias the walk toward heavier neighbors half the time to visit real fits
    if (step % 2 == 0) j = draw_categorical_log(rng, masses);
    walker.move_to(j);
    if (step % 250 == 0)
      worst = std::max(worst, std::abs(walker.log_mass() - target.log_mass(walker.state())));
  }
  worst = std::max(worst, std::abs(walker.log_mass() - target.log_mass(walker.state())));
  CHECK(worst < 1e-8);
}

TEST_CASE("variable selection survives exactly collinear columns") {
  auto data = simulate_regression(40, 8, 2, 2.0, 55);
  data.design.col(5) = data.design.col(2);  // duplicate column
  data.design.col(7) = 2.0 * data.design.col(0) - data.design.col(1);
  const VariableSelection target(data, 511.0, 2.0);
  // direct evaluation stays finite through the ridge fallback
  CHECK(std::isfinite(target.log_mass({2, 5})));
  CHECK(std::isfinite(target.log_mass({0, 1, 7})));
  // the walker's guarded updates stay finite along an informed walk
  auto walker = target.make_walker({});
  SplitRng rng(5);
  for (int step = 0; step < 2000; ++step) {
    const auto masses = walker.neighbor_log_masses();
    for (const double m : masses) CHECK(std::isfinite(m));
    walker.move_to(draw_categorical_log(rng, masses));
    CHECK(std::isfinite(walker.log_mass()));
  }
}

TEST_CASE("variable selection: posterior depends on the state only") {
  const auto data = simulate_regression(40, 10, 2, 1.0, 31);
  const VariableSelection target(data, 999.0, 2.0);
  // reach {1, 4, 7} along two different add/delete routes
  auto a = target.make_walker({});
  auto route_a = {1, 4, 7};
  for (const int j : route_a) {
    (void)a.neighbor_log_masses();
    a.move_to(static_cast<std::size_t>(j));
  }
  auto b = target.make_walker({0, 7});
  (void)b.neighbor_log_masses();
  b.move_to(4);  // add 4
  (void)b.neighbor_log_masses();
  b.move_to(0);  // delete 0
  (void)b.neighbor_log_masses();
  b.move_to(1);  // add 1
  CHECK(a.state() == b.state());
  CHECK(a.log_mass() == doctest::Approx(b.log_mass()).epsilon(1e-10));
}

TEST_CASE("best-neighbor statistic") {
  const ToyChain strict(8, 100.0, ToyChain::Profile::strict);
  CHECK(nu_statistic(strict, 0) < 0.0);  // at the mode
  CHECK(nu_statistic(strict, 4) == doctest::Approx(std::log(100.0) / std::log(8.0)));
  const auto ring = testing::uniform_ring(6);
  CHECK(nu_statistic(ring, 2) == 0.0);
}

TEST_CASE("local mode counting conventions") {
  const ToyChain strict(8, 100.0, ToyChain::Profile::strict);
  CHECK(count_local_modes(strict, strict.enumerate_states()) == 1);
  // the flat head ties and strictness excludes both tied states
  const ToyChain flat(8, 100.0);
  CHECK(count_local_modes(flat, flat.enumerate_states()) == 0);
  CHECK_THROWS_AS(count_local_modes(flat, std::vector<int>{}), contract_error);
}

TEST_CASE("isolated-modes target: geometry of the two singleton modes") {
  const IsolatedModesHypercube cube(6, 216.0, false);
  CHECK(cube.log_mass(1) == 0.0);  // {1}
  CHECK(cube.log_mass(2) == 0.0);  // {2}
  CHECK(cube.log_mass(0) == doctest::Approx(-std::log(216.0)));
  CHECK(cube.log_mass(3) == doctest::Approx(-std::log(216.0)));  // {1,2}
  CHECK(cube.neighbors(1).size() == 6);
  const IsolatedModesHypercube swappy(6, 216.0, true);
  const auto nb = swappy.neighbors(1);
  CHECK(nb.size() == 6 + 5);
  CHECK(std::find(nb.begin(), nb.end(), std::uint64_t{2}) != nb.end());
}
