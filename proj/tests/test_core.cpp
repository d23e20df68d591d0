#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "iit/core.hpp"
#include "iit/models.hpp"
#include "iit/table_target.hpp"

using namespace iit;

TEST_CASE("local profile on a uniform cycle") {
  const auto target = testing::uniform_ring(3);
  const auto profile = local_profile(target, BalancingRule::sqrt_rule(), 0);
  REQUIRE(profile.log_ratios.size() == 2);
  CHECK(profile.log_ratios[0] == 0.0);
  CHECK(profile.log_ratios[1] == 0.0);
  CHECK(profile.log_zh == doctest::Approx(std::log(2.0)));
}

TEST_CASE("local profile: three-state path oracle") {
  const auto target = testing::three_state_path();
  const auto profile = local_profile(target, BalancingRule::sqrt_rule(), 1);
  REQUIRE(profile.log_h_terms.size() == 2);
  CHECK(std::exp(profile.log_h_terms[0]) == doctest::Approx(1.8708286933869707));
  CHECK(std::exp(profile.log_h_terms[1]) == doctest::Approx(0.7071067811865476));
  CHECK(std::exp(profile.log_zh) == doctest::Approx(2.5779354745735183));
  // normalizer consistency with a direct log-sum-exp
  CHECK(std::abs(profile.log_zh - log_sum_exp(profile.log_h_terms)) < 1e-12);
}

TEST_CASE("local profile: exact-ratio chain under the min weighting") {
  const double r = 10.0;
  const models::ToyChain toy(6, r);
  const auto profile = local_profile(toy, BalancingRule::min_rule(), 3);
  // interior state: Z = 1 + 1/r
  CHECK(std::exp(profile.log_zh) == doctest::Approx(1.0 + 1.0 / r).epsilon(1e-14));
}

TEST_CASE("empty neighborhood is a structural error") {
  struct Lonely {
    using state_type = int;
    double dimension_p() const { return 2.0; }
    double log_mass(int) const { return 0.0; }
    std::vector<int> neighbors(int) const { return {}; }
    std::string format_state(int x) const { return std::to_string(x); }
  };
  CHECK_THROWS_AS(local_profile(Lonely{}, BalancingRule::sqrt_rule(), 0), structure_error);
}

TEST_CASE("profiles are invariant to rescaling the masses") {
  // dyadic masses and a dyadic shift keep the float arithmetic exact, so the
  // ratio-only code path is observable bit for bit
  const TableTarget base({0.5, -1.25, 2.0, -0.75}, {{1}, {0, 2}, {1, 3}, {2}}, 4.0);
  const TableTarget shifted = base.scaled(8.0);
  for (int x = 0; x < 4; ++x) {
    const auto a = local_profile(base, BalancingRule::plus_one_rule(), x);
    const auto b = local_profile(shifted, BalancingRule::plus_one_rule(), x);
    CHECK(a.log_zh == b.log_zh);
    for (std::size_t j = 0; j < a.log_ratios.size(); ++j) {
      CHECK(a.log_ratios[j] == b.log_ratios[j]);
      CHECK(a.log_h_terms[j] == b.log_h_terms[j]);
    }
  }
}

TEST_CASE("table targets validate the structural contract") {
  CHECK_THROWS_AS(TableTarget({0.0, 0.0}, {{1}, {}}, 2.0), structure_error);       // empty nbhd
  CHECK_THROWS_AS(TableTarget({0.0, 0.0}, {{1}, {1}}, 2.0), structure_error);      // self loop
  CHECK_THROWS_AS(TableTarget({0.0, 0.0, 0.0}, {{1}, {2}, {1}}, 3.0),
                  structure_error);                                                // asymmetric
  const double inf = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(TableTarget({0.0, -inf}, {{1}, {0}}, 2.0), structure_error);     // zero mass
}

TEST_CASE("random fixtures are symmetric, loop-free and connected") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto target = TableTarget::random_fixture(3 + static_cast<int>(seed * 7 % 60), seed);
    const auto states = target.enumerate_states();
    for (const int x : states) {
      for (const int y : target.neighbors(x)) {
        CHECK(x != y);
        const auto& back = target.neighbors(y);
        CHECK(std::find(back.begin(), back.end(), x) != back.end());
      }
    }
    // connectivity is established by the spectral validation path
    CHECK_NOTHROW(spectral::enumerate_space(target));
  }
}

TEST_CASE("walker counts posterior evaluations") {
  const auto target = testing::uniform_ring(8);
  auto walker = make_walker(target, 0);
  CHECK(walker.posterior_evals() == 1);  // the start state
  walker.neighbor_log_masses();
  CHECK(walker.posterior_evals() == 3);  // both neighbors
  walker.neighbor_log_masses();
  CHECK(walker.posterior_evals() == 3);  // cached
  walker.move_to(0);
  walker.neighbor_log_mass(1);
  CHECK(walker.posterior_evals() == 4);  // one fresh neighbor after the move
}
