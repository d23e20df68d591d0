#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "helpers.hpp"
#include "iit/experiment.hpp"
#include "iit/models.hpp"
#include "iit/samplers.hpp"
#include "iit/spectral.hpp"

using namespace iit;

namespace {

bool adjacent(const TableTarget& target, int a, int b) {
  const auto& nb = target.neighbors(a);
  return std::find(nb.begin(), nb.end(), b) != nb.end();
}

}  // namespace

TEST_CASE("informed chain on a uniform ring is a flat-weight random walk") {
  const auto target = testing::uniform_ring(12);
  const auto chain = iit_run(target, BalancingRule::sqrt_rule(), 0, 500, 3);
  REQUIRE(chain.length() == 500);
  for (const double lw : chain.log_weights)
    CHECK(lw == doctest::Approx(-std::log(2.0)).epsilon(1e-14));
  for (std::size_t k = 1; k < chain.states.size(); ++k)
    CHECK(adjacent(target, chain.states[k - 1], chain.states[k]));
}

TEST_CASE("informed chain matches the hand oracle on the three-state path") {
  const auto target = testing::three_state_path();
  const auto chain = iit_run(target, BalancingRule::sqrt_rule(), 1, 100000, 17);
  // every visit to the middle state carries weight -log Z(middle)
  int middle_visits = 0, to_best = 0;
  int from_middle = 0;
  for (std::size_t k = 0; k < chain.states.size(); ++k) {
    if (chain.states[k] == 1) {
      ++middle_visits;
      CHECK(chain.log_weights[k] == doctest::Approx(-std::log(2.5779354745735183)));
      if (k + 1 < chain.states.size()) {
        ++from_middle;
        if (chain.states[k + 1] == 0) ++to_best;
      }
    }
  }
  REQUIRE(middle_visits > 1000);
  const double p_hat = static_cast<double>(to_best) / from_middle;
  const double p_exact = 0.7257081148225681;
  const double sigma = std::sqrt(p_exact * (1 - p_exact) / from_middle);
  CHECK(std::abs(p_hat - p_exact) < 5.0 * sigma);
}

TEST_CASE("informed chains never repeat a state on consecutive steps") {
  const models::TwoModeHypercube cube(8, 4.0);
  const auto chain = iit_run(cube, BalancingRule::plus_one_rule(), 0, 5000, 23);
  for (std::size_t k = 1; k < chain.states.size(); ++k)
    CHECK(chain.states[k] != chain.states[k - 1]);
}

TEST_CASE("power chain with a=0: uniform proposal, explicit mass weights") {
  const auto target = testing::three_state_path();
  const auto chain = iit_power_run(target, 0.0, 1, 2000, 5);
  for (std::size_t k = 0; k < chain.states.size(); ++k) {
    const int x = chain.states[k];
    const double expected =
        target.log_mass(x) - std::log(static_cast<double>(target.neighbors(x).size()));
    CHECK(chain.log_weights[k] == doctest::Approx(expected).epsilon(1e-14));
  }
}

TEST_CASE("power a=0.5 and the square-root rule give identical trajectories") {
  const models::TwoModeHypercube cube(10, 3.0);
  const auto a = iit_power_run(cube, 0.5, 0, 3000, 91);
  const auto b = iit_run(cube, BalancingRule::sqrt_rule(), 0, 3000, 91);
  REQUIRE(a.length() == b.length());
  for (std::size_t k = 0; k < a.states.size(); ++k) {
    CHECK(a.states[k] == b.states[k]);
    CHECK(a.log_weights[k] == b.log_weights[k]);
  }
}

TEST_CASE("aggressive power weights blow up in the tail of the decay chain") {
  const int p = 12;
  const double r = 100.0;
  const models::ToyChain toy(p, r);
  const auto chain = iit_power_run(toy, 1.0, p, 200, 11);
  double best = -1e300;
  for (const double lw : chain.log_weights) best = std::max(best, lw);
  CHECK(best > 0.9 * (p - 3) * std::log(r));
}

TEST_CASE("informed chain transition frequencies match the exact kernel") {
  const auto target = testing::three_state_path();
  const auto exact = spectral::build_exact(target, BalancingRule::plus_one_rule());
  const auto chain = iit_run(target, BalancingRule::plus_one_rule(), 0, 100000, 41);
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(3, 3);
  int prev = 0;
  for (const int s : chain.states) {
    counts(prev, s) += 1.0;
    prev = s;
  }
  double stat = 0.0;
  int dof = 0;
  for (int x = 0; x < 3; ++x) {
    const double row_total = counts.row(x).sum();
    for (int y = 0; y < 3; ++y) {
      if (exact.kernel(x, y) <= 0.0) {
        CHECK(counts(x, y) == 0.0);
        continue;
      }
      const double expected = row_total * exact.kernel(x, y);
      stat += (counts(x, y) - expected) * (counts(x, y) - expected) / expected;
      ++dof;
    }
    --dof;
  }
  CHECK(stat < dof + 5.0 * std::sqrt(2.0 * dof));
}

TEST_CASE("random-walk MH matches its exact kernel") {
  const auto target = testing::three_state_path();
  const auto enumeration = spectral::enumerate_space(target);
  const Eigen::MatrixXd kernel = spectral::mh_kernel(enumeration.space);
  const auto chain = rwmh_run(target, 0, 100000, 31);
  for (const double lw : chain.log_weights) CHECK(lw == 0.0);
  // chi-square over observed transitions; normal approximation with 5-sigma
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(3, 3);
  int prev = 0;
  for (const int s : chain.states) {
    counts(prev, s) += 1.0;
    prev = s;
  }
  double stat = 0.0;
  int dof = 0;
  for (int x = 0; x < 3; ++x) {
    const double row_total = counts.row(x).sum();
    for (int y = 0; y < 3; ++y) {
      if (kernel(x, y) <= 0.0) {
        CHECK(counts(x, y) == 0.0);
        continue;
      }
      const double expected = row_total * kernel(x, y);
      stat += (counts(x, y) - expected) * (counts(x, y) - expected) / expected;
      ++dof;
    }
    --dof;
  }
  CHECK(stat < dof + 5.0 * std::sqrt(2.0 * dof));
}

TEST_CASE("MH on a uniform regular graph accepts every proposal") {
  const auto target = testing::uniform_ring(10);
  const auto chain = rwmh_run(target, 0, 3000, 12);
  int prev = 0;
  for (const int s : chain.states) {
    CHECK(s != prev);  // ratio is always one, so every move is taken
    CHECK(adjacent(target, prev, s));
    prev = s;
  }
}

TEST_CASE("MH chains stay on the neighborhood graph") {
  const auto target = testing::three_state_path();
  const auto chain = rwmh_run(target, 2, 5000, 9);
  int prev = 2;
  for (const int s : chain.states) {
    CHECK((s == prev || adjacent(target, prev, s)));
    prev = s;
  }
}

TEST_CASE("two-state MH acceptance frequencies") {
  const TableTarget target({std::log(0.9), std::log(0.1)}, {{1}, {0}}, 2.0);
  const auto chain = rwmh_run(target, 0, 50000, 7);
  int at_zero = 0, moved = 0;
  int prev = 0;
  for (const int s : chain.states) {
    if (prev == 0) {
      ++at_zero;
      if (s == 1) ++moved;
    }
    prev = s;
  }
  const double accept = static_cast<double>(moved) / at_zero;
  const double expected = 1.0 / 9.0;
  CHECK(std::abs(accept - expected) < 5.0 * std::sqrt(expected * (1 - expected) / at_zero));
}

TEST_CASE("add-delete-swap sampler leaves the posterior invariant") {
  const auto data = models::simulate_regression(40, 6, 2, 2.0, 19);
  const models::VariableSelection target(data, std::pow(6.0, 3.0) - 1.0, 2.0);
  const auto enumeration = spectral::enumerate_space(target);
  // exact kernel from the mixture proposal rows
  const auto& index = enumeration.index;
  const auto& states = enumeration.states;
  auto proposal_row = [&](int x) {
    const auto moves = target.ads_moves(states[static_cast<std::size_t>(x)]);
    const double base[3] = {0.4, 0.4, 0.2};
    const std::size_t counts[3] = {moves.add.size(), moves.del.size(), moves.swap.size()};
    double total = 0.0;
    for (int c = 0; c < 3; ++c)
      if (counts[c]) total += base[c];
    std::vector<std::pair<int, double>> row;
    for (int c = 0; c < 3; ++c) {
      if (!counts[c]) continue;
      const auto& pool = c == 0 ? moves.add : (c == 1 ? moves.del : moves.swap);
      for (const auto& y : pool)
        row.emplace_back(index.at(y), base[c] / total / static_cast<double>(pool.size()));
    }
    return row;
  };
  const Eigen::MatrixXd kernel = spectral::mh_kernel_from_proposal(enumeration.space, proposal_row);
  const Eigen::VectorXd pi = enumeration.space.normalized_pi();
  const Eigen::VectorXd residual = (pi.transpose() * kernel).transpose() - pi;
  CHECK(residual.cwiseAbs().maxCoeff() < 1e-10);

  // the sampled chain stays inside the state space and mixes between sizes
  const auto chain = ads_run(target, {}, 20000, 3);
  std::set<std::size_t> sizes;
  for (const auto& x : chain.states) sizes.insert(x.size());
  CHECK(sizes.size() >= 3);
}

TEST_CASE("swap moves on a flat fixed-size posterior always accept") {
  struct FlatSwaps {
    using state_type = std::vector<std::uint16_t>;
    int p = 5;
    double dimension_p() const { return p; }
    double log_mass(const state_type&) const { return 0.0; }
    models::AdsMoves<state_type> ads_moves(const state_type& x) const {
      models::AdsMoves<state_type> moves;
      for (const auto k : x)
        for (int j = 0; j < p; ++j) {
          if (std::binary_search(x.begin(), x.end(), static_cast<std::uint16_t>(j))) continue;
          state_type y = x;
          y.erase(std::find(y.begin(), y.end(), k));
          y.insert(std::upper_bound(y.begin(), y.end(), static_cast<std::uint16_t>(j)),
                   static_cast<std::uint16_t>(j));
          moves.swap.push_back(std::move(y));
        }
      return moves;
    }
    std::vector<state_type> neighbors(const state_type& x) const { return ads_moves(x).swap; }
    std::string format_state(const state_type&) const { return "s"; }
  };
  const FlatSwaps target;
  const auto chain = ads_run(target, {0, 1}, 2000, 13);
  for (std::size_t k = 1; k < chain.states.size(); ++k)
    CHECK(chain.states[k] != chain.states[k - 1]);
}

TEST_CASE("continuous-time chain: holding times and budget truncation") {
  const auto target = testing::uniform_ring(6);
  // Z = 2 at every state, so holding times are Exp(mean 1/2)
  const auto traj = zanella_run(target, BalancingRule::sqrt_rule(), 0, 4000.0, 77);
  double total = 0.0;
  for (const double h : traj.holding_times) total += h;
  CHECK(total == doctest::Approx(4000.0));
  const double mean = total / static_cast<double>(traj.holding_times.size());
  CHECK(std::abs(mean - 0.5) < 5.0 * 0.5 / std::sqrt(double(traj.holding_times.size())));

  const auto tiny = zanella_run(target, BalancingRule::sqrt_rule(), 0, 1e-9, 77);
  CHECK(tiny.states.size() == 1);
  CHECK(tiny.holding_times[0] == doctest::Approx(1e-9));
}

TEST_CASE("continuous-time time averages recover exact expectations") {
  const auto target = testing::three_state_path();
  const auto chain = spectral::build_exact(target, BalancingRule::sqrt_rule());
  const std::vector<double> f = {1.0, 0.0, 0.0};
  const double exact = testing::exact_expectation(chain, f);
  std::vector<double> estimates;
  for (std::uint64_t rep = 0; rep < 24; ++rep) {
    const auto traj = zanella_run(target, BalancingRule::sqrt_rule(), 1, 3000.0, 500 + rep);
    estimates.push_back(
        estimate(traj.as_weighted_chain(), [](int x) { return x == 0 ? 1.0 : 0.0; }).estimate);
  }
  const auto stats = testing::mean_and_variance(estimates);
  const double se = std::sqrt(stats.var / static_cast<double>(estimates.size()));
  CHECK(std::abs(stats.mean - exact) < 5.0 * se);
}

TEST_CASE("self-normalized estimator basics") {
  const auto target = testing::uniform_ring(5);
  auto chain = iit_run(target, BalancingRule::sqrt_rule(), 0, 400, 3);
  // constant functional: exact self-normalization
  CHECK(estimate(chain, [](int) { return 1.0; }).estimate == 1.0);
  // equal weights: plain average
  const auto flat = estimate(chain, [](int x) { return static_cast<double>(x); });
  double mean = 0.0;
  for (const int x : chain.states) mean += x;
  mean /= static_cast<double>(chain.states.size());
  CHECK(flat.estimate == doctest::Approx(mean).epsilon(1e-13));
  CHECK(flat.ess == doctest::Approx(static_cast<double>(chain.length())));
  CHECK(flat.ess >= 1.0);
  CHECK(flat.ess <= static_cast<double>(chain.length()));
  CHECK_THROWS_AS(estimate(WeightedChain<int>{}, [](int) { return 0.0; }), contract_error);
}

TEST_CASE("estimates are invariant to rescaling the target mass") {
  const TableTarget base({0.5, -1.25, 2.0, -0.75}, {{1}, {0, 2}, {1, 3}, {2}}, 4.0);
  const TableTarget shifted = base.scaled(-16.0);
  const auto a = iit_run(base, BalancingRule::plus_one_rule(), 0, 4000, 21);
  const auto b = iit_run(shifted, BalancingRule::plus_one_rule(), 0, 4000, 21);
  REQUIRE(a.length() == b.length());
  // same trajectory; weights differ by one additive constant
  const double delta = b.log_weights[0] - a.log_weights[0];
  for (std::size_t k = 0; k < a.states.size(); ++k) {
    CHECK(a.states[k] == b.states[k]);
    CHECK(b.log_weights[k] - a.log_weights[k] == doctest::Approx(delta).epsilon(1e-14));
  }
  const auto fa = estimate(a, [](int x) { return static_cast<double>(x * x); });
  const auto fb = estimate(b, [](int x) { return static_cast<double>(x * x); });
  CHECK(fa.estimate == doctest::Approx(fb.estimate).epsilon(1e-12));
}

TEST_CASE("estimator hits exact head mass on the decay chain") {
  const models::ToyChain toy(10, 10.0);
  const auto exact_chain = spectral::build_exact(toy, BalancingRule::sqrt_rule());
  double head = 0.0;
  for (int x = 0; x <= 1; ++x) head += exact_chain.pi[x];
  std::vector<double> estimates;
  for (std::uint64_t rep = 0; rep < 20; ++rep) {
    const auto chain = iit_run(toy, BalancingRule::sqrt_rule(), 5, 20000, 900 + rep);
    estimates.push_back(estimate(chain, [](int x) { return x <= 1 ? 1.0 : 0.0; }).estimate);
  }
  const auto stats = testing::mean_and_variance(estimates);
  const double se = std::sqrt(stats.var / static_cast<double>(estimates.size()));
  CHECK(std::abs(stats.mean - head) < 5.0 * se);
}

TEST_CASE("evaluation budgets stop chains near the budget") {
  const auto target = testing::uniform_ring(9);
  const auto chain = iit_run(target, BalancingRule::min_rule(), 0, RunLimit::for_evals(1000), 1);
  CHECK(chain.posterior_evals >= 1000);
  CHECK(chain.posterior_evals <= 1003);
  const auto mh = rwmh_run(target, 0, RunLimit::for_evals(1000), 1);
  CHECK(mh.posterior_evals == 1000);
  CHECK_THROWS_AS(iit_run(target, BalancingRule::min_rule(), 0, RunLimit{}, 1), contract_error);
}

TEST_CASE("non-balancing rules are rejected by the balanced runner") {
  const auto target = testing::uniform_ring(4);
  CHECK_THROWS_AS(iit_run(target, BalancingRule::power_rule(0.3), 0, 10, 1), contract_error);
  CHECK_THROWS_AS(zanella_run(target, BalancingRule::power_rule(0.3), 0, 1.0, 1),
                  contract_error);
}
