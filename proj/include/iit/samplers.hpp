#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "iit/chain.hpp"
#include "iit/core.hpp"
#include "iit/rng.hpp"

namespace iit {

// Stop after `steps` iterations, after the posterior-evaluation budget is
// reached, or at whichever comes first when both are set.
struct RunLimit {
  std::int64_t steps = -1;
  std::int64_t eval_budget = -1;

  static RunLimit for_steps(std::int64_t t) { return RunLimit{t, -1}; }
  static RunLimit for_evals(std::int64_t budget) { return RunLimit{-1, budget}; }

  bool reached(std::int64_t step, std::uint64_t evals) const {
    if (steps >= 0 && step >= steps) return true;
    if (eval_budget >= 0 && static_cast<std::int64_t>(evals) >= eval_budget) return true;
    return false;
  }
  void validate() const {
    if (steps < 1 && eval_budget < 1)
      throw contract_error("RunLimit: need a positive step count or evaluation budget");
  }
};

namespace detail {

// One informed move: draw a neighbor of the walker's state with probability
// proportional to exp(log_h_terms), advance, and return the chosen index.
template <class Walker>
std::size_t propose_and_move(Walker& walker, const std::vector<double>& log_h_terms,
                             SplitRng& rng) {
  const std::size_t j = draw_categorical_log(rng, log_h_terms);
  walker.move_to(j);
  return j;
}

template <class Walker, class RuleEval>
void informed_loop(Walker& walker, RuleEval&& log_h_of_ratio, const RunLimit& limit,
                   SplitRng& rng, std::vector<double>* out_log_z,
                   std::vector<typename std::decay_t<decltype(walker.state())>>* out_states,
                   std::vector<double>* out_center_log_mass) {
  std::vector<double> log_h_terms;
  auto profile_current = [&] {
    const auto masses = walker.neighbor_log_masses();
    const double center = walker.log_mass();
    log_h_terms.resize(masses.size());
    for (std::size_t j = 0; j < masses.size(); ++j)
      log_h_terms[j] = log_h_of_ratio(masses[j] - center);
  };
  profile_current();
  // at least one step regardless of how small an evaluation budget is
  for (std::int64_t k = 0; k == 0 || !limit.reached(k, walker.posterior_evals()); ++k) {
    propose_and_move(walker, log_h_terms, rng);
    profile_current();
    out_states->push_back(walker.state());
    out_log_z->push_back(log_sum_exp(log_h_terms));
    if (out_center_log_mass) out_center_log_mass->push_back(walker.log_mass());
  }
}

}  // namespace detail

// Rejection-free informed chain with a balancing weight function. Every step
// moves to a neighbor drawn with probability proportional to
// h(pi(y)/pi(x)); the sample's unnormalized log importance weight is
// -log Z_h at the visited state.
template <DiscreteTarget T>
WeightedChain<typename T::state_type> iit_run(const T& target, const BalancingRule& rule,
                                              typename T::state_type x0, const RunLimit& limit,
                                              std::uint64_t seed) {
  if (!rule.is_balancing())
    throw contract_error("iit_run: rule '" + rule.spec() +
                         "' is not balancing; use iit_power_run for power weights");
  limit.validate();
  SplitRng rng(seed);
  auto walker = make_walker(target, std::move(x0));
  WeightedChain<typename T::state_type> chain;
  chain.seed = seed;
  chain.sampler_tag = "iit:" + rule.spec();
  std::vector<double> log_z;
  detail::informed_loop(
      walker, [&rule](double lr) { return rule.log_weight(lr); }, limit, rng, &log_z,
      &chain.states, nullptr);
  chain.log_weights.reserve(log_z.size());
  for (const double lz : log_z) chain.log_weights.push_back(-lz);
  chain.posterior_evals = walker.posterior_evals();
  return chain;
}

template <DiscreteTarget T>
WeightedChain<typename T::state_type> iit_run(const T& target, const BalancingRule& rule,
                                              typename T::state_type x0, std::int64_t steps,
                                              std::uint64_t seed) {
  return iit_run(target, rule, std::move(x0), RunLimit::for_steps(steps), seed);
}

// Informed chain with power weights h(u) = u^a. The proposal favors heavier
// neighbors by pi^a; the importance weight carries the extra pi^{1-2a} factor
// that a balancing rule would cancel.
template <DiscreteTarget T>
WeightedChain<typename T::state_type> iit_power_run(const T& target, double a,
                                                    typename T::state_type x0,
                                                    const RunLimit& limit, std::uint64_t seed) {
  if (!(a >= 0.0)) throw contract_error("iit_power_run: exponent must be >= 0");
  limit.validate();
  SplitRng rng(seed);
  auto walker = make_walker(target, std::move(x0));
  WeightedChain<typename T::state_type> chain;
  chain.seed = seed;
  chain.sampler_tag = "iit-power:" + std::to_string(a);
  std::vector<double> log_z;
  std::vector<double> center_mass;
  detail::informed_loop(
      walker, [a](double lr) { return a * lr; }, limit, rng, &log_z, &chain.states,
      &center_mass);
  chain.log_weights.reserve(log_z.size());
  for (std::size_t k = 0; k < log_z.size(); ++k)
    chain.log_weights.push_back((1.0 - 2.0 * a) * center_mass[k] - log_z[k]);
  chain.posterior_evals = walker.posterior_evals();
  return chain;
}

template <DiscreteTarget T>
WeightedChain<typename T::state_type> iit_power_run(const T& target, double a,
                                                    typename T::state_type x0, std::int64_t steps,
                                                    std::uint64_t seed) {
  return iit_power_run(target, a, std::move(x0), RunLimit::for_steps(steps), seed);
}

// Random-walk Metropolis-Hastings on the neighborhood graph: uniform proposal
// over N(x), acceptance min{1, pi(y)|N(x)| / (pi(x)|N(y)|)}. Each iteration is
// charged one posterior evaluation (the proposed state), which is the
// budget-matching cost model even when a cached value is reused; all
// importance weights are 1.
template <DiscreteTarget T>
WeightedChain<typename T::state_type> rwmh_run(const T& target, typename T::state_type x0,
                                               const RunLimit& limit, std::uint64_t seed) {
  limit.validate();
  SplitRng rng(seed);
  auto walker = make_walker(target, std::move(x0));
  WeightedChain<typename T::state_type> chain;
  chain.seed = seed;
  chain.sampler_tag = "rwmh";
  std::uint64_t evals = 1;
  for (std::int64_t k = 0; k == 0 || !limit.reached(k, evals); ++k) {
    const auto& neigh = walker.neighbor_states();
    const std::size_t deg_x = neigh.size();
    const std::size_t j = rng.uniform_int(deg_x);
    const double log_mass_y = walker.neighbor_log_mass(j);
    ++evals;
    const std::size_t deg_y = degree(target, neigh[j]);
    const double log_accept = log_mass_y - walker.log_mass() +
                              std::log(static_cast<double>(deg_x)) -
                              std::log(static_cast<double>(deg_y));
    if (std::log(rng.uniform()) < log_accept) walker.move_to(j);
    chain.states.push_back(walker.state());
    chain.log_weights.push_back(0.0);
  }
  chain.posterior_evals = evals;
  return chain;
}

template <DiscreteTarget T>
WeightedChain<typename T::state_type> rwmh_run(const T& target, typename T::state_type x0,
                                               std::int64_t steps, std::uint64_t seed) {
  return rwmh_run(target, std::move(x0), RunLimit::for_steps(steps), seed);
}

namespace detail {

// Proposal mass 0.4/0.4/0.2 over add/delete/swap; an empty component's mass
// is renormalized across the nonempty ones, and the reverse-move density in
// the acceptance ratio accounts for that, keeping the kernel reversible.
inline double ads_component_weight(std::size_t n_add, std::size_t n_del, std::size_t n_swap,
                                   int component) {
  const double base[3] = {0.4, 0.4, 0.2};
  const std::size_t counts[3] = {n_add, n_del, n_swap};
  double total = 0.0;
  for (int c = 0; c < 3; ++c)
    if (counts[c] > 0) total += base[c];
  if (total <= 0.0) throw structure_error("ads: state has no moves at all");
  if (counts[component] == 0) return 0.0;
  return base[component] / total;
}

}  // namespace detail

// Add-delete-swap Metropolis-Hastings for inclusion-space targets.
template <AdsTarget T>
WeightedChain<typename T::state_type> ads_run(const T& target, typename T::state_type x0,
                                              const RunLimit& limit, std::uint64_t seed) {
  limit.validate();
  SplitRng rng(seed);
  WeightedChain<typename T::state_type> chain;
  chain.seed = seed;
  chain.sampler_tag = "ads";
  typename T::state_type x = std::move(x0);
  double log_mass_x = target.log_mass(x);
  std::uint64_t evals = 1;
  auto moves = target.ads_moves(x);
  for (std::int64_t k = 0; k == 0 || !limit.reached(k, evals); ++k) {
    const std::size_t counts[3] = {moves.add.size(), moves.del.size(), moves.swap.size()};
    double w[3];
    for (int c = 0; c < 3; ++c)
      w[c] = detail::ads_component_weight(counts[0], counts[1], counts[2], c);
    const double u = rng.uniform();
    int comp = (u < w[0]) ? 0 : (u < w[0] + w[1] ? 1 : 2);
    if (counts[comp] == 0) comp = (counts[0] ? 0 : (counts[1] ? 1 : 2));
    const auto& pool = (comp == 0) ? moves.add : (comp == 1 ? moves.del : moves.swap);
    const std::size_t j = rng.uniform_int(pool.size());
    const auto& y = pool[j];
    const double log_mass_y = target.log_mass(y);
    ++evals;
    auto moves_y = target.ads_moves(y);
    const std::size_t counts_y[3] = {moves_y.add.size(), moves_y.del.size(),
                                     moves_y.swap.size()};
    const int reverse = (comp == 0) ? 1 : (comp == 1 ? 0 : 2);
    const double forward_density =
        w[comp] / static_cast<double>(counts[comp]);
    const double reverse_density =
        detail::ads_component_weight(counts_y[0], counts_y[1], counts_y[2], reverse) /
        static_cast<double>(counts_y[reverse]);
    const double log_accept =
        log_mass_y - log_mass_x + std::log(reverse_density) - std::log(forward_density);
    if (std::log(rng.uniform()) < log_accept) {
      x = y;
      log_mass_x = log_mass_y;
      moves = std::move(moves_y);
    }
    chain.states.push_back(x);
    chain.log_weights.push_back(0.0);
  }
  chain.posterior_evals = evals;
  return chain;
}

template <AdsTarget T>
WeightedChain<typename T::state_type> ads_run(const T& target, typename T::state_type x0,
                                              std::int64_t steps, std::uint64_t seed) {
  return ads_run(target, std::move(x0), RunLimit::for_steps(steps), seed);
}

// Continuous-time informed chain: holds at x for an exponential time with
// mean 1/Z_h(x) (the importance weight, up to one global constant), then
// jumps like the informed proposal.
template <DiscreteTarget T>
HoldingTrajectory<typename T::state_type> zanella_run(const T& target, const BalancingRule& rule,
                                                      typename T::state_type x0,
                                                      double time_budget, std::uint64_t seed) {
  if (!rule.is_balancing()) throw contract_error("zanella_run: rule must be balancing");
  if (!(time_budget > 0.0)) throw contract_error("zanella_run: time budget must be positive");
  SplitRng rng(seed);
  auto walker = make_walker(target, std::move(x0));
  HoldingTrajectory<typename T::state_type> traj;
  traj.seed = seed;
  traj.sampler_tag = "zanella:" + rule.spec();
  std::vector<double> log_h_terms;
  double elapsed = 0.0;
  while (true) {
    const auto masses = walker.neighbor_log_masses();
    const double center = walker.log_mass();
    log_h_terms.resize(masses.size());
    for (std::size_t j = 0; j < masses.size(); ++j)
      log_h_terms[j] = rule.log_weight(masses[j] - center);
    const double log_z = log_sum_exp(log_h_terms);
    const double hold = rng.exponential(std::exp(-log_z));
    traj.states.push_back(walker.state());
    if (elapsed + hold >= time_budget) {
      traj.holding_times.push_back(time_budget - elapsed);
      elapsed = time_budget;
      break;
    }
    traj.holding_times.push_back(hold);
    elapsed += hold;
    detail::propose_and_move(walker, log_h_terms, rng);
  }
  traj.total_time = elapsed;
  traj.posterior_evals = walker.posterior_evals();
  return traj;
}

}  // namespace iit
