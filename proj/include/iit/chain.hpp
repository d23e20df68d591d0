#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "iit/core.hpp"

namespace iit {

// Sampler output: visited states with unnormalized log importance weights.
// MH-style chains carry zero log-weights. posterior_evals counts log-mass
// evaluations and is the budget-matching currency across samplers.
template <class State>
struct WeightedChain {
  std::vector<State> states;
  std::vector<double> log_weights;
  std::uint64_t seed = 0;
  std::string sampler_tag;
  std::uint64_t posterior_evals = 0;

  std::size_t length() const { return states.size(); }
};

struct EstimatorReport {
  double estimate = 0.0;
  double ess = 0.0;             // (sum w)^2 / sum w^2, in [1, t]
  double log_normalizer = 0.0;  // log of the summed unnormalized weights
  std::optional<double> replicate_variance;  // filled by the experiment harness
};

// Self-normalized estimate of E_pi[f] from a weighted chain. Weights are
// combined under a single max-shift, so arbitrarily scaled log-weights are
// safe.
template <class State, class F>
EstimatorReport estimate(const WeightedChain<State>& chain, F&& f) {
  if (chain.states.empty()) throw contract_error("estimate: empty chain");
  if (chain.states.size() != chain.log_weights.size())
    throw contract_error("estimate: state/weight length mismatch");
  double shift = chain.log_weights[0];
  for (const double lw : chain.log_weights) {
    if (!std::isfinite(lw)) throw contract_error("estimate: non-finite log weight");
    shift = std::max(shift, lw);
  }
  double sum_w = 0.0, sum_w2 = 0.0, sum_fw = 0.0;
  for (std::size_t k = 0; k < chain.states.size(); ++k) {
    const double w = std::exp(chain.log_weights[k] - shift);
    sum_w += w;
    sum_w2 += w * w;
    sum_fw += w * static_cast<double>(f(chain.states[k]));
  }
  EstimatorReport report;
  report.estimate = sum_fw / sum_w;
  report.ess = (sum_w * sum_w) / sum_w2;
  report.log_normalizer = shift + std::log(sum_w);
  return report;
}

// Continuous-time trajectory: states with the time spent in each (the final
// holding time is truncated at the budget).
template <class State>
struct HoldingTrajectory {
  std::vector<State> states;
  std::vector<double> holding_times;
  double total_time = 0.0;
  std::uint64_t seed = 0;
  std::string sampler_tag;
  std::uint64_t posterior_evals = 0;

  // Time averages are the self-normalized estimator with the holding times as
  // weights.
  WeightedChain<State> as_weighted_chain() const {
    WeightedChain<State> chain;
    chain.states = states;
    chain.log_weights.reserve(holding_times.size());
    for (const double tau : holding_times) chain.log_weights.push_back(std::log(tau));
    chain.seed = seed;
    chain.sampler_tag = sampler_tag;
    chain.posterior_evals = posterior_evals;
    return chain;
  }
};

}  // namespace iit
