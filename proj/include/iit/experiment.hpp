#pragma once

#include <atomic>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "iit/models.hpp"
#include "iit/samplers.hpp"

namespace iit {

struct SamplerSpec {
  std::string kind;       // iit | iit-power | rwmh | ads
  std::string rule;       // iit only
  double power_a = 0.5;   // iit-power only

  std::string label() const {
    if (kind == "iit") return "iit:" + rule;
    if (kind == "iit-power") {
      std::ostringstream out;
      out << "iit-power:" << power_a;
      return out.str();
    }
    return kind;
  }
};

template <DiscreteTarget T>
WeightedChain<typename T::state_type> run_sampler(const T& target, const SamplerSpec& spec,
                                                  typename T::state_type x0,
                                                  const RunLimit& limit, std::uint64_t seed) {
  if (spec.kind == "iit")
    return iit_run(target, parse_rule(spec.rule, target.dimension_p()), std::move(x0), limit,
                   seed);
  if (spec.kind == "iit-power") return iit_power_run(target, spec.power_a, std::move(x0), limit, seed);
  if (spec.kind == "rwmh") return rwmh_run(target, std::move(x0), limit, seed);
  if (spec.kind == "ads") {
    if constexpr (AdsTarget<T>) {
      return ads_run(target, std::move(x0), limit, seed);
    } else {
      throw config_error("sampler 'ads' needs an add/delete/swap move partition, which model does not expose");
    }
  }
  throw config_error("unknown sampler kind '" + spec.kind + "'");
}

template <class State>
struct NamedFunctional {
  std::string name;
  std::function<double(const State&)> eval;
};

template <class State>
struct SamplerOutcome {
  SamplerSpec spec;
  std::vector<WeightedChain<State>> chains;                // one per replicate
  std::vector<std::vector<double>> estimates;              // [functional][replicate]
  std::vector<double> estimate_mean;                       // per functional
  std::vector<double> estimate_variance;                   // per functional, across replicates
  double ess_mean = 0.0;
  std::vector<std::int64_t> hit_iteration;                 // 1-based; -1 when never hit
};

template <class State>
struct ExperimentResult {
  std::vector<SamplerOutcome<State>> samplers;
  std::vector<double> nu_over_distinct_states;  // pooled over all chains
  int local_mode_count = 0;
  State best_state;
  std::string best_state_label;
  double best_state_log_mass = 0.0;
};

// Runs `replicates` independent chains per sampler at a matched posterior
// evaluation budget. The replicate-k stream derives from seed_base + k, so
// reruns are bit-identical and samplers share common random numbers.
// Diagnostics (the nu statistic and local-mode count) pool the distinct
// states visited by any chain.
template <DiscreteTarget T>
ExperimentResult<typename T::state_type> run_experiment(
    const T& target, typename T::state_type x0, const std::vector<SamplerSpec>& samplers,
    int replicates, std::int64_t eval_budget,
    const std::vector<NamedFunctional<typename T::state_type>>& functionals,
    std::uint64_t seed_base, int workers = 1) {
  using State = typename T::state_type;
  if (replicates < 2) throw contract_error("run_experiment: need at least 2 replicates");
  if (eval_budget < 1) throw contract_error("run_experiment: need a positive evaluation budget");
  if (samplers.empty()) throw contract_error("run_experiment: no samplers given");

  ExperimentResult<State> result;
  result.samplers.resize(samplers.size());
  for (std::size_t s = 0; s < samplers.size(); ++s) {
    result.samplers[s].spec = samplers[s];
    result.samplers[s].chains.resize(static_cast<std::size_t>(replicates));
  }

  struct Job {
    std::size_t sampler;
    int replicate;
  };
  std::vector<Job> jobs;
  for (std::size_t s = 0; s < samplers.size(); ++s)
    for (int r = 0; r < replicates; ++r) jobs.push_back({s, r});

  std::atomic<std::size_t> cursor{0};
  std::exception_ptr failure = nullptr;
  std::mutex failure_mutex;
  auto work = [&] {
    while (true) {
      const std::size_t mine = cursor.fetch_add(1);
      if (mine >= jobs.size()) return;
      const Job job = jobs[mine];
      try {
        result.samplers[job.sampler].chains[static_cast<std::size_t>(job.replicate)] =
            run_sampler(target, samplers[job.sampler], x0, RunLimit::for_evals(eval_budget),
                        seed_base + static_cast<std::uint64_t>(job.replicate));
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };
  const int pool = std::max(1, std::min<int>(workers, static_cast<int>(jobs.size())));
  if (pool == 1) {
    work();
  } else {
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(pool));
    for (int i = 0; i < pool; ++i) threads.emplace_back(work);
    for (auto& t : threads) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  // Pooled distinct-state diagnostics and the best visited state.
  std::set<State> distinct;
  for (const auto& outcome : result.samplers)
    for (const auto& chain : outcome.chains)
      for (const auto& x : chain.states) distinct.insert(x);
  bool first = true;
  for (const auto& x : distinct) {
    const double lm = target.log_mass(x);
    if (first || lm > result.best_state_log_mass) {
      result.best_state = x;
      result.best_state_log_mass = lm;
      first = false;
    }
  }
  result.best_state_label = target.format_state(result.best_state);
  result.nu_over_distinct_states.reserve(distinct.size());
  for (const auto& x : distinct)
    result.nu_over_distinct_states.push_back(models::nu_statistic(target, x));
  result.local_mode_count = models::count_local_modes(target, distinct);

  for (auto& outcome : result.samplers) {
    outcome.estimates.assign(functionals.size(), std::vector<double>());
    outcome.hit_iteration.assign(static_cast<std::size_t>(replicates), -1);
    double ess_total = 0.0;
    for (int r = 0; r < replicates; ++r) {
      const auto& chain = outcome.chains[static_cast<std::size_t>(r)];
      for (std::size_t f = 0; f < functionals.size(); ++f) {
        const auto report = estimate(chain, functionals[f].eval);
        outcome.estimates[f].push_back(report.estimate);
        if (f == 0) ess_total += report.ess;
      }
      for (std::size_t k = 0; k < chain.states.size(); ++k) {
        if (chain.states[k] == result.best_state) {
          outcome.hit_iteration[static_cast<std::size_t>(r)] = static_cast<std::int64_t>(k + 1);
          break;
        }
      }
    }
    outcome.ess_mean = functionals.empty() ? 0.0 : ess_total / replicates;
    for (std::size_t f = 0; f < functionals.size(); ++f) {
      const auto& values = outcome.estimates[f];
      double mean = 0.0;
      for (const double v : values) mean += v;
      mean /= static_cast<double>(values.size());
      double var = 0.0;
      for (const double v : values) var += (v - mean) * (v - mean);
      var /= static_cast<double>(values.size() - 1);
      outcome.estimate_mean.push_back(mean);
      outcome.estimate_variance.push_back(var);
    }
  }
  return result;
}

}  // namespace iit
