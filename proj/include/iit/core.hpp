#pragma once

#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "iit/balancing.hpp"
#include "iit/errors.hpp"

namespace iit {

// Contract for a finite target distribution with a symmetric neighborhood
// structure. Implementations must keep log_mass/neighbors pure and free of
// internal mutation so a shared target can serve concurrent chains.
//
//   state_type     regular, totally ordered (operator<), equality-comparable
//   dimension_p()  problem-size parameter p > 1
//   log_mass(x)    unnormalized log posterior, finite for every state
//   neighbors(x)   deterministic order; symmetric; never contains x
//   format_state(x)  stable string encoding used in CSV/JSON output
template <class T>
concept DiscreteTarget = requires(const T t, const typename T::state_type x) {
  typename T::state_type;
  { t.dimension_p() } -> std::convertible_to<double>;
  { t.log_mass(x) } -> std::convertible_to<double>;
  { t.neighbors(x) } -> std::convertible_to<std::vector<typename T::state_type>>;
  { t.format_state(x) } -> std::convertible_to<std::string>;
};

// Targets whose full state space can be listed (required by the exact
// verification machinery).
template <class T>
concept EnumerableTarget = DiscreteTarget<T> && requires(const T t) {
  { t.enumerate_states() } -> std::convertible_to<std::vector<typename T::state_type>>;
};

// Targets exposing the add/delete/swap move partition of inclusion spaces.
template <class T>
concept AdsTarget = DiscreteTarget<T> && requires(const T t, const typename T::state_type x) {
  { t.ads_moves(x).add } -> std::convertible_to<std::vector<typename T::state_type>>;
  { t.ads_moves(x).del } -> std::convertible_to<std::vector<typename T::state_type>>;
  { t.ads_moves(x).swap } -> std::convertible_to<std::vector<typename T::state_type>>;
};

inline double log_sum_exp(std::span<const double> values) {
  if (values.empty()) return -std::numeric_limits<double>::infinity();
  double shift = values[0];
  for (const double v : values) shift = std::max(shift, v);
  if (!std::isfinite(shift)) return shift;
  double acc = 0.0;
  for (const double v : values) acc += std::exp(v - shift);
  return shift + std::log(acc);
}

template <DiscreteTarget T>
std::size_t degree(const T& target, const typename T::state_type& x) {
  if constexpr (requires { { target.degree(x) } -> std::convertible_to<std::size_t>; }) {
    return target.degree(x);
  } else {
    return target.neighbors(x).size();
  }
}

// Local view of the target around one state: posterior log-ratios over the
// neighborhood, their transformed weights, and the local normalizer.
struct LocalProfile {
  std::vector<double> log_ratios;   // log pi(y) - log pi(x), y in N(x)
  std::vector<double> log_h_terms;  // log h(pi(y)/pi(x))
  double log_zh = 0.0;              // log-sum-exp of log_h_terms
};

// Generic per-chain evaluator. Holds the current state, its log-mass, and the
// lazily computed neighborhood profile; counts every posterior evaluation.
// Models with cheaper incremental updates provide their own walker with the
// same surface (see make_walker below).
template <DiscreteTarget T>
class BasicWalker {
 public:
  using state_type = typename T::state_type;

  BasicWalker(const T& target, state_type x0)
      : target_(&target), state_(std::move(x0)), log_mass_(target.log_mass(state_)) {
    ++evals_;
  }

  const state_type& state() const { return state_; }
  double log_mass() const { return log_mass_; }
  std::uint64_t posterior_evals() const { return evals_; }

  const std::vector<state_type>& neighbor_states() {
    ensure_neighbors();
    return neighbors_;
  }

  std::span<const double> neighbor_log_masses() {
    ensure_neighbors();
    for (std::size_t j = 0; j < neighbors_.size(); ++j) {
      if (!known_[j]) {
        neighbor_mass_[j] = target_->log_mass(neighbors_[j]);
        known_[j] = true;
        ++evals_;
      }
    }
    return neighbor_mass_;
  }

  double neighbor_log_mass(std::size_t j) {
    ensure_neighbors();
    if (!known_[j]) {
      neighbor_mass_[j] = target_->log_mass(neighbors_[j]);
      known_[j] = true;
      ++evals_;
    }
    return neighbor_mass_[j];
  }

  void move_to(std::size_t j) {
    ensure_neighbors();
    const double lm = neighbor_log_mass(j);
    state_ = neighbors_[j];
    log_mass_ = lm;
    neighbors_fresh_ = false;
  }

 private:
  void ensure_neighbors() {
    if (!neighbors_fresh_) {
      neighbors_ = target_->neighbors(state_);
      if (neighbors_.empty())
        throw structure_error("target has an empty neighborhood (irreducibility contract)");
      neighbor_mass_.assign(neighbors_.size(), 0.0);
      known_.assign(neighbors_.size(), false);
      neighbors_fresh_ = true;
    }
  }

  const T* target_;
  state_type state_;
  double log_mass_;
  std::vector<state_type> neighbors_;
  std::vector<double> neighbor_mass_;
  std::vector<bool> known_;
  bool neighbors_fresh_ = false;
  std::uint64_t evals_ = 0;
};

template <DiscreteTarget T>
auto make_walker(const T& target, typename T::state_type x0) {
  if constexpr (requires { target.make_walker(x0); }) {
    return target.make_walker(std::move(x0));
  } else {
    return BasicWalker<T>(target, std::move(x0));
  }
}

// Profile of the target around x under the given rule. One posterior
// evaluation per neighbor plus one for the center.
template <DiscreteTarget T>
LocalProfile local_profile(const T& target, const BalancingRule& rule,
                           const typename T::state_type& x) {
  const double center = target.log_mass(x);
  const auto neigh = target.neighbors(x);
  if (neigh.empty())
    throw structure_error("local_profile: empty neighborhood (irreducibility contract)");
  LocalProfile profile;
  profile.log_ratios.reserve(neigh.size());
  profile.log_h_terms.reserve(neigh.size());
  for (const auto& y : neigh) {
    const double lr = target.log_mass(y) - center;
    profile.log_ratios.push_back(lr);
    profile.log_h_terms.push_back(rule.log_weight(lr));
  }
  profile.log_zh = log_sum_exp(profile.log_h_terms);
  return profile;
}

}  // namespace iit
