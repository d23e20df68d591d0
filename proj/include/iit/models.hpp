#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "iit/core.hpp"

namespace iit::models {

// Path target on {0, ..., p} with an explicit tail-decay profile.
//   flat_top:  mass(0) = mass(1), then exact ratio r per step
//   strict:    exact ratio r per step from a unique mode at 0
//   power_law: mass(k) proportional to r^{-k^c}, mass(0) = mass(1)
class ToyChain {
 public:
  enum class Profile { flat_top, strict, power_law };

  ToyChain(int p, double r, Profile profile = Profile::flat_top, double curvature = 1.0);

  using state_type = int;
  double dimension_p() const { return static_cast<double>(p_); }
  double log_mass(int x) const;
  std::vector<int> neighbors(int x) const;
  std::size_t degree(int x) const { return (x == 0 || x == p_) ? 1u : 2u; }
  std::string format_state(int x) const { return std::to_string(x); }
  int parse_state(const std::string& text) const;
  std::vector<int> enumerate_states() const;
  int top_state() const { return p_; }

 private:
  int p_;
  double log_r_;
  Profile profile_;
  double curvature_;
};

// Hypercube target with two equally heavy models (the empty one and the one
// containing only variable 1): mass(x) = r^{-d(x)} with d counting the
// variables beyond the first. Bit i of the state encodes variable i+1.
class TwoModeHypercube {
 public:
  TwoModeHypercube(int p, double r);

  using state_type = std::uint64_t;
  double dimension_p() const { return static_cast<double>(p_); }
  double log_mass(std::uint64_t x) const;
  std::vector<std::uint64_t> neighbors(std::uint64_t x) const;
  std::size_t degree(std::uint64_t) const { return static_cast<std::size_t>(p_); }
  std::string format_state(std::uint64_t x) const;
  std::uint64_t parse_state(const std::string& text) const;
  std::vector<std::uint64_t> enumerate_states() const;
  int bit_count() const { return p_; }

 private:
  int p_;
  double log_r_;
};

// Hypercube target whose two heaviest models are the singletons {1} and {2},
// which are not adjacent under single-flip moves: mass(x) = r^{-d(x)} with
// d(x) the Hamming distance to the nearer singleton. Optional swap moves
// (move one included variable elsewhere) connect the two modes.
class IsolatedModesHypercube {
 public:
  IsolatedModesHypercube(int p, double r, bool with_swaps);

  using state_type = std::uint64_t;
  double dimension_p() const { return static_cast<double>(p_); }
  double log_mass(std::uint64_t x) const;
  std::vector<std::uint64_t> neighbors(std::uint64_t x) const;
  std::string format_state(std::uint64_t x) const;
  std::uint64_t parse_state(const std::string& text) const;
  std::vector<std::uint64_t> enumerate_states() const;
  std::vector<int> mode_indices_in_enumeration() const;  // {1}, {2} as masks 1 and 2

 private:
  int p_;
  double log_r_;
  bool with_swaps_;
};

enum class PermutationScenario { one, two };

// Weighted-permutation target: mass(tau) = prod_k W(k, rank of k), with
// log W(k, j) = -eta phi_k |j - mu_k| log p. Neighbors are all transpositions,
// so |N(tau)| = p(p-1)/2. Location/sharpness profiles are drawn once at
// construction:
//   scenario one: mu_k ~ U(k-0.1, k+0.1), phi_k ~ U(0.5, 1)
//   scenario two: mu_k ~ U(k-0.5, k+0.5), phi_k ~ U(0.1, 1)
class WeightedPermutations {
 public:
  WeightedPermutations(int p, double eta, PermutationScenario scenario, std::uint64_t seed);

  using state_type = std::vector<int>;  // position -> variable, 0-indexed

  double dimension_p() const { return static_cast<double>(p_); }
  double log_mass(const state_type& tau) const;
  std::vector<state_type> neighbors(const state_type& tau) const;
  std::size_t degree(const state_type&) const { return pairs_.size(); }
  std::string format_state(const state_type& tau) const;
  state_type parse_state(const std::string& text) const;
  std::vector<state_type> enumerate_states() const;
  state_type identity_state() const;
  int size() const { return p_; }

  // O(1) incremental evaluation along transposition moves.
  class Walker {
   public:
    Walker(const WeightedPermutations& target, state_type tau);
    const state_type& state() const { return tau_; }
    double log_mass() const { return log_mass_; }
    const std::vector<state_type>& neighbor_states();
    std::span<const double> neighbor_log_masses();
    double neighbor_log_mass(std::size_t j);
    void move_to(std::size_t j);
    std::uint64_t posterior_evals() const { return evals_; }

   private:
    double transposition_delta(std::size_t idx) const;

    const WeightedPermutations* target_;
    state_type tau_;
    std::vector<int> rank_of_;  // variable -> position
    double log_mass_;
    std::vector<double> neighbor_mass_;
    std::vector<char> single_known_;
    std::vector<state_type> neighbor_states_;
    bool masses_fresh_ = false;
    bool states_fresh_ = false;
    std::uint64_t evals_ = 0;
  };
  Walker make_walker(state_type tau) const { return Walker(*this, std::move(tau)); }

  double position_weight(int variable, int position) const;  // log W(k, j), 0-indexed inputs
  const std::vector<std::pair<int, int>>& transpositions() const { return pairs_; }

 private:
  int p_;
  double eta_;
  std::vector<double> mu_;
  std::vector<double> phi_;
  std::vector<std::pair<int, int>> pairs_;  // lexicographic position pairs
  double log_p_;
};

// Synthetic regression draw: AR(1)-correlated design (corr e^{-|i-j|}),
// causal coefficients snr sqrt(log p / n) U((2,3) u (-3,-2)) on the first
// s_star variables, unit noise.
struct RegressionData {
  Eigen::MatrixXd design;  // n x p
  Eigen::VectorXd response;
  Eigen::VectorXd beta;
  int s_star = 0;
  double snr = 0.0;
  std::uint64_t seed = 0;

  int rows() const { return static_cast<int>(design.rows()); }
  int cols() const { return static_cast<int>(design.cols()); }
  void to_csv(std::ostream& out) const;
  static RegressionData from_csv(std::istream& in);
};

RegressionData simulate_regression(int n, int p, int s_star, double snr, std::uint64_t seed);

template <class State>
struct AdsMoves {
  std::vector<State> add;
  std::vector<State> del;
  std::vector<State> swap;
};

// Spike-and-slab style posterior over inclusion vectors:
//   log mass(x) = -c0 |x| log p - (|x|/2) log(1+g) - (n/2) log(1 + g(1 - R^2_x))
// with the centered R-squared of the selected columns. Neighbor moves flip a
// single variable; an optional size cap drops add moves at the cap.
class VariableSelection {
 public:
  VariableSelection(RegressionData data, double g, double c0,
                    std::optional<int> size_cap = std::nullopt);

  using state_type = std::vector<std::uint16_t>;  // sorted included indices

  double dimension_p() const { return static_cast<double>(p_); }
  double log_mass(const state_type& x) const;
  std::vector<state_type> neighbors(const state_type& x) const;
  std::size_t degree(const state_type& x) const;
  std::string format_state(const state_type& x) const;
  state_type parse_state(const std::string& text) const;
  std::vector<state_type> enumerate_states() const;  // small p only (cap-checked downstream)
  AdsMoves<state_type> ads_moves(const state_type& x) const;

  state_type causal_state() const;  // the data's true support
  int variable_count() const { return p_; }
  const RegressionData& data() const { return data_; }

  // Per-chain evaluator holding a triangular factorization of the selected
  // Gram block; add/delete moves are rank-one updates, with a full
  // refactorization every 256 accepted moves to bound floating drift.
  class Walker {
   public:
    Walker(const VariableSelection& target, state_type x0);
    const state_type& state() const { return canonical_; }
    double log_mass() const { return log_mass_; }
    const std::vector<state_type>& neighbor_states();
    std::span<const double> neighbor_log_masses();
    double neighbor_log_mass(std::size_t j);
    void move_to(std::size_t j);
    std::uint64_t posterior_evals() const { return evals_; }

   private:
    void refactor();
    void refresh_inverse();
    void rebuild_canonical();
    std::vector<int> flip_list() const;
    double log_mass_from_explained(double explained, int model_size) const;

    const VariableSelection* target_;
    std::vector<int> selected_;      // insertion order (factor order)
    state_type canonical_;           // sorted copy
    Eigen::MatrixXd factor_;         // lower-triangular Cholesky of the Gram block
    Eigen::MatrixXd factor_inverse_; // refreshed per profile when deletes are needed
    Eigen::VectorXd half_solve_;     // L^{-1} b over the selected block
    double explained_ = 0.0;         // b' G^{-1} b
    double log_mass_ = 0.0;
    std::vector<state_type> neighbor_states_;
    std::vector<double> neighbor_mass_;
    std::vector<char> neighbor_known_;
    bool states_fresh_ = false;
    bool inverse_fresh_ = false;
    std::uint64_t evals_ = 0;
    std::uint64_t accepted_ = 0;
  };
  Walker make_walker(state_type x0) const { return Walker(*this, std::move(x0)); }

  double gram(int i, int j) const { return gram_(i, j); }
  double cross(int j) const { return cross_[j]; }
  double total_ss() const { return total_ss_; }
  double explained_floor_guard(double explained) const;
  double log_mass_value(double explained, int model_size) const;

 private:
  RegressionData data_;
  int n_ = 0;
  int p_ = 0;
  double g_ = 0.0;
  double c0_ = 0.0;
  std::optional<int> size_cap_;
  Eigen::MatrixXd centered_;  // centered design
  Eigen::VectorXd centered_y_;
  Eigen::MatrixXd gram_;      // centered' centered, p x p
  Eigen::VectorXd cross_;     // centered' centered_y
  double total_ss_ = 0.0;
  double log_p_ = 0.0;
  double log_1g_ = 0.0;
};

// Best-neighbor posterior log-ratio in base p; negative exactly at local
// modes.
template <DiscreteTarget T>
double nu_statistic(const T& target, const typename T::state_type& x) {
  const double center = target.log_mass(x);
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& y : target.neighbors(x)) best = std::max(best, target.log_mass(y));
  return (best - center) / std::log(target.dimension_p());
}

// Number of visited states that strictly dominate their whole neighborhood.
// Ties do not count (strict convention).
template <DiscreteTarget T, class Container>
int count_local_modes(const T& target, const Container& visited) {
  if (visited.empty()) throw contract_error("count_local_modes: no visited states");
  int modes = 0;
  for (const auto& x : visited) {
    const double center = target.log_mass(x);
    bool dominated = false;
    for (const auto& y : target.neighbors(x)) {
      if (target.log_mass(y) >= center) {
        dominated = true;
        break;
      }
    }
    if (!dominated) ++modes;
  }
  return modes;
}

}  // namespace iit::models
