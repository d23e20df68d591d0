#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "iit/core.hpp"

namespace iit {

// Enumerable target given by explicit log-mass and adjacency tables. Used for
// randomized verification fixtures and anywhere a small ad-hoc target is
// convenient. Construction validates the structural contract: symmetric
// adjacency, no self-loops, no empty neighborhoods, finite masses.
class TableTarget {
 public:
  using state_type = int;

  TableTarget(std::vector<double> log_mass, std::vector<std::vector<int>> adjacency,
              double dimension_p);

  double dimension_p() const { return dimension_p_; }
  double log_mass(int x) const { return log_mass_.at(static_cast<std::size_t>(x)); }
  const std::vector<int>& neighbors(int x) const {
    return adjacency_.at(static_cast<std::size_t>(x));
  }
  std::size_t degree(int x) const { return adjacency_[static_cast<std::size_t>(x)].size(); }
  std::string format_state(int x) const { return std::to_string(x); }
  int parse_state(const std::string& text) const;
  std::vector<int> enumerate_states() const;
  int size() const { return static_cast<int>(log_mass_.size()); }

  // Rescales every mass by a constant (log-domain shift); the local geometry
  // is unchanged since only ratios enter the samplers.
  TableTarget scaled(double log_factor) const;

  enum class Topology { path, ring, random_tree, grid, tree_with_chords };

  // Connected random fixture on n states with log-masses ~ N(0, log_scale^2).
  static TableTarget random_fixture(int n, std::uint64_t seed, double log_scale = 2.0);
  static TableTarget random_fixture(int n, std::uint64_t seed, double log_scale,
                                    Topology topology);

 private:
  std::vector<double> log_mass_;
  std::vector<std::vector<int>> adjacency_;
  double dimension_p_;
};

}  // namespace iit
