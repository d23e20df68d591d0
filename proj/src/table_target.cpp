#include "iit/table_target.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "iit/rng.hpp"

namespace iit {

TableTarget::TableTarget(std::vector<double> log_mass, std::vector<std::vector<int>> adjacency,
                         double dimension_p)
    : log_mass_(std::move(log_mass)), adjacency_(std::move(adjacency)), dimension_p_(dimension_p) {
  const int n = static_cast<int>(log_mass_.size());
  if (n < 2) throw contract_error("TableTarget: need at least two states");
  if (static_cast<int>(adjacency_.size()) != n)
    throw contract_error("TableTarget: table sizes disagree");
  if (!(dimension_p_ > 1.0)) throw contract_error("TableTarget: dimension p must exceed 1");
  for (const double lm : log_mass_)
    if (!std::isfinite(lm)) throw structure_error("TableTarget: log-mass must be finite");
  for (int x = 0; x < n; ++x) {
    if (adjacency_[x].empty()) throw structure_error("TableTarget: empty neighborhood");
    std::set<int> seen;
    for (const int y : adjacency_[x]) {
      if (y < 0 || y >= n) throw structure_error("TableTarget: neighbor index out of range");
      if (y == x) throw structure_error("TableTarget: state listed as its own neighbor");
      if (!seen.insert(y).second) throw structure_error("TableTarget: duplicate neighbor");
      const auto& back = adjacency_[y];
      if (std::find(back.begin(), back.end(), x) == back.end())
        throw structure_error("TableTarget: adjacency is not symmetric");
    }
  }
}

int TableTarget::parse_state(const std::string& text) const {
  std::size_t used = 0;
  int x = 0;
  try {
    x = std::stoi(text, &used);
  } catch (const std::exception&) {
    throw config_error("bad state '" + text + "'");
  }
  if (used != text.size() || x < 0 || x >= size())
    throw config_error("bad state '" + text + "'");
  return x;
}

std::vector<int> TableTarget::enumerate_states() const {
  std::vector<int> states(log_mass_.size());
  std::iota(states.begin(), states.end(), 0);
  return states;
}

TableTarget TableTarget::scaled(double log_factor) const {
  std::vector<double> shifted = log_mass_;
  for (double& lm : shifted) lm += log_factor;
  return TableTarget(std::move(shifted), adjacency_, dimension_p_);
}

TableTarget TableTarget::random_fixture(int n, std::uint64_t seed, double log_scale) {
  SplitRng pick(seed ^ 0x70b0ULL);
  const auto topology = static_cast<Topology>(pick.uniform_int(5));
  return random_fixture(n, seed, log_scale, topology);
}

TableTarget TableTarget::random_fixture(int n, std::uint64_t seed, double log_scale,
                                        Topology topology) {
  if (n < 3) throw contract_error("random_fixture: need at least three states");
  SplitRng rng(seed);
  std::vector<std::set<int>> adj(static_cast<std::size_t>(n));
  auto link = [&adj](int a, int b) {
    if (a == b) return;
    adj[static_cast<std::size_t>(a)].insert(b);
    adj[static_cast<std::size_t>(b)].insert(a);
  };
  switch (topology) {
    case Topology::path:
      for (int i = 0; i + 1 < n; ++i) link(i, i + 1);
      break;
    case Topology::ring:
      for (int i = 0; i < n; ++i) link(i, (i + 1) % n);
      break;
    case Topology::random_tree:
      for (int i = 1; i < n; ++i)
        link(i, static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(i))));
      break;
    case Topology::grid: {
      int cols = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n))));
      cols = std::max(2, cols);
      for (int i = 0; i < n; ++i) {
        if ((i + 1) % cols != 0 && i + 1 < n) link(i, i + 1);
        if (i + cols < n) link(i, i + cols);
      }
      // the tail row may be shorter than cols; tie any stray component back
      for (int i = 1; i < n; ++i)
        if (adj[static_cast<std::size_t>(i)].empty()) link(i, i - 1);
      break;
    }
    case Topology::tree_with_chords: {
      for (int i = 1; i < n; ++i)
        link(i, static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(i))));
      const int extra = n / 3;
      for (int e = 0; e < extra; ++e) {
        const int a = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n)));
        const int b = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n)));
        link(a, b);
      }
      break;
    }
  }
  std::vector<std::vector<int>> adjacency(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    adjacency[static_cast<std::size_t>(i)].assign(adj[static_cast<std::size_t>(i)].begin(),
                                                  adj[static_cast<std::size_t>(i)].end());
  std::vector<double> log_mass(static_cast<std::size_t>(n));
  for (double& lm : log_mass) lm = log_scale * rng.normal();
  return TableTarget(std::move(log_mass), std::move(adjacency), std::max(2.0, double(n)));
}

}  // namespace iit
