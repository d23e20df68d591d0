#pragma once

#include <cmath>
#include <numeric>
#include <vector>

#include "iit/spectral.hpp"
#include "iit/table_target.hpp"

namespace iit::testing {

// 3-state path with masses (0.7, 0.2, 0.1); the middle state is index 1.
inline TableTarget three_state_path() {
  return TableTarget({std::log(0.7), std::log(0.2), std::log(0.1)}, {{1}, {0, 2}, {1}}, 3.0);
}

inline TableTarget uniform_ring(int n) {
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) adj[static_cast<std::size_t>(i)] = {(i + n - 1) % n, (i + 1) % n};
  return TableTarget(std::vector<double>(static_cast<std::size_t>(n), 0.0), std::move(adj),
                     std::max(2.0, double(n)));
}

// Two flat plateaus of five states joined at one edge; the far plateau is
// p^{-nu} lighter. Valid decomposition fixture with labels {0,1} and the move
// map {0 -> 0, 1 -> 0}.
inline TableTarget two_plateau_chain(double p, double nu) {
  std::vector<double> masses(10, 0.0);
  for (int i = 5; i < 10; ++i) masses[static_cast<std::size_t>(i)] = -nu * std::log(p);
  std::vector<std::vector<int>> adj(10);
  for (int i = 0; i < 10; ++i) {
    if (i > 0) adj[static_cast<std::size_t>(i)].push_back(i - 1);
    if (i < 9) adj[static_cast<std::size_t>(i)].push_back(i + 1);
  }
  return TableTarget(std::move(masses), std::move(adj), p);
}

inline double exact_expectation(const spectral::ExactChain& chain,
                                const std::vector<double>& f) {
  double total = 0.0;
  for (int x = 0; x < chain.space.size(); ++x) total += chain.pi[x] * f[static_cast<std::size_t>(x)];
  return total;
}

struct MeanVar {
  double mean = 0.0;
  double var = 0.0;
};

inline MeanVar mean_and_variance(const std::vector<double>& values) {
  MeanVar out;
  for (const double v : values) out.mean += v;
  out.mean /= static_cast<double>(values.size());
  for (const double v : values) out.var += (v - out.mean) * (v - out.mean);
  out.var /= static_cast<double>(values.size() - 1);
  return out;
}

}  // namespace iit::testing
