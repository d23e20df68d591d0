#pragma once

#include <Eigen/Dense>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "iit/balancing.hpp"
#include "iit/core.hpp"

namespace iit::spectral {

inline constexpr std::size_t kDefaultStateCap = 4096;

// Index-space view of an enumerable target: unnormalized log-masses plus the
// symmetric adjacency structure, with printable state labels for reports.
struct EnumeratedSpace {
  std::vector<double> log_mass;
  std::vector<std::vector<int>> adjacency;
  double dimension_p = 2.0;
  std::vector<std::string> labels;

  int size() const { return static_cast<int>(log_mass.size()); }
  Eigen::VectorXd normalized_pi() const;
};

// Enumerates a target into index space. Validates the cap, adjacency
// symmetry, and connectivity of the neighborhood graph.
template <EnumerableTarget T>
struct Enumeration {
  EnumeratedSpace space;
  std::vector<typename T::state_type> states;
  std::map<typename T::state_type, int> index;
};

void validate_space(const EnumeratedSpace& space, std::size_t cap);

template <EnumerableTarget T>
Enumeration<T> enumerate_space(const T& target, std::size_t cap = kDefaultStateCap) {
  Enumeration<T> out;
  out.states = target.enumerate_states();
  if (out.states.size() > cap)
    throw resource_error("state space of size " + std::to_string(out.states.size()) +
                         " exceeds the cap " + std::to_string(cap) +
                         " (raise it with the cap option)");
  for (int i = 0; i < static_cast<int>(out.states.size()); ++i) out.index[out.states[i]] = i;
  out.space.dimension_p = target.dimension_p();
  out.space.log_mass.reserve(out.states.size());
  out.space.labels.reserve(out.states.size());
  out.space.adjacency.resize(out.states.size());
  for (std::size_t i = 0; i < out.states.size(); ++i) {
    out.space.log_mass.push_back(target.log_mass(out.states[i]));
    out.space.labels.push_back(target.format_state(out.states[i]));
    const auto neigh = target.neighbors(out.states[i]);
    auto& row = out.space.adjacency[i];
    row.reserve(neigh.size());
    for (const auto& y : neigh) {
      const auto it = out.index.find(y);
      if (it == out.index.end())
        throw structure_error("neighbor of state " + out.space.labels[i] +
                              " is outside the enumerated space");
      row.push_back(it->second);
    }
  }
  validate_space(out.space, cap);
  return out;
}

enum class MatrixKind { kernel, rate };

// Dense exact objects for the informed chain on an enumerable target: the
// one-step kernel, its stationary law, the local normalizers, the importance
// weights, and the continuous-time rate matrix whose gap drives estimator
// variance.
struct ExactChain {
  EnumeratedSpace space;
  Eigen::VectorXd pi;         // normalized target law
  Eigen::MatrixXd kernel;     // informed proposal kernel
  Eigen::VectorXd pi_h;       // stationary law of the kernel
  Eigen::VectorXd log_zh;     // per-state log local normalizer
  Eigen::VectorXd omega;      // pi / pi_h (both normalized)
  Eigen::VectorXd log_omega;
  Eigen::MatrixXd rate;       // off-diagonal kernel/omega, zero row sums
  double expected_zh = 0.0;   // E_pi[Z_h]
  std::optional<BalancingRule> rule;  // set when built from a balancing rule
  double power_a = std::numeric_limits<double>::quiet_NaN();  // set for power weights
  std::string weighting;
};

ExactChain build_exact(const EnumeratedSpace& space, const BalancingRule& rule,
                       std::size_t cap = kDefaultStateCap);
ExactChain build_exact_power(const EnumeratedSpace& space, double a,
                             std::size_t cap = kDefaultStateCap);

template <EnumerableTarget T>
ExactChain build_exact(const T& target, const BalancingRule& rule,
                       std::size_t cap = kDefaultStateCap) {
  return build_exact(enumerate_space(target, cap).space, rule, cap);
}
template <EnumerableTarget T>
ExactChain build_exact_power(const T& target, double a, std::size_t cap = kDefaultStateCap) {
  return build_exact_power(enumerate_space(target, cap).space, a, cap);
}

// Exact random-walk Metropolis-Hastings kernel on the neighborhood graph,
// reversible with respect to the target law.
Eigen::MatrixXd mh_kernel(const EnumeratedSpace& space);

// Exact kernel of a general MH sampler given its proposal rows. The callback
// returns (state index, proposal probability) pairs; rows must sum to <= 1.
Eigen::MatrixXd mh_kernel_from_proposal(
    const EnumeratedSpace& space,
    const std::function<std::vector<std::pair<int, double>>(int)>& proposal_row);

// Spectral gap of a reversible stochastic or rate matrix via the
// stationary-weighted symmetrization and a self-adjoint eigensolver.
// Non-reversible input (flow asymmetry beyond `reversibility_tol`) is a
// contract error.
double spectral_gap(const Eigen::MatrixXd& matrix, const Eigen::VectorXd& stationary,
                    MatrixKind kind, double reversibility_tol = 1e-8);

// Restriction to S: off-diagonal entries copied, diagonal adjusted so rows
// sum to one (kernels) or zero (rate matrices).
Eigen::MatrixXd restrict_matrix(const Eigen::MatrixXd& matrix, const std::vector<int>& subset,
                                MatrixKind kind);

// Trace (watched chain) of a kernel on S: excursions outside S collapse into
// single transitions through the harmonic extension solve.
Eigen::MatrixXd trace_kernel(const Eigen::MatrixXd& kernel, const std::vector<int>& subset);

// Certified structure for a sharply unimodal target: the best-move map T, the
// certified improvement exponent nu, the neighborhood exponent alpha, and the
// path constant kappa. `valid` is false when certification fails; the witness
// names the offending state.
struct UnimodalCertificate {
  bool valid = false;
  std::string failure;
  int witness = -1;
  int mode = -1;
  std::vector<int> best_move;  // T(x); the mode maps to itself
  double nu = 0.0;
  double alpha = 0.0;
  double kappa = 0.0;
  bool had_ties = false;
};

UnimodalCertificate verify_unimodal(const EnumeratedSpace& space);

// Certified structure for a target concentrating on a small set.
struct ConcentrationCertificate {
  bool valid = false;
  std::string failure;
  int witness = -1;
  std::vector<int> target_set;
  int set_size = 0;      // M
  double mass_ratio = 1.0;  // B: max pi ratio within the set
  std::vector<int> best_move;  // T(x) for x outside the set; members map to themselves
  double nu = 0.0;
  double alpha = 0.0;
  double kappa = 0.0;
};

ConcentrationCertificate verify_concentration(const EnumeratedSpace& space,
                                              const std::vector<int>& target_set);

struct UnimodalBound {
  double bound = 0.0;        // kappa h(p^nu) / E_pi[Z_h]
  double kappa = 0.0;
  double h_at_pnu = 0.0;
  double expected_zh = 0.0;
  // Closed-form specialization for the named rules (plus1/min/sqrt), when the
  // chain's rule matches one.
  std::optional<double> closed_form;
};

UnimodalBound bound_unimodal(const UnimodalCertificate& cert, const ExactChain& chain);

// Path-constant bound for any reversible kernel or rate matrix:
// kappa * min_{x != mode} M(x, T(x)).
double bound_min_transition(const UnimodalCertificate& cert, const Eigen::MatrixXd& matrix);

struct SetBound {
  enum class Regime { restricted_set, trace_fallback };
  Regime regime = Regime::restricted_set;
  std::string note;
  // restricted_set regime
  double bound = 0.0;
  double kappa = 0.0;
  std::optional<double> expected_zh_cap;  // named-rule upper bound on E_pi[Z_h]
  // trace_fallback regime: uniformized trace kernel on the set and the
  // largest delta at which its connectivity graph stays connected.
  Eigen::MatrixXd trace_on_set;
  double delta = 0.0;
  double uniformization_b = 0.0;
  bool connected = false;
};

SetBound bound_set(const ConcentrationCertificate& cert, const ExactChain& chain,
                   double mass_ratio_tol = 1e-9);

// Worst-start total-variation mixing time of the continuous-time chain,
// computed through the uniformized kernel P = Q/b + I with b = 2 max |Q(x,x)|.
double mixing_time(const ExactChain& chain, double eps = 0.25);

struct DecompositionBound {
  bool valid = false;
  std::string failure;
  int witness_label = -1;
  double bound = 0.0;
  double kappa = 0.0;
  double nu = 0.0;       // certified push-forward improvement exponent
  double alpha = 0.0;    // certified in-degree exponent of the label map
  double epsilon = 0.0;  // certified boundary-mass fraction
  double nu_tilde = 0.0;
  double min_block_gap = 0.0;
  double max_zh = 0.0;
};

// Bound from a user-supplied clustering: `labels[x]` assigns each state to a
// cluster, `label_tmap[y]` is the improvement move on clusters (exactly one
// fixed point), `nu_tilde` selects the boundary condition to certify.
DecompositionBound bound_decomposition(const ExactChain& chain, const std::vector<int>& labels,
                                       const std::vector<int>& label_tmap, double nu_tilde);

}  // namespace iit::spectral
