#pragma once

#include <functional>
#include <memory>
#include <string>

#include "iit/errors.hpp"

namespace iit {

enum class RuleKind {
  sqrt_weight,   // h(u) = sqrt(u)
  min_weight,    // h(u) = 1 ^ u
  plus_one,      // h(u) = 1 + u
  power,         // h(u) = u^a, a >= 0
  bounded,       // h(u) = (u ^ p^c) v (1 ^ u p^c), values in (0, p^c]
  composite,     // built by a combinator
};

// Log-domain evaluation of an arbitrary positive weight function:
// maps log u to log g(u).
using LogWeightFn = std::function<double(double)>;

// A proposal-weighting function h evaluated strictly in the log domain.
// Immutable after construction; cheap to copy; safe for concurrent use.
//
// A rule is "balancing" when h(u) = u h(1/u) for all u > 0; balanced rules
// are the ones for which the flat importance-weight law omega = 1/Z_h holds.
class BalancingRule {
 public:
  static BalancingRule sqrt_rule();
  static BalancingRule min_rule();
  static BalancingRule plus_one_rule();
  // h(u) = u^a. Balancing only at a = 0.5. Exponents above 0.5 are legal but
  // flagged aggressive(): the tail importance weights of such schemes blow up
  // super-exponentially on fast-decaying targets.
  static BalancingRule power_rule(double a);
  // Bounded balancing construction: h(u) = (u ^ p^c) v (1 ^ u p^c),
  // 0 < h <= p^c. Requires c > 0 and p > 1.
  static BalancingRule bounded_rule(double c, double p);

  // Combinators. Each returns a balancing rule when the noted inputs are
  // balancing; the g-based forms are balancing for arbitrary positive g.
  static BalancingRule mix(double a, const BalancingRule& h, double b,
                           const BalancingRule& hp);            // a h + b h'
  static BalancingRule symmetrize_product(const BalancingRule& h,
                                          LogWeightFn log_g);   // h(u) g(u) g(1/u)
  static BalancingRule min_form(LogWeightFn log_g);             // g(u) ^ u g(1/u)
  static BalancingRule max_form(LogWeightFn log_g);             // g(u) v u g(1/u)

  // log h(exp(log_u)). Finite and overflow-free for |log_u| up to ~700.
  // NaN input is a contract error.
  double log_weight(double log_u) const;

  bool is_balancing() const { return impl_->balancing; }
  bool aggressive() const { return impl_->aggressive; }
  RuleKind kind() const { return impl_->kind; }
  double power_exponent() const;   // power rules only
  double log_cap() const;          // bounded rules only: c log p
  const std::string& spec() const { return impl_->spec; }

 private:
  struct Impl {
    RuleKind kind;
    LogWeightFn log_eval;
    bool balancing = false;
    bool aggressive = false;
    double param_a = 0.0;       // exponent for power rules
    double param_log_cap = 0.0; // c log p for bounded rules
    std::string spec;
  };
  explicit BalancingRule(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<const Impl> impl_;
};

struct BalancingCheck {
  double max_residual = 0.0;   // max |log h(u) - log u - log h(1/u)|
  double worst_log_u = 0.0;
  int probes = 0;
  bool balancing = false;      // max_residual below tolerance
};

// Probes the balancing identity on log-uniform draws log u in [-50, 50].
BalancingCheck check_balancing(const BalancingRule& rule, int probe_count,
                               std::uint64_t seed = 0x5eedULL,
                               double tolerance = 1e-12);

// Rule grammar: "sqrt" | "min" | "plus1" | "pow:<a>" | "bounded:c=<c>".
// The bounded form needs the target's problem-size parameter p.
BalancingRule parse_rule(const std::string& spec, double dimension_p);

}  // namespace iit
