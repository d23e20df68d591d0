#include "iit/balancing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "iit/rng.hpp"

namespace iit {

namespace {

double require_finite(double log_u) {
  if (std::isnan(log_u)) throw contract_error("log_weight: NaN log-ratio");
  return log_u;
}

// log(1 + e^x) without overflow.
double log1p_exp(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

}  // namespace

BalancingRule BalancingRule::sqrt_rule() {
  auto impl = std::make_shared<Impl>();
  impl->kind = RuleKind::sqrt_weight;
  impl->balancing = true;
  impl->spec = "sqrt";
  impl->log_eval = [](double lu) { return 0.5 * lu; };
  return BalancingRule(std::move(impl));
}

BalancingRule BalancingRule::min_rule() {
  auto impl = std::make_shared<Impl>();
  impl->kind = RuleKind::min_weight;
  impl->balancing = true;
  impl->spec = "min";
  impl->log_eval = [](double lu) { return std::min(0.0, lu); };
  return BalancingRule(std::move(impl));
}

BalancingRule BalancingRule::plus_one_rule() {
  auto impl = std::make_shared<Impl>();
  impl->kind = RuleKind::plus_one;
  impl->balancing = true;
  impl->spec = "plus1";
  impl->log_eval = [](double lu) { return log1p_exp(lu); };
  return BalancingRule(std::move(impl));
}

BalancingRule BalancingRule::power_rule(double a) {
  if (!(a >= 0.0)) throw contract_error("power_rule: exponent must be >= 0");
  auto impl = std::make_shared<Impl>();
  impl->kind = RuleKind::power;
  impl->balancing = (a == 0.5);
  impl->aggressive = (a > 0.5);
  impl->param_a = a;
  std::ostringstream os;
  os << "pow:" << a;
  impl->spec = os.str();
  impl->log_eval = [a](double lu) { return a * lu; };
  return BalancingRule(std::move(impl));
}

BalancingRule BalancingRule::bounded_rule(double c, double p) {
  if (!(c > 0.0)) throw contract_error("bounded_rule: c must be positive");
  if (!(p > 1.0)) throw contract_error("bounded_rule: p must exceed 1");
  const double cap = c * std::log(p);
  auto impl = std::make_shared<Impl>();
  impl->kind = RuleKind::bounded;
  impl->balancing = true;
  impl->param_log_cap = cap;
  std::ostringstream os;
  os << "bounded:c=" << c;
  impl->spec = os.str();
  impl->log_eval = [cap](double lu) {
    return std::max(std::min(lu, cap), std::min(0.0, lu + cap));
  };
  return BalancingRule(std::move(impl));
}

BalancingRule BalancingRule::mix(double a, const BalancingRule& h, double b,
                                 const BalancingRule& hp) {
  if (!(a >= 0.0) || !(b >= 0.0) || a + b <= 0.0)
    throw contract_error("mix: coefficients must be nonnegative, not both zero");
  auto impl = std::make_shared<Impl>();
  impl->kind = RuleKind::composite;
  impl->balancing = h.is_balancing() && hp.is_balancing();
  impl->spec = "mix(" + h.spec() + "," + hp.spec() + ")";
  const double la = std::log(a), lb = std::log(b);
  impl->log_eval = [la, lb, h, hp](double lu) {
    const double x = la + h.log_weight(lu);
    const double y = lb + hp.log_weight(lu);
    if (x == -std::numeric_limits<double>::infinity()) return y;
    if (y == -std::numeric_limits<double>::infinity()) return x;
    const double m = std::max(x, y);
    return m + std::log(std::exp(x - m) + std::exp(y - m));
  };
  return BalancingRule(std::move(impl));
}

BalancingRule BalancingRule::symmetrize_product(const BalancingRule& h, LogWeightFn log_g) {
  auto impl = std::make_shared<Impl>();
  impl->kind = RuleKind::composite;
  impl->balancing = h.is_balancing();
  impl->spec = "sym_prod(" + h.spec() + ")";
  impl->log_eval = [h, g = std::move(log_g)](double lu) {
    return h.log_weight(lu) + g(lu) + g(-lu);
  };
  return BalancingRule(std::move(impl));
}

BalancingRule BalancingRule::min_form(LogWeightFn log_g) {
  auto impl = std::make_shared<Impl>();
  impl->kind = RuleKind::composite;
  impl->balancing = true;
  impl->spec = "min_form(g)";
  impl->log_eval = [g = std::move(log_g)](double lu) {
    return std::min(g(lu), lu + g(-lu));
  };
  return BalancingRule(std::move(impl));
}

BalancingRule BalancingRule::max_form(LogWeightFn log_g) {
  auto impl = std::make_shared<Impl>();
  impl->kind = RuleKind::composite;
  impl->balancing = true;
  impl->spec = "max_form(g)";
  impl->log_eval = [g = std::move(log_g)](double lu) {
    return std::max(g(lu), lu + g(-lu));
  };
  return BalancingRule(std::move(impl));
}

double BalancingRule::log_weight(double log_u) const {
  return impl_->log_eval(require_finite(log_u));
}

double BalancingRule::power_exponent() const {
  if (impl_->kind != RuleKind::power) throw contract_error("power_exponent: not a power rule");
  return impl_->param_a;
}

double BalancingRule::log_cap() const {
  if (impl_->kind != RuleKind::bounded) throw contract_error("log_cap: not a bounded rule");
  return impl_->param_log_cap;
}

BalancingCheck check_balancing(const BalancingRule& rule, int probe_count,
                               std::uint64_t seed, double tolerance) {
  if (probe_count < 1) throw contract_error("check_balancing: probe_count must be >= 1");
  SplitRng rng(seed);
  BalancingCheck report;
  report.probes = probe_count;
  for (int i = 0; i < probe_count; ++i) {
    const double lu = rng.uniform(-50.0, 50.0);
    const double residual = std::abs(rule.log_weight(lu) - lu - rule.log_weight(-lu));
    if (residual > report.max_residual) {
      report.max_residual = residual;
      report.worst_log_u = lu;
    }
  }
  report.balancing = report.max_residual < tolerance;
  return report;
}

BalancingRule parse_rule(const std::string& spec, double dimension_p) {
  if (spec == "sqrt") return BalancingRule::sqrt_rule();
  if (spec == "min") return BalancingRule::min_rule();
  if (spec == "plus1") return BalancingRule::plus_one_rule();
  if (spec.rfind("pow:", 0) == 0) {
    std::size_t used = 0;
    double a = 0.0;
    const std::string arg = spec.substr(4);
    try {
      a = std::stod(arg, &used);
    } catch (const std::exception&) {
      throw config_error("bad rule spec '" + spec + "': expected pow:<a>");
    }
    if (used != arg.size() || !(a >= 0.0))
      throw config_error("bad rule spec '" + spec + "': exponent must be a nonnegative number");
    return BalancingRule::power_rule(a);
  }
  if (spec.rfind("bounded:c=", 0) == 0) {
    std::size_t used = 0;
    double c = 0.0;
    const std::string arg = spec.substr(10);
    try {
      c = std::stod(arg, &used);
    } catch (const std::exception&) {
      throw config_error("bad rule spec '" + spec + "': expected bounded:c=<c>");
    }
    if (used != arg.size() || !(c > 0.0))
      throw config_error("bad rule spec '" + spec + "': c must be a positive number");
    return BalancingRule::bounded_rule(c, dimension_p);
  }
  throw config_error("unknown rule spec '" + spec +
                     "' (expected sqrt|min|plus1|pow:<a>|bounded:c=<c>)");
}

}  // namespace iit
