#include "iit/models.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "iit/rng.hpp"

namespace iit::models {

// ---------------------------------------------------------------------------
// ToyChain

ToyChain::ToyChain(int p, double r, Profile profile, double curvature)
    : p_(p), log_r_(std::log(r)), profile_(profile), curvature_(curvature) {
  if (p < 2) throw contract_error("ToyChain: p must be at least 2");
  if (!(r > 1.0)) throw contract_error("ToyChain: r must exceed 1");
  if (profile == Profile::power_law && !(curvature >= 1.0))
    throw contract_error("ToyChain: curvature must be >= 1");
}

double ToyChain::log_mass(int x) const {
  if (x < 0 || x > p_) throw contract_error("ToyChain: state out of range");
  switch (profile_) {
    case Profile::flat_top:
      return (x == 0) ? 0.0 : -(static_cast<double>(x) - 1.0) * log_r_;
    case Profile::strict:
      return -static_cast<double>(x) * log_r_;
    case Profile::power_law:
      return (x == 0) ? -log_r_ : -std::pow(static_cast<double>(x), curvature_) * log_r_;
  }
  return 0.0;
}

std::vector<int> ToyChain::neighbors(int x) const {
  if (x < 0 || x > p_) throw contract_error("ToyChain: state out of range");
  std::vector<int> out;
  if (x > 0) out.push_back(x - 1);
  if (x < p_) out.push_back(x + 1);
  return out;
}

int ToyChain::parse_state(const std::string& text) const {
  std::size_t used = 0;
  int x = 0;
  try {
    x = std::stoi(text, &used);
  } catch (const std::exception&) {
    throw config_error("ToyChain: bad state '" + text + "'");
  }
  if (used != text.size() || x < 0 || x > p_)
    throw config_error("ToyChain: bad state '" + text + "'");
  return x;
}

std::vector<int> ToyChain::enumerate_states() const {
  std::vector<int> states(static_cast<std::size_t>(p_) + 1);
  std::iota(states.begin(), states.end(), 0);
  return states;
}

// ---------------------------------------------------------------------------
// Hypercube targets

namespace {

std::string mask_to_bits(std::uint64_t x, int p) {
  std::string bits(static_cast<std::size_t>(p), '0');
  for (int i = 0; i < p; ++i)
    if (x & (std::uint64_t{1} << i)) bits[static_cast<std::size_t>(i)] = '1';
  return bits;
}

std::uint64_t bits_to_mask(const std::string& text, int p, const char* who) {
  if (static_cast<int>(text.size()) != p)
    throw config_error(std::string(who) + ": expected a " + std::to_string(p) + "-bit state");
  std::uint64_t x = 0;
  for (int i = 0; i < p; ++i) {
    const char c = text[static_cast<std::size_t>(i)];
    if (c == '1')
      x |= std::uint64_t{1} << i;
    else if (c != '0')
      throw config_error(std::string(who) + ": bad state character");
  }
  return x;
}

std::vector<std::uint64_t> all_masks(int p) {
  std::vector<std::uint64_t> states;
  states.reserve(std::size_t{1} << p);
  for (std::uint64_t m = 0; m < (std::uint64_t{1} << p); ++m) states.push_back(m);
  return states;
}

}  // namespace

TwoModeHypercube::TwoModeHypercube(int p, double r) : p_(p), log_r_(std::log(r)) {
  if (p < 2 || p > 62) throw contract_error("TwoModeHypercube: p must lie in [2, 62]");
  if (!(r >= 1.0)) throw contract_error("TwoModeHypercube: r must be >= 1");
}

double TwoModeHypercube::log_mass(std::uint64_t x) const {
  return -static_cast<double>(std::popcount(x >> 1)) * log_r_;
}

std::vector<std::uint64_t> TwoModeHypercube::neighbors(std::uint64_t x) const {
  std::vector<std::uint64_t> out;
  out.reserve(static_cast<std::size_t>(p_));
  for (int i = 0; i < p_; ++i) out.push_back(x ^ (std::uint64_t{1} << i));
  return out;
}

std::string TwoModeHypercube::format_state(std::uint64_t x) const { return mask_to_bits(x, p_); }

std::uint64_t TwoModeHypercube::parse_state(const std::string& text) const {
  return bits_to_mask(text, p_, "TwoModeHypercube");
}

std::vector<std::uint64_t> TwoModeHypercube::enumerate_states() const {
  if (p_ > 24) throw resource_error("TwoModeHypercube: enumeration beyond p=24 is not supported");
  return all_masks(p_);
}

IsolatedModesHypercube::IsolatedModesHypercube(int p, double r, bool with_swaps)
    : p_(p), log_r_(std::log(r)), with_swaps_(with_swaps) {
  if (p < 3 || p > 62) throw contract_error("IsolatedModesHypercube: p must lie in [3, 62]");
  if (!(r >= 1.0)) throw contract_error("IsolatedModesHypercube: r must be >= 1");
}

double IsolatedModesHypercube::log_mass(std::uint64_t x) const {
  const int d1 = std::popcount(x ^ std::uint64_t{1});
  const int d2 = std::popcount(x ^ std::uint64_t{2});
  return -static_cast<double>(std::min(d1, d2)) * log_r_;
}

std::vector<std::uint64_t> IsolatedModesHypercube::neighbors(std::uint64_t x) const {
  std::vector<std::uint64_t> out;
  for (int i = 0; i < p_; ++i) out.push_back(x ^ (std::uint64_t{1} << i));
  if (with_swaps_) {
    for (int i = 0; i < p_; ++i) {
      if (!(x & (std::uint64_t{1} << i))) continue;
      for (int j = 0; j < p_; ++j) {
        if (x & (std::uint64_t{1} << j)) continue;
        out.push_back(x ^ (std::uint64_t{1} << i) ^ (std::uint64_t{1} << j));
      }
    }
  }
  return out;
}

std::string IsolatedModesHypercube::format_state(std::uint64_t x) const {
  return mask_to_bits(x, p_);
}

std::uint64_t IsolatedModesHypercube::parse_state(const std::string& text) const {
  return bits_to_mask(text, p_, "IsolatedModesHypercube");
}

std::vector<std::uint64_t> IsolatedModesHypercube::enumerate_states() const {
  if (p_ > 24)
    throw resource_error("IsolatedModesHypercube: enumeration beyond p=24 is not supported");
  return all_masks(p_);
}

std::vector<int> IsolatedModesHypercube::mode_indices_in_enumeration() const { return {1, 2}; }

// ---------------------------------------------------------------------------
// WeightedPermutations

WeightedPermutations::WeightedPermutations(int p, double eta, PermutationScenario scenario,
                                           std::uint64_t seed)
    : p_(p), eta_(eta), log_p_(std::log(static_cast<double>(p))) {
  if (p < 3) throw contract_error("WeightedPermutations: p must be at least 3");
  if (!(eta > 0.0)) throw contract_error("WeightedPermutations: eta must be positive");
  SplitRng rng(seed);
  mu_.resize(static_cast<std::size_t>(p));
  phi_.resize(static_cast<std::size_t>(p));
  for (int k = 0; k < p; ++k) {
    const double center = static_cast<double>(k + 1);
    if (scenario == PermutationScenario::one) {
      mu_[static_cast<std::size_t>(k)] = rng.uniform(center - 0.1, center + 0.1);
      phi_[static_cast<std::size_t>(k)] = rng.uniform(0.5, 1.0);
    } else {
      mu_[static_cast<std::size_t>(k)] = rng.uniform(center - 0.5, center + 0.5);
      phi_[static_cast<std::size_t>(k)] = rng.uniform(0.1, 1.0);
    }
  }
  pairs_.reserve(static_cast<std::size_t>(p) * (p - 1) / 2);
  for (int i = 0; i < p; ++i)
    for (int j = i + 1; j < p; ++j) pairs_.emplace_back(i, j);
}

double WeightedPermutations::position_weight(int variable, int position) const {
  return -eta_ * phi_[static_cast<std::size_t>(variable)] *
         std::abs(static_cast<double>(position + 1) - mu_[static_cast<std::size_t>(variable)]) *
         log_p_;
}

double WeightedPermutations::log_mass(const state_type& tau) const {
  if (static_cast<int>(tau.size()) != p_)
    throw contract_error("WeightedPermutations: state has wrong length");
  double total = 0.0;
  for (int pos = 0; pos < p_; ++pos) total += position_weight(tau[static_cast<std::size_t>(pos)], pos);
  return total;
}

std::vector<WeightedPermutations::state_type> WeightedPermutations::neighbors(
    const state_type& tau) const {
  std::vector<state_type> out;
  out.reserve(pairs_.size());
  for (const auto& [i, j] : pairs_) {
    state_type next = tau;
    std::swap(next[static_cast<std::size_t>(i)], next[static_cast<std::size_t>(j)]);
    out.push_back(std::move(next));
  }
  return out;
}

std::string WeightedPermutations::format_state(const state_type& tau) const {
  std::string out;
  for (int pos = 0; pos < p_; ++pos) {
    if (pos) out += '-';
    out += std::to_string(tau[static_cast<std::size_t>(pos)] + 1);
  }
  return out;
}

WeightedPermutations::state_type WeightedPermutations::parse_state(const std::string& text) const {
  state_type tau;
  std::stringstream stream(text);
  std::string token;
  while (std::getline(stream, token, '-')) {
    try {
      tau.push_back(std::stoi(token) - 1);
    } catch (const std::exception&) {
      throw config_error("WeightedPermutations: bad state '" + text + "'");
    }
  }
  if (static_cast<int>(tau.size()) != p_)
    throw config_error("WeightedPermutations: bad state '" + text + "'");
  std::vector<char> seen(static_cast<std::size_t>(p_), 0);
  for (const int v : tau) {
    if (v < 0 || v >= p_ || seen[static_cast<std::size_t>(v)])
      throw config_error("WeightedPermutations: bad state '" + text + "'");
    seen[static_cast<std::size_t>(v)] = 1;
  }
  return tau;
}

std::vector<WeightedPermutations::state_type> WeightedPermutations::enumerate_states() const {
  if (p_ > 9) throw resource_error("WeightedPermutations: enumeration beyond p=9 is not supported");
  state_type tau = identity_state();
  std::vector<state_type> states;
  do {
    states.push_back(tau);
  } while (std::next_permutation(tau.begin(), tau.end()));
  return states;
}

WeightedPermutations::state_type WeightedPermutations::identity_state() const {
  state_type tau(static_cast<std::size_t>(p_));
  std::iota(tau.begin(), tau.end(), 0);
  return tau;
}

WeightedPermutations::Walker::Walker(const WeightedPermutations& target, state_type tau)
    : target_(&target), tau_(std::move(tau)) {
  rank_of_.resize(tau_.size());
  for (int pos = 0; pos < target_->p_; ++pos)
    rank_of_[static_cast<std::size_t>(tau_[static_cast<std::size_t>(pos)])] = pos;
  log_mass_ = target_->log_mass(tau_);
  evals_ = 1;
}

const std::vector<WeightedPermutations::state_type>&
WeightedPermutations::Walker::neighbor_states() {
  if (!states_fresh_) {
    neighbor_states_ = target_->neighbors(tau_);
    states_fresh_ = true;
  }
  return neighbor_states_;
}

std::span<const double> WeightedPermutations::Walker::neighbor_log_masses() {
  if (!masses_fresh_) {
    const auto& pairs = target_->pairs_;
    neighbor_mass_.resize(pairs.size());
    for (std::size_t idx = 0; idx < pairs.size(); ++idx) {
      if (single_known_.size() == pairs.size() && single_known_[idx]) continue;
      neighbor_mass_[idx] = log_mass_ + transposition_delta(idx);
      ++evals_;
    }
    masses_fresh_ = true;
  }
  return neighbor_mass_;
}

double WeightedPermutations::Walker::transposition_delta(std::size_t idx) const {
  const auto [i, j] = target_->pairs_[idx];
  const int k1 = tau_[static_cast<std::size_t>(i)];
  const int k2 = tau_[static_cast<std::size_t>(j)];
  return target_->position_weight(k1, j) + target_->position_weight(k2, i) -
         target_->position_weight(k1, i) - target_->position_weight(k2, j);
}

double WeightedPermutations::Walker::neighbor_log_mass(std::size_t idx) {
  if (masses_fresh_) return neighbor_mass_[idx];
  if (single_known_.size() == target_->pairs_.size() && single_known_[idx])
    return neighbor_mass_[idx];
  if (single_known_.size() != target_->pairs_.size()) {
    neighbor_mass_.assign(target_->pairs_.size(), 0.0);
    single_known_.assign(target_->pairs_.size(), 0);
  }
  neighbor_mass_[idx] = log_mass_ + transposition_delta(idx);
  single_known_[idx] = 1;
  ++evals_;
  return neighbor_mass_[idx];
}

void WeightedPermutations::Walker::move_to(std::size_t idx) {
  const double next_mass = neighbor_log_mass(idx);
  const auto [i, j] = target_->pairs_[idx];
  std::swap(tau_[static_cast<std::size_t>(i)], tau_[static_cast<std::size_t>(j)]);
  rank_of_[static_cast<std::size_t>(tau_[static_cast<std::size_t>(i)])] = i;
  rank_of_[static_cast<std::size_t>(tau_[static_cast<std::size_t>(j)])] = j;
  log_mass_ = next_mass;
  masses_fresh_ = false;
  states_fresh_ = false;
  single_known_.clear();
}

// ---------------------------------------------------------------------------
// RegressionData

void RegressionData::to_csv(std::ostream& out) const {
  const int n = rows(), p = cols();
  out.precision(17);
  out << "# n=" << n << " p=" << p << " s_star=" << s_star << " snr=" << snr << " seed=" << seed
      << "\n# beta=";
  for (int j = 0; j < p; ++j) out << (j ? "," : "") << beta[j];
  out << "\ny";
  for (int j = 0; j < p; ++j) out << ",x" << (j + 1);
  out << "\n";
  for (int i = 0; i < n; ++i) {
    out << response[i];
    for (int j = 0; j < p; ++j) out << "," << design(i, j);
    out << "\n";
  }
}

RegressionData RegressionData::from_csv(std::istream& in) {
  RegressionData data;
  std::string line;
  if (!std::getline(in, line) || line.rfind("# n=", 0) != 0)
    throw config_error("RegressionData: missing metadata line");
  int n = 0, p = 0;
  {
    std::stringstream meta(line.substr(2));
    std::string token;
    while (meta >> token) {
      const auto eq = token.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = token.substr(0, eq);
      const std::string value = token.substr(eq + 1);
      if (key == "n") n = std::stoi(value);
      if (key == "p") p = std::stoi(value);
      if (key == "s_star") data.s_star = std::stoi(value);
      if (key == "snr") data.snr = std::stod(value);
      if (key == "seed") data.seed = std::stoull(value);
    }
  }
  if (n < 1 || p < 1) throw config_error("RegressionData: bad dimensions");
  if (!std::getline(in, line) || line.rfind("# beta=", 0) != 0)
    throw config_error("RegressionData: missing beta line");
  data.beta.resize(p);
  {
    std::stringstream values(line.substr(7));
    std::string token;
    for (int j = 0; j < p; ++j) {
      if (!std::getline(values, token, ',')) throw config_error("RegressionData: short beta line");
      data.beta[j] = std::stod(token);
    }
  }
  std::getline(in, line);  // header
  data.design.resize(n, p);
  data.response.resize(n);
  for (int i = 0; i < n; ++i) {
    if (!std::getline(in, line)) throw config_error("RegressionData: short data section");
    std::stringstream row(line);
    std::string token;
    if (!std::getline(row, token, ',')) throw config_error("RegressionData: bad data row");
    data.response[i] = std::stod(token);
    for (int j = 0; j < p; ++j) {
      if (!std::getline(row, token, ',')) throw config_error("RegressionData: bad data row");
      data.design(i, j) = std::stod(token);
    }
  }
  return data;
}

RegressionData simulate_regression(int n, int p, int s_star, double snr, std::uint64_t seed) {
  if (n < 1 || p < 1) throw contract_error("simulate_regression: need n >= 1 and p >= 1");
  if (s_star < 0 || s_star > p) throw contract_error("simulate_regression: s_star out of range");
  SplitRng rng(seed);
  RegressionData data;
  data.s_star = s_star;
  data.snr = snr;
  data.seed = seed;
  data.design.resize(n, p);
  const double rho = std::exp(-1.0);
  const double innovation = std::sqrt(1.0 - rho * rho);
  for (int i = 0; i < n; ++i) {
    data.design(i, 0) = rng.normal();
    for (int j = 1; j < p; ++j)
      data.design(i, j) = rho * data.design(i, j - 1) + innovation * rng.normal();
  }
  data.beta = Eigen::VectorXd::Zero(p);
  const double magnitude = snr * std::sqrt(std::log(static_cast<double>(p)) / n);
  for (int j = 0; j < s_star; ++j) {
    const double size = rng.uniform(2.0, 3.0);
    const double sign = (rng.uniform() < 0.5) ? 1.0 : -1.0;
    data.beta[j] = magnitude * size * sign;
  }
  data.response.resize(n);
  for (int i = 0; i < n; ++i)
    data.response[i] = data.design.row(i).dot(data.beta) + rng.normal();
  return data;
}

// ---------------------------------------------------------------------------
// VariableSelection

VariableSelection::VariableSelection(RegressionData data, double g, double c0,
                                     std::optional<int> size_cap)
    : data_(std::move(data)), g_(g), c0_(c0), size_cap_(size_cap) {
  n_ = data_.rows();
  p_ = data_.cols();
  if (!(g_ > 0.0)) throw contract_error("VariableSelection: g must be positive");
  if (size_cap_ && (*size_cap_ < 1 || *size_cap_ > p_))
    throw contract_error("VariableSelection: size cap out of range");
  centered_ = data_.design.rowwise() - data_.design.colwise().mean();
  centered_y_ = data_.response.array() - data_.response.mean();
  gram_ = centered_.transpose() * centered_;
  cross_ = centered_.transpose() * centered_y_;
  total_ss_ = centered_y_.squaredNorm();
  if (!(total_ss_ > 0.0)) throw contract_error("VariableSelection: response is constant");
  log_p_ = std::log(static_cast<double>(p_));
  log_1g_ = std::log1p(g_);
}

double VariableSelection::explained_floor_guard(double explained) const {
  return std::min(explained, total_ss_);
}

double VariableSelection::log_mass_value(double explained, int model_size) const {
  const double r2 = explained_floor_guard(explained) / total_ss_;
  const double one_minus = std::max(1.0 - r2, 1e-12);
  return -c0_ * model_size * log_p_ - 0.5 * model_size * log_1g_ -
         0.5 * n_ * std::log1p(g_ * one_minus);
}

double VariableSelection::log_mass(const state_type& x) const {
  const int k = static_cast<int>(x.size());
  if (k == 0) return log_mass_value(0.0, 0);
  Eigen::MatrixXd block(k, k);
  Eigen::VectorXd rhs(k);
  for (int a = 0; a < k; ++a) {
    rhs[a] = cross_[x[static_cast<std::size_t>(a)]];
    for (int b = 0; b < k; ++b)
      block(a, b) = gram_(x[static_cast<std::size_t>(a)], x[static_cast<std::size_t>(b)]);
  }
  Eigen::LLT<Eigen::MatrixXd> llt(block);
  double explained = 0.0;
  if (llt.info() == Eigen::Success) {
    explained = rhs.dot(llt.solve(rhs));
  } else {
    // Collinear block: ridge fallback keeps the mass finite.
    block.diagonal().array() += 1e-10 * block.diagonal().maxCoeff();
    Eigen::LDLT<Eigen::MatrixXd> ldlt(block);
    if (ldlt.info() != Eigen::Success)
      throw numeric_error("VariableSelection: Gram block factorization failed");
    explained = rhs.dot(ldlt.solve(rhs));
  }
  return log_mass_value(explained, k);
}

std::vector<VariableSelection::state_type> VariableSelection::neighbors(
    const state_type& x) const {
  const bool at_cap = size_cap_ && static_cast<int>(x.size()) >= *size_cap_;
  std::vector<state_type> out;
  out.reserve(static_cast<std::size_t>(p_));
  for (int j = 0; j < p_; ++j) {
    const bool included =
        std::binary_search(x.begin(), x.end(), static_cast<std::uint16_t>(j));
    if (!included && at_cap) continue;
    state_type y = x;
    if (included) {
      y.erase(std::find(y.begin(), y.end(), static_cast<std::uint16_t>(j)));
    } else {
      y.insert(std::upper_bound(y.begin(), y.end(), static_cast<std::uint16_t>(j)),
               static_cast<std::uint16_t>(j));
    }
    out.push_back(std::move(y));
  }
  return out;
}

std::size_t VariableSelection::degree(const state_type& x) const {
  const bool at_cap = size_cap_ && static_cast<int>(x.size()) >= *size_cap_;
  return at_cap ? x.size() : static_cast<std::size_t>(p_);
}

std::string VariableSelection::format_state(const state_type& x) const {
  std::string bits(static_cast<std::size_t>(p_), '0');
  for (const auto j : x) bits[j] = '1';
  return bits;
}

VariableSelection::state_type VariableSelection::parse_state(const std::string& text) const {
  if (static_cast<int>(text.size()) != p_)
    throw config_error("VariableSelection: expected a " + std::to_string(p_) + "-bit state");
  state_type x;
  for (int j = 0; j < p_; ++j) {
    const char c = text[static_cast<std::size_t>(j)];
    if (c == '1')
      x.push_back(static_cast<std::uint16_t>(j));
    else if (c != '0')
      throw config_error("VariableSelection: bad state character");
  }
  return x;
}

std::vector<VariableSelection::state_type> VariableSelection::enumerate_states() const {
  if (p_ > 24) throw resource_error("VariableSelection: enumeration beyond p=24 is not supported");
  std::vector<state_type> states;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << p_); ++mask) {
    state_type x;
    for (int j = 0; j < p_; ++j)
      if (mask & (std::uint64_t{1} << j)) x.push_back(static_cast<std::uint16_t>(j));
    if (size_cap_ && static_cast<int>(x.size()) > *size_cap_) continue;
    states.push_back(std::move(x));
  }
  return states;
}

AdsMoves<VariableSelection::state_type> VariableSelection::ads_moves(const state_type& x) const {
  AdsMoves<state_type> moves;
  const bool at_cap = size_cap_ && static_cast<int>(x.size()) >= *size_cap_;
  for (int j = 0; j < p_; ++j) {
    const bool included =
        std::binary_search(x.begin(), x.end(), static_cast<std::uint16_t>(j));
    if (included) {
      state_type y = x;
      y.erase(std::find(y.begin(), y.end(), static_cast<std::uint16_t>(j)));
      moves.del.push_back(std::move(y));
    } else if (!at_cap) {
      state_type y = x;
      y.insert(std::upper_bound(y.begin(), y.end(), static_cast<std::uint16_t>(j)),
               static_cast<std::uint16_t>(j));
      moves.add.push_back(std::move(y));
    }
  }
  for (const auto k : x) {
    for (int j = 0; j < p_; ++j) {
      if (std::binary_search(x.begin(), x.end(), static_cast<std::uint16_t>(j))) continue;
      state_type y = x;
      y.erase(std::find(y.begin(), y.end(), k));
      y.insert(std::upper_bound(y.begin(), y.end(), static_cast<std::uint16_t>(j)),
               static_cast<std::uint16_t>(j));
      moves.swap.push_back(std::move(y));
    }
  }
  return moves;
}

VariableSelection::state_type VariableSelection::causal_state() const {
  state_type x;
  for (int j = 0; j < data_.s_star; ++j) x.push_back(static_cast<std::uint16_t>(j));
  return x;
}

// --------------------------- incremental walker ---------------------------

VariableSelection::Walker::Walker(const VariableSelection& target, state_type x0)
    : target_(&target) {
  selected_.assign(x0.begin(), x0.end());
  refactor();
  rebuild_canonical();
  log_mass_ = target_->log_mass_value(explained_, static_cast<int>(selected_.size()));
  evals_ = 1;
}

void VariableSelection::Walker::refactor() {
  const int k = static_cast<int>(selected_.size());
  factor_.resize(k, k);
  half_solve_.resize(k);
  if (k == 0) {
    explained_ = 0.0;
    inverse_fresh_ = false;
    return;
  }
  Eigen::MatrixXd block(k, k);
  Eigen::VectorXd rhs(k);
  for (int a = 0; a < k; ++a) {
    rhs[a] = target_->cross_[selected_[static_cast<std::size_t>(a)]];
    for (int b = 0; b < k; ++b)
      block(a, b) = target_->gram_(selected_[static_cast<std::size_t>(a)],
                                   selected_[static_cast<std::size_t>(b)]);
  }
  Eigen::LLT<Eigen::MatrixXd> llt(block);
  if (llt.info() != Eigen::Success) {
    block.diagonal().array() += 1e-10 * block.diagonal().maxCoeff();
    llt.compute(block);
    if (llt.info() != Eigen::Success)
      throw numeric_error("VariableSelection walker: Gram block factorization failed");
  }
  factor_ = llt.matrixL();
  half_solve_ = factor_.triangularView<Eigen::Lower>().solve(rhs);
  explained_ = half_solve_.squaredNorm();
  inverse_fresh_ = false;
}

void VariableSelection::Walker::refresh_inverse() {
  if (inverse_fresh_) return;
  const int k = static_cast<int>(selected_.size());
  factor_inverse_ = factor_.triangularView<Eigen::Lower>().solve(
      Eigen::MatrixXd::Identity(k, k));
  inverse_fresh_ = true;
}

void VariableSelection::Walker::rebuild_canonical() {
  canonical_.assign(selected_.begin(), selected_.end());
  std::sort(canonical_.begin(), canonical_.end());
  states_fresh_ = false;
  neighbor_known_.clear();
}

std::vector<int> VariableSelection::Walker::flip_list() const {
  const bool at_cap =
      target_->size_cap_ && static_cast<int>(selected_.size()) >= *target_->size_cap_;
  std::vector<int> flips;
  flips.reserve(static_cast<std::size_t>(target_->p_));
  for (int j = 0; j < target_->p_; ++j) {
    const bool included = std::binary_search(canonical_.begin(), canonical_.end(),
                                             static_cast<std::uint16_t>(j));
    if (!included && at_cap) continue;
    flips.push_back(j);
  }
  return flips;
}

const std::vector<VariableSelection::state_type>&
VariableSelection::Walker::neighbor_states() {
  if (!states_fresh_) {
    neighbor_states_ = target_->neighbors(canonical_);
    states_fresh_ = true;
  }
  return neighbor_states_;
}

double VariableSelection::Walker::log_mass_from_explained(double explained,
                                                          int model_size) const {
  return target_->log_mass_value(explained, model_size);
}

std::span<const double> VariableSelection::Walker::neighbor_log_masses() {
  const auto flips = flip_list();
  if (neighbor_known_.size() != flips.size()) {
    neighbor_mass_.assign(flips.size(), 0.0);
    neighbor_known_.assign(flips.size(), 0);
  }
  if (std::find(neighbor_known_.begin(), neighbor_known_.end(), 0) == neighbor_known_.end())
    return neighbor_mass_;
  const int k = static_cast<int>(selected_.size());
  refresh_inverse();
  // delete statistics: v = G^{-1} b on the block, diag of G^{-1}
  Eigen::VectorXd full_solve, inverse_diag;
  if (k > 0) {
    full_solve = factor_inverse_.transpose() * half_solve_;
    inverse_diag = factor_inverse_.colwise().squaredNorm().transpose();
  }
  for (std::size_t idx = 0; idx < flips.size(); ++idx) {
    if (neighbor_known_[idx]) continue;
    const int j = flips[idx];
    const auto pos = std::find(selected_.begin(), selected_.end(), j);
    if (pos == selected_.end()) {
      // add move
      double explained_next = explained_;
      if (k == 0) {
        const double d = std::max(target_->gram_(j, j), 1e-300);
        explained_next = target_->cross_[j] * target_->cross_[j] / d;
      } else {
        Eigen::VectorXd column(k);
        for (int a = 0; a < k; ++a)
          column[a] = target_->gram_(selected_[static_cast<std::size_t>(a)], j);
        const Eigen::VectorXd u = factor_inverse_ * column;
        double d = target_->gram_(j, j) - u.squaredNorm();
        d = std::max(d, 1e-10 * std::abs(target_->gram_(j, j)));
        const double num = target_->cross_[j] - u.dot(half_solve_);
        explained_next = explained_ + num * num / d;
      }
      neighbor_mass_[idx] = log_mass_from_explained(explained_next, k + 1);
    } else {
      const int position = static_cast<int>(pos - selected_.begin());
      const double drop =
          full_solve[position] * full_solve[position] / inverse_diag[position];
      neighbor_mass_[idx] = log_mass_from_explained(explained_ - drop, k - 1);
    }
    neighbor_known_[idx] = 1;
    ++evals_;
  }
  return neighbor_mass_;
}

double VariableSelection::Walker::neighbor_log_mass(std::size_t idx) {
  if (idx < neighbor_known_.size() && neighbor_known_[idx]) return neighbor_mass_[idx];
  const auto flips = flip_list();
  if (idx >= flips.size()) throw contract_error("walker: neighbor index out of range");
  if (neighbor_known_.size() != flips.size()) {
    neighbor_mass_.assign(flips.size(), 0.0);
    neighbor_known_.assign(flips.size(), 0);
  }
  const int j = flips[idx];
  const int k = static_cast<int>(selected_.size());
  const auto pos = std::find(selected_.begin(), selected_.end(), j);
  double value;
  if (pos == selected_.end()) {
    double explained_next;
    if (k == 0) {
      const double d = std::max(target_->gram_(j, j), 1e-300);
      explained_next = target_->cross_[j] * target_->cross_[j] / d;
    } else {
      Eigen::VectorXd column(k);
      for (int a = 0; a < k; ++a)
        column[a] = target_->gram_(selected_[static_cast<std::size_t>(a)], j);
      const Eigen::VectorXd u = factor_.triangularView<Eigen::Lower>().solve(column);
      double d = target_->gram_(j, j) - u.squaredNorm();
      d = std::max(d, 1e-10 * std::abs(target_->gram_(j, j)));
      const double num = target_->cross_[j] - u.dot(half_solve_);
      explained_next = explained_ + num * num / d;
    }
    value = log_mass_from_explained(explained_next, k + 1);
  } else {
    const int position = static_cast<int>(pos - selected_.begin());
    Eigen::VectorXd unit = Eigen::VectorXd::Zero(k);
    unit[position] = 1.0;
    const Eigen::VectorXd z = factor_.triangularView<Eigen::Lower>().solve(unit);
    const double inverse_diag = z.squaredNorm();
    const double coordinate = z.dot(half_solve_);  // (L^{-1} e_k)' (L^{-1} b) = (G^{-1} b)_k
    const double drop = coordinate * coordinate / inverse_diag;
    value = log_mass_from_explained(explained_ - drop, k - 1);
  }
  neighbor_mass_[idx] = value;
  neighbor_known_[idx] = 1;
  ++evals_;
  return value;
}

void VariableSelection::Walker::move_to(std::size_t idx) {
  const auto flips = flip_list();
  if (idx >= flips.size()) throw contract_error("walker: neighbor index out of range");
  const int j = flips[idx];
  const auto pos = std::find(selected_.begin(), selected_.end(), j);
  const int k = static_cast<int>(selected_.size());
  if (pos == selected_.end()) {
    // append column j to the factor
    Eigen::VectorXd u(k);
    double w_next;
    double diag;
    if (k == 0) {
      diag = std::sqrt(std::max(target_->gram_(j, j), 1e-300));
      w_next = target_->cross_[j] / diag;
    } else {
      Eigen::VectorXd column(k);
      for (int a = 0; a < k; ++a)
        column[a] = target_->gram_(selected_[static_cast<std::size_t>(a)], j);
      u = factor_.triangularView<Eigen::Lower>().solve(column);
      double d = target_->gram_(j, j) - u.squaredNorm();
      d = std::max(d, 1e-10 * std::abs(target_->gram_(j, j)));
      diag = std::sqrt(d);
      w_next = (target_->cross_[j] - u.dot(half_solve_)) / diag;
    }
    factor_.conservativeResize(k + 1, k + 1);
    factor_.row(k).setZero();
    factor_.col(k).setZero();
    if (k > 0) factor_.block(k, 0, 1, k) = u.transpose();
    factor_(k, k) = diag;
    half_solve_.conservativeResize(k + 1);
    half_solve_[k] = w_next;
    explained_ += w_next * w_next;
    selected_.push_back(j);
  } else {
    const int position = static_cast<int>(pos - selected_.begin());
    const int tail = k - position - 1;
    // drop row `position`; restore triangularity of the trailing block by a
    // rank-one update with the removed column segment
    Eigen::VectorXd update = factor_.block(position + 1, position, tail, 1);
    Eigen::MatrixXd next(k - 1, k - 1);
    next.topLeftCorner(position, position) = factor_.topLeftCorner(position, position);
    next.block(position, 0, tail, position) = factor_.block(position + 1, 0, tail, position);
    Eigen::MatrixXd trailing = factor_.block(position + 1, position + 1, tail, tail);
    for (int i = 0; i < tail; ++i) {
      const double r = std::hypot(trailing(i, i), update[i]);
      const double c = r / trailing(i, i);
      const double s = update[i] / trailing(i, i);
      trailing(i, i) = r;
      for (int row = i + 1; row < tail; ++row) {
        trailing(row, i) = (trailing(row, i) + s * update[row]) / c;
        update[row] = c * update[row] - s * trailing(row, i);
      }
    }
    next.block(position, position, tail, tail) = trailing;
    next.triangularView<Eigen::StrictlyUpper>().setZero();
    factor_ = std::move(next);
    selected_.erase(pos);
    const int m = static_cast<int>(selected_.size());
    Eigen::VectorXd rhs(m);
    for (int a = 0; a < m; ++a) rhs[a] = target_->cross_[selected_[static_cast<std::size_t>(a)]];
    half_solve_ = (m > 0) ? factor_.triangularView<Eigen::Lower>().solve(rhs).eval()
                          : Eigen::VectorXd();
    explained_ = (m > 0) ? half_solve_.squaredNorm() : 0.0;
  }
  inverse_fresh_ = false;
  ++accepted_;
  if (accepted_ % 256 == 0) refactor();
  rebuild_canonical();
  log_mass_ = target_->log_mass_value(explained_, static_cast<int>(selected_.size()));
}

}  // namespace iit::models
