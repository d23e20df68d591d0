#include "iit/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <sstream>
#include <set>

namespace iit::spectral {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::VectorXd normalized_from_log(const std::vector<double>& log_mass) {
  const int n = static_cast<int>(log_mass.size());
  double shift = log_mass[0];
  for (const double lm : log_mass) shift = std::max(shift, lm);
  Eigen::VectorXd pi(n);
  for (int i = 0; i < n; ++i) pi[i] = std::exp(log_mass[i] - shift);
  pi /= pi.sum();
  return pi;
}

void check_connected(const std::vector<std::vector<int>>& adjacency) {
  const int n = static_cast<int>(adjacency.size());
  std::vector<char> seen(n, 0);
  std::deque<int> frontier{0};
  seen[0] = 1;
  int visited = 1;
  while (!frontier.empty()) {
    const int x = frontier.front();
    frontier.pop_front();
    for (const int y : adjacency[x]) {
      if (!seen[y]) {
        seen[y] = 1;
        ++visited;
        frontier.push_back(y);
      }
    }
  }
  if (visited != n)
    throw structure_error("neighborhood graph is disconnected (irreducibility contract)");
}

double kappa_constant(double p, double alpha, double nu) {
  const double base = 1.0 - std::pow(p, -(nu - alpha) / 2.0);
  return 0.5 * base * base * base;
}

std::vector<int> sorted_unique(std::vector<int> subset, int n, const char* who) {
  if (subset.empty()) throw contract_error(std::string(who) + ": empty subset");
  std::sort(subset.begin(), subset.end());
  subset.erase(std::unique(subset.begin(), subset.end()), subset.end());
  if (subset.front() < 0 || subset.back() >= n)
    throw contract_error(std::string(who) + ": subset index out of range");
  return subset;
}

bool restriction_irreducible(const Eigen::MatrixXd& matrix, const std::vector<int>& subset) {
  const int m = static_cast<int>(subset.size());
  if (m == 1) return true;
  std::vector<char> seen(m, 0);
  std::deque<int> frontier{0};
  seen[0] = 1;
  int visited = 1;
  while (!frontier.empty()) {
    const int i = frontier.front();
    frontier.pop_front();
    for (int j = 0; j < m; ++j) {
      if (!seen[j] && (matrix(subset[i], subset[j]) > 0.0 || matrix(subset[j], subset[i]) > 0.0)) {
        seen[j] = 1;
        ++visited;
        frontier.push_back(j);
      }
    }
  }
  return visited == m;
}

}  // namespace

Eigen::VectorXd EnumeratedSpace::normalized_pi() const { return normalized_from_log(log_mass); }

void validate_space(const EnumeratedSpace& space, std::size_t cap) {
  const int n = space.size();
  if (n < 2) throw contract_error("enumerated space needs at least two states");
  if (static_cast<std::size_t>(n) > cap)
    throw resource_error("state space of size " + std::to_string(n) + " exceeds the cap " +
                         std::to_string(cap));
  if (static_cast<int>(space.adjacency.size()) != n)
    throw contract_error("enumerated space: table sizes disagree");
  for (int x = 0; x < n; ++x) {
    if (!std::isfinite(space.log_mass[x]))
      throw structure_error("log-mass must be finite everywhere");
    if (space.adjacency[x].empty())
      throw structure_error("state " + std::to_string(x) + " has an empty neighborhood");
    for (const int y : space.adjacency[x]) {
      if (y < 0 || y >= n) throw structure_error("neighbor index out of range");
      if (y == x) throw structure_error("state listed as its own neighbor");
      const auto& back = space.adjacency[y];
      if (std::find(back.begin(), back.end(), x) == back.end())
        throw structure_error("adjacency is not symmetric");
    }
  }
  check_connected(space.adjacency);
}

namespace {

ExactChain build_common(const EnumeratedSpace& space, const BalancingRule* rule, double power_a,
                        std::size_t cap) {
  validate_space(space, cap);
  const int n = space.size();
  ExactChain chain;
  chain.space = space;
  chain.pi = space.normalized_pi();
  chain.kernel = Eigen::MatrixXd::Zero(n, n);
  chain.rate = Eigen::MatrixXd::Zero(n, n);
  chain.log_zh.resize(n);

  const auto& lp = space.log_mass;
  std::vector<std::vector<double>> log_h(static_cast<std::size_t>(n));
  for (int x = 0; x < n; ++x) {
    auto& terms = log_h[static_cast<std::size_t>(x)];
    terms.reserve(space.adjacency[x].size());
    for (const int y : space.adjacency[x]) {
      const double lr = lp[y] - lp[x];
      terms.push_back(rule ? rule->log_weight(lr) : power_a * lr);
    }
    chain.log_zh[x] = log_sum_exp(terms);
    for (std::size_t j = 0; j < terms.size(); ++j)
      chain.kernel(x, space.adjacency[x][j]) = std::exp(terms[j] - chain.log_zh[x]);
  }

  // Stationary law of the kernel: pi Z_h for balancing rules, pi^{2a} Z_h for
  // power weights; normalized by a full-space log-sum-exp.
  const double scale = rule ? 1.0 : 2.0 * power_a;
  std::vector<double> log_pih(static_cast<std::size_t>(n));
  for (int x = 0; x < n; ++x) log_pih[static_cast<std::size_t>(x)] = scale * lp[x] + chain.log_zh[x];
  const double pih_norm = log_sum_exp(log_pih);

  std::vector<double> log_pi(static_cast<std::size_t>(n));
  for (int x = 0; x < n; ++x) log_pi[static_cast<std::size_t>(x)] = lp[x];
  const double pi_norm = log_sum_exp(log_pi);

  chain.pi_h.resize(n);
  chain.omega.resize(n);
  chain.log_omega.resize(n);
  for (int x = 0; x < n; ++x) {
    chain.pi_h[x] = std::exp(log_pih[static_cast<std::size_t>(x)] - pih_norm);
    chain.log_omega[x] = (lp[x] - pi_norm) - (log_pih[static_cast<std::size_t>(x)] - pih_norm);
    chain.omega[x] = std::exp(chain.log_omega[x]);
  }

  chain.expected_zh = 0.0;
  for (int x = 0; x < n; ++x) chain.expected_zh += chain.pi[x] * std::exp(chain.log_zh[x]);

  for (int x = 0; x < n; ++x) {
    double total = 0.0;
    const auto& terms = log_h[static_cast<std::size_t>(x)];
    for (std::size_t j = 0; j < terms.size(); ++j) {
      const int y = space.adjacency[x][j];
      const double q = std::exp(terms[j] - chain.log_zh[x] - chain.log_omega[x]);
      chain.rate(x, y) = q;
      total += q;
    }
    chain.rate(x, x) = -total;
  }

  if (rule) {
    chain.rule = *rule;
    chain.weighting = rule->spec();
  } else {
    chain.power_a = power_a;
    std::ostringstream label;
    label << "pow:" << power_a;
    chain.weighting = label.str();
  }
  return chain;
}

}  // namespace

ExactChain build_exact(const EnumeratedSpace& space, const BalancingRule& rule, std::size_t cap) {
  if (!rule.is_balancing())
    throw contract_error("build_exact: rule '" + rule.spec() +
                         "' is not balancing; use build_exact_power");
  return build_common(space, &rule, 0.0, cap);
}

ExactChain build_exact_power(const EnumeratedSpace& space, double a, std::size_t cap) {
  if (!(a >= 0.0)) throw contract_error("build_exact_power: exponent must be >= 0");
  return build_common(space, nullptr, a, cap);
}

Eigen::MatrixXd mh_kernel(const EnumeratedSpace& space) {
  const int n = space.size();
  Eigen::MatrixXd kernel = Eigen::MatrixXd::Zero(n, n);
  for (int x = 0; x < n; ++x) {
    const double deg_x = static_cast<double>(space.adjacency[x].size());
    double off = 0.0;
    for (const int y : space.adjacency[x]) {
      const double deg_y = static_cast<double>(space.adjacency[y].size());
      const double log_ratio =
          space.log_mass[y] - space.log_mass[x] + std::log(deg_x) - std::log(deg_y);
      const double accept = std::min(1.0, std::exp(log_ratio));
      kernel(x, y) = accept / deg_x;
      off += kernel(x, y);
    }
    kernel(x, x) = 1.0 - off;
  }
  return kernel;
}

Eigen::MatrixXd mh_kernel_from_proposal(
    const EnumeratedSpace& space,
    const std::function<std::vector<std::pair<int, double>>(int)>& proposal_row) {
  const int n = space.size();
  Eigen::MatrixXd proposal = Eigen::MatrixXd::Zero(n, n);
  for (int x = 0; x < n; ++x) {
    double total = 0.0;
    for (const auto& [y, q] : proposal_row(x)) {
      if (y < 0 || y >= n || y == x || q < 0.0)
        throw contract_error("mh_kernel_from_proposal: bad proposal entry");
      proposal(x, y) += q;
      total += q;
    }
    if (total > 1.0 + 1e-12)
      throw contract_error("mh_kernel_from_proposal: proposal row mass exceeds one");
  }
  Eigen::MatrixXd kernel = Eigen::MatrixXd::Zero(n, n);
  const Eigen::VectorXd pi = space.normalized_pi();
  for (int x = 0; x < n; ++x) {
    double off = 0.0;
    for (int y = 0; y < n; ++y) {
      if (y == x || proposal(x, y) <= 0.0) continue;
      const double accept =
          std::min(1.0, pi[y] * proposal(y, x) / (pi[x] * proposal(x, y)));
      kernel(x, y) = proposal(x, y) * accept;
      off += kernel(x, y);
    }
    kernel(x, x) = 1.0 - off;
  }
  return kernel;
}

double spectral_gap(const Eigen::MatrixXd& matrix, const Eigen::VectorXd& stationary,
                    MatrixKind kind, double reversibility_tol) {
  const int n = static_cast<int>(matrix.rows());
  if (n < 2 || matrix.cols() != n || stationary.size() != n)
    throw contract_error("spectral_gap: need a square matrix of order >= 2");
  for (int i = 0; i < n; ++i)
    if (!(stationary[i] > 0.0)) throw contract_error("spectral_gap: stationary law must be positive");

  const Eigen::MatrixXd flow = stationary.asDiagonal() * matrix;
  const double scale = std::max(flow.cwiseAbs().maxCoeff(), 1e-300);
  const double residual = (flow - flow.transpose()).cwiseAbs().maxCoeff() / scale;
  if (residual > reversibility_tol)
    throw contract_error("spectral_gap: matrix is not reversible (flow residual " +
                         std::to_string(residual) + ")");

  const Eigen::VectorXd root = stationary.cwiseSqrt();
  Eigen::MatrixXd sym = root.asDiagonal() * matrix * root.cwiseInverse().asDiagonal();
  sym = 0.5 * (sym + sym.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw numeric_error("spectral_gap: eigensolver failed");
  const double lambda2 = solver.eigenvalues()[n - 2];
  return kind == MatrixKind::kernel ? 1.0 - lambda2 : -lambda2;
}

Eigen::MatrixXd restrict_matrix(const Eigen::MatrixXd& matrix, const std::vector<int>& subset,
                                MatrixKind kind) {
  const auto S = sorted_unique(subset, static_cast<int>(matrix.rows()), "restrict_matrix");
  const int m = static_cast<int>(S.size());
  Eigen::MatrixXd out(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) out(i, j) = matrix(S[i], S[j]);
  for (int i = 0; i < m; ++i) {
    double off = 0.0;
    for (int j = 0; j < m; ++j)
      if (j != i) off += out(i, j);
    out(i, i) = (kind == MatrixKind::kernel) ? 1.0 - off : -off;
  }
  return out;
}

Eigen::MatrixXd trace_kernel(const Eigen::MatrixXd& kernel, const std::vector<int>& subset) {
  const int n = static_cast<int>(kernel.rows());
  const auto S = sorted_unique(subset, n, "trace_kernel");
  const int m = static_cast<int>(S.size());
  if (m == n) return kernel;

  std::vector<int> complement;
  complement.reserve(static_cast<std::size_t>(n - m));
  std::vector<char> in_set(static_cast<std::size_t>(n), 0);
  for (const int s : S) in_set[static_cast<std::size_t>(s)] = 1;
  for (int x = 0; x < n; ++x)
    if (!in_set[static_cast<std::size_t>(x)]) complement.push_back(x);
  const int c = static_cast<int>(complement.size());

  Eigen::MatrixXd kernel_ss(m, m), kernel_sc(m, c), kernel_cc(c, c), kernel_cs(c, m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) kernel_ss(i, j) = kernel(S[i], S[j]);
    for (int j = 0; j < c; ++j) kernel_sc(i, j) = kernel(S[i], complement[j]);
  }
  for (int i = 0; i < c; ++i) {
    for (int j = 0; j < c; ++j) kernel_cc(i, j) = kernel(complement[i], complement[j]);
    for (int j = 0; j < m; ++j) kernel_cs(i, j) = kernel(complement[i], S[j]);
  }

  // First-entry probabilities: (I - K_CC) A = K_CS.
  const Eigen::MatrixXd system = Eigen::MatrixXd::Identity(c, c) - kernel_cc;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(system);
  const Eigen::MatrixXd entry = lu.solve(kernel_cs);
  const double solve_residual = (system * entry - kernel_cs).cwiseAbs().maxCoeff();
  if (!std::isfinite(solve_residual) || solve_residual > 1e-8)
    throw numeric_error("trace_kernel: first-entry solve failed (residual " +
                        std::to_string(solve_residual) + ")");
  return kernel_ss + kernel_sc * entry;
}

UnimodalCertificate verify_unimodal(const EnumeratedSpace& space) {
  const int n = space.size();
  UnimodalCertificate cert;
  const auto& lp = space.log_mass;
  const double logp = std::log(space.dimension_p);

  int mode = 0;
  for (int x = 1; x < n; ++x)
    if (lp[x] > lp[mode]) mode = x;
  for (int x = 0; x < n; ++x) {
    if (x != mode && lp[x] == lp[mode]) {
      cert.failure = "multiple global maxima";
      cert.witness = x;
      return cert;
    }
  }
  cert.mode = mode;

  cert.best_move.assign(static_cast<std::size_t>(n), -1);
  cert.best_move[static_cast<std::size_t>(mode)] = mode;
  std::size_t max_degree = 0;
  double nu = kInf;
  int nu_witness = -1;
  for (int x = 0; x < n; ++x) {
    max_degree = std::max(max_degree, space.adjacency[x].size());
    if (x == mode) continue;
    int best = space.adjacency[x][0];
    for (const int y : space.adjacency[x]) {
      if (lp[y] > lp[best] || (lp[y] == lp[best] && y < best)) {
        if (lp[y] == lp[best] && y != best) cert.had_ties = true;
        best = y;
      }
    }
    cert.best_move[static_cast<std::size_t>(x)] = best;
    const double ratio = (lp[best] - lp[x]) / logp;
    if (ratio < nu) {
      nu = ratio;
      nu_witness = x;
    }
  }
  cert.nu = nu;
  cert.alpha = std::log(static_cast<double>(max_degree)) / logp;
  if (!(cert.nu > cert.alpha)) {
    cert.failure = "certified nu does not exceed alpha";
    cert.witness = nu_witness;
    return cert;
  }

  // The move map must form a tree rooted at the mode.
  for (int x = 0; x < n; ++x) {
    int cursor = x;
    for (int hop = 0; hop <= n; ++hop) {
      if (cursor == mode) break;
      cursor = cert.best_move[static_cast<std::size_t>(cursor)];
      if (hop == n) {
        cert.failure = "best-move map does not reach the mode";
        cert.witness = x;
        return cert;
      }
    }
  }

  cert.kappa = kappa_constant(space.dimension_p, cert.alpha, cert.nu);
  cert.valid = true;
  return cert;
}

ConcentrationCertificate verify_concentration(const EnumeratedSpace& space,
                                              const std::vector<int>& target_set) {
  const int n = space.size();
  ConcentrationCertificate cert;
  cert.target_set = sorted_unique(target_set, n, "verify_concentration");
  cert.set_size = static_cast<int>(cert.target_set.size());
  if (cert.set_size < 2)
    throw contract_error("verify_concentration: the target set must contain at least two states");

  const auto& lp = space.log_mass;
  const double logp = std::log(space.dimension_p);
  std::vector<char> inside(static_cast<std::size_t>(n), 0);
  for (const int s : cert.target_set) inside[static_cast<std::size_t>(s)] = 1;

  double lo = kInf, hi = -kInf;
  for (const int s : cert.target_set) {
    lo = std::min(lo, lp[s]);
    hi = std::max(hi, lp[s]);
  }
  cert.mass_ratio = std::exp(hi - lo);

  cert.best_move.assign(static_cast<std::size_t>(n), -1);
  std::size_t max_degree = 0;
  double nu = kInf;
  int nu_witness = -1;
  for (int x = 0; x < n; ++x) {
    max_degree = std::max(max_degree, space.adjacency[x].size());
    if (inside[static_cast<std::size_t>(x)]) {
      cert.best_move[static_cast<std::size_t>(x)] = x;
      continue;
    }
    int best = space.adjacency[x][0];
    for (const int y : space.adjacency[x])
      if (lp[y] > lp[best] || (lp[y] == lp[best] && y < best)) best = y;
    cert.best_move[static_cast<std::size_t>(x)] = best;
    const double ratio = (lp[best] - lp[x]) / logp;
    if (ratio < nu) {
      nu = ratio;
      nu_witness = x;
    }
  }
  cert.nu = (nu == kInf) ? 0.0 : nu;
  cert.alpha = std::log(static_cast<double>(max_degree)) / logp;
  if (nu == kInf) {
    cert.failure = "no state lies outside the target set";
    return cert;
  }
  if (!(cert.nu > cert.alpha)) {
    cert.failure = "certified nu does not exceed alpha";
    cert.witness = nu_witness;
    return cert;
  }
  cert.kappa = kappa_constant(space.dimension_p, cert.alpha, cert.nu);
  cert.valid = true;
  return cert;
}

UnimodalBound bound_unimodal(const UnimodalCertificate& cert, const ExactChain& chain) {
  if (!cert.valid) throw contract_error("bound_unimodal: invalid certificate");
  if (!chain.rule) throw contract_error("bound_unimodal: chain must use a balancing rule");
  UnimodalBound out;
  out.kappa = cert.kappa;
  const double p = chain.space.dimension_p;
  out.h_at_pnu = std::exp(chain.rule->log_weight(cert.nu * std::log(p)));
  out.expected_zh = chain.expected_zh;
  out.bound = cert.kappa * out.h_at_pnu / chain.expected_zh;
  switch (chain.rule->kind()) {
    case RuleKind::plus_one:
      out.closed_form = 0.5 * cert.kappa * std::pow(p, cert.nu - cert.alpha);
      break;
    case RuleKind::min_weight:
      out.closed_form = 0.5 * cert.kappa * std::pow(p, cert.nu - 2.0 * cert.alpha);
      break;
    case RuleKind::sqrt_weight:
      out.closed_form = 0.5 * cert.kappa * std::pow(p, cert.nu / 2.0) /
                        (std::pow(p, 2.0 * cert.alpha - cert.nu) +
                         std::pow(p, cert.alpha - cert.nu / 2.0));
      break;
    default:
      break;
  }
  return out;
}

double bound_min_transition(const UnimodalCertificate& cert, const Eigen::MatrixXd& matrix) {
  if (!cert.valid) throw contract_error("bound_min_transition: invalid certificate");
  const int n = static_cast<int>(matrix.rows());
  if (static_cast<int>(cert.best_move.size()) != n)
    throw contract_error("bound_min_transition: certificate/matrix size mismatch");
  double lowest = kInf;
  for (int x = 0; x < n; ++x) {
    if (x == cert.mode) continue;
    lowest = std::min(lowest, matrix(x, cert.best_move[static_cast<std::size_t>(x)]));
  }
  return cert.kappa * lowest;
}

SetBound bound_set(const ConcentrationCertificate& cert, const ExactChain& chain,
                   double mass_ratio_tol) {
  if (!cert.valid) throw contract_error("bound_set: invalid certificate");
  if (cert.set_size < 2) throw contract_error("bound_set: the set must contain at least two states");
  if (!chain.rule) throw contract_error("bound_set: chain must use a balancing rule");

  SetBound out;
  const double p = chain.space.dimension_p;
  const double M = static_cast<double>(cert.set_size);
  const bool flat = cert.mass_ratio <= 1.0 + mass_ratio_tol;
  const bool irreducible = restriction_irreducible(chain.kernel, cert.target_set);

  if (flat && irreducible) {
    out.regime = SetBound::Regime::restricted_set;
    out.kappa = cert.kappa;
    const double h1 = std::exp(chain.rule->log_weight(0.0));
    out.bound = cert.kappa * h1 /
                (3.0 * (M * std::pow(p, cert.alpha - cert.nu) + 1.0) * M * (M - 1.0) *
                 chain.expected_zh);
    switch (chain.rule->kind()) {
      case RuleKind::plus_one:
        out.expected_zh_cap = 2.0 * std::pow(p, cert.alpha);
        break;
      case RuleKind::min_weight:
        out.expected_zh_cap = 2.0 * std::pow(p, 2.0 * cert.alpha - cert.nu) + M - 1.0;
        break;
      case RuleKind::sqrt_weight:
        out.expected_zh_cap = std::pow(p, 2.0 * cert.alpha - cert.nu) +
                              2.0 * std::pow(p, cert.alpha - cert.nu / 2.0) + M - 1.0;
        break;
      default:
        break;
    }
    out.note = "restricted-set bound";
    return out;
  }

  // Flat-set prerequisites failed: report the trace regime instead. The lazy
  // uniformized kernel is traced on the set and the best connectivity level
  // delta is the bottleneck edge of its maximum spanning structure.
  out.regime = SetBound::Regime::trace_fallback;
  out.note = flat ? "restriction of the kernel to the set is reducible"
                  : "mass ratio within the set exceeds one";
  const int n = chain.space.size();
  const double b = 2.0 * chain.rate.diagonal().cwiseAbs().maxCoeff();
  out.uniformization_b = b;
  const Eigen::MatrixXd lazy = chain.rate / b + Eigen::MatrixXd::Identity(n, n);
  out.trace_on_set = trace_kernel(lazy, cert.target_set);

  const int m = cert.set_size;
  std::vector<char> reached(static_cast<std::size_t>(m), 0);
  std::vector<double> level(static_cast<std::size_t>(m), 0.0);
  reached[0] = 1;
  level[0] = kInf;
  for (int pass = 1; pass < m; ++pass) {
    int best_j = -1;
    double best_w = -1.0;
    for (int i = 0; i < m; ++i) {
      if (!reached[static_cast<std::size_t>(i)]) continue;
      for (int j = 0; j < m; ++j) {
        if (reached[static_cast<std::size_t>(j)] || j == i) continue;
        const double w =
            std::min(out.trace_on_set(i, j), out.trace_on_set(j, i)) * b;
        const double bottleneck = std::min(level[static_cast<std::size_t>(i)], w);
        if (bottleneck > best_w) {
          best_w = bottleneck;
          best_j = j;
        }
      }
    }
    if (best_j < 0 || best_w <= 0.0) {
      out.connected = false;
      out.delta = 0.0;
      return out;
    }
    reached[static_cast<std::size_t>(best_j)] = 1;
    level[static_cast<std::size_t>(best_j)] = best_w;
  }
  out.connected = true;
  out.delta = *std::min_element(level.begin(), level.end());
  return out;
}

double mixing_time(const ExactChain& chain, double eps) {
  if (!(eps > 0.0 && eps < 1.0)) throw contract_error("mixing_time: eps must lie in (0,1)");
  const int n = chain.space.size();
  const double b = 2.0 * chain.rate.diagonal().cwiseAbs().maxCoeff();
  if (!(b > 0.0)) throw numeric_error("mixing_time: degenerate rate matrix");
  const Eigen::MatrixXd lazy = chain.rate / b + Eigen::MatrixXd::Identity(n, n);

  // Spectral form of the uniformized semigroup: exp(tQ) = exp(bt(P - I)) with
  // P reversible, so the symmetrized P gives exp(tQ) exactly.
  const Eigen::VectorXd root = chain.pi.cwiseSqrt();
  Eigen::MatrixXd sym = root.asDiagonal() * lazy * root.cwiseInverse().asDiagonal();
  sym = 0.5 * (sym + sym.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym);
  if (solver.info() != Eigen::Success) throw numeric_error("mixing_time: eigensolver failed");
  const Eigen::VectorXd lambda = solver.eigenvalues();
  const Eigen::MatrixXd left = root.cwiseInverse().asDiagonal() * solver.eigenvectors();
  const Eigen::MatrixXd right = solver.eigenvectors().transpose() * root.asDiagonal();

  auto worst_tv = [&](double t) {
    Eigen::VectorXd decay(n);
    for (int i = 0; i < n; ++i) decay[i] = std::exp(b * t * (lambda[i] - 1.0));
    const Eigen::MatrixXd heat = left * decay.asDiagonal() * right;
    double worst = 0.0;
    for (int x = 0; x < n; ++x) {
      double tv = 0.0;
      for (int y = 0; y < n; ++y) tv += std::abs(heat(x, y) - chain.pi[y]);
      worst = std::max(worst, 0.5 * tv);
    }
    return worst;
  };

  if (worst_tv(0.0) <= eps) return 0.0;
  double hi = 1.0 / b;
  int doublings = 0;
  while (worst_tv(hi) > eps) {
    hi *= 2.0;
    if (++doublings > 200) throw numeric_error("mixing_time: no bracket found");
  }
  double lo = (doublings == 0) ? 0.0 : hi / 2.0;
  for (int iter = 0; iter < 200 && (hi - lo) > 1e-12 * hi; ++iter) {
    const double mid = 0.5 * (lo + hi);
    (worst_tv(mid) <= eps ? hi : lo) = mid;
  }

  // Cross-check the answer against the literal Poisson mixture over powers of
  // the lazy kernel when that is affordable.
  const double bt = b * hi;
  const double terms_needed = bt + 12.0 * std::sqrt(bt + 1.0) + 40.0;
  if (static_cast<double>(n) * n * n * terms_needed < 2e9) {
    Eigen::MatrixXd power = Eigen::MatrixXd::Identity(n, n);
    Eigen::MatrixXd heat = Eigen::MatrixXd::Zero(n, n);
    double log_w = -bt;  // log Poisson(bt, 0)
    double covered = 0.0;
    for (int k = 0; covered < 1.0 - 1e-13 && k < static_cast<int>(terms_needed); ++k) {
      if (k > 0) {
        power = (power * lazy).eval();
        log_w += std::log(bt) - std::log(static_cast<double>(k));
      }
      const double w = std::exp(log_w);
      heat += w * power;
      covered += w;
    }
    double worst = 0.0;
    for (int x = 0; x < n; ++x) {
      double tv = 0.0;
      for (int y = 0; y < n; ++y) tv += std::abs(heat(x, y) - chain.pi[y]);
      worst = std::max(worst, 0.5 * tv);
    }
    const double spectral_value = worst_tv(hi);
    if (std::abs(worst - spectral_value) > 1e-8 + (1.0 - covered))
      throw numeric_error("mixing_time: uniformization cross-check failed");
  }
  return hi;
}

DecompositionBound bound_decomposition(const ExactChain& chain, const std::vector<int>& labels,
                                       const std::vector<int>& label_tmap, double nu_tilde) {
  const int n = chain.space.size();
  if (static_cast<int>(labels.size()) != n)
    throw contract_error("bound_decomposition: one label per state required");
  if (!chain.rule) throw contract_error("bound_decomposition: chain must use a balancing rule");
  if (!(nu_tilde > 0.0)) throw contract_error("bound_decomposition: nu_tilde must be positive");

  const int clusters = static_cast<int>(label_tmap.size());
  if (clusters >= n)
    throw contract_error("bound_decomposition: the clustering must be coarser than the space");
  std::vector<std::vector<int>> members(static_cast<std::size_t>(clusters));
  for (int x = 0; x < n; ++x) {
    if (labels[x] < 0 || labels[x] >= clusters)
      throw contract_error("bound_decomposition: label out of range");
    members[static_cast<std::size_t>(labels[x])].push_back(x);
  }
  for (int y = 0; y < clusters; ++y)
    if (members[static_cast<std::size_t>(y)].empty())
      throw contract_error("bound_decomposition: empty cluster " + std::to_string(y));

  int fixed_point = -1;
  for (int y = 0; y < clusters; ++y) {
    if (label_tmap[y] < 0 || label_tmap[y] >= clusters)
      throw contract_error("bound_decomposition: move map out of range");
    if (label_tmap[y] == y) {
      if (fixed_point >= 0)
        throw contract_error("bound_decomposition: move map has more than one fixed point");
      fixed_point = y;
    }
  }
  if (fixed_point < 0)
    throw contract_error("bound_decomposition: move map needs exactly one fixed point");

  DecompositionBound out;
  out.nu_tilde = nu_tilde;
  const double p = chain.space.dimension_p;
  const double logp = std::log(p);

  // Push-forward law and its certified improvement exponent.
  std::vector<double> cluster_mass(static_cast<std::size_t>(clusters), 0.0);
  for (int x = 0; x < n; ++x) cluster_mass[static_cast<std::size_t>(labels[x])] += chain.pi[x];
  double nu = kInf;
  int nu_witness = -1;
  for (int y = 0; y < clusters; ++y) {
    if (y == fixed_point) continue;
    const double ratio = std::log(cluster_mass[static_cast<std::size_t>(label_tmap[y])] /
                                  cluster_mass[static_cast<std::size_t>(y)]) /
                         logp;
    if (ratio < nu) {
      nu = ratio;
      nu_witness = y;
    }
  }
  out.nu = nu;

  int max_indegree = 0;
  for (int y = 0; y < clusters; ++y) {
    int indegree = 0;
    for (int yp = 0; yp < clusters; ++yp)
      if (label_tmap[yp] == y) ++indegree;
    max_indegree = std::max(max_indegree, indegree);
  }
  out.alpha = std::log(static_cast<double>(max_indegree)) / logp;
  if (!(out.nu > out.alpha)) {
    out.failure = "push-forward improvement exponent does not exceed the in-degree exponent";
    out.witness_label = nu_witness;
    return out;
  }

  // Boundary condition: within each non-apex cluster, the mass of states that
  // see a p^{nu_tilde}-better neighbor in the successor cluster.
  double epsilon = kInf;
  for (int y = 0; y < clusters; ++y) {
    if (y == fixed_point) continue;
    const int succ = label_tmap[y];
    double boundary_mass = 0.0;
    for (const int x : members[static_cast<std::size_t>(y)]) {
      double best = -kInf;
      for (const int xp : chain.space.adjacency[x])
        if (labels[xp] == succ) best = std::max(best, chain.space.log_mass[xp]);
      if (best - chain.space.log_mass[x] >= nu_tilde * logp) boundary_mass += chain.pi[x];
    }
    const double fraction = boundary_mass / cluster_mass[static_cast<std::size_t>(y)];
    if (fraction <= 0.0) {
      out.failure = "no boundary state reaches the successor cluster at level nu_tilde";
      out.witness_label = y;
      return out;
    }
    epsilon = std::min(epsilon, fraction);
  }
  out.epsilon = epsilon;

  double min_gap = kInf;
  for (int y = 0; y < clusters; ++y) {
    const auto& block = members[static_cast<std::size_t>(y)];
    if (block.size() < 2) continue;
    const Eigen::MatrixXd restricted = restrict_matrix(chain.rate, block, MatrixKind::rate);
    Eigen::VectorXd pi_block(static_cast<int>(block.size()));
    for (std::size_t i = 0; i < block.size(); ++i) pi_block[static_cast<int>(i)] = chain.pi[block[i]];
    pi_block /= pi_block.sum();
    min_gap = std::min(min_gap, spectral_gap(restricted, pi_block, MatrixKind::rate));
  }
  out.min_block_gap = min_gap;
  out.max_zh = chain.log_zh.maxCoeff();
  out.max_zh = std::exp(out.max_zh);

  out.kappa = kappa_constant(p, out.alpha, out.nu);
  const double front = out.kappa * epsilon * std::exp(chain.rule->log_weight(nu_tilde * logp));
  const double second =
      (min_gap == kInf) ? kInf : front * min_gap / (front + 3.0 * out.max_zh);
  out.bound = std::min(front / (3.0 * chain.expected_zh), second);
  out.valid = true;
  return out;
}

}  // namespace iit::spectral
