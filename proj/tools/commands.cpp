#include "commands.hpp"

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "iit/experiment.hpp"
#include "iit/samplers.hpp"
#include "iit/spectral.hpp"
#include "model_registry.hpp"

namespace iit::cli {

namespace fs = std::filesystem;

namespace {

std::string out_path(const GlobalOptions& options, const std::string& file) {
  fs::create_directories(options.out_dir);
  return (fs::path(options.out_dir) / file).string();
}

SamplerSpec parse_sampler_spec(const json& spec, const std::string& where) {
  check_keys(spec, {"kind", "rule", "a", "steps", "eval_budget", "time_budget"}, where);
  SamplerSpec out;
  out.kind = require_field<std::string>(spec, "kind", where);
  if (out.kind == "iit") out.rule = require_field<std::string>(spec, "rule", where);
  if (out.kind == "iit-power") out.power_a = require_field<double>(spec, "a", where);
  if (out.kind != "iit" && out.kind != "iit-power" && out.kind != "rwmh" && out.kind != "ads" &&
      out.kind != "zanella")
    throw config_error(where + ": unknown sampler kind '" + out.kind + "'");
  return out;
}

void warn_if_aggressive(const SamplerSpec& spec, double dimension_p) {
  if (spec.kind == "iit-power" && spec.power_a > 0.5)
    std::cerr << "warning: power exponent " << spec.power_a
              << " > 0.5 is aggressive; tail importance weights can blow up "
                 "super-exponentially\n";
  if (spec.kind == "iit") {
    const auto rule = parse_rule(spec.rule, dimension_p);
    if (rule.aggressive())
      std::cerr << "warning: rule '" << spec.rule
                << "' is aggressive (exponent > 0.5); tail importance weights can blow up "
                   "super-exponentially\n";
  }
}

template <class State>
void write_chain_csv(const std::string& path, const WeightedChain<State>& chain,
                     const std::function<std::string(const State&)>& format,
                     const std::vector<std::string>& functional_names,
                     const std::vector<std::function<double(const State&)>>& functionals) {
  std::ostringstream out;
  out << "iteration,state,log_weight";
  for (const auto& name : functional_names) out << ",f:" << name;
  out << "\n";
  for (std::size_t k = 0; k < chain.states.size(); ++k) {
    out << (k + 1) << "," << format(chain.states[k]) << ","
        << format_number(chain.log_weights[k]);
    for (const auto& f : functionals) out << "," << format_number(f(chain.states[k]));
    out << "\n";
  }
  write_text_file(path, out.str());
}

}  // namespace

// ---------------------------------------------------------------------------
// sample

int cmd_sample(const GlobalOptions& options) {
  const std::string raw = read_text_file(options.config_path);
  const json config = parse_config_text(raw);
  const std::string where = "sample config";
  check_keys(config, {"model", "sampler", "start", "seed", "functionals", "output"}, where);
  const json sampler_json = config.contains("sampler") ? config.at("sampler") : json::object();
  const SamplerSpec spec = parse_sampler_spec(sampler_json, where + ".sampler");
  const std::uint64_t seed = require_field<std::uint64_t>(config, "seed", where);
  const auto functional_names =
      optional_field<std::vector<std::string>>(config, "functionals", {}, where);
  const json output = config.contains("output") ? config.at("output") : json::object();
  check_keys(output, {"chain_csv", "estimate_json"}, where + ".output");
  const std::string chain_name =
      optional_field<std::string>(output, "chain_csv", "chain.csv", where);
  const std::string estimate_name =
      optional_field<std::string>(output, "estimate_json", "estimate.json", where);

  ModelVariant model = build_model(require_field<json>(config, "model", where));
  return std::visit(
      [&](const auto& target) -> int {
        using Model = std::decay_t<decltype(target)>;
        using State = typename Model::state_type;
        warn_if_aggressive(spec, target.dimension_p());
        const State start = resolve_start(target, config, where);

        std::vector<std::function<double(const State&)>> functionals;
        for (const auto& name : functional_names)
          functionals.push_back(resolve_functional(target, name));

        WeightedChain<State> chain;
        if (spec.kind == "zanella") {
          const double budget =
              require_field<double>(sampler_json, "time_budget", where + ".sampler");
          const auto rule = parse_rule(
              optional_field<std::string>(sampler_json, "rule", "sqrt", where), target.dimension_p());
          chain = zanella_run(target, rule, start, budget, seed).as_weighted_chain();
        } else {
          RunLimit limit;
          limit.steps = optional_field<std::int64_t>(sampler_json, "steps", -1, where);
          limit.eval_budget =
              optional_field<std::int64_t>(sampler_json, "eval_budget", -1, where);
          limit.validate();
          chain = run_sampler(target, spec, start, limit, seed);
        }

        write_chain_csv<State>(
            out_path(options, chain_name), chain,
            [&target](const State& x) { return target.format_state(x); }, functional_names,
            functionals);

        json report;
        report["config"] = raw;
        report["sampler"] = chain.sampler_tag;
        report["seed"] = chain.seed;
        report["length"] = chain.states.size();
        report["posterior_evals"] = chain.posterior_evals;
        report["estimates"] = json::object();
        for (std::size_t f = 0; f < functionals.size(); ++f) {
          const auto est = estimate(chain, functionals[f]);
          report["estimates"][functional_names[f]] = {{"estimate", est.estimate},
                                                      {"ess", est.ess},
                                                      {"log_normalizer", est.log_normalizer}};
        }
        write_text_file(out_path(options, estimate_name), report.dump(2) + "\n");
        return 0;
      },
      model);
}

// ---------------------------------------------------------------------------
// exact

namespace {

json certificate_json(const spectral::UnimodalCertificate& cert,
                      const spectral::EnumeratedSpace& space) {
  json out;
  out["kind"] = "unimodal";
  out["valid"] = cert.valid;
  if (!cert.valid) {
    out["failure"] = cert.failure;
    if (cert.witness >= 0) out["witness"] = space.labels[static_cast<std::size_t>(cert.witness)];
    return out;
  }
  out["mode"] = space.labels[static_cast<std::size_t>(cert.mode)];
  out["nu"] = cert.nu;
  out["alpha"] = cert.alpha;
  out["kappa"] = cert.kappa;
  out["had_ties"] = cert.had_ties;
  return out;
}

json concentration_json(const spectral::ConcentrationCertificate& cert,
                        const spectral::EnumeratedSpace& space) {
  json out;
  out["kind"] = "concentration";
  out["valid"] = cert.valid;
  out["set_size"] = cert.set_size;
  out["mass_ratio"] = cert.mass_ratio;
  if (!cert.valid) {
    out["failure"] = cert.failure;
    if (cert.witness >= 0) out["witness"] = space.labels[static_cast<std::size_t>(cert.witness)];
    return out;
  }
  out["nu"] = cert.nu;
  out["alpha"] = cert.alpha;
  out["kappa"] = cert.kappa;
  return out;
}

json analyze_chain(const spectral::ExactChain& chain,
                   const std::optional<std::vector<int>>& concentration_set,
                   const std::optional<std::vector<int>>& subset, bool want_mixing) {
  json out;
  out["weighting"] = chain.weighting;
  out["states"] = chain.space.size();
  const int n = chain.space.size();

  const Eigen::VectorXd residual_vec =
      (chain.pi_h.transpose() * chain.kernel).transpose() - chain.pi_h;
  out["stationarity_residual"] = residual_vec.cwiseAbs().maxCoeff();
  const Eigen::MatrixXd flow = chain.pi_h.asDiagonal() * chain.kernel;
  out["detailed_balance_residual"] = (flow - flow.transpose()).cwiseAbs().maxCoeff();
  out["row_sum_residual"] =
      (chain.kernel.rowwise().sum() - Eigen::VectorXd::Ones(n)).cwiseAbs().maxCoeff();
  out["expected_zh"] = chain.expected_zh;

  const double kernel_gap =
      spectral::spectral_gap(chain.kernel, chain.pi_h, spectral::MatrixKind::kernel);
  const double rate_gap =
      spectral::spectral_gap(chain.rate, chain.pi, spectral::MatrixKind::rate);
  out["kernel_gap"] = kernel_gap;
  out["rate_gap"] = rate_gap;

  const auto cert = spectral::verify_unimodal(chain.space);
  json cert_json = certificate_json(cert, chain.space);
  if (cert.valid && chain.rule) {
    const auto bound = spectral::bound_unimodal(cert, chain);
    cert_json["bound"] = bound.bound;
    cert_json["exact_gap"] = rate_gap;
    cert_json["slack"] = rate_gap - bound.bound;
    if (bound.closed_form) cert_json["closed_form"] = *bound.closed_form;
    const Eigen::MatrixXd mh = spectral::mh_kernel(chain.space);
    const double mh_gap = spectral::spectral_gap(mh, chain.pi, spectral::MatrixKind::kernel);
    cert_json["mh_path_bound"] = spectral::bound_min_transition(cert, mh);
    cert_json["mh_exact_gap"] = mh_gap;
  }
  out["unimodal"] = cert_json;

  if (concentration_set) {
    const auto conc = spectral::verify_concentration(chain.space, *concentration_set);
    json conc_json = concentration_json(conc, chain.space);
    if (conc.valid && chain.rule) {
      const auto bound = spectral::bound_set(conc, chain);
      if (bound.regime == spectral::SetBound::Regime::restricted_set) {
        conc_json["regime"] = "restricted_set";
        conc_json["bound"] = bound.bound;
        conc_json["exact_gap"] = rate_gap;
        conc_json["slack"] = rate_gap - bound.bound;
        if (bound.expected_zh_cap) conc_json["expected_zh_cap"] = *bound.expected_zh_cap;
      } else {
        conc_json["regime"] = "trace_fallback";
        conc_json["note"] = bound.note;
        conc_json["delta"] = bound.delta;
        conc_json["connected"] = bound.connected;
      }
    }
    out["concentration"] = conc_json;
  }

  if (subset) {
    json sub;
    const Eigen::MatrixXd restricted =
        spectral::restrict_matrix(chain.kernel, *subset, spectral::MatrixKind::kernel);
    const Eigen::MatrixXd traced = spectral::trace_kernel(chain.kernel, *subset);
    const int m = static_cast<int>(subset->size());
    Eigen::VectorXd pi_sub(m);
    for (int i = 0; i < m; ++i) pi_sub[i] = chain.pi_h[(*subset)[static_cast<std::size_t>(i)]];
    pi_sub /= pi_sub.sum();
    sub["trace_row_sum_residual"] =
        (traced.rowwise().sum() - Eigen::VectorXd::Ones(m)).cwiseAbs().maxCoeff();
    sub["trace_stationary_residual"] =
        ((pi_sub.transpose() * traced).transpose() - pi_sub).cwiseAbs().maxCoeff();
    sub["restriction_stationary_residual"] =
        ((pi_sub.transpose() * restricted).transpose() - pi_sub).cwiseAbs().maxCoeff();
    if (m >= 2) {
      sub["trace_gap"] = spectral::spectral_gap(traced, pi_sub, spectral::MatrixKind::kernel);
      try {
        sub["restriction_gap"] =
            spectral::spectral_gap(restricted, pi_sub, spectral::MatrixKind::kernel);
      } catch (const contract_error&) {
        sub["restriction_gap"] = nullptr;
      }
    }
    out["subset"] = sub;
  }

  if (want_mixing) out["mixing_time"] = spectral::mixing_time(chain);
  return out;
}

}  // namespace

int cmd_exact(const GlobalOptions& options) {
  const std::string raw = read_text_file(options.config_path);
  const json config = parse_config_text(raw);
  const std::string where = "exact config";
  check_keys(config, {"model", "rules", "powers", "cap", "requests"}, where);
  const auto rules = optional_field<std::vector<std::string>>(config, "rules", {"sqrt"}, where);
  const auto powers = optional_field<std::vector<double>>(config, "powers", {}, where);
  const std::uint64_t cap = optional_field<std::uint64_t>(config, "cap", options.cap, where);
  const json requests = config.contains("requests") ? config.at("requests") : json::object();
  check_keys(requests, {"mixing_time", "concentration_set", "subset"}, where + ".requests");
  const bool want_mixing = optional_field<bool>(requests, "mixing_time", false, where);

  ModelVariant model = build_model(require_field<json>(config, "model", where));
  return std::visit(
      [&](const auto& target) -> int {
        const auto enumeration = spectral::enumerate_space(target, cap);
        std::optional<std::vector<int>> concentration_set;
        if (requests.contains("concentration_set")) {
          concentration_set = std::vector<int>();
          for (const auto& text :
               require_field<std::vector<std::string>>(requests, "concentration_set", where))
            concentration_set->push_back(enumeration.index.at(target.parse_state(text)));
        }
        std::optional<std::vector<int>> subset;
        if (requests.contains("subset")) {
          subset = std::vector<int>();
          for (const auto& text :
               require_field<std::vector<std::string>>(requests, "subset", where))
            subset->push_back(enumeration.index.at(target.parse_state(text)));
          std::sort(subset->begin(), subset->end());
        }

        json report;
        report["config"] = raw;
        report["results"] = json::array();
        for (const auto& rule_spec : rules) {
          const auto chain = spectral::build_exact(
              enumeration.space, parse_rule(rule_spec, target.dimension_p()), cap);
          report["results"].push_back(
              analyze_chain(chain, concentration_set, subset, want_mixing));
        }
        for (const double a : powers) {
          const auto chain = spectral::build_exact_power(enumeration.space, a, cap);
          report["results"].push_back(
              analyze_chain(chain, concentration_set, subset, want_mixing));
        }
        write_text_file(out_path(options, "exact.json"), report.dump(2) + "\n");
        return 0;
      },
      model);
}

// ---------------------------------------------------------------------------
// experiment

int cmd_experiment(const GlobalOptions& options) {
  const std::string raw = read_text_file(options.config_path);
  const json config = parse_config_text(raw);
  const std::string where = "experiment config";
  check_keys(config,
             {"model", "samplers", "replicates", "eval_budget", "functionals", "start", "seed"},
             where);
  const int replicates = require_field<int>(config, "replicates", where);
  if (replicates < 2) throw config_error(where + ": need at least 2 replicates");
  const std::int64_t budget = require_field<std::int64_t>(config, "eval_budget", where);
  const std::uint64_t seed = require_field<std::uint64_t>(config, "seed", where);
  const auto functional_names =
      optional_field<std::vector<std::string>>(config, "functionals", {}, where);
  std::vector<SamplerSpec> samplers;
  for (const auto& spec : require_field<json>(config, "samplers", where))
    samplers.push_back(parse_sampler_spec(spec, where + ".samplers"));

  ModelVariant model = build_model(require_field<json>(config, "model", where));
  return std::visit(
      [&](const auto& target) -> int {
        using Model = std::decay_t<decltype(target)>;
        using State = typename Model::state_type;
        for (const auto& spec : samplers) warn_if_aggressive(spec, target.dimension_p());
        const State start = resolve_start(target, config, where);
        std::vector<NamedFunctional<State>> functionals;
        for (const auto& name : functional_names)
          functionals.push_back({name, resolve_functional(target, name)});

        ExperimentResult<State> result;
        try {
          result = run_experiment(target, start, samplers, replicates, budget, functionals,
                                  seed, options.workers);
        } catch (const std::exception& err) {
          // leave a marker so partial output directories are never mistaken
          // for completed runs
          write_text_file(out_path(options, "FAILED"),
                          std::string("replicate failure: ") + err.what() + "\n");
          throw;
        }

        // variance table
        std::ostringstream variance_csv;
        variance_csv << "sampler,functional,var,ess_mean,evals\n";
        for (const auto& outcome : result.samplers) {
          double evals_mean = 0.0;
          for (const auto& chain : outcome.chains)
            evals_mean += static_cast<double>(chain.posterior_evals);
          evals_mean /= static_cast<double>(outcome.chains.size());
          for (std::size_t f = 0; f < functionals.size(); ++f)
            variance_csv << outcome.spec.label() << "," << functionals[f].name << ","
                         << format_number(outcome.estimate_variance[f]) << ","
                         << format_number(outcome.ess_mean) << ","
                         << format_number(evals_mean) << "\n";
        }
        write_text_file(out_path(options, "variance.csv"), variance_csv.str());

        // hitting iterations for the best visited state
        std::ostringstream hits_csv;
        hits_csv << "sampler,replicate,hit_iteration\n";
        for (const auto& outcome : result.samplers)
          for (std::size_t r = 0; r < outcome.hit_iteration.size(); ++r)
            hits_csv << outcome.spec.label() << "," << (r + 1) << ","
                     << outcome.hit_iteration[r] << "\n";
        write_text_file(out_path(options, "hits.csv"), hits_csv.str());

        // nu histogram over the pooled distinct visited states
        std::ostringstream nu_csv;
        nu_csv << "bin_low,bin_high,count\n";
        const double lo = -4.0, hi = 8.0, width = 0.5;
        const int bins = static_cast<int>((hi - lo) / width);
        std::vector<int> counts(static_cast<std::size_t>(bins) + 2, 0);
        for (const double nu : result.nu_over_distinct_states) {
          int bin;
          if (nu < lo)
            bin = 0;
          else if (nu >= hi)
            bin = bins + 1;
          else
            bin = 1 + static_cast<int>((nu - lo) / width);
          counts[static_cast<std::size_t>(bin)]++;
        }
        nu_csv << "-inf," << format_number(lo) << "," << counts[0] << "\n";
        for (int b = 0; b < bins; ++b)
          nu_csv << format_number(lo + b * width) << "," << format_number(lo + (b + 1) * width)
                 << "," << counts[static_cast<std::size_t>(b) + 1] << "\n";
        nu_csv << format_number(hi) << ",inf," << counts[static_cast<std::size_t>(bins) + 1]
               << "\n";
        write_text_file(out_path(options, "nu.csv"), nu_csv.str());

        json summary;
        summary["config"] = raw;
        summary["best_state"] = result.best_state_label;
        summary["best_state_log_mass"] = result.best_state_log_mass;
        summary["local_mode_count"] = result.local_mode_count;
        summary["distinct_states"] = result.nu_over_distinct_states.size();
        int above2 = 0;
        for (const double nu : result.nu_over_distinct_states)
          if (nu > 2.0) ++above2;
        summary["nu_above_2_fraction"] =
            result.nu_over_distinct_states.empty()
                ? 0.0
                : static_cast<double>(above2) /
                      static_cast<double>(result.nu_over_distinct_states.size());
        summary["samplers"] = json::array();
        for (const auto& outcome : result.samplers) {
          json entry;
          entry["label"] = outcome.spec.label();
          entry["ess_mean"] = outcome.ess_mean;
          json evals = json::array();
          for (const auto& chain : outcome.chains) evals.push_back(chain.posterior_evals);
          entry["posterior_evals"] = evals;
          entry["estimate_mean"] = json::object();
          entry["estimate_variance"] = json::object();
          for (std::size_t f = 0; f < functionals.size(); ++f) {
            entry["estimate_mean"][functionals[f].name] = outcome.estimate_mean[f];
            entry["estimate_variance"][functionals[f].name] = outcome.estimate_variance[f];
          }
          summary["samplers"].push_back(entry);
        }
        write_text_file(out_path(options, "summary.json"), summary.dump(2) + "\n");
        return 0;
      },
      model);
}

}  // namespace iit::cli
