#pragma once

#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <variant>

#include "iit/models.hpp"
#include "iit/table_target.hpp"
#include "json_util.hpp"

namespace iit::cli {

using ModelVariant = std::variant<models::ToyChain, models::TwoModeHypercube,
                                  models::IsolatedModesHypercube, models::WeightedPermutations,
                                  models::VariableSelection, TableTarget>;

inline ModelVariant build_model(const json& spec) {
  const std::string where = "model";
  const std::string name = require_field<std::string>(spec, "name", where);
  if (name == "toy_chain") {
    check_keys(spec, {"name", "p", "r", "profile", "curvature"}, where);
    const int p = require_field<int>(spec, "p", where);
    const double r = require_field<double>(spec, "r", where);
    const std::string profile = optional_field<std::string>(spec, "profile", "flat_top", where);
    const double curvature = optional_field<double>(spec, "curvature", 1.0, where);
    models::ToyChain::Profile kind;
    if (profile == "flat_top")
      kind = models::ToyChain::Profile::flat_top;
    else if (profile == "strict")
      kind = models::ToyChain::Profile::strict;
    else if (profile == "power_law")
      kind = models::ToyChain::Profile::power_law;
    else
      throw config_error("model: unknown toy_chain profile '" + profile + "'");
    return models::ToyChain(p, r, kind, curvature);
  }
  if (name == "two_mode_hypercube") {
    check_keys(spec, {"name", "p", "r"}, where);
    return models::TwoModeHypercube(require_field<int>(spec, "p", where),
                                    require_field<double>(spec, "r", where));
  }
  if (name == "isolated_modes_hypercube") {
    check_keys(spec, {"name", "p", "r", "swaps"}, where);
    return models::IsolatedModesHypercube(require_field<int>(spec, "p", where),
                                          require_field<double>(spec, "r", where),
                                          optional_field<bool>(spec, "swaps", true, where));
  }
  if (name == "weighted_permutations") {
    check_keys(spec, {"name", "p", "eta", "scenario", "seed"}, where);
    const int scenario = optional_field<int>(spec, "scenario", 1, where);
    if (scenario != 1 && scenario != 2)
      throw config_error("model: weighted_permutations scenario must be 1 or 2");
    return models::WeightedPermutations(
        require_field<int>(spec, "p", where), require_field<double>(spec, "eta", where),
        scenario == 1 ? models::PermutationScenario::one : models::PermutationScenario::two,
        require_field<std::uint64_t>(spec, "seed", where));
  }
  if (name == "variable_selection") {
    check_keys(spec,
               {"name", "n", "p", "s_star", "snr", "data_seed", "data_csv", "g", "c0",
                "size_cap"},
               where);
    models::RegressionData data;
    if (spec.contains("data_csv")) {
      std::ifstream in(require_field<std::string>(spec, "data_csv", where));
      if (!in) throw config_error("model: cannot open data_csv file");
      data = models::RegressionData::from_csv(in);
    } else {
      data = models::simulate_regression(require_field<int>(spec, "n", where),
                                         require_field<int>(spec, "p", where),
                                         require_field<int>(spec, "s_star", where),
                                         require_field<double>(spec, "snr", where),
                                         require_field<std::uint64_t>(spec, "data_seed", where));
    }
    const double p_real = static_cast<double>(data.cols());
    const double g = optional_field<double>(spec, "g", p_real * p_real * p_real - 1.0, where);
    const double c0 = optional_field<double>(spec, "c0", 2.0, where);
    std::optional<int> cap;
    if (spec.contains("size_cap") && !spec.at("size_cap").is_null())
      cap = require_field<int>(spec, "size_cap", where);
    return models::VariableSelection(std::move(data), g, c0, cap);
  }
  if (name == "table") {
    check_keys(spec, {"name", "log_mass", "adjacency", "p"}, where);
    return TableTarget(require_field<std::vector<double>>(spec, "log_mass", where),
                       require_field<std::vector<std::vector<int>>>(spec, "adjacency", where),
                       require_field<double>(spec, "p", where));
  }
  throw config_error("unknown model '" + name + "'");
}

// Default chain starts: a state far from the heavy region where that is
// meaningful, the empty model otherwise.
template <class Model>
typename Model::state_type default_start(const Model& model) {
  if constexpr (std::is_same_v<Model, models::ToyChain>) {
    return model.top_state();
  } else if constexpr (std::is_same_v<Model, models::TwoModeHypercube> ||
                       std::is_same_v<Model, models::IsolatedModesHypercube>) {
    (void)model;
    return 0;
  } else if constexpr (std::is_same_v<Model, models::WeightedPermutations>) {
    auto tau = model.identity_state();
    std::reverse(tau.begin(), tau.end());
    return tau;
  } else if constexpr (std::is_same_v<Model, models::VariableSelection>) {
    (void)model;
    return {};
  } else {
    (void)model;
    return 0;
  }
}

template <class Model>
std::function<double(const typename Model::state_type&)> resolve_functional(
    const Model& model, const std::string& name) {
  using State = typename Model::state_type;
  if (name == "log_mass")
    return [&model](const State& x) { return model.log_mass(x); };
  if constexpr (std::is_same_v<Model, models::ToyChain>) {
    if (name == "state") return [](const State& x) { return static_cast<double>(x); };
    if (name == "head_pair") return [](const State& x) { return x <= 1 ? 1.0 : 0.0; };
  } else if constexpr (std::is_same_v<Model, models::TwoModeHypercube> ||
                       std::is_same_v<Model, models::IsolatedModesHypercube>) {
    if (name == "size")
      return [](const State& x) { return static_cast<double>(std::popcount(x)); };
    if (name.rfind("coord:", 0) == 0) {
      const int i = std::stoi(name.substr(6));
      if (i < 1 || i > static_cast<int>(model.dimension_p()))
        throw config_error("functional '" + name + "': coordinate out of range");
      return [i](const State& x) {
        return (x >> (i - 1)) & std::uint64_t{1} ? 1.0 : 0.0;
      };
    }
  } else if constexpr (std::is_same_v<Model, models::WeightedPermutations>) {
    if (name.rfind("rank:", 0) == 0) {
      const int k = std::stoi(name.substr(5));
      if (k < 1 || k > model.size())
        throw config_error("functional '" + name + "': variable out of range");
      return [k](const State& tau) {
        for (std::size_t pos = 0; pos < tau.size(); ++pos)
          if (tau[pos] == k - 1) return static_cast<double>(pos + 1);
        return 0.0;
      };
    }
  } else if constexpr (std::is_same_v<Model, models::VariableSelection>) {
    if (name == "size") return [](const State& x) { return static_cast<double>(x.size()); };
    if (name.rfind("includes:", 0) == 0) {
      const int j = std::stoi(name.substr(9));
      if (j < 1 || j > model.variable_count())
        throw config_error("functional '" + name + "': variable out of range");
      return [j](const State& x) {
        return std::binary_search(x.begin(), x.end(), static_cast<std::uint16_t>(j - 1)) ? 1.0
                                                                                         : 0.0;
      };
    }
  }
  throw config_error("unknown functional '" + name + "' for this model");
}

template <class Model>
typename Model::state_type resolve_start(const Model& model, const json& config,
                                         const std::string& where) {
  if (config.contains("start"))
    return model.parse_state(require_field<std::string>(config, "start", where));
  return default_start(model);
}

}  // namespace iit::cli
