#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gradflow/measures.hpp"

// Strict experiment configuration:
//
//   {
//     "experiment": "jko",
//     "parameters": { ... experiment specific ... },
//     "constants":  { "R": ..., "k": ..., "N_A": ..., "T": ..., "eta": ..., "g": ..., "c0": ... },
//     "output_dir": "out/jko",
//     "seed": 42
//   }
//
// Only `experiment` is required. Missing parameters take the defaults
// below; constants default to dimensionless units (all 1).

namespace gradflow {

using nlohmann::json;

enum class ParamType { number, integer, boolean, string, number_array };

inline const char* to_string(ParamType t) {
  switch (t) {
    case ParamType::number: return "number";
    case ParamType::integer: return "nonnegative integer";
    case ParamType::boolean: return "boolean";
    case ParamType::string: return "string";
    case ParamType::number_array: return "array of numbers";
  }
  return "?";
}

struct ParamSpec {
  std::string key;
  ParamType type;
  json default_value;                // null: required
  std::vector<std::string> choices;  // for strings; empty = free
};

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names = {"entropy", "transport",      "jko",       "fokker_planck", "multicomponent",
                                                 "phasefield", "particles", "ldp", "reversibility"};
  return names;
}

inline std::vector<ParamSpec> parameter_schema(const std::string& experiment) {
  using T = ParamType;
  if (experiment == "entropy")
    return {{"alphabet", T::integer, 4, {}}, {"pairs", T::integer, 1000, {}}};
  if (experiment == "transport")
    return {{"n", T::integer, 6, {}},          {"dim", T::integer, 2, {}},    {"instances", T::integer, 20, {}},
            {"path_cells", T::integer, 200, {}}, {"path_steps", T::integer, 20, {}}, {"shift", T::number, 1.0, {}}};
  if (experiment == "jko")
    return {{"cells", T::integer, 400, {}},   {"a", T::number, -8.0, {}},        {"b", T::number, 8.0, {}},
            {"h", T::number, 1e-3, {}},        {"steps", T::integer, 100, {}},     {"initial_variance", T::number, 1.0, {}},
            {"potential", T::string, "none", {"none", "quadratic"}},         {"strength", T::number, 1.0, {}}};
  if (experiment == "fokker_planck")
    return {{"cells", T::integer, 100, {}},
            {"a", T::number, 0.0, {}},
            {"b", T::number, 5.0, {}},
            {"T_end", T::number, 50.0, {}},
            {"cfl", T::number, 0.9, {}},
            {"potential", T::string, "linear", {"none", "linear", "quadratic", "gravity"}},
            {"strength", T::number, 1.0, {}},
            {"initial", T::string, "uniform", {"uniform", "gaussian"}},
            {"initial_mean", T::number, 2.5, {}},
            {"initial_sd", T::number, 0.5, {}},
            {"record_every", T::integer, 1000, {}},
            {"edi", T::boolean, false, {}}};
  if (experiment == "multicomponent")
    return {{"cells", T::integer, 50, {}},       {"a", T::number, 0.0, {}},          {"b", T::number, 1.0, {}},
            {"steps", T::integer, 1000, {}},     {"cfl", T::number, 0.8, {}},         {"balance", T::string, "global", {"global", "local"}},
            {"alpha", T::number_array, json::array({1.0, 1.0}), {}}, {"eta", T::number_array, json::array({1.0, 1.0}), {}},
            {"amplitude", T::number, 0.3, {}},  {"record_every", T::integer, 100, {}}};
  if (experiment == "phasefield")
    return {{"model", T::string, "cahn_hilliard", {"allen_cahn", "cahn_hilliard"}},
            {"cells", T::integer, 64, {}},
            {"a", T::number, 0.0, {}},
            {"b", T::number, 8.0, {}},
            {"steps", T::integer, 10000, {}},
            {"cfl", T::number, 0.5, {}},
            {"mobility", T::number, 1.0, {}},
            {"mean", T::number, 0.0, {}},
            {"amplitude", T::number, 0.1, {}},
            {"record_every", T::integer, 100, {}}};
  if (experiment == "particles")
    return {{"n", T::integer, 1000, {}},          {"dt", T::number, 1e-3, {}},           {"T", T::number, 1.0, {}},
            {"potential", T::string, "quadratic", {"none", "quadratic"}}, {"strength", T::number, 1.0, {}},
            {"interaction", T::number, 0.0, {}}, {"A", T::number, 1.0, {}},             {"sigma", T::number, 1.0, {}},
            {"initial_mean", T::number, 2.0, {}}, {"initial_sd", T::number, 0.5, {}},  {"cells", T::integer, 240, {}},
            {"a", T::number, -6.0, {}},          {"b", T::number, 6.0, {}},             {"snapshot_every", T::integer, 250, {}}};
  if (experiment == "ldp")
    return {{"coin_n", T::number_array, json::array({100, 500, 2000}), {}},
            {"a", T::number, 0.6, {}},
            {"mu", T::number_array, json::array({1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}), {}},
            {"tilt", T::number_array, json::array(), {}},
            {"state", T::integer, 0, {}},
            {"threshold", T::number, 0.6, {}},
            {"sanov_n", T::number_array, json::array({30, 60, 120}), {}}};
  if (experiment == "reversibility")
    return {{"cells", T::integer, 60, {}},      {"a", T::number, -3.0, {}},        {"b", T::number, 3.0, {}},
            {"segments", T::integer, 10, {}},  {"sigma_y_sq", T::number, 2.0, {}}, {"coupling", T::number, 1.0, {}}};
  return {};
}

struct ExperimentConfig {
  std::string experiment;
  json parameters;  // every schema key, defaults filled in
  PhysicalConstants constants = PhysicalConstants::dimensionless();
  json constants_json;  // the resolved constants block
  std::optional<std::string> output_dir;
  std::uint64_t seed = 0;

  double num(const std::string& key) const { return parameters.at(key).get<double>(); }
  std::size_t count(const std::string& key) const { return parameters.at(key).get<std::size_t>(); }
  std::string str(const std::string& key) const { return parameters.at(key).get<std::string>(); }
  bool flag(const std::string& key) const { return parameters.at(key).get<bool>(); }
  std::vector<double> numbers(const std::string& key) const { return parameters.at(key).get<std::vector<double>>(); }

  /// Canonical JSON used for hashing (output location excluded).
  json canonical() const {
    return {{"experiment", experiment}, {"parameters", parameters}, {"constants", constants_json}, {"seed", seed}};
  }
};

struct ConfigReport {
  std::vector<std::string> errors;
  std::optional<ExperimentConfig> config;

  bool ok() const { return errors.empty(); }
};

namespace detail {

inline std::string json_type_name(const json& v) {
  if (v.is_null()) return "null";
  if (v.is_boolean()) return "boolean";
  if (v.is_number_integer()) return v.is_number_unsigned() || v.get<std::int64_t>() >= 0 ? "integer" : "negative integer";
  if (v.is_number()) return "number";
  if (v.is_string()) return "string";
  if (v.is_array()) return "array";
  return "object";
}

inline bool matches(ParamType t, const json& v) {
  switch (t) {
    case ParamType::number: return v.is_number();
    case ParamType::integer: return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
    case ParamType::boolean: return v.is_boolean();
    case ParamType::string: return v.is_string();
    case ParamType::number_array: {
      if (!v.is_array()) return false;
      for (const auto& e : v)
        if (!e.is_number()) return false;
      return true;
    }
  }
  return false;
}

}  // namespace detail

/// Strict validation; on success the resolved configuration is returned.
inline ConfigReport validate_config(const json& root) {
  ConfigReport report;
  auto& errors = report.errors;
  if (!root.is_object()) {
    errors.push_back("<root>: expected object, got " + detail::json_type_name(root));
    return report;
  }
  static const std::vector<std::string> top = {"experiment", "parameters", "constants", "output_dir", "seed"};
  for (auto it = root.begin(); it != root.end(); ++it)
    if (std::find(top.begin(), top.end(), it.key()) == top.end()) errors.push_back(it.key() + ": unknown key");

  ExperimentConfig cfg;
  if (!root.contains("experiment")) {
    errors.push_back("experiment: missing required key");
  } else if (!root["experiment"].is_string()) {
    errors.push_back("experiment: expected string, got " + detail::json_type_name(root["experiment"]));
  } else {
    cfg.experiment = root["experiment"].get<std::string>();
    const auto& names = experiment_names();
    if (std::find(names.begin(), names.end(), cfg.experiment) == names.end()) {
      std::string list;
      for (const auto& n : names) list += (list.empty() ? "" : ", ") + n;
      errors.push_back("experiment: unknown experiment '" + cfg.experiment + "' (expected one of " + list + ")");
    }
  }

  if (root.contains("output_dir")) {
    if (root["output_dir"].is_string())
      cfg.output_dir = root["output_dir"].get<std::string>();
    else
      errors.push_back("output_dir: expected string, got " + detail::json_type_name(root["output_dir"]));
  }
  if (root.contains("seed")) {
    if (detail::matches(ParamType::integer, root["seed"]))
      cfg.seed = root["seed"].get<std::uint64_t>();
    else
      errors.push_back("seed: expected nonnegative integer, got " + detail::json_type_name(root["seed"]));
  }

  // constants
  cfg.constants_json = json::object();
  if (root.contains("constants")) {
    const auto& c = root["constants"];
    if (!c.is_object()) {
      errors.push_back("constants: expected object, got " + detail::json_type_name(c));
    } else {
      std::map<std::string, double*> slots = {{"R", &cfg.constants.R},   {"k", &cfg.constants.k}, {"N_A", &cfg.constants.N_A},
                                              {"T", &cfg.constants.T},   {"eta", &cfg.constants.eta},
                                              {"g", &cfg.constants.g},   {"c0", &cfg.constants.c0}};
      for (auto it = c.begin(); it != c.end(); ++it) {
        auto slot = slots.find(it.key());
        if (slot == slots.end()) {
          errors.push_back("constants." + it.key() + ": unknown key");
        } else if (!it.value().is_number()) {
          errors.push_back("constants." + it.key() + ": expected number, got " + detail::json_type_name(it.value()));
        } else {
          *slot->second = it.value().get<double>();
        }
      }
    }
  }
  try {
    cfg.constants.validate();
  } catch (const Error& e) {
    errors.push_back(std::string("constants: ") + e.what());
  }
  cfg.constants_json = {{"R", cfg.constants.R},     {"k", cfg.constants.k}, {"N_A", cfg.constants.N_A}, {"T", cfg.constants.T},
                        {"eta", cfg.constants.eta}, {"g", cfg.constants.g}, {"c0", cfg.constants.c0}};

  // parameters
  const auto schema = parameter_schema(cfg.experiment);
  cfg.parameters = json::object();
  json given = json::object();
  if (root.contains("parameters")) {
    if (root["parameters"].is_object())
      given = root["parameters"];
    else
      errors.push_back("parameters: expected object, got " + detail::json_type_name(root["parameters"]));
  }
  if (!cfg.experiment.empty() && !schema.empty()) {
    for (auto it = given.begin(); it != given.end(); ++it) {
      const bool known =
          std::any_of(schema.begin(), schema.end(), [&](const ParamSpec& s) { return s.key == it.key(); });
      if (!known) errors.push_back("parameters." + it.key() + ": unknown key for experiment '" + cfg.experiment + "'");
    }
    for (const auto& spec : schema) {
      const std::string path = "parameters." + spec.key;
      if (!given.contains(spec.key)) {
        if (spec.default_value.is_null())
          errors.push_back(path + ": missing required key");
        else
          cfg.parameters[spec.key] = spec.default_value;
        continue;
      }
      const auto& v = given[spec.key];
      if (!detail::matches(spec.type, v)) {
        errors.push_back(path + ": expected " + to_string(spec.type) + ", got " + detail::json_type_name(v));
        continue;
      }
      if (!spec.choices.empty() &&
          std::find(spec.choices.begin(), spec.choices.end(), v.get<std::string>()) == spec.choices.end()) {
        std::string list;
        for (const auto& c : spec.choices) list += (list.empty() ? "" : ", ") + c;
        errors.push_back(path + ": invalid value '" + v.get<std::string>() + "' (expected one of " + list + ")");
        continue;
      }
      cfg.parameters[spec.key] = v;
    }
  }
  if (errors.empty()) report.config = std::move(cfg);
  return report;
}

/// Parses JSON text; syntax errors are reported like schema errors.
inline ConfigReport validate_config_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    ConfigReport r;
    r.errors.push_back(std::string("<json>: ") + e.what());
    return r;
  }
  return validate_config(root);
}

inline ConfigReport validate_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    ConfigReport r;
    r.errors.push_back(path + ": cannot read file");
    return r;
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  return validate_config_text(buffer.str());
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string config_hash(const ExperimentConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(cfg.canonical().dump())));
  return buf;
}

}  // namespace gradflow
