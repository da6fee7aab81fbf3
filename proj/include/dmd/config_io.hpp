#pragma once

// JSON (de)serialization for ShopConfig and friends. Field names are part of
// the on-disk contract.

#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "dmd/sim.hpp"

namespace dmd {

inline std::string objective_name(Objective o) {
  return o == Objective::Lateness ? "lateness" : "tardiness";
}

inline Objective parse_objective(const std::string& name) {
  if (name == "lateness") return Objective::Lateness;
  if (name == "tardiness") return Objective::Tardiness;
  throw ConfigError("objective must be 'lateness' or 'tardiness', got '" + name + "'");
}

inline nlohmann::json to_json(const IntRange& r) { return nlohmann::json::array({r.lo, r.hi}); }

inline IntRange range_from_json(const nlohmann::json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 2)
    throw ConfigError(field + " must be a two-element [lo, hi] array");
  return {j[0].get<int>(), j[1].get<int>()};
}

inline nlohmann::json to_json(const ShopConfig& c) {
  return nlohmann::json{{"T", c.T},
                        {"Z", c.Z},
                        {"n", c.n},
                        {"m", c.m},
                        {"lambda", c.lambda},
                        {"p_small", c.p_small},
                        {"short_range", to_json(c.short_range)},
                        {"long_range", to_json(c.long_range)},
                        {"p_urgent", c.p_urgent},
                        {"urgent_slack_range", to_json(c.urgent_slack_range)},
                        {"nonurgent_slack_range", to_json(c.nonurgent_slack_range)},
                        {"drop_penalty", c.drop_penalty},
                        {"gamma", c.gamma},
                        {"traj_len", c.traj_len},
                        {"objective", objective_name(c.objective)}};
}

inline ShopConfig shop_config_from_json(const nlohmann::json& j) {
  ShopConfig c;
  auto get = [&](const char* field, auto& target) {
    if (!j.contains(field)) return;
    try {
      target = j.at(field).get<std::decay_t<decltype(target)>>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("field '") + field + "': " + e.what());
    }
  };
  get("T", c.T);
  get("Z", c.Z);
  get("n", c.n);
  get("m", c.m);
  get("lambda", c.lambda);
  get("p_small", c.p_small);
  if (j.contains("short_range")) c.short_range = range_from_json(j.at("short_range"), "short_range");
  if (j.contains("long_range")) c.long_range = range_from_json(j.at("long_range"), "long_range");
  get("p_urgent", c.p_urgent);
  if (j.contains("urgent_slack_range"))
    c.urgent_slack_range = range_from_json(j.at("urgent_slack_range"), "urgent_slack_range");
  if (j.contains("nonurgent_slack_range"))
    c.nonurgent_slack_range =
        range_from_json(j.at("nonurgent_slack_range"), "nonurgent_slack_range");
  get("drop_penalty", c.drop_penalty);
  get("gamma", c.gamma);
  get("traj_len", c.traj_len);
  if (j.contains("objective")) c.objective = parse_objective(j.at("objective").get<std::string>());
  c.validate();
  return c;
}

}  // namespace dmd
