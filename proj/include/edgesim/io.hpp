#pragma once

#include "edgesim/domain.hpp"
#include "edgesim/engine.hpp"
#include "edgesim/policy.hpp"
#include "edgesim/workload.hpp"

#include <json.hpp>

#include <cmath>
#include <istream>
#include <ostream>
#include <set>
#include <stdexcept>
#include <string>

namespace edgesim {

using Json = nlohmann::json;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void rejectUnknownKeys(const Json&                  aObj,
                              const std::set<std::string>& aKnown,
                              const std::string&           aWhere) {
  if (not aObj.is_object()) {
    throw ConfigError(aWhere + ": expected a JSON object");
  }
  for (const auto& [key, value] : aObj.items()) {
    if (not aKnown.contains(key)) {
      throw ConfigError(aWhere + ": unknown key '" + key + "'");
    }
  }
}

template <class T>
void readIf(const Json& aObj, const char* aKey, T& aOut) {
  if (aObj.contains(aKey)) {
    try {
      aOut = aObj.at(aKey).get<T>();
    } catch (const Json::exception& ex) {
      throw ConfigError(std::string("Invalid value for '") + aKey +
                        "': " + ex.what());
    }
  }
}

/// Numbers, or "inf" / null for an infinite value.
inline double readMaybeInfinite(const Json& aValue) {
  if (aValue.is_null() or (aValue.is_string() and aValue == "inf")) {
    return kNeverDefrag;
  }
  if (not aValue.is_number()) {
    throw ConfigError("Expected a number or \"inf\"");
  }
  return aValue.get<double>();
}

inline Json writeMaybeInfinite(double aValue) {
  return std::isinf(aValue) ? Json("inf") : Json(aValue);
}

inline RealDistribution readDistribution(const Json&             aObj,
                                         const RealDistribution& aDefault,
                                         const std::string&      aWhere) {
  rejectUnknownKeys(aObj, {"kind", "lo", "hi"}, aWhere);
  auto ret = aDefault;
  if (aObj.contains("kind")) {
    try {
      ret.kind = realDistributionKindFromString(aObj.at("kind").get<std::string>());
    } catch (const std::exception& ex) {
      throw ConfigError(aWhere + ": " + ex.what());
    }
  }
  readIf(aObj, "lo", ret.lo);
  readIf(aObj, "hi", ret.hi);
  return ret;
}

inline Json writeDistribution(const RealDistribution& aDist) {
  return Json{{"kind", toString(aDist.kind)}, {"lo", aDist.lo}, {"hi", aDist.hi}};
}

} // namespace detail

/// Overlays the keys present in aObj onto aBase.
inline WorkloadConfig workloadConfigFromJson(const Json&           aObj,
                                             const WorkloadConfig& aBase = {}) {
  detail::rejectUnknownKeys(
      aObj,
      {"mean_interarrival", "mean_lifetime", "invocation_rate", "tasks_min",
       "tasks_max", "edge_density", "cpu_demand", "cpu_cap", "base_memory_bits",
       "data_factor", "state_to_data_ratio", "horizon", "seed"},
      "workload");
  auto ret = aBase;
  detail::readIf(aObj, "mean_interarrival", ret.mean_interarrival);
  detail::readIf(aObj, "mean_lifetime", ret.mean_lifetime);
  detail::readIf(aObj, "invocation_rate", ret.invocation_rate);
  detail::readIf(aObj, "tasks_min", ret.tasks_min);
  detail::readIf(aObj, "tasks_max", ret.tasks_max);
  detail::readIf(aObj, "edge_density", ret.edge_density);
  if (aObj.contains("cpu_demand")) {
    ret.cpu_demand = detail::readDistribution(aObj.at("cpu_demand"),
                                              ret.cpu_demand, "cpu_demand");
  }
  detail::readIf(aObj, "cpu_cap", ret.cpu_cap);
  if (aObj.contains("base_memory_bits")) {
    ret.base_memory_bits = detail::readDistribution(
        aObj.at("base_memory_bits"), ret.base_memory_bits, "base_memory_bits");
  }
  detail::readIf(aObj, "data_factor", ret.data_factor);
  detail::readIf(aObj, "state_to_data_ratio", ret.state_to_data_ratio);
  detail::readIf(aObj, "horizon", ret.horizon);
  detail::readIf(aObj, "seed", ret.seed);
  try {
    ret.validate();
  } catch (const std::invalid_argument& ex) {
    throw ConfigError(ex.what());
  }
  return ret;
}

inline Json toJson(const WorkloadConfig& aConfig) {
  return Json{
      {"mean_interarrival", aConfig.mean_interarrival},
      {"mean_lifetime", aConfig.mean_lifetime},
      {"invocation_rate", aConfig.invocation_rate},
      {"tasks_min", aConfig.tasks_min},
      {"tasks_max", aConfig.tasks_max},
      {"edge_density", aConfig.edge_density},
      {"cpu_demand", detail::writeDistribution(aConfig.cpu_demand)},
      {"cpu_cap", aConfig.cpu_cap},
      {"base_memory_bits", detail::writeDistribution(aConfig.base_memory_bits)},
      {"data_factor", aConfig.data_factor},
      {"state_to_data_ratio", aConfig.state_to_data_ratio},
      {"horizon", aConfig.horizon},
      {"seed", aConfig.seed},
  };
}

inline EnergyParams energyParamsFromJson(const Json&         aObj,
                                         const EnergyParams& aBase = {}) {
  detail::rejectUnknownKeys(
      aObj, {"node_power", "per_bit_energy", "node_capacity", "defrag_interval"},
      "energy");
  auto ret = aBase;
  detail::readIf(aObj, "node_power", ret.node_power);
  detail::readIf(aObj, "per_bit_energy", ret.per_bit_energy);
  detail::readIf(aObj, "node_capacity", ret.node_capacity);
  if (aObj.contains("defrag_interval")) {
    ret.defrag_interval = detail::readMaybeInfinite(aObj.at("defrag_interval"));
  }
  if (not(ret.node_power > 0) or not(ret.per_bit_energy > 0) or
      not(ret.node_capacity > 0) or not(ret.defrag_interval > 0)) {
    throw ConfigError("energy: all parameters must be strictly positive");
  }
  return ret;
}

inline Json toJson(const EnergyParams& aParams) {
  return Json{{"node_power", aParams.node_power},
              {"per_bit_energy", aParams.per_bit_energy},
              {"node_capacity", aParams.node_capacity},
              {"defrag_interval",
               detail::writeMaybeInfinite(aParams.defrag_interval)}};
}

/// Reads the tuning knobs only; the policy kind is chosen elsewhere.
inline PolicyConfig policyConfigFromJson(const Json&         aObj,
                                         const PolicyConfig& aBase = {}) {
  detail::rejectUnknownKeys(aObj, {"utilization_cap", "defrag_order"}, "policy");
  auto ret = aBase;
  detail::readIf(aObj, "utilization_cap", ret.utilization_cap);
  if (aObj.contains("defrag_order")) {
    try {
      ret.defrag_order =
          defragOrderFromString(aObj.at("defrag_order").get<std::string>());
    } catch (const std::exception& ex) {
      throw ConfigError(std::string("policy: ") + ex.what());
    }
  }
  if (not(ret.utilization_cap > 0 and ret.utilization_cap <= 1)) {
    throw ConfigError("policy: utilization_cap must lie in (0, 1]");
  }
  return ret;
}

inline Json toJson(const App& aApp) {
  Json myTasks = Json::array();
  for (const auto& t : aApp.tasks) {
    myTasks.push_back({{"id", t.id}, {"cpu", t.cpu_demand}, {"state", t.state_bits}});
  }
  Json myEdges = Json::array();
  for (const auto& e : aApp.edges) {
    myEdges.push_back({{"from", e.from}, {"to", e.to}, {"data", e.data_bits}});
  }
  return Json{{"id", aApp.id},
              {"arrival", aApp.arrival},
              {"departure", aApp.departure},
              {"rate", aApp.invocation_rate},
              {"tasks", std::move(myTasks)},
              {"edges", std::move(myEdges)}};
}

inline App appFromJson(const Json& aObj) {
  App ret;
  try {
    ret.id              = aObj.at("id").get<AppId>();
    ret.arrival         = aObj.at("arrival").get<double>();
    ret.departure       = aObj.at("departure").get<double>();
    ret.invocation_rate = aObj.at("rate").get<double>();
    for (const auto& t : aObj.at("tasks")) {
      ret.tasks.push_back(Task{t.at("id").get<TaskId>(), t.at("cpu").get<double>(),
                               t.at("state").get<double>()});
    }
    for (const auto& e : aObj.at("edges")) {
      ret.edges.push_back(Edge{e.at("from").get<TaskId>(),
                               e.at("to").get<TaskId>(),
                               e.at("data").get<double>()});
    }
  } catch (const Json::exception& ex) {
    throw ConfigError(std::string("Malformed app record: ") + ex.what());
  }
  return ret;
}

/// Line-oriented form: a {"horizon": T} header line, then one app per line.
/// Doubles are printed in shortest round-trip form, so reading back yields
/// an identical workload.
inline void writeWorkloadJsonl(std::ostream& aOut, const Workload& aWorkload) {
  aOut << Json{{"horizon", aWorkload.horizon}}.dump() << '\n';
  for (const auto& a : aWorkload.apps) {
    aOut << toJson(a).dump() << '\n';
  }
}

inline Workload readWorkloadJsonl(std::istream& aIn) {
  Workload    ret;
  std::string myLine;
  bool        myHeader = false;
  while (std::getline(aIn, myLine)) {
    if (myLine.empty()) {
      continue;
    }
    Json myObj;
    try {
      myObj = Json::parse(myLine);
    } catch (const Json::exception& ex) {
      throw ConfigError(std::string("Malformed workload line: ") + ex.what());
    }
    if (not myHeader) {
      if (not myObj.contains("horizon")) {
        throw ConfigError("Workload file must start with a horizon header");
      }
      ret.horizon = myObj.at("horizon").get<double>();
      myHeader    = true;
      continue;
    }
    ret.apps.push_back(appFromJson(myObj));
  }
  if (not myHeader) {
    throw ConfigError("Empty workload file");
  }
  for (const auto& a : ret.apps) {
    const auto myViolations = validateApp(a);
    if (not myViolations.empty()) {
      throw ConfigError("Invalid app " + std::to_string(a.id) + ": " +
                        myViolations.front().what);
    }
  }
  return ret;
}

inline Json toJson(const SimResult& aResult) {
  return Json{{"energy_processing", aResult.energy_processing},
              {"energy_network", aResult.energy_network},
              {"energy_total", aResult.energy_total},
              {"energy_migration", aResult.energy_migration},
              {"total_migrated_bits", aResult.total_migrated_bits},
              {"node_time_integral", aResult.node_time_integral},
              {"network_bits", aResult.network_bits},
              {"horizon", aResult.horizon},
              {"mean_alpha", aResult.meanAlpha()},
              {"mean_beta", aResult.meanBeta()}};
}

} // namespace edgesim
