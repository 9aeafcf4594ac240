#pragma once

#include "edgesim/domain.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

namespace edgesim {

using Rng = std::mt19937_64;

/// Continuous distribution over [lo, hi].
struct RealDistribution {
  enum class Kind { Uniform, LogUniform };

  Kind   kind = Kind::LogUniform;
  double lo   = 1;
  double hi   = 1;

  bool valid() const noexcept {
    return std::isfinite(lo) and std::isfinite(hi) and lo <= hi and
           (kind != Kind::LogUniform or lo > 0);
  }

  double operator()(Rng& aRng) const {
    if (lo == hi) {
      return lo;
    }
    double ret;
    if (kind == Kind::Uniform) {
      ret = std::uniform_real_distribution<double>(lo, hi)(aRng);
    } else {
      ret = std::exp(std::uniform_real_distribution<double>(std::log(lo),
                                                            std::log(hi))(aRng));
    }
    // exp/log round-off only
    return std::clamp(ret, lo, hi);
  }
};

inline std::string toString(RealDistribution::Kind aKind) {
  return aKind == RealDistribution::Kind::Uniform ? "uniform" : "log-uniform";
}

inline RealDistribution::Kind realDistributionKindFromString(
    const std::string& aName) {
  if (aName == "uniform") {
    return RealDistribution::Kind::Uniform;
  } else if (aName == "log-uniform") {
    return RealDistribution::Kind::LogUniform;
  }
  throw std::invalid_argument("Invalid distribution kind: " + aName);
}

/// Parameters of the synthetic trace-inspired workload. Sizes are in bits.
///
/// State sizes are S * b_v and invocation sizes D * b_uv, where b_* are draws
/// from base_memory_bits and S = D * state_to_data_ratio. With the defaults
/// D * b spans [2, 303] kB and S * b spans [0.2, 30.3] MB.
struct WorkloadConfig {
  double           mean_interarrival = 1;  // s
  double           mean_lifetime     = 60; // s
  double           invocation_rate   = 5;  // 1/s
  std::uint32_t    tasks_min         = 1;
  std::uint32_t    tasks_max         = 8;
  double           edge_density      = 0.5;
  RealDistribution cpu_demand{RealDistribution::Kind::LogUniform, 50, 800};
  double           cpu_cap = 800;
  RealDistribution base_memory_bits{RealDistribution::Kind::LogUniform, 160,
                                    24240};
  double           data_factor         = 100; // D
  double           state_to_data_ratio = 100; // S / D
  double           horizon             = 86400;
  std::uint64_t    seed                = 0;

  double stateFactor() const noexcept {
    return data_factor * state_to_data_ratio;
  }

  /// Throws std::invalid_argument on the first violated constraint.
  void validate() const {
    const auto fail = [](const std::string& w) {
      throw std::invalid_argument("Invalid workload configuration: " + w);
    };
    if (not(horizon > 0) or not std::isfinite(horizon)) {
      fail("horizon must be positive and finite");
    }
    if (not(mean_interarrival > 0)) {
      fail("mean interarrival must be positive");
    }
    if (not(mean_lifetime > 0)) {
      fail("mean lifetime must be positive");
    }
    if (not(invocation_rate > 0)) {
      fail("invocation rate must be positive");
    }
    if (tasks_min < 1 or tasks_min > tasks_max) {
      fail("tasks per app range is empty");
    }
    if (not(edge_density >= 0 and edge_density <= 1)) {
      fail("edge density must lie in [0, 1]");
    }
    if (not cpu_demand.valid() or not(cpu_demand.lo > 0)) {
      fail("cpu demand distribution is empty or non-positive");
    }
    if (not(cpu_cap > 0)) {
      fail("cpu cap must be positive");
    }
    if (not base_memory_bits.valid() or base_memory_bits.lo < 0) {
      fail("base memory distribution is empty or negative");
    }
    if (not(data_factor >= 0) or not(state_to_data_ratio >= 0)) {
      fail("size factors must be non-negative");
    }
  }
};

/// Draws one app arriving at aArrival. Tasks are ranked 0..n-1; every pair
/// u < v is wired with probability edge_density, then any task v > 0 left
/// without predecessors is attached to v - 1.
inline App sampleApp(Rng&                  aRng,
                     const WorkloadConfig& aConfig,
                     const double          aArrival,
                     const AppId           aId = 0) {
  App ret;
  ret.id              = aId;
  ret.invocation_rate = aConfig.invocation_rate;
  ret.arrival         = aArrival;

  const auto myLifetime =
      std::exponential_distribution<double>(1.0 / aConfig.mean_lifetime)(aRng);
  ret.departure = aArrival + myLifetime;
  if (not(ret.departure > ret.arrival)) {
    // zero draw (or absorbed by a large arrival time)
    ret.departure = std::nextafter(aArrival, kNeverDefrag);
  }

  const auto n = std::uniform_int_distribution<std::uint32_t>(
      aConfig.tasks_min, aConfig.tasks_max)(aRng);
  const auto myStateFactor = aConfig.stateFactor();
  ret.tasks.reserve(n);
  for (TaskId v = 0; v < n; ++v) {
    const auto myDemand = std::min(aConfig.cpu_demand(aRng), aConfig.cpu_cap);
    const auto myBase   = aConfig.base_memory_bits(aRng);
    ret.tasks.push_back(Task{v, myDemand, myStateFactor * myBase});
  }

  std::bernoulli_distribution myCoin(aConfig.edge_density);
  std::vector<bool>           myHasPred(n, false);
  for (TaskId v = 1; v < n; ++v) {
    for (TaskId u = 0; u < v; ++u) {
      if (myCoin(aRng)) {
        ret.edges.push_back(Edge{u, v, 0});
        myHasPred[v] = true;
      }
    }
    if (not myHasPred[v]) {
      ret.edges.push_back(Edge{v - 1, v, 0});
    }
  }
  for (auto& e : ret.edges) {
    e.data_bits = aConfig.data_factor * aConfig.base_memory_bits(aRng);
  }
  return ret;
}

/// Poisson arrivals on [0, horizon) with exponential lifetimes. A pure
/// function of the configuration, seed included.
inline Workload generateWorkload(const WorkloadConfig& aConfig) {
  aConfig.validate();
  Rng                                    myRng(aConfig.seed);
  std::exponential_distribution<double> myInterarrival(
      1.0 / aConfig.mean_interarrival);

  Workload ret;
  ret.horizon = aConfig.horizon;
  double t    = 0;
  while (true) {
    t += myInterarrival(myRng);
    if (not(t < aConfig.horizon)) {
      break;
    }
    ret.apps.push_back(sampleApp(myRng, aConfig, t, ret.apps.size()));
  }
  return ret;
}

/// Arrivals, departures clipped to the horizon, defrag ticks at k * aDefrag
/// strictly before the horizon, then a single HorizonEnd. Pass kNeverDefrag
/// to omit defrag ticks.
inline std::vector<Event> buildEventTimeline(const Workload& aWorkload,
                                             const double    aDefrag) {
  if (not(aDefrag > 0)) {
    throw std::invalid_argument("Defragmentation interval must be positive");
  }
  const auto         T = aWorkload.horizon;
  std::vector<Event> ret;
  ret.reserve(2 * aWorkload.apps.size() + 1);
  for (const auto& a : aWorkload.apps) {
    if (not(a.arrival < T)) {
      continue;
    }
    ret.push_back(Event{a.arrival, EventKind::Arrival, a.id});
    ret.push_back(Event{std::min(a.departure, T), EventKind::Departure, a.id});
  }
  if (std::isfinite(aDefrag)) {
    for (std::uint64_t k = 1;; ++k) {
      const auto t = static_cast<double>(k) * aDefrag;
      if (not(t < T)) {
        break;
      }
      ret.push_back(Event{t, EventKind::Defrag, 0});
    }
  }
  std::sort(ret.begin(), ret.end(), [](const Event& a, const Event& b) {
    return std::tie(a.time, a.kind, a.app) < std::tie(b.time, b.kind, b.app);
  });
  ret.push_back(Event{T, EventKind::HorizonEnd, 0});
  return ret;
}

} // namespace edgesim
