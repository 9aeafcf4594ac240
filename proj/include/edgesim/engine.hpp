#pragma once

#include "edgesim/domain.hpp"
#include "edgesim/policy.hpp"
#include "edgesim/workload.hpp"

#include <cstdint>
#include <map>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace edgesim {

/// Piecewise-constant state on [t, t + interval).
struct StepRecord {
  double      t             = 0;
  double      interval      = 0;
  std::size_t alpha         = 0;
  double      beta_total    = 0; // b/s, migration share included
  double      migrated_bits = 0;

  bool operator==(const StepRecord&) const = default;
};

struct SimResult {
  double energy_processing   = 0; // J
  double energy_network      = 0; // J
  double energy_total        = 0; // J
  double energy_migration    = 0; // J, share of energy_network
  double total_migrated_bits = 0;
  double node_time_integral  = 0; // node * s
  double network_bits        = 0; // integral of total beta
  double horizon             = 0;
  std::vector<StepRecord> steps; // filled only on request

  double meanAlpha() const noexcept {
    return horizon > 0 ? node_time_integral / horizon : 0;
  }
  double meanBeta() const noexcept {
    return horizon > 0 ? network_bits / horizon : 0;
  }

  bool operator==(const SimResult&) const = default;
};

/// State access on every invocation plus every invocation transfer.
inline double betaStateless(const App& aApp) noexcept {
  return aApp.invocation_rate * (totalStateBits(aApp) + totalDataBits(aApp));
}

/// Invocation traffic between tasks that sit on different nodes.
inline double betaStatefulInvocation(const App& aApp, const Allocation& aAlloc) {
  double ret = 0;
  for (const auto& e : aApp.edges) {
    const auto* u = aAlloc.find(TaskKey{aApp.id, e.from});
    const auto* v = aAlloc.find(TaskKey{aApp.id, e.to});
    if (u == nullptr or v == nullptr) {
      throw std::logic_error("App is not allocated");
    }
    if (*u != *v) {
      ret += e.data_bits;
    }
  }
  return aApp.invocation_rate * ret;
}

/// Migrated state of aApp spread over aInterval, plus cross-node invocations.
inline double betaStateful(const App&             aApp,
                           const Allocation&      aAlloc,
                           const MigrationRecord& aMigrations,
                           const double           aInterval) {
  if (not(aInterval > 0)) {
    throw std::invalid_argument("Interval must be positive");
  }
  double myMigrated = 0;
  for (const auto& m : aMigrations) {
    if (m.key.app == aApp.id) {
      myMigrated += m.state_bits;
    }
  }
  return myMigrated / aInterval + betaStatefulInvocation(aApp, aAlloc);
}

/// Running sums of the energy integral over consecutive steps.
class EnergyAccumulator {
 public:
  explicit EnergyAccumulator(const EnergyParams& aParams)
      : theParams(aParams) {
  }

  void add(const StepRecord& aStep) {
    theNodeTime += static_cast<double>(aStep.alpha) * aStep.interval;
    theBits += aStep.beta_total * aStep.interval;
    if (aStep.migrated_bits > 0) {
      theMigrationBits += aStep.migrated_bits / aStep.interval * aStep.interval;
      theMigratedBits += aStep.migrated_bits;
    }
  }

  double nodeTime() const noexcept { return theNodeTime; }
  double networkBits() const noexcept { return theBits; }
  double processing() const noexcept { return theParams.node_power * theNodeTime; }
  double network() const noexcept { return theParams.per_bit_energy * theBits; }
  double migration() const noexcept {
    return theParams.per_bit_energy * theMigrationBits;
  }
  double migratedBits() const noexcept { return theMigratedBits; }

 private:
  EnergyParams theParams;
  double       theNodeTime      = 0;
  double       theBits          = 0;
  double       theMigrationBits = 0;
  double       theMigratedBits  = 0;
};

struct EnergySplit {
  double processing = 0;
  double network    = 0;
};

inline EnergySplit integrateEnergy(std::span<const StepRecord> aSteps,
                                   const EnergyParams&         aParams) {
  EnergyAccumulator myAcc(aParams);
  for (const auto& s : aSteps) {
    myAcc.add(s);
  }
  return {myAcc.processing(), myAcc.network()};
}

struct RunOptions {
  bool record_steps = false;
};

namespace detail {

inline void checkRunArguments(const Workload&     aWorkload,
                              const PolicyConfig& aPolicy,
                              const EnergyParams& aParams) {
  if (not(aWorkload.horizon > 0)) {
    throw std::invalid_argument("Simulation horizon must be positive");
  }
  if (not(aParams.node_capacity > 0) or not(aParams.node_power >= 0) or
      not(aParams.per_bit_energy >= 0)) {
    throw std::invalid_argument("Invalid energy parameters");
  }
  if (aPolicy.kind == PolicyKind::StatelessMaxBalancing and
      not(aPolicy.utilization_cap > 0 and aPolicy.utilization_cap <= 1)) {
    throw std::invalid_argument("Utilization cap must lie in (0, 1]");
  }
}

} // namespace detail

/// Replays an explicit, time-sorted timeline ending with HorizonEnd. Defrag
/// events are ignored by every policy but stateful-best-fit.
inline SimResult simulateTimeline(const Workload&        aWorkload,
                                  std::span<const Event> aEvents,
                                  const PolicyConfig&    aPolicy,
                                  const EnergyParams&    aParams,
                                  const std::uint64_t    aSeed,
                                  const RunOptions&      aOptions = {}) {
  detail::checkRunArguments(aWorkload, aPolicy, aParams);
  if (aEvents.empty() or aEvents.back().kind != EventKind::HorizonEnd) {
    throw std::invalid_argument("Timeline must end with HorizonEnd");
  }
  const auto myStateful = isStateful(aPolicy.kind);
  const auto& myEvents  = aEvents;

  std::unordered_map<AppId, const App*> myById;
  myById.reserve(aWorkload.apps.size());
  for (const auto& a : aWorkload.apps) {
    if (not myById.emplace(a.id, &a).second) {
      throw std::invalid_argument("Duplicate app id " + std::to_string(a.id));
    }
  }

  // app -> beta excluding migrations
  std::map<AppId, double> myActive;
  std::vector<const App*> myActiveApps;
  Allocation              myAlloc;
  // placement stream, decorrelated from the workload stream of the same seed
  std::seed_seq myPlacementSeed{static_cast<std::uint32_t>(aSeed),
                                static_cast<std::uint32_t>(aSeed >> 32),
                                std::uint32_t{0x5eed}};
  Rng           myRng(myPlacementSeed);

  const auto refreshInvocationBeta = [&]() {
    for (auto& [id, beta] : myActive) {
      beta = betaStatefulInvocation(*myById.at(id), myAlloc);
    }
  };
  const auto activeApps = [&]() -> const std::vector<const App*>& {
    myActiveApps.clear();
    for (const auto& [id, beta] : myActive) {
      myActiveApps.push_back(myById.at(id));
    }
    return myActiveApps;
  };

  SimResult         ret;
  EnergyAccumulator myAcc(aParams);
  double            myPendingMigration = 0;
  ret.horizon                          = aWorkload.horizon;

  for (std::size_t k = 0; k + 1 < myEvents.size(); ++k) {
    const auto& e = myEvents[k];
    switch (e.kind) {
      case EventKind::Arrival: {
        const auto& a = *myById.at(e.app);
        if (aPolicy.kind == PolicyKind::StatefulBestFit) {
          placeBestFit(myAlloc, a, aParams.node_capacity);
        } else if (aPolicy.kind == PolicyKind::StatefulRandom) {
          placeRandom(myAlloc, a, aParams.node_capacity, myRng);
        }
        myActive[a.id] =
            myStateful ? betaStatefulInvocation(a, myAlloc) : betaStateless(a);
        break;
      }
      case EventKind::Departure:
        if (myStateful) {
          myAlloc.removeApp(e.app);
        }
        myActive.erase(e.app);
        break;
      case EventKind::Defrag:
        if (aPolicy.kind == PolicyKind::StatefulBestFit and
            not myActive.empty()) {
          const auto myMigrations = defragment(
              myAlloc, activeApps(), aParams.node_capacity, aPolicy.defrag_order);
          myPendingMigration += totalMigratedBits(myMigrations);
          refreshInvocationBeta();
        }
        break;
      case EventKind::HorizonEnd:
        break;
    }

    StepRecord myStep;
    myStep.t        = e.time;
    myStep.interval = myEvents[k + 1].time - e.time;
    switch (aPolicy.kind) {
      case PolicyKind::StatelessMinNodes:
        myStep.alpha =
            alphaStatelessMinNodes(activeApps(), aParams.node_capacity);
        break;
      case PolicyKind::StatelessMaxBalancing:
        myStep.alpha = alphaStatelessMaxBalancing(
            activeApps(), aParams.node_capacity, aPolicy.utilization_cap);
        break;
      case PolicyKind::StatefulBestFit:
      case PolicyKind::StatefulRandom:
        myStep.alpha = alphaStateful(myAlloc);
        break;
    }
    for (const auto& [id, beta] : myActive) {
      myStep.beta_total += beta;
    }
    if (myStep.interval > 0 and myPendingMigration > 0) {
      myStep.migrated_bits = myPendingMigration;
      myStep.beta_total += myPendingMigration / myStep.interval;
      myPendingMigration = 0;
    }

    myAcc.add(myStep);
    if (aOptions.record_steps) {
      ret.steps.push_back(myStep);
    }
  }

  ret.node_time_integral  = myAcc.nodeTime();
  ret.network_bits        = myAcc.networkBits();
  ret.energy_processing   = myAcc.processing();
  ret.energy_network      = myAcc.network();
  ret.energy_migration    = myAcc.migration();
  ret.total_migrated_bits = myAcc.migratedBits();
  ret.energy_total        = ret.energy_processing + ret.energy_network;
  return ret;
}

/// Walks the event timeline of aWorkload under the given policy and returns
/// the energy consumed on [first event, horizon]. Deterministic in all of its
/// arguments; aSeed only drives stateful-random placement.
inline SimResult runSimulation(const Workload&     aWorkload,
                               const PolicyConfig& aPolicy,
                               const EnergyParams& aParams,
                               const std::uint64_t aSeed,
                               const RunOptions&   aOptions = {}) {
  detail::checkRunArguments(aWorkload, aPolicy, aParams);
  // only best-fit defragments
  const auto myDefrag = aPolicy.kind == PolicyKind::StatefulBestFit
                            ? aParams.defrag_interval
                            : kNeverDefrag;
  const auto myEvents = buildEventTimeline(aWorkload, myDefrag);
  return simulateTimeline(aWorkload, myEvents, aPolicy, aParams, aSeed,
                          aOptions);
}

inline SimResult runSimulation(const Workload&     aWorkload,
                               const std::string&  aPolicy,
                               const EnergyParams& aParams,
                               const std::uint64_t aSeed,
                               const RunOptions&   aOptions = {}) {
  return runSimulation(aWorkload, PolicyConfig{policyKindFromString(aPolicy)},
                       aParams, aSeed, aOptions);
}

/// Columns: t, interval, alpha, beta_total, migrated_bits.
inline void writeStepsCsv(std::ostream& aOut, std::span<const StepRecord> aSteps) {
  const auto myPrecision = aOut.precision(17);
  aOut << "t,interval,alpha,beta_total,migrated_bits\n";
  for (const auto& s : aSteps) {
    aOut << s.t << ',' << s.interval << ',' << s.alpha << ',' << s.beta_total
         << ',' << s.migrated_bits << '\n';
  }
  aOut.precision(myPrecision);
}

} // namespace edgesim
