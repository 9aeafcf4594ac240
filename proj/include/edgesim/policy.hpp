#pragma once

#include "edgesim/domain.hpp"

#include <cmath>
#include <map>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace edgesim {

enum class PolicyKind {
  StatelessMinNodes,
  StatelessMaxBalancing,
  StatefulBestFit,
  StatefulRandom,
};

inline std::string toString(PolicyKind aKind) {
  switch (aKind) {
    case PolicyKind::StatelessMinNodes:
      return "stateless-min-nodes";
    case PolicyKind::StatelessMaxBalancing:
      return "stateless-max-balancing";
    case PolicyKind::StatefulBestFit:
      return "stateful-best-fit";
    case PolicyKind::StatefulRandom:
      return "stateful-random";
  }
  throw std::invalid_argument("Invalid policy");
}

inline PolicyKind policyKindFromString(const std::string& aName) {
  if (aName == "stateless-min-nodes") {
    return PolicyKind::StatelessMinNodes;
  } else if (aName == "stateless-max-balancing") {
    return PolicyKind::StatelessMaxBalancing;
  } else if (aName == "stateful-best-fit") {
    return PolicyKind::StatefulBestFit;
  } else if (aName == "stateful-random") {
    return PolicyKind::StatefulRandom;
  }
  throw std::invalid_argument("Invalid policy name: " + aName);
}

inline const std::vector<PolicyKind>& allPolicies() {
  static const std::vector<PolicyKind> myPolicies{
      PolicyKind::StatelessMinNodes, PolicyKind::StatelessMaxBalancing,
      PolicyKind::StatefulBestFit, PolicyKind::StatefulRandom};
  return myPolicies;
}

inline bool isStateful(PolicyKind aKind) noexcept {
  return aKind == PolicyKind::StatefulBestFit or
         aKind == PolicyKind::StatefulRandom;
}

/// Order in which active apps are re-placed upon defragmentation.
enum class DefragOrder { Ascending, Descending, ByTotalDemand };

inline std::string toString(DefragOrder aOrder) {
  switch (aOrder) {
    case DefragOrder::Ascending:
      return "ascending";
    case DefragOrder::Descending:
      return "descending";
    case DefragOrder::ByTotalDemand:
      return "by-total-demand";
  }
  throw std::invalid_argument("Invalid defragmentation order");
}

inline DefragOrder defragOrderFromString(const std::string& aName) {
  if (aName == "ascending") {
    return DefragOrder::Ascending;
  } else if (aName == "descending") {
    return DefragOrder::Descending;
  } else if (aName == "by-total-demand") {
    return DefragOrder::ByTotalDemand;
  }
  throw std::invalid_argument("Invalid defragmentation order: " + aName);
}

struct PolicyConfig {
  PolicyKind  kind            = PolicyKind::StatefulBestFit;
  double      utilization_cap = 0.5; // max-balancing only, in (0, 1]
  DefragOrder defrag_order    = DefragOrder::Ascending;
};

/// Global task identity.
struct TaskKey {
  AppId  app  = 0;
  TaskId task = 0;

  auto operator<=>(const TaskKey&) const = default;
};

/// Task-to-node mapping with per-node occupied capacity. Nodes exist only
/// while they host at least one task; indices of fresh nodes are never reused.
class Allocation {
 public:
  struct Slot {
    TaskKey key;
    double  demand;
  };
  struct Node {
    double            load = 0;
    std::vector<Slot> slots;
  };

  const std::map<TaskKey, NodeId>& assignment() const noexcept {
    return theAssignment;
  }
  const std::map<NodeId, Node>& nodes() const noexcept { return theNodes; }

  std::size_t numNodes() const noexcept { return theNodes.size(); }
  bool        empty() const noexcept { return theAssignment.empty(); }

  const NodeId* find(const TaskKey& aKey) const {
    const auto it = theAssignment.find(aKey);
    return it == theAssignment.end() ? nullptr : &it->second;
  }

  double load(NodeId aNode) const {
    const auto it = theNodes.find(aNode);
    return it == theNodes.end() ? 0 : it->second.load;
  }

  /// Lowest index never used so far.
  NodeId nextFresh() const noexcept { return theNextFresh; }

  NodeId openNode() noexcept { return theNextFresh++; }

  void assign(const TaskKey& aKey, double aDemand, NodeId aNode) {
    if (not theAssignment.emplace(aKey, aNode).second) {
      throw std::logic_error("Task already allocated");
    }
    auto& myNode = theNodes[aNode];
    myNode.slots.push_back(Slot{aKey, aDemand});
    myNode.load += aDemand;
    if (aNode >= theNextFresh) {
      theNextFresh = aNode + 1;
    }
  }

  /// Releases every task of aApp; returns the number of tasks removed.
  std::size_t removeApp(const AppId aApp) {
    std::size_t ret = 0;
    auto        it  = theAssignment.lower_bound(TaskKey{aApp, 0});
    while (it != theAssignment.end() and it->first.app == aApp) {
      auto& myNode = theNodes.at(it->second);
      std::erase_if(myNode.slots,
                    [&](const Slot& s) { return s.key == it->first; });
      if (myNode.slots.empty()) {
        theNodes.erase(it->second);
      } else {
        // recomputed rather than decremented, so no round-off accumulates
        myNode.load = 0;
        for (const auto& s : myNode.slots) {
          myNode.load += s.demand;
        }
      }
      it = theAssignment.erase(it);
      ++ret;
    }
    return ret;
  }

  void setNextFresh(NodeId aNext) noexcept {
    theNextFresh = std::max(theNextFresh, aNext);
  }

 private:
  std::map<TaskKey, NodeId> theAssignment;
  std::map<NodeId, Node>    theNodes;
  NodeId                    theNextFresh = 0;
};

struct Migration {
  TaskKey key;
  NodeId  from;
  NodeId  to;
  double  state_bits;
};

using MigrationRecord = std::vector<Migration>;

inline double totalMigratedBits(const MigrationRecord& aRecord) {
  double ret = 0;
  for (const auto& m : aRecord) {
    ret += m.state_bits;
  }
  return ret;
}

////////////////////////////////////////////////////////////////////////////////
// stateless policies

inline double totalDemand(std::span<const App* const> aApps) {
  double ret = 0;
  for (const auto* a : aApps) {
    ret += totalDemand(*a);
  }
  return ret;
}

/// Fewest nodes able to serve the aggregate demand if load splits freely.
inline std::size_t alphaStatelessMinNodes(std::span<const App* const> aApps,
                                          const double aCapacity) {
  if (not(aCapacity > 0)) {
    throw std::invalid_argument("Node capacity must be positive");
  }
  return static_cast<std::size_t>(std::ceil(totalDemand(aApps) / aCapacity));
}

/// Nodes kept at most aUtilizationCap loaded on average.
inline std::size_t alphaStatelessMaxBalancing(
    std::span<const App* const> aApps,
    const double                aCapacity,
    const double                aUtilizationCap) {
  if (not(aCapacity > 0)) {
    throw std::invalid_argument("Node capacity must be positive");
  }
  if (not(aUtilizationCap > 0 and aUtilizationCap <= 1)) {
    throw std::invalid_argument("Utilization cap must lie in (0, 1]");
  }
  return static_cast<std::size_t>(
      std::ceil(totalDemand(aApps) / (aUtilizationCap * aCapacity)));
}

////////////////////////////////////////////////////////////////////////////////
// stateful policies

inline std::size_t alphaStateful(const Allocation& aAlloc) noexcept {
  return aAlloc.numNodes();
}

namespace detail {

inline void checkFits(const App& aApp, const double aCapacity) {
  for (const auto& t : aApp.tasks) {
    if (not(t.cpu_demand <= aCapacity)) {
      throw std::invalid_argument("Task demand exceeds node capacity");
    }
  }
}

inline std::vector<TaskId> placementOrder(const App& aApp) {
  auto ret = topologicalOrder(aApp);
  if (ret.size() != aApp.tasks.size()) {
    throw std::invalid_argument("Cannot place an app with a cyclic graph");
  }
  return ret;
}

} // namespace detail

/// Best-fit placement with predecessor affinity. For each task, in
/// topological order:
/// 1. active nodes hosting a predecessor and with room, smallest residual;
/// 2. any active node with room, smallest residual;
/// 3. a fresh node.
/// Remaining ties go to the lowest node index.
inline void placeBestFit(Allocation& aAlloc,
                         const App&  aApp,
                         const double aCapacity) {
  detail::checkFits(aApp, aCapacity);
  std::vector<std::vector<TaskId>> myPred(aApp.tasks.size());
  for (const auto& e : aApp.edges) {
    myPred[e.to].push_back(e.from);
  }

  for (const auto v : detail::placementOrder(aApp)) {
    const auto r = aApp.tasks[v].cpu_demand;

    const auto bestAmong = [&](auto&& aEligible) -> const NodeId* {
      const NodeId* ret = nullptr;
      double        myBest = 0;
      for (const auto& [id, node] : aAlloc.nodes()) {
        if (node.load + r > aCapacity or not aEligible(id)) {
          continue;
        }
        const auto myResidual = aCapacity - node.load - r;
        if (ret == nullptr or myResidual < myBest) {
          ret    = &id;
          myBest = myResidual;
        }
      }
      return ret;
    };

    const NodeId* myChoice = nullptr;
    if (not myPred[v].empty()) {
      myChoice = bestAmong([&](NodeId aNode) {
        for (const auto u : myPred[v]) {
          const auto* myHost = aAlloc.find(TaskKey{aApp.id, u});
          if (myHost != nullptr and *myHost == aNode) {
            return true;
          }
        }
        return false;
      });
    }
    if (myChoice == nullptr) {
      myChoice = bestAmong([](NodeId) { return true; });
    }
    const auto myNode = myChoice != nullptr ? *myChoice : aAlloc.openNode();
    aAlloc.assign(TaskKey{aApp.id, v}, r, myNode);
  }
}

/// Each task goes to a node drawn uniformly among those with room; a fresh
/// node is opened only when none has room.
template <class URBG>
void placeRandom(Allocation& aAlloc,
                 const App&  aApp,
                 const double aCapacity,
                 URBG&       aRng) {
  detail::checkFits(aApp, aCapacity);
  std::vector<NodeId> myCandidates;
  for (const auto v : detail::placementOrder(aApp)) {
    const auto r = aApp.tasks[v].cpu_demand;
    myCandidates.clear();
    for (const auto& [id, node] : aAlloc.nodes()) {
      if (node.load + r <= aCapacity) {
        myCandidates.push_back(id);
      }
    }
    NodeId myNode;
    if (myCandidates.empty()) {
      myNode = aAlloc.openNode();
    } else {
      std::uniform_int_distribution<std::size_t> myPick(
          0, myCandidates.size() - 1);
      myNode = myCandidates[myPick(aRng)];
    }
    aAlloc.assign(TaskKey{aApp.id, v}, r, myNode);
  }
}

/// Best-fit placement of aApps, in order, on an empty system with nodes
/// numbered from 0. Depends on nothing but its arguments.
inline Allocation repackBestFit(std::span<const App* const> aApps,
                                const double                aCapacity) {
  Allocation ret;
  for (const auto* a : aApps) {
    placeBestFit(ret, *a, aCapacity);
  }
  return ret;
}

inline std::vector<const App*> orderForDefrag(std::span<const App* const> aApps,
                                              const DefragOrder aOrder) {
  std::vector<const App*> ret(aApps.begin(), aApps.end());
  switch (aOrder) {
    case DefragOrder::Ascending:
      std::sort(ret.begin(), ret.end(),
                [](const App* a, const App* b) { return a->id < b->id; });
      break;
    case DefragOrder::Descending:
      std::sort(ret.begin(), ret.end(),
                [](const App* a, const App* b) { return a->id > b->id; });
      break;
    case DefragOrder::ByTotalDemand: {
      std::vector<std::pair<double, const App*>> myKeyed;
      for (const auto* a : ret) {
        myKeyed.emplace_back(totalDemand(*a), a);
      }
      std::sort(myKeyed.begin(), myKeyed.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first
                                  : a.second->id < b.second->id;
      });
      for (std::size_t i = 0; i < ret.size(); ++i) {
        ret[i] = myKeyed[i].second;
      }
      break;
    }
  }
  return ret;
}

/// Re-places every active app with best-fit on an empty system, then maps
/// each new bin onto the currently active node that already holds most of its
/// state (a fresh index if none is left), so that renaming a node is never
/// counted as a migration. The current allocation is kept unchanged if the
/// re-pack would need more nodes. Returns the migrations performed.
inline MigrationRecord defragment(Allocation&                 aAlloc,
                                  std::span<const App* const> aApps,
                                  const double                aCapacity,
                                  const DefragOrder aOrder = DefragOrder::Ascending) {
  if (aApps.empty()) {
    return {};
  }
  const auto myOrdered = orderForDefrag(aApps, aOrder);
  const auto myRepack  = repackBestFit(myOrdered, aCapacity);
  if (myRepack.numNodes() > aAlloc.numNodes()) {
    return {};
  }

  std::map<TaskKey, double> myStateBits;
  for (const auto* a : aApps) {
    for (const auto& t : a->tasks) {
      myStateBits[TaskKey{a->id, t.id}] = t.state_bits;
    }
  }

  // bin -> physical node
  std::map<NodeId, NodeId> myLabel;
  std::vector<NodeId>      myClaimed;
  const auto isClaimed = [&](NodeId n) {
    return std::find(myClaimed.begin(), myClaimed.end(), n) != myClaimed.end();
  };
  for (const auto& [bin, node] : myRepack.nodes()) {
    // old node -> (retained bits, retained tasks)
    std::map<NodeId, std::pair<double, std::size_t>> myRetained;
    for (const auto& s : node.slots) {
      const auto* myOld = aAlloc.find(s.key);
      if (myOld != nullptr and not isClaimed(*myOld)) {
        auto& r = myRetained[*myOld];
        r.first += myStateBits[s.key];
        r.second++;
      }
    }
    const NodeId* myBest = nullptr;
    std::pair<double, std::size_t> myBestScore{};
    for (const auto& [old, score] : myRetained) {
      if (myBest == nullptr or score > myBestScore) {
        myBest      = &old;
        myBestScore = score;
      }
    }
    if (myBest != nullptr) {
      myLabel[bin] = *myBest;
      myClaimed.push_back(*myBest);
    } else {
      myLabel[bin] = aAlloc.openNode();
    }
  }

  Allocation      myNew;
  MigrationRecord ret;
  for (const auto& [bin, node] : myRepack.nodes()) {
    const auto myTarget = myLabel.at(bin);
    for (const auto& s : node.slots) {
      myNew.assign(s.key, s.demand, myTarget);
      const auto* myOld = aAlloc.find(s.key);
      if (myOld != nullptr and *myOld != myTarget) {
        ret.push_back(Migration{s.key, *myOld, myTarget, myStateBits[s.key]});
      }
    }
  }
  std::sort(ret.begin(), ret.end(), [](const Migration& a, const Migration& b) {
    return a.key < b.key;
  });
  myNew.setNextFresh(aAlloc.nextFresh());
  aAlloc = std::move(myNew);
  return ret;
}

} // namespace edgesim
