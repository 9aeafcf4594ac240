#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

namespace edgesim {

using AppId  = std::uint64_t;
using TaskId = std::uint32_t;
using NodeId = std::uint32_t;

/// One function of an app. CPU demand is in abstract units on the scale of the
/// node capacity; state size is in bits.
struct Task {
  TaskId id         = 0;
  double cpu_demand = 0;
  double state_bits = 0;

  bool operator==(const Task&) const = default;
};

/// Invocation dependency: task `from` calls task `to`, exchanging `data_bits`.
struct Edge {
  TaskId from      = 0;
  TaskId to        = 0;
  double data_bits = 0;

  bool operator==(const Edge&) const = default;
};

/// A stateful FaaS application: a DAG of tasks alive on [arrival, departure).
struct App {
  AppId             id              = 0;
  std::vector<Task> tasks;
  std::vector<Edge> edges;
  double            invocation_rate = 0;
  double            arrival         = 0;
  double            departure       = 0;

  bool operator==(const App&) const = default;
};

struct Workload {
  std::vector<App> apps; // sorted by arrival
  double           horizon = 0;

  bool operator==(const Workload&) const = default;
};

inline constexpr double kNeverDefrag = std::numeric_limits<double>::infinity();

struct EnergyParams {
  double node_power     = 100;     // W
  double per_bit_energy = 0.05e-6; // J/bit
  double node_capacity  = 1000;    // CPU units
  double defrag_interval = 120;    // s, may be kNeverDefrag
};

enum class EventKind {
  // Enumerator order is the tie-break order at equal timestamps.
  Departure = 0,
  Defrag    = 1,
  Arrival   = 2,
  HorizonEnd = 3,
};

struct Event {
  double    time = 0;
  EventKind kind = EventKind::HorizonEnd;
  AppId     app  = 0; // meaningful for Arrival/Departure only

  bool operator==(const Event&) const = default;
};

enum class ViolationKind {
  Cycle,
  DanglingEndpoint,
  SelfLoop,
  DuplicateEdge,
  NonPositiveDemand,
  NegativeStateSize,
  NegativeDataSize,
  NonPositiveRate,
  BadLifetime,
  TaskIdMismatch,
};

struct Violation {
  ViolationKind kind;
  std::string   what;
};

inline std::string toString(ViolationKind aKind) {
  switch (aKind) {
    case ViolationKind::Cycle:
      return "cycle";
    case ViolationKind::DanglingEndpoint:
      return "dangling-endpoint";
    case ViolationKind::SelfLoop:
      return "self-loop";
    case ViolationKind::DuplicateEdge:
      return "duplicate-edge";
    case ViolationKind::NonPositiveDemand:
      return "non-positive-demand";
    case ViolationKind::NegativeStateSize:
      return "negative-state-size";
    case ViolationKind::NegativeDataSize:
      return "negative-data-size";
    case ViolationKind::NonPositiveRate:
      return "non-positive-rate";
    case ViolationKind::BadLifetime:
      return "bad-lifetime";
    case ViolationKind::TaskIdMismatch:
      return "task-id-mismatch";
  }
  return "unknown";
}

/// Kahn's algorithm over the app's task graph, sources first, ties by lowest
/// task id. Returns fewer than tasks.size() entries iff the graph has a cycle.
/// Edges with out-of-range endpoints are ignored.
inline std::vector<TaskId> topologicalOrder(const App& aApp) {
  const auto                            n = aApp.tasks.size();
  std::vector<std::size_t>              myInDegree(n, 0);
  std::vector<std::vector<TaskId>>      mySucc(n);
  for (const auto& e : aApp.edges) {
    if (e.from >= n or e.to >= n) {
      continue;
    }
    mySucc[e.from].push_back(e.to);
    ++myInDegree[e.to];
  }
  // min-heap on task id keeps the order deterministic
  std::vector<TaskId> myReady;
  for (TaskId v = 0; v < n; ++v) {
    if (myInDegree[v] == 0) {
      myReady.push_back(v);
    }
  }
  const auto myCmp = [](TaskId a, TaskId b) { return a > b; };
  std::make_heap(myReady.begin(), myReady.end(), myCmp);
  std::vector<TaskId> ret;
  ret.reserve(n);
  while (not myReady.empty()) {
    std::pop_heap(myReady.begin(), myReady.end(), myCmp);
    const auto u = myReady.back();
    myReady.pop_back();
    ret.push_back(u);
    for (const auto v : mySucc[u]) {
      if (--myInDegree[v] == 0) {
        myReady.push_back(v);
        std::push_heap(myReady.begin(), myReady.end(), myCmp);
      }
    }
  }
  return ret;
}

/// Returns every structural violation of the app model; empty means valid.
/// Capacity (demand <= C) is not checked here since C is a run parameter.
inline std::vector<Violation> validateApp(const App& aApp) {
  std::vector<Violation> ret;
  const auto             add = [&ret](ViolationKind k, std::string w) {
    ret.push_back({k, std::move(w)});
  };
  const auto n = aApp.tasks.size();

  for (std::size_t i = 0; i < n; ++i) {
    const auto& t = aApp.tasks[i];
    if (t.id != i) {
      add(ViolationKind::TaskIdMismatch,
          "task at position " + std::to_string(i) + " has id " +
              std::to_string(t.id));
    }
    if (not(t.cpu_demand > 0)) {
      add(ViolationKind::NonPositiveDemand,
          "task " + std::to_string(i) + " has demand " +
              std::to_string(t.cpu_demand));
    }
    if (not(t.state_bits >= 0)) {
      add(ViolationKind::NegativeStateSize,
          "task " + std::to_string(i) + " has negative state size");
    }
  }

  std::vector<std::pair<TaskId, TaskId>> mySeen;
  for (const auto& e : aApp.edges) {
    const auto myName =
        "(" + std::to_string(e.from) + "," + std::to_string(e.to) + ")";
    if (e.from >= n or e.to >= n) {
      add(ViolationKind::DanglingEndpoint, "edge " + myName);
    } else if (e.from == e.to) {
      add(ViolationKind::SelfLoop, "edge " + myName);
    }
    if (not(e.data_bits >= 0)) {
      add(ViolationKind::NegativeDataSize, "edge " + myName);
    }
    mySeen.emplace_back(e.from, e.to);
  }
  std::sort(mySeen.begin(), mySeen.end());
  if (std::adjacent_find(mySeen.begin(), mySeen.end()) != mySeen.end()) {
    add(ViolationKind::DuplicateEdge, "duplicate (u, v) edge");
  }

  // self-loops are reported above; exclude them from cycle detection so a
  // single bad edge is not reported twice
  App myNoLoops;
  myNoLoops.tasks = aApp.tasks;
  for (const auto& e : aApp.edges) {
    if (e.from != e.to) {
      myNoLoops.edges.push_back(e);
    }
  }
  if (topologicalOrder(myNoLoops).size() != n) {
    add(ViolationKind::Cycle, "task graph is not acyclic");
  }

  if (not(aApp.invocation_rate > 0)) {
    add(ViolationKind::NonPositiveRate, "invocation rate must be positive");
  }
  if (not(aApp.arrival < aApp.departure)) {
    add(ViolationKind::BadLifetime, "arrival must precede departure");
  }
  return ret;
}

inline double totalDemand(const App& aApp) {
  return std::accumulate(
      aApp.tasks.begin(), aApp.tasks.end(), 0.0,
      [](double acc, const Task& t) { return acc + t.cpu_demand; });
}

inline double totalStateBits(const App& aApp) {
  return std::accumulate(
      aApp.tasks.begin(), aApp.tasks.end(), 0.0,
      [](double acc, const Task& t) { return acc + t.state_bits; });
}

inline double totalDataBits(const App& aApp) {
  return std::accumulate(
      aApp.edges.begin(), aApp.edges.end(), 0.0,
      [](double acc, const Edge& e) { return acc + e.data_bits; });
}

} // namespace edgesim
