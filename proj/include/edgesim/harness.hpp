#pragma once

#include "edgesim/engine.hpp"
#include "edgesim/policy.hpp"
#include "edgesim/workload.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace edgesim {

////////////////////////////////////////////////////////////////////////////////
// statistics

struct Summary {
  double      mean   = 0;
  double      q_low  = 0;
  double      q_high = 0;
  std::size_t count  = 0;
};

/// Nearest-rank quantile of an ascending sample: the ceil(p * n)-th value.
inline double quantileNearestRank(std::span<const double> aSorted, double aP) {
  if (aSorted.empty()) {
    throw std::invalid_argument("Quantile of an empty sample");
  }
  const auto n = static_cast<double>(aSorted.size());
  // the tolerance absorbs p * n landing a hair above an integer
  auto myRank = static_cast<std::size_t>(std::ceil(aP * n - 1e-9));
  myRank      = std::clamp<std::size_t>(myRank, 1, aSorted.size());
  return aSorted[myRank - 1];
}

inline constexpr double kQuantileLow  = 0.025;
inline constexpr double kQuantileHigh = 0.975;

inline Summary summarize(std::span<const double> aSample) {
  if (aSample.empty()) {
    throw std::invalid_argument("Cannot summarize an empty sample");
  }
  Summary ret;
  ret.count = aSample.size();
  double mySum = 0;
  for (const auto x : aSample) {
    mySum += x;
  }
  ret.mean = mySum / static_cast<double>(aSample.size());
  std::vector<double> mySorted(aSample.begin(), aSample.end());
  std::sort(mySorted.begin(), mySorted.end());
  ret.q_low  = quantileNearestRank(mySorted, kQuantileLow);
  ret.q_high = quantileNearestRank(mySorted, kQuantileHigh);
  return ret;
}

////////////////////////////////////////////////////////////////////////////////
// sweep definition

enum class SweepParameter {
  DefragInterval,   // s
  PerBitEnergy,     // uW/b/s, i.e. 1e-6 J/bit
  StateToDataRatio, // S/D
  MeanLifetime,     // s
  NodeCapacity,     // CPU units
};

inline std::string toString(SweepParameter aParam) {
  switch (aParam) {
    case SweepParameter::DefragInterval:
      return "defrag-interval";
    case SweepParameter::PerBitEnergy:
      return "per-bit-energy";
    case SweepParameter::StateToDataRatio:
      return "state-to-data-ratio";
    case SweepParameter::MeanLifetime:
      return "mean-lifetime";
    case SweepParameter::NodeCapacity:
      return "node-capacity";
  }
  throw std::invalid_argument("Invalid sweep parameter");
}

inline SweepParameter sweepParameterFromString(const std::string& aName) {
  for (const auto p :
       {SweepParameter::DefragInterval, SweepParameter::PerBitEnergy,
        SweepParameter::StateToDataRatio, SweepParameter::MeanLifetime,
        SweepParameter::NodeCapacity}) {
    if (toString(p) == aName) {
      return p;
    }
  }
  throw std::invalid_argument("Invalid sweep parameter: " + aName);
}

/// True if the generated workload depends on the parameter.
inline bool affectsWorkload(SweepParameter aParam) noexcept {
  return aParam == SweepParameter::StateToDataRatio or
         aParam == SweepParameter::MeanLifetime;
}

inline void applyParameter(SweepParameter  aParam,
                           double          aValue,
                           WorkloadConfig& aWorkload,
                           EnergyParams&   aEnergy) {
  switch (aParam) {
    case SweepParameter::DefragInterval:
      aEnergy.defrag_interval = aValue;
      break;
    case SweepParameter::PerBitEnergy:
      aEnergy.per_bit_energy = aValue * 1e-6;
      break;
    case SweepParameter::StateToDataRatio:
      aWorkload.state_to_data_ratio = aValue;
      break;
    case SweepParameter::MeanLifetime:
      aWorkload.mean_lifetime = aValue;
      break;
    case SweepParameter::NodeCapacity:
      aEnergy.node_capacity = aValue;
      break;
  }
}

struct SweepAxis {
  SweepParameter      parameter = SweepParameter::DefragInterval;
  std::vector<double> values;
};

/// One experiment: every policy runs on every (secondary, value, repetition)
/// triple. The workload of repetition i is generated with seed base_seed + i,
/// so policies (and values that leave the workload unchanged) are compared on
/// identical workloads.
struct SweepSpec {
  std::string              name = "custom";
  SweepAxis                axis;
  std::optional<SweepAxis> secondary; // extra series dimension, e.g. E_B
  WorkloadConfig           workload;
  EnergyParams             energy;
  PolicyConfig             policy; // kind is ignored, see policies
  std::vector<PolicyKind>  policies;
  std::size_t              repetitions = 1;
  std::uint64_t            base_seed   = 0;
  std::size_t              workers     = 1;
  std::vector<SweepParameter> pinned; // parameters fixed explicitly by the user

  void validate() const {
    if (axis.values.empty()) {
      throw std::invalid_argument("Sweep value list is empty");
    }
    if (secondary.has_value()) {
      if (secondary->values.empty()) {
        throw std::invalid_argument("Secondary sweep value list is empty");
      }
      if (secondary->parameter == axis.parameter) {
        throw std::invalid_argument("Secondary axis repeats the swept parameter");
      }
    }
    if (repetitions < 1) {
      throw std::invalid_argument("At least one repetition is required");
    }
    if (policies.empty()) {
      throw std::invalid_argument("No policies selected");
    }
    for (const auto p : pinned) {
      if (p == axis.parameter or
          (secondary.has_value() and p == secondary->parameter)) {
        throw std::invalid_argument("Parameter " + toString(p) +
                                    " is both fixed and swept");
      }
    }
  }

  std::vector<double> secondaryValues() const {
    return secondary.has_value() ? secondary->values
                                 : std::vector<double>{std::nan("")};
  }
};

struct RawRow {
  PolicyKind    policy;
  double        secondary; // NaN without a secondary axis
  double        value;
  std::size_t   repetition;
  std::uint64_t seed;
  std::size_t   num_apps;
  SimResult     result; // steps never retained
};

enum class Metric {
  EnergyTotal,
  EnergyProcessing,
  EnergyNetwork,
  MeanAlpha,
  MeanBeta,
};

inline const std::vector<Metric>& allMetrics() {
  static const std::vector<Metric> myMetrics{
      Metric::EnergyTotal, Metric::EnergyProcessing, Metric::EnergyNetwork,
      Metric::MeanAlpha, Metric::MeanBeta};
  return myMetrics;
}

inline std::string toString(Metric aMetric) {
  switch (aMetric) {
    case Metric::EnergyTotal:
      return "energy_total";
    case Metric::EnergyProcessing:
      return "energy_processing";
    case Metric::EnergyNetwork:
      return "energy_network";
    case Metric::MeanAlpha:
      return "mean_alpha";
    case Metric::MeanBeta:
      return "mean_beta";
  }
  throw std::invalid_argument("Invalid metric");
}

inline double metricOf(const SimResult& aResult, Metric aMetric) {
  switch (aMetric) {
    case Metric::EnergyTotal:
      return aResult.energy_total;
    case Metric::EnergyProcessing:
      return aResult.energy_processing;
    case Metric::EnergyNetwork:
      return aResult.energy_network;
    case Metric::MeanAlpha:
      return aResult.meanAlpha();
    case Metric::MeanBeta:
      return aResult.meanBeta();
  }
  throw std::invalid_argument("Invalid metric");
}

struct SummaryRow {
  PolicyKind policy;
  double     secondary;
  double     value;
  Metric     metric;
  Summary    stats;
};

struct SweepResult {
  std::vector<RawRow>     raw;     // ordered by (policy, secondary, value, rep)
  std::vector<SummaryRow> summary; // ordered by (policy, secondary, value, metric)

  /// Summary of one cell; throws if absent. Pass NaN as aSecondary when the
  /// sweep has no secondary axis.
  const Summary& at(PolicyKind aPolicy,
                    double     aValue,
                    Metric     aMetric,
                    double     aSecondary = std::nan("")) const {
    for (const auto& r : summary) {
      const auto mySameSecondary =
          (std::isnan(r.secondary) and std::isnan(aSecondary)) or
          r.secondary == aSecondary;
      if (r.policy == aPolicy and r.value == aValue and r.metric == aMetric and
          mySameSecondary) {
        return r.stats;
      }
    }
    throw std::out_of_range("No summary for the requested cell");
  }
};

/// Called after each finished (secondary, value, repetition) job with the
/// number of completed jobs and the total.
using ProgressCallback = std::function<void(std::size_t, std::size_t)>;

/// Optional hook receiving the step series of repetition 0 of each cell.
using StepsCallback = std::function<void(
    PolicyKind, double aSecondary, double aValue, const std::vector<StepRecord>&)>;

inline SweepResult runSweep(const SweepSpec&        aSpec,
                            const ProgressCallback& aProgress = {},
                            const StepsCallback&    aSteps    = {}) {
  aSpec.validate();
  const auto mySecondaries = aSpec.secondaryValues();
  const auto S             = mySecondaries.size();
  const auto V             = aSpec.axis.values.size();
  const auto R             = aSpec.repetitions;
  const auto P             = aSpec.policies.size();
  const auto myJobs        = S * V * R;

  // index = ((p * S + s) * V + v) * R + r
  std::vector<std::optional<RawRow>> mySlots(P * myJobs);
  std::atomic<std::size_t>           myNext{0};
  std::atomic<std::size_t>           myDone{0};
  std::mutex                         myMutex;
  std::exception_ptr                 myError;

  const auto runJob = [&](std::size_t aJob) {
    const auto r = aJob % R;
    const auto v = (aJob / R) % V;
    const auto s = aJob / (R * V);

    auto myWorkloadConfig = aSpec.workload;
    auto myEnergy         = aSpec.energy;
    if (aSpec.secondary.has_value()) {
      applyParameter(aSpec.secondary->parameter, mySecondaries[s],
                     myWorkloadConfig, myEnergy);
    }
    applyParameter(aSpec.axis.parameter, aSpec.axis.values[v], myWorkloadConfig,
                   myEnergy);
    const auto mySeed      = aSpec.base_seed + r;
    myWorkloadConfig.seed  = mySeed;
    const auto myWorkload  = generateWorkload(myWorkloadConfig);

    for (std::size_t p = 0; p < P; ++p) {
      auto myPolicy = aSpec.policy;
      myPolicy.kind = aSpec.policies[p];
      RunOptions myOptions;
      myOptions.record_steps = aSteps and r == 0;
      auto myResult = runSimulation(myWorkload, myPolicy, myEnergy, mySeed,
                                    myOptions);
      if (myOptions.record_steps) {
        std::lock_guard myLock(myMutex);
        aSteps(myPolicy.kind, mySecondaries[s], aSpec.axis.values[v],
               myResult.steps);
      }
      myResult.steps.clear();
      mySlots[((p * S + s) * V + v) * R + r] =
          RawRow{myPolicy.kind,       mySecondaries[s],
                 aSpec.axis.values[v], r,
                 mySeed,              myWorkload.apps.size(),
                 std::move(myResult)};
    }
    const auto myCount = ++myDone;
    if (aProgress) {
      std::lock_guard myLock(myMutex);
      aProgress(myCount, myJobs);
    }
  };

  const auto worker = [&]() {
    while (true) {
      const auto myJob = myNext++;
      if (myJob >= myJobs) {
        return;
      }
      try {
        runJob(myJob);
      } catch (...) {
        std::lock_guard myLock(myMutex);
        if (not myError) {
          myError = std::current_exception();
        }
        myNext = myJobs;
        return;
      }
    }
  };

  const auto myWorkers = std::max<std::size_t>(1, std::min(aSpec.workers, myJobs));
  if (myWorkers == 1) {
    worker();
  } else {
    std::vector<std::jthread> myThreads;
    for (std::size_t i = 0; i < myWorkers; ++i) {
      myThreads.emplace_back(worker);
    }
  }
  if (myError) {
    std::rethrow_exception(myError);
  }

  SweepResult ret;
  ret.raw.reserve(mySlots.size());
  for (auto& slot : mySlots) {
    ret.raw.push_back(std::move(*slot));
  }
  std::vector<double> mySample(R);
  for (std::size_t p = 0; p < P; ++p) {
    for (std::size_t s = 0; s < S; ++s) {
      for (std::size_t v = 0; v < V; ++v) {
        const auto myBase = ((p * S + s) * V + v) * R;
        for (const auto m : allMetrics()) {
          for (std::size_t r = 0; r < R; ++r) {
            mySample[r] = metricOf(ret.raw[myBase + r].result, m);
          }
          ret.summary.push_back(SummaryRow{aSpec.policies[p], mySecondaries[s],
                                           aSpec.axis.values[v], m,
                                           summarize(mySample)});
        }
      }
    }
  }
  return ret;
}

////////////////////////////////////////////////////////////////////////////////
// presets

struct ExperimentScale {
  double      horizon;
  std::size_t repetitions;
};

inline constexpr ExperimentScale kDeskScale{7200, 100};
inline constexpr ExperimentScale kFullScale{86400, 1000};

inline const std::vector<std::string>& presetNames() {
  static const std::vector<std::string> myNames{
      "defrag", "energy-per-bit", "state-to-data", "lifetime", "capacity"};
  return myNames;
}

/// Base settings shared by every preset: defrag interval 120 s, E_B 0.05
/// uW/b/s, C 1000, P_N 100 W, S/D 100, all four policies.
inline SweepSpec basePreset(const ExperimentScale& aScale) {
  SweepSpec ret;
  ret.workload.horizon = aScale.horizon;
  ret.repetitions      = aScale.repetitions;
  ret.energy           = EnergyParams{};
  ret.policies         = allPolicies();
  return ret;
}

/// The five shipped experiments. Values of the per-bit-energy axis are in
/// uW/b/s.
inline SweepSpec preset(const std::string& aName, const ExperimentScale& aScale) {
  auto ret = basePreset(aScale);
  ret.name = aName;
  if (aName == "defrag") {
    ret.axis      = {SweepParameter::DefragInterval,
                     {30, 60, 120, 300, 600, 1200, kNeverDefrag}};
    ret.secondary = SweepAxis{SweepParameter::StateToDataRatio, {1, 10, 100}};
    ret.policies  = {PolicyKind::StatefulBestFit};
  } else if (aName == "energy-per-bit") {
    ret.axis = {SweepParameter::PerBitEnergy, {0.05, 0.1, 0.2, 0.5, 1, 2, 5}};
  } else if (aName == "state-to-data") {
    ret.axis = {SweepParameter::StateToDataRatio, {1, 10, 100, 1000}};
  } else if (aName == "lifetime") {
    ret.axis      = {SweepParameter::MeanLifetime, {15, 30, 60, 90, 120}};
    ret.secondary = SweepAxis{SweepParameter::PerBitEnergy, {0.05, 5}};
  } else if (aName == "capacity") {
    ret.axis = {SweepParameter::NodeCapacity, {800, 1000, 1500, 2000, 3000, 4000}};
  } else {
    throw std::invalid_argument("Unknown experiment: " + aName);
  }
  return ret;
}

////////////////////////////////////////////////////////////////////////////////
// output

namespace detail {

inline std::string formatNumber(double aValue) {
  if (std::isnan(aValue)) {
    return "";
  }
  if (std::isinf(aValue)) {
    return aValue > 0 ? "inf" : "-inf";
  }
  std::ostringstream myStream;
  myStream.precision(17);
  myStream << aValue;
  return myStream.str();
}

} // namespace detail

inline void writeRawCsv(std::ostream&       aOut,
                        const SweepSpec&    aSpec,
                        const SweepResult&  aResult) {
  aOut << "experiment,policy,parameter,value,secondary_parameter,"
          "secondary_value,repetition,seed,num_apps,energy_total,"
          "energy_processing,energy_network,energy_migration,migrated_bits,"
          "mean_alpha,mean_beta\n";
  const auto mySecondaryName =
      aSpec.secondary.has_value() ? toString(aSpec.secondary->parameter) : "";
  using detail::formatNumber;
  for (const auto& r : aResult.raw) {
    aOut << aSpec.name << ',' << toString(r.policy) << ','
         << toString(aSpec.axis.parameter) << ',' << formatNumber(r.value) << ','
         << mySecondaryName << ',' << formatNumber(r.secondary) << ','
         << r.repetition << ',' << r.seed << ',' << r.num_apps << ','
         << formatNumber(r.result.energy_total) << ','
         << formatNumber(r.result.energy_processing) << ','
         << formatNumber(r.result.energy_network) << ','
         << formatNumber(r.result.energy_migration) << ','
         << formatNumber(r.result.total_migrated_bits) << ','
         << formatNumber(r.result.meanAlpha()) << ','
         << formatNumber(r.result.meanBeta()) << '\n';
  }
}

inline void writeSummaryCsv(std::ostream&      aOut,
                            const SweepSpec&   aSpec,
                            const SweepResult& aResult) {
  aOut << "experiment,policy,parameter,value,secondary_value,metric,mean,"
          "q_low,q_high,repetitions\n";
  using detail::formatNumber;
  for (const auto& r : aResult.summary) {
    aOut << aSpec.name << ',' << toString(r.policy) << ','
         << toString(aSpec.axis.parameter) << ',' << formatNumber(r.value) << ','
         << formatNumber(r.secondary) << ',' << toString(r.metric) << ','
         << formatNumber(r.stats.mean) << ',' << formatNumber(r.stats.q_low)
         << ',' << formatNumber(r.stats.q_high) << ',' << r.stats.count << '\n';
  }
}

/// Metrics drawn by the figure analogue of an experiment: alpha and beta
/// panels for the defrag sweep, processing energy for the capacity sweep,
/// total energy otherwise.
inline std::vector<Metric> plotMetrics(const std::string& aExperiment) {
  if (aExperiment == "defrag") {
    return {Metric::MeanAlpha, Metric::MeanBeta};
  } else if (aExperiment == "capacity") {
    return {Metric::EnergyProcessing};
  }
  return {Metric::EnergyTotal};
}

inline std::string seriesName(const SweepSpec& aSpec, const SummaryRow& aRow) {
  auto ret = toString(aRow.policy);
  if (aSpec.secondary.has_value()) {
    ret += "|" + toString(aSpec.secondary->parameter) + "=" +
           detail::formatNumber(aRow.secondary);
  }
  return ret;
}

/// Gnuplot data: one block per (panel, series), blocks separated by two blank
/// lines so that `index` selects them. Columns: x series mean q_low q_high.
inline void writePlotData(std::ostream&                aOut,
                          const SweepSpec&             aSpec,
                          std::span<const SummaryRow>  aRows) {
  aOut << "# x series mean q_low q_high\n";
  bool myFirst = true;
  for (const auto m : plotMetrics(aSpec.name)) {
    std::string myCurrent;
    for (const auto& r : aRows) {
      if (r.metric != m) {
        continue;
      }
      const auto mySeries = seriesName(aSpec, r);
      if (mySeries != myCurrent) {
        if (not myFirst) {
          aOut << "\n\n";
        }
        myFirst   = false;
        myCurrent = mySeries;
        aOut << "# panel " << toString(m) << " series " << mySeries << '\n';
      }
      using detail::formatNumber;
      aOut << formatNumber(r.value) << ' ' << mySeries << ' '
           << formatNumber(r.stats.mean) << ' ' << formatNumber(r.stats.q_low)
           << ' ' << formatNumber(r.stats.q_high) << '\n';
    }
  }
}

/// Gnuplot script drawing the blocks of writePlotData with error bars.
inline void writePlotScript(std::ostream&               aOut,
                            const SweepSpec&            aSpec,
                            std::span<const SummaryRow> aRows,
                            const std::string&          aDataFile) {
  const auto myMetrics = plotMetrics(aSpec.name);
  aOut << "# generated for experiment " << aSpec.name << "\n"
       << "set terminal pngcairo size 800," << 400 * myMetrics.size() << "\n"
       << "set output '" << aSpec.name << ".png'\n"
       << "set key outside right\n"
       << "set xlabel '" << toString(aSpec.axis.parameter) << "'\n";
  if (myMetrics.size() > 1) {
    aOut << "set multiplot layout " << myMetrics.size() << ",1\n";
  }
  std::size_t myIndex = 0;
  for (const auto m : myMetrics) {
    std::vector<std::string> mySeries;
    for (const auto& r : aRows) {
      if (r.metric == m) {
        const auto s = seriesName(aSpec, r);
        if (mySeries.empty() or mySeries.back() != s) {
          mySeries.push_back(s);
        }
      }
    }
    aOut << "set ylabel '" << toString(m) << "'\n";
    aOut << (m == Metric::MeanBeta ? "set logscale y\n" : "unset logscale y\n");
    if (mySeries.empty()) {
      aOut << "# no data\n";
      continue;
    }
    aOut << "plot ";
    for (std::size_t i = 0; i < mySeries.size(); ++i) {
      aOut << (i == 0 ? "" : ", \\\n     ") << "'" << aDataFile << "' index "
           << myIndex++ << " using 1:3:4:5 with yerrorlines title '"
           << mySeries[i] << "'";
    }
    aOut << "\n";
  }
  if (myMetrics.size() > 1) {
    aOut << "unset multiplot\n";
  }
}

} // namespace edgesim
