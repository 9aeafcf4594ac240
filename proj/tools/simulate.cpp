// Command-line experiment runner.
//
// Runs one of the shipped experiment presets (or a custom sweep described in
// the JSON config) and writes raw.csv, summary.csv and gnuplot files.

#include "edgesim/edgesim.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace edgesim;

namespace {

struct Config {
  Json workload = Json::object();
  Json energy   = Json::object();
  Json policy   = Json::object();
  Json sweep; // null if absent
};

Config loadConfig(const std::string& aPath) {
  Config ret;
  if (aPath.empty()) {
    return ret;
  }
  std::ifstream myIn(aPath);
  if (not myIn) {
    throw ConfigError("Cannot open config file " + aPath);
  }
  Json myRoot;
  try {
    myRoot = Json::parse(myIn);
  } catch (const Json::exception& ex) {
    throw ConfigError("Malformed config file: " + std::string(ex.what()));
  }
  detail::rejectUnknownKeys(myRoot, {"workload", "energy", "policy", "sweep"},
                            "config");
  if (myRoot.contains("workload")) {
    ret.workload = myRoot.at("workload");
  }
  if (myRoot.contains("energy")) {
    ret.energy = myRoot.at("energy");
  }
  if (myRoot.contains("policy")) {
    ret.policy = myRoot.at("policy");
  }
  if (myRoot.contains("sweep")) {
    ret.sweep = myRoot.at("sweep");
  }
  return ret;
}

SweepAxis axisFromJson(const Json& aObj, const std::string& aWhere) {
  detail::rejectUnknownKeys(aObj, {"parameter", "values", "secondary"}, aWhere);
  SweepAxis ret;
  try {
    ret.parameter = sweepParameterFromString(aObj.at("parameter").get<std::string>());
    for (const auto& v : aObj.at("values")) {
      ret.values.push_back(detail::readMaybeInfinite(v));
    }
  } catch (const Json::exception& ex) {
    throw ConfigError(aWhere + ": " + ex.what());
  } catch (const std::invalid_argument& ex) {
    throw ConfigError(aWhere + ": " + ex.what());
  }
  return ret;
}

std::vector<SweepParameter> pinnedBy(const Config& aConfig) {
  std::vector<SweepParameter> ret;
  if (aConfig.energy.contains("defrag_interval")) {
    ret.push_back(SweepParameter::DefragInterval);
  }
  if (aConfig.energy.contains("per_bit_energy")) {
    ret.push_back(SweepParameter::PerBitEnergy);
  }
  if (aConfig.energy.contains("node_capacity")) {
    ret.push_back(SweepParameter::NodeCapacity);
  }
  if (aConfig.workload.contains("state_to_data_ratio")) {
    ret.push_back(SweepParameter::StateToDataRatio);
  }
  if (aConfig.workload.contains("mean_lifetime")) {
    ret.push_back(SweepParameter::MeanLifetime);
  }
  return ret;
}

std::vector<PolicyKind> parsePolicies(const std::string& aList) {
  std::vector<PolicyKind> ret;
  std::stringstream       myStream(aList);
  std::string             myItem;
  while (std::getline(myStream, myItem, ',')) {
    if (not myItem.empty()) {
      ret.push_back(policyKindFromString(myItem));
    }
  }
  return ret;
}

void writeFile(const fs::path& aPath, const std::function<void(std::ostream&)>& aWriter) {
  std::ofstream myOut(aPath, std::ios::binary);
  if (not myOut) {
    throw std::runtime_error("Cannot write " + aPath.string());
  }
  aWriter(myOut);
}

std::string cellTag(PolicyKind aPolicy, double aSecondary, double aValue) {
  auto ret = toString(aPolicy) + "_" + detail::formatNumber(aValue);
  if (not std::isnan(aSecondary)) {
    ret += "_" + detail::formatNumber(aSecondary);
  }
  return ret;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App myApp{"Energy simulator of stateless vs. stateful FaaS deployments "
                 "on an edge data network"};

  std::string   myConfigPath;
  std::string   myExperiment = "custom";
  std::string   myPolicies;
  std::size_t   myReps = 0;
  std::uint64_t mySeed = 0;
  std::string   myOutDir = ".";
  bool          myFullScale = false;
  std::size_t   myWorkers    = 0;
  bool          myDumpSteps  = false;
  std::string   myReplay;
  std::string   mySaveWorkload;
  bool          myQuiet = false;

  myApp.add_option("--config", myConfigPath, "JSON configuration file");
  myApp.add_option("--experiment", myExperiment,
                   "defrag | energy-per-bit | state-to-data | lifetime | "
                   "capacity | custom");
  myApp.add_option("--policies", myPolicies,
                   "Comma-separated list among stateless-min-nodes, "
                   "stateless-max-balancing, stateful-best-fit, stateful-random");
  myApp.add_option("--reps", myReps, "Repetitions per sweep point");
  myApp.add_option("--seed", mySeed, "Base seed; repetition i uses seed + i");
  myApp.add_option("--out-dir", myOutDir, "Output directory");
  myApp.add_flag("--full-scale", myFullScale,
                 "One simulated day and 1000 repetitions");
  myApp.add_option("--workers", myWorkers,
                   "Concurrent workers (default: EDGESIM_WORKERS or 1)");
  myApp.add_flag("--dump-steps", myDumpSteps,
                 "Write the step series of repetition 0 of each cell");
  myApp.add_option("--workload", myReplay,
                   "Replay a JSONL workload once per policy instead of sweeping");
  myApp.add_option("--save-workload", mySaveWorkload,
                   "Write the workload generated with --seed as JSONL and exit");
  myApp.add_flag("--quiet", myQuiet, "No progress output");

  CLI11_PARSE(myApp, argc, argv);

  try {
    if (myWorkers == 0) {
      if (const char* myEnv = std::getenv("EDGESIM_WORKERS")) {
        try {
          myWorkers = std::stoul(myEnv);
        } catch (const std::exception&) {
          throw ConfigError("EDGESIM_WORKERS is not a number");
        }
      }
      myWorkers = std::max<std::size_t>(myWorkers, 1);
    }

    const auto myConfig = loadConfig(myConfigPath);
    const auto myScale  = myFullScale ? kFullScale : kDeskScale;

    SweepSpec mySpec;
    if (myExperiment == "custom") {
      mySpec      = basePreset(myScale);
      mySpec.name = "custom";
      const bool mySweeping = mySaveWorkload.empty() and myReplay.empty();
      if (mySweeping and myConfig.sweep.is_null()) {
        throw ConfigError("A custom experiment needs a 'sweep' section");
      }
      if (not myConfig.sweep.is_null()) {
        mySpec.axis = axisFromJson(myConfig.sweep, "sweep");
      }
      if (not myConfig.sweep.is_null() and myConfig.sweep.contains("secondary")) {
        mySpec.secondary =
            axisFromJson(myConfig.sweep.at("secondary"), "sweep.secondary");
      }
    } else {
      try {
        mySpec = preset(myExperiment, myScale);
      } catch (const std::invalid_argument& ex) {
        throw ConfigError(ex.what());
      }
      if (not myConfig.sweep.is_null()) {
        throw ConfigError("'sweep' is only allowed with --experiment custom");
      }
    }
    mySpec.workload  = workloadConfigFromJson(myConfig.workload, mySpec.workload);
    mySpec.energy    = energyParamsFromJson(myConfig.energy, mySpec.energy);
    mySpec.policy    = policyConfigFromJson(myConfig.policy, mySpec.policy);
    mySpec.pinned    = pinnedBy(myConfig);
    mySpec.base_seed = mySeed;
    mySpec.workers   = myWorkers;
    if (myReps > 0) {
      mySpec.repetitions = myReps;
    }
    if (not myPolicies.empty()) {
      try {
        mySpec.policies = parsePolicies(myPolicies);
      } catch (const std::invalid_argument& ex) {
        throw ConfigError(ex.what());
      }
    }

    fs::create_directories(myOutDir);

    if (not mySaveWorkload.empty()) {
      auto myWorkloadConfig = mySpec.workload;
      myWorkloadConfig.seed = mySeed;
      const auto myWorkload = generateWorkload(myWorkloadConfig);
      writeFile(mySaveWorkload,
                [&](std::ostream& o) { writeWorkloadJsonl(o, myWorkload); });
      return EXIT_SUCCESS;
    }

    if (not myReplay.empty()) {
      std::ifstream myIn(myReplay);
      if (not myIn) {
        throw ConfigError("Cannot open workload file " + myReplay);
      }
      const auto myWorkload = readWorkloadJsonl(myIn);
      for (const auto p : mySpec.policies) {
        auto myPolicy = mySpec.policy;
        myPolicy.kind = p;
        RunOptions myOptions;
        myOptions.record_steps = myDumpSteps;
        const auto myResult =
            runSimulation(myWorkload, myPolicy, mySpec.energy, mySeed, myOptions);
        writeFile(fs::path(myOutDir) / ("result_" + toString(p) + ".json"),
                  [&](std::ostream& o) { o << toJson(myResult).dump(2) << '\n'; });
        if (myDumpSteps) {
          writeFile(fs::path(myOutDir) / ("steps_" + toString(p) + ".csv"),
                    [&](std::ostream& o) { writeStepsCsv(o, myResult.steps); });
        }
        std::cout << toString(p) << ' ' << myResult.energy_total << " J\n";
      }
      return EXIT_SUCCESS;
    }

    try {
      mySpec.validate();
    } catch (const std::invalid_argument& ex) {
      throw ConfigError(ex.what());
    }

    ProgressCallback myProgress;
    if (not myQuiet) {
      myProgress = [](std::size_t aDone, std::size_t aTotal) {
        if (aDone == aTotal or aDone % std::max<std::size_t>(1, aTotal / 20) == 0) {
          std::cerr << "\r" << aDone << "/" << aTotal << " runs" << std::flush;
        }
        if (aDone == aTotal) {
          std::cerr << '\n';
        }
      };
    }
    StepsCallback mySteps;
    if (myDumpSteps) {
      mySteps = [&](PolicyKind aPolicy, double aSecondary, double aValue,
                    const std::vector<StepRecord>& aRecords) {
        writeFile(fs::path(myOutDir) /
                      ("steps_" + cellTag(aPolicy, aSecondary, aValue) + ".csv"),
                  [&](std::ostream& o) { writeStepsCsv(o, aRecords); });
      };
    }

    const auto myResult = runSweep(mySpec, myProgress, mySteps);
    const fs::path myDir(myOutDir);
    writeFile(myDir / "raw.csv",
              [&](std::ostream& o) { writeRawCsv(o, mySpec, myResult); });
    writeFile(myDir / "summary.csv",
              [&](std::ostream& o) { writeSummaryCsv(o, mySpec, myResult); });
    const auto myDat = "plot_" + mySpec.name + ".dat";
    writeFile(myDir / myDat,
              [&](std::ostream& o) { writePlotData(o, mySpec, myResult.summary); });
    writeFile(myDir / ("plot_" + mySpec.name + ".gp"), [&](std::ostream& o) {
      writePlotScript(o, mySpec, myResult.summary, myDat);
    });
  } catch (const ConfigError& ex) {
    std::cerr << "configuration error: " << ex.what() << '\n';
    return 2;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return 1;
  }
  return EXIT_SUCCESS;
}
