#include "oracle/oracle.hpp"

#include <gtest/gtest.h>

#include <random>

namespace edgesim::oracle {

TEST(TestOracle, test_optimal_packing_examples) {
  EXPECT_EQ(2u, optimalPacking({{800, 300, 600, 200}, 1000}));
  EXPECT_EQ(2u, enumeratePartitions({{800, 300, 600, 200}, 1000}));
  EXPECT_EQ(0u, optimalPacking({{}, 1000}));
  EXPECT_EQ(1u, optimalPacking({{800}, 1000}));
}

TEST(TestOracle, test_optimal_packing_bounds) {
  EXPECT_THROW(optimalPacking({std::vector<double>(15, 1), 1000}),
               std::invalid_argument);
  EXPECT_THROW(optimalPacking({{1200}, 1000}), std::invalid_argument);
  EXPECT_EQ(1u, optimalPacking({std::vector<double>(14, 1), 1000}));
}

TEST(TestOracle, test_branch_and_bound_matches_enumeration) {
  std::mt19937_64                        myRng(5);
  std::uniform_int_distribution<int>     mySize(50, 800);
  std::uniform_int_distribution<int>     myCount(1, 8);
  for (int trial = 0; trial < 300; ++trial) {
    PackingInstance myInstance{{}, 1000};
    const auto      n = myCount(myRng);
    for (int i = 0; i < n; ++i) {
      myInstance.sizes.push_back(mySize(myRng));
    }
    EXPECT_EQ(enumeratePartitions(myInstance), optimalPacking(myInstance));
  }
}

TEST(TestOracle, test_analytic_single_app) {
  Scenario s;
  s.horizon = 20;
  s.apps    = {ScenarioApp{0, 10, 5, {ScenarioTask{500, 0, 0}}, {}}};
  EXPECT_DOUBLE_EQ(1000, analyticEnergy(s));
}

TEST(TestOracle, test_analytic_stateless_chain) {
  Scenario s;
  s.horizon        = 20;
  s.per_bit_energy = 1e-6;
  s.apps           = {ScenarioApp{0, 10, 5,
                                  {ScenarioTask{600, 1e6, 0}, ScenarioTask{300, 1e6, 0}},
                                  {ScenarioEdge{0, 1, 1e5}}}};
  EXPECT_NEAR(1105, analyticEnergy(s), 1e-9);
  s.model = ScenarioModel::Stateful;
  EXPECT_NEAR(1000, analyticEnergy(s), 1e-9);
}

TEST(TestOracle, test_analytic_two_disjoint_apps) {
  Scenario s;
  s.horizon = 10;
  s.apps    = {ScenarioApp{0, 10, 5, {ScenarioTask{600, 0, 0}}, {}},
               ScenarioApp{0, 10, 5, {ScenarioTask{600, 0, 1}}, {}}};
  EXPECT_DOUBLE_EQ(2000, analyticEnergy(s));
}

TEST(TestOracle, test_analytic_rejects_unsupported) {
  Scenario s;
  s.horizon = 10;
  s.apps.resize(4);
  EXPECT_THROW(analyticEnergy(s), std::invalid_argument);
  s.apps.resize(1);
  s.defrag_time = 5;
  EXPECT_THROW(analyticEnergy(s), std::invalid_argument);
}

} // namespace edgesim::oracle
