#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "dercoord/scenario.hpp"

using namespace dercoord;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("dercoord_test_" + name);
  fs::remove_all(dir);
  return dir;
}

ScenarioConfig star_config(int households) {
  ScenarioConfig c;
  c.feeder = FeederTemplate::star;
  c.n_households = households;
  c.seed = 99;
  return c;
}

}  // namespace

TEST(Scenario, ZeroSpreadArrivesAtTheMean) {
  for (int j = 0; j < 20; ++j) EXPECT_EQ(draw_arrival(7, j, 40.0, 0.0, 96), 40);
  EXPECT_EQ(draw_arrival(7, 0, 140.0, 0.0, 96), 95);
  EXPECT_EQ(draw_arrival(7, 0, -3.0, 0.0, 96), 0);
}

TEST(Scenario, UncontrolledChargingSpansTenSlots) {
  const auto p = uncontrolled_charging(96, 40, 7.5 / 0.9, 3.68, 0.25);
  const int expected_slots = static_cast<int>(std::ceil(7.5 / (0.9 * 3.68 * 0.25)));
  ASSERT_EQ(expected_slots, 10);
  int active = 0;
  double energy = 0.0;
  for (int t = 0; t < 96; ++t) {
    if (p[t] > 0.0) {
      ++active;
      EXPECT_GE(t, 40);
      EXPECT_LE(p[t], 3.68);
    }
    energy += p[t] * 0.25;
  }
  EXPECT_EQ(active, 10);
  EXPECT_LT(p[49], 3.68);
  EXPECT_NEAR(energy, 7.5 / 0.9, 1e-12);
}

TEST(Scenario, SameSeedGivesIdenticalProfiles) {
  const auto a = generate(acceptance_config());
  const auto b = generate(acceptance_config());
  EXPECT_EQ(profiles_to_csv(a.schedule), profiles_to_csv(b.schedule));
  auto other = acceptance_config();
  other.seed += 1;
  EXPECT_NE(profiles_to_csv(generate(other).schedule), profiles_to_csv(a.schedule));
}

TEST(Scenario, AddingHouseholdsKeepsExistingDraws) {
  const auto small = generate(star_config(3));
  const auto large = generate(star_config(6));
  for (int j = 0; j < 3; ++j) {
    EXPECT_EQ(small.params[j].ev_arrival_slot, large.params[j].ev_arrival_slot);
    for (int t = 0; t < 96; ++t) {
      EXPECT_EQ(small.schedule[t][j].p_load, large.schedule[t][j].p_load);
      EXPECT_EQ(small.schedule[t][j].p_hp_set, large.schedule[t][j].p_hp_set);
      EXPECT_EQ(small.schedule[t][j].p_pv_fore, large.schedule[t][j].p_pv_fore);
    }
  }
}

TEST(Scenario, ProfilesHonorDeviceBoundsAndEnergy) {
  const auto s = generate(acceptance_config());
  ASSERT_EQ(s.schedule.size(), 96u);
  for (std::size_t j = 0; j < s.params.size(); ++j) {
    const auto& par = s.params[j];
    double ev_energy = 0.0;
    for (const auto& slot : s.schedule) {
      const auto& d = slot[j];
      EXPECT_GE(d.p_pv_fore, 0.0);
      EXPECT_GE(d.p_ev_max, 0.0);
      EXPECT_LE(d.p_ev_max, par.ev_charger_p_max);
      EXPECT_GE(d.p_hp_set, 0.0);
      EXPECT_LE(d.p_hp_set, par.hp_p_max);
      ev_energy += d.p_ev_max * 0.25;
    }
    EXPECT_NEAR(ev_energy * par.ev_efficiency, 7.5, 1e-9);
    EXPECT_TRUE(validate(par).empty());
    // PV is dark at night: 22:00 is slot 56
    EXPECT_EQ(s.schedule[56][j].p_pv_fore, 0.0);
  }
}

TEST(Scenario, AcceptanceFeederShape) {
  const Grid g = acceptance_feeder();
  EXPECT_TRUE(validate(g).empty());
  EXPECT_EQ(g.buses.size(), 13u);
  EXPECT_EQ(g.household_count(), 10u);
}

TEST(Scenario, AcceptanceDayViolatesLimitsWhenUncontrolled) {
  const auto s = generate(acceptance_config());
  OperationConfig oc;
  oc.mode = Mode::uncontrolled;
  const auto run = run_horizon(s.grid, s.params, s.initial, s.schedule, oc);
  int under = 0, overload = 0;
  for (const auto& rec : run.records) {
    for (const auto& v : rec.pre_violations) {
      under += v.kind == ViolationKind::under_voltage;
      overload += v.kind == ViolationKind::overload;
    }
  }
  EXPECT_GT(under, 0);
  EXPECT_GT(overload, 0);
}

TEST(Scenario, BundleRoundTrip) {
  const auto dir = scratch_dir("bundle");
  const auto s = generate(acceptance_config());
  save_scenario(s, dir);
  for (const char* f : {"scenario.json", "grid.json", "households.json", "profiles.csv"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  const auto back = load_scenario(dir);
  EXPECT_EQ(back.config.seed, s.config.seed);
  EXPECT_EQ(config_to_json(back.config), config_to_json(s.config));
  ASSERT_EQ(back.params.size(), s.params.size());
  for (std::size_t j = 0; j < s.params.size(); ++j) {
    EXPECT_EQ(back.params[j].ev_arrival_slot, s.params[j].ev_arrival_slot);
    EXPECT_NEAR(back.params[j].tank_volume, s.params[j].tank_volume, 1e-9);
  }
  EXPECT_EQ(profiles_to_csv(back.schedule), profiles_to_csv(s.schedule));
  for (std::size_t e = 0; e < s.grid.lines.size(); ++e) {
    EXPECT_NEAR(back.grid.lines[e].r, s.grid.lines[e].r, 1e-12 * s.grid.lines[e].r);
    EXPECT_NEAR(back.grid.lines[e].l_max, s.grid.lines[e].l_max, 1e-9 * s.grid.lines[e].l_max);
  }
  fs::remove_all(dir);
}

TEST(Scenario, ProfileErrorsNameTheRow) {
  const std::string header = "slot,household_id,p_load_kw,q_load_kvar,p_pv_kw,p_ev_kw,p_hp_kw\n";
  try {
    parse_profiles_csv(header + "0,0,1,0.3,0,0,1\n1,0,1,0.3,0,0\n", 1, 2);
    FAIL();
  } catch (const ScenarioError& e) {
    EXPECT_NE(std::string(e.what()).find("row 3"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("7 columns"), std::string::npos);
  }
  try {
    parse_profiles_csv(header + "0,0,1,0.3,0,0,1\n", 1, 2);
    FAIL();
  } catch (const ScenarioError& e) {
    EXPECT_NE(std::string(e.what()).find("missing slot 1"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_profiles_csv(header + "0,0,1,x,0,0,1\n", 1, 1), ScenarioError);
  EXPECT_THROW(parse_profiles_csv(header + "0,3,1,0,0,0,1\n", 1, 1), ScenarioError);
  EXPECT_THROW(parse_profiles_csv(header + "0,0,1,0,0,-1,1\n", 1, 1), ScenarioError);
}

TEST(Scenario, ProfileFileDrivesTheSchedule) {
  const auto dir = scratch_dir("profile_file");
  fs::create_directories(dir);
  auto base = generate(star_config(2));
  base.schedule.resize(8);
  for (auto& slot : base.schedule) slot[1].p_ev_max = 0.0;
  for (int t = 0; t < 8; ++t) base.schedule[t][0].p_ev_max = (t == 3 ? 3.0 : t == 4 ? 1.0 : 0.0);
  std::ofstream(dir / "p.csv") << profiles_to_csv(base.schedule);

  auto cfg = star_config(2);
  cfg.slots = 8;
  cfg.profile_file = (dir / "p.csv").string();
  const auto s = generate(cfg);
  EXPECT_EQ(s.params[0].ev_arrival_slot, 3);
  EXPECT_NEAR(s.params[0].ev_capacity, 0.9 * 1.0, 1e-12);
  EXPECT_EQ(s.params[1].ev_charger_p_max, 0.0);
  EXPECT_EQ(s.schedule[3][0].p_ev_max, 3.0);
  fs::remove_all(dir);
}

TEST(Scenario, HouseholdFileErrors) {
  const Grid g = acceptance_feeder();
  EXPECT_THROW(households_from_json(g, R"({"1": {}})"), ScenarioError);  // junction
  EXPECT_THROW(households_from_json(g, R"({"2": {}})"), ScenarioError);  // others missing
  EXPECT_THROW(households_from_json(g, "[1,2"), ScenarioError);
  std::vector<HouseholdParams> params(10);
  params[4].ev_efficiency = 0.8;
  const auto back = households_from_json(g, households_to_json(g, params));
  EXPECT_EQ(back[4].ev_efficiency, 0.8);
}

TEST(Scenario, ConfigValidation) {
  auto c = star_config(3);
  c.ev_arrival_std = -1.0;
  EXPECT_THROW(generate(c), ScenarioError);
  c = star_config(3);
  c.feeder = FeederTemplate::custom;
  EXPECT_THROW(generate(c), ScenarioError);
  c = acceptance_config();
  c.n_households = 4;
  EXPECT_THROW(generate(c), ScenarioError);
  EXPECT_THROW(config_from_json(R"({"feeder": "ring"})"), ScenarioError);
  EXPECT_THROW(config_from_json(R"({"seed": "abc"})"), ScenarioError);
  EXPECT_EQ(config_from_json(R"({"n_households": 4})").n_households, 4);
}
