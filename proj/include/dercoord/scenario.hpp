#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "dercoord/der.hpp"
#include "dercoord/grid.hpp"
#include "dercoord/operation.hpp"

namespace dercoord {

enum class FeederTemplate { chain, star, acceptance, custom };

std::string to_string(FeederTemplate feeder);
FeederTemplate feeder_from_string(const std::string& name);

/// Synthetic winter-day generator settings. Slot indices count from
/// `start_hour`; the defaults put slot 40 at 18:00.
struct ScenarioConfig {
  std::uint64_t seed = 1;
  int n_households = 10;
  int slots = 96;
  double dt_hours = 0.25;
  double start_hour = 8.0;

  double ev_arrival_mean = 40.0;  // slots
  double ev_arrival_std = 6.0;    // slots
  double ev_daily_energy = 7.5;   // kWh into the battery
  double ev_charger_kw = 230.0 * 16.0 / 1000.0;
  double ev_efficiency = 0.9;

  double pv_rating = 4.5;          // kW
  double pv_winter_peak = 0.25;    // fraction of rating at solar noon
  double base_load_peak = 1.2;     // kW, evening
  double base_load_pf = 0.95;
  double hp_p_max = 3.0;           // kW electrical
  double hp_peak = 2.4;            // kW electrical, evening set point
  double cop = 3.0;
  double tank_band = 5.0;

  FeederTemplate feeder = FeederTemplate::acceptance;
  std::string grid_file;      // custom feeder
  std::string profile_file;   // optional profile CSV replacing the synthetic shapes
  double line_r_ohm = 0.05;   // chain and star templates, per segment
  double line_x_ohm = 0.02;
  double line_i_max_a = 200.0;
};

/// Scenario files that cannot be read or do not fit together.
class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Scenario {
  ScenarioConfig config;
  Grid grid;
  std::vector<HouseholdParams> params;  // by household id
  Schedule schedule;                    // [slot][household]
  std::vector<HouseholdState> initial;
};

/// Preset used by the acceptance runs: the 13-bus acceptance feeder with ten
/// households and default profile settings.
ScenarioConfig acceptance_config();

/// slack 0 -> junction 1, then households 2..6 in series on one branch and
/// junction 7 feeding households 8..12 in series on the other.
Grid acceptance_feeder();
Grid chain_feeder(int households, double r_ohm, double x_ohm, double i_max_a);
Grid star_feeder(int households, double r_ohm, double x_ohm, double i_max_a);

/// Arrival slot: round(N(mean, std)) clamped to [0, slots - 1].
int draw_arrival(std::uint64_t seed, int household, double mean, double std_dev, int slots);

/// Charger maximum from `arrival` until `grid_energy` kWh are drawn, the
/// last slot partial.
std::vector<double> uncontrolled_charging(int slots, int arrival, double grid_energy, double charger_kw,
                                          double dt_hours);

Scenario generate(const ScenarioConfig& config);

/// Profile CSV, header `slot,household_id,p_load_kw,q_load_kvar,p_pv_kw,p_ev_kw,p_hp_kw`.
std::string profiles_to_csv(const Schedule& schedule);
Schedule parse_profiles_csv(const std::string& text, int households, int slots);

std::string config_to_json(const ScenarioConfig& config);
ScenarioConfig config_from_json(const std::string& text);

/// Household parameters keyed by bus id.
std::string households_to_json(const Grid& grid, const std::vector<HouseholdParams>& params);
std::vector<HouseholdParams> households_from_json(const Grid& grid, const std::string& text);

/// Bundle layout: scenario.json, grid.json, households.json, profiles.csv.
void save_scenario(const Scenario& scenario, const std::filesystem::path& dir);
Scenario load_scenario(const std::filesystem::path& dir);

}  // namespace dercoord
