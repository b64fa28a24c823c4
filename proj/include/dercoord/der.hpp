#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dercoord {

/// Static device parameters of one household. Powers in kW/kVA, energy in kWh.
struct HouseholdParams {
  double pv_rating = 4.5;
  double pv_tan_phi = 0.4843;
  double ev_rating = 3.68;
  double ev_tan_phi = 0.4843;
  double ev_capacity = 7.5;
  double ev_charger_p_max = 3.68;
  double ev_efficiency = 0.9;
  double hp_p_max = 3.0;
  double hp_tan_phi = 0.3287;
  double tank_volume = 1000.0;  // liters
  double tank_band = 5.0;       // degC, symmetric
  int ev_arrival_slot = 0;
  int ev_departure_slot = 96;
};

/// Dynamic per-household state at a slot boundary.
struct HouseholdState {
  double ev_soc = 0.0;
  bool ev_present = false;
  int ev_departure_slot = 96;
  double tank_dT = 0.0;               // degC from reference
  double pending_hp_deviation = 0.0;  // kWh, scheduled minus consumed
};

/// Intended demand of one household for one slot.
struct DeviceSchedule {
  double p_load = 0.0;
  double q_load = 0.0;
  double p_pv_fore = 0.0;
  double p_ev_max = 0.0;
  double p_hp_set = 0.0;
};

using ScheduleSlot = std::vector<DeviceSchedule>;

/// Cost terms in EUR/MWh.
struct HouseholdCosts {
  double c_pv = 200.0;
  double c_ev = 0.0;
  double c_hp_up = 10.0;
  double c_hp_down = 10.0;
};

struct CostTerms {
  double c_loss = 32.0;
  std::vector<HouseholdCosts> households;
};

/// Coefficients of the urgency-based cost model.
struct CostModel {
  double c_loss = 32.0;
  double c_pv = 200.0;
  double c0 = 1440.0;
  int t_max = 96;
  double hp_slope = 150.0;
  double hp_floor = 10.0;
};

/// c0 (1 - soc) / (t_max - t + 1). `t` is the 1-based slot index.
double ev_cost(double soc, int t, int t_max, double c0);

/// (c_up, c_down) from the tank deviation normalized by its band.
std::pair<double, double> hp_costs(double tank_dT, double band, double slope = 150.0,
                                   double floor = 10.0);

/// Cost terms for every household at 0-based slot `slot`. Absent EVs cost 0.
CostTerms cost_terms(const std::vector<HouseholdState>& states,
                     const std::vector<HouseholdParams>& params, int slot, const CostModel& model);

HouseholdState step_ev(const HouseholdState& state, const HouseholdParams& params, double p_ev,
                       double dt);

/// Water tank heat capacity per liter, kJ/(L K) (rho = 1 kg/L, c_p = 4.186 kJ/(kg K)).
inline constexpr double kTankHeatCapacity = 4.186;

/// Lumped tank model: following the set profile holds the temperature, any
/// deviation is integrated with the heat pump COP.
HouseholdState step_tank(const HouseholdState& state, const HouseholdParams& params, double p_hp,
                         double p_hp_set, double dt, double cop);

/// Tank size for a peak heating demand in kW: 1000 L up to 5 kW, then 200 L per kW.
double tank_volume_for(double heat_demand_peak);

/// Grid energy still needed to fill the battery, kWh.
double ev_energy_to_full(const HouseholdState& state, const HouseholdParams& params);

/// Tank deviation (degC) per kWh of electrical heat-pump energy.
double tank_degrees_per_kwh(const HouseholdParams& params, double cop);

/// Device-level invariant breaches of the parameter set, empty when valid.
std::vector<std::string> validate(const HouseholdParams& params);

/// tan(acos(pf)).
inline double tan_phi_from_power_factor(double pf) {
  return std::tan(std::acos(pf));
}

}  // namespace dercoord
