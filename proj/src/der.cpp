#include "dercoord/der.hpp"

#include <algorithm>
#include <string>

namespace dercoord {

double ev_cost(double soc, int t, int t_max, double c0) {
  if (t < 1 || t > t_max) {
    throw std::domain_error("ev_cost: slot " + std::to_string(t) + " outside [1, " +
                            std::to_string(t_max) + "]");
  }
  if (soc < 0.0 || soc > 1.0) throw std::domain_error("ev_cost: soc outside [0, 1]");
  return c0 * (1.0 - soc) / static_cast<double>(t_max - t + 1);
}

std::pair<double, double> hp_costs(double tank_dT, double band, double slope, double floor) {
  if (!(band > 0.0)) throw std::domain_error("hp_costs: band must be positive");
  const double normalized = tank_dT / band;
  return {std::max(floor, slope * normalized), std::max(floor, -slope * normalized)};
}

CostTerms cost_terms(const std::vector<HouseholdState>& states,
                     const std::vector<HouseholdParams>& params, int slot, const CostModel& model) {
  if (states.size() != params.size()) throw std::invalid_argument("cost_terms: size mismatch");
  CostTerms out;
  out.c_loss = model.c_loss;
  out.households.reserve(states.size());
  for (std::size_t j = 0; j < states.size(); ++j) {
    HouseholdCosts c;
    c.c_pv = model.c_pv;
    c.c_ev = states[j].ev_present ? ev_cost(states[j].ev_soc, slot + 1, model.t_max, model.c0) : 0.0;
    std::tie(c.c_hp_up, c.c_hp_down) =
        hp_costs(states[j].tank_dT, params[j].tank_band, model.hp_slope, model.hp_floor);
    out.households.push_back(c);
  }
  return out;
}

HouseholdState step_ev(const HouseholdState& state, const HouseholdParams& params, double p_ev,
                       double dt) {
  if (p_ev < 0.0 || p_ev > params.ev_charger_p_max + 1e-9) {
    throw std::domain_error("step_ev: charging power outside charger range");
  }
  if (p_ev == 0.0) return state;
  if (!state.ev_present) throw std::logic_error("step_ev: charging an absent EV");
  HouseholdState next = state;
  next.ev_soc = std::min(1.0, state.ev_soc + params.ev_efficiency * p_ev * dt / params.ev_capacity);
  return next;
}

double tank_degrees_per_kwh(const HouseholdParams& params, double cop) {
  return cop * 3600.0 / (params.tank_volume * kTankHeatCapacity);
}

HouseholdState step_tank(const HouseholdState& state, const HouseholdParams& params, double p_hp,
                         double p_hp_set, double dt, double cop) {
  HouseholdState next = state;
  next.tank_dT = state.tank_dT + tank_degrees_per_kwh(params, cop) * (p_hp - p_hp_set) * dt;
  next.pending_hp_deviation = state.pending_hp_deviation + (p_hp_set - p_hp) * dt;
  return next;
}

double tank_volume_for(double heat_demand_peak) {
  if (heat_demand_peak < 0.0) throw std::domain_error("tank_volume_for: negative demand");
  if (heat_demand_peak <= 5.0) return 1000.0;
  return 1000.0 + 200.0 * (heat_demand_peak - 5.0);
}

double ev_energy_to_full(const HouseholdState& state, const HouseholdParams& params) {
  if (params.ev_efficiency <= 0.0) return 0.0;
  return std::max(0.0, 1.0 - state.ev_soc) * params.ev_capacity / params.ev_efficiency;
}

std::vector<std::string> validate(const HouseholdParams& params) {
  std::vector<std::string> out;
  const double ratings[] = {params.pv_rating, params.ev_rating, params.ev_capacity,
                            params.ev_charger_p_max, params.hp_p_max};
  if (std::any_of(std::begin(ratings), std::end(ratings), [](double r) { return r < 0.0; })) {
    out.emplace_back("negative device rating");
  }
  if (params.pv_tan_phi < 0.0 || params.ev_tan_phi < 0.0 || params.hp_tan_phi < 0.0) {
    out.emplace_back("negative power-factor limit");
  }
  if (!(params.ev_efficiency > 0.0 && params.ev_efficiency <= 1.0)) {
    out.emplace_back("ev_efficiency outside (0, 1]");
  }
  if (!(params.tank_volume > 0.0)) out.emplace_back("tank_volume must be positive");
  if (!(params.tank_band > 0.0)) out.emplace_back("tank_band must be positive");
  if (params.ev_departure_slot < params.ev_arrival_slot) {
    out.emplace_back("EV departs before it arrives");
  }
  return out;
}

}  // namespace dercoord
