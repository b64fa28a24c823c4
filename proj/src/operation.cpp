#include "dercoord/operation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace dercoord {

namespace {

// Energies below this (kWh) count as settled.
constexpr double kEnergyEps = 1e-12;

// Moves `amount` kWh into (amount > 0) or out of (amount < 0) the profile
// earliest-first, slot t taking at most up[t] / down[t] kW. Returns the rest.
double place_earliest_first(double amount, std::vector<double*>& slots, const std::vector<double>& up,
                            const std::vector<double>& down, double dt) {
  for (std::size_t i = 0; i < slots.size() && std::abs(amount) > kEnergyEps; ++i) {
    if (amount > 0.0) {
      const double add = std::min(up[i], amount / dt);
      *slots[i] += add;
      amount -= add * dt;
    } else {
      const double cut = std::min(down[i], -amount / dt);
      *slots[i] -= cut;
      amount += cut * dt;
    }
  }
  return std::abs(amount) > kEnergyEps ? amount : 0.0;
}

RelaxationDiagnostics diagnose(const Grid& grid, const CoordinationResult& res,
                               const PowerFlowResult& pf) {
  RelaxationDiagnostics d;
  d.gap = relaxation_gap(grid, res);
  d.v_socp = res.v;
  d.l_socp = res.l;
  d.max_voltage_discrepancy = (res.v.cwiseSqrt() - pf.v.cwiseSqrt()).cwiseAbs().maxCoeff();
  d.min_loading_overestimate = (res.l - pf.l).minCoeff();
  return d;
}

PowerFlowResult verified_flow(const Grid& grid, const ScheduleSlot& schedule,
                              const std::vector<HouseholdSetpoint>& setpoints,
                              const PowerFlowOptions& options) {
  Eigen::VectorXd p, q;
  setpoint_injections(grid, schedule, setpoints, p, q);
  PowerFlowResult pf = solve_power_flow(grid, p, q, options);
  if (!pf.converged) {
    throw DivergenceError("power flow did not converge in " + std::to_string(pf.iterations) +
                          " iterations");
  }
  return pf;
}

bool has_ev(const HouseholdParams& par) {
  return par.ev_capacity > 0.0 && par.ev_charger_p_max > 0.0;
}

}  // namespace

std::string to_string(Mode mode) {
  return mode == Mode::uncontrolled ? "uncontrolled" : "coordinated";
}

Mode mode_from_string(const std::string& name) {
  if (name == "uncontrolled") return Mode::uncontrolled;
  if (name == "coordinated") return Mode::coordinated;
  throw std::invalid_argument("unknown mode '" + name + "' (expected uncontrolled or coordinated)");
}

SlotError::SlotError(int slot, const std::string& what)
    : DivergenceError("slot " + std::to_string(slot) + ": " + what), slot_(slot) {}

SlotRecord run_slot(const Grid& grid, std::vector<HouseholdState>& states,
                    const std::vector<HouseholdParams>& params, const ScheduleSlot& schedule,
                    const std::vector<double>& hp_reference, int slot, const OperationConfig& config) {
  if (states.size() != params.size() || schedule.size() != params.size() ||
      hp_reference.size() != params.size()) {
    throw std::invalid_argument("run_slot: household count mismatch");
  }
  SlotRecord rec;
  rec.slot = slot;
  rec.schedule = schedule;
  rec.setpoints = scheduled_setpoints(schedule, params);
  rec.power_flow = verified_flow(grid, schedule, rec.setpoints, config.power_flow);
  rec.power_flow_iterations = rec.power_flow.iterations;
  rec.pre_violations = check_limits(grid, rec.power_flow);
  rec.post_violations = rec.pre_violations;

  if (config.mode == Mode::coordinated && !rec.pre_violations.empty()) {
    rec.coordinated = true;
    const CoordinationProblem problem{grid,
                                      schedule,
                                      cost_terms(states, params, slot, config.costs),
                                      params,
                                      config.dt_hours,
                                      config.voltage_margin,
                                      config.loading_margin};
    const auto started = std::chrono::steady_clock::now();
    const CoordinationProgram program = build(problem);
    const auto solution = solve(program, config.solver);
    rec.solver_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    rec.solver_status = solution.status;
    rec.solver_iterations = solution.iterations;
    if (solution.status == conic::SolveStatus::optimal) {
      const CoordinationResult res = extract(problem, program, solution);
      rec.setpoints = res.households;
      rec.objective = res.objective_value;
      rec.breakdown = res.breakdown;
      rec.power_flow = verified_flow(grid, schedule, rec.setpoints, config.power_flow);
      rec.power_flow_iterations += rec.power_flow.iterations;
      rec.post_violations = check_limits(grid, rec.power_flow);
      rec.relaxation = diagnose(grid, res, rec.power_flow);
    } else {
      rec.unresolved = true;
    }
  }
  rec.power_flow_verified = true;

  for (std::size_t j = 0; j < states.size(); ++j) {
    const HouseholdSetpoint& sp = rec.setpoints[j];
    states[j] = step_ev(states[j], params[j], sp.p_ev, config.dt_hours);
    states[j] = step_tank(states[j], params[j], sp.p_hp, hp_reference[j], config.dt_hours, config.cop);
  }
  rec.states_after = states;
  return rec;
}

bool CatchUpOutcome::at_risk() const {
  auto positive = [](double e) { return e > kEnergyEps; };
  return std::any_of(ev_unserved_kwh.begin(), ev_unserved_kwh.end(), positive) ||
         std::any_of(hp_unrecovered_kwh.begin(), hp_unrecovered_kwh.end(),
                     [](double e) { return std::abs(e) > kEnergyEps; });
}

CatchUpOutcome catch_up(const std::vector<HouseholdState>& states,
                        const std::vector<HouseholdParams>& params, const Schedule& original,
                        Schedule& planned, int from_slot, double dt_hours) {
  const int horizon = static_cast<int>(original.size());
  if (planned.size() != original.size()) throw std::invalid_argument("catch_up: schedule length mismatch");
  const std::size_t households = params.size();
  CatchUpOutcome out;
  out.ev_unserved_kwh.assign(households, 0.0);
  out.hp_unrecovered_kwh.assign(households, 0.0);

  for (std::size_t j = 0; j < households; ++j) {
    const HouseholdParams& par = params[j];
    for (int t = from_slot; t < horizon; ++t) {
      planned[t][j].p_ev_max = original[t][j].p_ev_max;
      planned[t][j].p_hp_set = original[t][j].p_hp_set;
    }

    if (has_ev(par)) {
      const int first = std::max(from_slot, par.ev_arrival_slot);
      const int last = std::min(horizon, states[j].ev_departure_slot);
      std::vector<double*> slots;
      std::vector<double> up, down;
      double scheduled = 0.0;
      for (int t = std::max(first, from_slot); t < last; ++t) {
        double& p = planned[t][j].p_ev_max;
        scheduled += p * dt_hours;
        slots.push_back(&p);
        up.push_back(std::max(0.0, par.ev_charger_p_max - p));
        down.push_back(p);
      }
      const double needed = ev_energy_to_full(states[j], par);
      double delta = needed - scheduled;
      if (delta < 0.0) {
        // trim surplus from the latest slots
        std::reverse(slots.begin(), slots.end());
        std::reverse(down.begin(), down.end());
        std::reverse(up.begin(), up.end());
      }
      out.ev_unserved_kwh[j] = std::max(0.0, place_earliest_first(delta, slots, up, down, dt_hours));
      for (int t = from_slot; t < std::min(first, horizon); ++t) planned[t][j].p_ev_max = 0.0;
      for (int t = std::max(last, from_slot); t < horizon; ++t) planned[t][j].p_ev_max = 0.0;
    }

    const double pending = states[j].pending_hp_deviation;
    if (std::abs(pending) > kEnergyEps) {
      std::vector<double*> slots;
      std::vector<double> up, down;
      for (int t = from_slot; t < horizon; ++t) {
        double& p = planned[t][j].p_hp_set;
        slots.push_back(&p);
        up.push_back(std::max(0.0, par.hp_p_max - p));
        down.push_back(std::max(0.0, p));
      }
      out.hp_unrecovered_kwh[j] = place_earliest_first(pending, slots, up, down, dt_hours);
    }
  }
  return out;
}

void update_presence(std::vector<HouseholdState>& states, const std::vector<HouseholdParams>& params,
                     int slot) {
  for (std::size_t j = 0; j < states.size(); ++j) {
    states[j].ev_departure_slot = params[j].ev_departure_slot;
    states[j].ev_present =
        has_ev(params[j]) && params[j].ev_arrival_slot <= slot && slot < params[j].ev_departure_slot;
  }
}

HorizonResult run_horizon(const Grid& grid, const std::vector<HouseholdParams>& params,
                          std::vector<HouseholdState> states, const Schedule& schedule,
                          const OperationConfig& config) {
  for (const auto& slot : schedule) {
    if (slot.size() != params.size()) throw std::invalid_argument("run_horizon: household count mismatch");
  }
  HorizonResult out;
  out.planned = schedule;
  out.records.reserve(schedule.size());
  std::vector<double> hp_reference(params.size());
  for (int t = 0; t < static_cast<int>(schedule.size()); ++t) {
    update_presence(states, params, t);
    if (config.mode == Mode::coordinated) {
      if (catch_up(states, params, schedule, out.planned, t, config.dt_hours).at_risk()) {
        ++out.catch_up_risk_slots;
      }
    }
    for (std::size_t j = 0; j < params.size(); ++j) hp_reference[j] = schedule[t][j].p_hp_set;
    try {
      out.records.push_back(run_slot(grid, states, params, out.planned[t], hp_reference, t, config));
    } catch (const DivergenceError& e) {
      throw SlotError(t, e.what());
    }
  }
  out.final_states = std::move(states);
  return out;
}

}  // namespace dercoord
