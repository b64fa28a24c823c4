#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

#include "dercoord/conic.hpp"
#include "dercoord/coordination.hpp"
#include "dercoord/der.hpp"
#include "dercoord/grid.hpp"
#include "dercoord/powerflow.hpp"

namespace dercoord {

enum class Mode { uncontrolled, coordinated };

std::string to_string(Mode mode);
Mode mode_from_string(const std::string& name);

/// Slot-major schedule: schedule[t][j] is household j at slot t.
using Schedule = std::vector<ScheduleSlot>;

struct OperationConfig {
  Mode mode = Mode::coordinated;
  double dt_hours = 0.25;
  double cop = 3.0;
  CostModel costs;
  conic::SolverSettings solver;
  PowerFlowOptions power_flow;
  double voltage_margin = 1e-6;
  double loading_margin = 1e-6;
};

/// SOCP state next to the verification power flow of the same setpoints.
struct RelaxationDiagnostics {
  Eigen::VectorXd gap;     // l v - (P^2 + Q^2) per line
  Eigen::VectorXd v_socp;  // pu^2
  Eigen::VectorXd l_socp;  // pu^2
  double max_voltage_discrepancy = 0.0;  // max |sqrt(v_socp) - sqrt(v_pf)|, pu
  double min_loading_overestimate = 0.0;  // min (l_socp - l_pf), pu^2
};

struct SlotRecord {
  int slot = 0;
  ScheduleSlot schedule;  // intended demand after catch-up
  std::vector<Violation> pre_violations;
  std::vector<Violation> post_violations;
  bool coordinated = false;
  bool unresolved = false;
  std::optional<conic::SolveStatus> solver_status;
  double objective = 0.0;  // EUR, coordinated slots only
  ObjectiveBreakdown breakdown;
  std::vector<HouseholdSetpoint> setpoints;  // applied
  std::vector<HouseholdState> states_after;
  PowerFlowResult power_flow;  // of the applied setpoints
  /// Set when `power_flow` was produced by the sweep, which is the only
  /// source the report reads grid states from.
  bool power_flow_verified = false;
  std::optional<RelaxationDiagnostics> relaxation;
  int power_flow_iterations = 0;
  int solver_iterations = 0;
  double solver_seconds = 0.0;
};

/// Thrown by run_horizon when a slot's power flow diverges.
class SlotError : public DivergenceError {
 public:
  SlotError(int slot, const std::string& what);
  int slot() const { return slot_; }

 private:
  int slot_;
};

/// One pass of the operating procedure: power flow on the schedule, limit
/// check, coordination and verification when violated, then device updates.
/// `hp_reference` is the heat-pump consumption the tanks were sized for,
/// which can differ from `schedule` once catch-up has moved demand.
SlotRecord run_slot(const Grid& grid, std::vector<HouseholdState>& states,
                    const std::vector<HouseholdParams>& params, const ScheduleSlot& schedule,
                    const std::vector<double>& hp_reference, int slot, const OperationConfig& config);

struct CatchUpOutcome {
  std::vector<double> ev_unserved_kwh;    // grid energy that no longer fits before departure
  std::vector<double> hp_unrecovered_kwh;  // pending deviation left at horizon end
  bool at_risk() const;
};

/// Rewrites slots [from_slot, end) of `planned` from the states: EVs charge at
/// charger maximum until full, heat pumps follow `original` plus the pending
/// deviation placed earliest-first within [0, hp_p_max]. Idempotent.
CatchUpOutcome catch_up(const std::vector<HouseholdState>& states,
                        const std::vector<HouseholdParams>& params, const Schedule& original,
                        Schedule& planned, int from_slot, double dt_hours);

struct HorizonResult {
  std::vector<SlotRecord> records;
  std::vector<HouseholdState> final_states;
  Schedule planned;
  int catch_up_risk_slots = 0;
};

/// EV presence for slot t: arrival <= t < departure.
void update_presence(std::vector<HouseholdState>& states, const std::vector<HouseholdParams>& params,
                     int slot);

HorizonResult run_horizon(const Grid& grid, const std::vector<HouseholdParams>& params,
                          std::vector<HouseholdState> states, const Schedule& schedule,
                          const OperationConfig& config);

}  // namespace dercoord
