#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <vector>

#include "dercoord/conic.hpp"
#include "dercoord/der.hpp"
#include "dercoord/grid.hpp"

namespace dercoord {

/// One-step DER coordination instance. Households are indexed by household
/// id and map onto Grid::household_buses().
struct CoordinationProblem {
  const Grid& grid;
  ScheduleSlot schedule;
  CostTerms costs;
  std::vector<HouseholdParams> params;
  double dt_hours = 0.25;
  double voltage_margin = 1e-6;  // pu^2 kept inside [vmin, vmax]
  double loading_margin = 1e-6;  // fraction of l_max kept free
};

class BuildError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Index of each model quantity in the conic program, -1 when the quantity
/// is a constant for this slot (absent or zero-rated device, slack voltage).
struct HouseholdVars {
  Eigen::Index p = -1, q = -1;
  Eigen::Index p_pv = -1, q_pv = -1, pv_down = -1;
  Eigen::Index p_ev = -1, q_ev = -1, ev_down = -1;
  Eigen::Index p_hp = -1, q_hp = -1, hp_up = -1, hp_down = -1;
};

struct NetworkVars {
  std::vector<Eigen::Index> v;  // per bus
  std::vector<Eigen::Index> P, Q, l;  // per line
};

struct CoordinationProgram {
  conic::ConicProgram<double> program;
  std::vector<HouseholdVars> households;
  NetworkVars network;
  /// EUR per (pu power over one slot) per (EUR/MWh): base_power[MW] * dt[h].
  double euro_per_pu_slot = 0.0;
  /// Cost of deviations forced by zero-rated devices, EUR.
  double constant_cost = 0.0;
  std::size_t second_order_cones = 0;
};

struct HouseholdSetpoint {
  double p_ev = 0.0, p_hp = 0.0, p_pv = 0.0;  // kW
  double q_ev = 0.0, q_pv = 0.0, q_hp = 0.0;  // kvar
  double ev_down = 0.0, pv_down = 0.0, hp_up = 0.0, hp_down = 0.0;  // kW
};

/// Objective split in EUR.
struct ObjectiveBreakdown {
  double losses = 0.0;
  double ev = 0.0;
  double pv = 0.0;
  double hp_up = 0.0;
  double hp_down = 0.0;
  double total() const { return losses + ev + pv + hp_up + hp_down; }
};

struct CoordinationResult {
  std::vector<HouseholdSetpoint> households;
  Eigen::VectorXd v, P, Q, l;  // pu, indexed like the grid
  double objective_value = 0.0;  // EUR
  ObjectiveBreakdown breakdown;
  double euro_per_pu_slot = 0.0;
  conic::SolveStatus status = conic::SolveStatus::numerical_limit;
  int iterations = 0;
};

CoordinationProgram build(const CoordinationProblem& problem);

conic::ConicSolution<double> solve(const CoordinationProgram& program,
                                   const conic::SolverSettings& settings = {});

/// Throws std::runtime_error unless the solution is optimal.
CoordinationResult extract(const CoordinationProblem& problem, const CoordinationProgram& program,
                           const conic::ConicSolution<double>& solution);

/// build + solve + extract. Non-optimal solves come back with only `status`
/// and `iterations` set.
CoordinationResult coordinate(const CoordinationProblem& problem,
                              const conic::SolverSettings& settings = {});

/// l * v_sending - (P^2 + Q^2) per line.
Eigen::VectorXd relaxation_gap(const Grid& grid, const CoordinationResult& result);

/// Bus injections (pu) implied by the setpoints, for verification power flows.
void setpoint_injections(const Grid& grid, const ScheduleSlot& schedule,
                         const std::vector<HouseholdSetpoint>& setpoints, Eigen::VectorXd& p,
                         Eigen::VectorXd& q);

/// Setpoints that follow the schedule exactly, with heat pumps at their fixed
/// power factor and no reactive support from PV or EV.
std::vector<HouseholdSetpoint> scheduled_setpoints(const ScheduleSlot& schedule,
                                                   const std::vector<HouseholdParams>& params);

}  // namespace dercoord
