#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "dercoord/der.hpp"
#include "dercoord/grid.hpp"
#include "dercoord/operation.hpp"

namespace dercoord {

class ReportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CurtailedEnergy {
  double ev = 0.0;       // kWh not charged in the slot it was scheduled
  double pv = 0.0;       // kWh
  double hp_down = 0.0;  // kWh
  double hp_up = 0.0;    // kWh consumed above the schedule
};

/// Run statistics. Grid quantities come from the power-flow result of each
/// record; voltages in pu, loadings in percent of ampacity.
struct RunSummary {
  std::string mode;
  int slots = 0;
  std::vector<double> slot_min_voltage, slot_max_voltage, slot_max_loading;
  double min_voltage_pu = 0.0;
  double max_voltage_pu = 0.0;
  double max_loading_percent = 0.0;

  int coordinated_slots = 0;
  int unresolved_slots = 0;
  int detected_violation_slots = 0;  // before coordination
  int violation_slots = 0;           // in the applied flow
  int under_voltage_slots = 0;
  int over_voltage_slots = 0;
  int overload_slots = 0;

  CurtailedEnergy curtailed;
  double ev_grid_energy_kwh = 0.0;
  int ev_count = 0;
  double ev_satisfaction = 1.0;    // fraction full (within 1e-6) at departure
  double min_departure_soc = 1.0;
  double tank_satisfaction = 1.0;  // fraction never outside the band
  double max_abs_tank_dT = 0.0;

  double max_voltage_discrepancy_pu = 0.0;
  double min_loading_overestimate = 0.0;  // pu^2, l_socp - l_pf
  double median_loading_overestimate = 0.0;
  double max_loading_overestimate = 0.0;
  double min_relaxation_gap = 0.0;

  std::vector<double> voltage_cdf;  // every (slot, non-slack bus), sorted
  std::vector<double> loading_cdf;  // every (slot, line), sorted
  double solver_seconds = 0.0;      // not serialized
};

/// Throws ReportError on an empty record list or on records whose grid state
/// did not come from the power flow.
RunSummary summarize(const Grid& grid, const std::vector<HouseholdParams>& params,
                     const std::vector<SlotRecord>& records, Mode mode, double dt_hours = 0.25);

std::string summary_to_json(const RunSummary& summary);
std::string slots_to_csv(const Grid& grid, const std::vector<SlotRecord>& records);
std::string cdf_to_csv(const std::vector<double>& sorted, const std::string& column);

/// slots.csv, cdf_voltage.csv, cdf_loading.csv and summary.json.
void emit(const RunSummary& summary, const Grid& grid, const std::vector<SlotRecord>& records,
          const std::filesystem::path& out_dir);

/// Key figures of two runs of the same scenario and their differences.
std::string comparison_to_json(const RunSummary& uncontrolled, const RunSummary& coordinated);

/// printf("%.9g").
std::string format_number(double value);

}  // namespace dercoord
