#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace dercoord {

enum class BusKind { slack, junction, household };

/// Bus of a radial feeder. Voltage bounds are squared magnitudes (pu^2).
struct Bus {
  int id = 0;
  BusKind kind = BusKind::junction;
  double vmin = 0.81;
  double vmax = 1.21;
  std::optional<int> household;
};

/// Line directed away from the slack. Impedance in pu, l_max is the squared
/// per-unit ampacity.
struct Line {
  int from_bus = 0;
  int to_bus = 0;
  double r = 0.0;
  double x = 0.0;
  double l_max = 1.0;
};

/// Base quantities of the per-unit system. Powers are three-phase totals,
/// voltages line-to-line.
struct PerUnitBase {
  double power_va = 100e3;
  double voltage_v = 400.0;

  double impedance_ohm() const { return voltage_v * voltage_v / power_va; }
  double current_a() const;

  double impedance_to_pu(double ohm) const { return ohm / impedance_ohm(); }
  double impedance_to_si(double pu) const { return pu * impedance_ohm(); }
  double current_to_pu(double amp) const { return amp / current_a(); }
  double current_to_si(double pu) const { return pu * current_a(); }
  double power_to_pu(double kw) const { return kw * 1e3 / power_va; }
  double power_to_kw(double pu) const { return pu * power_va / 1e3; }
};

struct Grid {
  std::vector<Bus> buses;
  std::vector<Line> lines;
  PerUnitBase base;
  double slack_v = 1.0;

  int slack_bus() const;
  /// Household buses ordered by household id.
  std::vector<int> household_buses() const;
  int household_count() const;
};

class TopologyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parent/child relations of a validated radial grid.
struct Topology {
  std::vector<int> parent_line;               // per bus, -1 for the slack
  std::vector<std::vector<int>> child_lines;  // per bus
  std::vector<int> leaf_to_root;              // line indices, leaves first
};

/// Returns every invariant breach of the grid; empty iff the grid is valid.
std::vector<std::string> validate(const Grid& grid);

/// Lines ordered so that each line comes after every line of its subtree.
/// Throws TopologyError on cycles or disconnected buses.
std::vector<int> downstream_order(const Grid& grid);

Topology analyze(const Grid& grid);

/// Flips lines so that every line points away from the slack bus. Lines
/// that cannot be reached from the slack are left untouched.
void orient_from_slack(Grid& grid);

std::string to_string(BusKind kind);
std::optional<BusKind> bus_kind_from_string(const std::string& name);

}  // namespace dercoord
