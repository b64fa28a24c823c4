#pragma once

#include <Eigen/Core>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dercoord/grid.hpp"

namespace dercoord {

/// Net injection into the grid at a bus, per unit (positive = generation).
struct Injection {
  int bus = 0;
  double p = 0.0;
  double q = 0.0;
};

/// Converged branch-flow state. Line quantities are indexed like Grid::lines
/// and are sending-end values.
struct PowerFlowResult {
  Eigen::VectorXd v;  // pu^2 per bus
  Eigen::VectorXd P;
  Eigen::VectorXd Q;
  Eigen::VectorXd l;  // pu^2 per line
  double losses = 0.0;
  double slack_p = 0.0;
  double slack_q = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct PowerFlowOptions {
  double tolerance = 1e-10;
  int max_iterations = 100;
};

/// Voltage-squared dropped to zero or below during the sweep.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Backward/forward sweep on a radial grid. Buses without an entry in
/// `injections` inject nothing; the slack bus must not appear.
PowerFlowResult solve_power_flow(const Grid& grid, std::span<const Injection> injections,
                                 const PowerFlowOptions& options = {});

/// Same, with dense per-bus injection vectors (slack entries must be zero).
PowerFlowResult solve_power_flow(const Grid& grid, const Eigen::VectorXd& p,
                                 const Eigen::VectorXd& q, const PowerFlowOptions& options = {});

enum class ViolationKind { under_voltage, over_voltage, overload };

/// `element` is a bus id for voltage violations and a line index for
/// overloads. `magnitude` is |V| in pu or the loading in percent.
struct Violation {
  ViolationKind kind = ViolationKind::under_voltage;
  int element = 0;
  double magnitude = 0.0;
};

std::vector<Violation> check_limits(const Grid& grid, const PowerFlowResult& result);

/// Loading in percent of ampacity, sqrt(l / l_max) * 100.
double loading_percent(const Line& line, double l);

std::string describe(const Grid& grid, const Violation& violation);
std::string to_string(ViolationKind kind);

}  // namespace dercoord
