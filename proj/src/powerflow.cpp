#include "dercoord/powerflow.hpp"

#include <cmath>
#include <cstdio>

namespace dercoord {

PowerFlowResult solve_power_flow(const Grid& grid, std::span<const Injection> injections,
                                 const PowerFlowOptions& options) {
  const auto n = static_cast<Eigen::Index>(grid.buses.size());
  const int slack = grid.slack_bus();
  Eigen::VectorXd p = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd q = Eigen::VectorXd::Zero(n);
  std::vector<bool> given(n, false);
  for (const auto& inj : injections) {
    if (inj.bus < 0 || inj.bus >= n) {
      throw std::invalid_argument("injection at unknown bus " + std::to_string(inj.bus));
    }
    if (inj.bus == slack) throw std::invalid_argument("the slack bus takes no specified injection");
    if (given[inj.bus]) {
      throw std::invalid_argument("duplicate injection at bus " + std::to_string(inj.bus));
    }
    if (!std::isfinite(inj.p) || !std::isfinite(inj.q)) {
      throw std::invalid_argument("non-finite injection at bus " + std::to_string(inj.bus));
    }
    given[inj.bus] = true;
    p[inj.bus] = inj.p;
    q[inj.bus] = inj.q;
  }
  return solve_power_flow(grid, p, q, options);
}

PowerFlowResult solve_power_flow(const Grid& grid, const Eigen::VectorXd& p,
                                 const Eigen::VectorXd& q, const PowerFlowOptions& options) {
  const Topology topo = analyze(grid);
  const auto n = static_cast<Eigen::Index>(grid.buses.size());
  const auto m = static_cast<Eigen::Index>(grid.lines.size());
  const int slack = grid.slack_bus();
  if (p.size() != n || q.size() != n) throw std::invalid_argument("injection vector size mismatch");
  if (p[slack] != 0.0 || q[slack] != 0.0) {
    throw std::invalid_argument("the slack bus takes no specified injection");
  }

  PowerFlowResult res;
  res.v = Eigen::VectorXd::Constant(n, grid.slack_v);
  res.P = Eigen::VectorXd::Zero(m);
  res.Q = Eigen::VectorXd::Zero(m);
  res.l = Eigen::VectorXd::Zero(m);

  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    res.iterations = iter;

    // Backward: sending-end flows with the current loss estimate.
    for (int k : topo.leaf_to_root) {
      const Line& line = grid.lines[k];
      double P = -p[line.to_bus] + line.r * res.l[k];
      double Q = -q[line.to_bus] + line.x * res.l[k];
      for (int c : topo.child_lines[line.to_bus]) {
        P += res.P[c];
        Q += res.Q[c];
      }
      res.P[k] = P;
      res.Q[k] = Q;
    }

    // Forward: voltages from the slack outwards.
    double max_dv = 0.0;
    for (auto it = topo.leaf_to_root.rbegin(); it != topo.leaf_to_root.rend(); ++it) {
      const Line& line = grid.lines[*it];
      const double z2 = line.r * line.r + line.x * line.x;
      const double v = res.v[line.from_bus] - 2.0 * (line.r * res.P[*it] + line.x * res.Q[*it]) +
                       z2 * res.l[*it];
      if (!(v > 0.0)) {
        throw DivergenceError("voltage collapse at bus " + std::to_string(line.to_bus) +
                              " (load exceeds feeder capability)");
      }
      max_dv = std::max(max_dv, std::abs(v - res.v[line.to_bus]));
      res.v[line.to_bus] = v;
    }

    double max_dl = 0.0;
    for (Eigen::Index k = 0; k < m; ++k) {
      const Line& line = grid.lines[k];
      const double l = (res.P[k] * res.P[k] + res.Q[k] * res.Q[k]) / res.v[line.from_bus];
      max_dl = std::max(max_dl, std::abs(l - res.l[k]));
      res.l[k] = l;
    }

    if (max_dv < options.tolerance && max_dl < options.tolerance) {
      res.converged = true;
      break;
    }
  }

  // Flows consistent with the final current estimate.
  for (int k : topo.leaf_to_root) {
    const Line& line = grid.lines[k];
    double P = -p[line.to_bus] + line.r * res.l[k];
    double Q = -q[line.to_bus] + line.x * res.l[k];
    for (int c : topo.child_lines[line.to_bus]) {
      P += res.P[c];
      Q += res.Q[c];
    }
    res.P[k] = P;
    res.Q[k] = Q;
  }

  res.losses = 0.0;
  for (Eigen::Index k = 0; k < m; ++k) res.losses += grid.lines[k].r * res.l[k];
  res.slack_p = 0.0;
  res.slack_q = 0.0;
  for (int k : topo.child_lines[slack]) {
    res.slack_p += res.P[k];
    res.slack_q += res.Q[k];
  }
  return res;
}

double loading_percent(const Line& line, double l) {
  return std::sqrt(std::max(l, 0.0) / line.l_max) * 100.0;
}

std::vector<Violation> check_limits(const Grid& grid, const PowerFlowResult& result) {
  if (!result.converged) throw std::invalid_argument("check_limits requires a converged power flow");
  std::vector<Violation> out;
  for (const auto& bus : grid.buses) {
    if (bus.kind == BusKind::slack) continue;
    const double v = result.v[bus.id];
    if (v < bus.vmin) out.push_back({ViolationKind::under_voltage, bus.id, std::sqrt(v)});
    if (v > bus.vmax) out.push_back({ViolationKind::over_voltage, bus.id, std::sqrt(v)});
  }
  for (std::size_t k = 0; k < grid.lines.size(); ++k) {
    const double l = result.l[static_cast<Eigen::Index>(k)];
    if (l > grid.lines[k].l_max) {
      out.push_back({ViolationKind::overload, static_cast<int>(k), loading_percent(grid.lines[k], l)});
    }
  }
  return out;
}

std::string to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::under_voltage: return "under-voltage";
    case ViolationKind::over_voltage: return "over-voltage";
    case ViolationKind::overload: return "overload";
  }
  return "unknown";
}

std::string describe(const Grid& grid, const Violation& violation) {
  char buf[128];
  if (violation.kind == ViolationKind::overload) {
    const Line& line = grid.lines.at(violation.element);
    std::snprintf(buf, sizeof buf, "overload on line (%d,%d), %.1f%%", line.from_bus, line.to_bus,
                  violation.magnitude);
  } else {
    std::snprintf(buf, sizeof buf, "%s at bus %d, %.4f pu", to_string(violation.kind).c_str(),
                  violation.element, violation.magnitude);
  }
  return buf;
}

}  // namespace dercoord
