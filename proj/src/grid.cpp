#include "dercoord/grid.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <set>

namespace dercoord {

namespace {

std::string line_name(const Line& line) {
  return "(" + std::to_string(line.from_bus) + "," + std::to_string(line.to_bus) + ")";
}

bool bus_in_range(const Grid& grid, int id) {
  return id >= 0 && id < static_cast<int>(grid.buses.size());
}

}  // namespace

double PerUnitBase::current_a() const {
  return power_va / (std::sqrt(3.0) * voltage_v);
}

int Grid::slack_bus() const {
  for (const auto& bus : buses) {
    if (bus.kind == BusKind::slack) return bus.id;
  }
  throw TopologyError("grid has no slack bus");
}

std::vector<int> Grid::household_buses() const {
  std::map<int, int> by_household;
  for (const auto& bus : buses) {
    if (bus.kind == BusKind::household && bus.household) by_household[*bus.household] = bus.id;
  }
  std::vector<int> out;
  out.reserve(by_household.size());
  for (const auto& [household, bus] : by_household) out.push_back(bus);
  return out;
}

int Grid::household_count() const {
  return static_cast<int>(household_buses().size());
}

std::vector<std::string> validate(const Grid& grid) {
  std::vector<std::string> violations;
  const int n = static_cast<int>(grid.buses.size());

  int slack_count = 0;
  std::set<int> households;
  for (int i = 0; i < n; ++i) {
    const Bus& bus = grid.buses[i];
    if (bus.id != i) {
      violations.push_back("bus at position " + std::to_string(i) + " has id " +
                           std::to_string(bus.id));
    }
    if (bus.kind == BusKind::slack) ++slack_count;
    if (!(bus.vmin > 0.0 && bus.vmin < bus.vmax)) {
      violations.push_back("invalid voltage bounds on bus " + std::to_string(i));
    }
    if (bus.kind == BusKind::household) {
      if (!bus.household) {
        violations.push_back("household bus " + std::to_string(i) + " has no household id");
      } else if (!households.insert(*bus.household).second) {
        violations.push_back("duplicate household id " + std::to_string(*bus.household) +
                             " on bus " + std::to_string(i));
      }
    } else if (bus.household) {
      violations.push_back(to_string(bus.kind) + " bus " + std::to_string(i) +
                           " carries a household id");
    }
  }
  if (slack_count != 1) {
    violations.push_back("expected exactly one slack bus, found " + std::to_string(slack_count));
  }
  if (!(grid.base.power_va > 0.0 && grid.base.voltage_v > 0.0)) {
    violations.push_back("base power and base voltage must be positive");
  }
  if (!(grid.slack_v > 0.0)) violations.push_back("slack voltage must be positive");

  bool lines_ok = true;
  for (const auto& line : grid.lines) {
    if (!bus_in_range(grid, line.from_bus) || !bus_in_range(grid, line.to_bus) ||
        line.from_bus == line.to_bus) {
      violations.push_back("line " + line_name(line) + " references an invalid bus");
      lines_ok = false;
      continue;
    }
    if (line.r < 0.0 || line.x < 0.0) {
      violations.push_back("negative impedance on line " + line_name(line));
    } else if (!(line.r + line.x > 0.0)) {
      violations.push_back("degenerate impedance on line " + line_name(line));
    }
    if (!(line.l_max > 0.0)) violations.push_back("non-positive ampacity on line " + line_name(line));
  }
  if (slack_count != 1 || !lines_ok) return violations;

  // Undirected traversal from the slack; orientation and cycles are checked on the way.
  std::vector<std::vector<int>> incident(n);
  for (int k = 0; k < static_cast<int>(grid.lines.size()); ++k) {
    incident[grid.lines[k].from_bus].push_back(k);
    incident[grid.lines[k].to_bus].push_back(k);
  }
  std::vector<bool> seen(n, false);
  std::vector<bool> used(grid.lines.size(), false);
  std::deque<int> queue{grid.slack_bus()};
  seen[grid.slack_bus()] = true;
  while (!queue.empty()) {
    const int bus = queue.front();
    queue.pop_front();
    for (int k : incident[bus]) {
      if (used[k]) continue;
      used[k] = true;
      const Line& line = grid.lines[k];
      const int other = line.from_bus == bus ? line.to_bus : line.from_bus;
      if (seen[other]) {
        violations.push_back("cycle closed by line " + line_name(line));
        continue;
      }
      if (line.from_bus != bus) {
        violations.push_back("line " + line_name(line) + " is not directed away from the slack");
      }
      seen[other] = true;
      queue.push_back(other);
    }
  }
  for (int i = 0; i < n; ++i) {
    if (!seen[i]) violations.push_back("disconnected bus " + std::to_string(i));
  }
  return violations;
}

Topology analyze(const Grid& grid) {
  const int n = static_cast<int>(grid.buses.size());
  Topology topo;
  topo.parent_line.assign(n, -1);
  topo.child_lines.assign(n, {});
  for (int k = 0; k < static_cast<int>(grid.lines.size()); ++k) {
    const Line& line = grid.lines[k];
    if (topo.parent_line[line.to_bus] != -1) {
      throw TopologyError("bus " + std::to_string(line.to_bus) + " has more than one parent line");
    }
    topo.parent_line[line.to_bus] = k;
    topo.child_lines[line.from_bus].push_back(k);
  }

  const int slack = grid.slack_bus();
  if (topo.parent_line[slack] != -1) throw TopologyError("slack bus has a parent line");

  std::vector<int> root_to_leaf;
  root_to_leaf.reserve(grid.lines.size());
  std::vector<int> stack{slack};
  std::vector<bool> seen(n, false);
  seen[slack] = true;
  while (!stack.empty()) {
    const int bus = stack.back();
    stack.pop_back();
    for (int k : topo.child_lines[bus]) {
      const int child = grid.lines[k].to_bus;
      if (seen[child]) throw TopologyError("cycle detected at bus " + std::to_string(child));
      seen[child] = true;
      root_to_leaf.push_back(k);
      stack.push_back(child);
    }
  }
  if (root_to_leaf.size() != grid.lines.size() ||
      std::find(seen.begin(), seen.end(), false) != seen.end()) {
    throw TopologyError("grid is not a tree rooted at the slack bus");
  }
  topo.leaf_to_root.assign(root_to_leaf.rbegin(), root_to_leaf.rend());
  return topo;
}

std::vector<int> downstream_order(const Grid& grid) {
  return analyze(grid).leaf_to_root;
}

void orient_from_slack(Grid& grid) {
  const int n = static_cast<int>(grid.buses.size());
  int slack = -1;
  for (const auto& bus : grid.buses) {
    if (bus.kind == BusKind::slack) {
      slack = bus.id;
      break;
    }
  }
  if (slack < 0 || slack >= n) return;

  std::vector<std::vector<int>> incident(n);
  for (int k = 0; k < static_cast<int>(grid.lines.size()); ++k) {
    const Line& line = grid.lines[k];
    if (!bus_in_range(grid, line.from_bus) || !bus_in_range(grid, line.to_bus)) continue;
    incident[line.from_bus].push_back(k);
    incident[line.to_bus].push_back(k);
  }
  std::vector<bool> seen(n, false);
  std::vector<bool> used(grid.lines.size(), false);
  std::deque<int> queue{slack};
  seen[slack] = true;
  while (!queue.empty()) {
    const int bus = queue.front();
    queue.pop_front();
    for (int k : incident[bus]) {
      if (used[k]) continue;
      used[k] = true;
      Line& line = grid.lines[k];
      if (line.to_bus == bus) std::swap(line.from_bus, line.to_bus);
      if (!seen[line.to_bus]) {
        seen[line.to_bus] = true;
        queue.push_back(line.to_bus);
      }
    }
  }
}

std::string to_string(BusKind kind) {
  switch (kind) {
    case BusKind::slack: return "slack";
    case BusKind::junction: return "junction";
    case BusKind::household: return "household";
  }
  return "unknown";
}

std::optional<BusKind> bus_kind_from_string(const std::string& name) {
  if (name == "slack") return BusKind::slack;
  if (name == "junction") return BusKind::junction;
  if (name == "household") return BusKind::household;
  return std::nullopt;
}

}  // namespace dercoord
