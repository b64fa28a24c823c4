#pragma once

#include "dercoord/grid.hpp"

namespace dercoord::fx {

inline Bus household_bus(int id, int household) {
  Bus bus;
  bus.id = id;
  bus.kind = BusKind::household;
  bus.household = household;
  return bus;
}

inline Bus slack_bus() {
  Bus bus;
  bus.kind = BusKind::slack;
  return bus;
}

/// slack -> household 0 over one line.
inline Grid two_bus(double r, double x, double l_max = 10.0) {
  Grid grid;
  grid.buses = {slack_bus(), household_bus(1, 0)};
  grid.lines = {{0, 1, r, x, l_max}};
  return grid;
}

/// slack -> 1 -> 2 -> ... -> n, every non-slack bus a household.
inline Grid chain(int households, double r, double x, double l_max = 10.0) {
  Grid grid;
  grid.buses.push_back(slack_bus());
  for (int i = 1; i <= households; ++i) {
    grid.buses.push_back(household_bus(i, i - 1));
    grid.lines.push_back({i - 1, i, r, x, l_max});
  }
  return grid;
}

/// slack -> junction 1 -> {2, ..., households + 1}.
inline Grid star(int households, double r, double x, double l_max = 10.0) {
  Grid grid;
  grid.buses.push_back(slack_bus());
  Bus junction;
  junction.id = 1;
  grid.buses.push_back(junction);
  grid.lines.push_back({0, 1, r, x, l_max});
  for (int i = 0; i < households; ++i) {
    grid.buses.push_back(household_bus(i + 2, i));
    grid.lines.push_back({1, i + 2, r, x, l_max});
  }
  return grid;
}

}  // namespace dercoord::fx
