#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "dercoord/grid.hpp"

namespace dercoord {

/// Raised when a grid file cannot be read or parsed. The message names the
/// offending file line or element.
class GridFileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// JSON grid in SI units:
///   { "base_power_va", "base_voltage_v", "slack_voltage_pu",
///     "buses": [{"id", "kind", "household", "vmin_pu", "vmax_pu"}],
///     "lines": [{"from", "to", "r_ohm", "x_ohm", "i_max_a"}] }
/// Lines are reoriented away from the slack; the result is not validated.
Grid parse_grid_json(const std::string& text);
Grid load_grid_json(const std::filesystem::path& path);

/// CSV grid, one line per row: from,to,r_ohm,x_ohm,i_max_a (a header row is
/// accepted). Bus 0 is the slack, every other bus is a household bus whose
/// household id is its position among the non-slack buses.
Grid parse_grid_csv(const std::string& text, const PerUnitBase& base = {});
Grid load_grid_csv(const std::filesystem::path& path, const PerUnitBase& base = {});

/// Dispatches on extension (.csv, otherwise JSON).
Grid load_grid(const std::filesystem::path& path);

std::string grid_to_json(const Grid& grid);

}  // namespace dercoord
