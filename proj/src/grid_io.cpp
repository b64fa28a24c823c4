#include "dercoord/grid_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace dercoord {

namespace {

using nlohmann::json;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw GridFileError("cannot open grid file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

double required_number(const json& node, const char* key, const std::string& where) {
  if (!node.contains(key) || !node[key].is_number()) {
    throw GridFileError(where + ": missing numeric field '" + key + "'");
  }
  return node[key].get<double>();
}

int required_int(const json& node, const char* key, const std::string& where) {
  if (!node.contains(key) || !node[key].is_number_integer()) {
    throw GridFileError(where + ": missing integer field '" + key + "'");
  }
  return node[key].get<int>();
}

Line line_from_si(int from, int to, double r_ohm, double x_ohm, double i_max_a,
                  const PerUnitBase& base) {
  const double i_pu = base.current_to_pu(i_max_a);
  return Line{from, to, base.impedance_to_pu(r_ohm), base.impedance_to_pu(x_ohm), i_pu * i_pu};
}

}  // namespace

Grid parse_grid_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw GridFileError(std::string("malformed grid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw GridFileError("grid JSON must be an object");

  Grid grid;
  grid.base.power_va = doc.value("base_power_va", grid.base.power_va);
  grid.base.voltage_v = doc.value("base_voltage_v", grid.base.voltage_v);
  const double slack_pu = doc.value("slack_voltage_pu", 1.0);
  grid.slack_v = slack_pu * slack_pu;

  if (!doc.contains("buses") || !doc["buses"].is_array()) {
    throw GridFileError("grid JSON: missing 'buses' array");
  }
  if (!doc.contains("lines") || !doc["lines"].is_array()) {
    throw GridFileError("grid JSON: missing 'lines' array");
  }

  int index = 0;
  for (const auto& node : doc["buses"]) {
    const std::string where = "buses[" + std::to_string(index++) + "]";
    Bus bus;
    bus.id = required_int(node, "id", where);
    const auto kind = bus_kind_from_string(node.value("kind", std::string{}));
    if (!kind) throw GridFileError(where + ": unknown bus kind");
    bus.kind = *kind;
    const double vmin = node.value("vmin_pu", 0.9);
    const double vmax = node.value("vmax_pu", 1.1);
    bus.vmin = vmin * vmin;
    bus.vmax = vmax * vmax;
    if (node.contains("household") && !node["household"].is_null()) {
      bus.household = required_int(node, "household", where);
    }
    grid.buses.push_back(bus);
  }

  index = 0;
  for (const auto& node : doc["lines"]) {
    const std::string where = "lines[" + std::to_string(index++) + "]";
    grid.lines.push_back(line_from_si(required_int(node, "from", where), required_int(node, "to", where),
                                      required_number(node, "r_ohm", where),
                                      required_number(node, "x_ohm", where),
                                      required_number(node, "i_max_a", where), grid.base));
  }
  orient_from_slack(grid);
  return grid;
}

Grid load_grid_json(const std::filesystem::path& path) {
  try {
    return parse_grid_json(read_file(path));
  } catch (const GridFileError& e) {
    throw GridFileError(path.string() + ": " + e.what());
  }
}

Grid parse_grid_csv(const std::string& text, const PerUnitBase& base) {
  Grid grid;
  grid.base = base;
  std::istringstream in(text);
  std::string row;
  int row_number = 0;
  int max_bus = 0;
  while (std::getline(in, row)) {
    ++row_number;
    if (!row.empty() && row.back() == '\r') row.pop_back();
    if (row.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream cells(row);
    std::string cell;
    while (std::getline(cells, cell, ',')) fields.push_back(cell);
    if (row_number == 1 && !fields.empty() && fields[0] == "from") continue;
    if (fields.size() != 5) {
      throw GridFileError("line " + std::to_string(row_number) + ": expected 5 columns, found " +
                          std::to_string(fields.size()));
    }
    try {
      const int from = std::stoi(fields[0]);
      const int to = std::stoi(fields[1]);
      grid.lines.push_back(line_from_si(from, to, std::stod(fields[2]), std::stod(fields[3]),
                                        std::stod(fields[4]), base));
      max_bus = std::max({max_bus, from, to});
    } catch (const std::logic_error&) {
      throw GridFileError("line " + std::to_string(row_number) + ": non-numeric field");
    }
  }
  for (int id = 0; id <= max_bus; ++id) {
    Bus bus;
    bus.id = id;
    bus.kind = id == 0 ? BusKind::slack : BusKind::household;
    if (id > 0) bus.household = id - 1;
    grid.buses.push_back(bus);
  }
  orient_from_slack(grid);
  return grid;
}

Grid load_grid_csv(const std::filesystem::path& path, const PerUnitBase& base) {
  try {
    return parse_grid_csv(read_file(path), base);
  } catch (const GridFileError& e) {
    throw GridFileError(path.string() + ": " + e.what());
  }
}

Grid load_grid(const std::filesystem::path& path) {
  if (path.extension() == ".csv") return load_grid_csv(path);
  return load_grid_json(path);
}

std::string grid_to_json(const Grid& grid) {
  json doc;
  doc["base_power_va"] = grid.base.power_va;
  doc["base_voltage_v"] = grid.base.voltage_v;
  doc["slack_voltage_pu"] = std::sqrt(grid.slack_v);
  doc["buses"] = json::array();
  for (const auto& bus : grid.buses) {
    json node{{"id", bus.id},
              {"kind", to_string(bus.kind)},
              {"vmin_pu", std::sqrt(bus.vmin)},
              {"vmax_pu", std::sqrt(bus.vmax)}};
    node["household"] = bus.household ? json(*bus.household) : json(nullptr);
    doc["buses"].push_back(node);
  }
  doc["lines"] = json::array();
  for (const auto& line : grid.lines) {
    doc["lines"].push_back({{"from", line.from_bus},
                            {"to", line.to_bus},
                            {"r_ohm", grid.base.impedance_to_si(line.r)},
                            {"x_ohm", grid.base.impedance_to_si(line.x)},
                            {"i_max_a", grid.base.current_to_si(std::sqrt(line.l_max))}});
  }
  return doc.dump(2) + "\n";
}

}  // namespace dercoord
