#include "dercoord/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "dercoord/grid_io.hpp"
#include "json.hpp"

namespace dercoord {

namespace {

using nlohmann::json;

std::mt19937_64 household_rng(std::uint64_t seed, int household) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(household)};
  return std::mt19937_64(seq);
}

int sample_arrival(std::mt19937_64& rng, double mean, double std_dev, int slots) {
  double draw = mean;
  if (std_dev > 0.0) draw = std::normal_distribution<double>(mean, std_dev)(rng);
  return std::clamp(static_cast<int>(std::lround(draw)), 0, slots - 1);
}

// Gaussian bump on the 24 h circle.
double bump(double hour, double center, double width) {
  double d = std::fmod(std::abs(hour - center), 24.0);
  d = std::min(d, 24.0 - d);
  return std::exp(-(d / width) * (d / width));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ScenarioError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ScenarioError("cannot write " + path.string());
  out << text;
  if (!out) throw ScenarioError("failed writing " + path.string());
}

std::string fmt(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", value);
  return buf;
}

Line line_si(const PerUnitBase& base, int from, int to, double r_ohm, double x_ohm, double i_max_a) {
  const double i = base.current_to_pu(i_max_a);
  return {from, to, base.impedance_to_pu(r_ohm), base.impedance_to_pu(x_ohm), i * i};
}

Bus make_bus(int id, BusKind kind, std::optional<int> household = std::nullopt) {
  Bus b;
  b.id = id;
  b.kind = kind;
  b.household = household;
  return b;
}

void check_config(const ScenarioConfig& c) {
  if (c.n_households < 1) throw ScenarioError("n_households must be positive");
  if (c.slots < 1) throw ScenarioError("slots must be positive");
  if (!(c.dt_hours > 0.0)) throw ScenarioError("dt_hours must be positive");
  if (c.ev_arrival_std < 0.0) throw ScenarioError("ev_arrival_std must be nonnegative");
  if (!(c.ev_efficiency > 0.0 && c.ev_efficiency <= 1.0)) throw ScenarioError("ev_efficiency outside (0, 1]");
  if (c.ev_daily_energy < 0.0 || c.ev_charger_kw < 0.0 || c.pv_rating < 0.0 || c.hp_p_max < 0.0 ||
      c.hp_peak < 0.0 || c.base_load_peak < 0.0) {
    throw ScenarioError("negative rating in scenario config");
  }
  if (!(c.cop > 0.0) || !(c.tank_band > 0.0)) throw ScenarioError("cop and tank_band must be positive");
}

}  // namespace

std::string to_string(FeederTemplate feeder) {
  switch (feeder) {
    case FeederTemplate::chain: return "chain";
    case FeederTemplate::star: return "star";
    case FeederTemplate::acceptance: return "acceptance";
    case FeederTemplate::custom: return "custom";
  }
  return "custom";
}

FeederTemplate feeder_from_string(const std::string& name) {
  if (name == "chain") return FeederTemplate::chain;
  if (name == "star") return FeederTemplate::star;
  if (name == "acceptance") return FeederTemplate::acceptance;
  if (name == "custom") return FeederTemplate::custom;
  throw ScenarioError("unknown feeder template '" + name + "'");
}

ScenarioConfig acceptance_config() {
  ScenarioConfig c;
  c.seed = 20240601;
  c.n_households = 10;
  c.feeder = FeederTemplate::acceptance;
  return c;
}

Grid acceptance_feeder() {
  Grid g;
  const PerUnitBase& base = g.base;
  g.buses.push_back(make_bus(0, BusKind::slack));
  g.buses.push_back(make_bus(1, BusKind::junction));
  for (int i = 2; i <= 6; ++i) g.buses.push_back(make_bus(i, BusKind::household, i - 2));
  g.buses.push_back(make_bus(7, BusKind::junction));
  for (int i = 8; i <= 12; ++i) g.buses.push_back(make_bus(i, BusKind::household, i - 3));

  g.lines.push_back(line_si(base, 0, 1, 0.010, 0.008, 80.0));
  // long weak branch: households 0..4
  g.lines.push_back(line_si(base, 1, 2, 0.20, 0.07, 150.0));
  for (int i = 3; i <= 6; ++i) g.lines.push_back(line_si(base, i - 1, i, 0.20, 0.07, 150.0));
  // stiffer branch: households 5..9
  g.lines.push_back(line_si(base, 1, 7, 0.06, 0.024, 150.0));
  g.lines.push_back(line_si(base, 7, 8, 0.06, 0.024, 150.0));
  for (int i = 9; i <= 12; ++i) g.lines.push_back(line_si(base, i - 1, i, 0.06, 0.024, 150.0));
  return g;
}

Grid chain_feeder(int households, double r_ohm, double x_ohm, double i_max_a) {
  Grid g;
  g.buses.push_back(make_bus(0, BusKind::slack));
  for (int i = 1; i <= households; ++i) {
    g.buses.push_back(make_bus(i, BusKind::household, i - 1));
    g.lines.push_back(line_si(g.base, i - 1, i, r_ohm, x_ohm, i_max_a));
  }
  return g;
}

Grid star_feeder(int households, double r_ohm, double x_ohm, double i_max_a) {
  Grid g;
  g.buses.push_back(make_bus(0, BusKind::slack));
  g.buses.push_back(make_bus(1, BusKind::junction));
  g.lines.push_back(line_si(g.base, 0, 1, r_ohm, x_ohm, i_max_a * households));
  for (int i = 0; i < households; ++i) {
    g.buses.push_back(make_bus(i + 2, BusKind::household, i));
    g.lines.push_back(line_si(g.base, 1, i + 2, r_ohm, x_ohm, i_max_a));
  }
  return g;
}

int draw_arrival(std::uint64_t seed, int household, double mean, double std_dev, int slots) {
  auto rng = household_rng(seed, household);
  return sample_arrival(rng, mean, std_dev, slots);
}

std::vector<double> uncontrolled_charging(int slots, int arrival, double grid_energy, double charger_kw,
                                          double dt_hours) {
  std::vector<double> p(static_cast<std::size_t>(slots), 0.0);
  if (charger_kw <= 0.0) return p;
  double left = grid_energy;
  for (int t = std::max(arrival, 0); t < slots && left > 1e-12; ++t) {
    p[t] = std::min(charger_kw, left / dt_hours);
    left -= p[t] * dt_hours;
  }
  return p;
}

Scenario generate(const ScenarioConfig& config) {
  check_config(config);
  Scenario s;
  s.config = config;
  const int n = config.n_households;
  switch (config.feeder) {
    case FeederTemplate::acceptance:
      s.grid = acceptance_feeder();
      break;
    case FeederTemplate::chain:
      s.grid = chain_feeder(n, config.line_r_ohm, config.line_x_ohm, config.line_i_max_a);
      break;
    case FeederTemplate::star:
      s.grid = star_feeder(n, config.line_r_ohm, config.line_x_ohm, config.line_i_max_a);
      break;
    case FeederTemplate::custom:
      if (config.grid_file.empty()) throw ScenarioError("custom feeder needs grid_file");
      s.grid = load_grid(config.grid_file);
      break;
  }
  const auto problems = validate(s.grid);
  if (!problems.empty()) throw ScenarioError("invalid feeder: " + problems.front());
  if (static_cast<int>(s.grid.household_count()) != n) {
    throw ScenarioError("feeder has " + std::to_string(s.grid.household_count()) +
                        " household buses, config asks for " + std::to_string(n));
  }

  const int T = config.slots;
  const double dt = config.dt_hours;
  const double q_ratio = tan_phi_from_power_factor(config.base_load_pf);
  s.schedule.assign(T, ScheduleSlot(n));
  s.params.assign(n, HouseholdParams{});
  s.initial.assign(n, HouseholdState{});

  if (!config.profile_file.empty()) {
    s.schedule = parse_profiles_csv(read_file(config.profile_file), n, T);
  }

  for (int j = 0; j < n; ++j) {
    auto rng = household_rng(config.seed, j);
    const int arrival = sample_arrival(rng, config.ev_arrival_mean, config.ev_arrival_std, T);
    std::uniform_real_distribution<double> load_f(0.8, 1.2), pv_f(0.5, 1.0), hp_f(0.85, 1.1);
    const double lf = load_f(rng), pf = pv_f(rng), hf = hp_f(rng);

    HouseholdParams& par = s.params[j];
    par.pv_rating = config.pv_rating;
    par.ev_rating = config.ev_charger_kw;
    par.ev_charger_p_max = config.ev_charger_kw;
    par.ev_efficiency = config.ev_efficiency;
    par.ev_capacity = config.ev_daily_energy;
    par.hp_p_max = config.hp_p_max;
    par.tank_band = config.tank_band;
    par.ev_arrival_slot = arrival;
    par.ev_departure_slot = T;

    if (config.profile_file.empty()) {
      const auto ev = uncontrolled_charging(T, arrival, config.ev_daily_energy / config.ev_efficiency,
                                            config.ev_charger_kw, dt);
      for (int t = 0; t < T; ++t) {
        const double hour = std::fmod(config.start_hour + (t + 0.5) * dt, 24.0);
        DeviceSchedule& d = s.schedule[t][j];
        d.p_load = config.base_load_peak * lf *
                   (0.3 + 0.7 * bump(hour, 19.0, 2.0) + 0.35 * bump(hour, 7.5, 1.2));
        d.q_load = d.p_load * q_ratio;
        d.p_pv_fore = (hour > 8.5 && hour < 16.5)
                          ? config.pv_rating * config.pv_winter_peak * pf *
                                std::sin(std::numbers::pi * (hour - 8.5) / 8.0)
                          : 0.0;
        d.p_ev_max = ev[t];
        d.p_hp_set = std::clamp(config.hp_peak * hf *
                                    (0.35 + 0.65 * bump(hour, 19.5, 2.5) + 0.3 * bump(hour, 7.0, 1.5)),
                                0.0, config.hp_p_max);
      }
    } else {
      // the file fixes the EV profile; the battery is what it delivers
      int first = T;
      double energy = 0.0;
      for (int t = 0; t < T; ++t) {
        const double p = s.schedule[t][j].p_ev_max;
        if (p > config.ev_charger_kw + 1e-9) {
          throw ScenarioError("profile slot " + std::to_string(t) + " household " + std::to_string(j) +
                              ": EV power above charger rating");
        }
        if (p > 0.0) first = std::min(first, t);
        energy += p * dt;
      }
      par.ev_arrival_slot = std::min(first, T);
      par.ev_capacity = energy * config.ev_efficiency;
      if (energy <= 0.0) par.ev_charger_p_max = par.ev_rating = 0.0;
    }

    double hp_peak = 0.0;
    for (int t = 0; t < T; ++t) hp_peak = std::max(hp_peak, s.schedule[t][j].p_hp_set);
    if (hp_peak > config.hp_p_max + 1e-9) {
      throw ScenarioError("household " + std::to_string(j) + ": heat pump set point above hp_p_max");
    }
    par.tank_volume = tank_volume_for(config.cop * hp_peak);
    s.initial[j].ev_departure_slot = par.ev_departure_slot;
  }
  return s;
}

std::string profiles_to_csv(const Schedule& schedule) {
  std::string out = "slot,household_id,p_load_kw,q_load_kvar,p_pv_kw,p_ev_kw,p_hp_kw\n";
  for (std::size_t t = 0; t < schedule.size(); ++t) {
    for (std::size_t j = 0; j < schedule[t].size(); ++j) {
      const DeviceSchedule& d = schedule[t][j];
      out += std::to_string(t) + ',' + std::to_string(j) + ',' + fmt(d.p_load) + ',' + fmt(d.q_load) +
             ',' + fmt(d.p_pv_fore) + ',' + fmt(d.p_ev_max) + ',' + fmt(d.p_hp_set) + '\n';
    }
  }
  return out;
}

Schedule parse_profiles_csv(const std::string& text, int households, int slots) {
  Schedule schedule(slots, ScheduleSlot(households));
  std::vector<std::vector<bool>> seen(slots, std::vector<bool>(households, false));
  std::istringstream in(text);
  std::string line;
  int row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (row == 1 && line.rfind("slot", 0) == 0) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    const std::string where = "profiles row " + std::to_string(row);
    if (cells.size() != 7) {
      throw ScenarioError(where + ": expected 7 columns, found " + std::to_string(cells.size()));
    }
    double v[7];
    for (int k = 0; k < 7; ++k) {
      try {
        std::size_t used = 0;
        v[k] = std::stod(cells[k], &used);
        if (used != cells[k].size()) throw std::invalid_argument(cells[k]);
      } catch (const std::exception&) {
        throw ScenarioError(where + ": column " + std::to_string(k + 1) + " is not a number");
      }
    }
    const int t = static_cast<int>(v[0]), j = static_cast<int>(v[1]);
    if (t != v[0] || j != v[1] || t < 0 || t >= slots || j < 0 || j >= households) {
      throw ScenarioError(where + ": slot or household id out of range");
    }
    if (seen[t][j]) throw ScenarioError(where + ": duplicate entry");
    if (v[4] < 0.0 || v[5] < 0.0 || v[6] < 0.0) throw ScenarioError(where + ": negative device power");
    seen[t][j] = true;
    schedule[t][j] = {v[2], v[3], v[4], v[5], v[6]};
  }
  for (int t = 0; t < slots; ++t) {
    for (int j = 0; j < households; ++j) {
      if (!seen[t][j]) {
        throw ScenarioError("profiles: missing slot " + std::to_string(t) + " household " +
                            std::to_string(j) + " (after row " + std::to_string(row) + ")");
      }
    }
  }
  return schedule;
}

std::string config_to_json(const ScenarioConfig& c) {
  json j = {{"seed", c.seed},
            {"n_households", c.n_households},
            {"slots", c.slots},
            {"dt_hours", c.dt_hours},
            {"start_hour", c.start_hour},
            {"ev_arrival_mean", c.ev_arrival_mean},
            {"ev_arrival_std", c.ev_arrival_std},
            {"ev_daily_energy", c.ev_daily_energy},
            {"ev_charger_kw", c.ev_charger_kw},
            {"ev_efficiency", c.ev_efficiency},
            {"pv_rating", c.pv_rating},
            {"pv_winter_peak", c.pv_winter_peak},
            {"base_load_peak", c.base_load_peak},
            {"base_load_pf", c.base_load_pf},
            {"hp_p_max", c.hp_p_max},
            {"hp_peak", c.hp_peak},
            {"cop", c.cop},
            {"tank_band", c.tank_band},
            {"feeder", to_string(c.feeder)},
            {"grid_file", c.grid_file},
            {"profile_file", c.profile_file},
            {"line_r_ohm", c.line_r_ohm},
            {"line_x_ohm", c.line_x_ohm},
            {"line_i_max_a", c.line_i_max_a}};
  return j.dump(2) + "\n";
}

ScenarioConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ScenarioError(std::string("scenario config: ") + e.what());
  }
  if (!j.is_object()) throw ScenarioError("scenario config must be a JSON object");
  ScenarioConfig c;
  auto get = [&](const char* key, auto& field) {
    if (!j.contains(key)) return;
    try {
      j.at(key).get_to(field);
    } catch (const json::exception&) {
      throw ScenarioError(std::string("scenario config: bad value for '") + key + "'");
    }
  };
  get("seed", c.seed);
  get("n_households", c.n_households);
  get("slots", c.slots);
  get("dt_hours", c.dt_hours);
  get("start_hour", c.start_hour);
  get("ev_arrival_mean", c.ev_arrival_mean);
  get("ev_arrival_std", c.ev_arrival_std);
  get("ev_daily_energy", c.ev_daily_energy);
  get("ev_charger_kw", c.ev_charger_kw);
  get("ev_efficiency", c.ev_efficiency);
  get("pv_rating", c.pv_rating);
  get("pv_winter_peak", c.pv_winter_peak);
  get("base_load_peak", c.base_load_peak);
  get("base_load_pf", c.base_load_pf);
  get("hp_p_max", c.hp_p_max);
  get("hp_peak", c.hp_peak);
  get("cop", c.cop);
  get("tank_band", c.tank_band);
  std::string feeder = to_string(c.feeder);
  get("feeder", feeder);
  c.feeder = feeder_from_string(feeder);
  get("grid_file", c.grid_file);
  get("profile_file", c.profile_file);
  get("line_r_ohm", c.line_r_ohm);
  get("line_x_ohm", c.line_x_ohm);
  get("line_i_max_a", c.line_i_max_a);
  return c;
}

std::string households_to_json(const Grid& grid, const std::vector<HouseholdParams>& params) {
  const auto buses = grid.household_buses();
  if (buses.size() != params.size()) throw ScenarioError("household count does not match the grid");
  json out = json::object();
  for (std::size_t j = 0; j < params.size(); ++j) {
    const HouseholdParams& p = params[j];
    out[std::to_string(buses[j])] = {{"household", j},
                                     {"pv_rating", p.pv_rating},
                                     {"pv_tan_phi", p.pv_tan_phi},
                                     {"ev_rating", p.ev_rating},
                                     {"ev_tan_phi", p.ev_tan_phi},
                                     {"ev_capacity", p.ev_capacity},
                                     {"ev_charger_p_max", p.ev_charger_p_max},
                                     {"ev_efficiency", p.ev_efficiency},
                                     {"hp_p_max", p.hp_p_max},
                                     {"hp_tan_phi", p.hp_tan_phi},
                                     {"tank_volume", p.tank_volume},
                                     {"tank_band", p.tank_band},
                                     {"ev_arrival_slot", p.ev_arrival_slot},
                                     {"ev_departure_slot", p.ev_departure_slot}};
  }
  return out.dump(2) + "\n";
}

std::vector<HouseholdParams> households_from_json(const Grid& grid, const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ScenarioError(std::string("households: ") + e.what());
  }
  if (!j.is_object()) throw ScenarioError("households: expected an object keyed by bus id");
  const auto buses = grid.household_buses();
  std::vector<HouseholdParams> params(buses.size());
  std::vector<bool> seen(buses.size(), false);
  for (const auto& [key, value] : j.items()) {
    int bus = -1;
    try {
      bus = std::stoi(key);
    } catch (const std::exception&) {
      throw ScenarioError("households: key '" + key + "' is not a bus id");
    }
    const auto it = std::find(buses.begin(), buses.end(), bus);
    if (it == buses.end()) throw ScenarioError("households: bus " + key + " is not a household bus");
    const auto h = static_cast<std::size_t>(it - buses.begin());
    HouseholdParams& p = params[h];
    auto get = [&](const char* field, auto& target) {
      if (!value.contains(field)) return;
      try {
        value.at(field).get_to(target);
      } catch (const json::exception&) {
        throw ScenarioError("households: bus " + key + ": bad value for '" + field + "'");
      }
    };
    get("pv_rating", p.pv_rating);
    get("pv_tan_phi", p.pv_tan_phi);
    get("ev_rating", p.ev_rating);
    get("ev_tan_phi", p.ev_tan_phi);
    get("ev_capacity", p.ev_capacity);
    get("ev_charger_p_max", p.ev_charger_p_max);
    get("ev_efficiency", p.ev_efficiency);
    get("hp_p_max", p.hp_p_max);
    get("hp_tan_phi", p.hp_tan_phi);
    get("tank_volume", p.tank_volume);
    get("tank_band", p.tank_band);
    get("ev_arrival_slot", p.ev_arrival_slot);
    get("ev_departure_slot", p.ev_departure_slot);
    const auto issues = validate(p);
    if (!issues.empty()) throw ScenarioError("households: bus " + key + ": " + issues.front());
    seen[h] = true;
  }
  for (std::size_t h = 0; h < buses.size(); ++h) {
    if (!seen[h]) throw ScenarioError("households: no entry for bus " + std::to_string(buses[h]));
  }
  return params;
}

void save_scenario(const Scenario& s, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ScenarioError("cannot create " + dir.string() + ": " + ec.message());
  write_file(dir / "scenario.json", config_to_json(s.config));
  write_file(dir / "grid.json", grid_to_json(s.grid));
  write_file(dir / "households.json", households_to_json(s.grid, s.params));
  write_file(dir / "profiles.csv", profiles_to_csv(s.schedule));
}

Scenario load_scenario(const std::filesystem::path& dir) {
  Scenario s;
  s.config = config_from_json(read_file(dir / "scenario.json"));
  try {
    s.grid = load_grid_json(dir / "grid.json");
  } catch (const GridFileError& e) {
    throw ScenarioError(e.what());
  }
  const auto problems = validate(s.grid);
  if (!problems.empty()) throw ScenarioError((dir / "grid.json").string() + ": " + problems.front());
  s.params = households_from_json(s.grid, read_file(dir / "households.json"));
  const int n = static_cast<int>(s.params.size());
  if (n != s.config.n_households) {
    throw ScenarioError("scenario.json declares " + std::to_string(s.config.n_households) +
                        " households, grid has " + std::to_string(n));
  }
  s.schedule = parse_profiles_csv(read_file(dir / "profiles.csv"), n, s.config.slots);
  s.initial.assign(n, HouseholdState{});
  for (int j = 0; j < n; ++j) s.initial[j].ev_departure_slot = s.params[j].ev_departure_slot;
  return s;
}

}  // namespace dercoord
