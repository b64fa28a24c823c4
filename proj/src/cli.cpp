#include "dercoord/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "dercoord/grid_io.hpp"
#include "dercoord/report.hpp"
#include "dercoord/scenario.hpp"

namespace dercoord {

namespace {

namespace fs = std::filesystem;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class LogLevel { error = 0, warn = 1, info = 2, debug = 3 };

LogLevel log_level() {
  const char* env = std::getenv("DERCOORD_LOG");
  const std::string v = env ? env : "";
  if (v == "debug") return LogLevel::debug;
  if (v == "info") return LogLevel::info;
  if (v == "error") return LogLevel::error;
  return LogLevel::warn;
}

struct Logger {
  std::ostream& err;
  LogLevel level = log_level();
  void operator()(LogLevel at, const std::string& msg) const {
    static const char* names[] = {"error", "warn", "info", "debug"};
    if (at <= level) err << "[" << names[static_cast<int>(at)] << "] " << msg << "\n";
  }
};

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used == value.size()) return v;
  } catch (const std::exception&) {
  }
  throw UsageError("--set " + key + ": '" + value + "' is not a number");
}

long long parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(value, &used);
    if (used == value.size()) return v;
  } catch (const std::exception&) {
  }
  throw UsageError("--set " + key + ": '" + value + "' is not an integer");
}

struct Overrides {
  std::vector<std::pair<std::string, std::string>> scenario;
  std::vector<std::pair<std::string, std::string>> operation;
};

using ScenarioSetter = std::function<void(ScenarioConfig&, const std::string&, const std::string&)>;
using OperationSetter = std::function<void(OperationConfig&, const std::string&, const std::string&)>;

const std::map<std::string, ScenarioSetter>& scenario_setters() {
  static const std::map<std::string, ScenarioSetter> m = {
      {"seed", [](ScenarioConfig& c, auto& k, auto& v) { c.seed = static_cast<std::uint64_t>(parse_int(k, v)); }},
      {"n_households", [](ScenarioConfig& c, auto& k, auto& v) { c.n_households = static_cast<int>(parse_int(k, v)); }},
      {"slots", [](ScenarioConfig& c, auto& k, auto& v) { c.slots = static_cast<int>(parse_int(k, v)); }},
      {"ev_arrival_mean", [](ScenarioConfig& c, auto& k, auto& v) { c.ev_arrival_mean = parse_double(k, v); }},
      {"ev_arrival_std", [](ScenarioConfig& c, auto& k, auto& v) { c.ev_arrival_std = parse_double(k, v); }},
      {"ev_daily_energy", [](ScenarioConfig& c, auto& k, auto& v) { c.ev_daily_energy = parse_double(k, v); }},
      {"pv_rating", [](ScenarioConfig& c, auto& k, auto& v) { c.pv_rating = parse_double(k, v); }},
      {"hp_p_max", [](ScenarioConfig& c, auto& k, auto& v) { c.hp_p_max = parse_double(k, v); }},
      {"hp_peak", [](ScenarioConfig& c, auto& k, auto& v) { c.hp_peak = parse_double(k, v); }},
      {"base_load_peak", [](ScenarioConfig& c, auto& k, auto& v) { c.base_load_peak = parse_double(k, v); }},
      {"tank_band", [](ScenarioConfig& c, auto& k, auto& v) { c.tank_band = parse_double(k, v); }},
      {"feeder", [](ScenarioConfig& c, auto&, auto& v) { c.feeder = feeder_from_string(v); }},
  };
  return m;
}

const std::map<std::string, OperationSetter>& operation_setters() {
  static const std::map<std::string, OperationSetter> m = {
      {"c_loss", [](OperationConfig& c, auto& k, auto& v) { c.costs.c_loss = parse_double(k, v); }},
      {"c_pv", [](OperationConfig& c, auto& k, auto& v) { c.costs.c_pv = parse_double(k, v); }},
      {"c0", [](OperationConfig& c, auto& k, auto& v) { c.costs.c0 = parse_double(k, v); }},
      {"hp_slope", [](OperationConfig& c, auto& k, auto& v) { c.costs.hp_slope = parse_double(k, v); }},
      {"hp_floor", [](OperationConfig& c, auto& k, auto& v) { c.costs.hp_floor = parse_double(k, v); }},
      {"voltage_margin", [](OperationConfig& c, auto& k, auto& v) { c.voltage_margin = parse_double(k, v); }},
      {"loading_margin", [](OperationConfig& c, auto& k, auto& v) { c.loading_margin = parse_double(k, v); }},
  };
  return m;
}

// Grid-level keys, applied after the scenario is built.
const std::vector<std::string> kGridKeys = {"vmin_pu", "vmax_pu", "slack_v_pu"};

Overrides split_overrides(const std::vector<std::string>& sets) {
  Overrides o;
  for (const std::string& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--set expects key=value, got '" + kv + "'");
    std::string key = kv.substr(0, eq), value = kv.substr(eq + 1);
    if (key == "cop") {
      // tank sizing and tank dynamics share the COP
      o.scenario.emplace_back(key, value);
      o.operation.emplace_back(key, value);
    } else if (scenario_setters().count(key)) {
      o.scenario.emplace_back(key, value);
    } else if (operation_setters().count(key) ||
               std::find(kGridKeys.begin(), kGridKeys.end(), key) != kGridKeys.end()) {
      o.operation.emplace_back(key, value);
    } else {
      throw UsageError("--set: unknown key '" + key + "' (see --help for the allowed keys)");
    }
  }
  return o;
}

void apply_scenario_overrides(ScenarioConfig& c, const Overrides& o) {
  for (const auto& [k, v] : o.scenario) {
    if (k == "cop") {
      c.cop = parse_double(k, v);
    } else {
      scenario_setters().at(k)(c, k, v);
    }
  }
}

void apply_operation_overrides(OperationConfig& oc, Grid& grid, const Overrides& o) {
  for (const auto& [k, v] : o.operation) {
    if (k == "cop") {
      oc.cop = parse_double(k, v);
    } else if (k == "vmin_pu" || k == "vmax_pu") {
      const double mag = parse_double(k, v);
      for (Bus& b : grid.buses) (k == "vmin_pu" ? b.vmin : b.vmax) = mag * mag;
    } else if (k == "slack_v_pu") {
      const double mag = parse_double(k, v);
      grid.slack_v = mag * mag;
    } else {
      operation_setters().at(k)(oc, k, v);
    }
  }
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ScenarioError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Options {
  std::string scenario = "acceptance";
  std::string grid;
  std::string out;
  std::string mode = "coordinated";
  std::optional<std::uint64_t> seed;
  std::vector<std::string> sets;
};

// Preset name, a bundle directory, a directory holding only scenario.json, or
// a scenario config JSON file.
Scenario resolve_scenario(const Options& opt, const Overrides& o) {
  const fs::path p(opt.scenario);
  std::optional<ScenarioConfig> config;
  if (opt.scenario == "acceptance") {
    config = acceptance_config();
  } else if (fs::is_directory(p) && fs::exists(p / "profiles.csv")) {
    if (!o.scenario.empty() || opt.seed) {
      throw UsageError("scenario bundle " + p.string() +
                       " has fixed profiles; --seed and scenario keys need a preset or config file");
    }
    return load_scenario(p);
  } else if (fs::is_directory(p) && fs::exists(p / "scenario.json")) {
    config = config_from_json(read_text(p / "scenario.json"));
  } else if (fs::is_regular_file(p)) {
    config = config_from_json(read_text(p));
  } else {
    throw ScenarioError("scenario '" + opt.scenario + "' is neither a preset nor a readable path");
  }
  apply_scenario_overrides(*config, o);
  if (opt.seed) config->seed = *opt.seed;
  return generate(*config);
}

Scenario prepare(const Options& opt, const Overrides& o, OperationConfig& oc) {
  Scenario s = resolve_scenario(opt, o);
  if (!opt.grid.empty()) {
    Grid g = load_grid(opt.grid);
    const auto problems = validate(g);
    if (!problems.empty()) throw GridFileError(opt.grid + ": " + problems.front());
    if (static_cast<std::size_t>(g.household_count()) != s.params.size()) {
      throw ScenarioError(opt.grid + " has " + std::to_string(g.household_count()) + " household buses, scenario has " +
                          std::to_string(s.params.size()));
    }
    s.grid = std::move(g);
  }
  oc.dt_hours = s.config.dt_hours;
  oc.cop = s.config.cop;
  oc.costs.t_max = s.config.slots;
  apply_operation_overrides(oc, s.grid, o);
  return s;
}

RunSummary run_mode(const Scenario& s, OperationConfig oc, Mode mode, const fs::path& out_dir,
                    const Logger& log) {
  oc.mode = mode;
  log(LogLevel::info, "running " + to_string(mode) + " over " + std::to_string(s.schedule.size()) + " slots");
  const HorizonResult res = run_horizon(s.grid, s.params, s.initial, s.schedule, oc);
  for (const SlotRecord& rec : res.records) {
    if (rec.coordinated) {
      log(LogLevel::debug, "slot " + std::to_string(rec.slot) + ": coordinated, " +
                               std::to_string(rec.pre_violations.size()) + " violations before, " +
                               std::to_string(rec.post_violations.size()) + " after");
    }
    if (rec.unresolved) log(LogLevel::warn, "slot " + std::to_string(rec.slot) + ": coordination unresolved");
  }
  if (res.catch_up_risk_slots > 0) {
    log(LogLevel::warn, std::to_string(res.catch_up_risk_slots) + " slots with catch-up at risk");
  }
  const RunSummary summary = summarize(s.grid, s.params, res.records, mode, oc.dt_hours);
  emit(summary, s.grid, res.records, out_dir);
  log(LogLevel::info, "solver time " + format_number(summary.solver_seconds) + " s");
  return summary;
}

void print_summary(std::ostream& out, const RunSummary& s, const fs::path& dir) {
  out << s.mode << ": min voltage " << format_number(s.min_voltage_pu) << " pu, max loading "
      << format_number(s.max_loading_percent) << " %, violation slots " << s.violation_slots
      << ", coordinated slots " << s.coordinated_slots << ", unresolved " << s.unresolved_slots << " -> "
      << dir.string() << "\n";
}

int validate_command(const Options& opt, std::ostream& out) {
  if (opt.grid.empty() && opt.scenario.empty()) throw UsageError("validate needs --grid or --scenario");
  int problems = 0;
  if (!opt.grid.empty()) {
    const Grid g = load_grid(opt.grid);
    for (const auto& p : validate(g)) {
      out << opt.grid << ": " << p << "\n";
      ++problems;
    }
  }
  if (!opt.scenario.empty()) {
    const fs::path p(opt.scenario);
    if (opt.scenario != "acceptance" && fs::is_directory(p) && fs::exists(p / "profiles.csv")) {
      const Scenario s = load_scenario(p);
      for (std::size_t j = 0; j < s.params.size(); ++j) {
        for (const auto& issue : validate(s.params[j])) {
          out << p.string() << ": household " << j << ": " << issue << "\n";
          ++problems;
        }
      }
    } else {
      resolve_scenario(opt, {});
    }
  }
  if (problems > 0) return kExitDomainError;
  out << "ok\n";
  return kExitOk;
}

}  // namespace

const std::vector<std::string>& override_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, _] : scenario_setters()) k.push_back(name);
    for (const auto& [name, _] : operation_setters()) k.push_back(name);
    k.insert(k.end(), kGridKeys.begin(), kGridKeys.end());
    k.push_back("cop");
    std::sort(k.begin(), k.end());
    return k;
  }();
  return keys;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Coordinate EVs, heat pumps and PV in radial low-voltage grids"};
  app.name("dercoord");
  app.require_subcommand(1);
  Options opt;

  std::string keys;
  for (const auto& k : override_keys()) keys += (keys.empty() ? "" : ", ") + k;
  auto common = [&](CLI::App* sub, bool needs_out) {
    sub->add_option("--scenario", opt.scenario, "Preset name, scenario bundle directory or config JSON")
        ->capture_default_str();
    sub->add_option("--grid", opt.grid, "Grid file (.json or .csv) replacing the scenario feeder");
    auto* o = sub->add_option("--out", opt.out, "Output directory");
    if (needs_out) o->required();
    sub->add_option("--seed", opt.seed, "Random seed");
    sub->add_option("--set", opt.sets, "Override key=value; keys: " + keys);
  };
  CLI::App* gen = app.add_subcommand("generate", "Write a scenario bundle");
  common(gen, true);
  CLI::App* run = app.add_subcommand("run", "Simulate a day and write reports");
  common(run, true);
  run->add_option("--mode", opt.mode, "uncontrolled or coordinated")
      ->check(CLI::IsMember({"uncontrolled", "coordinated"}))
      ->capture_default_str();
  CLI::App* cmp = app.add_subcommand("compare", "Run both modes and write a comparison");
  common(cmp, true);
  CLI::App* val = app.add_subcommand("validate", "Check grid and scenario files");
  val->add_option("--scenario", opt.scenario, "Scenario bundle directory or config JSON");
  val->add_option("--grid", opt.grid, "Grid file");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  const Logger log{err};
  try {
    if (val->parsed()) {
      if (opt.scenario == "acceptance" && val->count("--scenario") == 0) opt.scenario.clear();
      return validate_command(opt, out);
    }
    const Overrides o = split_overrides(opt.sets);
    OperationConfig oc;
    if (gen->parsed()) {
      if (!o.operation.empty()) throw UsageError("generate accepts only scenario keys in --set");
      Scenario s = prepare(opt, o, oc);
      save_scenario(s, opt.out);
      out << "scenario written to " << opt.out << "\n";
      return kExitOk;
    }
    const Scenario s = prepare(opt, o, oc);
    const fs::path dir(opt.out);
    if (run->parsed()) {
      const RunSummary summary = run_mode(s, oc, mode_from_string(opt.mode), dir, log);
      print_summary(out, summary, dir);
      return kExitOk;
    }
    const RunSummary unc = run_mode(s, oc, Mode::uncontrolled, dir / "uncontrolled", log);
    const RunSummary coo = run_mode(s, oc, Mode::coordinated, dir / "coordinated", log);
    std::ofstream f(dir / "compare.json", std::ios::binary);
    f << comparison_to_json(unc, coo);
    if (!f) throw ReportError("cannot write " + (dir / "compare.json").string());
    print_summary(out, unc, dir / "uncontrolled");
    print_summary(out, coo, dir / "coordinated");
    return kExitOk;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    log(LogLevel::error, e.what());
    return kExitDomainError;
  }
}

}  // namespace dercoord
