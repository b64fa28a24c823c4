#include "dercoord/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "json.hpp"

namespace dercoord {

namespace {

using nlohmann::ordered_json;

constexpr double kFullSoc = 1.0 - 1e-6;

// Rounded to the serialized precision so JSON and CSV agree.
double r9(double value) { return std::stod(format_number(value)); }

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ReportError("cannot write " + path.string());
  out << text;
  out.flush();
  if (!out) throw ReportError("failed writing " + path.string());
}

bool has_ev(const HouseholdParams& par) {
  return par.ev_capacity > 0.0 && par.ev_charger_p_max > 0.0;
}

ordered_json summary_object(const RunSummary& s) {
  ordered_json j;
  j["mode"] = s.mode;
  j["slots"] = s.slots;
  j["min_voltage_pu"] = r9(s.min_voltage_pu);
  j["max_voltage_pu"] = r9(s.max_voltage_pu);
  j["max_loading_percent"] = r9(s.max_loading_percent);
  j["coordinated_slots"] = s.coordinated_slots;
  j["unresolved_slots"] = s.unresolved_slots;
  j["detected_violation_slots"] = s.detected_violation_slots;
  j["violation_slots"] = s.violation_slots;
  j["under_voltage_slots"] = s.under_voltage_slots;
  j["over_voltage_slots"] = s.over_voltage_slots;
  j["overload_slots"] = s.overload_slots;
  j["curtailed_energy_kwh"] = {{"ev", r9(s.curtailed.ev)},
                               {"pv", r9(s.curtailed.pv)},
                               {"hp_down", r9(s.curtailed.hp_down)},
                               {"hp_up", r9(s.curtailed.hp_up)}};
  j["ev_grid_energy_kwh"] = r9(s.ev_grid_energy_kwh);
  j["ev_count"] = s.ev_count;
  j["ev_satisfaction"] = r9(s.ev_satisfaction);
  j["min_departure_soc"] = r9(s.min_departure_soc);
  j["tank_satisfaction"] = r9(s.tank_satisfaction);
  j["max_abs_tank_dT"] = r9(s.max_abs_tank_dT);
  j["relaxation"] = {{"max_voltage_discrepancy_pu", r9(s.max_voltage_discrepancy_pu)},
                     {"loading_overestimate_pu2",
                      {{"min", r9(s.min_loading_overestimate)},
                       {"median", r9(s.median_loading_overestimate)},
                       {"max", r9(s.max_loading_overestimate)}}},
                     {"min_gap_pu2", r9(s.min_relaxation_gap)}};
  return j;
}

}  // namespace

std::string format_number(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", value);
  return buf;
}

RunSummary summarize(const Grid& grid, const std::vector<HouseholdParams>& params,
                     const std::vector<SlotRecord>& records, Mode mode, double dt_hours) {
  if (records.empty()) throw ReportError("cannot summarize an empty run");
  RunSummary s;
  s.mode = to_string(mode);
  s.slots = static_cast<int>(records.size());
  s.min_voltage_pu = std::numeric_limits<double>::infinity();
  const int slack = grid.slack_bus();
  std::vector<double> overestimates;
  bool any_relaxation = false;

  for (const SlotRecord& rec : records) {
    if (!rec.power_flow_verified) {
      throw ReportError("slot " + std::to_string(rec.slot) + " carries no verified power flow");
    }
    const PowerFlowResult& pf = rec.power_flow;
    double vmin = std::numeric_limits<double>::infinity(), vmax = 0.0, lmax = 0.0;
    for (const Bus& bus : grid.buses) {
      if (bus.id == slack) continue;
      const double v = std::sqrt(pf.v[bus.id]);
      vmin = std::min(vmin, v);
      vmax = std::max(vmax, v);
      s.voltage_cdf.push_back(v);
    }
    for (std::size_t e = 0; e < grid.lines.size(); ++e) {
      const double loading = loading_percent(grid.lines[e], pf.l[static_cast<Eigen::Index>(e)]);
      lmax = std::max(lmax, loading);
      s.loading_cdf.push_back(loading);
    }
    s.slot_min_voltage.push_back(vmin);
    s.slot_max_voltage.push_back(vmax);
    s.slot_max_loading.push_back(lmax);
    s.min_voltage_pu = std::min(s.min_voltage_pu, vmin);
    s.max_voltage_pu = std::max(s.max_voltage_pu, vmax);
    s.max_loading_percent = std::max(s.max_loading_percent, lmax);

    s.coordinated_slots += rec.coordinated;
    s.unresolved_slots += rec.unresolved;
    s.detected_violation_slots += !rec.pre_violations.empty();
    s.violation_slots += !rec.post_violations.empty();
    bool under = false, over = false, overload = false;
    for (const Violation& v : rec.post_violations) {
      under |= v.kind == ViolationKind::under_voltage;
      over |= v.kind == ViolationKind::over_voltage;
      overload |= v.kind == ViolationKind::overload;
    }
    s.under_voltage_slots += under;
    s.over_voltage_slots += over;
    s.overload_slots += overload;

    for (const HouseholdSetpoint& sp : rec.setpoints) {
      s.curtailed.ev += sp.ev_down * dt_hours;
      s.curtailed.pv += sp.pv_down * dt_hours;
      s.curtailed.hp_down += sp.hp_down * dt_hours;
      s.curtailed.hp_up += sp.hp_up * dt_hours;
      s.ev_grid_energy_kwh += sp.p_ev * dt_hours;
    }
    for (std::size_t j = 0; j < rec.states_after.size() && j < params.size(); ++j) {
      s.max_abs_tank_dT = std::max(s.max_abs_tank_dT, std::abs(rec.states_after[j].tank_dT));
    }
    if (rec.relaxation) {
      const RelaxationDiagnostics& d = *rec.relaxation;
      if (!any_relaxation) {
        s.min_relaxation_gap = d.gap.minCoeff();
        any_relaxation = true;
      }
      s.max_voltage_discrepancy_pu = std::max(s.max_voltage_discrepancy_pu, d.max_voltage_discrepancy);
      s.min_relaxation_gap = std::min(s.min_relaxation_gap, d.gap.minCoeff());
      for (Eigen::Index e = 0; e < d.l_socp.size(); ++e) overestimates.push_back(d.l_socp[e] - pf.l[e]);
    }
    s.solver_seconds += rec.solver_seconds;
  }

  // satisfaction
  int full = 0, in_band = 0;
  for (std::size_t j = 0; j < params.size(); ++j) {
    const HouseholdParams& par = params[j];
    bool ok = true;
    for (const SlotRecord& rec : records) {
      if (j < rec.states_after.size() && std::abs(rec.states_after[j].tank_dT) > par.tank_band + 1e-9) ok = false;
    }
    in_band += ok;
    if (!has_ev(par)) continue;
    ++s.ev_count;
    const int last = std::clamp(par.ev_departure_slot, 1, s.slots) - 1;
    const double soc = records[static_cast<std::size_t>(last)].states_after.at(j).ev_soc;
    s.min_departure_soc = std::min(s.min_departure_soc, soc);
    full += soc >= kFullSoc;
  }
  if (s.ev_count > 0) s.ev_satisfaction = static_cast<double>(full) / s.ev_count;
  if (!params.empty()) s.tank_satisfaction = static_cast<double>(in_band) / static_cast<double>(params.size());

  if (!overestimates.empty()) {
    std::sort(overestimates.begin(), overestimates.end());
    s.min_loading_overestimate = overestimates.front();
    s.max_loading_overestimate = overestimates.back();
    s.median_loading_overestimate = overestimates[overestimates.size() / 2];
  }
  std::sort(s.voltage_cdf.begin(), s.voltage_cdf.end());
  std::sort(s.loading_cdf.begin(), s.loading_cdf.end());
  return s;
}

std::string summary_to_json(const RunSummary& summary) {
  return summary_object(summary).dump(2) + "\n";
}

std::string slots_to_csv(const Grid& grid, const std::vector<SlotRecord>& records) {
  std::string out =
      "slot,coordinated,unresolved,pre_violations,post_violations,min_voltage_pu,max_voltage_pu,"
      "max_loading_percent,losses_kw,ev_kw,hp_kw,pv_kw,ev_curtailed_kw,pv_curtailed_kw,hp_up_kw,"
      "hp_down_kw,objective_eur,max_voltage_discrepancy_pu,min_loading_overestimate_pu2,"
      "min_relaxation_gap_pu2,solver_status,solver_iterations,power_flow_iterations\n";
  const int slack = grid.slack_bus();
  for (const SlotRecord& rec : records) {
    const PowerFlowResult& pf = rec.power_flow;
    double vmin = std::numeric_limits<double>::infinity(), vmax = 0.0, lmax = 0.0;
    for (const Bus& bus : grid.buses) {
      if (bus.id == slack) continue;
      vmin = std::min(vmin, std::sqrt(pf.v[bus.id]));
      vmax = std::max(vmax, std::sqrt(pf.v[bus.id]));
    }
    for (std::size_t e = 0; e < grid.lines.size(); ++e) {
      lmax = std::max(lmax, loading_percent(grid.lines[e], pf.l[static_cast<Eigen::Index>(e)]));
    }
    double ev = 0, hp = 0, pv = 0, ev_down = 0, pv_down = 0, hp_up = 0, hp_down = 0;
    for (const HouseholdSetpoint& sp : rec.setpoints) {
      ev += sp.p_ev;
      hp += sp.p_hp;
      pv += sp.p_pv;
      ev_down += sp.ev_down;
      pv_down += sp.pv_down;
      hp_up += sp.hp_up;
      hp_down += sp.hp_down;
    }
    std::string row = std::to_string(rec.slot) + ',' + (rec.coordinated ? "1" : "0") + ',' +
                      (rec.unresolved ? "1" : "0") + ',' + std::to_string(rec.pre_violations.size()) + ',' +
                      std::to_string(rec.post_violations.size());
    for (double v : {vmin, vmax, lmax, grid.base.power_to_kw(pf.losses), ev, hp, pv, ev_down, pv_down, hp_up,
                     hp_down}) {
      row += ',' + format_number(v);
    }
    if (rec.relaxation) {
      row += ',' + format_number(rec.objective) + ',' + format_number(rec.relaxation->max_voltage_discrepancy) +
             ',' + format_number(rec.relaxation->min_loading_overestimate) + ',' +
             format_number(rec.relaxation->gap.minCoeff());
    } else {
      row += ",,,,";
    }
    row += ',' + (rec.solver_status ? std::string(conic::to_string(*rec.solver_status)) : std::string()) + ',' +
           std::to_string(rec.solver_iterations) + ',' + std::to_string(rec.power_flow_iterations);
    out += row + '\n';
  }
  return out;
}

std::string cdf_to_csv(const std::vector<double>& sorted, const std::string& column) {
  std::string out = column + ",cumulative_probability\n";
  const double n = static_cast<double>(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    out += format_number(sorted[i]) + ',' + format_number(static_cast<double>(i + 1) / n) + '\n';
  }
  return out;
}

void emit(const RunSummary& summary, const Grid& grid, const std::vector<SlotRecord>& records,
          const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw ReportError("cannot create " + out_dir.string() + ": " + ec.message());
  write_file(out_dir / "slots.csv", slots_to_csv(grid, records));
  write_file(out_dir / "cdf_voltage.csv", cdf_to_csv(summary.voltage_cdf, "bus_slot_voltage_pu"));
  write_file(out_dir / "cdf_loading.csv", cdf_to_csv(summary.loading_cdf, "line_slot_loading_percent"));
  write_file(out_dir / "summary.json", summary_to_json(summary));
}

std::string comparison_to_json(const RunSummary& uncontrolled, const RunSummary& coordinated) {
  ordered_json j;
  j["uncontrolled"] = summary_object(uncontrolled);
  j["coordinated"] = summary_object(coordinated);
  j["difference"] = {
      {"min_voltage_pu", r9(coordinated.min_voltage_pu - uncontrolled.min_voltage_pu)},
      {"max_loading_percent", r9(coordinated.max_loading_percent - uncontrolled.max_loading_percent)},
      {"violation_slots", coordinated.violation_slots - uncontrolled.violation_slots},
      {"ev_curtailed_kwh", r9(coordinated.curtailed.ev - uncontrolled.curtailed.ev)},
      {"hp_curtailed_kwh", r9(coordinated.curtailed.hp_down - uncontrolled.curtailed.hp_down)}};
  return j.dump(2) + "\n";
}

}  // namespace dercoord
