// Acceptance checks, one PASS/FAIL line per criterion.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "dercoord/coordination.hpp"
#include "dercoord/operation.hpp"
#include "dercoord/powerflow.hpp"
#include "dercoord/report.hpp"
#include "dercoord/scenario.hpp"
#include "fixtures.hpp"
#include "oracles/brute_force.hpp"
#include "oracles/single_line.hpp"

using namespace dercoord;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << (detail.tellp() > 0 ? "; " : "") << what;
    }
  }
};

int failures = 0;

void report(int id, const std::string& name, const Verdict& v, const std::string& stats) {
  if (!v.pass) ++failures;
  std::cout << (v.pass ? "PASS" : "FAIL") << " " << id << " " << name << ": " << stats;
  if (!v.pass) std::cout << " [" << v.detail.str() << "]";
  std::cout << std::endl;
}

std::string num(double x) { return format_number(x); }

struct Day {
  Scenario scenario;
  HorizonResult result;
  double seconds = 0.0;
};

Day run_day(Mode mode) {
  Day d{generate(acceptance_config()), {}, 0.0};
  OperationConfig oc;
  oc.mode = mode;
  oc.dt_hours = d.scenario.config.dt_hours;
  oc.cop = d.scenario.config.cop;
  const auto t0 = std::chrono::steady_clock::now();
  d.result = run_horizon(d.scenario.grid, d.scenario.params, d.scenario.initial, d.scenario.schedule, oc);
  d.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return d;
}

double min_voltage(const PowerFlowResult& pf) { return std::sqrt(pf.v.minCoeff()); }

double max_loading(const Grid& grid, const PowerFlowResult& pf) {
  double worst = 0.0;
  for (std::size_t k = 0; k < grid.lines.size(); ++k) worst = std::max(worst, pf.l[k] / grid.lines[k].l_max);
  return 100.0 * std::sqrt(worst);
}

void criterion1(const Day& unc, const Day& coo) {
  Verdict v;
  const Grid& g = unc.scenario.grid;
  int under = 0, over = 0;
  for (const auto& rec : unc.result.records) {
    under += min_voltage(rec.power_flow) < 0.9;
    over += max_loading(g, rec.power_flow) > 100.0;
  }
  double vmin = INFINITY, lmax = 0.0;
  bool verified = true;
  for (const auto& rec : coo.result.records) {
    verified = verified && rec.power_flow_verified && rec.power_flow.converged;
    vmin = std::min(vmin, min_voltage(rec.power_flow));
    lmax = std::max(lmax, max_loading(g, rec.power_flow));
  }
  v.require(under >= 1, "uncontrolled run has no under-voltage slot");
  v.require(over >= 1, "uncontrolled run has no overload slot");
  v.require(verified, "coordinated slot without a converged verification power flow");
  v.require(vmin >= 0.9 - 5e-4, "coordinated min voltage " + num(vmin));
  v.require(lmax <= 100.0, "coordinated max loading " + num(lmax) + " %");
  v.require(coo.seconds < 60.0, "runtime " + num(coo.seconds) + " s");
  report(1, "violation restoration", v,
         "uncontrolled " + std::to_string(under) + " under-voltage / " + std::to_string(over) +
             " overload slots; coordinated vmin " + num(vmin) + " pu, max loading " + num(lmax) + " %, " +
             num(coo.seconds) + " s");
}

void criterion2(const Day& coo) {
  Verdict v;
  const auto& params = coo.scenario.params;
  const auto& records = coo.result.records;
  double worst = 1.0;
  int evs = 0;
  for (std::size_t j = 0; j < params.size(); ++j) {
    if (params[j].ev_capacity <= 0.0 || params[j].ev_charger_p_max <= 0.0) continue;
    ++evs;
    const int last = std::min<int>(params[j].ev_departure_slot, static_cast<int>(records.size())) - 1;
    const double soc = records[last].states_after[j].ev_soc;
    worst = std::min(worst, soc);
    v.require(soc >= 1.0 - 1e-6, "household " + std::to_string(j) + " departs at soc " + num(soc));
  }
  v.require(evs > 0, "no EV on the acceptance day");
  report(2, "EV satisfaction", v, std::to_string(evs) + " EVs, min departure soc " + num(worst));
}

void criterion3(const Day& coo) {
  Verdict v;
  double worst = 0.0;
  for (const auto& rec : coo.result.records) {
    for (const auto& s : rec.states_after) worst = std::max(worst, std::abs(s.tank_dT));
  }
  v.require(worst <= 5.0, "tank deviation " + num(worst) + " degC");
  report(3, "tank satisfaction", v, "max |tank_dT| " + num(worst) + " degC");
}

void criterion4(const Day& coo) {
  Verdict v;
  double dv = 0.0, dl = INFINITY, gap = INFINITY;
  int slots = 0;
  for (const auto& rec : coo.result.records) {
    if (!rec.coordinated || rec.unresolved) continue;
    ++slots;
    if (!rec.relaxation) {
      v.require(false, "slot " + std::to_string(rec.slot) + " lacks relaxation data");
      continue;
    }
    const auto& r = *rec.relaxation;
    const auto& pf = rec.power_flow;
    dv = std::max(dv, (r.v_socp.cwiseSqrt() - pf.v.cwiseSqrt()).cwiseAbs().maxCoeff());
    dl = std::min(dl, (r.l_socp - pf.l).minCoeff());
    gap = std::min(gap, r.gap.minCoeff());
  }
  v.require(slots > 0, "no coordinated slot");
  v.require(dv <= 1e-3, "voltage discrepancy " + num(dv) + " pu");
  v.require(dl >= -1e-6, "loading underestimate " + num(dl));
  v.require(gap >= -1e-7, "relaxation gap " + num(gap));
  report(4, "relaxation accuracy", v,
         std::to_string(slots) + " coordinated slots, max |v_socp - v_pf| " + num(dv) + " pu, min l_socp - l_pf " +
             num(dl) + ", min gap " + num(gap));
}

void criterion5() {
  Verdict v;
  double worst = 0.0;
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> imp(0.001, 0.1), load(-0.3, 0.6), slack(0.95, 1.05);
  for (int i = 0; i < 200; ++i) {
    const double r = imp(rng), x = imp(rng), p = load(rng), q = 0.3 * load(rng);
    Grid grid = fx::two_bus(r, x);
    grid.slack_v = slack(rng);
    const auto res = solve_power_flow(grid, std::vector<Injection>{{1, -p, -q}});
    const auto ref = oracle::single_line(r, x, grid.slack_v, p, q);
    v.require(res.converged, "single line did not converge");
    worst = std::max({worst, std::abs(res.v[1] - ref.v1), std::abs(res.P[0] - ref.P), std::abs(res.Q[0] - ref.Q),
                      std::abs(res.l[0] - ref.l)});
  }
  Grid flat = fx::chain(6, 0.02, 0.01);
  flat.slack_v = 1.0404;
  const auto res = solve_power_flow(flat, std::vector<Injection>{});
  const double flat_err = std::max({(res.v.array() - 1.0404).abs().maxCoeff(), res.P.cwiseAbs().maxCoeff(),
                                    res.Q.cwiseAbs().maxCoeff(), res.l.cwiseAbs().maxCoeff()});
  v.require(worst <= 1e-10, "single-line error " + num(worst));
  v.require(res.converged && flat_err <= 1e-12, "flat-profile error " + num(flat_err));
  report(5, "power-flow oracle", v, "single-line max error " + num(worst) + ", flat-profile error " + num(flat_err));
}

struct Fleet {
  ScheduleSlot schedule;
  std::vector<HouseholdParams> params;
  std::vector<HouseholdState> states;
};

Fleet evening_fleet(std::size_t households) {
  Fleet f;
  f.params.assign(households, HouseholdParams{});
  f.states.assign(households, HouseholdState{});
  for (std::size_t j = 0; j < households; ++j) {
    f.schedule.push_back({1.0, 0.3, 0.0, 3.68, 2.0});
    f.states[j].ev_present = true;
    f.states[j].ev_soc = 0.1 * static_cast<double>(j % 5);
    f.states[j].tank_dT = -1.0 + 0.5 * static_cast<double>(j % 3);
  }
  return f;
}

CoordinationProblem problem_for(const Grid& grid, const Fleet& f, int slot = 40) {
  return {grid, f.schedule, cost_terms(f.states, f.params, slot, CostModel{}), f.params};
}

double max_curtailment_kw(const CoordinationResult& r) {
  double worst = 0.0;
  for (const auto& h : r.households) worst = std::max({worst, h.ev_down, h.pv_down, h.hp_up, h.hp_down});
  return worst;
}

// (a) prohibitive deviation costs on a feasible schedule
std::string fidelity_prohibitive(Verdict& v) {
  const Grid grid = fx::star(3, 0.01, 0.005);
  Fleet f = evening_fleet(3);
  f.schedule[1].p_pv_fore = 3.0;
  auto problem = problem_for(grid, f);
  for (auto& h : problem.costs.households) h = {1e6, 1e6, 1e6, 1e6};
  const auto res = coordinate(problem);
  const double worst = res.status == conic::SolveStatus::optimal ? max_curtailment_kw(res) : INFINITY;
  v.require(worst <= 1e-6, "(a) curtailment " + num(worst) + " kW");
  return "(a) " + num(worst) + " kW";
}

// (b) positive cost scaling
std::string fidelity_scaling(Verdict& v) {
  const Grid grid = fx::star(3, 0.03, 0.015, 0.08 * 0.08);
  const Fleet f = evening_fleet(3);
  const auto problem = problem_for(grid, f);
  const auto base = coordinate(problem);
  double worst = base.status == conic::SolveStatus::optimal ? 0.0 : INFINITY;
  for (double s : {0.01, 7.0, 1e3}) {
    auto scaled = problem;
    scaled.costs.c_loss *= s;
    for (auto& h : scaled.costs.households) {
      h.c_pv *= s;
      h.c_ev *= s;
      h.c_hp_up *= s;
      h.c_hp_down *= s;
    }
    const auto res = coordinate(scaled);
    if (res.status != conic::SolveStatus::optimal) {
      worst = INFINITY;
      continue;
    }
    for (std::size_t j = 0; j < 3; ++j) {
      const auto& a = res.households[j];
      const auto& b = base.households[j];
      worst = std::max({worst, std::abs(a.p_ev - b.p_ev), std::abs(a.p_hp - b.p_hp), std::abs(a.p_pv - b.p_pv),
                        std::abs(a.q_ev - b.q_ev), std::abs(a.q_pv - b.q_pv)});
    }
  }
  v.require(worst <= 1e-5, "(b) setpoint change " + num(worst) + " kW");
  return "(b) " + num(worst) + " kW";
}

// (c) two identical EVs on a symmetric star, differing only in soc
std::string fidelity_priority(Verdict& v) {
  const Grid grid = fx::star(2, 0.02, 0.01, 0.075 * 0.075);
  const int slots = 32;
  std::vector<HouseholdParams> params(2);
  std::vector<HouseholdState> states(2);
  states[1].ev_soc = 0.4;
  Schedule schedule(slots, ScheduleSlot(2, DeviceSchedule{1.0, 0.3, 0.0, 0.0, 1.0}));
  for (std::size_t j = 0; j < 2; ++j) {
    params[j].ev_arrival_slot = 4;
    params[j].ev_departure_slot = slots;
    double energy = (1.0 - states[j].ev_soc) * params[j].ev_capacity / params[j].ev_efficiency;
    for (int t = 4; t < slots && energy > 0.0; ++t) {
      const double p = std::min(params[j].ev_charger_p_max, energy / 0.25);
      schedule[t][j].p_ev_max = p;
      energy -= p * 0.25;
    }
  }
  const auto res = run_horizon(grid, params, states, schedule, OperationConfig{});
  int coordinated = 0, breaches = 0;
  auto before = states;
  for (const auto& rec : res.records) {
    if (rec.coordinated && std::abs(before[0].ev_soc - before[1].ev_soc) > 1e-9) {
      ++coordinated;
      const int low = before[0].ev_soc < before[1].ev_soc ? 0 : 1;
      breaches += rec.setpoints[low].p_ev < rec.setpoints[1 - low].p_ev - 1e-6;
    }
    before = rec.states_after;
  }
  v.require(coordinated > 0, "(c) no coordinated slot");
  v.require(breaches == 0, "(c) " + std::to_string(breaches) + " slots favour the fuller EV");
  return "(c) " + std::to_string(coordinated) + " slots, " + std::to_string(breaches) + " breaches";
}

// (d) brute force over 0.05 kW setpoints on a two-household chain
std::string fidelity_brute_force(Verdict& v) {
  const Grid grid = fx::chain(2, 1.0, 0.3, 4.0);
  Fleet f = evening_fleet(2);
  for (auto& par : f.params) {
    par.ev_tan_phi = 0.0;
    par.hp_p_max = 1.5;
  }
  f.schedule[0] = {1.2, 0.3, 0.0, 2.0, 1.0};
  f.schedule[1] = {0.8, 0.2, 0.0, 2.0, 1.0};
  f.states[0].ev_soc = 0.1;
  f.states[1].ev_soc = 0.5;
  f.states[0].tank_dT = -2.0;
  f.states[1].tank_dT = 1.0;
  const auto problem = problem_for(grid, f, 60);
  const auto res = coordinate(problem);
  if (res.status != conic::SolveStatus::optimal) {
    v.require(false, "(d) SOCP not optimal");
    return "(d) n/a";
  }
  const PerUnitBase& b = grid.base;
  const double k = res.euro_per_pu_slot;
  oracle::ChainInstance inst{};
  for (int e = 0; e < 2; ++e) {
    inst.r[e] = grid.lines[e].r;
    inst.x[e] = grid.lines[e].x;
    inst.l_max[e] = grid.lines[e].l_max;
  }
  inst.v0 = grid.slack_v;
  inst.vmin = grid.buses[1].vmin;
  inst.vmax = grid.buses[1].vmax;
  inst.c_loss = problem.costs.c_loss * k;
  for (int j = 0; j < 2; ++j) {
    const auto& s = f.schedule[j];
    const auto& c = problem.costs.households[j];
    inst.h[j] = {b.power_to_pu(s.p_load), b.power_to_pu(s.q_load), b.power_to_pu(s.p_ev_max),
                 b.power_to_pu(f.params[j].hp_p_max), b.power_to_pu(s.p_hp_set), f.params[j].hp_tan_phi,
                 c.c_ev * k, c.c_hp_up * k, c.c_hp_down * k};
  }
  const auto bf = oracle::brute_force(inst, b.power_to_pu(0.05));
  const double rel = std::abs(bf.cost - res.objective_value) / res.objective_value;
  v.require(std::isfinite(bf.cost), "(d) brute force found no feasible point");
  v.require(rel <= 0.02, "(d) objective gap " + num(100.0 * rel) + " %");
  v.require(max_curtailment_kw(res) > 0.0, "(d) instance forces no curtailment");
  return "(d) gap " + num(100.0 * rel) + " %";
}

void criterion6() {
  Verdict v;
  std::string stats = fidelity_prohibitive(v);
  stats += ", " + fidelity_scaling(v);
  stats += ", " + fidelity_priority(v);
  stats += ", " + fidelity_brute_force(v);
  report(6, "model fidelity", v, stats);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void criterion7() {
  Verdict v;
  const fs::path root = fs::temp_directory_path() / "dercoord_acceptance_determinism";
  fs::remove_all(root);
  for (const char* run : {"a", "b"}) {
    const Day d = run_day(Mode::coordinated);
    const RunSummary s = summarize(d.scenario.grid, d.scenario.params, d.result.records, Mode::coordinated,
                                   d.scenario.config.dt_hours);
    emit(s, d.scenario.grid, d.result.records, root / run);
  }
  int files = 0;
  for (const auto& entry : fs::directory_iterator(root / "a")) {
    ++files;
    const auto name = entry.path().filename();
    v.require(fs::exists(root / "b" / name) && slurp(entry.path()) == slurp(root / "b" / name),
              name.string() + " differs");
  }
  v.require(files >= 4, "expected summary.json and three CSVs");
  fs::remove_all(root);
  report(7, "determinism", v, std::to_string(files) + " output files compared byte for byte");
}

void criterion8() {
  Verdict v;
  int points = 0, mismatches = 0;
  const double c0 = 1440.0;
  const int t_max = 96;
  for (int i = 0; i < 10; ++i) {
    for (int k = 0; k < 10; ++k) {
      const double soc = i / 9.0;
      const int t = 1 + k * 10 + (k == 9 ? 5 : 0);
      ++points;
      mismatches += ev_cost(soc, t, t_max, c0) != c0 * (1.0 - soc) / (t_max - t + 1);
    }
  }
  const double band = 5.0, slope = 150.0, floor = 10.0;
  for (int i = 0; i < 100; ++i) {
    const double dT = -6.0 + 12.0 * i / 99.0;
    const auto [up, down] = hp_costs(dT, band, slope, floor);
    const double norm = dT / band;
    ++points;
    mismatches += up != std::max(floor, slope * norm) || down != std::max(floor, -slope * norm);
  }
  v.require(mismatches == 0, std::to_string(mismatches) + " mismatches");
  report(8, "cost formulas", v, std::to_string(points) + " grid points evaluated");
}

}  // namespace

int main() {
  try {
    const Day unc = run_day(Mode::uncontrolled);
    const Day coo = run_day(Mode::coordinated);
    criterion1(unc, coo);
    criterion2(coo);
    criterion3(coo);
    criterion4(coo);
  } catch (const std::exception& e) {
    std::cout << "FAIL 1-4 acceptance day: " << e.what() << std::endl;
    ++failures;
  }
  criterion5();
  criterion6();
  criterion7();
  criterion8();
  std::cout << (failures == 0 ? "all criteria pass" : std::to_string(failures) + " criteria fail") << std::endl;
  return failures == 0 ? 0 : 1;
}
