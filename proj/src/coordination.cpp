#include "dercoord/coordination.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dercoord {

namespace {

using Index = Eigen::Index;
using Builder = conic::ProgramBuilder<double>;

// Devices whose upper power bound is below this (pu) are treated as absent.
constexpr double kNegligiblePu = 1e-9;

struct Term {
  Index var;
  double coef;
};

// Variables in `terms` with index -1 are constants and are dropped.
Index add_row(Builder& builder, std::initializer_list<Term> terms, double rhs) {
  std::vector<std::pair<Index, double>> row;
  for (const auto& t : terms) {
    if (t.var >= 0) row.emplace_back(t.var, t.coef);
  }
  return builder.add_equality(row, rhs);
}

// -tan p <= q <= tan p via two nonnegative slacks.
void add_power_factor(Builder& builder, Index p, Index q, double tan_phi) {
  const Index upper = builder.add_nonnegative();
  const Index lower = builder.add_nonnegative();
  add_row(builder, {{p, tan_phi}, {q, -1.0}, {upper, -1.0}}, 0.0);
  add_row(builder, {{p, tan_phi}, {q, 1.0}, {lower, -1.0}}, 0.0);
}

// ||(p, q)|| <= rating with the rating held in a fixed variable.
void add_rating(Builder& builder, Index p, Index q, double rating) {
  const Index radius = builder.add_variable();
  builder.add_equality({{radius, 1.0}}, rating);
  std::vector<Index> cone{radius, p};
  if (q >= 0) cone.push_back(q);
  builder.add_second_order(std::move(cone));
}

double value(const Eigen::VectorXd& x, Index var) { return var >= 0 ? x[var] : 0.0; }

}  // namespace

CoordinationProgram build(const CoordinationProblem& problem) {
  const Grid& grid = problem.grid;
  const Topology topo = analyze(grid);
  const std::vector<int> household_bus = grid.household_buses();
  const std::size_t households = household_bus.size();
  if (problem.schedule.size() != households || problem.params.size() != households ||
      problem.costs.households.size() != households) {
    throw BuildError("coordination problem has " + std::to_string(problem.schedule.size()) +
                     " schedules, " + std::to_string(problem.params.size()) + " parameter sets and " +
                     std::to_string(problem.costs.households.size()) + " cost sets for " +
                     std::to_string(households) + " household buses");
  }

  const PerUnitBase& base = grid.base;
  CoordinationProgram out;
  out.euro_per_pu_slot = base.power_va * 1e-6 * problem.dt_hours;
  const double k = out.euro_per_pu_slot;
  Builder b;

  // Household devices and injections.
  out.households.resize(households);
  for (std::size_t j = 0; j < households; ++j) {
    const DeviceSchedule& sched = problem.schedule[j];
    const HouseholdParams& par = problem.params[j];
    const HouseholdCosts& cost = problem.costs.households[j];
    HouseholdVars& hv = out.households[j];

    hv.p = b.add_variable();
    hv.q = b.add_variable();

    const double pv_fore = base.power_to_pu(sched.p_pv_fore);
    const double pv_rating = base.power_to_pu(par.pv_rating);
    if (pv_fore > kNegligiblePu && pv_rating > kNegligiblePu) {
      hv.p_pv = b.add_nonnegative();
      hv.pv_down = b.add_nonnegative(cost.c_pv * k);
      add_row(b, {{hv.p_pv, 1.0}, {hv.pv_down, 1.0}}, pv_fore);
      if (par.pv_tan_phi > 0.0) {
        hv.q_pv = b.add_variable();
        add_power_factor(b, hv.p_pv, hv.q_pv, par.pv_tan_phi);
      }
      add_rating(b, hv.p_pv, hv.q_pv, pv_rating);
      ++out.second_order_cones;
    } else {
      out.constant_cost += cost.c_pv * k * std::max(pv_fore, 0.0);
    }

    const double ev_max = base.power_to_pu(sched.p_ev_max);
    const double ev_rating = base.power_to_pu(par.ev_rating);
    if (ev_max > kNegligiblePu && ev_rating > kNegligiblePu) {
      hv.p_ev = b.add_nonnegative();
      hv.ev_down = b.add_nonnegative(cost.c_ev * k);
      add_row(b, {{hv.p_ev, 1.0}, {hv.ev_down, 1.0}}, ev_max);
      if (par.ev_tan_phi > 0.0) {
        hv.q_ev = b.add_variable();
        add_power_factor(b, hv.p_ev, hv.q_ev, par.ev_tan_phi);
      }
      add_rating(b, hv.p_ev, hv.q_ev, ev_rating);
      ++out.second_order_cones;
    } else {
      out.constant_cost += cost.c_ev * k * std::max(ev_max, 0.0);
    }

    const double hp_max = base.power_to_pu(par.hp_p_max);
    const double hp_set = base.power_to_pu(sched.p_hp_set);
    if (hp_max > kNegligiblePu) {
      hv.p_hp = b.add_nonnegative();
      const Index headroom = b.add_nonnegative();
      add_row(b, {{hv.p_hp, 1.0}, {headroom, 1.0}}, hp_max);
      hv.q_hp = b.add_variable();
      add_row(b, {{hv.q_hp, 1.0}, {hv.p_hp, -par.hp_tan_phi}}, 0.0);
      hv.hp_down = b.add_nonnegative(cost.c_hp_down * k);
      hv.hp_up = b.add_nonnegative(cost.c_hp_up * k);
      // hp_down >= set - p_hp, hp_up >= p_hp - set
      const Index down_slack = b.add_nonnegative();
      const Index up_slack = b.add_nonnegative();
      add_row(b, {{hv.hp_down, 1.0}, {hv.p_hp, 1.0}, {down_slack, -1.0}}, hp_set);
      add_row(b, {{hv.hp_up, 1.0}, {hv.p_hp, -1.0}, {up_slack, -1.0}}, -hp_set);
    } else {
      out.constant_cost += cost.c_hp_down * k * std::max(hp_set, 0.0);
    }

    // p = p_pv - p_load - p_ev - p_hp ; q = q_pv + q_ev - q_hp - q_load
    add_row(b, {{hv.p, 1.0}, {hv.p_pv, -1.0}, {hv.p_ev, 1.0}, {hv.p_hp, 1.0}},
            -base.power_to_pu(sched.p_load));
    add_row(b, {{hv.q, 1.0}, {hv.q_pv, -1.0}, {hv.q_ev, -1.0}, {hv.q_hp, 1.0}},
            -base.power_to_pu(sched.q_load));
  }

  // Network.
  const int slack = grid.slack_bus();
  const auto n = grid.buses.size();
  const auto m = grid.lines.size();
  NetworkVars& net = out.network;
  net.v.assign(n, -1);
  net.P.assign(m, -1);
  net.Q.assign(m, -1);
  net.l.assign(m, -1);

  for (const auto& bus : grid.buses) {
    if (bus.id == slack) continue;
    const double vmin = bus.vmin + problem.voltage_margin;
    const double vmax = bus.vmax - problem.voltage_margin;
    if (!(vmin < vmax)) throw BuildError("voltage margin closes the band at bus " + std::to_string(bus.id));
    const Index v = b.add_variable();
    net.v[bus.id] = v;
    const Index above = b.add_nonnegative();
    const Index below = b.add_nonnegative();
    b.add_equality({{v, 1.0}, {above, -1.0}}, vmin);
    b.add_equality({{v, 1.0}, {below, 1.0}}, vmax);
  }

  for (std::size_t e = 0; e < m; ++e) {
    const Line& line = grid.lines[e];
    net.P[e] = b.add_variable();
    net.Q[e] = b.add_variable();
    net.l[e] = b.add_variable(problem.costs.c_loss * k * line.r);
    const Index headroom = b.add_nonnegative();
    b.add_equality({{net.l[e], 1.0}, {headroom, 1.0}}, line.l_max * (1.0 - problem.loading_margin));

    // v_to = v_from - 2 (r P + x Q) + (r^2 + x^2) l
    const Index v_from = net.v[line.from_bus];
    const double v_from_const = v_from < 0 ? grid.slack_v : 0.0;
    add_row(b,
            {{net.v[line.to_bus], 1.0},
             {v_from, -1.0},
             {net.P[e], 2.0 * line.r},
             {net.Q[e], 2.0 * line.x},
             {net.l[e], -(line.r * line.r + line.x * line.x)}},
            v_from_const);

    // P^2 + Q^2 <= l v_from as ||(2P, 2Q, l - v_from)|| <= l + v_from
    const Index t0 = b.add_variable();
    const Index t1 = b.add_variable();
    const Index t2 = b.add_variable();
    const Index t3 = b.add_variable();
    add_row(b, {{t0, 1.0}, {net.l[e], -1.0}, {v_from, -1.0}}, v_from_const);
    add_row(b, {{t1, 1.0}, {net.P[e], -2.0}}, 0.0);
    add_row(b, {{t2, 1.0}, {net.Q[e], -2.0}}, 0.0);
    add_row(b, {{t3, 1.0}, {net.l[e], -1.0}, {v_from, 1.0}}, -v_from_const);
    b.add_second_order({t0, t1, t2, t3});
    ++out.second_order_cones;
  }

  // Nodal balances: p_j = sum_k P_jk - (P_ij - r_ij l_ij), same for q.
  std::vector<Index> household_of_bus(n, -1);
  for (std::size_t j = 0; j < households; ++j) household_of_bus[household_bus[j]] = static_cast<Index>(j);
  for (const auto& bus : grid.buses) {
    if (bus.id == slack) continue;
    const int parent = topo.parent_line[bus.id];
    const Line& pl = grid.lines[parent];
    std::vector<std::pair<Index, double>> prow{{net.P[parent], 1.0}, {net.l[parent], -pl.r}};
    std::vector<std::pair<Index, double>> qrow{{net.Q[parent], 1.0}, {net.l[parent], -pl.x}};
    for (int c : topo.child_lines[bus.id]) {
      prow.emplace_back(net.P[c], -1.0);
      qrow.emplace_back(net.Q[c], -1.0);
    }
    const Index j = household_of_bus[bus.id];
    if (j >= 0) {
      prow.emplace_back(out.households[j].p, 1.0);
      qrow.emplace_back(out.households[j].q, 1.0);
    }
    b.add_equality(prow, 0.0);
    b.add_equality(qrow, 0.0);
  }

  out.program = b.finish();
  return out;
}

conic::ConicSolution<double> solve(const CoordinationProgram& program,
                                   const conic::SolverSettings& settings) {
  return conic::solve(program.program, settings);
}

CoordinationResult extract(const CoordinationProblem& problem, const CoordinationProgram& program,
                           const conic::ConicSolution<double>& solution) {
  if (solution.status != conic::SolveStatus::optimal) {
    throw std::runtime_error(std::string("cannot extract setpoints from a ") +
                             conic::to_string(solution.status) + " solve");
  }
  const Grid& grid = problem.grid;
  const PerUnitBase& base = grid.base;
  const Eigen::VectorXd& x = solution.x;
  const double k = program.euro_per_pu_slot;

  CoordinationResult res;
  res.status = solution.status;
  res.iterations = solution.iterations;
  res.euro_per_pu_slot = k;
  res.households.resize(program.households.size());
  for (std::size_t j = 0; j < program.households.size(); ++j) {
    const HouseholdVars& hv = program.households[j];
    const DeviceSchedule& sched = problem.schedule[j];
    const HouseholdCosts& cost = problem.costs.households[j];
    HouseholdSetpoint& sp = res.households[j];
    auto kw = [&](Index var) { return base.power_to_kw(value(x, var)); };
    // Interior-point iterates sit within solver tolerance of the bounds;
    // clamp so downstream device models see admissible powers.
    const double pv_fore = std::max(sched.p_pv_fore, 0.0);
    const double ev_max = std::max(sched.p_ev_max, 0.0);
    sp.p_pv = std::clamp(kw(hv.p_pv), 0.0, pv_fore);
    sp.q_pv = kw(hv.q_pv);
    sp.p_ev = std::clamp(kw(hv.p_ev), 0.0, ev_max);
    sp.q_ev = kw(hv.q_ev);
    sp.pv_down = pv_fore - sp.p_pv;
    sp.ev_down = ev_max - sp.p_ev;
    if (hv.p_hp >= 0) {
      sp.p_hp = std::clamp(kw(hv.p_hp), 0.0, problem.params[j].hp_p_max);
      sp.q_hp = problem.params[j].hp_tan_phi * sp.p_hp;
      sp.hp_down = std::max(kw(hv.hp_down), 0.0);
      sp.hp_up = std::max(kw(hv.hp_up), 0.0);
    } else {
      sp.hp_down = std::max(sched.p_hp_set, 0.0);
    }

    res.breakdown.pv += cost.c_pv * k * base.power_to_pu(sp.pv_down);
    res.breakdown.ev += cost.c_ev * k * base.power_to_pu(sp.ev_down);
    res.breakdown.hp_up += cost.c_hp_up * k * base.power_to_pu(sp.hp_up);
    res.breakdown.hp_down += cost.c_hp_down * k * base.power_to_pu(sp.hp_down);
  }

  const auto n = static_cast<Index>(grid.buses.size());
  const auto m = static_cast<Index>(grid.lines.size());
  res.v.resize(n);
  for (Index i = 0; i < n; ++i) {
    const Index var = program.network.v[i];
    res.v[i] = var >= 0 ? x[var] : grid.slack_v;
  }
  res.P.resize(m);
  res.Q.resize(m);
  res.l.resize(m);
  for (Index e = 0; e < m; ++e) {
    res.P[e] = x[program.network.P[e]];
    res.Q[e] = x[program.network.Q[e]];
    res.l[e] = x[program.network.l[e]];
    res.breakdown.losses += problem.costs.c_loss * k * grid.lines[e].r * res.l[e];
  }
  res.objective_value = solution.objective + program.constant_cost;
  return res;
}

CoordinationResult coordinate(const CoordinationProblem& problem,
                              const conic::SolverSettings& settings) {
  const CoordinationProgram program = build(problem);
  const auto solution = solve(program, settings);
  if (solution.status != conic::SolveStatus::optimal) {
    CoordinationResult res;
    res.status = solution.status;
    res.iterations = solution.iterations;
    res.euro_per_pu_slot = program.euro_per_pu_slot;
    return res;
  }
  return extract(problem, program, solution);
}

Eigen::VectorXd relaxation_gap(const Grid& grid, const CoordinationResult& result) {
  Eigen::VectorXd gap(static_cast<Index>(grid.lines.size()));
  for (Index e = 0; e < gap.size(); ++e) {
    const Line& line = grid.lines[e];
    gap[e] = result.l[e] * result.v[line.from_bus] - (result.P[e] * result.P[e] + result.Q[e] * result.Q[e]);
  }
  return gap;
}

void setpoint_injections(const Grid& grid, const ScheduleSlot& schedule,
                         const std::vector<HouseholdSetpoint>& setpoints, Eigen::VectorXd& p,
                         Eigen::VectorXd& q) {
  const auto buses = grid.household_buses();
  if (schedule.size() != buses.size() || setpoints.size() != buses.size()) {
    throw std::invalid_argument("setpoint_injections: household count mismatch");
  }
  p = Eigen::VectorXd::Zero(static_cast<Index>(grid.buses.size()));
  q = Eigen::VectorXd::Zero(static_cast<Index>(grid.buses.size()));
  for (std::size_t j = 0; j < buses.size(); ++j) {
    const HouseholdSetpoint& sp = setpoints[j];
    const DeviceSchedule& sched = schedule[j];
    p[buses[j]] = grid.base.power_to_pu(sp.p_pv - sched.p_load - sp.p_ev - sp.p_hp);
    q[buses[j]] = grid.base.power_to_pu(sp.q_pv + sp.q_ev - sp.q_hp - sched.q_load);
  }
}

std::vector<HouseholdSetpoint> scheduled_setpoints(const ScheduleSlot& schedule,
                                                   const std::vector<HouseholdParams>& params) {
  std::vector<HouseholdSetpoint> out(schedule.size());
  for (std::size_t j = 0; j < schedule.size(); ++j) {
    out[j].p_pv = schedule[j].p_pv_fore;
    out[j].p_ev = schedule[j].p_ev_max;
    out[j].p_hp = schedule[j].p_hp_set;
    out[j].q_hp = schedule[j].p_hp_set * params[j].hp_tan_phi;
  }
  return out;
}

}  // namespace dercoord
