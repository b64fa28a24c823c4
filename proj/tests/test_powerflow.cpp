#include <gtest/gtest.h>

#include <random>

#include "dercoord/powerflow.hpp"
#include "fixtures.hpp"
#include "oracles/single_line.hpp"

using namespace dercoord;
using fx::chain;
using fx::two_bus;

namespace {

// Residuals of the nodal balances, the voltage relation and the exact
// current definition at a power-flow solution.
double max_branch_flow_residual(const Grid& grid, const Eigen::VectorXd& p, const Eigen::VectorXd& q,
                                const PowerFlowResult& res) {
  const Topology topo = analyze(grid);
  double worst = 0.0;
  for (const auto& bus : grid.buses) {
    if (bus.kind == BusKind::slack) continue;
    const int parent = topo.parent_line[bus.id];
    const Line& pl = grid.lines[parent];
    double pbal = -(res.P[parent] - pl.r * res.l[parent]);
    double qbal = -(res.Q[parent] - pl.x * res.l[parent]);
    for (int c : topo.child_lines[bus.id]) {
      pbal += res.P[c];
      qbal += res.Q[c];
    }
    worst = std::max({worst, std::abs(pbal - p[bus.id]), std::abs(qbal - q[bus.id])});
  }
  for (std::size_t k = 0; k < grid.lines.size(); ++k) {
    const Line& line = grid.lines[k];
    const double vrel = res.v[line.from_bus] - 2.0 * (line.r * res.P[k] + line.x * res.Q[k]) +
                        (line.r * line.r + line.x * line.x) * res.l[k];
    worst = std::max(worst, std::abs(vrel - res.v[line.to_bus]));
    worst = std::max(worst, std::abs(res.l[k] * res.v[line.from_bus] -
                                     (res.P[k] * res.P[k] + res.Q[k] * res.Q[k])));
  }
  return worst;
}

Grid random_tree(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> imp(0.002, 0.03);
  Grid grid;
  grid.buses.push_back(fx::slack_bus());
  for (int i = 1; i < n; ++i) {
    grid.buses.push_back(fx::household_bus(i, i - 1));
    std::uniform_int_distribution<int> parent(0, i - 1);
    grid.lines.push_back({parent(rng), i, imp(rng), imp(rng), 5.0});
  }
  return grid;
}

}  // namespace

TEST(PowerFlow, ZeroInjectionGivesFlatProfile) {
  Grid grid = chain(5, 0.02, 0.01);
  grid.slack_v = 1.0404;
  const auto res = solve_power_flow(grid, std::vector<Injection>{});
  ASSERT_TRUE(res.converged);
  for (int i = 0; i < 6; ++i) EXPECT_NEAR(res.v[i], 1.0404, 1e-12);
  EXPECT_NEAR(res.P.cwiseAbs().maxCoeff(), 0.0, 1e-12);
  EXPECT_NEAR(res.l.cwiseAbs().maxCoeff(), 0.0, 1e-12);
  EXPECT_NEAR(res.losses, 0.0, 1e-12);
}

TEST(PowerFlow, SingleLineMatchesAnalyticSolution) {
  const Grid grid = two_bus(0.05, 0.05);
  const std::vector<Injection> inj{{1, -0.1, 0.0}};
  const auto res = solve_power_flow(grid, inj);
  ASSERT_TRUE(res.converged);
  const auto ref = oracle::single_line(0.05, 0.05, 1.0, 0.1, 0.0);
  EXPECT_NEAR(res.v[1], ref.v1, 1e-10);
  EXPECT_NEAR(res.P[0], ref.P, 1e-10);
  EXPECT_NEAR(res.Q[0], ref.Q, 1e-10);
  EXPECT_NEAR(res.l[0], ref.l, 1e-10);
}

TEST(PowerFlow, RandomSingleLinesMatchAnalyticSolution) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> imp(0.001, 0.1);
  std::uniform_real_distribution<double> load(-0.3, 0.6);
  std::uniform_real_distribution<double> slack(0.95, 1.05);
  for (int i = 0; i < 100; ++i) {
    const double r = imp(rng), x = imp(rng), p = load(rng), q = 0.3 * load(rng);
    Grid grid = two_bus(r, x);
    grid.slack_v = slack(rng);
    const auto res = solve_power_flow(grid, std::vector<Injection>{{1, -p, -q}});
    ASSERT_TRUE(res.converged);
    const auto ref = oracle::single_line(r, x, grid.slack_v, p, q);
    EXPECT_NEAR(res.v[1], ref.v1, 1e-10);
    EXPECT_NEAR(res.P[0], ref.P, 1e-10);
    EXPECT_NEAR(res.Q[0], ref.Q, 1e-10);
    EXPECT_NEAR(res.l[0], ref.l, 1e-10);
  }
}

TEST(PowerFlow, BranchFlowEquationsHoldExactlyOnRandomTrees) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> load(-0.02, 0.06);
  for (int trial = 0; trial < 40; ++trial) {
    const Grid grid = random_tree(rng, 3 + trial % 15);
    const auto n = static_cast<Eigen::Index>(grid.buses.size());
    Eigen::VectorXd p(n), q(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      p[i] = i == 0 ? 0.0 : -load(rng);
      q[i] = i == 0 ? 0.0 : -0.3 * load(rng);
    }
    const auto res = solve_power_flow(grid, p, q);
    ASSERT_TRUE(res.converged);
    EXPECT_LT(max_branch_flow_residual(grid, p, q, res), 1e-8);
    // slack supplies net load plus losses
    EXPECT_NEAR(res.slack_p, -p.sum() + res.losses, 1e-8);
  }
}

TEST(PowerFlow, MoreLoadNeverRaisesDownstreamVoltage) {
  const Grid grid = chain(6, 0.015, 0.008);
  Eigen::VectorXd p = Eigen::VectorXd::Constant(7, -0.02);
  Eigen::VectorXd q = Eigen::VectorXd::Constant(7, -0.005);
  p[0] = q[0] = 0.0;
  auto prev = solve_power_flow(grid, p, q);
  for (int step = 0; step < 10; ++step) {
    p[3] -= 0.01;
    const auto next = solve_power_flow(grid, p, q);
    for (int bus = 1; bus <= 6; ++bus) EXPECT_LE(next.v[bus], prev.v[bus] + 1e-15);
    prev = next;
  }
}

TEST(PowerFlow, IterationCapFlagsNonConvergence) {
  const Grid grid = chain(4, 0.05, 0.05);
  PowerFlowOptions options;
  options.max_iterations = 1;
  const auto res = solve_power_flow(grid, std::vector<Injection>{{4, -0.3, -0.1}}, options);
  EXPECT_FALSE(res.converged);
  EXPECT_EQ(res.iterations, 1);
  EXPECT_THROW(check_limits(grid, res), std::invalid_argument);
}

TEST(PowerFlow, VoltageCollapseIsADivergenceError) {
  const Grid grid = two_bus(0.5, 0.5);
  EXPECT_THROW(solve_power_flow(grid, std::vector<Injection>{{1, -5.0, -2.0}}), DivergenceError);
}

TEST(PowerFlow, RejectsSlackAndDuplicateInjections) {
  const Grid grid = chain(2, 0.01, 0.01);
  EXPECT_THROW(solve_power_flow(grid, std::vector<Injection>{{0, -0.1, 0.0}}), std::invalid_argument);
  EXPECT_THROW(solve_power_flow(grid, std::vector<Injection>{{1, -0.1, 0.0}, {1, 0.0, 0.0}}),
               std::invalid_argument);
}

TEST(CheckLimits, FlatResultHasNoViolations) {
  const Grid grid = chain(3, 0.01, 0.01);
  const auto res = solve_power_flow(grid, std::vector<Injection>{});
  EXPECT_TRUE(check_limits(grid, res).empty());
}

TEST(CheckLimits, UnderVoltageAndOverloadThresholds) {
  Grid grid = two_bus(0.01, 0.01, 1.0);
  PowerFlowResult res;
  res.converged = true;
  res.v = Eigen::Vector2d(1.0, 0.88 * 0.88);
  res.P = res.Q = Eigen::VectorXd::Zero(1);
  res.l = Eigen::VectorXd::Constant(1, 1.21);
  const auto v = check_limits(grid, res);
  ASSERT_EQ(v.size(), 2u);
  EXPECT_EQ(v[0].kind, ViolationKind::under_voltage);
  EXPECT_EQ(v[0].element, 1);
  EXPECT_NEAR(v[0].magnitude, 0.88, 1e-12);
  EXPECT_EQ(v[1].kind, ViolationKind::overload);
  EXPECT_NEAR(v[1].magnitude, 110.0, 1e-9);
  EXPECT_EQ(describe(grid, v[1]), "overload on line (0,1), 110.0%");

  res.v[1] = 1.12 * 1.12;
  res.l[0] = 0.5;
  const auto over = check_limits(grid, res);
  ASSERT_EQ(over.size(), 1u);
  EXPECT_EQ(over[0].kind, ViolationKind::over_voltage);
}
