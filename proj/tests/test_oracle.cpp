#include <gtest/gtest.h>

#include "helpers.hpp"
#include "ndop/two_box.hpp"

using namespace ndop;
using testkit::year;

namespace {

struct TwoBoxRun {
    Problem problem;
    TwoBoxGeometry geo;
    OracleConfig oracle;
    const PO4DOPParams& params() const { return dynamic_cast<const PO4DOPModel&>(*problem.model).params(); }
};

TwoBoxRun two_box(Index n_steps, int refine, double theta = 0.5, double I0 = 100.0)
{
    RunConfig c = testkit::two_box_config(n_steps);
    c.solver.theta = theta;
    c.model.insolation = SeasonalLight{I0, 0.04};
    TwoBoxRun r{build_problem(c), {}, {}};
    r.geo = two_box_geometry(r.problem.grid, r.problem.op);
    r.oracle.total_mass = r.problem.solve.total_mass;
    r.oracle.period = r.problem.op.period();
    r.oracle.n_time_steps = n_steps;
    r.oracle.theta = theta;
    r.oracle.refine = refine;
    return r;
}

} // namespace

TEST(TwoBoxGeometry, ExchangeIsTheFaceConductance)
{
    const auto r = two_box(12, 1);
    // kappa_v A / d with d the distance between the cell centres (25 + 225 m).
    EXPECT_NEAR(r.geo.exchange, 1e-4 * 1e10 / 250.0, 1e-12 * r.geo.exchange);
    EXPECT_DOUBLE_EQ(r.geo.euphotic_thickness, 50.0);
    EXPECT_DOUBLE_EQ(r.geo.aphotic_thickness, 450.0);
}

TEST(TwoBoxGeometry, RejectsOtherGrids)
{
    RunConfig c = testkit::two_box_config(12);
    c.grid.layers = {25.0, 25.0, 450.0};
    const Problem p = build_problem(c);
    EXPECT_THROW(two_box_geometry(p.grid, p.op), InputError);
}

TEST(Oracle, DarkOrbitIsUniformPhosphate)
{
    const auto r = two_box(24, 4, 0.5, 0.0);
    const auto orbit = two_box_oracle(r.params(), r.geo, r.oracle);
    const double mean = r.oracle.total_mass / (r.geo.area * 500.0);
    for (const auto& s : orbit.states) {
        EXPECT_NEAR(s[0], mean, 1e-14 * mean);
        EXPECT_NEAR(s[1], mean, 1e-14 * mean);
        EXPECT_EQ(s[2], 0.0);
        EXPECT_EQ(s[3], 0.0);
    }
}

TEST(Oracle, OrbitIsPeriodicAndConservesMass)
{
    const auto r = two_box(48, 5);
    const auto orbit = two_box_oracle(r.params(), r.geo, r.oracle);
    ASSERT_EQ(orbit.states.size(), 48u * 5u + 1u);
    const double C = r.oracle.total_mass;
    for (double m : orbit.mass) EXPECT_NEAR(m, C, 1e-12 * C);
    EXPECT_LE((orbit.states.back() - orbit.states.front()).cwiseAbs().maxCoeff(), 1e-11);
    // Biology is active: the surface box is depleted relative to the deep one.
    EXPECT_LT(orbit.states.front()[0], orbit.states.front()[1]);
    EXPECT_GT(orbit.states.front()[2], 0.0);
}

TEST(Oracle, RejectsBadSettings)
{
    auto r = two_box(12, 1);
    r.oracle.refine = 0;
    EXPECT_THROW(two_box_oracle(r.params(), r.geo, r.oracle), InputError);
}

TEST(Oracle, MatchesTheSolverOnTheSameTimeGrid)
{
    // With no refinement the oracle integrates exactly the discrete system the
    // periodic solver targets, so only solver tolerances separate them.
    for (double theta : {0.5, 1.0}) {
        const auto r = two_box(60, 1, theta);
        const auto orbit = two_box_oracle(r.params(), r.geo, r.oracle);
        const auto [y, rep] = fixed_point_solve(r.problem.grid, r.problem.solve, r.problem.op, *r.problem.model);
        ASSERT_TRUE(rep.converged) << rep.message;
        const auto cmp = compare_orbits(y, orbit, 2.0);
        EXPECT_LE(cmp.max_relative, 1e-9) << "theta " << theta;
    }
}

TEST(Oracle, SolverConvergesToTheFineOrbit)
{
    // Crank-Nicolson: the gap to a fine reference shrinks by about four when
    // the step is halved.
    std::vector<double> gap;
    for (Index n : {60, 120}) {
        const auto r = two_box(n, 960 / static_cast<int>(n));
        const auto orbit = two_box_oracle(r.params(), r.geo, r.oracle);
        const auto [y, rep] = fixed_point_solve(r.problem.grid, r.problem.solve, r.problem.op, *r.problem.model);
        ASSERT_TRUE(rep.converged);
        gap.push_back(compare_orbits(y, orbit, 2.0).max_relative);
    }
    EXPECT_GT(gap[0] / gap[1], 3.0);
    EXPECT_LT(gap[0] / gap[1], 5.0);
}

TEST(Oracle, ComparisonNeedsMatchingTimeGrids)
{
    const auto r = two_box(12, 2);
    const auto orbit = two_box_oracle(r.params(), r.geo, r.oracle);
    const auto y = TracerState::constant(r.problem.grid, year, 10, 1.0, 0.0);
    EXPECT_THROW(compare_orbits(y, orbit, 2.0), InputError);
}

TEST(Oracle, DopAmplitudeFallsLikeInverseLambda)
{
    const auto r = two_box(120, 2);
    const auto sweep = lambda_sweep(r.params(), r.geo, r.oracle, {10.0, 31.6227766, 100.0, 316.227766, 1000.0});
    ASSERT_EQ(sweep.amplitude.size(), 5u);
    for (std::size_t k = 1; k < sweep.amplitude.size(); ++k) EXPECT_LT(sweep.amplitude[k], sweep.amplitude[k - 1]);
    EXPECT_NEAR(sweep.slope, -1.0, 0.05);
    EXPECT_THROW(lambda_sweep(r.params(), r.geo, r.oracle, {10.0}), InputError);
}
