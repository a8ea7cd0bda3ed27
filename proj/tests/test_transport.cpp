#include <gtest/gtest.h>

#include <random>

#include "helpers.hpp"
#include "ndop/transport.hpp"

using namespace ndop;
using testkit::constant_diffusivity;

namespace {

// One column of two cells, 10 m x 10 m x (30 m + 70 m).
Grid two_cell_column()
{
    return build_grid(HorizontalMesh{1, 1, 10.0, 10.0}, std::vector<double>{100.0}, 30.0, LayerThicknesses{{30.0, 70.0}});
}

} // namespace

TEST(Transport, TwoCellDiffusionStencil)
{
    const Grid g = two_cell_column();
    const double kappa = 2e-3;
    const auto op = assemble_transport(g, zero_velocity(g, 1.0, 1), constant_diffusivity(g, kappa, 1.0, 1));
    const double A = 100.0, d = 50.0;
    const double c = kappa * A / d;
    const Eigen::MatrixXd K = Eigen::MatrixXd(op.stiffness(0));
    EXPECT_NEAR(K(0, 0), c, 1e-18);
    EXPECT_NEAR(K(0, 1), -c, 1e-18);
    EXPECT_NEAR(K(1, 0), -c, 1e-18);
    EXPECT_NEAR(K(1, 1), c, 1e-18);

    // apply() returns V^-1 K y: each basis vector maps to a stencil column.
    const double V0 = 3000.0, V1 = 7000.0;
    for (Index j = 0; j < 2; ++j) {
        Vector e = Vector::Zero(2);
        e[j] = 1.0;
        const TracerField out = apply(g, op, 0, TracerField(g, e));
        const double sign = j == 0 ? 1.0 : -1.0;
        EXPECT_NEAR(out[0], sign * c / V0, 1e-20);
        EXPECT_NEAR(out[1], -sign * c / V1, 1e-20);
    }
}

TEST(Transport, ApplyToZeroAndConstants)
{
    std::mt19937_64 rng(4);
    const Grid g = testkit::random_grid(rng, 6, 6, 8);
    const Index N = 4;
    const auto op = assemble_transport(g, overturning_velocity(g, {1e5, 0.3, 0}, 100.0, N),
                                       layered_diffusivity(g, {100.0, 1e-3, 0.2, 0}, 100.0, N));
    for (Index t = 0; t <= N; ++t) {
        EXPECT_EQ(apply(g, op, t, TracerField(g)).values().cwiseAbs().maxCoeff(), 0.0);
        const TracerField ones = apply(g, op, t, TracerField(g, 1.0));
        const Vector scaled = (ones.values().array() * g.volumes().array()).matrix();
        EXPECT_LE(scaled.cwiseAbs().maxCoeff(), 1e-12 * op.stiffness(t).cwiseAbs().sum());
    }
    EXPECT_THROW(apply(g, op, N + 1, TracerField(g)), std::out_of_range);
    EXPECT_THROW(apply(g, op, -1, TracerField(g)), std::out_of_range);
}

TEST(Transport, ColumnSumsVanishForAnyVelocity)
{
    // Column sums vanish by construction, even for a velocity that is not
    // divergence free.
    const Grid g = two_cell_column();
    VelocityField v = zero_velocity(g, 1.0, 1);
    v.interior[0][0] = 5.0;
    const auto op = assemble_transport(g, v, constant_diffusivity(g, 1e-3, 1.0, 1), Advection::Upwind, false);
    const Vector colsum = Vector::Ones(2).transpose() * Eigen::MatrixXd(op.stiffness(0));
    EXPECT_LE(colsum.cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Transport, IndexPeriodIsSameMatrix)
{
    std::mt19937_64 rng(6);
    const Grid g = testkit::random_grid(rng, 4, 4, 6);
    const Index N = 6;
    const auto op = assemble_transport(g, overturning_velocity(g, {1e5, 0.5, 0}, 10.0, N),
                                       layered_diffusivity(g, {10.0, 1e-3, 0.0, 0}, 10.0, N));
    EXPECT_EQ(&op.stiffness(0), &op.stiffness(N));
    EXPECT_EQ(op.unique_matrices().size(), static_cast<std::size_t>(N));
}

TEST(Transport, SegmentedFieldsShareMatrices)
{
    std::mt19937_64 rng(6);
    const Grid g = testkit::random_grid(rng, 4, 4, 6);
    const auto op = assemble_transport(g, overturning_velocity(g, {1e5, 0.5, 4}, 10.0, 12),
                                       layered_diffusivity(g, {10.0, 1e-3, 0.3, 4}, 10.0, 12));
    EXPECT_EQ(op.unique_matrices().size(), 4u);
}

TEST(Transport, RejectsMismatchedFields)
{
    const Grid g = two_cell_column();
    const Grid other = build_grid(HorizontalMesh{2, 1, 10.0, 10.0}, std::vector<double>{100.0, 100.0}, 30.0,
                                  LayerThicknesses{{30.0, 70.0}});
    EXPECT_THROW(assemble_transport(g, zero_velocity(other, 1.0, 1), constant_diffusivity(g, 1e-3, 1.0, 1)), InputError);
    EXPECT_THROW(assemble_transport(g, zero_velocity(g, 1.0, 2), constant_diffusivity(g, 1e-3, 1.0, 1)), InputError);
    EXPECT_THROW(assemble_transport(g, zero_velocity(g, 1.0, 1), constant_diffusivity(g, 0.0, 1.0, 1)), InputError);
}

TEST(VerifyVelocity, ZeroVelocityHasNoResidual)
{
    std::mt19937_64 rng(1);
    const Grid g = testkit::random_grid(rng, 5, 5, 6);
    const auto rep = verify_velocity(g, zero_velocity(g, 1.0, 3));
    EXPECT_TRUE(rep.passed);
    EXPECT_EQ(rep.max_divergence, 0.0);
    EXPECT_EQ(rep.max_boundary_flux, 0.0);
}

TEST(VerifyVelocity, OverturningIsDivergenceFree)
{
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 5; ++trial) {
        const Grid g = testkit::random_grid(rng, 12, 12, 12);
        const auto v = overturning_velocity(g, {3e5, 0.4, 0}, 1.0, 5);
        const auto rep = verify_velocity(g, v);
        EXPECT_TRUE(rep.passed) << "max " << rep.max_divergence;
        EXPECT_LE(rep.max_divergence, 1e-12);
        EXPECT_EQ(v.interior.front(), v.at(5));
    }
}

TEST(VerifyVelocity, OverturningActuallyMovesWater)
{
    const std::vector<double> depth(16, 500.0);
    const Grid g = build_grid(HorizontalMesh{4, 4, 1e4, 1e4}, depth, 50.0, LayerThicknesses{{50, 150, 300}});
    const auto v = overturning_velocity(g, {1e5, 0.0, 0}, 1.0, 1);
    double largest = 0.0;
    for (double q : v.interior[0]) largest = std::max(largest, std::abs(q));
    EXPECT_GT(largest, 1e3);
}

TEST(VerifyVelocity, PerturbedFaceFlagsItsCells)
{
    std::mt19937_64 rng(13);
    const Grid g = testkit::random_grid(rng, 6, 6, 8);
    auto v = overturning_velocity(g, {2e5, 0.0, 0}, 1.0, 2);
    const std::size_t face = g.interior_faces().size() / 2;
    v.interior[1][face] += 1e3;
    const auto rep = verify_velocity(g, v);
    EXPECT_FALSE(rep.passed);
    ASSERT_EQ(rep.flagged.size(), 2u);
    const auto& f = g.interior_faces()[face];
    for (const auto& c : rep.flagged) {
        EXPECT_EQ(c.step, 1);
        EXPECT_TRUE(c.cell == f.lo || c.cell == f.hi);
    }
    // Assembly refuses the field and names the offending cells.
    try {
        assemble_transport(g, v, layered_diffusivity(g, {10.0, 1e-4, 0.0, 0}, 1.0, 2));
        FAIL() << "expected assembly to refuse the field";
    } catch (const InputError& e) {
        EXPECT_NE(std::string(e.what()).find("cell " + std::to_string(f.lo)), std::string::npos) << e.what();
    }
}

TEST(VerifyVelocity, BoundaryFluxFails)
{
    const Grid g = two_cell_column();
    auto v = zero_velocity(g, 1.0, 1);
    v.boundary[0][0] = 1.0;
    EXPECT_FALSE(verify_velocity(g, v).passed);
}

TEST(OperatorProperties, PureDiffusionPassesAll)
{
    std::mt19937_64 rng(31);
    const Grid g = testkit::random_grid(rng, 5, 5, 8);
    const auto op = assemble_transport(g, zero_velocity(g, 1.0, 2), layered_diffusivity(g, {50.0, 1e-3, 0.5, 0}, 1.0, 2));
    const auto rep = check_operator_properties(g, op);
    EXPECT_TRUE(rep.conservation_ok);
    EXPECT_TRUE(rep.kernel_ok);
    EXPECT_TRUE(rep.monotone_ok);
    EXPECT_TRUE(rep.coercive_ok);
    // The diffusion matrix is symmetric with nonpositive off-diagonals.
    const Eigen::MatrixXd K = Eigen::MatrixXd(op.stiffness(0));
    EXPECT_LE((K - K.transpose()).cwiseAbs().maxCoeff(), 1e-18);
    for (Index i = 0; i < K.rows(); ++i)
        for (Index j = 0; j < K.cols(); ++j)
            if (i != j) {
                EXPECT_LE(K(i, j), 0.0);
            }
}

TEST(OperatorProperties, UpwindOnDivergenceFreeFlowIsMonotone)
{
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 4; ++trial) {
        const Grid g = testkit::random_grid(rng, 8, 8, 10);
        const auto op = assemble_transport(g, overturning_velocity(g, {5e6, 0.3, 0}, 1.0, 3),
                                           layered_diffusivity(g, {1.0, 1e-6, 0.0, 0}, 1.0, 3));
        const auto rep = check_operator_properties(g, op);
        EXPECT_TRUE(rep.conservation_ok);
        EXPECT_TRUE(rep.kernel_ok);
        EXPECT_TRUE(rep.monotone_ok);
    }
}

TEST(OperatorProperties, DivergentFlowBreaksMonotonicity)
{
    // A single face flux out of the top cell is a source/sink pair; with
    // weak diffusion the quadratic form becomes indefinite.
    const Grid g = two_cell_column();
    VelocityField v = zero_velocity(g, 1.0, 1);
    v.interior[0][0] = 1.0;
    const auto op = assemble_transport(g, v, constant_diffusivity(g, 1e-6, 1.0, 1), Advection::Upwind, false);
    const auto rep = check_operator_properties(g, op);
    EXPECT_TRUE(rep.conservation_ok);
    EXPECT_FALSE(rep.kernel_ok);
    EXPECT_FALSE(rep.monotone_ok);
    // y = (1, 2) gives y^T K y = q (1 - 2) + diffusion < 0.
    Vector y(2);
    y << 1.0, 2.0;
    EXPECT_LT(y.dot(op.stiffness(0) * y), 0.0);
}

TEST(OperatorProperties, CsvExportHasHeader)
{
    const Grid g = two_cell_column();
    const auto op = assemble_transport(g, zero_velocity(g, 1.0, 1), constant_diffusivity(g, 1e-3, 1.0, 1));
    std::ostringstream os;
    write_operator_csv(os, op, check_operator_properties(g, op));
    EXPECT_FALSE(os.str().empty());
    EXPECT_NE(os.str().find('\n'), std::string::npos);
}
