// Acceptance checks for the periodic solver. Prints one PASS/FAIL line per
// criterion and exits nonzero if any criterion fails.

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "ndop/config.hpp"
#include "ndop/solver.hpp"
#include "ndop/two_box.hpp"

using namespace ndop;
using testkit::year;

namespace {

struct Outcome {
    bool passed = false;
    std::string detail;
};

class Timer {
public:
    double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count(); }

private:
    std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

std::string fmt_sci(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return buf;
}

double max_abs(const std::vector<Vector>& tr)
{
    double m = 0.0;
    for (const auto& v : tr) m = std::max(m, v.cwiseAbs().maxCoeff());
    return m;
}

// Transport operator invariants on random grids with a circulating flow.
Outcome transport_invariants()
{
    std::mt19937_64 rng(20240101);
    double worst_col = 0.0, worst_kernel = 0.0, min_form = 1.0, worst_div = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const Grid g = testkit::random_grid(rng);
        const Index N = 4;
        std::uniform_real_distribution<double> amp(1e4, 1e6);
        const auto vel = overturning_velocity(g, {amp(rng), 0.4, 0}, year, N);
        worst_div = std::max(worst_div, verify_velocity(g, vel).max_divergence);
        const auto op = assemble_transport(g, vel, layered_diffusivity(g, {1e3, 1e-4, 0.5, 0}, year, N));
        for (const SparseMatrix& K : op.unique_matrices()) {
            const double norm = K.cwiseAbs().sum() / static_cast<double>(K.rows());
            const Vector ones = Vector::Ones(K.rows());
            const Vector col = ones.transpose() * K;
            worst_col = std::max(worst_col, col.cwiseAbs().maxCoeff() / norm);
            worst_kernel = std::max(worst_kernel, (K * ones).cwiseAbs().maxCoeff() / norm);
            for (int p = 0; p < 100; ++p) {
                const Vector y = testkit::random_vector(rng, K.rows());
                const double form = y.dot(K * y);
                min_form = std::min(min_form, form / (norm * y.squaredNorm()));
            }
        }
    }
    const bool ok = worst_col <= 1e-12 && worst_kernel <= 1e-12 && min_form >= -1e-12 && worst_div <= 1e-12;
    return {ok, "column sums " + fmt_sci(worst_col) + ", B1 " + fmt_sci(worst_kernel) + ", min y'VBy/(|B| |y|^2) " +
                    fmt_sci(min_form) + ", divergence " + fmt_sci(worst_div)};
}

std::vector<ReactionSample> random_samples(std::mt19937_64& rng, const Grid& g, std::size_t n)
{
    std::uniform_real_distribution<double> t(0.0, year);
    std::vector<ReactionSample> out;
    out.reserve(n);
    for (std::size_t s = 0; s < n; ++s)
        out.push_back({testkit::random_vector(rng, g.n_cells(), 1.0, 3.0),
                       testkit::random_vector(rng, g.n_cells(), 0.2, 1.0), t(rng)});
    return out;
}

Outcome mass_identity()
{
    std::mt19937_64 rng(77);
    const PO4DOPModel model(testkit::reference_params());
    double worst = 0.0;
    int shallow = 0;
    for (int k = 0; k < 5; ++k) {
        const Grid g = testkit::random_grid(rng, 16, 16, 15);
        for (const auto& col : g.columns()) shallow += col.depth <= g.h_bar_e();
        const auto samples = random_samples(rng, g, 20);
        worst = std::max(worst, check_mass_identity(model, g, samples).max_relative);
    }
    return {worst <= 1e-12 && shallow > 0,
            "100 states, max relative imbalance " + fmt_sci(worst) + ", " + std::to_string(shallow) + " shallow columns"};
}

Outcome reaction_bounds()
{
    std::mt19937_64 rng(78);
    const PO4DOPModel model(testkit::reference_params());
    const Grid g = testkit::random_grid(rng, 6, 6, 10);
    const auto samples = random_samples(rng, g, 10000);
    const auto rep = check_bounds(model, g, samples);
    return {rep.passed, "10000 samples, " + std::to_string(rep.violations.size()) + " violations, max |d|/M_d " +
                            fmt_sci(rep.max_ratio_d) + ", max |b|/M_b " + fmt_sci(rep.max_ratio_b)};
}

Outcome sinking_profile()
{
    using boost::math::quadrature::gauss_kronrod;
    std::mt19937_64 rng(79);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst_sum = 0.0, worst_quad = 0.0;
    for (int c = 0; c < 1000; ++c) {
        const double h = 20.0 + 130.0 * u(rng), beta = 0.4 + 1.2 * u(rng);
        std::vector<DepthInterval> cells;
        double z = h;
        const int n = static_cast<int>(15 * u(rng));
        for (int k = 0; k < n; ++k) {
            const double dz = 5.0 + 500.0 * u(rng);
            cells.push_back({z, z + dz});
            z += dz;
        }
        const auto w = sinking_weights(cells, beta, h);
        double sum = w.bottom;
        for (std::size_t k = 0; k < cells.size(); ++k) {
            sum += w.cell[k];
            const double q = gauss_kronrod<double, 61>::integrate(
                [&](double zz) { return beta / h * std::pow(zz / h, -beta - 1.0); }, cells[k].top, cells[k].bottom, 10,
                1e-14);
            worst_quad = std::max(worst_quad, std::abs(q - w.cell[k]));
        }
        worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
    }
    return {worst_sum <= 1e-15 && worst_quad <= 1e-10,
            "1000 columns, |sum - 1| " + fmt_sci(worst_sum) + ", quadrature gap " + fmt_sci(worst_quad)};
}

RunConfig medium_config()
{
    RunConfig c = testkit::desk_scale_config();
    c.grid.nx = c.grid.ny = 8;
    c.grid.dx = c.grid.dy = 1e5;
    c.grid.layers = {10, 15, 25, 50, 100, 200, 300, 300};
    c.grid.depth = BasinDepths{40.0, 1000.0};
    c.transport.n_time_steps = 24;
    c.transport.velocity = OverturningParams{2e5, 0.3, 12};
    c.transport.diffusivity = LayeredDiffusivityParams{5e3, 5e-3, 0.5, 12};
    return c;
}

Outcome linear_solves()
{
    const Problem p = build_problem(medium_config());
    const Index N = p.op.n_steps();
    const double mean = p.solve.total_mass / p.grid.total_volume();
    auto z = TracerState::constant(p.grid, p.op.period(), N, mean, 0.0);
    std::mt19937_64 rng(80);
    for (auto& v : z.y1) v += testkit::random_vector(rng, p.grid.n_cells(), 0.0, 0.3);

    // Uniqueness: different Krylov starting points give the same A(z).
    SolveConfig a_cfg = p.solve, b_cfg = p.solve;
    a_cfg.seed = 0;
    b_cfg.seed = 1234567;
    const TracerState a = linearized_solve(p.grid, z, a_cfg, p.op, *p.model);
    const TracerState b = linearized_solve(p.grid, z, b_cfg, p.op, *p.model);
    double uniq = 0.0;
    const double scale = std::max(1.0, max_abs(a.y1));
    for (std::size_t n = 0; n < a.y1.size(); ++n)
        uniq = std::max({uniq, (a.y1[n] - b.y1[n]).cwiseAbs().maxCoeff() / scale,
                         (a.y2[n] - b.y2[n]).cwiseAbs().maxCoeff() / scale});

    // Mass of A(z) at every node.
    double drift = 0.0;
    const double C = p.solve.total_mass;
    for (std::size_t n = 0; n < a.y1.size(); ++n) {
        const double m = mass(p.grid, TracerField(p.grid, a.y1[n]), TracerField(p.grid, a.y2[n]));
        drift = std::max(drift, std::abs(m - C) / std::max(C, 1.0));
    }

    // Homogeneity of the shifted solve in the forcing.
    auto [F1, F2] = reaction_forcing(p.grid, *p.model, z);
    Forcing F2s = F2;
    for (auto& v : F2s) v *= 7.5;
    const auto s1 = solve_linear_periodic_shifted(p.op, p.model->lambda(), F2, p.solve);
    const auto s2 = solve_linear_periodic_shifted(p.op, p.model->lambda(), F2s, p.solve);
    double homog = 0.0;
    const double s_scale = 7.5 * max_abs(s1.trajectory);
    for (std::size_t n = 0; n < s1.trajectory.size(); ++n)
        homog = std::max(homog, (s2.trajectory[n] - 7.5 * s1.trajectory[n]).cwiseAbs().maxCoeff() / s_scale);

    return {uniq <= 1e-10 && drift <= 1e-10 && homog <= 1e-11,
            "uniqueness " + fmt_sci(uniq) + ", mass drift " + fmt_sci(drift) + ", homogeneity " + fmt_sci(homog)};
}

OracleConfig oracle_config(const Problem& p, int refine)
{
    OracleConfig oc;
    oc.total_mass = p.solve.total_mass;
    oc.period = p.op.period();
    oc.n_time_steps = p.op.n_steps();
    oc.theta = p.solve.theta;
    oc.refine = refine;
    return oc;
}

Outcome two_box_oracle_check()
{
    const Problem p = build_problem(testkit::two_box_config(14400));
    const auto& params = dynamic_cast<const PO4DOPModel&>(*p.model).params();
    const TwoBoxGeometry geo = two_box_geometry(p.grid, p.op);
    const OracleOrbit orbit = two_box_oracle(params, geo, oracle_config(p, 10));
    const auto [y, rep] = fixed_point_solve(p.grid, p.solve, p.op, *p.model);
    const double mean = p.solve.total_mass / p.grid.total_volume();
    const auto cmp = compare_orbits(y, orbit, mean);

    // Dark limit: uniform phosphate, no DOP, for both the solver and the oracle.
    RunConfig dark_cfg = testkit::two_box_config(360);
    dark_cfg.model.insolation = SeasonalLight{0.0, 0.04};
    const Problem dark = build_problem(dark_cfg);
    const auto [yd, repd] = fixed_point_solve(dark.grid, dark.solve, dark.op, *dark.model);
    const OracleOrbit od = two_box_oracle(dynamic_cast<const PO4DOPModel&>(*dark.model).params(),
                                          two_box_geometry(dark.grid, dark.op), oracle_config(dark, 1));
    double dark_gap = 0.0;
    for (std::size_t n = 0; n < yd.y1.size(); ++n)
        dark_gap = std::max({dark_gap, (yd.y1[n].array() - mean).abs().maxCoeff() / mean,
                             yd.y2[n].cwiseAbs().maxCoeff() / mean});
    for (const auto& s : od.states)
        dark_gap = std::max({dark_gap, std::abs(s[0] - mean) / mean, std::abs(s[1] - mean) / mean,
                             std::abs(s[2]) / mean, std::abs(s[3]) / mean});

    // DOP amplitude against lambda on a coarser time grid.
    const Problem sweep_p = build_problem(testkit::two_box_config(1440));
    const auto sweep = lambda_sweep(params, geo, oracle_config(sweep_p, 1), {10.0, 31.6227766, 100.0, 316.227766, 1000.0});

    const bool ok = rep.converged && repd.converged && cmp.max_relative <= 1e-7 && dark_gap <= 1e-12 &&
                    std::abs(sweep.slope + 1.0) <= 0.05;
    return {ok, "max relative difference " + fmt_sci(cmp.max_relative) + " (N = 14400), dark limit " +
                    fmt_sci(dark_gap) + ", DOP amplitude slope " + std::to_string(sweep.slope)};
}

Outcome desk_scale()
{
    const RunConfig cfg = testkit::desk_scale_config();
    const Problem p = build_problem(cfg);
    const auto [y, rep] = fixed_point_solve(p.grid, p.solve, p.op, *p.model);
    const double mean = p.solve.total_mass / p.grid.total_volume();
    const double periodicity = std::max(rep.periodicity_y1, rep.periodicity_y2);
    const bool ok = rep.converged && periodicity <= 1e-8 && rep.max_mass_drift <= 1e-10 &&
                    rep.equation_residual <= 10.0 * p.solve.outer_tol * rep.forcing_norm &&
                    rep.y2_max > 1e-8 * mean;
    return {ok, std::to_string(p.grid.n_cells()) + " cells, " + std::to_string(rep.iterations) + " iterations, " +
                    "periodicity " + fmt_sci(periodicity) + ", mass drift " + fmt_sci(rep.max_mass_drift) +
                    ", residual/forcing " + fmt_sci(rep.equation_residual / rep.forcing_norm) + ", max y2 " +
                    fmt_sci(rep.y2_max)};
}

Outcome zero_mass()
{
    RunConfig c = medium_config();
    c.solver.mean_concentration.reset();
    c.solver.total_mass = 0.0;
    const Problem p0 = build_problem(c);
    const auto [y0, rep0] = fixed_point_solve(p0.grid, p0.solve, p0.op, *p0.model);
    const double zero = std::max(max_abs(y0.y1), max_abs(y0.y2));

    const Problem p1 = build_problem(medium_config());
    const auto [y1, rep1] = fixed_point_solve(p1.grid, p1.solve, p1.op, *p1.model);
    const double nonzero = max_abs(y1.y1);
    return {rep0.converged && zero == 0.0 && rep1.converged && nonzero > 0.0,
            "C = 0 gives max |y| " + fmt_sci(zero) + ", C > 0 gives max |y1| " + fmt_sci(nonzero)};
}

struct Criterion {
    int id;
    const char* name;
    double time_limit;  // seconds, 0 for none
    std::function<Outcome()> run;
};

} // namespace

int main()
{
    const std::vector<Criterion> criteria = {
        {1, "transport conservation, kernel and monotonicity", 10.0, transport_invariants},
        {2, "reaction mass identity", 5.0, mass_identity},
        {3, "reaction bounds", 0.0, reaction_bounds},
        {4, "export profile weights", 0.0, sinking_profile},
        {5, "linear periodic solves", 0.0, linear_solves},
        {6, "two-box reference orbit", 30.0, two_box_oracle_check},
        {7, "desk-scale periodic solution", 120.0, desk_scale},
        {8, "zero total mass", 0.0, zero_mass},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        Timer timer;
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double t = timer.seconds();
        const bool in_time = c.time_limit <= 0.0 || t <= c.time_limit;
        const bool ok = o.passed && in_time;
        failures += !ok;
        std::string limit = c.time_limit > 0.0 ? " / " + std::to_string(static_cast<int>(c.time_limit)) + " s" : "";
        std::printf("%s criterion %d: %s: %s [%.2f s%s]\n", ok ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), t,
                    limit.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
