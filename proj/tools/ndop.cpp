// ndop: command line driver for the periodic N-DOP solver.
//
// Exit codes: 0 success, 1 configuration or I/O error, 2 the numerical
// result did not meet its criterion (no convergence, failed check, oracle
// mismatch). Reports are written before exiting with 2.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>

#if __has_include(<CLI/CLI.hpp>)
#include <CLI/CLI.hpp>
#else
#include <CLI11.hpp>
#endif
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "ndop/config.hpp"
#include "ndop/oracle.hpp"
#include "ndop/output.hpp"
#include "ndop/solver.hpp"
#include "ndop/two_box.hpp"

namespace fs = std::filesystem;
using namespace ndop;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_input = 1;
constexpr int exit_numeric = 2;

struct CommonOptions {
    std::string config;
    std::string out;
    bool reproducible = false;
    std::optional<std::uint64_t> seed;
    std::string log_level = "info";
};

struct Run {
    RunConfig cfg;
    fs::path base_dir;
    fs::path out_dir;
};

Run prepare(const CommonOptions& o)
{
    Run r;
    const fs::path path(o.config);
    r.cfg = load_config(path);
    r.base_dir = path.parent_path();
    if (!o.out.empty()) r.cfg.output.dir = o.out;
    if (o.reproducible) r.cfg.output.reproducible = true;
    if (o.seed) r.cfg.solver.seed = *o.seed;
    r.out_dir = fs::path(r.cfg.output.dir);
    fs::create_directories(r.out_dir);
    std::ofstream(r.out_dir / "config_used.json") << serialize_config(r.cfg).dump(2) << '\n';
    return r;
}

std::ofstream open_out(const fs::path& p)
{
    std::ofstream os(p);
    if (!os) throw InputError("cannot write " + p.string());
    return os;
}

template <class Fn>
void write_file(const fs::path& p, Fn&& fn)
{
    auto os = open_out(p);
    fn(os);
    if (!os) throw InputError("failed writing " + p.string());
}

void write_solution_files(const fs::path& dir, const Problem& p, const TracerState& y, const SolveReport& rep,
                          const OutputSection& out)
{
    write_file(dir / "grid.csv", [&](auto& os) { p.grid.write_csv(os); });
    if (out.write_trajectory) write_file(dir / "trajectory.csv", [&](auto& os) { write_trajectory_csv(os, y); });
    write_file(dir / "mass.csv", [&](auto& os) { write_mass_csv(os, p.grid, y, p.solve.total_mass); });
    write_file(dir / "history.csv", [&](auto& os) { write_history_csv(os, rep.history); });
    write_file(dir / "report.csv", [&](auto& os) { write_report_csv(os, rep); });
    write_file(dir / "report.txt",
               [&](auto& os) { write_report_text(os, rep, p.solve.total_mass, p.grid.total_volume(), !out.reproducible);
    });
    save_snapshot(dir / "state.bin", p.grid, y);

    const double day = 86400.0;
    PlotSeries drift{"mass drift", {}, {}, "#d62728"};
    for (Index n = 0; n <= y.n_steps(); ++n) {
        drift.x.push_back(y.time(n) / day);
        drift.y.push_back(rep.mass_drift[static_cast<std::size_t>(n)]);
    }
    write_file(dir / "mass.svg", [&](auto& os) {
        write_svg_plot(os, {"Relative mass drift (band: +/-1e-10)", "time (days)", "(mass - C) / max(C, 1)", false, false,
                            std::make_pair(-1e-10, 1e-10)},
                       {drift});
    });

    PlotSeries hist{"", {}, {}, "#1f77b4"};
    for (std::size_t k = 0; k < rep.history.size(); ++k) {
        hist.x.push_back(static_cast<double>(k + 1));
        hist.y.push_back(rep.history[k]);
    }
    write_file(dir / "history.svg", [&](auto& os) {
        write_svg_plot(os, {"Fixed-point residual", "outer iteration", "|A(z) - z| / max(1, |z|)", true, false, {}},
                       {hist});
    });

    const auto prof = layer_profiles(p.grid, y);
    PlotSeries s1{"y1 (nutrient)", prof.y1, prof.depth, "#1f77b4"};
    PlotSeries s2{"y2 (DOP)", prof.y2, prof.depth, "#ff7f0e"};
    write_file(dir / "profiles.svg", [&](auto& os) {
        write_svg_plot(os, {"Time-mean horizontal averages", "concentration (mmol P m^-3)", "depth (m)", false, true, {}},
                       {s1, s2});
    });
}

int cmd_solve(const CommonOptions& o)
{
    const Run run = prepare(o);
    const Problem p = build_problem(run.cfg, run.base_dir);
    spdlog::info("grid: {} cells in {} columns, |Omega| = {:.6g} m^3; {} time steps, {} distinct transport matrices",
                 p.grid.n_cells(), p.grid.n_columns(), p.grid.total_volume(), p.op.n_steps(),
                 p.op.unique_matrices().size());

    std::optional<TracerState> init;
    if (run.cfg.solver.initial_snapshot) {
        init = load_snapshot(detail::resolve(run.base_dir, *run.cfg.solver.initial_snapshot), p.grid);
        if (init->n_steps() != p.op.n_steps()) throw InputError("snapshot has a different number of time steps");
        spdlog::info("starting from snapshot {}", *run.cfg.solver.initial_snapshot);
    }

    auto [y, rep] = fixed_point_solve(p.grid, p.solve, p.op, *p.model, std::move(init), [](int k, double r) {
        spdlog::debug("outer iteration {}: residual {:.3e}", k, r);
    });
    write_solution_files(run.out_dir, p, y, rep, run.cfg.output);

    spdlog::info("{} after {} iterations ({} period integrations, {:.1f} s)", rep.message, rep.iterations,
                 rep.period_maps, rep.wall_seconds);
    spdlog::info("periodicity {:.2e}/{:.2e}, mass drift {:.2e}, equation residual / forcing {:.2e}, max|y2| {:.4g}",
                 rep.periodicity_y1, rep.periodicity_y2, rep.max_mass_drift,
                 rep.forcing_norm > 0 ? rep.equation_residual / rep.forcing_norm : rep.equation_residual, rep.y2_max);
    return rep.converged ? exit_ok : exit_numeric;
}

std::vector<ReactionSample> random_samples(const Grid& g, double mean, double period, std::size_t count,
                                           std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unit;
    const double level = mean > 0.0 ? mean : 1.0;
    std::vector<ReactionSample> out;
    out.push_back({Vector::Zero(g.n_cells()), Vector::Zero(g.n_cells()), 0.0});
    for (std::size_t s = 0; s < count; ++s) {
        ReactionSample r{Vector(g.n_cells()), Vector(g.n_cells()), unit(rng) * period};
        for (Index i = 0; i < g.n_cells(); ++i) {
            r.y1[i] = level * (1.0 + normal(rng));
            r.y2[i] = 0.2 * level * normal(rng);
        }
        out.push_back(std::move(r));
    }
    return out;
}

int cmd_verify(const CommonOptions& o)
{
    const Run run = prepare(o);
    const RunConfig& c = run.cfg;
    const Grid g = build_grid(c.grid, run.base_dir);
    const auto vel = build_velocity(g, c.transport, run.base_dir);
    const auto dif = build_diffusivity(g, c.transport, run.base_dir);
    const auto model = build_model(g, c, run.base_dir);
    const auto solve = build_solve_config(g, c);

    const auto vrep = verify_velocity(g, vel);
    const auto op = assemble_transport(g, vel, dif, c.transport.advection, /*check_velocity=*/false);
    const auto orep = check_operator_properties(g, op, 100, c.solver.seed);
    const auto samples = random_samples(g, solve.total_mass / g.total_volume(), c.transport.period, 100, c.solver.seed);
    const auto brep = check_bounds(*model, g, samples);
    const auto mrep = check_mass_identity(*model, g, samples);

    write_file(run.out_dir / "grid.csv", [&](auto& os) { g.write_csv(os); });
    write_file(run.out_dir / "faces.csv", [&](auto& os) {
        os << "face_id,lo_cell,hi_cell,axis,area_m2,distance_m\n";
        for (std::size_t f = 0; f < g.interior_faces().size(); ++f) {
            const auto& face = g.interior_faces()[f];
            os << f << ',' << face.lo << ',' << face.hi << ',' << to_string(face.axis) << ',' << num(face.area) << ','
               << num(face.distance) << '\n';
        }
    });
    write_file(run.out_dir / "velocity_check.csv", [&](auto& os) {
        os << "time_index,cell_id,divergence_relative,flagged\n";
        const Index nc = g.n_cells();
        for (std::size_t k = 0; k < vrep.divergence.size(); ++k) {
            const double r = vrep.divergence[k];
            os << static_cast<Index>(k) / nc << ',' << static_cast<Index>(k) % nc << ',' << num(r) << ','
               << (r > vrep.tolerance ? 1 : 0) << '\n';
        }
    });
    write_file(run.out_dir / "operator_check.csv", [&](auto& os) { write_operator_csv(os, op, orep); });
    write_file(run.out_dir / "reaction_check.csv", [&](auto& os) { write_reaction_csv(os, brep, mrep); });

    auto line = [](bool ok, const std::string& what) { return std::string(ok ? "PASS " : "FAIL ") + what; };
    std::vector<std::string> lines = {
        line(vrep.passed, fmt::format("velocity divergence-free and no boundary flux (max {:.2e}, {} cells flagged)",
                                      vrep.max_divergence, vrep.flagged.size())),
        line(orep.conservation_ok, "operator column sums vanish"),
        line(orep.kernel_ok, "operator annihilates constants"),
        line(orep.monotone_ok, "operator monotone on random probes"),
        line(orep.coercive_ok, "diffusive coercivity (zero velocity only)"),
        line(brep.passed, fmt::format("reaction bounds on {} samples ({} violations)", brep.n_samples,
                                      brep.violations.size())),
        line(mrep.passed, fmt::format("reaction mass identity (max relative {:.2e})", mrep.max_relative)),
    };
    for (std::size_t k = 0; k < std::min<std::size_t>(vrep.flagged.size(), 10); ++k)
        lines.push_back(fmt::format("  flagged: time index {}, cell {}, residual {:.3e}", vrep.flagged[k].step,
                                    vrep.flagged[k].cell, vrep.flagged[k].residual));
    write_file(run.out_dir / "verify.txt", [&](auto& os) {
        for (const auto& l : lines) os << l << '\n';
    });
    for (const auto& l : lines) std::cout << l << '\n';

    const bool ok = vrep.passed && orep.passed && brep.passed && mrep.passed;
    return ok ? exit_ok : exit_numeric;
}

int cmd_oracle(const CommonOptions& o, bool sweep)
{
    const Run run = prepare(o);
    const Problem p = build_problem(run.cfg, run.base_dir);
    const auto* po4 = dynamic_cast<const PO4DOPModel*>(p.model.get());
    if (!po4) throw InputError("the oracle needs the po4dop model");
    const TwoBoxGeometry geo = two_box_geometry(p.grid, p.op);

    OracleConfig oc;
    oc.total_mass = p.solve.total_mass;
    oc.period = p.op.period();
    oc.n_time_steps = p.op.n_steps();
    oc.theta = p.solve.theta;
    oc.refine = run.cfg.oracle.refine;
    oc.newton_tol = run.cfg.oracle.newton_tol;
    const OracleOrbit orbit = two_box_oracle(po4->params(), geo, oc);

    auto [y, rep] = fixed_point_solve(p.grid, p.solve, p.op, *p.model);
    const double mean = p.solve.total_mass / p.grid.total_volume();
    const OrbitComparison cmp = compare_orbits(y, orbit, mean);
    const bool ok = rep.converged && cmp.max_relative <= run.cfg.oracle.tolerance;

    write_file(run.out_dir / "oracle_orbit.csv", [&](auto& os) { write_orbit_csv(os, orbit); });
    write_file(run.out_dir / "solver_orbit.csv", [&](auto& os) { write_trajectory_csv(os, y); });
    static const char* names[] = {"po4_euphotic", "po4_aphotic", "dop_euphotic", "dop_aphotic"};
    std::vector<std::string> lines = {
        fmt::format("solver converged: {} ({} iterations)", rep.converged ? "yes" : "no", rep.iterations),
        fmt::format("oracle newton residuals: {}", orbit.newton_residuals.size()),
        fmt::format("max relative difference: {:.3e} (tolerance {:.1e})", cmp.max_relative, run.cfg.oracle.tolerance),
        fmt::format("worst component: {} at node {}", names[cmp.worst_component], cmp.worst_node),
    };
    if (sweep) {
        const auto s = lambda_sweep(po4->params(), geo, oc, {10.0, 31.6227766, 100.0, 316.227766, 1000.0});
        write_file(run.out_dir / "lambda_sweep.csv", [&](auto& os) {
            os << "lambda_per_s,y2_amplitude_mmolP_m3\n";
            for (std::size_t k = 0; k < s.lambda.size(); ++k) os << num(s.lambda[k]) << ',' << num(s.amplitude[k]) << '\n';
        });
        lines.push_back(fmt::format("lambda sweep log-log slope: {:.4f}", s.slope));
    }
    lines.push_back(ok ? "PASS" : "FAIL");
    write_file(run.out_dir / "comparison.txt", [&](auto& os) {
        for (const auto& l : lines) os << l << '\n';
    });
    for (const auto& l : lines) std::cout << l << '\n';
    return ok ? exit_ok : exit_numeric;
}

int cmd_compare_spinup(const CommonOptions& o)
{
    const Run run = prepare(o);
    const Problem p = build_problem(run.cfg, run.base_dir);
    auto [y, rep] = fixed_point_solve(p.grid, p.solve, p.op, *p.model);
    const double target = run.cfg.spinup.target.value_or(p.solve.outer_tol);
    spdlog::info("fixed point: {} iterations, {} period integrations; spinning up to {:.1e}", rep.iterations,
                 rep.period_maps, target);
    const auto spin = spin_up(p.grid, p.op, *p.model, p.solve, target, run.cfg.spinup.max_periods);

    const Norms norms(p.grid.volumes());
    const double diff = norms.state_difference(spin.state, y) / std::max(1e-300, norms.state(y));

    write_file(run.out_dir / "spinup_history.csv", [&](auto& os) {
        os << "period,periodicity_residual_relative\n";
        for (std::size_t k = 0; k < spin.history.size(); ++k) os << k + 1 << ',' << num(spin.history[k]) << '\n';
    });
    write_file(run.out_dir / "history.csv", [&](auto& os) { write_history_csv(os, rep.history); });
    write_file(run.out_dir / "comparison.csv", [&](auto& os) {
        os << "method,period_integrations,final_residual_relative,reached\n";
        os << "fixed_point," << rep.period_maps << ',' << num(rep.fixed_point_residual) << ',' << (rep.converged ? 1 : 0)
           << '\n';
        os << "spinup," << spin.periods << ',' << num(spin.history.empty() ? 0.0 : spin.history.back()) << ','
           << (spin.reached ? 1 : 0) << '\n';
        os << "orbit_difference_relative,," << num(diff) << ",\n";
    });
    PlotSeries a{"spin-up periodicity residual", {}, spin.history, "#d62728"};
    for (std::size_t k = 0; k < spin.history.size(); ++k) a.x.push_back(static_cast<double>(k + 1));
    PlotSeries b{"fixed-point residual", {}, rep.history, "#1f77b4"};
    for (std::size_t k = 0; k < rep.history.size(); ++k) b.x.push_back(static_cast<double>(k + 1));
    write_file(run.out_dir / "comparison.svg", [&](auto& os) {
        write_svg_plot(os, {"Spin-up versus fixed-point iteration", "period / outer iteration", "relative residual",
                            true, false, {}},
                       {a, b});
    });

    std::cout << fmt::format("fixed point: {} ({} outer iterations, {} period integrations)\n",
                             rep.converged ? "converged" : "not converged", rep.iterations, rep.period_maps)
              << fmt::format("spin-up:     {} ({} periods)\n", spin.reached ? "reached target" : "did not reach target",
                             spin.periods)
              << fmt::format("orbit difference: {:.3e}\n", diff);
    return rep.converged && spin.reached ? exit_ok : exit_numeric;
}

Json config_schema()
{
    auto num_field = [](const char* desc) { return Json{{"type", "number"}, {"description", desc}}; };
    auto int_field = [](const char* desc) { return Json{{"type", "integer"}, {"description", desc}}; };
    auto str_field = [](const char* desc) { return Json{{"type", "string"}, {"description", desc}}; };
    auto obj = [](Json props, std::vector<std::string> required) {
        return Json{{"type", "object"}, {"additionalProperties", false}, {"properties", std::move(props)},
                    {"required", std::move(required)}};
    };

    Json depth = {{"description", "depth map: inline values (x fastest), CSV column_id,depth_m, or a paraboloid basin"},
                  {"oneOf",
                   Json::array({obj({{"kind", {{"const", "inline"}}}, {"values", {{"type", "array"}, {"items", {{"type", "number"}}}}}},
                                    {"kind", "values"}),
                                obj({{"kind", {{"const", "csv"}}}, {"path", str_field("CSV file")}}, {"kind", "path"}),
                                obj({{"kind", {{"const", "basin"}}},
                                     {"shelf_depth", num_field("depth at the rim (m)")},
                                     {"max_depth", num_field("depth at the centre (m)")}},
                                    {"kind"})})}};
    Json grid = obj({{"nx", int_field("cells in x")},
                     {"ny", int_field("cells in y")},
                     {"dx", num_field("cell width in x (m)")},
                     {"dy", num_field("cell width in y (m)")},
                     {"h_bar_e", num_field("maximum euphotic depth (m); must be a layer interface")},
                     {"depth", depth},
                     {"layers", {{"type", "array"}, {"items", {{"type", "number"}}}, {"description", "layer thicknesses top down (m)"}}},
                     {"uniform_layers", int_field("split each column into this many equal layers (instead of layers)")},
                     {"h_max", num_field("optional upper bound on depths (m)")}},
                    {"nx", "ny", "dx", "dy", "h_bar_e", "depth"});
    Json velocity = {{"oneOf",
                      Json::array({obj({{"kind", {{"const", "none"}}}}, {"kind"}),
                                   obj({{"kind", {{"const", "overturning"}}},
                                        {"amplitude_m3_s", num_field("peak stream function per x-z slice (m^3 s^-1)")},
                                        {"seasonal_amplitude", num_field("relative seasonal modulation")},
                                        {"segments", int_field("distinct values per period, 0 for one per step")}},
                                       {"kind", "amplitude_m3_s"}),
                                   obj({{"kind", {{"const", "csv"}}}, {"path", str_field("CSV time_index,face_id,flux_m3_s")}},
                                       {"kind", "path"})})}};
    Json diffusivity = {{"oneOf",
                         Json::array({obj({{"kind", {{"const", "layered"}}},
                                           {"kappa_horizontal_m2_s", num_field("lateral diffusivity")},
                                           {"kappa_vertical_m2_s", num_field("vertical diffusivity")},
                                           {"vertical_seasonal", num_field("relative seasonal modulation, |.| < 1")},
                                           {"segments", int_field("distinct values per period, 0 for one per step")}},
                                          {"kind", "kappa_horizontal_m2_s", "kappa_vertical_m2_s"}),
                                      obj({{"kind", {{"const", "csv"}}}, {"path", str_field("CSV time_index,face_id,kappa_m2_s")}},
                                          {"kind", "path"})})}};
    Json transport = obj({{"period_s", num_field("period T (s)")},
                          {"n_time_steps", int_field("time steps per period")},
                          {"advection", {{"enum", {"upwind", "centered"}}}},
                          {"velocity", velocity},
                          {"diffusivity", diffusivity}},
                         {"period_s", "n_time_steps", "velocity", "diffusivity"});
    Json insolation = {{"oneOf",
                        Json::array({obj({{"kind", {{"const", "seasonal"}}},
                                          {"I0", num_field("surface insolation amplitude (W m^-2)")},
                                          {"k_w", num_field("attenuation (m^-1)")}},
                                         {"kind", "I0", "k_w"}),
                                     obj({{"kind", {{"const", "csv"}}}, {"path", str_field("CSV time_index,cell_id,insolation_W_m2")}},
                                         {"kind", "path"})})}};
    Json model = {{"type", "object"},
                  {"properties",
                   {{"kind", {{"enum", {"po4dop", "null"}}}},
                    {"alpha_per_s", num_field("maximum uptake rate (mmol P m^-3 s^-1)")},
                    {"K_P", num_field("nutrient half saturation (mmol P m^-3)")},
                    {"K_I", num_field("light half saturation (W m^-2)")},
                    {"nu", num_field("fraction of uptake routed to DOP, in [0, 1]")},
                    {"beta", num_field("sinking exponent")},
                    {"lambda_per_s", num_field("remineralization rate (s^-1)")},
                    {"insolation", insolation}}},
                  {"required", {"kind", "lambda_per_s"}}};
    Json solver = obj({{"total_mass", num_field("C (mmol P); or give mean_concentration")},
                       {"mean_concentration", num_field("C / |Omega| (mmol P m^-3)")},
                       {"theta", num_field("time scheme parameter in [1/2, 1]")},
                       {"outer_tol", num_field("relative fixed-point tolerance")},
                       {"outer_max_iter", int_field("outer iteration limit")},
                       {"damping", num_field("damping omega in (0, 1]")},
                       {"inner_tol", num_field("periodicity tolerance of the linear solves")},
                       {"krylov_restart", int_field("GMRES restart length")},
                       {"krylov_max_iter", int_field("GMRES iteration limit per solve")},
                       {"seed", int_field("nonzero: random first Krylov guess from this seed")},
                       {"initial_snapshot", str_field("state.bin from an earlier run to start from")}},
                      {});
    Json oracle = obj({{"refine", int_field("oracle steps per solver step")},
                       {"tolerance", num_field("max relative difference for a pass")},
                       {"newton_tol", num_field("shooting tolerance")}},
                      {});
    Json spinup = obj({{"max_periods", int_field("period limit")}, {"target", num_field("periodicity residual to reach")}}, {});
    Json output = obj({{"dir", str_field("output directory")},
                       {"reproducible", {{"type", "boolean"}}},
                       {"write_trajectory", {{"type", "boolean"}}}},
                      {});
    Json schema = obj({{"grid", grid},
                       {"transport", transport},
                       {"model", model},
                       {"solver", solver},
                       {"oracle", oracle},
                       {"spinup", spinup},
                       {"output", output}},
                      {"grid", "transport", "model", "solver"});
    schema["$schema"] = "https://json-schema.org/draft/2020-12/schema";
    schema["title"] = "ndop run configuration (SI units)";
    return schema;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Periodic solutions of N-DOP marine ecosystem models"};
    app.require_subcommand(1);
    CommonOptions opts;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", opts.config, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", opts.out, "output directory (overrides output.dir)");
        sub->add_flag("--reproducible", opts.reproducible, "require byte-identical outputs for identical inputs");
        sub->add_option("--seed", opts.seed, "seed for random initial guesses and probes");
    };
    app.add_option("--log-level", opts.log_level, "trace, debug, info, warn, error or off")
        ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

    auto* solve = app.add_subcommand("solve", "compute the periodic solution");
    add_common(solve);
    auto* verify = app.add_subcommand("verify", "check transport, velocity and reaction invariants");
    add_common(verify);
    auto* oracle = app.add_subcommand("oracle", "compare with the dense two-box reference");
    add_common(oracle);
    bool sweep = false;
    oracle->add_flag("--lambda-sweep", sweep, "also fit the DOP amplitude decay over two decades of lambda");
    auto* compare = app.add_subcommand("compare-spinup", "contrast the fixed-point solver with plain spin-up");
    add_common(compare);
    app.add_subcommand("print-config-schema", "print the configuration JSON schema");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_input;
    }

    auto logger = spdlog::stderr_color_mt("ndop");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%l] %v");
    spdlog::set_level(spdlog::level::from_str(opts.log_level));

    try {
        if (app.got_subcommand("print-config-schema")) {
            std::cout << config_schema().dump(2) << '\n';
            return exit_ok;
        }
        if (solve->parsed()) return cmd_solve(opts);
        if (verify->parsed()) return cmd_verify(opts);
        if (oracle->parsed()) return cmd_oracle(opts, sweep);
        if (compare->parsed()) return cmd_compare_spinup(opts);
    } catch (const InputError& e) {
        spdlog::error("{}", e.what());
        return exit_input;
    } catch (const fs::filesystem_error& e) {
        spdlog::error("{}", e.what());
        return exit_input;
    } catch (const SolveError& e) {
        spdlog::error("{}", e.what());
        return exit_numeric;
    } catch (const std::exception& e) {
        spdlog::error("unexpected error: {}", e.what());
        return exit_input;
    }
    return exit_input;
}
