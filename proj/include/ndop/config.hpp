#pragma once

// Run configuration.
//
// A run is described by one JSON document with the sections grid, transport,
// model, solver, oracle, spinup and output. All quantities are SI: lengths in
// m, times in s, rates in s^-1, concentrations in mmol P m^-3. Unknown keys are
// rejected so that typos do not silently fall back to defaults.
//
// Tabular inputs (depth map, face fluxes, diffusivities, insolation) are CSV
// files with a fixed header. Relative paths are resolved against the directory
// of the configuration file.

#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "ndop/grid.hpp"
#include "ndop/reactions.hpp"
#include "ndop/solver.hpp"
#include "ndop/transport.hpp"

namespace ndop {

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Configuration types

struct InlineDepths {
    std::vector<double> values;  // x-fastest, one per surface cell
    bool operator==(const InlineDepths&) const = default;
};

struct CsvDepths {
    std::string path;  // columns: column_id,depth_m
    bool operator==(const CsvDepths&) const = default;
};

/// Paraboloid bowl: max_depth at the centre, shelf_depth towards the corners.
struct BasinDepths {
    double shelf_depth = 40.0;
    double max_depth = 2000.0;
    bool operator==(const BasinDepths&) const = default;
};

using DepthSpec = std::variant<InlineDepths, CsvDepths, BasinDepths>;

struct GridConfig {
    Index nx = 1;
    Index ny = 1;
    double dx = 1.0;
    double dy = 1.0;
    double h_bar_e = 100.0;
    DepthSpec depth = InlineDepths{{100.0}};
    std::vector<double> layers;  // thicknesses, top down
    Index uniform_layers = 0;    // used instead of `layers` when positive
    std::optional<double> h_max;

    bool operator==(const GridConfig&) const = default;
};

struct NoVelocity {
    bool operator==(const NoVelocity&) const = default;
};

struct CsvVelocity {
    std::string path;  // columns: time_index,face_id,flux_m3_s
    bool operator==(const CsvVelocity&) const = default;
};

using VelocitySpec = std::variant<NoVelocity, OverturningParams, CsvVelocity>;

struct CsvDiffusivity {
    std::string path;  // columns: time_index,face_id,kappa_m2_s
    bool operator==(const CsvDiffusivity&) const = default;
};

using DiffusivitySpec = std::variant<LayeredDiffusivityParams, CsvDiffusivity>;

struct TransportConfig {
    double period = 360.0 * 86400.0;
    Index n_time_steps = 12;
    Advection advection = Advection::Upwind;
    VelocitySpec velocity = NoVelocity{};
    DiffusivitySpec diffusivity = LayeredDiffusivityParams{};

    bool operator==(const TransportConfig&) const = default;
};

struct SeasonalLight {
    double I0 = 100.0;  // W m^-2
    double k_w = 0.04;  // m^-1
    bool operator==(const SeasonalLight&) const = default;
};

struct CsvInsolation {
    std::string path;  // columns: time_index,cell_id,insolation_W_m2
    bool operator==(const CsvInsolation&) const = default;
};

using LightSpec = std::variant<SeasonalLight, CsvInsolation>;

enum class ModelKind : std::uint8_t { PO4DOP, Null };

struct ModelConfig {
    ModelKind kind = ModelKind::PO4DOP;
    // Defaults are illustrative values for a one-year period, not calibrated.
    double alpha = 0.5 / (360.0 * 86400.0);
    double K_P = 0.5;
    double K_I = 30.0;
    double nu = 0.67;
    double beta = 0.858;
    double lambda = 2.0 / (360.0 * 86400.0);
    LightSpec insolation = SeasonalLight{};

    bool operator==(const ModelConfig&) const = default;
};

struct SolverSection {
    std::optional<double> total_mass;          // C (mmol P)
    std::optional<double> mean_concentration;  // C / |Omega| (mmol P m^-3), alternative to total_mass
    double theta = 1.0;
    double outer_tol = 1e-8;
    int outer_max_iter = 200;
    double damping = 0.5;
    double inner_tol = 1e-12;
    int krylov_restart = 40;
    int krylov_max_iter = 600;
    std::uint64_t seed = 0;
    std::optional<std::string> initial_snapshot;

    bool operator==(const SolverSection&) const = default;
};

struct OracleSection {
    int refine = 10;
    double tolerance = 1e-7;
    double newton_tol = 1e-13;

    bool operator==(const OracleSection&) const = default;
};

struct SpinupSection {
    int max_periods = 5000;
    std::optional<double> target;  // periodicity residual to reach; default outer_tol

    bool operator==(const SpinupSection&) const = default;
};

struct OutputSection {
    std::string dir = "out";
    bool reproducible = false;
    bool write_trajectory = true;

    bool operator==(const OutputSection&) const = default;
};

struct RunConfig {
    GridConfig grid;
    TransportConfig transport;
    ModelConfig model;
    SolverSection solver;
    OracleSection oracle;
    SpinupSection spinup;
    OutputSection output;

    bool operator==(const RunConfig&) const = default;
};

// ---------------------------------------------------------------------------
// JSON reading

namespace detail {

/// Object reader that remembers which keys were consumed.
class ObjectReader {
public:
    ObjectReader(const Json& j, std::string where) : j_(&j), where_(std::move(where))
    {
        if (!j.is_object()) throw InputError(where_ + ": expected an object");
    }

    bool has(const std::string& key) const { return j_->contains(key); }

    template <class T>
    T get(const std::string& key, const T& fallback)
    {
        if (!has(key)) return fallback;
        return required<T>(key);
    }

    template <class T>
    T required(const std::string& key)
    {
        if (!has(key)) throw InputError(path(key) + ": missing");
        used_.insert(key);
        const Json& v = (*j_)[key];
        try {
            if constexpr (std::is_same_v<T, double>) {
                if (!v.is_number()) throw InputError("");
            } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
                if (!v.is_number_integer()) throw InputError("");
                if constexpr (std::is_unsigned_v<T>)
                    if (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)
                        throw InputError("");
            } else if constexpr (std::is_same_v<T, bool>) {
                if (!v.is_boolean()) throw InputError("");
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (!v.is_string()) throw InputError("");
            }
            return v.get<T>();
        } catch (const std::exception&) {
            throw InputError(path(key) + ": wrong type");
        }
    }

    template <class T>
    std::optional<T> optional(const std::string& key)
    {
        if (!has(key) || (*j_)[key].is_null()) {
            if (has(key)) used_.insert(key);
            return std::nullopt;
        }
        return required<T>(key);
    }

    ObjectReader child(const std::string& key)
    {
        if (!has(key)) throw InputError(path(key) + ": missing");
        used_.insert(key);
        return ObjectReader((*j_)[key], path(key));
    }

    std::vector<double> numbers(const std::string& key)
    {
        if (!has(key)) return {};
        used_.insert(key);
        const Json& v = (*j_)[key];
        if (!v.is_array()) throw InputError(path(key) + ": expected an array of numbers");
        std::vector<double> out;
        for (const auto& x : v) {
            if (!x.is_number()) throw InputError(path(key) + ": expected an array of numbers");
            out.push_back(x.get<double>());
        }
        return out;
    }

    void finish() const
    {
        for (auto it = j_->begin(); it != j_->end(); ++it)
            if (!used_.count(it.key())) throw InputError(path(it.key()) + ": unknown key");
    }

    std::string path(const std::string& key) const { return where_.empty() ? key : where_ + "." + key; }

private:
    const Json* j_;
    std::string where_;
    std::set<std::string> used_;
};

inline Advection parse_advection(const std::string& s, const std::string& where)
{
    if (s == "upwind") return Advection::Upwind;
    if (s == "centered") return Advection::Centered;
    throw InputError(where + ": expected \"upwind\" or \"centered\"");
}

inline const char* advection_name(Advection a) { return a == Advection::Upwind ? "upwind" : "centered"; }

} // namespace detail

inline RunConfig parse_config(const Json& j)
{
    using detail::ObjectReader;
    RunConfig c;
    ObjectReader root(j, "");

    {
        auto g = root.child("grid");
        c.grid.nx = g.required<Index>("nx");
        c.grid.ny = g.required<Index>("ny");
        c.grid.dx = g.required<double>("dx");
        c.grid.dy = g.required<double>("dy");
        c.grid.h_bar_e = g.required<double>("h_bar_e");
        auto d = g.child("depth");
        const auto kind = d.required<std::string>("kind");
        if (kind == "inline") {
            c.grid.depth = InlineDepths{d.numbers("values")};
        } else if (kind == "csv") {
            c.grid.depth = CsvDepths{d.required<std::string>("path")};
        } else if (kind == "basin") {
            BasinDepths b;
            b.shelf_depth = d.get("shelf_depth", b.shelf_depth);
            b.max_depth = d.get("max_depth", b.max_depth);
            c.grid.depth = b;
        } else {
            throw InputError("grid.depth.kind: expected inline, csv or basin, got \"" + kind + "\"");
        }
        d.finish();
        c.grid.layers = g.numbers("layers");
        c.grid.uniform_layers = g.get<Index>("uniform_layers", 0);
        c.grid.h_max = g.optional<double>("h_max");
        if (c.grid.layers.empty() == (c.grid.uniform_layers <= 0))
            throw InputError("grid: give exactly one of layers and uniform_layers");
        g.finish();
    }

    {
        auto t = root.child("transport");
        c.transport.period = t.required<double>("period_s");
        c.transport.n_time_steps = t.required<Index>("n_time_steps");
        c.transport.advection = detail::parse_advection(t.get<std::string>("advection", "upwind"),
                                                        "transport.advection");
        auto v = t.child("velocity");
        const auto vk = v.required<std::string>("kind");
        if (vk == "none") {
            c.transport.velocity = NoVelocity{};
        } else if (vk == "overturning") {
            OverturningParams p;
            p.amplitude = v.required<double>("amplitude_m3_s");
            p.seasonal_amplitude = v.get("seasonal_amplitude", 0.0);
            p.segments = v.get<Index>("segments", 0);
            c.transport.velocity = p;
        } else if (vk == "csv") {
            c.transport.velocity = CsvVelocity{v.required<std::string>("path")};
        } else {
            throw InputError("transport.velocity.kind: expected none, overturning or csv, got \"" + vk + "\"");
        }
        v.finish();
        auto d = t.child("diffusivity");
        const auto dk = d.required<std::string>("kind");
        if (dk == "layered") {
            LayeredDiffusivityParams p;
            p.kappa_horizontal = d.required<double>("kappa_horizontal_m2_s");
            p.kappa_vertical = d.required<double>("kappa_vertical_m2_s");
            p.vertical_seasonal = d.get("vertical_seasonal", 0.0);
            p.segments = d.get<Index>("segments", 0);
            c.transport.diffusivity = p;
        } else if (dk == "csv") {
            c.transport.diffusivity = CsvDiffusivity{d.required<std::string>("path")};
        } else {
            throw InputError("transport.diffusivity.kind: expected layered or csv, got \"" + dk + "\"");
        }
        d.finish();
        t.finish();
    }

    {
        auto m = root.child("model");
        const auto kind = m.required<std::string>("kind");
        if (kind == "po4dop") {
            c.model.kind = ModelKind::PO4DOP;
            c.model.alpha = m.required<double>("alpha_per_s");
            c.model.K_P = m.required<double>("K_P");
            c.model.K_I = m.required<double>("K_I");
            c.model.nu = m.required<double>("nu");
            c.model.beta = m.required<double>("beta");
            c.model.lambda = m.required<double>("lambda_per_s");
            auto ins = m.child("insolation");
            const auto ik = ins.required<std::string>("kind");
            if (ik == "seasonal") {
                c.model.insolation = SeasonalLight{ins.required<double>("I0"), ins.required<double>("k_w")};
            } else if (ik == "csv") {
                c.model.insolation = CsvInsolation{ins.required<std::string>("path")};
            } else {
                throw InputError("model.insolation.kind: expected seasonal or csv, got \"" + ik + "\"");
            }
            ins.finish();
        } else if (kind == "null") {
            c.model.kind = ModelKind::Null;
            c.model.lambda = m.required<double>("lambda_per_s");
        } else {
            throw InputError("model.kind: expected po4dop or null, got \"" + kind + "\"");
        }
        m.finish();
    }

    {
        auto s = root.child("solver");
        SolverSection d;
        c.solver.total_mass = s.optional<double>("total_mass");
        c.solver.mean_concentration = s.optional<double>("mean_concentration");
        if (c.solver.total_mass.has_value() == c.solver.mean_concentration.has_value())
            throw InputError("solver: give exactly one of total_mass and mean_concentration");
        c.solver.theta = s.get("theta", d.theta);
        c.solver.outer_tol = s.get("outer_tol", d.outer_tol);
        c.solver.outer_max_iter = s.get("outer_max_iter", d.outer_max_iter);
        c.solver.damping = s.get("damping", d.damping);
        c.solver.inner_tol = s.get("inner_tol", d.inner_tol);
        c.solver.krylov_restart = s.get("krylov_restart", d.krylov_restart);
        c.solver.krylov_max_iter = s.get("krylov_max_iter", d.krylov_max_iter);
        c.solver.seed = s.get<std::uint64_t>("seed", d.seed);
        c.solver.initial_snapshot = s.optional<std::string>("initial_snapshot");
        s.finish();
    }

    if (root.has("oracle")) {
        auto o = root.child("oracle");
        c.oracle.refine = o.get("refine", c.oracle.refine);
        c.oracle.tolerance = o.get("tolerance", c.oracle.tolerance);
        c.oracle.newton_tol = o.get("newton_tol", c.oracle.newton_tol);
        o.finish();
    }
    if (root.has("spinup")) {
        auto s = root.child("spinup");
        c.spinup.max_periods = s.get("max_periods", c.spinup.max_periods);
        c.spinup.target = s.optional<double>("target");
        s.finish();
    }
    if (root.has("output")) {
        auto o = root.child("output");
        c.output.dir = o.get<std::string>("dir", c.output.dir);
        c.output.reproducible = o.get("reproducible", c.output.reproducible);
        c.output.write_trajectory = o.get("write_trajectory", c.output.write_trajectory);
        o.finish();
    }
    root.finish();
    return c;
}

inline Json serialize_config(const RunConfig& c)
{
    Json j;
    {
        Json g;
        g["nx"] = c.grid.nx;
        g["ny"] = c.grid.ny;
        g["dx"] = c.grid.dx;
        g["dy"] = c.grid.dy;
        g["h_bar_e"] = c.grid.h_bar_e;
        Json d;
        if (const auto* v = std::get_if<InlineDepths>(&c.grid.depth)) {
            d["kind"] = "inline";
            d["values"] = v->values;
        } else if (const auto* f = std::get_if<CsvDepths>(&c.grid.depth)) {
            d["kind"] = "csv";
            d["path"] = f->path;
        } else {
            const auto& b = std::get<BasinDepths>(c.grid.depth);
            d["kind"] = "basin";
            d["shelf_depth"] = b.shelf_depth;
            d["max_depth"] = b.max_depth;
        }
        g["depth"] = d;
        if (c.grid.uniform_layers > 0) g["uniform_layers"] = c.grid.uniform_layers;
        else g["layers"] = c.grid.layers;
        if (c.grid.h_max) g["h_max"] = *c.grid.h_max;
        j["grid"] = g;
    }
    {
        Json t;
        t["period_s"] = c.transport.period;
        t["n_time_steps"] = c.transport.n_time_steps;
        t["advection"] = detail::advection_name(c.transport.advection);
        Json v;
        if (std::holds_alternative<NoVelocity>(c.transport.velocity)) {
            v["kind"] = "none";
        } else if (const auto* p = std::get_if<OverturningParams>(&c.transport.velocity)) {
            v["kind"] = "overturning";
            v["amplitude_m3_s"] = p->amplitude;
            v["seasonal_amplitude"] = p->seasonal_amplitude;
            v["segments"] = p->segments;
        } else {
            v["kind"] = "csv";
            v["path"] = std::get<CsvVelocity>(c.transport.velocity).path;
        }
        t["velocity"] = v;
        Json d;
        if (const auto* p = std::get_if<LayeredDiffusivityParams>(&c.transport.diffusivity)) {
            d["kind"] = "layered";
            d["kappa_horizontal_m2_s"] = p->kappa_horizontal;
            d["kappa_vertical_m2_s"] = p->kappa_vertical;
            d["vertical_seasonal"] = p->vertical_seasonal;
            d["segments"] = p->segments;
        } else {
            d["kind"] = "csv";
            d["path"] = std::get<CsvDiffusivity>(c.transport.diffusivity).path;
        }
        t["diffusivity"] = d;
        j["transport"] = t;
    }
    {
        Json m;
        if (c.model.kind == ModelKind::Null) {
            m["kind"] = "null";
            m["lambda_per_s"] = c.model.lambda;
        } else {
            m["kind"] = "po4dop";
            m["alpha_per_s"] = c.model.alpha;
            m["K_P"] = c.model.K_P;
            m["K_I"] = c.model.K_I;
            m["nu"] = c.model.nu;
            m["beta"] = c.model.beta;
            m["lambda_per_s"] = c.model.lambda;
            Json ins;
            if (const auto* s = std::get_if<SeasonalLight>(&c.model.insolation)) {
                ins["kind"] = "seasonal";
                ins["I0"] = s->I0;
                ins["k_w"] = s->k_w;
            } else {
                ins["kind"] = "csv";
                ins["path"] = std::get<CsvInsolation>(c.model.insolation).path;
            }
            m["insolation"] = ins;
        }
        j["model"] = m;
    }
    {
        Json s;
        if (c.solver.total_mass) s["total_mass"] = *c.solver.total_mass;
        if (c.solver.mean_concentration) s["mean_concentration"] = *c.solver.mean_concentration;
        s["theta"] = c.solver.theta;
        s["outer_tol"] = c.solver.outer_tol;
        s["outer_max_iter"] = c.solver.outer_max_iter;
        s["damping"] = c.solver.damping;
        s["inner_tol"] = c.solver.inner_tol;
        s["krylov_restart"] = c.solver.krylov_restart;
        s["krylov_max_iter"] = c.solver.krylov_max_iter;
        s["seed"] = c.solver.seed;
        if (c.solver.initial_snapshot) s["initial_snapshot"] = *c.solver.initial_snapshot;
        j["solver"] = s;
    }
    j["oracle"] = {{"refine", c.oracle.refine}, {"tolerance", c.oracle.tolerance}, {"newton_tol", c.oracle.newton_tol}};
    {
        Json s;
        s["max_periods"] = c.spinup.max_periods;
        if (c.spinup.target) s["target"] = *c.spinup.target;
        j["spinup"] = s;
    }
    j["output"] = {{"dir", c.output.dir},
                   {"reproducible", c.output.reproducible},
                   {"write_trajectory", c.output.write_trajectory}};
    return j;
}

inline RunConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config file " + path.string());
    Json j;
    try {
        j = Json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const Json::parse_error& e) {
        throw InputError(path.string() + ": " + e.what());
    }
    return parse_config(j);
}

// ---------------------------------------------------------------------------
// CSV input

namespace detail {

/// Numeric CSV table with a mandatory header. Blank lines and lines starting
/// with '#' are skipped.
inline std::vector<std::vector<double>> read_numeric_csv(const std::filesystem::path& path,
                                                         const std::vector<std::string>& header)
{
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    auto split = [](const std::string& line) {
        std::vector<std::string> out;
        std::stringstream ss(line);
        std::string item;
        while (std::getline(ss, item, ',')) {
            const auto b = item.find_first_not_of(" \t\r");
            const auto e = item.find_last_not_of(" \t\r");
            out.push_back(b == std::string::npos ? std::string{} : item.substr(b, e - b + 1));
        }
        return out;
    };

    std::string line;
    bool have_header = false;
    std::vector<std::vector<double>> rows;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
        const auto cells = split(line);
        if (!have_header) {
            if (cells != header) {
                std::string want;
                for (const auto& h : header) want += (want.empty() ? "" : ",") + h;
                throw InputError(path.string() + ": expected header " + want);
            }
            have_header = true;
            continue;
        }
        if (cells.size() != header.size())
            throw InputError(path.string() + ":" + std::to_string(lineno) + ": wrong number of fields");
        std::vector<double> row;
        for (const auto& cell : cells) {
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(cell, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != cell.size() || cell.empty())
                throw InputError(path.string() + ":" + std::to_string(lineno) + ": not a number: " + cell);
            row.push_back(v);
        }
        rows.push_back(std::move(row));
    }
    if (!have_header) throw InputError(path.string() + ": empty file");
    return rows;
}

inline Index as_index(double v, Index limit, const std::filesystem::path& path, const char* what)
{
    if (v != std::floor(v) || v < 0.0 || v >= static_cast<double>(limit))
        throw InputError(path.string() + ": " + what + " out of range: " + std::to_string(v));
    return static_cast<Index>(v);
}

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p)
{
    const std::filesystem::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

} // namespace detail

/// Per-(time index, entity) table; missing entries take `fill`.
inline std::vector<std::vector<double>> read_time_table(const std::filesystem::path& path,
                                                        const std::string& entity, const std::string& value,
                                                        Index n_steps, Index n_entities, double fill,
                                                        bool require_all)
{
    const auto rows = detail::read_numeric_csv(path, {"time_index", entity, value});
    std::vector<std::vector<double>> out(static_cast<std::size_t>(n_steps),
                                         std::vector<double>(static_cast<std::size_t>(n_entities), fill));
    std::vector<std::vector<bool>> seen(static_cast<std::size_t>(n_steps),
                                        std::vector<bool>(static_cast<std::size_t>(n_entities), false));
    for (const auto& r : rows) {
        const Index n = detail::as_index(r[0], n_steps, path, "time_index");
        const Index e = detail::as_index(r[1], n_entities, path, entity.c_str());
        if (seen[static_cast<std::size_t>(n)][static_cast<std::size_t>(e)])
            throw InputError(path.string() + ": duplicate entry for time " + std::to_string(n) + ", " + entity + " " +
                             std::to_string(e));
        seen[static_cast<std::size_t>(n)][static_cast<std::size_t>(e)] = true;
        out[static_cast<std::size_t>(n)][static_cast<std::size_t>(e)] = r[2];
    }
    if (require_all) {
        for (Index n = 0; n < n_steps; ++n)
            for (Index e = 0; e < n_entities; ++e)
                if (!seen[static_cast<std::size_t>(n)][static_cast<std::size_t>(e)])
                    throw InputError(path.string() + ": missing entry for time " + std::to_string(n) + ", " +
                                     entity + " " + std::to_string(e));
    }
    return out;
}

inline std::vector<double> read_depth_csv(const std::filesystem::path& path, Index n_columns)
{
    const auto rows = detail::read_numeric_csv(path, {"column_id", "depth_m"});
    std::vector<double> depth(static_cast<std::size_t>(n_columns), 0.0);
    std::vector<bool> seen(static_cast<std::size_t>(n_columns), false);
    for (const auto& r : rows) {
        const Index c = detail::as_index(r[0], n_columns, path, "column_id");
        if (seen[static_cast<std::size_t>(c)]) throw InputError(path.string() + ": duplicate column " + std::to_string(c));
        seen[static_cast<std::size_t>(c)] = true;
        depth[static_cast<std::size_t>(c)] = r[1];
    }
    for (Index c = 0; c < n_columns; ++c)
        if (!seen[static_cast<std::size_t>(c)])
            throw InputError(path.string() + ": no depth for column " + std::to_string(c));
    return depth;
}

// ---------------------------------------------------------------------------
// Construction

inline std::vector<double> basin_depths(Index nx, Index ny, const BasinDepths& b)
{
    if (!(b.shelf_depth > 0.0) || !(b.max_depth >= b.shelf_depth))
        throw InputError("basin depths need 0 < shelf_depth <= max_depth");
    std::vector<double> d(static_cast<std::size_t>(nx * ny));
    for (Index iy = 0; iy < ny; ++iy) {
        for (Index ix = 0; ix < nx; ++ix) {
            const double x = (static_cast<double>(ix) + 0.5) / static_cast<double>(nx) - 0.5;
            const double y = (static_cast<double>(iy) + 0.5) / static_cast<double>(ny) - 0.5;
            const double r2 = (x * x + y * y) / 0.5;
            d[static_cast<std::size_t>(ix + nx * iy)] =
                b.shelf_depth + (b.max_depth - b.shelf_depth) * std::max(0.0, 1.0 - r2);
        }
    }
    return d;
}

inline Grid build_grid(const GridConfig& c, const std::filesystem::path& base_dir = {})
{
    if (c.nx < 1 || c.ny < 1) throw InputError("grid needs nx, ny >= 1");
    std::vector<double> depths;
    if (const auto* v = std::get_if<InlineDepths>(&c.depth)) depths = v->values;
    else if (const auto* f = std::get_if<CsvDepths>(&c.depth)) depths = read_depth_csv(detail::resolve(base_dir, f->path), c.nx * c.ny);
    else depths = basin_depths(c.nx, c.ny, std::get<BasinDepths>(c.depth));

    LayerSpec layers = c.uniform_layers > 0 ? LayerSpec{UniformLayers{c.uniform_layers}}
                                            : LayerSpec{LayerThicknesses{c.layers}};
    return build_grid(HorizontalMesh{c.nx, c.ny, c.dx, c.dy}, depths, c.h_bar_e, layers,
                      c.h_max.value_or(std::numeric_limits<double>::infinity()));
}

inline VelocityField build_velocity(const Grid& g, const TransportConfig& c, const std::filesystem::path& base_dir = {})
{
    if (std::holds_alternative<NoVelocity>(c.velocity)) return zero_velocity(g, c.period, c.n_time_steps);
    if (const auto* p = std::get_if<OverturningParams>(&c.velocity))
        return overturning_velocity(g, *p, c.period, c.n_time_steps);
    const auto path = detail::resolve(base_dir, std::get<CsvVelocity>(c.velocity).path);
    VelocityField v = zero_velocity(g, c.period, c.n_time_steps);
    v.interior = read_time_table(path, "face_id", "flux_m3_s", c.n_time_steps,
                                 static_cast<Index>(g.interior_faces().size()), 0.0, false);
    return v;
}

inline DiffusivityField build_diffusivity(const Grid& g, const TransportConfig& c,
                                          const std::filesystem::path& base_dir = {})
{
    if (const auto* p = std::get_if<LayeredDiffusivityParams>(&c.diffusivity))
        return layered_diffusivity(g, *p, c.period, c.n_time_steps);
    const auto path = detail::resolve(base_dir, std::get<CsvDiffusivity>(c.diffusivity).path);
    DiffusivityField d;
    d.period = c.period;
    d.n_steps = c.n_time_steps;
    d.kappa = read_time_table(path, "face_id", "kappa_m2_s", c.n_time_steps,
                              static_cast<Index>(g.interior_faces().size()), 0.0, true);
    d.kappa_min = std::numeric_limits<double>::infinity();
    for (const auto& row : d.kappa)
        for (double k : row) d.kappa_min = std::min(d.kappa_min, k);
    if (g.interior_faces().empty()) d.kappa_min = 1.0;
    if (!(d.kappa_min > 0.0)) throw InputError(path.string() + ": diffusivities must be positive");
    return d;
}

inline PO4DOPParams po4dop_params(const Grid& g, const RunConfig& c, const std::filesystem::path& base_dir = {})
{
    PO4DOPParams p;
    p.alpha = c.model.alpha;
    p.K_P = c.model.K_P;
    p.K_I = c.model.K_I;
    p.nu = c.model.nu;
    p.beta = c.model.beta;
    p.lambda = c.model.lambda;
    if (const auto* s = std::get_if<SeasonalLight>(&c.model.insolation)) {
        p.insolation = SeasonalInsolation{s->I0, s->k_w, c.transport.period};
    } else {
        const auto path = detail::resolve(base_dir, std::get<CsvInsolation>(c.model.insolation).path);
        const auto table = read_time_table(path, "cell_id", "insolation_W_m2", c.transport.n_time_steps,
                                           g.n_cells(), 0.0, false);
        TabulatedInsolation tab;
        tab.period = c.transport.period;
        for (std::size_t n = 0; n < table.size(); ++n) {
            Vector v = Eigen::Map<const Vector>(table[n].data(), static_cast<Index>(table[n].size()));
            for (Index i = 0; i < v.size(); ++i) {
                if (!(v[i] >= 0.0) || !std::isfinite(v[i]))
                    throw InputError(path.string() + ": insolation must be finite and nonnegative");
                if (v[i] != 0.0 && g.cell(i).zone == Zone::Aphotic)
                    throw InputError(path.string() + ": nonzero insolation in aphotic cell " + std::to_string(i));
            }
            tab.values.push_back(std::move(v));
        }
        p.insolation = std::move(tab);
    }
    return p;
}

inline std::unique_ptr<ReactionModel> build_model(const Grid& g, const RunConfig& c,
                                                  const std::filesystem::path& base_dir = {})
{
    if (c.model.kind == ModelKind::Null) return std::make_unique<NullReaction>(c.model.lambda);
    return std::make_unique<PO4DOPModel>(po4dop_params(g, c, base_dir));
}

inline SolveConfig build_solve_config(const Grid& g, const RunConfig& c)
{
    SolveConfig s;
    s.total_mass = c.solver.total_mass ? *c.solver.total_mass : *c.solver.mean_concentration * g.total_volume();
    s.theta = c.solver.theta;
    s.outer_tol = c.solver.outer_tol;
    s.outer_max_iter = c.solver.outer_max_iter;
    s.damping = c.solver.damping;
    s.inner_tol = c.solver.inner_tol;
    s.krylov_restart = c.solver.krylov_restart;
    s.krylov_max_iter = c.solver.krylov_max_iter;
    s.seed = c.solver.seed;
    s.period = c.transport.period;
    s.n_time_steps = c.transport.n_time_steps;
    return s;
}

/// Everything a run needs, built from a configuration.
struct Problem {
    Grid grid;
    TransportOperator op;
    std::unique_ptr<ReactionModel> model;
    SolveConfig solve;
};

inline Problem build_problem(const RunConfig& c, const std::filesystem::path& base_dir = {})
{
    if (!(c.transport.period > 0.0) || c.transport.n_time_steps < 1)
        throw InputError("transport needs a positive period and at least one time step");
    Problem p;
    p.grid = build_grid(c.grid, base_dir);
    const auto vel = build_velocity(p.grid, c.transport, base_dir);
    const auto dif = build_diffusivity(p.grid, c.transport, base_dir);
    p.op = assemble_transport(p.grid, vel, dif, c.transport.advection);
    p.model = build_model(p.grid, c, base_dir);
    p.solve = build_solve_config(p.grid, c);
    p.solve.validate(p.op);
    return p;
}

} // namespace ndop
