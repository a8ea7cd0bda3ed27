#pragma once

// Result files: CSV tables (units in the column names), binary snapshots for
// restarts and small static SVG line plots.
//
// Numbers are written in the shortest form that reads back to the same
// double, so identical runs produce identical files.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "ndop/grid.hpp"
#include "ndop/oracle.hpp"
#include "ndop/solver.hpp"

namespace ndop {

inline std::string num(double v) { return fmt::format("{}", v); }

inline void write_trajectory_csv(std::ostream& os, const TracerState& s)
{
    os << "time_node,time_s,cell_id,y1_mmolP_m3,y2_mmolP_m3\n";
    for (Index n = 0; n <= s.n_steps(); ++n) {
        const auto& a = s.y1[static_cast<std::size_t>(n)];
        const auto& b = s.y2[static_cast<std::size_t>(n)];
        const std::string t = num(s.time(n));
        for (Index i = 0; i < a.size(); ++i)
            os << n << ',' << t << ',' << i << ',' << num(a[i]) << ',' << num(b[i]) << '\n';
    }
}

inline void write_mass_csv(std::ostream& os, const Grid& g, const TracerState& s, double total_mass)
{
    os << "time_node,time_s,mass_mmolP,drift_relative\n";
    const double ref = std::max(total_mass, 1.0);
    for (Index n = 0; n <= s.n_steps(); ++n) {
        const double m = g.volumes().dot(s.y1[static_cast<std::size_t>(n)] + s.y2[static_cast<std::size_t>(n)]);
        os << n << ',' << num(s.time(n)) << ',' << num(m) << ',' << num((m - total_mass) / ref) << '\n';
    }
}

inline void write_history_csv(std::ostream& os, const std::vector<double>& history)
{
    os << "iteration,fixed_point_residual_relative\n";
    for (std::size_t k = 0; k < history.size(); ++k) os << k + 1 << ',' << num(history[k]) << '\n';
}

/// Report as a quantity/value/unit table. Wall time is left out so that the
/// file is reproducible; it goes into the text report.
inline void write_report_csv(std::ostream& os, const SolveReport& r)
{
    os << "quantity,value,unit\n";
    auto row = [&](const char* q, const std::string& v, const char* unit) { os << q << ',' << v << ',' << unit << '\n'; };
    row("converged", r.converged ? "1" : "0", "flag");
    row("iterations", std::to_string(r.iterations), "count");
    row("fixed_point_residual", num(r.fixed_point_residual), "relative");
    row("periodicity_y1", num(r.periodicity_y1), "relative");
    row("periodicity_y2", num(r.periodicity_y2), "relative");
    row("max_mass_drift", num(r.max_mass_drift), "relative");
    row("equation_residual", num(r.equation_residual), "mmolP_m3_s");
    row("forcing_norm", num(r.forcing_norm), "mmolP_m3_s");
    row("equation_residual_over_forcing",
        num(r.forcing_norm > 0.0 ? r.equation_residual / r.forcing_norm : r.equation_residual), "relative");
    row("bounds_ok", r.bounds_ok ? "1" : "0", "flag");
    row("mass_identity_ok", r.mass_identity_ok ? "1" : "0", "flag");
    row("mass_identity_max", num(r.mass_identity_max), "relative");
    row("y2_max", num(r.y2_max), "mmolP_m3");
    row("period_maps", std::to_string(r.period_maps), "count");
}

/// With `with_wall_time` false the report depends only on the inputs.
inline void write_report_text(std::ostream& os, const SolveReport& r, double total_mass, double volume,
                              bool with_wall_time = true)
{
    os << "status:               " << (r.converged ? std::string("converged") : "not converged (" + r.message + ")") << '\n'
       << "initial state:        " << r.y_init << '\n'
       << "outer iterations:     " << r.iterations << '\n'
       << "period integrations:  " << r.period_maps << '\n'
       << "fixed-point residual: " << num(r.fixed_point_residual) << '\n'
       << "periodicity y1, y2:   " << num(r.periodicity_y1) << ", " << num(r.periodicity_y2) << '\n'
       << "total mass C:         " << num(total_mass) << " mmol P (mean " << num(volume > 0 ? total_mass / volume : 0.0)
       << " mmol P m^-3)\n"
       << "max mass drift:       " << num(r.max_mass_drift) << " (relative to max(C, 1))\n"
       << "equation residual:    " << num(r.equation_residual) << " (forcing norm " << num(r.forcing_norm) << ")\n"
       << "largest residual at:  component " << r.residual_component << ", step " << r.residual_step << ", cell "
       << r.residual_cell << '\n'
       << "reaction bounds:      " << (r.bounds_ok ? "ok" : "VIOLATED") << '\n'
       << "mass identity:        " << (r.mass_identity_ok ? "ok" : "VIOLATED") << " (max " << num(r.mass_identity_max)
       << ")\n"
       << "max |y2|:             " << num(r.y2_max) << " mmol P m^-3\n";
    if (with_wall_time) os << "wall time:            " << fmt::format("{:.2f}", r.wall_seconds) << " s\n";
}

inline void write_orbit_csv(std::ostream& os, const OracleOrbit& orbit)
{
    os << "node,time_s,po4_euphotic_mmolP_m3,po4_aphotic_mmolP_m3,dop_euphotic_mmolP_m3,dop_aphotic_mmolP_m3,mass_"
          "mmolP\n";
    for (std::size_t k = 0; k < orbit.states.size(); ++k) {
        const auto& c = orbit.states[k];
        os << k << ',' << num(orbit.times[k]) << ',' << num(c[0]) << ',' << num(c[1]) << ',' << num(c[2]) << ','
           << num(c[3]) << ',' << num(orbit.mass[k]) << '\n';
    }
}

// ---------------------------------------------------------------------------
// Binary snapshots

namespace detail {
inline constexpr char snapshot_magic[8] = {'N', 'D', 'O', 'P', 'S', 'N', 'P', '1'};

template <class T>
void write_raw(std::ostream& os, const T& v)
{
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_raw(std::istream& is)
{
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw InputError("truncated snapshot");
    return v;
}
} // namespace detail

/// Layout: magic, cell count, step count, period, total volume, then y1 and
/// y2 for every node (native little-endian doubles).
inline void save_snapshot(const std::filesystem::path& path, const Grid& g, const TracerState& s)
{
    require_same_grid(g, TracerField(g, s.y1.front()));
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InputError("cannot write " + path.string());
    os.write(detail::snapshot_magic, sizeof detail::snapshot_magic);
    detail::write_raw<std::int64_t>(os, g.n_cells());
    detail::write_raw<std::int64_t>(os, s.n_steps());
    detail::write_raw<double>(os, s.period);
    detail::write_raw<double>(os, g.total_volume());
    for (std::size_t n = 0; n < s.y1.size(); ++n) {
        os.write(reinterpret_cast<const char*>(s.y1[n].data()), static_cast<std::streamsize>(sizeof(double) * s.y1[n].size()));
        os.write(reinterpret_cast<const char*>(s.y2[n].data()), static_cast<std::streamsize>(sizeof(double) * s.y2[n].size()));
    }
    if (!os) throw InputError("failed writing " + path.string());
}

inline TracerState load_snapshot(const std::filesystem::path& path, const Grid& g)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) throw InputError("cannot open snapshot " + path.string());
    char magic[8];
    is.read(magic, sizeof magic);
    if (!is || std::memcmp(magic, detail::snapshot_magic, sizeof magic) != 0)
        throw InputError(path.string() + " is not a snapshot file");
    const auto cells = detail::read_raw<std::int64_t>(is);
    const auto steps = detail::read_raw<std::int64_t>(is);
    TracerState s;
    s.period = detail::read_raw<double>(is);
    const double volume = detail::read_raw<double>(is);
    if (cells != g.n_cells() || std::abs(volume - g.total_volume()) > 1e-12 * g.total_volume())
        throw InputError(path.string() + " was written for a different grid");
    if (steps < 1) throw InputError(path.string() + ": invalid step count");
    s.grid_id = g.id();
    s.y1.assign(static_cast<std::size_t>(steps + 1), Vector(cells));
    s.y2.assign(static_cast<std::size_t>(steps + 1), Vector(cells));
    for (std::size_t n = 0; n < s.y1.size(); ++n) {
        is.read(reinterpret_cast<char*>(s.y1[n].data()), static_cast<std::streamsize>(sizeof(double) * cells));
        is.read(reinterpret_cast<char*>(s.y2[n].data()), static_cast<std::streamsize>(sizeof(double) * cells));
    }
    if (!is) throw InputError("truncated snapshot " + path.string());
    if (!s.all_finite()) throw InputError(path.string() + " contains non-finite values");
    return s;
}

// ---------------------------------------------------------------------------
// SVG line plots

struct PlotSeries {
    std::string label;
    std::vector<double> x, y;
    std::string color = "#1f77b4";
};

struct PlotSpec {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_y = false;
    bool invert_y = false;  // depth axes grow downward
    std::optional<std::pair<double, double>> y_band;  // shaded horizontal band
};

namespace detail {
inline std::string xml_escape(const std::string& s)
{
    std::string out;
    for (char c : s) {
        switch (c) {
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '&': out += "&amp;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

inline std::string tick(double v) { return fmt::format("{:.3g}", v); }
} // namespace detail

inline void write_svg_plot(std::ostream& os, const PlotSpec& spec, const std::vector<PlotSeries>& series)
{
    const double W = 640, H = 420, left = 80, right = 20, top = 40, bottom = 60;
    const double pw = W - left - right, ph = H - top - bottom;

    auto ty = [&](double v) { return spec.log_y ? std::log10(std::max(v, 1e-300)) : v; };
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i]) || (spec.log_y && s.y[i] <= 0.0)) continue;
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, ty(s.y[i]));
            y1 = std::max(y1, ty(s.y[i]));
        }
    }
    if (spec.y_band) {
        y0 = std::min(y0, ty(spec.y_band->first));
        y1 = std::max(y1, ty(spec.y_band->second));
    }
    if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 == x0) x0 -= 0.5, x1 += 0.5;
    if (y1 == y0) {
        const double pad = std::max(std::abs(y0) * 1e-3, 1e-12);
        y0 -= pad;
        y1 += pad;
    }
    auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
    auto py = [&](double y) {
        const double f = (ty(y) - y0) / (y1 - y0);
        return spec.invert_y ? top + f * ph : top + (1.0 - f) * ph;
    };
    auto pyt = [&](double yt) {
        const double f = (yt - y0) / (y1 - y0);
        return spec.invert_y ? top + f * ph : top + (1.0 - f) * ph;
    };

    os << fmt::format(R"(<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" font-family="sans-serif" font-size="12">)",
                      W, H)
       << '\n';
    os << fmt::format(R"(<rect x="0" y="0" width="{}" height="{}" fill="white"/>)", W, H) << '\n';
    os << fmt::format(R"(<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>)", W / 2,
                      detail::xml_escape(spec.title))
       << '\n';
    if (spec.y_band) {
        const double a = py(spec.y_band->first), b = py(spec.y_band->second);
        os << fmt::format(R"(<rect x="{:.2f}" y="{:.2f}" width="{:.2f}" height="{:.2f}" fill="#dddddd"/>)", left,
                          std::min(a, b), pw, std::abs(a - b))
           << '\n';
    }
    os << fmt::format(R"(<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="black"/>)", left, top, pw, ph)
       << '\n';

    for (int k = 0; k <= 4; ++k) {
        const double xv = x0 + (x1 - x0) * k / 4.0;
        const double yt = y0 + (y1 - y0) * k / 4.0;
        const double yv = spec.log_y ? std::pow(10.0, yt) : yt;
        os << fmt::format(R"(<text x="{:.2f}" y="{:.2f}" text-anchor="middle">{}</text>)", px(xv), top + ph + 18,
                          detail::tick(xv))
           << '\n';
        os << fmt::format(R"(<text x="{:.2f}" y="{:.2f}" text-anchor="end">{}</text>)", left - 6, pyt(yt) + 4,
                          detail::tick(yv))
           << '\n';
    }
    os << fmt::format(R"(<text x="{}" y="{}" text-anchor="middle">{}</text>)", left + pw / 2, H - 15,
                      detail::xml_escape(spec.x_label))
       << '\n';
    os << fmt::format(R"svg(<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>)svg",
                      top + ph / 2, top + ph / 2, detail::xml_escape(spec.y_label))
       << '\n';

    double legend_y = top + 16;
    for (const auto& s : series) {
        std::string pts;
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i]) || (spec.log_y && s.y[i] <= 0.0)) continue;
            pts += fmt::format("{:.2f},{:.2f} ", px(s.x[i]), py(s.y[i]));
        }
        os << fmt::format(R"(<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>)", s.color, pts)
           << '\n';
        if (!s.label.empty()) {
            os << fmt::format(R"(<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{}" stroke-width="2"/>)",
                              left + pw - 150, legend_y - 4, left + pw - 130, legend_y - 4, s.color)
               << '\n';
            os << fmt::format(R"(<text x="{}" y="{}">{}</text>)", left + pw - 125, legend_y,
                              detail::xml_escape(s.label))
               << '\n';
            legend_y += 16;
        }
    }
    os << "</svg>\n";
}

/// Time-mean, horizontally averaged (volume weighted) profiles per layer.
struct LayerProfiles {
    std::vector<double> depth;  // volume-weighted mean centre depth (m)
    std::vector<double> y1, y2;
};

inline LayerProfiles layer_profiles(const Grid& g, const TracerState& s)
{
    Index n_layers = 0;
    for (const auto& c : g.cells()) n_layers = std::max(n_layers, c.layer + 1);
    std::vector<double> vol(static_cast<std::size_t>(n_layers), 0.0);
    LayerProfiles p;
    p.depth.assign(vol.size(), 0.0);
    p.y1.assign(vol.size(), 0.0);
    p.y2.assign(vol.size(), 0.0);
    const Index N = s.n_steps();
    for (Index i = 0; i < g.n_cells(); ++i) {
        const auto& c = g.cell(i);
        const auto l = static_cast<std::size_t>(c.layer);
        double m1 = 0.0, m2 = 0.0;
        for (Index n = 0; n < N; ++n) {
            m1 += s.y1[static_cast<std::size_t>(n)][i];
            m2 += s.y2[static_cast<std::size_t>(n)][i];
        }
        vol[l] += c.volume;
        p.depth[l] += c.volume * c.z_center();
        p.y1[l] += c.volume * m1 / static_cast<double>(N);
        p.y2[l] += c.volume * m2 / static_cast<double>(N);
    }
    for (std::size_t l = 0; l < vol.size(); ++l) {
        p.depth[l] /= vol[l];
        p.y1[l] /= vol[l];
        p.y2[l] /= vol[l];
    }
    return p;
}

} // namespace ndop
