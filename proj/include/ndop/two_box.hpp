#pragma once

// Bridge between a two-cell grid problem and the dense two-box reference.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "ndop/grid.hpp"
#include "ndop/oracle.hpp"
#include "ndop/solver.hpp"
#include "ndop/transport.hpp"

namespace ndop {

/// Geometry of a single column holding one euphotic and one aphotic cell
/// under time-independent pure diffusion. The exchange rate is the
/// diffusive conductance kappa A / d of the shared face.
inline TwoBoxGeometry two_box_geometry(const Grid& g, const TransportOperator& op)
{
    if (g.n_columns() != 1 || g.n_cells() != 2 || g.cell(0).zone != Zone::Euphotic ||
        g.cell(1).zone != Zone::Aphotic)
        throw InputError("two-box comparison needs one column with one euphotic and one aphotic cell");
    if (op.has_velocity() || op.unique_matrices().size() != 1)
        throw InputError("two-box comparison needs time-independent diffusion without advection");
    TwoBoxGeometry geo;
    geo.area = g.column(0).area;
    geo.euphotic_thickness = g.cell(0).thickness();
    geo.aphotic_thickness = g.cell(1).thickness();
    geo.exchange = op.unique_matrices()[0].coeff(0, 0);
    return geo;
}

struct OrbitComparison {
    double max_relative = 0.0;  // over components and coarse nodes
    int worst_component = 0;    // 0..3 in box-state order
    Index worst_node = 0;
};

/// Maximum pointwise difference between the grid trajectory and the oracle
/// orbit at the coarse nodes, each component scaled by its largest oracle
/// magnitude (or by the mean concentration when that component vanishes).
inline OrbitComparison compare_orbits(const TracerState& s, const OracleOrbit& orbit, double mean_concentration)
{
    const Index N = s.n_steps();
    if (static_cast<Index>(orbit.states.size()) != N * orbit.refine + 1)
        throw InputError("oracle orbit and trajectory use different time grids");
    Eigen::Vector4d scale = Eigen::Vector4d::Zero();
    for (const auto& c : orbit.states) scale = scale.cwiseMax(c.cwiseAbs());
    for (int k = 0; k < 4; ++k)
        if (scale[k] == 0.0) scale[k] = std::max(mean_concentration, std::numeric_limits<double>::min());

    OrbitComparison out;
    for (Index n = 0; n <= N; ++n) {
        const auto& o = orbit.states[static_cast<std::size_t>(n * orbit.refine)];
        const auto& a = s.y1[static_cast<std::size_t>(n)];
        const auto& b = s.y2[static_cast<std::size_t>(n)];
        const Eigen::Vector4d mine(a[0], a[1], b[0], b[1]);
        for (int k = 0; k < 4; ++k) {
            const double d = std::abs(mine[k] - o[k]) / scale[k];
            if (d > out.max_relative) {
                out.max_relative = d;
                out.worst_component = k;
                out.worst_node = n;
            }
        }
    }
    return out;
}

struct LambdaSweep {
    std::vector<double> lambda;     // s^-1
    std::vector<double> amplitude;  // max |DOP| over the orbit
    double slope = 0.0;             // least-squares slope of log amplitude against log lambda
};

/// Oracle orbits for lambda = factor * base lambda with everything else
/// fixed. For large lambda the DOP pool is drained as fast as it forms, so
/// its amplitude decays like 1 / lambda.
inline LambdaSweep lambda_sweep(const PO4DOPParams& base, const TwoBoxGeometry& geo, const OracleConfig& cfg,
                                const std::vector<double>& factors)
{
    if (factors.size() < 2) throw InputError("lambda sweep needs at least two values");
    LambdaSweep out;
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (double f : factors) {
        PO4DOPParams p = base;
        p.lambda = base.lambda * f;
        const OracleOrbit orbit = two_box_oracle(p, geo, cfg);
        double amp = 0.0;
        for (const auto& c : orbit.states) amp = std::max({amp, std::abs(c[2]), std::abs(c[3])});
        out.lambda.push_back(p.lambda);
        out.amplitude.push_back(amp);
        const double x = std::log(p.lambda), y = std::log(amp);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double n = static_cast<double>(factors.size());
    out.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    return out;
}

} // namespace ndop
