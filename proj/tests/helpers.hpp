#pragma once

#include <algorithm>
#include <numeric>
#include <random>
#include <vector>

#include "ndop/config.hpp"
#include "ndop/grid.hpp"
#include "ndop/reactions.hpp"
#include "ndop/transport.hpp"

namespace ndop::testkit {

inline constexpr double year = 360.0 * 86400.0;

/// Layered grid with random size, bathymetry and layer thicknesses. The
/// euphotic depth is always a layer interface and some columns are
/// shallower than it.
inline Grid random_grid(std::mt19937_64& rng, Index max_nx = 16, Index max_ny = 16, Index max_layers = 15)
{
    std::uniform_int_distribution<Index> nxd(1, max_nx), nyd(1, max_ny);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const Index nx = nxd(rng), ny = nyd(rng);
    const double h_bar_e = 30.0 + 70.0 * u(rng);

    std::vector<double> layers;
    const int n_euphotic = 1 + static_cast<int>(3.0 * u(rng));
    std::vector<double> parts(static_cast<std::size_t>(n_euphotic));
    double total = 0.0;
    for (auto& p : parts) total += (p = 0.5 + u(rng));
    for (double p : parts) layers.push_back(h_bar_e * p / total);
    layers.back() = h_bar_e - std::accumulate(layers.begin(), layers.end() - 1, 0.0);
    const Index n_aphotic = std::max<Index>(1, max_layers - n_euphotic - static_cast<Index>(3.0 * u(rng)));
    for (Index k = 0; k < n_aphotic; ++k) layers.push_back(20.0 + 280.0 * u(rng));
    const double full = std::accumulate(layers.begin(), layers.end(), 0.0);

    std::vector<double> depth(static_cast<std::size_t>(nx * ny));
    for (auto& d : depth) {
        const double r = u(rng);
        d = r < 0.2 ? (0.2 + 0.8 * u(rng)) * h_bar_e : h_bar_e + (full - h_bar_e) * u(rng);
    }
    const double dx = 1e4 + 9e4 * u(rng), dy = 1e4 + 9e4 * u(rng);
    return build_grid(HorizontalMesh{nx, ny, dx, dy}, depth, h_bar_e, LayerThicknesses{layers});
}

inline Vector random_vector(std::mt19937_64& rng, Index n, double mean = 0.0, double sd = 1.0)
{
    std::normal_distribution<double> normal(mean, sd);
    Vector v(n);
    for (Index i = 0; i < n; ++i) v[i] = normal(rng);
    return v;
}

inline DiffusivityField constant_diffusivity(const Grid& g, double kappa, double period, Index n_steps)
{
    DiffusivityField d;
    d.period = period;
    d.n_steps = n_steps;
    d.kappa.assign(static_cast<std::size_t>(n_steps), std::vector<double>(g.interior_faces().size(), kappa));
    d.kappa_min = kappa;
    return d;
}

inline PO4DOPParams reference_params(double period = year)
{
    PO4DOPParams p;
    p.alpha = 50.0 / year;
    p.K_P = 0.5;
    p.K_I = 30.0;
    p.nu = 0.67;
    p.beta = 0.858;
    p.lambda = 2.0 / year;
    p.insolation = SeasonalInsolation{100.0, 0.04, period};
    return p;
}

/// The 16 x 16 x 15 desk-scale configuration: a bowl-shaped basin with a
/// seasonal overturning circulation, 96 steps per year.
inline RunConfig desk_scale_config()
{
    RunConfig c;
    c.grid.nx = 16;
    c.grid.ny = 16;
    c.grid.dx = 5e4;
    c.grid.dy = 5e4;
    c.grid.h_bar_e = 50.0;
    c.grid.depth = BasinDepths{40.0, 2000.0};
    c.grid.layers = {10, 15, 25, 40, 60, 80, 100, 120, 150, 180, 220, 250, 250, 250, 250};
    c.transport.period = year;
    c.transport.n_time_steps = 96;
    c.transport.velocity = OverturningParams{5e5, 0.3, 12};
    c.transport.diffusivity = LayeredDiffusivityParams{2e3, 1e-2, 0.5, 12};
    c.model.alpha = 50.0 / year;
    c.model.lambda = 2.0 / year;
    c.solver.mean_concentration = 2.17;
    c.solver.outer_tol = 1e-8;
    return c;
}

/// Two cells in one column: 50 m euphotic over 450 m aphotic.
inline RunConfig two_box_config(Index n_steps)
{
    RunConfig c;
    c.grid.nx = c.grid.ny = 1;
    c.grid.dx = c.grid.dy = 1e5;
    c.grid.h_bar_e = 50.0;
    c.grid.depth = InlineDepths{{500.0}};
    c.grid.layers = {50.0, 450.0};
    c.transport.period = year;
    c.transport.n_time_steps = n_steps;
    c.transport.velocity = NoVelocity{};
    c.transport.diffusivity = LayeredDiffusivityParams{1.0, 1e-4, 0.0, 0};
    c.model.alpha = 5.0 / year;
    c.model.lambda = 2.0 / year;
    c.solver.mean_concentration = 2.0;
    c.solver.theta = 0.5;
    c.solver.damping = 1.0;
    c.solver.outer_tol = 1e-12;
    return c;
}

} // namespace ndop::testkit
