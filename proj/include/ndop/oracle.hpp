#pragma once

// Dense two-box reference for the PO4-DOP model.
//
// One euphotic box on top of one aphotic box, exchanging water at a fixed
// rate. The four concentrations (PO4 and DOP in each box) obey a small ODE
// system that is written out here directly from the model definition, without
// going through the grid, transport or reaction modules. Its periodic orbit is
// found by shooting: Newton's method on Phi_T(c) - c with a finite-difference
// Jacobian and the total mass appended as an extra equation.

#include <array>
#include <cstdio>
#include <limits>
#include <cmath>
#include <numbers>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "ndop/common.hpp"
#include "ndop/reactions.hpp"

namespace ndop {

struct TwoBoxGeometry {
    double area = 1.0;                // horizontal area (m^2)
    double euphotic_thickness = 1.0;  // = h_bar_e (m)
    double aphotic_thickness = 1.0;   // h - h_bar_e (m)
    double exchange = 0.0;            // volume exchange rate between the boxes (m^3 s^-1)
};

struct OracleConfig {
    double total_mass = 0.0;
    double period = 1.0;
    Index n_time_steps = 1;  // coarse steps; the oracle integrates with refine x more
    double theta = 1.0;
    int refine = 10;
    double newton_tol = 1e-13;
    double stagnation_tol = 1e-10;  // accepted once Newton stops making progress
    int newton_max_iter = 40;
};

using BoxState = Eigen::Vector4d;  // (PO4 euphotic, PO4 aphotic, DOP euphotic, DOP aphotic)

struct OracleOrbit {
    std::vector<double> times;     // refine * n_time_steps + 1 nodes
    std::vector<BoxState> states;
    std::vector<double> mass;      // total mass at each node
    std::vector<double> newton_residuals;
    int refine = 1;
};

class TwoBoxSystem {
public:
    TwoBoxSystem(const PO4DOPParams& p, const TwoBoxGeometry& geo) : p_(p), geo_(geo)
    {
        p_.validate();
        if (!(geo.area > 0.0) || !(geo.euphotic_thickness > 0.0) || !(geo.aphotic_thickness > 0.0) ||
            !(geo.exchange >= 0.0))
            throw InputError("two-box geometry must be positive");
        Ve_ = geo.area * geo.euphotic_thickness;
        Va_ = geo.area * geo.aphotic_thickness;
        const double depth = geo.euphotic_thickness + geo.aphotic_thickness;
        floor_fraction_ = std::pow(depth / geo.euphotic_thickness, -p.beta);
        water_fraction_ = 1.0 - floor_fraction_;

        // c' = -L c + N(c, t)
        const double q = geo.exchange, lam = p.lambda;
        L_.setZero();
        L_(0, 0) = q / Ve_;  L_(0, 1) = -q / Ve_; L_(0, 2) = -lam;
        L_(1, 0) = -q / Va_; L_(1, 1) = q / Va_;  L_(1, 3) = -lam;
        L_(2, 2) = q / Ve_ + lam; L_(2, 3) = -q / Ve_;
        L_(3, 2) = -q / Va_;      L_(3, 3) = q / Va_ + lam;
    }

    double euphotic_volume() const { return Ve_; }
    double aphotic_volume() const { return Va_; }
    double mass(const BoxState& c) const { return Ve_ * (c[0] + c[2]) + Va_ * (c[1] + c[3]); }

    double light(double t) const
    {
        if (const auto* s = std::get_if<SeasonalInsolation>(&p_.insolation)) {
            const double season = std::max(0.0, std::cos(2.0 * std::numbers::pi * t / s->period));
            return s->I0 * season * std::exp(-s->k_w * 0.5 * geo_.euphotic_thickness);
        }
        const auto& tab = std::get<TabulatedInsolation>(p_.insolation);
        double phase = std::fmod(t / tab.period, 1.0);
        if (phase < 0.0) phase += 1.0;
        const auto n = static_cast<double>(tab.values.size());
        const auto k = std::min<std::size_t>(tab.values.size() - 1, static_cast<std::size_t>(phase * n));
        return tab.values[k][0];
    }

    /// Nonlinear part N(c, t) and its derivative with respect to PO4 in the
    /// euphotic box.
    void nonlinear(const BoxState& c, double t, BoxState& N, BoxState& dN) const
    {
        const double I = light(t);
        const double light_lim = I / (std::abs(I) + p_.K_I);
        const double G = I == 0.0 ? 0.0 : p_.alpha * c[0] / (std::abs(c[0]) + p_.K_P) * light_lim;
        const double dG = I == 0.0 ? 0.0 : p_.alpha * p_.K_P / std::pow(std::abs(c[0]) + p_.K_P, 2) * light_lim;
        // Column-integrated export, redistributed in the aphotic box and on the floor.
        const double export_rate = (1.0 - p_.nu) * geo_.euphotic_thickness * geo_.area;
        const double to_aphotic = export_rate * (water_fraction_ + floor_fraction_) / Va_;
        N << -G, to_aphotic * G, p_.nu * G, 0.0;
        dN << -dG, to_aphotic * dG, p_.nu * dG, 0.0;
    }

    /// One theta step of size dt from (c0, t0), solved with Newton.
    BoxState step(const BoxState& c0, double t0, double dt, double theta) const
    {
        BoxState N0, dN0, N1, dN1;
        nonlinear(c0, t0, N0, dN0);
        const BoxState base = c0 / dt - (1.0 - theta) * (L_ * c0 - N0);
        BoxState c = c0;
        const Eigen::Matrix4d lhs = Eigen::Matrix4d::Identity() / dt + theta * L_;
        double previous = std::numeric_limits<double>::infinity();
        for (int it = 0; it < 50; ++it) {
            nonlinear(c, t0 + dt, N1, dN1);
            const BoxState R = lhs * c - theta * N1 - base;
            Eigen::Matrix4d J = lhs;
            J.col(0) -= theta * dN1;
            const BoxState delta = J.partialPivLu().solve(-R);
            c += delta;
            // Stop at round-off: the update is negligible or no longer shrinking.
            const double size = delta.cwiseAbs().maxCoeff();
            if (size <= 1e-15 * std::max(1.0, c.cwiseAbs().maxCoeff()) || size >= previous) break;
            previous = size;
        }
        return c;
    }

    BoxState flow(const BoxState& c0, const OracleConfig& cfg, std::vector<BoxState>* path = nullptr) const
    {
        const Index steps = cfg.n_time_steps * cfg.refine;
        const double dt = cfg.period / static_cast<double>(steps);
        BoxState c = c0;
        if (path) {
            path->clear();
            path->push_back(c);
        }
        for (Index k = 0; k < steps; ++k) {
            // Same node times as the coarse grid at every refine-th step.
            const double t = cfg.period * static_cast<double>(k) / static_cast<double>(steps);
            c = step(c, t, dt, cfg.theta);
            if (path) path->push_back(c);
        }
        return c;
    }

private:
    PO4DOPParams p_;
    TwoBoxGeometry geo_;
    double Ve_ = 0.0, Va_ = 0.0;
    double floor_fraction_ = 0.0, water_fraction_ = 0.0;
    Eigen::Matrix4d L_;
};

/// Periodic orbit of the two-box system with total mass C. Throws SolveError
/// with the Newton residual history when shooting fails.
inline OracleOrbit two_box_oracle(const PO4DOPParams& params, const TwoBoxGeometry& geo, const OracleConfig& cfg)
{
    if (cfg.refine < 1 || cfg.n_time_steps < 1 || !(cfg.period > 0.0))
        throw InputError("oracle needs positive period, steps and refinement");
    const TwoBoxSystem sys(params, geo);
    const double Ve = sys.euphotic_volume(), Va = sys.aphotic_volume(), Vt = Ve + Va;

    OracleOrbit orbit;
    orbit.refine = cfg.refine;
    BoxState c;
    c << cfg.total_mass / Vt, cfg.total_mass / Vt, 0.0, 0.0;
    Eigen::Matrix<double, 1, 4> mass_row;
    mass_row << Ve / Vt, Va / Vt, Ve / Vt, Va / Vt;

    bool ok = false;
    for (int it = 0; it < cfg.newton_max_iter; ++it) {
        const BoxState phi = sys.flow(c, cfg);
        const BoxState r = phi - c;
        const double scale = std::max(1.0, c.cwiseAbs().maxCoeff());
        const double mass_err = cfg.total_mass / Vt - mass_row.dot(c);
        const double res = std::max(r.cwiseAbs().maxCoeff(), std::abs(mass_err)) / scale;
        orbit.newton_residuals.push_back(res);
        if (!std::isfinite(res)) break;
        // Long integrations have a round-off floor above newton_tol; accept a
        // residual that is already tiny and has stopped improving.
        const double previous = orbit.newton_residuals.size() > 1
                                    ? orbit.newton_residuals[orbit.newton_residuals.size() - 2]
                                    : std::numeric_limits<double>::infinity();
        if (res <= cfg.newton_tol || (res <= cfg.stagnation_tol && res > 0.5 * previous)) {
            ok = true;
            break;
        }
        Eigen::Matrix<double, 5, 4> J;
        for (int j = 0; j < 4; ++j) {
            BoxState cp = c;
            const double h = 1e-7 * std::max(1.0, std::abs(c[j]));
            cp[j] += h;
            J.block<4, 1>(0, j) = (sys.flow(cp, cfg) - phi) / h;
            J(j, j) -= 1.0;
        }
        J.row(4) = mass_row;
        Eigen::Matrix<double, 5, 1> rhs;
        rhs << -r, mass_err;
        c += J.colPivHouseholderQr().solve(rhs);
    }
    if (!ok) {
        std::string msg = "two-box shooting did not converge; residuals:";
        for (double r : orbit.newton_residuals) {
            char buf[32];
            std::snprintf(buf, sizeof buf, " %.3e", r);
            msg += buf;
        }
        throw SolveError(msg);
    }

    sys.flow(c, cfg, &orbit.states);
    const auto nodes = orbit.states.size();
    orbit.times.resize(nodes);
    orbit.mass.resize(nodes);
    for (std::size_t k = 0; k < nodes; ++k) {
        orbit.times[k] = cfg.period * static_cast<double>(k) / static_cast<double>(nodes - 1);
        orbit.mass[k] = sys.mass(orbit.states[k]);
    }
    return orbit;
}

} // namespace ndop
