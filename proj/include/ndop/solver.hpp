#pragma once

// Periodic solver for the coupled nutrient / DOP system
//
//     y1' + B y1 - lambda y2 = F1(y),   y2' + B y2 + lambda y2 = F2(y),
//     y(0) = y(T),   mass(y1(t)) + mass(y2(t)) = C.
//
// One application of the map A freezes the reaction forcing at a state z and
// solves the linear problem exactly:
//   1. y2 from the coercive periodic problem with the +lambda shift,
//   2. the zero-mass periodic solution S0 of S' + B S = F1 + F2,
//   3. S_C = S0 + C / |Omega| and y1 = S_C - y2.
// Periodic linear problems are solved as fixed points of the period map with
// GMRES. The outer loop is damped Picard iteration on A.

#include <chrono>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/SparseLU>

#include "ndop/grid.hpp"
#include "ndop/krylov.hpp"
#include "ndop/reactions.hpp"
#include "ndop/transport.hpp"

namespace ndop {

struct SolveConfig {
    double total_mass = 0.0;  // C (mmol P)
    double theta = 1.0;       // 1 implicit Euler, 1/2 Crank-Nicolson
    double outer_tol = 1e-8;
    int outer_max_iter = 200;
    double damping = 0.5;     // omega in (0, 1]
    double inner_tol = 1e-12; // periodicity tolerance of the linear solves
    int krylov_restart = 40;
    int krylov_max_iter = 600;
    std::uint64_t seed = 0;   // nonzero: random first Krylov guess drawn from this seed
    double period = 0.0;      // 0: take from the transport operator
    Index n_time_steps = 0;   // 0: take from the transport operator

    void validate(const TransportOperator& op) const
    {
        if (!(total_mass >= 0.0) || !std::isfinite(total_mass)) throw InputError("total mass must be >= 0");
        if (!(theta >= 0.5 && theta <= 1.0)) throw InputError("theta must lie in [1/2, 1]");
        if (!(outer_tol > 0.0) || !(inner_tol > 0.0)) throw InputError("tolerances must be positive");
        if (outer_max_iter < 1 || krylov_restart < 1 || krylov_max_iter < 1)
            throw InputError("iteration limits must be positive");
        if (!(damping > 0.0 && damping <= 1.0)) throw InputError("damping must lie in (0, 1]");
        if (period != 0.0 && period != op.period()) throw InputError("config period differs from transport period");
        if (n_time_steps != 0 && n_time_steps != op.n_steps())
            throw InputError("config step count differs from transport step count");
    }
};

/// Trajectory of a tracer pair at the n_steps + 1 nodes t_n = n T / n_steps.
struct TracerState {
    std::uint64_t grid_id = 0;
    double period = 0.0;
    std::vector<Vector> y1, y2;

    Index n_steps() const { return static_cast<Index>(y1.size()) - 1; }
    double time(Index n) const { return period * static_cast<double>(n) / static_cast<double>(n_steps()); }

    static TracerState constant(const Grid& g, double period, Index n_steps, double c1, double c2)
    {
        TracerState s;
        s.grid_id = g.id();
        s.period = period;
        s.y1.assign(static_cast<std::size_t>(n_steps + 1), Vector::Constant(g.n_cells(), c1));
        s.y2.assign(static_cast<std::size_t>(n_steps + 1), Vector::Constant(g.n_cells(), c2));
        return s;
    }

    bool all_finite() const
    {
        for (std::size_t n = 0; n < y1.size(); ++n)
            if (!y1[n].allFinite() || !y2[n].allFinite()) return false;
        return true;
    }
};

/// Volume-weighted RMS norms. A field norm is sqrt(sum V y^2 / |Omega|); a
/// trajectory norm averages the squared field norm over the nodes 0..N-1
/// (the discrete L2(0,T;L2) norm divided by T).
class Norms {
public:
    explicit Norms(const Vector& volumes) : w_(volumes / volumes.sum()) {}

    double dot(const Vector& a, const Vector& b) const { return (w_.array() * a.array() * b.array()).sum(); }
    double field(const Vector& y) const { return std::sqrt(dot(y, y)); }

    double trajectory(std::span<const Vector> y) const
    {
        if (y.size() < 2) return y.empty() ? 0.0 : field(y[0]);
        double s = 0.0;
        for (std::size_t n = 0; n + 1 < y.size(); ++n) s += dot(y[n], y[n]);
        return std::sqrt(s / static_cast<double>(y.size() - 1));
    }

    double state(const TracerState& s) const
    {
        const double a = trajectory(s.y1), b = trajectory(s.y2);
        return std::sqrt(a * a + b * b);
    }

    double state_difference(const TracerState& a, const TracerState& b) const
    {
        double s = 0.0;
        const std::size_t n = a.y1.size();
        for (std::size_t k = 0; k + 1 < n; ++k) {
            const Vector d1 = a.y1[k] - b.y1[k], d2 = a.y2[k] - b.y2[k];
            s += dot(d1, d1) + dot(d2, d2);
        }
        return n > 1 ? std::sqrt(s / static_cast<double>(n - 1)) : 0.0;
    }

private:
    Vector w_;
};

/// One-step theta scheme for V y' + (K_n + gamma V) y = V f:
///   (V/dt + theta (K_n + gamma V)) y+ = (V/dt - (1-theta)(K_n + gamma V)) y + V (theta f+ + (1-theta) f).
/// The implicit matrices are factorized once per distinct K_n.
class ThetaStepper {
public:
    ThetaStepper(const TransportOperator& op, double theta, double gamma)
        : op_(&op), theta_(theta), gamma_(gamma), dt_(op.dt())
    {
        if (!(gamma >= 0.0)) throw InputError("shift gamma must be non-negative");
        const Index n = op.n_cells();
        Vector diag = op.volumes() / dt_ + theta * gamma * op.volumes();
        SparseMatrix D(n, n);
        D.reserve(Eigen::VectorXi::Constant(n, 1));
        for (Index i = 0; i < n; ++i) D.insert(i, i) = diag[i];
        for (const SparseMatrix& K : op.unique_matrices()) {
            SparseMatrix A = theta * K + D;
            A.makeCompressed();
            auto lu = std::make_unique<Eigen::SparseLU<SparseMatrix>>();
            lu->compute(A);
            if (lu->info() != Eigen::Success) throw SolveError("time step matrix factorization failed");
            lu_.push_back(std::move(lu));
        }
        rhs_.resize(n);
    }

    double theta() const { return theta_; }
    double gamma() const { return gamma_; }
    const TransportOperator& op() const { return *op_; }

    /// Advances y from node n to n+1. Forcing pointers may be null (zero).
    void step(Index n, const Vector& y, const Vector* f_now, const Vector* f_next, Vector& out) const
    {
        const Vector& V = op_->volumes();
        rhs_ = (V.array() * y.array()).matrix() / dt_;
        if (theta_ < 1.0) {
            rhs_ -= (1.0 - theta_) * (op_->stiffness(n) * y);
            if (gamma_ != 0.0) rhs_.array() -= (1.0 - theta_) * gamma_ * V.array() * y.array();
        }
        if (f_next) rhs_.array() += theta_ * V.array() * f_next->array();
        if (f_now && theta_ < 1.0) rhs_.array() += (1.0 - theta_) * V.array() * f_now->array();
        out = lu_[op_->matrix_index(n)]->solve(rhs_);
    }

private:
    const TransportOperator* op_;
    double theta_, gamma_, dt_;
    std::vector<std::unique_ptr<Eigen::SparseLU<SparseMatrix>>> lu_;
    mutable Vector rhs_;
};

using Forcing = std::vector<Vector>;  // concentration rates at the N+1 nodes

/// Integrates one period from y0. With `zero_mean` every step is projected
/// onto the zero-mass subspace. Fills `trajectory` (N+1 nodes) when given.
inline Vector period_map(const ThetaStepper& stepper, std::span<const Vector> forcing, const Vector& y0,
                         bool zero_mean = false, std::vector<Vector>* trajectory = nullptr)
{
    const TransportOperator& op = stepper.op();
    const Index N = op.n_steps();
    if (!forcing.empty() && static_cast<Index>(forcing.size()) != N + 1)
        throw InputError("forcing must be sampled at n_steps + 1 nodes");
    Vector y = y0, next(y0.size());
    if (zero_mean) project_zero_mass_inplace(op.volumes(), op.total_volume(), y);
    if (trajectory) {
        trajectory->resize(static_cast<std::size_t>(N + 1));
        (*trajectory)[0] = y;
    }
    for (Index n = 0; n < N; ++n) {
        const Vector* f0 = forcing.empty() ? nullptr : &forcing[static_cast<std::size_t>(n)];
        const Vector* f1 = forcing.empty() ? nullptr : &forcing[static_cast<std::size_t>(n + 1)];
        stepper.step(n, y, f0, f1, next);
        if (zero_mean) project_zero_mass_inplace(op.volumes(), op.total_volume(), next);
        y.swap(next);
        if (trajectory) (*trajectory)[static_cast<std::size_t>(n + 1)] = y;
    }
    return y;
}

/// Convenience overload assembling a stepper for a single integration of
/// w' + B w + gamma w = rhs.
inline Vector period_map(const TransportOperator& op, double gamma, std::span<const Vector> rhs,
                         const Vector& y0, const SolveConfig& config)
{
    ThetaStepper stepper(op, config.theta, gamma);
    return period_map(stepper, rhs, y0);
}

struct PeriodicSolution {
    std::vector<Vector> trajectory;
    double periodicity_residual = 0.0;  // |y(T) - y(0)| / max(1, |y(0)|)
    int krylov_iterations = 0;
    int period_maps = 0;
};

namespace detail {

inline Vector random_guess(Index n, std::uint64_t seed, double scale)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    Vector x(n);
    for (Index i = 0; i < n; ++i) x[i] = scale * normal(rng);
    return x;
}

} // namespace detail

/// Periodic solution of V y' + (K + gamma V) y = V f: solves the affine
/// fixed point y0 = M y0 + g with GMRES, M the homogeneous period map and
/// g the period map of the forcing from zero. With `zero_mean` the problem is
/// posed on the zero-mass subspace, where the unshifted operator is
/// invertible.
inline PeriodicSolution solve_periodic(const ThetaStepper& stepper, std::span<const Vector> forcing,
                                       bool zero_mean, const SolveConfig& config,
                                       const Vector* guess = nullptr)
{
    const TransportOperator& op = stepper.op();
    const Index n = op.n_cells();
    const Norms norms(op.volumes());
    auto project = [&](Vector& v) {
        if (zero_mean) project_zero_mass_inplace(op.volumes(), op.total_volume(), v);
    };

    PeriodicSolution sol;
    const Vector zero = Vector::Zero(n);
    Vector g = period_map(stepper, forcing, zero, zero_mean);
    ++sol.period_maps;

    Vector x;
    if (guess) x = *guess;
    else if (config.seed != 0) x = detail::random_guess(n, config.seed, std::max(1.0, norms.field(g)));
    else x = Vector::Zero(n);
    project(x);

    auto apply = [&](const Vector& v) {
        ++sol.period_maps;
        Vector w = v;
        project(w);
        Vector out = w - period_map(stepper, {}, w, zero_mean);
        project(out);
        return out;
    };
    auto dot = [&](const Vector& a, const Vector& b) { return norms.dot(a, b); };

    int budget = config.krylov_max_iter;
    for (;;) {
        const double target = 0.5 * config.inner_tol * std::max(1.0, norms.field(x));
        const auto kr = gmres(apply, g, x, dot, config.krylov_restart, budget, target);
        sol.krylov_iterations += kr.iterations;
        budget -= kr.iterations;

        const Vector yT = period_map(stepper, forcing, x, zero_mean, &sol.trajectory);
        ++sol.period_maps;
        sol.periodicity_residual = norms.field(yT - sol.trajectory.front()) /
                                   std::max(1.0, norms.field(sol.trajectory.front()));
        if (sol.periodicity_residual <= config.inner_tol) break;
        if (budget <= 0 || !std::isfinite(sol.periodicity_residual)) {
            throw SolveError("periodic linear solve did not converge: periodicity residual " +
                             std::to_string(sol.periodicity_residual) + " after " +
                             std::to_string(sol.krylov_iterations) + " Krylov iterations");
        }
    }
    return sol;
}

/// Unique periodic solution of w' + B w + lambda w = rhs (lambda > 0).
inline PeriodicSolution solve_linear_periodic_shifted(const TransportOperator& op, double lambda,
                                                      std::span<const Vector> rhs, const SolveConfig& config,
                                                      const Vector* guess = nullptr)
{
    if (!(lambda > 0.0)) throw InputError("lambda must be positive");
    ThetaStepper stepper(op, config.theta, lambda);
    return solve_periodic(stepper, rhs, false, config, guess);
}

namespace detail {

inline void check_zero_mass_forcing(const TransportOperator& op, std::span<const Vector> rhs, double tol)
{
    for (std::size_t n = 0; n < rhs.size(); ++n) {
        const double m = op.volumes().dot(rhs[n]);
        const double scale = op.volumes().dot(rhs[n].cwiseAbs());
        if (std::abs(m) > tol * scale)
            throw InputError("forcing of the sum equation carries mass " + std::to_string(m) +
                             " at time node " + std::to_string(n) +
                             " (reaction model violates mass conservation)");
    }
}

} // namespace detail

/// Zero-mass periodic solution of S' + B S = rhs. The forcing must have zero
/// mass at every node.
inline PeriodicSolution solve_sum_zero_mean(const TransportOperator& op, std::span<const Vector> rhs,
                                            const SolveConfig& config, const Vector* guess = nullptr)
{
    detail::check_zero_mass_forcing(op, rhs, 1e-11);
    ThetaStepper stepper(op, config.theta, 0.0);
    return solve_periodic(stepper, rhs, true, config, guess);
}

/// Forcing (F1, F2) of a frozen state at every node.
inline std::pair<Forcing, Forcing> reaction_forcing(const Grid& g, const ReactionModel& model,
                                                    const TracerState& z)
{
    const std::size_t nodes = z.y1.size();
    Forcing F1(nodes), F2(nodes);
    ReactionRates r;
    for (std::size_t n = 0; n < nodes; ++n) {
        model.evaluate(g, z.y1[n], z.y2[n], z.time(static_cast<Index>(n)), r);
        assemble_forcing(g, r, F1[n], F2[n]);
    }
    return {std::move(F1), std::move(F2)};
}

struct SolveReport {
    std::vector<double> history;        // fixed-point residual per outer iteration
    int iterations = 0;
    bool converged = false;
    std::string message;
    std::string y_init = "constant";

    double periodicity_y1 = 0.0;
    double periodicity_y2 = 0.0;
    std::vector<double> mass_drift;     // (mass(y(t_n)) - C) / max(C, 1)
    double max_mass_drift = 0.0;

    double equation_residual = 0.0;     // RMS residual of the discrete equations
    double forcing_norm = 0.0;          // RMS of the theta-weighted forcing
    int residual_component = 0;         // 1 or 2
    Index residual_step = 0;
    Index residual_cell = 0;

    double fixed_point_residual = 0.0;  // |A(y) - y| / max(1, |y|), when computed
    bool bounds_ok = true;
    bool mass_identity_ok = true;
    double mass_identity_max = 0.0;

    double y2_max = 0.0;                // max |y2| over the trajectory
    long period_maps = 0;
    double wall_seconds = 0.0;
};

/// Reusable context for repeated applications of the linearized map. Keeps
/// the factorized time-step matrices and warm starts the Krylov solves from
/// the previous call.
class PeriodicSolver {
public:
    PeriodicSolver(const Grid& g, const TransportOperator& op, const ReactionModel& model, SolveConfig config)
        : grid_(&g), op_(&op), model_(&model), config_(config), norms_(op.volumes())
    {
        if (op.grid_id() != g.id()) throw InputError("operator assembled on a different grid");
        config_.validate(op);
    }

    const SolveConfig& config() const { return config_; }
    const Norms& norms() const { return norms_; }
    long period_maps() const { return period_maps_; }

    TracerState initial_constant() const
    {
        return TracerState::constant(*grid_, op_->period(), op_->n_steps(),
                                     config_.total_mass / grid_->total_volume(), 0.0);
    }

    /// A(z): the periodic, mass-C solution of the problem linearized at z.
    TracerState linearized_solve(const TracerState& z)
    {
        check_state(z);
        auto [F1, F2] = reaction_forcing(*grid_, *model_, z);
        return solve_with_forcing(F1, F2);
    }

    TracerState solve_with_forcing(const Forcing& F1, const Forcing& F2)
    {
        const std::size_t nodes = F1.size();
        if (!shifted_) shifted_.emplace(*op_, config_.theta, model_->lambda());
        if (!plain_) plain_.emplace(*op_, config_.theta, 0.0);

        auto y2 = solve_periodic(*shifted_, F2, false, config_, warm_y2_ ? &*warm_y2_ : nullptr);
        Forcing Fs(nodes);
        for (std::size_t n = 0; n < nodes; ++n) Fs[n] = F1[n] + F2[n];
        detail::check_zero_mass_forcing(*op_, Fs, 1e-11);
        auto s0 = solve_periodic(*plain_, Fs, true, config_, warm_s_ ? &*warm_s_ : nullptr);
        period_maps_ += y2.period_maps + s0.period_maps;
        warm_y2_ = y2.trajectory.front();
        warm_s_ = s0.trajectory.front();

        TracerState out;
        out.grid_id = grid_->id();
        out.period = op_->period();
        out.y1.resize(nodes);
        out.y2 = std::move(y2.trajectory);
        const double level = config_.total_mass / grid_->total_volume();
        for (std::size_t n = 0; n < nodes; ++n) out.y1[n] = (s0.trajectory[n].array() + level).matrix() - out.y2[n];
        return out;
    }

private:
    void check_state(const TracerState& z) const
    {
        if (z.grid_id != grid_->id()) throw InputError("state lives on a different grid");
        if (z.n_steps() != op_->n_steps()) throw InputError("state has the wrong number of time nodes");
        if (!z.all_finite()) throw InputError("state contains non-finite values");
    }

    const Grid* grid_;
    const TransportOperator* op_;
    const ReactionModel* model_;
    SolveConfig config_;
    Norms norms_;
    std::optional<ThetaStepper> shifted_, plain_;
    std::optional<Vector> warm_y2_, warm_s_;
    long period_maps_ = 0;
};

/// Single application of the linearized map.
inline TracerState linearized_solve(const Grid& g, const TracerState& z, const SolveConfig& config,
                                    const TransportOperator& op, const ReactionModel& model)
{
    PeriodicSolver solver(g, op, model, config);
    return solver.linearized_solve(z);
}

/// Diagnostics of a trajectory: periodicity, mass drift, residual of the
/// discrete equations with the forcing evaluated at the trajectory itself,
/// reaction bounds and mass identity.
inline SolveReport residual_report(const Grid& g, const TracerState& y, const TransportOperator& op,
                                   const ReactionModel& model, const SolveConfig& config)
{
    if (y.grid_id != g.id() || y.n_steps() != op.n_steps()) throw InputError("state does not match the operator");
    SolveReport rep;
    const Norms norms(op.volumes());
    const Index N = op.n_steps();
    const double dt = op.dt();
    const double theta = config.theta;
    const double lambda = model.lambda();
    const Vector& V = op.volumes();

    auto periodicity = [&](const std::vector<Vector>& tr) {
        return norms.field(tr.back() - tr.front()) / std::max(1.0, norms.field(tr.front()));
    };
    rep.periodicity_y1 = periodicity(y.y1);
    rep.periodicity_y2 = periodicity(y.y2);

    const double cref = std::max(config.total_mass, 1.0);
    for (Index n = 0; n <= N; ++n) {
        const double m = mass(g, TracerField(g, y.y1[static_cast<std::size_t>(n)]),
                              TracerField(g, y.y2[static_cast<std::size_t>(n)]));
        const double drift = (m - config.total_mass) / cref;
        rep.mass_drift.push_back(drift);
        rep.max_mass_drift = std::max(rep.max_mass_drift, std::abs(drift));
    }

    auto [F1, F2] = reaction_forcing(g, model, y);
    double res_sq = 0.0, f_sq = 0.0, worst = -1.0;
    for (Index n = 0; n < N; ++n) {
        const auto a = static_cast<std::size_t>(n), b = static_cast<std::size_t>(n + 1);
        const SparseMatrix& K = op.stiffness(n);
        const Vector f1 = theta * F1[b] + (1.0 - theta) * F1[a];
        const Vector f2 = theta * F2[b] + (1.0 - theta) * F2[a];
        const Vector y2m = theta * y.y2[b] + (1.0 - theta) * y.y2[a];
        const Vector By1 = ((K * (theta * y.y1[b] + (1.0 - theta) * y.y1[a])).array() / V.array()).matrix();
        const Vector By2 = ((K * y2m).array() / V.array()).matrix();
        const Vector r1 = (y.y1[b] - y.y1[a]) / dt + By1 - lambda * y2m - f1;
        const Vector r2 = (y.y2[b] - y.y2[a]) / dt + By2 + lambda * y2m - f2;
        res_sq += norms.dot(r1, r1) + norms.dot(r2, r2);
        f_sq += norms.dot(f1, f1) + norms.dot(f2, f2);
        Index i1, i2;
        const double m1 = r1.cwiseAbs().maxCoeff(&i1);
        const double m2 = r2.cwiseAbs().maxCoeff(&i2);
        if (m1 > worst) { worst = m1; rep.residual_component = 1; rep.residual_step = n; rep.residual_cell = i1; }
        if (m2 > worst) { worst = m2; rep.residual_component = 2; rep.residual_step = n; rep.residual_cell = i2; }
    }
    rep.equation_residual = std::sqrt(res_sq / static_cast<double>(N));
    rep.forcing_norm = std::sqrt(f_sq / static_cast<double>(N));

    std::vector<ReactionSample> samples;
    samples.reserve(static_cast<std::size_t>(N + 1));
    for (Index n = 0; n <= N; ++n)
        samples.push_back({y.y1[static_cast<std::size_t>(n)], y.y2[static_cast<std::size_t>(n)], y.time(n)});
    const auto bounds = check_bounds(model, g, samples);
    const auto ident = check_mass_identity(model, g, samples);
    rep.bounds_ok = bounds.passed;
    rep.mass_identity_ok = ident.passed;
    rep.mass_identity_max = ident.max_relative;

    for (const auto& v : y.y2) rep.y2_max = std::max(rep.y2_max, v.cwiseAbs().maxCoeff());
    return rep;
}

/// Damped Picard iteration z <- (1 - omega) z + omega A(z), stopped when
/// |A(z) - z| <= outer_tol max(1, |z|). The returned state is the last A(z),
/// so it is periodic and carries mass C whether or not the loop converged.
/// Failure to converge is reported, never thrown.
using IterationCallback = std::function<void(int iteration, double residual)>;

inline std::pair<TracerState, SolveReport> fixed_point_solve(const Grid& g, const SolveConfig& config,
                                                             const TransportOperator& op,
                                                             const ReactionModel& model,
                                                             std::optional<TracerState> y_init = std::nullopt,
                                                             const IterationCallback& on_iteration = {})
{
    const auto t0 = std::chrono::steady_clock::now();
    PeriodicSolver solver(g, op, model, config);
    TracerState z = y_init ? std::move(*y_init) : solver.initial_constant();
    const std::string init_name = y_init ? "state" : "constant";
    const Norms& norms = solver.norms();

    std::vector<double> history;
    TracerState last;
    bool converged = false;
    std::string message;
    try {
        for (int k = 0; k < config.outer_max_iter; ++k) {
            TracerState a = solver.linearized_solve(z);
            const double res = norms.state_difference(a, z) / std::max(1.0, norms.state(z));
            history.push_back(res);
            if (on_iteration) on_iteration(k + 1, res);
            last = std::move(a);
            if (!std::isfinite(res)) {
                message = "fixed-point residual is not finite";
                break;
            }
            if (res <= config.outer_tol) {
                converged = true;
                break;
            }
            const double w = config.damping;
            for (std::size_t n = 0; n < z.y1.size(); ++n) {
                z.y1[n] = (1.0 - w) * z.y1[n] + w * last.y1[n];
                z.y2[n] = (1.0 - w) * z.y2[n] + w * last.y2[n];
            }
        }
        if (!converged && message.empty())
            message = "no convergence within " + std::to_string(config.outer_max_iter) + " iterations";
    } catch (const SolveError& e) {
        message = e.what();
        if (last.y1.empty()) last = z;
    }

    SolveReport rep = residual_report(g, last, op, model, config);
    rep.history = std::move(history);
    rep.iterations = static_cast<int>(rep.history.size());
    rep.converged = converged;
    rep.message = converged ? "converged" : message;
    rep.y_init = init_name;
    rep.fixed_point_residual = rep.history.empty() ? 0.0 : rep.history.back();
    rep.period_maps = solver.period_maps();
    rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {std::move(last), std::move(rep)};
}

struct SpinupResult {
    TracerState state;             // last integrated period
    std::vector<double> history;   // periodicity residual after each period
    int periods = 0;
    bool reached = false;
};

/// Plain time stepping of the nonlinear system, period after period, until
/// the periodicity residual drops to `target`. Each step solves the same
/// theta scheme as the periodic solver with the reaction forcing treated
/// implicitly (fixed-point iteration inside the step).
inline SpinupResult spin_up(const Grid& g, const TransportOperator& op, const ReactionModel& model,
                            const SolveConfig& config, double target, int max_periods,
                            std::optional<TracerState> y_init = std::nullopt)
{
    config.validate(op);
    const Index N = op.n_steps();
    const double lambda = model.lambda();
    ThetaStepper shifted(op, config.theta, lambda), plain(op, config.theta, 0.0);
    const Norms norms(op.volumes());

    TracerState s = y_init ? std::move(*y_init)
                           : TracerState::constant(g, op.period(), N, config.total_mass / g.total_volume(), 0.0);
    SpinupResult out;
    ReactionRates r;
    Vector F1n, F2n, F1p, F2p, y1p, y2p, y1prev, y2prev;
    auto forcing_at = [&](const Vector& y1, const Vector& y2, double t, Vector& F1, Vector& F2) {
        model.evaluate(g, y1, y2, t, r);
        assemble_forcing(g, r, F1, F2);
    };

    for (int p = 0; p < max_periods; ++p) {
        s.y1[0] = s.y1.back();
        s.y2[0] = s.y2.back();
        for (Index n = 0; n < N; ++n) {
            const auto a = static_cast<std::size_t>(n), b = static_cast<std::size_t>(n + 1);
            const double tn = s.time(n), tp = s.time(n + 1);
            forcing_at(s.y1[a], s.y2[a], tn, F1n, F2n);
            y1p = s.y1[a];
            y2p = s.y2[a];
            for (int it = 0; it < 100; ++it) {
                forcing_at(y1p, y2p, tp, F1p, F2p);
                y1prev = y1p;
                y2prev = y2p;
                shifted.step(n, s.y2[a], &F2n, &F2p, y2p);
                const Vector g0 = lambda * s.y2[a] + F1n;
                const Vector g1 = lambda * y2p + F1p;
                plain.step(n, s.y1[a], &g0, &g1, y1p);
                const double change = norms.field(y1p - y1prev) + norms.field(y2p - y2prev);
                if (change <= 1e-15 * std::max(1.0, norms.field(y1p) + norms.field(y2p))) break;
            }
            s.y1[b] = y1p;
            s.y2[b] = y2p;
        }
        ++out.periods;
        const double d1 = norms.field(s.y1.back() - s.y1.front());
        const double d2 = norms.field(s.y2.back() - s.y2.front());
        const double base = std::max(1.0, std::sqrt(std::pow(norms.field(s.y1.front()), 2) +
                                                     std::pow(norms.field(s.y2.front()), 2)));
        const double res = std::sqrt(d1 * d1 + d2 * d2) / base;
        out.history.push_back(res);
        if (!std::isfinite(res)) break;
        if (res <= target) {
            out.reached = true;
            break;
        }
    }
    out.state = std::move(s);
    return out;
}

} // namespace ndop
