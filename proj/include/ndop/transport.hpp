#pragma once

// Finite-volume advection-diffusion operator.
//
// For each time step n the assembled matrix K_n is the volume-weighted form
// of the transport operator: the semi-discrete tracer equation reads
//
//     V dy/dt + K_n y = V f,
//
// with V the diagonal of cell volumes, so B_n = V^{-1} K_n. Every face adds
// equal and opposite entries to the rows of its two cells, which makes the
// column sums of K_n vanish identically (mass conservation). Row sums vanish
// when the face fluxes are divergence free.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCore>

#include "ndop/grid.hpp"

namespace ndop {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Normal volume fluxes (m^3 s^-1) per time step, positive from `lo` to `hi`
/// of each interior face. Step n covers [n dt, (n+1) dt); the field is
/// periodic, so step n_steps is step 0.
struct VelocityField {
    double period = 1.0;
    Index n_steps = 1;
    std::vector<std::vector<double>> interior;  // [step][interior face]
    std::vector<std::vector<double>> boundary;  // [step][boundary face], outward; zero for admissible fields

    const std::vector<double>& at(Index n) const { return interior[static_cast<std::size_t>(n % n_steps)]; }
};

/// Face diffusivities (m^2 s^-1) per time step.
struct DiffusivityField {
    double period = 1.0;
    Index n_steps = 1;
    std::vector<std::vector<double>> kappa;  // [step][interior face]
    double kappa_min = 0.0;

    const std::vector<double>& at(Index n) const { return kappa[static_cast<std::size_t>(n % n_steps)]; }
};

enum class Advection : std::uint8_t { Upwind, Centered };

inline VelocityField zero_velocity(const Grid& g, double period, Index n_steps)
{
    VelocityField v;
    v.period = period;
    v.n_steps = n_steps;
    v.interior.assign(static_cast<std::size_t>(n_steps),
                      std::vector<double>(g.interior_faces().size(), 0.0));
    v.boundary.assign(static_cast<std::size_t>(n_steps),
                      std::vector<double>(g.boundary_faces().size(), 0.0));
    return v;
}

struct OverturningParams {
    double amplitude = 0.0;           // peak stream function per x-z slice (m^3 s^-1)
    double seasonal_amplitude = 0.0;  // relative modulation over the period
    Index segments = 0;               // distinct values per period (0: one per step)

    bool operator==(const OverturningParams&) const = default;
};

namespace detail {

// Start time of the segment containing step n when the period is split into
// `segments` equal parts (0 means one segment per step).
inline double segment_time(Index n, Index n_steps, Index segments, double period)
{
    if (segments <= 0 || segments >= n_steps) return period * static_cast<double>(n) / static_cast<double>(n_steps);
    const Index seg = n * segments / n_steps;
    return period * static_cast<double>(seg) / static_cast<double>(segments);
}

} // namespace detail

/// Overturning circulation in every x-z slice of the grid.
///
/// The stream function lives on the lines x = i dx (corners) and is a
/// continuous function of depth there; it vanishes at the surface, at the
/// side walls and below the shallower of the two columns touching the line.
/// Lateral fluxes are differences of psi along a line and vertical fluxes are
/// differences between neighbouring lines, so every cell balance telescopes
/// to zero and no flux crosses the boundary.
inline VelocityField overturning_velocity(const Grid& g, const OverturningParams& p, double period,
                                          Index n_steps)
{
    const auto& mesh = g.mesh();
    const double pi = std::numbers::pi;

    // psi(line, iy, z) without the time factor.
    auto line_depth = [&](Index line, Index iy) {
        if (line <= 0 || line >= mesh.nx) return 0.0;
        return std::min(g.column(g.column_index(line - 1, iy)).depth,
                        g.column(g.column_index(line, iy)).depth);
    };
    auto psi = [&](Index line, Index iy, double z) {
        const double H = line_depth(line, iy);
        if (H <= 0.0 || z >= H) return 0.0;
        const double slice = std::sin(pi * (static_cast<double>(iy) + 0.5) / static_cast<double>(mesh.ny));
        return slice * std::sin(pi * static_cast<double>(line) / static_cast<double>(mesh.nx)) *
               std::sin(pi * z / H);
    };

    std::vector<double> shape(g.interior_faces().size(), 0.0);
    for (std::size_t f = 0; f < shape.size(); ++f) {
        const InteriorFace& face = g.interior_faces()[f];
        const Cell& a = g.cell(face.lo);
        const Cell& b = g.cell(face.hi);
        const Column& ca = g.column(a.column);
        if (face.axis == FaceAxis::X) {
            // Line between the two columns; face spans the depth overlap.
            const double top = std::max(a.z_top, b.z_top);
            const double bot = std::min(a.z_bottom, b.z_bottom);
            shape[f] = psi(ca.ix + 1, ca.iy, bot) - psi(ca.ix + 1, ca.iy, top);
        } else if (face.axis == FaceAxis::Z) {
            // Downward flux through the interface at the bottom of `lo`.
            shape[f] = psi(ca.ix, ca.iy, a.z_bottom) - psi(ca.ix + 1, ca.iy, a.z_bottom);
        }
    }

    VelocityField v = zero_velocity(g, period, n_steps);
    for (Index n = 0; n < n_steps; ++n) {
        const double t = detail::segment_time(n, n_steps, p.segments, period);
        const double amp = p.amplitude * (1.0 + p.seasonal_amplitude * std::cos(2.0 * pi * t / period));
        auto& row = v.interior[static_cast<std::size_t>(n)];
        for (std::size_t f = 0; f < row.size(); ++f) row[f] = amp * shape[f];
    }
    return v;
}

struct LayeredDiffusivityParams {
    double kappa_horizontal = 1.0;  // lateral faces (m^2 s^-1)
    double kappa_vertical = 1e-4;   // vertical faces (m^2 s^-1)
    double vertical_seasonal = 0.0; // relative modulation of the vertical value, |.| < 1
    Index segments = 0;             // distinct values per period (0: one per step)

    bool operator==(const LayeredDiffusivityParams&) const = default;
};

inline DiffusivityField layered_diffusivity(const Grid& g, const LayeredDiffusivityParams& p,
                                            double period, Index n_steps)
{
    if (!(p.kappa_horizontal > 0.0) || !(p.kappa_vertical > 0.0) || std::abs(p.vertical_seasonal) >= 1.0)
        throw InputError("diffusivities must be positive and seasonal modulation below 1");
    DiffusivityField d;
    d.period = period;
    d.n_steps = n_steps;
    d.kappa.resize(static_cast<std::size_t>(n_steps));
    d.kappa_min = std::numeric_limits<double>::infinity();
    for (Index n = 0; n < n_steps; ++n) {
        const double t = detail::segment_time(n, n_steps, p.segments, period);
        const double kv = p.kappa_vertical *
                          (1.0 + p.vertical_seasonal * std::cos(2.0 * std::numbers::pi * t / period));
        auto& row = d.kappa[static_cast<std::size_t>(n)];
        row.resize(g.interior_faces().size());
        for (std::size_t f = 0; f < row.size(); ++f) {
            row[f] = g.interior_faces()[f].axis == FaceAxis::Z ? kv : p.kappa_horizontal;
            d.kappa_min = std::min(d.kappa_min, row[f]);
        }
    }
    if (g.interior_faces().empty()) d.kappa_min = std::min(p.kappa_horizontal, p.kappa_vertical);
    return d;
}

struct CellResidual {
    Index step = 0;
    Index cell = 0;
    double residual = 0.0;  // relative to the largest face flux of that step
};

struct VelocityReport {
    double tolerance = 1e-12;
    double max_divergence = 0.0;     // relative
    double max_boundary_flux = 0.0;  // absolute (m^3 s^-1)
    std::vector<CellResidual> flagged;
    std::vector<double> divergence;  // relative residual per step and cell, [step * n_cells + cell]
    bool passed = true;
};

/// Checks the discrete divergence of every cell and the normal flux through
/// every boundary face.
inline VelocityReport verify_velocity(const Grid& g, const VelocityField& vel, double tolerance = 1e-12)
{
    VelocityReport rep;
    rep.tolerance = tolerance;
    if (vel.n_steps < 1 || static_cast<Index>(vel.interior.size()) != vel.n_steps)
        throw InputError("velocity field has inconsistent step count");
    const Index nc = g.n_cells();
    rep.divergence.assign(static_cast<std::size_t>(vel.n_steps * nc), 0.0);
    std::vector<double> div(static_cast<std::size_t>(nc));
    for (Index n = 0; n < vel.n_steps; ++n) {
        const auto& q = vel.interior[static_cast<std::size_t>(n)];
        if (q.size() != g.interior_faces().size()) throw InputError("velocity field does not match grid faces");
        std::fill(div.begin(), div.end(), 0.0);
        double scale = 0.0;
        for (std::size_t f = 0; f < q.size(); ++f) {
            const auto& face = g.interior_faces()[f];
            div[static_cast<std::size_t>(face.lo)] += q[f];
            div[static_cast<std::size_t>(face.hi)] -= q[f];
            scale = std::max(scale, std::abs(q[f]));
        }
        if (n < static_cast<Index>(vel.boundary.size())) {
            const auto& qb = vel.boundary[static_cast<std::size_t>(n)];
            for (std::size_t f = 0; f < qb.size(); ++f) {
                div[static_cast<std::size_t>(g.boundary_faces()[f].cell)] += qb[f];
                rep.max_boundary_flux = std::max(rep.max_boundary_flux, std::abs(qb[f]));
                scale = std::max(scale, std::abs(qb[f]));
            }
        }
        for (Index i = 0; i < nc; ++i) {
            const double r = scale > 0.0 ? std::abs(div[static_cast<std::size_t>(i)]) / scale
                                         : std::abs(div[static_cast<std::size_t>(i)]);
            rep.divergence[static_cast<std::size_t>(n * nc + i)] = r;
            rep.max_divergence = std::max(rep.max_divergence, r);
            if (r > tolerance) rep.flagged.push_back({n, i, r});
        }
    }
    rep.passed = rep.flagged.empty() && rep.max_boundary_flux == 0.0;
    return rep;
}

class TransportOperator {
public:
    std::uint64_t grid_id() const { return grid_id_; }
    double period() const { return period_; }
    Index n_steps() const { return n_steps_; }
    double dt() const { return period_ / static_cast<double>(n_steps_); }
    double kappa_min() const { return kappa_min_; }
    Advection advection() const { return advection_; }
    bool has_velocity() const { return has_velocity_; }
    const Vector& volumes() const { return volumes_; }
    double total_volume() const { return total_volume_; }
    Index n_cells() const { return volumes_.size(); }

    /// Volume-weighted matrix for time index t in [0, n_steps]; index n_steps
    /// is the same object as index 0.
    const SparseMatrix& stiffness(Index t) const { return matrices_[matrix_index(t)]; }
    std::size_t matrix_index(Index t) const
    {
        if (t < 0 || t > n_steps_) throw std::out_of_range("time index out of range");
        return step_matrix_[static_cast<std::size_t>(t % n_steps_)];
    }
    std::span<const SparseMatrix> unique_matrices() const { return matrices_; }

private:
    friend TransportOperator assemble_transport(const Grid&, const VelocityField&, const DiffusivityField&,
                                                Advection, bool);

    std::uint64_t grid_id_ = 0;
    double period_ = 1.0;
    Index n_steps_ = 1;
    double kappa_min_ = 0.0;
    Advection advection_ = Advection::Upwind;
    bool has_velocity_ = false;
    Vector volumes_;
    double total_volume_ = 0.0;
    std::vector<SparseMatrix> matrices_;
    std::vector<std::size_t> step_matrix_;
};

/// Assembles K_n for every time step. Steps whose fluxes and diffusivities
/// equal the previous step share one matrix.
///
/// Throws InputError if the velocity is not divergence free (unless
/// `check_velocity` is false) or the fields do not match the grid.
inline TransportOperator assemble_transport(const Grid& g, const VelocityField& vel,
                                            const DiffusivityField& diff,
                                            Advection advection = Advection::Upwind,
                                            bool check_velocity = true)
{
    if (vel.n_steps != diff.n_steps || vel.period != diff.period)
        throw InputError("velocity and diffusivity use different time grids");
    if (static_cast<Index>(diff.kappa.size()) != diff.n_steps)
        throw InputError("diffusivity field has inconsistent step count");
    if (!(diff.kappa_min > 0.0)) throw InputError("kappa_min must be positive");
    if (!(vel.period > 0.0) || vel.n_steps < 1) throw InputError("period and step count must be positive");

    if (check_velocity) {
        const auto rep = verify_velocity(g, vel);
        if (!rep.passed) {
            std::ostringstream os;
            os << "velocity field is not divergence free (max relative residual " << rep.max_divergence
               << ", max boundary flux " << rep.max_boundary_flux << ")";
            const std::size_t shown = std::min<std::size_t>(rep.flagged.size(), 8);
            for (std::size_t k = 0; k < shown; ++k)
                os << "\n  step " << rep.flagged[k].step << " cell " << rep.flagged[k].cell << ": "
                   << rep.flagged[k].residual;
            throw InputError(os.str());
        }
    }

    TransportOperator op;
    op.grid_id_ = g.id();
    op.period_ = vel.period;
    op.n_steps_ = vel.n_steps;
    op.kappa_min_ = diff.kappa_min;
    op.advection_ = advection;
    op.volumes_ = g.volumes();
    op.total_volume_ = g.total_volume();

    const auto faces = g.interior_faces();
    std::vector<Eigen::Triplet<double>> trip;
    for (Index n = 0; n < vel.n_steps; ++n) {
        const auto& q = vel.at(n);
        const auto& kap = diff.at(n);
        if (q.size() != faces.size() || kap.size() != faces.size())
            throw InputError("transport fields do not match grid faces");
        for (std::size_t f = 0; f < faces.size(); ++f) {
            if (!(kap[f] >= diff.kappa_min)) throw InputError("diffusivity below kappa_min");
            if (q[f] != 0.0) op.has_velocity_ = true;
        }
        if (n > 0 && q == vel.at(n - 1) && kap == diff.at(n - 1)) {
            op.step_matrix_.push_back(op.step_matrix_.back());
            continue;
        }

        trip.clear();
        trip.reserve(faces.size() * 4);
        for (std::size_t f = 0; f < faces.size(); ++f) {
            const auto& face = faces[f];
            const Index a = face.lo, b = face.hi;
            const double D = kap[f] * face.area / face.distance;
            double aa = D, ab = -D;  // row a: outflow from a
            if (advection == Advection::Upwind) {
                aa += std::max(q[f], 0.0);
                ab += std::min(q[f], 0.0);
            } else {
                aa += 0.5 * q[f];
                ab += 0.5 * q[f];
            }
            // Row b receives exactly what row a loses.
            trip.emplace_back(a, a, aa);
            trip.emplace_back(a, b, ab);
            trip.emplace_back(b, a, -aa);
            trip.emplace_back(b, b, -ab);
        }
        SparseMatrix K(g.n_cells(), g.n_cells());
        K.setFromTriplets(trip.begin(), trip.end());
        K.makeCompressed();
        op.matrices_.push_back(std::move(K));
        op.step_matrix_.push_back(op.matrices_.size() - 1);
    }
    return op;
}

/// B(t) y = V^{-1} K_t y.
inline TracerField apply(const Grid& g, const TransportOperator& op, Index t, const TracerField& y)
{
    require_same_grid(g, y);
    if (op.grid_id() != g.id()) throw InputError("operator assembled on a different grid");
    Vector out = op.stiffness(t) * y.values();
    out.array() /= op.volumes().array();
    return TracerField(g, std::move(out));
}

struct MatrixProperties {
    std::size_t matrix = 0;
    double norm = 0.0;                 // max absolute column sum of K (m^3 s^-1)
    double column_sum = 0.0;           // max |sum_i K_ij| / norm
    double constant_kernel = 0.0;      // max |(K 1)_i| / norm
    double min_rayleigh = 0.0;         // min y^T K y / (norm |y|^2) over the probes
    double min_coercivity_gap = 0.0;   // min (y^T K y - kappa_min |grad y|^2) / (norm |y|^2), diffusion-only
    Vector worst_probe;                // probe attaining min_rayleigh
    bool conservation_ok = true;
    bool kernel_ok = true;
    bool monotone_ok = true;
    bool coercive_ok = true;
};

struct OperatorReport {
    double tolerance = 1e-12;
    std::vector<MatrixProperties> matrices;
    bool passed = true;
    bool conservation_ok = true;
    bool kernel_ok = true;
    bool monotone_ok = true;
    bool coercive_ok = true;
};

/// Discrete gradient seminorm sum_f A_f / d_f (y_lo - y_hi)^2.
inline double gradient_seminorm_sq(const Grid& g, const Vector& y)
{
    double s = 0.0;
    for (const auto& f : g.interior_faces()) {
        const double d = y[f.lo] - y[f.hi];
        s += f.area / f.distance * d * d;
    }
    return s;
}

/// Checks conservation, the constant kernel, monotonicity and (for
/// diffusion-only operators) the kappa_min coercivity bound on every
/// distinct matrix. Monotonicity is probed with `n_probes` random vectors and,
/// for grids of up to `dense_limit` cells, also with the lowest eigenvector
/// of the symmetric part.
inline OperatorReport check_operator_properties(const Grid& g, const TransportOperator& op,
                                                int n_probes = 100, std::uint64_t seed = 12345,
                                                double tolerance = 1e-12, Index dense_limit = 600)
{
    if (op.grid_id() != g.id()) throw InputError("operator assembled on a different grid");
    OperatorReport rep;
    rep.tolerance = tolerance;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    const Index n = g.n_cells();

    for (std::size_t m = 0; m < op.unique_matrices().size(); ++m) {
        const SparseMatrix& K = op.unique_matrices()[m];
        MatrixProperties p;
        p.matrix = m;
        Vector colabs = Vector::Zero(n);
        Vector colsum = Vector::Zero(n);
        for (Index j = 0; j < K.outerSize(); ++j)
            for (SparseMatrix::InnerIterator it(K, j); it; ++it) {
                colabs[j] += std::abs(it.value());
                colsum[j] += it.value();
            }
        p.norm = colabs.size() ? colabs.maxCoeff() : 0.0;
        const double scale = p.norm > 0.0 ? p.norm : 1.0;
        p.column_sum = colsum.size() ? colsum.cwiseAbs().maxCoeff() / scale : 0.0;
        const Vector k1 = K * Vector::Ones(n);
        p.constant_kernel = n ? k1.cwiseAbs().maxCoeff() / scale : 0.0;

        std::vector<Vector> probes;
        probes.reserve(static_cast<std::size_t>(n_probes) + 1);
        for (int k = 0; k < n_probes; ++k) {
            Vector y(n);
            for (Index i = 0; i < n; ++i) y[i] = normal(rng);
            probes.push_back(std::move(y));
        }
        if (n <= dense_limit && n > 0) {
            const Eigen::MatrixXd dense = Eigen::MatrixXd(K);
            const Eigen::MatrixXd sym = 0.5 * (dense + dense.transpose());
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
            probes.push_back(es.eigenvectors().col(0));
        }

        p.min_rayleigh = std::numeric_limits<double>::infinity();
        p.min_coercivity_gap = std::numeric_limits<double>::infinity();
        for (const auto& y : probes) {
            const double yy = y.squaredNorm();
            if (yy == 0.0) continue;
            const double q = y.dot(K * y);
            const double r = q / (scale * yy);
            if (r < p.min_rayleigh) {
                p.min_rayleigh = r;
                p.worst_probe = y;
            }
            if (!op.has_velocity()) {
                const double gap = (q - op.kappa_min() * gradient_seminorm_sq(g, y)) / (scale * yy);
                p.min_coercivity_gap = std::min(p.min_coercivity_gap, gap);
            }
        }
        if (probes.empty()) p.min_rayleigh = 0.0;
        if (op.has_velocity() || probes.empty()) p.min_coercivity_gap = 0.0;

        p.conservation_ok = p.column_sum <= tolerance;
        p.kernel_ok = p.constant_kernel <= tolerance;
        p.monotone_ok = p.min_rayleigh >= -tolerance;
        p.coercive_ok = p.min_coercivity_gap >= -tolerance;
        rep.conservation_ok &= p.conservation_ok;
        rep.kernel_ok &= p.kernel_ok;
        rep.monotone_ok &= p.monotone_ok;
        rep.coercive_ok &= p.coercive_ok;
        rep.matrices.push_back(std::move(p));
    }
    rep.passed = rep.conservation_ok && rep.kernel_ok && rep.monotone_ok && rep.coercive_ok;
    return rep;
}

inline void write_operator_csv(std::ostream& os, const TransportOperator& op, const OperatorReport& rep)
{
    os << "time_index,matrix,norm_m3_s,column_sum_rel,constant_kernel_rel,min_rayleigh_rel,"
          "min_coercivity_gap_rel,conservation_ok,kernel_ok,monotone_ok,coercive_ok\n";
    os.precision(17);
    for (Index t = 0; t < op.n_steps(); ++t) {
        const auto& p = rep.matrices[op.matrix_index(t)];
        os << t << ',' << p.matrix << ',' << p.norm << ',' << p.column_sum << ',' << p.constant_kernel << ','
           << p.min_rayleigh << ',' << p.min_coercivity_gap << ',' << p.conservation_ok << ',' << p.kernel_ok
           << ',' << p.monotone_ok << ',' << p.coercive_ok << '\n';
    }
}

} // namespace ndop
