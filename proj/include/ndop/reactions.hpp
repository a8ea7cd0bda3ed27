#pragma once

// Reaction terms of two-tracer nutrient / dissolved-organic models.
//
// A model supplies the volume rates d1, d2 (mmol P m^-3 s^-1) for every cell
// and the boundary rates b1, b2 (mmol P m^-2 s^-1) for every boundary face.
// Signs follow the balance law
//
//     dy1/dt + B y1 - lambda y2 + d1 = 0,   dy2/dt + B y2 + lambda y2 + d2 = 0,
//     kappa grad(y_j) . n + b_j = 0 on the boundary,
//
// i.e. positive d_j removes tracer. The solver works with the forcing
// F_j = -d_j - (area / volume) b_j (see assemble_forcing).

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "ndop/grid.hpp"

namespace ndop {

struct ReactionRates {
    Vector d1, d2;  // per cell
    Vector b1, b2;  // per boundary face

    void resize(const Grid& g)
    {
        d1.setZero(g.n_cells());
        d2.setZero(g.n_cells());
        b1.setZero(static_cast<Index>(g.boundary_faces().size()));
        b2.setZero(static_cast<Index>(g.boundary_faces().size()));
    }
};

class ReactionModel {
public:
    virtual ~ReactionModel() = default;

    virtual std::string name() const = 0;
    /// Remineralization rate lambda (s^-1), strictly positive.
    virtual double lambda() const = 0;
    virtual void evaluate(const Grid& g, const Vector& y1, const Vector& y2, double t,
                          ReactionRates& out) const = 0;
    /// Declared bound M_d on max_j |d_j| per cell.
    virtual Vector bound_d(const Grid& g) const = 0;
    /// Declared bound M_b on max_j |b_j| per boundary face.
    virtual Vector bound_b(const Grid& g) const = 0;
    /// Optional grid-independent bounds (scalar) that the model also claims.
    virtual std::optional<std::pair<double, double>> reference_bounds(const Grid&) const { return std::nullopt; }

    ReactionRates evaluate(const Grid& g, const TracerField& y1, const TracerField& y2, double t) const
    {
        require_same_grid(g, y1);
        require_same_grid(g, y2);
        ReactionRates r;
        r.resize(g);
        evaluate(g, y1.values(), y2.values(), t, r);
        return r;
    }
};

/// Converts reaction rates into the concentration forcing of both equations.
/// Boundary rates enter the cell behind the face divided by its thickness.
inline void assemble_forcing(const Grid& g, const ReactionRates& r, Vector& F1, Vector& F2)
{
    F1 = -r.d1;
    F2 = -r.d2;
    const auto faces = g.boundary_faces();
    for (std::size_t f = 0; f < faces.size(); ++f) {
        const Index fi = static_cast<Index>(f);
        if (r.b1[fi] == 0.0 && r.b2[fi] == 0.0) continue;
        const double w = faces[f].area / g.cell(faces[f].cell).volume;
        F1[faces[f].cell] -= w * r.b1[fi];
        F2[faces[f].cell] -= w * r.b2[fi];
    }
}

/// Model without biology: only remineralization couples the tracers.
class NullReaction final : public ReactionModel {
public:
    explicit NullReaction(double lambda) : lambda_(lambda)
    {
        if (!(lambda > 0.0)) throw InputError("lambda must be positive");
    }
    using ReactionModel::evaluate;
    std::string name() const override { return "null"; }
    double lambda() const override { return lambda_; }
    void evaluate(const Grid& g, const Vector&, const Vector&, double, ReactionRates& out) const override
    {
        out.resize(g);
    }
    Vector bound_d(const Grid& g) const override { return Vector::Zero(g.n_cells()); }
    Vector bound_b(const Grid& g) const override
    {
        return Vector::Zero(static_cast<Index>(g.boundary_faces().size()));
    }

private:
    double lambda_;
};

// ---------------------------------------------------------------------------
// PO4-DOP

/// I(x, t) = I0 max(0, cos(2 pi t / T)) exp(-k_w z) in euphotic cells (z the
/// cell centre depth), zero in aphotic cells.
struct SeasonalInsolation {
    double I0 = 0.0;      // W m^-2
    double k_w = 0.0;     // m^-1
    double period = 1.0;  // s
};

/// Externally supplied insolation, piecewise constant over `n_steps` equal
/// intervals of the period.
struct TabulatedInsolation {
    double period = 1.0;
    std::vector<Vector> values;  // [step] per cell
};

using Insolation = std::variant<SeasonalInsolation, TabulatedInsolation>;

inline Vector insolation_at(const Grid& g, const Insolation& ins, double t)
{
    if (const auto* s = std::get_if<SeasonalInsolation>(&ins)) {
        Vector I = Vector::Zero(g.n_cells());
        const double season = std::max(0.0, std::cos(2.0 * std::numbers::pi * t / s->period));
        if (season == 0.0 || s->I0 == 0.0) return I;
        for (Index i = 0; i < g.n_cells(); ++i) {
            const Cell& c = g.cell(i);
            if (c.zone == Zone::Euphotic) I[i] = s->I0 * season * std::exp(-s->k_w * c.z_center());
        }
        return I;
    }
    const auto& tab = std::get<TabulatedInsolation>(ins);
    const auto n = static_cast<Index>(tab.values.size());
    double phase = std::fmod(t / tab.period, 1.0);
    if (phase < 0.0) phase += 1.0;
    const Index k = std::min<Index>(n - 1, static_cast<Index>(std::floor(phase * static_cast<double>(n))));
    return tab.values[static_cast<std::size_t>(k)];
}

struct PO4DOPParams {
    double alpha = 0.0;   // maximum uptake (mmol P m^-3 s^-1)
    double K_P = 0.0;     // nutrient half saturation (mmol P m^-3)
    double K_I = 0.0;     // light half saturation (W m^-2)
    double nu = 0.0;      // fraction of uptake routed to DOP
    double beta = 0.0;    // sinking exponent
    double lambda = 0.0;  // remineralization rate (s^-1)
    Insolation insolation = SeasonalInsolation{};

    void validate() const
    {
        if (!(alpha > 0.0) || !(K_P > 0.0) || !(K_I > 0.0) || !(beta > 0.0) || !(lambda > 0.0))
            throw InputError("alpha, K_P, K_I, beta and lambda must be positive");
        if (!(nu >= 0.0 && nu <= 1.0)) throw InputError("nu must lie in [0, 1]");
        std::visit(
            [](const auto& ins) {
                if constexpr (std::is_same_v<std::decay_t<decltype(ins)>, SeasonalInsolation>) {
                    if (!(ins.I0 >= 0.0) || !(ins.k_w >= 0.0) || !(ins.period > 0.0))
                        throw InputError("insolation needs I0 >= 0, k_w >= 0 and a positive period");
                } else if (ins.values.empty() || !(ins.period > 0.0)) {
                    throw InputError("tabulated insolation is empty");
                }
            },
            insolation);
    }
};

/// Saturating uptake alpha y1/(|y1|+K_P) * I/(|I|+K_I). Bounded by alpha for
/// every real y1.
inline double uptake_G(double y1, double I, const PO4DOPParams& p)
{
    if (I == 0.0) return 0.0;
    return p.alpha * y1 / (std::abs(y1) + p.K_P) * I / (std::abs(I) + p.K_I);
}

struct DepthInterval {
    double top = 0.0;
    double bottom = 0.0;
};

struct SinkingWeights {
    std::vector<double> cell;  // fraction of export remineralized in each aphotic cell
    double bottom = 1.0;       // fraction reaching the sea floor
};

/// Exact cell integrals of the export profile (beta/h)(z/h)^(-beta-1) below
/// the euphotic depth h = h_bar_e. With r(z) = (z/h)^(-beta) the weight of a
/// cell [a, b] is r(a) - r(b) and the floor receives r(depth), so the weights
/// telescope to one.
inline SinkingWeights sinking_weights(std::span<const DepthInterval> cells, double beta, double h_bar_e)
{
    if (!(beta > 0.0) || !(h_bar_e > 0.0)) throw InputError("beta and h_bar_e must be positive");
    SinkingWeights w;
    if (cells.empty()) return w;
    if (cells.front().top != h_bar_e) throw InputError("aphotic column must start at h_bar_e");
    w.cell.reserve(cells.size());
    double r_top = 1.0;
    for (std::size_t k = 0; k < cells.size(); ++k) {
        if (!(cells[k].bottom > cells[k].top) || (k > 0 && cells[k].top != cells[k - 1].bottom))
            throw InputError("aphotic column cells must be contiguous with positive thickness");
        const double r_bot = std::pow(cells[k].bottom / h_bar_e, -beta);
        w.cell.push_back(r_top - r_bot);
        r_top = r_bot;
    }
    w.bottom = r_top;
    return w;
}

/// The reference PO4-DOP reaction system. In the euphotic zone the uptake G
/// removes phosphate; a fraction nu becomes DOP and the rest is exported and
/// remineralized below h_bar_e along the power-law profile, the remainder
/// being returned through the sea floor.
class PO4DOPModel final : public ReactionModel {
public:
    explicit PO4DOPModel(PO4DOPParams p) : p_(std::move(p)) { p_.validate(); }

    const PO4DOPParams& params() const { return p_; }
    using ReactionModel::evaluate;
    std::string name() const override { return "po4dop"; }
    double lambda() const override { return p_.lambda; }

    void evaluate(const Grid& g, const Vector& y1, const Vector& /*y2*/, double t,
                  ReactionRates& out) const override
    {
        out.resize(g);
        const Vector I = insolation_at(g, p_.insolation, t);
        if (I.size() != g.n_cells()) throw InputError("insolation does not match grid");
        const double export_fraction = 1.0 - p_.nu;
        const double hbe = g.h_bar_e();
        for (const Column& col : g.columns()) {
            // Euphotic uptake integrated over the column (mmol P m^-2 s^-1).
            double U = 0.0;
            const Index end = col.first_cell + col.n_cells;
            Index k = col.first_cell;
            for (; k < end && g.cell(k).zone == Zone::Euphotic; ++k) {
                const double G = uptake_G(y1[k], I[k], p_);
                out.d1[k] = G;
                out.d2[k] = -p_.nu * G;
                U += G * g.cell(k).thickness();
            }
            const double exported = export_fraction * U;
            if (col.depth <= hbe) {
                out.b1[col.bottom_face] = -exported;
                continue;
            }
            double r_top = 1.0;
            for (; k < end; ++k) {
                const Cell& c = g.cell(k);
                const double r_bot = std::pow(c.z_bottom / hbe, -p_.beta);
                out.d1[k] = -exported * (r_top - r_bot) / c.thickness();
                r_top = r_bot;
            }
            out.b1[col.bottom_face] = -exported * r_top;
        }
    }

    /// Cell-averaged bounds: alpha in the euphotic zone and
    /// (1-nu) alpha h_bar_e w / thickness below it.
    Vector bound_d(const Grid& g) const override
    {
        Vector M(g.n_cells());
        const double hbe = g.h_bar_e();
        for (const Column& col : g.columns()) {
            double r_top = 1.0;
            for (Index k = col.first_cell; k < col.first_cell + col.n_cells; ++k) {
                const Cell& c = g.cell(k);
                if (c.zone == Zone::Euphotic) {
                    M[k] = p_.alpha;
                } else {
                    const double r_bot = std::pow(c.z_bottom / hbe, -p_.beta);
                    M[k] = (1.0 - p_.nu) * p_.alpha * hbe * (r_top - r_bot) / c.thickness();
                    r_top = r_bot;
                }
            }
        }
        return M;
    }

    Vector bound_b(const Grid& g) const override
    {
        Vector M(static_cast<Index>(g.boundary_faces().size()));
        for (std::size_t f = 0; f < g.boundary_faces().size(); ++f) {
            const auto& face = g.boundary_faces()[f];
            M[static_cast<Index>(f)] = face.kind == BoundaryKind::Surface
                                           ? 0.0
                                           : (1.0 - p_.nu) * p_.alpha * g.column(face.column).euphotic_depth;
        }
        return M;
    }

    /// Pointwise bounds max{alpha, (1-nu) alpha beta} and (1-nu) alpha h_bar_e.
    std::optional<std::pair<double, double>> reference_bounds(const Grid& g) const override
    {
        return std::pair{std::max(p_.alpha, (1.0 - p_.nu) * p_.alpha * p_.beta),
                         (1.0 - p_.nu) * p_.alpha * g.h_bar_e()};
    }

private:
    PO4DOPParams p_;
};

// ---------------------------------------------------------------------------
// Diagnostics

struct ReactionSample {
    Vector y1, y2;
    double t = 0.0;
};

enum class RateKind : std::uint8_t { D1, D2, B1, B2 };

inline const char* to_string(RateKind k)
{
    switch (k) {
    case RateKind::D1: return "d1";
    case RateKind::D2: return "d2";
    case RateKind::B1: return "b1";
    case RateKind::B2: return "b2";
    }
    return "?";
}

struct BoundViolation {
    std::size_t sample = 0;
    RateKind kind = RateKind::D1;
    Index index = 0;  // cell or boundary face
    double value = 0.0;
    double bound = 0.0;
    bool reference = false;  // violated the scalar reference bound rather than the declared field
};

struct BoundsReport {
    std::size_t n_samples = 0;
    double max_ratio_d = 0.0;  // max |d_j| / M_d over cells with M_d > 0
    double max_ratio_b = 0.0;
    std::vector<BoundViolation> violations;
    bool passed = true;
};

/// Checks |d_j| <= M_d and |b_j| <= M_b for every sample, and the model's
/// scalar reference bounds when it declares them. `rel_slack` absorbs
/// round-off in the comparison.
inline BoundsReport check_bounds(const ReactionModel& model, const Grid& g,
                                 std::span<const ReactionSample> samples, double rel_slack = 1e-12)
{
    BoundsReport rep;
    rep.n_samples = samples.size();
    const Vector Md = model.bound_d(g);
    const Vector Mb = model.bound_b(g);
    const auto ref = model.reference_bounds(g);
    ReactionRates r;
    for (std::size_t s = 0; s < samples.size(); ++s) {
        model.evaluate(g, samples[s].y1, samples[s].y2, samples[s].t, r);
        auto check = [&](const Vector& v, const Vector& M, RateKind kind, std::optional<double> refb,
                         double& max_ratio) {
            for (Index i = 0; i < v.size(); ++i) {
                const double a = std::abs(v[i]);
                if (M[i] > 0.0) max_ratio = std::max(max_ratio, a / M[i]);
                if (!(a <= M[i] * (1.0 + rel_slack)))
                    rep.violations.push_back({s, kind, i, v[i], M[i], false});
                if (refb && !(a <= *refb * (1.0 + rel_slack)))
                    rep.violations.push_back({s, kind, i, v[i], *refb, true});
            }
        };
        std::optional<double> rd, rb;
        if (ref) {
            rd = ref->first;
            rb = ref->second;
        }
        check(r.d1, Md, RateKind::D1, rd, rep.max_ratio_d);
        check(r.d2, Md, RateKind::D2, rd, rep.max_ratio_d);
        check(r.b1, Mb, RateKind::B1, rb, rep.max_ratio_b);
        check(r.b2, Mb, RateKind::B2, rb, rep.max_ratio_b);
    }
    rep.passed = rep.violations.empty();
    return rep;
}

struct MassIdentityReport {
    double tolerance = 1e-12;
    std::vector<double> residual;  // sum_j [sum vol d_j + sum area b_j] per sample (mmol P s^-1)
    std::vector<double> scale;     // sum vol |d1| per sample
    double max_relative = 0.0;
    bool passed = true;
};

/// Net reaction mass source per sample; the model conserves mass when it
/// vanishes relative to sum vol |d1|.
inline MassIdentityReport check_mass_identity(const ReactionModel& model, const Grid& g,
                                              std::span<const ReactionSample> samples,
                                              double tolerance = 1e-12)
{
    MassIdentityReport rep;
    rep.tolerance = tolerance;
    ReactionRates r;
    Vector areas(static_cast<Index>(g.boundary_faces().size()));
    for (std::size_t f = 0; f < g.boundary_faces().size(); ++f)
        areas[static_cast<Index>(f)] = g.boundary_faces()[f].area;
    for (const auto& s : samples) {
        model.evaluate(g, s.y1, s.y2, s.t, r);
        const double res = g.volumes().dot(r.d1 + r.d2) + areas.dot(r.b1 + r.b2);
        const double scale = g.volumes().dot(r.d1.cwiseAbs());
        rep.residual.push_back(res);
        rep.scale.push_back(scale);
        const double rel = scale > 0.0 ? std::abs(res) / scale : (res == 0.0 ? 0.0 : INFINITY);
        rep.max_relative = std::max(rep.max_relative, rel);
        if (!(rel <= tolerance)) rep.passed = false;
    }
    return rep;
}

inline void write_reaction_csv(std::ostream& os, const BoundsReport& b, const MassIdentityReport& m)
{
    os << "sample,mass_residual_mmolP_s,scale_mmolP_s,bound_violations\n";
    os.precision(17);
    std::vector<std::size_t> per(m.residual.size(), 0);
    for (const auto& v : b.violations)
        if (v.sample < per.size()) ++per[v.sample];
    for (std::size_t s = 0; s < m.residual.size(); ++s)
        os << s << ',' << m.residual[s] << ',' << m.scale[s] << ',' << per[s] << '\n';
}

} // namespace ndop
