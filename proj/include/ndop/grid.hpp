#pragma once

// Layered box discretization of the water column domain.
//
// The horizontal mesh is a structured nx-by-ny array of rectangles. Every
// surface cell carries a depth h and a column of layer cells reaching down to
// exactly that depth. Depth is measured positive downwards from the surface
// (z = 0). Cells above the euphotic depth h_e = min(h_bar_e, h) form the
// euphotic zone, everything below is aphotic.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "ndop/common.hpp"

namespace ndop {

enum class Zone : std::uint8_t { Euphotic, Aphotic };

enum class BoundaryKind : std::uint8_t {
    Surface,         // sea surface
    EuphoticBottom,  // sea floor of a column no deeper than h_bar_e
    AphoticBottom,   // sea floor below the euphotic zone
};

enum class FaceAxis : std::uint8_t { X, Y, Z };

inline const char* to_string(FaceAxis a) { return a == FaceAxis::X ? "x" : a == FaceAxis::Y ? "y" : "z"; }

inline const char* to_string(Zone z) { return z == Zone::Euphotic ? "euphotic" : "aphotic"; }

inline const char* to_string(BoundaryKind k)
{
    switch (k) {
    case BoundaryKind::Surface: return "surface";
    case BoundaryKind::EuphoticBottom: return "euphotic_bottom";
    case BoundaryKind::AphoticBottom: return "aphotic_bottom";
    }
    return "?";
}

struct HorizontalMesh {
    Index nx = 1;
    Index ny = 1;
    double dx = 1.0;  // m
    double dy = 1.0;  // m
};

/// Same layer thicknesses (top down) for every column; a column shallower
/// than their sum is cut at its depth.
struct LayerThicknesses {
    std::vector<double> thickness;
};

/// Each column split into `count` equal layers.
struct UniformLayers {
    Index count = 1;
};

using LayerSpec = std::variant<LayerThicknesses, UniformLayers>;

struct Cell {
    Index column = 0;
    Index layer = 0;
    double z_top = 0.0;
    double z_bottom = 0.0;
    double volume = 0.0;
    Zone zone = Zone::Euphotic;

    double thickness() const { return z_bottom - z_top; }
    double z_center() const { return 0.5 * (z_top + z_bottom); }
};

struct Column {
    Index ix = 0;
    Index iy = 0;
    double area = 0.0;
    double depth = 0.0;
    double euphotic_depth = 0.0;  // h_e = min(h_bar_e, depth)
    Index first_cell = 0;
    Index n_cells = 0;
    Index surface_face = 0;
    Index bottom_face = 0;
};

/// Face shared by two cells. Positive flux runs from `lo` to `hi`; for
/// vertical faces `lo` is the upper cell.
struct InteriorFace {
    Index lo = 0;
    Index hi = 0;
    FaceAxis axis = FaceAxis::X;
    double area = 0.0;
    double distance = 0.0;
};

struct BoundaryFace {
    Index cell = 0;
    Index column = 0;
    BoundaryKind kind = BoundaryKind::Surface;
    double area = 0.0;
};

class Grid {
public:
    Index n_cells() const { return static_cast<Index>(cells_.size()); }
    Index n_columns() const { return static_cast<Index>(columns_.size()); }
    std::uint64_t id() const { return id_; }

    const HorizontalMesh& mesh() const { return mesh_; }
    double h_bar_e() const { return h_bar_e_; }
    double h_max() const { return h_max_; }
    double total_volume() const { return total_volume_; }

    std::span<const Cell> cells() const { return cells_; }
    std::span<const Column> columns() const { return columns_; }
    std::span<const InteriorFace> interior_faces() const { return interior_; }
    std::span<const BoundaryFace> boundary_faces() const { return boundary_; }
    const Vector& volumes() const { return volumes_; }

    const Cell& cell(Index i) const { return cells_[static_cast<std::size_t>(i)]; }
    const Column& column(Index c) const { return columns_[static_cast<std::size_t>(c)]; }
    Index column_index(Index ix, Index iy) const { return ix + mesh_.nx * iy; }

    /// |Omega| as the sum of column area times depth, independent of the cell list.
    double volume_from_columns() const
    {
        double v = 0.0;
        for (const auto& c : columns_) v += c.area * c.depth;
        return v;
    }

    void write_csv(std::ostream& os) const;

private:
    friend Grid build_grid(const HorizontalMesh&, std::span<const double>, double, const LayerSpec&,
                           double);

    static std::uint64_t next_id()
    {
        static std::atomic<std::uint64_t> counter{1};
        return counter++;
    }

    std::uint64_t id_ = 0;
    HorizontalMesh mesh_;
    double h_bar_e_ = 0.0;
    double h_max_ = 0.0;
    double total_volume_ = 0.0;
    std::vector<Cell> cells_;
    std::vector<Column> columns_;
    std::vector<InteriorFace> interior_;
    std::vector<BoundaryFace> boundary_;
    Vector volumes_;
};

namespace detail {

inline bool close_to(double a, double b, double rel = 1e-9)
{
    return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b));
}

// Layer interfaces (top down, starting at 0) for one column of depth h.
inline std::vector<double> column_interfaces(const LayerSpec& spec, double h, double h_bar_e,
                                             Index ix, Index iy)
{
    std::vector<double> z{0.0};
    auto where = [&] {
        std::ostringstream os;
        os << "column (" << ix << ", " << iy << ") with depth " << h << " m";
        return os.str();
    };

    if (const auto* uni = std::get_if<UniformLayers>(&spec)) {
        if (uni->count < 1) throw InputError("layer count must be at least 1");
        for (Index k = 1; k <= uni->count; ++k)
            z.push_back(k == uni->count ? h : h * static_cast<double>(k) / static_cast<double>(uni->count));
    } else {
        const auto& th = std::get<LayerThicknesses>(spec).thickness;
        if (th.empty()) throw InputError("layer thickness list is empty");
        double acc = 0.0;
        for (double t : th) {
            if (!(t > 0.0) || !std::isfinite(t))
                throw InputError("layer thicknesses must be positive and finite");
            acc += t;
            if (acc >= h || close_to(acc, h, 1e-12)) {
                z.push_back(h);
                break;
            }
            z.push_back(acc);
        }
        if (z.back() != h)
            throw InputError("layers do not reach the bottom of " + where());
    }

    if (h > h_bar_e && !close_to(h, h_bar_e, 1e-12)) {
        auto it = std::find_if(z.begin(), z.end(), [&](double v) { return close_to(v, h_bar_e, 1e-9); });
        if (it == z.end())
            throw InputError("euphotic depth " + std::to_string(h_bar_e) +
                             " m is not a layer interface in " + where());
        *it = h_bar_e;
    }
    return z;
}

} // namespace detail

/// Builds the layered grid. `depths` holds one depth per surface cell in
/// x-fastest order.
inline Grid build_grid(const HorizontalMesh& mesh, std::span<const double> depths, double h_bar_e,
                       const LayerSpec& layers,
                       double h_max = std::numeric_limits<double>::infinity())
{
    if (mesh.nx < 1 || mesh.ny < 1) throw InputError("horizontal mesh needs at least one cell");
    if (!(mesh.dx > 0.0) || !(mesh.dy > 0.0)) throw InputError("horizontal spacing must be positive");
    if (!(h_bar_e > 0.0) || !std::isfinite(h_bar_e)) throw InputError("h_bar_e must be positive");
    if (static_cast<Index>(depths.size()) != mesh.nx * mesh.ny)
        throw InputError("depth map has " + std::to_string(depths.size()) + " entries, expected " +
                         std::to_string(mesh.nx * mesh.ny));

    Grid g;
    g.id_ = Grid::next_id();
    g.mesh_ = mesh;
    g.h_bar_e_ = h_bar_e;
    const double area = mesh.dx * mesh.dy;

    double deepest = 0.0;
    for (Index iy = 0; iy < mesh.ny; ++iy) {
        for (Index ix = 0; ix < mesh.nx; ++ix) {
            const double h = depths[static_cast<std::size_t>(ix + mesh.nx * iy)];
            if (!(h > 0.0) || !std::isfinite(h))
                throw InputError("non-positive depth at column (" + std::to_string(ix) + ", " +
                                 std::to_string(iy) + ")");
            if (h > h_max)
                throw InputError("depth exceeds h_max at column (" + std::to_string(ix) + ", " +
                                 std::to_string(iy) + ")");
            deepest = std::max(deepest, h);

            const auto z = detail::column_interfaces(layers, h, h_bar_e, ix, iy);
            Column col;
            col.ix = ix;
            col.iy = iy;
            col.area = area;
            col.depth = h;
            col.euphotic_depth = std::min(h_bar_e, h);
            col.first_cell = g.n_cells();
            const Index c = g.n_columns();
            for (std::size_t k = 0; k + 1 < z.size(); ++k) {
                Cell cell;
                cell.column = c;
                cell.layer = static_cast<Index>(k);
                cell.z_top = z[k];
                cell.z_bottom = z[k + 1];
                if (!(cell.thickness() > 0.0))
                    throw InputError("degenerate layer in column (" + std::to_string(ix) + ", " +
                                     std::to_string(iy) + ")");
                cell.volume = area * cell.thickness();
                cell.zone = cell.z_bottom <= col.euphotic_depth ? Zone::Euphotic : Zone::Aphotic;
                g.cells_.push_back(cell);
            }
            col.n_cells = g.n_cells() - col.first_cell;

            col.surface_face = static_cast<Index>(g.boundary_.size());
            g.boundary_.push_back({col.first_cell, c, BoundaryKind::Surface, area});
            col.bottom_face = static_cast<Index>(g.boundary_.size());
            g.boundary_.push_back({col.first_cell + col.n_cells - 1, c,
                                   h <= h_bar_e ? BoundaryKind::EuphoticBottom : BoundaryKind::AphoticBottom,
                                   area});
            g.columns_.push_back(col);
        }
    }
    g.h_max_ = std::isfinite(h_max) ? h_max : deepest;

    // Vertical faces inside each column.
    for (const auto& col : g.columns_) {
        for (Index k = 0; k + 1 < col.n_cells; ++k) {
            const Index a = col.first_cell + k;
            const Cell& ca = g.cell(a);
            const Cell& cb = g.cell(a + 1);
            g.interior_.push_back({a, a + 1, FaceAxis::Z, col.area,
                                   0.5 * (ca.thickness() + cb.thickness())});
        }
    }

    // Lateral faces between neighbouring columns; layer intervals need not
    // line up, so every overlapping pair of cells gets its own face.
    auto connect = [&](const Column& a, const Column& b, FaceAxis axis, double width, double dist) {
        Index i = a.first_cell, j = b.first_cell;
        const Index ie = a.first_cell + a.n_cells, je = b.first_cell + b.n_cells;
        while (i < ie && j < je) {
            const Cell& ca = g.cell(i);
            const Cell& cb = g.cell(j);
            const double top = std::max(ca.z_top, cb.z_top);
            const double bot = std::min(ca.z_bottom, cb.z_bottom);
            if (bot > top) g.interior_.push_back({i, j, axis, (bot - top) * width, dist});
            if (ca.z_bottom < cb.z_bottom) ++i;
            else if (cb.z_bottom < ca.z_bottom) ++j;
            else { ++i; ++j; }
        }
    };
    for (Index iy = 0; iy < mesh.ny; ++iy) {
        for (Index ix = 0; ix < mesh.nx; ++ix) {
            const Column& here = g.column(g.column_index(ix, iy));
            if (ix + 1 < mesh.nx)
                connect(here, g.column(g.column_index(ix + 1, iy)), FaceAxis::X, mesh.dy, mesh.dx);
            if (iy + 1 < mesh.ny)
                connect(here, g.column(g.column_index(ix, iy + 1)), FaceAxis::Y, mesh.dx, mesh.dy);
        }
    }

    g.volumes_.resize(g.n_cells());
    g.total_volume_ = 0.0;
    for (Index i = 0; i < g.n_cells(); ++i) {
        g.volumes_[i] = g.cell(i).volume;
        g.total_volume_ += g.cell(i).volume;
    }
    return g;
}

inline void Grid::write_csv(std::ostream& os) const
{
    os << "cell_id,column_id,ix,iy,layer,z_top_m,z_bottom_m,volume_m3,zone\n";
    os.precision(17);
    for (Index i = 0; i < n_cells(); ++i) {
        const Cell& c = cell(i);
        const Column& col = column(c.column);
        os << i << ',' << c.column << ',' << col.ix << ',' << col.iy << ',' << c.layer << ',' << c.z_top
           << ',' << c.z_bottom << ',' << c.volume << ',' << to_string(c.zone) << '\n';
    }
}

/// Per-cell concentration (mmol P m^-3) tied to the grid it was created on.
class TracerField {
public:
    TracerField() = default;
    explicit TracerField(const Grid& g, double value = 0.0)
        : grid_id_(g.id()), values_(Vector::Constant(g.n_cells(), value)) {}
    TracerField(const Grid& g, Vector values) : grid_id_(g.id()), values_(std::move(values))
    {
        if (values_.size() != g.n_cells())
            throw InputError("field size " + std::to_string(values_.size()) +
                             " does not match grid with " + std::to_string(g.n_cells()) + " cells");
        if (!values_.allFinite()) throw InputError("field contains non-finite values");
    }

    std::uint64_t grid_id() const { return grid_id_; }
    Index size() const { return values_.size(); }
    const Vector& values() const { return values_; }
    Vector& values() { return values_; }
    double operator[](Index i) const { return values_[i]; }
    double& operator[](Index i) { return values_[i]; }

    bool all_finite() const { return values_.allFinite(); }

private:
    std::uint64_t grid_id_ = 0;
    Vector values_;
};

inline void require_same_grid(const Grid& g, const TracerField& f)
{
    if (f.grid_id() != g.id()) throw InputError("tracer field lives on a different grid");
}

/// Volume integral of a single field.
inline double mass(const Grid& g, const TracerField& f)
{
    require_same_grid(g, f);
    return g.volumes().dot(f.values());
}

/// Total mass of a tracer pair, sum over both components of the volume integral.
inline double mass(const Grid& g, const TracerField& y1, const TracerField& y2)
{
    return mass(g, y1) + mass(g, y2);
}

/// Subtracts the mean so that the result has zero mass.
inline TracerField project_zero_mass(const Grid& g, const TracerField& f)
{
    const double shift = mass(g, f) / g.total_volume();
    return TracerField(g, (f.values().array() - shift).matrix());
}

/// In-place variant used by the time stepping loops.
inline void project_zero_mass_inplace(const Vector& volumes, double total_volume, Vector& v)
{
    v.array() -= volumes.dot(v) / total_volume;
}

} // namespace ndop
