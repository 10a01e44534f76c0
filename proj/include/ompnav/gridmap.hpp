#pragma once
// Trinary occupancy grids: coordinate transforms, submap extraction, noise
// suppression by morphological closing, observed/predicted fusion, and
// clearance queries.
//
// Indexing convention: cell (col, row) covers the half-open world rectangle
// [origin + (col, row) * res, origin + (col + 1, row + 1) * res). Cells are
// stored row-major, index = row * width + col, row 0 at the lowest y.

#include "ompnav/core.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace ompnav {

enum class Cell : std::uint8_t { Free = 0, Occupied = 1, Unknown = 2 };

enum class Provenance : std::uint8_t { Observed = 0, Predicted = 1 };

struct CellIndex {
    int col = 0;
    int row = 0;
    friend bool operator==(const CellIndex&, const CellIndex&) = default;
};

inline constexpr double kDefaultResolution = 0.05;

class OccupancyGrid {
public:
    OccupancyGrid() = default;

    OccupancyGrid(int width, int height, double resolution = kDefaultResolution,
                  Vec2 origin = Vec2::Zero(), Cell fill = Cell::Unknown)
        : width_(width), height_(height), resolution_(resolution), origin_(origin),
          cells_(static_cast<std::size_t>(std::max(width, 0)) * std::max(height, 0), fill) {
        if (width < 0 || height < 0)
            throw Error(ErrorCode::InvalidArgument, "negative grid dimensions");
        if (!(resolution > 0.0))
            throw Error(ErrorCode::InvalidArgument, "resolution must be positive");
    }

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    double resolution() const noexcept { return resolution_; }
    const Vec2& origin() const noexcept { return origin_; }
    std::size_t size() const noexcept { return cells_.size(); }

    Vec2 extent_max() const { return origin_ + Vec2(width_, height_) * resolution_; }

    bool in_bounds(int col, int row) const noexcept {
        return col >= 0 && row >= 0 && col < width_ && row < height_;
    }
    bool in_bounds(CellIndex c) const noexcept { return in_bounds(c.col, c.row); }

    bool contains(const Vec2& p) const {
        const Vec2 hi = extent_max();
        return p.x() >= origin_.x() && p.y() >= origin_.y() && p.x() < hi.x() && p.y() < hi.y();
    }

    Cell at(int col, int row) const { return cells_[index(col, row)]; }
    Cell at(CellIndex c) const { return at(c.col, c.row); }
    void set(int col, int row, Cell v) { cells_[index(col, row)] = v; }
    void set(CellIndex c, Cell v) { set(c.col, c.row, v); }

    /// Unchecked floor transform; may return indices outside the grid.
    CellIndex cell_of(const Vec2& p) const {
        const Vec2 q = (p - origin_) / resolution_;
        return {static_cast<int>(std::floor(q.x())), static_cast<int>(std::floor(q.y()))};
    }

    /// Throws OutOfBounds when p lies outside the grid extent.
    CellIndex world_to_cell(const Vec2& p) const {
        const CellIndex c = cell_of(p);
        if (!in_bounds(c))
            throw Error(ErrorCode::OutOfBounds, "point outside grid extent");
        return c;
    }

    Vec2 cell_center(CellIndex c) const {
        return origin_ + (Vec2(c.col, c.row) + Vec2(0.5, 0.5)) * resolution_;
    }

    std::size_t index(int col, int row) const noexcept {
        return static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) +
               static_cast<std::size_t>(col);
    }

    const std::vector<Cell>& cells() const noexcept { return cells_; }
    std::vector<Cell>& cells() noexcept { return cells_; }

    std::size_t count(Cell v) const {
        return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), v));
    }

    /// Same resolution and origins that differ by a whole number of cells.
    bool aligned_with(const OccupancyGrid& other) const {
        if (std::abs(resolution_ - other.resolution_) > 1e-12 * resolution_) return false;
        const Vec2 d = (other.origin_ - origin_) / resolution_;
        return std::abs(d.x() - std::round(d.x())) < 1e-6 && std::abs(d.y() - std::round(d.y())) < 1e-6;
    }

    friend bool operator==(const OccupancyGrid& a, const OccupancyGrid& b) {
        return a.width_ == b.width_ && a.height_ == b.height_ && a.resolution_ == b.resolution_ &&
               a.origin_ == b.origin_ && a.cells_ == b.cells_;
    }

private:
    int width_ = 0;
    int height_ = 0;
    double resolution_ = kDefaultResolution;
    Vec2 origin_ = Vec2::Zero();
    std::vector<Cell> cells_;
};

/// Observed grid with Unknown cells filled from a prediction; the map the
/// planners consume.
struct PlanningMap {
    OccupancyGrid grid;
    std::vector<Provenance> provenance;

    PlanningMap() = default;
    explicit PlanningMap(OccupancyGrid g)
        : grid(std::move(g)), provenance(grid.size(), Provenance::Observed) {}

    Provenance provenance_at(CellIndex c) const { return provenance[grid.index(c.col, c.row)]; }
};

inline CellIndex world_to_cell(const Vec2& p, const OccupancyGrid& g) { return g.world_to_cell(p); }

/// Square, world-axis-aligned window of ceil(side / res) cells per edge. The
/// window is snapped to the source lattice so cells are copied, never
/// resampled; its center lies on the corner of the cell containing `center`.
inline OccupancyGrid extract_submap(const OccupancyGrid& g, const Vec2& center, double side) {
    if (!(side > 0.0)) throw Error(ErrorCode::InvalidArgument, "submap side must be positive");
    const int n = static_cast<int>(std::ceil(side / g.resolution() - 1e-9));
    const CellIndex c = g.cell_of(center);
    const int col0 = c.col - n / 2;
    const int row0 = c.row - n / 2;
    OccupancyGrid out(n, n, g.resolution(), g.origin() + Vec2(col0, row0) * g.resolution(), Cell::Unknown);
    for (int r = 0; r < n; ++r) {
        const int sr = row0 + r;
        if (sr < 0 || sr >= g.height()) continue;
        for (int q = 0; q < n; ++q) {
            const int sc = col0 + q;
            if (sc < 0 || sc >= g.width()) continue;
            out.set(q, r, g.at(sc, sr));
        }
    }
    return out;
}

namespace detail {

// Separable square dilation of a binary mask (out-of-range reads as 0).
inline std::vector<std::uint8_t> dilate_mask(const std::vector<std::uint8_t>& m, int w, int h, int radius) {
    std::vector<std::uint8_t> tmp(m.size(), 0), out(m.size(), 0);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            std::uint8_t v = 0;
            for (int k = std::max(0, c - radius); k <= std::min(w - 1, c + radius) && !v; ++k)
                v = m[static_cast<std::size_t>(r) * w + k];
            tmp[static_cast<std::size_t>(r) * w + c] = v;
        }
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            std::uint8_t v = 0;
            for (int k = std::max(0, r - radius); k <= std::min(h - 1, r + radius) && !v; ++k)
                v = tmp[static_cast<std::size_t>(k) * w + c];
            out[static_cast<std::size_t>(r) * w + c] = v;
        }
    return out;
}

inline std::vector<std::uint8_t> erode_mask(const std::vector<std::uint8_t>& m, int w, int h, int radius) {
    std::vector<std::uint8_t> inv(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) inv[i] = m[i] ? 0 : 1;
    auto d = dilate_mask(inv, w, h, radius);
    for (auto& v : d) v = v ? 0 : 1;
    return d;
}

}  // namespace detail

/// Closing (dilation then erosion) of the Occupied mask with a kernel x kernel
/// square. Computed on a zero-padded canvas so the result equals the closing
/// on the unbounded plane: it is extensive and idempotent. Cells newly marked
/// Occupied overwrite Free/Unknown; every other cell keeps its value.
inline OccupancyGrid morphological_close(const OccupancyGrid& g, int kernel = 5) {
    if (kernel < 1 || kernel % 2 == 0)
        throw Error(ErrorCode::InvalidArgument, "closing kernel must be odd and >= 1");
    const int radius = kernel / 2;
    if (radius == 0 || g.size() == 0) return g;
    const int pad = 2 * radius;
    const int w = g.width() + 2 * pad;
    const int h = g.height() + 2 * pad;
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(w) * h, 0);
    for (int r = 0; r < g.height(); ++r)
        for (int c = 0; c < g.width(); ++c)
            mask[static_cast<std::size_t>(r + pad) * w + (c + pad)] = g.at(c, r) == Cell::Occupied;
    const auto closed = detail::erode_mask(detail::dilate_mask(mask, w, h, radius), w, h, radius);
    OccupancyGrid out = g;
    for (int r = 0; r < g.height(); ++r)
        for (int c = 0; c < g.width(); ++c)
            if (closed[static_cast<std::size_t>(r + pad) * w + (c + pad)]) out.set(c, r, Cell::Occupied);
    return out;
}

/// Fills Unknown observed cells from the prediction. The output covers the
/// bounding box of both grids; observed non-Unknown cells pass through
/// untouched, and any cell the prediction covers that the observation does not
/// know takes the predicted value with Predicted provenance.
inline PlanningMap fuse(const OccupancyGrid& observed, const OccupancyGrid& predicted) {
    if (!observed.aligned_with(predicted))
        throw Error(ErrorCode::GridMismatch, "observed and predicted grids are not cell-aligned");
    const double res = observed.resolution();
    const Vec2 lo = observed.origin().cwiseMin(predicted.origin());
    const Vec2 hi = observed.extent_max().cwiseMax(predicted.extent_max());
    const int w = static_cast<int>(std::lround((hi.x() - lo.x()) / res));
    const int h = static_cast<int>(std::lround((hi.y() - lo.y()) / res));
    const Vec2 obs_off = (observed.origin() - lo) / res;
    const Vec2 pred_off = (predicted.origin() - lo) / res;
    const int oc = static_cast<int>(std::lround(obs_off.x())), orow = static_cast<int>(std::lround(obs_off.y()));
    const int pc = static_cast<int>(std::lround(pred_off.x())), prow = static_cast<int>(std::lround(pred_off.y()));

    // Keep the observed origin bit-identical when it is the lower corner.
    Vec2 origin = lo;
    if (oc == 0 && orow == 0) origin = observed.origin();
    PlanningMap out{OccupancyGrid(w, h, res, origin, Cell::Unknown)};
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            const int ocol = c - oc, orr = r - orow;
            const bool in_obs = observed.in_bounds(ocol, orr);
            const Cell ov = in_obs ? observed.at(ocol, orr) : Cell::Unknown;
            const std::size_t idx = out.grid.index(c, r);
            if (ov != Cell::Unknown) {
                out.grid.cells()[idx] = ov;
                continue;
            }
            const int pcol = c - pc, pr = r - prow;
            if (predicted.in_bounds(pcol, pr)) {
                out.grid.cells()[idx] = predicted.at(pcol, pr);
                out.provenance[idx] = Provenance::Predicted;
            }
        }
    return out;
}

/// Exact Euclidean distance from p to the nearest Occupied cell center, by an
/// expanding ring search. +infinity when the grid holds no Occupied cell.
inline double clearance(const OccupancyGrid& g, const Vec2& p) {
    const CellIndex c0 = g.world_to_cell(p);
    const double res = g.resolution();
    const int max_ring = std::max({c0.col, c0.row, g.width() - 1 - c0.col, g.height() - 1 - c0.row});
    double best2 = std::numeric_limits<double>::infinity();
    auto visit = [&](int col, int row) {
        if (!g.in_bounds(col, row) || g.at(col, row) != Cell::Occupied) return;
        best2 = std::min(best2, (g.cell_center({col, row}) - p).squaredNorm());
    };
    for (int ring = 0; ring <= max_ring; ++ring) {
        if (ring == 0) {
            visit(c0.col, c0.row);
        } else {
            for (int k = -ring; k <= ring; ++k) {
                visit(c0.col + k, c0.row - ring);
                visit(c0.col + k, c0.row + ring);
            }
            for (int k = -ring + 1; k <= ring - 1; ++k) {
                visit(c0.col - ring, c0.row + k);
                visit(c0.col + ring, c0.row + k);
            }
        }
        // Centers on ring r+1 are at least (r + 0.5) * res away from p.
        const double next_lb = (ring + 0.5) * res;
        if (best2 <= next_lb * next_lb) break;
    }
    return std::sqrt(best2);
}

inline double clearance(const PlanningMap& m, const Vec2& p) { return clearance(m.grid, p); }

/// True when no Occupied cell center lies strictly closer than `radius` to p.
/// Only inspects cells within reach of the radius. Points outside the grid
/// only see the part of the grid that is within reach.
inline bool is_clear(const OccupancyGrid& g, const Vec2& p, double radius) {
    const CellIndex lo = g.cell_of(p - Vec2(radius, radius));
    const CellIndex hi = g.cell_of(p + Vec2(radius, radius));
    const double r2 = radius * radius;
    for (int row = std::max(0, lo.row); row <= std::min(g.height() - 1, hi.row); ++row)
        for (int col = std::max(0, lo.col); col <= std::min(g.width() - 1, hi.col); ++col)
            if (g.at(col, row) == Cell::Occupied && (g.cell_center({col, row}) - p).squaredNorm() < r2)
                return false;
    return true;
}

/// Euclidean distance transform over cell centers (Felzenszwalb-Huttenlocher).
/// Used by the planners for fast conservative clearance checks and as a smooth
/// distance surrogate inside the trajectory optimizer.
class DistanceField {
public:
    static constexpr double kFar = 1.0e3;

    DistanceField() = default;

    explicit DistanceField(const OccupancyGrid& g)
        : width_(g.width()), height_(g.height()), resolution_(g.resolution()), origin_(g.origin()),
          dist_(g.size(), std::numeric_limits<double>::infinity()) {
        const double inf = std::numeric_limits<double>::infinity();
        std::vector<double> sq(g.size(), inf);
        for (std::size_t i = 0; i < g.size(); ++i)
            if (g.cells()[i] == Cell::Occupied) sq[i] = 0.0;
        const int n = std::max(width_, height_);
        std::vector<double> f(n), d(n), z(n + 1);
        std::vector<int> v(n);
        for (int r = 0; r < height_; ++r) {
            for (int c = 0; c < width_; ++c) f[c] = sq[g.index(c, r)];
            transform_1d(f, d, v, z, width_);
            for (int c = 0; c < width_; ++c) sq[g.index(c, r)] = d[c];
        }
        for (int c = 0; c < width_; ++c) {
            for (int r = 0; r < height_; ++r) f[r] = sq[g.index(c, r)];
            transform_1d(f, d, v, z, height_);
            for (int r = 0; r < height_; ++r) sq[g.index(c, r)] = d[r];
        }
        for (std::size_t i = 0; i < sq.size(); ++i) dist_[i] = std::sqrt(sq[i]) * resolution_;
    }

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    double resolution() const noexcept { return resolution_; }

    /// Distance between the center of (col, row) and the nearest Occupied center.
    double at(int col, int row) const {
        return dist_[static_cast<std::size_t>(row) * width_ + col];
    }

    /// Lower bound on the exact clearance of an arbitrary point.
    double lower_bound(const Vec2& p) const {
        const Vec2 q = (p - origin_) / resolution_;
        const int col = std::clamp(static_cast<int>(std::floor(q.x())), 0, width_ - 1);
        const int row = std::clamp(static_cast<int>(std::floor(q.y())), 0, height_ - 1);
        const Vec2 center = origin_ + (Vec2(col, row) + Vec2(0.5, 0.5)) * resolution_;
        return std::max(0.0, at(col, row) - (p - center).norm());
    }

    /// Bilinear interpolation over cell centers, optionally with its gradient.
    double interpolate(const Vec2& p, Vec2* gradient = nullptr) const {
        const Vec2 q = (p - origin_) / resolution_ - Vec2(0.5, 0.5);
        const double qx = std::clamp(q.x(), 0.0, static_cast<double>(width_ - 1));
        const double qy = std::clamp(q.y(), 0.0, static_cast<double>(height_ - 1));
        const int c0 = std::min(static_cast<int>(std::floor(qx)), std::max(width_ - 2, 0));
        const int r0 = std::min(static_cast<int>(std::floor(qy)), std::max(height_ - 2, 0));
        const int c1 = std::min(c0 + 1, width_ - 1);
        const int r1 = std::min(r0 + 1, height_ - 1);
        const double tx = qx - c0, ty = qy - r0;
        const double d00 = capped(c0, r0), d10 = capped(c1, r0), d01 = capped(c0, r1), d11 = capped(c1, r1);
        const double val = (1 - tx) * (1 - ty) * d00 + tx * (1 - ty) * d10 + (1 - tx) * ty * d01 + tx * ty * d11;
        if (gradient) {
            const bool x_free = q.x() > 0.0 && q.x() < width_ - 1;
            const bool y_free = q.y() > 0.0 && q.y() < height_ - 1;
            const double gx = ((1 - ty) * (d10 - d00) + ty * (d11 - d01)) / resolution_;
            const double gy = ((1 - tx) * (d01 - d00) + tx * (d11 - d10)) / resolution_;
            *gradient = Vec2(x_free ? gx : 0.0, y_free ? gy : 0.0);
        }
        return val;
    }

private:
    double capped(int col, int row) const { return std::min(at(col, row), kFar); }

    // 1-D squared distance transform of f (lower envelope of parabolas).
    static void transform_1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& v,
                             std::vector<double>& z, int n) {
        const double inf = std::numeric_limits<double>::infinity();
        int k = -1;
        for (int q = 0; q < n; ++q) {
            if (f[q] == inf) continue;
            if (k < 0) {
                k = 0;
                v[0] = q;
                z[0] = -inf;
                z[1] = inf;
                continue;
            }
            auto meet = [&](int p) {
                return ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * q - 2.0 * p);
            };
            double s = meet(v[k]);
            // z[0] is -inf, so k never drops below 0.
            while (s <= z[k]) {
                --k;
                s = meet(v[k]);
            }
            ++k;
            v[k] = q;
            z[k] = s;
            z[k + 1] = inf;
        }
        if (k < 0) {
            for (int q = 0; q < n; ++q) d[q] = inf;
            return;
        }
        int j = 0;
        for (int q = 0; q < n; ++q) {
            while (z[j + 1] < q) ++j;
            const double dq = double(q) - v[j];
            d[q] = dq * dq + f[v[j]];
        }
    }

    int width_ = 0;
    int height_ = 0;
    double resolution_ = kDefaultResolution;
    Vec2 origin_ = Vec2::Zero();
    std::vector<double> dist_;
};

}  // namespace ompnav
