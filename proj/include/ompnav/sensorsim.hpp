#pragma once
// Simulated forward depth sensor and the occupancy mapper fed by it.

#include "ompnav/dynamics.hpp"
#include "ompnav/environment.hpp"
#include "ompnav/gridmap.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace ompnav {

struct SensorConfig {
    double fov = 1.5;       // rad
    int ray_count = 128;
    double max_range = 3.0;  // m
    double depth_noise_sigma = 0.0;  // m
};

struct DepthScan {
    std::vector<double> angles;  // relative to heading, ascending
    std::vector<double> depths;
    std::vector<bool> valid;
    // Set by gradient_filter: the ray saw something, but its depth is not
    // trusted. Unlike an out-of-range ray it says nothing about free space.
    std::vector<bool> filtered;
    double max_range = 3.0;

    int size() const { return static_cast<int>(angles.size()); }
    int valid_count() const { return static_cast<int>(std::count(valid.begin(), valid.end(), true)); }
    bool is_filtered(int i) const { return static_cast<std::size_t>(i) < filtered.size() && filtered[i]; }
};

/// Rays evenly spaced over [-fov/2, fov/2] inclusive. Noise is drawn from
/// `rng` (only when sigma > 0); a noisy depth leaving (0, max_range] is invalid.
inline DepthScan render_depth(const Environment& env, const RobotState& pose, const SensorConfig& cfg,
                              std::mt19937_64* rng = nullptr) {
    if (cfg.ray_count < 1 || !(cfg.fov > 0.0) || !(cfg.max_range > 0.0))
        throw Error(ErrorCode::InvalidArgument, "bad sensor config");
    DepthScan scan;
    scan.max_range = cfg.max_range;
    const int n = cfg.ray_count;
    scan.angles.resize(n);
    scan.depths.assign(n, 0.0);
    scan.valid.assign(n, false);
    scan.filtered.assign(n, false);
    std::normal_distribution<double> noise(0.0, cfg.depth_noise_sigma);
    const Vec2 o = pose.position();
    for (int i = 0; i < n; ++i) {
        const double a = n == 1 ? 0.0 : -0.5 * cfg.fov + cfg.fov * i / (n - 1);
        scan.angles[i] = a;
        const auto hit = env.ray_cast(o, heading_vector(pose.theta + a), cfg.max_range);
        if (!hit) continue;
        double d = *hit;
        if (cfg.depth_noise_sigma > 0.0 && rng) d += noise(*rng);
        if (d > 0.0 && d <= cfg.max_range) {
            scan.depths[i] = d;
            scan.valid[i] = true;
        }
    }
    return scan;
}

inline constexpr double kGradientKernel[5] = {-1.0 / 8, -2.0 / 8, 0.0, 2.0 / 8, 1.0 / 8};

/// Angular derivative magnitude per ray; NaN where the 5-tap window is not
/// entirely valid.
inline std::vector<double> gradient_magnitudes(const DepthScan& scan) {
    const int n = scan.size();
    std::vector<double> g(n, std::numeric_limits<double>::quiet_NaN());
    for (int i = 2; i + 2 < n; ++i) {
        double acc = 0.0;
        bool ok = true;
        for (int j = -2; j <= 2 && ok; ++j) {
            ok = scan.valid[i + j];
            acc += kGradientKernel[j + 2] * scan.depths[i + j];
        }
        if (ok) g[i] = std::abs(acc);
    }
    return g;
}

/// Drops rays whose gradient magnitude exceeds twice the median magnitude.
/// Rays without a full valid window have no magnitude and are kept.
inline DepthScan gradient_filter(const DepthScan& scan) {
    if (scan.size() < 5) throw Error(ErrorCode::InvalidArgument, "gradient filter needs at least 5 rays");
    const std::vector<double> g = gradient_magnitudes(scan);
    std::vector<double> defined;
    for (double v : g)
        if (!std::isnan(v)) defined.push_back(v);
    DepthScan out = scan;
    out.filtered.resize(scan.size(), false);
    if (defined.empty()) return out;
    std::sort(defined.begin(), defined.end());
    const std::size_t m = defined.size();
    const double median = m % 2 ? defined[m / 2] : 0.5 * (defined[m / 2 - 1] + defined[m / 2]);
    for (int i = 0; i < scan.size(); ++i)
        if (!std::isnan(g[i]) && g[i] > 2.0 * median) {
            out.valid[i] = false;
            out.filtered[i] = true;
        }
    return out;
}

namespace detail {

/// Grid cells crossed by the segment a -> a + dir * len (Amanatides-Woo),
/// in order, stopping at the grid edge. The cell containing the end point is
/// the last one visited.
template <class Visit>
void traverse_ray(const OccupancyGrid& g, const Vec2& a, const Vec2& dir, double len, Visit&& visit) {
    CellIndex c = g.cell_of(a);
    const double res = g.resolution();
    const int step_c = dir.x() > 0 ? 1 : (dir.x() < 0 ? -1 : 0);
    const int step_r = dir.y() > 0 ? 1 : (dir.y() < 0 ? -1 : 0);
    const double inf = std::numeric_limits<double>::infinity();
    auto first_cross = [&](double p, double o, double d, int cell, int step) {
        if (step == 0) return inf;
        const double edge = o + (cell + (step > 0 ? 1 : 0)) * res;
        return (edge - p) / d;
    };
    double t_c = first_cross(a.x(), g.origin().x(), dir.x(), c.col, step_c);
    double t_r = first_cross(a.y(), g.origin().y(), dir.y(), c.row, step_r);
    const double dt_c = step_c ? res / std::abs(dir.x()) : inf;
    const double dt_r = step_r ? res / std::abs(dir.y()) : inf;
    while (g.in_bounds(c)) {
        const double t_exit = std::min(t_c, t_r);
        const bool last = t_exit >= len;
        visit(c, last);
        if (last) return;
        if (t_c < t_r) {
            c.col += step_c;
            t_c += dt_c;
        } else {
            c.row += step_r;
            t_r += dt_r;
        }
    }
}

}  // namespace detail

struct MapperConfig {
    double free_fraction = 0.9;  // invalid rays clear up to free_fraction * max_range
};

/// Free along each valid ray, Occupied at its end; out-of-range rays clear
/// space up to free_fraction * max_range; filtered rays are skipped. Occupied
/// cells are never set back to Free.
inline OccupancyGrid integrate_scan(const OccupancyGrid& g, const RobotState& pose, const DepthScan& scan,
                                   const MapperConfig& cfg = {}) {
    const Vec2 o = pose.position();
    g.world_to_cell(o);  // OutOfBounds check
    OccupancyGrid out = g;
    for (int i = 0; i < scan.size(); ++i) {
        const Vec2 dir = heading_vector(pose.theta + scan.angles[i]);
        if (scan.valid[i]) {
            // The nudge puts a hit exactly on a cell edge into the far (wall) cell.
            const double len = scan.depths[i] + 1e-6;
            detail::traverse_ray(out, o, dir, len, [&](CellIndex c, bool last) {
                if (last) out.set(c, Cell::Occupied);
                else if (out.at(c) != Cell::Occupied) out.set(c, Cell::Free);
            });
        } else if (!scan.is_filtered(i)) {
            const double len = cfg.free_fraction * scan.max_range;
            if (len <= 0.0) continue;
            detail::traverse_ray(out, o, dir, len, [&](CellIndex c, bool) {
                if (out.at(c) != Cell::Occupied) out.set(c, Cell::Free);
            });
        }
    }
    return out;
}

/// Owns the observed map and integrates filtered scans into it.
class Mapper {
public:
    Mapper(OccupancyGrid initial, SensorConfig sensor = {}, MapperConfig cfg = {})
        : grid_(std::move(initial)), sensor_(sensor), cfg_(cfg) {}

    const OccupancyGrid& grid() const { return grid_; }
    const SensorConfig& sensor() const { return sensor_; }

    DepthScan observe(const Environment& env, const RobotState& pose, std::mt19937_64* rng = nullptr) {
        const DepthScan scan = gradient_filter(render_depth(env, pose, sensor_, rng));
        grid_ = integrate_scan(grid_, pose, scan, cfg_);
        return scan;
    }

private:
    OccupancyGrid grid_;
    SensorConfig sensor_;
    MapperConfig cfg_;
};

}  // namespace ompnav
