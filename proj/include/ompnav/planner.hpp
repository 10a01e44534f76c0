#pragma once
// Stage one of the controller: warm-started RRT to the goal on the planning
// map, greedy shortcut pruning, and the smoothing/timing helpers re-exported
// from smooth_path.hpp and timing.hpp.

#include "ompnav/gridmap.hpp"
#include "ompnav/smooth_path.hpp"
#include "ompnav/timing.hpp"

#include <chrono>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <vector>

namespace ompnav {

struct PlannerConfig {
    double max_time = 0.05;           // s; only enforced when use_time_budget is set
    bool use_time_budget = false;     // wall-clock budgets break run-to-run determinism
    int max_iterations = 20000;
    double obstacle_radius = 0.4;     // m
    double v_max = 4.0;               // m/s, per trial
    double v_min = 0.5;               // m/s
    double goal_tolerance = 0.25;     // m
    double goal_bias = 0.05;
    double steer_step = 0.5;          // m
    std::uint64_t seed = 1;
};

/// Exact clearance test against a planning map at a fixed radius, accelerated
/// by a distance transform. Segments are sampled every kStep and checked at
/// radius + kStep / 2, so every point of an accepted segment (not only the
/// samples) has clearance >= radius.
class CollisionChecker {
public:
    static constexpr double kStep = 0.02;

    CollisionChecker(const OccupancyGrid& grid, double radius)
        : grid_(&grid), field_(grid), radius_(radius), check_radius_(radius + 0.5 * kStep) {}

    double radius() const { return radius_; }
    const DistanceField& field() const { return field_; }
    const OccupancyGrid& grid() const { return *grid_; }

    bool point_clear(const Vec2& p) const { return clear_at(p, check_radius_); }

    /// Exact test at an arbitrary radius.
    bool clear_at(const Vec2& p, double r) const {
        if (!grid_->contains(p)) return false;
        const CellIndex c = grid_->cell_of(p);
        const double slack = (p - grid_->cell_center(c)).norm();
        const double dc = field_.at(c.col, c.row);
        if (dc - slack >= r) return true;
        if (dc + slack < r) return false;
        return is_clear(*grid_, p, r);
    }

    bool segment_clear(const Vec2& a, const Vec2& b) const {
        const double len = (b - a).norm();
        const int n = std::max(1, static_cast<int>(std::ceil(len / kStep)));
        for (int i = 0; i <= n; ++i)
            if (!point_clear(a + (b - a) * (static_cast<double>(i) / n))) return false;
        return true;
    }

    bool path_clear(const PathPolyline& p) const {
        for (std::size_t i = 1; i < p.waypoints.size(); ++i)
            if (!segment_clear(p.waypoints[i - 1], p.waypoints[i])) return false;
        return p.waypoints.size() != 1 || point_clear(p.waypoints.front());
    }

private:
    const OccupancyGrid* grid_;
    DistanceField field_;
    double radius_;
    double check_radius_;
};

struct RrtNode {
    Vec2 pos;
    int parent = -1;
    bool seeded = false;
};

struct RrtResult {
    PathPolyline path;
    std::vector<RrtNode> tree;
    int iterations = 0;
    int seeded_vertices = 0;
};

namespace detail {

/// Truncated, re-rooted copy of the previous raw path: vertices after the one
/// nearest to `start`, kept while each edge stays collision-free.
inline std::vector<Vec2> warm_start_chain(const PathPolyline& prev, const Vec2& start, const CollisionChecker& cc) {
    std::vector<Vec2> chain;
    if (prev.waypoints.size() < 2) return chain;
    std::size_t nearest = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < prev.waypoints.size(); ++i) {
        const double d = (prev.waypoints[i] - start).squaredNorm();
        if (d < best) {
            best = d;
            nearest = i;
        }
    }
    Vec2 last = start;
    for (std::size_t i = nearest + 1; i < prev.waypoints.size(); ++i) {
        if (!cc.segment_clear(last, prev.waypoints[i])) break;
        chain.push_back(prev.waypoints[i]);
        last = prev.waypoints[i];
    }
    return chain;
}

inline PathPolyline trace(const std::vector<RrtNode>& tree, int leaf) {
    PathPolyline p;
    for (int i = leaf; i >= 0; i = tree[static_cast<std::size_t>(i)].parent) p.waypoints.push_back(tree[static_cast<std::size_t>(i)].pos);
    std::reverse(p.waypoints.begin(), p.waypoints.end());
    return p;
}

}  // namespace detail

/// Goal-biased RRT with uniform sampling over the map extent. If `prev` is
/// given, its collision-free remainder seeds the tree as a chain from the
/// root; when that chain already reaches the goal it is returned directly.
inline RrtResult rrt_plan_detailed(const CollisionChecker& cc, const Vec2& start, const Vec2& goal,
                                   const std::optional<PathPolyline>& prev, const PlannerConfig& cfg) {
    if (!cc.point_clear(start)) throw Error(ErrorCode::StartInCollision, "start violates obstacle radius");
    const auto t0 = std::chrono::steady_clock::now();
    const OccupancyGrid& g = cc.grid();
    RrtResult res;
    auto& tree = res.tree;
    tree.push_back({start, -1, false});

    auto reached = [&](const Vec2& p) { return (p - goal).norm() <= cfg.goal_tolerance; };
    if (reached(start)) {
        res.path.waypoints = {start, goal};
        if ((goal - start).norm() < 1e-12) res.path.waypoints = {start, start + Vec2(1e-6, 0.0)};
        return res;
    }

    if (prev) {
        for (const Vec2& p : detail::warm_start_chain(*prev, start, cc)) {
            tree.push_back({p, static_cast<int>(tree.size()) - 1, true});
            ++res.seeded_vertices;
        }
        if (tree.size() > 1 && reached(tree.back().pos)) {
            res.path = detail::trace(tree, static_cast<int>(tree.size()) - 1);
            return res;
        }
    }

    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const Vec2 lo = g.origin(), hi = g.extent_max();
    for (int it = 0; it < cfg.max_iterations; ++it) {
        res.iterations = it + 1;
        if (cfg.use_time_budget &&
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() > cfg.max_time)
            break;
        Vec2 sample;
        if (unit(rng) < cfg.goal_bias) {
            sample = goal;
        } else {
            const double sx = lo.x() + unit(rng) * (hi.x() - lo.x());
            const double sy = lo.y() + unit(rng) * (hi.y() - lo.y());
            sample = Vec2(sx, sy);
        }
        int nearest = 0;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < tree.size(); ++i) {
            const double d = (tree[i].pos - sample).squaredNorm();
            if (d < best) {
                best = d;
                nearest = static_cast<int>(i);
            }
        }
        const Vec2 from = tree[static_cast<std::size_t>(nearest)].pos;
        const Vec2 dir = sample - from;
        const double len = dir.norm();
        if (len < 1e-9) continue;
        const Vec2 to = len <= cfg.steer_step ? sample : Vec2(from + dir * (cfg.steer_step / len));
        if (!cc.segment_clear(from, to)) continue;
        tree.push_back({to, nearest, false});
        const int leaf = static_cast<int>(tree.size()) - 1;
        if ((to - goal).norm() <= cfg.steer_step && (to - goal).norm() > 1e-12 && cc.segment_clear(to, goal)) {
            tree.push_back({goal, leaf, false});
            res.path = detail::trace(tree, leaf + 1);
            return res;
        }
        if (reached(to)) {
            res.path = detail::trace(tree, leaf);
            return res;
        }
    }
    throw Error(ErrorCode::NoPathFound, "RRT exhausted its budget");
}

inline PathPolyline rrt_plan(const PlanningMap& map, const Vec2& start, const Vec2& goal,
                             const std::optional<PathPolyline>& prev, const PlannerConfig& cfg) {
    const CollisionChecker cc(map.grid, cfg.obstacle_radius);
    return rrt_plan_detailed(cc, start, goal, prev, cfg).path;
}

/// Greedy shortcutting: from each kept vertex jump to the farthest later
/// vertex that is directly reachable.
inline PathPolyline prune(const PathPolyline& p, const CollisionChecker& cc) {
    const auto& w = p.waypoints;
    if (w.size() <= 2) return p;
    PathPolyline out;
    std::size_t i = 0;
    out.waypoints.push_back(w[0]);
    while (i + 1 < w.size()) {
        std::size_t next = i + 1;
        for (std::size_t j = w.size() - 1; j > i + 1; --j)
            if (cc.segment_clear(w[i], w[j])) {
                next = j;
                break;
            }
        out.waypoints.push_back(w[next]);
        i = next;
    }
    return out;
}

inline PathPolyline prune(const PathPolyline& p, const PlanningMap& map, double radius) {
    const CollisionChecker cc(map.grid, radius);
    return prune(p, cc);
}

/// Smoothing that only accepts fillets keeping the obstacle radius.
inline SmoothPath smooth_g2cbs(const PathPolyline& p, const CollisionChecker& cc) {
    SmoothingOptions opt;
    opt.max_deviation = cc.radius();
    opt.point_valid = [&cc](const Vec2& q) { return cc.point_clear(q); };
    opt.check_step = CollisionChecker::kStep;
    return smooth_g2cbs(p, opt);
}

}  // namespace ompnav
