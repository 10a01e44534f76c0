#pragma once
// Ground-truth world: a rectangle of bounds and a list of wall segments.
//
// JSON form:
//   {"schema": "ompnav.environment/1",
//    "bounds": [xmin, ymin, xmax, ymax],
//    "walls":  [[x1, y1, x2, y2], ...]}

#include "ompnav/gridmap.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <queue>
#include <string>
#include <vector>

namespace ompnav {

inline constexpr const char* kEnvironmentSchema = "ompnav.environment/1";

struct Segment {
    Vec2 a;
    Vec2 b;
};

struct Environment {
    Vec2 lo = Vec2::Zero();
    Vec2 hi = Vec2::Zero();
    std::vector<Segment> walls;

    bool inside(const Vec2& p) const {
        return p.x() >= lo.x() && p.y() >= lo.y() && p.x() <= hi.x() && p.y() <= hi.y();
    }

    void validate() const {
        if (!(hi.x() > lo.x() && hi.y() > lo.y())) throw Error(ErrorCode::ScenarioInvalid, "empty bounds");
        for (const Segment& s : walls) {
            if (!s.a.allFinite() || !s.b.allFinite()) throw Error(ErrorCode::ScenarioInvalid, "non-finite wall");
            if (!inside(s.a) || !inside(s.b)) throw Error(ErrorCode::ScenarioInvalid, "wall outside bounds");
        }
    }

    /// Distance to the nearest wall, +inf with no walls.
    double distance(const Vec2& p) const {
        double best = std::numeric_limits<double>::infinity();
        for (const Segment& s : walls) best = std::min(best, point_segment_distance(p, s.a, s.b));
        return best;
    }

    /// Nearest hit of the ray origin + t * dir (unit dir), t in (0, max_t].
    std::optional<double> ray_cast(const Vec2& origin, const Vec2& dir, double max_t) const {
        double best = std::numeric_limits<double>::infinity();
        for (const Segment& s : walls) {
            const Vec2 e = s.b - s.a;
            const double denom = cross2(dir, e);
            if (std::abs(denom) < 1e-15) continue;
            const Vec2 w = s.a - origin;
            const double t = cross2(w, e) / denom;
            const double u = cross2(w, dir) / denom;
            if (t > 0.0 && u >= 0.0 && u <= 1.0) best = std::min(best, t);
        }
        if (best <= max_t) return best;
        return std::nullopt;
    }
};

inline nlohmann::json to_json(const Environment& env) {
    nlohmann::json j;
    j["schema"] = kEnvironmentSchema;
    j["bounds"] = {env.lo.x(), env.lo.y(), env.hi.x(), env.hi.y()};
    j["walls"] = nlohmann::json::array();
    for (const Segment& s : env.walls) j["walls"].push_back({s.a.x(), s.a.y(), s.b.x(), s.b.y()});
    return j;
}

inline Environment environment_from_json(const nlohmann::json& j) {
    try {
        if (j.at("schema").get<std::string>() != kEnvironmentSchema)
            throw Error(ErrorCode::ScenarioInvalid, "unsupported environment schema");
        Environment env;
        const auto b = j.at("bounds").get<std::vector<double>>();
        if (b.size() != 4) throw Error(ErrorCode::ScenarioInvalid, "bounds needs 4 numbers");
        env.lo = Vec2(b[0], b[1]);
        env.hi = Vec2(b[2], b[3]);
        for (const auto& w : j.at("walls")) {
            const auto v = w.get<std::vector<double>>();
            if (v.size() != 4) throw Error(ErrorCode::ScenarioInvalid, "wall needs 4 numbers");
            env.walls.push_back({Vec2(v[0], v[1]), Vec2(v[2], v[3])});
        }
        env.validate();
        return env;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ScenarioInvalid, std::string("environment json: ") + e.what());
    }
}

inline Environment load_environment(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error(ErrorCode::ScenarioInvalid, "cannot open " + path);
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ScenarioInvalid, std::string("environment json: ") + e.what());
    }
    return environment_from_json(j);
}

inline void save_environment(const std::string& path, const Environment& env) {
    std::ofstream os(path);
    if (!os) throw Error(ErrorCode::Io, "cannot open " + path);
    os << to_json(env).dump(2) << "\n";
}

/// Empty grid covering the environment bounds (plus `pad` metres) at `res`.
inline OccupancyGrid grid_for(const Environment& env, double res = kDefaultResolution, double pad = 0.0,
                              Cell fill = Cell::Unknown) {
    const Vec2 lo = env.lo - Vec2::Constant(pad);
    const Vec2 ext = env.hi - env.lo + Vec2::Constant(2.0 * pad);
    return OccupancyGrid(static_cast<int>(std::ceil(ext.x() / res - 1e-9)),
                         static_cast<int>(std::ceil(ext.y() / res - 1e-9)), res, lo, fill);
}

/// Marks every cell a wall passes through as Occupied.
inline void rasterize_walls(const Environment& env, OccupancyGrid& g) {
    const double step = 0.25 * g.resolution();
    for (const Segment& s : env.walls) {
        const double len = (s.b - s.a).norm();
        const int n = std::max(1, static_cast<int>(std::ceil(len / step)));
        for (int i = 0; i <= n; ++i) {
            const CellIndex c = g.cell_of(s.a + (s.b - s.a) * (static_cast<double>(i) / n));
            if (g.in_bounds(c)) g.set(c, Cell::Occupied);
        }
    }
}

/// Ground-truth map: walls Occupied, cells 4-connected to `seed` without
/// crossing a wall Free, everything else Unknown.
inline OccupancyGrid ground_truth_grid(const Environment& env, const OccupancyGrid& like, const Vec2& seed) {
    OccupancyGrid g(like.width(), like.height(), like.resolution(), like.origin(), Cell::Unknown);
    rasterize_walls(env, g);
    const CellIndex s = g.cell_of(seed);
    if (!g.in_bounds(s) || g.at(s) != Cell::Unknown) return g;
    std::queue<CellIndex> q;
    g.set(s, Cell::Free);
    q.push(s);
    const int dc[4] = {1, -1, 0, 0}, dr[4] = {0, 0, 1, -1};
    while (!q.empty()) {
        const CellIndex c = q.front();
        q.pop();
        for (int k = 0; k < 4; ++k) {
            const CellIndex n{c.col + dc[k], c.row + dr[k]};
            if (!g.in_bounds(n) || g.at(n) != Cell::Unknown) continue;
            g.set(n, Cell::Free);
            q.push(n);
        }
    }
    return g;
}

}  // namespace ompnav
