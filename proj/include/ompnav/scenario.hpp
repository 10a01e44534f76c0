#pragma once
// Scenario description for closed-loop runs, its JSON form, and the
// procedural corridor generator.
//
// Scenario JSON (schema "ompnav.scenario/1"):
//   {"schema": "ompnav.scenario/1", "name": "...",
//    "environment": {...} | "environment_file": "env.json" | "corridor_seed": 7,
//    "start": [x, y, theta], "goal": [x, y],        (optional with corridor_seed)
//    "v_max": 3.0, "prediction": "none" | "baseline" | "learned", "weights": "net.ompw",
//    "seed": 1, "timeout": 60, "depth_noise": 0.0,
//    "rates": {"tick_hz": 600, "map_hz": 3, "plan_hz": 5, "control_hz": 50}}

#include "ompnav/dynamics.hpp"
#include "ompnav/environment.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace ompnav {

inline constexpr const char* kScenarioSchema = "ompnav.scenario/1";

/// Initial forward speed: the velocity lower bound, so the first trajectory can steer.
inline constexpr double kStartSpeed = 0.5;

enum class PredictionMode { None, Baseline, Learned };

inline const char* to_string(PredictionMode m) {
    switch (m) {
        case PredictionMode::None: return "none";
        case PredictionMode::Baseline: return "baseline";
        case PredictionMode::Learned: return "learned";
    }
    return "none";
}

inline PredictionMode parse_prediction_mode(const std::string& s) {
    if (s == "none") return PredictionMode::None;
    if (s == "baseline") return PredictionMode::Baseline;
    if (s == "learned") return PredictionMode::Learned;
    throw Error(ErrorCode::ScenarioInvalid, "unknown prediction mode '" + s + "'");
}

struct Rates {
    int tick_hz = 600;
    int map_hz = 3;
    int plan_hz = 5;
    int control_hz = 50;

    int map_every() const { return tick_hz / map_hz; }
    int plan_every() const { return tick_hz / plan_hz; }
    int control_every() const { return tick_hz / control_hz; }
};

struct ScenarioConfig {
    std::string name = "scenario";
    Environment env;
    RobotState start;
    Vec2 goal = Vec2::Zero();
    double v_max = 3.0;
    PredictionMode mode = PredictionMode::None;
    std::string weights;
    std::uint64_t seed = 1;
    Rates rates;
    double timeout = 60.0;         // s, simulated
    double goal_tolerance = 0.5;   // m
    double body_radius = 0.2;      // m, physical collision disk
    double depth_noise = 0.0;      // m

    void validate() const {
        env.validate();
        for (int hz : {rates.map_hz, rates.plan_hz, rates.control_hz})
            if (hz <= 0 || rates.tick_hz <= 0 || rates.tick_hz % hz != 0)
                throw Error(ErrorCode::ScenarioInvalid, "rates must divide the simulation tick");
        if (!env.inside(start.position())) throw Error(ErrorCode::ScenarioInvalid, "start outside bounds");
        if (!env.inside(goal)) throw Error(ErrorCode::ScenarioInvalid, "goal outside bounds");
        if (env.distance(start.position()) <= body_radius)
            throw Error(ErrorCode::ScenarioInvalid, "start intersects a wall");
        if (!(v_max > 0.5)) throw Error(ErrorCode::ScenarioInvalid, "v_max must exceed v_min = 0.5");
        if (!(timeout > 0.0)) throw Error(ErrorCode::ScenarioInvalid, "timeout must be positive");
        if (mode == PredictionMode::Learned && weights.empty())
            throw Error(ErrorCode::ScenarioInvalid, "learned prediction needs a weight file");
    }
};

// ---------------------------------------------------------------------------
// Corridor generator

enum class CorridorKind { Straight, LTurn, TJunction, Jog };

struct Rect {
    double x0, y0, x1, y1;
    bool contains(const Vec2& p) const { return p.x() > x0 && p.x() < x1 && p.y() > y0 && p.y() < y1; }
};

struct CorridorLayout {
    CorridorKind kind = CorridorKind::Straight;
    std::vector<Rect> free_space;
    Environment env;
    RobotState start;
    Vec2 goal;
};

namespace detail {

/// Walls along the boundary of a union of lattice-aligned rectangles,
/// merged into maximal straight runs.
inline std::vector<Segment> union_boundary(const std::vector<Rect>& rects, double step) {
    double x0 = 1e300, y0 = 1e300, x1 = -1e300, y1 = -1e300;
    for (const Rect& r : rects) {
        x0 = std::min(x0, r.x0);
        y0 = std::min(y0, r.y0);
        x1 = std::max(x1, r.x1);
        y1 = std::max(y1, r.y1);
    }
    const int nx = static_cast<int>(std::lround((x1 - x0) / step)) + 2;
    const int ny = static_cast<int>(std::lround((y1 - y0) / step)) + 2;
    const double ox = x0 - step, oy = y0 - step;
    auto inside = [&](int i, int j) {
        if (i < 0 || j < 0 || i >= nx || j >= ny) return false;
        const Vec2 c(ox + (i + 0.5) * step, oy + (j + 0.5) * step);
        for (const Rect& r : rects)
            if (r.contains(c)) return true;
        return false;
    };
    std::vector<Segment> out;
    // Horizontal edges: between cell (i, j-1) and (i, j), at y = oy + j * step.
    for (int j = 0; j <= ny; ++j) {
        int run = -1;
        for (int i = 0; i <= nx; ++i) {
            const bool edge = i < nx && inside(i, j - 1) != inside(i, j);
            if (edge && run < 0) run = i;
            if (!edge && run >= 0) {
                const double y = oy + j * step;
                out.push_back({Vec2(ox + run * step, y), Vec2(ox + i * step, y)});
                run = -1;
            }
        }
    }
    for (int i = 0; i <= nx; ++i) {
        int run = -1;
        for (int j = 0; j <= ny; ++j) {
            const bool edge = j < ny && inside(i - 1, j) != inside(i, j);
            if (edge && run < 0) run = j;
            if (!edge && run >= 0) {
                const double x = ox + i * step;
                out.push_back({Vec2(x, oy + run * step), Vec2(x, oy + j * step)});
                run = -1;
            }
        }
    }
    return out;
}

}  // namespace detail

/// Corridor network from a seed: straight, L-turn, T-junction or jog, widths
/// 1.5-2.5 m on a 0.25 m lattice, randomly rotated by a multiple of 90
/// degrees and mirrored. The start sits 1 m into the first leg facing along
/// it; the goal sits 1 m before the far end of the last leg.
inline CorridorLayout generate_corridor(std::uint64_t seed, std::optional<CorridorKind> kind = std::nullopt) {
    std::mt19937_64 rng(seed);
    auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    constexpr double q = 0.25;
    CorridorLayout L;
    L.kind = kind ? *kind : static_cast<CorridorKind>(pick(0, 3));
    const double w1 = q * pick(6, 10);
    const double w2 = q * pick(6, 10);
    std::vector<Rect> rects;
    Vec2 start(0.0, 1.0), goal;
    switch (L.kind) {
        case CorridorKind::Straight: {
            const double len = q * pick(40, 56);
            rects.push_back({-w1 / 2, 0.0, w1 / 2, len});
            goal = Vec2(0.0, len - 1.0);
            break;
        }
        case CorridorKind::LTurn: {
            const double l1 = q * pick(28, 40), l2 = q * pick(24, 36);
            rects.push_back({-w1 / 2, 0.0, w1 / 2, l1});
            rects.push_back({-w1 / 2, l1 - w2, w1 / 2 + l2, l1});
            goal = Vec2(w1 / 2 + l2 - 1.0, l1 - w2 / 2);
            break;
        }
        case CorridorKind::TJunction: {
            const double l1 = q * pick(28, 40), arm = q * pick(16, 28);
            rects.push_back({-w1 / 2, 0.0, w1 / 2, l1});
            rects.push_back({-w1 / 2 - arm, l1, w1 / 2 + arm, l1 + w2});
            goal = Vec2(w1 / 2 + arm - 1.0, l1 + w2 / 2);
            break;
        }
        case CorridorKind::Jog: {
            // Two opposite L-turns: the goal leg runs parallel to the first leg.
            const double l1 = q * pick(24, 36), side = q * pick(12, 24), l3 = q * pick(16, 28);
            rects.push_back({-w1 / 2, 0.0, w1 / 2, l1});
            rects.push_back({-w1 / 2, l1 - w2, w1 / 2 + side, l1});
            rects.push_back({w1 / 2 + side - w1, l1 - w2, w1 / 2 + side, l1 + l3});
            goal = Vec2(side, l1 + l3 - 1.0);
            break;
        }
    }
    // Mirror in x, then rotate by k * 90 degrees; both keep the lattice.
    const bool mirror = pick(0, 1) == 1;
    const int k = pick(0, 3);
    auto xf = [&](Vec2 p) {
        if (mirror) p.x() = -p.x();
        for (int i = 0; i < k; ++i) p = Vec2(-p.y(), p.x());
        return p;
    };
    double heading = std::numbers::pi / 2;
    if (mirror) heading = std::numbers::pi - heading;
    heading = wrap_angle(heading + k * std::numbers::pi / 2);
    std::vector<Rect> placed;
    for (const Rect& r : rects) {
        const Vec2 a = xf(Vec2(r.x0, r.y0)), b = xf(Vec2(r.x1, r.y1));
        placed.push_back({std::min(a.x(), b.x()), std::min(a.y(), b.y()), std::max(a.x(), b.x()),
                          std::max(a.y(), b.y())});
    }
    start = xf(start);
    goal = xf(goal);
    double mx = 1e300, my = 1e300, Mx = -1e300, My = -1e300;
    for (const Rect& r : placed) {
        mx = std::min(mx, r.x0);
        my = std::min(my, r.y0);
        Mx = std::max(Mx, r.x1);
        My = std::max(My, r.y1);
    }
    const Vec2 shift(1.0 - mx, 1.0 - my);
    for (Rect& r : placed) {
        r.x0 += shift.x();
        r.x1 += shift.x();
        r.y0 += shift.y();
        r.y1 += shift.y();
    }
    L.free_space = placed;
    L.env.lo = Vec2::Zero();
    L.env.hi = Vec2(Mx - mx + 2.0, My - my + 2.0);
    L.env.walls = detail::union_boundary(placed, q);
    L.start = RobotState{start.x() + shift.x(), start.y() + shift.y(), kStartSpeed, heading, 0.0};
    L.goal = goal + shift;
    return L;
}

inline ScenarioConfig corridor_scenario(std::uint64_t seed, double v_max, PredictionMode mode,
                                        std::optional<CorridorKind> kind = std::nullopt) {
    const CorridorLayout L = generate_corridor(seed, kind);
    ScenarioConfig sc;
    sc.name = "corridor-" + std::to_string(seed);
    sc.env = L.env;
    sc.start = L.start;
    sc.goal = L.goal;
    sc.v_max = v_max;
    sc.mode = mode;
    sc.seed = seed;
    return sc;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json(const ScenarioConfig& sc) {
    nlohmann::json j;
    j["schema"] = kScenarioSchema;
    j["name"] = sc.name;
    j["environment"] = to_json(sc.env);
    j["start"] = {sc.start.x, sc.start.y, sc.start.theta, sc.start.v};
    j["goal"] = {sc.goal.x(), sc.goal.y()};
    j["v_max"] = sc.v_max;
    j["prediction"] = to_string(sc.mode);
    if (!sc.weights.empty()) j["weights"] = sc.weights;
    j["seed"] = sc.seed;
    j["timeout"] = sc.timeout;
    j["depth_noise"] = sc.depth_noise;
    j["rates"] = {{"tick_hz", sc.rates.tick_hz},
                  {"map_hz", sc.rates.map_hz},
                  {"plan_hz", sc.rates.plan_hz},
                  {"control_hz", sc.rates.control_hz}};
    return j;
}

/// `base_dir` resolves relative environment and weight paths.
inline ScenarioConfig scenario_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
    try {
        if (j.at("schema").get<std::string>() != kScenarioSchema)
            throw Error(ErrorCode::ScenarioInvalid, "unsupported scenario schema");
        ScenarioConfig sc;
        sc.v_max = j.value("v_max", sc.v_max);
        sc.mode = parse_prediction_mode(j.value("prediction", std::string("none")));
        sc.seed = j.value("seed", sc.seed);
        if (j.contains("corridor_seed")) sc = corridor_scenario(j["corridor_seed"].get<std::uint64_t>(), sc.v_max, sc.mode);
        sc.seed = j.value("seed", sc.seed);
        sc.name = j.value("name", sc.name);
        if (j.contains("environment")) sc.env = environment_from_json(j["environment"]);
        if (j.contains("environment_file"))
            sc.env = load_environment((base_dir / j["environment_file"].get<std::string>()).string());
        if (j.contains("start")) {
            const auto s = j["start"].get<std::vector<double>>();
            if (s.size() != 3 && s.size() != 4) throw Error(ErrorCode::ScenarioInvalid, "start is [x, y, theta(, v)]");
            sc.start = RobotState{s[0], s[1], s.size() == 4 ? s[3] : kStartSpeed, s[2], 0.0};
        }
        if (j.contains("goal")) {
            const auto g = j["goal"].get<std::vector<double>>();
            if (g.size() != 2) throw Error(ErrorCode::ScenarioInvalid, "goal is [x, y]");
            sc.goal = Vec2(g[0], g[1]);
        }
        if (!j.contains("corridor_seed") && (!j.contains("start") || !j.contains("goal")))
            throw Error(ErrorCode::ScenarioInvalid, "scenario needs start and goal");
        if (j.contains("weights")) {
            const std::filesystem::path w = j["weights"].get<std::string>();
            sc.weights = (w.is_absolute() ? w : base_dir / w).string();
        }
        sc.timeout = j.value("timeout", sc.timeout);
        sc.depth_noise = j.value("depth_noise", sc.depth_noise);
        if (j.contains("rates")) {
            const auto& r = j["rates"];
            sc.rates.tick_hz = r.value("tick_hz", sc.rates.tick_hz);
            sc.rates.map_hz = r.value("map_hz", sc.rates.map_hz);
            sc.rates.plan_hz = r.value("plan_hz", sc.rates.plan_hz);
            sc.rates.control_hz = r.value("control_hz", sc.rates.control_hz);
        }
        sc.validate();
        return sc;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ScenarioInvalid, std::string("scenario json: ") + e.what());
    }
}

inline nlohmann::json read_json_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error(ErrorCode::ScenarioInvalid, "cannot open " + path);
    try {
        nlohmann::json j;
        is >> j;
        return j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ScenarioInvalid, path + ": " + e.what());
    }
}

inline ScenarioConfig load_scenario(const std::string& path) {
    return scenario_from_json(read_json_file(path), std::filesystem::path(path).parent_path());
}

}  // namespace ompnav
