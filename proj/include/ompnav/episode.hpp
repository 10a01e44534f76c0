#pragma once
// Closed-loop episode: ground-truth bicycle at the base tick, mapping +
// prediction + fusion at the map rate, replanning at the plan rate and TVLQR
// commands at the control rate.

#include "ompnav/controller.hpp"
#include "ompnav/predictor.hpp"
#include "ompnav/scenario.hpp"
#include "ompnav/sensorsim.hpp"
#include "ompnav/unet.hpp"

#include <cstdio>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace ompnav {

struct RunMetrics {
    bool success = false;
    bool collision = false;
    bool timeout = false;
    double time_to_goal = 0.0;  // s; episode end time when not successful
    double peak_speed = 0.0;
    double min_clearance = std::numeric_limits<double>::infinity();
    int replan_count = 0;        // successful plans
    int plan_failures = 0;
    int horizon_in_unknown = 0;  // plans whose horizon point lay in Unknown observed space
    double distance = 0.0;
};

struct LogSample {
    double t;
    RobotState x;
    ControlInput u;
};

struct PlanEvent {
    double t;
    PlanStatus status;
    Vec2 horizon = Vec2::Zero();
    bool has_horizon = false;
    bool horizon_unknown = false;
};

struct MapEvent {
    double t;
    RobotState pose;
};

struct EpisodeLog {
    std::string name;
    PredictionMode mode = PredictionMode::None;
    double v_max = 0.0;
    std::vector<LogSample> samples;  // one per control tick
    std::vector<PlanEvent> plans;
    std::vector<MapEvent> maps;
    RunMetrics metrics;
};

struct EpisodeResult {
    RunMetrics metrics;
    EpisodeLog log;
    OccupancyGrid final_map;
};

struct EpisodeOptions {
    ControllerConfig controller;
    SensorConfig sensor;
    MapperConfig mapper;
    double map_padding = 0.5;  // m of grid around the environment bounds
    /// Scans at the start heading plus 90, 180 and 270 degrees before the
    /// first plan, so the start pose is not boxed in by unseen walls.
    bool initial_survey = true;
};

/// Observed-map frame for an environment: padded bounds, origin shifted a
/// quarter cell so lattice-aligned walls fall inside cells, not on edges.
inline OccupancyGrid episode_grid(const Environment& env, double pad, double res = kDefaultResolution) {
    OccupancyGrid g = grid_for(env, res, pad);
    return OccupancyGrid(g.width(), g.height(), res, g.origin() + Vec2::Constant(0.25 * res), Cell::Unknown);
}

inline std::unique_ptr<Predictor> make_predictor(const ScenarioConfig& sc) {
    switch (sc.mode) {
        case PredictionMode::None: return nullptr;
        case PredictionMode::Baseline: return std::make_unique<BaselinePredictor>();
        case PredictionMode::Learned: return std::make_unique<UNetPredictor>(load_weights(sc.weights));
    }
    return nullptr;
}

/// Observed map with the prediction around `center` fused into its Unknown cells.
inline PlanningMap planning_map(const OccupancyGrid& observed, const Vec2& center, const Predictor* predictor) {
    if (!predictor) return PlanningMap(observed);
    const OccupancyGrid sub = extract_submap(observed, center, kPredictorInputSize * observed.resolution());
    const OccupancyGrid pred = postprocess(predictor->predict(sub));
    PlanningMap fused = fuse(observed, pred);
    // Keep the observed frame: anything predicted outside it is dropped.
    if (fused.grid.width() == observed.width() && fused.grid.height() == observed.height()) return fused;
    PlanningMap out(observed);
    const Vec2 off = (observed.origin() - fused.grid.origin()) / observed.resolution();
    const int dc = static_cast<int>(std::lround(off.x())), dr = static_cast<int>(std::lround(off.y()));
    for (int r = 0; r < observed.height(); ++r)
        for (int c = 0; c < observed.width(); ++c) {
            const std::size_t i = fused.grid.index(c + dc, r + dr);
            out.grid.set(c, r, fused.grid.cells()[i]);
            out.provenance[out.grid.index(c, r)] = fused.provenance[i];
        }
    return out;
}

inline EpisodeResult run_episode(const ScenarioConfig& sc, const EpisodeOptions& opt = {}) {
    sc.validate();
    const std::unique_ptr<Predictor> predictor = make_predictor(sc);
    const Rates& rates = sc.rates;
    const double dt = 1.0 / rates.tick_hz;
    const VehicleParams& vp = opt.controller.transcription.vehicle;

    ControllerConfig ccfg = opt.controller;
    ccfg.planner.v_max = sc.v_max;
    RecedingHorizonController ctrl(ccfg);
    SensorConfig sensor = opt.sensor;
    sensor.depth_noise_sigma = sc.depth_noise;
    Mapper mapper(episode_grid(sc.env, opt.map_padding), sensor, opt.mapper);
    std::mt19937_64 sensor_rng(sc.seed * 0x9E3779B97F4A7C15ull + 1);

    EpisodeResult res;
    EpisodeLog& log = res.log;
    log.name = sc.name;
    log.mode = sc.mode;
    log.v_max = sc.v_max;
    RunMetrics& m = res.metrics;

    RobotState x = sc.start;
    ControlInput u{};
    PlanningMap pmap(mapper.grid());
    const long max_ticks = static_cast<long>(std::ceil(sc.timeout * rates.tick_hz));
    int plan_index = 0;
    bool done = false;
    for (long tick = 0; tick <= max_ticks && !done; ++tick) {
        const double t = tick * dt;
        const double clr = sc.env.distance(x.position());
        m.min_clearance = std::min(m.min_clearance, clr);
        if (clr < sc.body_radius) {
            m.collision = true;
            m.time_to_goal = t;
            break;
        }
        if ((x.position() - sc.goal).norm() <= sc.goal_tolerance) {
            m.success = true;
            m.time_to_goal = t;
            break;
        }
        if (tick == max_ticks) {
            m.timeout = true;
            m.time_to_goal = t;
            break;
        }
        if (tick == 0 && opt.initial_survey)
            for (int k = 1; k < 4; ++k) {
                RobotState look = x;
                look.theta = wrap_angle(x.theta + k * std::numbers::pi / 2);
                mapper.observe(sc.env, look, sc.depth_noise > 0.0 ? &sensor_rng : nullptr);
            }
        if (tick % rates.map_every() == 0) {
            mapper.observe(sc.env, x, sc.depth_noise > 0.0 ? &sensor_rng : nullptr);
            pmap = planning_map(mapper.grid(), x.position(), predictor.get());
            log.maps.push_back({t, x});
        }
        if (tick % rates.plan_every() == 0) {
            const std::uint64_t seed = sc.seed * 1000003ull + static_cast<std::uint64_t>(plan_index++);
            const PlanOutcome po = ctrl.plan(x, pmap, sc.goal, t, seed);
            PlanEvent ev{t, po.status};
            if (po.horizon) {
                ev.has_horizon = true;
                ev.horizon = po.horizon->position;
                const OccupancyGrid& obs = mapper.grid();
                ev.horizon_unknown = obs.contains(ev.horizon) && obs.at(obs.cell_of(ev.horizon)) == Cell::Unknown;
            }
            if (po.status == PlanStatus::Ok) {
                ++m.replan_count;
                if (ev.horizon_unknown) ++m.horizon_in_unknown;
            } else {
                ++m.plan_failures;
            }
            log.plans.push_back(ev);
        }
        if (tick % rates.control_every() == 0) {
            u = ctrl.command(x, t);
            log.samples.push_back({t, x, u});
        }
        StateVec next = rk4_step(x.vec(), u.vec(), dt, vp);
        next[kV] = std::max(0.0, next[kV]);
        next[kDelta] = std::clamp(next[kDelta], -ctrl.config().transcription.limits.delta_max,
                                  ctrl.config().transcription.limits.delta_max);
        const RobotState nx = RobotState::from(next);
        m.distance += (nx.position() - x.position()).norm();
        m.peak_speed = std::max(m.peak_speed, nx.v);
        x = nx;
    }
    log.samples.push_back({m.time_to_goal, x, u});
    log.metrics = m;
    res.final_map = mapper.grid();
    return res;
}

// ---------------------------------------------------------------------------
// Log files

/// Trajectory CSV: t, x, y, v, theta, delta, u0, u1, mode.
inline void write_log_csv(std::ostream& os, const EpisodeLog& log) {
    os << "t,x,y,v,theta,delta,u0,u1,mode\n";
    char buf[512];
    for (const LogSample& s : log.samples) {
        std::snprintf(buf, sizeof buf, "%.6f,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%s\n", s.t, s.x.x, s.x.y, s.x.v,
                      s.x.theta, s.x.delta, s.u.u0, s.u.u1, to_string(log.mode));
        os << buf;
    }
}

inline void write_plan_events_csv(std::ostream& os, const EpisodeLog& log) {
    os << "t,status,horizon_x,horizon_y,horizon_unknown\n";
    char buf[256];
    for (const PlanEvent& e : log.plans) {
        std::snprintf(buf, sizeof buf, "%.6f,%s,%.9g,%.9g,%d\n", e.t, to_string(e.status),
                      e.has_horizon ? e.horizon.x() : std::nan(""), e.has_horizon ? e.horizon.y() : std::nan(""),
                      e.horizon_unknown ? 1 : 0);
        os << buf;
    }
}

inline std::string log_to_string(const EpisodeLog& log) {
    std::ostringstream os;
    write_log_csv(os, log);
    write_plan_events_csv(os, log);
    return os.str();
}

struct ParsedSample {
    double t, x, y, v, theta, delta, u0, u1;
    std::string mode;
};

/// Reads the trajectory CSV back.
inline std::vector<ParsedSample> read_log_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != "t,x,y,v,theta,delta,u0,u1,mode")
        throw Error(ErrorCode::InvalidArgument, "not a trajectory log");
    std::vector<ParsedSample> out;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        ParsedSample s;
        std::string f;
        double* fields[8] = {&s.t, &s.x, &s.y, &s.v, &s.theta, &s.delta, &s.u0, &s.u1};
        for (double* d : fields) {
            if (!std::getline(ls, f, ',')) throw Error(ErrorCode::InvalidArgument, "short log row");
            *d = std::stod(f);
        }
        if (!std::getline(ls, s.mode)) throw Error(ErrorCode::InvalidArgument, "missing mode column");
        out.push_back(s);
    }
    return out;
}

}  // namespace ompnav
