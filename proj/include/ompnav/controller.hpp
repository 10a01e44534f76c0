#pragma once
// The receding-horizon controller: one plan() call per planning tick runs
// RRT -> prune -> smooth -> speed profile -> horizon point -> transcription
// -> TVLQR; command() is called at the control rate with the latest schedule.

#include "ompnav/planner.hpp"
#include "ompnav/trajopt.hpp"
#include "ompnav/tvlqr.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>

namespace ompnav {

struct ControllerConfig {
    PlannerConfig planner;
    TranscriptionConfig transcription;
    CostMatrices cost;
    /// Horizon times tried in order when the transcription fails. The
    /// transcription's own duration budget stays at transcription.horizon.
    std::array<double, 4> horizon_ladder{2.0, 1.5, 1.0, 0.5};
    /// Planning radii tried in order when the robot already violates a larger one.
    std::array<double, 3> rrt_radius_ladder{0.4, 0.3, 0.25};
    double min_transcription_radius = 0.2;
};

enum class PlanStatus { Ok, StartInCollision, NoPath, Infeasible };

inline const char* to_string(PlanStatus s) {
    switch (s) {
        case PlanStatus::Ok: return "ok";
        case PlanStatus::StartInCollision: return "start_in_collision";
        case PlanStatus::NoPath: return "no_path";
        case PlanStatus::Infeasible: return "infeasible";
    }
    return "?";
}

struct PlanOutcome {
    PlanStatus status = PlanStatus::NoPath;
    std::optional<HorizonPoint> horizon;
    double horizon_time = 0.0;
    double rrt_radius = 0.0;
    double transcription_radius = 0.0;
    int rrt_iterations = 0;
};

class RecedingHorizonController {
public:
    explicit RecedingHorizonController(ControllerConfig cfg = {}) : cfg_(std::move(cfg)), solver_(cfg_.transcription) {}

    const ControllerConfig& config() const { return cfg_; }
    const GainSchedule& schedule() const { return schedule_; }
    bool has_schedule() const { return !schedule_.empty(); }
    const std::optional<PathPolyline>& previous_path() const { return prev_raw_; }

    /// Replans from `x` at time `now`. On any failure the previous schedule
    /// stays active.
    PlanOutcome plan(const RobotState& x, const PlanningMap& map, const Vec2& goal, double now, std::uint64_t seed) {
        PlanOutcome out;
        const Vec2 p = x.position();
        if (!map.grid.contains(p)) {
            out.status = PlanStatus::StartInCollision;
            return out;
        }
        std::optional<CollisionChecker> cc;
        for (double r : cfg_.rrt_radius_ladder) {
            cc.emplace(map.grid, r);
            if (cc->point_clear(p)) {
                out.rrt_radius = r;
                break;
            }
            cc.reset();
        }
        if (!cc) {
            out.status = PlanStatus::StartInCollision;
            return out;
        }
        PlannerConfig pc = cfg_.planner;
        pc.obstacle_radius = out.rrt_radius;
        pc.seed = seed;
        RrtResult rrt;
        try {
            rrt = rrt_plan_detailed(*cc, p, goal, prev_raw_, pc);
        } catch (const Error& e) {
            out.status = e.code() == ErrorCode::StartInCollision ? PlanStatus::StartInCollision : PlanStatus::NoPath;
            return out;
        }
        out.rrt_iterations = rrt.iterations;
        prev_raw_ = rrt.path;

        const PathPolyline pruned = prune(rrt.path, *cc);
        const SmoothPath sp = smooth_g2cbs(pruned, *cc);
        const TimedPath tp(sp, velocity_profile(sp, pc.v_max, pc.v_min));

        TranscriptionConfig tc = cfg_.transcription;
        tc.limits.v_max = pc.v_max;
        const double start_clear = clearance(map.grid, p);
        tc.obstacle_radius = std::min(tc.obstacle_radius, start_clear - 0.01);
        out.transcription_radius = tc.obstacle_radius;
        if (tc.obstacle_radius < cfg_.min_transcription_radius) {
            out.status = PlanStatus::StartInCollision;
            return out;
        }
        solver_ = TranscriptionSolver(tc);

        out.status = PlanStatus::Infeasible;
        for (double h : cfg_.horizon_ladder) {
            const HorizonPoint hp = horizon_point(tp, 0.0, h);
            if (!out.horizon) {
                out.horizon = hp;
                out.horizon_time = h;
            }
            const RobotState target{hp.position.x(), hp.position.y(), hp.speed, hp.heading, 0.0};
            try {
                const TranscriptionResult res = solver_.solve(x, target, map.grid, cc->field());
                schedule_ = compute_gain_schedule(res.trajectory, tc.vehicle, cfg_.cost);
                schedule_start_ = now;
                out.horizon = hp;
                out.horizon_time = h;
                out.status = PlanStatus::Ok;
                break;
            } catch (const Error&) {
            }
        }
        return out;
    }

    /// Tracking command at time `now`; zero input before the first schedule.
    ControlInput command(const RobotState& x, double now) const {
        if (schedule_.empty()) return {};
        return apply_control(schedule_, x, now - schedule_start_, cfg_.transcription.vehicle,
                             cfg_.transcription.limits);
    }

private:
    ControllerConfig cfg_;
    TranscriptionSolver solver_;
    std::optional<PathPolyline> prev_raw_;
    GainSchedule schedule_;
    double schedule_start_ = 0.0;
};

}  // namespace ompnav
