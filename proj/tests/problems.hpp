#pragma once
// Transcription problems that are feasible by construction: a random input
// sequence is rolled out from a random start, its end state becomes the
// target, and an optional obstacle is placed near the straight chord but clear
// of the rolled-out motion. Shared by the unit tests and the acceptance binary.

#include "ompnav/trajopt.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace problems {

using namespace ompnav;

struct Problem {
    RobotState start;
    RobotState target;
    Trajectory reference;  // the rollout that proves feasibility
    PlanningMap map;
};

enum class Kind { Open, SingleObstacle };

inline Problem feasible(std::uint64_t seed, Kind kind, int knots = 10, double dt = 0.2) {
    std::mt19937_64 rng(seed);
    auto uni = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
    const VehicleLimits lim;
    const VehicleParams veh;
    Problem p;
    for (;;) {
        p.start = {0.0, 0.0, uni(1.0, 2.5), uni(-std::numbers::pi, std::numbers::pi), uni(-0.1, 0.1)};
        Trajectory tr;
        tr.dt = dt;
        tr.states.push_back(p.start.vec());
        bool ok = true;
        for (int k = 0; k + 1 < knots && ok; ++k) {
            const InputVec u(uni(-1.0, 1.0), uni(-0.5, 0.5));
            tr.inputs.push_back(u);
            tr.states.push_back(rk4_step(tr.states.back(), u, dt, veh));
            const StateVec& s = tr.states.back();
            ok = s[kV] > lim.v_min + 0.1 && s[kV] < lim.v_max - 0.1 && std::abs(s[kDelta]) < lim.delta_max - 0.02;
        }
        if (!ok) continue;
        p.reference = tr;
        p.target = RobotState::from(tr.states.back());
        break;
    }
    OccupancyGrid g(320, 320, 0.05, Vec2(-8.0, -8.0), Cell::Free);
    if (kind == Kind::SingleObstacle) {
        // One disc as close to the start-target chord midpoint as the rollout allows.
        constexpr double kDisc = 0.3, kGap = 0.5;
        std::vector<Vec2> trace;
        for (int k = 0; k + 1 < p.reference.knot_count(); ++k)
            for (int j = 0; j < 20; ++j) {
                const StateVec s = interval_point(p.reference, k, j / 20.0, veh);
                trace.emplace_back(s[kX], s[kY]);
            }
        trace.push_back(p.target.position());
        const Vec2 mid = 0.5 * (p.start.position() + p.target.position());
        Vec2 best = mid;
        double best_d = std::numeric_limits<double>::infinity();
        for (int i = -40; i <= 40; ++i)
            for (int j = -40; j <= 40; ++j) {
                const Vec2 c = mid + 0.05 * Vec2(i, j);
                bool far = true;
                for (const Vec2& q : trace) far &= (q - c).norm() - kDisc >= kGap + 0.05;
                if (far && (c - mid).norm() < best_d) best_d = (c - mid).norm(), best = c;
            }
        for (int r = 0; r < g.height(); ++r)
            for (int c = 0; c < g.width(); ++c)
                if ((g.cell_center({c, r}) - best).norm() <= kDisc) g.set(c, r, Cell::Occupied);
    }
    p.map = PlanningMap(g);
    return p;
}

/// The twenty certification problems: seeds 1..10 open space, 11..20 one obstacle.
inline Problem certification_problem(int i) {
    return feasible(static_cast<std::uint64_t>(i), i <= 10 ? Kind::Open : Kind::SingleObstacle);
}

}  // namespace problems
