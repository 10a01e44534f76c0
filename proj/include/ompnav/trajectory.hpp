#pragma once
// Knot-point trajectory shared by the transcription solver and the tracker.

#include "ompnav/dynamics.hpp"

#include <cstdio>
#include <ostream>
#include <vector>

namespace ompnav {

/// N states, N-1 inputs, one shared knot interval. Between knots the nominal
/// motion is the RK4 step of the held input over the elapsed time.
struct Trajectory {
    std::vector<StateVec> states;
    std::vector<InputVec> inputs;
    double dt = 0.0;

    int knot_count() const { return static_cast<int>(states.size()); }
    double duration() const { return states.empty() ? 0.0 : (knot_count() - 1) * dt; }
    double knot_time(int k) const { return k * dt; }

    /// Interval index for time t, clamped to the schedule.
    int interval_at(double t) const {
        if (inputs.empty() || dt <= 0.0) return 0;
        const int k = static_cast<int>(std::floor(t / dt));
        return std::clamp(k, 0, static_cast<int>(inputs.size()) - 1);
    }

    StateVec state_at(double t, const VehicleParams& p) const {
        if (inputs.empty()) return states.front();
        if (t <= 0.0) return states.front();
        if (t >= duration()) return states.back();
        const int k = interval_at(t);
        const double tau = t - k * dt;
        if (tau <= 0.0) return states[k];
        return rk4_step(states[k], inputs[k], tau, p);
    }

    InputVec input_at(double t) const {
        if (inputs.empty()) return InputVec::Zero();
        return inputs[interval_at(t)];
    }
};

/// CSV columns: k, t, x, y, v, theta, delta, u0, u1, dt. The final knot has
/// no input; its u0/u1 fields are empty.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& tr) {
    os << "k,t,x,y,v,theta,delta,u0,u1,dt\n";
    char buf[512];
    for (int k = 0; k < tr.knot_count(); ++k) {
        const StateVec& s = tr.states[k];
        std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,", k, tr.knot_time(k), s[0], s[1], s[2],
                      s[3], s[4]);
        os << buf;
        if (k < static_cast<int>(tr.inputs.size())) {
            std::snprintf(buf, sizeof buf, "%.9g,%.9g,", tr.inputs[k][0], tr.inputs[k][1]);
            os << buf;
        } else {
            os << ",,";
        }
        std::snprintf(buf, sizeof buf, "%.9g\n", tr.dt);
        os << buf;
    }
}

}  // namespace ompnav
