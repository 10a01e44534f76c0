#pragma once
// Kinematic bicycle with acceleration and steering-rate inputs:
//
//   x' = v cos(theta)    y' = v sin(theta)    v' = u0
//   theta' = v tan(delta) / L                 delta' = u1
//
// plus a classical RK4 step and its exact (chain-rule) Jacobians.

#include "ompnav/core.hpp"

#include <Eigen/Core>

#include <cmath>

namespace ompnav {

using StateVec = Eigen::Matrix<double, 5, 1>;
using InputVec = Eigen::Matrix<double, 2, 1>;
using StateMat = Eigen::Matrix<double, 5, 5>;
using InputMat = Eigen::Matrix<double, 5, 2>;

enum StateIndex : int { kX = 0, kY = 1, kV = 2, kTheta = 3, kDelta = 4 };

struct RobotState {
    double x = 0.0;
    double y = 0.0;
    double v = 0.0;
    double theta = 0.0;
    double delta = 0.0;

    Vec2 position() const { return {x, y}; }

    StateVec vec() const { return (StateVec() << x, y, v, theta, delta).finished(); }
    static RobotState from(const StateVec& s) { return {s[0], s[1], s[2], s[3], s[4]}; }

    friend bool operator==(const RobotState&, const RobotState&) = default;
};

struct ControlInput {
    double u0 = 0.0;  // longitudinal acceleration, m/s^2
    double u1 = 0.0;  // steering rate, rad/s

    InputVec vec() const { return {u0, u1}; }
    static ControlInput from(const InputVec& u) { return {u[0], u[1]}; }

    friend bool operator==(const ControlInput&, const ControlInput&) = default;
};

struct VehicleParams {
    double wheelbase = 0.33;  // 1/10-scale race car
};

/// State and input limits used by the optimizer and the tracking controller.
struct VehicleLimits {
    double accel_max = 2.5;
    double steer_rate_max = 1.5;
    double v_min = 0.5;
    double v_max = 4.0;
    double delta_max = 0.3;

    ControlInput clamp(const ControlInput& u) const {
        return {std::clamp(u.u0, -accel_max, accel_max), std::clamp(u.u1, -steer_rate_max, steer_rate_max)};
    }
};

inline StateVec dynamics(const StateVec& s, const InputVec& u, const VehicleParams& p) {
    const double v = s[kV], th = s[kTheta], d = s[kDelta];
    StateVec ds;
    ds << v * std::cos(th), v * std::sin(th), u[0], v * std::tan(d) / p.wheelbase, u[1];
    return ds;
}

inline StateVec dynamics(const RobotState& s, const ControlInput& u, const VehicleParams& p) {
    return dynamics(s.vec(), u.vec(), p);
}

/// Continuous-time Jacobian of the dynamics w.r.t. the state.
inline StateMat dynamics_jacobian_state(const StateVec& s, const VehicleParams& p) {
    const double v = s[kV], th = s[kTheta], d = s[kDelta];
    const double c = std::cos(th), sn = std::sin(th), t = std::tan(d);
    StateMat a = StateMat::Zero();
    a(kX, kV) = c;
    a(kX, kTheta) = -v * sn;
    a(kY, kV) = sn;
    a(kY, kTheta) = v * c;
    a(kTheta, kV) = t / p.wheelbase;
    a(kTheta, kDelta) = v * (1.0 + t * t) / p.wheelbase;
    return a;
}

inline InputMat dynamics_jacobian_input() {
    InputMat b = InputMat::Zero();
    b(kV, 0) = 1.0;
    b(kDelta, 1) = 1.0;
    return b;
}

/// One classical RK4 step with the input held constant over dt.
inline StateVec rk4_step(const StateVec& s, const InputVec& u, double dt, const VehicleParams& p) {
    const StateVec k1 = dynamics(s, u, p);
    const StateVec k2 = dynamics(s + 0.5 * dt * k1, u, p);
    const StateVec k3 = dynamics(s + 0.5 * dt * k2, u, p);
    const StateVec k4 = dynamics(s + dt * k3, u, p);
    return s + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

inline RobotState integrate_rk4(const RobotState& s, const ControlInput& u, double dt, const VehicleParams& p) {
    return RobotState::from(rk4_step(s.vec(), u.vec(), dt, p));
}

struct StepJacobians {
    StateVec next;
    StateMat wrt_state;
    InputMat wrt_input;
    StateVec wrt_dt;
};

/// RK4 step together with d(next)/d(state), d(next)/d(input), d(next)/d(dt),
/// propagated stage by stage.
inline StepJacobians rk4_step_jacobians(const StateVec& s, const InputVec& u, double dt, const VehicleParams& p) {
    const InputMat bc = dynamics_jacobian_input();
    const StateMat eye = StateMat::Identity();

    const StateVec s1 = s;
    const StateVec k1 = dynamics(s1, u, p);
    const StateMat a1 = dynamics_jacobian_state(s1, p);
    const StateMat k1x = a1;
    const InputMat k1u = bc;
    const StateVec k1t = StateVec::Zero();

    const StateVec s2 = s + 0.5 * dt * k1;
    const StateVec k2 = dynamics(s2, u, p);
    const StateMat a2 = dynamics_jacobian_state(s2, p);
    const StateMat k2x = a2 * (eye + 0.5 * dt * k1x);
    const InputMat k2u = a2 * (0.5 * dt * k1u) + bc;
    const StateVec k2t = a2 * (0.5 * k1 + 0.5 * dt * k1t);

    const StateVec s3 = s + 0.5 * dt * k2;
    const StateVec k3 = dynamics(s3, u, p);
    const StateMat a3 = dynamics_jacobian_state(s3, p);
    const StateMat k3x = a3 * (eye + 0.5 * dt * k2x);
    const InputMat k3u = a3 * (0.5 * dt * k2u) + bc;
    const StateVec k3t = a3 * (0.5 * k2 + 0.5 * dt * k2t);

    const StateVec s4 = s + dt * k3;
    const StateVec k4 = dynamics(s4, u, p);
    const StateMat a4 = dynamics_jacobian_state(s4, p);
    const StateMat k4x = a4 * (eye + dt * k3x);
    const InputMat k4u = a4 * (dt * k3u) + bc;
    const StateVec k4t = a4 * (k3 + dt * k3t);

    const StateVec sum = k1 + 2.0 * k2 + 2.0 * k3 + k4;
    StepJacobians j;
    j.next = s + dt / 6.0 * sum;
    j.wrt_state = eye + dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
    j.wrt_input = dt / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
    j.wrt_dt = sum / 6.0 + dt / 6.0 * (k1t + 2.0 * k2t + 2.0 * k3t + k4t);
    return j;
}

}  // namespace ompnav
