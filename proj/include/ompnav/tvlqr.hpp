#pragma once
// Time-varying LQR along a knot trajectory: discrete linearization of the RK4
// step, backward Riccati recursion, and the 50 Hz tracking law
//
//   u(t, x) = u0(t_k) - K(t_k) (x - x0(t))
//
// with gains held over each knot interval.

#include "ompnav/dynamics.hpp"
#include "ompnav/trajectory.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cstdio>
#include <ostream>
#include <vector>

namespace ompnav {

struct CostMatrices {
    StateMat Q = StateMat::Identity() * 10.0;
    StateMat Qf = (StateVec() << 1.0, 1.0, 5.0, 1.0, 1.0).finished().asDiagonal();
    Eigen::Matrix2d R = Eigen::Matrix2d::Identity();
};

template <int NX, int NU>
struct LinearizationT {
    std::vector<Eigen::Matrix<double, NX, NX>> A;
    std::vector<Eigen::Matrix<double, NX, NU>> B;
};
using Linearization = LinearizationT<5, 2>;

template <int NX, int NU>
struct RiccatiResultT {
    std::vector<Eigen::Matrix<double, NU, NX>> K;  // one per interval
    std::vector<Eigen::Matrix<double, NX, NX>> S;  // one per knot, S.back() = Qf
};

/// Discrete Jacobians (A_k, B_k) of the RK4 step at every interval.
inline Linearization linearize(const Trajectory& tr, const VehicleParams& p) {
    Linearization lin;
    lin.A.reserve(tr.inputs.size());
    lin.B.reserve(tr.inputs.size());
    for (std::size_t k = 0; k < tr.inputs.size(); ++k) {
        const StepJacobians j = rk4_step_jacobians(tr.states[k], tr.inputs[k], tr.dt, p);
        lin.A.push_back(j.wrt_state);
        lin.B.push_back(j.wrt_input);
    }
    return lin;
}

/// Backward recursion from S_N = Qf. Each S_k is symmetrized after the update.
template <int NX, int NU>
RiccatiResultT<NX, NU> riccati_backward(const LinearizationT<NX, NU>& lin, const Eigen::Matrix<double, NX, NX>& Q,
                                        const Eigen::Matrix<double, NX, NX>& Qf,
                                        const Eigen::Matrix<double, NU, NU>& R) {
    if (lin.A.size() != lin.B.size()) throw Error(ErrorCode::ShapeMismatch, "A/B sequence length mismatch");
    const std::size_t n = lin.A.size();
    RiccatiResultT<NX, NU> out;
    out.K.resize(n);
    out.S.resize(n + 1);
    out.S[n] = Qf;
    for (std::size_t i = n; i-- > 0;) {
        const auto& A = lin.A[i];
        const auto& B = lin.B[i];
        const auto& Snext = out.S[i + 1];
        const Eigen::Matrix<double, NU, NU> inner = R + B.transpose() * Snext * B;
        Eigen::LDLT<Eigen::Matrix<double, NU, NU>> ldlt(inner);
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || (ldlt.vectorD().array() <= 1e-14).any())
            throw Error(ErrorCode::SingularInnerMatrix, "R + B'SB is not positive definite");
        const Eigen::Matrix<double, NU, NX> K = ldlt.solve(B.transpose() * Snext * A);
        Eigen::Matrix<double, NX, NX> S = Q + A.transpose() * Snext * A - A.transpose() * Snext * B * K;
        out.S[i] = 0.5 * (S + S.transpose());
        out.K[i] = K;
    }
    return out;
}

struct GainSchedule {
    Trajectory nominal;
    std::vector<Eigen::Matrix<double, 2, 5>> K;
    std::vector<StateMat> S;

    bool empty() const { return nominal.states.empty(); }
    std::vector<double> knot_times() const {
        std::vector<double> t(nominal.states.size());
        for (std::size_t k = 0; k < t.size(); ++k) t[k] = nominal.knot_time(static_cast<int>(k));
        return t;
    }
};

inline GainSchedule riccati_backward(const Trajectory& nominal, const Linearization& lin, const CostMatrices& cost) {
    auto r = riccati_backward<5, 2>(lin, cost.Q, cost.Qf, cost.R);
    return {nominal, std::move(r.K), std::move(r.S)};
}

inline GainSchedule compute_gain_schedule(const Trajectory& nominal, const VehicleParams& p,
                                          const CostMatrices& cost = {}) {
    return riccati_backward(nominal, linearize(nominal, p), cost);
}

/// Tracking command at schedule time t (clamped to the schedule span). The
/// reference state follows the nominal motion inside the interval; gain and
/// feed-forward input are held. Heading and steering errors are wrapped.
inline ControlInput apply_control(const GainSchedule& gs, const RobotState& x, double t, const VehicleParams& p,
                                  const VehicleLimits& limits = {}) {
    if (gs.empty()) throw Error(ErrorCode::InvalidArgument, "empty gain schedule");
    const Trajectory& tr = gs.nominal;
    if (gs.K.empty()) return limits.clamp(ControlInput{});
    const double tc = std::clamp(t, 0.0, tr.duration());
    const int k = tr.interval_at(tc);
    const StateVec ref = tr.state_at(tc, p);
    StateVec err = x.vec() - ref;
    err[kTheta] = wrap_angle(err[kTheta]);
    err[kDelta] = wrap_angle(err[kDelta]);
    const InputVec u = tr.inputs[k] - gs.K[k] * err;
    return limits.clamp(ControlInput::from(u));
}

inline void write_gains_csv(std::ostream& os, const GainSchedule& gs) {
    os << "k,t";
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 5; ++c) os << ",K" << r << c;
    os << "\n";
    char buf[64];
    for (std::size_t k = 0; k < gs.K.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%zu,%.9g", k, gs.nominal.knot_time(static_cast<int>(k)));
        os << buf;
        for (int r = 0; r < 2; ++r)
            for (int c = 0; c < 5; ++c) {
                std::snprintf(buf, sizeof buf, ",%.9g", gs.K[k](r, c));
                os << buf;
            }
        os << "\n";
    }
}

}  // namespace ompnav
