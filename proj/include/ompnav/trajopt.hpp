#pragma once
// Stage two of the controller: variable-interval direct transcription.
//
// Decision variables are the knot states x_1..x_{N-1} (x_0 is the measured
// start), the inputs u_0..u_{N-2} and one shared interval dt. The problem
//
//   minimize    sum_k u_k' Rc u_k + dt
//   subject to  x_{k+1} = rk4(x_k, u_k, dt)                 (defects)
//               clearance >= r at knots and interior points (obstacles)
//               v_min <= v <= v_max, |delta| <= delta_max   (state box)
//               |u0| <= a_max, |u1| <= steer_rate_max        (input box)
//               |x_{N-1} - x_target| <= delta_f              (terminal box)
//               dt_min <= dt <= H / (N - 1)
//
// is solved with an augmented Lagrangian on the defect and clearance
// constraints and a projected Levenberg-Marquardt inner loop that keeps every
// box constraint satisfied exactly. Obstacle distances inside the solver come
// from a bilinear distance field with a safety margin; the returned trajectory
// is certified against the exact grid clearance afterwards.

#include "ompnav/dynamics.hpp"
#include "ompnav/gridmap.hpp"
#include "ompnav/trajectory.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace ompnav {

struct TranscriptionConfig {
    int knots = 10;
    double horizon = 2.0;  // s
    double dt_min = 0.01;  // s
    Eigen::Vector2d input_weights{0.1, 0.1};  // diagonal of Rc
    StateVec terminal_box = (StateVec() << 0.1, 0.1, 0.1, 0.25, 100.0).finished();
    double obstacle_radius = 0.35;  // m
    int interior_samples = 3;       // clearance points per interval, besides the knots
    VehicleLimits limits;
    VehicleParams vehicle;

    // Solver tuning.
    int max_outer = 25;
    int max_inner = 40;
    double penalty_init = 10.0;
    double penalty_growth = 10.0;
    double penalty_max = 1e10;
    double defect_tol = 1e-8;
    double clearance_margin = 0.05;  // extra radius used inside the solver
    double bound_margin = 1e-3;      // state boxes are tightened by this much

    double dt_max() const { return horizon / (knots - 1); }
};

struct SolverLog {
    /// Augmented-Lagrangian merit after each accepted inner step, per outer iteration.
    std::vector<std::vector<double>> merit;
    /// Original objective and worst constraint violation at the end of each outer iteration.
    std::vector<double> objective;
    std::vector<double> violation;
};

struct TranscriptionResidues {
    double max_defect = 0.0;
    double max_bound_violation = 0.0;
    double terminal_excess = 0.0;
    double min_clearance = std::numeric_limits<double>::infinity();
};

struct TranscriptionResult {
    Trajectory trajectory;
    double objective = 0.0;
    SolverLog log;
    int iterations = 0;
};

class TranscriptionInfeasible : public Error {
public:
    TranscriptionInfeasible(const std::string& what, TranscriptionResidues r, SolverLog l = {})
        : Error(ErrorCode::Infeasible, what), residues(r), log(std::move(l)) {}
    TranscriptionResidues residues;
    SolverLog log;
};

/// Interior sample of interval k: the RK4 step of the held input over tau * dt.
inline StateVec interval_point(const Trajectory& tr, int k, double tau, const VehicleParams& p) {
    return rk4_step(tr.states[static_cast<std::size_t>(k)], tr.inputs[static_cast<std::size_t>(k)], tau * tr.dt, p);
}

/// True iff some knot or interior sample (samples_per_interval per interval)
/// has exact clearance below radius.
inline bool check_collision(const Trajectory& tr, const OccupancyGrid& grid, double radius, const VehicleParams& p = {},
                            int samples_per_interval = 20) {
    auto blocked = [&](const StateVec& s) {
        const Vec2 q(s[kX], s[kY]);
        if (!grid.contains(q)) return false;
        return !is_clear(grid, q, radius);
    };
    for (const StateVec& s : tr.states)
        if (blocked(s)) return true;
    for (int k = 0; k + 1 < tr.knot_count(); ++k)
        for (int j = 1; j < samples_per_interval; ++j)
            if (blocked(interval_point(tr, k, static_cast<double>(j) / samples_per_interval, p))) return true;
    return false;
}

inline bool check_collision(const Trajectory& tr, const PlanningMap& map, double radius, const VehicleParams& p = {},
                            int samples_per_interval = 20) {
    return check_collision(tr, map.grid, radius, p, samples_per_interval);
}

/// Smallest exact clearance over knots and interior samples. With a distance
/// field, points whose lower bound already exceeds `cap` report that bound
/// instead of the exact value.
inline double min_clearance(const Trajectory& tr, const OccupancyGrid& grid, const VehicleParams& p = {},
                            int samples_per_interval = 20, const DistanceField* field = nullptr,
                            double cap = std::numeric_limits<double>::infinity()) {
    double best = std::numeric_limits<double>::infinity();
    auto visit = [&](const StateVec& s) {
        const Vec2 q(s[kX], s[kY]);
        if (!grid.contains(q)) return;
        if (field) {
            const double lb = field->lower_bound(q);
            if (lb >= cap) {
                best = std::min(best, lb);
                return;
            }
        }
        best = std::min(best, clearance(grid, q));
    };
    for (const StateVec& s : tr.states) visit(s);
    for (int k = 0; k + 1 < tr.knot_count(); ++k)
        for (int j = 1; j < samples_per_interval; ++j)
            visit(interval_point(tr, k, static_cast<double>(j) / samples_per_interval, p));
    return best;
}

/// Re-simulates the inputs from knot 0 and reports the largest mismatch.
inline double max_defect(const Trajectory& tr, const VehicleParams& p) {
    double worst = 0.0;
    for (int k = 0; k + 1 < tr.knot_count(); ++k) {
        const StateVec next = rk4_step(tr.states[k], tr.inputs[k], tr.dt, p);
        worst = std::max(worst, (next - tr.states[k + 1]).cwiseAbs().maxCoeff());
    }
    return worst;
}

class TranscriptionSolver {
public:
    explicit TranscriptionSolver(TranscriptionConfig cfg = {}) : cfg_(std::move(cfg)) {
        if (cfg_.knots < 2) throw Error(ErrorCode::InvalidArgument, "need at least two knots");
        n_int_ = cfg_.knots - 1;
        n_state_vars_ = 5 * n_int_;
        n_vars_ = n_state_vars_ + 2 * n_int_ + 1;
    }

    const TranscriptionConfig& config() const { return cfg_; }

    TranscriptionResult solve(const RobotState& start, const RobotState& target_in, const OccupancyGrid& grid,
                              const DistanceField& field, const std::optional<Trajectory>& guess = std::nullopt) const {
        grid_ = &grid;
        field_ = &field;
        x0_ = start.vec();
        target_ = target_in.vec();
        target_[kTheta] = start.theta + wrap_angle(target_in.theta - start.theta);
        r_safe_ = cfg_.obstacle_radius + cfg_.clearance_margin;
        setup_bounds();

        // Quick rejection: the whole terminal position box is blocked.
        const Vec2 tp(target_[kX], target_[kY]);
        const double box_reach = std::hypot(cfg_.terminal_box[kX], cfg_.terminal_box[kY]);
        if (grid.contains(tp) && clearance(grid, tp) + box_reach < cfg_.obstacle_radius)
            throw TranscriptionInfeasible("target lies inside the obstacle radius", {});
        for (int i = 0; i < n_vars_; ++i)
            if (lo_[i] > hi_[i]) throw TranscriptionInfeasible("empty bound box", {});

        Eigen::VectorXd z = guess ? pack(*guess) : warm_start();
        project(z);

        const int n_eq = 5 * n_int_;
        const int n_ineq = n_int_ * (1 + cfg_.interior_samples);
        Eigen::VectorXd lam_eq = Eigen::VectorXd::Zero(n_eq);
        Eigen::VectorXd lam_in = Eigen::VectorXd::Zero(n_ineq);
        double rho = cfg_.penalty_init;

        TranscriptionResult result;
        double prev_violation = std::numeric_limits<double>::infinity();
        int total_iters = 0;
        for (int outer = 0; outer < cfg_.max_outer; ++outer) {
            std::vector<double> merits;
            total_iters += inner_solve(z, lam_eq, lam_in, rho, merits);
            result.log.merit.push_back(std::move(merits));

            Constraints c = evaluate(z, false);
            const double eq_viol = c.eq.cwiseAbs().maxCoeff();
            const double in_viol = std::max(0.0, c.ineq.size() ? c.ineq.maxCoeff() : 0.0);
            const double violation = std::max(eq_viol, in_viol);
            result.log.objective.push_back(objective(z));
            result.log.violation.push_back(violation);

            lam_eq += rho * c.eq;
            lam_in = (lam_in + rho * c.ineq).cwiseMax(0.0);
            if (eq_viol <= cfg_.defect_tol && in_viol <= 1e-6) break;
            if (violation > 0.25 * prev_violation) rho = std::min(rho * cfg_.penalty_growth, cfg_.penalty_max);
            prev_violation = violation;
        }

        result.iterations = total_iters;
        result.trajectory = certify(z, result);
        result.objective = objective(z);
        return result;
    }

    TranscriptionResult solve(const RobotState& start, const RobotState& target, const PlanningMap& map,
                              const std::optional<Trajectory>& guess = std::nullopt) const {
        const DistanceField field(map.grid);
        return solve(start, target, map.grid, field, guess);
    }

    /// Straight-line initialization: positions and headings interpolated,
    /// speed ramped linearly, zero inputs, dt at its upper bound.
    Eigen::VectorXd warm_start() const {
        Eigen::VectorXd z(n_vars_);
        for (int k = 1; k <= n_int_; ++k) {
            const double a = static_cast<double>(k) / n_int_;
            StateVec s = (1.0 - a) * x0_ + a * target_;
            s[kDelta] = 0.0;
            z.segment<5>(state_offset(k)) = s;
        }
        for (int k = 0; k < n_int_; ++k) z.segment<2>(input_offset(k)).setZero();
        z[n_vars_ - 1] = cfg_.dt_max();
        return z;
    }

private:
    struct Constraints {
        Eigen::VectorXd eq;    // defects, 5 per interval
        Eigen::VectorXd ineq;  // r_safe - distance <= 0
        Eigen::MatrixXd eq_jac;
        Eigen::MatrixXd ineq_jac;
    };

    int state_offset(int k) const { return 5 * (k - 1); }  // k in 1..N-1
    int input_offset(int k) const { return n_state_vars_ + 2 * k; }
    int dt_index() const { return n_vars_ - 1; }

    StateVec state(const Eigen::VectorXd& z, int k) const {
        return k == 0 ? x0_ : StateVec(z.segment<5>(state_offset(k)));
    }
    InputVec input(const Eigen::VectorXd& z, int k) const { return z.segment<2>(input_offset(k)); }

    Eigen::VectorXd pack(const Trajectory& tr) const {
        if (tr.knot_count() != cfg_.knots) throw Error(ErrorCode::ShapeMismatch, "guess has wrong knot count");
        Eigen::VectorXd z(n_vars_);
        for (int k = 1; k <= n_int_; ++k) z.segment<5>(state_offset(k)) = tr.states[k];
        for (int k = 0; k < n_int_; ++k) z.segment<2>(input_offset(k)) = tr.inputs[k];
        z[dt_index()] = tr.dt;
        return z;
    }

    void setup_bounds() const {
        const double inf = std::numeric_limits<double>::infinity();
        const double m = cfg_.bound_margin;
        const VehicleLimits& L = cfg_.limits;
        lo_ = Eigen::VectorXd::Constant(n_vars_, -inf);
        hi_ = Eigen::VectorXd::Constant(n_vars_, inf);
        for (int k = 1; k <= n_int_; ++k) {
            const int o = state_offset(k);
            lo_[o + kV] = L.v_min + m;
            hi_[o + kV] = L.v_max - m;
            lo_[o + kDelta] = -L.delta_max + m;
            hi_[o + kDelta] = L.delta_max - m;
        }
        const int o = state_offset(n_int_);
        for (int i = 0; i < 5; ++i) {
            const double half = std::max(cfg_.terminal_box[i] - m, 0.0);
            lo_[o + i] = std::max(lo_[o + i], target_[i] - half);
            hi_[o + i] = std::min(hi_[o + i], target_[i] + half);
        }
        for (int k = 0; k < n_int_; ++k) {
            const int io = input_offset(k);
            lo_[io] = -L.accel_max;
            hi_[io] = L.accel_max;
            lo_[io + 1] = -L.steer_rate_max;
            hi_[io + 1] = L.steer_rate_max;
        }
        lo_[dt_index()] = cfg_.dt_min;
        hi_[dt_index()] = cfg_.dt_max();
    }

    void project(Eigen::VectorXd& z) const { z = z.cwiseMax(lo_).cwiseMin(hi_); }

    double objective(const Eigen::VectorXd& z) const {
        double f = z[dt_index()];
        for (int k = 0; k < n_int_; ++k) {
            const InputVec u = input(z, k);
            f += cfg_.input_weights[0] * u[0] * u[0] + cfg_.input_weights[1] * u[1] * u[1];
        }
        return f;
    }

    Constraints evaluate(const Eigen::VectorXd& z, bool with_jacobian) const {
        const int n_eq = 5 * n_int_;
        const int per = 1 + cfg_.interior_samples;
        const int n_ineq = n_int_ * per;
        Constraints c;
        c.eq.resize(n_eq);
        c.ineq.resize(n_ineq);
        if (with_jacobian) {
            c.eq_jac = Eigen::MatrixXd::Zero(n_eq, n_vars_);
            c.ineq_jac = Eigen::MatrixXd::Zero(n_ineq, n_vars_);
        }
        const double dt = z[dt_index()];
        for (int k = 0; k < n_int_; ++k) {
            const StateVec xk = state(z, k);
            const InputVec uk = input(z, k);
            const StepJacobians j = rk4_step_jacobians(xk, uk, dt, cfg_.vehicle);
            c.eq.segment<5>(5 * k) = state(z, k + 1) - j.next;
            if (with_jacobian) {
                c.eq_jac.block<5, 5>(5 * k, state_offset(k + 1)) = StateMat::Identity();
                if (k > 0) c.eq_jac.block<5, 5>(5 * k, state_offset(k)) = -j.wrt_state;
                c.eq_jac.block<5, 2>(5 * k, input_offset(k)) = -j.wrt_input;
                c.eq_jac.block<5, 1>(5 * k, dt_index()) = -j.wrt_dt;
            }
            // Knot k+1 and interior samples of interval k.
            const int row0 = per * k;
            {
                Vec2 grad;
                const Vec2 p(z[state_offset(k + 1) + kX], z[state_offset(k + 1) + kY]);
                c.ineq[row0] = r_safe_ - field_->interpolate(p, &grad);
                if (with_jacobian) {
                    c.ineq_jac(row0, state_offset(k + 1) + kX) = -grad.x();
                    c.ineq_jac(row0, state_offset(k + 1) + kY) = -grad.y();
                }
            }
            for (int s = 1; s <= cfg_.interior_samples; ++s) {
                const double tau = static_cast<double>(s) / (cfg_.interior_samples + 1);
                const int row = row0 + s;
                Vec2 grad;
                if (!with_jacobian) {
                    const StateVec q = rk4_step(xk, uk, tau * dt, cfg_.vehicle);
                    c.ineq[row] = r_safe_ - field_->interpolate(Vec2(q[kX], q[kY]), &grad);
                    continue;
                }
                const StepJacobians js = rk4_step_jacobians(xk, uk, tau * dt, cfg_.vehicle);
                c.ineq[row] = r_safe_ - field_->interpolate(Vec2(js.next[kX], js.next[kY]), &grad);
                const Eigen::RowVector2d gneg = -grad.transpose();
                if (k > 0) c.ineq_jac.block<1, 5>(row, state_offset(k)) = gneg * js.wrt_state.topRows<2>();
                c.ineq_jac.block<1, 2>(row, input_offset(k)) = gneg * js.wrt_input.topRows<2>();
                c.ineq_jac(row, dt_index()) = tau * (gneg * js.wrt_dt.head<2>())(0);
            }
        }
        return c;
    }

    double merit(const Eigen::VectorXd& z, const Eigen::VectorXd& lam_eq, const Eigen::VectorXd& lam_in,
                 double rho) const {
        const Constraints c = evaluate(z, false);
        double m = objective(z) + lam_eq.dot(c.eq) + 0.5 * rho * c.eq.squaredNorm();
        for (int i = 0; i < c.ineq.size(); ++i) {
            const double t = std::max(0.0, lam_in[i] + rho * c.ineq[i]);
            m += (t * t - lam_in[i] * lam_in[i]) / (2.0 * rho);
        }
        return m;
    }

    // Projected Levenberg-Marquardt on the merit; returns iterations used.
    int inner_solve(Eigen::VectorXd& z, const Eigen::VectorXd& lam_eq, const Eigen::VectorXd& lam_in, double rho,
                    std::vector<double>& merits) const {
        double mu = 1e-6;
        double phi = merit(z, lam_eq, lam_in, rho);
        merits.push_back(phi);
        int it = 0;
        for (; it < cfg_.max_inner; ++it) {
            const Constraints c = evaluate(z, true);
            // Residual form: merit = dt + |r|^2 + const.
            Eigen::VectorXd grad = Eigen::VectorXd::Zero(n_vars_);
            Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n_vars_, n_vars_);
            grad[dt_index()] = 1.0;
            for (int k = 0; k < n_int_; ++k)
                for (int i = 0; i < 2; ++i) {
                    const int idx = input_offset(k) + i;
                    grad[idx] += 2.0 * cfg_.input_weights[i] * z[idx];
                    H(idx, idx) += 2.0 * cfg_.input_weights[i];
                }
            const Eigen::VectorXd eq_r = c.eq + lam_eq / rho;
            grad += rho * c.eq_jac.transpose() * eq_r;
            H += rho * c.eq_jac.transpose() * c.eq_jac;
            for (int i = 0; i < c.ineq.size(); ++i) {
                const double t = lam_in[i] + rho * c.ineq[i];
                if (t <= 0.0) continue;
                const Eigen::RowVectorXd row = c.ineq_jac.row(i);
                grad += t * row.transpose();
                H += rho * row.transpose() * row;
            }

            // Variables pinned at a bound with the gradient pushing outward stay fixed.
            std::vector<int> free;
            free.reserve(static_cast<std::size_t>(n_vars_));
            double pg_norm = 0.0;
            for (int i = 0; i < n_vars_; ++i) {
                const double eps = 1e-12 * std::max(1.0, std::abs(z[i]));
                const bool at_lo = z[i] <= lo_[i] + eps && grad[i] > 0.0;
                const bool at_hi = z[i] >= hi_[i] - eps && grad[i] < 0.0;
                if (at_lo || at_hi) continue;
                free.push_back(i);
                pg_norm = std::max(pg_norm, std::abs(grad[i]));
            }
            if (free.empty() || pg_norm < 1e-10) break;

            const int nf = static_cast<int>(free.size());
            Eigen::MatrixXd Hf(nf, nf);
            Eigen::VectorXd gf(nf);
            for (int a = 0; a < nf; ++a) {
                gf[a] = grad[free[a]];
                for (int b = 0; b < nf; ++b) Hf(a, b) = H(free[a], free[b]);
            }
            bool accepted = false;
            for (int attempt = 0; attempt < 12 && !accepted; ++attempt) {
                Eigen::MatrixXd Hd = Hf;
                for (int a = 0; a < nf; ++a) Hd(a, a) += mu * (1.0 + Hf(a, a));
                const Eigen::VectorXd step = Hd.ldlt().solve(-gf);
                Eigen::VectorXd trial = z;
                for (int a = 0; a < nf; ++a) trial[free[a]] += step[a];
                project(trial);
                const double phi_new = merit(trial, lam_eq, lam_in, rho);
                const double pred = grad.dot(trial - z);
                if (std::isfinite(phi_new) && phi_new <= phi + 1e-4 * std::min(pred, 0.0) && phi_new <= phi) {
                    const double change = (trial - z).cwiseAbs().maxCoeff();
                    z = trial;
                    const double gain = phi - phi_new;
                    phi = phi_new;
                    merits.push_back(phi);
                    mu = std::max(mu * 0.3, 1e-12);
                    accepted = true;
                    if (change < 1e-12 || gain <= 1e-14 * std::max(1.0, std::abs(phi))) return it + 1;
                } else {
                    mu *= 10.0;
                }
            }
            if (!accepted) break;
        }
        return it;
    }

    Trajectory certify(const Eigen::VectorXd& z, const TranscriptionResult& result) const {
        TranscriptionResidues res;
        {
            const Constraints c = evaluate(z, false);
            res.max_defect = c.eq.cwiseAbs().maxCoeff();
        }
        Trajectory tr;
        tr.dt = z[dt_index()];
        tr.states.push_back(x0_);
        for (int k = 0; k < n_int_; ++k) {
            tr.inputs.push_back(input(z, k));
            tr.states.push_back(rk4_step(tr.states.back(), tr.inputs.back(), tr.dt, cfg_.vehicle));
        }
        const VehicleLimits& L = cfg_.limits;
        for (int k = 1; k < tr.knot_count(); ++k) {
            const StateVec& s = tr.states[k];
            res.max_bound_violation = std::max({res.max_bound_violation, L.v_min - s[kV], s[kV] - L.v_max,
                                                std::abs(s[kDelta]) - L.delta_max});
        }
        const StateVec& last = tr.states.back();
        for (int i = 0; i < 5; ++i) {
            double e = std::abs(last[i] - target_[i]);
            if (i == kTheta) e = std::abs(wrap_angle(last[i] - target_[i]));
            res.terminal_excess = std::max(res.terminal_excess, e - cfg_.terminal_box[i]);
        }
        res.min_clearance = min_clearance(tr, *grid_, cfg_.vehicle, 20, field_, cfg_.obstacle_radius + 1.0);
        const bool ok = res.max_defect <= 1e-4 && res.max_bound_violation <= 1e-8 && res.terminal_excess <= 0.0 &&
                        res.min_clearance >= cfg_.obstacle_radius;
        if (!ok) throw TranscriptionInfeasible("no feasible trajectory after " +
                                                   std::to_string(result.log.merit.size()) + " outer iterations",
                                               res, result.log);
        return tr;
    }

    TranscriptionConfig cfg_;
    int n_int_ = 0;
    int n_state_vars_ = 0;
    int n_vars_ = 0;

    // Per-solve problem data.
    mutable const OccupancyGrid* grid_ = nullptr;
    mutable const DistanceField* field_ = nullptr;
    mutable StateVec x0_;
    mutable StateVec target_;
    mutable double r_safe_ = 0.0;
    mutable Eigen::VectorXd lo_, hi_;
};

inline TranscriptionResult solve_transcription(const RobotState& start, const RobotState& target,
                                               const PlanningMap& map, const TranscriptionConfig& cfg = {}) {
    return TranscriptionSolver(cfg).solve(start, target, map);
}

}  // namespace ompnav
