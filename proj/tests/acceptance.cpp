// Acceptance gate: one PASS/FAIL line per criterion, tolerances pinned here.
// Exit status is nonzero if any criterion fails.

#include "problems.hpp"

#include "ompnav/ompnav.hpp"

#include <Eigen/LU>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

using namespace ompnav;

namespace {

// Pinned tolerances and budgets.
constexpr double kCircleTol = 1e-6;
constexpr double kCurvTol = 1e-6;
constexpr double kTimeTol = 1e-6;
constexpr double kDefectTol = 1e-4;
constexpr double kBoundSlack = 1e-8;
constexpr double kClearance = 0.35;
constexpr double kDareTol = 1e-6;
constexpr int kClosedLoopWins = 95;
constexpr int kNoneAt3Min = 19;
constexpr int kImprovementPp = 20;
const StateVec kTerminalBox = (StateVec() << 0.1, 0.1, 0.1, 0.25, 100.0).finished();

struct Outcome {
    bool pass = true;
    std::string detail;
};

int failures = 0;

void report(const char* name, double budget_s, const std::function<Outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (budget_s > 0 && secs >= budget_s) {
        o.pass = false;
        o.detail += " over budget";
    }
    failures += !o.pass;
    std::printf("%s %s (%.2f s) %s\n", o.pass ? "PASS" : "FAIL", name, secs, o.detail.c_str());
    std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

Outcome dynamics_oracle() {
    constexpr double L = 0.33;
    double worst = 0.0;
    for (double delta : {0.05, 0.15, 0.3, -0.2}) {
        const double v = 2.0, th0 = 0.4;
        StateVec s = (StateVec() << 0.3, -0.7, v, th0, delta).finished();
        for (int i = 0; i < 1000; ++i) s = rk4_step(s, InputVec::Zero(), 1e-3, {});
        const double w = v * std::tan(delta) / L;
        const double x = 0.3 + v / w * (std::sin(th0 + w) - std::sin(th0));
        const double y = -0.7 - v / w * (std::cos(th0 + w) - std::cos(th0));
        worst = std::max(worst, std::hypot(s[kX] - x, s[kY] - y));
    }
    return {worst <= kCircleTol, fmt("max position error %.3g m", worst)};
}

Outcome curvature_oracle() {
    const SmoothPath arc({PathSegment(ArcSegment{Vec2(1, -1), 2.0, 0.3, 4.0})});
    double worst = 0.0;
    for (int i = 0; i <= 1000; ++i) worst = std::max(worst, std::abs(curvature(arc, arc.length() * i / 1000) - 0.5));
    bool line_zero = true;
    const SmoothPath line({PathSegment(LineSegment{Vec2(0.1, 0.2), Vec2(-3.3, 7.9)})});
    for (int i = 0; i <= 1000; ++i) line_zero &= curvature(line, line.length() * i / 1000) == 0.0;
    return {worst <= kCurvTol && line_zero, fmt("arc |k-0.5| %.3g, line exact zero %s", worst, line_zero ? "yes" : "no")};
}

Outcome velocity_timing() {
    const SmoothPath line({PathSegment(LineSegment{Vec2(0, 0), Vec2(4, 0)})});
    const VelocityProfile vp = velocity_profile(line, 4.0, 0.5);
    const bool ends = vp.for_curvature(0.0) == 4.0 && vp.for_curvature(2.0) == 0.5;
    const TimedPath tp = time_parameterize(line, velocity_profile(line, 2.0, 0.5));
    const double err = std::abs(tp.duration() - 2.0);
    return {ends && err <= kTimeTol, fmt("endpoints exact %s, T = %.9f s", ends ? "yes" : "no", tp.duration())};
}

bool bitwise_equal(const Trajectory& a, const Trajectory& b) {
    if (a.knot_count() != b.knot_count() || a.inputs.size() != b.inputs.size()) return false;
    if (std::memcmp(&a.dt, &b.dt, sizeof a.dt) != 0) return false;
    for (int k = 0; k < a.knot_count(); ++k)
        if (std::memcmp(a.states[k].data(), b.states[k].data(), sizeof(double) * 5) != 0) return false;
    for (std::size_t k = 0; k < a.inputs.size(); ++k)
        if (std::memcmp(a.inputs[k].data(), b.inputs[k].data(), sizeof(double) * 2) != 0) return false;
    return true;
}

// Exhaustive distance to the nearest Occupied cell centre.
double scan_clearance(const OccupancyGrid& g, const Vec2& p) {
    double best = std::numeric_limits<double>::infinity();
    for (int r = 0; r < g.height(); ++r)
        for (int c = 0; c < g.width(); ++c)
            if (g.at(c, r) == Cell::Occupied)
                best = std::min(best, (g.origin() + Vec2(c + 0.5, r + 0.5) * g.resolution() - p).norm());
    return best;
}

Outcome certification() {
    const VehicleLimits lim;
    const TranscriptionSolver solver;
    int ok = 0;
    double worst_defect = 0.0, worst_clear = std::numeric_limits<double>::infinity();
    bool deterministic = true;
    std::string first_bad;
    for (int i = 1; i <= 20; ++i) {
        const problems::Problem p = problems::certification_problem(i);
        const TranscriptionResult r = solver.solve(p.start, p.target, p.map);
        const Trajectory& tr = r.trajectory;
        bool good = tr.knot_count() >= 2 && tr.states.front() == p.start.vec();
        good &= tr.dt >= solver.config().dt_min && tr.dt <= solver.config().dt_max() + 1e-12;
        StateVec s = p.start.vec();
        for (int k = 0; k + 1 < tr.knot_count(); ++k) {
            s = rk4_step(s, tr.inputs[k], tr.dt, {});
            const double d = (s - tr.states[k + 1]).cwiseAbs().maxCoeff();
            worst_defect = std::max(worst_defect, d);
            const StateVec& x = tr.states[k + 1];
            good &= d <= kDefectTol;
            good &= x[kV] >= lim.v_min - kBoundSlack && x[kV] <= lim.v_max + kBoundSlack;
            good &= std::abs(x[kDelta]) <= lim.delta_max + kBoundSlack;
            good &= std::abs(tr.inputs[k][0]) <= lim.accel_max + 1e-12;
            good &= std::abs(tr.inputs[k][1]) <= lim.steer_rate_max + 1e-12;
            for (int j = 0; j <= 20; ++j) {
                const StateVec q = rk4_step(tr.states[k], tr.inputs[k], tr.dt * j / 20.0, {});
                worst_clear = std::min(worst_clear, scan_clearance(p.map.grid, Vec2(q[kX], q[kY])));
            }
        }
        const StateVec err = tr.states.back() - p.target.vec();
        for (int c = 0; c < 5; ++c)
            good &= (c == kTheta ? std::abs(wrap_angle(err[c])) : std::abs(err[c])) <= kTerminalBox[c];
        const TranscriptionResult again = TranscriptionSolver().solve(p.start, p.target, p.map);
        deterministic &= bitwise_equal(tr, again.trajectory);
        ok += good;
        if (!good && first_bad.empty()) first_bad = fmt(" first failure: problem %d", i);
    }
    const bool pass = ok == 20 && worst_clear >= kClearance && deterministic;
    return {pass, fmt("%d/20 certified, max defect %.3g, min clearance %.3f m, deterministic %s", ok, worst_defect,
                      worst_clear, deterministic ? "yes" : "no") + first_bad};
}

Outcome tvlqr_gate() {
    using M2 = Eigen::Matrix2d;
    using B21 = Eigen::Matrix<double, 2, 1>;
    const double dt = 0.1, R = 1.0;
    M2 A;
    A << 1, dt, 0, 1;
    const B21 B(0.5 * dt * dt, dt);
    const M2 Q = M2::Identity();
    // Fixed point by structure-preserving doubling.
    M2 Ak = A, G = B * B.transpose() / R, P = Q;
    for (int i = 0; i < 60; ++i) {
        const M2 W = (M2::Identity() + G * P).inverse();
        const M2 A1 = Ak * W * Ak, G1 = G + Ak * W * G * Ak.transpose(), P1 = P + Ak.transpose() * P * W * Ak;
        Ak = A1, G = G1, P = P1;
    }
    const Eigen::RowVector2d K = (B.transpose() * P * A) / (R + (B.transpose() * P * B)(0));
    LinearizationT<2, 1> lin;
    lin.A.assign(2000, A);
    lin.B.assign(2000, B);
    const auto res = riccati_backward<2, 1>(lin, Q, M2::Zero(), Eigen::Matrix<double, 1, 1>::Constant(R));
    const double gain_err = (res.K[0] - K).cwiseAbs().maxCoeff();

    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    int wins = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const Trajectory tr = problems::feasible(static_cast<std::uint64_t>(100 + trial), problems::Kind::Open).reference;
        const GainSchedule gs = compute_gain_schedule(tr, {});
        StateVec x0 = tr.states[0];
        x0 += (StateVec() << 0.1 * u(rng), 0.1 * u(rng), 0.1 * u(rng), 0.1 * u(rng), 0.05 * u(rng)).finished();
        auto sim = [&](bool closed) {
            const double h = 1.0 / 600.0;
            const int ticks = static_cast<int>(std::lround(tr.duration() / h));
            StateVec x = x0;
            InputVec in = InputVec::Zero();
            for (int i = 0; i < ticks; ++i) {
                if (i % 12 == 0)
                    in = closed ? apply_control(gs, RobotState::from(x), i * h, {}).vec()
                                : VehicleLimits{}.clamp(ControlInput::from(tr.input_at(i * h))).vec();
                x = rk4_step(x, in, h, {});
            }
            return (x.head<2>() - tr.states.back().head<2>()).norm();
        };
        wins += sim(true) < sim(false);
    }
    return {gain_err <= kDareTol && wins >= kClosedLoopWins,
            fmt("gain error %.3g, closed loop better in %d/100", gain_err, wins)};
}

OccupancyGrid random_grid(int w, int h, std::uint64_t seed, double p_occ, double p_unknown, Vec2 origin = Vec2::Zero()) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    OccupancyGrid g(w, h, 0.05, origin, Cell::Free);
    for (auto& c : g.cells()) {
        const double x = u(rng);
        c = x < p_occ ? Cell::Occupied : (x < p_occ + p_unknown ? Cell::Unknown : Cell::Free);
    }
    return g;
}

std::vector<bool> occupied_mask(const OccupancyGrid& g) {
    std::vector<bool> m(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) m[i] = g.cells()[i] == Cell::Occupied;
    return m;
}

Outcome map_properties() {
    // Gap fill: two walls three rows apart become one block.
    OccupancyGrid walls(32, 24, 0.05, Vec2::Zero(), Cell::Unknown);
    for (int c = 5; c <= 25; ++c) walls.set(c, 10, Cell::Occupied), walls.set(c, 13, Cell::Occupied);
    const OccupancyGrid closed = morphological_close(walls, 5);
    bool gap = true;
    for (int r = 0; r < 24; ++r)
        for (int c = 0; c < 32; ++c) {
            const bool in_block = r >= 10 && r <= 13 && c >= 5 && c <= 25;
            gap &= closed.at(c, r) == (in_block ? Cell::Occupied : walls.at(c, r));
        }
    bool idem = true, preserve = true;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const OccupancyGrid g = random_grid(48, 40, 100 + seed, 0.15 + 0.01 * seed, 0.3);
        const OccupancyGrid once = morphological_close(g, 5);
        idem &= occupied_mask(morphological_close(once, 5)) == occupied_mask(once);
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (g.cells()[i] == Cell::Occupied) preserve &= once.cells()[i] == Cell::Occupied;
            if (once.cells()[i] != Cell::Occupied) preserve &= once.cells()[i] == g.cells()[i];
        }
    }
    bool fusion = true;
    for (std::uint64_t seed = 1; seed <= 25; ++seed) {
        const int off = static_cast<int>(seed % 7);
        const OccupancyGrid obs = random_grid(40, 36, seed, 0.2, 0.4, Vec2(off * 0.05, 0.1));
        const OccupancyGrid pred = random_grid(50, 50, 1000 + seed, 0.3, 0.3);
        const PlanningMap m = fuse(obs, pred);
        for (int r = 0; r < obs.height(); ++r)
            for (int c = 0; c < obs.width(); ++c)
                if (obs.at(c, r) != Cell::Unknown)
                    fusion &= m.grid.at(m.grid.world_to_cell(obs.cell_center({c, r}))) == obs.at(c, r);
    }
    bool clear = true;
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 3.2);
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const OccupancyGrid g = random_grid(64, 64, 200 + seed, 0.002 * seed, 0.2);
        for (int i = 0; i < 100; ++i) {
            const Vec2 p(u(rng), u(rng));
            clear &= clearance(g, p) == scan_clearance(g, p);
        }
    }
    return {gap && idem && preserve && fusion && clear,
            fmt("gap fill %d, idempotent %d, no erosion %d, fusion keeps observed %d, clearance exact %d", gap, idem,
                preserve, fusion, clear)};
}

Outcome table_one() {
    const ExperimentResult r = run_experiment(default_suite(1, 20));
    const RowResult& none3 = r.rows[0];
    const RowResult& none4 = r.rows[1];
    const RowResult& base4 = r.rows[2];
    const bool a = none3.successes() >= kNoneAt3Min;
    const int pp = 5 * (base4.successes() - none4.successes());
    const bool b = pp >= kImprovementPp;
    int failed = 0, witnessed = 0;
    for (const EpisodeRecord& e : none4.episodes)
        if (!(e.error.empty() && e.metrics.success)) ++failed, witnessed += e.metrics.horizon_in_unknown >= 1;
    const bool c = witnessed == failed;
    std::ostringstream os;
    os << "(a) none@3 " << none3.successes() << "/20 " << (a ? "ok" : "FAIL") << "; (b) baseline@4 "
       << base4.successes() << "/20 vs none@4 " << none4.successes() << "/20 = " << (pp >= 0 ? "+" : "") << pp
       << " pp " << (b ? "ok" : "FAIL") << "; (c) " << witnessed << "/" << failed
       << " failed none@4 episodes planned into Unknown " << (c ? "ok" : "FAIL");
    return {a && b && c, os.str()};
}

}  // namespace

int main() {
    report("dynamics: RK4 circle within 1e-6 m over 1 s", 1.0, dynamics_oracle);
    report("curvature: radius-2 arc 0.5 +/- 1e-6, lines exactly 0", 1.0, curvature_oracle);
    report("velocity map endpoints exact, 4 m at 2 m/s takes 2 s +/- 1e-6", 0, velocity_timing);
    report("transcription certification on 20 seeded problems", 30.0, certification);
    report("TVLQR: DARE gain within 1e-6, closed loop wins >= 95/100", 10.0, tvlqr_gate);
    report("map processing: closing, fusion, exact clearance", 0, map_properties);
    report("comparative study: prediction vs none over 20 corridors", 600.0, table_one);
    return failures == 0 ? 0 : 1;
}
