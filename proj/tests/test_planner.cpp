#include "oracles.hpp"

#include "ompnav/planner.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

using namespace ompnav;

namespace {

// 10 m straight corridor, 2 m wide, walls one cell thick at y = +-1.
PlanningMap corridor_map() {
    OccupancyGrid g(220, 60, 0.05, Vec2(-0.5, -1.5), Cell::Unknown);
    for (int c = 0; c < g.width(); ++c)
        for (int r = 0; r < g.height(); ++r) {
            const double y = g.cell_center({c, r}).y();
            if (std::abs(std::abs(y) - 1.0) < 0.025 + 1e-9) g.set(c, r, Cell::Occupied);
            else if (std::abs(y) < 1.0) g.set(c, r, Cell::Free);
        }
    return PlanningMap(g);
}

PlanningMap open_map(double half = 3.0) {
    const int n = static_cast<int>(std::lround(2 * half / 0.05));
    return PlanningMap(OccupancyGrid(n, n, 0.05, Vec2(-half, -half), Cell::Free));
}

// L-shaped corridor: up x in [0, 1.5] to y = 5, then right y in [3.5, 5].
PlanningMap l_map() {
    OccupancyGrid g(160, 160, 0.05, Vec2(-1.0, -1.0), Cell::Occupied);
    for (int r = 0; r < g.height(); ++r)
        for (int c = 0; c < g.width(); ++c) {
            const Vec2 p = g.cell_center({c, r});
            const bool vert = p.x() > 0.0 && p.x() < 1.5 && p.y() > -0.5 && p.y() < 5.0;
            const bool horiz = p.x() > 0.0 && p.x() < 6.0 && p.y() > 3.5 && p.y() < 5.0;
            if (vert || horiz) g.set(c, r, Cell::Free);
        }
    return PlanningMap(g);
}

// Every point of the polyline, sampled at 0.02 m or finer, against the exhaustive oracle.
double min_clearance_along(const PathPolyline& p, const OccupancyGrid& g) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < p.waypoints.size(); ++i) {
        const Vec2 a = p.waypoints[i - 1], b = p.waypoints[i];
        const int n = std::max(1, static_cast<int>(std::ceil((b - a).norm() / 0.01)));
        for (int k = 0; k <= n; ++k) best = std::min(best, oracle::clearance(g, a + (b - a) * (double(k) / n)));
    }
    return best;
}

double fd_curvature(const SmoothPath& sp, double s, double h) {
    const Vec2 a = sp.position(s - h), m = sp.position(s), b = sp.position(s + h);
    const Vec2 d1 = (b - a) / (2 * h), d2 = (b - 2 * m + a) / (h * h);
    return std::abs(cross2(d1, d2)) / std::pow(d1.norm(), 3);
}

double polyline_distance(const PathPolyline& p, const Vec2& q) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < p.waypoints.size(); ++i)
        best = std::min(best, point_segment_distance(q, p.waypoints[i - 1], p.waypoints[i]));
    return best;
}

SmoothPath straight(double len) { return SmoothPath({PathSegment(LineSegment{Vec2(0, 0), Vec2(len, 0)})}); }

}  // namespace

TEST(Rrt, StraightCorridorAcrossSeeds) {
    const PlanningMap m = corridor_map();
    const Vec2 start(0.0, 0.0), goal(10.0, 0.0);
    int ok = 0;
    double worst_ratio = 0.0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        PlannerConfig cfg;
        cfg.seed = seed;
        const PathPolyline p = rrt_plan(m, start, goal, std::nullopt, cfg);
        ASSERT_GE(p.waypoints.size(), 2u);
        EXPECT_EQ(p.waypoints.front(), start);
        EXPECT_LE((p.waypoints.back() - goal).norm(), cfg.goal_tolerance);
        ASSERT_GE(min_clearance_along(p, m.grid), 0.4) << "seed " << seed;
        worst_ratio = std::max(worst_ratio, p.length() / (goal - start).norm());
        ++ok;
    }
    EXPECT_EQ(ok, 50);
    EXPECT_LE(worst_ratio, 1.5);
}

TEST(Rrt, SealedGoalHasNoPath) {
    PlanningMap m = open_map();
    for (int k = 20; k <= 100; ++k)
        for (int e : {20, 100}) {
            m.grid.set(k, e, Cell::Occupied);
            m.grid.set(e, k, Cell::Occupied);
        }
    PlannerConfig cfg;
    EXPECT_THROW_CODE(rrt_plan(m, Vec2(-2.5, -2.5), Vec2(0.0, 0.0), std::nullopt, cfg), ErrorCode::NoPathFound);
}

TEST(Rrt, StartInCollision) {
    const PlanningMap m = corridor_map();
    EXPECT_THROW_CODE(rrt_plan(m, Vec2(0.0, 0.8), Vec2(10.0, 0.0), std::nullopt, {}), ErrorCode::StartInCollision);
}

TEST(Rrt, UnknownCellsAreFree) {
    const PlanningMap m(OccupancyGrid(100, 100, 0.05, Vec2::Zero(), Cell::Unknown));
    const PathPolyline p = rrt_plan(m, Vec2(0.5, 0.5), Vec2(4.5, 4.5), std::nullopt, {});
    EXPECT_LE((p.waypoints.back() - Vec2(4.5, 4.5)).norm(), 0.25);
}

TEST(Rrt, SameSeedSameTree) {
    const PlanningMap m = corridor_map();
    const CollisionChecker cc(m.grid, 0.4);
    PlannerConfig cfg;
    cfg.seed = 9;
    const RrtResult a = rrt_plan_detailed(cc, Vec2(0, 0), Vec2(10, 0), std::nullopt, cfg);
    const RrtResult b = rrt_plan_detailed(cc, Vec2(0, 0), Vec2(10, 0), PathPolyline{}, cfg);
    ASSERT_EQ(a.tree.size(), b.tree.size());
    for (std::size_t i = 0; i < a.tree.size(); ++i) {
        ASSERT_EQ(a.tree[i].pos, b.tree[i].pos);
        ASSERT_EQ(a.tree[i].parent, b.tree[i].parent);
    }
    EXPECT_EQ(b.seeded_vertices, 0);
}

TEST(Rrt, WarmStartSeedsPreviousVertices) {
    const PlanningMap m = l_map();
    const CollisionChecker cc(m.grid, 0.4);
    PlannerConfig cfg;
    const Vec2 start(0.75, 0.0), goal(5.5, 4.25);
    const RrtResult cold = rrt_plan_detailed(cc, start, goal, std::nullopt, cfg);
    // Re-plan from a point a little further along, goal unchanged.
    const Vec2 later = cold.path.waypoints[1];
    const RrtResult warm = rrt_plan_detailed(cc, later, goal, cold.path, cfg);
    EXPECT_EQ(warm.seeded_vertices, static_cast<int>(cold.path.waypoints.size()) - 2);
    // The seeded chain is the tail of the previous path, in order, from the new root.
    ASSERT_GE(warm.path.waypoints.size(), cold.path.waypoints.size() - 1);
    for (std::size_t i = 2; i < cold.path.waypoints.size(); ++i)
        EXPECT_EQ(warm.path.waypoints[i - 1], cold.path.waypoints[i]);
    for (int i = 1; i <= warm.seeded_vertices; ++i) EXPECT_TRUE(warm.tree[i].seeded);
    EXPECT_EQ(warm.iterations, 0);  // the chain already reaches the goal
}

TEST(Rrt, WarmStartTruncatesAtFirstCollision) {
    PlanningMap m = open_map();
    const PathPolyline prev{{Vec2(-2.5, 0), Vec2(-1.5, 0), Vec2(-0.5, 0), Vec2(0.5, 0), Vec2(1.5, 0), Vec2(2.5, 0)}};
    // A new obstacle on the edge (-0.5, 0) -> (0.5, 0).
    for (int r = 55; r <= 65; ++r) m.grid.set(60, r, Cell::Occupied);
    const CollisionChecker cc(m.grid, 0.4);
    const RrtResult res = rrt_plan_detailed(cc, Vec2(-2.5, 0), Vec2(2.5, 0), prev, {});
    EXPECT_EQ(res.seeded_vertices, 2);
    EXPECT_EQ(res.tree[1].pos, Vec2(-1.5, 0));
    EXPECT_EQ(res.tree[2].pos, Vec2(-0.5, 0));
    EXPECT_GE(min_clearance_along(res.path, m.grid), 0.4);
}

TEST(Prune, ZigZagInOpenSpace) {
    const PlanningMap m = open_map();
    const PathPolyline zz{{Vec2(-2, -2), Vec2(-1, 0), Vec2(0, -2), Vec2(1, 0), Vec2(2, 2)}};
    const PathPolyline p = prune(zz, m, 0.4);
    ASSERT_EQ(p.waypoints.size(), 2u);
    EXPECT_EQ(p.waypoints.front(), zz.waypoints.front());
    EXPECT_EQ(p.waypoints.back(), zz.waypoints.back());
}

TEST(Prune, TwoPointsUnchanged) {
    const PathPolyline two{{Vec2(0, 0), Vec2(1, 1)}};
    const PathPolyline p = prune(two, open_map(), 0.4);
    EXPECT_EQ(p.waypoints, two.waypoints);
}

TEST(Prune, LCornerVertexKept) {
    const PlanningMap m = l_map();
    const PathPolyline hug{{Vec2(0.75, 0.0), Vec2(0.75, 2.0), Vec2(0.75, 4.25), Vec2(3.0, 4.25), Vec2(5.5, 4.25)}};
    ASSERT_GE(min_clearance_along(hug, m.grid), 0.4);
    const PathPolyline p = prune(hug, m, 0.4);
    EXPECT_EQ(p.waypoints, (std::vector<Vec2>{Vec2(0.75, 0.0), Vec2(0.75, 4.25), Vec2(5.5, 4.25)}));
    EXPECT_GE(min_clearance_along(p, m.grid), 0.4);
}

TEST(Prune, NeverLongerAndStaysClear) {
    const PlanningMap m = l_map();
    const CollisionChecker cc(m.grid, 0.4);
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        PlannerConfig cfg;
        cfg.seed = seed;
        const PathPolyline raw = rrt_plan(m, Vec2(0.75, 0.0), Vec2(5.5, 4.25), std::nullopt, cfg);
        const PathPolyline p = prune(raw, cc);
        EXPECT_LE(p.length(), raw.length() + 1e-12);
        EXPECT_GE(min_clearance_along(p, m.grid), 0.4);
    }
}

TEST(Smooth, TwoPointsIsStraightLine) {
    const SmoothPath sp = smooth_g2cbs(PathPolyline{{Vec2(1, 1), Vec2(4, 5)}});
    ASSERT_EQ(sp.segments().size(), 1u);
    EXPECT_DOUBLE_EQ(sp.length(), 5.0);
    for (int i = 0; i <= 100; ++i) EXPECT_EQ(curvature(sp, 0.05 * i), 0.0);
}

TEST(Smooth, CollinearMiddlePointIsDropped) {
    const SmoothPath a = smooth_g2cbs(PathPolyline{{Vec2(0, 0), Vec2(1, 2), Vec2(2, 4)}});
    const SmoothPath b = smooth_g2cbs(PathPolyline{{Vec2(0, 0), Vec2(2, 4)}});
    ASSERT_EQ(a.segments().size(), 1u);
    EXPECT_EQ(a.length(), b.length());
    for (int i = 0; i <= 20; ++i) EXPECT_EQ(a.position(a.length() * i / 20), b.position(b.length() * i / 20));
}

TEST(Smooth, RightAngleCornerIsCurvatureContinuous) {
    const PathPolyline poly{{Vec2(0, 0), Vec2(2, 0), Vec2(2, 2)}};
    const SmoothPath sp = smooth_g2cbs(poly);
    EXPECT_FALSE(sp.degenerate());
    ASSERT_GE(sp.segments().size(), 3u);
    // One-sided limits at every joint.
    for (std::size_t i = 0; i + 1 < sp.segments().size(); ++i) {
        const double left = sp.signed_curvature_in_segment(i, 1.0);
        const double right = sp.signed_curvature_in_segment(i + 1, 0.0);
        EXPECT_LE(std::abs(left - right), 1e-3) << "joint " << i;
        EXPECT_LE((sp.segments()[i].derivs(1.0).pos - sp.segments()[i + 1].derivs(0.0).pos).norm(), 1e-12);
        const Vec2 t0 = sp.segments()[i].derivs(1.0).d1.normalized(), t1 = sp.segments()[i + 1].derivs(0.0).d1.normalized();
        EXPECT_LE((t0 - t1).norm(), 1e-9);
    }
    // Sampled at 1 mm the largest jump between neighbours shrinks with the step.
    auto max_jump = [&](double h) {
        double worst = 0.0, prev = curvature(sp, 0.0);
        for (double s = h; s <= sp.length(); s += h) {
            const double k = curvature(sp, s);
            worst = std::max(worst, std::abs(k - prev));
            prev = k;
        }
        return worst;
    };
    const double j1 = max_jump(1e-3), j2 = max_jump(5e-4);
    EXPECT_LT(j2, 0.75 * j1);
    EXPECT_LT(j1, 0.05);
}

TEST(Smooth, EndpointsTangentsAndDeviation) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-4.0, 4.0);
    for (int trial = 0; trial < 50; ++trial) {
        PathPolyline poly;
        for (int k = 0; k < 5; ++k) poly.waypoints.emplace_back(u(rng), u(rng));
        const SmoothPath sp = smooth_g2cbs(poly);
        const auto& w = poly.waypoints;
        EXPECT_LE((sp.position(0.0) - w.front()).norm(), 1e-12);
        EXPECT_LE((sp.position(sp.length()) - w.back()).norm(), 1e-9);
        if (sp.kinks().empty()) {
            EXPECT_LE((sp.tangent(0.0) - (w[1] - w[0]).normalized()).norm(), 1e-9);
            EXPECT_LE((sp.tangent(sp.length()) - (w[4] - w[3]).normalized()).norm(), 1e-9);
        }
        // Corner deviation: closest approach of the curve to each interior vertex.
        for (std::size_t i = 1; i + 1 < w.size(); ++i) {
            const double cap = std::min(0.4 * std::min((w[i] - w[i - 1]).norm(), (w[i + 1] - w[i]).norm()), 0.4);
            double closest = std::numeric_limits<double>::infinity(), at = 0.0;
            const double step = sp.length() / 4000;
            for (int k = 0; k <= 4000; ++k) {
                const double dist = (sp.position(step * k) - w[i]).norm();
                if (dist < closest) closest = dist, at = step * k;
            }
            for (int k = -1000; k <= 1000; ++k) {
                const double s = std::clamp(at + step * k / 1000, 0.0, sp.length());
                closest = std::min(closest, (sp.position(s) - w[i]).norm());
            }
            ASSERT_LE(closest, cap + 1e-6) << trial << " vertex " << i;
        }
        // Never further from the polyline than the largest allowed corner deviation.
        for (int i = 0; i <= 2000; ++i)
            ASSERT_LE(polyline_distance(poly, sp.position(sp.length() * i / 2000)), 0.4 + 1e-9) << trial;
        EXPECT_LE(sp.length(), poly.length() + 1e-9);
        EXPECT_GE(sp.length(), (w.back() - w.front()).norm() - 1e-9);
    }
}

TEST(Smooth, CollisionAwareFilletsStayClear) {
    const PlanningMap m = l_map();
    const CollisionChecker cc(m.grid, 0.4);
    const PathPolyline p{{Vec2(0.75, 0.0), Vec2(0.75, 4.25), Vec2(5.5, 4.25)}};
    const SmoothPath sp = smooth_g2cbs(p, cc);
    for (int i = 0; i <= 400; ++i) ASSERT_GE(oracle::clearance(m.grid, sp.position(sp.length() * i / 400)), 0.4);
}

TEST(Smooth, NeedsTwoPoints) {
    EXPECT_THROW_CODE(smooth_g2cbs(PathPolyline{{Vec2(0, 0)}}), ErrorCode::InvalidArgument);
}

TEST(Curvature, CircleOfRadiusTwo) {
    const SmoothPath sp({PathSegment(ArcSegment{Vec2(1, -1), 2.0, 0.3, 4.0})});
    EXPECT_NEAR(sp.length(), 8.0, 1e-12);
    for (int i = 0; i <= 1000; ++i) ASSERT_NEAR(curvature(sp, sp.length() * i / 1000), 0.5, 1e-6);
    const SmoothPath cw({PathSegment(ArcSegment{Vec2(0, 0), 2.0, 0.0, -2.0})});
    EXPECT_NEAR(cw.signed_curvature(1.0), -0.5, 1e-12);
    EXPECT_NEAR(curvature(cw, 1.0), 0.5, 1e-12);
}

TEST(Curvature, StraightLineIsExactlyZero) {
    const SmoothPath sp = straight(3.7);
    for (int i = 0; i <= 100; ++i) EXPECT_EQ(curvature(sp, 3.7 * i / 100), 0.0);
    const SmoothPath diag({PathSegment(LineSegment{Vec2(0.1, 0.2), Vec2(-3.3, 7.9)})});
    for (int i = 0; i <= 100; ++i) EXPECT_EQ(curvature(diag, diag.length() * i / 100), 0.0);
}

TEST(Curvature, MatchesFiniteDifferences) {
    const SmoothPath sp = smooth_g2cbs(PathPolyline{{Vec2(0, 0), Vec2(3, 0), Vec2(4, 2.5), Vec2(1, 4), Vec2(2, 6)}});
    ASSERT_TRUE(sp.kinks().empty());
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.01, sp.length() - 0.01);
    const double h = 1e-3;
    int checked = 0;
    for (int i = 0; i < 1000; ++i) {
        const double s = u(rng);
        // The central stencil assumes smoothness across its window; joints are only G2.
        bool near_joint = false;
        for (double j : sp.joints()) near_joint |= std::abs(s - j) < 2 * h;
        if (near_joint) continue;
        ++checked;
        ASSERT_NEAR(curvature(sp, s), fd_curvature(sp, s, h), 1e-3) << "s = " << s;
    }
    EXPECT_GT(checked, 950);
}

TEST(Curvature, OutOfRangeThrows) {
    const SmoothPath sp = straight(2.0);
    EXPECT_THROW_CODE(curvature(sp, -0.1), ErrorCode::OutOfRange);
    EXPECT_THROW_CODE(curvature(sp, 2.1), ErrorCode::OutOfRange);
}

TEST(Velocity, MapEndpointsAndClamp) {
    const VelocityProfile v = velocity_profile(straight(1.0), 4.0, 0.5);
    EXPECT_EQ(v.for_curvature(0.0), 4.0);
    EXPECT_EQ(v.for_curvature(2.0), 0.5);
    EXPECT_EQ(v.for_curvature(5.0), 0.5);
    EXPECT_EQ(v.for_curvature(-1.0), v.for_curvature(1.0));
    EXPECT_DOUBLE_EQ(v.for_curvature(1.0), 2.25);
    for (double k = -10.0; k <= 10.0; k += 0.01) {
        const double s = v.for_curvature(k);
        ASSERT_GE(s, 0.5);
        ASSERT_LE(s, 4.0);
    }
    EXPECT_THROW_CODE(velocity_profile(straight(1.0), 1.0, 2.0), ErrorCode::InvalidArgument);
}

TEST(Timing, ConstantSpeed) {
    const TimedPath tp = time_parameterize(straight(4.0), velocity_profile(straight(4.0), 2.0, 0.5));
    EXPECT_NEAR(tp.duration(), 2.0, 1e-6);
    EXPECT_NEAR(tp.time_at(1.0), 0.5, 1e-9);
}

TEST(Timing, QuadratureOfLinearSpeed) {
    // v(s) = 1 + s on [0, 1]: T = ln 2.
    const double t = detail::integrate([](double s) { return 1.0 / (1.0 + s); }, 0.0, 1.0, 1e-6);
    EXPECT_NEAR(t, std::numbers::ln2, 1e-6);
}

TEST(Timing, MonotoneAndInverse) {
    const SmoothPath sp = smooth_g2cbs(PathPolyline{{Vec2(0, 0), Vec2(3, 0), Vec2(4, 2.5), Vec2(1, 4)}});
    const TimedPath tp(sp, velocity_profile(sp, 4.0, 0.5));
    double prev = -1.0;
    for (int i = 0; i <= 500; ++i) {
        const double t = tp.time_at(sp.length() * i / 500);
        ASSERT_GT(t, prev);
        prev = t;
    }
    // Independent check of the total against a fine midpoint rule.
    double ref = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) ref += sp.length() / n / tp.speed(sp.length() * (i + 0.5) / n);
    EXPECT_NEAR(tp.duration(), ref, 1e-5);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, tp.duration());
    for (int i = 0; i < 100; ++i) {
        const double t = u(rng);
        ASSERT_NEAR(tp.time_at(tp.arclength_at(t)), t, 1e-6);
    }
}

TEST(Horizon, ClampIdentityAndDistance) {
    const TimedPath tp(straight(10.0), VelocityProfile{2.0, 0.5});
    const HorizonPoint end = horizon_point(tp, 10.0, 2.0);
    EXPECT_NEAR((end.position - Vec2(10, 0)).norm(), 0.0, 1e-12);
    const HorizonPoint ahead = horizon_point(tp, 1.0, 2.0);
    EXPECT_NEAR(ahead.position.x(), 5.0, 1e-6);
    EXPECT_NEAR(ahead.speed, 2.0, 1e-12);
    EXPECT_NEAR(ahead.heading, 0.0, 1e-12);
    const HorizonPoint here = horizon_point(tp, 3.3, 0.0);
    EXPECT_EQ(here.position, tp.path().position(3.3));
}

TEST(Horizon, ReturnsPathHeading) {
    const SmoothPath sp({PathSegment(ArcSegment{Vec2(0, 0), 2.0, 0.0, std::numbers::pi})});
    const TimedPath tp(sp, VelocityProfile{4.0, 0.5});
    const HorizonPoint h = horizon_point(tp, 0.0, 1.0);
    const double ang = h.s / 2.0;  // along the arc
    EXPECT_NEAR(h.heading, wrap_angle(ang + std::numbers::pi / 2), 1e-9);
    EXPECT_NEAR(h.speed, 3.125, 1e-12);  // 4 - 0.5 * 3.5 / 2
    EXPECT_NEAR(h.s, 3.125, 1e-6);
}

TEST(PathCsv, Columns) {
    const TimedPath tp(straight(1.0), VelocityProfile{2.0, 0.5});
    std::ostringstream os;
    write_path_csv(os, tp, 0.25);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, "s,x,y,kappa,v,t");
    int rows = 0;
    while (std::getline(is, line)) ++rows;
    EXPECT_EQ(rows, 5);
}
