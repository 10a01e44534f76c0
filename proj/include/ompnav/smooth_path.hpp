#pragma once
// Arc-length parameterized paths built from lines, circular arcs and cubic
// Bezier spirals, plus the G2-continuous corner smoothing construction with
// pairs of symmetric cubic Bezier spirals.

#include "ompnav/core.hpp"

#include <array>
#include <cmath>
#include <functional>
#include <variant>
#include <vector>

namespace ompnav {

struct PathPolyline {
    std::vector<Vec2> waypoints;

    double length() const {
        double l = 0.0;
        for (std::size_t i = 1; i < waypoints.size(); ++i) l += (waypoints[i] - waypoints[i - 1]).norm();
        return l;
    }
};

struct LineSegment {
    Vec2 a, b;
};

/// Circle arc around `center`, from `start_angle` sweeping `sweep` radians
/// (positive = counter-clockwise).
struct ArcSegment {
    Vec2 center;
    double radius = 1.0;
    double start_angle = 0.0;
    double sweep = 0.0;
};

struct BezierSegment {
    std::array<Vec2, 4> p;
};

using SegmentGeometry = std::variant<LineSegment, ArcSegment, BezierSegment>;

namespace detail {

struct Derivs {
    Vec2 pos, d1, d2;
};

inline Derivs eval(const LineSegment& l, double u) {
    return {l.a + u * (l.b - l.a), l.b - l.a, Vec2::Zero()};
}

inline Derivs eval(const ArcSegment& a, double u) {
    const double ang = a.start_angle + u * a.sweep;
    const Vec2 r(std::cos(ang), std::sin(ang));
    const Vec2 t(-std::sin(ang), std::cos(ang));
    return {a.center + a.radius * r, a.radius * a.sweep * t, -a.radius * a.sweep * a.sweep * r};
}

inline Derivs eval(const BezierSegment& b, double u) {
    const double v = 1.0 - u;
    const auto& p = b.p;
    const Vec2 pos = v * v * v * p[0] + 3 * v * v * u * p[1] + 3 * v * u * u * p[2] + u * u * u * p[3];
    const Vec2 d1 = 3 * v * v * (p[1] - p[0]) + 6 * v * u * (p[2] - p[1]) + 3 * u * u * (p[3] - p[2]);
    const Vec2 d2 = 6 * v * (p[2] - 2 * p[1] + p[0]) + 6 * u * (p[3] - 2 * p[2] + p[1]);
    return {pos, d1, d2};
}

// 8-point Gauss-Legendre on [0, 1].
inline constexpr std::array<double, 8> kGlNodes = {0.019855071751231856, 0.10166676129318664, 0.2372337950418355,
                                                   0.4082826787521751,   0.5917173212478249,  0.7627662049581645,
                                                   0.8983332387068134,   0.9801449282487681};
inline constexpr std::array<double, 8> kGlWeights = {0.05061426814518813, 0.11119051722668724, 0.15685332293894363,
                                                     0.18134189168918100, 0.18134189168918100, 0.15685332293894363,
                                                     0.11119051722668724, 0.05061426814518813};

}  // namespace detail

/// One geometric piece with an arc-length table for s -> parameter inversion.
class PathSegment {
public:
    explicit PathSegment(SegmentGeometry g) : geom_(std::move(g)) { build_table(); }

    const SegmentGeometry& geometry() const { return geom_; }
    double length() const { return table_s_.back(); }

    detail::Derivs derivs(double u) const {
        return std::visit([u](const auto& g) { return detail::eval(g, u); }, geom_);
    }

    /// Parameter u in [0, 1] whose arc length from the segment start is s.
    double param_at(double s) const {
        if (s <= 0.0) return 0.0;
        if (s >= length()) return 1.0;
        if (std::holds_alternative<LineSegment>(geom_) || std::holds_alternative<ArcSegment>(geom_))
            return s / length();
        const auto it = std::upper_bound(table_s_.begin(), table_s_.end(), s);
        const std::size_t i = static_cast<std::size_t>(std::distance(table_s_.begin(), it)) - 1;
        const double u0 = static_cast<double>(i) / kTable;
        const double u1 = static_cast<double>(i + 1) / kTable;
        double u = u0 + (u1 - u0) * (s - table_s_[i]) / (table_s_[i + 1] - table_s_[i]);
        for (int iter = 0; iter < 20; ++iter) {
            const double f = table_s_[i] + arc_length(u0, u) - s;
            const double speed = derivs(u).d1.norm();
            if (speed <= 0.0) break;
            const double step = f / speed;
            u = std::clamp(u - step, u0, u1);
            if (std::abs(step) < 1e-15) break;
        }
        return u;
    }

private:
    static constexpr int kTable = 64;

    double arc_length(double a, double b) const {
        double sum = 0.0;
        for (std::size_t k = 0; k < detail::kGlNodes.size(); ++k)
            sum += detail::kGlWeights[k] * derivs(a + (b - a) * detail::kGlNodes[k]).d1.norm();
        return sum * (b - a);
    }

    void build_table() {
        table_s_.assign(kTable + 1, 0.0);
        for (int i = 0; i < kTable; ++i)
            table_s_[i + 1] = table_s_[i] + arc_length(static_cast<double>(i) / kTable, static_cast<double>(i + 1) / kTable);
    }

    SegmentGeometry geom_;
    std::vector<double> table_s_;
};

/// Signed curvature of a parametric curve: (y''x' - x''y') / (x'^2 + y'^2)^(3/2).
inline double parametric_curvature(const Vec2& d1, const Vec2& d2) {
    const double speed2 = d1.squaredNorm();
    if (speed2 == 0.0) return 0.0;
    return (d2.y() * d1.x() - d2.x() * d1.y()) / std::pow(speed2, 1.5);
}

class SmoothPath {
public:
    SmoothPath() = default;

    explicit SmoothPath(std::vector<PathSegment> segs) : segments_(std::move(segs)) {
        cumulative_.assign(segments_.size() + 1, 0.0);
        for (std::size_t i = 0; i < segments_.size(); ++i) cumulative_[i + 1] = cumulative_[i] + segments_[i].length();
    }

    double length() const { return cumulative_.empty() ? 0.0 : cumulative_.back(); }
    const std::vector<PathSegment>& segments() const { return segments_; }
    /// Arc length at which each segment starts (plus the total at the end).
    const std::vector<double>& joints() const { return cumulative_; }

    Vec2 position(double s) const { return locate(s).pos; }
    Vec2 tangent(double s) const { return locate(s).d1.normalized(); }
    double heading(double s) const {
        const Vec2 t = locate(s).d1;
        return std::atan2(t.y(), t.x());
    }

    double signed_curvature(double s) const {
        check_range(s);
        const auto d = locate(s);
        return parametric_curvature(d.d1, d.d2);
    }

    /// Curvature on one side of a joint (used for continuity checks).
    double signed_curvature_in_segment(std::size_t seg, double u) const {
        const auto d = segments_.at(seg).derivs(u);
        return parametric_curvature(d.d1, d.d2);
    }

    /// Arc lengths of corners that could not be filleted (raw kinks).
    const std::vector<double>& kinks() const { return kinks_; }
    void add_kink(double s) { kinks_.push_back(s); }
    bool degenerate() const { return !kinks_.empty(); }

    void check_range(double s) const {
        constexpr double tol = 1e-9;
        if (segments_.empty() || s < -tol || s > length() + tol)
            throw Error(ErrorCode::OutOfRange, "arc length outside path");
    }

private:
    detail::Derivs locate(double s) const {
        if (segments_.empty()) throw Error(ErrorCode::OutOfRange, "empty path");
        s = std::clamp(s, 0.0, length());
        auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), s);
        std::size_t i = static_cast<std::size_t>(std::distance(cumulative_.begin(), it));
        i = std::clamp<std::size_t>(i, 1, segments_.size()) - 1;
        const PathSegment& seg = segments_[i];
        return seg.derivs(seg.param_at(s - cumulative_[i]));
    }

    std::vector<PathSegment> segments_;
    std::vector<double> cumulative_;
    std::vector<double> kinks_;
};

/// |kappa(s)| with the parametric curvature formula. Throws OutOfRange when s
/// is outside [0, L]. Within kKinkHalfWidth of a raw (unfilleted) corner the
/// curvature is reported as kKinkCurvature.
inline constexpr double kKinkCurvature = 2.0;
inline constexpr double kKinkHalfWidth = 0.1;

inline double curvature(const SmoothPath& sp, double s) {
    sp.check_range(s);
    for (double k : sp.kinks())
        if (std::abs(s - k) <= kKinkHalfWidth) return kKinkCurvature;
    return std::abs(sp.signed_curvature(s));
}

// G2CBS constants for a symmetric pair of cubic Bezier spirals.
struct G2cbs {
    static inline const double c1 = 7.2364;
    static inline const double c2 = 0.4 * (std::sqrt(6.0) - 1.0);
    static inline const double c3 = (c2 + 4.0) / (c1 + 6.0);
    static inline const double c4 = (c2 + 4.0) * (c2 + 4.0) / (54.0 * c3);
    // |W2 B2| / d: where the straight control polygon leaves the leg.
    static inline const double inner = 1.0 - c3 * (1.0 + c2);

    /// Distance from the corner vertex to the spiral junction for tangent
    /// length d and half turn angle beta.
    static double deviation(double d, double beta) { return inner * d * std::sin(beta); }

    /// Peak curvature of the fillet.
    static double max_curvature(double d, double beta) {
        const double c = std::cos(beta);
        return c4 * std::sin(beta) / (d * c * c);
    }
};

struct CornerFillet {
    BezierSegment first;   // B0..B3, leaves the incoming leg
    BezierSegment second;  // E3..E0, joins the outgoing leg
    double d = 0.0;        // tangent length |W2 B0| = |W2 E0|
};

/// Fillet at corner w2 between legs w1->w2 and w2->w3, tangent length d.
inline CornerFillet g2cbs_fillet(const Vec2& w1, const Vec2& w2, const Vec2& w3, double d) {
    const Vec2 u1 = (w1 - w2).normalized();
    const Vec2 u2 = (w3 - w2).normalized();
    const double h = G2cbs::c3 * d;
    const double g = G2cbs::c2 * G2cbs::c3 * d;
    const Vec2 b0 = w2 + d * u1, b1 = b0 - g * u1, b2 = b1 - h * u1;
    const Vec2 e0 = w2 + d * u2, e1 = e0 - g * u2, e2 = e1 - h * u2;
    // The rounded c1 leaves |B2 E2| / 2 and the nominal k differing by ~1e-4 d;
    // use the midpoint so both halves meet exactly.
    const Vec2 b3 = 0.5 * (b2 + e2);
    const Vec2 e3 = b3;
    CornerFillet f;
    f.first = {{b0, b1, b2, b3}};
    f.second = {{e3, e2, e1, e0}};
    f.d = d;
    return f;
}

struct SmoothingOptions {
    /// Upper bound on how far the curve may leave the polyline (m).
    double max_deviation = 0.4;
    /// Fillet shrink attempts before falling back to a raw corner.
    int max_shrinks = 6;
    /// Optional validity test on sample points; fillets that fail it shrink.
    std::function<bool(const Vec2&)> point_valid;
    double check_step = 0.02;
};

namespace detail {

inline std::vector<Vec2> drop_collinear(const std::vector<Vec2>& in) {
    std::vector<Vec2> out;
    for (const Vec2& p : in) {
        if (!out.empty() && (p - out.back()).norm() < 1e-12) continue;
        out.push_back(p);
    }
    if (out.size() < 3) return out;
    std::vector<Vec2> res{out.front()};
    for (std::size_t i = 1; i + 1 < out.size(); ++i) {
        const Vec2 a = (out[i] - res.back()).normalized();
        const Vec2 b = (out[i + 1] - out[i]).normalized();
        if (std::abs(cross2(a, b)) < 1e-12 && a.dot(b) > 0.0) continue;
        res.push_back(out[i]);
    }
    res.push_back(out.back());
    return res;
}

inline bool fillet_valid(const CornerFillet& f, const SmoothingOptions& opt) {
    if (!opt.point_valid) return true;
    for (const BezierSegment* b : {&f.first, &f.second}) {
        const PathSegment seg{*b};
        const int n = std::max(1, static_cast<int>(std::ceil(seg.length() / opt.check_step)));
        for (int i = 0; i <= n; ++i)
            if (!opt.point_valid(seg.derivs(seg.param_at(seg.length() * i / n)).pos)) return false;
    }
    return true;
}

}  // namespace detail

/// Replaces every corner of the polyline with a G2CBS fillet. The tangent
/// length is as large as possible subject to: half of each adjacent leg, and a
/// corner deviation of at most min(0.4 * shorter leg, max_deviation). Fillets
/// rejected by `point_valid` are halved; after max_shrinks the corner is kept
/// raw and recorded as a kink.
inline SmoothPath smooth_g2cbs(const PathPolyline& poly, const SmoothingOptions& opt = {}) {
    if (poly.waypoints.size() < 2) throw Error(ErrorCode::InvalidArgument, "need at least two waypoints");
    const std::vector<Vec2> w = detail::drop_collinear(poly.waypoints);
    if (w.size() < 2) throw Error(ErrorCode::InvalidArgument, "waypoints coincide");

    std::vector<PathSegment> segs;
    Vec2 cursor = w.front();
    std::vector<std::size_t> kink_segments;
    auto push_line = [&](const Vec2& to) {
        if ((to - cursor).norm() > 1e-12) segs.emplace_back(LineSegment{cursor, to});
        cursor = to;
    };
    for (std::size_t i = 1; i + 1 < w.size(); ++i) {
        const double l1 = (w[i] - w[i - 1]).norm();
        const double l2 = (w[i + 1] - w[i]).norm();
        const Vec2 u1 = (w[i - 1] - w[i]).normalized();
        const Vec2 u2 = (w[i + 1] - w[i]).normalized();
        const double beta = 0.5 * std::acos(std::clamp(-u1.dot(u2), -1.0, 1.0));
        const double dev_cap = std::min(0.4 * std::min(l1, l2), opt.max_deviation);
        double d = 0.5 * std::min(l1, l2);
        if (std::sin(beta) > 0.0) d = std::min(d, dev_cap / G2cbs::deviation(1.0, beta));
        // Nearly reversing corners cannot be filleted within the leg budget.
        bool placed = false;
        if (std::cos(beta) > 1e-3) {
            for (int attempt = 0; attempt <= opt.max_shrinks; ++attempt, d *= 0.5) {
                const CornerFillet f = g2cbs_fillet(w[i - 1], w[i], w[i + 1], d);
                if (!detail::fillet_valid(f, opt)) continue;
                push_line(f.first.p[0]);
                segs.emplace_back(f.first);
                segs.emplace_back(f.second);
                cursor = f.second.p[3];
                placed = true;
                break;
            }
        }
        if (!placed) {
            push_line(w[i]);
            kink_segments.push_back(segs.size());
        }
    }
    push_line(w.back());
    if (segs.empty()) segs.emplace_back(LineSegment{w.front(), w.back()});

    SmoothPath sp(std::move(segs));
    for (std::size_t idx : kink_segments) sp.add_kink(sp.joints()[idx]);
    return sp;
}

}  // namespace ompnav
