#pragma once
// Curvature-to-speed mapping and time parameterization of a smooth path.

#include "ompnav/smooth_path.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <vector>

namespace ompnav {

/// v(s) = v_max - kappa_hat(s) * (v_max - v_min) / 2 with kappa_hat = clamp(|kappa|, 0, 2).
struct VelocityProfile {
    double v_max = 4.0;
    double v_min = 0.5;

    static constexpr double kCurvatureCap = 2.0;

    double for_curvature(double kappa) const {
        const double k = std::clamp(std::abs(kappa), 0.0, kCurvatureCap);
        return v_max - k * (v_max - v_min) / 2.0;
    }

    double at(const SmoothPath& sp, double s) const { return for_curvature(curvature(sp, s)); }
};

inline VelocityProfile velocity_profile(const SmoothPath&, double v_max, double v_min) {
    if (!(v_min > 0.0) || !(v_min < v_max)) throw Error(ErrorCode::InvalidArgument, "need 0 < v_min < v_max");
    return {v_max, v_min};
}

namespace detail {

template <class F>
double adaptive_simpson(const F& f, double a, double b, double fa, double fm, double fb, double whole, double tol,
                        int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

template <class F>
double integrate(const F& f, double a, double b, double tol) {
    if (b <= a) return 0.0;
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return adaptive_simpson(f, a, b, fa, fm, fb, whole, tol, 40);
}

}  // namespace detail

struct HorizonPoint {
    Vec2 position;
    double heading = 0.0;
    double speed = 0.0;
    double s = 0.0;
};

/// Smooth path with its speed profile and t(s) = integral of 1/v ds.
class TimedPath {
public:
    static constexpr double kQuadratureTol = 1e-6;  // seconds, whole path

    TimedPath() = default;

    TimedPath(SmoothPath sp, VelocityProfile v) : path_(std::move(sp)), profile_(v) {
        // Knots at every segment joint, every kink edge, and at most 0.1 m apart.
        std::vector<double> marks(path_.joints().begin(), path_.joints().end());
        for (double k : path_.kinks()) {
            marks.push_back(std::clamp(k - kKinkHalfWidth, 0.0, path_.length()));
            marks.push_back(std::clamp(k + kKinkHalfWidth, 0.0, path_.length()));
        }
        std::sort(marks.begin(), marks.end());
        knots_s_.clear();
        for (std::size_t i = 0; i + 1 < marks.size(); ++i) {
            const double a = marks[i], b = marks[i + 1];
            if (b - a <= 1e-12) continue;
            const int n = std::max(1, static_cast<int>(std::ceil((b - a) / 0.1)));
            for (int k = 0; k < n; ++k) knots_s_.push_back(a + (b - a) * k / n);
        }
        knots_s_.push_back(path_.length());
        const double per_tol = kQuadratureTol / static_cast<double>(knots_s_.size());
        knots_t_.assign(knots_s_.size(), 0.0);
        for (std::size_t i = 1; i < knots_s_.size(); ++i)
            knots_t_[i] = knots_t_[i - 1] + segment_time(knots_s_[i - 1], knots_s_[i], per_tol);
    }

    const SmoothPath& path() const { return path_; }
    const VelocityProfile& profile() const { return profile_; }
    double length() const { return path_.length(); }
    double duration() const { return knots_t_.empty() ? 0.0 : knots_t_.back(); }

    double speed(double s) const { return profile_.at(path_, std::clamp(s, 0.0, length())); }

    double time_at(double s) const {
        s = std::clamp(s, 0.0, length());
        const std::size_t i = knot_below(knots_s_, s);
        return knots_t_[i] + segment_time(knots_s_[i], s, kQuadratureTol / static_cast<double>(knots_s_.size()));
    }

    /// Inverse of time_at by bracketing plus safeguarded Newton (ds/dt = v).
    double arclength_at(double t) const {
        if (t <= 0.0) return 0.0;
        if (t >= duration()) return length();
        const std::size_t i = knot_below(knots_t_, t);
        double lo = knots_s_[i], hi = knots_s_[std::min(i + 1, knots_s_.size() - 1)];
        double s = lo + (hi - lo) * (t - knots_t_[i]) / std::max(knots_t_[i + 1] - knots_t_[i], 1e-300);
        for (int iter = 0; iter < 60; ++iter) {
            const double f = time_at(s) - t;
            if (std::abs(f) < 1e-12) break;
            if (f > 0) hi = s; else lo = s;
            double next = s - f * speed(s);
            if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
            s = next;
        }
        return s;
    }

private:
    static std::size_t knot_below(const std::vector<double>& v, double x) {
        auto it = std::upper_bound(v.begin(), v.end(), x);
        std::size_t i = static_cast<std::size_t>(std::distance(v.begin(), it));
        return std::clamp<std::size_t>(i, 1, v.size() - 1) - 1;
    }

    double segment_time(double a, double b, double tol) const {
        return detail::integrate([this](double s) { return 1.0 / speed(s); }, a, b, tol);
    }

    SmoothPath path_;
    VelocityProfile profile_;
    std::vector<double> knots_s_;
    std::vector<double> knots_t_;
};

inline TimedPath time_parameterize(const SmoothPath& sp, const VelocityProfile& v) { return TimedPath(sp, v); }

/// Point reached H seconds after current_s along the timed path (clamped at the end).
inline HorizonPoint horizon_point(const TimedPath& tp, double current_s, double horizon) {
    const double s0 = std::clamp(current_s, 0.0, tp.length());
    const double s = horizon <= 0.0 ? s0 : tp.arclength_at(tp.time_at(s0) + horizon);
    return {tp.path().position(s), tp.path().heading(s), tp.speed(s), s};
}

/// CSV columns: s, x, y, kappa, v, t.
inline void write_path_csv(std::ostream& os, const TimedPath& tp, double step = 0.05) {
    os << "s,x,y,kappa,v,t\n";
    const int n = std::max(1, static_cast<int>(std::ceil(tp.length() / step)));
    char buf[256];
    for (int i = 0; i <= n; ++i) {
        const double s = tp.length() * i / n;
        const Vec2 p = tp.path().position(s);
        std::snprintf(buf, sizeof buf, "%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", s, p.x(), p.y(), curvature(tp.path(), s),
                      tp.speed(s), tp.time_at(s));
        os << buf;
    }
}

}  // namespace ompnav
