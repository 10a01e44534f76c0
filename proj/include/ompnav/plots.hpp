#pragma once
// SVG figure of executed trajectories over the environment outline, one
// polyline per log coloured by prediction mode, plus a speed-vs-time panel.
// Output is a pure function of the inputs.

#include "ompnav/environment.hpp"
#include "ompnav/episode.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace ompnav {

inline const char* mode_colour(PredictionMode m) {
    switch (m) {
        case PredictionMode::None: return "#d62728";
        case PredictionMode::Baseline: return "#1f77b4";
        case PredictionMode::Learned: return "#2ca02c";
    }
    return "#000000";
}

namespace detail {

inline std::string fmt(double v) {
    char b[32];
    std::snprintf(b, sizeof b, "%.3f", v);
    return b;
}

inline bool has_motion(const EpisodeLog& log) {
    for (const LogSample& s : log.samples)
        if ((s.x.position() - log.samples.front().x.position()).norm() > 1e-9) return true;
    return false;
}

}  // namespace detail

struct PlotOptions {
    double map_px = 480.0;  // width of the map panel
    double speed_px = 360.0;
    double margin = 40.0;
};

/// Two-panel SVG: left the environment with one trajectory per log, right
/// speed over time. A log that never moves is drawn as a point marker.
inline void write_svg(std::ostream& os, const Environment& env, const std::vector<EpisodeLog>& logs,
                      const std::optional<Vec2>& goal = std::nullopt, const PlotOptions& po = {}) {
    using detail::fmt;
    const Vec2 ext = env.hi - env.lo;
    const double scale = po.map_px / std::max(ext.x(), 1e-9);
    const double map_h = ext.y() * scale;
    const double panel_h = std::max(map_h, 240.0);
    const double W = po.margin * 3 + po.map_px + po.speed_px, H = panel_h + po.margin * 2 + 20.0 * logs.size();
    auto X = [&](double x) { return po.margin + (x - env.lo.x()) * scale; };
    auto Y = [&](double y) { return po.margin + map_h - (y - env.lo.y()) * scale; };

    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(W) << "\" height=\"" << fmt(H)
       << "\" viewBox=\"0 0 " << fmt(W) << ' ' << fmt(H) << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<g id=\"walls\" stroke=\"black\" stroke-width=\"2\">\n";
    for (const Segment& s : env.walls)
        os << "<line x1=\"" << fmt(X(s.a.x())) << "\" y1=\"" << fmt(Y(s.a.y())) << "\" x2=\"" << fmt(X(s.b.x()))
           << "\" y2=\"" << fmt(Y(s.b.y())) << "\"/>\n";
    os << "</g>\n";
    if (goal)
        os << "<circle id=\"goal\" cx=\"" << fmt(X(goal->x())) << "\" cy=\"" << fmt(Y(goal->y()))
           << "\" r=\"6\" fill=\"none\" stroke=\"black\"/>\n";

    double t_max = 1e-9, v_max = 1e-9;
    for (const EpisodeLog& log : logs)
        for (const LogSample& s : log.samples) {
            t_max = std::max(t_max, s.t);
            v_max = std::max(v_max, s.x.v);
        }
    const double sx0 = po.margin * 2 + po.map_px;
    auto SX = [&](double t) { return sx0 + t / t_max * po.speed_px; };
    auto SY = [&](double v) { return po.margin + panel_h - v / (v_max * 1.1) * panel_h; };
    os << "<g id=\"speed-axes\" stroke=\"black\" fill=\"none\">\n<polyline points=\"" << fmt(SX(0)) << ','
       << fmt(SY(v_max * 1.1)) << ' ' << fmt(SX(0)) << ',' << fmt(SY(0)) << ' ' << fmt(SX(t_max)) << ','
       << fmt(SY(0)) << "\"/>\n</g>\n";
    os << "<text x=\"" << fmt(sx0) << "\" y=\"" << fmt(po.margin - 8) << "\" font-size=\"12\">speed (m/s), max "
       << fmt(v_max) << ", over " << fmt(t_max) << " s</text>\n";

    for (std::size_t i = 0; i < logs.size(); ++i) {
        const EpisodeLog& log = logs[i];
        const char* c = mode_colour(log.mode);
        const std::string id = "log-" + std::to_string(i);
        if (log.samples.empty()) continue;
        if (!detail::has_motion(log)) {
            const Vec2 p = log.samples.front().x.position();
            os << "<circle id=\"" << id << "\" class=\"point\" cx=\"" << fmt(X(p.x())) << "\" cy=\"" << fmt(Y(p.y()))
               << "\" r=\"4\" fill=\"" << c << "\"/>\n";
        } else {
            os << "<polyline id=\"" << id << "\" class=\"trajectory\" fill=\"none\" stroke=\"" << c
               << "\" stroke-width=\"2\" points=\"";
            for (const LogSample& s : log.samples) os << fmt(X(s.x.x)) << ',' << fmt(Y(s.x.y)) << ' ';
            os << "\"/>\n";
        }
        os << "<polyline id=\"" << id << "-speed\" class=\"speed\" fill=\"none\" stroke=\"" << c
           << "\" stroke-width=\"1.5\" points=\"";
        for (const LogSample& s : log.samples) os << fmt(SX(s.t)) << ',' << fmt(SY(s.x.v)) << ' ';
        os << "\"/>\n";
        const double ly = po.margin + panel_h + 20.0 * (i + 1);
        os << "<g class=\"legend\"><line x1=\"" << fmt(po.margin) << "\" y1=\"" << fmt(ly - 4) << "\" x2=\""
           << fmt(po.margin + 20) << "\" y2=\"" << fmt(ly - 4) << "\" stroke=\"" << c
           << "\" stroke-width=\"3\"/><text x=\"" << fmt(po.margin + 26) << "\" y=\"" << fmt(ly)
           << "\" font-size=\"12\">" << to_string(log.mode) << " @ " << fmt(log.v_max) << " m/s"
           << (log.name.empty() ? "" : " (" + log.name + ")") << "</text></g>\n";
    }
    os << "</svg>\n";
}

/// Trajectory CSV back into logs; a new log starts wherever the mode
/// changes or time goes backwards.
inline std::vector<EpisodeLog> read_logs_csv(std::istream& is) {
    std::vector<EpisodeLog> out;
    for (const ParsedSample& p : read_log_csv(is)) {
        const PredictionMode m = parse_prediction_mode(p.mode);
        if (out.empty() || out.back().mode != m || (!out.back().samples.empty() && p.t < out.back().samples.back().t)) {
            out.emplace_back();
            out.back().mode = m;
        }
        EpisodeLog& log = out.back();
        log.samples.push_back({p.t, RobotState{p.x, p.y, p.v, p.theta, p.delta}, ControlInput{p.u0, p.u1}});
        log.v_max = std::max(log.v_max, p.v);
    }
    return out;
}

/// Writes `<stem>.svg` and `<stem>.csv` (all logs' samples, mode column set).
inline void emit_plots(const std::string& stem, const Environment& env, const std::vector<EpisodeLog>& logs,
                       const std::optional<Vec2>& goal = std::nullopt) {
    std::ofstream svg(stem + ".svg");
    if (!svg) throw Error(ErrorCode::Io, "cannot open " + stem + ".svg");
    write_svg(svg, env, logs, goal);
    std::ofstream csv(stem + ".csv");
    if (!csv) throw Error(ErrorCode::Io, "cannot open " + stem + ".csv");
    for (std::size_t i = 0; i < logs.size(); ++i) {
        std::ostringstream part;
        write_log_csv(part, logs[i]);
        std::string s = part.str();
        if (i > 0) s = s.substr(s.find('\n') + 1);  // one header
        csv << s;
    }
}

}  // namespace ompnav
