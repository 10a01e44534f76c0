#pragma once
// Comparative experiment: every row (algorithm label, prediction mode, speed
// cap) runs over the same scenario list; results come out as a per-episode
// CSV and a success-rate summary table.
//
// Suite file (JSON):
//   { "schema": "ompnav.suite/1",
//     "rows": [ {"label": "...", "prediction": "none", "v_max": 3.0, "weights": "..."}, ... ],
//     "corridors": {"first_seed": 1, "count": 20}          (generated corridors)
//     "scenarios": ["a.json", ...], "repetitions": 1 }     (and/or scenario files)
// Each scenario file runs `repetitions` times with seeds seed, seed+1, ...

#include "ompnav/episode.hpp"
#include "ompnav/scenario.hpp"

#include <array>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace ompnav {

inline constexpr const char* kSuiteSchema = "ompnav.suite/1";

struct ExperimentRow {
    std::string label;
    PredictionMode mode = PredictionMode::None;
    double v_max = 3.0;
    std::string weights;  // Learned mode only
};

struct Suite {
    std::vector<ExperimentRow> rows;
    std::vector<ScenarioConfig> scenarios;  // mode and v_max are overridden per row
};

struct EpisodeRecord {
    std::string scenario;
    std::uint64_t seed = 0;
    RunMetrics metrics;
    std::string error;  // non-empty when the episode threw
};

struct RowResult {
    ExperimentRow row;
    std::vector<EpisodeRecord> episodes;

    int count() const { return static_cast<int>(episodes.size()); }
    int successes() const {
        int n = 0;
        for (const auto& e : episodes) n += e.error.empty() && e.metrics.success;
        return n;
    }
    int errors() const {
        int n = 0;
        for (const auto& e : episodes) n += !e.error.empty();
        return n;
    }
    double success_rate() const { return episodes.empty() ? 0.0 : double(successes()) / count(); }
};

struct ExperimentResult {
    std::vector<RowResult> rows;
};

/// The comparison rows that need no weight file, over generated corridors.
inline Suite default_suite(std::uint64_t first_seed = 1, int count = 20) {
    Suite s;
    s.rows = {{"Without Map Prediction", PredictionMode::None, 3.0, {}},
              {"Without Map Prediction", PredictionMode::None, 4.0, {}},
              {"With Baseline Prediction", PredictionMode::Baseline, 4.0, {}}};
    for (int i = 0; i < count; ++i)
        s.scenarios.push_back(corridor_scenario(first_seed + i, 3.0, PredictionMode::None));
    return s;
}

inline Suite suite_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
    try {
        if (j.at("schema").get<std::string>() != kSuiteSchema)
            throw Error(ErrorCode::ScenarioInvalid, "unsupported suite schema");
        Suite s;
        for (const auto& r : j.at("rows")) {
            ExperimentRow row;
            row.mode = parse_prediction_mode(r.value("prediction", std::string("none")));
            row.v_max = r.value("v_max", row.v_max);
            row.label = r.value("label", std::string(to_string(row.mode)));
            if (r.contains("weights")) {
                const std::filesystem::path w = r["weights"].get<std::string>();
                row.weights = (w.is_absolute() ? w : base_dir / w).string();
            }
            s.rows.push_back(row);
        }
        if (j.contains("corridors")) {
            const auto& c = j["corridors"];
            const std::uint64_t first = c.value("first_seed", std::uint64_t{1});
            const int count = c.value("count", 20);
            for (int i = 0; i < count; ++i)
                s.scenarios.push_back(corridor_scenario(first + i, 3.0, PredictionMode::None));
        }
        const int reps = j.value("repetitions", 1);
        if (reps < 1) throw Error(ErrorCode::ScenarioInvalid, "repetitions must be >= 1");
        if (j.contains("scenarios"))
            for (const auto& f : j["scenarios"]) {
                const ScenarioConfig base = load_scenario((base_dir / f.get<std::string>()).string());
                for (int k = 0; k < reps; ++k) {
                    ScenarioConfig sc = base;
                    sc.seed = base.seed + static_cast<std::uint64_t>(k);
                    s.scenarios.push_back(sc);
                }
            }
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ScenarioInvalid, std::string("suite json: ") + e.what());
    }
}

inline Suite load_suite(const std::string& path) {
    return suite_from_json(read_json_file(path), std::filesystem::path(path).parent_path());
}

using ProgressFn = std::function<void(const ExperimentRow&, const EpisodeRecord&)>;

/// Runs every row over every scenario. Episode errors are recorded on the
/// row and the suite carries on.
inline ExperimentResult run_experiment(const Suite& suite, const EpisodeOptions& opt = {},
                                       const ProgressFn& progress = {}) {
    if (suite.rows.empty() || suite.scenarios.empty())
        throw Error(ErrorCode::ScenarioInvalid, "suite needs at least one row and one scenario");
    ExperimentResult out;
    for (const ExperimentRow& row : suite.rows) {
        RowResult rr;
        rr.row = row;
        for (ScenarioConfig sc : suite.scenarios) {
            sc.mode = row.mode;
            sc.v_max = row.v_max;
            if (!row.weights.empty()) sc.weights = row.weights;
            EpisodeRecord rec;
            rec.scenario = sc.name;
            rec.seed = sc.seed;
            try {
                rec.metrics = run_episode(sc, opt).metrics;
            } catch (const Error& e) {
                rec.error = std::string(to_string(e.code())) + ": " + e.what();
            }
            if (progress) progress(row, rec);
            rr.episodes.push_back(rec);
        }
        out.rows.push_back(std::move(rr));
    }
    return out;
}

inline void write_experiment_csv(std::ostream& os, const ExperimentResult& r) {
    os << "label,mode,v_max,scenario,seed,success,collision,timeout,time_to_goal,peak_speed,min_clearance,"
          "replan_count,plan_failures,horizon_in_unknown,distance,error\n";
    char buf[512];
    for (const RowResult& row : r.rows)
        for (const EpisodeRecord& e : row.episodes) {
            const RunMetrics& m = e.metrics;
            std::snprintf(buf, sizeof buf, "%.6g,%s,%llu,%d,%d,%d,%.6f,%.6f,%.6f,%d,%d,%d,%.6f,", row.row.v_max,
                          e.scenario.c_str(), static_cast<unsigned long long>(e.seed), m.success, m.collision,
                          m.timeout, m.time_to_goal, m.peak_speed, m.min_clearance, m.replan_count,
                          m.plan_failures, m.horizon_in_unknown, m.distance);
            os << '"' << row.row.label << "\"," << to_string(row.row.mode) << ',' << buf << '"' << e.error << "\"\n";
        }
}

/// Aligned text table: Algorithm, Max Speed, Success Rate.
inline std::string format_table(const ExperimentResult& r) {
    std::vector<std::array<std::string, 3>> cells{{"Algorithm", "Max Speed", "Success Rate"}};
    for (const RowResult& row : r.rows) {
        std::ostringstream v, s;
        v << std::defaultfloat << row.row.v_max << " m/s";
        s << row.successes() << "/" << row.count();
        if (row.errors()) s << " (" << row.errors() << " errors)";
        cells.push_back({row.row.label, v.str(), s.str()});
    }
    std::array<std::size_t, 3> w{};
    for (const auto& c : cells)
        for (int i = 0; i < 3; ++i) w[i] = std::max(w[i], c[i].size());
    std::ostringstream os;
    auto line = [&](const std::array<std::string, 3>& c) {
        os << std::left << std::setw(int(w[0])) << c[0] << "  " << std::setw(int(w[1])) << c[1] << "  " << c[2]
           << '\n';
    };
    line(cells[0]);
    os << std::string(w[0], '-') << "  " << std::string(w[1], '-') << "  " << std::string(w[2], '-') << '\n';
    for (std::size_t i = 1; i < cells.size(); ++i) line(cells[i]);
    return os.str();
}

}  // namespace ompnav
