// ompnav command line: run one scenario, bench a suite, plot logs, collect
// training pairs.

#include "ompnav/ompnav.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace ompnav;

namespace {

constexpr int kExitScenarioInvalid = 2;
constexpr int kExitError = 1;

struct Common {
    std::optional<std::uint64_t> seed;
    std::optional<double> v_max;
    std::string mode;
    std::string weights;
    std::string out = "out";
};

void add_common(CLI::App* app, Common& c) {
    app->add_option("--seed", c.seed, "RNG seed (scenario seed override)");
    app->add_option("--v-max", c.v_max, "Speed cap in m/s");
    app->add_option("--mode", c.mode, "Prediction mode: none, baseline, learned");
    app->add_option("--weights", c.weights, "OMPW weight file for learned mode");
    app->add_option("--out", c.out, "Output directory")->capture_default_str();
}

ScenarioConfig scenario_for(const std::string& file, std::optional<std::uint64_t> corridor, const Common& c) {
    ScenarioConfig sc;
    if (!file.empty())
        sc = load_scenario(file);
    else
        sc = corridor_scenario(corridor.value_or(c.seed.value_or(1)), 3.0, PredictionMode::None);
    if (c.seed) sc.seed = *c.seed;
    if (c.v_max) sc.v_max = *c.v_max;
    if (!c.mode.empty()) sc.mode = parse_prediction_mode(c.mode);
    if (!c.weights.empty()) sc.weights = c.weights;
    sc.validate();
    return sc;
}

nlohmann::json metrics_json(const RunMetrics& m) {
    return {{"success", m.success},
            {"collision", m.collision},
            {"timeout", m.timeout},
            {"time_to_goal", m.time_to_goal},
            {"peak_speed", m.peak_speed},
            {"min_clearance", m.min_clearance},
            {"replan_count", m.replan_count},
            {"plan_failures", m.plan_failures},
            {"horizon_in_unknown", m.horizon_in_unknown},
            {"distance", m.distance}};
}

std::ofstream open_out(const fs::path& p) {
    std::ofstream os(p);
    if (!os) throw Error(ErrorCode::Io, "cannot open " + p.string());
    return os;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Navigation with predicted occupancy maps"};
    app.require_subcommand(1);

    Common rc;
    std::string run_file;
    std::optional<std::uint64_t> run_corridor;
    auto* run = app.add_subcommand("run", "Run one scenario");
    run->add_option("scenario", run_file, "Scenario JSON file");
    run->add_option("--corridor", run_corridor, "Generated corridor seed instead of a file");
    add_common(run, rc);

    Common bc;
    std::string suite_file;
    int bench_count = 20;
    auto* bench = app.add_subcommand("bench", "Run the comparative suite");
    bench->add_option("suite", suite_file, "Suite JSON file (default: generated corridors)");
    bench->add_option("--count", bench_count, "Corridor count for the default suite")->capture_default_str();
    add_common(bench, bc);

    Common pc;
    std::vector<std::string> plot_logs;
    std::string plot_env;
    std::optional<std::uint64_t> plot_corridor;
    auto* plot = app.add_subcommand("plot", "Plot trajectory logs");
    plot->add_option("logs", plot_logs, "Trajectory CSV files")->required();
    plot->add_option("--scenario", plot_env, "Scenario JSON whose environment is drawn");
    plot->add_option("--corridor", plot_corridor, "Generated corridor seed whose environment is drawn");
    add_common(plot, pc);

    Common cc;
    std::string collect_file;
    int collect_count = 1, collect_every = 1;
    auto* collect = app.add_subcommand("collect", "Drive episodes and write training pairs");
    collect->add_option("scenario", collect_file, "Scenario JSON file (default: generated corridors)");
    collect->add_option("--count", collect_count, "Number of corridor seeds")->capture_default_str();
    collect->add_option("--every", collect_every, "Keep every n-th map update")->capture_default_str();
    add_common(collect, cc);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            const ScenarioConfig sc = scenario_for(run_file, run_corridor, rc);
            const EpisodeResult r = run_episode(sc);
            fs::create_directories(rc.out);
            auto log = open_out(fs::path(rc.out) / "log.csv");
            write_log_csv(log, r.log);
            auto plans = open_out(fs::path(rc.out) / "plans.csv");
            write_plan_events_csv(plans, r.log);
            auto mj = open_out(fs::path(rc.out) / "metrics.json");
            mj << metrics_json(r.metrics).dump(2) << '\n';
            auto sj = open_out(fs::path(rc.out) / "scenario.json");
            sj << to_json(sc).dump(2) << '\n';
            emit_plots((fs::path(rc.out) / "plot").string(), sc.env, {r.log}, sc.goal);
            std::cout << sc.name << " " << to_string(sc.mode) << " @ " << sc.v_max << " m/s: "
                      << (r.metrics.success ? "success" : r.metrics.collision ? "collision" : "timeout") << " at t="
                      << r.metrics.time_to_goal << " s, peak " << r.metrics.peak_speed << " m/s\n";
            return 0;
        }
        if (*bench) {
            Suite suite;
            if (!suite_file.empty()) {
                suite = load_suite(suite_file);
            } else {
                suite = default_suite(bc.seed.value_or(1), bench_count);
                if (!bc.weights.empty())
                    suite.rows.push_back({"With Learned Prediction", PredictionMode::Learned, 4.0, bc.weights});
            }
            for (ExperimentRow& row : suite.rows) {
                if (bc.v_max) row.v_max = *bc.v_max;
                if (!bc.mode.empty()) row.mode = parse_prediction_mode(bc.mode);
                if (!bc.weights.empty() && row.mode == PredictionMode::Learned) row.weights = bc.weights;
            }
            const ExperimentResult r = run_experiment(suite, {}, [](const ExperimentRow& row, const EpisodeRecord& e) {
                std::cerr << row.label << " @ " << row.v_max << " " << e.scenario << ": "
                          << (!e.error.empty() ? e.error : e.metrics.success ? "success" : "fail") << '\n';
            });
            fs::create_directories(bc.out);
            auto csv = open_out(fs::path(bc.out) / "results.csv");
            write_experiment_csv(csv, r);
            const std::string table = format_table(r);
            auto txt = open_out(fs::path(bc.out) / "table.txt");
            txt << table;
            std::cout << table;
            return 0;
        }
        if (*plot) {
            Environment env;
            std::optional<Vec2> goal;
            if (!plot_env.empty() || plot_corridor) {
                const ScenarioConfig sc = scenario_for(plot_env, plot_corridor, pc);
                env = sc.env;
                goal = sc.goal;
            }
            std::vector<EpisodeLog> logs;
            for (const std::string& f : plot_logs) {
                std::ifstream is(f);
                if (!is) throw Error(ErrorCode::Io, "cannot open " + f);
                for (EpisodeLog& l : read_logs_csv(is)) logs.push_back(std::move(l));
            }
            if (env.walls.empty()) {
                // No environment given: frame the trajectories.
                env.lo = Vec2::Constant(1e300);
                env.hi = Vec2::Constant(-1e300);
                for (const EpisodeLog& l : logs)
                    for (const LogSample& s : l.samples) {
                        env.lo = env.lo.cwiseMin(s.x.position());
                        env.hi = env.hi.cwiseMax(s.x.position());
                    }
                if (env.lo.x() > env.hi.x()) env.lo = env.hi = Vec2::Zero();
                env.lo -= Vec2::Constant(1.0);
                env.hi += Vec2::Constant(1.0);
            }
            fs::create_directories(pc.out);
            emit_plots((fs::path(pc.out) / "plot").string(), env, logs, goal);
            std::cout << "wrote " << (fs::path(pc.out) / "plot.svg").string() << '\n';
            return 0;
        }
        if (*collect) {
            int total = 0;
            for (int i = 0; i < (collect_file.empty() ? collect_count : 1); ++i) {
                Common c = cc;
                if (collect_file.empty()) c.seed = cc.seed.value_or(1) + static_cast<std::uint64_t>(i);
                const ScenarioConfig sc = scenario_for(collect_file, c.seed, c);
                const EpisodeResult r = run_episode(sc);
                CollectOptions co;
                co.every = collect_every;
                const auto pairs = collect_training_pairs(r.log, sc.env, co);
                total += write_training_pairs(cc.out, pairs, sc.name + "_");
            }
            std::cout << "wrote " << total << " pairs to " << cc.out << '\n';
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << to_string(e.code()) << ": " << e.what() << '\n';
        return e.code() == ErrorCode::ScenarioInvalid ? kExitScenarioInvalid : kExitError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitError;
    }
    return 0;
}
