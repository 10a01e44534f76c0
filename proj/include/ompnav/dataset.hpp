#pragma once
// Self-supervised training pairs: the mapper is replayed along an episode's
// map events; at sampled poses the 6 m observed submap is paired with the
// 7.5 m ground-truth submap around the same cell. Files use the grid format
// (grid_io.hpp): <dir>/<prefix>NNNNN_input.ompg and ..._target.ompg.

#include "ompnav/episode.hpp"
#include "ompnav/grid_io.hpp"

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

namespace ompnav {

struct TrainingPair {
    RobotState pose;
    OccupancyGrid input;   // 120 x 120, observed
    OccupancyGrid target;  // 150 x 150, ground truth, co-centred
};

struct CollectOptions {
    int every = 1;  // keep every n-th map event
    EpisodeOptions episode;
};

/// Replays the mapping of `log` (same sensor model, noise-free) and cuts
/// one pair per sampled map event.
inline std::vector<TrainingPair> collect_training_pairs(const EpisodeLog& log, const Environment& env,
                                                        const CollectOptions& opt = {}) {
    if (opt.every < 1) throw Error(ErrorCode::InvalidArgument, "every must be >= 1");
    std::vector<TrainingPair> out;
    if (log.maps.empty()) return out;
    const EpisodeOptions& eo = opt.episode;
    Mapper mapper(episode_grid(env, eo.map_padding), eo.sensor, eo.mapper);
    const OccupancyGrid truth = ground_truth_grid(env, mapper.grid(), log.maps.front().pose.position());
    const double res = truth.resolution();
    for (std::size_t i = 0; i < log.maps.size(); ++i) {
        const RobotState& pose = log.maps[i].pose;
        if (i == 0 && eo.initial_survey)
            for (int k = 1; k < 4; ++k) {
                RobotState look = pose;
                look.theta = wrap_angle(pose.theta + k * std::numbers::pi / 2);
                mapper.observe(env, look);
            }
        mapper.observe(env, pose);
        if (i % static_cast<std::size_t>(opt.every) != 0) continue;
        out.push_back({pose, extract_submap(mapper.grid(), pose.position(), kPredictorInputSize * res),
                       extract_submap(truth, pose.position(), kPredictorOutputSize * res)});
    }
    return out;
}

/// Writes the pairs; returns the number written.
inline int write_training_pairs(const std::string& dir, const std::vector<TrainingPair>& pairs,
                                const std::string& prefix = "") {
    std::filesystem::create_directories(dir);
    int n = 0;
    for (const TrainingPair& p : pairs) {
        char name[64];
        std::snprintf(name, sizeof name, "%05d", n);
        const std::filesystem::path base = std::filesystem::path(dir) / (prefix + name);
        save_grid(base.string() + "_input.ompg", p.input);
        save_grid(base.string() + "_target.ompg", p.target);
        ++n;
    }
    return n;
}

}  // namespace ompnav
