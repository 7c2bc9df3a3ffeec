#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sqbox/trajband.hpp"

namespace sqbox {

// One rollout: start-state features and the per-step rewards, plus the
// behavior vector b_t = sum of rewards through step t (exact running sum).
struct TrajectoryRecord {
    long id = 0;
    std::vector<double> start_features;
    std::vector<double> rewards;
    std::vector<double> behavior;
};

// Reward list -> cumulative behavior.
std::vector<double> cumulative_behavior(const std::vector<double>& rewards);

// Rows of records -> dataset matrices (feature/horizon widths must agree).
TrajectoryDataset to_dataset(const std::vector<TrajectoryRecord>& records);
TrajectoryDataset to_dataset(const std::vector<TrajectoryRecord>& records,
                             std::size_t begin, std::size_t end);

struct TrajectoryFile {
    std::string env;          // "tamarisk" | "battle" | free-form
    std::string config_json;  // resolved generator config, verbatim
    std::uint64_t seed = 0;
    std::vector<TrajectoryRecord> records;
};

// Line-delimited format: first line is a meta object {kind, env, count,
// horizon, seed, config}; each following line is one record.
void save_trajectories(const TrajectoryFile& file, const std::string& path);
TrajectoryFile load_trajectories(const std::string& path);

}  // namespace sqbox
