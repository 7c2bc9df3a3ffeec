#include "sqbox/envs/trajectory.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "sqbox/errors.hpp"

namespace sqbox {

namespace {
using json = nlohmann::json;
}

std::vector<double> cumulative_behavior(const std::vector<double>& rewards) {
    std::vector<double> behavior(rewards.size());
    double sum = 0.0;
    for (std::size_t t = 0; t < rewards.size(); ++t) {
        sum += rewards[t];
        behavior[t] = sum;
    }
    return behavior;
}

TrajectoryDataset to_dataset(const std::vector<TrajectoryRecord>& records) {
    return to_dataset(records, 0, records.size());
}

TrajectoryDataset to_dataset(const std::vector<TrajectoryRecord>& records,
                             std::size_t begin, std::size_t end) {
    if (begin >= end || end > records.size())
        throw BadSplit("to_dataset: empty or out-of-range record slice");
    const std::size_t d = records[begin].start_features.size();
    const std::size_t h = records[begin].behavior.size();
    std::vector<double> features;
    std::vector<double> behavior;
    features.reserve((end - begin) * d);
    behavior.reserve((end - begin) * h);
    for (std::size_t i = begin; i < end; ++i) {
        const TrajectoryRecord& r = records[i];
        if (r.start_features.size() != d || r.behavior.size() != h)
            throw LengthMismatch("to_dataset: ragged records");
        features.insert(features.end(), r.start_features.begin(),
                        r.start_features.end());
        behavior.insert(behavior.end(), r.behavior.begin(), r.behavior.end());
    }
    return {Matrix(std::move(features), end - begin, d),
            Matrix(std::move(behavior), end - begin, h)};
}

void save_trajectories(const TrajectoryFile& file, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("save_trajectories: cannot open " + path);
    json meta;
    meta["kind"] = "trajectories";
    meta["env"] = file.env;
    meta["count"] = file.records.size();
    meta["horizon"] =
        file.records.empty() ? 0 : file.records.front().behavior.size();
    meta["seed"] = file.seed;
    meta["config"] = json::parse(file.config_json);
    out << meta.dump() << "\n";
    for (const TrajectoryRecord& r : file.records) {
        json line;
        line["id"] = r.id;
        line["start_features"] = r.start_features;
        line["rewards"] = r.rewards;
        line["behavior"] = r.behavior;
        out << line.dump() << "\n";
    }
    if (!out) throw IoError("save_trajectories: write failed for " + path);
}

TrajectoryFile load_trajectories(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("load_trajectories: cannot open " + path);
    std::string line;
    if (!std::getline(in, line))
        throw IoError("load_trajectories: " + path + " is empty");
    TrajectoryFile file;
    try {
        json meta = json::parse(line);
        if (meta.value("kind", "") != "trajectories")
            throw IoError("load_trajectories: " + path +
                          " is not a trajectory file");
        file.env = meta.value("env", "");
        file.seed = meta.value("seed", std::uint64_t{0});
        file.config_json = meta.at("config").dump();
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            json doc = json::parse(line);
            TrajectoryRecord r;
            r.id = doc.at("id").get<long>();
            r.start_features =
                doc.at("start_features").get<std::vector<double>>();
            r.rewards = doc.at("rewards").get<std::vector<double>>();
            r.behavior = doc.at("behavior").get<std::vector<double>>();
            file.records.push_back(std::move(r));
        }
    } catch (const json::exception& e) {
        throw IoError("load_trajectories: " + path + ": " + e.what());
    }
    return file;
}

}  // namespace sqbox
