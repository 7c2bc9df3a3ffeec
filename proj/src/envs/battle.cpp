#include "sqbox/envs/battle.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "sqbox/errors.hpp"
#include "sqbox/parallel.hpp"

namespace sqbox {

namespace {

using json = nlohmann::json;

constexpr std::uint64_t kBattleSalt = 0x626174746cull;

}  // namespace

std::pair<BattleState, double> battle_step(const BattleState& state,
                                           const BattleConfig& config,
                                           Rng& rng) {
    BattleState next = state;
    if (!next.reinforced && next.t == config.reinforce_time) {
        next.red += rng.uniform_int(0, next.reinforcement_cap);
        next.reinforced = true;
    }
    long red_losses = 0;
    long blue_losses = 0;
    if (next.t >= config.engage_time) {
        red_losses = std::min(rng.binomial(next.blue, config.hit_prob),
                              next.red);
        blue_losses = std::min(rng.binomial(next.red, config.hit_prob),
                               next.blue);
    }
    double reward = static_cast<double>(red_losses - blue_losses);
    if (config.reward_noise) reward += rng.normal(0.0, config.noise_sd);
    next.red -= red_losses;
    next.blue -= blue_losses;
    next.t += 1;
    return {next, reward};
}

BattleState random_battle_start(const BattleConfig& config, Rng& rng) {
    BattleState s;
    s.blue = rng.uniform_int(config.blue_min, config.blue_max);
    s.red = rng.uniform_int(config.red_min, config.red_max);
    s.reinforcement_cap = rng.uniform_int(0, config.reinforce_cap_max);
    return s;
}

std::vector<double> battle_features(const BattleState& state) {
    return {static_cast<double>(state.blue), static_cast<double>(state.red)};
}

std::vector<TrajectoryRecord> sample_trajectories(const BattleConfig& config,
                                                  long n,
                                                  std::uint64_t seed) {
    if (n < 1)
        throw InsufficientData("sample_trajectories: n must be >= 1");
    if (config.horizon < 1)
        throw InvalidConfig("sample_trajectories: horizon must be >= 1");
    std::vector<TrajectoryRecord> records(n);
    const std::uint64_t env_seed = mix_seed(seed, kBattleSalt);
    parallel_for(n, default_workers(), [&](long i) {
        Rng rng(env_seed, static_cast<std::uint64_t>(i));
        BattleState state = random_battle_start(config, rng);
        TrajectoryRecord& r = records[i];
        r.id = i;
        r.start_features = battle_features(state);
        r.rewards.resize(config.horizon);
        for (long t = 0; t < config.horizon; ++t) {
            auto [next, reward] = battle_step(state, config, rng);
            r.rewards[t] = reward;
            state = next;
        }
        r.behavior = cumulative_behavior(r.rewards);
    });
    return records;
}

std::string battle_config_json(const BattleConfig& c) {
    json doc;
    doc["env"] = "battle";
    doc["horizon"] = c.horizon;
    doc["blue_min"] = c.blue_min;
    doc["blue_max"] = c.blue_max;
    doc["red_min"] = c.red_min;
    doc["red_max"] = c.red_max;
    doc["reinforce_cap_max"] = c.reinforce_cap_max;
    doc["engage_time"] = c.engage_time;
    doc["reinforce_time"] = c.reinforce_time;
    doc["hit_prob"] = c.hit_prob;
    doc["noise_sd"] = c.noise_sd;
    doc["reward_noise"] = c.reward_noise;
    return doc.dump();
}

BattleConfig battle_config_from_json(const std::string& text) {
    BattleConfig c;
    try {
        json doc = json::parse(text);
        c.horizon = doc.value("horizon", c.horizon);
        c.blue_min = doc.value("blue_min", c.blue_min);
        c.blue_max = doc.value("blue_max", c.blue_max);
        c.red_min = doc.value("red_min", c.red_min);
        c.red_max = doc.value("red_max", c.red_max);
        c.reinforce_cap_max =
            doc.value("reinforce_cap_max", c.reinforce_cap_max);
        c.engage_time = doc.value("engage_time", c.engage_time);
        c.reinforce_time = doc.value("reinforce_time", c.reinforce_time);
        c.hit_prob = doc.value("hit_prob", c.hit_prob);
        c.noise_sd = doc.value("noise_sd", c.noise_sd);
        c.reward_noise = doc.value("reward_noise", c.reward_noise);
    } catch (const json::exception& e) {
        throw InvalidConfig(std::string("battle config: ") + e.what());
    }
    return c;
}

}  // namespace sqbox
