#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sqbox/envs/trajectory.hpp"
#include "sqbox/rng.hpp"

namespace sqbox {

struct BattleConfig {
    long horizon = 57;
    long blue_min = 5;
    long blue_max = 20;
    long red_min = 5;
    long red_max = 10;
    long reinforce_cap_max = 15;  // N ~ U{0..reinforce_cap_max}, hidden
    long engage_time = 5;         // combat from this step on
    long reinforce_time = 14;     // red reinforced at the start of this step
    double hit_prob = 0.08;       // per opposing unit per step
    double noise_sd = 0.05;
    bool reward_noise = true;  // off reproduces the discrete-ties variant
};

struct BattleState {
    long blue = 0;
    long red = 0;
    long t = 0;
    long reinforcement_cap = 0;  // N, drawn at the start, not a feature
    bool reinforced = false;
};

// One step. At the start of step reinforce_time, red gains U{0..N} units.
// From engage_time on, the sides take simultaneous casualties, each
// ~ Binomial(opponent units, hit_prob) capped at own units. Reward is
// (red losses) - (blue losses), plus Gaussian(0, noise_sd) when enabled.
std::pair<BattleState, double> battle_step(const BattleState& state,
                                           const BattleConfig& config,
                                           Rng& rng);

BattleState random_battle_start(const BattleConfig& config, Rng& rng);

// Features are the observable start counts (blue_0, red_0).
std::vector<double> battle_features(const BattleState& state);

std::vector<TrajectoryRecord> sample_trajectories(const BattleConfig& config,
                                                  long n, std::uint64_t seed);

std::string battle_config_json(const BattleConfig& config);
BattleConfig battle_config_from_json(const std::string& text);

}  // namespace sqbox
