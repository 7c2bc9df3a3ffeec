#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "sqbox/envs/trajectory.hpp"
#include "sqbox/rng.hpp"

namespace sqbox {

// River network of 7 edges in a balanced binary tree. Water and seeds flow
// top -> middle -> bottom: edge 0 is the bottom edge, edges 1-2 the middle
// level, edges 3-4 feed edge 1 and edges 5-6 feed edge 2.
enum class Slot : int { Empty = 0, Invaded = 1, Native = 2 };

enum class Primitive : int {
    DoNothing = 0,
    Eradicate = 1,
    Plant = 2,
    EradicatePlant = 3,
};

inline constexpr int kTamariskEdges = 7;

struct TamariskState {
    std::array<Slot, kTamariskEdges> edges{};

    long invaded_count() const {
        long n = 0;
        for (Slot s : edges) n += s == Slot::Invaded ? 1 : 0;
        return n;
    }
    long native_count() const {
        long n = 0;
        for (Slot s : edges) n += s == Slot::Native ? 1 : 0;
        return n;
    }
    // Dense index in [0, 3^7) for table lookups.
    long index() const {
        long idx = 0;
        for (int e = kTamariskEdges - 1; e >= 0; --e)
            idx = idx * 3 + static_cast<int>(edges[e]);
        return idx;
    }
    static TamariskState from_index(long idx);
};

using TamariskAction = std::array<Primitive, kTamariskEdges>;

struct TamariskConfig {
    long horizon = 50;
    double budget = 2.0;
    double cost_eradicate = 0.5;
    double cost_plant = 0.9;
    double cost_eradicate_plant = 1.2;
    double invasion_penalty = 0.1;      // per invaded edge per step
    double eradication_success = 0.85;  // Eradicate / EradicatePlant
    double death_prob = 0.1;            // per occupied edge per step
    double invaded_upstream_weight = 2.0;
    double native_upstream_weight = 1.0;
    double exogenous_weight = 0.5;   // per species, every empty edge
    double colonization_rate = 0.4;  // P(occupied) = 1 - exp(-rate * W)
    // The top-level filter eradicates literally by default; this switches it
    // to eradicate+plant instead.
    bool top_filter_eradicate_plant = false;
};

double action_cost(const TamariskAction& action, const TamariskConfig& config);

// The fixed rule-based policy: enumerate every feasible action vector under
// the budget (primitives restricted to the slots they apply to), apply the
// five filters in order, keeping at each stage the vectors that satisfy the
// filter on as many edges as possible, then take the lexicographic minimum
// (edge 0 first, DoNothing < Eradicate < Plant < EradicatePlant).
//
// The full table over all 3^7 states is computed up front, so lookups are
// O(1) and const-thread-safe.
class TamariskPolicy {
public:
    explicit TamariskPolicy(const TamariskConfig& config);

    const TamariskAction& operator()(const TamariskState& state) const {
        return table_[state.index()];
    }

private:
    std::vector<TamariskAction> table_;
};

// Single policy evaluation without the table (used to cross-check it).
TamariskAction tamarisk_policy(const TamariskState& state,
                               const TamariskConfig& config);

// One transition. Reward is deterministic given (state, action):
// -(action costs + invasion_penalty * #invaded edges in state). Then, in
// order: actions resolve (eradication succeeds with probability
// eradication_success, planting is certain), every occupied edge dies with
// probability death_prob, and every edge left empty is colonized off that
// snapshot: weight 2 per invaded upstream neighbor, 1 per native one, plus
// 0.5 exogenous arrival per species; occupied with probability
// 1 - exp(-0.4 W), species drawn by weight.
std::pair<TamariskState, double> tamarisk_step(const TamariskState& state,
                                               const TamariskAction& action,
                                               const TamariskConfig& config,
                                               Rng& rng);

// Start distribution: each edge uniform over the three slot states.
TamariskState random_tamarisk_start(Rng& rng);

// Features are the 7 slot codes (Empty 0, Invaded 1, Native 2) in edge order.
std::vector<double> tamarisk_features(const TamariskState& state);

std::vector<TrajectoryRecord> sample_trajectories(const TamariskConfig& config,
                                                  long n, std::uint64_t seed);

std::string tamarisk_config_json(const TamariskConfig& config);
TamariskConfig tamarisk_config_from_json(const std::string& text);

}  // namespace sqbox
