#include "sqbox/envs/tamarisk.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "sqbox/errors.hpp"
#include "sqbox/parallel.hpp"

namespace sqbox {

namespace {

using json = nlohmann::json;

constexpr std::uint64_t kTamariskSalt = 0x74616d6172ull;

constexpr long kStateCount = 2187;  // 3^7

// Upstream neighbors (seed sources): edges 1-2 feed 0, 3-4 feed 1, 5-6
// feed 2; the top edges have none.
constexpr int kUpstream[kTamariskEdges][2] = {
    {1, 2}, {3, 4}, {5, 6}, {-1, -1}, {-1, -1}, {-1, -1}, {-1, -1},
};

constexpr int kBottomEdge = 0;
constexpr bool is_middle(int e) { return e == 1 || e == 2; }
constexpr bool is_top(int e) { return e >= 3; }

double primitive_cost(Primitive p, const TamariskConfig& c) {
    switch (p) {
        case Primitive::DoNothing: return 0.0;
        case Primitive::Eradicate: return c.cost_eradicate;
        case Primitive::Plant: return c.cost_plant;
        case Primitive::EradicatePlant: return c.cost_eradicate_plant;
    }
    return 0.0;
}

// Primitives that make sense on a slot: eradication needs a tamarisk,
// planting needs an empty edge.
bool applicable(Primitive p, Slot s) {
    switch (p) {
        case Primitive::DoNothing: return true;
        case Primitive::Eradicate: return s == Slot::Invaded;
        case Primitive::Plant: return s == Slot::Empty;
        case Primitive::EradicatePlant: return s == Slot::Invaded;
    }
    return false;
}

std::vector<TamariskAction> feasible_actions(const TamariskState& state,
                                             const TamariskConfig& config) {
    std::vector<TamariskAction> out;
    TamariskAction action{};
    auto recurse = [&](auto&& self, int edge, double cost) -> void {
        if (edge == kTamariskEdges) {
            out.push_back(action);
            return;
        }
        for (Primitive p : {Primitive::DoNothing, Primitive::Eradicate,
                            Primitive::Plant, Primitive::EradicatePlant}) {
            if (!applicable(p, state.edges[edge])) continue;
            double c = cost + primitive_cost(p, config);
            if (c > config.budget) continue;
            action[edge] = p;
            self(self, edge + 1, c);
        }
        action[edge] = Primitive::DoNothing;
    };
    recurse(recurse, 0, 0.0);
    if (out.empty())
        throw NoFeasibleAction(
            "tamarisk_policy: no action vector fits the budget");
    return out;
}

// Keeps the action vectors that satisfy `hit` on as many edges as possible.
template <typename Hit>
void keep_best(std::vector<TamariskAction>& actions, Hit&& hit) {
    int best = -1;
    std::vector<int> counts(actions.size());
    for (std::size_t i = 0; i < actions.size(); ++i) {
        int n = 0;
        for (int e = 0; e < kTamariskEdges; ++e)
            n += hit(e, actions[i][e]) ? 1 : 0;
        counts[i] = n;
        best = std::max(best, n);
    }
    std::vector<TamariskAction> kept;
    for (std::size_t i = 0; i < actions.size(); ++i)
        if (counts[i] == best) kept.push_back(actions[i]);
    actions.swap(kept);
}

}  // namespace

TamariskState TamariskState::from_index(long idx) {
    TamariskState s;
    for (int e = 0; e < kTamariskEdges; ++e) {
        s.edges[e] = static_cast<Slot>(idx % 3);
        idx /= 3;
    }
    return s;
}

double action_cost(const TamariskAction& action,
                   const TamariskConfig& config) {
    double cost = 0.0;
    for (Primitive p : action) cost += primitive_cost(p, config);
    return cost;
}

TamariskAction tamarisk_policy(const TamariskState& state,
                               const TamariskConfig& config) {
    std::vector<TamariskAction> actions = feasible_actions(state, config);

    const Primitive top_fix = config.top_filter_eradicate_plant
                                  ? Primitive::EradicatePlant
                                  : Primitive::Eradicate;
    // Filters in the policy's order of priorities.
    keep_best(actions, [&](int e, Primitive p) {
        return is_middle(e) && state.edges[e] == Slot::Empty &&
               p == Primitive::Plant;
    });
    keep_best(actions, [&](int e, Primitive p) {
        return is_top(e) && state.edges[e] == Slot::Invaded && p == top_fix;
    });
    keep_best(actions, [&](int e, Primitive p) {
        return e == kBottomEdge && state.edges[e] == Slot::Empty &&
               p == Primitive::Plant;
    });
    keep_best(actions, [&](int e, Primitive p) {
        return is_middle(e) && state.edges[e] == Slot::Invaded &&
               p == Primitive::EradicatePlant;
    });
    keep_best(actions, [&](int e, Primitive p) {
        return e == kBottomEdge && state.edges[e] == Slot::Invaded &&
               p == Primitive::EradicatePlant;
    });

    return *std::min_element(actions.begin(), actions.end());
}

TamariskPolicy::TamariskPolicy(const TamariskConfig& config) {
    if (config.budget <= 0.0)
        throw InvalidConfig("TamariskPolicy: budget must be positive");
    table_.resize(kStateCount);
    for (long idx = 0; idx < kStateCount; ++idx)
        table_[idx] = tamarisk_policy(TamariskState::from_index(idx), config);
}

std::pair<TamariskState, double> tamarisk_step(const TamariskState& state,
                                               const TamariskAction& action,
                                               const TamariskConfig& config,
                                               Rng& rng) {
    if (action_cost(action, config) > config.budget)
        throw InfeasibleAction("tamarisk_step: action cost exceeds budget");
    for (int e = 0; e < kTamariskEdges; ++e)
        if (!applicable(action[e], state.edges[e]))
            throw InfeasibleAction(
                "tamarisk_step: primitive does not apply to slot state");

    double reward = -(action_cost(action, config) +
                      config.invasion_penalty * state.invaded_count());

    TamariskState next = state;
    // Actions resolve edge by edge; only eradication draws randomness.
    for (int e = 0; e < kTamariskEdges; ++e) {
        switch (action[e]) {
            case Primitive::DoNothing:
                break;
            case Primitive::Eradicate:
                if (rng.bernoulli(config.eradication_success))
                    next.edges[e] = Slot::Empty;
                break;
            case Primitive::Plant:
                next.edges[e] = Slot::Native;
                break;
            case Primitive::EradicatePlant:
                if (rng.bernoulli(config.eradication_success))
                    next.edges[e] = Slot::Native;
                break;
        }
    }
    // Natural death.
    for (int e = 0; e < kTamariskEdges; ++e)
        if (next.edges[e] != Slot::Empty &&
            rng.bernoulli(config.death_prob))
            next.edges[e] = Slot::Empty;
    // Colonization, all edges decided against the same post-death snapshot.
    const TamariskState snapshot = next;
    for (int e = 0; e < kTamariskEdges; ++e) {
        if (snapshot.edges[e] != Slot::Empty) continue;
        double w_inv = config.exogenous_weight;
        double w_nat = config.exogenous_weight;
        for (int u : kUpstream[e]) {
            if (u < 0) continue;
            if (snapshot.edges[u] == Slot::Invaded)
                w_inv += config.invaded_upstream_weight;
            else if (snapshot.edges[u] == Slot::Native)
                w_nat += config.native_upstream_weight;
        }
        double total = w_inv + w_nat;
        double p_occupied = 1.0 - std::exp(-config.colonization_rate * total);
        if (!rng.bernoulli(p_occupied)) continue;
        next.edges[e] =
            rng.bernoulli(w_inv / total) ? Slot::Invaded : Slot::Native;
    }
    return {next, reward};
}

TamariskState random_tamarisk_start(Rng& rng) {
    TamariskState s;
    for (int e = 0; e < kTamariskEdges; ++e)
        s.edges[e] = static_cast<Slot>(rng.uniform_int(0, 2));
    return s;
}

std::vector<double> tamarisk_features(const TamariskState& state) {
    std::vector<double> features(kTamariskEdges);
    for (int e = 0; e < kTamariskEdges; ++e)
        features[e] = static_cast<double>(static_cast<int>(state.edges[e]));
    return features;
}

std::vector<TrajectoryRecord> sample_trajectories(const TamariskConfig& config,
                                                  long n,
                                                  std::uint64_t seed) {
    if (n < 1)
        throw InsufficientData("sample_trajectories: n must be >= 1");
    if (config.horizon < 1)
        throw InvalidConfig("sample_trajectories: horizon must be >= 1");
    const TamariskPolicy policy(config);
    std::vector<TrajectoryRecord> records(n);
    const std::uint64_t env_seed = mix_seed(seed, kTamariskSalt);
    parallel_for(n, default_workers(), [&](long i) {
        Rng rng(env_seed, static_cast<std::uint64_t>(i));
        TamariskState state = random_tamarisk_start(rng);
        TrajectoryRecord& r = records[i];
        r.id = i;
        r.start_features = tamarisk_features(state);
        r.rewards.resize(config.horizon);
        for (long t = 0; t < config.horizon; ++t) {
            auto [next, reward] = tamarisk_step(state, policy(state), config,
                                                rng);
            r.rewards[t] = reward;
            state = next;
        }
        r.behavior = cumulative_behavior(r.rewards);
    });
    return records;
}

std::string tamarisk_config_json(const TamariskConfig& c) {
    json doc;
    doc["env"] = "tamarisk";
    doc["horizon"] = c.horizon;
    doc["budget"] = c.budget;
    doc["cost_eradicate"] = c.cost_eradicate;
    doc["cost_plant"] = c.cost_plant;
    doc["cost_eradicate_plant"] = c.cost_eradicate_plant;
    doc["invasion_penalty"] = c.invasion_penalty;
    doc["eradication_success"] = c.eradication_success;
    doc["death_prob"] = c.death_prob;
    doc["invaded_upstream_weight"] = c.invaded_upstream_weight;
    doc["native_upstream_weight"] = c.native_upstream_weight;
    doc["exogenous_weight"] = c.exogenous_weight;
    doc["colonization_rate"] = c.colonization_rate;
    doc["top_filter_eradicate_plant"] = c.top_filter_eradicate_plant;
    return doc.dump();
}

TamariskConfig tamarisk_config_from_json(const std::string& text) {
    TamariskConfig c;
    try {
        json doc = json::parse(text);
        c.horizon = doc.value("horizon", c.horizon);
        c.budget = doc.value("budget", c.budget);
        c.cost_eradicate = doc.value("cost_eradicate", c.cost_eradicate);
        c.cost_plant = doc.value("cost_plant", c.cost_plant);
        c.cost_eradicate_plant =
            doc.value("cost_eradicate_plant", c.cost_eradicate_plant);
        c.invasion_penalty = doc.value("invasion_penalty", c.invasion_penalty);
        c.eradication_success =
            doc.value("eradication_success", c.eradication_success);
        c.death_prob = doc.value("death_prob", c.death_prob);
        c.invaded_upstream_weight =
            doc.value("invaded_upstream_weight", c.invaded_upstream_weight);
        c.native_upstream_weight =
            doc.value("native_upstream_weight", c.native_upstream_weight);
        c.exogenous_weight = doc.value("exogenous_weight", c.exogenous_weight);
        c.colonization_rate =
            doc.value("colonization_rate", c.colonization_rate);
        c.top_filter_eradicate_plant = doc.value(
            "top_filter_eradicate_plant", c.top_filter_eradicate_plant);
    } catch (const json::exception& e) {
        throw InvalidConfig(std::string("tamarisk config: ") + e.what());
    }
    return c;
}

}  // namespace sqbox
