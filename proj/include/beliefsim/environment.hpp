#pragma once
// Episodic POMDP around the user/content dynamics. One hidden user per
// episode; the action is a politics category; the observation is a
// horizon x 8 binary matrix of (category one-hot, click) rows. Latent user
// state never leaks into observations, only into StepResult::info for
// debugging and metrics.
//
// A single environment instance is single-writer; distinct instances are
// independent and may run in parallel workers.

#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "beliefsim/dynamics.hpp"
#include "beliefsim/rng.hpp"

namespace beliefsim {

struct InteractionEvent {
    PoliticsCategory category = PoliticsCategory::Center;
    bool clicked = false;
};

/// horizon x 8 binary matrix, row-major. Rows are right-aligned: the newest
/// interaction is the last row, unfilled leading rows are zero.
struct Observation {
    int horizon = 0;
    std::vector<uint8_t> data;  // horizon * 8 entries in {0,1}

    uint8_t at(int row, int col) const { return data[static_cast<size_t>(row) * 8 + col]; }
};

inline Observation encode_observation(const std::vector<InteractionEvent>& history, int horizon) {
    if (horizon < 1) throw std::invalid_argument("encode_observation: horizon must be >= 1");
    Observation obs;
    obs.horizon = horizon;
    obs.data.assign(static_cast<size_t>(horizon) * 8, 0);
    const int len = static_cast<int>(history.size());
    const int take = std::min(len, horizon);
    for (int i = 0; i < take; ++i) {
        // oldest of the window first, newest in the last row
        const auto& ev = history[static_cast<size_t>(len - take + i)];
        const int row = horizon - take + i;
        obs.data[static_cast<size_t>(row) * 8 + category_index(ev.category)] = 1;
        obs.data[static_cast<size_t>(row) * 8 + 7] = ev.clicked ? 1 : 0;
    }
    return obs;
}

/// 14 counts over the same horizon window: counts[k] = recommendations of
/// category k, counts[7+k] = clicks on category k (k = 0..6).
inline std::array<int, 14> aggregate_features(const std::vector<InteractionEvent>& history,
                                              int horizon) {
    std::array<int, 14> counts{};
    const int len = static_cast<int>(history.size());
    const int take = std::min(len, horizon);
    for (int i = len - take; i < len; ++i) {
        const auto& ev = history[static_cast<size_t>(i)];
        counts[static_cast<size_t>(category_index(ev.category))] += 1;
        if (ev.clicked) counts[static_cast<size_t>(7 + category_index(ev.category))] += 1;
    }
    return counts;
}

struct RewardScheme {
    std::array<double, 7> click_reward_per_category{1, 1, 1, 1, 1, 1, 1};
    double attrition_penalty = -1.0;
    double survival_bonus = 0.0;

    static RewardScheme uniform() { return RewardScheme{}; }
    static RewardScheme polarizing() {
        return RewardScheme{{1, 0, 0, 0, 0, 0, 1}, -1.0, 0.0};
    }
    static RewardScheme depolarizing() {
        return RewardScheme{{0, 0, 1, 1, 1, 0, 0}, -1.0, 0.0};
    }
};

enum class ObservationMode { Matrix, Aggregate };

struct EnvConfig {
    int horizon = 100;
    int user_lifespan = 500;
    RewardScheme reward_scheme;
    ObservationMode observation_mode = ObservationMode::Aggregate;
    BeliefDistributionParams belief_params;
    UserGenParams user_gen_params;
    InteractionParams interaction_params;

    void validate() const {
        if (horizon < 1) throw std::invalid_argument("env.horizon must be >= 1");
        if (user_lifespan < 1) throw std::invalid_argument("env.user_lifespan must be >= 1");
        belief_params.validate();
        user_gen_params.validate();
        interaction_params.validate();
    }
};

struct StepInfo {
    bool clicked = false;
    bool attrited = false;
    int step_index = 0;
    double user_belief = 0.0;  // debug only, hidden from agents
};

struct StepResult {
    Observation observation;
    double reward = 0.0;
    bool done = false;
    StepInfo info;
};

class RecEnv {
public:
    explicit RecEnv(EnvConfig config) : config_(std::move(config)) {
        config_.validate();
    }

    /// Start an episode with a freshly sampled user. Returns the all-zero
    /// observation (empty history).
    Observation reset(RngStream& rng) {
        return reset_with(create_user(config_.belief_params, config_.user_gen_params, rng));
    }

    /// Start an episode with a caller-provided user (fixed evaluation
    /// populations).
    Observation reset_with(UserState user) {
        user_ = std::move(user);
        history_.clear();
        step_index_ = 0;
        done_ = false;
        return encode_observation(history_, config_.horizon);
    }

    StepResult step(PoliticsCategory action, RngStream& rng) {
        if (done_) throw std::logic_error("step called on a finished episode");
        const Content content = sample_content(action, rng);
        auto [next_user, outcome] = interact(user_, content, config_.interaction_params, rng);
        user_ = next_user;
        step_index_ += 1;
        history_.push_back(InteractionEvent{action, outcome.clicked});

        StepResult r;
        r.reward = 0.0;
        if (outcome.clicked)
            r.reward += config_.reward_scheme.click_reward_per_category[static_cast<size_t>(
                category_index(action))];
        if (outcome.attrited) r.reward += config_.reward_scheme.attrition_penalty;
        done_ = outcome.attrited || step_index_ >= config_.user_lifespan;
        if (done_ && !outcome.attrited) r.reward += config_.reward_scheme.survival_bonus;

        r.done = done_;
        r.info = StepInfo{outcome.clicked, outcome.attrited, step_index_, user_.belief};
        r.observation = encode_observation(history_, config_.horizon);
        return r;
    }

    bool done() const { return done_; }
    int step_index() const { return step_index_; }
    const UserState& user() const { return user_; }
    const std::vector<InteractionEvent>& history() const { return history_; }
    const EnvConfig& config() const { return config_; }

private:
    EnvConfig config_;
    UserState user_;
    std::vector<InteractionEvent> history_;
    int step_index_ = 0;
    bool done_ = true;  // unusable until the first reset
};

}  // namespace beliefsim
