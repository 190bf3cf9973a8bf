#pragma once
// The policy zoo: random, handcrafted CTR baseline, tabular Q-learning for
// tiny configs, and the DQN (epsilon-greedy exploration, experience replay,
// target network). Ties everywhere break toward the lowest category index so
// runs stay deterministic.

#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <variant>
#include <vector>

#include "beliefsim/environment.hpp"
#include "beliefsim/neuralnet.hpp"
#include "beliefsim/replay.hpp"
#include "beliefsim/rng.hpp"

namespace beliefsim {

// --- exploration --------------------------------------------------------------

enum class ScheduleKind { Linear, Exponential };

/// Per-episode epsilon: non-increasing, bounded below by epsilon_min.
struct EpsilonSchedule {
    double epsilon_start = 1.0;
    double epsilon_min = 0.02;
    ScheduleKind kind = ScheduleKind::Linear;
    int64_t decay_span = 1;     // episodes to reach epsilon_min (linear)
    double decay_factor = 0.99; // per-episode multiplier (exponential)

    double value(int64_t episode) const {
        if (episode < 0) episode = 0;
        if (kind == ScheduleKind::Linear) {
            if (episode >= decay_span) return epsilon_min;
            const double frac = static_cast<double>(episode) / static_cast<double>(decay_span);
            return epsilon_start - (epsilon_start - epsilon_min) * frac;
        }
        const double v = epsilon_start * std::pow(decay_factor, static_cast<double>(episode));
        return std::max(epsilon_min, v);
    }
};

/// Epsilon-greedy over 7 Q-values; argmax ties go to the lowest index.
inline PoliticsCategory epsilon_greedy(std::span<const double> q_values, double epsilon,
                                       RngStream& rng) {
    if (q_values.size() != static_cast<size_t>(kNumCategories))
        throw std::invalid_argument("epsilon_greedy: expected 7 q-values");
    for (double q : q_values)
        if (!std::isfinite(q)) throw std::invalid_argument("epsilon_greedy: non-finite q-value");
    if (epsilon > 0.0 && rng.uniform01() < epsilon)
        return category_from_index(static_cast<int>(rng.uniform_int(7)));
    int best = 0;
    for (int k = 1; k < kNumCategories; ++k)
        if (q_values[static_cast<size_t>(k)] > q_values[static_cast<size_t>(best)]) best = k;
    return category_from_index(best);
}

// --- observation encodings for learners ----------------------------------------

/// Flatten the matrix observation to doubles (horizon*8 long).
inline std::vector<double> encode_matrix(const Observation& obs) {
    return std::vector<double>(obs.data.begin(), obs.data.end());
}

/// 14 aggregate counts recovered from the observation matrix, scaled by
/// 1/horizon so network inputs stay in [0, 1].
inline std::vector<double> encode_aggregate(const Observation& obs) {
    std::vector<double> out(14, 0.0);
    for (int row = 0; row < obs.horizon; ++row) {
        for (int col = 0; col < 7; ++col) {
            if (obs.at(row, col)) {
                out[static_cast<size_t>(col)] += 1.0;
                if (obs.at(row, 7)) out[static_cast<size_t>(7 + col)] += 1.0;
            }
        }
    }
    const double scale = 1.0 / static_cast<double>(obs.horizon);
    for (double& v : out) v *= scale;
    return out;
}

inline std::vector<double> encode_for_net(const Observation& obs, ObservationMode mode) {
    return mode == ObservationMode::Matrix ? encode_matrix(obs) : encode_aggregate(obs);
}

inline int encoded_size(ObservationMode mode, int horizon) {
    return mode == ObservationMode::Matrix ? horizon * 8 : 14;
}

// --- random -------------------------------------------------------------------

struct RandomAgent {
    PoliticsCategory act(RngStream& rng) const {
        return category_from_index(static_cast<int>(rng.uniform_int(7)));
    }
};

// --- handcrafted baseline -------------------------------------------------------

/// Per-episode profiling counts for the CTR baseline.
struct BaselineState {
    std::array<int64_t, 7> recs{};
    std::array<int64_t, 7> clicks{};
    int profiling_steps = 25;

    int64_t total_recs() const {
        int64_t t = 0;
        for (int64_t r : recs) t += r;
        return t;
    }
};

/// During profiling, sample category k with weight (clicks[k]+1)/(recs[k]+1)
/// (Laplace-smoothed CTR); afterwards play argmax CTR with lowest-index ties.
/// Categories never recommended have CTR 0 after profiling.
inline PoliticsCategory baseline_act(const BaselineState& s, RngStream& rng) {
    if (s.total_recs() < s.profiling_steps) {
        std::array<double, 7> w{};
        double total = 0.0;
        for (int k = 0; k < 7; ++k) {
            w[static_cast<size_t>(k)] = static_cast<double>(s.clicks[static_cast<size_t>(k)] + 1) /
                                        static_cast<double>(s.recs[static_cast<size_t>(k)] + 1);
            total += w[static_cast<size_t>(k)];
        }
        double u = rng.uniform(0.0, total);
        for (int k = 0; k < 7; ++k) {
            u -= w[static_cast<size_t>(k)];
            if (u < 0.0) return category_from_index(k);
        }
        return PoliticsCategory::FarRight;  // u == total edge
    }
    int best = 0;
    double best_ctr = -1.0;
    for (int k = 0; k < 7; ++k) {
        const double ctr = s.recs[static_cast<size_t>(k)] > 0
                               ? static_cast<double>(s.clicks[static_cast<size_t>(k)]) /
                                     static_cast<double>(s.recs[static_cast<size_t>(k)])
                               : 0.0;
        if (ctr > best_ctr) {
            best_ctr = ctr;
            best = k;
        }
    }
    return category_from_index(best);
}

inline BaselineState baseline_update(BaselineState s, PoliticsCategory action, bool clicked) {
    s.recs[static_cast<size_t>(category_index(action))] += 1;
    if (clicked) s.clicks[static_cast<size_t>(category_index(action))] += 1;
    return s;
}

struct BaselineAgent {
    int profiling_steps = 25;
    BaselineState state;

    void begin_episode() {
        state = BaselineState{};
        state.profiling_steps = profiling_steps;
    }
    PoliticsCategory act(RngStream& rng) const { return baseline_act(state, rng); }
    void observe(PoliticsCategory action, bool clicked) {
        state = baseline_update(state, action, clicked);
    }
};

// --- tabular Q-learning ---------------------------------------------------------

/// Coarse discretization of the aggregate features:
/// (dominant recommended category, dominant clicked category, CTR decile).
/// Dominants use lowest-index ties; 7 marks "none yet". 640 states total.
inline int tabular_state_key(const Observation& obs) {
    std::array<int, 7> recs{}, clicks{};
    int total_recs = 0, total_clicks = 0;
    for (int row = 0; row < obs.horizon; ++row) {
        for (int col = 0; col < 7; ++col) {
            if (obs.at(row, col)) {
                recs[static_cast<size_t>(col)] += 1;
                ++total_recs;
                if (obs.at(row, 7)) {
                    clicks[static_cast<size_t>(col)] += 1;
                    ++total_clicks;
                }
            }
        }
    }
    auto dominant = [](const std::array<int, 7>& counts, int total) {
        if (total == 0) return 7;
        int best = 0;
        for (int k = 1; k < 7; ++k)
            if (counts[static_cast<size_t>(k)] > counts[static_cast<size_t>(best)]) best = k;
        return best;
    };
    const int dom_rec = dominant(recs, total_recs);
    const int dom_click = dominant(clicks, total_clicks);
    const int decile =
        total_recs == 0 ? 0 : std::min(9, (10 * total_clicks) / std::max(1, total_recs));
    return (dom_rec * 8 + dom_click) * 10 + decile;
}

inline constexpr int kTabularStates = 8 * 8 * 10;

/// One Q-learning backup:
/// Q(s,a) += alpha * (r + gamma * (done ? 0 : max_a' Q(s',a')) - Q(s,a)).
inline void tabular_q_update(std::vector<double>& table, int state_key, int action, double reward,
                             int next_state_key, bool done, double alpha, double gamma) {
    double bootstrap = 0.0;
    if (!done) {
        const double* row = &table[static_cast<size_t>(next_state_key) * 7];
        bootstrap = row[0];
        for (int k = 1; k < 7; ++k) bootstrap = std::max(bootstrap, row[k]);
    }
    double& q = table[static_cast<size_t>(state_key) * 7 + action];
    q += alpha * (reward + gamma * bootstrap - q);
}

struct TabularQAgent {
    double alpha = 0.1;
    double gamma = 0.97;
    EpsilonSchedule schedule;
    std::vector<double> table = std::vector<double>(static_cast<size_t>(kTabularStates) * 7, 0.0);

    PoliticsCategory act(const Observation& obs, int64_t episode, RngStream& rng,
                         bool greedy = false) const {
        const int key = tabular_state_key(obs);
        const std::span<const double> q(&table[static_cast<size_t>(key) * 7], 7);
        return epsilon_greedy(q, greedy ? 0.0 : schedule.value(episode), rng);
    }

    void observe(const Observation& prev, PoliticsCategory action, double reward,
                 const Observation& next, bool done) {
        tabular_q_update(table, tabular_state_key(prev), category_index(action), reward,
                         tabular_state_key(next), done, alpha, gamma);
    }
};

// --- DQN ------------------------------------------------------------------------

enum class LossKind { SquaredError, Huber };

struct DqnConfig {
    double gamma = 0.97;
    double alpha = 1e-3;  // optimizer learning rate
    size_t batch_size = 64;
    size_t replay_capacity = 200000;
    int64_t target_sync = 1000;  // train steps between target refreshes
    int64_t train_every = 4;     // environment steps between train steps
    int64_t learn_start = 1000;  // replay size before training begins
    std::vector<int> hidden{32, 32};
    ObservationMode observation_mode = ObservationMode::Aggregate;
    int horizon = 100;
    OptimizerKind optimizer = OptimizerKind::Adam;
    LossKind loss = LossKind::SquaredError;
    EpsilonSchedule schedule;
    bool prioritized = false;
    double priority_alpha = 0.6;
    double priority_beta = 0.4;
};

class DqnAgent {
public:
    explicit DqnAgent(DqnConfig config, RngStream& rng)
        : config_(std::move(config)),
          replay_(config_.replay_capacity, config_.prioritized, config_.priority_alpha,
                  config_.priority_beta) {
        std::vector<int> sizes;
        sizes.push_back(encoded_size(config_.observation_mode, config_.horizon));
        for (int h : config_.hidden) sizes.push_back(h);
        sizes.push_back(kQOutputs);
        main_ = Mlp::init(sizes, rng);
        target_ = main_;
        opt_ = OptimizerState::for_net(main_, config_.optimizer, config_.alpha);
    }

    const DqnConfig& config() const { return config_; }
    const Mlp& main_net() const { return main_; }
    Mlp& main_net() { return main_; }
    const Mlp& target_net() const { return target_; }
    const OptimizerState& optimizer() const { return opt_; }
    OptimizerState& optimizer() { return opt_; }
    ReplayBuffer& replay() { return replay_; }
    const ReplayBuffer& replay() const { return replay_; }
    int64_t train_steps() const { return train_steps_; }
    int64_t steps_since_sync() const { return steps_since_sync_; }

    std::vector<double> encode(const Observation& obs) const {
        return encode_for_net(obs, config_.observation_mode);
    }

    PoliticsCategory act(const Observation& obs, int64_t episode, RngStream& rng,
                         bool greedy = false) const {
        const std::vector<double> input = encode(obs);
        const std::vector<double> q = main_.forward(input);
        return epsilon_greedy(q, greedy ? 0.0 : config_.schedule.value(episode), rng);
    }

    /// Push a transition; every train_every pushes run one train step once the
    /// replay holds max(batch_size, learn_start) items. Returns the step loss
    /// when one ran.
    double observe(const Observation& prev, PoliticsCategory action, double reward,
                   const Observation& next, bool done, RngStream& rng) {
        replay_.push(Transition{encode(prev), action, reward, encode(next), done});
        pushes_ += 1;
        if (replay_.size() >= std::max<size_t>(config_.batch_size,
                                               static_cast<size_t>(config_.learn_start)) &&
            pushes_ % config_.train_every == 0) {
            return train_step(rng);
        }
        return 0.0;
    }

    /// One optimizer step on the mean TD loss of a sampled batch.
    double train_step(RngStream& rng) {
        const SampledBatch batch = replay_.sample(config_.batch_size, rng);
        Gradients grads = main_.zero_gradients();
        std::vector<double> target_q(7, 0.0), mask(7, 0.0);
        std::vector<double> td_errors;
        td_errors.reserve(batch.indices.size());
        double loss_sum = 0.0;
        for (size_t i = 0; i < batch.indices.size(); ++i) {
            const Transition& t = replay_.at(batch.indices[i]);
            double y = t.reward;
            if (!t.done) {
                const std::vector<double> qn = target_.forward(t.next_observation);
                double maxq = qn[0];
                for (int k = 1; k < 7; ++k) maxq = std::max(maxq, qn[static_cast<size_t>(k)]);
                y += config_.gamma * maxq;
            }
            const int a = category_index(t.action);
            std::fill(target_q.begin(), target_q.end(), 0.0);
            std::fill(mask.begin(), mask.end(), 0.0);
            target_q[static_cast<size_t>(a)] = y;
            mask[static_cast<size_t>(a)] = 1.0;

            const std::vector<double> q = main_.forward(t.observation);
            const double err = q[static_cast<size_t>(a)] - y;
            td_errors.push_back(err);
            double delta = err;  // dLoss/dq[a] for squared error
            double loss = 0.5 * err * err;
            if (config_.loss == LossKind::Huber && std::abs(err) > 1.0) {
                delta = err > 0.0 ? 1.0 : -1.0;
                loss = std::abs(err) - 0.5;
            }
            delta *= batch.importance_weights[i];
            main_.accumulate_backward(t.observation, target_q, mask, grads, delta);
            loss_sum += loss;
        }
        grads.scale(1.0 / static_cast<double>(batch.indices.size()));
        apply_gradients(main_, opt_, grads);
        replay_.update_priorities(batch.indices, td_errors);

        train_steps_ += 1;
        steps_since_sync_ += 1;
        if (steps_since_sync_ >= config_.target_sync) sync_target();
        return loss_sum / static_cast<double>(batch.indices.size());
    }

    /// target <- deep copy of main; resets the sync counter.
    void sync_target() {
        target_ = main_;
        steps_since_sync_ = 0;
    }

    /// Checkpoint restore: replace both networks (shapes must match the config).
    void restore(Mlp main, Mlp target) {
        if (main.sizes() != main_.sizes() || target.sizes() != main_.sizes())
            throw std::runtime_error("DqnAgent::restore: network shape mismatch");
        main_ = std::move(main);
        target_ = std::move(target);
    }
    void restore_counters(int64_t train_steps, int64_t steps_since_sync) {
        train_steps_ = train_steps;
        steps_since_sync_ = steps_since_sync;
    }

private:
    DqnConfig config_;
    Mlp main_, target_;
    OptimizerState opt_;
    ReplayBuffer replay_;
    int64_t pushes_ = 0;
    int64_t train_steps_ = 0;
    int64_t steps_since_sync_ = 0;
};

// --- unified agent --------------------------------------------------------------

enum class AgentKind { Random, Baseline, Tabular, Dqn };

inline const char* agent_kind_name(AgentKind k) {
    switch (k) {
        case AgentKind::Random: return "random";
        case AgentKind::Baseline: return "baseline";
        case AgentKind::Tabular: return "tabular";
        case AgentKind::Dqn: return "dqn";
    }
    return "?";
}

/// Value-semantic wrapper used by the harness. Heuristic agents ignore the
/// learning hooks; learners ignore nothing.
class AnyAgent {
public:
    using Storage = std::variant<RandomAgent, BaselineAgent, TabularQAgent, DqnAgent>;

    explicit AnyAgent(Storage agent) : agent_(std::move(agent)) {}

    AgentKind kind() const {
        if (std::holds_alternative<RandomAgent>(agent_)) return AgentKind::Random;
        if (std::holds_alternative<BaselineAgent>(agent_)) return AgentKind::Baseline;
        if (std::holds_alternative<TabularQAgent>(agent_)) return AgentKind::Tabular;
        return AgentKind::Dqn;
    }

    void begin_episode() {
        if (auto* b = std::get_if<BaselineAgent>(&agent_)) b->begin_episode();
    }

    PoliticsCategory act(const Observation& obs, int64_t episode, RngStream& rng,
                         bool greedy = false) const {
        if (const auto* r = std::get_if<RandomAgent>(&agent_)) return r->act(rng);
        if (const auto* b = std::get_if<BaselineAgent>(&agent_)) return b->act(rng);
        if (const auto* t = std::get_if<TabularQAgent>(&agent_))
            return t->act(obs, episode, rng, greedy);
        return std::get<DqnAgent>(agent_).act(obs, episode, rng, greedy);
    }

    /// Learning hook, called once per environment step when training.
    void observe(const Observation& prev, PoliticsCategory action, double reward,
                 const Observation& next, bool done, bool clicked, RngStream& rng) {
        if (auto* b = std::get_if<BaselineAgent>(&agent_)) {
            b->observe(action, clicked);
        } else if (auto* t = std::get_if<TabularQAgent>(&agent_)) {
            t->observe(prev, action, reward, next, done);
        } else if (auto* d = std::get_if<DqnAgent>(&agent_)) {
            d->observe(prev, action, reward, next, done, rng);
        }
    }

    /// The baseline profiles within an episode even when not learning.
    void observe_eval(PoliticsCategory action, bool clicked) {
        if (auto* b = std::get_if<BaselineAgent>(&agent_)) b->observe(action, clicked);
    }

    template <class T> T* get_if() { return std::get_if<T>(&agent_); }
    template <class T> const T* get_if() const { return std::get_if<T>(&agent_); }

private:
    Storage agent_;
};

}  // namespace beliefsim
