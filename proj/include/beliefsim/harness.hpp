#pragma once
// Training and evaluation loops, the parallel experience collector, and the
// calibration routines behind the survival-curve / shift-profile / click-grid
// outputs.
//
// Stream layout (root = run seed): episode ep uses derive(root, 0, ep, 0) for
// the environment and derive(root, 0, ep, 1) for exploration, independent of
// which worker runs it; the learner draws replay samples from
// derive(root, 0xffffffff, 0, 2). Evaluation user i is created from
// derive(eval_seed, 0, i, 100) and its episode runs on streams 101/102.
//
// Collector workers own disjoint episode indices and publish finished
// episodes to the learner through a bounded FIFO queue (backpressure via
// capacity). The learner is the only parameter writer; read-only policy
// snapshots are republished to workers at target-sync boundaries.

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <exception>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

#include "beliefsim/agents.hpp"
#include "beliefsim/checkpoint.hpp"
#include "beliefsim/environment.hpp"
#include "beliefsim/metrics.hpp"

namespace beliefsim {

// --- bounded FIFO channel --------------------------------------------------------

template <class T>
class BoundedQueue {
public:
    explicit BoundedQueue(size_t capacity) : capacity_(capacity) {}

    /// Blocks while full. Returns false when the queue was closed.
    bool push(T item) {
        std::unique_lock<std::mutex> lock(mutex_);
        not_full_.wait(lock, [&] { return items_.size() < capacity_ || closed_; });
        if (closed_) return false;
        items_.push_back(std::move(item));
        not_empty_.notify_one();
        return true;
    }

    /// Blocks while empty. Empty optional once closed and drained.
    std::optional<T> pop() {
        std::unique_lock<std::mutex> lock(mutex_);
        not_empty_.wait(lock, [&] { return !items_.empty() || closed_; });
        if (items_.empty()) return std::nullopt;
        T item = std::move(items_.front());
        items_.pop_front();
        not_full_.notify_one();
        return item;
    }

    void close() {
        std::lock_guard<std::mutex> lock(mutex_);
        closed_ = true;
        not_empty_.notify_all();
        not_full_.notify_all();
    }

private:
    size_t capacity_;
    std::deque<T> items_;
    bool closed_ = false;
    std::mutex mutex_;
    std::condition_variable not_empty_, not_full_;
};

// --- episode execution -------------------------------------------------------------

struct EpisodeStreams {
    RngStream env;
    RngStream agent;
    RngStream* learner = nullptr;  // required when learning
};

/// Play one episode to termination. With learn=true the agent's learning
/// hooks run inline (replay pushes, train cadence, baseline profiling);
/// otherwise only the baseline's per-episode profiling state advances.
inline EpisodeRecord run_episode(RecEnv& env, AnyAgent& agent, EpisodeStreams streams,
                                 int64_t episode_index = 0, bool learn = false,
                                 bool greedy = false) {
    agent.begin_episode();
    Observation obs = env.reset(streams.env);
    EpisodeRecord record;
    record.initial_belief = env.user().belief;
    record.initial_ideology = category_of_bias(record.initial_belief);
    while (!env.done()) {
        const PoliticsCategory action = agent.act(obs, episode_index, streams.agent, greedy);
        const StepResult r = env.step(action, streams.env);
        if (learn) {
            if (streams.learner == nullptr)
                throw std::invalid_argument("run_episode: learning requires a learner stream");
            agent.observe(obs, action, r.reward, r.observation, r.done, r.info.clicked,
                          *streams.learner);
        } else {
            agent.observe_eval(action, r.info.clicked);
        }
        record.steps.push_back(EpisodeStep{action, r.info.clicked, r.reward, r.info.user_belief});
        if (r.done && r.info.attrited) record.attrition_step = r.info.step_index;
        obs = r.observation;
    }
    record.final_belief = env.user().belief;
    return record;
}

/// Convenience overload: one stream drives the environment, exploration and
/// replay sampling alike.
inline EpisodeRecord run_episode(RecEnv& env, AnyAgent& agent, RngStream& rng, bool learn) {
    agent.begin_episode();
    Observation obs = env.reset(rng);
    EpisodeRecord record;
    record.initial_belief = env.user().belief;
    record.initial_ideology = category_of_bias(record.initial_belief);
    while (!env.done()) {
        const PoliticsCategory action = agent.act(obs, 0, rng, false);
        const StepResult r = env.step(action, rng);
        if (learn)
            agent.observe(obs, action, r.reward, r.observation, r.done, r.info.clicked, rng);
        else
            agent.observe_eval(action, r.info.clicked);
        record.steps.push_back(EpisodeStep{action, r.info.clicked, r.reward, r.info.user_belief});
        if (r.done && r.info.attrited) record.attrition_step = r.info.step_index;
        obs = r.observation;
    }
    record.final_belief = env.user().belief;
    return record;
}

// --- training ----------------------------------------------------------------------

struct CurvePoint {
    int64_t episode_end = 0;  // 1-based index of the last episode in the window
    double ctr = 0.0;
    double mean_abs_shift = 0.0;
};

struct TrainingCurve {
    std::vector<CurvePoint> points;
};

inline void write_training_curve_csv(const std::filesystem::path& path,
                                     const TrainingCurve& curve) {
    std::ofstream os = open_out(path);
    os << "episode_window,ctr,mean_abs_shift\n";
    for (const auto& p : curve.points)
        os << p.episode_end << ',' << fmt_double(p.ctr) << ',' << fmt_double(p.mean_abs_shift)
           << '\n';
}

struct TrainSettings {
    int64_t budget_episodes = 50000;
    int workers = 1;
    uint64_t seed = 0;
    int64_t curve_window = 500;       // episodes per training-curve point
    int64_t checkpoint_every = 0;     // episodes between checkpoints; 0 = final only
    std::filesystem::path checkpoint_dir;  // empty = no checkpoint files
    uint64_t config_hash = 0;
};

namespace detail {

struct CurveAccumulator {
    int64_t window = 1;
    int64_t episodes = 0, window_episodes = 0;
    int64_t clicks = 0, recs = 0;
    double abs_shift = 0.0;
    TrainingCurve curve;

    void add(const EpisodeRecord& r) {
        episodes += 1;
        window_episodes += 1;
        clicks += r.clicks();
        recs += static_cast<int64_t>(r.steps.size());
        abs_shift += std::abs(r.final_belief - r.initial_belief);
        if (window_episodes >= window) flush();
    }
    void flush() {
        if (window_episodes == 0) return;
        curve.points.push_back(CurvePoint{
            episodes, recs > 0 ? static_cast<double>(clicks) / static_cast<double>(recs) : 0.0,
            abs_shift / static_cast<double>(window_episodes)});
        window_episodes = 0;
        clicks = 0;
        recs = 0;
        abs_shift = 0.0;
    }
};

inline void maybe_checkpoint(const AnyAgent& agent, const TrainSettings& s, int64_t episode,
                             bool final) {
    if (s.checkpoint_dir.empty()) return;
    if (!final && (s.checkpoint_every <= 0 || episode % s.checkpoint_every != 0)) return;
    const std::string name =
        final ? "final.ckpt" : "checkpoint_ep" + std::to_string(episode) + ".ckpt";
    save_agent(s.checkpoint_dir / name, agent, s.config_hash);
}

// Lightweight read-only policy copy published to collector workers.
struct PolicySnapshot {
    AgentKind kind = AgentKind::Random;
    int profiling_steps = 25;       // baseline
    std::vector<double> table;      // tabular
    EpsilonSchedule schedule;       // tabular + dqn
    Mlp net;                        // dqn
    ObservationMode obs_mode = ObservationMode::Aggregate;

    static PolicySnapshot from(const AnyAgent& agent) {
        PolicySnapshot s;
        s.kind = agent.kind();
        if (const auto* b = agent.get_if<BaselineAgent>()) {
            s.profiling_steps = b->profiling_steps;
        } else if (const auto* t = agent.get_if<TabularQAgent>()) {
            s.table = t->table;
            s.schedule = t->schedule;
        } else if (const auto* d = agent.get_if<DqnAgent>()) {
            s.net = d->main_net();
            s.schedule = d->config().schedule;
            s.obs_mode = d->config().observation_mode;
        }
        return s;
    }

    PoliticsCategory act(const Observation& obs, const BaselineState& baseline_state,
                         int64_t episode, RngStream& rng) const {
        switch (kind) {
            case AgentKind::Random:
                return category_from_index(static_cast<int>(rng.uniform_int(7)));
            case AgentKind::Baseline:
                return baseline_act(baseline_state, rng);
            case AgentKind::Tabular: {
                const int key = tabular_state_key(obs);
                const std::span<const double> q(&table[static_cast<size_t>(key) * 7], 7);
                return epsilon_greedy(q, schedule.value(episode), rng);
            }
            case AgentKind::Dqn: {
                const std::vector<double> input = encode_for_net(obs, obs_mode);
                return epsilon_greedy(net.forward(input), schedule.value(episode), rng);
            }
        }
        return PoliticsCategory::Center;
    }
};

struct CollectedStep {
    Observation prev, next;
    PoliticsCategory action = PoliticsCategory::Center;
    double reward = 0.0;
    bool done = false, clicked = false;
};

struct CollectedEpisode {
    int64_t episode_index = 0;
    EpisodeRecord record;
    std::vector<CollectedStep> steps;
};

}  // namespace detail

/// Run the episode budget and return the training curve. Heuristic agents
/// collect no gradients but still produce curve points. workers == 1 is the
/// deterministic reference path; workers > 1 splits collection across
/// threads feeding the single learner.
inline TrainingCurve train(const EnvConfig& env_cfg, AnyAgent& agent, const TrainSettings& s) {
    env_cfg.validate();
    detail::CurveAccumulator acc;
    acc.window = std::max<int64_t>(1, s.curve_window);
    RngStream learner_rng = derive_stream(s.seed, 0xffffffffULL, 0, 2);

    if (s.budget_episodes <= 0) {
        detail::maybe_checkpoint(agent, s, 0, true);
        return acc.curve;
    }

    if (s.workers <= 1) {
        RecEnv env(env_cfg);
        for (int64_t ep = 0; ep < s.budget_episodes; ++ep) {
            EpisodeStreams streams{derive_stream(s.seed, 0, static_cast<uint64_t>(ep), 0),
                                   derive_stream(s.seed, 0, static_cast<uint64_t>(ep), 1),
                                   &learner_rng};
            acc.add(run_episode(env, agent, streams, ep, /*learn=*/true));
            detail::maybe_checkpoint(agent, s, ep + 1, false);
        }
        acc.flush();
        detail::maybe_checkpoint(agent, s, s.budget_episodes, true);
        return acc.curve;
    }

    // parallel collection, single learner
    std::mutex snap_mutex;
    auto snapshot = std::make_shared<const detail::PolicySnapshot>(detail::PolicySnapshot::from(agent));
    auto get_snapshot = [&] {
        std::lock_guard<std::mutex> lock(snap_mutex);
        return snapshot;
    };
    auto publish_snapshot = [&] {
        auto fresh = std::make_shared<const detail::PolicySnapshot>(detail::PolicySnapshot::from(agent));
        std::lock_guard<std::mutex> lock(snap_mutex);
        snapshot = std::move(fresh);
    };

    BoundedQueue<detail::CollectedEpisode> queue(static_cast<size_t>(s.workers) * 4);
    std::atomic<int64_t> next_episode{0};
    std::atomic<int> active_workers{s.workers};
    std::vector<std::exception_ptr> worker_errors(static_cast<size_t>(s.workers));

    auto worker_fn = [&](int w) {
        try {
            RecEnv env(env_cfg);
            while (true) {
                const int64_t ep = next_episode.fetch_add(1);
                if (ep >= s.budget_episodes) break;
                auto snap = get_snapshot();
                RngStream env_rng = derive_stream(s.seed, 0, static_cast<uint64_t>(ep), 0);
                RngStream act_rng = derive_stream(s.seed, 0, static_cast<uint64_t>(ep), 1);

                detail::CollectedEpisode out;
                out.episode_index = ep;
                BaselineState bstate;
                bstate.profiling_steps = snap->profiling_steps;
                Observation obs = env.reset(env_rng);
                out.record.initial_belief = env.user().belief;
                out.record.initial_ideology = category_of_bias(out.record.initial_belief);
                while (!env.done()) {
                    const PoliticsCategory a = snap->act(obs, bstate, ep, act_rng);
                    const StepResult r = env.step(a, env_rng);
                    bstate = baseline_update(bstate, a, r.info.clicked);
                    out.record.steps.push_back(
                        EpisodeStep{a, r.info.clicked, r.reward, r.info.user_belief});
                    if (r.done && r.info.attrited)
                        out.record.attrition_step = r.info.step_index;
                    out.steps.push_back(detail::CollectedStep{obs, r.observation, a, r.reward,
                                                              r.done, r.info.clicked});
                    obs = r.observation;
                }
                out.record.final_belief = env.user().belief;
                if (!queue.push(std::move(out))) break;
            }
        } catch (...) {
            worker_errors[static_cast<size_t>(w)] = std::current_exception();
        }
        if (active_workers.fetch_sub(1) == 1) queue.close();
    };

    std::vector<std::thread> threads;
    threads.reserve(static_cast<size_t>(s.workers));
    for (int w = 0; w < s.workers; ++w) threads.emplace_back(worker_fn, w);

    int64_t last_sync_epoch = 0;
    int64_t processed = 0;
    try {
        while (auto item = queue.pop()) {
            for (const auto& st : item->steps) {
                agent.observe(st.prev, st.action, st.reward, st.next, st.done, st.clicked,
                              learner_rng);
            }
            acc.add(item->record);
            processed += 1;
            detail::maybe_checkpoint(agent, s, processed, false);
            if (const auto* d = agent.get_if<DqnAgent>()) {
                const int64_t epoch =
                    d->config().target_sync > 0 ? d->train_steps() / d->config().target_sync : 0;
                if (epoch != last_sync_epoch) {
                    last_sync_epoch = epoch;
                    publish_snapshot();
                }
            } else if (agent.kind() == AgentKind::Tabular) {
                publish_snapshot();
            }
        }
    } catch (...) {
        queue.close();  // unblock any producer before unwinding
        for (auto& t : threads) t.join();
        throw;
    }
    for (auto& t : threads) t.join();
    for (auto& err : worker_errors)
        if (err) std::rethrow_exception(err);

    acc.flush();
    detail::maybe_checkpoint(agent, s, s.budget_episodes, true);
    return acc.curve;
}

// --- evaluation ----------------------------------------------------------------------

struct EvalSettings {
    int population = 1000;
    uint64_t eval_seed = 0;
    std::string agent_name = "agent";
};

/// The fixed evaluation population: user i from derive(seed, 0, i, 100).
inline Population generate_population(const EnvConfig& env_cfg, uint64_t seed, int count) {
    Population pop;
    pop.generation_seed = seed;
    pop.users.reserve(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) {
        RngStream rng = derive_stream(seed, 0, static_cast<uint64_t>(i), 100);
        pop.users.push_back(create_user(env_cfg.belief_params, env_cfg.user_gen_params, rng));
    }
    return pop;
}

/// One greedy (epsilon = 0), non-learning episode per population user.
/// Agent parameters are never touched; the baseline still profiles online
/// within each episode.
inline EvaluationReport evaluate_on(const EnvConfig& env_cfg, AnyAgent& agent,
                                    const Population& population, uint64_t eval_seed,
                                    const std::string& agent_name) {
    env_cfg.validate();
    EvaluationReport report;
    report.agent_name = agent_name;
    report.records.reserve(population.users.size());
    RecEnv env(env_cfg);
    for (size_t i = 0; i < population.users.size(); ++i) {
        agent.begin_episode();
        RngStream env_rng = derive_stream(eval_seed, 0, static_cast<uint64_t>(i), 101);
        RngStream act_rng = derive_stream(eval_seed, 0, static_cast<uint64_t>(i), 102);
        Observation obs = env.reset_with(population.users[i]);
        EpisodeRecord record;
        record.user_id = static_cast<int64_t>(i);
        record.initial_belief = env.user().belief;
        record.initial_ideology = category_of_bias(record.initial_belief);
        while (!env.done()) {
            const PoliticsCategory a = agent.act(obs, 0, act_rng, /*greedy=*/true);
            const StepResult r = env.step(a, env_rng);
            agent.observe_eval(a, r.info.clicked);
            record.steps.push_back(EpisodeStep{a, r.info.clicked, r.reward, r.info.user_belief});
            if (r.done && r.info.attrited) record.attrition_step = r.info.step_index;
            obs = r.observation;
        }
        record.final_belief = env.user().belief;
        report.records.push_back(std::move(record));
    }
    return report;
}

inline EvaluationReport evaluate(const EnvConfig& env_cfg, AnyAgent& agent,
                                 const EvalSettings& s) {
    const Population pop = generate_population(env_cfg, s.eval_seed, s.population);
    return evaluate_on(env_cfg, agent, pop, s.eval_seed, s.agent_name);
}

// --- calibration -----------------------------------------------------------------------

/// Fraction of users still alive after each step under uniformly random
/// recommendations. survival[0] = 1; length = lifespan + 1.
inline std::vector<double> calibrate_attrition(const EnvConfig& env_cfg, int n_users,
                                               uint64_t seed) {
    env_cfg.validate();
    std::vector<int> death_step(static_cast<size_t>(n_users), -1);
    const int lifespan = env_cfg.user_lifespan;
    for (int i = 0; i < n_users; ++i) {
        RngStream user_rng = derive_stream(seed, 0, static_cast<uint64_t>(i), 200);
        RngStream act_rng = derive_stream(seed, 0, static_cast<uint64_t>(i), 201);
        UserState u = create_user(env_cfg.belief_params, env_cfg.user_gen_params, user_rng);
        for (int t = 1; t <= lifespan && u.alive; ++t) {
            const Content c =
                sample_content(category_from_index(static_cast<int>(act_rng.uniform_int(7))),
                               user_rng);
            auto [next, outcome] = interact(u, c, env_cfg.interaction_params, user_rng);
            u = next;
            if (outcome.attrited) death_step[static_cast<size_t>(i)] = t;
        }
    }
    std::vector<double> survival(static_cast<size_t>(lifespan) + 1, 0.0);
    for (int t = 0; t <= lifespan; ++t) {
        int alive = 0;
        for (int i = 0; i < n_users; ++i) {
            const int d = death_step[static_cast<size_t>(i)];
            if (d < 0 || d > t) ++alive;
        }
        survival[static_cast<size_t>(t)] = static_cast<double>(alive) / n_users;
    }
    return survival;
}

/// Mean belief shift per (user ideology, content category) cell at fixed
/// engagement 1: users uniform inside the ideology's belief interval, one
/// sampled content per draw, shift not committed.
inline std::array<std::array<double, 7>, 7> shift_profile(const EnvConfig& env_cfg,
                                                          int samples_per_cell, uint64_t seed) {
    env_cfg.validate();
    std::array<std::array<double, 7>, 7> grid{};
    for (int ui = 0; ui < 7; ++ui) {
        for (int ci = 0; ci < 7; ++ci) {
            RngStream rng = derive_stream(seed, 0, static_cast<uint64_t>(ui * 7 + ci), 300);
            const auto [lo, hi] = category_interval(category_from_index(ui));
            double sum = 0.0;
            for (int n = 0; n < samples_per_cell; ++n) {
                UserState u;
                u.belief = rng.uniform(lo, hi);
                u.polarization_factor =
                    rng.uniform(env_cfg.user_gen_params.pf_min, env_cfg.user_gen_params.pf_max);
                u.malleability = env_cfg.user_gen_params.malleability;
                u.open_mindedness =
                    rng.uniform(env_cfg.user_gen_params.om_min, env_cfg.user_gen_params.om_max);
                u.engagement = 1.0;
                const Content c = sample_content(category_from_index(ci), rng);
                sum += opinion_shift(u, c).second;
            }
            grid[static_cast<size_t>(ui)][static_cast<size_t>(ci)] = sum / samples_per_cell;
        }
    }
    return grid;
}

struct ClickProbGrid {
    int resolution = 101;
    double open_mindedness = 0.5;
    std::vector<double> values;  // resolution x resolution, user-belief major

    double at(int ub_idx, int cb_idx) const {
        return values[static_cast<size_t>(ub_idx) * resolution + cb_idx];
    }
};

/// Click probability on a lattice over (user belief, content bias) at a fixed
/// open-mindedness (the configured range midpoint).
inline ClickProbGrid click_prob_grid(const EnvConfig& env_cfg, int resolution = 101) {
    env_cfg.validate();
    ClickProbGrid grid;
    grid.resolution = resolution;
    grid.open_mindedness =
        0.5 * (env_cfg.user_gen_params.om_min + env_cfg.user_gen_params.om_max);
    grid.values.reserve(static_cast<size_t>(resolution) * resolution);
    for (int i = 0; i < resolution; ++i) {
        const double ub = -1.0 + 2.0 * i / (resolution - 1);
        UserState u;
        u.belief = ub;
        u.open_mindedness = grid.open_mindedness;
        for (int j = 0; j < resolution; ++j) {
            const double cb = -1.0 + 2.0 * j / (resolution - 1);
            const Content c{category_of_bias(cb), cb};
            grid.values.push_back(click_probability(u, c, env_cfg.interaction_params));
        }
    }
    return grid;
}

// --- calibration CSV writers -------------------------------------------------------------

inline void write_survival_csv(const std::filesystem::path& path,
                               const std::vector<double>& survival) {
    std::ofstream os = open_out(path);
    os << "step,alive_fraction\n";
    for (size_t t = 0; t < survival.size(); ++t)
        os << t << ',' << fmt_double(survival[t]) << '\n';
}

inline void write_shift_profile_csv(const std::filesystem::path& path,
                                    const std::array<std::array<double, 7>, 7>& grid) {
    std::ofstream os = open_out(path);
    os << "user_ideology,content_category,mean_shift\n";
    for (int ui = 0; ui < 7; ++ui)
        for (int ci = 0; ci < 7; ++ci)
            os << category_name(category_from_index(ui)) << ','
               << category_name(category_from_index(ci)) << ','
               << fmt_double(grid[static_cast<size_t>(ui)][static_cast<size_t>(ci)]) << '\n';
}

inline void write_click_grid_csv(const std::filesystem::path& path, const ClickProbGrid& grid) {
    std::ofstream os = open_out(path);
    os << "user_belief,content_bias,click_probability\n";
    for (int i = 0; i < grid.resolution; ++i) {
        const double ub = -1.0 + 2.0 * i / (grid.resolution - 1);
        for (int j = 0; j < grid.resolution; ++j) {
            const double cb = -1.0 + 2.0 * j / (grid.resolution - 1);
            os << fmt_double(ub) << ',' << fmt_double(cb) << ',' << fmt_double(grid.at(i, j))
               << '\n';
        }
    }
}

}  // namespace beliefsim
