#pragma once
// Versioned binary checkpoints for agents. Layout (little-endian):
//   magic u32 "BSCK", version u32, config hash u64, agent kind u32, payload.
// DQN payload carries the full DqnConfig, both networks (sizes + row-major
// parameters), the optimizer state, and the train/sync counters. The replay
// buffer is not persisted; checkpoints capture the policy, not the memory.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "beliefsim/agents.hpp"
#include "beliefsim/metrics.hpp"

namespace beliefsim {

namespace detail {

inline constexpr uint32_t kCheckpointMagic = 0x4b435342;  // "BSCK"
inline constexpr uint32_t kCheckpointVersion = 1;

inline void write_vec_d(std::ostream& os, const std::vector<double>& v) {
    write_pod(os, static_cast<uint64_t>(v.size()));
    os.write(reinterpret_cast<const char*>(v.data()),
             static_cast<std::streamsize>(v.size() * sizeof(double)));
}

inline std::vector<double> read_vec_d(std::istream& is) {
    const uint64_t n = read_pod<uint64_t>(is);
    std::vector<double> v(n);
    is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!is) throw std::runtime_error("checkpoint: truncated array");
    return v;
}

inline void write_vec_i(std::ostream& os, const std::vector<int>& v) {
    write_pod(os, static_cast<uint64_t>(v.size()));
    for (int x : v) write_pod(os, static_cast<int64_t>(x));
}

inline std::vector<int> read_vec_i(std::istream& is) {
    const uint64_t n = read_pod<uint64_t>(is);
    std::vector<int> v(n);
    for (uint64_t i = 0; i < n; ++i) v[i] = static_cast<int>(read_pod<int64_t>(is));
    return v;
}

inline void write_mlp(std::ostream& os, const Mlp& net) {
    write_vec_i(os, net.sizes());
    for (const auto& w : net.weights()) write_vec_d(os, w);
    for (const auto& b : net.biases()) write_vec_d(os, b);
}

inline Mlp read_mlp(std::istream& is) {
    const std::vector<int> sizes = read_vec_i(is);
    RngStream dummy(0);
    Mlp net = Mlp::init(sizes, dummy, InitScheme::Zero);
    for (auto& w : net.weights()) w = read_vec_d(is);
    for (auto& b : net.biases()) b = read_vec_d(is);
    return net;
}

inline void write_schedule(std::ostream& os, const EpsilonSchedule& s) {
    write_pod(os, s.epsilon_start);
    write_pod(os, s.epsilon_min);
    write_pod(os, static_cast<uint32_t>(s.kind));
    write_pod(os, s.decay_span);
    write_pod(os, s.decay_factor);
}

inline EpsilonSchedule read_schedule(std::istream& is) {
    EpsilonSchedule s;
    s.epsilon_start = read_pod<double>(is);
    s.epsilon_min = read_pod<double>(is);
    s.kind = static_cast<ScheduleKind>(read_pod<uint32_t>(is));
    s.decay_span = read_pod<int64_t>(is);
    s.decay_factor = read_pod<double>(is);
    return s;
}

}  // namespace detail

inline void save_agent_stream(std::ostream& os, const AnyAgent& agent, uint64_t config_hash) {
    using namespace detail;
    write_pod(os, kCheckpointMagic);
    write_pod(os, kCheckpointVersion);
    write_pod(os, config_hash);
    write_pod(os, static_cast<uint32_t>(agent.kind()));
    if (const auto* b = agent.get_if<BaselineAgent>()) {
        write_pod(os, static_cast<int64_t>(b->profiling_steps));
    } else if (const auto* t = agent.get_if<TabularQAgent>()) {
        write_pod(os, t->alpha);
        write_pod(os, t->gamma);
        write_schedule(os, t->schedule);
        write_vec_d(os, t->table);
    } else if (const auto* d = agent.get_if<DqnAgent>()) {
        const DqnConfig& c = d->config();
        write_pod(os, c.gamma);
        write_pod(os, c.alpha);
        write_pod(os, static_cast<uint64_t>(c.batch_size));
        write_pod(os, static_cast<uint64_t>(c.replay_capacity));
        write_pod(os, c.target_sync);
        write_pod(os, c.train_every);
        write_pod(os, c.learn_start);
        write_vec_i(os, c.hidden);
        write_pod(os, static_cast<uint32_t>(c.observation_mode));
        write_pod(os, static_cast<int64_t>(c.horizon));
        write_pod(os, static_cast<uint32_t>(c.optimizer));
        write_pod(os, static_cast<uint32_t>(c.loss));
        write_schedule(os, c.schedule);
        write_pod(os, static_cast<uint8_t>(c.prioritized ? 1 : 0));
        write_pod(os, c.priority_alpha);
        write_pod(os, c.priority_beta);
        write_mlp(os, d->main_net());
        write_mlp(os, d->target_net());
        const OptimizerState& opt = d->optimizer();
        write_pod(os, opt.step);
        write_pod(os, static_cast<uint64_t>(opt.m_w.size()));
        for (size_t l = 0; l < opt.m_w.size(); ++l) {
            write_vec_d(os, opt.m_w[l]);
            write_vec_d(os, opt.v_w[l]);
            write_vec_d(os, opt.m_b[l]);
            write_vec_d(os, opt.v_b[l]);
        }
        write_pod(os, d->train_steps());
        write_pod(os, d->steps_since_sync());
    }
}

struct LoadedCheckpoint {
    AnyAgent agent;
    uint64_t config_hash = 0;
};

inline LoadedCheckpoint load_agent_stream(std::istream& is) {
    using namespace detail;
    if (read_pod<uint32_t>(is) != kCheckpointMagic)
        throw std::runtime_error("checkpoint: bad magic (not a checkpoint file)");
    const uint32_t version = read_pod<uint32_t>(is);
    if (version != kCheckpointVersion)
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
    const uint64_t config_hash = read_pod<uint64_t>(is);
    const auto kind = static_cast<AgentKind>(read_pod<uint32_t>(is));
    switch (kind) {
        case AgentKind::Random:
            return {AnyAgent(RandomAgent{}), config_hash};
        case AgentKind::Baseline: {
            BaselineAgent b;
            b.profiling_steps = static_cast<int>(read_pod<int64_t>(is));
            return {AnyAgent(std::move(b)), config_hash};
        }
        case AgentKind::Tabular: {
            TabularQAgent t;
            t.alpha = read_pod<double>(is);
            t.gamma = read_pod<double>(is);
            t.schedule = read_schedule(is);
            t.table = read_vec_d(is);
            if (t.table.size() != static_cast<size_t>(kTabularStates) * 7)
                throw std::runtime_error("checkpoint: tabular table has the wrong size");
            return {AnyAgent(std::move(t)), config_hash};
        }
        case AgentKind::Dqn: {
            DqnConfig c;
            c.gamma = read_pod<double>(is);
            c.alpha = read_pod<double>(is);
            c.batch_size = read_pod<uint64_t>(is);
            c.replay_capacity = read_pod<uint64_t>(is);
            c.target_sync = read_pod<int64_t>(is);
            c.train_every = read_pod<int64_t>(is);
            c.learn_start = read_pod<int64_t>(is);
            c.hidden = read_vec_i(is);
            c.observation_mode = static_cast<ObservationMode>(read_pod<uint32_t>(is));
            c.horizon = static_cast<int>(read_pod<int64_t>(is));
            c.optimizer = static_cast<OptimizerKind>(read_pod<uint32_t>(is));
            c.loss = static_cast<LossKind>(read_pod<uint32_t>(is));
            c.schedule = read_schedule(is);
            c.prioritized = read_pod<uint8_t>(is) != 0;
            c.priority_alpha = read_pod<double>(is);
            c.priority_beta = read_pod<double>(is);
            RngStream dummy(0);
            DqnAgent agent(c, dummy);
            Mlp main_net = read_mlp(is);  // reads must stay ordered: main, then target
            Mlp target_net = read_mlp(is);
            agent.restore(std::move(main_net), std::move(target_net));
            OptimizerState& opt = agent.optimizer();
            opt.step = read_pod<int64_t>(is);
            const uint64_t layers = read_pod<uint64_t>(is);
            if (c.optimizer == OptimizerKind::Adam && layers != agent.main_net().layer_count())
                throw std::runtime_error("checkpoint: optimizer state layer mismatch");
            opt.m_w.assign(layers, {});
            opt.v_w.assign(layers, {});
            opt.m_b.assign(layers, {});
            opt.v_b.assign(layers, {});
            for (uint64_t l = 0; l < layers; ++l) {
                opt.m_w[l] = read_vec_d(is);
                opt.v_w[l] = read_vec_d(is);
                opt.m_b[l] = read_vec_d(is);
                opt.v_b[l] = read_vec_d(is);
            }
            const int64_t train_steps = read_pod<int64_t>(is);
            const int64_t since_sync = read_pod<int64_t>(is);
            agent.restore_counters(train_steps, since_sync);
            return {AnyAgent(std::move(agent)), config_hash};
        }
    }
    throw std::runtime_error("checkpoint: unknown agent kind");
}

inline void save_agent(const std::filesystem::path& path, const AnyAgent& agent,
                       uint64_t config_hash) {
    std::ofstream os = open_out(path);
    save_agent_stream(os, agent, config_hash);
    if (!os) throw std::runtime_error("save_agent: write failed for " + path.string());
}

inline LoadedCheckpoint load_agent(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_agent: cannot open " + path.string());
    return load_agent_stream(is);
}

/// Byte-level fingerprint of an agent's full serialized state (FNV-1a).
inline uint64_t agent_fingerprint(const AnyAgent& agent) {
    std::ostringstream os(std::ios::binary);
    save_agent_stream(os, agent, 0);
    const std::string bytes = os.str();
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace beliefsim
