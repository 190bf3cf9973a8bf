#pragma once
// Flat dotted-key run configuration: one JSON file (nested objects are
// flattened to dotted keys), command-line overrides via key=value, a typed
// registry that rejects unknown keys, and builders for every module config.
// The resolved configuration is echoed verbatim to config.resolved.json.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "beliefsim/agents.hpp"
#include "beliefsim/environment.hpp"
#include "beliefsim/harness.hpp"

namespace beliefsim {

using json = nlohmann::json;

/// Configuration errors are usage errors (CLI exit code 1), distinct from
/// runtime failures (exit code 2).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct KeySpec {
    json def;
    const char* description;
};

/// Every recognised key with its default and help text.
inline const std::map<std::string, KeySpec>& config_registry() {
    static const std::map<std::string, KeySpec> registry = {
        {"belief.mu_left", {-0.5, "mean of the left belief Gaussian"}},
        {"belief.sigma_left", {0.25, "std dev of the left belief Gaussian"}},
        {"belief.mu_right", {0.3, "mean of the right belief Gaussian"}},
        {"belief.sigma_right", {0.3, "std dev of the right belief Gaussian"}},
        {"belief.p_left", {0.55, "probability of sampling the left component"}},
        {"belief.resample_bound", {0.8, "pseudo-truncation bound; beliefs resampled until |b| <= bound"}},
        {"user.pf_min", {1.8, "polarization factor lower bound (uniform draw)"}},
        {"user.pf_max", {2.2, "polarization factor upper bound"}},
        {"user.malleability", {1.0, "constant malleability for every user"}},
        {"user.om_min", {0.4, "open-mindedness lower bound (uniform draw)"}},
        {"user.om_max", {0.6, "open-mindedness upper bound"}},
        {"user.rate_mode", {"per_interaction", "satisfaction rate sampling: per_interaction | per_user"}},
        {"interact.p_spread", {8.0, "click-probability spread parameter"}},
        {"interact.p_max", {0.8, "maximum click probability"}},
        {"interact.spread_mode", {"exponent", "click formula mode: exponent | multiplier"}},
        {"interact.satisfaction_threshold", {0.25, "satisfaction level below which attrition can fire"}},
        {"interact.engagement_increment", {0.05, "engagement gained per click (clamped at 1)"}},
        {"interact.epsilon_div", {1e-8, "guard added to |dissonance| before division"}},
        {"env.horizon", {100, "interactions encoded per observation"}},
        {"env.user_lifespan", {500, "maximum episode length (evaluation always uses this)"}},
        {"env.reward_scheme", {"uniform", "click rewards: uniform | polarizing | depolarizing | custom"}},
        {"env.click_rewards", {json::array({1, 1, 1, 1, 1, 1, 1}), "7 click rewards for reward_scheme=custom"}},
        {"env.attrition_penalty", {-1.0, "reward added when the user attrits"}},
        {"env.survival_bonus", {0.0, "reward added when the user reaches the lifespan"}},
        {"env.observation_mode", {"aggregate", "learner encoding: matrix | aggregate"}},
        {"agent.kind", {"random", "policy: random | baseline | tabular | dqn"}},
        {"agent.gamma", {0.97, "discount factor"}},
        {"agent.alpha", {0.0, "learning rate; 0 = kind default (dqn 1e-3, tabular 0.1)"}},
        {"agent.batch_size", {64, "DQN replay batch size"}},
        {"agent.replay_capacity", {200000, "replay buffer capacity"}},
        {"agent.target_sync", {1000, "train steps between target-network syncs"}},
        {"agent.train_every", {4, "environment steps between train steps"}},
        {"agent.learn_start", {1000, "replay size required before training starts"}},
        {"agent.hidden", {json::array({32, 32}), "hidden layer widths"}},
        {"agent.optimizer", {"adam", "optimizer: adam | sgd"}},
        {"agent.loss", {"mse", "TD loss: mse | huber"}},
        {"agent.epsilon_start", {1.0, "initial exploration rate"}},
        {"agent.epsilon_min", {0.02, "exploration floor"}},
        {"agent.epsilon_schedule", {"linear", "epsilon decay: linear | exponential"}},
        {"agent.epsilon_decay_span", {0, "episodes to reach the floor; 0 = 30% of the budget"}},
        {"agent.epsilon_decay", {0.99, "per-episode factor for the exponential schedule"}},
        {"agent.profiling_steps", {25, "baseline profiling recommendations per episode"}},
        {"agent.prioritized", {false, "prioritized experience replay (off = uniform)"}},
        {"agent.priority_alpha", {0.6, "prioritization exponent"}},
        {"agent.priority_beta", {0.4, "importance-weight exponent"}},
        {"run.name", {"run", "run label used in reports"}},
        {"run.budget_episodes", {0, "training episodes; 0 = take from run.tier"}},
        {"run.tier", {"desk", "budget tier: smoke (2k) | desk (50k) | full (1M)"}},
        {"run.workers", {1, "collector worker threads"}},
        {"run.eval_population", {1000, "evaluation population size"}},
        {"run.eval_seed", {9001, "seed generating the fixed evaluation population"}},
        {"run.seed", {42, "root seed for training and simulation"}},
        {"run.outdir", {"out", "output directory"}},
        {"run.checkpoint_every", {0, "episodes between checkpoints; 0 = final only"}},
        {"run.train_lifespan", {100, "episode length during training"}},
        {"run.curve_window", {500, "episodes per training-curve point"}},
        {"run.trajectory_stride", {10, "steps between trajectory samples"}},
        {"run.experiment", {"", "preset: random | baseline | no-manip | polarize | depolarize"}},
    };
    return registry;
}

class RunConfig {
public:
    RunConfig() {
        for (const auto& [key, spec] : config_registry()) values_[key] = spec.def;
    }

    /// Merge a JSON config file. Nested objects flatten to dotted keys;
    /// unknown keys are hard errors.
    void load_file(const std::filesystem::path& path) {
        std::ifstream is(path);
        if (!is) throw ConfigError("cannot open config file: " + path.string());
        json doc;
        try {
            is >> doc;
        } catch (const json::parse_error& e) {
            throw ConfigError("config parse error in " + path.string() + ": " + e.what());
        }
        if (!doc.is_object()) throw ConfigError("config root must be a JSON object");
        merge_object(doc, "");
    }

    /// Apply a "key=value" override. Values parse as JSON when possible,
    /// otherwise as raw strings.
    void set_override(const std::string& assignment) {
        const auto eq = assignment.find('=');
        if (eq == std::string::npos)
            throw ConfigError("override must look like key=value: " + assignment);
        const std::string key = assignment.substr(0, eq);
        const std::string raw = assignment.substr(eq + 1);
        json value;
        try {
            value = json::parse(raw);
        } catch (const json::parse_error&) {
            value = raw;  // unquoted string
        }
        set(key, value);
    }

    void set(const std::string& key, json value) {
        const auto it = config_registry().find(key);
        if (it == config_registry().end()) throw ConfigError("unknown config key: " + key);
        const json& def = it->second.def;
        if (def.is_number() && value.is_number()) {
            // keep integer keys integral
            if (def.is_number_integer() && !value.is_number_integer()) {
                const double d = value.get<double>();
                if (d != static_cast<double>(static_cast<int64_t>(d)))
                    throw ConfigError("key " + key + " expects an integer, got " + value.dump());
                value = static_cast<int64_t>(d);
            }
        } else if (def.type() != value.type() &&
                   !(def.is_array() && value.is_array())) {
            throw ConfigError("key " + key + " expects " + std::string(def.type_name()) +
                              ", got " + std::string(value.type_name()) + " (" + value.dump() + ")");
        }
        values_[key] = std::move(value);
    }

    double get_double(const std::string& key) const {
        const json& v = at(key);
        if (!v.is_number()) throw ConfigError("key " + key + " is not a number");
        return v.get<double>();
    }
    int64_t get_int(const std::string& key) const {
        const json& v = at(key);
        if (!v.is_number_integer()) throw ConfigError("key " + key + " is not an integer");
        return v.get<int64_t>();
    }
    bool get_bool(const std::string& key) const {
        const json& v = at(key);
        if (!v.is_boolean()) throw ConfigError("key " + key + " is not a boolean");
        return v.get<bool>();
    }
    std::string get_string(const std::string& key) const {
        const json& v = at(key);
        if (!v.is_string()) throw ConfigError("key " + key + " is not a string");
        return v.get<std::string>();
    }
    std::vector<double> get_double_list(const std::string& key) const {
        const json& v = at(key);
        if (!v.is_array()) throw ConfigError("key " + key + " is not an array");
        std::vector<double> out;
        for (const auto& x : v) {
            if (!x.is_number()) throw ConfigError("key " + key + " holds a non-number");
            out.push_back(x.get<double>());
        }
        return out;
    }
    std::vector<int> get_int_list(const std::string& key) const {
        const json& v = at(key);
        if (!v.is_array()) throw ConfigError("key " + key + " is not an array");
        std::vector<int> out;
        for (const auto& x : v) {
            if (!x.is_number_integer()) throw ConfigError("key " + key + " holds a non-integer");
            out.push_back(x.get<int>());
        }
        return out;
    }

    /// Table-4.1 presets. Empty string leaves the config untouched.
    void apply_experiment(const std::string& name) {
        if (name.empty()) return;
        set("run.experiment", name);
        set("run.name", name);
        if (name == "random") {
            set("agent.kind", "random");
            set("env.reward_scheme", "uniform");
        } else if (name == "baseline") {
            set("agent.kind", "baseline");
            set("env.reward_scheme", "uniform");
        } else if (name == "no-manip") {
            set("agent.kind", "dqn");
            set("env.reward_scheme", "uniform");
        } else if (name == "polarize") {
            set("agent.kind", "dqn");
            set("env.reward_scheme", "polarizing");
        } else if (name == "depolarize") {
            set("agent.kind", "dqn");
            set("env.reward_scheme", "depolarizing");
        } else {
            throw ConfigError("unknown experiment preset: " + name +
                              " (expected random | baseline | no-manip | polarize | depolarize)");
        }
    }

    // --- module builders ---------------------------------------------------------

    BeliefDistributionParams belief_params() const {
        BeliefDistributionParams p;
        p.mu_left = get_double("belief.mu_left");
        p.sigma_left = get_double("belief.sigma_left");
        p.mu_right = get_double("belief.mu_right");
        p.sigma_right = get_double("belief.sigma_right");
        p.p_left = get_double("belief.p_left");
        p.resample_bound = get_double("belief.resample_bound");
        validate_with(p);
        return p;
    }

    RateMode rate_mode() const {
        const std::string m = get_string("user.rate_mode");
        if (m == "per_interaction") return RateMode::PerInteraction;
        if (m == "per_user") return RateMode::PerUser;
        throw ConfigError("user.rate_mode must be per_interaction or per_user, got " + m);
    }

    UserGenParams user_gen_params() const {
        UserGenParams p;
        p.pf_min = get_double("user.pf_min");
        p.pf_max = get_double("user.pf_max");
        p.malleability = get_double("user.malleability");
        p.om_min = get_double("user.om_min");
        p.om_max = get_double("user.om_max");
        p.rate_mode = rate_mode();
        validate_with(p);
        return p;
    }

    InteractionParams interaction_params() const {
        InteractionParams p;
        p.p_spread = get_double("interact.p_spread");
        p.p_max = get_double("interact.p_max");
        const std::string mode = get_string("interact.spread_mode");
        if (mode == "exponent") p.spread_mode = SpreadMode::Exponent;
        else if (mode == "multiplier") p.spread_mode = SpreadMode::Multiplier;
        else throw ConfigError("interact.spread_mode must be exponent or multiplier, got " + mode);
        p.satisfaction_threshold = get_double("interact.satisfaction_threshold");
        p.engagement_increment = get_double("interact.engagement_increment");
        p.epsilon_div = get_double("interact.epsilon_div");
        p.rate_mode = rate_mode();
        validate_with(p);
        return p;
    }

    RewardScheme reward_scheme() const {
        const std::string s = get_string("env.reward_scheme");
        RewardScheme scheme;
        if (s == "uniform") scheme = RewardScheme::uniform();
        else if (s == "polarizing") scheme = RewardScheme::polarizing();
        else if (s == "depolarizing") scheme = RewardScheme::depolarizing();
        else if (s == "custom") {
            const auto rewards = get_double_list("env.click_rewards");
            if (rewards.size() != 7)
                throw ConfigError("env.click_rewards must hold exactly 7 values");
            for (int k = 0; k < 7; ++k)
                scheme.click_reward_per_category[static_cast<size_t>(k)] =
                    rewards[static_cast<size_t>(k)];
        } else {
            throw ConfigError(
                "env.reward_scheme must be uniform | polarizing | depolarizing | custom, got " + s);
        }
        scheme.attrition_penalty = get_double("env.attrition_penalty");
        scheme.survival_bonus = get_double("env.survival_bonus");
        return scheme;
    }

    ObservationMode observation_mode() const {
        const std::string m = get_string("env.observation_mode");
        if (m == "matrix") return ObservationMode::Matrix;
        if (m == "aggregate") return ObservationMode::Aggregate;
        throw ConfigError("env.observation_mode must be matrix or aggregate, got " + m);
    }

    /// Environment for evaluation/simulation (full lifespan).
    EnvConfig env_config() const {
        EnvConfig cfg;
        cfg.horizon = require_positive_int("env.horizon");
        cfg.user_lifespan = require_positive_int("env.user_lifespan");
        cfg.reward_scheme = reward_scheme();
        cfg.observation_mode = observation_mode();
        cfg.belief_params = belief_params();
        cfg.user_gen_params = user_gen_params();
        cfg.interaction_params = interaction_params();
        validate_with(cfg);
        return cfg;
    }

    /// Environment for training (run.train_lifespan; 0 = same as evaluation).
    EnvConfig train_env_config() const {
        EnvConfig cfg = env_config();
        const int64_t ts = get_int("run.train_lifespan");
        if (ts < 0) throw ConfigError("run.train_lifespan must be >= 0");
        if (ts > 0) cfg.user_lifespan = static_cast<int>(ts);
        return cfg;
    }

    int64_t budget_episodes() const {
        const int64_t b = get_int("run.budget_episodes");
        if (b < 0) throw ConfigError("run.budget_episodes must be >= 0");
        if (b > 0) return b;
        const std::string tier = get_string("run.tier");
        if (tier == "smoke") return 2000;
        if (tier == "desk") return 50000;
        if (tier == "full") return 1000000;
        throw ConfigError("run.tier must be smoke | desk | full, got " + tier);
    }

    AgentKind agent_kind() const {
        const std::string k = get_string("agent.kind");
        if (k == "random") return AgentKind::Random;
        if (k == "baseline") return AgentKind::Baseline;
        if (k == "tabular") return AgentKind::Tabular;
        if (k == "dqn") return AgentKind::Dqn;
        throw ConfigError("agent.kind must be random | baseline | tabular | dqn, got " + k);
    }

    EpsilonSchedule epsilon_schedule(int64_t budget) const {
        EpsilonSchedule s;
        s.epsilon_start = get_double("agent.epsilon_start");
        s.epsilon_min = get_double("agent.epsilon_min");
        const std::string kind = get_string("agent.epsilon_schedule");
        if (kind == "linear") s.kind = ScheduleKind::Linear;
        else if (kind == "exponential") s.kind = ScheduleKind::Exponential;
        else throw ConfigError("agent.epsilon_schedule must be linear or exponential");
        s.decay_factor = get_double("agent.epsilon_decay");
        int64_t span = get_int("agent.epsilon_decay_span");
        if (span <= 0) span = std::max<int64_t>(1, (budget * 3) / 10);
        s.decay_span = span;
        return s;
    }

    DqnConfig dqn_config(int64_t budget) const {
        DqnConfig c;
        c.gamma = get_double("agent.gamma");
        const double alpha = get_double("agent.alpha");
        c.alpha = alpha > 0.0 ? alpha : 1e-3;
        c.batch_size = static_cast<size_t>(require_positive_int("agent.batch_size"));
        c.replay_capacity = static_cast<size_t>(require_positive_int("agent.replay_capacity"));
        c.target_sync = require_positive_int("agent.target_sync");
        c.train_every = require_positive_int("agent.train_every");
        c.learn_start = require_positive_int("agent.learn_start");
        c.hidden = get_int_list("agent.hidden");
        c.observation_mode = observation_mode();
        c.horizon = require_positive_int("env.horizon");
        const std::string opt = get_string("agent.optimizer");
        if (opt == "adam") c.optimizer = OptimizerKind::Adam;
        else if (opt == "sgd") c.optimizer = OptimizerKind::Sgd;
        else throw ConfigError("agent.optimizer must be adam or sgd, got " + opt);
        const std::string loss = get_string("agent.loss");
        if (loss == "mse") c.loss = LossKind::SquaredError;
        else if (loss == "huber") c.loss = LossKind::Huber;
        else throw ConfigError("agent.loss must be mse or huber, got " + loss);
        c.schedule = epsilon_schedule(budget);
        c.prioritized = get_bool("agent.prioritized");
        c.priority_alpha = get_double("agent.priority_alpha");
        c.priority_beta = get_double("agent.priority_beta");
        if (!(c.gamma >= 0.0 && c.gamma < 1.0))
            throw ConfigError("agent.gamma must be in [0, 1)");
        return c;
    }

    AnyAgent make_agent(int64_t budget, RngStream& rng) const {
        switch (agent_kind()) {
            case AgentKind::Random:
                return AnyAgent(RandomAgent{});
            case AgentKind::Baseline: {
                BaselineAgent b;
                b.profiling_steps = static_cast<int>(require_positive_int("agent.profiling_steps"));
                b.begin_episode();
                return AnyAgent(std::move(b));
            }
            case AgentKind::Tabular: {
                TabularQAgent t;
                const double alpha = get_double("agent.alpha");
                t.alpha = alpha > 0.0 ? alpha : 0.1;
                t.gamma = get_double("agent.gamma");
                t.schedule = epsilon_schedule(budget);
                return AnyAgent(std::move(t));
            }
            case AgentKind::Dqn:
                return AnyAgent(DqnAgent(dqn_config(budget), rng));
        }
        throw ConfigError("unreachable agent kind");
    }

    TrainSettings train_settings(uint64_t hash) const {
        TrainSettings s;
        s.budget_episodes = budget_episodes();
        s.workers = static_cast<int>(require_positive_int("run.workers"));
        s.seed = static_cast<uint64_t>(get_int("run.seed"));
        s.curve_window = require_positive_int("run.curve_window");
        s.checkpoint_every = get_int("run.checkpoint_every");
        s.config_hash = hash;
        return s;
    }

    EvalSettings eval_settings() const {
        EvalSettings s;
        s.population = static_cast<int>(require_positive_int("run.eval_population"));
        s.eval_seed = static_cast<uint64_t>(get_int("run.eval_seed"));
        s.agent_name = get_string("run.name");
        return s;
    }

    // --- resolved form -------------------------------------------------------------

    /// The full key set as sorted JSON (what config.resolved.json holds).
    std::string resolved_dump() const {
        json doc(values_);  // std::map keeps keys sorted
        return doc.dump(2) + "\n";
    }

    void write_resolved(const std::filesystem::path& path) const {
        std::ofstream os = open_out(path);
        os << resolved_dump();
    }

    /// FNV-1a over the resolved dump; stored in checkpoints.
    uint64_t hash() const { return fnv1a(resolved_dump()); }

    /// Hash over the model-relevant keys only (everything except run.*), so a
    /// checkpoint stays compatible across changes of outdir, budget or seeds.
    uint64_t model_hash() const {
        json doc;
        for (const auto& [k, v] : values_)
            if (k.rfind("run.", 0) != 0) doc[k] = v;
        return fnv1a(doc.dump());
    }

    const std::map<std::string, json>& values() const { return values_; }

private:
    static uint64_t fnv1a(const std::string& s) {
        uint64_t h = 1469598103934665603ULL;
        for (unsigned char c : s) {
            h ^= c;
            h *= 1099511628211ULL;
        }
        return h;
    }

    const json& at(const std::string& key) const {
        const auto it = values_.find(key);
        if (it == values_.end()) throw ConfigError("unknown config key: " + key);
        return it->second;
    }

    int require_positive_int(const std::string& key) const {
        const int64_t v = get_int(key);
        if (v <= 0) throw ConfigError("key " + key + " must be > 0, got " + std::to_string(v));
        return static_cast<int>(v);
    }

    template <class T>
    void validate_with(const T& params) const {
        try {
            params.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    }

    void merge_object(const json& obj, const std::string& prefix) {
        for (const auto& [k, v] : obj.items()) {
            const std::string key = prefix.empty() ? k : prefix + "." + k;
            if (v.is_object()) merge_object(v, key);
            else set(key, v);
        }
    }

    std::map<std::string, json> values_;
};

}  // namespace beliefsim
