#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "beliefsim/checkpoint.hpp"
#include "beliefsim/metrics.hpp"

using namespace beliefsim;
using Catch::Matchers::WithinAbs;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

EpisodeRecord make_record(PoliticsCategory ideology, const std::vector<int>& actions,
                          const std::vector<bool>& clicks, int attrition_step, int64_t user_id) {
    EpisodeRecord r;
    r.initial_ideology = ideology;
    r.initial_belief = (category_interval(ideology).first + category_interval(ideology).second) / 2;
    r.user_id = user_id;
    for (size_t i = 0; i < actions.size(); ++i) {
        EpisodeStep s;
        s.action = category_from_index(actions[i]);
        s.clicked = clicks[i];
        s.reward = clicks[i] ? 1.0 : 0.0;
        s.belief_after = r.initial_belief;
        r.steps.push_back(s);
    }
    r.final_belief = r.initial_belief;
    r.attrition_step = attrition_step;
    return r;
}

}  // namespace

TEST_CASE("histogram counts conserve totals and respect edges", "[metrics][histogram]") {
    SECTION("all-zero beliefs occupy the single bin containing 0") {
        const auto h = belief_histogram(std::vector<double>(100, 0.0), 50);
        REQUIRE(h.total == 100);
        int nonzero = 0;
        for (size_t i = 0; i < h.counts.size(); ++i) {
            if (h.counts[i] > 0) {
                ++nonzero;
                REQUIRE(h.edges[i] <= 0.0);
                REQUIRE(h.edges[i + 1] >= 0.0);
                REQUIRE(h.counts[i] == 100);
            }
        }
        REQUIRE(nonzero == 1);
    }
    SECTION("the right edge value lands in the last bin") {
        const auto h = belief_histogram({1.0, -1.0}, 10);
        REQUIRE(h.counts.front() == 1);
        REQUIRE(h.counts.back() == 1);
    }
    SECTION("out-of-range beliefs are rejected") {
        REQUIRE_THROWS_AS(belief_histogram({1.0001}, 10), std::invalid_argument);
    }
    SECTION("uniform samples pass a chi-square flatness check at alpha=0.01") {
        RngStream rng(1);
        std::vector<double> xs(50000);
        for (double& x : xs) x = rng.uniform(-1.0, 1.0);
        const auto h = belief_histogram(xs, 50);
        REQUIRE(h.total == 50000);
        const double expected = 50000.0 / 50.0;
        double chi2 = 0.0;
        for (int64_t c : h.counts) {
            const double d = static_cast<double>(c) - expected;
            chi2 += d * d / expected;
        }
        // 49 dof, upper 1% critical value
        REQUIRE(chi2 < 74.92);
    }
}

TEST_CASE("composition matrix averages one-hot actions over survivors", "[metrics][composition]") {
    SECTION("single record reproduces its own one-hots") {
        const auto r = make_record(PoliticsCategory::Left, {0, 3, 6}, {true, false, true}, -1, 0);
        const auto m = composition_matrix({r});
        REQUIRE(m.max_steps == 3);
        const int ideo = category_index(PoliticsCategory::Left);
        REQUIRE(m.at(ideo, 0).freq[0] == 1.0);
        REQUIRE(m.at(ideo, 1).freq[3] == 1.0);
        REQUIRE(m.at(ideo, 2).freq[6] == 1.0);
        REQUIRE(m.at(ideo, 0).survivors == 1);
        // other ideology rows have no survivors anywhere
        REQUIRE(m.at(0, 0).survivors == 0);
    }
    SECTION("cells beyond everyone's attrition are undefined") {
        const auto a = make_record(PoliticsCategory::Center, {1, 1}, {false, false}, 2, 0);
        const auto b = make_record(PoliticsCategory::Center, {2, 2, 2}, {false, false, false}, 3, 1);
        const auto m = composition_matrix({a, b});
        REQUIRE(m.max_steps == 3);
        const int ideo = category_index(PoliticsCategory::Center);
        REQUIRE(m.at(ideo, 0).survivors == 2);
        REQUIRE(m.at(ideo, 2).survivors == 1);
        REQUIRE_THAT(m.at(ideo, 0).freq[1], WithinAbs(0.5, 1e-15));
        REQUIRE_THAT(m.at(ideo, 0).freq[2], WithinAbs(0.5, 1e-15));
    }
    SECTION("defined rows sum to one") {
        RngStream rng(2);
        std::vector<EpisodeRecord> records;
        for (int i = 0; i < 40; ++i) {
            std::vector<int> actions;
            std::vector<bool> clicks;
            const int len = 1 + static_cast<int>(rng.uniform_int(20));
            for (int t = 0; t < len; ++t) {
                actions.push_back(static_cast<int>(rng.uniform_int(7)));
                clicks.push_back(rng.bernoulli(0.3));
            }
            records.push_back(make_record(category_from_index(static_cast<int>(rng.uniform_int(7))),
                                          actions, clicks, -1, i));
        }
        const auto m = composition_matrix(records);
        for (int ideo = 0; ideo < 7; ++ideo) {
            for (int t = 0; t < m.max_steps; ++t) {
                const auto& cell = m.at(ideo, t);
                if (cell.survivors == 0) continue;
                double sum = 0.0;
                for (double f : cell.freq) sum += f;
                REQUIRE_THAT(sum, WithinAbs(1.0, 1e-12));
            }
        }
    }
}

TEST_CASE("summaries pool clicks and attritions", "[metrics][summary]") {
    EvaluationReport rep;
    rep.agent_name = "handmade";
    rep.records.push_back(make_record(PoliticsCategory::Center, std::vector<int>(12, 3),
                                      {true, true, true, false, false, false, false, false, false,
                                       false, false, false},
                                      -1, 0));
    rep.records.push_back(make_record(PoliticsCategory::Left, std::vector<int>(8, 1),
                                      {true, true, false, false, false, false, false, false}, 8, 1));
    const auto rows = summarize({rep});
    REQUIRE(rows.size() == 1);
    REQUIRE_THAT(rows[0].ctr, WithinAbs(0.25, 1e-12));  // 5 clicks / 20 recs
    REQUIRE_THAT(rows[0].attrition_rate, WithinAbs(0.5, 1e-12));
    REQUIRE(rows[0].agent == "handmade");

    REQUIRE_THROWS_AS(summarize({}), std::invalid_argument);
    EvaluationReport empty;
    REQUIRE_THROWS_AS(summarize({empty}), std::invalid_argument);
}

TEST_CASE("population snapshots round-trip bit-exactly", "[metrics][population]") {
    const auto dir = std::filesystem::temp_directory_path() / "beliefsim_test_pop";
    std::filesystem::create_directories(dir);
    const auto path = dir / "population.snapshot";

    Population pop;
    pop.generation_seed = 0xDEADBEEFCAFEF00DULL;
    BeliefDistributionParams bp;
    UserGenParams gp;
    RngStream rng(3);
    for (int i = 0; i < 257; ++i) pop.users.push_back(create_user(bp, gp, rng));
    pop.users[13].alive = false;
    pop.users[13].satisfaction = 0.123456789012345678;

    save_population(path, pop);
    const Population loaded = load_population(path);
    REQUIRE(loaded.generation_seed == pop.generation_seed);
    REQUIRE(loaded.users.size() == pop.users.size());
    for (size_t i = 0; i < pop.users.size(); ++i) {
        REQUIRE(loaded.users[i].belief == pop.users[i].belief);
        REQUIRE(loaded.users[i].polarization_factor == pop.users[i].polarization_factor);
        REQUIRE(loaded.users[i].malleability == pop.users[i].malleability);
        REQUIRE(loaded.users[i].open_mindedness == pop.users[i].open_mindedness);
        REQUIRE(loaded.users[i].engagement == pop.users[i].engagement);
        REQUIRE(loaded.users[i].satisfaction == pop.users[i].satisfaction);
        REQUIRE(loaded.users[i].growth_rate == pop.users[i].growth_rate);
        REQUIRE(loaded.users[i].decay_rate == pop.users[i].decay_rate);
        REQUIRE(loaded.users[i].alive == pop.users[i].alive);
    }

    SECTION("wrong version is rejected") {
        std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
        f.seekp(4);
        const uint32_t bad = 999;
        f.write(reinterpret_cast<const char*>(&bad), 4);
        f.close();
        REQUIRE_THROWS_WITH(load_population(path), Catch::Matchers::ContainsSubstring("version"));
    }
    SECTION("corrupt magic is rejected") {
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        f << "garbage that is long enough to read a header from";
        f.close();
        REQUIRE_THROWS_AS(load_population(path), std::runtime_error);
    }
}

TEST_CASE("report export writes the documented file set deterministically", "[metrics][export]") {
    const auto dir = std::filesystem::temp_directory_path() / "beliefsim_test_export";
    std::filesystem::remove_all(dir);

    EvaluationReport rep;
    rep.agent_name = "random";
    RngStream rng(4);
    for (int i = 0; i < 25; ++i) {
        std::vector<int> actions;
        std::vector<bool> clicks;
        const int len = 3 + static_cast<int>(rng.uniform_int(9));
        for (int t = 0; t < len; ++t) {
            actions.push_back(static_cast<int>(rng.uniform_int(7)));
            clicks.push_back(rng.bernoulli(0.25));
        }
        auto r = make_record(category_from_index(static_cast<int>(rng.uniform_int(7))), actions,
                             clicks, rng.bernoulli(0.5) ? len : -1, i);
        rep.records.push_back(std::move(r));
    }
    export_report(rep, dir, 2, 50);

    SECTION("histogram CSV has header plus one row per bin") {
        for (const char* name : {"belief_hist_initial.csv", "belief_hist_final.csv"}) {
            const std::string text = slurp(dir / name);
            REQUIRE(static_cast<int>(std::count(text.begin(), text.end(), '\n')) == 51);
        }
    }
    SECTION("composition CSV covers 7 ideologies x max steps") {
        const auto m = composition_matrix(rep.records);
        const std::string text = slurp(dir / "composition.csv");
        REQUIRE(static_cast<int>(std::count(text.begin(), text.end(), '\n')) ==
                1 + 7 * m.max_steps);
        // undefined cells exported with empty frequency fields
        REQUIRE(text.find(",,,,,,,0\n") != std::string::npos);
    }
    SECTION("re-export is byte-identical") {
        std::vector<std::string> before;
        for (const char* name : {"belief_hist_initial.csv", "belief_hist_final.csv",
                                 "composition.csv", "eval_summary.csv", "trajectories.csv"})
            before.push_back(slurp(dir / name));
        export_report(rep, dir, 2, 50);
        size_t i = 0;
        for (const char* name : {"belief_hist_initial.csv", "belief_hist_final.csv",
                                 "composition.csv", "eval_summary.csv", "trajectories.csv"})
            REQUIRE(slurp(dir / name) == before[i++]);
    }
}

TEST_CASE("agent checkpoints round-trip exactly", "[metrics][checkpoint]") {
    const auto dir = std::filesystem::temp_directory_path() / "beliefsim_test_ckpt";
    std::filesystem::create_directories(dir);
    const auto path = dir / "agent.ckpt";

    SECTION("dqn: networks, optimizer and counters survive") {
        DqnConfig cfg;
        cfg.hidden = {8};
        cfg.horizon = 4;
        cfg.observation_mode = ObservationMode::Matrix;
        cfg.batch_size = 2;
        cfg.learn_start = 2;
        cfg.train_every = 1;
        RngStream init(5);
        DqnAgent agent(cfg, init);
        // run a few updates so optimizer moments and counters are non-trivial
        RngStream rng(6);
        for (int i = 0; i < 8; ++i) {
            std::vector<double> x(32), y(32);
            for (double& v : x) v = rng.bernoulli(0.3);
            for (double& v : y) v = rng.bernoulli(0.3);
            agent.replay().push(
                Transition{x, category_from_index(static_cast<int>(rng.uniform_int(7))),
                           rng.uniform(-1.0, 1.0), y, rng.bernoulli(0.2)});
        }
        for (int i = 0; i < 5; ++i) agent.train_step(rng);

        AnyAgent wrapped(std::move(agent));
        save_agent(path, wrapped, 0x1234);
        const LoadedCheckpoint loaded = load_agent(path);
        REQUIRE(loaded.config_hash == 0x1234);
        REQUIRE(loaded.agent.kind() == AgentKind::Dqn);
        const auto* a = wrapped.get_if<DqnAgent>();
        const auto* b = loaded.agent.get_if<DqnAgent>();
        REQUIRE(b->main_net().weights() == a->main_net().weights());
        REQUIRE(b->main_net().biases() == a->main_net().biases());
        REQUIRE(b->target_net().weights() == a->target_net().weights());
        REQUIRE(b->optimizer().step == a->optimizer().step);
        REQUIRE(b->optimizer().m_w == a->optimizer().m_w);
        REQUIRE(b->optimizer().v_b == a->optimizer().v_b);
        REQUIRE(b->train_steps() == a->train_steps());
        REQUIRE(agent_fingerprint(loaded.agent) == agent_fingerprint(wrapped));
    }
    SECTION("tabular and heuristic agents round-trip") {
        TabularQAgent t;
        t.alpha = 0.25;
        t.table[100] = -1.5;
        AnyAgent wt(std::move(t));
        save_agent(path, wt, 7);
        auto lt = load_agent(path);
        REQUIRE(lt.agent.get_if<TabularQAgent>()->table == wt.get_if<TabularQAgent>()->table);

        BaselineAgent b;
        b.profiling_steps = 42;
        save_agent(path, AnyAgent(b), 7);
        REQUIRE(load_agent(path).agent.get_if<BaselineAgent>()->profiling_steps == 42);

        save_agent(path, AnyAgent(RandomAgent{}), 9);
        REQUIRE(load_agent(path).agent.kind() == AgentKind::Random);
    }
    SECTION("corrupt checkpoints are refused") {
        std::ofstream os(path, std::ios::binary | std::ios::trunc);
        os << "not a checkpoint at all, sorry";
        os.close();
        REQUIRE_THROWS_AS(load_agent(path), std::runtime_error);
        REQUIRE_THROWS_AS(load_agent(dir / "missing.ckpt"), std::runtime_error);
    }
}
