// Acceptance suite: one pass/fail line per criterion, exit 0 iff every
// criterion that ran passed. Usage: acceptance [N ...] with N in 1..9;
// no arguments runs all nine.
//
//  1 equation unit suite          6 heuristic-agent evaluation targets
//  2 belief sampling              7 desk-scale RL (three DQN trainings)
//  3 gradient check               8 byte-identical reruns
//  4 attrition calibration        9 save/load round-trips
//  5 shift-direction grid

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "beliefsim/checkpoint.hpp"
#include "beliefsim/config.hpp"
#include "beliefsim/harness.hpp"

namespace fs = std::filesystem;
using namespace beliefsim;

namespace {

struct Criterion {
    std::vector<std::string> failures;

    void check(bool ok, const std::string& what) {
        if (!ok) failures.push_back(what);
    }
    void check_near(double got, double want, double tol, const std::string& what) {
        if (!(std::abs(got - want) <= tol)) {
            std::ostringstream os;
            os << what << " (got " << got << ", want " << want << " +/- " << tol << ")";
            failures.push_back(os.str());
        }
    }
};

double mean_abs(const std::vector<double>& xs) {
    double s = 0.0;
    for (double x : xs) s += std::abs(x);
    return s / static_cast<double>(xs.size());
}

std::string file_bytes(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(BELIEFSIM_CLI) + " " + args + " > /dev/null 2>&1";
    return WEXITSTATUS(std::system(cmd.c_str()));
}

// --- criterion 1: equation arithmetic against hand-computed values / MC bounds ----

void criterion_1(Criterion& c) {
    const double tol = 1e-9;

    // content bias sampling (uniform over the category interval)
    {
        RngStream rng(101);
        double sum = 0.0;
        const int n = 10000;
        for (int i = 0; i < n; ++i) sum += sample_content(PoliticsCategory::Right, rng).bias;
        c.check_near(sum / n, 4.0 / 7.0, 0.01, "mean Right-category bias vs uniform oracle");
        c.check(category_of_bias(-0.9) == PoliticsCategory::FarLeft, "-0.9 categorises far left");
        c.check(category_of_bias(3.0 / 7.0) == PoliticsCategory::LeanRight,
                "3/7 boundary goes to the lower-index category");
    }
    // extremes decay
    {
        UserState u;
        u.belief = 0.5;
        c.check_near(extremes_decay(u, 0.3), 0.75, tol, "extremes decay damps own-side shifts");
        c.check_near(extremes_decay(u, -0.3), 1.0, tol, "extremes decay passes opposing shifts");
        u.belief = 0.0;
        c.check_near(extremes_decay(u, 0.7), 1.0, tol, "extremes decay at zero belief");
    }
    // opinion shift
    {
        UserState u;
        u.belief = 0.2;
        u.polarization_factor = 2.0;
        u.malleability = 1.0;
        u.engagement = 0.5;
        const auto [nb, shift] = opinion_shift(u, Content{PoliticsCategory::Center, 0.5});
        c.check_near(shift, 0.03276, tol, "attraction shift arithmetic");
        c.check_near(nb, 0.23276, tol, "attraction new belief");

        u.belief = 0.5;
        u.engagement = 1.0;
        const auto [nb2, shift2] = opinion_shift(u, Content{PoliticsCategory::FarLeft, -1.0});
        c.check_near(shift2, 0.3515625, tol, "repulsion shift arithmetic");
        c.check(shift2 > 0.0, "far-left content repels a right-leaning user rightward");

        u.engagement = 0.0;
        c.check_near(opinion_shift(u, Content{PoliticsCategory::Center, 0.1}).second, 0.0, tol,
                     "zero engagement freezes belief");
    }
    // click probability (exponent mode)
    {
        InteractionParams p;
        UserState u;
        u.belief = -1.0;
        u.open_mindedness = 0.5;
        const Content far{PoliticsCategory::FarRight, 1.0};
        const double s = sigmoid(0.5 / (2.0 + 1e-8));
        c.check_near(click_probability(u, far, p), 0.8 * std::pow(s, 8.0), tol,
                     "click probability at |d|=2");
        c.check_near(0.8 * std::pow(s, 8.0), 0.00798, 2e-5, "click probability magnitude");
        u.belief = 0.3;
        c.check_near(click_probability(u, Content{PoliticsCategory::Center, 0.3}, p), p.p_max,
                     1e-6, "matched content saturates at p_max");
    }
    // engagement / satisfaction / attrition
    {
        InteractionParams p;
        UserState u;
        c.check_near(update_engagement(u, true, p).engagement, 0.05, tol, "engagement increment");
        u.engagement = 0.98;
        c.check_near(update_engagement(u, true, p).engagement, 1.0, tol, "engagement clamp");

        u.satisfaction = 0.5;
        u.decay_rate = 1.05;
        c.check_near(update_satisfaction(u, false).satisfaction, 0.5 / 1.05, tol,
                     "satisfaction decay");
        u.satisfaction = 1.0;
        for (int k = 1; k <= 30; ++k) {
            u = update_satisfaction(u, false);
            if (std::abs(u.satisfaction - std::pow(1.05, -k)) > tol) {
                c.check(false, "satisfaction closed form decay_rate^-k at k=" + std::to_string(k));
                break;
            }
        }
        u.satisfaction = 0.125;
        c.check_near(attrition_probability(u, p), 0.5, tol, "attrition at threshold/2");
        u.satisfaction = 0.5;
        c.check_near(attrition_probability(u, p), 0.0, tol, "attrition above threshold");
    }
    // Q-learning backup arithmetic
    {
        std::vector<double> table(2 * 7, 0.0);
        tabular_q_update(table, 0, 2, 1.0, 1, true, 0.1, 0.9);
        c.check_near(table[2], 0.1, tol, "q backup terminal");
        std::fill(table.begin(), table.end(), 0.0);
        table[1 * 7 + 4] = 1.0;
        tabular_q_update(table, 0, 0, 0.0, 1, false, 0.5, 0.9);
        c.check_near(table[0], 0.45, tol, "q backup bootstrap");
        tabular_q_update(table, 0, 6, -2.0, 1, true, 1.0, 0.9);
        c.check_near(table[6], -2.0, tol, "q backup alpha=1 overwrite");
    }
    // DQN weight-update arithmetic (one SGD step on a linear net)
    {
        DqnConfig cfg;
        cfg.observation_mode = ObservationMode::Matrix;
        cfg.horizon = 1;
        cfg.hidden = {};
        cfg.batch_size = 1;
        cfg.learn_start = 1;
        cfg.train_every = 1;
        cfg.optimizer = OptimizerKind::Sgd;
        cfg.alpha = 0.1;
        RngStream init(102);
        DqnAgent agent(cfg, init);
        for (auto& w : agent.main_net().weights()) std::fill(w.begin(), w.end(), 0.0);
        for (auto& b : agent.main_net().biases()) std::fill(b.begin(), b.end(), 0.0);
        agent.sync_target();
        std::vector<double> x(8, 0.0);
        x[0] = 1.0;
        agent.replay().push(Transition{x, PoliticsCategory::FarLeft, 1.0, x, true});
        RngStream rng(103);
        const double loss = agent.train_step(rng);
        c.check_near(loss, 0.5, tol, "dqn td loss arithmetic");
        c.check_near(agent.main_net().forward(x)[0], 0.2, tol, "dqn one-step weight update");
    }
    // finite-difference oracle sanity (full check on one small net)
    {
        RngStream rng(104);
        Mlp net = Mlp::init({6, 12, 7}, rng);
        std::vector<double> input(6);
        for (double& v : input) v = rng.uniform(-1.0, 1.0);
        std::vector<double> target(7, 0.0), mask(7, 0.0);
        mask[2] = 1.0;
        target[2] = 1.0;
        c.check(gradient_check(net, input, target, mask) < 1e-4,
                "analytic gradient matches central differences");
    }
    // belief-sign Monte Carlo bound (oracle-frozen 0.611)
    {
        BeliefDistributionParams p;
        RngStream rng(105);
        int neg = 0;
        const int n = 100000;
        for (int i = 0; i < n; ++i) neg += sample_user_belief(p, rng) < 0.0;
        c.check_near(static_cast<double>(neg) / n, 0.611, 0.01,
                     "P(belief < 0) vs truncated-mixture oracle");
    }
}

// --- criterion 2: sampling shape at N = 100,000 ---------------------------------

void criterion_2(Criterion& c) {
    BeliefDistributionParams p;
    RngStream rng(201);
    const int n = 100000, bins = 50;
    std::vector<int64_t> hist(bins, 0);
    int64_t left_count = 0;
    for (int i = 0; i < n; ++i) {
        const auto [b, left] = sample_user_belief_tagged(p, rng);
        if (std::abs(b) > 0.8) {
            c.check(false, "sample escaped the resample bound");
            return;
        }
        left_count += left;
        int bin = static_cast<int>((b + 1.0) / 2.0 * bins);
        hist[static_cast<size_t>(std::clamp(bin, 0, bins - 1))]++;
    }
    c.check_near(static_cast<double>(left_count) / n, 0.55, 0.01, "left-component fraction");

    auto center = [&](int i) { return -1.0 + (i + 0.5) * 2.0 / bins; };
    int left_peak = 0, right_peak = bins / 2;
    for (int i = 0; i < bins / 2; ++i)
        if (hist[static_cast<size_t>(i)] > hist[static_cast<size_t>(left_peak)]) left_peak = i;
    for (int i = bins / 2; i < bins; ++i)
        if (hist[static_cast<size_t>(i)] > hist[static_cast<size_t>(right_peak)]) right_peak = i;
    c.check(center(left_peak) >= -0.65 && center(left_peak) <= -0.35,
            "left mode in [-0.65, -0.35], found at " + std::to_string(center(left_peak)));
    c.check(center(right_peak) >= 0.1 && center(right_peak) <= 0.5,
            "right mode in [0.1, 0.5], found at " + std::to_string(center(right_peak)));
    int64_t valley = hist[static_cast<size_t>(left_peak)];
    for (int i = left_peak; i <= right_peak; ++i)
        valley = std::min(valley, hist[static_cast<size_t>(i)]);
    c.check(valley < 0.92 * static_cast<double>(std::min(hist[static_cast<size_t>(left_peak)],
                                                         hist[static_cast<size_t>(right_peak)])),
            "histogram has two separated modes");
}

// --- criterion 3: gradient check, 100 nets per supported shape -------------------

void criterion_3(Criterion& c) {
    RngStream rng(301);
    double worst_small = 0.0;
    for (int trial = 0; trial < 100; ++trial) {  // aggregate-mode shape, full sweep
        Mlp net = Mlp::init({14, 32, 32, 7}, rng);
        std::vector<double> input(14);
        for (double& v : input) v = rng.uniform(0.0, 1.0);
        std::vector<double> target(7, 0.0), mask(7, 0.0);
        const int a = static_cast<int>(rng.uniform_int(7));
        mask[static_cast<size_t>(a)] = 1.0;
        target[static_cast<size_t>(a)] = rng.uniform(-2.0, 2.0);
        worst_small = std::max(worst_small, gradient_check(net, input, target, mask));
    }
    c.check(worst_small < 1e-4,
            "aggregate-shape gradient error " + std::to_string(worst_small) + " < 1e-4");

    double worst_big = 0.0;
    for (int trial = 0; trial < 100; ++trial) {  // matrix-mode shape, sampled parameters
        Mlp net = Mlp::init({800, 128, 64, 7}, rng);
        std::vector<double> input(800);
        for (double& v : input) v = rng.bernoulli(0.2) ? 1.0 : 0.0;
        std::vector<double> target(7, 0.0), mask(7, 0.0);
        const int a = static_cast<int>(rng.uniform_int(7));
        mask[static_cast<size_t>(a)] = 1.0;
        target[static_cast<size_t>(a)] = rng.uniform(-2.0, 2.0);
        worst_big = std::max(worst_big, gradient_check(net, input, target, mask, 300, &rng));
    }
    c.check(worst_big < 1e-4,
            "matrix-shape gradient error " + std::to_string(worst_big) + " < 1e-4");
}

// --- criterion 4: attrition calibration -------------------------------------------

void criterion_4(Criterion& c) {
    const RunConfig cfg;  // declared defaults
    const auto survival = calibrate_attrition(cfg.env_config(), 1000, 401);
    int first = -1, extinct = -1;
    for (size_t t = 0; t < survival.size(); ++t) {
        if (first < 0 && survival[t] < 1.0) first = static_cast<int>(t);
        if (extinct < 0 && survival[t] == 0.0) extinct = static_cast<int>(t);
        if (t > 0 && survival[t] > survival[t - 1] + 1e-12) {
            c.check(false, "survival curve is not monotone at step " + std::to_string(t));
            return;
        }
    }
    c.check(first >= 20 && first <= 40,
            "first attrition in steps 20-40, found " + std::to_string(first));
    c.check(extinct > 0 && extinct <= 120,
            "population extinct by step 120, found " + std::to_string(extinct));
}

// --- criterion 5: shift-direction grid ----------------------------------------------

void criterion_5(Criterion& c) {
    const RunConfig cfg;
    const auto grid = shift_profile(cfg.env_config(), 4000, 501);
    const int far_left = 0, lean_left = 2, lean_right = 4, far_right = 6;
    c.check(grid[lean_right][far_left] > 0.0,
            "(a) far-left content pushes lean-right users rightward");
    c.check(grid[lean_left][far_right] < 0.0,
            "(a) far-right content pushes lean-left users leftward");
    for (int i = 0; i < 7; ++i) {
        if (i + 1 < 7)
            c.check(grid[static_cast<size_t>(i)][static_cast<size_t>(i + 1)] > 0.0,
                    "(b) content one category right pulls rightward (row " + std::to_string(i) + ")");
        if (i - 1 >= 0)
            c.check(grid[static_cast<size_t>(i)][static_cast<size_t>(i - 1)] < 0.0,
                    "(b) content one category left pulls leftward (row " + std::to_string(i) + ")");
    }
    double worst = 0.0;
    for (int ui = 0; ui < 7; ++ui)
        for (int ci = 0; ci < 7; ++ci)
            worst = std::max(worst,
                             std::abs(grid[static_cast<size_t>(ui)][static_cast<size_t>(ci)] +
                                      grid[static_cast<size_t>(6 - ui)][static_cast<size_t>(6 - ci)]));
    c.check(worst <= 0.01, "(c) mirror antisymmetry within 0.01, worst " + std::to_string(worst));
}

// --- criterion 6: Table 5.1 heuristic rows -------------------------------------------

void criterion_6(Criterion& c) {
    const RunConfig cfg;  // lifespan 500, eval population 1000
    const EnvConfig env_cfg = cfg.env_config();
    const EvalSettings es = cfg.eval_settings();
    const Population pop = generate_population(env_cfg, es.eval_seed, es.population);

    AnyAgent random_agent{RandomAgent{}};
    const EvaluationReport random_report =
        evaluate_on(env_cfg, random_agent, pop, es.eval_seed, "random");
    c.check_near(random_report.ctr(), 0.17, 0.08, "random CTR 0.17 +/- 0.08");
    c.check(random_report.attrition_rate() == 1.0, "random attrition rate exactly 1.00");

    AnyAgent baseline_agent{BaselineAgent{}};
    const EvaluationReport baseline_report =
        evaluate_on(env_cfg, baseline_agent, pop, es.eval_seed, "baseline");
    c.check(baseline_report.ctr() >= 0.45,
            "baseline CTR >= 0.45, got " + std::to_string(baseline_report.ctr()));
    c.check(baseline_report.attrition_rate() <= 0.35,
            "baseline attrition <= 0.35, got " + std::to_string(baseline_report.attrition_rate()));
    c.check(baseline_report.ctr() >= 2.5 * random_report.ctr(),
            "baseline CTR >= 2.5x random CTR");
    std::printf("    [6] random ctr=%.4f attr=%.3f | baseline ctr=%.4f attr=%.3f\n",
                random_report.ctr(), random_report.attrition_rate(), baseline_report.ctr(),
                baseline_report.attrition_rate());
}

// --- criterion 7: desk-scale RL --------------------------------------------------------

struct TrainedEval {
    double final_windowed_ctr = 0.0;
    EvaluationReport report;
};

TrainedEval train_and_evaluate(const std::string& experiment, const Population& pop) {
    RunConfig cfg;
    cfg.apply_experiment(experiment);  // dqn kinds; desk tier = 50,000 episodes
    const int64_t budget = cfg.budget_episodes();
    RngStream init = derive_stream(static_cast<uint64_t>(cfg.get_int("run.seed")), 0xabcdef, 0, 0);
    AnyAgent agent = cfg.make_agent(budget, init);
    TrainSettings ts = cfg.train_settings(cfg.model_hash());
    const TrainingCurve curve = train(cfg.train_env_config(), agent, ts);

    TrainedEval out;
    out.final_windowed_ctr = curve.points.empty() ? 0.0 : curve.points.back().ctr;
    const EvalSettings es = cfg.eval_settings();
    out.report = evaluate_on(cfg.env_config(), agent, pop, es.eval_seed, experiment);
    return out;
}

double extreme_mass(const EvaluationReport& report) {
    int64_t n = 0;
    for (const auto& r : report.records) n += std::abs(r.final_belief) > 5.0 / 7.0;
    return static_cast<double>(n) / static_cast<double>(report.records.size());
}

void criterion_7(Criterion& c) {
    const RunConfig cfg;
    const EnvConfig env_cfg = cfg.env_config();
    const EvalSettings es = cfg.eval_settings();
    const Population pop = generate_population(env_cfg, es.eval_seed, es.population);

    std::vector<double> initial;
    for (const UserState& u : pop.users) initial.push_back(u.belief);
    const double initial_mean_abs = mean_abs(initial);

    AnyAgent random_agent{RandomAgent{}};
    const double random_ctr =
        evaluate_on(env_cfg, random_agent, pop, es.eval_seed, "random").ctr();

    using clock = std::chrono::steady_clock;
    auto t0 = clock::now();
    const TrainedEval no_manip = train_and_evaluate("no-manip", pop);
    auto t1 = clock::now();
    const TrainedEval polarize = train_and_evaluate("polarize", pop);
    auto t2 = clock::now();
    const TrainedEval depolarize = train_and_evaluate("depolarize", pop);
    auto t3 = clock::now();

    auto minutes = [](auto a, auto b) {
        return std::chrono::duration_cast<std::chrono::seconds>(b - a).count() / 60.0;
    };
    std::printf("    [7] training minutes: no-manip %.1f, polarize %.1f, depolarize %.1f\n",
                minutes(t0, t1), minutes(t1, t2), minutes(t2, t3));

    // (a) no-manipulation DQN beats random by >= 0.15 CTR
    c.check(no_manip.final_windowed_ctr >= random_ctr + 0.15,
            "(a) no-manip windowed CTR " + std::to_string(no_manip.final_windowed_ctr) +
                " >= random eval CTR " + std::to_string(random_ctr) + " + 0.15");

    // (b) polarization raises mean |belief| by >= 0.10
    std::vector<double> polar_final;
    for (const auto& r : polarize.report.records) polar_final.push_back(r.final_belief);
    const double polar_lift = mean_abs(polar_final) - initial_mean_abs;
    c.check(polar_lift >= 0.10,
            "(b) polarization raises mean |belief| by " + std::to_string(polar_lift) + " >= 0.10");

    // (c) depolarization lowers mean |belief| by >= 0.05
    std::vector<double> depolar_final;
    for (const auto& r : depolarize.report.records) depolar_final.push_back(r.final_belief);
    const double depolar_drop = initial_mean_abs - mean_abs(depolar_final);
    c.check(depolar_drop >= 0.05,
            "(c) depolarization lowers mean |belief| by " + std::to_string(depolar_drop) +
                " >= 0.05");

    // (d) polarization parks more final-belief mass beyond |b| = 5/7
    const double polar_mass = extreme_mass(polarize.report);
    const double no_manip_mass = extreme_mass(no_manip.report);
    c.check(polar_mass > no_manip_mass,
            "(d) extreme mass: polarize " + std::to_string(polar_mass) + " > no-manip " +
                std::to_string(no_manip_mass));

    std::printf("    [7] no-manip ctr=%.3f | polar lift=%.3f mass=%.3f | depolar drop=%.3f | "
                "no-manip mass=%.3f\n",
                no_manip.final_windowed_ctr, polar_lift, polar_mass, depolar_drop, no_manip_mass);

    c.check(minutes(t0, t1) <= 60.0 && minutes(t1, t2) <= 60.0 && minutes(t2, t3) <= 60.0,
            "runtime <= 60 minutes per agent");
}

// --- criterion 8: byte-identical reruns ---------------------------------------------

void criterion_8(Criterion& c) {
    const fs::path base = fs::temp_directory_path() / "beliefsim_acceptance" / "determinism";
    fs::remove_all(base);

    const std::string cal_dir = (base / "cal").string();
    const std::string cal_args = "calibrate --outdir " + cal_dir +
                                 " --set run.eval_population=200 --seed 11 --workers 1";
    c.check(run_cli(cal_args) == 0, "calibrate run 1 exits 0");
    std::map<std::string, std::string> snap;
    for (const auto& entry : fs::recursive_directory_iterator(cal_dir))
        if (entry.is_regular_file()) snap[entry.path().string()] = file_bytes(entry.path());
    c.check(run_cli(cal_args) == 0, "calibrate run 2 exits 0");
    for (const auto& [path, bytes] : snap)
        if (file_bytes(path) != bytes) c.check(false, "calibrate output changed: " + path);

    const std::string train_dir = (base / "train").string();
    const std::string train_args = "train --experiment no-manip --budget 300 --outdir " +
                                   train_dir + " --set run.curve_window=100 --seed 12 --workers 1";
    c.check(run_cli(train_args) == 0, "train run 1 exits 0");
    const std::string curve1 = file_bytes(fs::path(train_dir) / "training_curve.csv");
    const std::string ckpt1 = file_bytes(fs::path(train_dir) / "checkpoints" / "final.ckpt");
    c.check(run_cli(train_args) == 0, "train run 2 exits 0");
    c.check(file_bytes(fs::path(train_dir) / "training_curve.csv") == curve1,
            "training curve bytes identical");
    c.check(file_bytes(fs::path(train_dir) / "checkpoints" / "final.ckpt") == ckpt1,
            "checkpoint bytes identical");

    const std::string eval_dir = (base / "eval").string();
    const std::string eval_args = "evaluate --experiment no-manip --checkpoint " +
                                  (fs::path(train_dir) / "checkpoints" / "final.ckpt").string() +
                                  " --outdir " + eval_dir +
                                  " --set run.eval_population=100 --workers 1";
    c.check(run_cli(eval_args) == 0, "evaluate run 1 exits 0");
    std::map<std::string, std::string> eval_snap;
    for (const auto& entry : fs::recursive_directory_iterator(eval_dir))
        if (entry.is_regular_file()) eval_snap[entry.path().string()] = file_bytes(entry.path());
    c.check(run_cli(eval_args) == 0, "evaluate run 2 exits 0");
    for (const auto& [path, bytes] : eval_snap)
        if (file_bytes(path) != bytes) c.check(false, "evaluate output changed: " + path);
}

// --- criterion 9: save/load round-trips ------------------------------------------------

void criterion_9(Criterion& c) {
    const fs::path base = fs::temp_directory_path() / "beliefsim_acceptance" / "roundtrip";
    fs::create_directories(base);

    // population identity, field-exact
    {
        const RunConfig cfg;
        Population pop = generate_population(cfg.env_config(), 901, 1000);
        pop.users[500].alive = false;
        save_population(base / "population.snapshot", pop);
        const Population loaded = load_population(base / "population.snapshot");
        bool equal = loaded.generation_seed == pop.generation_seed &&
                     loaded.users.size() == pop.users.size();
        for (size_t i = 0; equal && i < pop.users.size(); ++i) {
            const UserState &a = pop.users[i], &b = loaded.users[i];
            equal = a.belief == b.belief && a.polarization_factor == b.polarization_factor &&
                    a.malleability == b.malleability && a.open_mindedness == b.open_mindedness &&
                    a.engagement == b.engagement && a.satisfaction == b.satisfaction &&
                    a.growth_rate == b.growth_rate && a.decay_rate == b.decay_rate &&
                    a.alive == b.alive;
        }
        c.check(equal, "population snapshot is a field-exact identity");
    }
    // checkpoint identity for a briefly-trained DQN
    {
        RunConfig cfg;
        cfg.apply_experiment("no-manip");
        RngStream init(902);
        AnyAgent agent = cfg.make_agent(100, init);
        TrainSettings ts = cfg.train_settings(cfg.model_hash());
        ts.budget_episodes = 50;
        ts.seed = 903;
        train(cfg.train_env_config(), agent, ts);
        save_agent(base / "agent.ckpt", agent, cfg.model_hash());
        const LoadedCheckpoint loaded = load_agent(base / "agent.ckpt");
        c.check(loaded.config_hash == cfg.model_hash(), "checkpoint preserves the config hash");
        c.check(agent_fingerprint(loaded.agent) == agent_fingerprint(agent),
                "checkpoint is a byte-exact identity on the agent state");
    }
}

}  // namespace

int main(int argc, char** argv) {
    const std::map<int, std::pair<const char*, std::function<void(Criterion&)>>> criteria = {
        {1, {"equation unit suite (hand-computed values at 1e-9 / MC bounds)", criterion_1}},
        {2, {"belief sampling: bound, bimodality, component fraction", criterion_2}},
        {3, {"gradient check: 100 nets per shape vs central differences", criterion_3}},
        {4, {"attrition calibration: first churn 20-40, extinct by 120", criterion_4}},
        {5, {"shift grid: repulsion/attraction directions, antisymmetry", criterion_5}},
        {6, {"heuristic rows: random/baseline CTR and attrition targets", criterion_6}},
        {7, {"desk-scale RL: no-manip/polarize/depolarize directional targets", criterion_7}},
        {8, {"determinism: byte-identical reruns (workers=1)", criterion_8}},
        {9, {"round-trip: population and checkpoint save/load identity", criterion_9}},
    };

    std::set<int> selected;
    for (int i = 1; i < argc; ++i) {
        const int n = std::atoi(argv[i]);
        if (criteria.find(n) == criteria.end()) {
            std::fprintf(stderr, "unknown criterion: %s (use 1..9)\n", argv[i]);
            return 2;
        }
        selected.insert(n);
    }
    if (selected.empty())
        for (const auto& [n, _] : criteria) selected.insert(n);

    int failed = 0;
    for (int n : selected) {
        const auto& [description, fn] = criteria.at(n);
        Criterion c;
        const auto start = std::chrono::steady_clock::now();
        try {
            fn(c);
        } catch (const std::exception& e) {
            c.check(false, std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration_cast<std::chrono::milliseconds>(
                                std::chrono::steady_clock::now() - start)
                                .count() /
                            1000.0;
        if (c.failures.empty()) {
            std::printf("PASS criterion %d: %s (%.1fs)\n", n, description, secs);
        } else {
            ++failed;
            std::printf("FAIL criterion %d: %s (%.1fs)\n", n, description, secs);
            for (const std::string& f : c.failures) std::printf("     - %s\n", f.c_str());
        }
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
