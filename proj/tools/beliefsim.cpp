// beliefsim command line: simulate | calibrate | train | evaluate | report.
// One config file plus dotted-key overrides drives everything; every run
// echoes its resolved configuration next to its outputs.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "beliefsim/checkpoint.hpp"
#include "beliefsim/config.hpp"
#include "beliefsim/harness.hpp"

namespace fs = std::filesystem;
using namespace beliefsim;

namespace {

struct GlobalFlags {
    std::string config_path;
    std::string outdir;
    std::vector<std::string> overrides;
    int64_t seed = -1;
    int workers = -1;
};

RunConfig resolve_config(const GlobalFlags& g, const std::string& experiment = "",
                         int64_t budget = -1) {
    RunConfig cfg;
    if (!g.config_path.empty()) cfg.load_file(g.config_path);
    cfg.apply_experiment(experiment);
    if (g.seed >= 0) cfg.set("run.seed", g.seed);
    if (!g.outdir.empty()) cfg.set("run.outdir", g.outdir);
    if (g.workers > 0) cfg.set("run.workers", g.workers);
    if (budget >= 0) cfg.set("run.budget_episodes", budget);
    for (const std::string& o : g.overrides) cfg.set_override(o);
    return cfg;
}

void write_plot_spec(const fs::path& path, json spec) {
    spec["$schema"] = "https://vega.github.io/schema/vega-lite/v5.json";
    std::ofstream os = open_out(path);
    os << spec.dump(2) << "\n";
}

json enc(const char* field, const char* type) {
    return json{{"field", field}, {"type", type}};
}

void write_calibration_plot_specs(const fs::path& outdir) {
    write_plot_spec(outdir / "plot_survival.json",
                    json{{"data", {{"url", "survival_curve.csv"}}},
                         {"mark", "line"},
                         {"encoding",
                          {{"x", enc("step", "quantitative")},
                           {"y", enc("alive_fraction", "quantitative")}}}});
    write_plot_spec(outdir / "plot_shift_profile.json",
                    json{{"data", {{"url", "shift_profile.csv"}}},
                         {"mark", "rect"},
                         {"encoding",
                          {{"x", enc("content_category", "ordinal")},
                           {"y", enc("user_ideology", "ordinal")},
                           {"color", enc("mean_shift", "quantitative")}}}});
    write_plot_spec(outdir / "plot_click_grid.json",
                    json{{"data", {{"url", "click_prob_grid.csv"}}},
                         {"mark", "rect"},
                         {"encoding",
                          {{"x", enc("content_bias", "quantitative")},
                           {"y", enc("user_belief", "quantitative")},
                           {"color", enc("click_probability", "quantitative")}}}});
}

void write_report_plot_specs(const fs::path& outdir) {
    for (const char* which : {"initial", "final"}) {
        write_plot_spec(outdir / (std::string("plot_belief_hist_") + which + ".json"),
                        json{{"data", {{"url", std::string("belief_hist_") + which + ".csv"}}},
                             {"mark", "bar"},
                             {"encoding",
                              {{"x", enc("bin_lo", "quantitative")},
                               {"y", enc("count", "quantitative")}}}});
    }
    write_plot_spec(
        outdir / "plot_composition.json",
        json{{"data", {{"url", "composition.csv"}}},
             {"transform",
              json::array({{{"fold", {"f1", "f2", "f3", "f4", "f5", "f6", "f7"}}}})},
             {"mark", "area"},
             {"encoding",
              {{"x", enc("step", "quantitative")},
               {"y", json{{"field", "value"}, {"type", "quantitative"}, {"stack", "normalize"}}},
               {"color", enc("key", "nominal")},
               {"facet", json{{"field", "ideology"}, {"type", "nominal"}, {"columns", 4}}}}}});
    write_plot_spec(outdir / "plot_trajectories.json",
                    json{{"data", {{"url", "trajectories.csv"}}},
                         {"mark", "line"},
                         {"encoding",
                          {{"x", enc("step", "quantitative")},
                           {"y", enc("belief", "quantitative")},
                           {"detail", enc("user_id", "nominal")},
                           {"opacity", json{{"value", 0.2}}}}}});
}

int cmd_simulate(const GlobalFlags& g) {
    const RunConfig cfg = resolve_config(g);
    const EnvConfig env_cfg = cfg.env_config();
    const uint64_t seed = static_cast<uint64_t>(cfg.get_int("run.seed"));
    RngStream agent_init = derive_stream(seed, 0xabcdef, 0, 0);
    AnyAgent agent = cfg.make_agent(cfg.budget_episodes(), agent_init);

    RecEnv env(env_cfg);
    RngStream env_rng = derive_stream(seed, 0, 0, 0);
    RngStream act_rng = derive_stream(seed, 0, 0, 1);
    agent.begin_episode();
    Observation obs = env.reset(env_rng);
    std::printf("episode trace (agent=%s, seed=%llu)\n", agent_kind_name(agent.kind()),
                static_cast<unsigned long long>(seed));
    std::printf("hidden user: belief=%+.4f pf=%.3f om=%.3f malleability=%.2f\n",
                env.user().belief, env.user().polarization_factor, env.user().open_mindedness,
                env.user().malleability);
    std::printf("%5s  %-10s  %-7s  %6s  %8s  %12s  %10s\n", "step", "action", "clicked", "reward",
                "belief", "satisfaction", "engagement");
    int64_t clicks = 0;
    double ret = 0.0;
    while (!env.done()) {
        const PoliticsCategory a = agent.act(obs, 0, act_rng);
        const StepResult r = env.step(a, env_rng);
        agent.observe_eval(a, r.info.clicked);
        clicks += r.info.clicked;
        ret += r.reward;
        std::printf("%5d  %-10s  %-7s  %+6.1f  %+8.4f  %12.4f  %10.2f\n", r.info.step_index,
                    category_name(a), r.info.clicked ? "yes" : "no", r.reward, r.info.user_belief,
                    env.user().satisfaction, env.user().engagement);
        obs = r.observation;
        if (r.done)
            std::printf("episode done: %s after %d steps\n",
                        r.info.attrited ? "user attrited" : "lifespan reached", r.info.step_index);
    }
    std::printf("steps=%d clicks=%lld ctr=%.4f return=%+.1f\n", env.step_index(),
                static_cast<long long>(clicks),
                env.step_index() > 0 ? static_cast<double>(clicks) / env.step_index() : 0.0, ret);
    return 0;
}

int cmd_calibrate(const GlobalFlags& g) {
    const RunConfig cfg = resolve_config(g);
    const EnvConfig env_cfg = cfg.env_config();
    const fs::path outdir = cfg.get_string("run.outdir");
    const uint64_t seed = static_cast<uint64_t>(cfg.get_int("run.seed"));
    const int population = static_cast<int>(cfg.get_int("run.eval_population"));

    const std::vector<double> survival = calibrate_attrition(env_cfg, population, seed);
    const auto grid = shift_profile(env_cfg, 4000, seed);
    const ClickProbGrid cgrid = click_prob_grid(env_cfg, 101);

    write_survival_csv(outdir / "survival_curve.csv", survival);
    write_shift_profile_csv(outdir / "shift_profile.csv", grid);
    write_click_grid_csv(outdir / "click_prob_grid.csv", cgrid);
    write_calibration_plot_specs(outdir);
    cfg.write_resolved(outdir / "config.resolved.json");

    int first_drop = -1, extinct = -1;
    for (size_t t = 0; t < survival.size(); ++t) {
        if (first_drop < 0 && survival[t] < 1.0) first_drop = static_cast<int>(t);
        if (extinct < 0 && survival[t] == 0.0) extinct = static_cast<int>(t);
    }
    std::printf("survival: first attrition at step %d, population extinct at step %d\n",
                first_drop, extinct);
    std::printf("wrote survival_curve.csv, shift_profile.csv, click_prob_grid.csv to %s\n",
                outdir.string().c_str());
    return 0;
}

int cmd_train(const GlobalFlags& g, const std::string& experiment, int64_t budget) {
    const RunConfig cfg = resolve_config(g, experiment, budget);
    const fs::path outdir = cfg.get_string("run.outdir");
    const int64_t episodes = cfg.budget_episodes();
    const uint64_t seed = static_cast<uint64_t>(cfg.get_int("run.seed"));

    RngStream agent_init = derive_stream(seed, 0xabcdef, 0, 0);
    AnyAgent agent = cfg.make_agent(episodes, agent_init);

    TrainSettings settings = cfg.train_settings(cfg.model_hash());
    settings.checkpoint_dir = outdir / "checkpoints";

    TrainingCurve curve;
    if (agent.kind() == AgentKind::Random || agent.kind() == AgentKind::Baseline) {
        // heuristics have nothing to learn; emit the trivial checkpoint only
        save_agent(settings.checkpoint_dir / "final.ckpt", agent, settings.config_hash);
    } else {
        curve = train(cfg.train_env_config(), agent, settings);
    }
    write_training_curve_csv(outdir / "training_curve.csv", curve);
    write_plot_spec(outdir / "plot_training_curve.json",
                    json{{"data", {{"url", "training_curve.csv"}}},
                         {"transform", json::array({{{"fold", {"ctr", "mean_abs_shift"}}}})},
                         {"mark", "line"},
                         {"encoding",
                          {{"x", enc("episode_window", "quantitative")},
                           {"y", enc("value", "quantitative")},
                           {"color", enc("key", "nominal")}}}});
    cfg.write_resolved(outdir / "config.resolved.json");

    if (curve.points.empty())
        std::printf("trained %s for %lld episodes (no learning curve)\n",
                    agent_kind_name(agent.kind()), static_cast<long long>(episodes));
    else
        std::printf("trained %s for %lld episodes, final windowed ctr=%.4f\n",
                    agent_kind_name(agent.kind()), static_cast<long long>(episodes),
                    curve.points.back().ctr);
    std::printf("checkpoint: %s\n", (settings.checkpoint_dir / "final.ckpt").string().c_str());
    return 0;
}

int cmd_evaluate(const GlobalFlags& g, const std::string& experiment,
                 const std::string& checkpoint, const std::string& population_path) {
    const RunConfig cfg = resolve_config(g, experiment);
    const fs::path outdir = cfg.get_string("run.outdir");
    const EnvConfig env_cfg = cfg.env_config();
    const EvalSettings es = cfg.eval_settings();

    AnyAgent agent = [&] {
        if (!checkpoint.empty()) {
            if (!fs::exists(checkpoint))
                throw ConfigError("checkpoint does not exist: " + checkpoint);
            LoadedCheckpoint loaded = load_agent(checkpoint);
            if (loaded.config_hash != cfg.model_hash())
                std::fprintf(stderr,
                             "warning: checkpoint was trained under a different configuration\n");
            return std::move(loaded.agent);
        }
        const AgentKind kind = cfg.agent_kind();
        if (kind == AgentKind::Dqn || kind == AgentKind::Tabular)
            throw ConfigError("evaluating a " + std::string(agent_kind_name(kind)) +
                              " agent requires --checkpoint");
        RngStream init(0);
        return cfg.make_agent(0, init);
    }();

    Population pop;
    if (!population_path.empty()) {
        pop = load_population(population_path);
        if (pop.generation_seed != es.eval_seed)
            std::fprintf(stderr,
                         "warning: population generated from seed %llu but run.eval_seed is %llu\n",
                         static_cast<unsigned long long>(pop.generation_seed),
                         static_cast<unsigned long long>(es.eval_seed));
        if (static_cast<int>(pop.users.size()) != es.population)
            std::fprintf(stderr, "warning: population holds %zu users, run.eval_population is %d\n",
                         pop.users.size(), es.population);
    } else {
        pop = generate_population(env_cfg, es.eval_seed, es.population);
    }
    save_population(outdir / "population.snapshot", pop);

    const EvaluationReport report = evaluate_on(env_cfg, agent, pop, es.eval_seed, es.agent_name);
    export_report(report, outdir, static_cast<int>(cfg.get_int("run.trajectory_stride")));
    write_report_plot_specs(outdir);
    cfg.write_resolved(outdir / "config.resolved.json");

    std::printf("evaluated %s on %zu users: ctr=%.4f attrition=%.4f\n", report.agent_name.c_str(),
                report.records.size(), report.ctr(), report.attrition_rate());
    return 0;
}

int cmd_report(const GlobalFlags& g, const std::vector<std::string>& run_dirs) {
    const RunConfig cfg = resolve_config(g);
    const fs::path outdir = cfg.get_string("run.outdir");
    std::vector<SummaryRow> rows;
    std::map<std::string, int> seen;
    for (const std::string& dir : run_dirs) {
        const fs::path summary = fs::path(dir) / "eval_summary.csv";
        std::ifstream is(summary);
        if (!is) throw ConfigError("missing eval summary: " + summary.string());
        std::string line;
        std::getline(is, line);  // header
        if (line != "agent,ctr,attrition_rate")
            throw ConfigError("unexpected eval summary header in " + summary.string());
        while (std::getline(is, line)) {
            if (line.empty()) continue;
            std::istringstream ls(line);
            SummaryRow row;
            std::string ctr, attr;
            std::getline(ls, row.agent, ',');
            std::getline(ls, ctr, ',');
            std::getline(ls, attr, ',');
            row.ctr = std::stod(ctr);
            row.attrition_rate = std::stod(attr);
            const int n = ++seen[row.agent];
            if (n > 1) row.agent += "#" + std::to_string(n);
            rows.push_back(std::move(row));
        }
    }
    if (rows.empty()) throw ConfigError("no summary rows found in the given run directories");
    write_summary_csv(outdir / "comparison.csv", rows);
    std::printf("%-20s %8s %10s\n", "agent", "ctr", "attrition");
    for (const auto& r : rows)
        std::printf("%-20s %8.4f %10.4f\n", r.agent.c_str(), r.ctr, r.attrition_rate);
    std::printf("wrote %s\n", (outdir / "comparison.csv").string().c_str());
    return 0;
}

std::string config_key_help() {
    std::ostringstream os;
    os << "\nConfig keys (set in the --config JSON file or with --set key=value):\n";
    for (const auto& [key, spec] : config_registry()) {
        os << "  " << key;
        for (size_t pad = key.size(); pad < 34; ++pad) os << ' ';
        os << spec.description << " [default: " << spec.def.dump() << "]\n";
    }
    return os.str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"beliefsim: opinion-dynamics recommender simulation and RL experiment harness"};
    app.require_subcommand(1);
    app.fallthrough();
    app.footer(config_key_help());

    GlobalFlags g;
    app.add_option("--config", g.config_path, "JSON config file (nested or dotted keys)");
    app.add_option("--seed", g.seed, "override run.seed");
    app.add_option("--outdir", g.outdir, "override run.outdir");
    app.add_option("--workers", g.workers, "override run.workers");
    app.add_option("--set", g.overrides, "override any config key (key=value, repeatable)")
        ->take_all();

    auto* simulate = app.add_subcommand("simulate", "print one verbose episode trace");

    auto* calibrate = app.add_subcommand(
        "calibrate", "write the survival curve, shift profile and click-probability grid");

    std::string train_experiment;
    int64_t train_budget = -1;
    auto* train_cmd = app.add_subcommand("train", "train an agent and write its curve/checkpoints");
    train_cmd->add_option("--experiment", train_experiment,
                          "preset: random | baseline | no-manip | polarize | depolarize");
    train_cmd->add_option("--budget", train_budget, "override run.budget_episodes");

    std::string eval_experiment, eval_checkpoint, eval_population;
    auto* eval_cmd =
        app.add_subcommand("evaluate", "run the fixed-population evaluation and write reports");
    eval_cmd->add_option("--experiment", eval_experiment, "preset naming the agent/reward scheme");
    eval_cmd->add_option("--checkpoint", eval_checkpoint, "agent checkpoint to load");
    eval_cmd->add_option("--population", eval_population, "population snapshot to reuse");

    std::vector<std::string> report_dirs;
    auto* report_cmd =
        app.add_subcommand("report", "merge eval summaries from run directories into one table");
    report_cmd->add_option("dirs", report_dirs, "run directories holding eval_summary.csv")
        ->required();

    try {
        app.parse(argc, argv);
        if (simulate->parsed()) return cmd_simulate(g);
        if (calibrate->parsed()) return cmd_calibrate(g);
        if (train_cmd->parsed()) return cmd_train(g, train_experiment, train_budget);
        if (eval_cmd->parsed()) return cmd_evaluate(g, eval_experiment, eval_checkpoint, eval_population);
        if (report_cmd->parsed()) return cmd_report(g, report_dirs);
        return 1;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
