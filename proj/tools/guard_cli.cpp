// Command-line harness around the library: train models, run targeted
// attacks, build and apply defensive patches, and reproduce the full
// evaluation. Exit codes: 0 success, 2 bad config or flags, 3 unreadable
// or inconsistent data, 4 runtime failure.

#include <guard/checkpoint.hpp>
#include <guard/pipeline.hpp>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

guard::ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw guard::ConfigError("cannot open config file " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw guard::ConfigError("config file " + path + " is not valid JSON: " + e.what());
    }
    return guard::ExperimentConfig::from_json(j);
}

struct GlobalFlags {
    std::string config_path;
    std::string out_dir;
    std::string seed_str;  // empty means "config value"
    int threads = -1;      // negative means "config value"
};

void add_global_flags(CLI::App* cmd, GlobalFlags& flags) {
    cmd->add_option("--config", flags.config_path, "experiment config (JSON)")->required();
    cmd->add_option("--out", flags.out_dir, "output directory");
    cmd->add_option("--seed", flags.seed_str, "override the experiment seed");
    cmd->add_option("--threads", flags.threads, "override the worker thread count")
        ->check(CLI::NonNegativeNumber);
}

guard::ExperimentConfig resolve_config(const GlobalFlags& flags) {
    guard::ExperimentConfig cfg = load_config(flags.config_path);
    if (!flags.seed_str.empty()) {
        for (char c : flags.seed_str)
            if (c < '0' || c > '9')
                throw guard::ConfigError("--seed must be a nonnegative integer");
        try {
            cfg.seed = std::stoull(flags.seed_str);
        } catch (const std::exception&) {
            throw guard::ConfigError("--seed is out of range");
        }
    }
    if (flags.threads >= 0) cfg.threads = flags.threads;
    cfg.validate();
    return cfg;
}

void emit(const nlohmann::ordered_json& j) { std::cout << j.dump(2) << std::endl; }

int run_train(const GlobalFlags& flags) {
    const guard::ExperimentConfig cfg = resolve_config(flags);
    const guard::detail::PreparedData data = guard::detail::prepare_experiment(cfg);
    const guard::detail::RepeatModels models =
        guard::detail::train_repeat_models(cfg, data, 0, /*with_victim=*/true);

    nlohmann::ordered_json summary;
    {
        const guard::Prediction pred = guard::predict(models.surrogate, data.graph);
        nlohmann::ordered_json s;
        s["test_accuracy"] = guard::accuracy(pred, data.graph, data.labeled_test);
        s["best_validation_accuracy"] = models.surrogate.best_validation_accuracy;
        s["best_epoch"] = models.surrogate.best_epoch;
        s["warnings"] = models.surrogate.warnings;
        summary["surrogate"] = std::move(s);
    }
    {
        const guard::Prediction pred = models.gcn
                                           ? guard::predict(*models.gcn, data.graph)
                                           : guard::predict(*models.linear_victim, data.graph);
        nlohmann::ordered_json s;
        s["model"] = cfg.victim_model;
        s["test_accuracy"] = guard::accuracy(pred, data.graph, data.labeled_test);
        s["best_validation_accuracy"] = models.gcn
                                            ? models.gcn->best_validation_accuracy
                                            : models.linear_victim->best_validation_accuracy;
        s["best_epoch"] =
            models.gcn ? models.gcn->best_epoch : models.linear_victim->best_epoch;
        summary["victim"] = std::move(s);
    }

    if (!flags.out_dir.empty()) {
        const std::filesystem::path dir(flags.out_dir);
        std::filesystem::create_directories(dir);
        if (models.gcn)
            guard::save_checkpoint(*models.gcn, dir / "checkpoint.bin");
        else
            guard::save_checkpoint(*models.linear_victim, dir / "checkpoint.bin");
        guard::save_checkpoint(models.surrogate, dir / "surrogate.bin");
        if (data.splits_generated)
            guard::detail::write_splits_json(dir / "splits.json", data.splits);
        summary["checkpoint"] = (dir / "checkpoint.bin").string();
        summary["surrogate_checkpoint"] = (dir / "surrogate.bin").string();
    }
    emit(summary);
    return 0;
}

int run_attack_or_census(const GlobalFlags& flags, bool census_view) {
    const guard::ExperimentConfig cfg = resolve_config(flags);
    const guard::CensusReport census = guard::run_census(cfg, flags.out_dir);
    nlohmann::ordered_json summary;
    summary["total_injections"] = census.total_injections;
    summary["unique_attackers"] = census.unique_attackers.size();
    summary["top_50_mass"] = census.top_mass(50);
    summary["attacker_degree_le2_rate"] = census.attacker_low_degree_rate(2);
    if (census_view) {
        nlohmann::ordered_json rows = nlohmann::ordered_json::array();
        const std::size_t limit = std::min<std::size_t>(census.frequency.size(), 20);
        for (std::size_t i = 0; i < limit; ++i)
            rows.push_back({{"node", census.frequency[i].node},
                            {"count", census.frequency[i].count}});
        summary["top_nodes"] = std::move(rows);
    }
    emit(summary);
    return 0;
}

int run_defend(const GlobalFlags& flags) {
    const guard::ExperimentConfig cfg = resolve_config(flags);
    const guard::detail::PreparedData data = guard::detail::prepare_experiment(cfg);
    const guard::detail::RepeatModels models =
        guard::detail::train_repeat_models(cfg, data, 0, /*with_victim=*/false);
    const guard::InfluenceTable table =
        guard::influence_scores(models.surrogate, data.graph, data.splits, cfg.alpha);
    const guard::DefensePatch patch = guard::select_anchors(table, cfg.k);
    const nlohmann::ordered_json j = guard::patch_json(patch);
    if (!flags.out_dir.empty()) {
        std::filesystem::create_directories(flags.out_dir);
        guard::detail::write_text_file(
            std::filesystem::path(flags.out_dir) / "patch.json", j.dump(2) + "\n");
    }
    emit(j);
    return 0;
}

int run_evaluate(const GlobalFlags& flags) {
    const guard::ExperimentConfig cfg = resolve_config(flags);
    const guard::EvalReport report = guard::run_pipeline(cfg, flags.out_dir);
    emit(report.to_json());
    return 0;
}

int run_sweep(const GlobalFlags& flags, const std::string& parameter,
              const std::vector<double>& values) {
    const guard::ExperimentConfig cfg = resolve_config(flags);
    const std::vector<guard::EvalReport> reports =
        guard::sweep_parameter(cfg, parameter, values, flags.out_dir);
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < reports.size(); ++i) {
        nlohmann::ordered_json row;
        row["value"] = values[i];
        for (const auto& [name, out] : reports[i].defense_outcomes)
            row[name] = {{"attacked_mean", out.attacked.mean},
                         {"clean_mean", out.clean.mean}};
        rows.push_back(std::move(row));
    }
    emit(rows);
    return 0;
}

int run_time(const GlobalFlags& flags, const std::vector<guard::NodeId>& sizes,
             double avg_degree, int feature_dim, int classes, int iterations) {
    const guard::ExperimentConfig cfg = resolve_config(flags);
    if (sizes.empty()) throw guard::ConfigError("time needs at least one --sizes value");
    for (guard::NodeId n : sizes)
        if (n < 2) throw guard::ConfigError("--sizes entries must be at least 2");
    if (avg_degree <= 0.0) throw guard::ConfigError("--avg-degree must be positive");
    if (feature_dim < 1 || classes < 1)
        throw guard::ConfigError("--feature-dim and --classes must be positive");
    if (iterations < 1) throw guard::ConfigError("--iterations must be positive");

    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    std::string csv = "nodes,influence_seconds,selection_seconds,total_seconds\n";
    double prev_total = 0.0;
    for (guard::NodeId n : sizes) {
        guard::ErdosRenyiConfig er;
        er.nodes = n;
        er.edge_prob = std::min(1.0, avg_degree / static_cast<double>(n - 1));
        er.classes = classes;
        er.feature_dim = feature_dim;
        er.seed = cfg.seed + static_cast<std::uint64_t>(n);
        const guard::SparseGraph g = guard::erdos_renyi(er);
        const guard::SplitSet splits = guard::make_splits(g, 0.1, 0.1, cfg.seed + 1);

        // The probe needs only a collapsed table, not a converged model.
        guard::LinearSurrogate model;
        std::mt19937_64 rng(cfg.seed);
        const guard::Matrix x_t = guard::transform_features(
            g.features(), cfg.surrogate_training.feature_transform);
        model.weight = guard::detail::glorot_uniform(x_t.cols(), g.num_classes(), rng);
        model.collapsed = x_t * model.weight;
        model.hops = cfg.surrogate_training.hops;
        model.config = cfg.surrogate_training;
        model.trained_features = g.features_ptr();

        const int k = std::min<int>(cfg.k, g.num_nodes());
        const guard::TimingProbe probe =
            guard::time_defense(model, g, splits, k, cfg.alpha, iterations);
        nlohmann::ordered_json row;
        row["nodes"] = probe.nodes;
        row["influence_seconds"] = probe.influence_seconds;
        row["selection_seconds"] = probe.selection_seconds;
        row["total_seconds"] = probe.total_seconds();
        if (prev_total > 0.0) row["ratio_vs_previous"] = probe.total_seconds() / prev_total;
        prev_total = probe.total_seconds();
        rows.push_back(std::move(row));
        csv += std::to_string(probe.nodes) + ',' +
               nlohmann::json(probe.influence_seconds).dump() + ',' +
               nlohmann::json(probe.selection_seconds).dump() + ',' +
               nlohmann::json(probe.total_seconds()).dump() + '\n';
    }
    if (!flags.out_dir.empty()) {
        std::filesystem::create_directories(flags.out_dir);
        guard::detail::write_text_file(std::filesystem::path(flags.out_dir) / "time.csv", csv);
    }
    emit(rows);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"graph defense toolkit: surrogate-guided attacks, influence "
                 "patches and their evaluation"};
    app.require_subcommand(1);

    GlobalFlags train_flags, attack_flags, defend_flags, evaluate_flags, census_flags,
        sweep_flags, time_flags;

    auto* train = app.add_subcommand("train", "train surrogate and victim, save checkpoints");
    add_global_flags(train, train_flags);

    auto* attack = app.add_subcommand("attack", "attack every sampled target");
    add_global_flags(attack, attack_flags);

    auto* defend = app.add_subcommand("defend", "score nodes and emit an anchor patch");
    add_global_flags(defend, defend_flags);

    auto* evaluate = app.add_subcommand("evaluate", "full attack and defense evaluation");
    add_global_flags(evaluate, evaluate_flags);

    auto* census = app.add_subcommand("census", "aggregate which nodes attacks latch onto");
    add_global_flags(census, census_flags);

    auto* sweep = app.add_subcommand("sweep", "evaluate defenses across k or alpha values");
    add_global_flags(sweep, sweep_flags);
    std::string sweep_param = "k";
    std::vector<double> sweep_values;
    sweep->add_option("--parameter", sweep_param, "knob to sweep: k or alpha");
    sweep->add_option("--values", sweep_values, "values to sweep over")->required();

    auto* time_cmd = app.add_subcommand("time", "measure patch construction cost vs size");
    add_global_flags(time_cmd, time_flags);
    std::vector<guard::NodeId> time_sizes{10000, 20000, 40000};
    double time_avg_degree = 4.0;
    int time_feature_dim = 32, time_classes = 7, time_iterations = 5;
    time_cmd->add_option("--sizes", time_sizes, "graph sizes to probe");
    time_cmd->add_option("--avg-degree", time_avg_degree, "average degree of the probe graphs");
    time_cmd->add_option("--feature-dim", time_feature_dim, "feature width of the probe graphs");
    time_cmd->add_option("--classes", time_classes, "label count of the probe graphs");
    time_cmd->add_option("--iterations", time_iterations, "timing iterations (median wins)");

    try {
        app.parse(argc, argv);
        if (train->parsed()) return run_train(train_flags);
        if (attack->parsed()) return run_attack_or_census(attack_flags, false);
        if (defend->parsed()) return run_defend(defend_flags);
        if (evaluate->parsed()) return run_evaluate(evaluate_flags);
        if (census->parsed()) return run_attack_or_census(census_flags, true);
        if (sweep->parsed()) return run_sweep(sweep_flags, sweep_param, sweep_values);
        if (time_cmd->parsed())
            return run_time(time_flags, time_sizes, time_avg_degree, time_feature_dim,
                            time_classes, time_iterations);
        return 2;
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    } catch (const guard::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const guard::DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    }
}
