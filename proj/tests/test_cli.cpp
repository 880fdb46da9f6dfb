// End-to-end checks of the command-line binary: spawns the real executable,
// inspects exit codes and the files it leaves behind.

#include <guard/checkpoint.hpp>
#include <guard/defense.hpp>
#include <guard/synthetic.hpp>

#include <catch2/catch_amalgamated.hpp>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

using namespace guard;
namespace fs = std::filesystem;

namespace {

class TempDir {
public:
    TempDir() {
        static int counter = 0;
        path_ = fs::temp_directory_path() /
                ("guard_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

int run_cli(const std::string& args, const fs::path& stdout_file) {
    const std::string cmd = std::string(GUARD_CLI_PATH) + " " + args + " > " +
                            stdout_file.string() + " 2> " + stdout_file.string() + ".err";
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    return WEXITSTATUS(status);
}

nlohmann::json read_json(const fs::path& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    nlohmann::json j;
    in >> j;
    return j;
}

std::string small_config_text(std::uint64_t seed) {
    std::ostringstream out;
    out << R"({
        "synthetic": {
            "kind": "stochastic_block",
            "block_sizes": [25, 25],
            "intra_prob": 0.2,
            "inter_prob": 0.02,
            "feature_dim": 12,
            "binary_features": true,
            "train_frac": 0.3,
            "valid_frac": 0.2
        },
        "model": "linear",
        "training": {"epochs": 15, "learning_rate": 0.1},
        "targets": 8,
        "repeats": 1,
        "k": 5,
        "defenses": ["guard", "none"],
        "seed": )"
        << seed << "}";
    return out.str();
}

}  // namespace

TEST_CASE("evaluate subcommand writes the full artifact set") {
    TempDir dir;
    const fs::path cfg = dir.path() / "cfg.json";
    std::ofstream(cfg) << small_config_text(7);
    const fs::path out = dir.path() / "run";

    const int rc = run_cli("evaluate --config " + cfg.string() + " --out " + out.string(),
                           dir.path() / "stdout.json");
    REQUIRE(rc == 0);

    const auto report = read_json(out / "report.json");
    CHECK(report.at("dataset").at("nodes") == 50);
    CHECK(report.at("config").at("seed") == 7);
    CHECK(read_json(dir.path() / "stdout.json") == report);  // stdout repeats the report
    CHECK(fs::exists(out / "attacks.jsonl"));
    CHECK(fs::exists(out / "census.csv"));
    CHECK(fs::exists(out / "patch.json"));
    CHECK(fs::exists(out / "timing.json"));

    SECTION("the seed flag overrides the config") {
        const fs::path out2 = dir.path() / "run2";
        const int rc2 = run_cli("evaluate --config " + cfg.string() + " --seed 99 --out " +
                                    out2.string(),
                                dir.path() / "stdout2.json");
        REQUIRE(rc2 == 0);
        CHECK(read_json(out2 / "report.json").at("config").at("seed") == 99);
    }
}

TEST_CASE("train subcommand saves checkpoints the library can reload") {
    TempDir dir;
    const fs::path cfg = dir.path() / "cfg.json";
    std::ofstream(cfg) << small_config_text(13);
    const fs::path out = dir.path() / "model";

    const int rc = run_cli("train --config " + cfg.string() + " --out " + out.string(),
                           dir.path() / "stdout.json");
    REQUIRE(rc == 0);
    const auto summary = read_json(dir.path() / "stdout.json");
    CHECK(summary.at("victim").at("model") == "linear");
    CHECK(summary.at("surrogate").at("test_accuracy").get<double>() >= 0.0);

    REQUIRE(fs::exists(out / "checkpoint.bin"));
    REQUIRE(fs::exists(out / "surrogate.bin"));
    CHECK(checkpoint_kind(out / "checkpoint.bin") == CheckpointKind::Linear);

    // Reload against the same generated graph.
    StochasticBlockConfig sbm;
    sbm.block_sizes = {25, 25};
    sbm.intra_prob = 0.2;
    sbm.inter_prob = 0.02;
    sbm.feature_dim = 12;
    sbm.binary_features = true;
    sbm.seed = 13;
    const SparseGraph g = stochastic_block(sbm);
    const LinearSurrogate restored = load_linear_surrogate(out / "surrogate.bin", g);
    CHECK(restored.weight.rows() == 12);
}

TEST_CASE("defend and census subcommands emit their artifacts") {
    TempDir dir;
    const fs::path cfg = dir.path() / "cfg.json";
    std::ofstream(cfg) << small_config_text(23);
    const fs::path out = dir.path() / "out";

    REQUIRE(run_cli("defend --config " + cfg.string() + " --out " + out.string(),
                    dir.path() / "patch_stdout.json") == 0);
    const DefensePatch patch = patch_from_json(read_json(out / "patch.json"));
    CHECK(patch.anchors.size() == 5);

    REQUIRE(run_cli("census --config " + cfg.string() + " --out " + out.string(),
                    dir.path() / "census_stdout.json") == 0);
    const auto census = read_json(dir.path() / "census_stdout.json");
    CHECK(census.at("total_injections").get<std::int64_t>() > 0);
    CHECK(fs::exists(out / "census.csv"));
    CHECK(fs::exists(out / "attacks.jsonl"));
}

TEST_CASE("failure modes map to the documented exit codes") {
    TempDir dir;
    const fs::path garbage = dir.path() / "garbage.json";
    std::ofstream(garbage) << "{not json";
    const fs::path devnull = dir.path() / "ignored.txt";

    // 2: flag errors, malformed or contradictory configs
    CHECK(run_cli("evaluate", devnull) == 2);
    CHECK(run_cli("evaluate --config /does/not/exist.json", devnull) == 2);
    CHECK(run_cli("evaluate --config " + garbage.string(), devnull) == 2);
    CHECK(run_cli("sweep --config " + garbage.string() + " --values 1", devnull) == 2);
    CHECK(run_cli("bogus-subcommand", devnull) == 2);

    const fs::path unknown = dir.path() / "unknown.json";
    std::ofstream(unknown)
        << R"({"synthetic": {"kind": "erdos_renyi", "nodes": 10, "edge_prob": 0.2}, "mystery": 1})";
    CHECK(run_cli("evaluate --config " + unknown.string(), devnull) == 2);

    // 3: config is fine, referenced data is not
    const fs::path missing_data = dir.path() / "missing_data.json";
    std::ofstream(missing_data)
        << R"({"dataset": {"edges": "/nope/e.txt", "features": "/nope/f.csv", "labels": "/nope/l.csv"}})";
    CHECK(run_cli("evaluate --config " + missing_data.string(), devnull) == 3);

    // 0: help is not an error
    CHECK(run_cli("--help", devnull) == 0);
}
