#pragma once

#include <guard/models.hpp>

#include <nlohmann/json.hpp>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace guard {

// Binary checkpoint layout (little-endian):
//   "GRDW" magic, u32 version, u32 kind (0 linear / 1 convolution),
//   u32 matrix count, then per matrix u64 rows, u64 cols and row-major f64
//   data. Hyperparameters and provenance live in a JSON sidecar at
//   <path>.json; weights round-trip bit-exactly.

inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class CheckpointKind : std::uint32_t { Linear = 0, Gcn = 1 };

namespace detail {

template <typename T>
void write_pod(std::ofstream& out, const T& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const std::filesystem::path& path) {
    T value{};
    if (!in.read(reinterpret_cast<char*>(&value), sizeof(T)))
        throw DataError("truncated checkpoint " + path.string());
    return value;
}

inline void write_matrix(std::ofstream& out, const Matrix& m) {
    write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
    write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) write_pod<double>(out, m(i, j));
}

inline Matrix read_matrix(std::ifstream& in, const std::filesystem::path& path) {
    const auto rows = read_pod<std::uint64_t>(in, path);
    const auto cols = read_pod<std::uint64_t>(in, path);
    if (rows > (1u << 26) || cols > (1u << 26))
        throw DataError("implausible matrix shape in " + path.string());
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = read_pod<double>(in, path);
    return m;
}

inline nlohmann::ordered_json training_config_json(const TrainingConfig& c) {
    return {{"learning_rate", c.learning_rate}, {"epochs", c.epochs},
            {"weight_decay", c.weight_decay},   {"hidden", c.hidden},
            {"hops", c.hops},                   {"optimizer", to_string(c.optimizer)},
            {"feature_transform", to_string(c.feature_transform)},
            {"seed", c.seed}};
}

inline TrainingConfig training_config_from_json(const nlohmann::json& j) {
    TrainingConfig c;
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.epochs = j.value("epochs", c.epochs);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.hidden = j.value("hidden", c.hidden);
    c.hops = j.value("hops", c.hops);
    if (j.contains("optimizer")) c.optimizer = parse_optimizer(j["optimizer"].get<std::string>());
    if (j.contains("feature_transform"))
        c.feature_transform = parse_feature_transform(j["feature_transform"].get<std::string>());
    c.seed = j.value("seed", c.seed);
    c.validate();
    return c;
}

inline void write_sidecar(const std::filesystem::path& path, CheckpointKind kind,
                          const TrainingConfig& config, double best_acc, int best_epoch,
                          const std::vector<std::string>& warnings) {
    nlohmann::ordered_json j{
        {"model", kind == CheckpointKind::Linear ? "linear" : "gcn"},
        {"training_config", training_config_json(config)},
        {"best_validation_accuracy", best_acc},
        {"best_epoch", best_epoch},
        {"warnings", warnings},
    };
    std::ofstream out(path.string() + ".json");
    if (!out) throw DataError("cannot write sidecar for " + path.string());
    out << j.dump(2) << "\n";
}

struct SidecarInfo {
    TrainingConfig config;
    double best_validation_accuracy = 0.0;
    int best_epoch = -1;
    std::vector<std::string> warnings;
};

inline SidecarInfo read_sidecar(const std::filesystem::path& path) {
    SidecarInfo info;
    std::ifstream in(path.string() + ".json");
    if (!in) return info;  // sidecar is advisory; weights alone still load
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("invalid sidecar for " + path.string() + ": " + e.what());
    }
    if (j.contains("training_config")) info.config = training_config_from_json(j["training_config"]);
    info.best_validation_accuracy = j.value("best_validation_accuracy", 0.0);
    info.best_epoch = j.value("best_epoch", -1);
    if (j.contains("warnings"))
        info.warnings = j["warnings"].get<std::vector<std::string>>();
    return info;
}

inline std::ifstream open_checkpoint(const std::filesystem::path& path, CheckpointKind expected,
                                     std::uint32_t expected_matrices) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint " + path.string());
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, "GRDW", 4) != 0)
        throw DataError(path.string() + " is not a model checkpoint (bad magic)");
    const auto version = read_pod<std::uint32_t>(in, path);
    if (version != kCheckpointVersion)
        throw DataError("unsupported checkpoint version " + std::to_string(version));
    const auto kind = read_pod<std::uint32_t>(in, path);
    if (kind != static_cast<std::uint32_t>(expected))
        throw DataError(path.string() + " holds a different model kind");
    const auto count = read_pod<std::uint32_t>(in, path);
    if (count != expected_matrices)
        throw DataError("unexpected matrix count in " + path.string());
    return in;
}

}  // namespace detail

inline CheckpointKind checkpoint_kind(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint " + path.string());
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, "GRDW", 4) != 0)
        throw DataError(path.string() + " is not a model checkpoint (bad magic)");
    detail::read_pod<std::uint32_t>(in, path);  // version
    const auto kind = detail::read_pod<std::uint32_t>(in, path);
    if (kind > 1) throw DataError("unknown model kind in " + path.string());
    return static_cast<CheckpointKind>(kind);
}

inline void save_checkpoint(const LinearSurrogate& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint " + path.string());
    out.write("GRDW", 4);
    detail::write_pod<std::uint32_t>(out, kCheckpointVersion);
    detail::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(CheckpointKind::Linear));
    detail::write_pod<std::uint32_t>(out, 1);
    detail::write_matrix(out, model.weight);
    detail::write_sidecar(path, CheckpointKind::Linear, model.config,
                          model.best_validation_accuracy, model.best_epoch, model.warnings);
}

inline void save_checkpoint(const GcnVictim& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint " + path.string());
    out.write("GRDW", 4);
    detail::write_pod<std::uint32_t>(out, kCheckpointVersion);
    detail::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(CheckpointKind::Gcn));
    detail::write_pod<std::uint32_t>(out, 2);
    detail::write_matrix(out, model.w0);
    detail::write_matrix(out, model.w1);
    detail::write_sidecar(path, CheckpointKind::Gcn, model.config,
                          model.best_validation_accuracy, model.best_epoch, model.warnings);
}

/// Loads linear-model weights and rebuilds the collapsed table from the
/// given graph's features.
inline LinearSurrogate load_linear_surrogate(const std::filesystem::path& path,
                                             const SparseGraph& g) {
    auto in = detail::open_checkpoint(path, CheckpointKind::Linear, 1);
    LinearSurrogate model;
    model.weight = detail::read_matrix(in, path);
    const auto info = detail::read_sidecar(path);
    model.config = info.config;
    model.hops = info.config.hops;
    model.best_validation_accuracy = info.best_validation_accuracy;
    model.best_epoch = info.best_epoch;
    model.warnings = info.warnings;
    if (g.features().cols() != model.weight.rows())
        throw DataError("checkpoint feature width " + std::to_string(model.weight.rows()) +
                        " does not match the graph's " + std::to_string(g.features().cols()));
    model.collapsed =
        transform_features(g.features(), model.config.feature_transform) * model.weight;
    model.trained_features = g.features_ptr();
    return model;
}

inline GcnVictim load_gcn_victim(const std::filesystem::path& path, const SparseGraph& g) {
    auto in = detail::open_checkpoint(path, CheckpointKind::Gcn, 2);
    GcnVictim model;
    model.w0 = detail::read_matrix(in, path);
    model.w1 = detail::read_matrix(in, path);
    const auto info = detail::read_sidecar(path);
    model.config = info.config;
    model.best_validation_accuracy = info.best_validation_accuracy;
    model.best_epoch = info.best_epoch;
    model.warnings = info.warnings;
    if (g.features().cols() != model.w0.rows())
        throw DataError("checkpoint feature width does not match the graph");
    if (model.w0.cols() != model.w1.rows())
        throw DataError("inconsistent layer shapes in " + path.string());
    model.trained_features = g.features_ptr();
    return model;
}

}  // namespace guard
