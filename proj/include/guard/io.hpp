#pragma once

#include <guard/graph.hpp>

#include <nlohmann/json.hpp>

#include <cctype>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace guard {

/// Parse failure tied to a file location; message carries "path:line".
class ParseError : public DataError {
public:
    ParseError(const std::filesystem::path& path, std::size_t line, const std::string& msg)
        : DataError(path.string() + ":" + std::to_string(line) + ": " + msg) {}
};

namespace detail {

inline std::string strip_comment(std::string line) {
    if (const auto pos = line.find('#'); pos != std::string::npos) line.resize(pos);
    return line;
}

inline std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string token;
    std::istringstream ss(line);
    while (std::getline(ss, token, sep)) out.push_back(token);
    return out;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

inline std::optional<long long> parse_int(std::string_view raw) {
    const auto s = trim(raw);
    long long value = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return value;
}

inline std::optional<double> parse_real(std::string_view raw) {
    const auto s = trim(raw);
    if (s.empty()) return std::nullopt;
    std::string buf(s);
    char* end = nullptr;
    const double value = std::strtod(buf.c_str(), &end);
    if (end != buf.c_str() + buf.size()) return std::nullopt;
    return value;
}

inline std::ifstream open_or_throw(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    return in;
}

}  // namespace detail

/// Reads "u v" pairs, one edge per line. '#' starts a comment; blank lines
/// are skipped. Direction and duplicates are ignored by the graph builder;
/// indices outside [0, num_nodes) raise a ParseError with the line number.
inline std::vector<std::pair<NodeId, NodeId>> read_edge_list(const std::filesystem::path& path,
                                                             NodeId num_nodes) {
    auto in = detail::open_or_throw(path);
    std::vector<std::pair<NodeId, NodeId>> edges;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ss(detail::strip_comment(line));
        std::string a, b, extra;
        if (!(ss >> a)) continue;
        if (!(ss >> b) || (ss >> extra))
            throw ParseError(path, lineno, "expected exactly two node indices");
        const auto u = detail::parse_int(a);
        const auto v = detail::parse_int(b);
        if (!u || !v) throw ParseError(path, lineno, "node index is not an integer");
        if (*u < 0 || *u >= num_nodes || *v < 0 || *v >= num_nodes)
            throw ParseError(path, lineno,
                             "node index outside [0," + std::to_string(num_nodes) + ")");
        edges.emplace_back(static_cast<NodeId>(*u), static_cast<NodeId>(*v));
    }
    return edges;
}

/// Reads a dense feature matrix from comma-separated rows, one node per
/// line. An optional leading "N,F" count header is recognized when the
/// first line holds exactly two integers that equal the row and column
/// counts of the remaining lines; any other first line is data. Files that
/// are valid without a header are therefore never rejected.
inline Matrix read_features_csv(const std::filesystem::path& path) {
    auto in = detail::open_or_throw(path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!detail::trim(line).empty()) lines.push_back(line);
    }
    if (lines.empty()) throw ParseError(path, 1, "empty feature file");

    std::size_t first_data = 0;
    {
        const auto tokens = detail::split(lines[0], ',');
        if (tokens.size() == 2) {
            const auto n = detail::parse_int(tokens[0]);
            const auto f = detail::parse_int(tokens[1]);
            const bool rows_match = n && *n >= 0 &&
                                    static_cast<std::size_t>(*n) == lines.size() - 1;
            const bool cols_match =
                f && *f >= 0 &&
                (lines.size() == 1 ||
                 static_cast<std::size_t>(*f) == detail::split(lines[1], ',').size());
            if (rows_match && cols_match) first_data = 1;
        }
    }
    const std::size_t rows = lines.size() - first_data;
    if (rows == 0) return Matrix(0, 0);

    const std::size_t cols = detail::split(lines[first_data], ',').size();

    Matrix x(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        const auto tokens = detail::split(lines[first_data + r], ',');
        if (tokens.size() != cols)
            throw ParseError(path, first_data + r + 1,
                             "expected " + std::to_string(cols) + " values, found " +
                                 std::to_string(tokens.size()));
        for (std::size_t c = 0; c < cols; ++c) {
            const auto value = detail::parse_real(tokens[c]);
            if (!value) throw ParseError(path, first_data + r + 1, "value is not a number");
            x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = *value;
        }
    }
    return x;
}

/// Reads "node,class" pairs; nodes not mentioned keep the unlabeled
/// sentinel. '#' comments and blank lines are allowed; assigning the same
/// node twice is an error.
inline std::vector<int> read_labels_csv(const std::filesystem::path& path, NodeId num_nodes) {
    auto in = detail::open_or_throw(path);
    std::vector<int> labels(static_cast<std::size_t>(num_nodes), kUnlabeled);
    std::vector<bool> seen(static_cast<std::size_t>(num_nodes), false);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string body = detail::strip_comment(line);
        if (detail::trim(body).empty()) continue;
        const auto tokens = detail::split(body, ',');
        if (tokens.size() != 2) throw ParseError(path, lineno, "expected 'node,class'");
        const auto node = detail::parse_int(tokens[0]);
        const auto cls = detail::parse_int(tokens[1]);
        if (!node || !cls) throw ParseError(path, lineno, "node or class is not an integer");
        if (*node < 0 || *node >= num_nodes)
            throw ParseError(path, lineno,
                             "node index outside [0," + std::to_string(num_nodes) + ")");
        if (*cls < 0) throw ParseError(path, lineno, "class index must be nonnegative");
        const auto idx = static_cast<std::size_t>(*node);
        if (seen[idx]) throw ParseError(path, lineno, "node labeled twice");
        seen[idx] = true;
        labels[idx] = static_cast<int>(*cls);
    }
    return labels;
}

/// Reads a splits JSON object with "train"/"valid"/"test" index arrays and
/// an optional "sub" array (defaults to train during validation).
inline SplitSet read_splits_json(const std::filesystem::path& path) {
    auto in = detail::open_or_throw(path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path, 1, std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ParseError(path, 1, "splits file must hold a JSON object");
    auto read_set = [&](const char* key, bool required) {
        std::vector<NodeId> out;
        if (!j.contains(key)) {
            if (required) throw ParseError(path, 1, std::string("missing key '") + key + "'");
            return out;
        }
        if (!j[key].is_array()) throw ParseError(path, 1, std::string("'") + key + "' is not an array");
        for (const auto& v : j[key]) {
            if (!v.is_number_integer())
                throw ParseError(path, 1, std::string("'") + key + "' holds a non-integer");
            out.push_back(v.get<NodeId>());
        }
        return out;
    };
    SplitSet s;
    s.train = read_set("train", true);
    s.valid = read_set("valid", true);
    s.test = read_set("test", true);
    s.sub = read_set("sub", false);
    return s;
}

struct LoadedDataset {
    SparseGraph graph;
    SplitSet splits;
    bool splits_from_file = false;
};

/// Loads a dataset from disk. Features fix the node count; labels and
/// splits are optional (missing labels leave every node unlabeled, a
/// missing splits path leaves the splits empty for the caller to sample).
inline LoadedDataset load_graph(const std::filesystem::path& edges_path,
                                const std::filesystem::path& features_path,
                                const std::filesystem::path& labels_path = {},
                                const std::filesystem::path& splits_path = {}) {
    Matrix features = read_features_csv(features_path);
    const auto num_nodes = static_cast<NodeId>(features.rows());
    auto edges = read_edge_list(edges_path, num_nodes);
    std::vector<int> labels(static_cast<std::size_t>(num_nodes), kUnlabeled);
    if (!labels_path.empty()) labels = read_labels_csv(labels_path, num_nodes);

    LoadedDataset out;
    out.graph = SparseGraph::from_edges(num_nodes, edges, std::move(features), std::move(labels));
    if (!splits_path.empty() && std::filesystem::exists(splits_path)) {
        out.splits = read_splits_json(splits_path);
        out.splits.validate(out.graph);
        out.splits_from_file = true;
    }
    return out;
}

}  // namespace guard
