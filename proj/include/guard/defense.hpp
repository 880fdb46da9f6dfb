#pragma once

#include <guard/models.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace guard {

// Influence of node v on a would-be neighbor u, under the surrogate's
// collapsed table W̄ and the target's label y:
//   exact:  I_u(v) = (Σ_c Z[v,c] W̄[v,c] − W̄[v,y]) / d_v^α
//   bound:  I*_u(v) = (max_c W̄[v,c] − W̄[v,y]) / d_v^α ≥ I_u(v)
// with Z the surrogate's full forward and d_v the raw degree floored at 1.
// The bound needs no forward pass and, averaged over a labeled subset with
// class frequencies q, collapses to
//   I*(v) = d_v^{-α} (max_c W̄[v,c] − Σ_y q_y W̄[v,y]),
// one number per node in O(C) time.

namespace detail {

inline double floored_degree(const SparseGraph& g, NodeId v) {
    return std::max(1.0, static_cast<double>(g.degree(v)));
}

inline void check_node(const SparseGraph& g, NodeId v, const char* what) {
    if (v < 0 || v >= g.num_nodes())
        throw PreconditionError(std::string(what) + " node " + std::to_string(v) +
                                " outside the graph");
}

inline int influence_label(const SparseGraph& g, NodeId u) {
    const int y = g.label(u);
    if (y == kUnlabeled)
        throw PreconditionError("influence of an unlabeled target is undefined; node " +
                                std::to_string(u));
    return y;
}

}  // namespace detail

/// I_u(v) through the surrogate's full forward pass.
inline double exact_influence(const LinearSurrogate& model, const SparseGraph& g, NodeId u,
                              NodeId v, double alpha = 2.0) {
    detail::check_node(g, u, "target");
    detail::check_node(g, v, "candidate");
    const int y = detail::influence_label(g, u);
    const Matrix collapsed = model.collapsed_for(g);
    const Eigen::RowVectorXd z = predict_node(model, g, v);
    const double damage = z.dot(collapsed.row(v)) - collapsed(v, y);
    return damage / std::pow(detail::floored_degree(g, v), alpha);
}

/// Label-free upper bound I*_u(v); never below exact_influence for the
/// same pair.
inline double approx_influence(const LinearSurrogate& model, const SparseGraph& g, NodeId u,
                               NodeId v, double alpha = 2.0) {
    detail::check_node(g, u, "target");
    detail::check_node(g, v, "candidate");
    const int y = detail::influence_label(g, u);
    const Matrix collapsed = model.collapsed_for(g);
    const double damage = collapsed.row(v).maxCoeff() - collapsed(v, y);
    return damage / std::pow(detail::floored_degree(g, v), alpha);
}

struct InfluenceTable {
    std::vector<double> score;  // averaged bound per node
    double alpha = 2.0;
};

/// Averaged influence bound over the labeled subset `splits.sub`, using
/// only its class frequencies.
inline InfluenceTable influence_scores(const LinearSurrogate& model, const SparseGraph& g,
                                       const SplitSet& splits, double alpha = 2.0) {
    if (splits.sub.empty())
        throw PreconditionError("influence averaging needs a non-empty labeled subset");
    Eigen::VectorXd q = Eigen::VectorXd::Zero(g.num_classes());
    for (NodeId u : splits.sub) {
        const int y = detail::influence_label(g, u);
        q(y) += 1.0;
    }
    q /= static_cast<double>(splits.sub.size());

    const Matrix collapsed = model.collapsed_for(g);
    InfluenceTable table;
    table.alpha = alpha;
    table.score.resize(static_cast<std::size_t>(g.num_nodes()));
    for (NodeId v = 0; v < g.num_nodes(); ++v) {
        const double damage = collapsed.row(v).maxCoeff() - collapsed.row(v).dot(q);
        table.score[static_cast<std::size_t>(v)] =
            damage / std::pow(detail::floored_degree(g, v), alpha);
    }
    return table;
}

enum class PatchSource { Influence, Random, Degree };

inline std::string to_string(PatchSource s) {
    switch (s) {
        case PatchSource::Random: return "random";
        case PatchSource::Degree: return "degree";
        default: return "influence";
    }
}
inline PatchSource parse_patch_source(const std::string& s) {
    if (s == "influence") return PatchSource::Influence;
    if (s == "random") return PatchSource::Random;
    if (s == "degree") return PatchSource::Degree;
    throw DataError("unknown patch source '" + s + "'");
}

/// An anchor set: the k nodes whose incident edges purification removes
/// around a target. Anchors are listed in selection order (score
/// descending, node index ascending on ties).
struct DefensePatch {
    std::vector<NodeId> anchors;
    std::vector<double> scores;  // aligned with anchors
    int k = 0;
    double alpha = 2.0;
    PatchSource source = PatchSource::Influence;

    bool contains(NodeId v) const {
        return std::binary_search(sorted_.begin(), sorted_.end(), v);
    }

    void finalize() {
        sorted_ = anchors;
        std::sort(sorted_.begin(), sorted_.end());
        if (std::adjacent_find(sorted_.begin(), sorted_.end()) != sorted_.end())
            throw PreconditionError("patch anchors must be distinct");
    }

private:
    std::vector<NodeId> sorted_;
};

namespace detail {

inline DefensePatch top_k_patch(const std::vector<double>& score, int k, double alpha,
                                PatchSource source) {
    const auto n = static_cast<NodeId>(score.size());
    if (k < 0 || k > n)
        throw PreconditionError("anchor count " + std::to_string(k) + " outside [0," +
                                std::to_string(n) + "]");
    std::vector<NodeId> order(static_cast<std::size_t>(n));
    for (NodeId v = 0; v < n; ++v) order[static_cast<std::size_t>(v)] = v;
    std::stable_sort(order.begin(), order.end(), [&](NodeId a, NodeId b) {
        return score[static_cast<std::size_t>(a)] > score[static_cast<std::size_t>(b)];
    });
    DefensePatch patch;
    patch.k = k;
    patch.alpha = alpha;
    patch.source = source;
    patch.anchors.assign(order.begin(), order.begin() + k);
    patch.scores.reserve(static_cast<std::size_t>(k));
    for (NodeId v : patch.anchors) patch.scores.push_back(score[static_cast<std::size_t>(v)]);
    patch.finalize();
    return patch;
}

}  // namespace detail

/// Top-k nodes by averaged influence.
inline DefensePatch select_anchors(const InfluenceTable& table, int k) {
    return detail::top_k_patch(table.score, k, table.alpha, PatchSource::Influence);
}

/// Baseline: k nodes drawn by seeded per-node uniform scores. The scores
/// are the draws themselves, so the descending-score patch contract holds.
inline DefensePatch random_anchors(const SparseGraph& g, int k, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> score(static_cast<std::size_t>(g.num_nodes()));
    for (auto& s : score) s = unit(rng);
    auto patch = detail::top_k_patch(score, k, 0.0, PatchSource::Random);
    return patch;
}

/// Baseline: the k lowest-degree nodes (score = −degree).
inline DefensePatch degree_anchors(const SparseGraph& g, int k) {
    std::vector<double> score(static_cast<std::size_t>(g.num_nodes()));
    for (NodeId v = 0; v < g.num_nodes(); ++v)
        score[static_cast<std::size_t>(v)] = -static_cast<double>(g.degree(v));
    return detail::top_k_patch(score, k, 0.0, PatchSource::Degree);
}

struct PurifiedGraph {
    NodeId target = 0;
    SparseGraph graph;
    std::vector<NodeId> removed_anchors;  // ascending
};

/// Removes every edge between the target and an anchor. Nothing else
/// changes; applying the same patch twice is a no-op.
inline PurifiedGraph apply_patch(const SparseGraph& g, const DefensePatch& patch,
                                 NodeId target) {
    detail::check_node(g, target, "target");
    PurifiedGraph out;
    out.target = target;
    std::vector<EdgeFlip> flips;
    for (NodeId v : g.neighbors(target))
        if (patch.contains(v)) {
            flips.push_back({target, v, false});
            out.removed_anchors.push_back(v);
        }
    out.graph = flips.empty() ? g : flip_edges(g, flips);
    return out;
}

/// Feature overlap |x_u ∧ x_v| / |x_u ∨ x_v| of two binary rows; zero when
/// both rows are empty.
inline double jaccard_similarity(const Matrix& x, NodeId u, NodeId v) {
    double both = 0.0, any = 0.0;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const bool a = x(u, j) != 0.0;
        const bool b = x(v, j) != 0.0;
        both += (a && b) ? 1.0 : 0.0;
        any += (a || b) ? 1.0 : 0.0;
    }
    return any > 0.0 ? both / any : 0.0;
}

/// Binary-feature edge filter: drops every edge whose endpoints' feature
/// overlap falls below the threshold.
inline SparseGraph jaccard_prune(const SparseGraph& g, double threshold = 0.01) {
    if (threshold < 0.0) throw PreconditionError("threshold must be nonnegative");
    if (!is_binary(g.features()))
        throw PreconditionError("feature-overlap pruning requires binary features");
    const Matrix& x = g.features();
    std::vector<EdgeFlip> flips;
    for (NodeId u = 0; u < g.num_nodes(); ++u)
        for (NodeId v : g.neighbors(u)) {
            if (v <= u) continue;
            if (jaccard_similarity(x, u, v) < threshold) flips.push_back({u, v, false});
        }
    return flips.empty() ? g : flip_edges(g, flips);
}

inline nlohmann::ordered_json patch_json(const DefensePatch& patch) {
    nlohmann::ordered_json j;
    j["source"] = to_string(patch.source);
    j["k"] = patch.k;
    j["alpha"] = patch.alpha;
    j["anchors"] = patch.anchors;
    j["scores"] = patch.scores;
    return j;
}

inline DefensePatch patch_from_json(const nlohmann::json& j) {
    DefensePatch patch;
    try {
        patch.source = parse_patch_source(j.at("source").get<std::string>());
        patch.k = j.at("k").get<int>();
        patch.alpha = j.at("alpha").get<double>();
        patch.anchors = j.at("anchors").get<std::vector<NodeId>>();
        patch.scores = j.at("scores").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed patch: ") + e.what());
    }
    if (patch.anchors.size() != patch.scores.size() ||
        patch.anchors.size() != static_cast<std::size_t>(patch.k))
        throw DataError("patch anchor, score and k sizes disagree");
    patch.finalize();
    return patch;
}

}  // namespace guard
