#pragma once

#include <guard/graph.hpp>

#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace guard {

/// Draws k distinct values from [0, n) via a partial Fisher-Yates shuffle.
/// Result order is the draw order (not sorted).
inline std::vector<NodeId> sample_without_replacement(NodeId n, NodeId k, std::mt19937_64& rng) {
    if (k < 0 || k > n) throw PreconditionError("sample size outside [0, population]");
    std::vector<NodeId> pool(static_cast<std::size_t>(n));
    for (NodeId i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = i;
    for (NodeId i = 0; i < k; ++i) {
        std::uniform_int_distribution<NodeId> pick(i, n - 1);
        std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(pick(rng))]);
    }
    pool.resize(static_cast<std::size_t>(k));
    return pool;
}

namespace detail {

/// Gaussian features around per-class means: class c gets mean
/// `separation` on coordinates congruent to c modulo the class count,
/// unit-variance noise everywhere.
inline Matrix gaussian_class_features(const std::vector<int>& labels, int classes, int dim,
                                      double separation, std::mt19937_64& rng) {
    std::normal_distribution<double> noise(0.0, 1.0);
    Matrix x(static_cast<Eigen::Index>(labels.size()), dim);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const int c = labels[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < dim; ++j) {
            const double mean =
                (c >= 0 && classes > 0 && j % classes == c % classes) ? separation : 0.0;
            x(i, j) = mean + noise(rng);
        }
    }
    return x;
}

/// Binary features: coordinates assigned to the node's class flip on with
/// probability p_in, the rest with p_out.
inline Matrix binary_class_features(const std::vector<int>& labels, int classes, int dim,
                                    double p_in, double p_out, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Matrix x(static_cast<Eigen::Index>(labels.size()), dim);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const int c = labels[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < dim; ++j) {
            const bool own = c >= 0 && classes > 0 && j % classes == c % classes;
            x(i, j) = unit(rng) < (own ? p_in : p_out) ? 1.0 : 0.0;
        }
    }
    return x;
}

}  // namespace detail

struct ErdosRenyiConfig {
    NodeId nodes = 0;
    double edge_prob = 0.0;
    int classes = 2;
    int feature_dim = 8;
    double feature_separation = 1.0;
    std::uint64_t seed = 0;
};

/// Uniform random graph G(n, p) with uniform random labels and Gaussian
/// class features. Pairs are enumerated by geometric skipping, so the cost
/// is proportional to the number of edges drawn, not to n^2.
inline SparseGraph erdos_renyi(const ErdosRenyiConfig& cfg) {
    if (cfg.nodes < 0 || cfg.edge_prob < 0.0 || cfg.edge_prob > 1.0 || cfg.classes < 1)
        throw PreconditionError("invalid random-graph parameters");
    std::mt19937_64 rng(cfg.seed);
    std::vector<std::pair<NodeId, NodeId>> edges;
    if (cfg.edge_prob > 0.0 && cfg.nodes > 1) {
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        const double log_q = std::log1p(-cfg.edge_prob);
        // Walk the strict upper triangle in row-major order, skipping a
        // geometric number of absent pairs between hits.
        std::int64_t v = 1, w = -1;
        const auto n = static_cast<std::int64_t>(cfg.nodes);
        while (v < n) {
            double r = unit(rng);
            if (r >= 1.0) r = std::nextafter(1.0, 0.0);
            std::int64_t skip =
                cfg.edge_prob >= 1.0 ? 0 : static_cast<std::int64_t>(std::log1p(-r) / log_q);
            w += 1 + skip;
            while (w >= v && v < n) {
                w -= v;
                ++v;
            }
            if (v < n)
                edges.emplace_back(static_cast<NodeId>(v), static_cast<NodeId>(w));
        }
    }
    std::uniform_int_distribution<int> cls(0, cfg.classes - 1);
    std::vector<int> labels(static_cast<std::size_t>(cfg.nodes));
    for (auto& y : labels) y = cls(rng);
    Matrix x = detail::gaussian_class_features(labels, cfg.classes, cfg.feature_dim,
                                               cfg.feature_separation, rng);
    return SparseGraph::from_edges(cfg.nodes, edges, std::move(x), std::move(labels));
}

struct StochasticBlockConfig {
    std::vector<NodeId> block_sizes;
    double intra_prob = 0.0;
    double inter_prob = 0.0;
    int feature_dim = 8;
    double feature_separation = 1.0;
    bool binary_features = false;
    double binary_on_prob = 0.3;   // own-class coordinates, binary mode
    double binary_off_prob = 0.02; // other coordinates, binary mode
    std::uint64_t seed = 0;
};

/// Planted-partition graph: node labels are block ids, intra-block pairs
/// connect with intra_prob and cross-block pairs with inter_prob.
inline SparseGraph stochastic_block(const StochasticBlockConfig& cfg) {
    if (cfg.block_sizes.empty() || cfg.intra_prob < 0.0 || cfg.intra_prob > 1.0 ||
        cfg.inter_prob < 0.0 || cfg.inter_prob > 1.0)
        throw PreconditionError("invalid block-model parameters");
    std::vector<int> labels;
    for (std::size_t b = 0; b < cfg.block_sizes.size(); ++b) {
        if (cfg.block_sizes[b] < 0) throw PreconditionError("negative block size");
        labels.insert(labels.end(), static_cast<std::size_t>(cfg.block_sizes[b]),
                      static_cast<int>(b));
    }
    const auto n = static_cast<NodeId>(labels.size());
    const int classes = static_cast<int>(cfg.block_sizes.size());

    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<std::pair<NodeId, NodeId>> edges;
    for (NodeId u = 0; u < n; ++u) {
        for (NodeId v = u + 1; v < n; ++v) {
            const double p = labels[static_cast<std::size_t>(u)] ==
                                     labels[static_cast<std::size_t>(v)]
                                 ? cfg.intra_prob
                                 : cfg.inter_prob;
            if (unit(rng) < p) edges.emplace_back(u, v);
        }
    }
    Matrix x = cfg.binary_features
                   ? detail::binary_class_features(labels, classes, cfg.feature_dim,
                                                   cfg.binary_on_prob, cfg.binary_off_prob, rng)
                   : detail::gaussian_class_features(labels, classes, cfg.feature_dim,
                                                     cfg.feature_separation, rng);
    return SparseGraph::from_edges(n, edges, std::move(x), std::move(labels));
}

/// Samples disjoint train/valid/test splits over the labeled nodes
/// (test takes the remainder). Proportions are of the labeled population.
inline SplitSet make_splits(const SparseGraph& g, double train_frac, double valid_frac,
                            std::uint64_t seed) {
    if (train_frac < 0.0 || valid_frac < 0.0 || train_frac + valid_frac > 1.0)
        throw PreconditionError("split fractions must be nonnegative and sum to at most 1");
    std::vector<NodeId> labeled;
    for (NodeId u = 0; u < g.num_nodes(); ++u)
        if (g.label(u) != kUnlabeled) labeled.push_back(u);

    std::mt19937_64 rng(seed);
    const auto m = static_cast<NodeId>(labeled.size());
    auto order = sample_without_replacement(m, m, rng);
    const auto n_train = static_cast<NodeId>(std::llround(train_frac * m));
    const auto n_valid = static_cast<NodeId>(std::llround(valid_frac * m));

    SplitSet s;
    for (NodeId i = 0; i < m; ++i) {
        const NodeId node = labeled[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
        if (i < n_train)
            s.train.push_back(node);
        else if (i < n_train + n_valid)
            s.valid.push_back(node);
        else
            s.test.push_back(node);
    }
    s.validate(g);
    return s;
}

}  // namespace guard
