#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace guard {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using NodeId = std::int32_t;

/// Class index used for nodes without a label.
inline constexpr int kUnlabeled = -1;

/// Thrown when input data (files, matrices, index lists) is inconsistent.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Thrown when an operation's stated precondition is violated by the caller.
class PreconditionError : public std::logic_error {
public:
    explicit PreconditionError(const std::string& msg) : std::logic_error(msg) {}
};

/// Thrown when user-supplied configuration is invalid.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct EdgeFlip {
    NodeId u = 0;
    NodeId v = 0;
    bool add = true;  // false = remove
};

/// Immutable undirected graph: 0/1 adjacency in CSR form, dense node
/// features, per-node class labels and cached degrees.
///
/// The adjacency is always symmetric with a zero diagonal; degrees count
/// neighbors without self-loops. Feature and label buffers are shared
/// between structurally-edited copies, so copies are cheap.
class SparseGraph {
public:
    SparseGraph() = default;

    /// Builds a graph from an (possibly directed, possibly duplicated) edge
    /// list. Edges are symmetrized and de-duplicated; self-loops dropped.
    /// `features` must have `num_nodes` rows and `labels` must have
    /// `num_nodes` entries (kUnlabeled for unlabeled nodes).
    static SparseGraph from_edges(NodeId num_nodes,
                                  const std::vector<std::pair<NodeId, NodeId>>& edges,
                                  Matrix features,
                                  std::vector<int> labels) {
        if (num_nodes < 0) throw DataError("negative node count");
        if (features.rows() != num_nodes)
            throw DataError("feature matrix has " + std::to_string(features.rows()) +
                            " rows, expected " + std::to_string(num_nodes));
        if (static_cast<NodeId>(labels.size()) != num_nodes)
            throw DataError("label vector has " + std::to_string(labels.size()) +
                            " entries, expected " + std::to_string(num_nodes));

        std::vector<std::vector<NodeId>> adj(static_cast<std::size_t>(num_nodes));
        for (const auto& [a, b] : edges) {
            if (a < 0 || a >= num_nodes || b < 0 || b >= num_nodes)
                throw DataError("edge (" + std::to_string(a) + "," + std::to_string(b) +
                                ") references a node outside [0," + std::to_string(num_nodes) + ")");
            if (a == b) continue;  // self-loops live only in the normalized operator
            adj[static_cast<std::size_t>(a)].push_back(b);
            adj[static_cast<std::size_t>(b)].push_back(a);
        }
        for (auto& row : adj) {
            std::sort(row.begin(), row.end());
            row.erase(std::unique(row.begin(), row.end()), row.end());
        }
        return from_adjacency_lists(num_nodes, adj,
                                    std::make_shared<const Matrix>(std::move(features)),
                                    std::make_shared<const std::vector<int>>(std::move(labels)));
    }

    NodeId num_nodes() const { return num_nodes_; }

    /// Number of undirected edges (each pair counted once).
    std::int64_t num_edges() const { return num_edges_; }

    int degree(NodeId u) const { return degrees_[static_cast<std::size_t>(u)]; }
    const std::vector<int>& degrees() const { return degrees_; }

    std::span<const NodeId> neighbors(NodeId u) const {
        const auto begin = row_offsets_[static_cast<std::size_t>(u)];
        const auto end = row_offsets_[static_cast<std::size_t>(u) + 1];
        return {column_indices_.data() + begin, static_cast<std::size_t>(end - begin)};
    }

    bool has_edge(NodeId u, NodeId v) const {
        const auto row = neighbors(u);
        return std::binary_search(row.begin(), row.end(), v);
    }

    const Matrix& features() const { return *features_; }
    std::shared_ptr<const Matrix> features_ptr() const { return features_; }

    const std::vector<int>& labels() const { return *labels_; }
    int label(NodeId u) const { return (*labels_)[static_cast<std::size_t>(u)]; }

    /// Largest label + 1; zero when no node is labeled.
    int num_classes() const { return num_classes_; }

    const std::vector<std::int64_t>& row_offsets() const { return row_offsets_; }
    const std::vector<NodeId>& column_indices() const { return column_indices_; }

    /// Replaces the feature matrix (same row count) on a structural copy.
    SparseGraph with_features(Matrix features) const {
        if (features.rows() != num_nodes_) throw DataError("feature row count mismatch");
        SparseGraph g = *this;
        g.features_ = std::make_shared<const Matrix>(std::move(features));
        return g;
    }

    friend SparseGraph flip_edges(const SparseGraph& g, const std::vector<EdgeFlip>& flips);

private:
    static SparseGraph from_adjacency_lists(NodeId num_nodes,
                                            const std::vector<std::vector<NodeId>>& adj,
                                            std::shared_ptr<const Matrix> features,
                                            std::shared_ptr<const std::vector<int>> labels) {
        SparseGraph g;
        g.num_nodes_ = num_nodes;
        g.features_ = std::move(features);
        g.labels_ = std::move(labels);
        g.row_offsets_.assign(static_cast<std::size_t>(num_nodes) + 1, 0);
        g.degrees_.assign(static_cast<std::size_t>(num_nodes), 0);
        std::int64_t nnz = 0;
        for (NodeId u = 0; u < num_nodes; ++u) {
            const auto& row = adj[static_cast<std::size_t>(u)];
            g.degrees_[static_cast<std::size_t>(u)] = static_cast<int>(row.size());
            nnz += static_cast<std::int64_t>(row.size());
            g.row_offsets_[static_cast<std::size_t>(u) + 1] = nnz;
        }
        g.column_indices_.reserve(static_cast<std::size_t>(nnz));
        for (const auto& row : adj)
            g.column_indices_.insert(g.column_indices_.end(), row.begin(), row.end());
        g.num_edges_ = nnz / 2;
        int max_label = -1;
        for (int y : *g.labels_) {
            if (y < kUnlabeled) throw DataError("label below the unlabeled sentinel");
            max_label = std::max(max_label, y);
        }
        g.num_classes_ = max_label + 1;
        return g;
    }

    NodeId num_nodes_ = 0;
    std::int64_t num_edges_ = 0;
    std::vector<std::int64_t> row_offsets_;
    std::vector<NodeId> column_indices_;
    std::vector<int> degrees_;
    std::shared_ptr<const Matrix> features_;
    std::shared_ptr<const std::vector<int>> labels_;
    int num_classes_ = 0;
};

/// True when both graphs have identical node count and adjacency structure.
inline bool structurally_equal(const SparseGraph& a, const SparseGraph& b) {
    return a.num_nodes() == b.num_nodes() && a.row_offsets() == b.row_offsets() &&
           a.column_indices() == b.column_indices();
}

/// Applies a sequence of symmetric edge insertions/removals and returns a
/// fresh graph; the input is untouched. Flips are validated against the
/// in-progress state, in order: adding a present edge or removing an absent
/// one is a precondition error, as is u == v.
inline SparseGraph flip_edges(const SparseGraph& g, const std::vector<EdgeFlip>& flips) {
    std::vector<std::vector<NodeId>> adj(static_cast<std::size_t>(g.num_nodes()));
    for (NodeId u = 0; u < g.num_nodes(); ++u) {
        const auto row = g.neighbors(u);
        adj[static_cast<std::size_t>(u)].assign(row.begin(), row.end());
    }
    auto insert_sorted = [](std::vector<NodeId>& row, NodeId v) {
        row.insert(std::lower_bound(row.begin(), row.end(), v), v);
    };
    auto erase_sorted = [](std::vector<NodeId>& row, NodeId v) {
        row.erase(std::lower_bound(row.begin(), row.end(), v));
    };
    for (const auto& flip : flips) {
        if (flip.u == flip.v)
            throw PreconditionError("flip touches a self-loop at node " + std::to_string(flip.u));
        if (flip.u < 0 || flip.u >= g.num_nodes() || flip.v < 0 || flip.v >= g.num_nodes())
            throw PreconditionError("flip endpoint outside the graph");
        auto& row_u = adj[static_cast<std::size_t>(flip.u)];
        auto& row_v = adj[static_cast<std::size_t>(flip.v)];
        const bool present = std::binary_search(row_u.begin(), row_u.end(), flip.v);
        if (flip.add && present)
            throw PreconditionError("adding existing edge (" + std::to_string(flip.u) + "," +
                                    std::to_string(flip.v) + ")");
        if (!flip.add && !present)
            throw PreconditionError("removing absent edge (" + std::to_string(flip.u) + "," +
                                    std::to_string(flip.v) + ")");
        if (flip.add) {
            insert_sorted(row_u, flip.v);
            insert_sorted(row_v, flip.u);
        } else {
            erase_sorted(row_u, flip.v);
            erase_sorted(row_v, flip.u);
        }
    }
    return SparseGraph::from_adjacency_lists(g.num_nodes(), adj, g.features_, g.labels_);
}

/// Train/validation/test node sets plus the labeled subset used for
/// influence averaging. Stored sorted ascending and validated as pairwise
/// disjoint (primary sets) with sub ⊆ train.
struct SplitSet {
    std::vector<NodeId> train;
    std::vector<NodeId> valid;
    std::vector<NodeId> test;
    std::vector<NodeId> sub;  // defaults to train when empty at validate()

    void validate(const SparseGraph& g) {
        auto canonicalize = [&](std::vector<NodeId>& set, const char* name) {
            std::sort(set.begin(), set.end());
            set.erase(std::unique(set.begin(), set.end()), set.end());
            for (NodeId v : set)
                if (v < 0 || v >= g.num_nodes())
                    throw DataError(std::string(name) + " split references node " +
                                    std::to_string(v) + " outside the graph");
        };
        canonicalize(train, "train");
        canonicalize(valid, "valid");
        canonicalize(test, "test");
        if (sub.empty()) sub = train;
        canonicalize(sub, "sub");
        auto disjoint = [](const std::vector<NodeId>& a, const std::vector<NodeId>& b) {
            std::vector<NodeId> inter;
            std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(inter));
            return inter.empty();
        };
        if (!disjoint(train, valid) || !disjoint(train, test) || !disjoint(valid, test))
            throw DataError("train/valid/test splits overlap");
        if (!std::includes(train.begin(), train.end(), sub.begin(), sub.end()))
            throw DataError("sub split is not a subset of train");
    }
};

/// Degree-normalized adjacency with self-loops: entries
/// A~[u,v] / sqrt(d~[u] d~[v]) with A~ = A + I and d~ = degree + 1,
/// stored in CSR form. Symmetric, entries in (0,1], row u holds
/// degree(u)+1 nonzeros.
class NormalizedOperator {
public:
    static NormalizedOperator build(const SparseGraph& g) {
        NormalizedOperator op;
        const NodeId n = g.num_nodes();
        op.num_nodes_ = n;
        op.dtilde_.resize(static_cast<std::size_t>(n));
        for (NodeId u = 0; u < n; ++u)
            op.dtilde_[static_cast<std::size_t>(u)] = static_cast<double>(g.degree(u)) + 1.0;

        op.row_offsets_.assign(static_cast<std::size_t>(n) + 1, 0);
        std::int64_t nnz = 0;
        for (NodeId u = 0; u < n; ++u) {
            nnz += g.degree(u) + 1;  // neighbors plus the self-loop
            op.row_offsets_[static_cast<std::size_t>(u) + 1] = nnz;
        }
        op.column_indices_.reserve(static_cast<std::size_t>(nnz));
        op.values_.reserve(static_cast<std::size_t>(nnz));
        for (NodeId u = 0; u < n; ++u) {
            const double du = op.dtilde_[static_cast<std::size_t>(u)];
            bool self_emitted = false;
            for (NodeId v : g.neighbors(u)) {
                if (!self_emitted && v > u) {
                    op.column_indices_.push_back(u);
                    op.values_.push_back(1.0 / du);
                    self_emitted = true;
                }
                op.column_indices_.push_back(v);
                op.values_.push_back(1.0 / std::sqrt(du * op.dtilde_[static_cast<std::size_t>(v)]));
            }
            if (!self_emitted) {
                op.column_indices_.push_back(u);
                op.values_.push_back(1.0 / du);
            }
        }
        return op;
    }

    NodeId num_nodes() const { return num_nodes_; }

    std::span<const NodeId> row_indices(NodeId u) const {
        const auto begin = row_offsets_[static_cast<std::size_t>(u)];
        const auto end = row_offsets_[static_cast<std::size_t>(u) + 1];
        return {column_indices_.data() + begin, static_cast<std::size_t>(end - begin)};
    }

    std::span<const double> row_values(NodeId u) const {
        const auto begin = row_offsets_[static_cast<std::size_t>(u)];
        const auto end = row_offsets_[static_cast<std::size_t>(u) + 1];
        return {values_.data() + begin, static_cast<std::size_t>(end - begin)};
    }

    /// Self-loop degrees d~ = degree + 1, as reals.
    const std::vector<double>& self_loop_degrees() const { return dtilde_; }

    const std::vector<std::int64_t>& row_offsets() const { return row_offsets_; }
    const std::vector<NodeId>& column_indices() const { return column_indices_; }
    const std::vector<double>& values() const { return values_; }

    /// Sparse-dense product: returns Â · x.
    Matrix apply(const Matrix& x) const {
        if (x.rows() != num_nodes_) throw PreconditionError("operand row count mismatch");
        Matrix out = Matrix::Zero(x.rows(), x.cols());
        for (NodeId u = 0; u < num_nodes_; ++u) {
            const auto idx = row_indices(u);
            const auto val = row_values(u);
            for (std::size_t t = 0; t < idx.size(); ++t)
                out.row(u) += val[t] * x.row(idx[t]);
        }
        return out;
    }

private:
    NodeId num_nodes_ = 0;
    std::vector<std::int64_t> row_offsets_;
    std::vector<NodeId> column_indices_;
    std::vector<double> values_;
    std::vector<double> dtilde_;
};

inline NormalizedOperator normalized_operator(const SparseGraph& g) {
    return NormalizedOperator::build(g);
}

}  // namespace guard
