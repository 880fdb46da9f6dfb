#pragma once

// Dense reference implementations used only by tests. Everything here goes
// through full dense matrices and elementary loops, deliberately avoiding
// the library's sparse code paths, so agreement between the two is evidence
// rather than tautology.

#include <guard/graph.hpp>

#include <cmath>
#include <utility>
#include <vector>

namespace oracle {

using guard::Matrix;
using guard::NodeId;
using guard::SparseGraph;

inline Matrix dense_adjacency(const SparseGraph& g) {
    Matrix a = Matrix::Zero(g.num_nodes(), g.num_nodes());
    for (NodeId u = 0; u < g.num_nodes(); ++u)
        for (NodeId v : g.neighbors(u)) a(u, v) = 1.0;
    return a;
}

// D~^{-1/2} (A + I) D~^{-1/2} with D~ built from real-valued row sums of
// A + I. Works for fractional adjacencies, which the finite-difference
// probes rely on.
inline Matrix dense_normalized(const Matrix& a) {
    const Eigen::Index n = a.rows();
    Matrix at = a + Matrix::Identity(n, n);
    Eigen::VectorXd dt = at.rowwise().sum();
    Matrix out(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            out(i, j) = at(i, j) / std::sqrt(dt(i) * dt(j));
    return out;
}

inline Matrix row_softmax(Matrix logits) {
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const double m = logits.row(i).maxCoeff();
        Eigen::ArrayXd e = (logits.row(i).array() - m).exp();
        logits.row(i) = (e / e.sum()).matrix();
    }
    return logits;
}

// Probabilities of the propagated linear model: softmax(A_hat^hops X W).
inline Matrix dense_linear_probabilities(const Matrix& adjacency, const Matrix& x,
                                         const Matrix& w, int hops) {
    const Matrix a_hat = dense_normalized(adjacency);
    Matrix s = x;
    for (int h = 0; h < hops; ++h) s = a_hat * s;
    return row_softmax(s * w);
}

// Mean cross-entropy over `train` plus 0.5 * wd * ||W||_F^2.
inline double dense_linear_loss(const Matrix& adjacency, const Matrix& x, const Matrix& w,
                                int hops, const std::vector<int>& labels,
                                const std::vector<NodeId>& train, double weight_decay) {
    const Matrix p = dense_linear_probabilities(adjacency, x, w, hops);
    double loss = 0.0;
    for (NodeId u : train) loss -= std::log(p(u, labels[static_cast<std::size_t>(u)]));
    loss /= static_cast<double>(train.size());
    return loss + 0.5 * weight_decay * w.squaredNorm();
}

// Two-layer graph convolution: softmax(A_hat relu(A_hat X W0) W1).
inline Matrix dense_gcn_probabilities(const Matrix& adjacency, const Matrix& x, const Matrix& w0,
                                      const Matrix& w1) {
    const Matrix a_hat = dense_normalized(adjacency);
    Matrix h = (a_hat * x * w0).cwiseMax(0.0);
    return row_softmax(a_hat * h * w1);
}

inline double dense_gcn_loss(const Matrix& adjacency, const Matrix& x, const Matrix& w0,
                             const Matrix& w1, const std::vector<int>& labels,
                             const std::vector<NodeId>& train, double weight_decay) {
    const Matrix p = dense_gcn_probabilities(adjacency, x, w0, w1);
    double loss = 0.0;
    for (NodeId u : train) loss -= std::log(p(u, labels[static_cast<std::size_t>(u)]));
    loss /= static_cast<double>(train.size());
    return loss + 0.5 * weight_decay * (w0.squaredNorm() + w1.squaredNorm());
}

// Targeted loss of the one-hop collapsed model on a real-valued adjacency:
// -ln softmax(dense_normalized(A) collapsed)_{u, y}. This is the function
// whose edge derivative the attack's closed form claims to compute.
inline double dense_one_hop_targeted_loss(const Matrix& adjacency, const Matrix& collapsed,
                                          NodeId u, int y) {
    const Matrix a_hat = dense_normalized(adjacency);
    const Matrix p = row_softmax(a_hat * collapsed);
    return -std::log(p(u, y));
}

// Central finite difference of the targeted loss in the symmetric edge
// direction (u,v),(v,u), evaluated on the full dense path.
inline double dense_fd_edge_gradient(const SparseGraph& g, const Matrix& collapsed, NodeId u,
                                     NodeId v, int y, double eps) {
    Matrix a = dense_adjacency(g);
    Matrix plus = a, minus = a;
    plus(u, v) += eps;
    plus(v, u) += eps;
    minus(u, v) -= eps;
    minus(v, u) -= eps;
    return (dense_one_hop_targeted_loss(plus, collapsed, u, y) -
            dense_one_hop_targeted_loss(minus, collapsed, u, y)) /
           (2.0 * eps);
}

// --- tiny named fixtures ---------------------------------------------------

inline SparseGraph path_graph(NodeId n, int feature_dim = 2) {
    std::vector<std::pair<NodeId, NodeId>> edges;
    for (NodeId u = 0; u + 1 < n; ++u) edges.emplace_back(u, u + 1);
    Matrix x = Matrix::Identity(n, feature_dim > n ? feature_dim : n)
                   .leftCols(feature_dim)
                   .eval();
    std::vector<int> labels(static_cast<std::size_t>(n), 0);
    return SparseGraph::from_edges(n, edges, std::move(x), std::move(labels));
}

inline SparseGraph cycle_graph(NodeId n, int feature_dim = 2) {
    std::vector<std::pair<NodeId, NodeId>> edges;
    for (NodeId u = 0; u < n; ++u) edges.emplace_back(u, (u + 1) % n);
    Matrix x = Matrix::Ones(n, feature_dim);
    std::vector<int> labels(static_cast<std::size_t>(n), 0);
    return SparseGraph::from_edges(n, edges, std::move(x), std::move(labels));
}

inline SparseGraph star_graph(NodeId leaves, int feature_dim = 2) {
    std::vector<std::pair<NodeId, NodeId>> edges;
    for (NodeId u = 1; u <= leaves; ++u) edges.emplace_back(0, u);
    const NodeId n = leaves + 1;
    Matrix x = Matrix::Ones(n, feature_dim);
    std::vector<int> labels(static_cast<std::size_t>(n), 0);
    return SparseGraph::from_edges(n, edges, std::move(x), std::move(labels));
}

}  // namespace oracle
