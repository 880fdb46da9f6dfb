#pragma once

#include <guard/models.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <set>
#include <utility>
#include <vector>

namespace guard {

// The attack works on the surrogate's one-hop collapsed view
//   Z = softmax(Â W̄),  W̄ = X_t W  (the `collapsed` table),
// whose targeted loss L_u = -ln Z[u, y] depends on one Â row only. Both
// the closed form and the finite difference below differentiate exactly
// this function in the symmetric direction (u,v),(v,u), so they must agree
// to discretization error.
//
// With d~ = degree + 1 and ĝ[j] = Σ_c Z[u,c] W̄[j,c] - W̄[j,y]:
//
//   ∂L/∂A[u,v] = ĝ[v] (1 - A[u,v] (1/d~u + 1/d~v) / 2) / sqrt(d~u d~v)
//              - 1/2 d~u^{-3/2} Σ_{j∈N(u), j≠v} ĝ[j] / sqrt(d~j)
//              - ĝ[u] / d~u²
//
// The second and third terms do not depend on v for non-neighbors, so
// ranking candidate injections only needs ĝ[v] / sqrt(d~v); the 1/sqrt(d~v)
// factor is what steers the attack toward low-degree endpoints.

struct AttackBudget {
    NodeId target = 0;
    int delta = -1;  // flip budget; -1 means degree(target), floored at 1
    bool allow_removal = false;
};

struct CandidateGradient {
    NodeId node = 0;
    double gradient = 0.0;
};

struct EdgeGradient {
    NodeId target = 0;
    int label_used = kUnlabeled;
    std::vector<double> ghat;  // ĝ[j] for every node j
    double constant_term = 0.0;  // shared additive part of injection gradients
    // injection candidates (v ∉ N(u), v ≠ u), most damaging first
    std::vector<CandidateGradient> additions;
    // removal candidates (k ∈ N(u)), most damaging removal first, i.e.
    // ascending derivative: removing an edge changes the loss by about
    // minus its derivative
    std::vector<CandidateGradient> removals;
};

namespace detail {

/// Label the targeted loss is built on: the node's label, or the
/// surrogate's own one-hop prediction when unlabeled.
inline int attack_label(const LinearSurrogate& model, const SparseGraph& g, NodeId u);

/// One-hop probability row softmax(Â W̄)[u] computed from the target's
/// neighborhood alone.
inline Eigen::RowVectorXd one_hop_probabilities(const Matrix& collapsed, const SparseGraph& g,
                                                NodeId u) {
    const double du = static_cast<double>(g.degree(u)) + 1.0;
    Eigen::RowVectorXd logits = collapsed.row(u) / du;
    for (NodeId j : g.neighbors(u)) {
        const double dj = static_cast<double>(g.degree(j)) + 1.0;
        logits += collapsed.row(j) / std::sqrt(du * dj);
    }
    const double m = logits.maxCoeff();
    Eigen::ArrayXd e = (logits.transpose().array() - m).exp();
    return (e / e.sum()).matrix().transpose();
}

inline double one_hop_targeted_loss(const Matrix& collapsed, const SparseGraph& g, NodeId u,
                                    int y) {
    const double du = static_cast<double>(g.degree(u)) + 1.0;
    Eigen::RowVectorXd logits = collapsed.row(u) / du;
    for (NodeId j : g.neighbors(u)) {
        const double dj = static_cast<double>(g.degree(j)) + 1.0;
        logits += collapsed.row(j) / std::sqrt(du * dj);
    }
    const double m = logits.maxCoeff();
    const double lse = m + std::log((logits.transpose().array() - m).exp().sum());
    return lse - logits(y);
}

struct GhatRow {
    Eigen::VectorXd ghat;     // N
    double constant = 0.0;    // - Σ_{j∈N(u)} ĝ[j] / (2 d~u^{3/2} sqrt(d~j)) - ĝ[u]/d~u²
    double du = 0.0;          // d~u
};

inline GhatRow ghat_row(const Matrix& collapsed, const SparseGraph& g, NodeId u, int y) {
    GhatRow out;
    const Eigen::RowVectorXd z = one_hop_probabilities(collapsed, g, u);
    out.ghat = collapsed * z.transpose() - collapsed.col(y);
    out.du = static_cast<double>(g.degree(u)) + 1.0;
    double acc = 0.0;
    for (NodeId j : g.neighbors(u)) {
        const double dj = static_cast<double>(g.degree(j)) + 1.0;
        acc += out.ghat(j) / std::sqrt(dj);
    }
    out.constant = -0.5 * acc / (out.du * std::sqrt(out.du)) - out.ghat(u) / (out.du * out.du);
    return out;
}

inline double injection_gradient(const GhatRow& row, const SparseGraph& g, NodeId v) {
    const double dv = static_cast<double>(g.degree(v)) + 1.0;
    return row.ghat(v) / std::sqrt(row.du * dv) + row.constant;
}

inline double removal_gradient(const GhatRow& row, const SparseGraph& g, NodeId k) {
    // derivative at weight 1; the Σ in the closed form excludes k, which
    // folds into the (1 - 1/(2 d~k)) factor against the shared constant
    const double dk = static_cast<double>(g.degree(k)) + 1.0;
    return row.ghat(k) * (1.0 - 0.5 / dk) / std::sqrt(row.du * dk) + row.constant;
}

inline int attack_label(const LinearSurrogate& model, const SparseGraph& g, NodeId u) {
    if (g.label(u) != kUnlabeled) return g.label(u);
    const Eigen::RowVectorXd z = one_hop_probabilities(model.collapsed_for(g), g, u);
    Eigen::Index c = 0;
    z.maxCoeff(&c);
    return static_cast<int>(c);
}

inline void check_target(const SparseGraph& g, NodeId u) {
    if (u < 0 || u >= g.num_nodes())
        throw PreconditionError("target node " + std::to_string(u) + " outside the graph");
}

}  // namespace detail

/// Exact derivative of the one-hop targeted loss for every candidate edge
/// at `target`, plus removal derivatives for its current edges.
inline EdgeGradient closed_form_gradient(const LinearSurrogate& model, const SparseGraph& g,
                                         NodeId target) {
    detail::check_target(g, target);
    const Matrix collapsed = model.collapsed_for(g);
    EdgeGradient out;
    out.target = target;
    out.label_used = detail::attack_label(model, g, target);
    const auto row = detail::ghat_row(collapsed, g, target, out.label_used);
    out.constant_term = row.constant;
    out.ghat.assign(row.ghat.data(), row.ghat.data() + row.ghat.size());

    out.additions.reserve(static_cast<std::size_t>(g.num_nodes()));
    for (NodeId v = 0; v < g.num_nodes(); ++v) {
        if (v == target || g.has_edge(target, v)) continue;
        out.additions.push_back({v, detail::injection_gradient(row, g, v)});
    }
    std::sort(out.additions.begin(), out.additions.end(), [](const auto& a, const auto& b) {
        return a.gradient != b.gradient ? a.gradient > b.gradient : a.node < b.node;
    });

    for (NodeId k : g.neighbors(target))
        out.removals.push_back({k, detail::removal_gradient(row, g, k)});
    std::sort(out.removals.begin(), out.removals.end(), [](const auto& a, const auto& b) {
        return a.gradient != b.gradient ? a.gradient < b.gradient : a.node < b.node;
    });
    return out;
}

/// Central finite difference of the same targeted loss: the edge weight
/// A[u,v] = A[v,u] is shifted by ±eps and the degree terms are re-derived
/// from the perturbed real-valued adjacency. Works for absent edges
/// (derivative at 0) and present ones (derivative at 1).
inline double finite_difference_gradient(const LinearSurrogate& model, const SparseGraph& g,
                                         NodeId u, NodeId v, double eps = 1e-5) {
    detail::check_target(g, u);
    detail::check_target(g, v);
    if (u == v) throw PreconditionError("edge gradients are defined for distinct endpoints");
    if (eps <= 0.0) throw PreconditionError("eps must be positive");
    const Matrix collapsed = model.collapsed_for(g);
    const int y = detail::attack_label(model, g, u);
    const double base_w = g.has_edge(u, v) ? 1.0 : 0.0;

    auto loss_at = [&](double t) {
        // perturbed row of Â: degrees of u and v gain t, the (u,v) weight
        // becomes base_w + t, everything else keeps its 0/1 weight
        const double du = static_cast<double>(g.degree(u)) + 1.0 + t;
        Eigen::RowVectorXd logits = collapsed.row(u) / du;
        for (NodeId j : g.neighbors(u)) {
            if (j == v) continue;
            const double dj = static_cast<double>(g.degree(j)) + 1.0;
            logits += collapsed.row(j) / std::sqrt(du * dj);
        }
        const double dv = static_cast<double>(g.degree(v)) + 1.0 + t;
        logits += (base_w + t) * collapsed.row(v) / std::sqrt(du * dv);
        const double m = logits.maxCoeff();
        const double lse = m + std::log((logits.transpose().array() - m).exp().sum());
        return lse - logits(y);
    };
    return (loss_at(eps) - loss_at(-eps)) / (2.0 * eps);
}

struct AttackResult {
    NodeId target = 0;
    int label_used = kUnlabeled;
    std::vector<std::pair<NodeId, NodeId>> injected;
    std::vector<std::pair<NodeId, NodeId>> removed;
    SparseGraph perturbed;
    int pre_class = -1;
    int post_class = -1;
    double pre_prob = 0.0;   // one-hop probability of label_used, clean graph
    double post_prob = 0.0;  // same, perturbed graph
    std::vector<double> loss_trace;  // targeted one-hop loss, entry 0 = clean
};

/// Greedy budgeted attack: each round recomputes the gradient on the
/// current graph and applies the best-scoring flip (highest predicted loss
/// increase; ties prefer injections, then the smallest node index). Stops
/// early when no candidate predicts an increase. Each unordered pair flips
/// at most once per attack.
inline AttackResult greedy_attack(const LinearSurrogate& model, const SparseGraph& g,
                                  const AttackBudget& budget) {
    detail::check_target(g, budget.target);
    const NodeId u = budget.target;
    const Matrix collapsed = model.collapsed_for(g);

    AttackResult out;
    out.target = u;
    out.label_used = detail::attack_label(model, g, u);
    const int delta = budget.delta >= 0 ? budget.delta : std::max(1, g.degree(u));

    {
        const auto z = detail::one_hop_probabilities(collapsed, g, u);
        Eigen::Index c = 0;
        z.maxCoeff(&c);
        out.pre_class = static_cast<int>(c);
        out.pre_prob = z(out.label_used);
    }
    out.loss_trace.push_back(detail::one_hop_targeted_loss(collapsed, g, u, out.label_used));

    SparseGraph current = g;
    std::set<NodeId> touched;  // other endpoints already flipped with u
    for (int round = 0; round < delta; ++round) {
        const auto row = detail::ghat_row(collapsed, current, u, out.label_used);

        NodeId best_node = -1;
        double best_gain = 0.0;
        bool best_is_add = true;
        for (NodeId v = 0; v < current.num_nodes(); ++v) {
            if (v == u || current.has_edge(u, v) || touched.count(v)) continue;
            const double gain = detail::injection_gradient(row, current, v);
            if (gain > best_gain) {
                best_gain = gain;
                best_node = v;
                best_is_add = true;
            }
        }
        if (budget.allow_removal) {
            for (NodeId k : current.neighbors(u)) {
                if (touched.count(k)) continue;
                const double gain = -detail::removal_gradient(row, current, k);
                if (gain > best_gain) {
                    best_gain = gain;
                    best_node = k;
                    best_is_add = false;
                }
            }
        }
        if (best_node < 0) break;  // no flip predicts damage

        current = flip_edges(current, {{u, best_node, best_is_add}});
        touched.insert(best_node);
        if (best_is_add)
            out.injected.emplace_back(u, best_node);
        else
            out.removed.emplace_back(u, best_node);
        out.loss_trace.push_back(
            detail::one_hop_targeted_loss(collapsed, current, u, out.label_used));
    }

    {
        const auto z = detail::one_hop_probabilities(collapsed, current, u);
        Eigen::Index c = 0;
        z.maxCoeff(&c);
        out.post_class = static_cast<int>(c);
        out.post_prob = z(out.label_used);
    }
    out.perturbed = std::move(current);
    return out;
}

inline nlohmann::ordered_json attack_result_json(const AttackResult& r) {
    nlohmann::ordered_json j;
    j["target"] = r.target;
    j["label"] = r.label_used;
    j["injected"] = r.injected;
    j["removed"] = r.removed;
    j["pre_class"] = r.pre_class;
    j["post_class"] = r.post_class;
    j["pre_prob"] = r.pre_prob;
    j["post_prob"] = r.post_prob;
    return j;
}

struct CensusEntry {
    NodeId node = 0;
    std::int64_t count = 0;
};

/// Aggregate view of which non-target endpoints the attacks injected.
struct CensusReport {
    std::vector<CensusEntry> frequency;  // descending count, ascending node
    std::int64_t total_injections = 0;
    std::vector<NodeId> unique_attackers;          // ascending
    std::vector<std::pair<int, int>> degree_histogram;  // clean degree → unique attackers

    /// Share of all injections contributed by the k most frequent nodes.
    double top_mass(int k) const {
        if (total_injections == 0) return 0.0;
        std::int64_t acc = 0;
        const auto limit = std::min<std::size_t>(frequency.size(), static_cast<std::size_t>(std::max(0, k)));
        for (std::size_t i = 0; i < limit; ++i) acc += frequency[i].count;
        return static_cast<double>(acc) / static_cast<double>(total_injections);
    }

    /// Fraction of unique attacker nodes with clean degree ≤ dmax.
    double attacker_low_degree_rate(int dmax) const {
        if (unique_attackers.empty()) return 0.0;
        std::int64_t low = 0;
        for (const auto& [deg, cnt] : degree_histogram)
            if (deg <= dmax) low += cnt;
        return static_cast<double>(low) / static_cast<double>(unique_attackers.size());
    }
};

/// Fraction of all nodes with degree ≤ dmax (the base rate the attacker
/// histogram is compared against).
inline double low_degree_rate(const SparseGraph& g, int dmax) {
    if (g.num_nodes() == 0) return 0.0;
    std::int64_t low = 0;
    for (NodeId u = 0; u < g.num_nodes(); ++u)
        if (g.degree(u) <= dmax) ++low;
    return static_cast<double>(low) / static_cast<double>(g.num_nodes());
}

/// Builds the report from a per-node injection count vector sized to the
/// clean graph. Degrees are measured on the clean graph.
inline CensusReport census_from_counts(std::span<const std::int64_t> counts,
                                       const SparseGraph& clean) {
    if (std::cmp_not_equal(counts.size(), clean.num_nodes()))
        throw PreconditionError("census counts must cover every node of the clean graph");
    CensusReport out;
    for (NodeId v = 0; v < clean.num_nodes(); ++v)
        if (counts[static_cast<std::size_t>(v)] > 0) {
            out.total_injections += counts[static_cast<std::size_t>(v)];
            out.frequency.push_back({v, counts[static_cast<std::size_t>(v)]});
            out.unique_attackers.push_back(v);
        }
    std::sort(out.frequency.begin(), out.frequency.end(), [](const auto& a, const auto& b) {
        return a.count != b.count ? a.count > b.count : a.node < b.node;
    });
    std::vector<std::pair<int, int>> hist;
    for (NodeId v : out.unique_attackers) {
        const int d = clean.degree(v);
        auto it = std::find_if(hist.begin(), hist.end(),
                               [d](const auto& p) { return p.first == d; });
        if (it == hist.end())
            hist.emplace_back(d, 1);
        else
            ++it->second;
    }
    std::sort(hist.begin(), hist.end());
    out.degree_histogram = std::move(hist);
    return out;
}

/// Counts, per node, how often it was chosen as the non-target endpoint of
/// an injected edge.
inline CensusReport attack_census(std::span<const AttackResult> results,
                                  const SparseGraph& clean) {
    std::vector<std::int64_t> counts(static_cast<std::size_t>(clean.num_nodes()), 0);
    for (const auto& r : results)
        for (const auto& [t, v] : r.injected) {
            if (v < 0 || v >= clean.num_nodes())
                throw PreconditionError("census saw an endpoint outside the clean graph");
            ++counts[static_cast<std::size_t>(v)];
        }
    return census_from_counts(counts, clean);
}

}  // namespace guard
