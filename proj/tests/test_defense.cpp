#include <guard/attack.hpp>
#include <guard/defense.hpp>
#include <guard/synthetic.hpp>

#include "oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <set>

using namespace guard;

namespace {

struct Fixture {
    SparseGraph graph;
    SplitSet splits;
    LinearSurrogate model;
};

Fixture trained_fixture(std::uint64_t seed = 51, NodeId nodes = 40) {
    Fixture f;
    StochasticBlockConfig cfg;
    cfg.block_sizes = {nodes / 2, nodes / 2};
    cfg.intra_prob = 0.2;
    cfg.inter_prob = 0.03;
    cfg.feature_dim = 6;
    cfg.feature_separation = 2.0;
    cfg.seed = seed;
    f.graph = stochastic_block(cfg);
    f.splits = make_splits(f.graph, 0.4, 0.2, seed + 1);
    TrainingConfig tc;
    tc.learning_rate = 0.4;
    tc.epochs = 80;
    tc.seed = seed + 2;
    f.model = train_linear_surrogate(f.graph, f.splits, tc);
    return f;
}

LinearSurrogate manual_model(const SparseGraph& g, Matrix collapsed) {
    LinearSurrogate m;
    m.weight = collapsed;
    m.collapsed = std::move(collapsed);
    m.hops = 2;
    m.trained_features = g.features_ptr();
    return m;
}

}  // namespace

TEST_CASE("the label-free bound never falls below the exact influence") {
    auto f = trained_fixture();
    for (NodeId u : f.splits.test) {
        if (u % 3 != 0) continue;
        for (NodeId v = 0; v < f.graph.num_nodes(); v += 2) {
            if (v == u) continue;
            const double exact = exact_influence(f.model, f.graph, u, v, 2.0);
            const double bound = approx_influence(f.model, f.graph, u, v, 2.0);
            CHECK(bound >= exact - 1e-12);
        }
    }
}

TEST_CASE("influence scales with the inverse degree power") {
    // nodes 1 and 2 carry identical collapsed rows but degrees 1 and 4
    auto g = SparseGraph::from_edges(
        7, {{1, 0}, {2, 3}, {2, 4}, {2, 5}, {2, 6}}, Matrix::Identity(7, 7),
        {0, 1, 1, 0, 0, 0, 0});
    Matrix w = Matrix::Zero(7, 2);
    w(1, 1) = 2.0;
    w(2, 1) = 2.0;
    auto model = manual_model(g, w);
    const double low = approx_influence(model, g, 0, 1, 2.0);
    const double high = approx_influence(model, g, 0, 2, 2.0);
    CHECK(low == Catch::Approx(16.0 * high).margin(1e-12));
    // a gentler exponent shrinks the gap
    const double low_half = approx_influence(model, g, 0, 1, 0.5);
    const double high_half = approx_influence(model, g, 0, 2, 0.5);
    CHECK(low_half == Catch::Approx(2.0 * high_half).margin(1e-12));
}

TEST_CASE("near-one-hot predictions collapse exact onto the bound") {
    // isolated node 2 with an extreme row: its own prediction is one-hot
    auto g = SparseGraph::from_edges(3, {{0, 1}}, Matrix::Identity(3, 3), {1, 0, 0});
    Matrix w = Matrix::Zero(3, 2);
    w(2, 0) = 30.0;
    auto model = manual_model(g, w);
    const double exact = exact_influence(model, g, 0, 2, 2.0);
    const double bound = approx_influence(model, g, 0, 2, 2.0);
    CHECK(exact == Catch::Approx(bound).margin(1e-8));
    CHECK(bound == Catch::Approx(30.0).margin(1e-12));  // degree floored at 1
}

TEST_CASE("a constant collapsed row scores exactly zero") {
    auto f = trained_fixture(53);
    Matrix collapsed = f.model.collapsed;
    collapsed.row(5).setConstant(1.7);
    auto model = manual_model(f.graph, collapsed);
    auto table = influence_scores(model, f.graph, f.splits, 2.0);
    CHECK(table.score[5] == 0.0);
}

TEST_CASE("averaged scores equal the brute-force mean over the subset") {
    auto f = trained_fixture(55);
    auto table = influence_scores(f.model, f.graph, f.splits, 2.0);
    REQUIRE(table.score.size() == static_cast<std::size_t>(f.graph.num_nodes()));
    for (NodeId v = 0; v < f.graph.num_nodes(); ++v) {
        double mean = 0.0;
        for (NodeId u : f.splits.sub) mean += approx_influence(f.model, f.graph, u, v, 2.0);
        mean /= static_cast<double>(f.splits.sub.size());
        CHECK(table.score[static_cast<std::size_t>(v)] ==
              Catch::Approx(mean).margin(1e-12));
    }
}

TEST_CASE("scores are homogeneous in the collapsed table") {
    auto f = trained_fixture(57);
    auto table = influence_scores(f.model, f.graph, f.splits, 2.0);
    auto scaled_model = manual_model(f.graph, Matrix(3.0 * f.model.collapsed));
    auto scaled = influence_scores(scaled_model, f.graph, f.splits, 2.0);
    for (std::size_t v = 0; v < table.score.size(); ++v)
        CHECK(scaled.score[v] == Catch::Approx(3.0 * table.score[v]).margin(1e-10));
    CHECK(select_anchors(table, 8).anchors == select_anchors(scaled, 8).anchors);
}

TEST_CASE("exact influence and the attack gradient pick the same argmax") {
    // confident-surrogate regime: strong homophily, separated features;
    // alpha = 0.5 mirrors the gradient's inverse-root-degree factor
    Fixture f;
    StochasticBlockConfig cfg;
    cfg.block_sizes = {30, 30};
    cfg.intra_prob = 0.3;
    cfg.inter_prob = 0.03;
    cfg.feature_dim = 6;
    cfg.feature_separation = 2.0;
    cfg.seed = 61;
    f.graph = stochastic_block(cfg);
    f.splits = make_splits(f.graph, 0.4, 0.2, 62);
    TrainingConfig tc;
    tc.learning_rate = 0.4;
    tc.epochs = 80;
    tc.seed = 63;
    f.model = train_linear_surrogate(f.graph, f.splits, tc);

    int agree = 0, total = 0;
    for (NodeId u : f.splits.test) {
        if (total >= 20) break;
        ++total;
        auto grad = closed_form_gradient(f.model, f.graph, u);
        REQUIRE(!grad.additions.empty());
        const NodeId by_gradient = grad.additions[0].node;
        NodeId by_influence = -1;
        double best = -1e300;
        for (const auto& cand : grad.additions) {
            const double inf = exact_influence(f.model, f.graph, u, cand.node, 0.5);
            if (inf > best) {
                best = inf;
                by_influence = cand.node;
            }
        }
        if (by_gradient == by_influence) ++agree;
    }
    REQUIRE(total == 20);
    CHECK(agree >= 18);  // ≥ 90 percent
}

TEST_CASE("anchor selection clamps, orders and stays monotone") {
    auto f = trained_fixture(61);
    auto table = influence_scores(f.model, f.graph, f.splits, 2.0);

    auto none = select_anchors(table, 0);
    CHECK(none.anchors.empty());
    auto all = select_anchors(table, f.graph.num_nodes());
    CHECK(all.anchors.size() == static_cast<std::size_t>(f.graph.num_nodes()));
    CHECK_THROWS_AS(select_anchors(table, f.graph.num_nodes() + 1), PreconditionError);
    CHECK_THROWS_AS(select_anchors(table, -1), PreconditionError);

    auto k8 = select_anchors(table, 8);
    auto k11 = select_anchors(table, 11);
    for (std::size_t i = 0; i < 8; ++i) CHECK(k8.anchors[i] == k11.anchors[i]);
    for (std::size_t i = 1; i < k11.scores.size(); ++i)
        CHECK(k11.scores[i] <= k11.scores[i - 1]);
    for (NodeId v : k8.anchors) CHECK(k8.contains(v));
    CHECK_FALSE(k8.contains(k11.anchors[10]));
}

TEST_CASE("tied scores resolve to the smaller node index") {
    InfluenceTable table;
    table.score = {5.0, 7.0, 7.0, 1.0};
    auto patch = select_anchors(table, 2);
    CHECK(patch.anchors == std::vector<NodeId>{1, 2});
}

TEST_CASE("random anchors are reproducible and seed-sensitive") {
    auto g = erdos_renyi({.nodes = 50, .edge_prob = 0.05, .seed = 3});
    auto a = random_anchors(g, 10, 42);
    auto b = random_anchors(g, 10, 42);
    CHECK(a.anchors == b.anchors);
    auto c = random_anchors(g, 10, 43);
    CHECK(a.anchors != c.anchors);
    CHECK(a.source == PatchSource::Random);
    std::set<NodeId> uniq(a.anchors.begin(), a.anchors.end());
    CHECK(uniq.size() == 10);
    for (std::size_t i = 1; i < a.scores.size(); ++i) CHECK(a.scores[i] <= a.scores[i - 1]);
}

TEST_CASE("degree anchors pick the sparsest nodes first") {
    auto g = oracle::path_graph(4);
    auto patch = degree_anchors(g, 2);
    CHECK(patch.anchors == std::vector<NodeId>{0, 3});
    CHECK(patch.source == PatchSource::Degree);
}

TEST_CASE("purification removes exactly the target's anchor edges") {
    auto f = trained_fixture(63);
    auto table = influence_scores(f.model, f.graph, f.splits, 2.0);
    auto patch = select_anchors(table, 12);
    const NodeId u = f.splits.test.front();
    auto purified = apply_patch(f.graph, patch, u);

    for (NodeId v : f.graph.neighbors(u)) {
        if (patch.contains(v)) {
            CHECK_FALSE(purified.graph.has_edge(u, v));
        } else {
            CHECK(purified.graph.has_edge(u, v));
        }
    }
    // no other row changed
    for (NodeId a = 0; a < f.graph.num_nodes(); ++a) {
        if (a == u) continue;
        auto before = f.graph.neighbors(a);
        auto after = purified.graph.neighbors(a);
        std::vector<NodeId> b_set(before.begin(), before.end());
        std::vector<NodeId> a_set(after.begin(), after.end());
        b_set.erase(std::remove(b_set.begin(), b_set.end(), u), b_set.end());
        a_set.erase(std::remove(a_set.begin(), a_set.end(), u), a_set.end());
        CHECK(b_set == a_set);
    }
    CHECK(std::is_sorted(purified.removed_anchors.begin(), purified.removed_anchors.end()));
    CHECK(purified.removed_anchors.size() ==
          f.graph.degree(u) - purified.graph.degree(u));

    // idempotent
    auto twice = apply_patch(purified.graph, patch, u);
    CHECK(structurally_equal(twice.graph, purified.graph));
    CHECK(twice.removed_anchors.empty());

    // empty patch is a no-op
    InfluenceTable empty_table;
    empty_table.score.assign(static_cast<std::size_t>(f.graph.num_nodes()), 0.0);
    auto none = apply_patch(f.graph, select_anchors(empty_table, 0), u);
    CHECK(structurally_equal(none.graph, f.graph));
}

TEST_CASE("a patch covering all injected endpoints restores the neighborhood") {
    auto f = trained_fixture(65, 50);
    const NodeId u = f.splits.test.front();
    auto attack = greedy_attack(f.model, f.graph, {.target = u, .delta = 3});
    REQUIRE(!attack.injected.empty());

    DefensePatch patch;
    patch.source = PatchSource::Influence;
    for (const auto& [a, v] : attack.injected) {
        patch.anchors.push_back(v);
        patch.scores.push_back(1.0);
    }
    patch.k = static_cast<int>(patch.anchors.size());
    patch.finalize();
    // clean neighbors must stay: none of them may sit in the patch
    for (NodeId v : f.graph.neighbors(u)) REQUIRE_FALSE(patch.contains(v));

    auto purified = apply_patch(attack.perturbed, patch, u);
    auto clean_row = f.graph.neighbors(u);
    auto fixed_row = purified.graph.neighbors(u);
    CHECK(std::vector<NodeId>(clean_row.begin(), clean_row.end()) ==
          std::vector<NodeId>(fixed_row.begin(), fixed_row.end()));
}

TEST_CASE("patches survive a json round trip") {
    auto f = trained_fixture(67);
    auto table = influence_scores(f.model, f.graph, f.splits, 2.0);
    auto patch = select_anchors(table, 6);
    auto j = patch_json(patch);
    auto back = patch_from_json(j);
    CHECK(back.anchors == patch.anchors);
    CHECK(back.scores == patch.scores);
    CHECK(back.k == 6);
    CHECK(back.alpha == 2.0);
    CHECK(back.source == PatchSource::Influence);
    CHECK(back.contains(patch.anchors.front()));

    auto bad = j;
    bad["k"] = 7;
    CHECK_THROWS_AS(patch_from_json(bad), DataError);
    bad = j;
    bad.erase("anchors");
    CHECK_THROWS_AS(patch_from_json(bad), DataError);
}

TEST_CASE("feature-overlap pruning keeps similar pairs and cuts the rest") {
    Matrix x(6, 4);
    x << 1, 1, 0, 0,
         1, 1, 0, 0,
         0, 0, 1, 1,
         0, 0, 0, 0,
         1, 0, 0, 0,
         0, 0, 0, 0;
    auto g = SparseGraph::from_edges(
        6, {{0, 1}, {0, 2}, {0, 3}, {0, 4}, {3, 5}}, x, {0, 0, 1, 1, 0, 1});

    auto pruned = jaccard_prune(g, 0.4);
    CHECK(pruned.has_edge(0, 1));        // identical rows, similarity 1
    CHECK_FALSE(pruned.has_edge(0, 2));  // disjoint supports, similarity 0
    CHECK_FALSE(pruned.has_edge(0, 3));  // zero row on one side
    CHECK(pruned.has_edge(0, 4));        // overlap 1 of 2 = 0.5
    CHECK_FALSE(pruned.has_edge(3, 5));  // both rows zero count as zero
    CHECK(pruned.features_ptr().get() == g.features_ptr().get());

    auto strict = jaccard_prune(g, 0.6);
    CHECK_FALSE(strict.has_edge(0, 4));

    // a zero threshold removes nothing
    auto untouched = jaccard_prune(g, 0.0);
    CHECK(structurally_equal(untouched, g));

    auto real = g.with_features(Matrix::Constant(6, 4, 0.5));
    CHECK_THROWS_AS(jaccard_prune(real), PreconditionError);
}

TEST_CASE("influence preconditions are enforced") {
    auto f = trained_fixture(69);
    std::vector<int> labels = f.graph.labels();
    labels[f.splits.test.front()] = kUnlabeled;
    auto g2 = SparseGraph::from_edges(f.graph.num_nodes(), {}, f.graph.features(), labels);
    auto model = manual_model(g2, f.model.collapsed);
    CHECK_THROWS_AS(exact_influence(model, g2, f.splits.test.front(), 0, 2.0),
                    PreconditionError);

    SplitSet empty_sub = f.splits;
    empty_sub.train.clear();
    empty_sub.sub.clear();
    CHECK_THROWS_AS(influence_scores(f.model, f.graph, empty_sub, 2.0), PreconditionError);
}
