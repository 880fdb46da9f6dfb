#include <guard/synthetic.hpp>

#include <catch2/catch_amalgamated.hpp>

#include <set>

using namespace guard;

TEST_CASE("random graph generation is seed-deterministic") {
    ErdosRenyiConfig cfg{.nodes = 200, .edge_prob = 0.03, .seed = 42};
    auto a = erdos_renyi(cfg);
    auto b = erdos_renyi(cfg);
    CHECK(structurally_equal(a, b));
    CHECK(a.features() == b.features());
    CHECK(a.labels() == b.labels());

    cfg.seed = 43;
    auto c = erdos_renyi(cfg);
    CHECK_FALSE((structurally_equal(a, c) && a.features() == c.features()));
}

TEST_CASE("random graph edge count is near its expectation") {
    auto g = erdos_renyi({.nodes = 2000, .edge_prob = 0.002, .seed = 5});
    // E = C(2000,2) * 0.002 = 3998, sd ~ 63; allow 5 sigma.
    CHECK(g.num_edges() > 3680);
    CHECK(g.num_edges() < 4320);
}

TEST_CASE("random graph degenerate probabilities behave") {
    auto empty = erdos_renyi({.nodes = 30, .edge_prob = 0.0, .seed = 1});
    CHECK(empty.num_edges() == 0);
    auto full = erdos_renyi({.nodes = 6, .edge_prob = 1.0, .seed = 1});
    CHECK(full.num_edges() == 15);
}

TEST_CASE("block model plants labels and respects extreme probabilities") {
    StochasticBlockConfig cfg;
    cfg.block_sizes = {4, 3};
    cfg.intra_prob = 1.0;
    cfg.inter_prob = 0.0;
    cfg.seed = 9;
    auto g = stochastic_block(cfg);
    CHECK(g.num_nodes() == 7);
    CHECK(g.num_classes() == 2);
    for (NodeId u = 0; u < 4; ++u) CHECK(g.label(u) == 0);
    for (NodeId u = 4; u < 7; ++u) CHECK(g.label(u) == 1);
    // two disjoint cliques: C(4,2) + C(3,2)
    CHECK(g.num_edges() == 6 + 3);
    CHECK_FALSE(g.has_edge(0, 5));
}

TEST_CASE("binary block features are zero-one valued") {
    StochasticBlockConfig cfg;
    cfg.block_sizes = {10, 10};
    cfg.intra_prob = 0.2;
    cfg.feature_dim = 6;
    cfg.binary_features = true;
    cfg.seed = 4;
    auto g = stochastic_block(cfg);
    for (Eigen::Index i = 0; i < g.features().rows(); ++i)
        for (Eigen::Index j = 0; j < g.features().cols(); ++j) {
            const double x = g.features()(i, j);
            CHECK((x == 0.0 || x == 1.0));
        }
}

TEST_CASE("sampling without replacement returns distinct in-range values") {
    std::mt19937_64 rng(3);
    auto s = sample_without_replacement(50, 20, rng);
    REQUIRE(s.size() == 20);
    std::set<NodeId> uniq(s.begin(), s.end());
    CHECK(uniq.size() == 20);
    CHECK(*uniq.begin() >= 0);
    CHECK(*uniq.rbegin() < 50);

    auto all = sample_without_replacement(10, 10, rng);
    std::set<NodeId> perm(all.begin(), all.end());
    CHECK(perm.size() == 10);
    CHECK_THROWS_AS(sample_without_replacement(5, 6, rng), PreconditionError);
}

TEST_CASE("split sampling respects fractions and labeled-only membership") {
    auto g = erdos_renyi({.nodes = 100, .edge_prob = 0.05, .classes = 3, .seed = 12});
    auto s = make_splits(g, 0.1, 0.1, 99);
    CHECK(s.train.size() == 10);
    CHECK(s.valid.size() == 10);
    CHECK(s.test.size() == 80);
    CHECK(s.sub == s.train);

    auto s2 = make_splits(g, 0.1, 0.1, 99);
    CHECK(s.train == s2.train);
    CHECK(s.test == s2.test);
    auto s3 = make_splits(g, 0.1, 0.1, 100);
    CHECK(s.train != s3.train);
}

TEST_CASE("split sampling skips unlabeled nodes") {
    Matrix x = Matrix::Zero(6, 2);
    std::vector<int> labels{0, kUnlabeled, 1, kUnlabeled, 0, 1};
    auto g = SparseGraph::from_edges(6, {{0, 2}, {2, 4}}, x, labels);
    auto s = make_splits(g, 0.25, 0.25, 7);
    std::vector<NodeId> all;
    for (auto* set : {&s.train, &s.valid, &s.test})
        all.insert(all.end(), set->begin(), set->end());
    CHECK(all.size() == 4);
    for (NodeId u : all) CHECK(g.label(u) != kUnlabeled);
}
