#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "doctest.h"
#include "survtreeful/inference.hpp"
#include "survtreeful/model_io.hpp"
#include "survtreeful/select.hpp"
#include "survtreeful/simbench.hpp"

using namespace survtreeful;

namespace {

/// Fits a small pipeline model on generated two-group data.
FittedModel fitted_example() {
    const auto data = generate(SimModel::two_group, 300, 0.5, 17);
    SelectionConfig cfg;
    const auto res = select_ic(data, SelectionCriterion::aic, cfg, 4);
    const auto& pattern = res.path.patterns.at(res.report.chosen);
    FittedModel m;
    m.schema = data.schema;
    m.tree = res.sheared;
    m.grouping = tree_grouping(res.sheared, res.grouping);
    m.group_beta = pattern.relaxed_beta;
    m.baseline = pattern.baseline;
    m.n_train = data.n_rows();
    return m;
}

/// Random schema-conformant covariate row for the benchmark schema.
std::vector<double> random_row(Rng& r) {
    return {r.bernoulli(0.5) ? 1.0 : 0.0, r.uniform(),
            static_cast<double>(r.below(5)), r.bernoulli(0.5) ? 1.0 : 0.0,
            r.bernoulli(0.5) ? 1.0 : 0.0, r.uniform(), r.uniform()};
}

}  // namespace

TEST_CASE("model save/load preserves routing on random records") {
    const auto m = fitted_example();
    REQUIRE(m.grouping.group_count >= 1);
    const auto loaded = load_model(save_model(m));

    Rng r(99);
    for (std::size_t i = 0; i < 10000; ++i) {
        const auto row = random_row(r);
        const auto leaf = m.tree.route(row);
        CHECK(loaded.tree.route(row) == leaf);
        CHECK(loaded.grouping.leaf_group.at(leaf) ==
              m.grouping.leaf_group.at(leaf));
    }
}

TEST_CASE("model save/load preserves every stored field exactly") {
    const auto m = fitted_example();
    const auto text = save_model(m);
    CHECK(save_model(m) == text);  // serialization is deterministic
    const auto loaded = load_model(text);

    REQUIRE(loaded.schema.size() == m.schema.size());
    for (std::size_t j = 0; j < m.schema.size(); ++j) {
        CHECK(loaded.schema[j].name == m.schema[j].name);
        CHECK(loaded.schema[j].kind == m.schema[j].kind);
        CHECK(loaded.schema[j].levels == m.schema[j].levels);
    }
    REQUIRE(loaded.tree.nodes.size() == m.tree.nodes.size());
    for (const auto& [id, node] : m.tree.nodes) {
        const auto& l = loaded.tree.nodes.at(id);
        CHECK(l.depth == node.depth);
        CHECK(l.events == node.events);
        CHECK(l.group == node.group);
        CHECK(l.statistic == node.statistic);  // exact double round trip
        REQUIRE(l.split.has_value() == node.split.has_value());
        if (node.split) {
            CHECK(l.split->variable == node.split->variable);
            CHECK(l.split->is_subset == node.split->is_subset);
            CHECK(l.split->threshold == node.split->threshold);
            CHECK(l.split->in_left == node.split->in_left);
        }
    }
    CHECK(loaded.grouping.leaf_group == m.grouping.leaf_group);
    CHECK(loaded.grouping.group_count == m.grouping.group_count);
    CHECK(loaded.group_beta == m.group_beta);
    CHECK(loaded.baseline.initial == m.baseline.initial);
    CHECK(loaded.baseline.times == m.baseline.times);
    CHECK(loaded.baseline.values == m.baseline.values);
    CHECK(loaded.n_train == m.n_train);

    // The baseline step function evaluates identically after the round trip.
    for (const double t : {0.0, 0.1, 0.5, 1.0, 2.5, 10.0})
        CHECK(loaded.baseline.at(t) == m.baseline.at(t));
}

TEST_CASE("subset splits round-trip and keep the boundary convention") {
    FittedModel m;
    m.schema = {{"color", CovariateKind::nominal, {"a", "b", "c"}},
                {"x", CovariateKind::continuous, {}}};
    TreeNode root;
    root.id = 1;
    SplitSpec subset;
    subset.variable = 0;
    subset.is_subset = true;
    subset.in_left = {1, 0, 1};
    root.split = subset;
    TreeNode left, right;
    left.id = 2;
    left.depth = 1;
    left.group = 1;
    SplitSpec thr;
    thr.variable = 1;
    thr.threshold = 0.25;
    right.id = 3;
    right.depth = 1;
    right.split = thr;
    TreeNode rl, rr;
    rl.id = 6;
    rl.depth = 2;
    rl.group = 2;
    rr.id = 7;
    rr.depth = 2;
    rr.group = 1;
    for (auto& n : {root, left, right, rl, rr}) m.tree.nodes.emplace(n.id, n);
    m.grouping.leaf_group = {{2, 1}, {6, 2}, {7, 1}};
    m.grouping.group_count = 2;
    m.group_beta = {0.0, 1.25};
    m.baseline.times = {0.5, 1.5};
    m.baseline.values = {0.1, 0.4};

    const auto loaded = load_model(save_model(m));
    // Levels a and c go left; level b descends into the threshold split,
    // where x == threshold routes left by convention.
    CHECK(loaded.tree.route(std::vector<double>{0.0, 0.9}) == 2);
    CHECK(loaded.tree.route(std::vector<double>{2.0, 0.9}) == 2);
    CHECK(loaded.tree.route(std::vector<double>{1.0, 0.25}) == 6);
    CHECK(loaded.tree.route(std::vector<double>{1.0, 0.26}) == 7);
    CHECK(loaded.grouping.leaf_group.at(6) == 2);
}

TEST_CASE("tree_grouping labels shear-collapsed terminals") {
    // Depth-2 tree whose sibling leaves share groups: shearing collapses
    // nodes 2 and 3 into terminals that the pre-shear grouping never names.
    Tree t;
    TreeNode root;
    root.id = 1;
    SplitSpec s0;
    s0.variable = 0;
    s0.threshold = 0.5;
    root.split = s0;
    TreeNode n2, n3;
    n2.id = 2;
    n2.depth = 1;
    n3.id = 3;
    n3.depth = 1;
    SplitSpec s1;
    s1.variable = 1;
    s1.threshold = 0.5;
    n2.split = s1;
    n3.split = s1;
    for (std::uint32_t id : {4u, 5u, 6u, 7u}) {
        TreeNode leaf;
        leaf.id = id;
        leaf.depth = 2;
        t.nodes.emplace(id, leaf);
    }
    for (auto& n : {root, n2, n3}) t.nodes.emplace(n.id, n);

    Grouping g;
    g.leaf_group = {{4, 1}, {5, 1}, {6, 2}, {7, 2}};
    g.group_count = 2;
    const auto sheared = shear(t, g);
    REQUIRE(sheared.leaf_ids() == std::vector<std::uint32_t>{2, 3});
    CHECK(g.leaf_group.count(2) == 0);  // the collapse created new terminals

    const auto fixed = tree_grouping(sheared, g);
    CHECK(fixed.leaf_group.at(2) == 1);
    CHECK(fixed.leaf_group.at(3) == 2);
    CHECK(fixed.group_count == 2);

    // The reconciled pair passes model validation where the raw one fails.
    FittedModel m;
    m.schema = {{"u", CovariateKind::continuous, {}},
                {"v", CovariateKind::continuous, {}}};
    m.tree = sheared;
    m.grouping = g;
    m.group_beta = {0.0, 0.8};
    m.baseline.times = {1.0};
    m.baseline.values = {0.2};
    CHECK_THROWS_AS(save_model(m), DataError);
    m.grouping = fixed;
    CHECK(load_model(save_model(m)).grouping.leaf_group.at(3) == 2);
}

TEST_CASE("malformed or inconsistent model documents are rejected") {
    CHECK_THROWS_AS(load_model("not json at all"), DataError);
    CHECK_THROWS_AS(load_model("{}"), DataError);
    CHECK_THROWS_AS(load_model("[1,2,3]"), DataError);

    const auto m = fitted_example();
    const auto text = save_model(m);

    // A grouping that misses a leaf is structurally invalid.
    auto broken = m;
    broken.grouping.leaf_group.erase(broken.grouping.leaf_group.begin());
    CHECK_THROWS_AS(save_model(broken), DataError);

    // Split variable outside the schema.
    auto bad_var = m;
    for (auto& [id, node] : bad_var.tree.nodes)
        if (node.split) node.split->variable = 99;
    CHECK_THROWS_AS(save_model(bad_var), DataError);

    // group_beta length must match the group count.
    auto bad_beta = m;
    bad_beta.group_beta.push_back(1.0);
    CHECK_THROWS_AS(save_model(bad_beta), DataError);

    // Decreasing baseline times.
    auto bad_base = m;
    if (bad_base.baseline.times.size() >= 2)
        std::swap(bad_base.baseline.times.front(),
                  bad_base.baseline.times.back());
    else
        bad_base.baseline.times = {2.0, 1.0},
        bad_base.baseline.values = {0.1, 0.2};
    CHECK_THROWS_AS(save_model(bad_base), DataError);

    CHECK_NOTHROW(load_model(text));
}

TEST_CASE("model files round-trip through disk") {
    const auto m = fitted_example();
    const std::string path = "model_io_test_artifact.json";
    save_model_file(m, path);
    const auto loaded = load_model_file(path);
    CHECK(save_model(loaded) == save_model(loaded));
    CHECK(loaded.n_train == m.n_train);
    CHECK(loaded.grouping.leaf_group == m.grouping.leaf_group);
    std::remove(path.c_str());
    CHECK_THROWS_AS(load_model_file("definitely_missing_file.json"), DataError);
}
