#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "doctest.h"
#include "survtreeful/iv.hpp"
#include "survtreeful/tree.hpp"

using namespace survtreeful;

namespace {

// Two informative variables (binary z1, uniform z2 with a step at 0.5) plus
// one noise column; hazard exp(-1 + z1 + 2*I{z2 <= 0.5}).
SurvivalDataset step_hazard_data(std::size_t n, std::uint64_t seed) {
    SurvivalDataset d;
    d.schema = {{"z1", CovariateKind::binary, {}},
                {"z2", CovariateKind::continuous, {}},
                {"z3", CovariateKind::continuous, {}}};
    d.covariates.resize(3);
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        const double z1 = rng.bernoulli(0.5) ? 1.0 : 0.0;
        const double z2 = rng.uniform();
        const double z3 = rng.uniform();
        const double rate = std::exp(-1.0 + z1 + 2.0 * (z2 <= 0.5 ? 1 : 0));
        const double t = rng.exponential(rate);
        const double c = rng.exponential(1.0);
        d.time.push_back(std::min(t, c));
        d.status.push_back(t <= c ? 1 : 0);
        d.covariates[0].push_back(z1);
        d.covariates[1].push_back(z2);
        d.covariates[2].push_back(z3);
    }
    return d;
}

// Five predictors with no effect on the exp(-1) hazard: binary, 10-point
// grid, 50-point grid, uniform, and a 10-level nominal.
SurvivalDataset null_five_predictors(std::size_t n, std::uint64_t seed) {
    SurvivalDataset d;
    std::vector<std::string> levels;
    for (char c = 'A'; c <= 'J'; ++c) levels.emplace_back(1, c);
    d.schema = {{"z1", CovariateKind::binary, {}},
                {"z2", CovariateKind::continuous, {}},
                {"z3", CovariateKind::continuous, {}},
                {"z4", CovariateKind::continuous, {}},
                {"z5", CovariateKind::nominal, levels}};
    d.covariates.resize(5);
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = rng.exponential(std::exp(-1.0));
        const double c = rng.exponential(std::exp(-1.0));
        d.time.push_back(std::min(t, c));
        d.status.push_back(t <= c ? 1 : 0);
        d.covariates[0].push_back(rng.bernoulli(0.5) ? 1.0 : 0.0);
        d.covariates[1].push_back((1.0 + rng.below(10)) / 10.0);
        d.covariates[2].push_back((1.0 + rng.below(50)) / 50.0);
        d.covariates[3].push_back(rng.uniform());
        d.covariates[4].push_back(static_cast<double>(rng.below(10)));
    }
    return d;
}

IVConfig test_iv_cfg() {
    IVConfig cfg;
    cfg.split.min_child_size = 10;
    cfg.split.min_child_events = 3;
    return cfg;
}

}  // namespace

TEST_CASE("plain split finds the strong variable") {
    const auto d = step_hazard_data(300, 11);
    const auto r = plain_split(d, full_index(d), test_iv_cfg().split);
    REQUIRE(r.feasible);
    CHECK(r.spec.variable == 1);  // the step in z2 dominates
    CHECK(std::abs(r.spec.threshold - 0.5) < 0.15);
}

TEST_CASE("iv with a single variable reduces to the plain search") {
    auto d = step_hazard_data(200, 12);
    d.schema = {d.schema[1]};
    d.covariates = {d.covariates[1]};
    Rng rng(77);
    const auto cfg = test_iv_cfg();
    const auto iv = iv_split(d, full_index(d), cfg, rng);
    const auto plain = plain_split(d, full_index(d), cfg.split);
    REQUIRE(iv.feasible);
    CHECK(iv.spec.variable == plain.spec.variable);
    CHECK(iv.spec.threshold == plain.spec.threshold);
    CHECK(iv.statistic == plain.statistic);
}

TEST_CASE("iv split is deterministic given the seed") {
    const auto d = step_hazard_data(240, 13);
    const auto cfg = test_iv_cfg();
    Rng r1(5), r2(5);
    const auto a = iv_split(d, full_index(d), cfg, r1);
    const auto b = iv_split(d, full_index(d), cfg, r2);
    REQUIRE(a.feasible == b.feasible);
    CHECK(a.spec.variable == b.spec.variable);
    CHECK(a.spec.threshold == b.spec.threshold);
    CHECK(a.statistic == b.statistic);
}

TEST_CASE("small nodes fall back to the plain search") {
    const auto d = step_hazard_data(26, 14);
    auto cfg = test_iv_cfg();
    cfg.split.min_child_size = 5;
    cfg.split.min_child_events = 2;
    Rng rng(9);
    const auto iv = iv_split(d, full_index(d), cfg, rng);
    const auto plain = plain_split(d, full_index(d), cfg.split);
    CHECK(iv.feasible == plain.feasible);
    if (iv.feasible) {
        CHECK(iv.spec.variable == plain.spec.variable);
        CHECK(iv.spec.threshold == plain.spec.threshold);
    }
}

TEST_CASE("iv dampens the many-level selection bias of the plain search") {
    // Null data: no variable matters, yet plain search favors the 10-level
    // nominal (it gets 511 candidate subsets). IV should pull it back.
    const int reps = 120;
    std::map<std::size_t, int> plain_freq, iv_freq;
    auto cfg = test_iv_cfg();
    for (int rep = 0; rep < reps; ++rep) {
        const auto d =
            null_five_predictors(200, 1000 + static_cast<std::uint64_t>(rep));
        const auto pr = plain_split(d, full_index(d), cfg.split);
        if (pr.feasible) ++plain_freq[pr.spec.variable];
        Rng rng(2000 + static_cast<std::uint64_t>(rep));
        const auto ir = iv_split(d, full_index(d), cfg, rng);
        if (ir.feasible) ++iv_freq[ir.spec.variable];
    }
    // The nominal variable (index 4) dominates the plain search.
    int plain_max_var = -1, plain_max = -1;
    for (const auto& [var, cnt] : plain_freq)
        if (cnt > plain_max) {
            plain_max = cnt;
            plain_max_var = static_cast<int>(var);
        }
    CHECK(plain_max_var == 4);
    CHECK(plain_freq[4] > reps / 3);
    CHECK(iv_freq[4] < plain_freq[4]);
}

TEST_CASE("zero depth or too few events gives a root-only tree") {
    const auto d = step_hazard_data(100, 15);
    TreeConfig cfg;
    cfg.max_depth = 0;
    const auto t = grow(d, cfg, 1);
    CHECK(t.nodes.size() == 1);
    CHECK(t.root().is_leaf());

    TreeConfig cfg2;
    cfg2.min_node_events = 10000;
    const auto t2 = grow(d, cfg2, 1);
    CHECK(t2.nodes.size() == 1);
}

TEST_CASE("grown tree recovers the generating structure") {
    TreeConfig cfg;
    cfg.split.min_child_size = 20;
    cfg.split.min_child_events = 5;
    int both_found = 0;
    const int reps = 12;
    for (int rep = 0; rep < reps; ++rep) {
        const auto d = step_hazard_data(600, 300 + static_cast<std::uint64_t>(rep));
        const auto t = grow(d, cfg, 400 + static_cast<std::uint64_t>(rep));
        bool has_z1 = false, has_z2_mid = false;
        for (const auto& [id, node] : t.nodes) {
            if (node.is_leaf()) continue;
            if (node.split->variable == 0) has_z1 = true;
            if (node.split->variable == 1 &&
                std::abs(node.split->threshold - 0.5) < 0.15)
                has_z2_mid = true;
        }
        both_found += has_z1 && has_z2_mid;
    }
    CHECK(both_found >= 9);
}

TEST_CASE("tree structure bookkeeping holds") {
    const auto d = step_hazard_data(500, 16);
    TreeConfig cfg;
    const auto t = grow(d, cfg, 17);
    REQUIRE(t.nodes.size() > 1);

    for (const auto& [id, node] : t.nodes) {
        if (node.is_leaf()) continue;
        const auto& left = t.nodes.at(2 * id);
        const auto& right = t.nodes.at(2 * id + 1);
        CHECK(left.rows.size() + right.rows.size() == node.rows.size());
        CHECK(left.events + right.events == node.events);
        CHECK(left.depth == node.depth + 1);

        // Stored statistic replays as the hard logrank of the stored rule.
        const auto times = gather(d.time, node.rows);
        const auto statuses = gather(d.status, node.rows);
        const LogrankScorer scorer(times, statuses);
        const auto z = gather(d.covariates[node.split->variable], node.rows);
        const auto q = split_statistic(scorer, z, *node.split);
        REQUIRE(q.has_value());
        CHECK(node.statistic == doctest::Approx(*q).epsilon(1e-9));
    }

    // Routing the training data reproduces each leaf's stored row set.
    std::map<std::uint32_t, std::vector<std::uint32_t>> routed;
    for (std::size_t i = 0; i < d.n_rows(); ++i)
        routed[t.route(d, i)].push_back(static_cast<std::uint32_t>(i));
    std::size_t covered = 0;
    for (const auto leaf : t.leaf_ids()) {
        auto stored = t.nodes.at(leaf).rows.rows;
        std::sort(stored.begin(), stored.end());
        auto replayed = routed[leaf];
        std::sort(replayed.begin(), replayed.end());
        CHECK(stored == replayed);
        covered += stored.size();
    }
    CHECK(covered == d.n_rows());
}

TEST_CASE("records at the threshold route left") {
    Tree t;
    TreeNode root;
    root.id = 1;
    SplitSpec s;
    s.variable = 0;
    s.threshold = 1.5;
    root.split = s;
    TreeNode l, r;
    l.id = 2;
    r.id = 3;
    t.nodes = {{1, root}, {2, l}, {3, r}};
    const std::vector<double> at{1.5}, above{1.5000001};
    CHECK(t.route(at) == 2);
    CHECK(t.route(above) == 3);
}

TEST_CASE("growth is reproducible down to the bits") {
    const auto d = step_hazard_data(400, 18);
    TreeConfig cfg;
    const auto a = grow(d, cfg, 99);
    const auto b = grow(d, cfg, 99);
    REQUIRE(a.nodes.size() == b.nodes.size());
    for (const auto& [id, na] : a.nodes) {
        const auto& nb = b.nodes.at(id);
        CHECK(na.rows.rows == nb.rows.rows);
        CHECK(na.is_leaf() == nb.is_leaf());
        if (!na.is_leaf()) {
            CHECK(na.split->variable == nb.split->variable);
            CHECK(na.split->threshold == nb.split->threshold);
            CHECK(na.statistic == nb.statistic);
        }
    }
}

TEST_CASE("leaf membership design matrix") {
    const auto d = step_hazard_data(400, 19);
    TreeConfig cfg;
    cfg.max_depth = 2;
    const auto t = grow(d, cfg, 20);
    const auto leaves = t.leaf_ids();
    REQUIRE(leaves.size() >= 2);
    // Drop the first leaf as reference.
    std::vector<std::uint32_t> cols(leaves.begin() + 1, leaves.end());
    const auto X = leaf_memberships(t, d, full_index(d), cols);
    CHECK(X.rows() == static_cast<Eigen::Index>(d.n_rows()));
    CHECK(X.cols() == static_cast<Eigen::Index>(cols.size()));
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        const double rs = X.row(i).sum();
        CHECK((rs == 0.0 || rs == 1.0));
    }
    for (std::size_t j = 0; j < cols.size(); ++j)
        CHECK(X.col(static_cast<Eigen::Index>(j)).sum() ==
              doctest::Approx(
                  static_cast<double>(t.nodes.at(cols[j]).rows.size())));
}

TEST_CASE("truncating to a depth keeps routing prefixes") {
    const auto d = step_hazard_data(500, 21);
    TreeConfig cfg;
    const auto t = grow(d, cfg, 22);
    const auto cut = truncate_to_depth(t, 1);
    CHECK(cut.nodes.size() <= 3);
    for (const auto& [id, node] : cut.nodes) {
        if (node.depth == 1) CHECK(node.is_leaf());
        CHECK(t.nodes.count(id) == 1);
    }
    // A routed record's truncated leaf is an ancestor of (or equal to) its
    // full-tree leaf in heap numbering.
    for (std::size_t i = 0; i < 50; ++i) {
        auto full_leaf = t.route(d, i);
        const auto cut_leaf = cut.route(d, i);
        while (full_leaf > cut_leaf) full_leaf /= 2;
        CHECK(full_leaf == cut_leaf);
    }
}
