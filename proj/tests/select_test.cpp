#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "survtreeful/errors.hpp"
#include "survtreeful/select.hpp"

using namespace survtreeful;

namespace {

// Hazard exp(-1 + 2.5*I{z2 <= 0.5}); z1 and z3 carry no signal.
SurvivalDataset two_group_data(std::size_t n, std::uint64_t seed) {
    SurvivalDataset d;
    d.schema = {{"z1", CovariateKind::binary, {}},
                {"z2", CovariateKind::continuous, {}},
                {"z3", CovariateKind::continuous, {}}};
    d.covariates.resize(3);
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        const double z2 = rng.uniform();
        const double t = rng.exponential(std::exp(-1.0 + 2.5 * (z2 <= 0.5 ? 1 : 0)));
        const double c = rng.exponential(std::exp(-1.0));
        d.time.push_back(std::min(t, c));
        d.status.push_back(t <= c ? 1 : 0);
        d.covariates[0].push_back(rng.bernoulli(0.5) ? 1.0 : 0.0);
        d.covariates[1].push_back(z2);
        d.covariates[2].push_back(rng.uniform());
    }
    return d;
}

// Constant hazard exp(-1); all three covariates are noise.
SurvivalDataset null_data(std::size_t n, std::uint64_t seed) {
    SurvivalDataset d;
    d.schema = {{"z1", CovariateKind::binary, {}},
                {"z2", CovariateKind::continuous, {}},
                {"z3", CovariateKind::continuous, {}}};
    d.covariates.resize(3);
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = rng.exponential(std::exp(-1.0));
        const double c = rng.exponential(std::exp(-1.0));
        d.time.push_back(std::min(t, c));
        d.status.push_back(t <= c ? 1 : 0);
        d.covariates[0].push_back(rng.bernoulli(0.5) ? 1.0 : 0.0);
        d.covariates[1].push_back(rng.uniform());
        d.covariates[2].push_back(rng.uniform());
    }
    return d;
}

bool reports_equal(const SelectionReport& a, const SelectionReport& b) {
    if (a.chosen != b.chosen || a.entries.size() != b.entries.size()) return false;
    for (std::size_t m = 0; m < a.entries.size(); ++m) {
        if (a.entries[m].lambda != b.entries[m].lambda) return false;
        if (a.entries[m].deviance != b.entries[m].deviance) return false;
        if (a.entries[m].group_count != b.entries[m].group_count) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("stratified folds partition the data and balance events") {
    const auto d = two_group_data(237, 3001);
    Rng rng(7);
    const auto folds = stratified_folds(d, 10, rng);
    REQUIRE(folds.size() == 10);
    std::vector<int> seen(d.n_rows(), 0);
    std::vector<std::size_t> fold_events;
    for (const auto& f : folds) {
        std::size_t ev = 0;
        for (const auto row : f.validation.rows) {
            ++seen[row];
            ev += d.status[row] ? 1 : 0;
        }
        fold_events.push_back(ev);
        // train is exactly the complement
        std::set<std::uint32_t> held(f.validation.rows.begin(),
                                     f.validation.rows.end());
        CHECK(f.train.size() + f.validation.size() == d.n_rows());
        for (const auto row : f.train.rows) CHECK(held.count(row) == 0);
    }
    for (const int c : seen) CHECK(c == 1);
    const auto [lo, hi] =
        std::minmax_element(fold_events.begin(), fold_events.end());
    CHECK(*hi - *lo <= 1);

    Rng r1(7), r2(7);
    const auto a = stratified_folds(d, 10, r1);
    const auto b = stratified_folds(d, 10, r2);
    for (std::size_t v = 0; v < 10; ++v)
        CHECK(a[v].validation.rows == b[v].validation.rows);

    Rng r3(7);
    CHECK_THROWS_AS(stratified_folds(d, 1, r3), ConfigError);
    CHECK_THROWS_AS(stratified_folds(d, d.n_rows() + 1, r3), ConfigError);
}

TEST_CASE("model deviance adds across disjoint row sets") {
    const auto d = two_group_data(260, 3101);
    TreeConfig cfg;
    const auto t = grow(d, cfg, 3102);
    const auto path = fusion_path(t, d);
    Rng rng(9);
    const auto folds = stratified_folds(d, 5, rng);
    for (const auto& pat : path.patterns) {
        const double whole =
            pattern_deviance(t, pat, d, full_index(d), d.n_rows());
        double sum = 0.0;
        for (const auto& f : folds)
            sum += pattern_deviance(t, pat, d, f.validation, d.n_rows());
        CHECK(std::abs(whole - sum) < 1e-9 * (1.0 + std::abs(whole)));
    }
}

TEST_CASE("test-sample selection finds the two-group structure") {
    int two_groups = 0;
    int structured = 0;
    const int reps = 20;
    SelectionConfig cfg;
    for (int rep = 0; rep < reps; ++rep) {
        const auto train = two_group_data(400, 3200 + 2ul * rep);
        const auto test = two_group_data(200, 3201 + 2ul * rep);
        const auto res = select_test_sample(train, test, cfg, 3300 + (std::uint64_t)rep);
        two_groups += res.grouping.group_count == 2;
        structured += res.grouping.group_count >= 2;

        // Entries ascend in lambda and the winner replays as the argmin with
        // ties resolved toward the larger lambda.
        const auto& es = res.report.entries;
        REQUIRE(!es.empty());
        std::size_t want = 0;
        for (std::size_t m = 1; m < es.size(); ++m) {
            CHECK(es[m].lambda > es[m - 1].lambda);
            if (es[m].deviance <= es[want].deviance) want = m;
        }
        CHECK(res.report.chosen == want);
        CHECK(es[res.report.chosen].group_count == res.grouping.group_count);

        // AIC/BIC columns are exact functions of deviance and size.
        const double ln = std::log(static_cast<double>(res.report.validation_events));
        for (const auto& e : es) {
            CHECK(e.aic == doctest::Approx(e.deviance + 2.0 * e.group_count));
            CHECK(e.bic == doctest::Approx(e.deviance + ln * e.group_count));
        }

        // The sheared tree routes every test record to its chosen group.
        for (std::size_t i = 0; i < 50; ++i) {
            const auto leaf = res.initial.route(test, i);
            const auto cut = res.sheared.route(test, i);
            CHECK(res.sheared.nodes.at(cut).group ==
                  res.grouping.leaf_group.at(leaf));
        }
    }
    CHECK(two_groups >= 11);
    CHECK(structured >= 17);
}

TEST_CASE("test-sample selection is deterministic") {
    const auto train = two_group_data(300, 3401);
    const auto test = two_group_data(150, 3402);
    SelectionConfig cfg;
    const auto a = select_test_sample(train, test, cfg, 77);
    const auto b = select_test_sample(train, test, cfg, 77);
    CHECK(reports_equal(a.report, b.report));
    CHECK(a.grouping.leaf_group == b.grouping.leaf_group);
}

TEST_CASE("test-sample selection accepts train as its own test set") {
    const auto d = two_group_data(250, 3501);
    SelectionConfig cfg;
    const auto res = select_test_sample(d, d, cfg, 3502);
    for (const auto& e : res.report.entries) CHECK(std::isfinite(e.deviance));
    CHECK(res.grouping.group_count >= 1);
}

TEST_CASE("null data selects a single group most of the time") {
    int single = 0;
    const int reps = 20;
    SelectionConfig cfg;
    for (int rep = 0; rep < reps; ++rep) {
        const auto train = null_data(400, 3600 + 2ul * rep);
        const auto test = null_data(200, 3601 + 2ul * rep);
        const auto res = select_test_sample(train, test, cfg, 3700 + (std::uint64_t)rep);
        single += res.grouping.group_count == 1;
    }
    CHECK(single >= 16);
}

TEST_CASE("cross-validation selects from the full-data path") {
    const auto d = two_group_data(320, 3801);
    SelectionConfig cfg;
    const auto res = select_cv(d, 5, cfg, 3802);
    REQUIRE(!res.report.entries.empty());
    CHECK(res.report.entries.size() == res.path.patterns.size());
    const auto& pat = res.path.patterns[res.report.chosen];
    CHECK(res.grouping.leaf_group == pat.grouping.leaf_group);
    CHECK(res.grouping.group_count == pat.grouping.group_count);
    for (const auto& e : res.report.entries) {
        CHECK(std::isfinite(e.deviance));
        CHECK(e.cv_se >= 0.0);
    }

    const auto again = select_cv(d, 5, cfg, 3802);
    CHECK(reports_equal(res.report, again.report));

    int two = 0;
    for (int rep = 0; rep < 8; ++rep) {
        const auto dd = two_group_data(320, 3900 + (std::uint64_t)rep);
        const auto r = select_cv(dd, 5, cfg, 3950 + (std::uint64_t)rep);
        two += r.grouping.group_count == 2;
    }
    CHECK(two >= 5);
}

TEST_CASE("leave-one-out runs on tiny data") {
    const auto d = two_group_data(25, 4001);
    SelectionConfig cfg;
    cfg.tree.max_depth = 1;
    cfg.tree.min_node_size = 5;
    cfg.tree.min_node_events = 2;
    cfg.tree.split.min_child_size = 2;
    cfg.tree.split.min_child_events = 1;
    const auto res = select_cv(d, d.n_rows(), cfg, 4002);
    for (const auto& e : res.report.entries) CHECK(std::isfinite(e.deviance));
}

TEST_CASE("the one-SE option never picks a smaller lambda") {
    SelectionConfig strict, loose;
    loose.one_se = true;
    for (int rep = 0; rep < 5; ++rep) {
        const auto d = two_group_data(300, 4100 + (std::uint64_t)rep);
        const auto a = select_cv(d, 5, strict, 4200 + (std::uint64_t)rep);
        const auto b = select_cv(d, 5, loose, 4200 + (std::uint64_t)rep);
        const double la = a.report.entries[a.report.chosen].lambda;
        const double lb = b.report.entries[b.report.chosen].lambda;
        CHECK(lb >= la);
        CHECK(b.report.entries[b.report.chosen].deviance <=
              a.report.entries[a.report.chosen].deviance +
                  a.report.entries[a.report.chosen].cv_se + 1e-12);
    }
}

TEST_CASE("information criteria replay as argmin of their columns") {
    const auto d = two_group_data(300, 4301);
    SelectionConfig cfg;
    const auto aic = select_ic(d, SelectionCriterion::aic, cfg, 4302);
    const auto bic = select_ic(d, SelectionCriterion::bic, cfg, 4302);
    CHECK(aic.report.validation_events == d.n_events());

    std::size_t want_a = 0, want_b = 0;
    for (std::size_t m = 1; m < aic.report.entries.size(); ++m) {
        if (aic.report.entries[m].aic <= aic.report.entries[want_a].aic) want_a = m;
        if (bic.report.entries[m].bic <= bic.report.entries[want_b].bic) want_b = m;
    }
    CHECK(aic.report.chosen == want_a);
    CHECK(bic.report.chosen == want_b);

    // Same tree and path on both runs, so the BIC winner cannot be larger
    // than the AIC winner once log(n') > 2 (here n' > 8).
    REQUIRE(d.n_events() > 8);
    CHECK(bic.report.entries[bic.report.chosen].group_count <=
          aic.report.entries[aic.report.chosen].group_count);

    CHECK_THROWS_AS(
        select_ic(d, SelectionCriterion::test_sample, cfg, 1),
        ConfigError);
}

TEST_CASE("selection reports export to csv and json") {
    const auto d = two_group_data(250, 4401);
    SelectionConfig cfg;
    const auto res = select_ic(d, SelectionCriterion::aic, cfg, 4402);
    const auto csv = res.report.to_csv();
    const auto lines = std::count(csv.begin(), csv.end(), '\n');
    CHECK(static_cast<std::size_t>(lines) == res.report.entries.size() + 1);
    CHECK(csv.rfind("lambda,groups,deviance,aic,bic,cv_se,chosen\n", 0) == 0);

    const auto doc = nlohmann::json::parse(res.report.to_json());
    CHECK(doc["criterion"] == "aic");
    CHECK(doc["entries"].size() == res.report.entries.size());
    CHECK(doc["chosen"] == res.report.chosen);
    CHECK(doc["entries"][0]["lambda"] == res.report.entries[0].lambda);
}
