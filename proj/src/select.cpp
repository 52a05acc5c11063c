#include "survtreeful/select.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "json.hpp"
#include "survtreeful/errors.hpp"
#include "survtreeful/survival.hpp"

namespace survtreeful {

namespace {

const char* criterion_name(SelectionCriterion c) {
    switch (c) {
        case SelectionCriterion::test_sample: return "test-sample";
        case SelectionCriterion::cross_validation: return "cv";
        case SelectionCriterion::aic: return "aic";
        case SelectionCriterion::bic: return "bic";
    }
    return "?";
}

// Ascending-lambda scan keeping ties, so equal scores resolve to the larger
// lambda (fewer groups).
std::size_t argmin_larger_lambda(const std::vector<double>& scores) {
    std::size_t best = 0;
    for (std::size_t m = 1; m < scores.size(); ++m)
        if (scores[m] <= scores[best]) best = m;
    return best;
}

void fill_ic_columns(SelectionReport& report) {
    const double penalty =
        report.validation_events > 0
            ? std::log(static_cast<double>(report.validation_events))
            : 0.0;
    for (auto& e : report.entries) {
        e.aic = e.deviance + 2.0 * e.group_count;
        e.bic = e.deviance + penalty * e.group_count;
    }
}

const FusionPattern& nearest_pattern(const FusionPath& path, double lambda) {
    std::size_t best = 0;
    double best_gap = std::abs(path.patterns[0].lambda - lambda);
    for (std::size_t m = 1; m < path.patterns.size(); ++m) {
        const double gap = std::abs(path.patterns[m].lambda - lambda);
        if (gap < best_gap || (gap == best_gap &&
                               path.patterns[m].lambda > path.patterns[best].lambda)) {
            best = m;
            best_gap = gap;
        }
    }
    return path.patterns[best];
}

SelectionResult finish(Tree initial, FusionPath path, SelectionReport report) {
    SelectionResult res;
    res.grouping = path.patterns[report.chosen].grouping;
    res.sheared = shear(initial, res.grouping);
    res.initial = std::move(initial);
    res.path = std::move(path);
    res.report = std::move(report);
    return res;
}

}  // namespace

double pattern_deviance(const Tree& tree, const FusionPattern& pattern,
                        const SurvivalDataset& data, const SampleIndex& rows,
                        std::size_t n_train) {
    std::vector<double> eta(rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const auto leaf = tree.route(data, rows.rows[k]);
        const auto gid = pattern.grouping.leaf_group.at(leaf);
        eta[k] = pattern.relaxed_beta[static_cast<std::size_t>(gid - 1)];
    }
    const auto times = gather(data.time, rows);
    const auto statuses = gather(data.status, rows);
    return deviance(pattern.baseline, eta, times, statuses, n_train);
}

std::vector<CvFold> stratified_folds(const SurvivalDataset& data,
                                     std::size_t folds, Rng& rng) {
    if (folds < 2) throw ConfigError("cross-validation needs at least 2 folds");
    if (folds > data.n_rows())
        throw ConfigError("more folds than records");
    std::vector<std::uint32_t> events, censored;
    for (std::size_t i = 0; i < data.n_rows(); ++i)
        (data.status[i] ? events : censored)
            .push_back(static_cast<std::uint32_t>(i));
    rng.shuffle(events);
    rng.shuffle(censored);
    std::vector<CvFold> out(folds);
    std::size_t next = 0;
    for (const auto* pool : {&events, &censored})
        for (const auto row : *pool) {
            out[next % folds].validation.rows.push_back(row);
            ++next;
        }
    for (std::size_t v = 0; v < folds; ++v) {
        std::sort(out[v].validation.rows.begin(), out[v].validation.rows.end());
        std::vector<std::uint8_t> held(data.n_rows(), 0);
        for (const auto row : out[v].validation.rows) held[row] = 1;
        for (std::size_t i = 0; i < data.n_rows(); ++i)
            if (!held[i]) out[v].train.rows.push_back(static_cast<std::uint32_t>(i));
    }
    return out;
}

SelectionResult select_test_sample(const SurvivalDataset& train,
                                   const SurvivalDataset& test,
                                   const SelectionConfig& config,
                                   std::uint64_t seed) {
    if (train.n_events() == 0 || test.n_rows() == 0)
        throw DataError("test-sample selection needs events in train and a non-empty test set");
    Tree initial = grow(train, config.tree, seed);
    FusionPath path = fusion_path(initial, train, config.fusion);

    SelectionReport report;
    report.criterion = SelectionCriterion::test_sample;
    for (std::size_t i = 0; i < test.n_rows(); ++i)
        report.validation_events += test.status[i] ? 1 : 0;
    std::vector<double> scores;
    const auto all_test = full_index(test);
    for (const auto& pat : path.patterns) {
        SelectionEntry e;
        e.lambda = pat.lambda;
        e.group_count = pat.grouping.group_count;
        e.deviance =
            pattern_deviance(initial, pat, test, all_test, train.n_rows());
        scores.push_back(e.deviance);
        report.entries.push_back(e);
    }
    fill_ic_columns(report);
    report.chosen = argmin_larger_lambda(scores);
    return finish(std::move(initial), std::move(path), std::move(report));
}

SelectionResult select_cv(const SurvivalDataset& data, std::size_t folds,
                          const SelectionConfig& config, std::uint64_t seed) {
    Tree initial = grow(data, config.tree, seed);
    FusionPath path = fusion_path(initial, data, config.fusion);
    const std::size_t M = path.patterns.size();

    Rng root(seed);
    Rng fold_rng = root.child("cv-folds");
    const auto fold_sets = stratified_folds(data, folds, fold_rng);

    std::vector<std::vector<double>> fold_dev(M, std::vector<double>(folds));
    for (std::size_t v = 0; v < folds; ++v) {
        TreeConfig fold_cfg = config.tree;
        fold_cfg.use_iv = config.fold_trees_use_iv && fold_cfg.use_iv;
        const std::uint64_t fold_seed =
            root.child("cv-tree").child(static_cast<std::uint64_t>(v)).next_u64();
        const Tree fold_tree =
            grow(data, fold_sets[v].train, fold_cfg, fold_seed);
        const FusionPath fold_path =
            fusion_path(fold_tree, data, path.lambda_grid, config.fusion);
        for (std::size_t m = 0; m < M; ++m) {
            const auto& pat = nearest_pattern(fold_path, path.patterns[m].lambda);
            fold_dev[m][v] = pattern_deviance(fold_tree, pat, data,
                                              fold_sets[v].validation,
                                              fold_sets[v].train.size());
        }
    }

    SelectionReport report;
    report.criterion = SelectionCriterion::cross_validation;
    report.validation_events = data.n_events();
    std::vector<double> scores;
    for (std::size_t m = 0; m < M; ++m) {
        SelectionEntry e;
        e.lambda = path.patterns[m].lambda;
        e.group_count = path.patterns[m].grouping.group_count;
        e.deviance = std::accumulate(fold_dev[m].begin(), fold_dev[m].end(), 0.0);
        const double mean = e.deviance / static_cast<double>(folds);
        double ss = 0.0;
        for (const double d : fold_dev[m]) ss += (d - mean) * (d - mean);
        if (folds > 1)
            e.cv_se = std::sqrt(ss / static_cast<double>(folds - 1)) *
                      std::sqrt(static_cast<double>(folds));
        scores.push_back(e.deviance);
        report.entries.push_back(e);
    }
    fill_ic_columns(report);
    report.chosen = argmin_larger_lambda(scores);
    if (config.one_se) {
        const auto strict = report.chosen;
        const double limit = report.entries[strict].deviance +
                             report.entries[strict].cv_se;
        for (std::size_t m = strict; m < M; ++m)
            if (report.entries[m].deviance <= limit) report.chosen = m;
    }
    return finish(std::move(initial), std::move(path), std::move(report));
}

SelectionResult select_ic(const SurvivalDataset& data,
                          SelectionCriterion criterion,
                          const SelectionConfig& config, std::uint64_t seed) {
    if (criterion != SelectionCriterion::aic &&
        criterion != SelectionCriterion::bic)
        throw ConfigError("select_ic expects aic or bic");
    if (data.n_events() == 0) throw DataError("no events");
    Tree initial = grow(data, config.tree, seed);
    FusionPath path = fusion_path(initial, data, config.fusion);

    SelectionReport report;
    report.criterion = criterion;
    report.validation_events = data.n_events();
    const auto all = full_index(data);
    for (const auto& pat : path.patterns) {
        SelectionEntry e;
        e.lambda = pat.lambda;
        e.group_count = pat.grouping.group_count;
        e.deviance = pattern_deviance(initial, pat, data, all, data.n_rows());
        report.entries.push_back(e);
    }
    fill_ic_columns(report);
    std::vector<double> scores;
    for (const auto& e : report.entries)
        scores.push_back(criterion == SelectionCriterion::aic ? e.aic : e.bic);
    report.chosen = argmin_larger_lambda(scores);
    return finish(std::move(initial), std::move(path), std::move(report));
}

std::string SelectionReport::to_csv() const {
    std::string out = "lambda,groups,deviance,aic,bic,cv_se,chosen\n";
    char buf[160];
    for (std::size_t m = 0; m < entries.size(); ++m) {
        const auto& e = entries[m];
        std::snprintf(buf, sizeof buf, "%.6g,%d,%.6g,%.6g,%.6g,%.6g,%d\n",
                      e.lambda, e.group_count, e.deviance, e.aic, e.bic, e.cv_se,
                      m == chosen ? 1 : 0);
        out += buf;
    }
    return out;
}

std::string SelectionReport::to_json() const {
    nlohmann::json doc;
    doc["criterion"] = criterion_name(criterion);
    doc["validation_events"] = validation_events;
    doc["chosen"] = chosen;
    doc["entries"] = nlohmann::json::array();
    for (const auto& e : entries)
        doc["entries"].push_back({{"lambda", e.lambda},
                                  {"groups", e.group_count},
                                  {"deviance", e.deviance},
                                  {"aic", e.aic},
                                  {"bic", e.bic},
                                  {"cv_se", e.cv_se}});
    return doc.dump(2);
}

}  // namespace survtreeful
