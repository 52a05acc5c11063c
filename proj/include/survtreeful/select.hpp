#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "survtreeful/fusion.hpp"
#include "survtreeful/tree.hpp"

namespace survtreeful {

enum class SelectionCriterion { test_sample, cross_validation, aic, bic };

struct SelectionEntry {
    double lambda = 0.0;
    std::int32_t group_count = 0;
    double deviance = 0.0;  // validated (test-sample/CV) or in-sample (IC)
    double aic = 0.0;
    double bic = 0.0;
    double cv_se = 0.0;  // std. error of the summed CV deviance, CV only
};

struct SelectionReport {
    std::vector<SelectionEntry> entries;  // one per pattern, ascending lambda
    std::size_t chosen = 0;               // index into entries
    SelectionCriterion criterion = SelectionCriterion::test_sample;
    std::size_t validation_events = 0;  // n' behind the AIC/BIC columns

    std::string to_csv() const;
    std::string to_json() const;
};

struct SelectionConfig {
    TreeConfig tree;
    FusionConfig fusion;
    bool fold_trees_use_iv = false;  // fold trees default to the plain search
    bool one_se = false;             // CV only: largest lambda within one SE
};

struct SelectionResult {
    Tree initial;      // the tree the fusion path was built on
    Tree sheared;      // minimal tree for the chosen grouping
    Grouping grouping;
    FusionPath path;   // full-data path; report entries align with patterns
    SelectionReport report;
};

/// Deviance of the fused model (tree routing + pattern groups + train-side
/// baseline) over the given rows. n_train sets the small-baseline floor.
double pattern_deviance(const Tree& tree, const FusionPattern& pattern,
                        const SurvivalDataset& data, const SampleIndex& rows,
                        std::size_t n_train);

struct CvFold {
    SampleIndex train;
    SampleIndex validation;
};

/// Status-stratified fold assignment: events and censored records are
/// shuffled separately and dealt round-robin, so every fold keeps events
/// whenever V allows it.
std::vector<CvFold> stratified_folds(const SurvivalDataset& data, std::size_t folds,
                                     Rng& rng);

/// Grows the tree and fusion path on train, scores every pattern on test
/// with the train-side baseline, picks the deviance argmin (ties go to the
/// larger lambda), and shears.
SelectionResult select_test_sample(const SurvivalDataset& train,
                                   const SurvivalDataset& test,
                                   const SelectionConfig& config,
                                   std::uint64_t seed);

/// V-fold cross-validation. The full-data path fixes the lambda grid; each
/// fold grows its own tree, reruns fusion at that shared grid, and scores
/// its held-out records; per-pattern deviances add across folds (nearest
/// fold lambda stands in when a fold lacks the exact pattern). The chosen
/// grouping always comes from the full-data path.
SelectionResult select_cv(const SurvivalDataset& data, std::size_t folds,
                          const SelectionConfig& config, std::uint64_t seed);

/// Heuristic single-fit selection: in-sample deviance plus lambda0 * K with
/// lambda0 = 2 (aic) or log(#events) (bic). criterion must be aic or bic.
SelectionResult select_ic(const SurvivalDataset& data,
                          SelectionCriterion criterion,
                          const SelectionConfig& config, std::uint64_t seed);

}  // namespace survtreeful
