#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "survtreeful/dataset.hpp"
#include "survtreeful/fusion.hpp"
#include "survtreeful/rng.hpp"
#include "survtreeful/tree.hpp"

namespace survtreeful {

/// One group's line in a summary table. Group 1 is the reference (the
/// lowest-hazard group under pipeline labelings): beta = se = 0,
/// hazard_ratio = 1, p = 1, point confidence interval.
struct GroupRow {
    std::int32_t group = 1;
    std::size_t n = 0;
    std::size_t events = 0;
    double km_median = 0.0;  // descriptive; +inf when S(t) stays above 1/2
    double beta = 0.0;       // log hazard ratio vs group 1
    double se = 0.0;
    double hazard_ratio = 1.0;
    double z = 0.0;
    double p = 1.0;          // two-sided, standard normal
    double beta_lo = 0.0;    // normal CI on the log-hazard scale; the
    double beta_hi = 0.0;    // hazard-ratio CI is its exponential
    bool diverged = false;   // |beta| hit the fitter's cap
};

struct GroupSummary {
    std::vector<GroupRow> rows;  // ascending group id, rows[0] = reference
    bool corrected = false;      // estimates have been bias-corrected
    double level = 0.95;

    std::string to_csv() const;
    std::string to_json() const;
};

/// Group id of a routed record: the terminal's own label when the tree has
/// been sheared, otherwise the grouping's entry for the leaf. Throws
/// DataError when the leaf is covered by neither.
std::int32_t route_group(const Tree& tree, const Grouping& grouping,
                         const SurvivalDataset& data, std::size_t row);

/// Cox model on group dummies over all rows of `data` routed through `tree`,
/// reference = group 1. SEs come from the inverse observed information.
/// K = 1 yields the reference-only row. Throws DataError when a group has
/// no rows or the data has no events.
GroupSummary group_summaries(const SurvivalDataset& data, const Tree& tree,
                             const Grouping& grouping, double level = 0.95);

/// One accepted bootstrap replicate: its group count, the per-group
/// correction terms tau_bk' = beta_k'(D,Tb) - beta_k'(Db,Tb) on the
/// coefficient and SD scales, and the row-normalized K x Kb mapping weights.
/// The corrected estimate adds the weighted mean of these terms, which
/// subtracts the classical bootstrap-minus-original bias estimate.
struct BootstrapRecord {
    std::int32_t group_count = 0;
    std::vector<double> tau;     // k' = 1..Kb, [0] = 0 (both references)
    std::vector<double> tau_sd;  // same layout, sqrt(n)-scaled SE differences
    std::vector<std::vector<double>> weights;  // K rows, each sums to 1
};

struct BBCConfig {
    std::size_t bootstraps = 25;  // B
    TreeConfig tree;              // bootstrap trees always use plain splits
    FusionConfig fusion;
    double level = 0.95;
    // Diagnostic mode: every "resample" is the original data in original
    // order, so every tau is identically zero and corrections must vanish.
    bool identity_resample = false;
};

/// Bias-corrected group summary. Corrections apply to the non-reference
/// groups only; the reference stays pinned at beta = 0. SD-scale vectors
/// use the sqrt(n) convention (sd = se * sqrt(n)) so corrections transfer
/// across sample sizes.
struct BBCReport {
    std::size_t b_used = 0;  // accepted replicates
    std::size_t draws = 0;   // total draws including rejected ones
    std::size_t n_rows = 0;
    double level = 0.95;
    GroupSummary raw;        // uncorrected table (counts, medians, raw fit)
    GroupSummary corrected;  // same layout with corrected beta/se columns
    std::vector<double> beta_bias;       // mean mapped tau per group, [0] incl.
    std::vector<double> sd_bias;
    std::vector<double> corrected_beta;  // raw beta + beta_bias, [0] = 0
    std::vector<double> corrected_sd;    // floored at 0
    std::vector<double> corrected_se;    // corrected_sd / sqrt(n)
    std::vector<BootstrapRecord> replicates;
    std::vector<std::string> warnings;

    std::string to_csv() const;  // raw and corrected blocks per group
    std::string to_json() const;
};

/// Bootstrap bias correction for the group summary of (tree, grouping) on
/// `data`. Each replicate draws a status-stratified bootstrap resample,
/// grows a plain-split tree of the same depth as `tree`, fuses it, and picks
/// the path pattern with the matching group count (else the smallest larger
/// one; smallest lambda on ties). Replicates whose bootstrap grouping cannot
/// reach the target count, whose refit diverges, or whose reference group
/// has no events on the original data are redrawn, up to 3B draws total.
BBCReport bootstrap_bias_correct(const SurvivalDataset& data, const Tree& tree,
                                 const Grouping& grouping,
                                 const BBCConfig& config = {},
                                 std::uint64_t seed = 0);

struct GroupInterval {
    std::int32_t group = 1;
    double beta_lo = 0.0;
    double beta_hi = 0.0;
    double hr_lo = 1.0;
    double hr_hi = 1.0;
};

/// Normal intervals beta_k +/- z * se_k from the corrected estimates;
/// the hazard-ratio interval is the exponentiated one.
std::vector<GroupInterval> confidence_intervals(const BBCReport& report,
                                                double level = 0.95);

/// Standard normal quantile. Throws ConfigError unless 0 < p < 1.
double normal_quantile(double p);

}  // namespace survtreeful
