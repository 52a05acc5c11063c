#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "survtreeful/dataset.hpp"
#include "survtreeful/survival.hpp"

namespace survtreeful {

/// Binary split rule. Threshold rules send z <= threshold left; subset rules
/// send rows whose level has in_left[level] == 1 left. Levels beyond
/// in_left's length (unseen at fit time) route right.
struct SplitSpec {
    std::size_t variable = 0;
    bool is_subset = false;
    double threshold = 0.0;
    std::vector<std::uint8_t> in_left;
};

struct SplitResult {
    SplitSpec spec;
    double statistic = 0.0;  // hard logrank Q at the chosen rule
    bool feasible = false;
};

enum class SplitMethod { automatic, force_gs, force_sss };

struct SplitSearchConfig {
    double shape_a = 50.0;        // sigmoid steepness on the [0,1] scale
    int gs_sss_switch = 20;       // distinct-value count where SSS takes over
    std::size_t min_child_size = 20;
    std::size_t min_child_events = 5;
    std::size_t max_subset_levels = 12;
    SplitMethod method = SplitMethod::automatic;
};

inline bool routes_left(const SplitSpec& spec, double z) {
    if (!spec.is_subset) return z <= spec.threshold;
    const auto lvl = static_cast<std::size_t>(z);
    return lvl < spec.in_left.size() && spec.in_left[lvl] != 0;
}

/// Left membership of a normalized value under the smooth surrogate,
/// pi(a(c - z)); equals 0.5 when z == c.
inline double sigmoid_membership(double z, double c, double a) {
    return 1.0 / (1.0 + std::exp(-a * (c - z)));
}

/// Hard Q of an arbitrary rule on this node's data; no admissibility checks.
/// z is the node-local column of spec.variable. nullopt on zero variance.
std::optional<double> split_statistic(const LogrankScorer& scorer,
                                      std::span<const double> z,
                                      const SplitSpec& spec);

/// Exhaustive scan over midpoints of consecutive distinct values. Only
/// cutoffs whose children meet min_child_size and min_child_events are
/// admissible; ties in Q go to the cutoff closest to the node median.
SplitResult greedy_search(const LogrankScorer& scorer,
                          std::span<const double> z, std::size_t variable,
                          const SplitSearchConfig& cfg);

/// Smooth-surrogate search: min-max normalizes z, maximizes the soft
/// statistic over a 50-point quantile grid restricted to the admissible
/// cutoff range, refines with golden-section search (tolerance 1e-4 on the
/// normalized scale), and reports the hard Q at the refined cutoff.
SplitResult sss_search(const LogrankScorer& scorer, std::span<const double> z,
                       std::size_t variable, const SplitSearchConfig& cfg);

/// Nominal-subset scan. z holds level indices; n_levels is the schema level
/// count. Up to max_subset_levels present levels every proper subset is
/// enumerated (canonical form keeps the lowest-indexed present level on the
/// left); beyond that levels are ordered by event rate and scanned like an
/// ordinal variable.
SplitResult subset_search(const LogrankScorer& scorer,
                          std::span<const double> z, std::size_t n_levels,
                          std::size_t variable, const SplitSearchConfig& cfg);

/// Dispatch: nominal -> subset_search; otherwise greedy_search when the node
/// has at most gs_sss_switch distinct values, sss_search when more. The
/// method flag forces one engine (force_sss still needs > 2 distinct values
/// and falls back to greedy below that).
SplitResult best_split_for_variable(const LogrankScorer& scorer,
                                    std::span<const double> z,
                                    const CovariateSpec& spec,
                                    std::size_t variable,
                                    const SplitSearchConfig& cfg);

}  // namespace survtreeful
