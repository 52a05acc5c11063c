#pragma once

#include "survtreeful/dataset.hpp"
#include "survtreeful/rng.hpp"
#include "survtreeful/split.hpp"

namespace survtreeful {

struct IVConfig {
    SplitSearchConfig split;
    bool use_iv = true;          // false: plain best-split on full node data
    std::size_t iv_min_rows = 30;
    std::size_t iv_min_events = 9;  // 3x the per-child event minimum
};

/// Best split over all variables on the node's own data; ties go to the
/// lower variable index.
SplitResult plain_split(const SurvivalDataset& data,
                        const SampleIndex& node_rows,
                        const SplitSearchConfig& cfg);

/// Intersected-validation node split:
///   1. stratified 3-way partition D = D1+D2+D3 of the node rows;
///   2. D1' = D1 + bootstrap of size n2+n3 from D1+D2;
///   3. per-variable candidate split on D1';
///   4. D2' = D3 + out-of-bag rows of D2 + bootstrap of size n-n2'-n3
///      from D2+D3 (empty when that size is not positive);
///   5. candidates re-scored frozen on D2'; variables with no feasible
///      candidate or an undefined validation statistic drop out;
///   6. the winner's cutoff is re-optimized on the full node data.
/// Nodes too small for the partition (iv_min_rows/iv_min_events, or a
/// censoring stratum under 3 rows) fall back to plain_split, as does
/// use_iv = false.
SplitResult iv_split(const SurvivalDataset& data, const SampleIndex& node_rows,
                     const IVConfig& cfg, Rng& rng);

}  // namespace survtreeful
