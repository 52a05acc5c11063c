#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "survtreeful/errors.hpp"
#include "survtreeful/rng.hpp"

namespace survtreeful {

enum class CovariateKind { continuous, binary, nominal };

struct CovariateSpec {
    std::string name;
    CovariateKind kind = CovariateKind::continuous;
    std::vector<std::string> levels;  // nominal only, ordered

    std::size_t level_count() const { return levels.size(); }
};

/// Validates: unique names, nominal level lists non-empty and duplicate-free.
/// Throws ConfigError on violation.
void validate_schema(const std::vector<CovariateSpec>& schema);

/// Column-major survival data. Nominal covariates are stored as the level
/// index (0-based) cast to double; binary as 0/1.
struct SurvivalDataset {
    std::vector<CovariateSpec> schema;
    std::vector<double> time;            // observed time, > 0
    std::vector<std::uint8_t> status;    // 1 = event, 0 = censored
    std::vector<std::vector<double>> covariates;  // [variable][row]

    std::size_t n_rows() const { return time.size(); }
    std::size_t n_vars() const { return schema.size(); }
    std::size_t n_events() const;

    /// Index of the named covariate, or throws ConfigError.
    std::size_t var_index(const std::string& name) const;
};

/// Multiset of row indices into a parent dataset (bootstrap allows repeats).
struct SampleIndex {
    std::vector<std::uint32_t> rows;

    std::size_t size() const { return rows.size(); }
    bool empty() const { return rows.empty(); }
};

/// Identity pool 0..n-1 over the whole dataset.
SampleIndex full_index(const SurvivalDataset& data);

/// Parses a CSV file (header row required, ',' delimiter). Errors carry the
/// 1-based data row number. Status values must be 0 or 1; times must be > 0;
/// nominal values must match a declared level exactly.
SurvivalDataset load_csv(const std::string& path,
                         std::vector<CovariateSpec> schema,
                         const std::string& time_col,
                         const std::string& status_col);

/// Splits pool rows into k parts, stratified by censoring status. Within each
/// stratum part sizes differ by at most 1; when the stratum size is not
/// divisible by k the lowest-numbered parts take the extra row. Deterministic
/// given rng state. Throws DataError if either stratum has fewer than k rows.
std::vector<SampleIndex> stratified_partition(const SurvivalDataset& data,
                                              const SampleIndex& pool, int k,
                                              Rng& rng);

std::vector<SampleIndex> stratified_partition(const SurvivalDataset& data,
                                              int k, Rng& rng);

/// Draws m rows with replacement from pool, stratified by censoring status.
/// Stratum quotas follow the pool proportions with largest-remainder
/// rounding (tie goes to the event stratum); event rows are drawn first.
/// Throws DataError if m < 1 or a stratum with positive quota is empty.
SampleIndex stratified_bootstrap(const SurvivalDataset& data,
                                 const SampleIndex& pool, std::size_t m,
                                 Rng& rng);

/// Distinct pool rows that never appear in drawn, in pool order.
SampleIndex out_of_bag(const SampleIndex& pool, const SampleIndex& drawn);

/// Row-subset extraction (multiset semantics: repeats stay repeated).
std::vector<double> gather(const std::vector<double>& column,
                           const SampleIndex& rows);
std::vector<std::uint8_t> gather(const std::vector<std::uint8_t>& column,
                                 const SampleIndex& rows);

}  // namespace survtreeful
