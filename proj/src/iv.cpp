#include "survtreeful/iv.hpp"

#include <algorithm>

namespace survtreeful {
namespace {

std::vector<double> gather_var(const SurvivalDataset& data, std::size_t var,
                               const SampleIndex& rows) {
    return gather(data.covariates[var], rows);
}

SampleIndex concat(const SampleIndex& a, const SampleIndex& b) {
    SampleIndex out;
    out.rows.reserve(a.size() + b.size());
    out.rows.insert(out.rows.end(), a.rows.begin(), a.rows.end());
    out.rows.insert(out.rows.end(), b.rows.begin(), b.rows.end());
    return out;
}

}  // namespace

SplitResult plain_split(const SurvivalDataset& data,
                        const SampleIndex& node_rows,
                        const SplitSearchConfig& cfg) {
    const auto times = gather(data.time, node_rows);
    const auto statuses = gather(data.status, node_rows);
    const LogrankScorer scorer(times, statuses);

    SplitResult best;
    for (std::size_t j = 0; j < data.n_vars(); ++j) {
        const auto z = gather_var(data, j, node_rows);
        const auto r =
            best_split_for_variable(scorer, z, data.schema[j], j, cfg);
        if (r.feasible && (!best.feasible || r.statistic > best.statistic))
            best = r;
    }
    return best;
}

SplitResult iv_split(const SurvivalDataset& data, const SampleIndex& node_rows,
                     const IVConfig& cfg, Rng& rng) {
    const std::size_t n = node_rows.size();
    std::size_t node_events = 0, node_censored = 0;
    for (const auto r : node_rows.rows)
        data.status[r] ? ++node_events : ++node_censored;

    if (!cfg.use_iv || n < cfg.iv_min_rows || node_events < cfg.iv_min_events ||
        node_events < 3 || node_censored < 3)
        return plain_split(data, node_rows, cfg.split);

    const auto parts = stratified_partition(data, node_rows, 3, rng);
    const SampleIndex& d1 = parts[0];
    const SampleIndex& d2 = parts[1];
    const SampleIndex& d3 = parts[2];

    const auto d12b =
        stratified_bootstrap(data, concat(d1, d2), d2.size() + d3.size(), rng);
    const auto d1p = concat(d1, d12b);

    // Candidate split per variable on the training composite.
    const auto t1 = gather(data.time, d1p);
    const auto s1 = gather(data.status, d1p);
    const LogrankScorer scorer1(t1, s1);
    std::vector<SplitResult> candidates(data.n_vars());
    for (std::size_t j = 0; j < data.n_vars(); ++j) {
        const auto z = gather_var(data, j, d1p);
        candidates[j] =
            best_split_for_variable(scorer1, z, data.schema[j], j, cfg.split);
    }

    const auto d2oob = out_of_bag(d2, d12b);
    SampleIndex d2p = concat(d3, d2oob);
    const std::size_t fixed = d2oob.size() + d3.size();
    if (n > fixed) {
        const auto d23b =
            stratified_bootstrap(data, concat(d2, d3), n - fixed, rng);
        d2p = concat(d2p, d23b);
    }

    // Frozen re-scoring on the validation composite; variables with no
    // candidate or an undefined statistic drop out.
    const auto t2 = gather(data.time, d2p);
    const auto s2 = gather(data.status, d2p);
    const LogrankScorer scorer2(t2, s2);
    std::vector<std::pair<double, std::size_t>> ranked;  // (-Q', variable)
    for (std::size_t j = 0; j < data.n_vars(); ++j) {
        if (!candidates[j].feasible) continue;
        const auto z = gather_var(data, j, d2p);
        const auto q = split_statistic(scorer2, z, candidates[j].spec);
        if (q) ranked.emplace_back(-*q, j);
    }
    if (ranked.empty()) return {};
    std::sort(ranked.begin(), ranked.end());

    // Re-optimize the winner's rule on the full node data; if that search is
    // infeasible (subsample quirks), fall through to the next-best variable.
    const auto times = gather(data.time, node_rows);
    const auto statuses = gather(data.status, node_rows);
    const LogrankScorer scorer(times, statuses);
    for (const auto& [neg_q, j] : ranked) {
        const auto z = gather_var(data, j, node_rows);
        const auto r =
            best_split_for_variable(scorer, z, data.schema[j], j, cfg.split);
        if (r.feasible) return r;
    }
    return {};
}

}  // namespace survtreeful
