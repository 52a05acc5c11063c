#include "survtreeful/split.hpp"

#include <algorithm>
#include <bit>
#include <numeric>

namespace survtreeful {
namespace {

struct SortedNode {
    std::vector<std::uint32_t> order;  // row ids sorted by value, then id
    std::vector<double> sorted;        // values in that order
};

SortedNode sort_by_value(std::span<const double> z) {
    SortedNode s;
    s.order.resize(z.size());
    std::iota(s.order.begin(), s.order.end(), 0u);
    std::sort(s.order.begin(), s.order.end(),
              [&](std::uint32_t a, std::uint32_t b) {
                  if (z[a] != z[b]) return z[a] < z[b];
                  return a < b;
              });
    s.sorted.reserve(z.size());
    for (auto r : s.order) s.sorted.push_back(z[r]);
    return s;
}

double median_of_sorted(const std::vector<double>& v) {
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::size_t total_events(const LogrankScorer& scorer) {
    double d = 0.0;
    for (const double dk : scorer.table().deaths) d += dk;
    return static_cast<std::size_t>(d + 0.5);
}

bool children_ok(std::size_t left_n, std::size_t left_e, std::size_t n,
                 std::size_t e, const SplitSearchConfig& cfg) {
    return left_n >= cfg.min_child_size && n - left_n >= cfg.min_child_size &&
           left_e >= cfg.min_child_events &&
           e - left_e >= cfg.min_child_events;
}

}  // namespace

std::optional<double> split_statistic(const LogrankScorer& scorer,
                                      std::span<const double> z,
                                      const SplitSpec& spec) {
    std::vector<double> m(z.size());
    for (std::size_t i = 0; i < z.size(); ++i)
        m[i] = routes_left(spec, z[i]) ? 1.0 : 0.0;
    return scorer.score(m);
}

SplitResult greedy_search(const LogrankScorer& scorer,
                          std::span<const double> z, std::size_t variable,
                          const SplitSearchConfig& cfg) {
    SplitResult res;
    res.spec.variable = variable;
    const std::size_t n = z.size();
    const auto node = sort_by_value(z);
    const double median = median_of_sorted(node.sorted);
    const std::size_t events = total_events(scorer);

    LogrankSweep sweep(scorer);
    bool found = false;
    double best_q = 0.0, best_c = 0.0, best_dist = 0.0;
    std::size_t i = 0;
    while (i < n) {
        const double v = node.sorted[i];
        while (i < n && node.sorted[i] == v) sweep.add_left(node.order[i++]);
        if (i >= n) break;  // no gap after the last distinct value
        if (!children_ok(sweep.left_size(), sweep.left_events(), n, events,
                         cfg))
            continue;
        const auto q = sweep.statistic();
        if (!q) continue;
        const double c = 0.5 * (v + node.sorted[i]);
        const double dist = std::abs(c - median);
        if (!found || *q > best_q ||
            (*q == best_q &&
             (dist < best_dist || (dist == best_dist && c < best_c)))) {
            found = true;
            best_q = *q;
            best_c = c;
            best_dist = dist;
        }
    }
    if (!found) return res;
    res.feasible = true;
    res.statistic = best_q;
    res.spec.threshold = best_c;
    return res;
}

SplitResult sss_search(const LogrankScorer& scorer, std::span<const double> z,
                       std::size_t variable, const SplitSearchConfig& cfg) {
    SplitResult res;
    res.spec.variable = variable;
    const std::size_t n = z.size();
    const auto node = sort_by_value(z);

    std::vector<double> distinct;
    for (const double v : node.sorted)
        if (distinct.empty() || distinct.back() != v) distinct.push_back(v);
    if (distinct.size() <= 2) return greedy_search(scorer, z, variable, cfg);

    // Admissible gaps (cutoff between distinct[g] and distinct[g+1]) form a
    // contiguous range because left counts grow monotonically.
    const std::size_t events = total_events(scorer);
    std::vector<std::size_t> cum_n(distinct.size(), 0), cum_e(distinct.size(), 0);
    {
        std::size_t g = 0, cn = 0, ce = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (node.sorted[i] != distinct[g]) ++g;
            ++cn;
            ce += scorer.death_index(node.order[i]) >= 0 ? 1u : 0u;
            cum_n[g] = cn;
            cum_e[g] = ce;
        }
    }
    std::ptrdiff_t g_lo = -1, g_hi = -1;
    for (std::size_t g = 0; g + 1 < distinct.size(); ++g) {
        if (children_ok(cum_n[g], cum_e[g], n, events, cfg)) {
            if (g_lo < 0) g_lo = static_cast<std::ptrdiff_t>(g);
            g_hi = static_cast<std::ptrdiff_t>(g);
        }
    }
    if (g_lo < 0) return res;

    const double zmin = distinct.front(), zmax = distinct.back();
    const double scale = zmax - zmin;
    auto norm = [&](double x) { return (x - zmin) / scale; };
    const double lo =
        norm(0.5 * (distinct[g_lo] + distinct[g_lo + 1]));
    const double hi =
        norm(0.5 * (distinct[g_hi] + distinct[g_hi + 1]));

    std::vector<double> u(n);
    for (std::size_t i = 0; i < n; ++i) u[i] = norm(z[i]);
    std::vector<double> u_sorted(node.sorted.size());
    for (std::size_t i = 0; i < n; ++i) u_sorted[i] = norm(node.sorted[i]);

    std::vector<double> membership(n);
    auto soft_q = [&](double c) -> double {
        for (std::size_t i = 0; i < n; ++i)
            membership[i] = sigmoid_membership(u[i], c, cfg.shape_a);
        const auto q = scorer.score(membership);
        return q ? *q : -1.0;
    };

    // 50-point quantile grid of the node values inside [lo, hi], plus the
    // interval endpoints.
    std::vector<double> grid{lo, hi};
    {
        const auto b = std::lower_bound(u_sorted.begin(), u_sorted.end(), lo);
        const auto e = std::upper_bound(u_sorted.begin(), u_sorted.end(), hi);
        const std::size_t cnt = static_cast<std::size_t>(e - b);
        if (cnt > 0) {
            for (int j = 0; j < 50; ++j) {
                const std::size_t idx = static_cast<std::size_t>(
                    std::llround(static_cast<double>(j) *
                                 static_cast<double>(cnt - 1) / 49.0));
                grid.push_back(*(b + static_cast<std::ptrdiff_t>(idx)));
            }
        }
        std::sort(grid.begin(), grid.end());
        grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    }

    double best_c = grid.front(), best_val = -1.0;
    std::size_t best_idx = 0;
    for (std::size_t j = 0; j < grid.size(); ++j) {
        const double v = soft_q(grid[j]);
        if (v > best_val) {
            best_val = v;
            best_c = grid[j];
            best_idx = j;
        }
    }
    if (best_val < 0.0) return res;

    // Golden-section refinement inside the bracketing grid cell.
    {
        double a = best_idx > 0 ? grid[best_idx - 1] : lo;
        double b = best_idx + 1 < grid.size() ? grid[best_idx + 1] : hi;
        constexpr double kInvPhi = 0.6180339887498949;
        double x1 = b - kInvPhi * (b - a);
        double x2 = a + kInvPhi * (b - a);
        double f1 = soft_q(x1), f2 = soft_q(x2);
        while (b - a > 1e-4) {
            if (f1 < f2) {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + kInvPhi * (b - a);
                f2 = soft_q(x2);
            } else {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - kInvPhi * (b - a);
                f1 = soft_q(x1);
            }
        }
        const double mid = 0.5 * (a + b);
        const double fm = soft_q(mid);
        if (fm > best_val) {
            best_val = fm;
            best_c = mid;
        }
    }

    const double cutoff = zmin + best_c * scale;
    SplitSpec spec;
    spec.variable = variable;
    spec.threshold = cutoff;
    const auto hard = split_statistic(scorer, z, spec);
    if (!hard) return res;
    res.feasible = true;
    res.spec = spec;
    res.statistic = *hard;
    return res;
}

SplitResult subset_search(const LogrankScorer& scorer,
                          std::span<const double> z, std::size_t n_levels,
                          std::size_t variable, const SplitSearchConfig& cfg) {
    SplitResult res;
    res.spec.variable = variable;
    res.spec.is_subset = true;
    const std::size_t n = z.size();

    std::vector<std::size_t> count(n_levels, 0), events(n_levels, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto lvl = static_cast<std::size_t>(z[i]);
        ++count[lvl];
        events[lvl] += scorer.death_index(i) >= 0 ? 1u : 0u;
    }
    std::vector<std::size_t> present;
    for (std::size_t l = 0; l < n_levels; ++l)
        if (count[l] > 0) present.push_back(l);
    const std::size_t L = present.size();
    if (L < 2) return res;

    if (L > cfg.max_subset_levels) {
        // Ordinal fallback: rank present levels by event rate.
        std::vector<std::size_t> by_rate(present);
        std::sort(by_rate.begin(), by_rate.end(),
                  [&](std::size_t a, std::size_t b) {
                      const double ra = static_cast<double>(events[a]) /
                                        static_cast<double>(count[a]);
                      const double rb = static_cast<double>(events[b]) /
                                        static_cast<double>(count[b]);
                      if (ra != rb) return ra < rb;
                      return a < b;
                  });
        std::vector<double> rank(n_levels, 0.0);
        for (std::size_t r = 0; r < by_rate.size(); ++r)
            rank[by_rate[r]] = static_cast<double>(r);
        std::vector<double> ranked(n);
        for (std::size_t i = 0; i < n; ++i)
            ranked[i] = rank[static_cast<std::size_t>(z[i])];
        const auto gs = greedy_search(scorer, ranked, variable, cfg);
        if (!gs.feasible) return res;
        std::vector<std::uint8_t> in_left(n_levels, 0);
        for (const auto l : present)
            if (rank[l] <= gs.spec.threshold) in_left[l] = 1;
        if (!in_left[present.front()])  // canonical: lowest present level left
            for (const auto l : present) in_left[l] ^= 1;
        res.feasible = true;
        res.statistic = gs.statistic;
        res.spec.in_left = std::move(in_left);
        return res;
    }

    // Per-level at-risk and death arrays; subsets evaluated in O(D) apiece
    // via Gray-code toggling.
    const std::size_t D = scorer.table().size();
    std::vector<double> yl_level(L * D, 0.0), dl_level(L * D, 0.0);
    std::vector<std::size_t> pos_of(n_levels, 0);
    for (std::size_t p = 0; p < L; ++p) pos_of[present[p]] = p;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t p = pos_of[static_cast<std::size_t>(z[i])];
        const std::uint32_t ki = scorer.at_risk_count(i);
        for (std::uint32_t k = 0; k < ki; ++k) yl_level[p * D + k] += 1.0;
        const auto di = scorer.death_index(i);
        if (di >= 0) dl_level[p * D + static_cast<std::size_t>(di)] += 1.0;
    }

    std::vector<double> yl(yl_level.begin(), yl_level.begin() + D);
    std::vector<double> dl(dl_level.begin(), dl_level.begin() + D);
    std::size_t left_n = count[present[0]], left_e = events[present[0]];
    const std::size_t n_events_total = total_events(scorer);

    const auto& Y = scorer.table().at_risk;
    const auto& a = scorer.a_coef();
    const auto& wn = scorer.w_num();
    const auto& wdy = scorer.prefix_wd_over_y();
    auto eval = [&]() -> std::optional<double> {
        double num = 0.0, den = 0.0;
        for (std::size_t k = 0; k < D; ++k) {
            num += wn[k] * dl[k] - (wdy[k + 1] - wdy[k]) * yl[k];
            den += a[k] * yl[k] * (Y[k] - yl[k]);
        }
        if (!(den > 1e-12)) return std::nullopt;
        return num * num / den;
    };

    const std::uint64_t n_codes = 1ull << (L - 1);  // subsets of the rest
    bool found = false;
    double best_q = 0.0;
    std::uint64_t best_mask = 0;  // gray mask over positions 1..L-1
    std::uint64_t gray = 0;
    for (std::uint64_t g = 0;; ++g) {
        if (g > 0) {
            const int bit = std::countr_zero(g);
            const std::size_t p = static_cast<std::size_t>(bit) + 1;
            gray ^= 1ull << bit;
            const double sign = (gray >> bit) & 1ull ? 1.0 : -1.0;
            for (std::size_t k = 0; k < D; ++k) {
                yl[k] += sign * yl_level[p * D + k];
                dl[k] += sign * dl_level[p * D + k];
            }
            const std::size_t lvl = present[p];
            if (sign > 0) {
                left_n += count[lvl];
                left_e += events[lvl];
            } else {
                left_n -= count[lvl];
                left_e -= events[lvl];
            }
        }
        const bool full = gray == n_codes - 1 && L > 1;
        if (!full && children_ok(left_n, left_e, n, n_events_total, cfg)) {
            const auto q = eval();
            if (q && (!found || *q > best_q)) {
                found = true;
                best_q = *q;
                best_mask = gray;
            }
        }
        if (g + 1 >= n_codes) break;
    }
    if (!found) return res;

    std::vector<std::uint8_t> in_left(n_levels, 0);
    in_left[present[0]] = 1;
    for (std::size_t p = 1; p < L; ++p)
        if ((best_mask >> (p - 1)) & 1ull) in_left[present[p]] = 1;
    res.feasible = true;
    res.statistic = best_q;
    res.spec.in_left = std::move(in_left);
    return res;
}

SplitResult best_split_for_variable(const LogrankScorer& scorer,
                                    std::span<const double> z,
                                    const CovariateSpec& spec,
                                    std::size_t variable,
                                    const SplitSearchConfig& cfg) {
    if (spec.kind == CovariateKind::nominal)
        return subset_search(scorer, z, spec.levels.size(), variable, cfg);

    std::vector<double> vals(z.begin(), z.end());
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    const std::size_t distinct = vals.size();

    switch (cfg.method) {
        case SplitMethod::force_gs:
            return greedy_search(scorer, z, variable, cfg);
        case SplitMethod::force_sss:
            return distinct > 2 ? sss_search(scorer, z, variable, cfg)
                                : greedy_search(scorer, z, variable, cfg);
        case SplitMethod::automatic:
            break;
    }
    return distinct <= static_cast<std::size_t>(cfg.gs_sss_switch)
               ? greedy_search(scorer, z, variable, cfg)
               : sss_search(scorer, z, variable, cfg);
}

}  // namespace survtreeful
