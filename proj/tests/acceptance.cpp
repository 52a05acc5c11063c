// Acceptance gate: one line per criterion, pinned tolerances, nonzero exit
// when any criterion fails. Oracles are computed inside this file through
// routes independent of the library code under test wherever possible.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "survtreeful/inference.hpp"
#include "survtreeful/model_io.hpp"
#include "survtreeful/select.hpp"
#include "survtreeful/simbench.hpp"

using namespace survtreeful;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

// ---------------------------------------------------------------------------
// 1. Logrank equivalence against a direct two-group computation.

/// Classic two-group logrank chi-square with the hypergeometric variance,
/// aggregated over distinct event times. NaN when the variance is zero.
double direct_two_group_logrank(const std::vector<double>& t,
                                const std::vector<std::uint8_t>& s,
                                const std::vector<int>& grp) {
    std::vector<double> event_times;
    for (std::size_t i = 0; i < t.size(); ++i)
        if (s[i]) event_times.push_back(t[i]);
    std::sort(event_times.begin(), event_times.end());
    event_times.erase(std::unique(event_times.begin(), event_times.end()),
                      event_times.end());
    double num = 0.0, var = 0.0;
    for (const double tk : event_times) {
        double at_risk = 0.0, at_risk_1 = 0.0, deaths = 0.0, deaths_1 = 0.0;
        for (std::size_t i = 0; i < t.size(); ++i) {
            if (t[i] >= tk) {
                at_risk += 1.0;
                if (grp[i]) at_risk_1 += 1.0;
            }
            if (s[i] && t[i] == tk) {
                deaths += 1.0;
                if (grp[i]) deaths_1 += 1.0;
            }
        }
        num += deaths_1 - at_risk_1 * deaths / at_risk;
        if (at_risk > 1.0)
            var += (at_risk_1 / at_risk) * (1.0 - at_risk_1 / at_risk) *
                   ((at_risk - deaths) / (at_risk - 1.0)) * deaths;
    }
    if (var <= 0.0) return std::numeric_limits<double>::quiet_NaN();
    return num * num / var;
}

Outcome criterion_logrank() {
    constexpr double kTol = 1e-10;
    std::mt19937_64 gen(1001);
    std::uniform_int_distribution<int> n_dist(4, 30);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0.0;
    int done = 0;
    while (done < 100) {
        const int n = n_dist(gen);
        std::vector<double> t(n);
        std::vector<std::uint8_t> s(n);
        std::vector<int> grp(n);
        std::vector<double> member(n);
        int events = 0, left = 0;
        for (int i = 0; i < n; ++i) {
            t[i] = 0.1 + std::floor(u(gen) * 20.0) / 10.0;  // forces ties
            s[i] = u(gen) < 0.7 ? 1 : 0;
            grp[i] = u(gen) < 0.5 ? 1 : 0;
            member[i] = grp[i];
            events += s[i];
            left += grp[i];
        }
        if (events == 0 || left == 0 || left == n) continue;
        const double oracle = direct_two_group_logrank(t, s, grp);
        if (!std::isfinite(oracle)) continue;
        double lib = 0.0;
        try {
            lib = logrank_statistic(member, t, s);
        } catch (const NumericError&) {
            continue;  // degenerate membership; the oracle should agree
        }
        worst = std::max(worst, std::abs(lib - oracle));
        ++done;
    }

    // Two records, one per group, both events at distinct times: exactly 1.
    const std::vector<double> ht = {1.0, 2.0};
    const std::vector<std::uint8_t> hs = {1, 1};
    const std::vector<double> hm = {1.0, 0.0};
    const double hand = logrank_statistic(hm, ht, hs);

    std::ostringstream os;
    os << "max |Q - oracle| = " << worst << " over 100 datasets; hand example "
       << (hand == 1.0 ? "exactly 1" : "NOT 1");
    return {worst < kTol && hand == 1.0, os.str()};
}

// ---------------------------------------------------------------------------
// 2. Smooth-surrogate statistic converges to the hard statistic.

Outcome criterion_sss_convergence() {
    constexpr double kTol = 1e-6;
    std::mt19937_64 gen(1002);
    std::uniform_int_distribution<int> n_dist(40, 120);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0.0;
    int datasets = 0, cutoffs = 0;
    while (datasets < 50) {
        const int n = n_dist(gen);
        std::vector<double> z(n), t(n);
        std::vector<std::uint8_t> s(n);
        int events = 0;
        for (int i = 0; i < n; ++i) {
            z[i] = u(gen);
            t[i] = -std::log(1.0 - u(gen) * 0.999) * std::exp(0.5 - z[i]);
            s[i] = u(gen) < 0.6 ? 1 : 0;
            events += s[i];
        }
        if (events < 5) continue;
        auto distinct = z;
        std::sort(distinct.begin(), distinct.end());
        distinct.erase(std::unique(distinct.begin(), distinct.end()),
                       distinct.end());
        if (distinct.size() < 10) continue;
        double min_gap = std::numeric_limits<double>::infinity();
        for (std::size_t k = 1; k < distinct.size(); ++k)
            min_gap = std::min(min_gap, distinct[k] - distinct[k - 1]);
        const double a = 1e4 / min_gap;  // boundary of the guarantee

        ++datasets;
        for (int probe = 0; probe < 5; ++probe) {
            const auto j =
                1 + static_cast<std::size_t>(u(gen) * (distinct.size() - 2));
            const double c = 0.5 * (distinct[j] + distinct[j + 1]);
            std::vector<double> hard(n), soft(n);
            for (int i = 0; i < n; ++i) {
                hard[i] = z[i] <= c ? 1.0 : 0.0;
                soft[i] = sigmoid_membership(z[i], c, a);
            }
            try {
                const double q_hard = logrank_statistic(hard, t, s);
                const double q_soft = logrank_statistic(soft, t, s);
                worst = std::max(worst, std::abs(q_soft - q_hard));
                ++cutoffs;
            } catch (const NumericError&) {
                continue;  // one-sided cutoff; nothing to compare
            }
        }
    }
    std::ostringstream os;
    os << "max |soft - hard| = " << worst << " over " << cutoffs
       << " off-data cutoffs, 50 datasets, steepness 1e4/min-gap";
    return {worst < kTol && cutoffs >= 100, os.str()};
}

// ---------------------------------------------------------------------------
// 3 and 4. Cutoff recovery and end-cut behavior of the smooth search.

CutoffStudyReport g_cutoff_report;  // reused by the determinism criterion

Outcome criterion_cutoff_mse() {
    constexpr double kMseCap = 0.02;
    CutoffStudyConfig cfg;
    cfg.shapes = {50.0};
    g_cutoff_report = run_cutoff_study(cfg, 101);
    const auto& gs = g_cutoff_report.arms.at(0);
    const auto& sss = g_cutoff_report.arms.at(1);
    std::ostringstream os;
    os << "MSE greedy = " << gs.mse << ", smooth(a=50) = " << sss.mse << " ("
       << g_cutoff_report.used << " replicates)";
    return {sss.mse <= gs.mse && gs.mse < kMseCap && sss.mse < kMseCap,
            os.str()};
}

double in_band_fraction(const std::vector<double>& cutoffs) {
    if (cutoffs.empty()) return 0.0;
    std::size_t in = 0;
    for (const double c : cutoffs)
        if (c >= 0.3 && c <= 0.7) ++in;
    return static_cast<double>(in) / static_cast<double>(cutoffs.size());
}

Outcome criterion_end_cut() {
    constexpr double kMargin = 0.10;
    CutoffStudyConfig cfg;
    cfg.beta1 = -0.1;  // weak signal exposes boundary-chasing searches
    cfg.replicates = 500;
    cfg.shapes = {50.0};
    const auto rep = run_cutoff_study(cfg, 102);
    const double f_gs = in_band_fraction(rep.arms.at(0).cutoffs);
    const double f_sss = in_band_fraction(rep.arms.at(1).cutoffs);
    std::ostringstream os;
    os << "central-cutoff fraction greedy = " << f_gs << ", smooth = " << f_sss
       << " (need gap >= " << kMargin << ", " << rep.used << " replicates)";
    return {f_sss - f_gs >= kMargin, os.str()};
}

// ---------------------------------------------------------------------------
// 5. Root-variable selection frequencies, null and balanced signals.

Outcome criterion_selection_bias() {
    SelectionStudyConfig null_cfg;
    null_cfg.replicates = 500;
    null_cfg.scenario = SelectionScenario::null_signal;
    const auto null_rep = run_selection_study(null_cfg, 103);

    bool iv_uniform = true;
    for (const double f : null_rep.iv_frequency)
        if (f < 0.12 || f > 0.28) iv_uniform = false;
    const double gs_z5 = null_rep.gs_frequency.at(4);

    SelectionStudyConfig bal_cfg;
    bal_cfg.replicates = 500;
    bal_cfg.scenario = SelectionScenario::balanced_signal;
    const auto bal_rep = run_selection_study(bal_cfg, 104);
    const auto gap = [](const std::vector<double>& f) {
        return *std::max_element(f.begin(), f.end()) -
               *std::min_element(f.begin(), f.end());
    };
    const double iv_gap = gap(bal_rep.iv_frequency);
    const double gs_gap = gap(bal_rep.gs_frequency);

    std::ostringstream os;
    os << "null: validated picks in [0.12,0.28] "
       << (iv_uniform ? "yes" : "NO") << ", greedy z5 = " << gs_z5
       << "; balanced: validated gap = " << iv_gap << " vs greedy gap = "
       << gs_gap << " (need validated < greedy)";
    return {iv_uniform && gs_z5 > 0.30 && iv_gap < gs_gap, os.str()};
}

// ---------------------------------------------------------------------------
// 6. Fusion algebra on fitted trees.

Outcome criterion_fusion_algebra() {
    constexpr double kAlgebraTol = 1e-10;
    constexpr double kMpleTol = 1e-4;
    const SimModel models[] = {SimModel::two_group, SimModel::band,
                               SimModel::oscillation, SimModel::linear};
    double worst_algebra = 0.0, worst_mple = 0.0;
    bool all_top_single = true;
    int done = 0;
    std::uint64_t seed = 6000;
    while (done < 50) {
        ++seed;
        const auto model = models[seed % 4];
        const auto data = generate(model, 300, 0.5, seed);
        TreeConfig tc;
        tc.max_depth = 3;
        const auto tree = grow(data, tc, seed);
        if (tree.leaf_ids().size() < 2) continue;
        const auto path = fusion_path(tree, data);
        if (path.patterns.empty()) continue;

        // The reparameterization must hold exactly at every path point.
        const auto& tr = path.transform;
        for (const auto& p : path.patterns) {
            const Eigen::VectorXd lhs =
                tr.w.asDiagonal() * (tr.B * p.beta_tilde);
            worst_algebra = std::max(
                worst_algebra,
                (lhs - p.gamma).cwiseAbs().maxCoeff());
        }

        // Unpenalized path point equals the Newton partial-likelihood fit
        // on the cluster design (an independent solver).
        const auto& ord = path.ordering;
        std::map<std::uint32_t, std::size_t> cluster;
        for (std::size_t pos = 0; pos < ord.sorted_leaves.size(); ++pos)
            cluster[ord.sorted_leaves[pos]] = ord.cluster_of[pos];
        const auto n_clusters = ord.n_clusters();
        if (n_clusters < 2) continue;
        Eigen::MatrixXd design(data.n_rows(), n_clusters - 1);
        design.setZero();
        for (std::size_t i = 0; i < data.n_rows(); ++i) {
            const auto k = cluster.at(tree.route(data, i));
            if (k > 0) design(static_cast<Eigen::Index>(i),
                              static_cast<Eigen::Index>(k - 1)) = 1.0;
        }
        const auto mple = cox_fit(design, data.time, data.status);
        if (!mple.converged || mple.diverged) continue;
        const auto& base = path.patterns.front();
        if (base.lambda != 0.0) return {false, "path misses the lambda=0 point"};
        worst_mple = std::max(
            worst_mple,
            (base.beta_tilde - mple.beta).cwiseAbs().maxCoeff());

        if (path.patterns.back().grouping.group_count != 1)
            all_top_single = false;
        ++done;
    }
    std::ostringstream os;
    os << "max |W B fused - transformed| = " << worst_algebra
       << ", max |unpenalized - Newton MPLE| = " << worst_mple
       << ", largest penalty fuses to one group: "
       << (all_top_single ? "yes" : "NO") << " (50 trees)";
    return {worst_algebra < kAlgebraTol && worst_mple < kMpleTol &&
                all_top_single,
            os.str()};
}

// ---------------------------------------------------------------------------
// 7. Shearing preserves routed groups, and its two degenerate forms.

Outcome criterion_shearing() {
    std::mt19937_64 gen(7000);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int pairs = 0, mismatches = 0;
    bool degenerate_ok = true;
    std::uint64_t seed = 70000;
    while (pairs < 200) {
        ++seed;
        const auto model = static_cast<SimModel>(seed % 7);
        const auto data =
            generate(model, 150 + 50 * (seed % 4), 0.5, seed);
        TreeConfig tc;
        tc.max_depth = 2 + seed % 3;
        const auto tree = grow(data, tc, seed);
        const auto leaves = tree.leaf_ids();

        // Random grouping with consecutive ids 1..K.
        const auto k_raw = 1 + static_cast<int>(u(gen) * leaves.size());
        std::map<int, std::int32_t> relabel;
        Grouping grouping;
        for (const auto leaf : leaves) {
            const int raw = 1 + static_cast<int>(u(gen) * k_raw);
            if (!relabel.count(raw))
                relabel[raw] = static_cast<std::int32_t>(relabel.size()) + 1;
            grouping.leaf_group[leaf] = relabel[raw];
        }
        grouping.group_count = static_cast<std::int32_t>(relabel.size());

        const auto sheared = shear(tree, grouping);
        const auto eval = generate(model, 50, 0.5, seed + 900000);
        for (std::size_t i = 0; i < eval.n_rows(); ++i)
            if (route_group(tree, grouping, eval, i) !=
                route_group(sheared, grouping, eval, i))
                ++mismatches;
        for (std::size_t i = 0; i < std::min<std::size_t>(50, data.n_rows());
             ++i)
            if (route_group(tree, grouping, data, i) !=
                route_group(sheared, grouping, data, i))
                ++mismatches;

        // All-one-group collapses to the root.
        Grouping ones;
        for (const auto leaf : leaves) ones.leaf_group[leaf] = 1;
        ones.group_count = 1;
        const auto rooted = shear(tree, ones);
        if (rooted.nodes.size() != 1 || !rooted.root().is_leaf())
            degenerate_ok = false;

        // One group per leaf leaves the structure untouched.
        Grouping identity;
        std::int32_t next = 1;
        for (const auto leaf : leaves) identity.leaf_group[leaf] = next++;
        identity.group_count = next - 1;
        const auto same = shear(tree, identity);
        if (same.nodes.size() != tree.nodes.size()) degenerate_ok = false;
        for (const auto& [id, node] : tree.nodes)
            if (!same.nodes.count(id)) degenerate_ok = false;

        ++pairs;
    }
    std::ostringstream os;
    os << mismatches << " routing mismatches over 200 pairs x 100 records; "
       << "degenerate groupings " << (degenerate_ok ? "behave" : "MISBEHAVE");
    return {mismatches == 0 && degenerate_ok, os.str()};
}

// ---------------------------------------------------------------------------
// 8 and 9. Cross-validated model sizes and variable-selection accuracy.

std::map<SimModel, BenchReport> g_cv_reports;

Outcome criterion_cv_sizes() {
    struct Pin {
        SimModel model;
        double lo, hi;
    };
    const Pin pins[] = {{SimModel::null_flat, 0.0, 1.3},
                        {SimModel::two_group, 3.2, 4.4},
                        {SimModel::band, 1.9, 2.6},
                        {SimModel::oscillation, 2.0, 3.2}};
    BenchConfig cfg;
    cfg.cross_validation = true;
    bool all = true;
    std::ostringstream os;
    for (const auto& pin : pins) {
        const auto rep = run_comparison(pin.model, cfg, 42);
        g_cv_reports.emplace(pin.model, rep);
        const bool ok = rep.size_mean >= pin.lo && rep.size_mean <= pin.hi;
        all = all && ok;
        os << model_name(pin.model) << " mean size " << rep.size_mean << " in ["
           << pin.lo << "," << pin.hi << "] " << (ok ? "yes" : "NO") << "; ";
    }
    os << "(50 replicates, n=600, 10-fold)";
    return {all, os.str()};
}

Outcome criterion_cv_accuracy() {
    const auto& null_rep = g_cv_reports.at(SimModel::null_flat);
    const auto& band_rep = g_cv_reports.at(SimModel::band);
    std::ostringstream os;
    os << "accurate-selection rate: flat " << null_rep.accurate_rate
       << " (need >= 0.85), band " << band_rep.accurate_rate
       << " (need >= 0.80)";
    return {null_rep.accurate_rate >= 0.85 && band_rep.accurate_rate >= 0.80,
            os.str()};
}

// ---------------------------------------------------------------------------
// 10. Bootstrap bias correction shrinks estimate bias and MSE.

Outcome criterion_bbc() {
    BiasStudyConfig cfg;
    const auto band = run_bias_study(SimModel::band, cfg, 13);
    const auto linear = run_bias_study(SimModel::linear, cfg, 13);
    const bool raw_biased = band.beta.bias_raw > 0.10;
    const bool bias_halved =
        std::abs(band.beta.bias_corrected) < 0.5 * band.beta.bias_raw;
    const bool band_mse = band.beta.mse_corrected < band.beta.mse_raw;
    const bool linear_mse = linear.beta.mse_corrected < linear.beta.mse_raw;
    std::ostringstream os;
    os << "band bias " << band.beta.bias_raw << " -> "
       << band.beta.bias_corrected << ", MSE " << band.beta.mse_raw << " -> "
       << band.beta.mse_corrected << "; linear MSE " << linear.beta.mse_raw
       << " -> " << linear.beta.mse_corrected << " (50 replicates each, truth"
       << " n=20000)";
    return {raw_biased && bias_halved && band_mse && linear_mse, os.str()};
}

// ---------------------------------------------------------------------------
// 11. Re-running two of the benches above reproduces every byte.

Outcome criterion_determinism() {
    CutoffStudyConfig cfg;
    cfg.shapes = {50.0};
    const auto cut_again = run_cutoff_study(cfg, 101);
    const bool cut_same =
        cut_again.to_csv() == g_cutoff_report.to_csv() &&
        cut_again.cutoffs_csv() == g_cutoff_report.cutoffs_csv();

    BenchConfig bench_cfg;
    bench_cfg.cross_validation = true;
    const auto band_again = run_comparison(SimModel::band, bench_cfg, 42);
    const auto& band_first = g_cv_reports.at(SimModel::band);
    const bool band_same =
        band_again.to_csv() == band_first.to_csv() &&
        band_again.replicates_csv() == band_first.replicates_csv();

    std::ostringstream os;
    os << "cutoff bench rerun byte-identical: " << (cut_same ? "yes" : "NO")
       << ", grouped-hazard bench rerun byte-identical: "
       << (band_same ? "yes" : "NO")
       << "; the engine is sequential, so worker-count flags cannot reorder "
          "any computation";
    return {cut_same && band_same, os.str()};
}

// ---------------------------------------------------------------------------
// 12. Scope statement for exclusions that cannot run here.

Outcome criterion_exclusions() {
    return {true,
            "excluded by design: analyses of the restricted-access ADNI "
            "clinical dataset, and head-to-head comparison columns against "
            "external tree software (rpart, GUIDE); the property and "
            "benchmark suites in this repository stand in for both"};
}

}  // namespace

int main() {
    struct Entry {
        const char* label;
        Outcome (*fn)();
    };
    const Entry entries[] = {
        {"logrank equals a direct two-group computation", criterion_logrank},
        {"smooth split statistic converges to the hard one",
         criterion_sss_convergence},
        {"smooth search recovers the true cutoff (MSE)", criterion_cutoff_mse},
        {"smooth search avoids end-cut drift under weak signal",
         criterion_end_cut},
        {"validated selection is unbiased where greedy is not",
         criterion_selection_bias},
        {"fusion path algebra and unpenalized fit", criterion_fusion_algebra},
        {"shearing preserves routing", criterion_shearing},
        {"cross-validated model sizes sit in the pinned bands",
         criterion_cv_sizes},
        {"cross-validated variable selection is accurate",
         criterion_cv_accuracy},
        {"bootstrap correction shrinks bias and MSE", criterion_bbc},
        {"seeded reruns are byte-identical", criterion_determinism},
        {"out-of-scope analyses are declared", criterion_exclusions},
    };

    int failures = 0;
    int id = 0;
    for (const auto& entry : entries) {
        ++id;
        const auto start = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = entry.fn();
        } catch (const std::exception& e) {
            out = {false, std::string("exception: ") + e.what()};
        }
        const auto secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                          start)
                .count();
        if (!out.pass) ++failures;
        std::printf("[%2d] %s %s: %s (%.1f s)\n", id,
                    out.pass ? "PASS" : "FAIL", entry.label,
                    out.detail.c_str(), secs);
        std::fflush(stdout);
    }
    std::printf("acceptance: %d of 12 criteria pass\n",
                12 - failures);
    return failures;
}
