#include "survtreeful/inference.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "survtreeful/errors.hpp"
#include "survtreeful/survival.hpp"

namespace survtreeful {

namespace {

constexpr double kBetaCap = 15.0;
constexpr double kSqrt2 = 1.4142135623730951;
constexpr double kSqrt2Pi = 2.5066282746310002;

void check_level(double level) {
    if (!(level > 0.0 && level < 1.0))
        throw ConfigError("confidence level must be in (0, 1)");
}

/// Fills the columns derived from (beta, se) at normal quantile q.
void fill_row(GroupRow& row, double beta, double se, double q) {
    row.beta = beta;
    row.se = se;
    row.hazard_ratio = std::exp(beta);
    row.z = se > 0.0 ? beta / se : 0.0;
    row.p = se > 0.0 ? std::erfc(std::abs(row.z) / kSqrt2)
                     : (beta == 0.0 ? 1.0 : 0.0);
    row.beta_lo = beta - q * se;
    row.beta_hi = beta + q * se;
    row.diverged = std::abs(beta) >= kBetaCap - 1e-6;
}

SurvivalDataset subset(const SurvivalDataset& data, const SampleIndex& idx) {
    SurvivalDataset d;
    d.schema = data.schema;
    d.time = gather(data.time, idx);
    d.status = gather(data.status, idx);
    d.covariates.reserve(data.covariates.size());
    for (const auto& column : data.covariates)
        d.covariates.push_back(gather(column, idx));
    return d;
}

/// Resample within each status stratum, preserving the stratum counts.
SampleIndex stratified_resample(const SurvivalDataset& data, Rng& rng) {
    std::vector<std::uint32_t> events, censored;
    for (std::size_t i = 0; i < data.n_rows(); ++i)
        (data.status[i] ? events : censored)
            .push_back(static_cast<std::uint32_t>(i));
    SampleIndex out;
    out.rows.reserve(data.n_rows());
    for (std::size_t j = 0; j < events.size(); ++j)
        out.rows.push_back(events[rng.below(events.size())]);
    for (std::size_t j = 0; j < censored.size(); ++j)
        out.rows.push_back(censored[rng.below(censored.size())]);
    return out;
}

struct GroupFit {
    Eigen::VectorXd beta;  // one entry per non-reference group
    Eigen::VectorXd se;
    bool ok = false;
};

/// Cox fit on group dummies (reference = group 1) for membership vector g.
GroupFit fit_groups(const SurvivalDataset& d,
                    const std::vector<std::int32_t>& g, std::int32_t count) {
    GroupFit out;
    const std::size_t n = d.n_rows();
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, count - 1);
    for (std::size_t i = 0; i < n; ++i)
        if (g[i] >= 2) x(i, g[i] - 2) = 1.0;
    CoxFit fit;
    try {
        fit = cox_fit(x, d.time, d.status);
    } catch (const DataError&) {
        return out;
    }
    out.beta = fit.beta;
    out.se.resize(count - 1);
    for (std::int32_t j = 0; j + 1 < count; ++j)
        out.se[j] = std::sqrt(std::max(fit.covariance(j, j), 0.0));
    out.ok = fit.converged && !fit.diverged;
    return out;
}

/// Smallest-lambda pattern with the exact count, else with the smallest
/// count above it; nullptr when every pattern is below the target.
const FusionPattern* choose_pattern(const FusionPath& path, std::int32_t count) {
    const FusionPattern* exact = nullptr;
    const FusionPattern* above = nullptr;
    for (const auto& pat : path.patterns) {
        const std::int32_t k = pat.grouping.group_count;
        if (k == count && exact == nullptr) exact = &pat;
        if (k > count && (above == nullptr ||
                          k < above->grouping.group_count))
            above = &pat;
    }
    return exact != nullptr ? exact : above;
}

nlohmann::json rows_json(const GroupSummary& s) {
    auto arr = nlohmann::json::array();
    for (const auto& r : s.rows)
        arr.push_back({{"group", r.group},
                       {"n", r.n},
                       {"events", r.events},
                       {"km_median", r.km_median},
                       {"beta", r.beta},
                       {"hr", r.hazard_ratio},
                       {"se", r.se},
                       {"z", r.z},
                       {"p", r.p},
                       {"beta_lo", r.beta_lo},
                       {"beta_hi", r.beta_hi},
                       {"diverged", r.diverged}});
    return arr;
}

}  // namespace

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0))
        throw ConfigError("normal quantile needs p in (0, 1)");
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;
    double x;
    if (p < plow) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q +
             c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - plow) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r +
             a[5]) *
            q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r +
             1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q +
              c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    // One Halley step against the exact normal CDF.
    const double e = 0.5 * std::erfc(-x / kSqrt2) - p;
    const double u = e * kSqrt2Pi * std::exp(x * x / 2.0);
    return x - u / (1.0 + x * u / 2.0);
}

std::int32_t route_group(const Tree& tree, const Grouping& grouping,
                         const SurvivalDataset& data, std::size_t row) {
    const std::uint32_t leaf = tree.route(data, row);
    const TreeNode& node = tree.nodes.at(leaf);
    if (node.group > 0) return node.group;
    const auto it = grouping.leaf_group.find(leaf);
    if (it == grouping.leaf_group.end())
        throw DataError("leaf " + std::to_string(leaf) +
                        " not covered by grouping");
    return it->second;
}

GroupSummary group_summaries(const SurvivalDataset& data, const Tree& tree,
                             const Grouping& grouping, double level) {
    check_level(level);
    const std::size_t n = data.n_rows();
    if (n == 0) throw DataError("no rows for group summary");
    const std::int32_t count = grouping.group_count;

    std::vector<SampleIndex> members(count);
    for (std::size_t i = 0; i < n; ++i)
        members[route_group(tree, grouping, data, i) - 1].rows.push_back(
            static_cast<std::uint32_t>(i));

    GroupSummary out;
    out.level = level;
    for (std::int32_t k = 1; k <= count; ++k) {
        const auto& m = members[k - 1];
        if (m.empty())
            throw DataError("group " + std::to_string(k) + " has no rows");
        GroupRow row;
        row.group = k;
        row.n = m.size();
        const auto times = gather(data.time, m);
        const auto statuses = gather(data.status, m);
        for (const auto st : statuses) row.events += st ? 1 : 0;
        row.km_median = km_median(kaplan_meier(times, statuses));
        out.rows.push_back(row);
    }
    if (count == 1) return out;

    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, count - 1);
    for (std::int32_t k = 2; k <= count; ++k)
        for (const auto row : members[k - 1].rows) x(row, k - 2) = 1.0;
    const CoxFit fit = cox_fit(x, data.time, data.status);
    const double q = normal_quantile(0.5 + level / 2.0);
    for (std::int32_t k = 2; k <= count; ++k) {
        const double se = std::sqrt(std::max(fit.covariance(k - 2, k - 2), 0.0));
        fill_row(out.rows[k - 1], fit.beta[k - 2], se, q);
    }
    return out;
}

BBCReport bootstrap_bias_correct(const SurvivalDataset& data, const Tree& tree,
                                 const Grouping& grouping,
                                 const BBCConfig& config, std::uint64_t seed) {
    if (config.bootstraps < 1)
        throw ConfigError("bootstrap count must be at least 1");
    check_level(config.level);
    const std::size_t n = data.n_rows();
    const std::int32_t count = grouping.group_count;

    BBCReport out;
    out.n_rows = n;
    out.level = config.level;
    out.raw = group_summaries(data, tree, grouping, config.level);
    out.beta_bias.assign(count, 0.0);
    out.sd_bias.assign(count, 0.0);
    out.corrected_beta.assign(count, 0.0);
    out.corrected_sd.assign(count, 0.0);
    out.corrected_se.assign(count, 0.0);
    out.corrected = out.raw;
    out.corrected.corrected = true;

    if (count == 1) {
        out.warnings.push_back("single group: nothing to correct");
        return out;
    }

    std::vector<std::int32_t> g(n);
    std::vector<double> row_total(count, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        g[i] = route_group(tree, grouping, data, i);
        row_total[g[i] - 1] += 1.0;
    }

    std::size_t dstar = 0;
    for (const auto& [id, node] : tree.nodes)
        dstar = std::max(dstar, static_cast<std::size_t>(node.depth));
    TreeConfig bc = config.tree;
    bc.use_iv = false;
    bc.max_depth = dstar;

    Rng draw_rng = Rng(seed).child("bbc");
    const std::size_t total_b = config.bootstraps;
    std::size_t rej_shallow = 0, rej_fit = 0, rej_reference = 0, rej_empty = 0;

    while (out.b_used < total_b && out.draws < 3 * total_b) {
        Rng r = draw_rng.child(out.draws);
        ++out.draws;
        SampleIndex idx;
        if (config.identity_resample) {
            idx = full_index(data);
        } else {
            Rng rows_rng = r.child("rows");
            idx = stratified_resample(data, rows_rng);
        }
        const SurvivalDataset db = subset(data, idx);

        Tree tb;
        FusionPath path;
        try {
            tb = grow(db, bc, r.child("tree").next_u64());
            path = fusion_path(tb, db, config.fusion);
        } catch (const DataError&) {
            ++rej_fit;
            continue;
        }
        const FusionPattern* pat = choose_pattern(path, count);
        if (pat == nullptr) {
            ++rej_shallow;
            continue;
        }
        const std::int32_t kb = pat->grouping.group_count;

        std::vector<std::int32_t> gb_boot(db.n_rows());
        for (std::size_t i = 0; i < db.n_rows(); ++i)
            gb_boot[i] = route_group(tb, pat->grouping, db, i);
        const GroupFit fit_b = fit_groups(db, gb_boot, kb);
        if (!fit_b.ok) {
            ++rej_fit;
            continue;
        }

        std::vector<std::int32_t> gb(n);
        std::vector<std::size_t> rows_d(kb, 0), events_d(kb, 0);
        for (std::size_t i = 0; i < n; ++i) {
            gb[i] = route_group(tb, pat->grouping, data, i);
            ++rows_d[gb[i] - 1];
            events_d[gb[i] - 1] += data.status[i] ? 1 : 0;
        }
        if (std::find(rows_d.begin(), rows_d.end(), std::size_t{0}) !=
            rows_d.end()) {
            ++rej_empty;
            continue;
        }
        if (events_d[0] == 0) {
            ++rej_reference;
            continue;
        }
        const GroupFit fit_d = fit_groups(data, gb, kb);
        if (!fit_d.ok) {
            ++rej_fit;
            continue;
        }

        BootstrapRecord rec;
        rec.group_count = kb;
        rec.tau.assign(kb, 0.0);
        rec.tau_sd.assign(kb, 0.0);
        const double rootn = std::sqrt(static_cast<double>(n));
        for (std::int32_t kp = 2; kp <= kb; ++kp) {
            rec.tau[kp - 1] = fit_d.beta[kp - 2] - fit_b.beta[kp - 2];
            rec.tau_sd[kp - 1] = rootn * (fit_d.se[kp - 2] - fit_b.se[kp - 2]);
        }
        rec.weights.assign(count, std::vector<double>(kb, 0.0));
        for (std::size_t i = 0; i < n; ++i)
            rec.weights[g[i] - 1][gb[i] - 1] += 1.0;
        for (std::int32_t k = 0; k < count; ++k)
            for (std::int32_t kp = 0; kp < kb; ++kp) {
                rec.weights[k][kp] /= row_total[k];
                out.beta_bias[k] += rec.weights[k][kp] * rec.tau[kp];
                out.sd_bias[k] += rec.weights[k][kp] * rec.tau_sd[kp];
            }
        out.replicates.push_back(std::move(rec));
        ++out.b_used;
    }

    char buf[128];
    if (rej_shallow + rej_fit + rej_reference + rej_empty > 0) {
        std::snprintf(buf, sizeof(buf),
                      "rejected draws: %zu shallow, %zu unstable fit, "
                      "%zu event-free reference, %zu empty group",
                      rej_shallow, rej_fit, rej_reference, rej_empty);
        out.warnings.push_back(buf);
    }
    if (out.b_used < total_b) {
        std::snprintf(buf, sizeof(buf),
                      "only %zu of %zu bootstrap replicates accepted",
                      out.b_used, total_b);
        out.warnings.push_back(buf);
    }
    if (out.b_used == 0) {
        std::fill(out.beta_bias.begin(), out.beta_bias.end(), 0.0);
        std::fill(out.sd_bias.begin(), out.sd_bias.end(), 0.0);
        for (std::int32_t k = 2; k <= count; ++k) {
            out.corrected_beta[k - 1] = out.raw.rows[k - 1].beta;
            out.corrected_sd[k - 1] =
                out.raw.rows[k - 1].se * std::sqrt(static_cast<double>(n));
            out.corrected_se[k - 1] = out.raw.rows[k - 1].se;
        }
        return out;
    }

    const double inv_b = 1.0 / static_cast<double>(out.b_used);
    for (std::int32_t k = 0; k < count; ++k) {
        out.beta_bias[k] *= inv_b;
        out.sd_bias[k] *= inv_b;
    }

    // The reference stays pinned at zero; corrections apply to k >= 2.
    const double rootn = std::sqrt(static_cast<double>(n));
    const double q = normal_quantile(0.5 + config.level / 2.0);
    bool floored = false;
    for (std::int32_t k = 2; k <= count; ++k) {
        out.corrected_beta[k - 1] =
            out.raw.rows[k - 1].beta + out.beta_bias[k - 1];
        double sd = out.raw.rows[k - 1].se * rootn + out.sd_bias[k - 1];
        if (sd < 0.0) {
            sd = 0.0;
            floored = true;
        }
        out.corrected_sd[k - 1] = sd;
        out.corrected_se[k - 1] = sd / rootn;
        fill_row(out.corrected.rows[k - 1], out.corrected_beta[k - 1],
                 out.corrected_se[k - 1], q);
    }
    if (floored)
        out.warnings.push_back("corrected SD floored at zero for some group");
    return out;
}

std::vector<GroupInterval> confidence_intervals(const BBCReport& report,
                                                double level) {
    check_level(level);
    if (report.corrected_beta.empty())
        throw ConfigError("report has no corrected estimates");
    const double q = normal_quantile(0.5 + level / 2.0);
    std::vector<GroupInterval> out;
    for (std::size_t k = 0; k < report.corrected_beta.size(); ++k) {
        GroupInterval ci;
        ci.group = static_cast<std::int32_t>(k) + 1;
        ci.beta_lo = report.corrected_beta[k] - q * report.corrected_se[k];
        ci.beta_hi = report.corrected_beta[k] + q * report.corrected_se[k];
        ci.hr_lo = std::exp(ci.beta_lo);
        ci.hr_hi = std::exp(ci.beta_hi);
        out.push_back(ci);
    }
    return out;
}

std::string GroupSummary::to_csv() const {
    std::string out = "group,n,events,km_median,beta,hr,se,z,p,beta_lo,beta_hi\n";
    char buf[256];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf),
                      "%d,%zu,%zu,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g\n",
                      r.group, r.n, r.events, r.km_median, r.beta,
                      r.hazard_ratio, r.se, r.z, r.p, r.beta_lo, r.beta_hi);
        out += buf;
    }
    return out;
}

std::string GroupSummary::to_json() const {
    const nlohmann::json doc{{"corrected", corrected},
                             {"level", level},
                             {"groups", rows_json(*this)}};
    return doc.dump(2);
}

std::string BBCReport::to_csv() const {
    std::string out =
        "group,n,events,beta,hr,se,z,p,beta_bbc,hr_bbc,se_bbc,z_bbc,p_bbc\n";
    char buf[320];
    for (std::size_t k = 0; k < raw.rows.size(); ++k) {
        const auto& r = raw.rows[k];
        const auto& c = corrected.rows[k];
        std::snprintf(buf, sizeof(buf),
                      "%d,%zu,%zu,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,"
                      "%.6g,%.6g\n",
                      r.group, r.n, r.events, r.beta, r.hazard_ratio, r.se,
                      r.z, r.p, c.beta, c.hazard_ratio, c.se, c.z, c.p);
        out += buf;
    }
    return out;
}

std::string BBCReport::to_json() const {
    auto reps = nlohmann::json::array();
    for (const auto& rec : replicates)
        reps.push_back({{"groups", rec.group_count},
                        {"tau", rec.tau},
                        {"tau_sd", rec.tau_sd},
                        {"weights", rec.weights}});
    const nlohmann::json doc{{"b_used", b_used},
                             {"draws", draws},
                             {"n_rows", n_rows},
                             {"level", level},
                             {"raw", rows_json(raw)},
                             {"corrected", rows_json(corrected)},
                             {"beta_bias", beta_bias},
                             {"sd_bias", sd_bias},
                             {"corrected_beta", corrected_beta},
                             {"corrected_sd", corrected_sd},
                             {"corrected_se", corrected_se},
                             {"replicates", reps},
                             {"warnings", warnings}};
    return doc.dump(2);
}

}  // namespace survtreeful
