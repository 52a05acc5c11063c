#include "survtreeful/simbench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <mutex>
#include <numbers>
#include <set>

#include "survtreeful/iv.hpp"
#include "survtreeful/split.hpp"

namespace survtreeful {

namespace {

constexpr std::uint64_t kCalibrationSeed = 0x5eedca11b15ecedULL;
constexpr std::size_t kCalibrationDraws = 100000;
constexpr double kPi = std::numbers::pi;

double mean(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (const double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double sample_sd(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double s = 0.0;
    for (const double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t h = v.size() / 2;
    return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

/// Median absolute deviation from the median.
double mad(const std::vector<double>& v) {
    const double m = median(v);
    std::vector<double> dev;
    dev.reserve(v.size());
    for (const double x : v) dev.push_back(std::abs(x - m));
    return median(std::move(dev));
}

std::vector<double> draw_covariates(Rng& r) {
    std::vector<double> z(7);
    z[0] = r.bernoulli(0.5) ? 1.0 : 0.0;
    z[1] = r.uniform();
    z[2] = static_cast<double>(r.below(5));
    z[3] = r.bernoulli(0.5) ? 1.0 : 0.0;
    z[4] = r.bernoulli(0.5) ? 1.0 : 0.0;
    z[5] = r.uniform();
    z[6] = r.uniform();
    return z;
}

double draw_event_time(SimModel model, const std::vector<double>& z, Rng& r) {
    if (model == SimModel::aft_shift) {
        const double shift = -1.0 + z[0] + (z[1] <= 0.5 ? 2.0 : 0.0);
        return std::exp(shift + r.logistic());
    }
    return r.exponential(subject_rate(model, z));
}

/// Expected censoring fraction under C ~ Exp(theta) given event-time draws:
/// mean over subjects of P(C < T_i) = 1 - exp(-theta T_i).
double expected_censoring(const std::vector<double>& event_times, double theta) {
    double s = 0.0;
    for (const double t : event_times) s += -std::expm1(-theta * t);
    return s / static_cast<double>(event_times.size());
}

/// Bisection on the smooth Monte-Carlo censoring fraction; the fraction is
/// continuous and strictly increasing in theta, from 0 toward 1.
double calibrate_from_times(const std::vector<double>& event_times,
                            double target) {
    if (!(target > 0.0 && target < 1.0))
        throw ConfigError("censoring rate must lie in (0, 1)");
    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < 80 && expected_censoring(event_times, hi) < target; ++i)
        hi *= 2.0;
    double mid = hi;
    for (int i = 0; i < 200; ++i) {
        mid = 0.5 * (lo + hi);
        const double f = expected_censoring(event_times, mid);
        if (std::abs(f - target) <= 2.5e-4) break;
        (f < target ? lo : hi) = mid;
    }
    return mid;
}

const char* csv_bool(bool b) { return b ? "1" : "0"; }

}  // namespace

const char* model_name(SimModel model) {
    switch (model) {
        case SimModel::null_flat: return "null_flat";
        case SimModel::two_group: return "two_group";
        case SimModel::band: return "band";
        case SimModel::oscillation: return "oscillation";
        case SimModel::linear: return "linear";
        case SimModel::smooth_additive: return "smooth_additive";
        case SimModel::aft_shift: return "aft_shift";
    }
    return "?";
}

SimModel model_from_name(const std::string& name) {
    for (const SimModel m :
         {SimModel::null_flat, SimModel::two_group, SimModel::band,
          SimModel::oscillation, SimModel::linear, SimModel::smooth_additive,
          SimModel::aft_shift}) {
        if (name == model_name(m)) return m;
    }
    throw ConfigError("unknown benchmark model: " + name);
}

std::vector<CovariateSpec> bench_schema() {
    std::vector<CovariateSpec> schema(7);
    const char* names[] = {"z1", "z2", "z3", "z4", "z5", "z6", "z7"};
    for (std::size_t j = 0; j < 7; ++j) schema[j].name = names[j];
    schema[0].kind = CovariateKind::binary;
    schema[3].kind = CovariateKind::binary;
    schema[4].kind = CovariateKind::binary;
    schema[2].kind = CovariateKind::nominal;
    schema[2].levels = {"A", "B", "C", "D", "E"};
    return schema;
}

std::vector<std::size_t> important_variables(SimModel model) {
    switch (model) {
        case SimModel::null_flat: return {};
        case SimModel::two_group: return {0, 1};
        case SimModel::band: return {0, 1};
        case SimModel::oscillation: return {1};
        case SimModel::linear: return {1, 5};
        case SimModel::smooth_additive: return {1, 5};
        case SimModel::aft_shift: return {0, 1};
    }
    return {};
}

double subject_rate(SimModel model, const std::vector<double>& z) {
    if (z.size() < 7) throw ConfigError("subject_rate needs 7 covariates");
    switch (model) {
        case SimModel::null_flat: return std::exp(-1.0);
        case SimModel::two_group:
            return std::exp(-1.0 + z[0] + (z[1] <= 0.5 ? 2.0 : 0.0));
        case SimModel::band:
            return std::exp(-1.0 + (0.25 <= z[1] && z[1] <= 0.75 ? 3.0 * z[0] : 0.0));
        case SimModel::oscillation:
            return std::exp(-1.0 + (std::sin(6.0 * kPi * z[1]) >= 0.0 ? 4.0 : 0.0));
        case SimModel::linear: return std::exp(-1.0 + 3.0 * z[1] - 3.0 * z[5]);
        case SimModel::smooth_additive:
            return std::exp(-1.0 + 2.0 * std::sin(2.0 * kPi * z[1] * z[1]) +
                            2.0 * std::sin(2.0 * kPi * z[5] * z[5]));
        case SimModel::aft_shift:
            throw ConfigError("aft_shift has no constant subject rate");
    }
    throw ConfigError("unknown benchmark model");
}

double calibrate_censoring(SimModel model, double target) {
    if (!(target > 0.0 && target < 1.0))
        throw ConfigError("censoring rate must lie in (0, 1)");
    static std::map<std::pair<int, std::int64_t>, double> cache;
    static std::mutex lock;
    const std::pair<int, std::int64_t> key{static_cast<int>(model),
                                           std::llround(target * 1e12)};
    {
        std::lock_guard<std::mutex> guard(lock);
        const auto it = cache.find(key);
        if (it != cache.end()) return it->second;
    }
    Rng r = Rng(kCalibrationSeed).child(model_name(model));
    std::vector<double> times;
    times.reserve(kCalibrationDraws);
    for (std::size_t i = 0; i < kCalibrationDraws; ++i) {
        const auto z = draw_covariates(r);
        times.push_back(draw_event_time(model, z, r));
    }
    const double theta = calibrate_from_times(times, target);
    std::lock_guard<std::mutex> guard(lock);
    cache.emplace(key, theta);
    return theta;
}

SurvivalDataset generate(SimModel model, std::size_t n, double censoring_rate,
                         std::uint64_t seed) {
    if (n == 0) throw ConfigError("generate needs n >= 1");
    const double theta = calibrate_censoring(model, censoring_rate);
    SurvivalDataset data;
    data.schema = bench_schema();
    data.covariates.assign(7, {});
    for (auto& col : data.covariates) col.reserve(n);
    data.time.reserve(n);
    data.status.reserve(n);
    Rng r(seed);
    for (std::size_t i = 0; i < n; ++i) {
        const auto z = draw_covariates(r);
        for (std::size_t j = 0; j < 7; ++j) data.covariates[j].push_back(z[j]);
        const double t = draw_event_time(model, z, r);
        const double c = r.exponential(theta);
        data.time.push_back(std::min(t, c));
        data.status.push_back(t <= c ? 1 : 0);
    }
    return data;
}

// ---------------------------------------------------------------------------
// Comparison bench.

BenchReport run_comparison(SimModel model, const BenchConfig& config,
                           std::uint64_t seed) {
    if (config.replicates == 0)
        throw ConfigError("run_comparison needs replicates >= 1");
    BenchReport out;
    out.model = model;
    out.cross_validation = config.cross_validation;
    const auto important = important_variables(model);
    Rng base(seed);

    std::vector<double> sizes, leaves, devs, concs;
    std::size_t n_inc = 0, n_exc = 0, n_acc = 0;
    for (std::size_t rep = 0; rep < config.replicates; ++rep) {
        BenchReplicate row;
        row.replicate = rep;
        Rng rr = base.child("rep").child(rep);
        try {
            SelectionResult res;
            std::size_t n_train = 0;
            if (config.cross_validation) {
                const auto data = generate(model, config.cv_n, config.censoring_rate,
                                           rr.child("train").next_u64());
                n_train = data.n_rows();
                res = select_cv(data, config.folds, config.pipeline,
                                rr.child("select").next_u64());
            } else {
                const auto train = generate(model, config.train_n,
                                            config.censoring_rate,
                                            rr.child("train").next_u64());
                const auto valid = generate(model, config.validation_n,
                                            config.censoring_rate,
                                            rr.child("validation").next_u64());
                n_train = train.n_rows();
                res = select_test_sample(train, valid, config.pipeline,
                                         rr.child("select").next_u64());
            }
            const auto eval = generate(model, config.eval_n, config.censoring_rate,
                                       rr.child("eval").next_u64());
            const FusionPattern& pattern = res.path.patterns.at(res.report.chosen);

            row.groups = res.grouping.group_count;
            row.leaves = res.initial.leaf_ids().size();
            std::set<std::size_t> split_vars;
            for (const auto& [id, node] : res.sheared.nodes)
                if (node.split) split_vars.insert(node.split->variable);
            row.inclusive = std::all_of(
                split_vars.begin(), split_vars.end(), [&](std::size_t v) {
                    return std::find(important.begin(), important.end(), v) !=
                           important.end();
                });
            row.exclusive =
                std::all_of(important.begin(), important.end(), [&](std::size_t v) {
                    return split_vars.count(v) > 0;
                });
            row.accurate = row.inclusive && row.exclusive;
            row.deviance = pattern_deviance(res.initial, pattern, eval,
                                            full_index(eval), n_train);
            std::vector<double> risk(eval.n_rows());
            for (std::size_t i = 0; i < eval.n_rows(); ++i) {
                const auto g = route_group(res.initial, res.grouping, eval, i);
                risk[i] = pattern.relaxed_beta.at(static_cast<std::size_t>(g) - 1);
            }
            row.concordance = concordance(risk, eval.time, eval.status);
        } catch (const std::exception& e) {
            row.failed = true;
            row.error = e.what();
        }
        if (!row.failed) {
            ++out.used;
            sizes.push_back(static_cast<double>(row.groups));
            leaves.push_back(static_cast<double>(row.leaves));
            devs.push_back(row.deviance);
            if (std::isfinite(row.concordance)) concs.push_back(row.concordance);
            n_inc += row.inclusive;
            n_exc += row.exclusive;
            n_acc += row.accurate;
        }
        out.replicates.push_back(std::move(row));
    }
    out.size_mean = mean(sizes);
    out.size_sd = sample_sd(sizes);
    out.leaves_mean = mean(leaves);
    if (out.used > 0) {
        const double denom = static_cast<double>(out.used);
        out.inclusive_rate = static_cast<double>(n_inc) / denom;
        out.exclusive_rate = static_cast<double>(n_exc) / denom;
        out.accurate_rate = static_cast<double>(n_acc) / denom;
    }
    out.deviance_mean = mean(devs);
    out.deviance_sd = sample_sd(devs);
    out.concordance_mean = mean(concs);
    return out;
}

static void append_summary_row(std::string& csv, const BenchReport& r) {
    char buf[320];
    std::snprintf(buf, sizeof buf,
                  "%s,%s,%zu,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g\n",
                  model_name(r.model), r.cross_validation ? "cv" : "test-sample",
                  r.used, r.size_mean, r.size_sd, r.leaves_mean,
                  r.inclusive_rate, r.exclusive_rate, r.accurate_rate,
                  r.deviance_mean, r.deviance_sd, r.concordance_mean);
    csv += buf;
}

static const char* kComparisonHeader =
    "model,mode,used,size_mean,size_sd,leaves_mean,inclusive,exclusive,"
    "accurate,deviance_mean,deviance_sd,concordance_mean\n";

std::string BenchReport::to_csv() const {
    std::string csv = kComparisonHeader;
    append_summary_row(csv, *this);
    return csv;
}

std::string BenchReport::replicates_csv() const {
    std::string csv =
        "replicate,failed,groups,leaves,inclusive,exclusive,accurate,deviance,"
        "concordance,error\n";
    for (const auto& r : replicates) {
        char buf[256];
        std::snprintf(buf, sizeof buf, "%zu,%s,%d,%zu,%s,%s,%s,%.6g,%.6g,",
                      r.replicate, csv_bool(r.failed), r.groups, r.leaves,
                      csv_bool(r.inclusive), csv_bool(r.exclusive),
                      csv_bool(r.accurate), r.deviance, r.concordance);
        csv += buf;
        csv += '"' + r.error + "\"\n";
    }
    return csv;
}

std::string comparison_table_csv(const std::vector<BenchReport>& reports) {
    std::string csv = kComparisonHeader;
    for (const auto& r : reports) append_summary_row(csv, r);
    return csv;
}

// ---------------------------------------------------------------------------
// Bias study.

static void summarize_quantity(BiasQuantity& q, const std::vector<double>& truth,
                               const std::vector<double>& raw,
                               const std::vector<double>& corrected) {
    q.truth_mean = mean(truth);
    std::vector<double> err_raw, err_cor;
    err_raw.reserve(truth.size());
    err_cor.reserve(truth.size());
    for (std::size_t i = 0; i < truth.size(); ++i) {
        err_raw.push_back(raw[i] - truth[i]);
        err_cor.push_back(corrected[i] - truth[i]);
    }
    q.bias_raw = mean(err_raw);
    q.bias_corrected = mean(err_cor);
    q.mad_raw = mad(raw);
    q.mad_corrected = mad(corrected);
    double mr = 0.0, mc = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        mr += err_raw[i] * err_raw[i];
        mc += err_cor[i] * err_cor[i];
    }
    if (!truth.empty()) {
        q.mse_raw = mr / static_cast<double>(truth.size());
        q.mse_corrected = mc / static_cast<double>(truth.size());
    }
}

BiasReport run_bias_study(SimModel model, const BiasStudyConfig& config,
                          std::uint64_t seed) {
    if (model != SimModel::band && model != SimModel::linear &&
        model != SimModel::smooth_additive)
        throw ConfigError(
            "bias study covers band, linear and smooth_additive only");
    if (config.replicates == 0)
        throw ConfigError("run_bias_study needs replicates >= 1");
    BiasReport out;
    out.model = model;
    Rng base(seed);
    const double root_n = std::sqrt(static_cast<double>(config.train_n));
    const double root_truth_n = std::sqrt(static_cast<double>(config.truth_n));

    for (std::size_t rep = 0; rep < config.replicates; ++rep) {
        ++out.attempted;
        Rng rr = base.child("rep").child(rep);
        try {
            const auto train = generate(model, config.train_n,
                                        config.censoring_rate,
                                        rr.child("train").next_u64());
            const auto valid = generate(model, config.validation_n,
                                        config.censoring_rate,
                                        rr.child("validation").next_u64());
            const auto res = select_test_sample(train, valid, config.pipeline,
                                                rr.child("select").next_u64());
            if (res.grouping.group_count < 2) {
                out.warnings.push_back("replicate " + std::to_string(rep) +
                                       ": single group, skipped");
                continue;
            }
            const auto truth_data = generate(model, config.truth_n,
                                             config.censoring_rate,
                                             rr.child("truth").next_u64());
            const auto truth =
                group_summaries(truth_data, res.sheared, res.grouping);
            BBCConfig bbc;
            bbc.bootstraps = config.bootstraps;
            bbc.tree = config.pipeline.tree;
            bbc.fusion = config.pipeline.fusion;
            const auto bbc_report = bootstrap_bias_correct(
                train, res.sheared, res.grouping, bbc,
                rr.child("bbc").next_u64());
            for (const auto& w : bbc_report.warnings)
                out.warnings.push_back("replicate " + std::to_string(rep) + ": " + w);

            bool any = false;
            for (std::size_t k = 1; k < truth.rows.size(); ++k) {
                const auto& trow = truth.rows[k];
                const auto& rrow = bbc_report.raw.rows[k];
                if (trow.diverged || rrow.diverged ||
                    bbc_report.corrected.rows[k].diverged) {
                    out.warnings.push_back("replicate " + std::to_string(rep) +
                                           ": group " + std::to_string(k + 1) +
                                           " diverged, skipped");
                    continue;
                }
                BiasSample s;
                s.replicate = rep;
                s.group = trow.group;
                s.truth_beta = trow.beta;
                s.raw_beta = rrow.beta;
                s.corrected_beta = bbc_report.corrected_beta[k];
                s.truth_sd = trow.se * root_truth_n;
                s.raw_sd = rrow.se * root_n;
                s.corrected_sd = bbc_report.corrected_sd[k];
                out.samples.push_back(s);
                any = true;
            }
            if (any) ++out.used;
        } catch (const std::exception& e) {
            out.warnings.push_back("replicate " + std::to_string(rep) + ": " +
                                   e.what());
        }
    }

    std::vector<double> tb, rb, cb, ts, rs, cs;
    for (const auto& s : out.samples) {
        tb.push_back(s.truth_beta);
        rb.push_back(s.raw_beta);
        cb.push_back(s.corrected_beta);
        ts.push_back(s.truth_sd);
        rs.push_back(s.raw_sd);
        cs.push_back(s.corrected_sd);
    }
    summarize_quantity(out.beta, tb, rb, cb);
    summarize_quantity(out.sd, ts, rs, cs);
    return out;
}

std::string BiasReport::to_csv() const {
    std::string csv =
        "model,estimate,used,truth_mean,bias_raw,mad_raw,mse_raw,bias_bbc,"
        "mad_bbc,mse_bbc\n";
    const auto row = [&](const char* label, const BiasQuantity& q) {
        char buf[256];
        std::snprintf(buf, sizeof buf, "%s,%s,%zu,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g\n",
                      model_name(model), label, used, q.truth_mean, q.bias_raw,
                      q.mad_raw, q.mse_raw, q.bias_corrected, q.mad_corrected,
                      q.mse_corrected);
        csv += buf;
    };
    row("beta", beta);
    row("sd", sd);
    return csv;
}

std::string BiasReport::samples_csv() const {
    std::string csv =
        "replicate,group,truth_beta,raw_beta,bbc_beta,truth_sd,raw_sd,bbc_sd\n";
    for (const auto& s : samples) {
        char buf[224];
        std::snprintf(buf, sizeof buf, "%zu,%d,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g\n",
                      s.replicate, s.group, s.truth_beta, s.raw_beta,
                      s.corrected_beta, s.truth_sd, s.raw_sd, s.corrected_sd);
        csv += buf;
    }
    return csv;
}

// ---------------------------------------------------------------------------
// Cutoff study.

namespace {

struct ThresholdDraw {
    std::vector<double> z, time;
    std::vector<std::uint8_t> status;
};

double threshold_rate(const CutoffStudyConfig& cfg, double z) {
    return std::exp(cfg.beta0 + (z <= cfg.cutpoint ? cfg.beta1 : 0.0));
}

double calibrate_threshold_model(const CutoffStudyConfig& cfg) {
    Rng r = Rng(kCalibrationSeed).child("threshold");
    std::vector<double> times;
    times.reserve(kCalibrationDraws);
    for (std::size_t i = 0; i < kCalibrationDraws; ++i) {
        const double z = r.uniform();
        times.push_back(r.exponential(threshold_rate(cfg, z)));
    }
    return calibrate_from_times(times, cfg.censoring_rate);
}

ThresholdDraw draw_threshold_sample(const CutoffStudyConfig& cfg, double theta,
                                    Rng& r) {
    ThresholdDraw d;
    d.z.reserve(cfg.n);
    d.time.reserve(cfg.n);
    d.status.reserve(cfg.n);
    for (std::size_t i = 0; i < cfg.n; ++i) {
        const double z = r.uniform();
        const double t = r.exponential(threshold_rate(cfg, z));
        const double c = r.exponential(theta);
        d.z.push_back(z);
        d.time.push_back(std::min(t, c));
        d.status.push_back(t <= c ? 1 : 0);
    }
    return d;
}

}  // namespace

CutoffStudyReport run_cutoff_study(const CutoffStudyConfig& config,
                                   std::uint64_t seed) {
    CutoffStudyReport out;
    out.config = config;
    if (out.config.shapes.empty())
        for (int a = 5; a <= 100; a += 5)
            out.config.shapes.push_back(static_cast<double>(a));
    if (config.n < 2 || config.replicates == 0)
        throw ConfigError("run_cutoff_study needs n >= 2 and replicates >= 1");

    out.arms.emplace_back();
    out.arms.back().method = "gs";
    for (const double a : out.config.shapes) {
        out.arms.emplace_back();
        out.arms.back().method = "sss";
        out.arms.back().shape = a;
    }

    const double theta = calibrate_threshold_model(out.config);
    Rng base(seed);
    for (std::size_t rep = 0; rep < config.replicates; ++rep) {
        Rng rr = base.child("rep").child(rep);
        const auto d = draw_threshold_sample(out.config, theta, rr);
        std::vector<double> found;
        found.reserve(out.arms.size());
        bool ok = true;
        try {
            const LogrankScorer scorer(d.time, d.status);
            SplitSearchConfig scfg;
            const auto gs = greedy_search(scorer, d.z, 0, scfg);
            ok = gs.feasible;
            if (ok) {
                found.push_back(gs.spec.threshold);
                for (const double a : out.config.shapes) {
                    scfg.shape_a = a;
                    const auto sss = sss_search(scorer, d.z, 0, scfg);
                    if (!sss.feasible) {
                        ok = false;
                        break;
                    }
                    found.push_back(sss.spec.threshold);
                }
            }
        } catch (const DataError&) {
            ok = false;  // event-free draw: no scorer, no cutoffs
        }
        if (!ok) continue;  // keep arms aligned on the same replicates
        ++out.used;
        for (std::size_t i = 0; i < out.arms.size(); ++i)
            out.arms[i].cutoffs.push_back(found[i]);
    }
    for (auto& arm : out.arms) {
        double s = 0.0;
        for (const double c : arm.cutoffs) {
            const double e = c - out.config.cutpoint;
            s += e * e;
        }
        arm.mse = arm.cutoffs.empty()
                      ? 0.0
                      : s / static_cast<double>(arm.cutoffs.size());
    }
    return out;
}

std::string CutoffStudyReport::to_csv() const {
    std::string csv = "method,shape,mse,used\n";
    for (const auto& arm : arms) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "%s,%.6g,%.6g,%zu\n", arm.method.c_str(),
                      arm.shape, arm.mse, arm.cutoffs.size());
        csv += buf;
    }
    return csv;
}

std::string CutoffStudyReport::cutoffs_csv() const {
    std::string csv = "method,shape,replicate,cutoff\n";
    for (const auto& arm : arms) {
        for (std::size_t i = 0; i < arm.cutoffs.size(); ++i) {
            char buf[128];
            std::snprintf(buf, sizeof buf, "%s,%.6g,%zu,%.6g\n",
                          arm.method.c_str(), arm.shape, i, arm.cutoffs[i]);
            csv += buf;
        }
    }
    return csv;
}

// ---------------------------------------------------------------------------
// Selection-frequency study.

namespace {

std::vector<double> scenario_effects(const SelectionStudyConfig& cfg) {
    switch (cfg.scenario) {
        case SelectionScenario::null_signal: return {0, 0, 0, 0, 0};
        case SelectionScenario::single_signal: return {cfg.beta1, 0, 0, 0, 0};
        case SelectionScenario::balanced_signal: return {1, -1, 1, -1, 1};
    }
    throw ConfigError("unknown selection scenario");
}

std::vector<CovariateSpec> selection_schema() {
    std::vector<CovariateSpec> schema(5);
    const char* names[] = {"z1", "z2", "z3", "z4", "z5"};
    for (std::size_t j = 0; j < 5; ++j) schema[j].name = names[j];
    schema[0].kind = CovariateKind::binary;
    schema[4].kind = CovariateKind::nominal;
    schema[4].levels = {"A", "B", "C", "D", "E", "F", "G", "H", "I", "J"};
    return schema;
}

std::vector<double> draw_selection_covariates(Rng& r) {
    std::vector<double> z(5);
    z[0] = r.bernoulli(0.5) ? 1.0 : 0.0;
    z[1] = static_cast<double>(r.below(10) + 1) / 10.0;
    z[2] = static_cast<double>(r.below(50) + 1) / 50.0;
    z[3] = r.uniform();
    z[4] = static_cast<double>(r.below(10));
    return z;
}

double selection_rate(const std::vector<double>& z,
                      const std::vector<double>& beta) {
    double eta = -1.0;
    eta += beta[0] * z[0];
    eta += beta[1] * (z[1] <= 0.5 ? 1.0 : 0.0);
    eta += beta[2] * (z[2] <= 0.5 ? 1.0 : 0.0);
    eta += beta[3] * (z[3] <= 0.5 ? 1.0 : 0.0);
    eta += beta[4] * (z[4] < 5.0 ? 1.0 : 0.0);
    return std::exp(eta);
}

SurvivalDataset draw_selection_sample(const SelectionStudyConfig& cfg,
                                      const std::vector<double>& beta,
                                      double theta, Rng& r) {
    SurvivalDataset data;
    data.schema = selection_schema();
    data.covariates.assign(5, {});
    for (std::size_t i = 0; i < cfg.n; ++i) {
        const auto z = draw_selection_covariates(r);
        for (std::size_t j = 0; j < 5; ++j) data.covariates[j].push_back(z[j]);
        const double t = r.exponential(selection_rate(z, beta));
        const double c = r.exponential(theta);
        data.time.push_back(std::min(t, c));
        data.status.push_back(t <= c ? 1 : 0);
    }
    return data;
}

}  // namespace

SelectionStudyReport run_selection_study(const SelectionStudyConfig& config,
                                         std::uint64_t seed) {
    if (config.n < 2 || config.replicates == 0)
        throw ConfigError("run_selection_study needs n >= 2 and replicates >= 1");
    SelectionStudyReport out;
    out.config = config;
    const auto schema = selection_schema();
    for (const auto& spec : schema) out.variables.push_back(spec.name);
    const auto beta = scenario_effects(config);

    Rng cal = Rng(kCalibrationSeed).child("selection").child(
        static_cast<std::uint64_t>(config.scenario));
    std::vector<double> cal_times;
    cal_times.reserve(kCalibrationDraws);
    for (std::size_t i = 0; i < kCalibrationDraws; ++i) {
        const auto z = draw_selection_covariates(cal);
        cal_times.push_back(cal.exponential(selection_rate(z, beta)));
    }
    const double theta = calibrate_from_times(cal_times, config.censoring_rate);

    std::vector<std::size_t> gs_count(5, 0), iv_count(5, 0);
    Rng base(seed);
    for (std::size_t rep = 0; rep < config.replicates; ++rep) {
        Rng rr = base.child("rep").child(rep);
        Rng data_rng = rr.child("data");
        const auto data = draw_selection_sample(config, beta, theta, data_rng);
        const auto pool = full_index(data);

        SplitSearchConfig gs_cfg;
        gs_cfg.method = SplitMethod::force_gs;
        const auto gs = plain_split(data, pool, gs_cfg);
        if (gs.feasible) {
            ++out.gs_used;
            ++gs_count[gs.spec.variable];
        }

        IVConfig iv_cfg;
        Rng iv_rng = rr.child("iv");
        const auto iv = iv_split(data, pool, iv_cfg, iv_rng);
        if (iv.feasible) {
            ++out.iv_used;
            ++iv_count[iv.spec.variable];
        }
    }
    out.gs_frequency.assign(5, 0.0);
    out.iv_frequency.assign(5, 0.0);
    for (std::size_t j = 0; j < 5; ++j) {
        if (out.gs_used > 0)
            out.gs_frequency[j] =
                static_cast<double>(gs_count[j]) / static_cast<double>(out.gs_used);
        if (out.iv_used > 0)
            out.iv_frequency[j] =
                static_cast<double>(iv_count[j]) / static_cast<double>(out.iv_used);
    }
    return out;
}

std::string SelectionStudyReport::to_csv() const {
    std::string csv = "variable,gs_frequency,iv_frequency\n";
    for (std::size_t j = 0; j < variables.size(); ++j) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "%s,%.6g,%.6g\n", variables[j].c_str(),
                      gs_frequency[j], iv_frequency[j]);
        csv += buf;
    }
    return csv;
}

}  // namespace survtreeful
