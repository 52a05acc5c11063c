#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "survtreeful/dataset.hpp"
#include "survtreeful/inference.hpp"
#include "survtreeful/select.hpp"

namespace survtreeful {

/// Benchmark data-generating models over seven covariates: z1, z4, z5 ~
/// Bernoulli(1/2); z2, z6, z7 ~ U[0,1]; z3 uniform over five nominal levels.
/// Event-time laws (t in the hazard scale unless noted):
///   null_flat        lambda = exp(-1)
///   two_group        lambda = exp(-1 + z1 + 2 I(z2 <= 0.5))
///   band             lambda = exp(-1 + 3 z1 I(0.25 <= z2 <= 0.75))
///   oscillation      lambda = exp(-1 + 4 I(sin(6 pi z2) >= 0))
///   linear           lambda = exp(-1 + 3 z2 - 3 z6)
///   smooth_additive  lambda = exp(-1 + 2 sin(2 pi z2^2) + 2 sin(2 pi z6^2))
///   aft_shift        log T = -1 + z1 + 2 I(z2 <= 0.5) + e, e ~ logistic(0,1)
enum class SimModel {
    null_flat,
    two_group,
    band,
    oscillation,
    linear,
    smooth_additive,
    aft_shift,
};

const char* model_name(SimModel model);
SimModel model_from_name(const std::string& name);  // ConfigError on unknown

/// Covariate schema shared by every benchmark model.
std::vector<CovariateSpec> bench_schema();

/// Variables (0-based schema indices) that actually drive the event law.
std::vector<std::size_t> important_variables(SimModel model);

/// Event rate for one subject given the 7-covariate vector. Only defined for
/// the constant-hazard models; aft_shift throws ConfigError.
double subject_rate(SimModel model, const std::vector<double>& z);

/// Exponential censoring rate theta whose expected censoring fraction under
/// the model equals target (in (0,1)). Solved by bisection on a fixed-seed
/// Monte-Carlo (n = 100000) estimate of P(C < T); cached per (model, target).
double calibrate_censoring(SimModel model, double target);

/// n independent subjects: covariates as above, event time from the model,
/// censoring time ~ Exp(calibrate_censoring(model, censoring_rate)). Pure
/// function of (model, n, censoring_rate, seed).
SurvivalDataset generate(SimModel model, std::size_t n, double censoring_rate,
                         std::uint64_t seed);

// ---------------------------------------------------------------------------
// Pipeline comparison bench: full fit on fresh data per replicate, structure
// and prediction metrics on an independent evaluation sample.

struct BenchConfig {
    std::size_t replicates = 50;
    double censoring_rate = 0.5;
    bool cross_validation = false;  // false: held-out test-sample selection
    std::size_t train_n = 400;      // test-sample arm
    std::size_t validation_n = 200;
    std::size_t cv_n = 600;  // cross-validation arm
    std::size_t folds = 10;
    std::size_t eval_n = 1000;  // independent metric sample
    SelectionConfig pipeline;
};

struct BenchReplicate {
    std::size_t replicate = 0;
    bool failed = false;
    std::string error;
    std::int32_t groups = 0;  // final fused model size
    std::size_t leaves = 0;   // selected tree leaves before fusion
    bool inclusive = false;   // every split variable is truly important
    bool exclusive = false;   // every important variable is split on
    bool accurate = false;    // inclusive && exclusive
    double deviance = 0.0;    // validated deviance on the evaluation sample
    double concordance = 0.0;
};

struct BenchReport {
    SimModel model = SimModel::null_flat;
    bool cross_validation = false;
    std::size_t used = 0;  // replicates that produced a fit
    double size_mean = 0.0, size_sd = 0.0;
    double leaves_mean = 0.0;
    double inclusive_rate = 0.0, exclusive_rate = 0.0, accurate_rate = 0.0;
    double deviance_mean = 0.0, deviance_sd = 0.0;
    double concordance_mean = 0.0;
    std::vector<BenchReplicate> replicates;

    std::string to_csv() const;          // one summary row
    std::string replicates_csv() const;  // raw per-replicate rows
};

BenchReport run_comparison(SimModel model, const BenchConfig& config,
                           std::uint64_t seed);

/// Summary rows of several runs stacked under one header.
std::string comparison_table_csv(const std::vector<BenchReport>& reports);

// ---------------------------------------------------------------------------
// Bias study: raw versus bootstrap-corrected group estimates against a truth
// fit on a large independent sample routed through the selected model.

struct BiasStudyConfig {
    std::size_t replicates = 50;
    double censoring_rate = 0.5;
    std::size_t train_n = 600;
    std::size_t validation_n = 400;  // held-out sample for model selection
    std::size_t truth_n = 20000;     // independent sample behind the truth fit
    std::size_t bootstraps = 20;
    SelectionConfig pipeline;
};

struct BiasSample {  // one non-reference group in one replicate
    std::size_t replicate = 0;
    std::int32_t group = 0;
    double truth_beta = 0.0, raw_beta = 0.0, corrected_beta = 0.0;
    double truth_sd = 0.0, raw_sd = 0.0, corrected_sd = 0.0;
};

struct BiasQuantity {  // pooled over samples; sd rows use the sqrt(n) scale
    double truth_mean = 0.0;
    double bias_raw = 0.0, mad_raw = 0.0, mse_raw = 0.0;
    double bias_corrected = 0.0, mad_corrected = 0.0, mse_corrected = 0.0;
};

struct BiasReport {
    SimModel model = SimModel::band;
    std::size_t attempted = 0;
    std::size_t used = 0;  // replicates contributing at least one sample
    BiasQuantity beta;     // group log hazard ratios
    BiasQuantity sd;       // estimator standard deviations
    std::vector<BiasSample> samples;
    std::vector<std::string> warnings;

    std::string to_csv() const;       // two summary rows: beta, sd
    std::string samples_csv() const;  // raw per-sample rows
};

/// Covers the grouped-hazard models band, linear and smooth_additive; other
/// models throw ConfigError. Bias = mean(estimate - truth), MAD = median
/// absolute deviation of the estimates from their median, MSE = mean squared
/// error against the per-replicate truth.
BiasReport run_bias_study(SimModel model, const BiasStudyConfig& config,
                          std::uint64_t seed);

// ---------------------------------------------------------------------------
// Split-rule studies on a one-variable threshold model:
//   lambda = exp(beta0 + beta1 I(z <= cutpoint)), z ~ U[0,1].

struct CutoffStudyConfig {
    std::size_t n = 200;
    std::size_t replicates = 200;
    double beta0 = 1.0;
    double beta1 = -1.0;
    double cutpoint = 0.5;
    double censoring_rate = 0.5;
    std::vector<double> shapes = {};  // empty: 5, 10, ..., 100
};

struct CutoffArm {
    std::string method;  // "gs" or "sss"
    double shape = 0.0;  // sigmoid steepness, 0 for the greedy arm
    double mse = 0.0;    // mean squared cutoff error against cutpoint
    std::vector<double> cutoffs;  // one estimate per used replicate
};

struct CutoffStudyReport {
    CutoffStudyConfig config;
    std::size_t used = 0;  // replicates where every arm found a split
    std::vector<CutoffArm> arms;  // greedy first, then ascending shape

    std::string to_csv() const;       // method,shape,mse rows
    std::string cutoffs_csv() const;  // raw per-replicate cutoffs
};

CutoffStudyReport run_cutoff_study(const CutoffStudyConfig& config,
                                   std::uint64_t seed);

// ---------------------------------------------------------------------------
// Variable-selection frequency study. Five candidates with very different
// split-point counts, all with the same conditional effect when active:
//   z1 ~ Bernoulli(1/2)            x1 = z1
//   z2 ~ DU{0.1, ..., 1.0}         x2 = I(z2 <= 0.5)
//   z3 ~ DU{1/50, ..., 1}          x3 = I(z3 <= 0.5)
//   z4 ~ U[0,1]                    x4 = I(z4 <= 0.5)
//   z5 ~ DU{10 nominal levels}     x5 = I(z5 in first five levels)
// Hazard exp(-1 + sum_j beta_j x_j).

enum class SelectionScenario {
    null_signal,      // all beta_j = 0
    single_signal,    // beta = (beta1, 0, 0, 0, 0)
    balanced_signal,  // beta = (1, -1, 1, -1, 1)
};

struct SelectionStudyConfig {
    std::size_t n = 200;
    std::size_t replicates = 200;
    double censoring_rate = 0.5;
    SelectionScenario scenario = SelectionScenario::null_signal;
    double beta1 = 0.0;  // single_signal strength
};

struct SelectionStudyReport {
    SelectionStudyConfig config;
    std::vector<std::string> variables;  // schema names, z1..z5
    std::vector<double> gs_frequency;    // greedy root pick rate per variable
    std::vector<double> iv_frequency;    // intersected-validation pick rate
    std::size_t gs_used = 0, iv_used = 0;

    std::string to_csv() const;
};

SelectionStudyReport run_selection_study(const SelectionStudyConfig& config,
                                         std::uint64_t seed);

}  // namespace survtreeful
