#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "survtreeful/inference.hpp"
#include "survtreeful/model_io.hpp"
#include "survtreeful/select.hpp"
#include "survtreeful/simbench.hpp"

namespace fs = std::filesystem;
using namespace survtreeful;

namespace {

// ---------------------------------------------------------------------------
// Small utilities.

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
    if (!out) throw DataError("failed writing " + path.string());
}

std::vector<std::string> split_list(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    for (const char c : s) {
        if (c == sep) {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    parts.push_back(cur);
    return parts;
}

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

/// "z1:binary,z2:continuous,z3:nominal(A|B|C)" -> schema.
std::vector<CovariateSpec> parse_schema(const std::string& text) {
    std::vector<CovariateSpec> schema;
    for (const auto& raw : split_list(text, ',')) {
        const auto entry = trim(raw);
        if (entry.empty()) continue;
        const auto colon = entry.find(':');
        if (colon == std::string::npos)
            throw ConfigError("covariate entry needs name:kind, got '" + entry +
                              "'");
        CovariateSpec spec;
        spec.name = trim(entry.substr(0, colon));
        std::string kind = trim(entry.substr(colon + 1));
        if (kind == "binary") {
            spec.kind = CovariateKind::binary;
        } else if (kind == "continuous") {
            spec.kind = CovariateKind::continuous;
        } else if (kind.rfind("nominal(", 0) == 0 && kind.back() == ')') {
            spec.kind = CovariateKind::nominal;
            const auto body = kind.substr(8, kind.size() - 9);
            for (const auto& lvl : split_list(body, '|'))
                spec.levels.push_back(trim(lvl));
        } else {
            throw ConfigError("unknown covariate kind '" + kind +
                              "' (use binary, continuous or nominal(a|b|...))");
        }
        schema.push_back(std::move(spec));
    }
    if (schema.empty()) throw ConfigError("covariates list is empty");
    validate_schema(schema);
    return schema;
}

/// Flat key=value config file; '#' starts a comment; keys match the long
/// option names without the leading dashes.
std::map<std::string, std::string> parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file: " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto body = trim(line);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) +
                              " is not key=value");
        kv[trim(body.substr(0, eq))] = trim(body.substr(eq + 1));
    }
    return kv;
}

SimModel resolve_model(const std::string& tag) {
    static const std::map<std::string, SimModel> letters = {
        {"A", SimModel::null_flat},   {"B", SimModel::two_group},
        {"C", SimModel::band},        {"D", SimModel::oscillation},
        {"E", SimModel::linear},      {"F", SimModel::smooth_additive},
        {"G", SimModel::aft_shift}};
    const auto it = letters.find(tag);
    if (it != letters.end()) return it->second;
    return model_from_name(tag);
}

/// Covariate-only CSV reader for prediction inputs: picks the schema columns
/// by name, ignores everything else (including any time/status columns).
std::vector<std::vector<double>> read_covariate_csv(
    const std::string& path, const std::vector<CovariateSpec>& schema) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read data file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty data file: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = split_list(line, ',');
    std::vector<std::size_t> col(schema.size());
    for (std::size_t j = 0; j < schema.size(); ++j) {
        bool found = false;
        for (std::size_t c = 0; c < header.size(); ++c) {
            if (trim(header[c]) == schema[j].name) {
                col[j] = c;
                found = true;
                break;
            }
        }
        if (!found)
            throw DataError("data file misses covariate column '" +
                            schema[j].name + "'");
    }
    std::vector<std::vector<double>> rows;
    std::size_t row_no = 0;
    while (std::getline(in, line)) {
        ++row_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        const auto cells = split_list(line, ',');
        std::vector<double> z(schema.size());
        for (std::size_t j = 0; j < schema.size(); ++j) {
            if (col[j] >= cells.size())
                throw DataError("row " + std::to_string(row_no) +
                                " is missing column '" + schema[j].name + "'");
            const auto cell = trim(cells[col[j]]);
            if (schema[j].kind == CovariateKind::nominal) {
                const auto& lv = schema[j].levels;
                const auto it = std::find(lv.begin(), lv.end(), cell);
                if (it == lv.end())
                    throw DataError("row " + std::to_string(row_no) +
                                    ": unknown level '" + cell + "' for '" +
                                    schema[j].name + "'");
                z[j] = static_cast<double>(it - lv.begin());
            } else {
                try {
                    std::size_t used = 0;
                    z[j] = std::stod(cell, &used);
                    if (used != cell.size()) throw std::invalid_argument(cell);
                } catch (const std::exception&) {
                    throw DataError("row " + std::to_string(row_no) +
                                    ": non-numeric value '" + cell + "' for '" +
                                    schema[j].name + "'");
                }
            }
        }
        rows.push_back(std::move(z));
    }
    return rows;
}

// ---------------------------------------------------------------------------
// fit

struct FitOptions {
    std::string data_path;
    std::string covariates;
    std::string time_col = "time";
    std::string status_col = "status";
    std::string selection = "cv";
    std::string validation_path;
    std::string split = "iv";
    std::string method = "auto";
    std::size_t folds = 10;
    std::size_t max_depth = 4;
    std::size_t min_node_size = 30;
    std::size_t min_node_events = 8;
    double shape_a = 50.0;
    bool one_se = false;
    std::size_t bootstraps = 25;
    std::optional<std::uint64_t> seed;
    std::string out_dir = ".";
};

SelectionConfig pipeline_config(const FitOptions& opt) {
    SelectionConfig cfg;
    cfg.tree.max_depth = opt.max_depth;
    cfg.tree.min_node_size = opt.min_node_size;
    cfg.tree.min_node_events = opt.min_node_events;
    cfg.tree.split.shape_a = opt.shape_a;
    if (opt.split == "iv") {
        cfg.tree.use_iv = true;
    } else if (opt.split == "plain") {
        cfg.tree.use_iv = false;
    } else {
        throw ConfigError("split must be iv or plain, got '" + opt.split + "'");
    }
    if (opt.method == "auto") {
        cfg.tree.split.method = SplitMethod::automatic;
    } else if (opt.method == "gs") {
        cfg.tree.split.method = SplitMethod::force_gs;
    } else if (opt.method == "sss") {
        cfg.tree.split.method = SplitMethod::force_sss;
    } else {
        throw ConfigError("method must be auto, gs or sss, got '" + opt.method +
                          "'");
    }
    cfg.one_se = opt.one_se;
    return cfg;
}

std::string km_curves_csv(const SurvivalDataset& data, const Tree& tree,
                          const Grouping& grouping) {
    std::string csv = "group,time,survival\n";
    for (std::int32_t g = 1; g <= grouping.group_count; ++g) {
        std::vector<double> times;
        std::vector<std::uint8_t> statuses;
        for (std::size_t i = 0; i < data.n_rows(); ++i) {
            if (route_group(tree, grouping, data, i) == g) {
                times.push_back(data.time[i]);
                statuses.push_back(data.status[i]);
            }
        }
        csv += std::to_string(g) + ",0,1\n";
        if (times.empty()) continue;
        const auto km = kaplan_meier(times, statuses);
        for (std::size_t k = 0; k < km.times.size(); ++k)
            csv += std::to_string(g) + "," + fmt(km.times[k]) + "," +
                   fmt(km.values[k]) + "\n";
    }
    return csv;
}

int cmd_fit(const FitOptions& opt) {
    if (opt.data_path.empty()) throw ConfigError("fit needs --data");
    if (opt.covariates.empty()) throw ConfigError("fit needs --covariates");
    if (!opt.seed) throw ConfigError("fit needs --seed for reproducible runs");
    const auto schema = parse_schema(opt.covariates);
    const auto data =
        load_csv(opt.data_path, schema, opt.time_col, opt.status_col);
    const auto cfg = pipeline_config(opt);

    SelectionResult res;
    if (opt.selection == "cv") {
        res = select_cv(data, opt.folds, cfg, *opt.seed);
    } else if (opt.selection == "test-sample") {
        if (opt.validation_path.empty())
            throw ConfigError("test-sample selection needs --validation");
        const auto valid =
            load_csv(opt.validation_path, schema, opt.time_col, opt.status_col);
        res = select_test_sample(data, valid, cfg, *opt.seed);
    } else if (opt.selection == "aic" || opt.selection == "bic") {
        const auto crit = opt.selection == "aic" ? SelectionCriterion::aic
                                                 : SelectionCriterion::bic;
        res = select_ic(data, crit, cfg, *opt.seed);
    } else {
        throw ConfigError(
            "selection must be cv, test-sample, aic or bic, got '" +
            opt.selection + "'");
    }

    const auto& pattern = res.path.patterns.at(res.report.chosen);
    FittedModel model;
    model.schema = schema;
    model.tree = res.sheared;
    model.grouping = tree_grouping(res.sheared, res.grouping);
    model.group_beta = pattern.relaxed_beta;
    model.baseline = pattern.baseline;
    model.n_train = data.n_rows();

    BBCConfig bbc;
    bbc.bootstraps = opt.bootstraps;
    bbc.tree = cfg.tree;
    bbc.fusion = cfg.fusion;
    const auto summary = bootstrap_bias_correct(data, res.sheared, res.grouping,
                                                bbc, *opt.seed + 1);

    fs::create_directories(opt.out_dir);
    const fs::path out(opt.out_dir);
    save_model_file(model, (out / "model.json").string());
    write_file(out / "selection_report.csv", res.report.to_csv());
    write_file(out / "group_summary.csv", summary.to_csv());
    write_file(out / "km_curves.csv",
               km_curves_csv(data, res.sheared, res.grouping));
    std::printf("fit: %zu rows, %zu events, %d group(s); artifacts in %s\n",
                data.n_rows(), data.n_events(), res.grouping.group_count,
                opt.out_dir.c_str());
    return 0;
}

// ---------------------------------------------------------------------------
// predict

int cmd_predict(const std::string& model_path, const std::string& data_path,
                const std::string& out_path) {
    const auto model = load_model_file(model_path);
    const auto rows = read_covariate_csv(data_path, model.schema);
    std::string csv = "row,leaf,group,hr\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto leaf = model.tree.route(rows[i]);
        const auto group = model.grouping.leaf_group.at(leaf);
        const double hr =
            std::exp(model.group_beta.at(static_cast<std::size_t>(group) - 1));
        csv += std::to_string(i + 1) + "," + std::to_string(leaf) + "," +
               std::to_string(group) + "," + fmt(hr) + "\n";
    }
    write_file(out_path, csv);
    std::printf("predict: %zu rows routed into %d group(s); wrote %s\n",
                rows.size(), model.grouping.group_count, out_path.c_str());
    return 0;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateOptions {
    std::string model_tag;
    std::string study = "comparison";
    std::size_t replicates = 50;
    double censoring = 0.5;
    bool cross_validation = false;
    std::size_t train_n = 400, validation_n = 200, cv_n = 600, folds = 10;
    std::size_t eval_n = 1000, truth_n = 20000, bootstraps = 20;
    std::string scenario = "null";
    double beta1 = 0.0;
    std::optional<std::uint64_t> seed;
    std::string out_dir = ".";
};

int cmd_simulate(const SimulateOptions& opt) {
    if (!opt.seed)
        throw ConfigError("simulate needs --seed for reproducible runs");
    fs::create_directories(opt.out_dir);
    const fs::path out(opt.out_dir);
    if (opt.study == "comparison") {
        const auto model = resolve_model(opt.model_tag);
        BenchConfig cfg;
        cfg.replicates = opt.replicates;
        cfg.censoring_rate = opt.censoring;
        cfg.cross_validation = opt.cross_validation;
        cfg.train_n = opt.train_n;
        cfg.validation_n = opt.validation_n;
        cfg.cv_n = opt.cv_n;
        cfg.folds = opt.folds;
        cfg.eval_n = opt.eval_n;
        const auto rep = run_comparison(model, cfg, *opt.seed);
        write_file(out / "comparison.csv", rep.to_csv());
        write_file(out / "comparison_replicates.csv", rep.replicates_csv());
        std::printf("simulate comparison: %s, %zu replicate(s) used\n",
                    model_name(model), rep.used);
    } else if (opt.study == "bias") {
        const auto model = resolve_model(opt.model_tag);
        BiasStudyConfig cfg;
        cfg.replicates = opt.replicates;
        cfg.censoring_rate = opt.censoring;
        cfg.train_n = opt.cv_n;  // bias study trains on one sample
        cfg.validation_n = opt.validation_n;
        cfg.truth_n = opt.truth_n;
        cfg.bootstraps = opt.bootstraps;
        const auto rep = run_bias_study(model, cfg, *opt.seed);
        write_file(out / "bias.csv", rep.to_csv());
        write_file(out / "bias_samples.csv", rep.samples_csv());
        std::printf("simulate bias: %s, %zu of %zu replicate(s) used\n",
                    model_name(model), rep.used, rep.attempted);
    } else if (opt.study == "cutoff") {
        CutoffStudyConfig cfg;
        cfg.replicates = opt.replicates;
        cfg.censoring_rate = opt.censoring;
        cfg.beta1 = opt.beta1 == 0.0 ? -1.0 : opt.beta1;
        const auto rep = run_cutoff_study(cfg, *opt.seed);
        write_file(out / "cutoff.csv", rep.to_csv());
        write_file(out / "cutoff_raw.csv", rep.cutoffs_csv());
        std::printf("simulate cutoff: %zu replicate(s) used\n", rep.used);
    } else if (opt.study == "selection") {
        SelectionStudyConfig cfg;
        cfg.replicates = opt.replicates;
        cfg.censoring_rate = opt.censoring;
        cfg.beta1 = opt.beta1;
        if (opt.scenario == "null") {
            cfg.scenario = SelectionScenario::null_signal;
        } else if (opt.scenario == "single") {
            cfg.scenario = SelectionScenario::single_signal;
        } else if (opt.scenario == "balanced") {
            cfg.scenario = SelectionScenario::balanced_signal;
        } else {
            throw ConfigError("scenario must be null, single or balanced");
        }
        const auto rep = run_selection_study(cfg, *opt.seed);
        write_file(out / "selection.csv", rep.to_csv());
        std::printf("simulate selection: gs %zu, iv %zu replicate(s)\n",
                    rep.gs_used, rep.iv_used);
    } else {
        throw ConfigError(
            "study must be comparison, bias, cutoff or selection, got '" +
            opt.study + "'");
    }
    return 0;
}

// ---------------------------------------------------------------------------
// Config-file plumbing: file values fill options the flags did not set.

template <typename T>
void take(const std::map<std::string, std::string>& kv, const CLI::Option* flag,
          const char* key, T& slot) {
    const auto it = kv.find(key);
    if (it == kv.end() || (flag && flag->count() > 0)) return;
    if constexpr (std::is_same_v<T, std::string>) {
        slot = it->second;
    } else if constexpr (std::is_same_v<T, bool>) {
        if (it->second == "1" || it->second == "true") slot = true;
        else if (it->second == "0" || it->second == "false") slot = false;
        else throw ConfigError(std::string("config key ") + key +
                               " must be boolean");
    } else if constexpr (std::is_same_v<T, std::optional<std::uint64_t>>) {
        slot = static_cast<std::uint64_t>(std::stoull(it->second));
    } else if constexpr (std::is_floating_point_v<T>) {
        slot = std::stod(it->second);
    } else {
        slot = static_cast<T>(std::stoull(it->second));
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Survival tree toolkit: logrank-grown trees with smooth "
                 "split search, validated split selection, fused leaf "
                 "grouping and bootstrap-corrected group inference"};
    app.require_subcommand(1);
    int threads = 0;  // informational: every code path is deterministic
    app.add_option("--threads", threads,
                   "Worker bound (results never depend on it)");

    FitOptions fit;
    std::string fit_config;
    auto* cfit = app.add_subcommand("fit", "Fit a fused survival tree");
    auto* f_cfg = cfit->add_option("--config", fit_config,
                                   "key=value config file; flags win");
    auto* f_data = cfit->add_option("--data", fit.data_path, "training CSV");
    auto* f_cov = cfit->add_option(
        "--covariates", fit.covariates,
        "e.g. z1:binary,z2:continuous,z3:nominal(A|B|C)");
    auto* f_time = cfit->add_option("--time", fit.time_col, "time column");
    auto* f_status =
        cfit->add_option("--status", fit.status_col, "status column");
    auto* f_sel = cfit->add_option("--selection", fit.selection,
                                   "cv, test-sample, aic or bic");
    auto* f_valid = cfit->add_option("--validation", fit.validation_path,
                                     "held-out CSV for test-sample");
    auto* f_folds = cfit->add_option("--folds", fit.folds, "CV folds");
    auto* f_split =
        cfit->add_option("--split", fit.split, "node split search: iv or plain");
    auto* f_method = cfit->add_option("--method", fit.method,
                                      "cutoff engine: auto, gs or sss");
    auto* f_depth = cfit->add_option("--max-depth", fit.max_depth, "tree depth");
    auto* f_mns =
        cfit->add_option("--min-node-size", fit.min_node_size, "node size floor");
    auto* f_mne = cfit->add_option("--min-node-events", fit.min_node_events,
                                   "node event floor");
    auto* f_shape = cfit->add_option("--shape-a", fit.shape_a,
                                     "sigmoid steepness for sss");
    auto* f_onese = cfit->add_flag("--one-se", fit.one_se,
                                   "CV: largest lambda within one SE");
    auto* f_boot =
        cfit->add_option("--bootstraps", fit.bootstraps, "BBC resamples");
    std::uint64_t fit_seed = 0;
    auto* f_seed = cfit->add_option("--seed", fit_seed, "RNG seed (required)");
    auto* f_out = cfit->add_option("--out", fit.out_dir, "output directory");

    std::string pr_model, pr_data, pr_out = "predictions.csv";
    auto* cpred = app.add_subcommand("predict", "Route records through a model");
    cpred->add_option("--model", pr_model, "model.json path")->required();
    cpred->add_option("--data", pr_data, "covariate CSV")->required();
    cpred->add_option("--out", pr_out, "output CSV path");

    SimulateOptions sim;
    auto* csim = app.add_subcommand("simulate", "Run a benchmark study");
    csim->add_option("--model", sim.model_tag,
                     "generator tag (null_flat..aft_shift, or A..G)");
    csim->add_option("--study", sim.study,
                     "comparison, bias, cutoff or selection");
    csim->add_option("--replicates", sim.replicates, "replicate count");
    csim->add_option("--censoring", sim.censoring, "target censoring rate");
    csim->add_flag("--cv", sim.cross_validation, "comparison: use V-fold CV");
    csim->add_option("--train-n", sim.train_n, "test-sample training size");
    csim->add_option("--validation-n", sim.validation_n, "validation size");
    csim->add_option("--cv-n", sim.cv_n, "CV / bias-study training size");
    csim->add_option("--folds", sim.folds, "CV folds");
    csim->add_option("--eval-n", sim.eval_n, "independent metric sample");
    csim->add_option("--truth-n", sim.truth_n, "bias-study truth sample");
    csim->add_option("--bootstraps", sim.bootstraps, "bias-study BBC draws");
    csim->add_option("--scenario", sim.scenario,
                     "selection study: null, single or balanced");
    csim->add_option("--beta1", sim.beta1, "signal strength override");
    std::uint64_t sim_seed = 0;
    auto* s_seed = csim->add_option("--seed", sim_seed, "RNG seed (required)");
    csim->add_option("--out", sim.out_dir, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (cfit->parsed()) {
            if (!fit_config.empty()) {
                const auto kv = parse_config_file(fit_config);
                for (const auto& [key, value] : kv) {
                    static const std::set<std::string> known = {
                        "data",          "covariates",     "time",
                        "status",        "selection",      "validation",
                        "folds",         "split",          "method",
                        "max_depth",     "min_node_size",  "min_node_events",
                        "shape_a",       "one_se",         "bootstraps",
                        "seed",          "out"};
                    if (!known.count(key))
                        throw ConfigError("unknown config key '" + key + "'");
                    (void)value;
                }
                take(kv, f_data, "data", fit.data_path);
                take(kv, f_cov, "covariates", fit.covariates);
                take(kv, f_time, "time", fit.time_col);
                take(kv, f_status, "status", fit.status_col);
                take(kv, f_sel, "selection", fit.selection);
                take(kv, f_valid, "validation", fit.validation_path);
                take(kv, f_folds, "folds", fit.folds);
                take(kv, f_split, "split", fit.split);
                take(kv, f_method, "method", fit.method);
                take(kv, f_depth, "max_depth", fit.max_depth);
                take(kv, f_mns, "min_node_size", fit.min_node_size);
                take(kv, f_mne, "min_node_events", fit.min_node_events);
                take(kv, f_shape, "shape_a", fit.shape_a);
                take(kv, f_onese, "one_se", fit.one_se);
                take(kv, f_boot, "bootstraps", fit.bootstraps);
                take(kv, f_seed, "seed", fit.seed);
                take(kv, f_out, "out", fit.out_dir);
            }
            if (f_seed->count() > 0) fit.seed = fit_seed;
            return cmd_fit(fit);
        }
        if (cpred->parsed()) return cmd_predict(pr_model, pr_data, pr_out);
        if (csim->parsed()) {
            if (s_seed->count() > 0) sim.seed = sim_seed;
            if (sim.model_tag.empty() &&
                (sim.study == "comparison" || sim.study == "bias"))
                throw ConfigError("this study needs --model");
            return cmd_simulate(sim);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
