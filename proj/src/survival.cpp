#include "survtreeful/survival.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace survtreeful {

RiskTable build_risk_table(std::span<const double> times,
                           std::span<const std::uint8_t> statuses) {
    const std::size_t n = times.size();
    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        return times[a] < times[b];
    });

    RiskTable t;
    // Ascending sweep: at a death time t_k everyone not yet passed is at risk.
    std::size_t i = 0;
    while (i < n) {
        const double tt = times[order[i]];
        std::size_t j = i;
        double d = 0;
        while (j < n && times[order[j]] == tt) d += statuses[order[j++]];
        if (d > 0) {
            t.event_times.push_back(tt);
            t.at_risk.push_back(static_cast<double>(n - i));
            t.deaths.push_back(d);
        }
        i = j;
    }
    if (t.event_times.empty()) throw DataError("no events in node");
    return t;
}

double StepFunction::at(double t) const {
    if (times.empty() || t < times.front()) return initial;
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    return values[static_cast<std::size_t>(it - times.begin()) - 1];
}

LogrankScorer::LogrankScorer(std::span<const double> times,
                             std::span<const std::uint8_t> statuses)
    : table_(build_risk_table(times, statuses)),
      times_(times.begin(), times.end()) {
    const std::size_t n = times.size();
    const std::size_t D = table_.size();
    at_risk_count_.resize(n);
    death_index_.resize(n);
    std::vector<std::uint32_t> death_counts(D, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& et = table_.event_times;
        at_risk_count_[i] = static_cast<std::uint32_t>(
            std::upper_bound(et.begin(), et.end(), times[i]) - et.begin());
        if (statuses[i]) {
            const auto it = std::lower_bound(et.begin(), et.end(), times[i]);
            death_index_[i] = static_cast<std::int32_t>(it - et.begin());
            ++death_counts[static_cast<std::size_t>(death_index_[i])];
        } else {
            death_index_[i] = -1;
        }
    }
    death_offsets_.assign(D + 1, 0);
    for (std::size_t k = 0; k < D; ++k)
        death_offsets_[k + 1] = death_offsets_[k] + death_counts[k];
    death_rows_.resize(death_offsets_[D]);
    std::vector<std::uint32_t> cursor(death_offsets_.begin(),
                                      death_offsets_.end() - 1);
    for (std::size_t i = 0; i < n; ++i)
        if (death_index_[i] >= 0)
            death_rows_[cursor[static_cast<std::size_t>(death_index_[i])]++] =
                static_cast<std::uint32_t>(i);

    rows_by_time_desc_.resize(n);
    std::iota(rows_by_time_desc_.begin(), rows_by_time_desc_.end(), 0u);
    std::sort(rows_by_time_desc_.begin(), rows_by_time_desc_.end(),
              [&](std::uint32_t a, std::uint32_t b) {
                  if (times[a] != times[b]) return times[a] > times[b];
                  return a < b;
              });

    const std::vector<double> ones(D, 1.0);
    set_weights(ones);
}

void LogrankScorer::set_weights(std::span<const double> weights) {
    const std::size_t D = table_.size();
    if (weights.size() != D)
        throw ConfigError("logrank weights length must match event times");
    bool any = false;
    for (const double w : weights) {
        if (w < 0) throw ConfigError("logrank weights must be nonnegative");
        any = any || w > 0;
    }
    if (!any) throw ConfigError("logrank weights must not all be zero");

    a_.assign(D, 0.0);
    w_num_.assign(D, 0.0);
    wd_over_y_.assign(D, 0.0);
    prefix_wdy_.assign(D + 1, 0.0);
    for (std::size_t k = 0; k < D; ++k) {
        const double Y = table_.at_risk[k], d = table_.deaths[k];
        if (Y > 1.0) {  // Y_k = 1 times carry no information
            const double w = weights[k];
            w_num_[k] = w;
            wd_over_y_[k] = w * d / Y;
            a_[k] = w * w * d * (Y - d) / (Y * Y * (Y - 1.0));
        }
        prefix_wdy_[k + 1] = prefix_wdy_[k] + wd_over_y_[k];
    }
}

std::optional<double> LogrankScorer::score(
    std::span<const double> membership) const {
    if (membership.size() != n_rows())
        throw ConfigError("membership length must match node size");
    const std::size_t D = table_.size();
    double num = 0.0, den = 0.0;
    double at_risk_m = 0.0;  // sum of memberships over {T_i >= t_k}
    std::size_t ptr = 0;
    for (std::size_t kk = D; kk-- > 0;) {
        const double tk = table_.event_times[kk];
        while (ptr < rows_by_time_desc_.size() &&
               times_[rows_by_time_desc_[ptr]] >= tk)
            at_risk_m += membership[rows_by_time_desc_[ptr++]];
        if (a_[kk] == 0.0 && w_num_[kk] == 0.0) continue;
        double deaths_m = 0.0;
        for (std::uint32_t o = death_offsets_[kk]; o < death_offsets_[kk + 1];
             ++o)
            deaths_m += membership[death_rows_[o]];
        const double Y = table_.at_risk[kk];
        num += w_num_[kk] * (deaths_m - at_risk_m * table_.deaths[kk] / Y);
        den += a_[kk] * at_risk_m * (Y - at_risk_m);
    }
    if (!(den > 0.0)) return std::nullopt;
    return num * num / den;
}

LogrankSweep::LogrankSweep(const LogrankScorer& scorer) : s_(&scorer) {
    yl_.assign(s_->table().size(), 0.0);
}

void LogrankSweep::reset() {
    std::fill(yl_.begin(), yl_.end(), 0.0);
    num_ = den_ = 0.0;
    left_n_ = left_events_ = 0;
}

void LogrankSweep::add_left(std::size_t row) {
    const std::uint32_t ki = s_->at_risk_count(row);
    const std::int32_t di = s_->death_index(row);
    if (di >= 0) {
        num_ += s_->w_num()[static_cast<std::size_t>(di)];
        ++left_events_;
    }
    num_ -= s_->prefix_wd_over_y()[ki];
    const auto& a = s_->a_coef();
    const auto& Y = s_->table().at_risk;
    for (std::uint32_t k = 0; k < ki; ++k) {
        den_ += a[k] * (Y[k] - 2.0 * yl_[k] - 1.0);
        yl_[k] += 1.0;
    }
    ++left_n_;
}

std::optional<double> LogrankSweep::statistic() const {
    if (!(den_ > 1e-12)) return std::nullopt;
    return num_ * num_ / den_;
}

double logrank_statistic(std::span<const double> membership,
                         std::span<const double> times,
                         std::span<const std::uint8_t> statuses,
                         std::span<const double> weights) {
    LogrankScorer scorer(times, statuses);
    if (!weights.empty()) scorer.set_weights(weights);
    const auto q = scorer.score(membership);
    if (!q)
        throw NumericError(
            "zero-variance membership: one side empty at every event time");
    return *q;
}

StepFunction kaplan_meier(std::span<const double> times,
                          std::span<const std::uint8_t> statuses) {
    if (times.empty()) throw DataError("empty data for Kaplan-Meier");
    StepFunction s;
    s.initial = 1.0;
    bool any_event = false;
    for (const auto st : statuses) any_event = any_event || st;
    if (!any_event) return s;  // identically 1

    const RiskTable t = build_risk_table(times, statuses);
    double surv = 1.0;
    for (std::size_t k = 0; k < t.size(); ++k) {
        surv *= 1.0 - t.deaths[k] / t.at_risk[k];
        s.times.push_back(t.event_times[k]);
        s.values.push_back(surv);
    }
    return s;
}

double km_median(const StepFunction& survival) {
    for (std::size_t k = 0; k < survival.values.size(); ++k)
        if (survival.values[k] <= 0.5) return survival.times[k];
    return std::numeric_limits<double>::infinity();
}

namespace {

struct CoxEval {
    double loglik;
    Eigen::VectorXd grad;
    Eigen::MatrixXd info;  // observed information (negative Hessian)
};

// One descending-time pass computing log-likelihood, gradient and
// information with Breslow tie handling.
CoxEval cox_eval(const Eigen::MatrixXd& X, std::span<const double> times,
                 std::span<const std::uint8_t> statuses,
                 const std::vector<std::uint32_t>& by_time_desc,
                 const Eigen::VectorXd& beta) {
    const auto p = X.cols();
    const std::size_t n = times.size();
    const Eigen::VectorXd eta = X * beta;
    CoxEval ev{0.0, Eigen::VectorXd::Zero(p), Eigen::MatrixXd::Zero(p, p)};
    double S0 = 0.0;
    Eigen::VectorXd S1 = Eigen::VectorXd::Zero(p);
    Eigen::MatrixXd S2 = Eigen::MatrixXd::Zero(p, p);
    std::size_t i = 0;
    while (i < n) {
        const double tt = times[by_time_desc[i]];
        double d = 0.0, sum_eta = 0.0;
        Eigen::VectorXd sum_x = Eigen::VectorXd::Zero(p);
        while (i < n && times[by_time_desc[i]] == tt) {
            const auto r = by_time_desc[i];
            const double e = std::exp(eta[r]);
            S0 += e;
            S1.noalias() += e * X.row(r).transpose();
            S2.noalias() += e * X.row(r).transpose() * X.row(r);
            if (statuses[r]) {
                d += 1.0;
                sum_eta += eta[r];
                sum_x += X.row(r).transpose();
            }
            ++i;
        }
        if (d > 0.0) {
            ev.loglik += sum_eta - d * std::log(S0);
            const Eigen::VectorXd mean = S1 / S0;
            ev.grad.noalias() += sum_x - d * mean;
            ev.info.noalias() += d * (S2 / S0 - mean * mean.transpose());
        }
    }
    return ev;
}

}  // namespace

CoxFit cox_fit(const Eigen::MatrixXd& X, std::span<const double> times,
               std::span<const std::uint8_t> statuses) {
    const std::size_t n = times.size();
    if (static_cast<std::size_t>(X.rows()) != n)
        throw ConfigError("design matrix row count must match data");
    bool any_event = false;
    for (const auto s : statuses) any_event = any_event || s;
    if (!any_event) throw DataError("no events for Cox fit");

    std::vector<std::uint32_t> desc(n);
    std::iota(desc.begin(), desc.end(), 0u);
    std::sort(desc.begin(), desc.end(), [&](std::uint32_t a, std::uint32_t b) {
        if (times[a] != times[b]) return times[a] > times[b];
        return a < b;
    });

    constexpr double kCap = 15.0;
    const auto p = X.cols();
    CoxFit fit;
    fit.beta = Eigen::VectorXd::Zero(p);
    CoxEval ev = cox_eval(X, times, statuses, desc, fit.beta);

    for (int iter = 0; iter < 50 && p > 0; ++iter) {
        if (ev.grad.lpNorm<Eigen::Infinity>() < 1e-6) break;
        fit.iterations = iter + 1;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(ev.info);
        Eigen::VectorXd step = ldlt.solve(ev.grad);
        if (ldlt.info() != Eigen::Success || !step.allFinite()) {
            ldlt.compute(ev.info +
                         1e-8 * Eigen::MatrixXd::Identity(p, p));
            step = ldlt.solve(ev.grad);
            if (!step.allFinite()) break;
        }
        double scale = 1.0;
        CoxEval next_ev = ev;
        Eigen::VectorXd next_beta = fit.beta;
        bool accepted = false;
        for (int h = 0; h < 40; ++h) {
            next_beta = fit.beta + scale * step;
            next_ev = cox_eval(X, times, statuses, desc, next_beta);
            if (std::isfinite(next_ev.loglik) &&
                next_ev.loglik >= ev.loglik - 1e-12) {
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if (!accepted) break;
        const double rel = std::abs(next_ev.loglik - ev.loglik) /
                           (std::abs(ev.loglik) + 1.0);
        fit.beta = next_beta;
        ev = next_ev;
        if (fit.beta.lpNorm<Eigen::Infinity>() > kCap) {
            for (Eigen::Index j = 0; j < p; ++j)
                fit.beta[j] = std::clamp(fit.beta[j], -kCap, kCap);
            fit.diverged = true;
            ev = cox_eval(X, times, statuses, desc, fit.beta);
            break;
        }
        if (rel < 1e-9) break;
    }

    fit.loglik = ev.loglik;
    fit.converged =
        !fit.diverged && (p == 0 || ev.grad.lpNorm<Eigen::Infinity>() <= 1e-6);
    if (p > 0) {
        Eigen::FullPivLU<Eigen::MatrixXd> lu(ev.info);
        if (lu.isInvertible())
            fit.covariance = lu.inverse();
        else
            fit.covariance = Eigen::MatrixXd::Constant(
                p, p, std::numeric_limits<double>::quiet_NaN());
    } else {
        fit.covariance.resize(0, 0);
    }
    return fit;
}

StepFunction breslow_cumhaz(std::span<const double> eta,
                            std::span<const double> times,
                            std::span<const std::uint8_t> statuses) {
    const std::size_t n = times.size();
    std::vector<std::uint32_t> desc(n);
    std::iota(desc.begin(), desc.end(), 0u);
    std::sort(desc.begin(), desc.end(), [&](std::uint32_t a, std::uint32_t b) {
        if (times[a] != times[b]) return times[a] > times[b];
        return a < b;
    });

    std::vector<double> jump_times, increments;
    double S0 = 0.0;
    std::size_t i = 0;
    while (i < n) {
        const double tt = times[desc[i]];
        double d = 0.0;
        while (i < n && times[desc[i]] == tt) {
            S0 += std::exp(eta[desc[i]]);
            d += statuses[desc[i]];
            ++i;
        }
        if (d > 0.0) {
            jump_times.push_back(tt);
            increments.push_back(d / S0);
        }
    }
    std::reverse(jump_times.begin(), jump_times.end());
    std::reverse(increments.begin(), increments.end());

    StepFunction h;
    h.initial = 0.0;
    h.times = std::move(jump_times);
    h.values.resize(increments.size());
    double cum = 0.0;
    for (std::size_t k = 0; k < increments.size(); ++k) {
        cum += increments[k];
        h.values[k] = cum;
    }
    return h;
}

double deviance(const StepFunction& cumhaz, std::span<const double> eta,
                std::span<const double> times,
                std::span<const std::uint8_t> statuses, std::size_t n_train) {
    if (n_train == 0) throw ConfigError("deviance needs n_train >= 1");
    const double floor = 0.5 / static_cast<double>(n_train);
    double dev = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        const double L = cumhaz.at(times[i]);
        dev += L * std::exp(eta[i]);
        if (statuses[i])
            dev -= 1.0 + eta[i] + std::log(std::max(L, floor));
    }
    return 2.0 * dev;
}

double concordance(std::span<const double> risk_scores,
                   std::span<const double> times,
                   std::span<const std::uint8_t> statuses) {
    const std::size_t n = times.size();
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!statuses[i]) continue;
        for (std::size_t j = 0; j < n; ++j) {
            if (times[i] >= times[j]) continue;  // needs T_i < T_j, event at i
            den += 1.0;
            if (risk_scores[i] > risk_scores[j])
                num += 1.0;
            else if (risk_scores[i] == risk_scores[j])
                num += 0.5;
        }
    }
    if (den == 0.0) return std::numeric_limits<double>::quiet_NaN();
    return num / den;
}

}  // namespace survtreeful
