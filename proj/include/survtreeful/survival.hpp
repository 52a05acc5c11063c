#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "survtreeful/errors.hpp"

namespace survtreeful {

/// Distinct death times with at-risk and death counts.
struct RiskTable {
    std::vector<double> event_times;  // strictly increasing
    std::vector<double> at_risk;      // Y_k = #{T_i >= t_k}
    std::vector<double> deaths;       // d_k = #{events at t_k}

    std::size_t size() const { return event_times.size(); }
};

/// Throws DataError when no record has status 1.
RiskTable build_risk_table(std::span<const double> times,
                           std::span<const std::uint8_t> statuses);

/// Right-continuous step function: value is `initial` before the first jump,
/// `values[k]` on [times[k], times[k+1]), and stays at the last value forever.
struct StepFunction {
    double initial = 0.0;
    std::vector<double> times;   // ascending jump locations
    std::vector<double> values;  // value from times[k] onward

    double at(double t) const;
};

/// Weighted-membership logrank machinery for one node. Construction is
/// O(n log n); one-shot scoring is O(n + D). Membership m_i in [0,1] is the
/// left-group weight; hard splits use m_i in {0,1}.
///
/// Q = {sum_k w_k (d_kL - Y_kL d_k / Y_k)}^2
///     / sum_k w_k^2 d_k (Y_k - d_k) Y_kL (Y_k - Y_kL) / (Y_k^2 (Y_k - 1))
///
/// Event times with Y_k <= 1 contribute nothing (variance undefined).
class LogrankScorer {
  public:
    LogrankScorer(std::span<const double> times,
                  std::span<const std::uint8_t> statuses);

    /// Per-event-time weights w_k; length must equal table().size(), all
    /// nonnegative, not all zero. Default is all ones.
    void set_weights(std::span<const double> weights);

    /// Q for the given membership; nullopt when the variance sum is zero
    /// (degenerate split). Length must equal n_rows().
    std::optional<double> score(std::span<const double> membership) const;

    std::size_t n_rows() const { return at_risk_count_.size(); }
    const RiskTable& table() const { return table_; }

    // Internals shared with the incremental sweep and subset enumeration.
    // a_coef[k] = w_k^2 d_k (Y_k - d_k) / (Y_k^2 (Y_k - 1)), 0 at skip times.
    // w_num[k] = w_k (0 at skip times); wd_over_y[k] = w_k d_k / Y_k.
    // prefix_wd_over_y has length D+1 with partial sums of wd_over_y.
    const std::vector<double>& a_coef() const { return a_; }
    const std::vector<double>& w_num() const { return w_num_; }
    const std::vector<double>& prefix_wd_over_y() const { return prefix_wdy_; }
    /// Number of event times t_k <= T_row (row is at risk for k < this).
    std::uint32_t at_risk_count(std::size_t row) const {
        return at_risk_count_[row];
    }
    /// Event-time index of the row's death, or -1 when censored.
    std::int32_t death_index(std::size_t row) const {
        return death_index_[row];
    }

  private:
    RiskTable table_;
    std::vector<double> a_;           // per event time
    std::vector<double> w_num_;       // per event time
    std::vector<double> wd_over_y_;   // per event time
    std::vector<double> prefix_wdy_;  // length D+1
    std::vector<std::uint32_t> at_risk_count_;  // per row
    std::vector<std::int32_t> death_index_;     // per row
    std::vector<std::uint32_t> rows_by_time_desc_;
    std::vector<std::uint32_t> death_rows_;     // grouped by event time
    std::vector<std::uint32_t> death_offsets_;  // length D+1
    std::vector<double> times_;
};

/// Incremental hard-membership sweep: rows join the left group one at a time
/// and the statistic updates in O(#event times at or before the row's time).
class LogrankSweep {
  public:
    explicit LogrankSweep(const LogrankScorer& scorer);

    void reset();
    void add_left(std::size_t row);
    std::optional<double> statistic() const;
    std::size_t left_size() const { return left_n_; }
    std::size_t left_events() const { return left_events_; }

  private:
    const LogrankScorer* s_;
    std::vector<double> yl_;
    double num_ = 0.0, den_ = 0.0;
    std::size_t left_n_ = 0, left_events_ = 0;
};

/// Eq.-1 logrank statistic. weights are per event time (empty = all ones).
/// Throws NumericError on a zero-variance (degenerate) membership.
double logrank_statistic(std::span<const double> membership,
                         std::span<const double> times,
                         std::span<const std::uint8_t> statuses,
                         std::span<const double> weights = {});

/// Kaplan-Meier curve; initial value 1. Throws DataError on empty input.
StepFunction kaplan_meier(std::span<const double> times,
                          std::span<const std::uint8_t> statuses);

/// Smallest time with S(t) <= 0.5, +infinity when the curve stays above.
double km_median(const StepFunction& survival);

struct CoxFit {
    Eigen::VectorXd beta;
    Eigen::MatrixXd covariance;  // inverse observed information
    double loglik = 0.0;
    bool converged = false;
    bool diverged = false;  // some |beta_k| reached the cap (15)
    int iterations = 0;
};

/// Newton-Raphson Cox partial-likelihood maximizer, Breslow tie handling.
/// Stops at relative log-likelihood change < 1e-9 or gradient max-norm
/// < 1e-6, at most 50 iterations, monotone step-halving. The converged flag
/// certifies gradient max-norm <= 1e-6 at the returned beta. X may have zero
/// columns (null model). Throws DataError when no events.
CoxFit cox_fit(const Eigen::MatrixXd& X, std::span<const double> times,
               std::span<const std::uint8_t> statuses);

/// Breslow cumulative baseline hazard for linear predictors eta = X beta.
StepFunction breslow_cumhaz(std::span<const double> eta,
                            std::span<const double> times,
                            std::span<const std::uint8_t> statuses);

/// Validated deviance: 2 sum_i [L0(T_i) e^{eta_i} - d_i(1 + eta_i +
/// log L0(T_i))] with L0 floored at 0.5/n_train inside the log only.
double deviance(const StepFunction& cumhaz, std::span<const double> eta,
                std::span<const double> times,
                std::span<const std::uint8_t> statuses, std::size_t n_train);

/// Harrell concordance over pairs (i,j) with T_i < T_j and an event at T_i;
/// tied risk scores count 0.5. Returns NaN when no pair is comparable.
double concordance(std::span<const double> risk_scores,
                   std::span<const double> times,
                   std::span<const std::uint8_t> statuses);

}  // namespace survtreeful
