#include "survtreeful/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <functional>
#include <limits>
#include <numeric>
#include <utility>

#include "survtreeful/errors.hpp"

namespace survtreeful {

namespace {

constexpr double kTieTol = 1e-8;       // pre-fusion threshold on MPLE gaps
constexpr double kZeroTol = 1e-8;      // gamma entries below this count as fused
constexpr double kKktTol = 1e-6;
constexpr double kBetaCap = 15.0;      // matches the Cox fitter's clamp
constexpr double kEtaClamp = 30.0;     // exp() guard in the lasso inner loop

// Cox partial-likelihood quantities as functions of the linear predictor.
// Precomputes the time ordering once; eval() is O(n + #event times).
class EtaWorkspace {
  public:
    EtaWorkspace(std::span<const double> times,
                 std::span<const std::uint8_t> statuses)
        : times_(times), statuses_(statuses) {
        const std::size_t n = times.size();
        desc_.resize(n);
        std::iota(desc_.begin(), desc_.end(), std::size_t{0});
        std::sort(desc_.begin(), desc_.end(), [&](std::size_t a, std::size_t b) {
            if (times[a] != times[b]) return times[a] > times[b];
            return a < b;
        });
        for (std::size_t i = 0; i < n; ++i)
            if (statuses[i]) event_times_.push_back(times[i]);
        if (event_times_.empty()) throw DataError("no events in node");
        std::sort(event_times_.begin(), event_times_.end());
        std::size_t w = 0;
        deaths_.reserve(event_times_.size());
        for (std::size_t r = 0; r < event_times_.size(); ++r) {
            if (w > 0 && event_times_[r] == event_times_[w - 1]) {
                deaths_.back() += 1.0;
            } else {
                event_times_[w++] = event_times_[r];
                deaths_.push_back(1.0);
            }
        }
        event_times_.resize(w);
        last_event_.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            auto it = std::upper_bound(event_times_.begin(), event_times_.end(),
                                       times[i]);
            last_event_[i] = static_cast<std::ptrdiff_t>(it - event_times_.begin()) - 1;
        }
        s0_.resize(w);
        cum1_.resize(w);
    }

    std::size_t n_rows() const { return times_.size(); }

    // Log partial likelihood and (optionally) the per-row gradient of l(eta).
    double eval(std::span<const double> eta, std::vector<double>* g) {
        const std::size_t n = times_.size();
        const std::size_t e_count = event_times_.size();
        double acc = 0.0;
        std::size_t p = 0;
        for (std::size_t rev = 0; rev < e_count; ++rev) {
            const std::size_t e = e_count - 1 - rev;
            const double te = event_times_[e];
            while (p < n && times_[desc_[p]] >= te) {
                acc += clamped_exp(eta[desc_[p]]);
                ++p;
            }
            s0_[e] = acc;
        }
        double ll = 0.0;
        double c1 = 0.0;
        for (std::size_t e = 0; e < e_count; ++e) {
            c1 += deaths_[e] / s0_[e];
            cum1_[e] = c1;
            ll -= deaths_[e] * std::log(s0_[e]);
        }
        if (g) g->resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            if (statuses_[i]) ll += eta[i];
            if (!g) continue;
            const std::ptrdiff_t le = last_event_[i];
            const double a1 = le >= 0 ? cum1_[static_cast<std::size_t>(le)] : 0.0;
            (*g)[i] = (statuses_[i] ? 1.0 : 0.0) - clamped_exp(eta[i]) * a1;
        }
        return ll;
    }

    // Exact projected curvature A = X^T (-d^2 l/d eta^2) X, built from the
    // state of the most recent eval() with the same eta. The off-diagonal
    // Hessian decomposes over event times into rank-one risk-set terms.
    void curvature(std::span<const double> eta, const Eigen::MatrixXd& x,
                   Eigen::MatrixXd& a) const {
        const std::size_t n = times_.size();
        const std::size_t e_count = event_times_.size();
        const auto p = x.cols();
        a.setZero(p, p);
        Eigen::VectorXd u = Eigen::VectorXd::Zero(p);
        std::size_t q = 0;
        for (std::size_t rev = 0; rev < e_count; ++rev) {
            const std::size_t e = e_count - 1 - rev;
            const double te = event_times_[e];
            while (q < n && times_[desc_[q]] >= te) {
                const std::size_t i = desc_[q];
                u += clamped_exp(eta[i]) * x.row(i).transpose();
                ++q;
            }
            a.selfadjointView<Eigen::Lower>().rankUpdate(
                u, -deaths_[e] / (s0_[e] * s0_[e]));
        }
        for (std::size_t i = 0; i < n; ++i) {
            const std::ptrdiff_t le = last_event_[i];
            if (le < 0) continue;
            const double d =
                clamped_exp(eta[i]) * cum1_[static_cast<std::size_t>(le)];
            a.selfadjointView<Eigen::Lower>().rankUpdate(x.row(i).transpose(), d);
        }
        a.triangularView<Eigen::StrictlyUpper>() =
            a.triangularView<Eigen::StrictlyLower>().transpose();
    }

  private:
    static double clamped_exp(double x) {
        return std::exp(std::clamp(x, -kEtaClamp, kEtaClamp));
    }

    std::span<const double> times_;
    std::span<const std::uint8_t> statuses_;
    std::vector<std::size_t> desc_;
    std::vector<double> event_times_;
    std::vector<double> deaths_;
    std::vector<std::ptrdiff_t> last_event_;
    std::vector<double> s0_, cum1_;
};

double soft_threshold(double c, double lambda) {
    if (c > lambda) return c - lambda;
    if (c < -lambda) return c + lambda;
    return 0.0;
}

// One penalized solve at fixed lambda, warm-started from (gamma, eta).
// Proximal Newton: inner cyclic coordinate descent on the exact projected
// quadratic, then step-halving on the true objective. Returns true when the
// KKT conditions hold at the solution.
bool solve_at_lambda(EtaWorkspace& ws, const Eigen::MatrixXd& x, double lambda,
                     Eigen::VectorXd& gamma, std::vector<double>& eta) {
    const std::size_t n = ws.n_rows();
    const auto p = x.cols();
    const double inv = 2.0 / static_cast<double>(n);
    std::vector<double> g, eta_try(n);
    Eigen::MatrixXd quad(p, p);
    Eigen::VectorXd score(p), drift(p), base(p), step(p), delta(n);
    for (int outer = 0; outer < 200; ++outer) {
        const double ll = ws.eval(eta, &g);
        double obj = -inv * ll + lambda * gamma.cwiseAbs().sum();
        ws.curvature(eta, x, quad);
        for (Eigen::Index j = 0; j < p; ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                s += x(static_cast<Eigen::Index>(i), j) * g[i];
            score[j] = inv * s;
        }
        quad *= inv;
        base = gamma;
        drift.setZero();  // quad * (gamma - base), kept incrementally
        double gmax = gamma.cwiseAbs().maxCoeff();
        for (int sweep = 0; sweep < 2000; ++sweep) {
            double moved = 0.0;
            for (Eigen::Index j = 0; j < p; ++j) {
                const double a = quad(j, j);
                if (a < 1e-300) continue;
                const double c = a * gamma[j] + score[j] - drift[j];
                const double next =
                    std::clamp(soft_threshold(c, lambda) / a, -1e8, 1e8);
                const double d = next - gamma[j];
                if (d == 0.0) continue;
                drift += quad.col(j) * d;
                gamma[j] = next;
                moved = std::max(moved, std::abs(d));
                gmax = std::max(gmax, std::abs(next));
            }
            if (moved < 1e-13 * (1.0 + gmax)) break;
        }
        step = gamma - base;
        delta = x * step;
        double t = 1.0;
        bool accepted = false;
        for (int half = 0; half < 20; ++half) {
            for (std::size_t i = 0; i < n; ++i)
                eta_try[i] = eta[i] + t * delta[static_cast<Eigen::Index>(i)];
            const Eigen::VectorXd cand = base + t * step;
            const double cand_obj = -inv * ws.eval(eta_try, nullptr) +
                                    lambda * cand.cwiseAbs().sum();
            if (cand_obj <= obj + 1e-12) {
                gamma = cand;
                eta = eta_try;
                obj = cand_obj;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) {
            gamma = base;
            break;
        }
        if (t * step.cwiseAbs().maxCoeff() <
            1e-11 * (1.0 + gamma.cwiseAbs().maxCoeff()))
            break;
    }
    ws.eval(eta, &g);
    for (Eigen::Index j = 0; j < p; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            s += x(static_cast<Eigen::Index>(i), j) * g[i];
        const double grad = inv * s;
        if (gamma[j] != 0.0) {
            if (std::abs(grad - lambda * (gamma[j] > 0 ? 1.0 : -1.0)) > kKktTol)
                return false;
        } else if (std::abs(grad) > lambda + kKktTol) {
            return false;
        }
    }
    return true;
}

double km_median_of(const SurvivalDataset& data,
                    const std::vector<std::uint32_t>& rows) {
    SampleIndex idx{rows};
    auto t = gather(data.time, idx);
    auto s = gather(data.status, idx);
    bool any_event = std::any_of(s.begin(), s.end(), [](auto v) { return v != 0; });
    if (!any_event) return std::numeric_limits<double>::infinity();
    return km_median(kaplan_meier(t, s));
}

// Distance between KM medians where two infinite medians count as equal.
double median_gap(double a, double b) {
    const bool ia = std::isinf(a), ib = std::isinf(b);
    if (ia && ib) return 0.0;
    if (ia || ib) return std::numeric_limits<double>::infinity();
    return std::abs(a - b);
}

}  // namespace

LeafOrdering sort_leaves(const Tree& tree, const SurvivalDataset& data,
                         LeafSort sort) {
    const auto leaves = tree.leaf_ids();
    const std::size_t K = leaves.size();
    LeafOrdering out;
    if (K == 1) {
        out.sorted_leaves = {leaves[0]};
        out.leaf_beta = {0.0};
        out.cluster_of = {0};
        out.cluster_beta = {0.0};
        return out;
    }

    // Proto-clusters absorb leaves whose coefficients diverge; each proto is
    // the set of member leaf positions, represented by its smallest leaf id.
    std::vector<std::vector<std::size_t>> protos(K);
    for (std::size_t k = 0; k < K; ++k) protos[k] = {k};

    std::vector<std::uint32_t> all_rows;
    std::vector<std::pair<std::size_t, std::size_t>> seg(K);
    for (std::size_t k = 0; k < K; ++k) {
        const auto& rows = tree.nodes.at(leaves[k]).rows.rows;
        seg[k] = {all_rows.size(), rows.size()};
        all_rows.insert(all_rows.end(), rows.begin(), rows.end());
    }
    const SampleIndex all_idx{all_rows};
    const auto t = gather(data.time, all_idx);
    const auto s = gather(data.status, all_idx);
    const std::size_t n = all_rows.size();

    auto proto_rows = [&](const std::vector<std::size_t>& members) {
        std::vector<std::uint32_t> rows;
        for (auto k : members) {
            const auto& r = tree.nodes.at(leaves[k]).rows.rows;
            rows.insert(rows.end(), r.begin(), r.end());
        }
        return rows;
    };

    std::vector<double> phi;
    while (true) {
        const std::size_t P = protos.size();
        Eigen::MatrixXd x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                                  static_cast<Eigen::Index>(P - 1));
        for (std::size_t c = 0; c + 1 < P; ++c)
            for (auto k : protos[c])
                for (std::size_t i = 0; i < seg[k].second; ++i)
                    x(static_cast<Eigen::Index>(seg[k].first + i),
                      static_cast<Eigen::Index>(c)) = 1.0;
        const CoxFit fit = cox_fit(x, t, s);
        phi.assign(P, 0.0);
        for (std::size_t c = 0; c + 1 < P; ++c)
            phi[c] = fit.beta[static_cast<Eigen::Index>(c)];
        if (!fit.diverged || P == 2) break;

        // A clamped coefficient marks a degenerate proto (typically no
        // events): pre-fuse it with its neighbor in KM-median order.
        std::size_t bad = P;
        for (std::size_t c = 0; c + 1 < P; ++c)
            if (std::abs(phi[c]) >= kBetaCap - 1e-9) {
                bad = c;
                break;
            }
        if (bad == P) break;
        std::vector<double> med(P);
        for (std::size_t c = 0; c < P; ++c) med[c] = km_median_of(data, proto_rows(protos[c]));
        std::vector<std::size_t> order(P);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (med[a] != med[b]) return med[a] > med[b];  // low hazard first
            return protos[a][0] < protos[b][0];
        });
        const auto pos = static_cast<std::size_t>(
            std::find(order.begin(), order.end(), bad) - order.begin());
        std::size_t partner;
        if (pos == 0) {
            partner = order[1];
        } else if (pos + 1 == P) {
            partner = order[pos - 1];
        } else {
            const double lo = median_gap(med[bad], med[order[pos - 1]]);
            const double hi = median_gap(med[bad], med[order[pos + 1]]);
            partner = lo <= hi ? order[pos - 1] : order[pos + 1];
        }
        auto& keep = protos[std::min(bad, partner)];
        auto& drop = protos[std::max(bad, partner)];
        keep.insert(keep.end(), drop.begin(), drop.end());
        std::sort(keep.begin(), keep.end());
        protos.erase(protos.begin() + static_cast<std::ptrdiff_t>(std::max(bad, partner)));
    }

    const std::size_t P = protos.size();
    std::vector<double> med;
    if (sort == LeafSort::km_median) {
        med.resize(P);
        for (std::size_t c = 0; c < P; ++c) med[c] = km_median_of(data, proto_rows(protos[c]));
    }
    std::vector<std::size_t> order(P);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (sort == LeafSort::km_median && med[a] != med[b]) return med[a] > med[b];
        if (phi[a] != phi[b]) return phi[a] < phi[b];
        return protos[a][0] < protos[b][0];
    });

    const double base = phi[order[0]];
    std::size_t cluster = 0;
    double prev = 0.0;
    for (std::size_t oc = 0; oc < P; ++oc) {
        const double b = phi[order[oc]] - base;
        if (oc == 0) {
            out.cluster_beta.push_back(0.0);
        } else if (std::abs(b - prev) >= kTieTol) {
            out.cluster_beta.push_back(b);
            ++cluster;
        }
        prev = b;
        for (auto k : protos[order[oc]]) {
            out.sorted_leaves.push_back(leaves[k]);
            out.leaf_beta.push_back(b);
            out.cluster_of.push_back(cluster);
        }
    }
    return out;
}

FusionTransform build_transform(const LeafOrdering& ordering) {
    FusionTransform tr;
    const std::size_t C = ordering.n_clusters();
    const std::size_t P = C > 0 ? C - 1 : 0;
    tr.B = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(P),
                                 static_cast<Eigen::Index>(P));
    tr.Binv = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(P),
                                    static_cast<Eigen::Index>(P));
    tr.w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(P));
    for (std::size_t j = 0; j < P; ++j) {
        tr.B(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) = 1.0;
        if (j > 0)
            tr.B(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j - 1)) = -1.0;
        for (std::size_t i = j; i < P; ++i)
            tr.Binv(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = 1.0;
        tr.w[static_cast<Eigen::Index>(j)] =
            1.0 / std::abs(ordering.cluster_beta[j + 1] - ordering.cluster_beta[j]);
    }
    return tr;
}

CoxLassoPath cox_lasso_path(const Eigen::MatrixXd& design,
                            std::span<const double> times,
                            std::span<const std::uint8_t> statuses,
                            const std::vector<double>& grid,
                            std::size_t grid_points, double min_ratio) {
    CoxLassoPath path;
    const std::size_t n = times.size();
    const auto p = static_cast<std::size_t>(design.cols());
    EtaWorkspace ws(times, statuses);
    const double inv = 2.0 / static_cast<double>(n);

    std::vector<double> eta(n, 0.0), g;
    ws.eval(eta, &g);
    double lmax = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            s += design(static_cast<Eigen::Index>(i),
                        static_cast<Eigen::Index>(j)) *
                 g[i];
        lmax = std::max(lmax, std::abs(inv * s));
    }
    if (lmax <= 0.0) lmax = 1e-8;
    path.lambda_max = lmax;

    std::vector<double> lambdas = grid;
    if (lambdas.empty()) {
        for (std::size_t k = 0; k < grid_points; ++k)
            lambdas.push_back(
                lmax * std::pow(min_ratio, static_cast<double>(k) /
                                               static_cast<double>(grid_points - 1)));
        lambdas.push_back(0.0);
    }
    std::sort(lambdas.begin(), lambdas.end(), std::greater<>());
    path.grid = lambdas;

    Eigen::VectorXd gamma = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
    Eigen::VectorXd kept_gamma = gamma;
    std::vector<double> kept_eta = eta;
    for (double lambda : lambdas) {
        if (solve_at_lambda(ws, design, lambda, gamma, eta)) {
            path.lambdas.push_back(lambda);
            path.gammas.push_back(gamma);
            kept_gamma = gamma;
            kept_eta = eta;
        } else {
            char buf[96];
            std::snprintf(buf, sizeof buf,
                          "lasso path: dropped non-convergent point lambda=%.6g",
                          lambda);
            path.warnings.emplace_back(buf);
            gamma = kept_gamma;
            eta = kept_eta;
        }
    }
    return path;
}

namespace {

FusionPath fusion_path_impl(const Tree& tree, const SurvivalDataset& data,
                            const std::vector<double>* lambda_grid,
                            const FusionConfig& config) {
    FusionPath out;
    out.ordering = sort_leaves(tree, data, config.sort);
    out.transform = build_transform(out.ordering);
    const auto& ord = out.ordering;
    const std::size_t C = ord.n_clusters();

    std::vector<std::uint32_t> all_rows;
    std::vector<std::size_t> row_cluster;
    for (std::size_t pos = 0; pos < ord.n_leaves(); ++pos) {
        const auto& rows = tree.nodes.at(ord.sorted_leaves[pos]).rows.rows;
        all_rows.insert(all_rows.end(), rows.begin(), rows.end());
        row_cluster.insert(row_cluster.end(), rows.size(), ord.cluster_of[pos]);
    }
    const SampleIndex idx{all_rows};
    const auto t = gather(data.time, idx);
    const auto s = gather(data.status, idx);
    const std::size_t n = all_rows.size();

    auto finish_pattern = [&](double lambda, const Eigen::VectorXd& gamma) {
        FusionPattern pat;
        pat.lambda = lambda;
        pat.gamma = gamma;
        const std::size_t P = C - 1;
        pat.beta_tilde = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(P));
        double acc = 0.0;
        for (std::size_t j = 0; j < P; ++j) {
            acc += gamma[static_cast<Eigen::Index>(j)] /
                   out.transform.w[static_cast<Eigen::Index>(j)];
            pat.beta_tilde[static_cast<Eigen::Index>(j)] = acc;
        }
        // Chain groups: cluster c starts a new group when its gamma entry
        // is nonzero.
        std::vector<std::size_t> chain_group(C, 0);
        for (std::size_t c = 1; c < C; ++c)
            chain_group[c] = chain_group[c - 1] +
                             (std::abs(gamma[static_cast<Eigen::Index>(c - 1)]) >= kZeroTol
                                  ? 1
                                  : 0);
        const std::size_t G = chain_group.back() + 1;

        std::vector<double> phi(G, 0.0);
        if (G > 1) {
            Eigen::MatrixXd x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                                      static_cast<Eigen::Index>(G - 1));
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t gidx = chain_group[row_cluster[i]];
                if (gidx > 0)
                    x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(gidx - 1)) =
                        1.0;
            }
            const CoxFit fit = cox_fit(x, t, s);
            pat.relaxed_converged = fit.converged && !fit.diverged;
            for (std::size_t gidx = 1; gidx < G; ++gidx)
                phi[gidx] = fit.beta[static_cast<Eigen::Index>(gidx - 1)];
        }

        // Final ids ascend by relaxed log-hazard; group 1 is lowest.
        std::vector<std::size_t> order(G);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (phi[a] != phi[b]) return phi[a] < phi[b];
            return a < b;
        });
        std::vector<std::int32_t> final_of(G);
        for (std::size_t r = 0; r < G; ++r)
            final_of[order[r]] = static_cast<std::int32_t>(r + 1);
        const double lowest = phi[order[0]];
        pat.relaxed_beta.resize(G);
        for (std::size_t gidx = 0; gidx < G; ++gidx)
            pat.relaxed_beta[static_cast<std::size_t>(final_of[gidx] - 1)] =
                phi[gidx] - lowest;

        pat.grouping.group_count = static_cast<std::int32_t>(G);
        for (std::size_t pos = 0; pos < ord.n_leaves(); ++pos)
            pat.grouping.leaf_group[ord.sorted_leaves[pos]] =
                final_of[chain_group[ord.cluster_of[pos]]];

        std::vector<double> eta(n);
        for (std::size_t i = 0; i < n; ++i)
            eta[i] = pat.relaxed_beta[static_cast<std::size_t>(
                         final_of[chain_group[row_cluster[i]]] - 1)];
        pat.baseline = breslow_cumhaz(eta, t, s);
        out.patterns.push_back(std::move(pat));
    };

    if (C == 1) {
        out.lambda_grid = {0.0};
        finish_pattern(0.0, Eigen::VectorXd::Zero(0));
        return out;
    }

    const std::size_t P = C - 1;
    Eigen::MatrixXd design = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                                   static_cast<Eigen::Index>(P));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j + 1 <= row_cluster[i]; ++j)
            design(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                1.0 / out.transform.w[static_cast<Eigen::Index>(j)];

    CoxLassoPath lasso =
        lambda_grid ? cox_lasso_path(design, t, s, *lambda_grid)
                    : cox_lasso_path(design, t, s, {}, config.grid_points,
                                     config.lambda_min_ratio);
    out.lambda_grid = lasso.grid;
    out.warnings = lasso.warnings;

    // Deduplicate fusion patterns, keeping the smallest lambda per pattern.
    std::map<std::vector<std::uint8_t>, std::size_t> best;
    for (std::size_t m = 0; m < lasso.lambdas.size(); ++m) {
        std::vector<std::uint8_t> sig(P);
        for (std::size_t j = 0; j < P; ++j)
            sig[j] = std::abs(lasso.gammas[m][static_cast<Eigen::Index>(j)]) >= kZeroTol
                         ? 1
                         : 0;
        auto [it, inserted] = best.try_emplace(std::move(sig), m);
        if (!inserted && lasso.lambdas[m] < lasso.lambdas[it->second])
            it->second = m;
    }
    std::vector<std::size_t> kept;
    for (const auto& [sig, m] : best) kept.push_back(m);
    std::sort(kept.begin(), kept.end(), [&](std::size_t a, std::size_t b) {
        return lasso.lambdas[a] < lasso.lambdas[b];
    });
    for (auto m : kept) finish_pattern(lasso.lambdas[m], lasso.gammas[m]);
    return out;
}

// Group shared by every descendant leaf, or -1 when they differ.
std::int32_t uniform_group(const Tree& tree, const Grouping& grouping,
                           std::uint32_t id) {
    const TreeNode& node = tree.nodes.at(id);
    if (node.is_leaf()) {
        auto it = grouping.leaf_group.find(id);
        if (it == grouping.leaf_group.end())
            throw DataError("grouping does not cover leaf " + std::to_string(id));
        return it->second;
    }
    const std::int32_t left = uniform_group(tree, grouping, id * 2);
    const std::int32_t right = uniform_group(tree, grouping, id * 2 + 1);
    return left == right ? left : -1;
}

void copy_sheared(const Tree& src, const Grouping& grouping, std::uint32_t id,
                  Tree& dst) {
    const TreeNode& node = src.nodes.at(id);
    const std::int32_t shared = uniform_group(src, grouping, id);
    TreeNode copy = node;
    if (shared >= 0) {
        copy.split.reset();
        copy.statistic = 0.0;
        copy.group = shared;
        dst.nodes.emplace(id, std::move(copy));
        return;
    }
    dst.nodes.emplace(id, std::move(copy));
    copy_sheared(src, grouping, id * 2, dst);
    copy_sheared(src, grouping, id * 2 + 1, dst);
}

}  // namespace

FusionPath fusion_path(const Tree& tree, const SurvivalDataset& data,
                       const FusionConfig& config) {
    return fusion_path_impl(tree, data, nullptr, config);
}

FusionPath fusion_path(const Tree& tree, const SurvivalDataset& data,
                       const std::vector<double>& lambda_grid,
                       const FusionConfig& config) {
    return fusion_path_impl(tree, data, &lambda_grid, config);
}

Tree shear(const Tree& tree, const Grouping& grouping) {
    Tree out;
    out.config = tree.config;
    copy_sheared(tree, grouping, 1, out);
    return out;
}

}  // namespace survtreeful
