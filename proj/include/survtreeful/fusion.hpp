#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "survtreeful/survival.hpp"
#include "survtreeful/tree.hpp"

namespace survtreeful {

/// Leaf chain for fusion: terminals sorted by hazard, lowest first. Leaves
/// whose Cox coefficients tie within 1e-8 (or whose fits diverge) are
/// pre-fused into one cluster so every adaptive weight is finite.
struct LeafOrdering {
    std::vector<std::uint32_t> sorted_leaves;  // ascending hazard, then leaf id
    std::vector<double> leaf_beta;             // per sorted position, [0] = 0
    std::vector<std::size_t> cluster_of;       // sorted position -> cluster
    std::vector<double> cluster_beta;          // per cluster, [0] = 0

    std::size_t n_leaves() const { return sorted_leaves.size(); }
    std::size_t n_clusters() const { return cluster_beta.size(); }
};

enum class LeafSort { mple, km_median };

/// Orders the tree's terminals by fitted log-hazard (default) or by
/// Kaplan-Meier median. Uses the training rows stored in the tree nodes.
LeafOrdering sort_leaves(const Tree& tree, const SurvivalDataset& data,
                         LeafSort sort = LeafSort::mple);

/// First-difference reparameterization over the cluster chain:
/// gamma = W B beta, beta = Binv Winv gamma, X' = X Binv Winv.
struct FusionTransform {
    Eigen::MatrixXd B;     // (C-1)x(C-1) first differences
    Eigen::MatrixXd Binv;  // all-ones lower triangle
    Eigen::VectorXd w;     // adaptive weights 1/|beta_k - beta_{k-1}|

    std::size_t dim() const { return static_cast<std::size_t>(w.size()); }
};

FusionTransform build_transform(const LeafOrdering& ordering);

struct CoxLassoPath {
    std::vector<double> lambdas;          // kept grid points, as processed
    std::vector<Eigen::VectorXd> gammas;  // solution per kept point
    std::vector<double> grid;             // full processed grid, descending
    double lambda_max = 0.0;
    std::vector<std::string> warnings;    // dropped non-convergent points
};

/// L1-penalized Cox partial likelihood, objective -(2/n)L(gamma) +
/// lambda*sum|gamma_j|. Pathwise cyclic coordinate descent inside an outer
/// quadratic approximation, warm starts, KKT subgradient check (1e-6) at
/// every kept point. An empty grid selects grid_points log-spaced points
/// from lambda_max down to min_ratio*lambda_max plus an unpenalized point
/// at 0.
CoxLassoPath cox_lasso_path(const Eigen::MatrixXd& design,
                            std::span<const double> times,
                            std::span<const std::uint8_t> statuses,
                            const std::vector<double>& grid = {},
                            std::size_t grid_points = 100,
                            double min_ratio = 1e-3);

/// Leaf -> fused group id; ids run 1..group_count with group 1 the lowest
/// hazard group.
struct Grouping {
    std::map<std::uint32_t, std::int32_t> leaf_group;
    std::int32_t group_count = 0;
};

struct FusionPattern {
    double lambda = 0.0;
    Eigen::VectorXd gamma;       // transformed solution, size C-1
    Eigen::VectorXd beta_tilde;  // fused estimates per cluster 1..C-1
    Grouping grouping;
    std::vector<double> relaxed_beta;  // per group id, [0] = 0 reference
    StepFunction baseline;             // Breslow cumulative hazard, relaxed fit
    bool relaxed_converged = true;
};

struct FusionPath {
    LeafOrdering ordering;
    FusionTransform transform;
    std::vector<FusionPattern> patterns;  // ascending lambda, deduplicated
    std::vector<double> lambda_grid;      // grid as solved, descending
    std::vector<std::string> warnings;
};

struct FusionConfig {
    LeafSort sort = LeafSort::mple;
    std::size_t grid_points = 100;
    double lambda_min_ratio = 1e-3;
};

/// Full fusion pipeline for one tree: order leaves, reparameterize, run the
/// lasso path, map each distinct fusion pattern back to a grouping with a
/// relaxed (unpenalized) refit and Breslow baseline. Patterns come back
/// sorted by ascending lambda, each pattern keeping the smallest lambda at
/// which it appeared.
FusionPath fusion_path(const Tree& tree, const SurvivalDataset& data,
                       const FusionConfig& config = {});

/// Same, but solving at the caller's lambda grid (cross-validation folds
/// reuse the full-data grid).
FusionPath fusion_path(const Tree& tree, const SurvivalDataset& data,
                       const std::vector<double>& lambda_grid,
                       const FusionConfig& config = {});

/// Minimal tree consistent with the grouping: top-down, any node whose
/// descendant leaves share one group becomes a terminal carrying that group.
/// Node ids, depths and stored rows are preserved. Throws DataError when the
/// grouping misses a leaf.
Tree shear(const Tree& tree, const Grouping& grouping);

}  // namespace survtreeful
