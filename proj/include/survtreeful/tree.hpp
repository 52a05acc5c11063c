#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "survtreeful/dataset.hpp"
#include "survtreeful/iv.hpp"
#include "survtreeful/rng.hpp"

namespace survtreeful {

struct TreeConfig {
    std::size_t max_depth = 4;
    std::size_t min_node_size = 30;
    std::size_t min_node_events = 8;
    SplitSearchConfig split;
    bool use_iv = true;
    std::size_t iv_min_rows = 30;
    std::size_t iv_min_events = 9;
};

/// Heap-numbered node: root 1, children of k are 2k and 2k+1.
struct TreeNode {
    std::uint32_t id = 1;
    std::uint32_t depth = 0;
    SampleIndex rows;  // training rows reaching this node
    std::size_t events = 0;
    std::optional<SplitSpec> split;
    double statistic = 0.0;  // hard logrank Q, valid when split is set
    std::int32_t group = 0;  // fused group id, 0 until fusion assigns one

    bool is_leaf() const { return !split.has_value(); }
};

struct Tree {
    std::map<std::uint32_t, TreeNode> nodes;
    TreeConfig config;

    const TreeNode& root() const { return nodes.at(1); }
    std::vector<std::uint32_t> leaf_ids() const;  // ascending id

    /// Terminal id for a covariate vector (indexed by schema position).
    std::uint32_t route(std::span<const double> covariates) const;
    std::uint32_t route(const SurvivalDataset& data, std::size_t row) const;
};

/// Recursive partitioning. A node becomes terminal at max_depth, below
/// min_node_size rows or min_node_events events, or when no feasible split
/// exists. Degenerate data yields a root-only tree; never throws for that.
Tree grow(const SurvivalDataset& data, const TreeConfig& config,
          std::uint64_t seed);

Tree grow(const SurvivalDataset& data, const SampleIndex& rows,
          const TreeConfig& config, std::uint64_t seed);

/// Dummy design matrix over the given rows: one column per entry of
/// column_leaves, 1 when the row routes to that leaf. The reference leaf is
/// simply omitted from column_leaves.
Eigen::MatrixXd leaf_memberships(const Tree& tree, const SurvivalDataset& data,
                                 const SampleIndex& rows,
                                 std::span<const std::uint32_t> column_leaves);

/// Copy of the tree cut back to the given depth; nodes at the boundary
/// become terminals.
Tree truncate_to_depth(const Tree& tree, std::size_t depth);

}  // namespace survtreeful
