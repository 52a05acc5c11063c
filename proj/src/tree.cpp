#include "survtreeful/tree.hpp"

namespace survtreeful {

std::vector<std::uint32_t> Tree::leaf_ids() const {
    std::vector<std::uint32_t> ids;
    for (const auto& [id, node] : nodes)
        if (node.is_leaf()) ids.push_back(id);
    return ids;
}

std::uint32_t Tree::route(std::span<const double> covariates) const {
    std::uint32_t id = 1;
    for (;;) {
        const TreeNode& node = nodes.at(id);
        if (node.is_leaf()) return id;
        const SplitSpec& s = *node.split;
        id = 2 * id + (routes_left(s, covariates[s.variable]) ? 0 : 1);
    }
}

std::uint32_t Tree::route(const SurvivalDataset& data, std::size_t row) const {
    std::uint32_t id = 1;
    for (;;) {
        const TreeNode& node = nodes.at(id);
        if (node.is_leaf()) return id;
        const SplitSpec& s = *node.split;
        const double z = data.covariates[s.variable][row];
        id = 2 * id + (routes_left(s, z) ? 0 : 1);
    }
}

Tree grow(const SurvivalDataset& data, const SampleIndex& rows,
          const TreeConfig& config, std::uint64_t seed) {
    Tree tree;
    tree.config = config;

    IVConfig iv_cfg;
    iv_cfg.split = config.split;
    iv_cfg.use_iv = config.use_iv;
    iv_cfg.iv_min_rows = config.iv_min_rows;
    iv_cfg.iv_min_events = config.iv_min_events;

    Rng base(seed);

    TreeNode root;
    root.id = 1;
    root.depth = 0;
    root.rows = rows;
    for (const auto r : rows.rows) root.events += data.status[r];

    std::vector<TreeNode> pending{std::move(root)};
    while (!pending.empty()) {
        TreeNode node = std::move(pending.back());
        pending.pop_back();

        const bool can_split = node.depth < config.max_depth &&
                               node.rows.size() >= config.min_node_size &&
                               node.events >= config.min_node_events;
        if (can_split) {
            // Per-node stream keyed by id: traversal order and thread count
            // cannot perturb the draws.
            Rng node_rng = base.child(node.id);
            const SplitResult r =
                iv_split(data, node.rows, iv_cfg, node_rng);
            if (r.feasible) {
                TreeNode left, right;
                left.id = 2 * node.id;
                right.id = 2 * node.id + 1;
                left.depth = right.depth = node.depth + 1;
                for (const auto row : node.rows.rows) {
                    const double z = data.covariates[r.spec.variable][row];
                    TreeNode& child = routes_left(r.spec, z) ? left : right;
                    child.rows.rows.push_back(row);
                    child.events += data.status[row];
                }
                node.split = r.spec;
                node.statistic = r.statistic;
                pending.push_back(std::move(right));
                pending.push_back(std::move(left));
            }
        }
        tree.nodes.emplace(node.id, std::move(node));
    }
    return tree;
}

Tree grow(const SurvivalDataset& data, const TreeConfig& config,
          std::uint64_t seed) {
    return grow(data, full_index(data), config, seed);
}

Eigen::MatrixXd leaf_memberships(const Tree& tree, const SurvivalDataset& data,
                                 const SampleIndex& rows,
                                 std::span<const std::uint32_t> column_leaves) {
    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(
        static_cast<Eigen::Index>(rows.size()),
        static_cast<Eigen::Index>(column_leaves.size()));
    std::map<std::uint32_t, Eigen::Index> col;
    for (std::size_t j = 0; j < column_leaves.size(); ++j)
        col[column_leaves[j]] = static_cast<Eigen::Index>(j);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto leaf = tree.route(data, rows.rows[i]);
        const auto it = col.find(leaf);
        if (it != col.end()) X(static_cast<Eigen::Index>(i), it->second) = 1.0;
    }
    return X;
}

Tree truncate_to_depth(const Tree& tree, std::size_t depth) {
    Tree out;
    out.config = tree.config;
    for (const auto& [id, node] : tree.nodes) {
        if (node.depth > depth) continue;
        TreeNode copy = node;
        if (copy.depth == depth) {
            copy.split.reset();
            copy.statistic = 0.0;
        }
        out.nodes.emplace(id, std::move(copy));
    }
    return out;
}

}  // namespace survtreeful
