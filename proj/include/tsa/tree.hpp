#pragma once

#include <compare>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "tsa/common.hpp"
#include "tsa/types.hpp"

namespace tsa {

/// Node id: time level plus index within the level. Levels are the unit of
/// construction and of every backward sweep, so ids are level-local.
struct NodeRef {
    std::int32_t level = -1;
    std::int32_t index = -1;

    friend auto operator<=>(const NodeRef&, const NodeRef&) = default;
};

/// Leveled node store for the controlled-dynamics tree. Level n holds the
/// states reachable in n steps; every non-terminal node has exactly M
/// outgoing edges, one per control index, each pointing at a node whose level
/// never exceeds the parent's level plus one.
class Tree {
public:
    Tree(int state_dim, int num_controls)
        : dim_(state_dim), num_controls_(num_controls) {
        check_config(state_dim >= 1, "Tree: state dimension must be >= 1");
        check_config(num_controls >= 1, "Tree: control count must be >= 1");
    }

    int dim() const { return dim_; }
    int num_controls() const { return num_controls_; }
    int num_levels() const { return static_cast<int>(states_.size()); }
    int num_steps() const { return num_levels() - 1; }

    std::size_t level_size(int level) const {
        return states_[level].size() / dim_;
    }

    std::size_t total_nodes() const {
        std::size_t n = 0;
        for (const auto& lv : states_) n += lv.size() / dim_;
        return n;
    }

    /// Nodes in levels [0, level), i.e. the flat offset of (level, 0) in
    /// level-major node order.
    std::size_t prefix_count(int level) const {
        std::size_t n = 0;
        for (int k = 0; k < level; ++k) n += level_size(k);
        return n;
    }

    std::span<const double> state(NodeRef id) const {
        return {states_[id.level].data() + static_cast<std::size_t>(id.index) * dim_,
                static_cast<std::size_t>(dim_)};
    }

    std::span<const double> level_states(int level) const { return states_[level]; }

    NodeRef child(NodeRef id, int control_index) const {
        return children_[id.level][static_cast<std::size_t>(id.index) * num_controls_ +
                                   control_index];
    }

    bool has_children(int level) const {
        return level < num_steps();
    }

    // --- construction interface (used by the builder) ---

    void add_level() {
        states_.emplace_back();
        children_.emplace_back();
    }

    std::int32_t push_node(int level, std::span<const double> state) {
        auto& lv = states_[level];
        const std::int32_t idx = static_cast<std::int32_t>(lv.size() / dim_);
        lv.insert(lv.end(), state.begin(), state.end());
        return idx;
    }

    void append_children(int level, std::span<const NodeRef> edges) {
        auto& ch = children_[level];
        ch.insert(ch.end(), edges.begin(), edges.end());
    }

    void reserve_level(int level, std::size_t nodes, bool with_children) {
        states_[level].reserve(nodes * dim_);
        if (with_children) children_[level].reserve(nodes * num_controls_);
    }

private:
    int dim_;
    int num_controls_;
    std::vector<std::vector<double>> states_;     // per level, row-major (node, component)
    std::vector<std::vector<NodeRef>> children_;  // per level, node-major (node, control)
};

/// Node count of the unpruned tree: sum_{i=0..steps} M^i. Overflow of the
/// 64-bit range is reported, never wrapped.
inline std::uint64_t full_tree_cardinality(std::uint64_t num_controls, std::uint64_t steps) {
    check_config(num_controls >= 1, "full_tree_cardinality: control count must be >= 1");
    if (num_controls == 1) return steps + 1;
    std::uint64_t total = 1;
    std::uint64_t level = 1;
    for (std::uint64_t i = 0; i < steps; ++i) {
        if (level > std::numeric_limits<std::uint64_t>::max() / num_controls)
            throw resource_error("full_tree_cardinality: 64-bit overflow");
        level *= num_controls;
        if (total > std::numeric_limits<std::uint64_t>::max() - level)
            throw resource_error("full_tree_cardinality: 64-bit overflow");
        total += level;
    }
    return total;
}

struct TreeDiagnostics {
    double max_edge_residual = 0.0;    // weighted-norm distance of child from stepper image
    std::size_t edges_checked = 0;
    std::vector<std::string> issues;   // structural corruption, with node ids

    bool ok() const { return issues.empty(); }
};

/// Recomputes every adjacency edge with the given stepper and reports the
/// worst residual plus any dangling ids. A healthy tree built with merge
/// tolerance eps has max_edge_residual <= eps (0 when pruning was disabled).
template <class StepFn>
TreeDiagnostics validate_tree(const Tree& tree, const OCProblem& problem, const TimeGrid& grid,
                              const ControlGrid& controls, StepFn&& step) {
    TreeDiagnostics diag;
    const int M = controls.size();
    std::vector<double> image(tree.dim());
    const double norm_scale = std::sqrt(problem.state_norm_weight);
    for (int n = 0; n < tree.num_steps(); ++n) {
        const double t = grid.time(n);
        for (std::size_t i = 0; i < tree.level_size(n); ++i) {
            const NodeRef parent{n, static_cast<std::int32_t>(i)};
            for (int j = 0; j < M; ++j) {
                const NodeRef c = tree.child(parent, j);
                if (c.level < 0 || c.level >= tree.num_levels() || c.index < 0 ||
                    static_cast<std::size_t>(c.index) >= tree.level_size(c.level) ||
                    c.level > n + 1) {
                    diag.issues.push_back("dangling edge from (" + std::to_string(n) + "," +
                                          std::to_string(i) + ") control " + std::to_string(j) +
                                          " to (" + std::to_string(c.level) + "," +
                                          std::to_string(c.index) + ")");
                    continue;
                }
                step(tree.state(parent), controls.point(j), t, std::span<double>(image));
                const double r =
                    norm_scale * std::sqrt(squared_distance(image, tree.state(c)));
                diag.max_edge_residual = std::max(diag.max_edge_residual, r);
                ++diag.edges_checked;
            }
        }
    }
    return diag;
}

}  // namespace tsa
