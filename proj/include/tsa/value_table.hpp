#pragma once

#include <cstdint>
#include <vector>

#include "tsa/common.hpp"
#include "tsa/tree.hpp"

namespace tsa {

/// Value-function approximations attached to tree nodes. With native
/// coverage, the table defines V^n on level n only; with the autonomous
/// extension it defines V^n on every node of levels 0..n (the whole tree at
/// the terminal time index).
class ValueTable {
public:
    enum class Coverage { NativeLevel, AutonomousExtension };

    ValueTable(const Tree& tree, Coverage coverage) : coverage_(coverage) {
        const int levels = tree.num_levels();
        level_offset_.resize(levels + 1, 0);
        for (int k = 0; k < levels; ++k)
            level_offset_[k + 1] = level_offset_[k] + tree.level_size(k);
        values_.resize(levels);
        argmin_.resize(levels);
        for (int n = 0; n < levels; ++n) {
            const std::size_t count = coverage == Coverage::NativeLevel
                                          ? tree.level_size(n)
                                          : level_offset_[n + 1];
            values_[n].assign(count, 0.0);
            argmin_[n].assign(count, -1);
        }
    }

    Coverage coverage() const { return coverage_; }
    int num_time_levels() const { return static_cast<int>(values_.size()); }
    int num_steps() const { return num_time_levels() - 1; }

    bool covers(int time_idx, NodeRef node) const {
        if (time_idx < 0 || time_idx >= num_time_levels()) return false;
        if (coverage_ == Coverage::NativeLevel) return node.level == time_idx;
        return node.level <= time_idx;
    }

    double value(int time_idx, NodeRef node) const {
        return values_[time_idx][slot(time_idx, node)];
    }

    /// Control index attaining the minimum; -1 at the terminal time index.
    int argmin_control(int time_idx, NodeRef node) const {
        return argmin_[time_idx][slot(time_idx, node)];
    }

    void set(int time_idx, NodeRef node, double value, int argmin) {
        const std::size_t s = slot(time_idx, node);
        values_[time_idx][s] = value;
        argmin_[time_idx][s] = argmin;
    }

    /// Values over the nodes covered at a time index, in (level, index) order.
    const std::vector<double>& covered_values(int time_idx) const { return values_[time_idx]; }

    std::size_t covered_count(int time_idx) const { return values_[time_idx].size(); }

    /// First node covered at a time index; with native coverage the slot order
    /// is the level's index order, otherwise level-major over levels 0..n.
    NodeRef covered_node(int time_idx, std::size_t slot_idx) const {
        if (coverage_ == Coverage::NativeLevel)
            return NodeRef{time_idx, static_cast<std::int32_t>(slot_idx)};
        int level = 0;
        while (level_offset_[level + 1] <= slot_idx) ++level;
        return NodeRef{level, static_cast<std::int32_t>(slot_idx - level_offset_[level])};
    }

    bool matches(const Tree& tree) const {
        if (num_time_levels() != tree.num_levels()) return false;
        for (int k = 0; k < tree.num_levels(); ++k)
            if (level_offset_[k + 1] - level_offset_[k] != tree.level_size(k)) return false;
        return true;
    }

private:
    std::size_t slot(int time_idx, NodeRef node) const {
        if (!covers(time_idx, node))
            throw structural_error("ValueTable: no value at time " + std::to_string(time_idx) +
                                   " for node (" + std::to_string(node.level) + "," +
                                   std::to_string(node.index) + ")");
        if (coverage_ == Coverage::NativeLevel) return static_cast<std::size_t>(node.index);
        return level_offset_[node.level] + static_cast<std::size_t>(node.index);
    }

    Coverage coverage_;
    std::vector<std::size_t> level_offset_;
    std::vector<std::vector<double>> values_;
    std::vector<std::vector<std::int32_t>> argmin_;
};

}  // namespace tsa
