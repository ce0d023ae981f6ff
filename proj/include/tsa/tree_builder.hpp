#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tsa/common.hpp"
#include "tsa/neighbor_index.hpp"
#include "tsa/stepper.hpp"
#include "tsa/tree.hpp"
#include "tsa/types.hpp"

namespace tsa {

enum class PruneScope {
    SameLevel,   // candidates compared against nodes of their own time level
    CrossLevel,  // compared against the whole tree; autonomous dynamics only
};

struct PruneConfig {
    double tolerance = 0.0;  // eps_T in the problem's state norm; 0 disables merging
    PruneScope scope = PruneScope::SameLevel;
    NeighborStrategy strategy = NeighborStrategy::Auto;
    std::size_t max_nodes = 50'000'000;
    // Whole-tree merging identifies states reached at different times, which
    // is only sound for autonomous dynamics; this opt-in permits it anyway
    // (the paired value solve then reuses time-stamped edges across levels).
    bool cross_level_any_dynamics = false;
};

struct LevelBuildStats {
    std::uint64_t nodes = 0;       // nodes kept at this level
    std::uint64_t candidates = 0;  // stepper images generated for this level
    std::uint64_t merged = 0;      // candidates redirected to an existing node
    double seconds = 0.0;
};

struct BuildStats {
    std::vector<LevelBuildStats> levels;
    double total_seconds = 0.0;

    std::uint64_t total_merged() const {
        std::uint64_t m = 0;
        for (const auto& lv : levels) m += lv.merged;
        return m;
    }
};

/// Forward construction of the controlled-dynamics tree with optional node
/// merging. Parents are expanded in id order and controls in grid order; a
/// candidate within `tolerance` of an in-scope node redirects its edge to the
/// closest such node (lowest id on ties) and is discarded before it can grow
/// a subtree. The pass is sequential and deterministic: identical inputs give
/// bit-identical trees for every neighbor strategy and thread count (threads
/// only parallelize candidate generation).
template <StepFn S>
Tree build_tree(const OCProblem& problem, const S& step, const TimeGrid& grid,
                const ControlGrid& controls, std::span<const double> x0,
                const PruneConfig& prune, BuildStats* stats = nullptr, int threads = 1) {
    problem.validate();
    check_config(static_cast<int>(x0.size()) == problem.state_dim,
                 "build_tree: initial state dimension mismatch");
    check_config(all_finite(x0), "build_tree: non-finite initial state");
    check_config(controls.dim() == problem.control_dim,
                 "build_tree: control grid dimension mismatch");
    check_config(prune.tolerance >= 0.0, "build_tree: negative pruning tolerance");
    check_config(prune.scope == PruneScope::SameLevel || problem.autonomous ||
                     prune.cross_level_any_dynamics,
                 "build_tree: cross-level pruning requires autonomous dynamics "
                 "(or the explicit cross_level_any_dynamics opt-in)");

    const int dim = problem.state_dim;
    const int M = controls.size();
    const bool pruning = prune.tolerance > 0.0;
    // merge radius in raw coordinates; the configured tolerance lives in the
    // problem's (possibly mesh-weighted) norm
    const double radius = prune.tolerance / std::sqrt(problem.state_norm_weight);

    Tree tree(dim, M);
    tree.add_level();
    tree.push_node(0, x0);
    if (stats) {
        stats->levels.assign(1, LevelBuildStats{1, 1, 0, 0.0});
        stats->total_seconds = 0.0;
    }

    std::vector<double> candidates;   // per level, row-major (parent*M + control)
    std::vector<NodeRef> edges;       // per parent, M entries
    const auto t_start = std::chrono::steady_clock::now();

    for (int n = 0; n < grid.num_steps(); ++n) {
        const auto level_start = std::chrono::steady_clock::now();
        const double t = grid.time(n);
        const std::size_t parents = tree.level_size(n);
        const std::size_t cand_count = parents * M;

        candidates.resize(cand_count * dim);
        std::span<const double> parent_states = tree.level_states(n);
        parallel_for(parents, threads, [&](std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i) {
                const std::span<const double> px{parent_states.data() + i * dim,
                                                 static_cast<std::size_t>(dim)};
                for (int j = 0; j < M; ++j) {
                    std::span<double> out{candidates.data() + (i * M + j) * dim,
                                          static_cast<std::size_t>(dim)};
                    try {
                        step(px, controls.point(j), t, out);
                    } catch (const numerical_error& e) {
                        throw numerical_error(std::string(e.what()) + " at parent (" +
                                              std::to_string(n) + "," + std::to_string(i) +
                                              "), control " + std::to_string(j));
                    }
                    if (!all_finite(out))
                        throw numerical_error("build_tree: non-finite candidate at parent (" +
                                              std::to_string(n) + "," + std::to_string(i) +
                                              "), control " + std::to_string(j));
                }
            }
        });

        tree.add_level();
        tree.reserve_level(n + 1, pruning ? parents : cand_count, /*with_children=*/false);

        std::optional<NeighborIndex> index;
        if (pruning) {
            index.emplace(dim, radius, prune.strategy, std::span<const double>(candidates));
            if (prune.scope == PruneScope::CrossLevel) {
                for (int k = 0; k <= n; ++k)
                    for (std::size_t i = 0; i < tree.level_size(k); ++i) {
                        const NodeRef id{k, static_cast<std::int32_t>(i)};
                        index->insert(id, tree.state(id));
                    }
            }
        }

        std::uint64_t merged = 0;
        for (std::size_t i = 0; i < parents; ++i) {
            edges.clear();
            for (int j = 0; j < M; ++j) {
                const std::span<const double> cand{candidates.data() + (i * M + j) * dim,
                                                   static_cast<std::size_t>(dim)};
                std::optional<NodeRef> target;
                if (pruning) target = index->query_nearest(cand, radius);
                if (target) {
                    ++merged;
                    edges.push_back(*target);
                } else {
                    const std::int32_t idx = tree.push_node(n + 1, cand);
                    const NodeRef id{n + 1, idx};
                    if (pruning) index->insert(id, tree.state(id));
                    edges.push_back(id);
                }
            }
            tree.append_children(n, edges);
        }

        const double level_secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - level_start)
                .count();
        if (stats)
            stats->levels.push_back(LevelBuildStats{
                static_cast<std::uint64_t>(tree.level_size(n + 1)),
                static_cast<std::uint64_t>(cand_count), merged, level_secs});

        if (tree.total_nodes() > prune.max_nodes) {
            std::string msg = "build_tree: node budget " + std::to_string(prune.max_nodes) +
                              " exceeded at level " + std::to_string(n + 1) + " (levels:";
            for (int k = 0; k <= n + 1; ++k)
                msg += " " + std::to_string(tree.level_size(k));
            msg += ")";
            if (stats)
                stats->total_seconds =
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
                        .count();
            throw resource_error(msg);
        }
    }

    if (stats)
        stats->total_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return tree;
}

}  // namespace tsa
