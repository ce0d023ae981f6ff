#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "tsa/common.hpp"
#include "tsa/tree.hpp"
#include "tsa/types.hpp"
#include "tsa/value_table.hpp"

namespace tsa {

namespace detail {

inline double node_min(const Tree& tree, const ValueTable& table, const OCProblem& problem,
                       const ControlGrid& controls, double disc, double dt, double t,
                       NodeRef node, int next_time_idx, int* best_control) {
    const int M = controls.size();
    const std::span<const double> x = tree.state(node);
    double best = std::numeric_limits<double>::infinity();
    int best_j = -1;
    for (int j = 0; j < M; ++j) {
        const NodeRef c = tree.child(node, j);
        if (!table.covers(next_time_idx, c))
            throw structural_error("value solve: missing child value at node (" +
                                   std::to_string(node.level) + "," +
                                   std::to_string(node.index) + "), control " +
                                   std::to_string(j));
        const double v =
            disc * table.value(next_time_idx, c) + dt * problem.run_cost(x, controls.point(j), t);
        if (v < best) {  // strict: ties keep the lowest control index
            best = v;
            best_j = j;
        }
    }
    *best_control = best_j;
    return best;
}

}  // namespace detail

/// Backward dynamic programming on the tree:
///   V^N(z) = g(z),
///   V^n(z) = min_j { e^(-lambda dt) V^{n+1}(child(z, j)) + dt L(z, u_j, t_n) },
/// minimum by direct comparison over the control grid, ties to the lowest
/// control index. Parallel over nodes within a level; output is identical for
/// every thread count.
inline ValueTable solve_value(const Tree& tree, const OCProblem& problem, const TimeGrid& grid,
                              const ControlGrid& controls, int threads = 1) {
    problem.validate();
    check_config(tree.num_levels() == grid.num_steps() + 1,
                 "solve_value: tree levels do not match the time grid");
    const int N = tree.num_steps();
    const double disc = std::exp(-problem.discount * grid.dt());

    ValueTable table(tree, ValueTable::Coverage::NativeLevel);
    parallel_for(tree.level_size(N), threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const NodeRef id{N, static_cast<std::int32_t>(i)};
            table.set(N, id, problem.terminal_cost(tree.state(id)), -1);
        }
    });

    for (int n = N - 1; n >= 0; --n) {
        const double t = grid.time(n);
        parallel_for(tree.level_size(n), threads, [&](std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i) {
                const NodeRef id{n, static_cast<std::int32_t>(i)};
                int best_j = -1;
                const double v = detail::node_min(tree, table, problem, controls, disc,
                                                  grid.dt(), t, id, n + 1, &best_j);
                table.set(n, id, v, best_j);
            }
        });
    }
    return table;
}

/// Extended backward solve: V^n is computed for every node of levels 0..n by
/// reusing each node's stored edges at every time index, with the terminal
/// cost imposed on the whole tree first. Exact when the dynamics is
/// autonomous (edges are time-independent); callers applying it to
/// time-dependent dynamics accept the edge-time mismatch as an extra
/// approximation on top of the pruning tolerance.
inline ValueTable solve_value_extended(const Tree& tree, const OCProblem& problem,
                                       const TimeGrid& grid, const ControlGrid& controls,
                                       int threads = 1) {
    problem.validate();
    check_config(tree.num_levels() == grid.num_steps() + 1,
                 "solve_value_extended: tree levels do not match the time grid");
    const int N = tree.num_steps();
    const double disc = std::exp(-problem.discount * grid.dt());

    ValueTable table(tree, ValueTable::Coverage::AutonomousExtension);
    for (int k = 0; k <= N; ++k) {
        parallel_for(tree.level_size(k), threads, [&](std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i) {
                const NodeRef id{k, static_cast<std::int32_t>(i)};
                table.set(N, id, problem.terminal_cost(tree.state(id)), -1);
            }
        });
    }

    for (int n = N - 1; n >= 0; --n) {
        const double t = grid.time(n);
        // every covered node (level <= n) has stored edges into levels <= n+1,
        // where V^{n+1} is already known
        for (int k = 0; k <= n; ++k) {
            parallel_for(tree.level_size(k), threads, [&](std::size_t begin, std::size_t end) {
                for (std::size_t i = begin; i < end; ++i) {
                    const NodeRef id{k, static_cast<std::int32_t>(i)};
                    int best_j = -1;
                    const double v = detail::node_min(tree, table, problem, controls, disc,
                                                      grid.dt(), t, id, n + 1, &best_j);
                    table.set(n, id, v, best_j);
                }
            });
        }
    }
    return table;
}

/// Autonomous-dynamics form of the extended solve (the edges
/// z -> z + dt f(z, u) carry no time dependence, so the reuse is exact).
inline ValueTable solve_value_autonomous(const Tree& tree, const OCProblem& problem,
                                         const TimeGrid& grid, const ControlGrid& controls,
                                         int threads = 1) {
    check_config(problem.autonomous,
                 "solve_value_autonomous: problem is not flagged autonomous");
    return solve_value_extended(tree, problem, grid, controls, threads);
}

/// Lipschitz-in-space bound for the numerical value function:
///   |V^n(x) - V^n(y)| <= |x - y| * C(T - t_n)
/// with the growth constant from the discrete Gronwall estimate.
struct LipschitzData {
    LipschitzConstants constants;
    double discount = 0.0;  // lambda
    double horizon = 0.0;   // T
    double t_n = 0.0;
};

inline double lipschitz_bound(const LipschitzData& data, double distance) {
    const double lf = data.constants.dynamics;
    const double ll = data.constants.running_cost;
    const double lg = data.constants.terminal_cost;
    check_config(lf >= 0.0 && ll >= 0.0 && lg >= 0.0 && std::isfinite(lf + ll + lg),
                 "lipschitz_bound: constants must be finite and nonnegative");
    const double tau = data.horizon - data.t_n;
    const double growth = std::exp(tau * (lf - data.discount));
    if (lf > data.discount)
        return distance * (ll / (lf - data.discount) * (growth - 1.0) + lg * growth);
    return distance * (ll * tau + lg * growth);
}

/// Recomputes the backward recursion at every covered non-terminal node and
/// returns the largest absolute deviation from the stored values. Freshly
/// solved tables sit at floating-point reassociation level (<= 1e-12).
inline double check_dp_consistency(const Tree& tree, const ValueTable& table,
                                   const OCProblem& problem, const TimeGrid& grid,
                                   const ControlGrid& controls) {
    check_config(table.matches(tree), "check_dp_consistency: table does not match tree");
    const int N = tree.num_steps();
    const double disc = std::exp(-problem.discount * grid.dt());
    double max_resid = 0.0;
    for (int n = 0; n < N; ++n) {
        const double t = grid.time(n);
        const int top_level = table.coverage() == ValueTable::Coverage::NativeLevel ? n : 0;
        for (int k = top_level; k <= n; ++k) {
            for (std::size_t i = 0; i < tree.level_size(k); ++i) {
                const NodeRef id{k, static_cast<std::int32_t>(i)};
                int best_j = -1;
                const double v = detail::node_min(tree, table, problem, controls, disc,
                                                  grid.dt(), t, id, n + 1, &best_j);
                max_resid = std::max(max_resid, std::abs(v - table.value(n, id)));
            }
        }
    }
    return max_resid;
}

}  // namespace tsa
