#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "tsa/common.hpp"
#include "tsa/stepper.hpp"
#include "tsa/tree.hpp"
#include "tsa/types.hpp"
#include "tsa/value_table.hpp"

namespace tsa {

/// Descends the tree from the root along the stored argmin controls,
/// recording states, control indices and discounted step costs. On a tree
/// built without pruning the total equals V^0(x0) up to rounding.
inline Trajectory synthesize_trajectory(const Tree& tree, const ValueTable& table,
                                        const OCProblem& problem, const TimeGrid& grid,
                                        const ControlGrid& controls) {
    check_config(table.matches(tree), "synthesize_trajectory: value table does not match tree");
    check_config(table.num_steps() == grid.num_steps(),
                 "synthesize_trajectory: time grid mismatch");
    const int N = grid.num_steps();
    const double dt = grid.dt();

    Trajectory traj;
    traj.states.reserve(N + 1);
    NodeRef cur{0, 0};
    auto push_state = [&](NodeRef id) {
        const auto s = tree.state(id);
        traj.states.emplace_back(s.begin(), s.end());
    };
    push_state(cur);

    double total = 0.0;
    for (int n = 0; n < N; ++n) {
        const double t = grid.time(n);
        const int j = table.argmin_control(n, cur);
        if (j < 0 || j >= controls.size())
            throw structural_error("synthesize_trajectory: no argmin control stored at level " +
                                   std::to_string(n));
        const double step_cost = std::exp(-problem.discount * (t - grid.t0())) * dt *
                                 problem.run_cost(tree.state(cur), controls.point(j), t);
        traj.control_indices.push_back(j);
        traj.step_costs.push_back(step_cost);
        total += step_cost;
        cur = tree.child(cur, j);
        push_state(cur);
    }
    total += std::exp(-problem.discount * (grid.horizon() - grid.t0())) *
             problem.terminal_cost(tree.state(cur));
    traj.total_cost = total;
    return traj;
}

/// Forward simulation of a control sequence with its discrete cost:
///   J = sum_n e^(-lambda (t_n - t0)) dt L(y_n, u_n, t_n)
///       + e^(-lambda (T - t0)) g(y_N).
/// `with_terminal[n]` is the cost functional truncated at t_n, i.e. the
/// running partial sum plus the discounted terminal cost evaluated at the
/// current state; this is the curve the controlled/uncontrolled comparisons
/// plot, and with_terminal[N] == total.
struct CostCurve {
    std::vector<std::vector<double>> states;  // N + 1 entries
    std::vector<double> step_costs;           // N entries, discounted
    std::vector<double> running;              // N + 1 partial sums, running[0] = 0
    std::vector<double> with_terminal;        // N + 1 entries
    double total = 0.0;
};

template <StepFn S>
CostCurve evaluate_cost(const OCProblem& problem, const TimeGrid& grid,
                        std::span<const double> x0,
                        const std::vector<std::vector<double>>& control_sequence,
                        const S& step) {
    problem.validate();
    check_config(static_cast<int>(x0.size()) == problem.state_dim,
                 "evaluate_cost: initial state dimension mismatch");
    check_config(static_cast<int>(control_sequence.size()) == grid.num_steps(),
                 "evaluate_cost: control sequence length must equal the number of steps");
    const int N = grid.num_steps();
    const double dt = grid.dt();

    CostCurve curve;
    curve.states.reserve(N + 1);
    curve.states.emplace_back(x0.begin(), x0.end());
    curve.running.push_back(0.0);

    std::vector<double> next(problem.state_dim);
    double running = 0.0;
    for (int n = 0; n < N; ++n) {
        const auto& u = control_sequence[n];
        check_config(static_cast<int>(u.size()) == problem.control_dim,
                     "evaluate_cost: control dimension mismatch at step " + std::to_string(n));
        const double t = grid.time(n);
        const auto& y = curve.states.back();
        const double disc = std::exp(-problem.discount * (t - grid.t0()));
        const double step_cost = disc * dt * problem.run_cost(y, u, t);
        curve.step_costs.push_back(step_cost);
        curve.with_terminal.push_back(running + disc * problem.terminal_cost(y));
        running += step_cost;
        curve.running.push_back(running);
        step(y, u, t, std::span<double>(next));
        curve.states.push_back(next);
    }
    const double disc_T = std::exp(-problem.discount * (grid.horizon() - grid.t0()));
    curve.with_terminal.push_back(running + disc_T * problem.terminal_cost(curve.states.back()));
    curve.total = curve.with_terminal.back();
    return curve;
}

/// Expands stored control indices into control vectors.
inline std::vector<std::vector<double>> controls_from_indices(const ControlGrid& controls,
                                                              std::span<const int> indices) {
    std::vector<std::vector<double>> seq;
    seq.reserve(indices.size());
    for (int j : indices) {
        const auto p = controls.point(j);
        seq.emplace_back(p.begin(), p.end());
    }
    return seq;
}

}  // namespace tsa
