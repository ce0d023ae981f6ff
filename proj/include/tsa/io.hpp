#pragma once

#include <cstdio>
#include <fstream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "tsa/common.hpp"
#include "tsa/feedback.hpp"
#include "tsa/oracle.hpp"
#include "tsa/tree.hpp"
#include "tsa/tree_builder.hpp"
#include "tsa/types.hpp"
#include "tsa/value_table.hpp"

namespace tsa {

/// Shortest representation that round-trips a double (CSV bodies must be
/// byte-identical across reruns).
inline std::string csv_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    double back = 0.0;
    std::sscanf(buf, "%lf", &back);
    if (back == v) {
        for (int prec = 1; prec < 17; ++prec) {
            char shorter[32];
            std::snprintf(shorter, sizeof(shorter), "%.*g", prec, v);
            std::sscanf(shorter, "%lf", &back);
            if (back == v) return shorter;
        }
    }
    return buf;
}

inline std::ofstream open_csv(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw config_error("cannot open output file '" + path + "'");
    return out;
}

/// Tree and value dump: level,id,x_0..x_{d-1},value,argmin_u. Values and
/// argmins come from the table's native coverage; pass nullptr to dump the
/// bare tree.
inline void write_tree_csv(std::ostream& out, const Tree& tree, const ValueTable* values) {
    out << "level,id";
    for (int k = 0; k < tree.dim(); ++k) out << ",x_" << k;
    out << ",value,argmin_u\n";
    for (int n = 0; n < tree.num_levels(); ++n) {
        for (std::size_t i = 0; i < tree.level_size(n); ++i) {
            const NodeRef id{n, static_cast<std::int32_t>(i)};
            out << n << ',' << i;
            for (double c : tree.state(id)) out << ',' << csv_double(c);
            if (values) {
                out << ',' << csv_double(values->value(n, id)) << ','
                    << values->argmin_control(n, id);
            } else {
                out << ",,";
            }
            out << '\n';
        }
    }
}

/// Trajectory dump: n,t,x_0..x_{d-1},u_index,step_cost,cumulative_cost.
/// The final row carries the terminal state with empty control fields.
inline void write_trajectory_csv(std::ostream& out, const Trajectory& traj,
                                 const TimeGrid& grid) {
    const int dim = traj.states.empty() ? 0 : static_cast<int>(traj.states.front().size());
    out << "n,t";
    for (int k = 0; k < dim; ++k) out << ",x_" << k;
    out << ",u_index,step_cost,cumulative_cost\n";
    double cum = 0.0;
    for (std::size_t n = 0; n < traj.states.size(); ++n) {
        out << n << ',' << csv_double(grid.time(static_cast<int>(n)));
        for (double c : traj.states[n]) out << ',' << csv_double(c);
        if (n < traj.control_indices.size()) {
            cum += traj.step_costs[n];
            out << ',' << traj.control_indices[n] << ',' << csv_double(traj.step_costs[n])
                << ',' << csv_double(cum);
        } else {
            out << ",,," << csv_double(traj.total_cost);
        }
        out << '\n';
    }
}

/// Cost-curve dump: n,t,step_cost,running_cost,cost_with_terminal.
inline void write_cost_curve_csv(std::ostream& out, const CostCurve& curve,
                                 const TimeGrid& grid) {
    out << "n,t,step_cost,running_cost,cost_with_terminal\n";
    for (std::size_t n = 0; n < curve.running.size(); ++n) {
        out << n << ',' << csv_double(grid.time(static_cast<int>(n))) << ',';
        if (n < curve.step_costs.size()) out << csv_double(curve.step_costs[n]);
        out << ',' << csv_double(curve.running[n]) << ','
            << csv_double(curve.with_terminal[n]) << '\n';
    }
}

/// Build statistics: level,nodes,candidates,merged,seconds.
inline void write_build_stats_csv(std::ostream& out, const BuildStats& stats) {
    out << "level,nodes,candidates,merged,seconds\n";
    for (std::size_t n = 0; n < stats.levels.size(); ++n) {
        const auto& lv = stats.levels[n];
        out << n << ',' << lv.nodes << ',' << lv.candidates << ',' << lv.merged << ','
            << csv_double(lv.seconds) << '\n';
    }
}

/// Grid-oracle dump: a metadata header line, then one line per time level
/// with the vertex values in row-major order.
inline void write_grid_value_csv(std::ostream& out, const GridValue& grid) {
    out << "d=" << grid.dim() << ",dx=";
    for (int k = 0; k < grid.dim(); ++k)
        out << (k ? ";" : "") << csv_double(grid.spacing()[k]);
    out << ",box=";
    for (int k = 0; k < grid.dim(); ++k)
        out << (k ? ";" : "") << csv_double(grid.domain().lo[k]) << ":"
            << csv_double(grid.domain().hi[k]);
    out << ",levels=" << grid.num_time_levels() - 1 << '\n';
    for (int n = 0; n < grid.num_time_levels(); ++n) {
        const auto& vals = grid.level_values(n);
        for (std::size_t i = 0; i < vals.size(); ++i)
            out << (i ? "," : "") << csv_double(vals[i]);
        out << '\n';
    }
}

struct ConvergenceRow {
    double dt = 0.0;
    std::uint64_t tree_nodes = 0;
    double cpu_seconds = 0.0;
    double err22 = 0.0;
    double errinf2 = 0.0;
    double order22 = 0.0;   // NaN on the first row
    double orderinf2 = 0.0;
};

/// Convergence-study table: dt,tree_nodes,cpu_seconds,err22,errinf2,order22,orderinf2.
inline void write_convergence_csv(std::ostream& out, std::span<const ConvergenceRow> rows) {
    out << "dt,tree_nodes,cpu_seconds,err22,errinf2,order22,orderinf2\n";
    for (const auto& r : rows) {
        out << csv_double(r.dt) << ',' << r.tree_nodes << ',' << csv_double(r.cpu_seconds)
            << ',' << csv_double(r.err22) << ',' << csv_double(r.errinf2) << ',';
        if (!std::isnan(r.order22)) out << csv_double(r.order22);
        out << ',';
        if (!std::isnan(r.orderinf2)) out << csv_double(r.orderinf2);
        out << '\n';
    }
}

}  // namespace tsa
