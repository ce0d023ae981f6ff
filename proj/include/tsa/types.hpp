#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "tsa/common.hpp"

namespace tsa {

/// Uniform time discretization of [t0, T] into num_steps steps. The step is
/// always derived from the endpoints so that time(num_steps) == T exactly.
class TimeGrid {
public:
    TimeGrid(double t0, double horizon, int num_steps)
        : t0_(t0), horizon_(horizon), num_steps_(num_steps) {
        check_config(num_steps >= 0, "TimeGrid: number of steps must be >= 0");
        check_config(horizon > t0 || (num_steps == 0 && horizon >= t0),
                     "TimeGrid: horizon must exceed start time");
        dt_ = num_steps > 0 ? (horizon - t0) / num_steps : 0.0;
        check_config(std::isfinite(dt_), "TimeGrid: non-finite step");
    }

    double t0() const { return t0_; }
    double horizon() const { return horizon_; }
    int num_steps() const { return num_steps_; }
    double dt() const { return dt_; }

    double time(int n) const {
        return n == num_steps_ ? horizon_ : t0_ + n * dt_;
    }

private:
    double t0_;
    double horizon_;
    int num_steps_;
    double dt_;
};

/// Finite discrete control set: M points in R^m, kept in a fixed order that
/// drives every argmin tie-break and tree child index in the library.
class ControlGrid {
public:
    static ControlGrid from_points(std::vector<std::vector<double>> pts) {
        check_config(!pts.empty(), "ControlGrid: control set must be nonempty");
        const std::size_t m = pts.front().size();
        check_config(m >= 1, "ControlGrid: control dimension must be >= 1");
        ControlGrid g;
        g.dim_ = static_cast<int>(m);
        g.flat_.reserve(pts.size() * m);
        for (const auto& p : pts) {
            check_config(p.size() == m, "ControlGrid: inconsistent control dimensions");
            check_config(all_finite(p), "ControlGrid: non-finite control point");
            g.flat_.insert(g.flat_.end(), p.begin(), p.end());
        }
        g.count_ = static_cast<int>(pts.size());
        for (int i = 0; i < g.count_; ++i)
            for (int j = i + 1; j < g.count_; ++j)
                check_config(squared_distance(g.point(i), g.point(j)) > 0.0,
                             "ControlGrid: duplicate control points");
        return g;
    }

    static ControlGrid scalar_values(std::vector<double> vals) {
        std::vector<std::vector<double>> pts;
        pts.reserve(vals.size());
        for (double v : vals) pts.push_back({v});
        return from_points(std::move(pts));
    }

    /// Hypercube [lo, hi]^m discretized with constant step du on every axis:
    /// floor((hi-lo)/du)+1 points per axis.
    static ControlGrid hypercube_step(std::span<const double> lo, std::span<const double> hi,
                                      double du) {
        check_config(lo.size() == hi.size() && !lo.empty(), "ControlGrid: bad hypercube bounds");
        check_config(du > 0.0, "ControlGrid: control step must be positive");
        std::vector<int> counts(lo.size());
        for (std::size_t k = 0; k < lo.size(); ++k) {
            check_config(hi[k] >= lo[k], "ControlGrid: hypercube upper bound below lower bound");
            // nudge by epsilon so that exactly divisible spans keep the endpoint
            counts[k] = static_cast<int>(std::floor((hi[k] - lo[k]) / du + 1e-9)) + 1;
        }
        return hypercube_counts(lo, hi, counts, du);
    }

    /// Hypercube with a fixed number of equispaced points per axis.
    static ControlGrid hypercube_count(std::span<const double> lo, std::span<const double> hi,
                                       int per_axis) {
        check_config(per_axis >= 1, "ControlGrid: points per axis must be >= 1");
        std::vector<int> counts(lo.size(), per_axis);
        return hypercube_counts(lo, hi, counts, std::nullopt);
    }

    int dim() const { return dim_; }
    int size() const { return count_; }

    std::span<const double> point(int j) const {
        return {flat_.data() + static_cast<std::size_t>(j) * dim_, static_cast<std::size_t>(dim_)};
    }

private:
    ControlGrid() = default;

    static ControlGrid hypercube_counts(std::span<const double> lo, std::span<const double> hi,
                                        const std::vector<int>& counts,
                                        std::optional<double> fixed_step) {
        const std::size_t m = lo.size();
        std::vector<std::vector<double>> pts;
        std::vector<int> idx(m, 0);
        while (true) {
            std::vector<double> p(m);
            for (std::size_t k = 0; k < m; ++k) {
                if (counts[k] == 1) {
                    p[k] = lo[k];
                } else if (fixed_step) {
                    p[k] = lo[k] + idx[k] * *fixed_step;
                } else {
                    p[k] = lo[k] + idx[k] * (hi[k] - lo[k]) / (counts[k] - 1);
                }
            }
            pts.push_back(std::move(p));
            // odometer over axes, last axis fastest
            std::size_t k = m;
            while (k > 0) {
                --k;
                if (++idx[k] < counts[k]) break;
                idx[k] = 0;
                if (k == 0) return from_points(std::move(pts));
            }
        }
    }

    int dim_ = 0;
    int count_ = 0;
    std::vector<double> flat_;
};

struct LipschitzConstants {
    double dynamics = 0.0;       // L_f
    double running_cost = 0.0;   // L_L
    double terminal_cost = 0.0;  // L_g
};

using DynamicsFn =
    std::function<void(std::span<const double> x, std::span<const double> u, double t,
                       std::span<double> out)>;
using RunningCostFn =
    std::function<double(std::span<const double> x, std::span<const double> u, double t)>;
using TerminalCostFn = std::function<double(std::span<const double> x)>;

/// Finite-horizon optimal control problem: controlled dynamics, running and
/// terminal cost, discount rate. `state_norm_weight` is the per-component
/// weight w of the state-space metric sqrt(w * sum dx_i^2); PDE
/// semi-discretizations set it to their mesh width so distances approximate
/// the discrete L2 norm, everything else leaves it at 1.
struct OCProblem {
    int state_dim = 0;
    int control_dim = 1;
    DynamicsFn dynamics;
    RunningCostFn running_cost;
    TerminalCostFn terminal_cost;
    double discount = 0.0;  // lambda >= 0
    bool autonomous = false;
    double state_norm_weight = 1.0;
    std::optional<LipschitzConstants> lipschitz;

    void validate() const {
        check_config(state_dim >= 1, "OCProblem: state dimension must be >= 1");
        check_config(control_dim >= 1, "OCProblem: control dimension must be >= 1");
        check_config(static_cast<bool>(dynamics), "OCProblem: dynamics not set");
        check_config(static_cast<bool>(terminal_cost), "OCProblem: terminal cost not set");
        check_config(discount >= 0.0, "OCProblem: discount must be >= 0");
        check_config(state_norm_weight > 0.0, "OCProblem: state norm weight must be > 0");
    }

    double run_cost(std::span<const double> x, std::span<const double> u, double t) const {
        return running_cost ? running_cost(x, u, t) : 0.0;
    }
};

/// Synthesized feedback path: states, chosen control indices, and the
/// discounted per-step running-cost increments.
struct Trajectory {
    std::vector<std::vector<double>> states;  // num_steps + 1 entries
    std::vector<int> control_indices;         // num_steps entries
    std::vector<double> step_costs;           // num_steps entries, discounted
    double total_cost = 0.0;                  // sum of step costs + discounted terminal cost
};

}  // namespace tsa
