#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "tsa/common.hpp"
#include "tsa/stepper.hpp"
#include "tsa/types.hpp"

namespace tsa {

/// Axis-aligned box in R^d.
struct Box {
    std::vector<double> lo;
    std::vector<double> hi;

    int dim() const { return static_cast<int>(lo.size()); }

    void validate() const {
        check_config(!lo.empty() && lo.size() == hi.size(), "Box: inconsistent bounds");
        for (std::size_t k = 0; k < lo.size(); ++k)
            check_config(hi[k] > lo[k], "Box: upper bound must exceed lower bound");
    }
};

namespace detail {

struct GridGeometry {
    Box domain;
    std::vector<double> spacing;     // per axis
    std::vector<int> vertex_counts;  // per axis, >= 2
    std::size_t total_vertices = 1;

    static GridGeometry build(const Box& domain, std::span<const double> spacing) {
        domain.validate();
        check_config(domain.dim() <= 3, "grid oracle: restricted to state dimension <= 3");
        check_config(spacing.size() == domain.lo.size(), "grid oracle: spacing size mismatch");
        GridGeometry g;
        g.domain = domain;
        g.spacing.assign(spacing.begin(), spacing.end());
        g.vertex_counts.resize(domain.dim());
        for (int k = 0; k < domain.dim(); ++k) {
            check_config(spacing[k] > 0.0, "grid oracle: spacing must be positive");
            const double span = domain.hi[k] - domain.lo[k];
            const int cells = static_cast<int>(std::llround(span / spacing[k]));
            check_config(cells >= 1 && std::abs(cells * spacing[k] - span) <= 1e-9 * span,
                         "grid oracle: box side must be an integer number of cells");
            g.vertex_counts[k] = cells + 1;
            g.total_vertices *= static_cast<std::size_t>(cells + 1);
        }
        return g;
    }

    int dim() const { return domain.dim(); }

    void vertex_coords(std::size_t flat, std::span<double> x) const {
        // row-major, last axis fastest
        for (int k = dim() - 1; k >= 0; --k) {
            const std::size_t n = static_cast<std::size_t>(vertex_counts[k]);
            const std::size_t i = flat % n;
            flat /= n;
            x[k] = i + 1 == n ? domain.hi[k] : domain.lo[k] + static_cast<double>(i) * spacing[k];
        }
    }

    /// Cell anchor and per-axis fractions of x after clamping into the box.
    void locate(std::span<const double> x, int* base, double* frac, bool* clamped) const {
        bool did_clamp = false;
        for (int k = 0; k < dim(); ++k) {
            double xi = x[k];
            if (xi < domain.lo[k]) {
                xi = domain.lo[k];
                did_clamp = true;
            } else if (xi > domain.hi[k]) {
                xi = domain.hi[k];
                did_clamp = true;
            }
            const double cell = (xi - domain.lo[k]) / spacing[k];
            int i = static_cast<int>(cell);
            if (i > vertex_counts[k] - 2) i = vertex_counts[k] - 2;
            base[k] = i;
            frac[k] = cell - i;
        }
        if (clamped) *clamped = did_clamp;
    }
};

/// Multilinear (tensor-product) interpolation from the 2^d enclosing vertices.
inline double interpolate_level(const GridGeometry& g, std::span<const double> values,
                                std::span<const double> x, bool* clamped = nullptr) {
    const int d = g.dim();
    int base[3];
    double frac[3];
    g.locate(x, base, frac, clamped);
    double acc = 0.0;
    for (int corner = 0; corner < (1 << d); ++corner) {
        double w = 1.0;
        std::size_t flat = 0;
        for (int k = 0; k < d; ++k) {
            const int hi = (corner >> k) & 1;
            w *= hi ? frac[k] : 1.0 - frac[k];
            flat = flat * static_cast<std::size_t>(g.vertex_counts[k]) +
                   static_cast<std::size_t>(base[k] + hi);
        }
        const double v = values[flat];
        if (std::isnan(v)) throw numerical_error("interpolation: NaN grid vertex");
        acc += w * v;
    }
    return acc;
}

/// Whether the interpolation stencil of x reads any flagged vertex with
/// nonzero weight.
inline bool stencil_flagged(const GridGeometry& g, std::span<const std::uint8_t> flags,
                            std::span<const double> x) {
    const int d = g.dim();
    int base[3];
    double frac[3];
    g.locate(x, base, frac, nullptr);
    for (int corner = 0; corner < (1 << d); ++corner) {
        std::size_t flat = 0;
        bool zero_weight = false;
        for (int k = 0; k < d; ++k) {
            const int hi = (corner >> k) & 1;
            if ((hi ? frac[k] : 1.0 - frac[k]) == 0.0) zero_weight = true;
            flat = flat * static_cast<std::size_t>(g.vertex_counts[k]) +
                   static_cast<std::size_t>(base[k] + hi);
        }
        if (!zero_weight && flags[flat]) return true;
    }
    return false;
}

}  // namespace detail

/// Read-only view of one backward level. Valid only inside the streaming
/// callback that received it.
class GridLevelView {
public:
    GridLevelView(const detail::GridGeometry& g, std::span<const double> values,
                  std::span<const std::uint8_t> influence,
                  std::span<const std::uint8_t> clamped)
        : geometry_(&g), values_(values), influence_(influence), clamped_(clamped) {}

    double value_at(std::span<const double> x) const {
        return detail::interpolate_level(*geometry_, values_, x);
    }

    /// True when the stencil of x touches a vertex whose value was influenced
    /// by a clamped foot point at any later time (transitive, conservative).
    bool boundary_influenced_at(std::span<const double> x) const {
        return detail::stencil_flagged(*geometry_, influence_, x);
    }

    /// True when the stencil of x touches a vertex that had a clamped foot
    /// point in this level's update (a direct clamp event, not transitive).
    bool clamp_event_at(std::span<const double> x) const {
        return detail::stencil_flagged(*geometry_, clamped_, x);
    }

    std::span<const double> raw_values() const { return values_; }
    std::span<const std::uint8_t> raw_influence() const { return influence_; }
    std::span<const std::uint8_t> raw_clamped() const { return clamped_; }

private:
    const detail::GridGeometry* geometry_;
    std::span<const double> values_;
    std::span<const std::uint8_t> influence_;
    std::span<const std::uint8_t> clamped_;
};

/// Classical semi-Lagrangian backward sweep
///   V^N_i = g(x_i),
///   V^n_i = min_u [ dt L(x_i, u, t_n) + e^(-lambda dt) I[V^{n+1}](x_i + dt f(x_i, u, t_n)) ],
/// foot points clamped to the box. Levels are streamed through `on_level`
/// (n = N down to 0) with two rolling buffers, so fine grids never hold more
/// than two levels. Alongside the values a boundary-influence mask is
/// propagated: it marks every vertex whose value depends on a clamped foot.
template <class LevelFn>
void solve_sl_backward(const OCProblem& problem, const Box& domain,
                       std::span<const double> spacing, const TimeGrid& grid,
                       const ControlGrid& controls, LevelFn&& on_level, int threads = 1,
                       std::vector<std::size_t>* clamp_events = nullptr) {
    problem.validate();
    check_config(problem.state_dim == domain.dim(), "sl oracle: domain dimension mismatch");
    check_config(controls.dim() == problem.control_dim, "sl oracle: control dimension mismatch");
    const auto g = detail::GridGeometry::build(domain, spacing);
    const int N = grid.num_steps();
    const int M = controls.size();
    const double dt = grid.dt();
    const double disc = std::exp(-problem.discount * dt);

    std::vector<double> next(g.total_vertices), cur(g.total_vertices);
    std::vector<std::uint8_t> next_inf(g.total_vertices, 0), cur_inf(g.total_vertices, 0);
    std::vector<std::uint8_t> clamp_mask(g.total_vertices, 0);
    if (clamp_events) clamp_events->assign(N + 1, 0);

    parallel_for(g.total_vertices, threads, [&](std::size_t begin, std::size_t end) {
        double x[3];
        for (std::size_t i = begin; i < end; ++i) {
            g.vertex_coords(i, std::span<double>(x, g.dim()));
            next[i] = problem.terminal_cost(std::span<const double>(x, g.dim()));
        }
    });
    on_level(N, GridLevelView(g, next, next_inf, clamp_mask));

    for (int n = N - 1; n >= 0; --n) {
        const double t = grid.time(n);
        std::atomic<std::size_t> clamps{0};
        parallel_for(g.total_vertices, threads, [&](std::size_t begin, std::size_t end) {
            double x[3];
            double foot[3];
            for (std::size_t i = begin; i < end; ++i) {
                g.vertex_coords(i, std::span<double>(x, g.dim()));
                const std::span<const double> xs(x, g.dim());
                double best = std::numeric_limits<double>::infinity();
                bool influenced = false;
                bool any_clamp = false;
                for (int j = 0; j < M; ++j) {
                    problem.dynamics(xs, controls.point(j), t, std::span<double>(foot, g.dim()));
                    for (int k = 0; k < g.dim(); ++k) foot[k] = x[k] + dt * foot[k];
                    const std::span<const double> fs(foot, g.dim());
                    bool clamped = false;
                    const double interp = detail::interpolate_level(g, next, fs, &clamped);
                    if (clamped) {
                        clamps.fetch_add(1, std::memory_order_relaxed);
                        influenced = true;
                        any_clamp = true;
                    } else if (!influenced) {
                        influenced = detail::stencil_flagged(g, next_inf, fs);
                    }
                    const double v =
                        dt * problem.run_cost(xs, controls.point(j), t) + disc * interp;
                    if (v < best) best = v;
                }
                cur[i] = best;
                cur_inf[i] = influenced ? 1 : 0;
                clamp_mask[i] = any_clamp ? 1 : 0;
            }
        });
        if (clamp_events) (*clamp_events)[n] = clamps.load();
        std::swap(cur, next);
        std::swap(cur_inf, next_inf);
        on_level(n, GridLevelView(g, next, next_inf, clamp_mask));
    }
}

/// Regular-grid value function with all levels materialized; memory-guarded,
/// use solve_sl_backward for fine grids.
class GridValue {
public:
    const Box& domain() const { return geometry_.domain; }
    std::span<const double> spacing() const { return geometry_.spacing; }
    std::span<const int> vertex_counts() const { return geometry_.vertex_counts; }
    int dim() const { return geometry_.dim(); }
    int num_time_levels() const { return static_cast<int>(values_.size()); }
    std::size_t vertices_per_level() const { return geometry_.total_vertices; }

    const std::vector<double>& level_values(int n) const { return values_[n]; }

    double value_at(int n, std::span<const double> x) const {
        return detail::interpolate_level(geometry_, values_[n], x);
    }

    bool boundary_influenced_at(int n, std::span<const double> x) const {
        return detail::stencil_flagged(geometry_, influence_[n], x);
    }

    std::size_t clamp_events(int n) const { return clamp_events_[n]; }

    friend GridValue solve_sl_grid(const OCProblem& problem, const Box& domain,
                                   std::span<const double> spacing, const TimeGrid& grid,
                                   const ControlGrid& controls, int threads);

private:
    detail::GridGeometry geometry_;
    std::vector<std::vector<double>> values_;  // per time level, row-major vertices
    std::vector<std::vector<std::uint8_t>> influence_;
    std::vector<std::size_t> clamp_events_;
};

inline GridValue solve_sl_grid(const OCProblem& problem, const Box& domain,
                               std::span<const double> spacing, const TimeGrid& grid,
                               const ControlGrid& controls, int threads = 1) {
    const auto g = detail::GridGeometry::build(domain, spacing);
    const std::size_t doubles = g.total_vertices * (grid.num_steps() + 1);
    if (doubles > 150'000'000)
        throw resource_error("solve_sl_grid: grid too large to materialize (" +
                             std::to_string(doubles) + " values); use solve_sl_backward");
    GridValue gv;
    gv.geometry_ = g;
    gv.values_.resize(grid.num_steps() + 1);
    gv.influence_.resize(grid.num_steps() + 1);
    solve_sl_backward(
        problem, domain, spacing, grid, controls,
        [&](int n, const GridLevelView& view) {
            gv.values_[n].assign(view.raw_values().begin(), view.raw_values().end());
            gv.influence_[n].assign(view.raw_influence().begin(), view.raw_influence().end());
        },
        threads, &gv.clamp_events_);
    return gv;
}

inline double multilinear_interpolate(const GridValue& grid, int level,
                                      std::span<const double> x) {
    return grid.value_at(level, x);
}

/// Closed-form value function of the benchmark with dynamics (u, x1^2),
/// terminal cost -x2 and no running cost:
///   v(x, t) = -x2 - x1^2 (T-t) - (T-t)^3 / 3 - |x1| (T-t)^2.
inline double exact_value_test1(double x1, double x2, double t, double horizon) {
    const double tau = horizon - t;
    return -x2 - x1 * x1 * tau - tau * tau * tau / 3.0 - std::abs(x1) * tau * tau;
}

inline double exact_value_test1(std::span<const double> x, double t, double horizon) {
    return exact_value_test1(x[0], x[1], t, horizon);
}

/// Exhaustive minimization over all M^N control sequences; the independent
/// oracle for the tree DP on small instances.
template <StepFn S>
double brute_force_dp(const OCProblem& problem, std::span<const double> x0,
                      const TimeGrid& grid, const ControlGrid& controls, const S& step) {
    problem.validate();
    const int N = grid.num_steps();
    const int M = controls.size();
    double combos = 1.0;
    for (int n = 0; n < N; ++n) {
        combos *= M;
        if (combos > 1e6)
            throw resource_error("brute_force_dp: more than 1e6 control sequences");
    }
    const double dt = grid.dt();

    std::vector<int> seq(N, 0);
    std::vector<double> state(x0.begin(), x0.end());
    std::vector<double> next(problem.state_dim);
    double best = std::numeric_limits<double>::infinity();
    while (true) {
        state.assign(x0.begin(), x0.end());
        double cost = 0.0;
        for (int n = 0; n < N; ++n) {
            const double t = grid.time(n);
            cost += std::exp(-problem.discount * (t - grid.t0())) * dt *
                    problem.run_cost(state, controls.point(seq[n]), t);
            step(state, controls.point(seq[n]), t, std::span<double>(next));
            state.swap(next);
        }
        cost += std::exp(-problem.discount * (grid.horizon() - grid.t0())) *
                problem.terminal_cost(state);
        if (cost < best) best = cost;

        int k = N;
        bool done = N == 0;
        while (k > 0) {
            --k;
            if (++seq[k] < M) break;
            seq[k] = 0;
            if (k == 0) done = true;
        }
        if (done) break;
    }
    return best;
}

}  // namespace tsa
