// Batch front end: configure a benchmark problem, build the pruned tree,
// solve the value function, synthesize the feedback trajectory, and emit the
// CSV tables the convergence and comparison studies are built from.

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tsa/tsa.hpp"

namespace fs = std::filesystem;
using namespace tsa;

namespace {

// ---------------------------------------------------------------------------
// configuration
// ---------------------------------------------------------------------------

struct EpsSpec {
    // eps = value for absolute, dt^power otherwise
    bool is_power = false;
    double value = 0.0;
    double power = 2.0;

    double resolve(double dt) const { return is_power ? std::pow(dt, power) : value; }
};

struct RunConfig {
    std::string problem = "test1";
    std::optional<std::vector<double>> x0;
    double t0 = 0.0;
    double horizon = 1.0;
    double dt = 0.05;
    std::optional<int> num_steps;  // overrides dt when set (N=0 is a valid run)
    std::vector<double> dts;       // convergence studies
    EpsSpec eps;              // default: eps = 0 (no pruning)
    std::string controls;     // empty: registry default
    std::string scheme = "auto";     // explicit | implicit | auto
    std::string scope = "level";     // level | tree
    std::string strategy = "auto";   // auto | brute | hash | pca
    std::string coverage = "native"; // native | extended
    std::string reference = "auto";  // auto | exact | sl
    std::string dump = "all";        // all | summary
    std::string out_dir = "out";
    int threads = 1;
    int pde_points = 100;
    std::size_t max_nodes = 50'000'000;
    std::optional<Box> oracle_box;
    std::optional<double> oracle_dx;
    std::optional<double> oracle_dt;

    std::map<std::string, std::string> raw;
};

std::vector<double> parse_double_list(const std::string& key, const std::string& text) {
    std::vector<double> vals;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t pos = 0;
            vals.push_back(std::stod(item, &pos));
            if (pos != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw config_error("config key '" + key + "': cannot parse number '" + item + "'");
        }
    }
    if (vals.empty()) throw config_error("config key '" + key + "': empty list");
    return vals;
}

EpsSpec parse_eps(const std::string& text) {
    EpsSpec e;
    if (text == "0") {
        e.value = 0.0;
        return e;
    }
    if (text.rfind("dt", 0) == 0) {
        e.is_power = true;
        std::string exp = text.substr(2);
        if (!exp.empty() && exp[0] == '^') exp = exp.substr(1);
        e.power = exp.empty() ? 1.0 : std::stod(exp);
        return e;
    }
    e.value = std::stod(text);
    if (e.value < 0.0) throw config_error("config key 'eps': tolerance must be >= 0");
    return e;
}

Box parse_box(const std::string& text) {
    // axis-separated by ';', each axis lo:hi
    Box box;
    std::stringstream ss(text);
    std::string axis;
    while (std::getline(ss, axis, ';')) {
        const auto colon = axis.find(':');
        if (colon == std::string::npos)
            throw config_error("config key 'oracle_box': expected lo:hi per axis");
        box.lo.push_back(std::stod(axis.substr(0, colon)));
        box.hi.push_back(std::stod(axis.substr(colon + 1)));
    }
    box.validate();
    return box;
}

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
    cfg.raw[key] = value;
    if (key == "problem") cfg.problem = value;
    else if (key == "x0") cfg.x0 = parse_double_list(key, value);
    else if (key == "t0") cfg.t0 = std::stod(value);
    else if (key == "T") cfg.horizon = std::stod(value);
    else if (key == "dt") cfg.dt = std::stod(value);
    else if (key == "N") cfg.num_steps = std::stoi(value);
    else if (key == "dts") cfg.dts = parse_double_list(key, value);
    else if (key == "eps") cfg.eps = parse_eps(value);
    else if (key == "controls") cfg.controls = value;
    else if (key == "scheme") cfg.scheme = value;
    else if (key == "scope") cfg.scope = value;
    else if (key == "strategy") cfg.strategy = value;
    else if (key == "coverage") cfg.coverage = value;
    else if (key == "reference") cfg.reference = value;
    else if (key == "dump") cfg.dump = value;
    else if (key == "out_dir") cfg.out_dir = value;
    else if (key == "threads") cfg.threads = std::stoi(value);
    else if (key == "pde_points" || key == "d") cfg.pde_points = std::stoi(value);
    else if (key == "max_nodes") cfg.max_nodes = std::stoull(value);
    else if (key == "oracle_box") cfg.oracle_box = parse_box(value);
    else if (key == "oracle_dx") cfg.oracle_dx = std::stod(value);
    else if (key == "oracle_dt") cfg.oracle_dt = std::stod(value);
    else throw config_error("unknown config key '" + key + "'");
}

RunConfig load_config(const std::string& config_path,
                      const std::vector<std::string>& overrides) {
    RunConfig cfg;
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw config_error("cannot open config file '" + config_path + "'");
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            const auto first = line.find_first_not_of(" \t\r");
            if (first == std::string::npos) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw config_error(config_path + ":" + std::to_string(lineno) +
                                   ": expected key=value");
            auto trim = [](std::string s) {
                const auto b = s.find_first_not_of(" \t\r");
                const auto e = s.find_last_not_of(" \t\r");
                return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
            };
            apply_setting(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        }
    }
    for (const auto& ov : overrides) {
        const auto eq = ov.find('=');
        if (eq == std::string::npos)
            throw config_error("override '" + ov + "': expected key=value");
        apply_setting(cfg, ov.substr(0, eq), ov.substr(eq + 1));
    }
    return cfg;
}

// ---------------------------------------------------------------------------
// resolved run pieces
// ---------------------------------------------------------------------------

struct ResolvedRun {
    RegisteredProblem reg;
    std::vector<double> x0;
    ControlGrid controls = ControlGrid::scalar_values({0.0});
    bool implicit = false;
    PruneConfig prune;
    bool extended_coverage = false;
};

ControlGrid parse_controls(const std::string& text, int control_dim) {
    if (text.rfind("range:", 0) == 0 || text.rfind("rangen:", 0) == 0) {
        const bool by_count = text.rfind("rangen:", 0) == 0;
        const auto parts = parse_double_list("controls", text.substr(by_count ? 7 : 6));
        if (parts.size() != 3)
            throw config_error("config key 'controls': expected range:lo,hi,step");
        std::vector<double> lo(control_dim, parts[0]), hi(control_dim, parts[1]);
        if (by_count)
            return ControlGrid::hypercube_count(lo, hi, static_cast<int>(parts[2]));
        return ControlGrid::hypercube_step(lo, hi, parts[2]);
    }
    check_config(control_dim == 1,
                 "config key 'controls': explicit lists are for scalar controls; use "
                 "range:lo,hi,step");
    return ControlGrid::scalar_values(parse_double_list("controls", text));
}

ResolvedRun resolve(const RunConfig& cfg, double dt) {
    ResolvedRun run{make_registered_problem(cfg.problem, cfg.pde_points)};
    run.x0 = cfg.x0.value_or(run.reg.default_x0);
    check_config(static_cast<int>(run.x0.size()) == run.reg.problem.state_dim,
                 "x0 has " + std::to_string(run.x0.size()) + " components, problem needs " +
                     std::to_string(run.reg.problem.state_dim));
    run.controls = cfg.controls.empty()
                       ? run.reg.default_controls
                       : parse_controls(cfg.controls, run.reg.problem.control_dim);

    if (cfg.scheme == "auto") run.implicit = run.reg.prefer_implicit;
    else if (cfg.scheme == "implicit") run.implicit = true;
    else if (cfg.scheme == "explicit") run.implicit = false;
    else throw config_error("config key 'scheme': expected explicit, implicit or auto");
    check_config(!run.implicit || run.reg.linear.has_value(),
                 "scheme=implicit needs control-affine linear dynamics (heat/wave problems)");

    run.prune.tolerance = cfg.eps.resolve(dt);
    if (cfg.scope == "level") {
        run.prune.scope = PruneScope::SameLevel;
    } else if (cfg.scope == "tree") {
        run.prune.scope = PruneScope::CrossLevel;
    } else if (cfg.scope == "tree-any") {
        // whole-tree merging regardless of autonomy (reference-configuration
        // replication for time-dependent dynamics)
        run.prune.scope = PruneScope::CrossLevel;
        run.prune.cross_level_any_dynamics = true;
    } else {
        throw config_error("config key 'scope': expected level, tree or tree-any");
    }

    if (cfg.strategy == "auto") run.prune.strategy = NeighborStrategy::Auto;
    else if (cfg.strategy == "brute") run.prune.strategy = NeighborStrategy::BruteForce;
    else if (cfg.strategy == "hash") run.prune.strategy = NeighborStrategy::SpatialHash;
    else if (cfg.strategy == "pca") run.prune.strategy = NeighborStrategy::PcaProjection;
    else throw config_error("config key 'strategy': expected auto, brute, hash or pca");
    run.prune.max_nodes = cfg.max_nodes;

    if (cfg.coverage == "native") run.extended_coverage = false;
    else if (cfg.coverage == "extended") run.extended_coverage = true;
    else throw config_error("config key 'coverage': expected native or extended");
    if (run.prune.scope == PruneScope::CrossLevel) run.extended_coverage = true;
    check_config(!run.extended_coverage || run.reg.problem.autonomous ||
                     run.prune.cross_level_any_dynamics,
                 "coverage=extended requires an autonomous problem (or scope=tree-any)");
    return run;
}

TimeGrid make_time_grid(const RunConfig& cfg, double dt) {
    const double span = cfg.horizon - cfg.t0;
    check_config(span > 0.0, "config: T must exceed t0");
    if (cfg.num_steps) {
        check_config(*cfg.num_steps >= 0, "config: N must be >= 0");
        return TimeGrid(cfg.t0, cfg.horizon, *cfg.num_steps);
    }
    const double steps_real = span / dt;
    const int steps = static_cast<int>(std::llround(steps_real));
    check_config(steps >= 1 && std::abs(steps - steps_real) < 1e-6,
                 "config: dt must divide T - t0");
    return TimeGrid(cfg.t0, cfg.horizon, steps);
}

// one tree build + value solve, timed
struct SolveOutput {
    Tree tree;
    ValueTable values;
    BuildStats stats;
    double build_seconds = 0.0;
    double solve_seconds = 0.0;
};

template <StepFn S>
SolveOutput run_solve(const ResolvedRun& run, const S& step, const TimeGrid& grid,
                      int threads) {
    BuildStats stats;
    auto tree = build_tree(run.reg.problem, step, grid, run.controls, run.x0, run.prune,
                           &stats, threads);
    const auto t0 = std::chrono::steady_clock::now();
    auto values = run.extended_coverage
                      ? solve_value_extended(tree, run.reg.problem, grid, run.controls,
                                             threads)
                      : solve_value(tree, run.reg.problem, grid, run.controls, threads);
    const double solve_secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return SolveOutput{std::move(tree), std::move(values), stats, stats.total_seconds,
                       solve_secs};
}

template <class Fn>
void with_stepper(const ResolvedRun& run, double dt, Fn&& fn) {
    if (run.implicit && dt > 0.0) {
        fn(ImplicitEuler(*run.reg.linear, dt));
    } else {
        // also the degenerate N=0 path, where no step is ever taken
        fn(ExplicitEuler(run.reg.problem, dt));
    }
}

std::optional<int> zero_control_index(const ControlGrid& controls) {
    for (int j = 0; j < controls.size(); ++j) {
        bool all_zero = true;
        for (double c : controls.point(j)) all_zero = all_zero && c == 0.0;
        if (all_zero) return j;
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// per-level reference errors
// ---------------------------------------------------------------------------

std::vector<double> errors_vs_exact(const Tree& tree, const ValueTable& values,
                                    const TimeGrid& grid) {
    std::vector<double> e2(grid.num_steps() + 1);
    for (int n = 0; n <= grid.num_steps(); ++n)
        e2[n] = relative_l2_error_level(
            tree, values, n, [&](NodeRef, std::span<const double> x) {
                return exact_value_test1(x, grid.time(n), grid.horizon());
            });
    return e2;
}

// Streamed SL solve with per-tree-level interpolation at matching times.
// Returns E2 per tree level for each tree, plus clamp events whose stencil
// touches any comparison node.
struct SlComparisonResult {
    std::vector<std::vector<double>> e2;  // one vector per tree
    std::size_t clamp_events_in_region = 0;
};

SlComparisonResult sl_errors_at_tree_nodes(const OCProblem& problem, const Box& box,
                                           double oracle_dx, double oracle_dt,
                                           const ControlGrid& controls, const TimeGrid& grid,
                                           std::vector<const Tree*> trees,
                                           std::vector<const ValueTable*> tables,
                                           int threads) {
    const double span = grid.horizon() - grid.t0();
    const int oracle_steps = static_cast<int>(std::llround(span / oracle_dt));
    check_config(std::abs(oracle_steps * oracle_dt - span) < 1e-9,
                 "oracle_dt must divide T - t0");
    TimeGrid oracle_grid(grid.t0(), grid.horizon(), oracle_steps);

    // oracle level k <-> tree level n when times coincide
    std::map<int, int> level_of_oracle_level;
    for (int n = 0; n <= grid.num_steps(); ++n) {
        const double t = grid.time(n);
        const int k = static_cast<int>(std::llround((t - grid.t0()) / oracle_grid.dt()));
        check_config(k >= 0 && k <= oracle_steps &&
                         std::abs(oracle_grid.time(k) - t) < 1e-9,
                     "tree times must lie on the oracle time grid (choose oracle_dt "
                     "dividing dt)");
        level_of_oracle_level[k] = n;
    }

    SlComparisonResult result;
    result.e2.resize(trees.size());
    for (auto& v : result.e2) v.assign(grid.num_steps() + 1, 0.0);

    const std::vector<double> dx{oracle_dx, oracle_dx, oracle_dx};
    solve_sl_backward(
        problem, box, std::span<const double>(dx).first(box.dim()), oracle_grid, controls,
        [&](int k, const GridLevelView& view) {
            const auto hit = level_of_oracle_level.find(k);
            if (hit == level_of_oracle_level.end()) return;
            const int n = hit->second;
            for (std::size_t which = 0; which < trees.size(); ++which) {
                const Tree& tree = *trees[which];
                const ValueTable& table = *tables[which];
                const int first_level =
                    table.coverage() == ValueTable::Coverage::NativeLevel ? n : 0;
                std::vector<double> approx, reference;
                for (int lv = first_level; lv <= n; ++lv)
                    for (std::size_t i = 0; i < tree.level_size(lv); ++i) {
                        const NodeRef id{lv, static_cast<std::int32_t>(i)};
                        approx.push_back(table.value(n, id));
                        reference.push_back(view.value_at(tree.state(id)));
                        if (view.clamp_event_at(tree.state(id)))
                            ++result.clamp_events_in_region;
                    }
                result.e2[which][n] = relative_l2_error(approx, reference);
            }
        },
        threads);
    return result;
}

// ---------------------------------------------------------------------------
// commands
// ---------------------------------------------------------------------------

int cmd_solve(const RunConfig& cfg) {
    const TimeGrid grid = make_time_grid(cfg, cfg.dt);
    const ResolvedRun run = resolve(cfg, grid.dt());
    fs::create_directories(cfg.out_dir);

    int rc = 0;
    with_stepper(run, grid.dt(), [&](const auto& step) {
        auto out = run_solve(run, step, grid, cfg.threads);
        auto traj = synthesize_trajectory(out.tree, out.values, run.reg.problem, grid,
                                          run.controls);
        auto controlled = evaluate_cost(run.reg.problem, grid, run.x0,
                                        controls_from_indices(run.controls,
                                                              traj.control_indices),
                                        step);

        std::optional<CostCurve> uncontrolled;
        if (auto zero = zero_control_index(run.controls)) {
            std::vector<std::vector<double>> zero_seq(
                grid.num_steps(),
                std::vector<double>(run.controls.point(*zero).begin(),
                                    run.controls.point(*zero).end()));
            uncontrolled = evaluate_cost(run.reg.problem, grid, run.x0, zero_seq, step);
        }

        const std::string dir = cfg.out_dir + "/";
        if (cfg.dump == "all") {
            // the native slice of an extended table is still per-node values
            auto tree_csv = open_csv(dir + "tree.csv");
            write_tree_csv(tree_csv, out.tree, &out.values);
        }
        {
            auto f = open_csv(dir + "trajectory.csv");
            write_trajectory_csv(f, traj, grid);
        }
        {
            auto f = open_csv(dir + "build_stats.csv");
            write_build_stats_csv(f, out.stats);
        }
        {
            auto f = open_csv(dir + "cost_controlled.csv");
            write_cost_curve_csv(f, controlled, grid);
        }
        if (uncontrolled) {
            auto f = open_csv(dir + "cost_uncontrolled.csv");
            write_cost_curve_csv(f, *uncontrolled, grid);
        }

        const double v0 = out.values.value(0, {0, 0});
        std::ofstream summary(dir + "summary.txt");
        summary << "problem=" << cfg.problem << "\n"
                << "state_dim=" << run.reg.problem.state_dim << "\n"
                << "controls=" << run.controls.size() << "\n"
                << "dt=" << csv_double(grid.dt()) << "\n"
                << "T=" << csv_double(grid.horizon()) << "\n"
                << "steps=" << grid.num_steps() << "\n"
                << "eps=" << csv_double(run.prune.tolerance) << "\n"
                << "scheme=" << (run.implicit ? "implicit" : "explicit") << "\n"
                << "tree_nodes=" << out.tree.total_nodes() << "\n"
                << "merged=" << out.stats.total_merged() << "\n"
                << "build_seconds=" << csv_double(out.build_seconds) << "\n"
                << "solve_seconds=" << csv_double(out.solve_seconds) << "\n"
                << "v0=" << csv_double(v0) << "\n"
                << "trajectory_cost=" << csv_double(traj.total_cost) << "\n"
                << "controlled_cost=" << csv_double(controlled.total) << "\n";
        if (uncontrolled) {
            summary << "uncontrolled_cost=" << csv_double(uncontrolled->total) << "\n";
            bool below = true;
            for (std::size_t n = 0; n < controlled.with_terminal.size(); ++n)
                below = below &&
                        controlled.with_terminal[n] <= uncontrolled->with_terminal[n] + 1e-9;
            summary << "controlled_below_uncontrolled=" << (below ? 1 : 0) << "\n";
        }

        std::cout << "problem " << cfg.problem << ": |T| = " << out.tree.total_nodes()
                  << ", V0 = " << v0 << ", J* = " << controlled.total;
        if (uncontrolled) std::cout << ", J(u=0) = " << uncontrolled->total;
        std::cout << ", build+solve "
                  << csv_double(out.build_seconds + out.solve_seconds) << " s\n";
    });
    return rc;
}

int cmd_convergence(const RunConfig& cfg) {
    check_config(!cfg.dts.empty(), "convergence: provide dts=dt1,dt2,... (decreasing)");
    for (std::size_t i = 1; i < cfg.dts.size(); ++i)
        check_config(cfg.dts[i] < cfg.dts[i - 1], "convergence: dts must strictly decrease");
    fs::create_directories(cfg.out_dir);

    const ResolvedRun probe = resolve(cfg, cfg.dts.front());
    std::string reference = cfg.reference;
    if (reference == "auto") reference = probe.reg.has_exact_reference ? "exact" : "sl";
    check_config(reference == "exact" || reference == "sl",
                 "config key 'reference': expected auto, exact or sl");
    check_config(reference != "exact" || probe.reg.has_exact_reference,
                 "reference=exact is only available for test1");
    check_config(reference != "sl" || probe.reg.oracle_box.has_value(),
                 "reference=sl needs a grid-oracle default (dim <= 3 problems)");

    std::vector<ConvergenceRow> rows;
    for (double dt : cfg.dts) {
        const TimeGrid grid = make_time_grid(cfg, dt);
        const ResolvedRun run = resolve(cfg, grid.dt());
        ConvergenceRow row;
        row.dt = grid.dt();
        with_stepper(run, grid.dt(), [&](const auto& step) {
            auto out = run_solve(run, step, grid, cfg.threads);
            row.tree_nodes = out.tree.total_nodes();
            row.cpu_seconds = out.build_seconds + out.solve_seconds;
            std::vector<double> e2;
            if (reference == "exact") {
                e2 = errors_vs_exact(out.tree, out.values, grid);
            } else {
                const Box box = cfg.oracle_box.value_or(*run.reg.oracle_box);
                auto sl = sl_errors_at_tree_nodes(
                    run.reg.problem, box, cfg.oracle_dx.value_or(run.reg.oracle_dx),
                    cfg.oracle_dt.value_or(run.reg.oracle_dt), run.controls, grid,
                    {&out.tree}, {&out.values}, cfg.threads);
                e2 = sl.e2.front();
            }
            row.err22 = err_22(e2, grid.dt());
            row.errinf2 = err_inf2(e2);
        });
        row.order22 = row.orderinf2 = std::nan("");
        if (!rows.empty()) {
            const double ratio = rows.back().dt / row.dt;
            row.order22 = convergence_order(rows.back().err22, row.err22, ratio);
            row.orderinf2 = convergence_order(rows.back().errinf2, row.errinf2, ratio);
        }
        rows.push_back(row);
        std::cout << "dt = " << csv_double(row.dt) << ": |T| = " << row.tree_nodes
                  << ", Err22 = " << row.err22 << ", ErrInf2 = " << row.errinf2;
        if (!std::isnan(row.order22))
            std::cout << ", order22 = " << row.order22 << ", orderInf2 = " << row.orderinf2;
        std::cout << ", cpu " << csv_double(row.cpu_seconds) << " s\n";
    }
    auto f = open_csv(cfg.out_dir + "/convergence.csv");
    write_convergence_csv(f, rows);
    return 0;
}

int cmd_compare(const RunConfig& cfg) {
    const TimeGrid grid = make_time_grid(cfg, cfg.dt);
    const ResolvedRun run = resolve(cfg, grid.dt());
    fs::create_directories(cfg.out_dir);

    std::string reference = cfg.reference;
    if (reference == "auto") reference = run.reg.has_exact_reference ? "exact" : "sl";
    const bool oracle_available =
        run.reg.oracle_box.has_value() && run.reg.problem.state_dim <= 3;
    check_config(reference != "sl" || oracle_available,
                 "reference=sl needs a grid oracle (dim <= 3)");

    with_stepper(run, grid.dt(), [&](const auto& step) {
        // pruned variant as configured, plus the unpruned tree when feasible
        auto pruned = run_solve(run, step, grid, cfg.threads);

        std::optional<SolveOutput> full;
        const auto full_nodes =
            full_tree_cardinality(run.controls.size(), grid.num_steps());
        if (run.prune.tolerance > 0.0 && full_nodes <= run.prune.max_nodes) {
            ResolvedRun unpruned = run;
            unpruned.prune.tolerance = 0.0;
            full = run_solve(unpruned, step, grid, cfg.threads);
        }

        std::vector<std::vector<double>> curves;
        std::vector<std::string> names;
        std::size_t clamp_events = 0;

        if (reference == "exact") {
            if (full) {
                curves.push_back(errors_vs_exact(full->tree, full->values, grid));
                names.push_back("e2_tsa_unpruned");
            }
            curves.push_back(errors_vs_exact(pruned.tree, pruned.values, grid));
            names.push_back("e2_tsa_pruned");
            if (oracle_available) {
                // classical values projected onto the pruned tree's nodes,
                // compared against the exact solution there
                const Box box = cfg.oracle_box.value_or(*run.reg.oracle_box);
                const double odx = cfg.oracle_dx.value_or(run.reg.oracle_dx);
                const double odt = cfg.oracle_dt.value_or(run.reg.oracle_dt);
                const double span = grid.horizon() - grid.t0();
                TimeGrid ogrid(grid.t0(), grid.horizon(),
                               static_cast<int>(std::llround(span / odt)));
                std::vector<double> sl_curve(grid.num_steps() + 1, 0.0);
                const std::vector<double> dx{odx, odx, odx};
                std::map<int, int> tree_level;
                for (int n = 0; n <= grid.num_steps(); ++n)
                    tree_level[static_cast<int>(
                        std::llround((grid.time(n) - grid.t0()) / ogrid.dt()))] = n;
                solve_sl_backward(
                    run.reg.problem, box, std::span<const double>(dx).first(box.dim()),
                    ogrid, run.controls,
                    [&](int k, const GridLevelView& view) {
                        auto hit = tree_level.find(k);
                        if (hit == tree_level.end()) return;
                        const int n = hit->second;
                        std::vector<double> approx, ref;
                        for (std::size_t i = 0; i < pruned.tree.level_size(n); ++i) {
                            const NodeRef id{n, static_cast<std::int32_t>(i)};
                            approx.push_back(view.value_at(pruned.tree.state(id)));
                            ref.push_back(exact_value_test1(pruned.tree.state(id),
                                                            grid.time(n), grid.horizon()));
                            if (view.clamp_event_at(pruned.tree.state(id))) ++clamp_events;
                        }
                        sl_curve[n] = relative_l2_error(approx, ref);
                    },
                    cfg.threads);
                curves.push_back(std::move(sl_curve));
                names.push_back("e2_sl");
            }
        } else {
            std::vector<const Tree*> trees;
            std::vector<const ValueTable*> tables;
            std::vector<std::string> pending;
            if (full) {
                trees.push_back(&full->tree);
                tables.push_back(&full->values);
                pending.push_back("e2_tsa_unpruned");
            }
            trees.push_back(&pruned.tree);
            tables.push_back(&pruned.values);
            pending.push_back("e2_tsa_pruned");
            const Box box = cfg.oracle_box.value_or(*run.reg.oracle_box);
            auto sl = sl_errors_at_tree_nodes(
                run.reg.problem, box, cfg.oracle_dx.value_or(run.reg.oracle_dx),
                cfg.oracle_dt.value_or(run.reg.oracle_dt), run.controls, grid, trees,
                tables, cfg.threads);
            curves = std::move(sl.e2);
            names = std::move(pending);
            clamp_events = sl.clamp_events_in_region;
        }

        auto f = open_csv(cfg.out_dir + "/compare.csv");
        f << "n,t";
        for (const auto& name : names) f << ',' << name;
        f << '\n';
        for (int n = 0; n <= grid.num_steps(); ++n) {
            f << n << ',' << csv_double(grid.time(n));
            for (const auto& c : curves) f << ',' << csv_double(c[n]);
            f << '\n';
        }

        std::cout << "compare " << cfg.problem << " (reference " << reference << ")";
        if (clamp_events > 0)
            std::cout << " [warning: " << clamp_events
                      << " oracle clamp events in the comparison region]";
        std::cout << "\n";
        for (std::size_t c = 0; c < curves.size(); ++c) {
            std::cout << "  " << names[c] << ": max " << err_inf2(curves[c]) << "\n";
        }
    });
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tree-structure dynamic programming solver for finite-horizon "
                 "optimal control"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("-c,--config", config_path, "flat key=value config file");
        sub->add_option("settings", overrides, "key=value overrides");
    };

    auto* solve = app.add_subcommand(
        "solve", "build the tree, solve the value function, synthesize the trajectory");
    auto* convergence = app.add_subcommand(
        "convergence", "error tables over a list of time steps (dts=...)");
    auto* compare = app.add_subcommand(
        "compare", "per-level errors of pruned/unpruned trees against a reference");
    add_common(solve);
    add_common(convergence);
    add_common(compare);

    CLI11_PARSE(app, argc, argv);

    try {
        const RunConfig cfg = load_config(config_path, overrides);
        if (solve->parsed()) return cmd_solve(cfg);
        if (convergence->parsed()) return cmd_convergence(cfg);
        if (compare->parsed()) return cmd_compare(cfg);
        return 2;
    } catch (const config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const resource_error& e) {
        std::cerr << "resource cap: " << e.what() << "\n";
        return 4;
    } catch (const structural_error& e) {
        std::cerr << "structural error: " << e.what() << "\n";
        return 3;
    } catch (const numerical_error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
