#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tsa/common.hpp"
#include "tsa/oracle.hpp"
#include "tsa/stepper.hpp"
#include "tsa/types.hpp"

namespace tsa {

/// Weights and transform of the benchmark cost functionals
///   L(y, u) = d1 * phi(||y||^2) + gamma * |u|^2,
///   g(y)    = d2 * phi(||y||^2),
/// where ||.||^2 is norm_weight * sum y_i^2 (the discrete L2 norm for PDE
/// semi-discretizations, the plain squared norm otherwise).
struct CostSpec {
    double state_weight = 0.0;     // delta_1
    double terminal_weight = 1.0;  // delta_2
    double control_weight = 0.0;   // gamma
    std::function<double(double)> transform;  // phi; identity when empty
    double norm_weight = 1.0;

    void validate() const {
        check_config(state_weight >= 0.0 && terminal_weight >= 0.0 && control_weight >= 0.0,
                     "CostSpec: weights must be nonnegative");
        check_config(norm_weight > 0.0, "CostSpec: norm weight must be positive");
    }

    double phi(double s) const { return transform ? transform(s) : s; }

    double state_term(std::span<const double> y) const {
        double s = 0.0;
        for (double v : y) s += v * v;
        return phi(norm_weight * s);
    }

    RunningCostFn running_cost() const {
        validate();
        if (state_weight == 0.0 && control_weight == 0.0) return nullptr;
        return [spec = *this](std::span<const double> y, std::span<const double> u,
                              double) -> double {
            double uu = 0.0;
            for (double v : u) uu += v * v;
            return spec.state_weight * spec.state_term(y) + spec.control_weight * uu;
        };
    }

    TerminalCostFn terminal_cost() const {
        validate();
        return [spec = *this](std::span<const double> y) -> double {
            return spec.terminal_weight * spec.state_term(y);
        };
    }
};

/// Piecewise cost transform used by the non-quadratic wave benchmark:
/// sin(pi |s|) up to 0.5, flat 1 up to 1, then (|s|-1)^2 + 1. Continuous and
/// even.
inline double phi_nonquadratic(double s) {
    const double a = std::abs(s);
    if (a <= 0.5) return std::sin(std::numbers::pi * a);
    if (a <= 1.0) return 1.0;
    return (a - 1.0) * (a - 1.0) + 1.0;
}

/// Dynamics (u, x1^2) with terminal cost -x2: the benchmark whose value
/// function is known in closed form (exact_value_test1).
inline OCProblem make_test1() {
    OCProblem p;
    p.state_dim = 2;
    p.control_dim = 1;
    p.autonomous = true;
    p.dynamics = [](std::span<const double> x, std::span<const double> u, double,
                    std::span<double> out) {
        out[0] = u[0];
        out[1] = x[0] * x[0];
    };
    p.terminal_cost = [](std::span<const double> x) { return -x[1]; };
    return p;
}

/// Van der Pol oscillator under control,
///   f(x, u) = (x2, w (1 - x1^2) x2 - x1 + u), w = 0.15.
/// Case 1: terminal cost only (d2 = 1). Case 2: d1 = d2 = 1, gamma = 0.01.
/// Case 3: the frequency becomes a second control, (w, u) in U x U, with
/// d1 = gamma = 0.1, d2 = 1.
inline OCProblem make_vdp(int case_id) {
    constexpr double omega = 0.15;
    OCProblem p;
    p.state_dim = 2;
    p.autonomous = true;
    CostSpec cost;
    switch (case_id) {
        case 1:
            p.control_dim = 1;
            cost = CostSpec{0.0, 1.0, 0.0, nullptr, 1.0};
            break;
        case 2:
            p.control_dim = 1;
            cost = CostSpec{1.0, 1.0, 0.01, nullptr, 1.0};
            break;
        case 3:
            p.control_dim = 2;
            cost = CostSpec{0.1, 1.0, 0.1, nullptr, 1.0};
            break;
        default:
            throw config_error("make_vdp: unknown case " + std::to_string(case_id));
    }
    if (case_id == 3) {
        p.dynamics = [](std::span<const double> x, std::span<const double> u, double,
                        std::span<double> out) {
            out[0] = x[1];
            out[1] = u[0] * (1.0 - x[0] * x[0]) * x[1] - x[0] + u[1];
        };
    } else {
        p.dynamics = [](std::span<const double> x, std::span<const double> u, double,
                        std::span<double> out) {
            out[0] = x[1];
            out[1] = omega * (1.0 - x[0] * x[0]) * x[1] - x[0] + u[0];
        };
    }
    p.running_cost = cost.running_cost();
    p.terminal_cost = cost.terminal_cost();
    return p;
}

/// Damped oscillator with sinusoidal forcing, the non-autonomous benchmark:
///   f(x, u, t) = (x2, -w x2 - w^2 x1 + sin(w t) + u), w = pi/2,
/// with cost weights d1 = gamma = 0.1, d2 = 1.
inline OCProblem make_driven_oscillator() {
    const double omega = std::numbers::pi / 2.0;
    OCProblem p;
    p.state_dim = 2;
    p.control_dim = 1;
    p.autonomous = false;
    p.dynamics = [omega](std::span<const double> x, std::span<const double> u, double t,
                         std::span<double> out) {
        out[0] = x[1];
        out[1] = -omega * x[1] - omega * omega * x[0] + std::sin(omega * t) + u[0];
    };
    CostSpec cost{0.1, 1.0, 0.1, nullptr, 1.0};
    p.running_cost = cost.running_cost();
    p.terminal_cost = cost.terminal_cost();
    return p;
}

/// Periodic attractor of the uncontrolled driven oscillator,
///   x1 = sin(w t - pi/2) / w^2 = -cos(w t) / w^2,  x2 = dx1/dt;
/// the unique steady response of x'' + w x' + w^2 x = sin(w t).
inline std::array<double, 2> driven_oscillator_cycle_limit(double t,
                                                           double omega = std::numbers::pi /
                                                                          2.0) {
    return {std::sin(omega * t - std::numbers::pi / 2.0) / (omega * omega),
            std::cos(omega * t - std::numbers::pi / 2.0) / omega};
}

/// A control-affine PDE semi-discretization bundled with its optimal control
/// problem and the sampled initial state.
struct SemiDiscreteProblem {
    LinearAffineDynamics linear;
    OCProblem problem;
    std::vector<double> x0;
    double dx = 0.0;
};

enum class HeatProfile { Smooth, Indicator };

inline double heat_profile_value(HeatProfile profile, double x) {
    return profile == HeatProfile::Smooth ? -x * x + x
                                          : (x >= 0.25 && x <= 0.75 ? 1.0 : 0.0);
}

/// Heat equation y_t = sigma y_xx + y0(x) u(t) on [0, 1] with homogeneous
/// Dirichlet conditions, discretized at d interior points (dx = 1/(d+1)):
///   A = (sigma / dx^2) tridiag(1, -2, 1),  B_i = y0(x_i).
/// Cost: integral of ||y||^2 + 0.01 |u|^2 plus terminal ||y(T)||^2, all in
/// the dx-weighted discrete L2 norm.
inline SemiDiscreteProblem heat_semidiscretization(int interior_points, double sigma,
                                                   HeatProfile profile) {
    check_config(interior_points >= 2, "heat_semidiscretization: need at least 2 points");
    check_config(sigma > 0.0, "heat_semidiscretization: diffusivity must be positive");
    const int d = interior_points;
    const double dx = 1.0 / (d + 1);
    std::vector<double> b(d);
    for (int i = 0; i < d; ++i) b[i] = heat_profile_value(profile, (i + 1) * dx);

    SemiDiscreteProblem sp{
        LinearAffineDynamics::laplacian_1d(d, sigma / (dx * dx), b), OCProblem{}, b, dx};
    CostSpec cost{1.0, 1.0, 0.01, nullptr, dx};
    sp.problem.state_dim = d;
    sp.problem.control_dim = 1;
    sp.problem.autonomous = true;
    sp.problem.state_norm_weight = dx;
    sp.problem.dynamics = sp.linear.as_dynamics_fn();
    sp.problem.running_cost = cost.running_cost();
    sp.problem.terminal_cost = cost.terminal_cost();
    return sp;
}

/// Wave equation w_tt = c w_xx + chi_actuator(x) u(t) on (0, 1), written as a
/// first-order system for y = (w, w_t) of dimension 2d:
///   A = [[0, I], [c D2, 0]],  B = (0, chi_actuator(x_i)).
/// phi is the cost transform (identity for the quadratic case).
inline SemiDiscreteProblem wave_semidiscretization(
    int interior_points, double wave_speed, double actuator_lo, double actuator_hi,
    std::function<double(double)> w0, std::function<double(double)> w1,
    std::function<double(double)> phi = nullptr) {
    check_config(interior_points >= 2, "wave_semidiscretization: need at least 2 points");
    check_config(wave_speed > 0.0, "wave_semidiscretization: wave speed must be positive");
    check_config(actuator_lo >= 0.0 && actuator_hi <= 1.0 && actuator_lo < actuator_hi,
                 "wave_semidiscretization: actuator interval must lie inside (0, 1)");
    const int d = interior_points;
    const double dx = 1.0 / (d + 1);
    std::vector<double> actuator(d);
    std::vector<double> x0(2 * d, 0.0);
    for (int i = 0; i < d; ++i) {
        const double x = (i + 1) * dx;
        actuator[i] = (x >= actuator_lo && x <= actuator_hi) ? 1.0 : 0.0;
        x0[i] = w0 ? w0(x) : 0.0;
        x0[d + i] = w1 ? w1(x) : 0.0;
    }

    SemiDiscreteProblem sp{LinearAffineDynamics::wave_block(d, wave_speed, dx, actuator),
                           OCProblem{}, std::move(x0), dx};
    CostSpec cost{1.0, 1.0, 0.01, std::move(phi), dx};
    sp.problem.state_dim = 2 * d;
    sp.problem.control_dim = 1;
    sp.problem.autonomous = true;
    sp.problem.state_norm_weight = dx;
    sp.problem.dynamics = sp.linear.as_dynamics_fn();
    sp.problem.running_cost = cost.running_cost();
    sp.problem.terminal_cost = cost.terminal_cost();
    return sp;
}

inline SemiDiscreteProblem wave_benchmark(int interior_points, bool quadratic) {
    return wave_semidiscretization(
        interior_points, 0.5, 0.4, 0.6,
        [](double x) { return std::sin(std::numbers::pi * x); }, nullptr,
        quadratic ? std::function<double(double)>{} :
                    std::function<double(double)>{phi_nonquadratic});
}

/// A ready-to-run benchmark: problem, default discretizations, the reference
/// available for error studies, and the linear form when implicit stepping
/// applies.
struct RegisteredProblem {
    std::string name;
    OCProblem problem;
    std::vector<double> default_x0;
    ControlGrid default_controls = ControlGrid::scalar_values({0.0});
    bool prefer_implicit = false;
    std::optional<LinearAffineDynamics> linear;

    // error-study reference
    bool has_exact_reference = false;  // closed-form value function
    std::optional<Box> oracle_box;     // grid-oracle defaults when dim <= 3
    double oracle_dx = 0.05;
    double oracle_dt = 0.05;
};

/// Names: test1, vdp1, vdp2, vdp3, driven, heat-smooth, heat-indicator,
/// wave-quadratic, wave-phi. `pde_points` sets the number of interior mesh
/// points of the PDE benchmarks (heat dimension d, wave dimension 2d).
inline RegisteredProblem make_registered_problem(const std::string& name, int pde_points = 100) {
    RegisteredProblem r;
    r.name = name;
    if (name == "test1") {
        r.problem = make_test1();
        r.default_x0 = {-0.5, 0.5};
        r.default_controls = ControlGrid::scalar_values({-1.0, 1.0});
        r.has_exact_reference = true;
        r.oracle_box = Box{{-4.0, -4.0}, {4.0, 4.0}};
        r.oracle_dx = 0.05;
        r.oracle_dt = 0.05;
    } else if (name == "vdp1" || name == "vdp2" || name == "vdp3") {
        const int case_id = name[3] - '0';
        r.problem = make_vdp(case_id);
        r.default_x0 = case_id == 3 ? std::vector<double>{-0.5, 0.5}
                                    : std::vector<double>{-1.0, 1.0};
        if (case_id == 3) {
            const double lo[2] = {-1.0, -1.0};
            const double hi[2] = {1.0, 1.0};
            r.default_controls = ControlGrid::hypercube_count(lo, hi, 10);
        } else {
            r.default_controls = ControlGrid::scalar_values({-1.0, 1.0});
        }
        r.oracle_box = Box{{-3.0, -3.0}, {3.0, 3.0}};
        r.oracle_dx = 0.01;
        r.oracle_dt = 0.01;
    } else if (name == "driven") {
        r.problem = make_driven_oscillator();
        r.default_x0 = {-0.5, 0.5};
        r.default_controls = ControlGrid::scalar_values({-1.0, 0.0, 1.0});
        r.oracle_box = Box{{-3.0, -3.0}, {3.0, 3.0}};
        r.oracle_dx = 0.01;
        r.oracle_dt = 0.01;
    } else if (name == "heat-smooth" || name == "heat-indicator") {
        auto sp = heat_semidiscretization(pde_points, 0.1,
                                          name == "heat-smooth" ? HeatProfile::Smooth
                                                                : HeatProfile::Indicator);
        r.problem = std::move(sp.problem);
        r.default_x0 = std::move(sp.x0);
        r.linear = std::move(sp.linear);
        r.default_controls = ControlGrid::scalar_values({-1.0, 0.0, 1.0});
        r.prefer_implicit = true;
    } else if (name == "wave-quadratic" || name == "wave-phi") {
        check_config(pde_points % 2 == 0, "wave benchmark: pde_points must be even (state "
                                          "dimension is 2d)");
        auto sp = wave_benchmark(pde_points / 2, name == "wave-quadratic");
        r.problem = std::move(sp.problem);
        r.default_x0 = std::move(sp.x0);
        r.linear = std::move(sp.linear);
        r.default_controls = ControlGrid::scalar_values({-1.0, 0.0, 1.0});
        r.prefer_implicit = true;
    } else {
        throw config_error("unknown problem '" + name +
                           "' (expected test1, vdp1, vdp2, vdp3, driven, heat-smooth, "
                           "heat-indicator, wave-quadratic, wave-phi)");
    }
    return r;
}

}  // namespace tsa
