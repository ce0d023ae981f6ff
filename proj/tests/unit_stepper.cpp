#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <vector>

#include "tsa/problems.hpp"
#include "tsa/stepper.hpp"

using namespace tsa;

TEST_CASE("explicit Euler step on the closed-form benchmark dynamics") {
    auto p = make_test1();
    const std::vector<double> u_pos{1.0}, u_neg{-1.0}, u_zero{0.0};

    auto a = explicit_euler_step(p, std::vector<double>{0.0, 0.0}, u_pos, 0.0, 0.1);
    CHECK(a[0] == Catch::Approx(0.1));
    CHECK(a[1] == 0.0);

    // hand-evaluated: x2' = 0.5 + 0.05 * 0.25
    auto b = explicit_euler_step(p, std::vector<double>{-0.5, 0.5}, u_neg, 0.0, 0.05);
    CHECK(b[0] == Catch::Approx(-0.55));
    CHECK(b[1] == Catch::Approx(0.5125));

    auto c = explicit_euler_step(p, std::vector<double>{0.3, -0.7}, u_zero, 0.0, 0.0);
    CHECK(c[0] == 0.3);
    CHECK(c[1] == -0.7);
}

TEST_CASE("explicit Euler reports non-finite states") {
    OCProblem p;
    p.state_dim = 1;
    p.dynamics = [](std::span<const double> x, std::span<const double>, double,
                    std::span<double> out) { out[0] = x[0] * x[0]; };
    p.terminal_cost = [](std::span<const double>) { return 0.0; };
    const std::vector<double> huge{1e200};
    const std::vector<double> u{0.0};
    CHECK_THROWS_AS(explicit_euler_step(p, huge, u, 0.0, 1e10), numerical_error);
}

TEST_CASE("implicit Euler reduces to an explicit control push when A = 0") {
    auto dyn = LinearAffineDynamics::dense(2, {0, 0, 0, 0}, {1.0, 2.0});
    ImplicitEuler solver(dyn, 0.25);
    auto y = implicit_euler_step(solver, std::vector<double>{3.0, -1.0}, std::vector<double>{2.0});
    CHECK(y[0] == Catch::Approx(3.0 + 0.25 * 2.0 * 1.0));
    CHECK(y[1] == Catch::Approx(-1.0 + 0.25 * 2.0 * 2.0));
}

TEST_CASE("implicit Euler dense 2x2 matches a Cramer-rule solve") {
    // A = [[-2, 1], [1, -2]], x = e1, u = 0: solve (I - dt A) y = x by hand
    const double dt = 0.1;
    auto dyn = LinearAffineDynamics::dense(2, {-2, 1, 1, -2}, {0.0, 0.0});
    ImplicitEuler solver(dyn, dt);
    auto y = implicit_euler_step(solver, std::vector<double>{1.0, 0.0}, std::vector<double>{0.0});
    // M = [[1.2, -0.1], [-0.1, 1.2]], det = 1.43
    const double det = 1.2 * 1.2 - 0.1 * 0.1;
    CHECK(y[0] == Catch::Approx(1.2 / det).epsilon(1e-12));
    CHECK(y[1] == Catch::Approx(0.1 / det).epsilon(1e-12));
}

TEST_CASE("zero is a fixed point of the homogeneous implicit map") {
    auto dyn = LinearAffineDynamics::laplacian_1d(50, 100.0, std::vector<double>(50, 0.0));
    ImplicitEuler solver(dyn, 0.05);
    auto y = implicit_euler_step(solver, std::vector<double>(50, 0.0), std::vector<double>{1.0});
    for (double v : y) CHECK(v == 0.0);
}

namespace {

double implicit_residual(const LinearAffineDynamics& dyn, double dt,
                         std::span<const double> x, std::span<const double> u,
                         std::span<const double> y) {
    // (I - dt A) y - x - dt B u
    std::vector<double> ay(y.size());
    dyn.apply_a(y, ay);
    std::vector<double> bu(y.size(), 0.0);
    dyn.add_bu(u, bu);
    double norm = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double r = y[i] - dt * ay[i] - x[i] - dt * bu[i];
        norm += r * r;
    }
    return std::sqrt(norm);
}

}  // namespace

TEST_CASE("implicit step residual stays below 1e-10 (1 + |x|) on benchmark matrices") {
    const double dt = 0.05;
    std::vector<double> u{0.7};

    SECTION("heat tridiagonal, d = 200") {
        auto sp = heat_semidiscretization(200, 0.1, HeatProfile::Smooth);
        ImplicitEuler solver(sp.linear, dt);
        std::vector<double> y(sp.x0.size());
        solver(sp.x0, u, 0.0, y);
        CHECK(implicit_residual(sp.linear, dt, sp.x0, u, y) <=
              1e-10 * (1.0 + euclidean_norm(sp.x0)));
    }

    SECTION("wave block, 2d = 400") {
        auto sp = wave_benchmark(200, true);
        ImplicitEuler solver(sp.linear, dt);
        std::vector<double> y(sp.x0.size());
        solver(sp.x0, u, 0.0, y);
        CHECK(implicit_residual(sp.linear, dt, sp.x0, u, y) <=
              1e-10 * (1.0 + euclidean_norm(sp.x0)));
    }

    SECTION("dense random-ish 8x8") {
        std::vector<double> a(64);
        for (int i = 0; i < 64; ++i) a[i] = std::sin(3.7 * i) / 4.0;
        std::vector<double> b(8);
        for (int i = 0; i < 8; ++i) b[i] = std::cos(1.3 * i);
        auto dyn = LinearAffineDynamics::dense(8, a, b);
        ImplicitEuler solver(dyn, dt);
        std::vector<double> x(8, 1.0), y(8);
        solver(x, u, 0.0, y);
        CHECK(implicit_residual(dyn, dt, x, u, y) <= 1e-10 * (1.0 + euclidean_norm(x)));
    }
}

TEST_CASE("dense factorization is rejected above dim 500") {
    const int d = 501;
    std::vector<double> a(static_cast<std::size_t>(d) * d, 0.0);
    auto dyn = LinearAffineDynamics::dense(d, std::move(a), std::vector<double>(d, 0.0));
    CHECK_THROWS_AS(ImplicitEuler(dyn, 0.1), config_error);
}

TEST_CASE("singular (I - dt A) is reported at factorization time") {
    // A = I / dt makes I - dt A = 0
    auto dyn = LinearAffineDynamics::dense(2, {10, 0, 0, 10}, {0.0, 0.0});
    CHECK_THROWS_AS(ImplicitEuler(dyn, 0.1), numerical_error);
}

TEST_CASE("explicit and implicit steps agree to O(dt^2) on a smooth linear problem") {
    auto sp = heat_semidiscretization(30, 0.1, HeatProfile::Smooth);
    std::vector<double> u{0.4};
    auto gap = [&](double dt) {
        ExplicitEuler ex(sp.problem, dt);
        ImplicitEuler im(sp.linear, dt);
        std::vector<double> ye(sp.x0.size()), yi(sp.x0.size());
        ex(sp.x0, u, 0.0, ye);
        im(sp.x0, u, 0.0, yi);
        return std::sqrt(squared_distance(ye, yi));
    };
    // halving dt four times must shrink the gap quadratically
    double prev = gap(1e-3);
    for (int k = 1; k <= 4; ++k) {
        const double cur = gap(1e-3 / std::pow(2.0, k));
        CHECK(prev / cur == Catch::Approx(4.0).margin(0.5));
        prev = cur;
    }
}
