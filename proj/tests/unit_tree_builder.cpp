#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <random>
#include <vector>

#include "tsa/neighbor_index.hpp"
#include "tsa/problems.hpp"
#include "tsa/tree_builder.hpp"

using namespace tsa;

namespace {

bool trees_identical(const Tree& a, const Tree& b) {
    if (a.num_levels() != b.num_levels()) return false;
    for (int n = 0; n < a.num_levels(); ++n) {
        if (a.level_size(n) != b.level_size(n)) return false;
        for (std::size_t i = 0; i < a.level_size(n); ++i) {
            const NodeRef id{n, static_cast<std::int32_t>(i)};
            const auto sa = a.state(id);
            const auto sb = b.state(id);
            for (std::size_t k = 0; k < sa.size(); ++k)
                if (sa[k] != sb[k]) return false;
            if (n < a.num_steps())
                for (int j = 0; j < a.num_controls(); ++j)
                    if (a.child(id, j) != b.child(id, j)) return false;
        }
    }
    return true;
}

}  // namespace

TEST_CASE("zero tolerance recovers the full tree") {
    auto p = make_test1();
    const std::vector<double> x0{-0.5, 0.5};
    const std::vector<std::vector<double>> control_sets{
        {0.5}, {-1.0, 1.0}, {-1.0, 0.0, 1.0}};
    for (const auto& vals : control_sets) {
        auto controls = ControlGrid::scalar_values(vals);
        const auto M = static_cast<std::uint64_t>(vals.size());
        for (int steps : {0, 1, 5, 9, 12}) {
            if (full_tree_cardinality(M, steps) > 2'000'000) continue;
            TimeGrid grid(0.0, 1.0, steps);
            ExplicitEuler step(p, grid.dt());
            auto tree = build_tree(p, step, grid, controls, x0, PruneConfig{});
            CHECK(tree.total_nodes() == full_tree_cardinality(M, steps));
        }
    }
}

TEST_CASE("single-node tree when no steps are taken") {
    auto p = make_test1();
    TimeGrid grid(0.0, 1.0, 0);
    auto controls = ControlGrid::scalar_values({-1.0, 1.0});
    ExplicitEuler step(p, grid.dt());
    auto tree = build_tree(p, step, grid, controls, std::vector<double>{0.25, -0.5},
                           PruneConfig{});
    REQUIRE(tree.total_nodes() == 1);
    CHECK(tree.state({0, 0})[0] == 0.25);
}

TEST_CASE("pruned builds are deterministic and strategy-independent") {
    auto p = make_test1();
    TimeGrid grid(0.0, 1.0, 12);
    auto controls = ControlGrid::scalar_values({-1.0, 1.0});
    ExplicitEuler step(p, grid.dt());
    const std::vector<double> x0{-0.5, 0.5};

    PruneConfig cfg;
    cfg.tolerance = grid.dt() * grid.dt();

    cfg.strategy = NeighborStrategy::BruteForce;
    auto brute1 = build_tree(p, step, grid, controls, x0, cfg);
    auto brute2 = build_tree(p, step, grid, controls, x0, cfg);
    CHECK(trees_identical(brute1, brute2));

    cfg.strategy = NeighborStrategy::SpatialHash;
    auto hash = build_tree(p, step, grid, controls, x0, cfg);
    cfg.strategy = NeighborStrategy::PcaProjection;
    auto pca = build_tree(p, step, grid, controls, x0, cfg);
    CHECK(trees_identical(brute1, hash));
    CHECK(trees_identical(brute1, pca));
    CHECK(brute1.total_nodes() < full_tree_cardinality(2, 12));

    // generating candidates in parallel must not change the result
    auto threaded = build_tree(p, step, grid, controls, x0, cfg, nullptr, 4);
    CHECK(trees_identical(brute1, threaded));
}

TEST_CASE("every redirected edge stays within tolerance and levels bound") {
    auto p = make_test1();
    TimeGrid grid(0.0, 1.0, 20);
    auto controls = ControlGrid::scalar_values({-1.0, 1.0});
    ExplicitEuler step(p, grid.dt());
    const std::vector<double> x0{-0.5, 0.5};

    PruneConfig cfg;
    cfg.tolerance = grid.dt() * grid.dt();
    BuildStats stats;
    auto tree = build_tree(p, step, grid, controls, x0, cfg, &stats);

    auto diag = validate_tree(tree, p, grid, controls, step);
    CHECK(diag.ok());
    CHECK(diag.max_edge_residual <= cfg.tolerance);
    CHECK(stats.total_merged() > 0);

    // |T^{n+1}| <= M |T^n|
    for (int n = 0; n + 1 < tree.num_levels(); ++n)
        CHECK(tree.level_size(n + 1) <= 2 * tree.level_size(n));

    SECTION("unpruned edges are exact recomputations") {
        auto full = build_tree(p, step, TimeGrid(0.0, 1.0, 8), controls, x0, PruneConfig{});
        auto d = validate_tree(full, p, TimeGrid(0.0, 1.0, 8), controls, step);
        CHECK(d.ok());
        CHECK(d.max_edge_residual == 0.0);
    }
}

TEST_CASE("validate_tree flags corrupted adjacency") {
    Tree tree(1, 1);
    tree.add_level();
    tree.push_node(0, std::vector<double>{0.0});
    tree.add_level();
    tree.push_node(1, std::vector<double>{0.0});
    const NodeRef bogus{1, 7};  // index past level bounds
    tree.append_children(0, std::vector<NodeRef>{bogus});

    OCProblem p;
    p.state_dim = 1;
    p.dynamics = [](std::span<const double>, std::span<const double>, double,
                    std::span<double> out) { out[0] = 0.0; };
    p.terminal_cost = [](std::span<const double>) { return 0.0; };
    TimeGrid grid(0.0, 1.0, 1);
    auto controls = ControlGrid::scalar_values({0.0});
    auto diag = validate_tree(tree, p, grid, controls, ExplicitEuler(p, grid.dt()));
    REQUIRE_FALSE(diag.ok());
    CHECK(diag.issues.front().find("(1,7)") != std::string::npos);
}

TEST_CASE("cross-level pruning requires autonomous dynamics and respects level bounds") {
    auto driven = make_driven_oscillator();
    TimeGrid grid(0.0, 1.0, 10);
    auto controls = ControlGrid::scalar_values({-1.0, 1.0});
    ExplicitEuler step(driven, grid.dt());
    PruneConfig cfg;
    cfg.tolerance = 0.01;
    cfg.scope = PruneScope::CrossLevel;
    CHECK_THROWS_AS(
        build_tree(driven, step, grid, controls, std::vector<double>{-0.5, 0.5}, cfg),
        config_error);

    auto p = make_test1();
    ExplicitEuler astep(p, grid.dt());
    auto tree = build_tree(p, astep, grid, controls, std::vector<double>{-0.5, 0.5}, cfg);
    for (int n = 0; n < tree.num_steps(); ++n)
        for (std::size_t i = 0; i < tree.level_size(n); ++i)
            for (int j = 0; j < 2; ++j)
                CHECK(tree.child({n, static_cast<std::int32_t>(i)}, j).level <= n + 1);
}

TEST_CASE("node budget aborts the build") {
    auto p = make_test1();
    TimeGrid grid(0.0, 1.0, 16);
    auto controls = ControlGrid::scalar_values({-1.0, 1.0});
    ExplicitEuler step(p, grid.dt());
    PruneConfig cfg;
    cfg.max_nodes = 100;
    CHECK_THROWS_AS(build_tree(p, step, grid, controls, std::vector<double>{-0.5, 0.5}, cfg),
                    resource_error);
}

TEST_CASE("find_merge_target returns the argmin within tolerance") {
    NeighborIndex index(2, 1.0, NeighborStrategy::BruteForce);
    index.insert({1, 0}, std::vector<double>{0.0, 0.0});
    index.insert({1, 1}, std::vector<double>{0.3, 0.0});
    index.insert({1, 2}, std::vector<double>{0.6, 0.0});

    SECTION("candidate equal to an existing node") {
        auto hit = find_merge_target(index, std::vector<double>{0.3, 0.0}, 0.5);
        REQUIRE(hit.has_value());
        CHECK(*hit == NodeRef{1, 1});
    }
    SECTION("candidate outside tolerance") {
        auto hit = find_merge_target(index, std::vector<double>{2.0, 0.0}, 0.5);
        CHECK_FALSE(hit.has_value());
    }
    SECTION("two in-scope nodes, the closer one wins") {
        // distances 0.3 eps and 0.6 eps for eps = 1: brute-force scan agrees
        auto hit = find_merge_target(index, std::vector<double>{0.0, 0.3}, 1.0);
        REQUIRE(hit.has_value());
        CHECK(*hit == NodeRef{1, 0});
    }
    SECTION("exact ties go to the lowest id") {
        NeighborIndex tied(2, 1.0, NeighborStrategy::BruteForce);
        tied.insert({2, 5}, std::vector<double>{0.25, 0.0});
        tied.insert({2, 1}, std::vector<double>{0.75, 0.0});
        // 0.5 is exactly 0.25 from both nodes in binary arithmetic
        auto hit = find_merge_target(tied, std::vector<double>{0.5, 0.0}, 1.0);
        REQUIRE(hit.has_value());
        CHECK(*hit == NodeRef{2, 1});
    }
}

TEST_CASE("hash and pca queries match the brute-force oracle on random probes") {
    std::mt19937 rng(1234);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const int n_states = 10000;
    const double eps = 1e-3;

    std::vector<double> states(2 * n_states);
    for (double& v : states) v = unit(rng);

    NeighborIndex brute(2, eps, NeighborStrategy::BruteForce);
    NeighborIndex hash(2, eps, NeighborStrategy::SpatialHash);
    NeighborIndex pca(2, eps, NeighborStrategy::PcaProjection, states);
    for (int i = 0; i < n_states; ++i) {
        const NodeRef id{0, i};
        const std::span<const double> s{states.data() + 2 * i, 2};
        brute.insert(id, s);
        hash.insert(id, s);
        pca.insert(id, s);
    }

    int hits = 0;
    for (int probe = 0; probe < 100; ++probe) {
        // half the probes near an existing state so the eps-ball is nonempty
        std::vector<double> q(2);
        if (probe % 2 == 0) {
            const int i = static_cast<int>(unit(rng) * n_states);
            q = {states[2 * i] + (unit(rng) - 0.5) * eps, states[2 * i + 1]};
        } else {
            q = {unit(rng), unit(rng)};
        }
        const auto expect = brute.query_nearest(q);
        CHECK(hash.query_nearest(q) == expect);
        CHECK(pca.query_nearest(q) == expect);
        if (expect) ++hits;
    }
    CHECK(hits > 10);
}

TEST_CASE("pca projection on collinear states behaves like brute force") {
    // 1-D data: the principal direction preserves pairwise distances exactly
    std::vector<double> states = {0.0, 0.0, 1.0, 1.0, 2.0, 2.0};
    NeighborIndex pca(2, 0.5, NeighborStrategy::PcaProjection, states);
    NeighborIndex brute(2, 0.5, NeighborStrategy::BruteForce);
    for (int i = 0; i < 3; ++i) {
        pca.insert({0, i}, std::span<const double>{states.data() + 2 * i, 2});
        brute.insert({0, i}, std::span<const double>{states.data() + 2 * i, 2});
    }
    for (double t : {-0.2, 0.1, 0.9, 1.4, 2.2}) {
        const std::vector<double> q{t, t};
        CHECK(pca.query_nearest(q) == brute.query_nearest(q));
    }
}

TEST_CASE("pca with degenerate data falls back to brute force") {
    std::vector<double> states(20, 0.5);  // ten identical 2-D states
    NeighborIndex idx(2, 0.1, NeighborStrategy::PcaProjection, states);
    CHECK(idx.strategy() == NeighborStrategy::BruteForce);
    idx.insert({0, 0}, std::vector<double>{0.5, 0.5});
    auto hit = idx.query_nearest(std::vector<double>{0.5, 0.5});
    REQUIRE(hit.has_value());
}

TEST_CASE("control-affine dynamics: children lie on the segment of the extremes") {
    // f(x, u) = f1(x) u + f2(x) with scalar u: every child of one parent is a
    // convex combination of the two extremal-control children
    auto p = make_test1();
    TimeGrid grid(0.0, 1.0, 6);
    auto controls = ControlGrid::scalar_values({-1.0, -0.5, 0.0, 0.5, 1.0});
    ExplicitEuler step(p, grid.dt());
    auto tree = build_tree(p, step, grid, controls, std::vector<double>{-0.5, 0.5},
                           PruneConfig{});

    for (int n = 0; n < tree.num_steps(); ++n) {
        for (std::size_t i = 0; i < tree.level_size(n); ++i) {
            const NodeRef id{n, static_cast<std::int32_t>(i)};
            const auto lo = tree.state(tree.child(id, 0));
            const auto hi = tree.state(tree.child(id, 4));
            std::vector<double> dir(2);
            for (int k = 0; k < 2; ++k) dir[k] = hi[k] - lo[k];
            const double len_sq = dir[0] * dir[0] + dir[1] * dir[1];
            for (int j = 1; j < 4; ++j) {
                const auto c = tree.state(tree.child(id, j));
                const double s =
                    ((c[0] - lo[0]) * dir[0] + (c[1] - lo[1]) * dir[1]) / len_sq;
                CHECK(s >= -1e-12);
                CHECK(s <= 1.0 + 1e-12);
                for (int k = 0; k < 2; ++k)
                    CHECK(c[k] == Catch::Approx(lo[k] + s * dir[k]).margin(1e-12));
            }
        }
    }
}

TEST_CASE("monotone dynamics: children stay inside the box of the extremes") {
    OCProblem p;
    p.state_dim = 1;
    p.autonomous = true;
    p.dynamics = [](std::span<const double> x, std::span<const double> u, double,
                    std::span<double> out) { out[0] = x[0] + std::sin(u[0]); };
    p.terminal_cost = [](std::span<const double> x) { return x[0]; };
    TimeGrid grid(0.0, 1.0, 8);
    auto controls = ControlGrid::scalar_values({-1.0, -0.3, 0.2, 1.0});
    ExplicitEuler step(p, grid.dt());
    auto tree = build_tree(p, step, grid, controls, std::vector<double>{0.1}, PruneConfig{});

    for (int n = 0; n < tree.num_steps(); ++n) {
        for (std::size_t i = 0; i < tree.level_size(n); ++i) {
            const NodeRef id{n, static_cast<std::int32_t>(i)};
            const double lo = tree.state(tree.child(id, 0))[0];
            const double hi = tree.state(tree.child(id, 3))[0];
            for (int j = 1; j < 3; ++j) {
                const double c = tree.state(tree.child(id, j))[0];
                CHECK(c >= std::min(lo, hi) - 1e-15);
                CHECK(c <= std::max(lo, hi) + 1e-15);
            }
        }
    }
}
