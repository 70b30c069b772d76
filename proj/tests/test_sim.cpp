#include <doctest.h>

#include "quiltspread/sim.hpp"

#include <cmath>
#include <cstdio>
#include <random>

using namespace qs;

namespace {
bool states_equal(const FabricState& a, const FabricState& b) {
    for (int i = 0; i < kGridCells; ++i) {
        if (a.positions[i].x != b.positions[i].x || a.positions[i].y != b.positions[i].y ||
            a.positions[i].z != b.positions[i].z)
            return false;
    }
    return true;
}
} // namespace

TEST_CASE("flat quilt at rest stays at rest") {
    SimParams params;
    FabricState st = spread_state();
    for (int i = 0; i < 50; ++i) step(st, params);
    for (int i = 0; i < kGridCells; ++i) {
        CHECK(st.positions[i].z == doctest::Approx(0.0).epsilon(1e-9));
        CHECK(std::abs(st.velocities[i].x) < 1e-6);
        CHECK(std::abs(st.velocities[i].y) < 1e-6);
        CHECK(std::abs(st.velocities[i].z) < 1e-6);
    }
}

TEST_CASE("pinned vertex sits exactly at its target after settling") {
    SimParams params;
    FabricState st = spread_state();
    PinnedVertex pin{0, {0.0, 0.0, 5.0}};
    for (int i = 0; i < 400; ++i) step(st, params, {pin});
    CHECK(st.positions[0].x == 0.0);
    CHECK(st.positions[0].y == 0.0);
    CHECK(st.positions[0].z == 5.0);
}

TEST_CASE("free settling dissipates energy") {
    SimParams params;
    FabricState st = spread_state();
    // perturb: raise a center vertex and let go
    for (int i = 0; i < params.lift_steps; ++i)
        step(st, params, {{32 * kGridSize + 32, {32.0, 32.0, 4.0}}});
    double before = total_energy(st, params);
    for (int i = 0; i < 50; ++i) step(st, params);
    double after = total_energy(st, params);
    CHECK(after <= before + 1e-9);
}

TEST_CASE("table is never penetrated and strain stays limited") {
    SimParams params;
    FabricState st = spread_state();
    st = execute_action(st, {0, 0, 40, 40}, params);
    st = execute_action(st, {20, 20, 5, 60}, params);
    double min_z = 1e300;
    for (const Vec3& p : st.positions) min_z = std::min(min_z, p.z);
    CHECK(min_z >= 0.0);
    CHECK(max_neighbor_distance(st) <= 1.0 * params.max_stretch + 1e-6);
}

TEST_CASE("null action leaves the depth grid within one level per cell") {
    SimParams params;
    FabricState st = spread_state();
    DepthGrid before = to_depth_grid(st, params);
    FabricState after = execute_action(st, {30, 30, 30, 30}, params);
    DepthGrid after_grid = to_depth_grid(after, params);
    for (int i = 0; i < kGridCells; ++i)
        CHECK(std::abs(static_cast<int>(before.cells[i]) - static_cast<int>(after_grid.cells[i])) <= 1);
}

TEST_CASE("corner grasp dragged to center shrinks the footprint") {
    SimParams params;
    FabricState st = spread_state();
    int before = occupied_cell_count(st);
    FabricState after = execute_action(st, {0, 0, 32, 32}, params);
    CHECK(occupied_cell_count(after) < before);
}

TEST_CASE("execute_action replays bit-identically") {
    SimParams params;
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> coord(0, 63);
    ActionVector a{static_cast<std::uint8_t>(coord(rng)), static_cast<std::uint8_t>(coord(rng)),
                   static_cast<std::uint8_t>(coord(rng)), static_cast<std::uint8_t>(coord(rng))};
    FabricState r1 = execute_action(spread_state(), a, params);
    FabricState r2 = execute_action(spread_state(), a, params);
    CHECK(states_equal(r1, r2));
}

TEST_CASE("depth quantization endpoints") {
    SimParams params;
    FabricState st = spread_state();
    SUBCASE("flat quilt reads all zero") {
        DepthGrid d = to_depth_grid(st, params);
        for (auto c : d.cells) CHECK(c == 0);
    }
    SUBCASE("vertex at release altitude reads 31") {
        st.pos(10, 10).z = params.release_altitude;
        CHECK(to_depth_grid(st, params).at(10, 10) == 31);
    }
}

TEST_CASE("raising a vertex never lowers any depth cell") {
    SimParams params;
    std::mt19937_64 rng(13);
    std::uniform_int_distribution<int> coord(0, 63);
    std::uniform_real_distribution<double> dz(0.1, 3.0);
    FabricState st = execute_action(spread_state(), {0, 0, 30, 25}, params);
    for (int trial = 0; trial < 30; ++trial) {
        DepthGrid before = to_depth_grid(st, params);
        FabricState raised = st;
        raised.pos(coord(rng), coord(rng)).z += dz(rng);
        DepthGrid after = to_depth_grid(raised, params);
        for (int i = 0; i < kGridCells; ++i) CHECK(after.cells[i] >= before.cells[i]);
    }
}

TEST_CASE("divergence names the offending vertex") {
    SimParams params;
    FabricState st = spread_state();
    st.pos(7, 9).x = std::numeric_limits<double>::quiet_NaN();
    try {
        step(st, params);
        FAIL("expected SimDivergenceError");
    } catch (const SimDivergenceError& e) {
        CHECK(e.vertex_x == 7);
        CHECK(e.vertex_y == 9);
    }
}

TEST_CASE("snapshot survives a save/load round trip") {
    SimParams params;
    FabricState st = execute_action(spread_state(), {0, 0, 32, 32}, params);
    std::string path = "test_sim_snapshot.bin";
    save_snapshot(st, path);
    FabricState loaded = load_snapshot(path);
    for (int i = 0; i < kGridCells; ++i) {
        CHECK(loaded.positions[i].x == doctest::Approx(st.positions[i].x).epsilon(1e-6));
        CHECK(loaded.positions[i].z == doctest::Approx(st.positions[i].z).epsilon(1e-6));
    }
    std::remove(path.c_str());
}

TEST_CASE("quilt drapes over a body capsule instead of passing through") {
    SimParams params;
    params.body.push_back({{32, 20, 0}, {32, 44, 0}, 3.0});
    FabricState st = spread_state();
    for (int i = 0; i < 200; ++i) step(st, params);
    // vertices above the capsule axis stay at least a radius away
    Vec3 p = st.pos(32, 32);
    CHECK(p.z >= doctest::Approx(3.0).epsilon(0.1));
}
