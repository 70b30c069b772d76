#pragma once

#include "quiltspread/grid.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace qs {

struct SimDivergenceError : std::runtime_error {
    int vertex_x, vertex_y;
    SimDivergenceError(int vx, int vy)
        : std::runtime_error("simulation diverged: non-finite position at vertex (" + std::to_string(vx) +
                             "," + std::to_string(vy) + ")"),
          vertex_x(vx), vertex_y(vy) {}
};

struct Vec3 {
    double x = 0, y = 0, z = 0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
    double norm() const;
};

/// Particle grid of the quilt: 64x64 vertices at spacing 1, table plane z = 0.
struct FabricState {
    std::vector<Vec3> positions;  // 64x64 row-major
    std::vector<Vec3> velocities;

    FabricState() : positions(kGridCells), velocities(kGridCells) {}

    Vec3& pos(int x, int y) { return positions[static_cast<std::size_t>(y) * kGridSize + x]; }
    const Vec3& pos(int x, int y) const { return positions[static_cast<std::size_t>(y) * kGridSize + x]; }
};

/// Axis-free capsule used as an optional body-collision shape.
struct Capsule {
    Vec3 a, b;
    double radius = 1.0;
};

struct SimParams {
    double stiffness_structural = 600.0;
    double stiffness_shear = 300.0;
    double stiffness_bend = 120.0;
    double damping = 4.0;          // velocity decay rate, 1/time
    double gravity = 9.8;
    double timestep = 0.02;
    int substeps = 1;              // integration substeps per step() call
    double max_stretch = 1.15;     // strain limit ratio against rest length
    double friction = 0.35;        // tangential velocity loss on table contact
    double release_altitude = 8.0; // grasp carry height; also the depth-quantization ceiling
    std::vector<Capsule> body;     // optional collision shapes

    // action execution schedule
    int lift_steps = 20;
    int settle_steps = 120;
    double drag_speed = 25.0;      // horizontal units per second during carry
};

struct PinnedVertex {
    int index = 0; // y*64+x
    Vec3 target;
};

/// Spread quilt lying flat on the table at rest.
FabricState spread_state();

/// One integration step (params.substeps substeps of semi-implicit Euler with
/// post-step strain limiting and table contact). Pinned vertices end exactly
/// at their targets. Throws SimDivergenceError on non-finite positions.
void step(FabricState& state, const SimParams& params, const std::vector<PinnedVertex>& pinned = {});

/// Full pick-and-place: lift the vertex at the grasp column to
/// release_altitude, carry it straight above the grasp->release segment,
/// release, settle. Returns the settled state.
FabricState execute_action(const FabricState& state, const ActionVector& action, const SimParams& params);

/// Quantized top-surface altitude per cell; cells without cloth read 0.
/// Linear map z in [0, release_altitude] -> 0..31.
DepthGrid to_depth_grid(const FabricState& state, const SimParams& params);

/// Cells into which at least one vertex projects.
std::array<bool, kGridCells> occupancy(const FabricState& state);
int occupied_cell_count(const FabricState& state);

/// Kinetic plus gravitational plus elastic energy, for settling diagnostics.
double total_energy(const FabricState& state, const SimParams& params);

double max_neighbor_distance(const FabricState& state);

// State snapshot: 8-byte magic, version byte, 64x64x3 little-endian float32 positions.
void save_snapshot(const FabricState& state, const std::string& path);
FabricState load_snapshot(const std::string& path);

} // namespace qs
