#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>

namespace qs {

inline constexpr int kGridSize = 64;
inline constexpr int kGridCells = kGridSize * kGridSize;
inline constexpr int kDepthLevels = 32;

struct MalformedStateError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// 64x64 map of quantized cloth-surface altitude indices, 0..31.
struct DepthGrid {
    std::array<std::uint8_t, kGridCells> cells{};

    std::uint8_t& at(int x, int y) { return cells[static_cast<std::size_t>(y) * kGridSize + x]; }
    std::uint8_t at(int x, int y) const { return cells[static_cast<std::size_t>(y) * kGridSize + x]; }

    bool operator==(const DepthGrid&) const = default;
};

/// 64x64x32 one-hot altitude encoding: exactly one set bit per column.
struct VoxelGrid {
    // layout: z fastest, then x, then y
    std::array<std::uint8_t, static_cast<std::size_t>(kGridCells) * kDepthLevels> bits{};

    std::uint8_t& at(int x, int y, int z) {
        return bits[(static_cast<std::size_t>(y) * kGridSize + x) * kDepthLevels + z];
    }
    std::uint8_t at(int x, int y, int z) const {
        return bits[(static_cast<std::size_t>(y) * kGridSize + x) * kDepthLevels + z];
    }

    bool operator==(const VoxelGrid&) const = default;
};

/// Pick-and-place primitive: grasp column and release column on the grid.
struct ActionVector {
    std::uint8_t gx = 0, gy = 0, rx = 0, ry = 0;

    bool valid() const { return gx < kGridSize && gy < kGridSize && rx < kGridSize && ry < kGridSize; }
    bool operator==(const ActionVector&) const = default;
};

VoxelGrid to_voxel_grid(const DepthGrid& depth);

/// Throws MalformedStateError if any column is not one-hot.
DepthGrid from_voxel_grid(const VoxelGrid& voxels);

/// P5 PGM render, values scaled by 8 for visibility.
void write_pgm(const DepthGrid& depth, const std::string& path);
void write_pgm(const DepthGrid& depth, std::ostream& out);
DepthGrid read_depth_pgm(const std::string& path);

} // namespace qs
