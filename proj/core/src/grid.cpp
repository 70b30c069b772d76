#include "quiltspread/grid.hpp"

#include <fstream>
#include <sstream>

namespace qs {

VoxelGrid to_voxel_grid(const DepthGrid& depth) {
    VoxelGrid v;
    for (int y = 0; y < kGridSize; ++y)
        for (int x = 0; x < kGridSize; ++x)
            v.at(x, y, depth.at(x, y)) = 1;
    return v;
}

DepthGrid from_voxel_grid(const VoxelGrid& voxels) {
    DepthGrid d;
    for (int y = 0; y < kGridSize; ++y) {
        for (int x = 0; x < kGridSize; ++x) {
            int ones = 0, level = 0;
            for (int z = 0; z < kDepthLevels; ++z) {
                if (voxels.at(x, y, z)) {
                    ++ones;
                    level = z;
                }
            }
            if (ones != 1)
                throw MalformedStateError("voxel column (" + std::to_string(x) + "," + std::to_string(y) +
                                          ") has " + std::to_string(ones) + " set bits, expected 1");
            d.at(x, y) = static_cast<std::uint8_t>(level);
        }
    }
    return d;
}

void write_pgm(const DepthGrid& depth, std::ostream& out) {
    out << "P5\n" << kGridSize << " " << kGridSize << "\n255\n";
    for (std::uint8_t c : depth.cells)
        out.put(static_cast<char>(c * 8));
}

void write_pgm(const DepthGrid& depth, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    write_pgm(depth, f);
}

DepthGrid read_depth_pgm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open: " + path);
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    f >> magic >> w >> h >> maxval;
    if (magic != "P5" || w != kGridSize || h != kGridSize || maxval != 255)
        throw MalformedStateError("not a 64x64 P5 depth render: " + path);
    f.get(); // single whitespace after header
    DepthGrid d;
    for (auto& c : d.cells) {
        int b = f.get();
        if (b < 0) throw MalformedStateError("truncated PGM: " + path);
        c = static_cast<std::uint8_t>(b / 8);
    }
    return d;
}

} // namespace qs
