#include "quiltspread/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace qs {

double Vec3::norm() const { return std::sqrt(x * x + y * y + z * z); }

namespace {

struct Spring {
    int a, b;
    double rest;
    double k_structural; // scaled per class in build_springs
};

enum class SpringClass { Structural, Shear, Bend };

struct SpringSet {
    std::vector<Spring> structural;
    std::vector<Spring> shear;
    std::vector<Spring> bend;
};

const SpringSet& springs() {
    static const SpringSet set = [] {
        SpringSet s;
        auto idx = [](int x, int y) { return y * kGridSize + x; };
        const double sqrt2 = std::sqrt(2.0);
        for (int y = 0; y < kGridSize; ++y) {
            for (int x = 0; x < kGridSize; ++x) {
                if (x + 1 < kGridSize) s.structural.push_back({idx(x, y), idx(x + 1, y), 1.0, 0});
                if (y + 1 < kGridSize) s.structural.push_back({idx(x, y), idx(x, y + 1), 1.0, 0});
                if (x + 1 < kGridSize && y + 1 < kGridSize) {
                    s.shear.push_back({idx(x, y), idx(x + 1, y + 1), sqrt2, 0});
                    s.shear.push_back({idx(x + 1, y), idx(x, y + 1), sqrt2, 0});
                }
                if (x + 2 < kGridSize) s.bend.push_back({idx(x, y), idx(x + 2, y), 2.0, 0});
                if (y + 2 < kGridSize) s.bend.push_back({idx(x, y), idx(x, y + 2), 2.0, 0});
            }
        }
        return s;
    }();
    return set;
}

void accumulate_spring_forces(const FabricState& st, const std::vector<Spring>& list, double k,
                              std::vector<Vec3>& force) {
    for (const Spring& sp : list) {
        Vec3 d = st.positions[sp.b] - st.positions[sp.a];
        double len = d.norm();
        if (len < 1e-12) continue;
        double f = k * (len - sp.rest) / len;
        Vec3 fv = d * f;
        force[sp.a] += fv;
        force[sp.b] -= fv;
    }
}

// Body capsules lie on the table, so collisions are resolved as a height
// field: a vertex horizontally inside a capsule is lifted onto its upper
// surface rather than squeezed out sideways.
void push_out_of_capsules(FabricState& st, const SimParams& p) {
    for (const Capsule& c : p.body) {
        Vec3 ab = c.b - c.a;
        double abh2 = ab.x * ab.x + ab.y * ab.y;
        for (int i = 0; i < kGridCells; ++i) {
            Vec3& x = st.positions[i];
            double t = abh2 > 1e-12
                           ? std::clamp(((x.x - c.a.x) * ab.x + (x.y - c.a.y) * ab.y) / abh2, 0.0, 1.0)
                           : 0.0;
            Vec3 axis = c.a + ab * t;
            double dx = x.x - axis.x, dy = x.y - axis.y;
            double dh2 = dx * dx + dy * dy;
            if (dh2 >= c.radius * c.radius) continue;
            double surf = axis.z + std::sqrt(c.radius * c.radius - dh2);
            if (x.z < surf) {
                x.z = surf;
                Vec3& v = st.velocities[i];
                if (v.z < 0) v.z = 0;
            }
        }
    }
}

// Jacobi-style projection: corrections are accumulated per vertex and applied
// as an average after each sweep, so the result does not depend on the spring
// iteration order (keeps the dynamics symmetric under grid isometries).
void limit_strain(FabricState& st, const SimParams& p, const std::vector<char>& is_pinned) {
    const auto& set = springs();
    static thread_local std::vector<Vec3> delta;
    static thread_local std::vector<int> counts;
    delta.assign(kGridCells, Vec3{});
    counts.assign(kGridCells, 0);
    auto gather = [&](const std::vector<Spring>& list) {
        double worst = 0;
        for (const Spring& sp : list) {
            Vec3 d = st.positions[sp.b] - st.positions[sp.a];
            double limit = sp.rest * p.max_stretch;
            double len2 = d.x * d.x + d.y * d.y + d.z * d.z;
            if (len2 <= limit * limit) continue;
            double len = std::sqrt(len2);
            if (len < 1e-12) continue;
            worst = std::max(worst, len - limit);
            Vec3 corr = d * ((len - limit) / len);
            bool pa = is_pinned[sp.a], pb = is_pinned[sp.b];
            if (pa && pb) continue;
            if (pa) {
                delta[sp.b] -= corr;
                ++counts[sp.b];
            } else if (pb) {
                delta[sp.a] += corr;
                ++counts[sp.a];
            } else {
                delta[sp.a] += corr * 0.5;
                delta[sp.b] -= corr * 0.5;
                ++counts[sp.a];
                ++counts[sp.b];
            }
        }
        return worst;
    };
    for (int iter = 0; iter < 16; ++iter) {
        std::fill(delta.begin(), delta.end(), Vec3{});
        std::fill(counts.begin(), counts.end(), 0);
        double worst = gather(set.structural);
        worst = std::max(worst, gather(set.shear));
        if (worst < 1e-7) break;
        for (int i = 0; i < kGridCells; ++i)
            if (counts[i] > 0) st.positions[i] += delta[i] * (1.7 / counts[i]);
        // re-project collisions so strain corrections don't tunnel back in
        push_out_of_capsules(st, p);
    }
}

void table_contact(FabricState& st, const SimParams& p) {
    for (int i = 0; i < kGridCells; ++i) {
        Vec3& x = st.positions[i];
        if (x.z < 0) {
            x.z = 0;
            Vec3& v = st.velocities[i];
            if (v.z < 0) v.z = 0;
            v.x *= (1.0 - p.friction);
            v.y *= (1.0 - p.friction);
        }
    }
}

int quantize(double z, const SimParams& p) {
    double zmax = p.release_altitude;
    int idx = static_cast<int>(std::lround(z / zmax * (kDepthLevels - 1)));
    return std::clamp(idx, 0, kDepthLevels - 1);
}

} // namespace

FabricState spread_state() {
    FabricState st;
    for (int y = 0; y < kGridSize; ++y)
        for (int x = 0; x < kGridSize; ++x)
            st.pos(x, y) = {static_cast<double>(x), static_cast<double>(y), 0.0};
    return st;
}

void step(FabricState& state, const SimParams& params, const std::vector<PinnedVertex>& pinned) {
    const auto& set = springs();
    const double dt = params.timestep;
    std::vector<char> is_pinned(kGridCells, 0);
    for (const auto& p : pinned) is_pinned[p.index] = 1;
    const double decay = std::max(0.0, 1.0 - params.damping * dt);

    for (int i = 0; i < kGridCells; ++i) {
        const Vec3& x = state.positions[i];
        if (!std::isfinite(x.x) || !std::isfinite(x.y) || !std::isfinite(x.z))
            throw SimDivergenceError(i % kGridSize, i / kGridSize);
    }

    std::vector<Vec3> force(kGridCells);
    for (int sub = 0; sub < params.substeps; ++sub) {
        std::fill(force.begin(), force.end(), Vec3{});
        accumulate_spring_forces(state, set.structural, params.stiffness_structural, force);
        accumulate_spring_forces(state, set.shear, params.stiffness_shear, force);
        accumulate_spring_forces(state, set.bend, params.stiffness_bend, force);

        for (int i = 0; i < kGridCells; ++i) {
            if (is_pinned[i]) continue;
            Vec3& v = state.velocities[i];
            v += force[i] * dt;
            v.z -= params.gravity * dt;
            v = v * decay;
            state.positions[i] += v * dt;
        }
        for (const auto& p : pinned) {
            state.positions[p.index] = p.target;
            state.velocities[p.index] = {};
        }

        push_out_of_capsules(state, params);
        table_contact(state, params);
        limit_strain(state, params, is_pinned);
        table_contact(state, params);
        for (const auto& p : pinned) state.positions[p.index] = p.target;

        for (int i = 0; i < kGridCells; ++i) {
            const Vec3& x = state.positions[i];
            if (!std::isfinite(x.x) || !std::isfinite(x.y) || !std::isfinite(x.z))
                throw SimDivergenceError(i % kGridSize, i / kGridSize);
        }
    }
}

FabricState execute_action(const FabricState& state, const ActionVector& action, const SimParams& params) {
    if (!action.valid()) throw std::invalid_argument("action components must lie in [0,63]");
    FabricState st = state;
    const int vi = action.gy * kGridSize + action.gx;
    const Vec3 start = st.positions[vi];
    const Vec3 lifted{static_cast<double>(action.gx), static_cast<double>(action.gy), params.release_altitude};
    const Vec3 dest{static_cast<double>(action.rx), static_cast<double>(action.ry), params.release_altitude};

    for (int i = 1; i <= params.lift_steps; ++i) {
        double t = static_cast<double>(i) / params.lift_steps;
        Vec3 target = start + (lifted - start) * t;
        step(st, params, {{vi, target}});
    }

    double horizontal = std::hypot(dest.x - lifted.x, dest.y - lifted.y);
    double step_dt = params.timestep * params.substeps;
    int drag_steps = static_cast<int>(std::ceil(horizontal / (params.drag_speed * step_dt)));
    for (int i = 1; i <= drag_steps; ++i) {
        double t = static_cast<double>(i) / drag_steps;
        Vec3 target = lifted + (dest - lifted) * t;
        step(st, params, {{vi, target}});
    }

    // settle until the cloth stops moving (bounded by settle_steps)
    for (int i = 0; i < params.settle_steps; ++i) {
        step(st, params, {});
        double ke = 0;
        for (const Vec3& v : st.velocities) ke += v.x * v.x + v.y * v.y + v.z * v.z;
        if (ke < 1e-6 * kGridCells) break;
    }
    return st;
}

DepthGrid to_depth_grid(const FabricState& state, const SimParams& params) {
    DepthGrid d;
    for (int i = 0; i < kGridCells; ++i) {
        const Vec3& p = state.positions[i];
        int cx = static_cast<int>(std::lround(p.x));
        int cy = static_cast<int>(std::lround(p.y));
        if (cx < 0 || cx >= kGridSize || cy < 0 || cy >= kGridSize) continue;
        int q = quantize(p.z, params);
        d.at(cx, cy) = static_cast<std::uint8_t>(std::max<int>(d.at(cx, cy), q));
    }
    return d;
}

std::array<bool, kGridCells> occupancy(const FabricState& state) {
    std::array<bool, kGridCells> occ{};
    for (int i = 0; i < kGridCells; ++i) {
        const Vec3& p = state.positions[i];
        int cx = static_cast<int>(std::lround(p.x));
        int cy = static_cast<int>(std::lround(p.y));
        if (cx < 0 || cx >= kGridSize || cy < 0 || cy >= kGridSize) continue;
        occ[static_cast<std::size_t>(cy) * kGridSize + cx] = true;
    }
    return occ;
}

int occupied_cell_count(const FabricState& state) {
    auto occ = occupancy(state);
    return static_cast<int>(std::count(occ.begin(), occ.end(), true));
}

double total_energy(const FabricState& state, const SimParams& params) {
    double e = 0;
    for (int i = 0; i < kGridCells; ++i) {
        const Vec3& v = state.velocities[i];
        e += 0.5 * (v.x * v.x + v.y * v.y + v.z * v.z);
        e += params.gravity * state.positions[i].z;
    }
    const auto& set = springs();
    auto elastic = [&](const std::vector<Spring>& list, double k) {
        double sum = 0;
        for (const Spring& sp : list) {
            double len = (state.positions[sp.b] - state.positions[sp.a]).norm();
            double s = len - sp.rest;
            sum += 0.5 * k * s * s;
        }
        return sum;
    };
    e += elastic(set.structural, params.stiffness_structural);
    e += elastic(set.shear, params.stiffness_shear);
    e += elastic(set.bend, params.stiffness_bend);
    return e;
}

double max_neighbor_distance(const FabricState& state) {
    double worst = 0;
    for (const Spring& sp : springs().structural)
        worst = std::max(worst, (state.positions[sp.b] - state.positions[sp.a]).norm());
    return worst;
}

namespace {
constexpr char kSnapshotMagic[8] = {'Q', 'S', 'F', 'S', 'N', 'A', 'P', '\0'};
constexpr std::uint8_t kSnapshotVersion = 1;
} // namespace

void save_snapshot(const FabricState& state, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f.write(kSnapshotMagic, 8);
    f.put(static_cast<char>(kSnapshotVersion));
    for (const Vec3& p : state.positions) {
        float v[3] = {static_cast<float>(p.x), static_cast<float>(p.y), static_cast<float>(p.z)};
        f.write(reinterpret_cast<const char*>(v), sizeof(v));
    }
}

FabricState load_snapshot(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open: " + path);
    char magic[8];
    f.read(magic, 8);
    if (!f || std::memcmp(magic, kSnapshotMagic, 8) != 0)
        throw MalformedStateError("bad snapshot magic: " + path);
    int version = f.get();
    if (version != kSnapshotVersion)
        throw MalformedStateError("unsupported snapshot version " + std::to_string(version));
    FabricState st;
    for (Vec3& p : st.positions) {
        float v[3];
        f.read(reinterpret_cast<char*>(v), sizeof(v));
        if (!f) throw MalformedStateError("truncated snapshot: " + path);
        p = {v[0], v[1], v[2]};
    }
    return st;
}

} // namespace qs
