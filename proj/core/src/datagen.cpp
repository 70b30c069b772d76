#include "quiltspread/datagen.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>

namespace qs {

namespace {
constexpr int M = kGridSize - 1;
}

std::pair<int, int> transform_coord(Dihedral op, int x, int y) {
    switch (op) {
        case Dihedral::Identity: return {x, y};
        case Dihedral::Rot90: return {y, M - x};
        case Dihedral::Rot180: return {M - x, M - y};
        case Dihedral::Rot270: return {M - y, x};
        case Dihedral::MirrorX: return {M - x, y};
        case Dihedral::MirrorY: return {x, M - y};
        case Dihedral::Transpose: return {y, x};
        case Dihedral::AntiTranspose: return {M - y, M - x};
    }
    return {x, y};
}

DepthGrid transform_grid(Dihedral op, const DepthGrid& g) {
    DepthGrid out;
    for (int y = 0; y < kGridSize; ++y) {
        for (int x = 0; x < kGridSize; ++x) {
            auto [tx, ty] = transform_coord(op, x, y);
            out.at(tx, ty) = g.at(x, y);
        }
    }
    return out;
}

ActionVector transform_action(Dihedral op, const ActionVector& a) {
    auto [gx, gy] = transform_coord(op, a.gx, a.gy);
    auto [rx, ry] = transform_coord(op, a.rx, a.ry);
    return {static_cast<std::uint8_t>(gx), static_cast<std::uint8_t>(gy),
            static_cast<std::uint8_t>(rx), static_cast<std::uint8_t>(ry)};
}

TransitionSample augment(const TransitionSample& sample, Dihedral op) {
    return {transform_grid(op, sample.before), transform_action(op, sample.action),
            transform_grid(op, sample.after), sample.provenance, sample.seed};
}

FabricState transform_state(Dihedral op, const FabricState& state) {
    FabricState out;
    for (int y = 0; y < kGridSize; ++y) {
        for (int x = 0; x < kGridSize; ++x) {
            auto [tx, ty] = transform_coord(op, x, y);
            const Vec3& p = state.pos(x, y);
            auto [wx, wy] = [&]() -> std::pair<double, double> {
                switch (op) {
                    case Dihedral::Identity: return {p.x, p.y};
                    case Dihedral::Rot90: return {p.y, M - p.x};
                    case Dihedral::Rot180: return {M - p.x, M - p.y};
                    case Dihedral::Rot270: return {M - p.y, p.x};
                    case Dihedral::MirrorX: return {M - p.x, p.y};
                    case Dihedral::MirrorY: return {p.x, M - p.y};
                    case Dihedral::Transpose: return {p.y, p.x};
                    case Dihedral::AntiTranspose: return {M - p.y, M - p.x};
                }
                return {p.x, p.y};
            }();
            out.pos(tx, ty) = {wx, wy, p.z};
            const Vec3& v = state.velocities[static_cast<std::size_t>(y) * kGridSize + x];
            auto [vx, vy] = [&]() -> std::pair<double, double> {
                switch (op) {
                    case Dihedral::Identity: return {v.x, v.y};
                    case Dihedral::Rot90: return {v.y, -v.x};
                    case Dihedral::Rot180: return {-v.x, -v.y};
                    case Dihedral::Rot270: return {-v.y, v.x};
                    case Dihedral::MirrorX: return {-v.x, v.y};
                    case Dihedral::MirrorY: return {v.x, -v.y};
                    case Dihedral::Transpose: return {v.y, v.x};
                    case Dihedral::AntiTranspose: return {-v.y, -v.x};
                }
                return {v.x, v.y};
            }();
            out.velocities[static_cast<std::size_t>(ty) * kGridSize + tx] = {vx, vy, v.z};
        }
    }
    return out;
}

double depth_mse(const DepthGrid& a, const DepthGrid& b) {
    double sum = 0;
    for (int i = 0; i < kGridCells; ++i) {
        double d = static_cast<double>(a.cells[i]) - static_cast<double>(b.cells[i]);
        sum += d * d;
    }
    return sum / kGridCells;
}

namespace {

ActionVector random_action(std::mt19937_64& rng, const FabricState& state) {
    auto occ = occupancy(state);
    std::vector<int> cells;
    cells.reserve(kGridCells);
    for (int i = 0; i < kGridCells; ++i)
        if (occ[i]) cells.push_back(i);
    std::uniform_int_distribution<std::size_t> pick(0, cells.size() - 1);
    int g = cells[pick(rng)];
    std::uniform_int_distribution<int> coord(0, M);
    return {static_cast<std::uint8_t>(g % kGridSize), static_cast<std::uint8_t>(g / kGridSize),
            static_cast<std::uint8_t>(coord(rng)), static_cast<std::uint8_t>(coord(rng))};
}

} // namespace

std::vector<TransitionSample> gen_random_spreading(const RandomSpreadingOptions& opt, const SimParams& params,
                                                   const std::function<void(const std::string&)>& log) {
    std::vector<TransitionSample> out;
    out.reserve(static_cast<std::size_t>(opt.n_episodes) * opt.actions_per_episode);
    std::uint64_t seed_offset = 0;
    for (int e = 0; e < opt.n_episodes; ++e) {
        std::uint64_t episode_seed = opt.seed + static_cast<std::uint64_t>(e) + seed_offset;
        std::mt19937_64 rng(episode_seed);
        FabricState state = spread_state();
        std::vector<TransitionSample> episode;
        try {
            for (int k = 0; k < opt.actions_per_episode; ++k) {
                ActionVector a = random_action(rng, state);
                DepthGrid before = to_depth_grid(state, params);
                state = execute_action(state, a, params);
                episode.push_back({before, a, to_depth_grid(state, params), Provenance::Random, episode_seed});
            }
        } catch (const SimDivergenceError& err) {
            if (log) log("episode " + std::to_string(e) + " discarded: " + err.what());
            seed_offset += 0x9e3779b97f4a7c15ull;
            --e;
            continue;
        }
        out.insert(out.end(), episode.begin(), episode.end());
    }
    return out;
}

std::vector<std::pair<int, int>> covering_candidate_points() {
    const int mid = kGridSize / 2 - 1;
    return {{0, 0}, {M, 0}, {0, M}, {M, M}, {mid, 0}, {mid, M}, {0, mid}, {M, mid}};
}

std::vector<TransitionSample> gen_final_covering(const FinalCoveringOptions& opt, const SimParams& params,
                                                 const std::function<void(const std::string&)>& log) {
    std::vector<TransitionSample> out;
    out.reserve(opt.n_samples);
    const auto candidates = covering_candidate_points();
    const DepthGrid flat{}; // spread quilt reads all-zero
    std::uint64_t seed_offset = 0;
    for (int i = 0; i < opt.n_samples; ++i) {
        std::uint64_t sample_seed = opt.seed + static_cast<std::uint64_t>(i) + seed_offset;
        std::mt19937_64 rng(sample_seed);
        auto [cx, cy] = candidates[std::uniform_int_distribution<std::size_t>(0, candidates.size() - 1)(rng)];
        double angle = std::uniform_real_distribution<double>(0, 2 * 3.14159265358979323846)(rng);
        double dist = std::uniform_real_distribution<double>(1.0, opt.perturb_max)(rng);
        int px = std::clamp(static_cast<int>(std::lround(cx + dist * std::cos(angle))), 0, M);
        int py = std::clamp(static_cast<int>(std::lround(cy + dist * std::sin(angle))), 0, M);
        try {
            FabricState before_state = execute_action(
                spread_state(),
                {static_cast<std::uint8_t>(cx), static_cast<std::uint8_t>(cy),
                 static_cast<std::uint8_t>(px), static_cast<std::uint8_t>(py)},
                params);
            // grasp wherever the perturbed vertex landed, release at its home cell
            const int vi = cy * kGridSize + cx;
            const Vec3& vp = before_state.positions[vi];
            ActionVector back{
                static_cast<std::uint8_t>(std::clamp(static_cast<int>(std::lround(vp.x)), 0, M)),
                static_cast<std::uint8_t>(std::clamp(static_cast<int>(std::lround(vp.y)), 0, M)),
                static_cast<std::uint8_t>(cx), static_cast<std::uint8_t>(cy)};
            FabricState after_state = execute_action(before_state, back, params);
            TransitionSample s{to_depth_grid(before_state, params), back, to_depth_grid(after_state, params),
                               Provenance::Covering, sample_seed};
            if (opt.filter_loss_threshold >= 0 && depth_mse(s.after, flat) > opt.filter_loss_threshold) {
                if (log) log("covering sample " + std::to_string(i) + " filtered: residual loss too high");
                seed_offset += 0x9e3779b97f4a7c15ull;
                --i;
                continue;
            }
            out.push_back(std::move(s));
        } catch (const SimDivergenceError& err) {
            if (log) log("covering sample " + std::to_string(i) + " discarded: " + err.what());
            seed_offset += 0x9e3779b97f4a7c15ull;
            --i;
        }
    }
    return out;
}

FabricState restore_covering_state(const TransitionSample& sample, const SimParams& params) {
    if (sample.provenance != Provenance::Covering)
        throw std::invalid_argument("only covering samples record a restorable perturbation");
    const auto candidates = covering_candidate_points();
    std::mt19937_64 rng(sample.seed);
    auto [cx, cy] = candidates[std::uniform_int_distribution<std::size_t>(0, candidates.size() - 1)(rng)];
    double angle = std::uniform_real_distribution<double>(0, 2 * 3.14159265358979323846)(rng);
    // assumes the generator ran with the default perturb_max
    double dist = std::uniform_real_distribution<double>(1.0, FinalCoveringOptions{}.perturb_max)(rng);
    int px = std::clamp(static_cast<int>(std::lround(cx + dist * std::cos(angle))), 0, M);
    int py = std::clamp(static_cast<int>(std::lround(cy + dist * std::sin(angle))), 0, M);
    return execute_action(spread_state(),
                          {static_cast<std::uint8_t>(cx), static_cast<std::uint8_t>(cy),
                           static_cast<std::uint8_t>(px), static_cast<std::uint8_t>(py)},
                          params);
}

SplitResult split(std::size_t n, double ratio, std::uint64_t seed) {
    if (n == 0) throw std::invalid_argument("cannot split an empty dataset");
    if (!(ratio > 0 && ratio < 1)) throw std::invalid_argument("split ratio must lie in (0,1)");
    std::vector<std::uint32_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0u);
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    std::size_t n_train = static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratio));
    SplitResult r;
    r.train.assign(idx.begin(), idx.begin() + n_train);
    r.test.assign(idx.begin() + n_train, idx.end());
    return r;
}

namespace {
constexpr char kSampleMagic[8] = {'Q', 'S', 'D', 'S', 'E', 'T', '\0', '\0'};
constexpr std::uint8_t kSampleVersion = 1;
} // namespace

void write_samples(const std::string& path, const std::vector<TransitionSample>& samples) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f.write(kSampleMagic, 8);
    f.put(static_cast<char>(kSampleVersion));
    for (const TransitionSample& s : samples) {
        f.put(static_cast<char>(s.provenance));
        std::uint64_t seed = s.seed;
        char seed_bytes[8];
        for (int i = 0; i < 8; ++i) seed_bytes[i] = static_cast<char>((seed >> (8 * i)) & 0xff);
        f.write(seed_bytes, 8);
        std::uint8_t act[4] = {s.action.gx, s.action.gy, s.action.rx, s.action.ry};
        f.write(reinterpret_cast<const char*>(act), 4);
        f.write(reinterpret_cast<const char*>(s.before.cells.data()), kGridCells);
        f.write(reinterpret_cast<const char*>(s.after.cells.data()), kGridCells);
    }
}

std::vector<TransitionSample> read_samples(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open: " + path);
    char magic[8];
    f.read(magic, 8);
    if (!f || std::memcmp(magic, kSampleMagic, 8) != 0)
        throw MalformedStateError("bad sample-file magic: " + path);
    int version = f.get();
    if (version != kSampleVersion)
        throw MalformedStateError("unsupported sample-file version " + std::to_string(version));
    std::vector<TransitionSample> out;
    while (true) {
        int prov = f.get();
        if (prov == EOF) break;
        TransitionSample s;
        s.provenance = static_cast<Provenance>(prov);
        char seed_bytes[8];
        f.read(seed_bytes, 8);
        std::uint64_t seed = 0;
        for (int i = 0; i < 8; ++i) seed |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(seed_bytes[i])) << (8 * i);
        s.seed = seed;
        std::uint8_t act[4];
        f.read(reinterpret_cast<char*>(act), 4);
        s.action = {act[0], act[1], act[2], act[3]};
        f.read(reinterpret_cast<char*>(s.before.cells.data()), kGridCells);
        f.read(reinterpret_cast<char*>(s.after.cells.data()), kGridCells);
        if (!f) throw MalformedStateError("truncated sample file: " + path);
        out.push_back(std::move(s));
    }
    return out;
}

void write_manifest(const std::string& path, const DatasetManifest& m) {
    nlohmann::json j{
        {"format_version", m.format_version},
        {"seed", m.seed},
        {"count_random", m.count_random},
        {"count_covering", m.count_covering},
        {"augmented", m.augmented},
        {"split", {{"train", m.split.train}, {"test", m.split.test}}},
    };
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << j.dump(2) << "\n";
}

DatasetManifest read_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open: " + path);
    nlohmann::json j = nlohmann::json::parse(f);
    DatasetManifest m;
    m.format_version = j.at("format_version").get<int>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.count_random = j.at("count_random").get<std::size_t>();
    m.count_covering = j.at("count_covering").get<std::size_t>();
    m.augmented = j.at("augmented").get<bool>();
    m.split.train = j.at("split").at("train").get<std::vector<std::uint32_t>>();
    m.split.test = j.at("split").at("test").get<std::vector<std::uint32_t>>();
    return m;
}

} // namespace qs
