#pragma once

#include "quiltspread/grid.hpp"
#include "quiltspread/sim.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace qs {

enum class Provenance : std::uint8_t { Random = 0, Covering = 1 };

struct TransitionSample {
    DepthGrid before;
    ActionVector action;
    DepthGrid after;
    Provenance provenance = Provenance::Random;
    std::uint64_t seed = 0;

    bool operator==(const TransitionSample&) const = default;
};

/// Elements of the dihedral group of the square grid.
enum class Dihedral {
    Identity,
    Rot90,
    Rot180,
    Rot270,
    MirrorX,
    MirrorY,
    Transpose,     // mirror across the main diagonal
    AntiTranspose, // mirror across the anti-diagonal
};

inline constexpr Dihedral kDihedralElements[8] = {
    Dihedral::Identity, Dihedral::Rot90,   Dihedral::Rot180,    Dihedral::Rot270,
    Dihedral::MirrorX,  Dihedral::MirrorY, Dihedral::Transpose, Dihedral::AntiTranspose,
};

std::pair<int, int> transform_coord(Dihedral op, int x, int y);
DepthGrid transform_grid(Dihedral op, const DepthGrid& g);
ActionVector transform_action(Dihedral op, const ActionVector& a);
TransitionSample augment(const TransitionSample& sample, Dihedral op);

/// World-space counterpart of the grid isometry, for equivariance checks.
FabricState transform_state(Dihedral op, const FabricState& state);

struct RandomSpreadingOptions {
    int n_episodes = 1;
    std::uint64_t seed = 0;
    int actions_per_episode = 4;
};

/// Episodes of random pick-and-place from a spread quilt. Grasps are drawn
/// uniformly from occupied columns, releases uniformly from the whole grid.
/// Episodes that diverge are discarded with a note on the log callback and
/// regenerated under an advanced seed.
std::vector<TransitionSample> gen_random_spreading(const RandomSpreadingOptions& opt, const SimParams& params,
                                                   const std::function<void(const std::string&)>& log = {});

struct FinalCoveringOptions {
    int n_samples = 1;
    std::uint64_t seed = 0;
    double perturb_max = 20.0;
    // drop samples whose after-state strays this far (depth MSE, raw levels)
    // from the spread state; <0 disables the filter
    double filter_loss_threshold = 4.0;
};

/// Perturb a corner/edge point of the spread quilt, then record the action
/// that drags it back to its original position.
std::vector<TransitionSample> gen_final_covering(const FinalCoveringOptions& opt, const SimParams& params,
                                                 const std::function<void(const std::string&)>& log = {});

/// The 4 corners plus 4 edge midpoints used by the covering generator.
std::vector<std::pair<int, int>> covering_candidate_points();

/// Replay a covering sample's recorded perturbation to recover the full
/// fabric state behind its before-grid. Throws std::invalid_argument for
/// samples that did not come from the covering generator.
FabricState restore_covering_state(const TransitionSample& sample, const SimParams& params);

/// Mean squared difference over the 4096 cells, in raw altitude levels.
double depth_mse(const DepthGrid& a, const DepthGrid& b);

struct SplitResult {
    std::vector<std::uint32_t> train;
    std::vector<std::uint32_t> test;
};

/// Deterministic shuffled split; train gets floor(n*ratio) entries.
SplitResult split(std::size_t n, double ratio, std::uint64_t seed);

// Record-oriented binary sample file (see docs/formats.md).
void write_samples(const std::string& path, const std::vector<TransitionSample>& samples);
std::vector<TransitionSample> read_samples(const std::string& path);

struct DatasetManifest {
    int format_version = 1;
    std::uint64_t seed = 0;
    std::size_t count_random = 0;
    std::size_t count_covering = 0;
    bool augmented = false;
    SplitResult split;
};

void write_manifest(const std::string& path, const DatasetManifest& m);
DatasetManifest read_manifest(const std::string& path);

} // namespace qs
