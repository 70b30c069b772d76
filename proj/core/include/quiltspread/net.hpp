#pragma once

#include "quiltspread/datagen.hpp"
#include "quiltspread/grid.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace qs {

inline constexpr int kLatentDim = 1024;
inline constexpr int kActionDim = 4;

enum class StateEncoding { Depth, Voxel };

struct NetConfig {
    StateEncoding mode = StateEncoding::Depth;
    std::vector<int> channels{8, 16, 32, 64}; // four stride-2 stages, 64 -> 4
    int latent = kLatentDim;
    double leaky_slope = 0.1;

    int input_channels() const { return mode == StateEncoding::Depth ? 1 : kDepthLevels; }
    int state_size() const { return input_channels() * kGridCells; }
};

struct TrainConfig {
    int batch_size = 32;
    double momentum = 0.9;
    double weight_decay = 0.001;
    double learning_rate = 0.00005;
    int max_iterations = 3000;
    int test_interval = 100; // 0 disables periodic test evaluation
    std::uint64_t seed = 0;
};

struct NanLossError : std::runtime_error {
    int iteration;
    std::vector<std::size_t> batch_ids;
    NanLossError(int iter, std::vector<std::size_t> ids);
};

struct LossCurvePoint {
    int iteration;
    double train_loss;
    double test_loss; // NaN when not evaluated this iteration
};

/// Normalized model-side representations: depth cells scaled to [0,1],
/// voxel grids laid out channel-major (level, y, x).
std::vector<double> to_model_input(const DepthGrid& g, StateEncoding mode);
DepthGrid to_depth_levels(const std::vector<double>& model_output, StateEncoding mode);

/// Mean squared error in raw altitude levels over the 4096 cells.
double loss_depth(const std::vector<double>& predicted_levels, const DepthGrid& target);
double loss_depth(const std::vector<double>& predicted_levels, const std::vector<double>& target_levels);

/// Mean squared error over the 64*64*32 voxel entries.
double loss_voxel(const std::vector<double>& predicted, const VoxelGrid& target);
double loss_voxel(const std::vector<double>& predicted, const std::vector<double>& target);

/// Encode-Manipulate-Decode forward dynamics model with manual backprop.
class EmdNet {
public:
    EmdNet(const NetConfig& cfg, std::uint64_t init_seed);
    EmdNet(const EmdNet&);
    EmdNet& operator=(const EmdNet&);
    EmdNet(EmdNet&&) noexcept;
    EmdNet& operator=(EmdNet&&) noexcept;
    ~EmdNet();

    const NetConfig& config() const;

    std::vector<double> encode(const std::vector<double>& state) const;
    std::vector<double> manipulate(const std::vector<double>& latent,
                                   const std::vector<double>& action_normalized) const;
    std::vector<double> decode(const std::vector<double>& latent) const;

    /// decode(M(...M(encode(state), o_1)..., o_n)); latent chaining without
    /// intermediate decodes. Actions given in grid units, normalized inside.
    std::vector<double> predict(const DepthGrid& state, const std::vector<ActionVector>& actions) const;
    DepthGrid predict_depth(const DepthGrid& state, const std::vector<ActionVector>& actions) const;

    /// Loss (normalized units) and its gradient with respect to the
    /// normalized action input, holding parameters fixed. Used by the
    /// BP-style planner and the finite-difference oracles.
    double action_gradient(const std::vector<double>& state_in, const std::vector<double>& action_normalized,
                           const std::vector<double>& target_state, std::vector<double>& grad_action) const;

    /// One forward+backward pass on a single transition, accumulating
    /// parameter gradients. Returns the normalized loss.
    double accumulate_gradients(const std::vector<double>& state_in, const std::vector<double>& action_normalized,
                                const std::vector<double>& target_state);
    void zero_gradients();
    void sgd_update(double lr, double momentum, double weight_decay, double grad_scale);

    std::size_t parameter_count() const;
    // flat views for checkpointing and finite-difference checks
    double& parameter(std::size_t i);
    double parameter(std::size_t i) const;
    double gradient(std::size_t i) const;

    void save(const std::string& path) const;
    static EmdNet load(const std::string& path);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

std::vector<double> normalize_action(const ActionVector& a);

/// SGD with momentum and weight decay over a transition dataset.
/// Deterministic per seed; throws NanLossError with diagnostics.
std::vector<LossCurvePoint> train(EmdNet& net, const std::vector<TransitionSample>& train_set,
                                  const std::vector<TransitionSample>& test_set, const TrainConfig& cfg);

void write_loss_curve_csv(const std::string& path, const std::vector<LossCurvePoint>& curve);

} // namespace qs
