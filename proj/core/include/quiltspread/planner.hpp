#pragma once

#include "quiltspread/grid.hpp"
#include "quiltspread/net.hpp"
#include "quiltspread/sim.hpp"

#include <array>
#include <cstdint>
#include <memory>
#include <vector>

namespace qs {

struct EmptyContourError : std::runtime_error {
    EmptyContourError() : std::runtime_error("no quilt material to grasp: contour is empty") {}
};

/// Planar footprint of the quilt with an optional erosion margin.
/// f() realizes the constraint indicator: -1 strictly inside, 0 on the
/// boundary of the eroded footprint, +1 outside.
struct ContourRegion {
    std::array<bool, kGridCells> occupied{}; // pre-erosion footprint
    std::array<bool, kGridCells> inside{};   // eroded footprint, f <= 0 here
    int margin = 0;

    int f(int x, int y) const;
    bool feasible(int x, int y) const { return inside[static_cast<std::size_t>(y) * kGridSize + x]; }
    bool empty() const;
    /// Nearest cell with f <= 0 (ties broken by scan order). Throws
    /// EmptyContourError when the region is empty.
    std::pair<int, int> nearest_feasible(int x, int y) const;
};

/// Occupancy from a depth grid alone: cells with material plus the
/// flood-filled covered region (cells at level 0 not reachable from the
/// border through level-0 cells).
std::array<bool, kGridCells> covered_footprint(const DepthGrid& depth);

ContourRegion contour(const DepthGrid& depth, int margin);
ContourRegion contour(const FabricState& state, int margin);

struct QuadrantWeights {
    std::array<double, 4> coverage{};
    std::array<double, 4> weights{}; // positive, sum to 1
};

/// Quadrant order: (low x, low y), (high x, low y), (low x, high y), (high x, high y).
/// weight_q is proportional to (1 - coverage_q + epsilon).
QuadrantWeights quadrant_weights(const std::array<bool, kGridCells>& covered,
                                 const std::array<bool, kGridCells>& target_footprint,
                                 double epsilon = 0.05);

/// Forward dynamics handle for planning: the simulator oracle or the
/// learned model behind one interface.
class ForwardModel {
public:
    virtual ~ForwardModel() = default;
    virtual DepthGrid current_depth() const = 0;
    virtual void advance(const ActionVector& action) = 0;
    virtual std::unique_ptr<ForwardModel> clone() const = 0;
    /// Grasp-feasibility region of the current state. The default derives it
    /// from the depth grid; models that know the true planar footprint
    /// (the simulator) override it, since a single flat layer reads level 0.
    virtual ContourRegion contour_region(int margin) const;
};

class SimulatorModel final : public ForwardModel {
public:
    SimulatorModel(FabricState state, SimParams params);
    DepthGrid current_depth() const override;
    void advance(const ActionVector& action) override;
    std::unique_ptr<ForwardModel> clone() const override;
    ContourRegion contour_region(int margin) const override;
    const FabricState& state() const { return state_; }

private:
    FabricState state_;
    SimParams params_;
};

class LearnedModel final : public ForwardModel {
public:
    LearnedModel(const EmdNet& net, const DepthGrid& initial);
    DepthGrid current_depth() const override;
    void advance(const ActionVector& action) override;
    std::unique_ptr<ForwardModel> clone() const override;

private:
    const EmdNet* net_;
    std::vector<double> latent_;
    DepthGrid depth_;
};

enum class PlanMethod { GA, PSO, BP };
enum class MultiStepMode { Joint, GreedyReceding };

struct PlannerConfig {
    // GA
    int population = 64;
    int generations = 50;
    int tournament_k = 3;
    double crossover_p = 0.5;
    double mutation_sigma = 4.0;
    double mutation_rate = 0.25;
    int elitism = 2;
    // PSO
    int pso_particles = 64;
    int pso_iterations = 50;
    double pso_inertia = 0.72;
    double pso_cognitive = 1.49;
    double pso_social = 1.49;
    double pso_max_velocity = 16.0;
    // BP baseline (normalized-direction gradient steps in [0,1]^4)
    int bp_iterations = 300;
    double bp_step = 0.02;
    // search-space pruning (contour-restricted grasp init, quadrant-weighted release)
    bool pruning = true;
    int contour_margin = 0;
    double quadrant_epsilon = 0.05;
};

struct PlanningProblem {
    DepthGrid current;
    DepthGrid desired;
    ForwardModel* model = nullptr;
    int steps = 1;
    PlanMethod method = PlanMethod::GA;
    PlannerConfig config;
    std::uint64_t seed = 0;
};

struct PlanStep {
    ActionVector action;
    double predicted_loss; // depth MSE vs desired, raw levels
};

struct Plan {
    std::vector<PlanStep> steps;
    double initial_loss = 0;
    long evaluations = 0;
    double wall_time_s = 0;
    bool early_stop = false;
    bool contour_violation = false; // only the BP baseline can set this
    // best-so-far trace: (evaluations used, best loss), for budget studies
    std::vector<std::pair<long, double>> best_curve;
};

Plan plan_ga(const PlanningProblem& problem);
Plan plan_pso(const PlanningProblem& problem);

/// Gradient descent through the learned model on the continuous action
/// relaxation. Faithful baseline: no feasibility projection; contour
/// violations are reported, never repaired.
Plan plan_bp(const PlanningProblem& problem, const EmdNet& net);

Plan plan_multistep(const PlanningProblem& problem, MultiStepMode mode);

void write_plan_json(const std::string& path, const Plan& plan);

} // namespace qs
