#include "quiltspread/planner.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <random>

namespace qs {

namespace {
int cell_index(int x, int y) { return y * kGridSize + x; }
}

int ContourRegion::f(int x, int y) const {
    if (x < 0 || x >= kGridSize || y < 0 || y >= kGridSize) return 1;
    if (!inside[cell_index(x, y)]) return 1;
    const int dx[4] = {1, -1, 0, 0};
    const int dy[4] = {0, 0, 1, -1};
    for (int k = 0; k < 4; ++k) {
        int nx = x + dx[k], ny = y + dy[k];
        if (nx < 0 || nx >= kGridSize || ny < 0 || ny >= kGridSize || !inside[cell_index(nx, ny)])
            return 0;
    }
    return -1;
}

bool ContourRegion::empty() const {
    return std::none_of(inside.begin(), inside.end(), [](bool b) { return b; });
}

std::pair<int, int> ContourRegion::nearest_feasible(int x, int y) const {
    if (feasible(std::clamp(x, 0, kGridSize - 1), std::clamp(y, 0, kGridSize - 1)))
        return {std::clamp(x, 0, kGridSize - 1), std::clamp(y, 0, kGridSize - 1)};
    long best_d = std::numeric_limits<long>::max();
    int bx = -1, by = -1;
    for (int cy = 0; cy < kGridSize; ++cy) {
        for (int cx = 0; cx < kGridSize; ++cx) {
            if (!inside[cell_index(cx, cy)]) continue;
            long d = static_cast<long>(cx - x) * (cx - x) + static_cast<long>(cy - y) * (cy - y);
            if (d < best_d) { best_d = d; bx = cx; by = cy; }
        }
    }
    if (bx < 0) throw EmptyContourError();
    return {bx, by};
}

namespace {

// flood the complement of `material` from the border; unreached complement
// cells are enclosed by the quilt and count as covered
std::array<bool, kGridCells> close_holes(const std::array<bool, kGridCells>& material) {
    std::array<bool, kGridCells> outside{};
    std::vector<int> stack;
    for (int x = 0; x < kGridSize; ++x) {
        for (int y : {0, kGridSize - 1}) {
            int i = cell_index(x, y);
            if (!material[i] && !outside[i]) { outside[i] = true; stack.push_back(i); }
        }
    }
    for (int y = 0; y < kGridSize; ++y) {
        for (int x : {0, kGridSize - 1}) {
            int i = cell_index(x, y);
            if (!material[i] && !outside[i]) { outside[i] = true; stack.push_back(i); }
        }
    }
    while (!stack.empty()) {
        int i = stack.back();
        stack.pop_back();
        int x = i % kGridSize, y = i / kGridSize;
        const int dx[4] = {1, -1, 0, 0};
        const int dy[4] = {0, 0, 1, -1};
        for (int k = 0; k < 4; ++k) {
            int nx = x + dx[k], ny = y + dy[k];
            if (nx < 0 || nx >= kGridSize || ny < 0 || ny >= kGridSize) continue;
            int ni = cell_index(nx, ny);
            if (!material[ni] && !outside[ni]) { outside[ni] = true; stack.push_back(ni); }
        }
    }
    std::array<bool, kGridCells> covered{};
    for (int i = 0; i < kGridCells; ++i) covered[i] = !outside[i];
    return covered;
}

std::array<bool, kGridCells> erode(std::array<bool, kGridCells> mask, int margin) {
    for (int m = 0; m < margin; ++m) {
        std::array<bool, kGridCells> next{};
        for (int y = 0; y < kGridSize; ++y) {
            for (int x = 0; x < kGridSize; ++x) {
                if (!mask[cell_index(x, y)]) continue;
                bool keep = true;
                const int dx[4] = {1, -1, 0, 0};
                const int dy[4] = {0, 0, 1, -1};
                for (int k = 0; k < 4 && keep; ++k) {
                    int nx = x + dx[k], ny = y + dy[k];
                    if (nx < 0 || nx >= kGridSize || ny < 0 || ny >= kGridSize || !mask[cell_index(nx, ny)])
                        keep = false;
                }
                next[cell_index(x, y)] = keep;
            }
        }
        mask = next;
    }
    return mask;
}

ContourRegion make_contour(const std::array<bool, kGridCells>& material, int margin) {
    ContourRegion r;
    r.occupied = close_holes(material);
    r.inside = erode(r.occupied, margin);
    r.margin = margin;
    if (r.empty()) throw EmptyContourError();
    return r;
}

} // namespace

std::array<bool, kGridCells> covered_footprint(const DepthGrid& depth) {
    std::array<bool, kGridCells> material{};
    for (int i = 0; i < kGridCells; ++i) material[i] = depth.cells[i] > 0;
    return close_holes(material);
}

ContourRegion contour(const DepthGrid& depth, int margin) {
    std::array<bool, kGridCells> material{};
    for (int i = 0; i < kGridCells; ++i) material[i] = depth.cells[i] > 0;
    return make_contour(material, margin);
}

ContourRegion contour(const FabricState& state, int margin) {
    return make_contour(occupancy(state), margin);
}

QuadrantWeights quadrant_weights(const std::array<bool, kGridCells>& covered,
                                 const std::array<bool, kGridCells>& target_footprint, double epsilon) {
    // an all-level-0 desired grid has no discernible footprint; treat it as
    // a full-grid target
    bool any_target = std::any_of(target_footprint.begin(), target_footprint.end(), [](bool b) { return b; });
    QuadrantWeights qw;
    const int half = kGridSize / 2;
    std::array<long, 4> target_cells{}, covered_cells{};
    for (int y = 0; y < kGridSize; ++y) {
        for (int x = 0; x < kGridSize; ++x) {
            int q = (x >= half ? 1 : 0) + (y >= half ? 2 : 0);
            bool in_target = any_target ? target_footprint[cell_index(x, y)] : true;
            if (!in_target) continue;
            ++target_cells[q];
            if (covered[cell_index(x, y)]) ++covered_cells[q];
        }
    }
    double sum = 0;
    for (int q = 0; q < 4; ++q) {
        qw.coverage[q] = target_cells[q] > 0 ? static_cast<double>(covered_cells[q]) / target_cells[q] : 1.0;
        qw.weights[q] = 1.0 - qw.coverage[q] + epsilon;
        sum += qw.weights[q];
    }
    for (int q = 0; q < 4; ++q) qw.weights[q] /= sum;
    return qw;
}

ContourRegion ForwardModel::contour_region(int margin) const { return contour(current_depth(), margin); }

SimulatorModel::SimulatorModel(FabricState state, SimParams params)
    : state_(std::move(state)), params_(std::move(params)) {}
ContourRegion SimulatorModel::contour_region(int margin) const { return contour(state_, margin); }
DepthGrid SimulatorModel::current_depth() const { return to_depth_grid(state_, params_); }
void SimulatorModel::advance(const ActionVector& action) { state_ = execute_action(state_, action, params_); }
std::unique_ptr<ForwardModel> SimulatorModel::clone() const { return std::make_unique<SimulatorModel>(*this); }

LearnedModel::LearnedModel(const EmdNet& net, const DepthGrid& initial) : net_(&net), depth_(initial) {
    latent_ = net.encode(to_model_input(initial, net.config().mode));
}
DepthGrid LearnedModel::current_depth() const { return depth_; }
void LearnedModel::advance(const ActionVector& action) {
    latent_ = net_->manipulate(latent_, normalize_action(action));
    depth_ = to_depth_levels(net_->decode(latent_), net_->config().mode);
}
std::unique_ptr<ForwardModel> LearnedModel::clone() const { return std::make_unique<LearnedModel>(*this); }

namespace {

struct EvalOutcome {
    std::vector<PlanStep> steps;
    double final_loss = 0;
};

// Round a genome to actions, repair grasps onto the contour of the state
// preceding each step, and roll the forward model through them.
EvalOutcome evaluate_genome(const PlanningProblem& pb, const std::vector<double>& genes) {
    EvalOutcome out;
    auto model = pb.model->clone();
    for (int s = 0; s < pb.steps; ++s) {
        ContourRegion region;
        if (s == 0) {
            region = model->contour_region(pb.config.contour_margin);
        } else {
            // a learned model can predict a state with no graspable material;
            // end the rollout there instead of failing the whole plan
            try {
                region = model->contour_region(pb.config.contour_margin);
            } catch (const EmptyContourError&) {
                break;
            }
        }
        auto round_gene = [&](double g) {
            return std::clamp(static_cast<int>(std::lround(g)), 0, kGridSize - 1);
        };
        int gx = round_gene(genes[4 * s + 0]);
        int gy = round_gene(genes[4 * s + 1]);
        std::tie(gx, gy) = region.nearest_feasible(gx, gy);
        ActionVector a{static_cast<std::uint8_t>(gx), static_cast<std::uint8_t>(gy),
                       static_cast<std::uint8_t>(round_gene(genes[4 * s + 2])),
                       static_cast<std::uint8_t>(round_gene(genes[4 * s + 3]))};
        model->advance(a);
        double loss = depth_mse(model->current_depth(), pb.desired);
        out.steps.push_back({a, loss});
    }
    out.final_loss = out.steps.back().predicted_loss;
    return out;
}

struct InitSampler {
    const PlanningProblem& pb;
    ContourRegion region;
    std::vector<int> feasible_cells;
    QuadrantWeights qw;
    std::array<std::vector<int>, 4> uncovered_by_quadrant; // target cells missing coverage
    std::array<std::vector<int>, 4> anchors_by_quadrant;   // target bbox corners and edge midpoints
    std::vector<int> grasp_anchors;                        // footprint bbox corners and edge midpoints
    std::vector<int> piled_cells;                          // depth > 0, weighted by level
    std::discrete_distribution<int> piled_dist;

    explicit InitSampler(const PlanningProblem& p)
        : pb(p), region(p.model ? p.model->contour_region(p.config.contour_margin)
                                : contour(p.current, p.config.contour_margin)) {
        for (int i = 0; i < kGridCells; ++i)
            if (region.inside[i]) feasible_cells.push_back(i);
        // corner-grasp prior: the quilt is steered by its extremities, so
        // seed grasp candidates at the footprint's bbox corners and midpoints
        {
            int x0 = kGridSize, y0 = kGridSize, x1 = -1, y1 = -1;
            for (int i = 0; i < kGridCells; ++i)
                if (region.occupied[i]) {
                    int x = i % kGridSize, y = i / kGridSize;
                    x0 = std::min(x0, x); x1 = std::max(x1, x);
                    y0 = std::min(y0, y); y1 = std::max(y1, y);
                }
            if (x1 >= x0) {
                int xm = (x0 + x1) / 2, ym = (y0 + y1) / 2;
                const int ax[8] = {x0, x1, x0, x1, xm, xm, x0, x1};
                const int ay[8] = {y0, y0, y1, y1, y0, y1, ym, ym};
                for (int k = 0; k < 8; ++k) grasp_anchors.push_back(cell_index(ax[k], ay[k]));
            }
        }
        // piled fabric marks where a previous action left material folded
        {
            std::vector<double> w;
            for (int i = 0; i < kGridCells; ++i)
                if (pb.current.cells[i] > 0) {
                    piled_cells.push_back(i);
                    w.push_back(static_cast<double>(pb.current.cells[i]));
                }
            if (!piled_cells.empty()) piled_dist = std::discrete_distribution<int>(w.begin(), w.end());
        }
        auto covered = covered_footprint(pb.current);
        auto target = covered_footprint(pb.desired);
        qw = quadrant_weights(covered, target, pb.config.quadrant_epsilon);
        bool any_target = std::any_of(target.begin(), target.end(), [](bool b) { return b; });
        const int half = kGridSize / 2;
        for (int y = 0; y < kGridSize; ++y)
            for (int x = 0; x < kGridSize; ++x) {
                int i = cell_index(x, y);
                bool in_target = any_target ? target[i] : true;
                if (in_target && !covered[i])
                    uncovered_by_quadrant[(x >= half ? 1 : 0) + (y >= half ? 2 : 0)].push_back(i);
            }
        // spreading drags fabric toward the target's extremities: seed release
        // candidates at the corners and edge midpoints of its bounding box
        int x0 = kGridSize, y0 = kGridSize, x1 = -1, y1 = -1;
        for (int y = 0; y < kGridSize; ++y)
            for (int x = 0; x < kGridSize; ++x)
                if (any_target ? target[cell_index(x, y)] : true) {
                    x0 = std::min(x0, x); x1 = std::max(x1, x);
                    y0 = std::min(y0, y); y1 = std::max(y1, y);
                }
        if (x1 >= x0) {
            int xm = (x0 + x1) / 2, ym = (y0 + y1) / 2;
            const int ax[8] = {x0, x1, x0, x1, xm, xm, x0, x1};
            const int ay[8] = {y0, y0, y1, y1, y0, y1, ym, ym};
            for (int k = 0; k < 8; ++k)
                anchors_by_quadrant[(ax[k] >= half ? 1 : 0) + (ay[k] >= half ? 2 : 0)].push_back(
                    cell_index(ax[k], ay[k]));
        }
    }

    void sample_step(std::mt19937_64& rng, double* genes4) {
        std::uniform_real_distribution<double> box(0.0, kGridSize - 1.0);
        if (!pb.config.pruning) {
            for (int i = 0; i < 4; ++i) genes4[i] = box(rng);
            return;
        }
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::normal_distribution<double> jitter(0.0, 2.0);
        // grasp: piled fabric, a footprint extremity, or anywhere feasible
        double gmix = unit(rng);
        if (!piled_cells.empty() && gmix < 0.4) {
            int g = piled_cells[piled_dist(rng)];
            genes4[0] = std::clamp(g % kGridSize + jitter(rng), 0.0, kGridSize - 1.0);
            genes4[1] = std::clamp(g / kGridSize + jitter(rng), 0.0, kGridSize - 1.0);
        } else if (!grasp_anchors.empty() && gmix < 0.7) {
            std::uniform_int_distribution<std::size_t> pick_a(0, grasp_anchors.size() - 1);
            int g = grasp_anchors[pick_a(rng)];
            genes4[0] = std::clamp(g % kGridSize + jitter(rng), 0.0, kGridSize - 1.0);
            genes4[1] = std::clamp(g / kGridSize + jitter(rng), 0.0, kGridSize - 1.0);
        } else {
            std::uniform_int_distribution<std::size_t> pick(0, feasible_cells.size() - 1);
            int g = feasible_cells[pick(rng)];
            genes4[0] = g % kGridSize;
            genes4[1] = g / kGridSize;
        }
        // release: tuck the grasped material back to its nearest anchor, or
        // spread toward an under-covered quadrant
        if (!grasp_anchors.empty() && unit(rng) < 0.5) {
            long best = std::numeric_limits<long>::max();
            int ba = grasp_anchors.front();
            for (int a : grasp_anchors) {
                long dx = a % kGridSize - static_cast<long>(std::lround(genes4[0]));
                long dy = a / kGridSize - static_cast<long>(std::lround(genes4[1]));
                long d = dx * dx + dy * dy;
                if (d < best) { best = d; ba = a; }
            }
            genes4[2] = std::clamp(ba % kGridSize + jitter(rng), 0.0, kGridSize - 1.0);
            genes4[3] = std::clamp(ba / kGridSize + jitter(rng), 0.0, kGridSize - 1.0);
            return;
        }
        std::discrete_distribution<int> quad(qw.weights.begin(), qw.weights.end());
        int q = quad(rng);
        const int half = kGridSize / 2;
        // favor release points at the target's extremities and where coverage
        // is missing; keep some uniform spread within the quadrant
        double mix = unit(rng);
        if (!anchors_by_quadrant[q].empty() && mix < 0.4) {
            std::uniform_int_distribution<std::size_t> pick_a(0, anchors_by_quadrant[q].size() - 1);
            int r = anchors_by_quadrant[q][pick_a(rng)];
            genes4[2] = r % kGridSize;
            genes4[3] = r / kGridSize;
        } else if (!uncovered_by_quadrant[q].empty() && mix < 0.7) {
            std::uniform_int_distribution<std::size_t> pick_u(0, uncovered_by_quadrant[q].size() - 1);
            int r = uncovered_by_quadrant[q][pick_u(rng)];
            genes4[2] = r % kGridSize;
            genes4[3] = r / kGridSize;
        } else {
            std::uniform_real_distribution<double> off(0.0, half - 1.0);
            genes4[2] = (q % 2) * half + off(rng);
            genes4[3] = (q / 2) * half + off(rng);
        }
    }

    std::vector<double> sample_genome(std::mt19937_64& rng) {
        std::vector<double> g(4 * static_cast<std::size_t>(pb.steps));
        for (int s = 0; s < pb.steps; ++s) sample_step(rng, g.data() + 4 * s);
        return g;
    }
};

// keep steps only while the predicted loss strictly decreases
void truncate_non_decreasing(Plan& plan, int requested_steps) {
    double prev = plan.initial_loss;
    std::size_t kept = 0;
    for (const PlanStep& s : plan.steps) {
        if (s.predicted_loss < prev) {
            prev = s.predicted_loss;
            ++kept;
        } else {
            break;
        }
    }
    if (kept < plan.steps.size()) plan.steps.resize(kept);
    plan.early_stop = static_cast<int>(plan.steps.size()) < requested_steps;
}

} // namespace

Plan plan_ga(const PlanningProblem& problem) {
    const auto t0 = std::chrono::steady_clock::now();
    const PlannerConfig& cfg = problem.config;
    InitSampler sampler(problem);
    std::mt19937_64 rng(problem.seed);

    struct Individual {
        std::vector<double> genes;
        EvalOutcome outcome;
        double fitness = 0;
    };
    std::vector<Individual> pop(cfg.population);
    Plan plan;
    plan.initial_loss = depth_mse(problem.current, problem.desired);
    long evals = 0;
    double best_fit = std::numeric_limits<double>::infinity();
    EvalOutcome best_outcome;

    // rounded genes determine the rollout exactly, so repeat genomes
    // (elites, duplicate children) reuse their cached outcome
    std::map<std::vector<int>, EvalOutcome> cache;
    auto eval_all = [&](std::vector<Individual>& p) {
        for (Individual& ind : p) {
            std::vector<int> key(ind.genes.size());
            for (std::size_t i = 0; i < key.size(); ++i)
                key[i] = std::clamp(static_cast<int>(std::lround(ind.genes[i])), 0, kGridSize - 1);
            auto it = cache.find(key);
            if (it == cache.end()) {
                it = cache.emplace(std::move(key), evaluate_genome(problem, ind.genes)).first;
                ++evals;
            }
            ind.outcome = it->second;
            ind.fitness = ind.outcome.final_loss;
            if (ind.fitness < best_fit) {
                best_fit = ind.fitness;
                best_outcome = ind.outcome;
            }
        }
        plan.best_curve.emplace_back(evals, best_fit);
    };

    for (Individual& ind : pop) ind.genes = sampler.sample_genome(rng);
    eval_all(pop);

    std::uniform_int_distribution<int> pick(0, cfg.population - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, cfg.mutation_sigma);

    auto tournament = [&]() -> const Individual& {
        const Individual* best = &pop[pick(rng)];
        for (int k = 1; k < cfg.tournament_k; ++k) {
            const Individual* c = &pop[pick(rng)];
            if (c->fitness < best->fitness) best = c;
        }
        return *best;
    };

    for (int gen = 1; gen < cfg.generations; ++gen) {
        std::vector<Individual> next;
        next.reserve(cfg.population);
        std::vector<const Individual*> ranked;
        for (const Individual& i : pop) ranked.push_back(&i);
        std::sort(ranked.begin(), ranked.end(),
                  [](const Individual* a, const Individual* b) { return a->fitness < b->fitness; });
        for (int e = 0; e < cfg.elitism && e < cfg.population; ++e) next.push_back(*ranked[e]);
        while (static_cast<int>(next.size()) < cfg.population) {
            const Individual& pa = tournament();
            const Individual& pb = tournament();
            Individual child;
            child.genes.resize(pa.genes.size());
            for (std::size_t i = 0; i < child.genes.size(); ++i)
                child.genes[i] = unit(rng) < cfg.crossover_p ? pa.genes[i] : pb.genes[i];
            for (double& g : child.genes)
                if (unit(rng) < cfg.mutation_rate)
                    g = std::clamp(g + gauss(rng), 0.0, kGridSize - 1.0);
            next.push_back(std::move(child));
        }
        pop = std::move(next);
        eval_all(pop);
    }

    plan.steps = best_outcome.steps;
    plan.evaluations = evals;
    truncate_non_decreasing(plan, problem.steps);
    plan.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return plan;
}

Plan plan_pso(const PlanningProblem& problem) {
    const auto t0 = std::chrono::steady_clock::now();
    const PlannerConfig& cfg = problem.config;
    InitSampler sampler(problem);
    std::mt19937_64 rng(problem.seed);
    const std::size_t dim = 4 * static_cast<std::size_t>(problem.steps);

    struct Particle {
        std::vector<double> x, v, best_x;
        double best_fit = std::numeric_limits<double>::infinity();
    };
    std::vector<Particle> swarm(cfg.pso_particles);
    Plan plan;
    plan.initial_loss = depth_mse(problem.current, problem.desired);
    long evals = 0;
    double gbest_fit = std::numeric_limits<double>::infinity();
    std::vector<double> gbest_x;
    EvalOutcome gbest_outcome;

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (Particle& p : swarm) {
        p.x = sampler.sample_genome(rng);
        p.v.assign(dim, 0.0);
    }

    std::map<std::vector<int>, EvalOutcome> cache;
    auto eval_swarm = [&]() {
        for (Particle& p : swarm) {
            std::vector<int> key(p.x.size());
            for (std::size_t d = 0; d < key.size(); ++d)
                key[d] = std::clamp(static_cast<int>(std::lround(p.x[d])), 0, kGridSize - 1);
            auto it = cache.find(key);
            if (it == cache.end()) {
                it = cache.emplace(std::move(key), evaluate_genome(problem, p.x)).first;
                ++evals;
            }
            const EvalOutcome& out = it->second;
            if (out.final_loss < p.best_fit) {
                p.best_fit = out.final_loss;
                p.best_x = p.x;
            }
            if (out.final_loss < gbest_fit) {
                gbest_fit = out.final_loss;
                gbest_x = p.x;
                gbest_outcome = out;
            }
        }
        plan.best_curve.emplace_back(evals, gbest_fit);
    };

    eval_swarm();
    for (int it = 1; it < cfg.pso_iterations; ++it) {
        for (Particle& p : swarm) {
            for (std::size_t d = 0; d < dim; ++d) {
                double r1 = unit(rng), r2 = unit(rng);
                p.v[d] = cfg.pso_inertia * p.v[d] + cfg.pso_cognitive * r1 * (p.best_x[d] - p.x[d]) +
                         cfg.pso_social * r2 * (gbest_x[d] - p.x[d]);
                p.v[d] = std::clamp(p.v[d], -cfg.pso_max_velocity, cfg.pso_max_velocity);
                p.x[d] = std::clamp(p.x[d] + p.v[d], 0.0, kGridSize - 1.0);
            }
        }
        eval_swarm();
    }

    plan.steps = gbest_outcome.steps;
    plan.evaluations = evals;
    truncate_non_decreasing(plan, problem.steps);
    plan.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return plan;
}

Plan plan_bp(const PlanningProblem& problem, const EmdNet& net) {
    const auto t0 = std::chrono::steady_clock::now();
    const PlannerConfig& cfg = problem.config;
    std::mt19937_64 rng(problem.seed);
    const StateEncoding mode = net.config().mode;
    const std::vector<double> target_in = to_model_input(problem.desired, mode);

    Plan plan;
    plan.initial_loss = depth_mse(problem.current, problem.desired);

    // one continuous action per step, optimized greedily through the model
    LearnedModel model(net, problem.current);
    DepthGrid state = problem.current;
    long evals = 0;
    for (int s = 0; s < problem.steps; ++s) {
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::vector<double> action{unit(rng), unit(rng), unit(rng), unit(rng)};
        std::vector<double> state_in = to_model_input(state, mode);
        std::vector<double> grad;
        for (int it = 0; it < cfg.bp_iterations; ++it) {
            net.action_gradient(state_in, action, target_in, grad);
            ++evals;
            double norm = 0;
            for (double g : grad) norm += g * g;
            norm = std::sqrt(norm);
            if (norm < 1e-14) break;
            for (int d = 0; d < kActionDim; ++d)
                action[d] = std::clamp(action[d] - cfg.bp_step * grad[d] / norm, 0.0, 1.0);
        }
        ActionVector a{
            static_cast<std::uint8_t>(std::clamp(static_cast<int>(std::lround(action[0] * 63.0)), 0, 63)),
            static_cast<std::uint8_t>(std::clamp(static_cast<int>(std::lround(action[1] * 63.0)), 0, 63)),
            static_cast<std::uint8_t>(std::clamp(static_cast<int>(std::lround(action[2] * 63.0)), 0, 63)),
            static_cast<std::uint8_t>(std::clamp(static_cast<int>(std::lround(action[3] * 63.0)), 0, 63))};
        // no projection: an infeasible grasp is reported, kept, and executed
        try {
            ContourRegion region = contour(state, cfg.contour_margin);
            if (region.f(a.gx, a.gy) > 0) plan.contour_violation = true;
        } catch (const EmptyContourError&) {
            plan.contour_violation = true;
        }
        model.advance(a);
        state = model.current_depth();
        plan.steps.push_back({a, depth_mse(state, problem.desired)});
    }
    plan.evaluations = evals;
    plan.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return plan;
}

Plan plan_multistep(const PlanningProblem& problem, MultiStepMode mode) {
    if (mode == MultiStepMode::Joint) {
        switch (problem.method) {
            case PlanMethod::GA: return plan_ga(problem);
            case PlanMethod::PSO: return plan_pso(problem);
            case PlanMethod::BP:
                throw std::invalid_argument("BP plans greedily; use GreedyReceding");
        }
    }
    const auto t0 = std::chrono::steady_clock::now();
    Plan plan;
    plan.initial_loss = depth_mse(problem.current, problem.desired);
    auto model = problem.model->clone();
    double prev_loss = plan.initial_loss;
    for (int s = 0; s < problem.steps; ++s) {
        PlanningProblem sub = problem;
        sub.current = model->current_depth();
        sub.model = model.get();
        sub.steps = 1;
        sub.seed = problem.seed + static_cast<std::uint64_t>(s) * 0x9e3779b97f4a7c15ull;
        Plan step_plan;
        try {
            step_plan = problem.method == PlanMethod::PSO ? plan_pso(sub) : plan_ga(sub);
        } catch (const EmptyContourError&) {
            // the rolled-forward state has no graspable material left
            plan.early_stop = true;
            break;
        }
        plan.evaluations += step_plan.evaluations;
        if (step_plan.steps.empty() || step_plan.steps.front().predicted_loss >= prev_loss) {
            plan.early_stop = true;
            break;
        }
        prev_loss = step_plan.steps.front().predicted_loss;
        plan.steps.push_back(step_plan.steps.front());
        model->advance(step_plan.steps.front().action);
    }
    plan.early_stop = plan.early_stop || static_cast<int>(plan.steps.size()) < problem.steps;
    plan.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return plan;
}

void write_plan_json(const std::string& path, const Plan& plan) {
    nlohmann::json steps = nlohmann::json::array();
    for (const PlanStep& s : plan.steps)
        steps.push_back({{"action", {s.action.gx, s.action.gy, s.action.rx, s.action.ry}},
                         {"predicted_loss", s.predicted_loss}});
    nlohmann::json j{
        {"initial_loss", plan.initial_loss},
        {"steps", steps},
        {"evaluations", plan.evaluations},
        {"wall_time_s", plan.wall_time_s},
        {"early_stop", plan.early_stop},
        {"contour_violation", plan.contour_violation},
    };
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << j.dump(2) << "\n";
}

} // namespace qs
