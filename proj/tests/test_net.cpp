#include <doctest.h>

#include <quiltspread/datagen.hpp>
#include <quiltspread/net.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

using namespace qs;

namespace {

NetConfig tiny_config() {
    NetConfig cfg;
    cfg.channels = {2, 2, 2, 2};
    cfg.latent = 32;
    return cfg;
}

DepthGrid random_grid(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> lvl(0, 31);
    DepthGrid g;
    for (auto& c : g.cells) c = static_cast<std::uint8_t>(lvl(rng));
    return g;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace

TEST_CASE("latent code has length 1024 under the default configuration") {
    NetConfig cfg; // default channels, latent 1024
    EmdNet net(cfg, 1);
    std::mt19937_64 rng(2);
    auto latent = net.encode(to_model_input(random_grid(rng), cfg.mode));
    CHECK(latent.size() == 1024);
    for (double v : latent) CHECK(std::isfinite(v));
    auto moved = net.manipulate(latent, normalize_action({1, 2, 3, 4}));
    CHECK(moved.size() == 1024);
    auto out = net.decode(moved);
    CHECK(out.size() == static_cast<std::size_t>(kGridCells));
}

TEST_CASE("encoder is pure and sensitive at random init") {
    NetConfig cfg = tiny_config();
    EmdNet net(cfg, 7);
    std::mt19937_64 rng(3);
    DepthGrid g = random_grid(rng);
    auto a = net.encode(to_model_input(g, cfg.mode));
    auto b = net.encode(to_model_input(g, cfg.mode));
    CHECK(a == b);

    DepthGrid h = g;
    h.cells[100] = h.cells[100] == 31 ? 0 : h.cells[100] + 1;
    auto c = net.encode(to_model_input(h, cfg.mode));
    CHECK(a != c);

    // same seed, same weights
    EmdNet net2(cfg, 7);
    CHECK(net2.encode(to_model_input(g, cfg.mode)) == a);
}

TEST_CASE("single-step predict equals decode-manipulate-encode") {
    NetConfig cfg = tiny_config();
    EmdNet net(cfg, 11);
    std::mt19937_64 rng(4);
    DepthGrid g = random_grid(rng);
    ActionVector act{10, 20, 30, 40};
    auto direct = net.decode(net.manipulate(net.encode(to_model_input(g, cfg.mode)), normalize_action(act)));
    auto chained = net.predict(g, {act});
    REQUIRE(direct.size() == chained.size());
    for (std::size_t i = 0; i < direct.size(); ++i) CHECK(direct[i] == doctest::Approx(chained[i]).epsilon(1e-12));
}

TEST_CASE("parameter and action gradients match central finite differences") {
    NetConfig cfg = tiny_config();
    EmdNet net(cfg, 13);
    std::mt19937_64 rng(5);
    DepthGrid before = random_grid(rng), after = random_grid(rng);
    auto x = to_model_input(before, cfg.mode);
    auto y = to_model_input(after, cfg.mode);
    auto a = normalize_action({12, 40, 5, 61});

    net.zero_gradients();
    double base = net.accumulate_gradients(x, a, y);
    CHECK(std::isfinite(base));

    auto loss_at = [&](EmdNet& n) {
        std::vector<double> g;
        return n.action_gradient(x, a, y, g);
    };

    const double eps = 1e-5;
    std::uniform_int_distribution<std::size_t> pick(0, net.parameter_count() - 1);
    int checked = 0, mismatched = 0;
    for (int t = 0; t < 400; ++t) {
        std::size_t i = pick(rng);
        double saved = net.parameter(i);
        net.parameter(i) = saved + eps;
        double up = loss_at(net);
        net.parameter(i) = saved - eps;
        double dn = loss_at(net);
        net.parameter(i) = saved;
        double fd = (up - dn) / (2 * eps);
        double an = net.gradient(i);
        if (std::abs(fd) < 1e-8 && std::abs(an) < 1e-8) continue;
        ++checked;
        if (std::abs(an - fd) > 1e-3 * std::max({std::abs(an), std::abs(fd), 1e-4})) {
            // truncation error, not a backprop bug, if the estimate converges
            // toward the analytic value as the step shrinks
            const double e2 = eps / 10;
            net.parameter(i) = saved + e2;
            double up2 = loss_at(net);
            net.parameter(i) = saved - e2;
            double dn2 = loss_at(net);
            net.parameter(i) = saved;
            double fd2 = (up2 - dn2) / (2 * e2);
            bool converging = std::abs(fd2 - an) < std::abs(fd - an);
            bool close2 = std::abs(an - fd2) <= 1e-3 * std::max({std::abs(an), std::abs(fd2), 1e-4});
            if (!close2 && !converging) ++mismatched;
        }
    }
    CHECK(checked > 100);
    CHECK(mismatched <= checked / 100);

    // gradient w.r.t. the normalized action input
    std::vector<double> ga;
    double l0 = net.action_gradient(x, a, y, ga);
    CHECK(l0 == doctest::Approx(base));
    REQUIRE(ga.size() == 4);
    for (int d = 0; d < 4; ++d) {
        auto ap = a, am = a;
        ap[d] += eps;
        am[d] -= eps;
        std::vector<double> scratch;
        double fd = (net.action_gradient(x, ap, y, scratch) - net.action_gradient(x, am, y, scratch)) / (2 * eps);
        CHECK(std::abs(ga[d] - fd) <= 1e-3 * std::max({std::abs(ga[d]), std::abs(fd), 1e-4}));
    }
}

TEST_CASE("action_gradient leaves parameter gradients untouched") {
    NetConfig cfg = tiny_config();
    EmdNet net(cfg, 17);
    std::mt19937_64 rng(6);
    auto x = to_model_input(random_grid(rng), cfg.mode);
    auto y = to_model_input(random_grid(rng), cfg.mode);
    net.zero_gradients();
    net.accumulate_gradients(x, normalize_action({1, 2, 3, 4}), y);
    std::vector<double> before(net.parameter_count());
    for (std::size_t i = 0; i < before.size(); ++i) before[i] = net.gradient(i);
    std::vector<double> ga;
    net.action_gradient(x, normalize_action({5, 6, 7, 8}), y, ga);
    for (std::size_t i = 0; i < before.size(); ++i) REQUIRE(net.gradient(i) == before[i]);
}

TEST_CASE("depth loss examples") {
    DepthGrid target{};
    std::vector<double> pred(kGridCells, 0.0);
    CHECK(loss_depth(pred, target) == 0.0);
    for (auto& v : pred) v = 1.0;
    CHECK(loss_depth(pred, target) == doctest::Approx(1.0));
    // symmetric and non-negative via the vector overload
    std::vector<double> t2(kGridCells, 3.0), p2(kGridCells, 5.0);
    CHECK(loss_depth(p2, t2) == doctest::Approx(loss_depth(t2, p2)));
    CHECK(loss_depth(p2, t2) == doctest::Approx(4.0));
}

TEST_CASE("voxel loss examples") {
    DepthGrid d{};
    VoxelGrid v = to_voxel_grid(d);
    std::vector<double> pred = to_model_input(d, StateEncoding::Voxel);
    CHECK(loss_voxel(pred, v) == 0.0);
    pred[12345] = pred[12345] == 0.0 ? 1.0 : 0.0; // one flipped bit
    CHECK(loss_voxel(pred, v) == doctest::Approx(1.0 / (64.0 * 64.0 * 32.0)));
}

TEST_CASE("model input round trips through depth levels") {
    std::mt19937_64 rng(8);
    DepthGrid g = random_grid(rng);
    SUBCASE("depth mode") {
        auto x = to_model_input(g, StateEncoding::Depth);
        REQUIRE(x.size() == static_cast<std::size_t>(kGridCells));
        CHECK(x[0] == doctest::Approx(g.cells[0] / 31.0));
        CHECK(to_depth_levels(x, StateEncoding::Depth) == g);
    }
    SUBCASE("voxel mode") {
        auto x = to_model_input(g, StateEncoding::Voxel);
        REQUIRE(x.size() == static_cast<std::size_t>(kGridCells) * kDepthLevels);
        double ones = 0;
        for (double v : x) ones += v;
        CHECK(ones == doctest::Approx(kGridCells));
        CHECK(to_depth_levels(x, StateEncoding::Voxel) == g);
    }
}

TEST_CASE("normalize_action maps grid corners to the unit cube") {
    auto n = normalize_action({0, 63, 21, 42});
    REQUIRE(n.size() == 4);
    CHECK(n[0] == doctest::Approx(0.0));
    CHECK(n[1] == doctest::Approx(1.0));
    CHECK(n[2] == doctest::Approx(21.0 / 63.0));
    CHECK(n[3] == doctest::Approx(42.0 / 63.0));
}

TEST_CASE("voxel-mode decoder emits a distribution per column") {
    NetConfig cfg = tiny_config();
    cfg.mode = StateEncoding::Voxel;
    EmdNet net(cfg, 19);
    std::mt19937_64 rng(9);
    auto out = net.predict(random_grid(rng), {{3, 4, 5, 6}});
    REQUIRE(out.size() == static_cast<std::size_t>(kGridCells) * kDepthLevels);
    // model layout is channel-major: index = z * 4096 + column
    for (int col = 0; col < kGridCells; col += 257) {
        double sum = 0;
        for (int z = 0; z < kDepthLevels; ++z) {
            double p = out[static_cast<std::size_t>(z) * kGridCells + col];
            CHECK(p >= 0.0);
            sum += p;
        }
        CHECK(sum == doctest::Approx(1.0));
    }
}

TEST_CASE("training is deterministic and overfits a tiny set") {
    // low-frequency bumps: learnable by the reduced-width architecture
    auto bump = [](double cx, double cy) {
        DepthGrid g;
        for (int y = 0; y < 64; ++y)
            for (int x = 0; x < 64; ++x) {
                double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
                g.at(x, y) = static_cast<std::uint8_t>(std::lround(31.0 * std::exp(-d2 / 120.0)));
            }
        return g;
    };
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> ctr(12, 52);
    std::vector<TransitionSample> set;
    for (int i = 0; i < 8; ++i) {
        TransitionSample s;
        double cx = ctr(rng), cy = ctr(rng);
        s.before = bump(cx, cy);
        s.after = bump(64 - cx, 64 - cy);
        s.action = {static_cast<std::uint8_t>(i * 7), 10, 20, 30};
        set.push_back(s);
    }

    NetConfig cfg = tiny_config();
    TrainConfig tc;
    tc.batch_size = 4;
    tc.learning_rate = 0.001;
    tc.momentum = 0.9;
    tc.weight_decay = 0.0;
    tc.max_iterations = 1500;
    tc.test_interval = 0;
    tc.seed = 5;

    EmdNet a(cfg, 23);
    auto curve_a = train(a, set, {}, tc);
    EmdNet b(cfg, 23);
    auto curve_b = train(b, set, {}, tc);
    REQUIRE(curve_a.size() == curve_b.size());
    for (std::size_t i = 0; i < curve_a.size(); ++i) CHECK(curve_a[i].train_loss == curve_b[i].train_loss);

    double head = 0, tail = 0;
    for (int i = 0; i < 20; ++i) head += curve_a[i].train_loss;
    for (std::size_t i = curve_a.size() - 20; i < curve_a.size(); ++i) tail += curve_a[i].train_loss;
    CHECK(tail < 0.1 * head);
}

TEST_CASE("absurd learning rate aborts with diagnostics") {
    std::mt19937_64 rng(12);
    std::vector<TransitionSample> set(4);
    for (auto& s : set) {
        s.before = random_grid(rng);
        s.after = random_grid(rng);
        s.action = {1, 2, 3, 4};
    }
    NetConfig cfg = tiny_config();
    TrainConfig tc;
    tc.batch_size = 2;
    tc.learning_rate = 1e18;
    tc.weight_decay = 0.0;
    tc.max_iterations = 50;
    tc.test_interval = 0;
    EmdNet net(cfg, 29);
    try {
        train(net, set, {}, tc);
        FAIL("expected NanLossError");
    } catch (const NanLossError& e) {
        CHECK(e.iteration >= 0);
        CHECK(!e.batch_ids.empty());
        for (auto id : e.batch_ids) CHECK(id < set.size());
    }
}

TEST_CASE("checkpoint round trip preserves behavior byte-exactly") {
    NetConfig cfg = tiny_config();
    EmdNet net(cfg, 31);
    std::mt19937_64 rng(14);
    DepthGrid g = random_grid(rng);
    const std::string p1 = "test_net_a.ckpt", p2 = "test_net_b.ckpt";
    net.save(p1);
    EmdNet loaded = EmdNet::load(p1);
    CHECK(loaded.config().mode == cfg.mode);
    CHECK(loaded.config().latent == cfg.latent);
    auto o1 = net.predict(g, {{2, 4, 6, 8}});
    auto o2 = loaded.predict(g, {{2, 4, 6, 8}});
    REQUIRE(o1.size() == o2.size());
    // weights are stored as 32-bit floats; behavior matches to that precision
    for (std::size_t i = 0; i < o1.size(); ++i) CHECK(o1[i] == doctest::Approx(o2[i]).epsilon(1e-4));
    loaded.save(p2);
    CHECK(slurp(p1) == slurp(p2));
    std::remove(p1.c_str());
    std::remove(p2.c_str());
}
