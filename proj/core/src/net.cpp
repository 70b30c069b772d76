#include "quiltspread/net.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

namespace qs {

NanLossError::NanLossError(int iter, std::vector<std::size_t> ids)
    : std::runtime_error("training loss became non-finite at iteration " + std::to_string(iter)),
      iteration(iter), batch_ids(std::move(ids)) {}

std::vector<double> to_model_input(const DepthGrid& g, StateEncoding mode) {
    if (mode == StateEncoding::Depth) {
        std::vector<double> v(kGridCells);
        for (int i = 0; i < kGridCells; ++i) v[i] = g.cells[i] / 31.0;
        return v;
    }
    std::vector<double> v(static_cast<std::size_t>(kDepthLevels) * kGridCells, 0.0);
    for (int y = 0; y < kGridSize; ++y)
        for (int x = 0; x < kGridSize; ++x)
            v[(static_cast<std::size_t>(g.at(x, y)) * kGridSize + y) * kGridSize + x] = 1.0;
    return v;
}

DepthGrid to_depth_levels(const std::vector<double>& out, StateEncoding mode) {
    DepthGrid d;
    if (mode == StateEncoding::Depth) {
        for (int i = 0; i < kGridCells; ++i) {
            int level = static_cast<int>(std::lround(out[i] * 31.0));
            d.cells[i] = static_cast<std::uint8_t>(std::clamp(level, 0, 31));
        }
        return d;
    }
    for (int y = 0; y < kGridSize; ++y) {
        for (int x = 0; x < kGridSize; ++x) {
            int best = 0;
            double best_v = -1e300;
            for (int z = 0; z < kDepthLevels; ++z) {
                double v = out[(static_cast<std::size_t>(z) * kGridSize + y) * kGridSize + x];
                if (v > best_v) { best_v = v; best = z; }
            }
            d.at(x, y) = static_cast<std::uint8_t>(best);
        }
    }
    return d;
}

double loss_depth(const std::vector<double>& predicted_levels, const std::vector<double>& target_levels) {
    double sum = 0;
    for (int i = 0; i < kGridCells; ++i) {
        double diff = predicted_levels[i] - target_levels[i];
        sum += diff * diff;
    }
    return sum / kGridCells;
}

double loss_depth(const std::vector<double>& predicted_levels, const DepthGrid& target) {
    double sum = 0;
    for (int i = 0; i < kGridCells; ++i) {
        double diff = predicted_levels[i] - static_cast<double>(target.cells[i]);
        sum += diff * diff;
    }
    return sum / kGridCells;
}

double loss_voxel(const std::vector<double>& predicted, const std::vector<double>& target) {
    const std::size_t n = static_cast<std::size_t>(kGridCells) * kDepthLevels;
    double sum = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double diff = predicted[i] - target[i];
        sum += diff * diff;
    }
    return sum / static_cast<double>(n);
}

double loss_voxel(const std::vector<double>& predicted, const VoxelGrid& target) {
    double sum = 0;
    std::size_t i = 0;
    for (int z = 0; z < kDepthLevels; ++z)
        for (int y = 0; y < kGridSize; ++y)
            for (int x = 0; x < kGridSize; ++x, ++i) {
                double diff = predicted[i] - static_cast<double>(target.at(x, y, z));
                sum += diff * diff;
            }
    return sum / (static_cast<double>(kGridCells) * kDepthLevels);
}

std::vector<double> normalize_action(const ActionVector& a) {
    return {a.gx / 63.0, a.gy / 63.0, a.rx / 63.0, a.ry / 63.0};
}

namespace {

struct Param {
    std::vector<double> w, g, m;
    void init(std::size_t n) { w.assign(n, 0.0); g.assign(n, 0.0); m.assign(n, 0.0); }
};

// 3x3 convolution, stride 2, pad 1: halves the spatial size
struct Conv {
    int in_c = 0, out_c = 0, in_h = 0;
    Param W, b;

    int out_h() const { return in_h / 2; }
    void init(int ic, int oc, int h) {
        in_c = ic; out_c = oc; in_h = h;
        W.init(static_cast<std::size_t>(oc) * ic * 9);
        b.init(oc);
    }
    std::size_t fan_in() const { return static_cast<std::size_t>(in_c) * 9; }

    void forward(const double* x, double* y) const {
        const int oh = out_h();
        for (int oc = 0; oc < out_c; ++oc) {
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < oh; ++ox) {
                    double acc = b.w[oc];
                    for (int ic = 0; ic < in_c; ++ic) {
                        const double* xp = x + static_cast<std::size_t>(ic) * in_h * in_h;
                        const double* wp = W.w.data() + (static_cast<std::size_t>(oc) * in_c + ic) * 9;
                        for (int ky = 0; ky < 3; ++ky) {
                            int iy = oy * 2 + ky - 1;
                            if (iy < 0 || iy >= in_h) continue;
                            for (int kx = 0; kx < 3; ++kx) {
                                int ix = ox * 2 + kx - 1;
                                if (ix < 0 || ix >= in_h) continue;
                                acc += xp[iy * in_h + ix] * wp[ky * 3 + kx];
                            }
                        }
                    }
                    y[(static_cast<std::size_t>(oc) * oh + oy) * oh + ox] = acc;
                }
            }
        }
    }

    void backward(const double* x, const double* gy, double* gx) {
        const int oh = out_h();
        std::fill(gx, gx + static_cast<std::size_t>(in_c) * in_h * in_h, 0.0);
        for (int oc = 0; oc < out_c; ++oc) {
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < oh; ++ox) {
                    double go = gy[(static_cast<std::size_t>(oc) * oh + oy) * oh + ox];
                    b.g[oc] += go;
                    for (int ic = 0; ic < in_c; ++ic) {
                        const double* xp = x + static_cast<std::size_t>(ic) * in_h * in_h;
                        double* gxp = gx + static_cast<std::size_t>(ic) * in_h * in_h;
                        const std::size_t wbase = (static_cast<std::size_t>(oc) * in_c + ic) * 9;
                        for (int ky = 0; ky < 3; ++ky) {
                            int iy = oy * 2 + ky - 1;
                            if (iy < 0 || iy >= in_h) continue;
                            for (int kx = 0; kx < 3; ++kx) {
                                int ix = ox * 2 + kx - 1;
                                if (ix < 0 || ix >= in_h) continue;
                                W.g[wbase + ky * 3 + kx] += go * xp[iy * in_h + ix];
                                gxp[iy * in_h + ix] += go * W.w[wbase + ky * 3 + kx];
                            }
                        }
                    }
                }
            }
        }
    }
};

// 4x4 transposed convolution, stride 2, pad 1: doubles the spatial size
struct Deconv {
    int in_c = 0, out_c = 0, in_h = 0;
    Param W, b; // W layout [ic][oc][ky][kx]

    int out_h() const { return in_h * 2; }
    void init(int ic, int oc, int h) {
        in_c = ic; out_c = oc; in_h = h;
        W.init(static_cast<std::size_t>(ic) * oc * 16);
        b.init(oc);
    }
    std::size_t fan_in() const { return static_cast<std::size_t>(in_c) * 4; } // ~k*k/stride^2 inputs per output

    void forward(const double* x, double* y) const {
        const int oh = out_h();
        for (int oc = 0; oc < out_c; ++oc)
            std::fill(y + static_cast<std::size_t>(oc) * oh * oh, y + static_cast<std::size_t>(oc + 1) * oh * oh,
                      b.w[oc]);
        for (int ic = 0; ic < in_c; ++ic) {
            const double* xp = x + static_cast<std::size_t>(ic) * in_h * in_h;
            for (int iy = 0; iy < in_h; ++iy) {
                for (int ix = 0; ix < in_h; ++ix) {
                    double xv = xp[iy * in_h + ix];
                    if (xv == 0.0) continue;
                    for (int oc = 0; oc < out_c; ++oc) {
                        double* yp = y + static_cast<std::size_t>(oc) * oh * oh;
                        const std::size_t wbase = (static_cast<std::size_t>(ic) * out_c + oc) * 16;
                        for (int ky = 0; ky < 4; ++ky) {
                            int oy = iy * 2 + ky - 1;
                            if (oy < 0 || oy >= oh) continue;
                            for (int kx = 0; kx < 4; ++kx) {
                                int ox = ix * 2 + kx - 1;
                                if (ox < 0 || ox >= oh) continue;
                                yp[oy * oh + ox] += xv * W.w[wbase + ky * 4 + kx];
                            }
                        }
                    }
                }
            }
        }
    }

    void backward(const double* x, const double* gy, double* gx, bool accum = true) {
        const int oh = out_h();
        if (accum) {
            for (int oc = 0; oc < out_c; ++oc) {
                const double* gyp = gy + static_cast<std::size_t>(oc) * oh * oh;
                double acc = 0;
                for (int i = 0; i < oh * oh; ++i) acc += gyp[i];
                b.g[oc] += acc;
            }
        }
        for (int ic = 0; ic < in_c; ++ic) {
            const double* xp = x + static_cast<std::size_t>(ic) * in_h * in_h;
            double* gxp = gx + static_cast<std::size_t>(ic) * in_h * in_h;
            for (int iy = 0; iy < in_h; ++iy) {
                for (int ix = 0; ix < in_h; ++ix) {
                    double xv = xp[iy * in_h + ix];
                    double gsum = 0;
                    for (int oc = 0; oc < out_c; ++oc) {
                        const double* gyp = gy + static_cast<std::size_t>(oc) * oh * oh;
                        const std::size_t wbase = (static_cast<std::size_t>(ic) * out_c + oc) * 16;
                        for (int ky = 0; ky < 4; ++ky) {
                            int oy = iy * 2 + ky - 1;
                            if (oy < 0 || oy >= oh) continue;
                            for (int kx = 0; kx < 4; ++kx) {
                                int ox = ix * 2 + kx - 1;
                                if (ox < 0 || ox >= oh) continue;
                                double go = gyp[oy * oh + ox];
                                if (accum) W.g[wbase + ky * 4 + kx] += go * xv;
                                gsum += go * W.w[wbase + ky * 4 + kx];
                            }
                        }
                    }
                    gxp[iy * in_h + ix] = gsum;
                }
            }
        }
    }
};

struct Linear {
    int in = 0, out = 0;
    Param W, b; // W row-major out x in

    void init(int i, int o) {
        in = i; out = o;
        W.init(static_cast<std::size_t>(o) * i);
        b.init(o);
    }
    std::size_t fan_in() const { return static_cast<std::size_t>(in); }

    void forward(const double* x, double* y) const {
        for (int o = 0; o < out; ++o) {
            const double* wp = W.w.data() + static_cast<std::size_t>(o) * in;
            double acc = b.w[o];
            for (int i = 0; i < in; ++i) acc += wp[i] * x[i];
            y[o] = acc;
        }
    }

    void backward(const double* x, const double* gy, double* gx, bool accum = true) {
        std::fill(gx, gx + in, 0.0);
        for (int o = 0; o < out; ++o) {
            double go = gy[o];
            if (accum) b.g[o] += go;
            double* gwp = W.g.data() + static_cast<std::size_t>(o) * in;
            const double* wp = W.w.data() + static_cast<std::size_t>(o) * in;
            if (accum) {
                for (int i = 0; i < in; ++i) {
                    gwp[i] += go * x[i];
                    gx[i] += go * wp[i];
                }
            } else {
                for (int i = 0; i < in; ++i) gx[i] += go * wp[i];
            }
        }
    }
};

void leaky_forward(std::vector<double>& v, double slope) {
    for (double& x : v)
        if (x < 0) x *= slope;
}

// grad through leaky given post-activation values (slope > 0 keeps sign)
void leaky_backward(const std::vector<double>& post, std::vector<double>& g, double slope) {
    for (std::size_t i = 0; i < post.size(); ++i)
        if (post[i] < 0) g[i] *= slope;
}

} // namespace

struct EmdNet::Impl {
    NetConfig cfg;
    Conv conv[4];
    Linear fc_enc, fc_m1, fc_m2, fc_dec;
    Deconv dec[4];
    std::vector<Param*> params;

    // activation buffers for one forward/backward pass
    struct Cache {
        std::vector<double> conv_out[4];   // post-activation
        std::vector<double> latent;        // encoder output
        std::vector<double> m_in;          // latent ++ action
        std::vector<double> m_hidden;      // post-activation
        std::vector<double> m_out;         // manipulated latent
        std::vector<double> dec_in;        // post-activation of fc_dec
        std::vector<double> dec_out[4];    // post-activation (last: pre-softmax)
        std::vector<double> output;        // final (softmax applied in voxel mode)
    };

    explicit Impl(const NetConfig& c) : cfg(c) {
        const auto& ch = cfg.channels;
        if (ch.size() != 4) throw std::invalid_argument("NetConfig.channels must have 4 entries");
        conv[0].init(cfg.input_channels(), ch[0], 64);
        conv[1].init(ch[0], ch[1], 32);
        conv[2].init(ch[1], ch[2], 16);
        conv[3].init(ch[2], ch[3], 8);
        fc_enc.init(ch[3] * 16, cfg.latent);
        fc_m1.init(cfg.latent + kActionDim, cfg.latent);
        fc_m2.init(cfg.latent, cfg.latent);
        fc_dec.init(cfg.latent, ch[3] * 16);
        dec[0].init(ch[3], ch[2], 4);
        dec[1].init(ch[2], ch[1], 8);
        dec[2].init(ch[1], ch[0], 16);
        dec[3].init(ch[0], cfg.input_channels(), 32);
        register_params();
    }

    void register_params() {
        params.clear();
        for (auto& c : conv) { params.push_back(&c.W); params.push_back(&c.b); }
        params.push_back(&fc_enc.W); params.push_back(&fc_enc.b);
        params.push_back(&fc_m1.W); params.push_back(&fc_m1.b);
        params.push_back(&fc_m2.W); params.push_back(&fc_m2.b);
        params.push_back(&fc_dec.W); params.push_back(&fc_dec.b);
        for (auto& d : dec) { params.push_back(&d.W); params.push_back(&d.b); }
    }

    void initialize(std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        // variance-preserving uniform init: bound^2/3 * fan * gain = 1, with
        // gain compensating the leaky-ReLU that follows most layers; without
        // it the ~11-layer stack attenuates signal and gradient to nothing
        const double leaky_gain = 2.0 / (1.0 + cfg.leaky_slope * cfg.leaky_slope);
        auto fill = [&](Param& p, std::size_t fan, double gain) {
            double bound = std::sqrt(3.0 * gain / static_cast<double>(fan));
            std::uniform_real_distribution<double> dist(-bound, bound);
            for (double& w : p.w) w = dist(rng);
        };
        for (auto& c : conv) fill(c.W, c.fan_in(), leaky_gain);
        fill(fc_enc.W, fc_enc.fan_in(), 1.0);
        fill(fc_m1.W, fc_m1.fan_in(), leaky_gain);
        fill(fc_m2.W, fc_m2.fan_in(), 1.0);
        fill(fc_dec.W, fc_dec.fan_in(), leaky_gain);
        for (int i = 0; i < 4; ++i) fill(dec[i].W, dec[i].fan_in(), i < 3 ? leaky_gain : 1.0);
    }

    void run_encode(const std::vector<double>& state, Cache& c) const {
        const double slope = cfg.leaky_slope;
        const double* x = state.data();
        for (int i = 0; i < 4; ++i) {
            int oh = conv[i].out_h();
            c.conv_out[i].resize(static_cast<std::size_t>(conv[i].out_c) * oh * oh);
            conv[i].forward(x, c.conv_out[i].data());
            leaky_forward(c.conv_out[i], slope);
            x = c.conv_out[i].data();
        }
        c.latent.resize(cfg.latent);
        fc_enc.forward(x, c.latent.data());
    }

    void run_manipulate(const std::vector<double>& latent, const std::vector<double>& action, Cache& c) const {
        c.m_in.resize(cfg.latent + kActionDim);
        std::copy(latent.begin(), latent.end(), c.m_in.begin());
        std::copy(action.begin(), action.end(), c.m_in.begin() + cfg.latent);
        c.m_hidden.resize(cfg.latent);
        fc_m1.forward(c.m_in.data(), c.m_hidden.data());
        leaky_forward(c.m_hidden, cfg.leaky_slope);
        c.m_out.resize(cfg.latent);
        fc_m2.forward(c.m_hidden.data(), c.m_out.data());
    }

    void run_decode(const std::vector<double>& latent, Cache& c) const {
        const double slope = cfg.leaky_slope;
        c.dec_in.resize(static_cast<std::size_t>(cfg.channels[3]) * 16);
        fc_dec.forward(latent.data(), c.dec_in.data());
        leaky_forward(c.dec_in, slope);
        const double* x = c.dec_in.data();
        for (int i = 0; i < 4; ++i) {
            int oh = dec[i].out_h();
            c.dec_out[i].resize(static_cast<std::size_t>(dec[i].out_c) * oh * oh);
            dec[i].forward(x, c.dec_out[i].data());
            if (i < 3) leaky_forward(c.dec_out[i], slope);
            x = c.dec_out[i].data();
        }
        if (cfg.mode == StateEncoding::Voxel) {
            // column-wise softmax over the 32 level channels
            c.output.resize(c.dec_out[3].size());
            for (int p = 0; p < kGridCells; ++p) {
                double mx = -1e300;
                for (int z = 0; z < kDepthLevels; ++z)
                    mx = std::max(mx, c.dec_out[3][static_cast<std::size_t>(z) * kGridCells + p]);
                double sum = 0;
                for (int z = 0; z < kDepthLevels; ++z) {
                    double e = std::exp(c.dec_out[3][static_cast<std::size_t>(z) * kGridCells + p] - mx);
                    c.output[static_cast<std::size_t>(z) * kGridCells + p] = e;
                    sum += e;
                }
                for (int z = 0; z < kDepthLevels; ++z)
                    c.output[static_cast<std::size_t>(z) * kGridCells + p] /= sum;
            }
        } else {
            c.output = c.dec_out[3];
        }
    }

    double forward(const std::vector<double>& state, const std::vector<double>& action,
                   const std::vector<double>& target, Cache& c) const {
        run_encode(state, c);
        run_manipulate(c.latent, action, c);
        run_decode(c.m_out, c);
        double sum = 0;
        for (std::size_t i = 0; i < c.output.size(); ++i) {
            double d = c.output[i] - target[i];
            sum += d * d;
        }
        return loss_scale() * sum / static_cast<double>(c.output.size());
    }

    // Depth-mode training minimizes the loss in raw altitude levels (the
    // model boundary stays normalized). This keeps the published learning
    // rate of 0.00005 in a useful range; a unit-normalized objective would
    // shrink every gradient by 31^2.
    double loss_scale() const { return cfg.mode == StateEncoding::Depth ? 31.0 * 31.0 : 1.0; }

    // Backprop from the MSE loss; fills grad_action (4) and optionally also
    // accumulates parameter gradients (train=true).
    void backward(const std::vector<double>& state, const std::vector<double>& target, Cache& c,
                  std::vector<double>* grad_action, bool train_params) {
        const double slope = cfg.leaky_slope;
        const std::size_t n_out = c.output.size();
        std::vector<double> g(n_out);
        for (std::size_t i = 0; i < n_out; ++i)
            g[i] = loss_scale() * 2.0 * (c.output[i] - target[i]) / static_cast<double>(n_out);

        if (cfg.mode == StateEncoding::Voxel) {
            // softmax jacobian per column
            std::vector<double> gz(n_out);
            for (int p = 0; p < kGridCells; ++p) {
                double dot = 0;
                for (int z = 0; z < kDepthLevels; ++z) {
                    std::size_t i = static_cast<std::size_t>(z) * kGridCells + p;
                    dot += g[i] * c.output[i];
                }
                for (int z = 0; z < kDepthLevels; ++z) {
                    std::size_t i = static_cast<std::size_t>(z) * kGridCells + p;
                    gz[i] = c.output[i] * (g[i] - dot);
                }
            }
            g.swap(gz);
        }

        // decoder deconvs (note: backprop through leaky uses post-activation sign)
        std::vector<double> g_prev;
        for (int i = 3; i >= 0; --i) {
            const std::vector<double>& input = (i == 0) ? c.dec_in : c.dec_out[i - 1];
            g_prev.resize(input.size());
            dec[i].backward(input.data(), g.data(), g_prev.data(), train_params);
            leaky_backward(input, g_prev, slope);
            g.swap(g_prev);
        }
        std::vector<double> g_latent(cfg.latent);
        fc_dec.backward(c.m_out.data(), g.data(), g_latent.data(), train_params);

        // manipulation module
        std::vector<double> g_hidden(cfg.latent);
        fc_m2.backward(c.m_hidden.data(), g_latent.data(), g_hidden.data(), train_params);
        leaky_backward(c.m_hidden, g_hidden, slope);
        std::vector<double> g_min(cfg.latent + kActionDim);
        fc_m1.backward(c.m_in.data(), g_hidden.data(), g_min.data(), train_params);
        if (grad_action)
            grad_action->assign(g_min.begin() + cfg.latent, g_min.end());

        if (!train_params) return;

        // encoder
        std::vector<double> g_enc(g_min.begin(), g_min.begin() + cfg.latent);
        std::vector<double> g_flat(static_cast<std::size_t>(cfg.channels[3]) * 16);
        fc_enc.backward(c.conv_out[3].data(), g_enc.data(), g_flat.data());
        leaky_backward(c.conv_out[3], g_flat, slope);
        g.swap(g_flat);
        for (int i = 3; i >= 1; --i) {
            g_prev.resize(c.conv_out[i - 1].size());
            conv[i].backward(c.conv_out[i - 1].data(), g.data(), g_prev.data());
            leaky_backward(c.conv_out[i - 1], g_prev, slope);
            g.swap(g_prev);
        }
        std::vector<double> g_state(state.size());
        conv[0].backward(state.data(), g.data(), g_state.data());
    }
};

EmdNet::EmdNet(const NetConfig& cfg, std::uint64_t init_seed) : impl_(std::make_unique<Impl>(cfg)) {
    impl_->initialize(init_seed);
}
EmdNet::EmdNet(const EmdNet& o) : impl_(std::make_unique<Impl>(*o.impl_)) { impl_->register_params(); }
EmdNet& EmdNet::operator=(const EmdNet& o) {
    impl_ = std::make_unique<Impl>(*o.impl_);
    impl_->register_params();
    return *this;
}
EmdNet::EmdNet(EmdNet&&) noexcept = default;
EmdNet& EmdNet::operator=(EmdNet&&) noexcept = default;
EmdNet::~EmdNet() = default;

const NetConfig& EmdNet::config() const { return impl_->cfg; }

std::vector<double> EmdNet::encode(const std::vector<double>& state) const {
    if (state.size() != static_cast<std::size_t>(impl_->cfg.state_size()))
        throw std::invalid_argument("state tensor size does not match the model's encoding mode");
    Impl::Cache c;
    impl_->run_encode(state, c);
    return c.latent;
}

std::vector<double> EmdNet::manipulate(const std::vector<double>& latent,
                                       const std::vector<double>& action) const {
    if (latent.size() != static_cast<std::size_t>(impl_->cfg.latent))
        throw std::invalid_argument("latent size mismatch");
    if (action.size() != kActionDim) throw std::invalid_argument("action must have 4 components");
    for (double a : action)
        if (a < 0.0 || a > 1.0) throw std::invalid_argument("normalized action components must lie in [0,1]");
    Impl::Cache c;
    impl_->run_manipulate(latent, action, c);
    return c.m_out;
}

std::vector<double> EmdNet::decode(const std::vector<double>& latent) const {
    if (latent.size() != static_cast<std::size_t>(impl_->cfg.latent))
        throw std::invalid_argument("latent size mismatch");
    Impl::Cache c;
    impl_->run_decode(latent, c);
    return c.output;
}

std::vector<double> EmdNet::predict(const DepthGrid& state, const std::vector<ActionVector>& actions) const {
    if (actions.empty()) throw std::invalid_argument("predict needs at least one action");
    std::vector<double> latent = encode(to_model_input(state, impl_->cfg.mode));
    for (const ActionVector& a : actions) latent = manipulate(latent, normalize_action(a));
    return decode(latent);
}

DepthGrid EmdNet::predict_depth(const DepthGrid& state, const std::vector<ActionVector>& actions) const {
    return to_depth_levels(predict(state, actions), impl_->cfg.mode);
}

double EmdNet::action_gradient(const std::vector<double>& state_in, const std::vector<double>& action,
                               const std::vector<double>& target, std::vector<double>& grad_action) const {
    Impl::Cache c;
    double loss = impl_->forward(state_in, action, target, c);
    const_cast<Impl*>(impl_.get())->backward(state_in, target, c, &grad_action, false);
    return loss;
}

double EmdNet::accumulate_gradients(const std::vector<double>& state_in, const std::vector<double>& action,
                                    const std::vector<double>& target) {
    Impl::Cache c;
    double loss = impl_->forward(state_in, action, target, c);
    impl_->backward(state_in, target, c, nullptr, true);
    return loss;
}

void EmdNet::zero_gradients() {
    for (Param* p : impl_->params) std::fill(p->g.begin(), p->g.end(), 0.0);
}

void EmdNet::sgd_update(double lr, double momentum, double weight_decay, double grad_scale) {
    for (Param* p : impl_->params) {
        for (std::size_t i = 0; i < p->w.size(); ++i) {
            double g = p->g[i] * grad_scale + weight_decay * p->w[i];
            p->m[i] = momentum * p->m[i] + g;
            p->w[i] -= lr * p->m[i];
        }
    }
}

std::size_t EmdNet::parameter_count() const {
    std::size_t n = 0;
    for (Param* p : impl_->params) n += p->w.size();
    return n;
}

namespace {
std::pair<Param*, std::size_t> locate(const std::vector<Param*>& params, std::size_t i) {
    for (Param* p : params) {
        if (i < p->w.size()) return {p, i};
        i -= p->w.size();
    }
    throw std::out_of_range("parameter index");
}
} // namespace

double& EmdNet::parameter(std::size_t i) {
    auto [p, off] = locate(impl_->params, i);
    return p->w[off];
}
double EmdNet::parameter(std::size_t i) const {
    auto [p, off] = locate(impl_->params, i);
    return p->w[off];
}
double EmdNet::gradient(std::size_t i) const {
    auto [p, off] = locate(impl_->params, i);
    return p->g[off];
}

namespace {
constexpr char kNetMagic[8] = {'Q', 'S', 'E', 'M', 'D', 'N', 'T', '\0'};
constexpr std::uint8_t kNetVersion = 1;
} // namespace

void EmdNet::save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f.write(kNetMagic, 8);
    f.put(static_cast<char>(kNetVersion));
    nlohmann::json desc{
        {"mode", impl_->cfg.mode == StateEncoding::Depth ? "depth" : "voxel"},
        {"channels", impl_->cfg.channels},
        {"latent", impl_->cfg.latent},
        {"leaky_slope", impl_->cfg.leaky_slope},
    };
    std::string s = desc.dump();
    std::uint32_t len = static_cast<std::uint32_t>(s.size());
    char lb[4] = {static_cast<char>(len & 0xff), static_cast<char>((len >> 8) & 0xff),
                  static_cast<char>((len >> 16) & 0xff), static_cast<char>((len >> 24) & 0xff)};
    f.write(lb, 4);
    f.write(s.data(), static_cast<std::streamsize>(s.size()));
    for (Param* p : impl_->params)
        for (double w : p->w) {
            float v = static_cast<float>(w);
            f.write(reinterpret_cast<const char*>(&v), sizeof(v));
        }
}

EmdNet EmdNet::load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open: " + path);
    char magic[8];
    f.read(magic, 8);
    if (!f || std::memcmp(magic, kNetMagic, 8) != 0)
        throw MalformedStateError("bad checkpoint magic: " + path);
    int version = f.get();
    if (version != kNetVersion)
        throw MalformedStateError("unsupported checkpoint version " + std::to_string(version));
    char lb[4];
    f.read(lb, 4);
    std::uint32_t len = 0;
    for (int i = 0; i < 4; ++i) len |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(lb[i])) << (8 * i);
    std::string s(len, '\0');
    f.read(s.data(), len);
    nlohmann::json desc = nlohmann::json::parse(s);
    NetConfig cfg;
    cfg.mode = desc.at("mode").get<std::string>() == "voxel" ? StateEncoding::Voxel : StateEncoding::Depth;
    cfg.channels = desc.at("channels").get<std::vector<int>>();
    cfg.latent = desc.at("latent").get<int>();
    cfg.leaky_slope = desc.at("leaky_slope").get<double>();
    EmdNet net(cfg, 0);
    for (Param* p : net.impl_->params)
        for (double& w : p->w) {
            float v;
            f.read(reinterpret_cast<char*>(&v), sizeof(v));
            if (!f) throw MalformedStateError("truncated checkpoint: " + path);
            w = v;
        }
    return net;
}

std::vector<LossCurvePoint> train(EmdNet& net, const std::vector<TransitionSample>& train_set,
                                  const std::vector<TransitionSample>& test_set, const TrainConfig& cfg) {
    if (train_set.empty()) throw std::invalid_argument("training set is empty");
    const StateEncoding mode = net.config().mode;
    std::mt19937_64 rng(cfg.seed);
    std::uniform_int_distribution<std::size_t> pick(0, train_set.size() - 1);

    auto eval_test = [&]() -> double {
        if (test_set.empty()) return std::numeric_limits<double>::quiet_NaN();
        const std::size_t n = std::min<std::size_t>(test_set.size(), 128);
        double sum = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const TransitionSample& s = test_set[i];
            auto out = net.predict(s.before, {s.action});
            auto target = to_model_input(s.after, mode);
            double l = 0;
            for (std::size_t k = 0; k < out.size(); ++k) {
                double d = out[k] - target[k];
                l += d * d;
            }
            sum += l / static_cast<double>(out.size());
        }
        return sum / static_cast<double>(n);
    };

    std::vector<LossCurvePoint> curve;
    curve.reserve(cfg.max_iterations);
    for (int iter = 0; iter < cfg.max_iterations; ++iter) {
        std::vector<std::size_t> batch(cfg.batch_size);
        for (auto& b : batch) b = pick(rng);
        net.zero_gradients();
        double loss = 0;
        for (std::size_t id : batch) {
            const TransitionSample& s = train_set[id];
            loss += net.accumulate_gradients(to_model_input(s.before, mode), normalize_action(s.action),
                                             to_model_input(s.after, mode));
        }
        loss /= cfg.batch_size;
        if (!std::isfinite(loss)) throw NanLossError(iter, batch);
        net.sgd_update(cfg.learning_rate, cfg.momentum, cfg.weight_decay, 1.0 / cfg.batch_size);
        double test_loss = std::numeric_limits<double>::quiet_NaN();
        if (cfg.test_interval > 0 && (iter % cfg.test_interval == 0 || iter == cfg.max_iterations - 1))
            test_loss = eval_test();
        curve.push_back({iter, loss, test_loss});
    }
    return curve;
}

void write_loss_curve_csv(const std::string& path, const std::vector<LossCurvePoint>& curve) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << "iteration,train_loss,test_loss\n";
    for (const auto& p : curve) {
        f << p.iteration << "," << p.train_loss << ",";
        if (std::isfinite(p.test_loss)) f << p.test_loss;
        f << "\n";
    }
}

} // namespace qs
