#include "qck/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "qck/kernels.hpp"

namespace qck {

using kernels::ConvShape;

void ModelConfig::validate() const {
    if (channels.empty()) throw ValidationError("model config: at least one trunk stage is required");
    for (int c : channels)
        if (c < 1) throw ValidationError("model config: channel widths must be positive");
    if (downsample != (1 << channels.size()))
        throw ValidationError("model config: downsample must equal 2^(number of trunk stages)");
    if (input_size < downsample || input_size % downsample)
        throw ValidationError("model config: input_size must be divisible by downsample");
    if (levels.empty()) throw ValidationError("model config: at least one density head is required");
    for (std::size_t i = 1; i < levels.size(); ++i)
        if (!(levels[i - 1] < levels[i])) throw ValidationError("model config: levels must be strictly increasing");
    if (head_width < 1 || count_hidden < 1) throw ValidationError("model config: head widths must be positive");
}

std::vector<TensorSpec> parameter_layout(const ModelConfig& cfg) {
    cfg.validate();
    std::vector<TensorSpec> out;
    std::size_t offset = 0;
    auto add = [&](std::string name, std::size_t size, int fan_in, bool bias) {
        out.push_back({std::move(name), offset, size, fan_in, bias});
        offset += size;
    };
    int prev = 1;
    for (std::size_t s = 0; s < cfg.channels.size(); ++s) {
        const int c = cfg.channels[s];
        const std::string base = "trunk." + std::to_string(s);
        add(base + ".weight", static_cast<std::size_t>(c) * prev * 9, prev * 9, false);
        add(base + ".bias", static_cast<std::size_t>(c), prev * 9, true);
        prev = c;
    }
    const int ct = cfg.channels.back();
    for (int j = 0; j < cfg.n_levels(); ++j) {
        const std::string base = "head." + std::to_string(j);
        if (j == 0) {
            add(base + ".proj.weight", static_cast<std::size_t>(ct), ct, false);
            add(base + ".proj.bias", 1, ct, true);
        } else {
            const int cin = ct + j;
            add(base + ".conv.weight", static_cast<std::size_t>(cfg.head_width) * cin * 9, cin * 9, false);
            add(base + ".conv.bias", static_cast<std::size_t>(cfg.head_width), cin * 9, true);
            add(base + ".proj.weight", static_cast<std::size_t>(cfg.head_width), cfg.head_width, false);
            add(base + ".proj.bias", 1, cfg.head_width, true);
        }
    }
    const int gdim = ct + (cfg.fusion == FusionMode::concat_feature ? cfg.n_levels() : 0);
    add("count.fc1.weight", static_cast<std::size_t>(cfg.count_hidden) * gdim, gdim, false);
    add("count.fc1.bias", static_cast<std::size_t>(cfg.count_hidden), gdim, true);
    add("count.fc2.weight", static_cast<std::size_t>(cfg.count_hidden), cfg.count_hidden, false);
    add("count.fc2.bias", 1, cfg.count_hidden, true);
    return out;
}

std::size_t parameter_count(const ModelConfig& cfg) {
    const auto layout = parameter_layout(cfg);
    return layout.back().offset + layout.back().size;
}

double init_bound(int fan_in) { return std::sqrt(12.0 / static_cast<double>(fan_in)); }

ModelParams init_model(const ModelConfig& cfg) {
    ModelParams p;
    p.config = cfg;
    p.values.assign(parameter_count(cfg), 0.0f);
    std::mt19937_64 rng(cfg.seed);
    for (const auto& t : parameter_layout(cfg)) {
        if (t.is_bias) continue;
        const double bound = init_bound(t.fan_in);
        std::uniform_real_distribution<double> u(-bound, bound);
        for (std::size_t i = 0; i < t.size; ++i) p.values[t.offset + i] = static_cast<float>(u(rng));
    }
    return p;
}

PatchTensor to_patch_tensor(const GrayImage& image) {
    PatchTensor t(image.width, image.height, 0.0f);
    for (std::size_t i = 0; i < image.size(); ++i) t.values[i] = static_cast<float>(image.values[i]) / 255.0f;
    return t;
}

namespace {

// Shifted so that softplus(0) = 0; activations stay centred across stages.
const double kLog2 = std::log(2.0);
inline double softplus(double x) { return (x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x))) - kLog2; }
inline double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

void check_finite(std::span<const double> v, const std::string& layer) {
    for (double x : v)
        if (!std::isfinite(x)) throw NumericalError("non-finite activation in layer " + layer);
}

// (C, H, W) -> (C, H/2, W/2) mean of each 2x2 block.
void avgpool2(std::span<const double> in, int c, int h, int w, std::span<double> out) {
    const int oh = h / 2, ow = w / 2;
    for (int k = 0; k < c; ++k)
        for (int y = 0; y < oh; ++y) {
            const double* r0 = in.data() + (static_cast<std::size_t>(k) * h + 2 * y) * w;
            const double* r1 = r0 + w;
            double* o = out.data() + (static_cast<std::size_t>(k) * oh + y) * ow;
            for (int x = 0; x < ow; ++x) o[x] = 0.25 * (r0[2 * x] + r0[2 * x + 1] + r1[2 * x] + r1[2 * x + 1]);
        }
}

void avgpool2_backward(std::span<const double> grad_out, int c, int h, int w, std::span<double> grad_in) {
    const int oh = h / 2, ow = w / 2;
    for (int k = 0; k < c; ++k)
        for (int y = 0; y < oh; ++y) {
            double* r0 = grad_in.data() + (static_cast<std::size_t>(k) * h + 2 * y) * w;
            double* r1 = r0 + w;
            const double* g = grad_out.data() + (static_cast<std::size_t>(k) * oh + y) * ow;
            for (int x = 0; x < ow; ++x) {
                const double v = 0.25 * g[x];
                r0[2 * x] = v;
                r0[2 * x + 1] = v;
                r1[2 * x] = v;
                r1[2 * x + 1] = v;
            }
        }
}

struct Stage {
    ConvShape shape;
    std::vector<double> in;  // conv input
    std::vector<double> z;   // pre-activation
    std::vector<double> a;   // softplus(z)
    std::vector<double> pooled;
};

struct HeadCache {
    std::vector<double> in;  // trunk + earlier maps (j >= 1)
    std::vector<double> u;   // conv pre-activation
    std::vector<double> v;   // softplus(u)
    std::vector<double> map;
};

}  // namespace

struct Network::Activations {
    std::vector<Stage> stages;
    std::vector<HeadCache> heads;
    std::vector<double> g;  // count features
    std::vector<double> q;  // fc1 pre-activation
    std::vector<double> r;  // softplus(q)
    double raw = 0.0;
    double count = 0.0;
};

namespace {

// Parameter views in declaration order.
class ParamCursor {
public:
    ParamCursor(std::span<const double> theta, const std::vector<TensorSpec>& layout) : theta_(theta), layout_(layout) {}
    std::span<const double> next() {
        const auto& t = layout_[i_++];
        return theta_.subspan(t.offset, t.size);
    }

private:
    std::span<const double> theta_;
    const std::vector<TensorSpec>& layout_;
    std::size_t i_ = 0;
};

}  // namespace

Network::Network(ModelConfig cfg) : cfg_(std::move(cfg)), layout_(parameter_layout(cfg_)) {
    n_params_ = layout_.back().offset + layout_.back().size;
}

void Network::run_forward(std::span<const double> theta, const PatchTensor& patch, Activations& act) const {
    if (theta.size() != n_params_) throw ValidationError("parameter vector has the wrong length");
    if (patch.width != cfg_.input_size || patch.height != cfg_.input_size)
        throw ValidationError("patch is " + std::to_string(patch.width) + "x" + std::to_string(patch.height) +
                              ", model expects " + std::to_string(cfg_.input_size) + "x" +
                              std::to_string(cfg_.input_size));
    ParamCursor pc(theta, layout_);

    int side = cfg_.input_size;
    int prev_c = 1;
    std::vector<double> cur(patch.values.begin(), patch.values.end());
    act.stages.resize(cfg_.channels.size());
    for (std::size_t s = 0; s < cfg_.channels.size(); ++s) {
        Stage& st = act.stages[s];
        st.shape = {prev_c, cfg_.channels[s], side, side, 3};
        st.in = std::move(cur);
        st.z.assign(st.shape.out_size(), 0.0);
        const auto w = pc.next();
        const auto b = pc.next();
        kernels::conv_forward(st.shape, st.in, w, b, st.z);
        st.a.resize(st.z.size());
        for (std::size_t i = 0; i < st.z.size(); ++i) st.a[i] = softplus(st.z[i]);
        check_finite(st.a, "trunk." + std::to_string(s));
        st.pooled.assign(st.z.size() / 4, 0.0);
        avgpool2(st.a, st.shape.out_channels, side, side, st.pooled);
        cur = st.pooled;
        prev_c = st.shape.out_channels;
        side /= 2;
    }
    const std::vector<double>& trunk = act.stages.back().pooled;
    const int ct = cfg_.channels.back();
    const int m = side;
    const std::size_t plane = static_cast<std::size_t>(m) * m;

    act.heads.resize(static_cast<std::size_t>(cfg_.n_levels()));
    for (int j = 0; j < cfg_.n_levels(); ++j) {
        HeadCache& h = act.heads[static_cast<std::size_t>(j)];
        h.map.assign(plane, 0.0);
        const std::string name = "head." + std::to_string(j);
        if (j == 0) {
            const auto w = pc.next();
            const auto b = pc.next();
            kernels::conv_forward({ct, 1, m, m, 1}, trunk, w, b, h.map);
        } else {
            h.in.assign(trunk.begin(), trunk.end());
            for (int i = 0; i < j; ++i) {
                const auto& prev = act.heads[static_cast<std::size_t>(i)].map;
                h.in.insert(h.in.end(), prev.begin(), prev.end());
            }
            const ConvShape cs{ct + j, cfg_.head_width, m, m, 3};
            h.u.assign(cs.out_size(), 0.0);
            const auto cw = pc.next();
            const auto cb = pc.next();
            kernels::conv_forward(cs, h.in, cw, cb, h.u);
            h.v.resize(h.u.size());
            for (std::size_t i = 0; i < h.u.size(); ++i) h.v[i] = softplus(h.u[i]);
            const auto pw = pc.next();
            const auto pb = pc.next();
            kernels::conv_forward({cfg_.head_width, 1, m, m, 1}, h.v, pw, pb, h.map);
        }
        check_finite(h.map, name);
    }

    const double area = static_cast<double>(plane);
    act.g.assign(static_cast<std::size_t>(ct), 0.0);
    for (int c = 0; c < ct; ++c) {
        double s = 0.0;
        for (std::size_t p = 0; p < plane; ++p) s += trunk[c * plane + p];
        act.g[static_cast<std::size_t>(c)] = s / area;
    }
    if (cfg_.fusion == FusionMode::concat_feature) {
        for (const auto& h : act.heads) {
            double s = 0.0;
            for (double v : h.map) s += std::max(v, 0.0);
            act.g.push_back(s / area);
        }
    }
    const auto w1 = pc.next();
    const auto b1 = pc.next();
    const auto w2 = pc.next();
    const auto b2 = pc.next();
    const std::size_t gdim = act.g.size();
    act.q.assign(b1.begin(), b1.end());
    for (int k = 0; k < cfg_.count_hidden; ++k)
        for (std::size_t i = 0; i < gdim; ++i) act.q[static_cast<std::size_t>(k)] += w1[k * gdim + i] * act.g[i];
    act.r.resize(act.q.size());
    for (std::size_t k = 0; k < act.q.size(); ++k) act.r[k] = softplus(act.q[k]);
    act.raw = b2[0];
    for (std::size_t k = 0; k < act.r.size(); ++k) act.raw += w2[k] * act.r[k];
    act.count = act.raw * area;
    if (!std::isfinite(act.count)) throw NumericalError("non-finite activation in layer count");
}

namespace {

Prediction to_prediction(const ModelConfig& cfg, const std::vector<HeadCache>& heads, double count) {
    Prediction p;
    const int m = cfg.map_size();
    for (std::size_t j = 0; j < heads.size(); ++j) {
        DensityMap dm{cfg.levels[j], Raster<double>(m, m, 0.0)};
        dm.grid.values = heads[j].map;
        p.stack.maps.push_back(std::move(dm));
    }
    p.stack.count = count;
    return p;
}

}  // namespace

Prediction Network::forward(std::span<const double> theta, const PatchTensor& patch) const {
    Activations act;
    run_forward(theta, patch, act);
    return to_prediction(cfg_, act.heads, act.count);
}

LossReport Network::loss(std::span<const double> theta, const PatchTensor& patch, const DensityStack& target,
                         const LossConfig& lcfg) const {
    return composition_loss(forward(theta, patch).stack, target, lcfg);
}

LossReport Network::loss_and_gradient(std::span<const double> theta, const PatchTensor& patch,
                                      const DensityStack& target, const LossConfig& lcfg,
                                      std::span<double> grad) const {
    if (grad.size() != n_params_) throw ValidationError("gradient buffer has the wrong length");
    if (lcfg.fusion_mode != cfg_.fusion)
        throw ValidationError("loss fusion mode " + to_string(lcfg.fusion_mode) + " does not match model fusion " +
                              to_string(cfg_.fusion));
    Activations act;
    run_forward(theta, patch, act);
    const Prediction pred = to_prediction(cfg_, act.heads, act.count);
    const LossWithGrad lg = composition_loss_grad(pred.stack, target, lcfg);
    std::fill(grad.begin(), grad.end(), 0.0);

    const int ct = cfg_.channels.back();
    const int m = cfg_.map_size();
    const std::size_t plane = static_cast<std::size_t>(m) * m;
    const double area = static_cast<double>(plane);
    const int nl = cfg_.n_levels();

    auto tensor = [&](std::size_t idx) { return theta.subspan(layout_[idx].offset, layout_[idx].size); };
    auto tgrad = [&](std::size_t idx) { return grad.subspan(layout_[idx].offset, layout_[idx].size); };

    // Index of the first head tensor and of count.fc1.weight in the layout.
    const std::size_t head_base = 2 * cfg_.channels.size();
    const std::size_t count_base = layout_.size() - 4;

    std::vector<std::vector<double>> dmap(static_cast<std::size_t>(nl));
    for (int j = 0; j < nl; ++j) dmap[static_cast<std::size_t>(j)] = lg.grad.maps[static_cast<std::size_t>(j)].grid.values;
    std::vector<double> dtrunk(static_cast<std::size_t>(ct) * plane, 0.0);

    // Count head.
    {
        const double draw = lg.grad.count * area;
        const auto w1 = tensor(count_base);
        const auto w2 = tensor(count_base + 2);
        auto gw1 = tgrad(count_base);
        auto gb1 = tgrad(count_base + 1);
        auto gw2 = tgrad(count_base + 2);
        auto gb2 = tgrad(count_base + 3);
        gb2[0] += draw;
        const std::size_t gdim = act.g.size();
        std::vector<double> dg(gdim, 0.0);
        for (std::size_t k = 0; k < act.r.size(); ++k) {
            gw2[k] += draw * act.r[k];
            const double dq = draw * w2[k] * sigmoid(act.q[k]);
            gb1[k] += dq;
            for (std::size_t i = 0; i < gdim; ++i) {
                gw1[k * gdim + i] += dq * act.g[i];
                dg[i] += dq * w1[k * gdim + i];
            }
        }
        for (int c = 0; c < ct; ++c)
            for (std::size_t p = 0; p < plane; ++p) dtrunk[c * plane + p] += dg[static_cast<std::size_t>(c)] / area;
        if (cfg_.fusion == FusionMode::concat_feature) {
            for (int j = 0; j < nl; ++j) {
                const double d = dg[static_cast<std::size_t>(ct + j)] / area;
                const auto& mp = act.heads[static_cast<std::size_t>(j)].map;
                for (std::size_t p = 0; p < plane; ++p)
                    if (mp[p] > 0.0) dmap[static_cast<std::size_t>(j)][p] += d;
            }
        }
    }

    // Density heads, last level first so earlier-map gradients are complete
    // before their own head is processed.
    const auto& trunk = act.stages.back().pooled;
    for (int j = nl - 1; j >= 0; --j) {
        const auto& h = act.heads[static_cast<std::size_t>(j)];
        const auto& dm = dmap[static_cast<std::size_t>(j)];
        const std::size_t t0 = j == 0 ? head_base : head_base + 2 + 4 * static_cast<std::size_t>(j - 1);
        if (j == 0) {
            const ConvShape ps{ct, 1, m, m, 1};
            kernels::conv_backward_params(ps, trunk, dm, tgrad(t0), tgrad(t0 + 1));
            std::vector<double> dt(ps.in_size());
            kernels::conv_backward_input(ps, dm, tensor(t0), dt);
            for (std::size_t i = 0; i < dt.size(); ++i) dtrunk[i] += dt[i];
            continue;
        }
        const ConvShape ps{cfg_.head_width, 1, m, m, 1};
        kernels::conv_backward_params(ps, h.v, dm, tgrad(t0 + 2), tgrad(t0 + 3));
        std::vector<double> du(ps.in_size());
        kernels::conv_backward_input(ps, dm, tensor(t0 + 2), du);
        for (std::size_t i = 0; i < du.size(); ++i) du[i] *= sigmoid(h.u[i]);
        const ConvShape cs{ct + j, cfg_.head_width, m, m, 3};
        kernels::conv_backward_params(cs, h.in, du, tgrad(t0), tgrad(t0 + 1));
        std::vector<double> din(cs.in_size());
        kernels::conv_backward_input(cs, du, tensor(t0), din);
        for (std::size_t i = 0; i < dtrunk.size(); ++i) dtrunk[i] += din[i];
        for (int i = 0; i < j; ++i) {
            auto& target_grad = dmap[static_cast<std::size_t>(i)];
            const std::size_t off = (static_cast<std::size_t>(ct) + i) * plane;
            for (std::size_t p = 0; p < plane; ++p) target_grad[p] += din[off + p];
        }
    }

    // Trunk.
    std::vector<double> dpooled = std::move(dtrunk);
    for (std::size_t s = act.stages.size(); s-- > 0;) {
        const Stage& st = act.stages[s];
        std::vector<double> dz(st.z.size());
        avgpool2_backward(dpooled, st.shape.out_channels, st.shape.height, st.shape.width, dz);
        for (std::size_t i = 0; i < dz.size(); ++i) dz[i] *= sigmoid(st.z[i]);
        kernels::conv_backward_params(st.shape, st.in, dz, tgrad(2 * s), tgrad(2 * s + 1));
        if (s == 0) break;
        dpooled.assign(st.shape.in_size(), 0.0);
        kernels::conv_backward_input(st.shape, dz, tensor(2 * s), dpooled);
    }

    for (double g : grad)
        if (!std::isfinite(g)) throw NumericalError("non-finite parameter gradient");
    return lg.report;
}

namespace {

std::vector<double> widen(const std::vector<float>& v) { return {v.begin(), v.end()}; }

}  // namespace

Prediction forward(const ModelParams& params, const PatchTensor& patch) {
    const Network net(params.config);
    return net.forward(widen(params.values), patch);
}

Prediction forward(const ModelParams& params, const GrayImage& patch) { return forward(params, to_patch_tensor(patch)); }

GradientResult gradients(const ModelParams& params, const PatchTensor& patch, const DensityStack& target,
                         const LossConfig& lcfg) {
    const Network net(params.config);
    GradientResult out;
    out.grad.assign(net.parameter_count(), 0.0);
    out.report = net.loss_and_gradient(widen(params.values), patch, target, lcfg, out.grad);
    return out;
}

double predicted_count(const Prediction& pred, FusionMode mode) {
    std::vector<double> sums;
    for (const auto& m : pred.stack.maps) sums.push_back(clamped_sum(m));
    return fuse_counts(mode, pred.stack.count, sums);
}

}  // namespace qck
