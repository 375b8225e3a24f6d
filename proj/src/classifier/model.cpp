#include "curator/classifier/model.hpp"

#include <algorithm>
#include <cmath>

#include "curator/errors.hpp"
#include "curator/random.hpp"

namespace curator {

namespace {

// Block order in param_layout(); indices below rely on it.
enum Block : std::size_t {
    kGlobalW1, kGlobalB1, kGlobalW2, kGlobalB2,
    kSpatialW1, kSpatialB1, kSpatialW2, kSpatialB2,
    kFusionW, kFusionB,
    kHeadW1, kHeadB1, kHeadW2, kHeadB2, kHeadW3, kHeadB3,
    kBlockCount
};

constexpr double kLogEps = 1e-12;

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// log(1 + exp(x)) without overflow.
double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

// y = W x + b with W row-major (rows x cols).
void affine(const double* w, const double* b, std::span<const double> x, std::vector<double>& y,
            int rows) {
    const std::size_t cols = x.size();
    y.resize(static_cast<std::size_t>(rows));
    for (int r = 0; r < rows; ++r) {
        const double* row = w + static_cast<std::size_t>(r) * cols;
        double s = b[r];
        for (std::size_t c = 0; c < cols; ++c) s += row[c] * x[c];
        y[static_cast<std::size_t>(r)] = s;
    }
}

// gW += dy x^T, gb += dy, dx = W^T dy (dx optional).
void affine_backward(const double* w, std::span<const double> x, std::span<const double> dy,
                     double* gw, double* gb, std::vector<double>* dx) {
    const std::size_t cols = x.size();
    if (dx) dx->assign(cols, 0.0);
    for (std::size_t r = 0; r < dy.size(); ++r) {
        const double d = dy[r];
        gb[r] += d;
        if (d == 0.0) continue;
        double* grow = gw + r * cols;
        const double* row = w + r * cols;
        for (std::size_t c = 0; c < cols; ++c) grow[c] += d * x[c];
        if (dx) {
            for (std::size_t c = 0; c < cols; ++c) (*dx)[c] += d * row[c];
        }
    }
}

void relu_inplace(std::vector<double>& v) {
    for (double& x : v) x = std::max(0.0, x);
}

struct GateTrace {
    std::vector<double> hidden_pre;
    std::vector<double> hidden;
    std::vector<double> gate;
};

struct Trace {
    GateTrace g, s;
    std::vector<double> z, fused_pre, fused, h1_pre, h1, h1_mask, h2_pre, h2, h2_mask;
    double logit = 0.0;
    double prob = 0.0;
};

class Net {
public:
    explicit Net(const PreferenceModel& m) : m_(m) {
        const auto& L = m.layout();
        for (std::size_t i = 0; i < kBlockCount; ++i) p_[i] = m.params().data() + L[i].offset;
    }

    const double* p(Block b) const { return p_[b]; }

    void gate_forward(Block w1, Block b1, Block w2, Block b2, int hidden, int dim,
                      std::span<const double> x, GateTrace& t) const {
        affine(p(w1), p(b1), x, t.hidden_pre, hidden);
        t.hidden = t.hidden_pre;
        relu_inplace(t.hidden);
        affine(p(w2), p(b2), t.hidden, t.gate, dim);
        for (double& v : t.gate) v = sigmoid(v);
    }

    void forward(std::span<const double> xg, std::span<const double> xs, Trace& t,
                 const Dropout& drop) const {
        const ModelDims& d = m_.dims();
        gate_forward(kGlobalW1, kGlobalB1, kGlobalW2, kGlobalB2, d.gate_hidden_global, d.global_dim,
                     xg, t.g);
        gate_forward(kSpatialW1, kSpatialB1, kSpatialW2, kSpatialB2, d.gate_hidden_spatial,
                     d.spatial_dim, xs, t.s);
        t.z.resize(xg.size() + xs.size());
        for (std::size_t i = 0; i < xg.size(); ++i) t.z[i] = t.g.gate[i] * xg[i];
        for (std::size_t i = 0; i < xs.size(); ++i) t.z[xg.size() + i] = t.s.gate[i] * xs[i];

        affine(p(kFusionW), p(kFusionB), t.z, t.fused_pre, d.fusion_dim);
        t.fused = t.fused_pre;
        relu_inplace(t.fused);

        affine(p(kHeadW1), p(kHeadB1), t.fused, t.h1_pre, d.head_hidden1);
        t.h1 = t.h1_pre;
        relu_inplace(t.h1);
        apply_dropout(t.h1, t.h1_mask, drop);

        affine(p(kHeadW2), p(kHeadB2), t.h1, t.h2_pre, d.head_hidden2);
        t.h2 = t.h2_pre;
        relu_inplace(t.h2);
        apply_dropout(t.h2, t.h2_mask, drop);

        std::vector<double> out;
        affine(p(kHeadW3), p(kHeadB3), t.h2, out, 1);
        t.logit = out[0];
        if (!std::isfinite(t.logit)) throw NumericError("non-finite logit in preference model");
        t.prob = sigmoid(t.logit);
    }

    // Accumulates d(loss)/d(params) for one example, given d(loss)/d(logit).
    void backward(std::span<const double> xg, std::span<const double> xs, const Trace& t,
                  double dlogit, double* grad) const {
        const auto& L = m_.layout();
        auto g = [&](Block b) { return grad + L[b].offset; };

        std::vector<double> dh2;
        const double dl[1] = {dlogit};
        affine_backward(p(kHeadW3), t.h2, dl, g(kHeadW3), g(kHeadB3), &dh2);
        through_dropout_relu(dh2, t.h2_mask, t.h2_pre);

        std::vector<double> dh1;
        affine_backward(p(kHeadW2), t.h1, dh2, g(kHeadW2), g(kHeadB2), &dh1);
        through_dropout_relu(dh1, t.h1_mask, t.h1_pre);

        std::vector<double> dfused;
        affine_backward(p(kHeadW1), t.fused, dh1, g(kHeadW1), g(kHeadB1), &dfused);
        for (std::size_t i = 0; i < dfused.size(); ++i)
            if (t.fused_pre[i] <= 0.0) dfused[i] = 0.0;

        std::vector<double> dz;
        affine_backward(p(kFusionW), t.z, dfused, g(kFusionW), g(kFusionB), &dz);

        gate_backward(kGlobalW1, kGlobalB1, kGlobalW2, kGlobalB2, xg,
                      std::span<const double>(dz).subspan(0, xg.size()), t.g, g);
        gate_backward(kSpatialW1, kSpatialB1, kSpatialW2, kSpatialB2, xs,
                      std::span<const double>(dz).subspan(xg.size()), t.s, g);
    }

private:
    static void apply_dropout(std::vector<double>& h, std::vector<double>& mask, const Dropout& d) {
        if (d.rate <= 0.0 || d.rng == nullptr) {
            mask.clear();
            return;
        }
        // Inverted dropout: survivors scale by 1/(1-rate) so eval needs no rescale.
        const double keep_scale = 1.0 / (1.0 - d.rate);
        mask.resize(h.size());
        for (std::size_t i = 0; i < h.size(); ++i) {
            mask[i] = uniform01(*d.rng) < d.rate ? 0.0 : keep_scale;
            h[i] *= mask[i];
        }
    }

    static void through_dropout_relu(std::vector<double>& dh, const std::vector<double>& mask,
                                     const std::vector<double>& pre) {
        for (std::size_t i = 0; i < dh.size(); ++i) {
            if (!mask.empty()) dh[i] *= mask[i];
            if (pre[i] <= 0.0) dh[i] = 0.0;
        }
    }

    template <class G>
    void gate_backward(Block w1, Block b1, Block w2, Block b2, std::span<const double> x,
                       std::span<const double> dz, const GateTrace& t, G g) const {
        // z = gate * x  ->  d(gate) = dz * x; through the sigmoid: gate (1 - gate).
        std::vector<double> du(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double gi = t.gate[i];
            du[i] = dz[i] * x[i] * gi * (1.0 - gi);
        }
        std::vector<double> dhidden;
        affine_backward(p(w2), t.hidden, du, g(w2), g(b2), &dhidden);
        for (std::size_t i = 0; i < dhidden.size(); ++i)
            if (t.hidden_pre[i] <= 0.0) dhidden[i] = 0.0;
        affine_backward(p(w1), x, dhidden, g(w1), g(b1), nullptr);
    }

    const PreferenceModel& m_;
    const double* p_[kBlockCount] = {};
};

void check_dims(const PreferenceModel& m, const FeatureBundle& f) {
    const ModelDims& d = m.dims();
    if (static_cast<int>(f.global_features.dim()) != d.global_dim ||
        static_cast<int>(f.spatial_features.dim()) != d.spatial_dim)
        throw ValidationError("feature dims (" + std::to_string(f.global_features.dim()) + ", " +
                              std::to_string(f.spatial_features.dim()) + ") do not match model (" +
                              std::to_string(d.global_dim) + ", " + std::to_string(d.spatial_dim) +
                              ")");
}

}  // namespace

ModelDims make_dims(int global_dim, int spatial_dim, const ModelShape& shape) {
    ModelDims d;
    d.global_dim = global_dim;
    d.spatial_dim = spatial_dim;
    d.gate_hidden_global = shape.gate_hidden_global > 0 ? shape.gate_hidden_global
                                                        : std::max(1, global_dim / 4);
    d.gate_hidden_spatial = shape.gate_hidden_spatial > 0 ? shape.gate_hidden_spatial
                                                          : std::max(1, spatial_dim / 4);
    d.fusion_input_dim = global_dim + spatial_dim;
    d.fusion_dim = shape.fusion_dim;
    d.head_hidden1 = shape.head_hidden1;
    d.head_hidden2 = shape.head_hidden2;
    d.gate_init_open = shape.gate_init_open;
    return d;
}

void validate(const ModelDims& d) {
    for (int v : {d.global_dim, d.spatial_dim, d.gate_hidden_global, d.gate_hidden_spatial,
                  d.fusion_input_dim, d.fusion_dim, d.head_hidden1, d.head_hidden2}) {
        if (v < 1) throw ValidationError("model widths must all be positive");
    }
    if (d.fusion_input_dim != d.global_dim + d.spatial_dim)
        throw ValidationError("fusion input width " + std::to_string(d.fusion_input_dim) +
                              " != gated concat width " +
                              std::to_string(d.global_dim + d.spatial_dim));
    if (!(d.gate_init_open > 0.0 && d.gate_init_open < 1.0))
        throw ValidationError("gate_init_open must lie in (0, 1)");
}

std::vector<ParamBlock> param_layout(const ModelDims& d) {
    validate(d);
    std::vector<ParamBlock> L;
    std::size_t off = 0;
    auto add = [&](std::string name, int rows, int cols) {
        L.push_back({std::move(name), rows, cols, off});
        off += L.back().size();
    };
    add("attn_global.w1", d.gate_hidden_global, d.global_dim);
    add("attn_global.b1", d.gate_hidden_global, 1);
    add("attn_global.w2", d.global_dim, d.gate_hidden_global);
    add("attn_global.b2", d.global_dim, 1);
    add("attn_spatial.w1", d.gate_hidden_spatial, d.spatial_dim);
    add("attn_spatial.b1", d.gate_hidden_spatial, 1);
    add("attn_spatial.w2", d.spatial_dim, d.gate_hidden_spatial);
    add("attn_spatial.b2", d.spatial_dim, 1);
    add("fusion.w", d.fusion_dim, d.fusion_input_dim);
    add("fusion.b", d.fusion_dim, 1);
    add("head.w1", d.head_hidden1, d.fusion_dim);
    add("head.b1", d.head_hidden1, 1);
    add("head.w2", d.head_hidden2, d.head_hidden1);
    add("head.b2", d.head_hidden2, 1);
    add("head.w3", 1, d.head_hidden2);
    add("head.b3", 1, 1);
    return L;
}

const std::string& block_name_at(std::span<const ParamBlock> layout, std::size_t i) {
    for (const ParamBlock& b : layout) {
        if (i >= b.offset && i < b.offset + b.size()) return b.name;
    }
    static const std::string unknown = "<out of range>";
    return unknown;
}

PreferenceModel::PreferenceModel(ModelDims dims, std::uint64_t seed, std::vector<double> params)
    : dims_(dims), seed_(seed), layout_(param_layout(dims)), params_(std::move(params)) {
    const std::size_t expected = layout_.back().offset + layout_.back().size();
    if (params_.size() != expected)
        throw ValidationError("parameter count " + std::to_string(params_.size()) +
                              " does not match dims (expected " + std::to_string(expected) + ")");
    for (std::size_t i = 0; i < params_.size(); ++i) {
        if (!std::isfinite(params_[i]))
            throw NumericError("non-finite parameter in block " + block_name_at(layout_, i));
    }
}

std::span<const double> PreferenceModel::block(const std::string& name) const {
    for (const ParamBlock& b : layout_) {
        if (b.name == name) return std::span<const double>(params_).subspan(b.offset, b.size());
    }
    throw ValidationError("no parameter block named " + name);
}

std::span<double> PreferenceModel::mutable_block(const std::string& name) {
    for (const ParamBlock& b : layout_) {
        if (b.name == name) return std::span<double>(params_).subspan(b.offset, b.size());
    }
    throw ValidationError("no parameter block named " + name);
}

PreferenceModel init_model(const ModelDims& dims, std::uint64_t seed) {
    const auto L = param_layout(dims);
    std::vector<double> params(L.back().offset + L.back().size());
    std::mt19937_64 rng(seed);
    // Biases share the fan-in of the weight matrix that precedes them.
    int fan_in = 1;
    for (std::size_t bi = 0; bi < L.size(); ++bi) {
        const ParamBlock& b = L[bi];
        const bool is_bias = b.name[b.name.rfind('.') + 1] == 'b';
        if (!is_bias) fan_in = b.cols;
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (std::size_t i = 0; i < b.size(); ++i)
            params[b.offset + i] = (2.0 * uniform01(rng) - 1.0) * bound;
    }
    const double open_bias = std::log(dims.gate_init_open / (1.0 - dims.gate_init_open));
    for (Block gb : {kGlobalB2, kSpatialB2}) {
        const ParamBlock& b = L[gb];
        std::fill_n(params.begin() + static_cast<std::ptrdiff_t>(b.offset), b.size(), open_bias);
    }
    return PreferenceModel(dims, seed, std::move(params));
}

double forward(const PreferenceModel& m, const FeatureBundle& f) {
    check_dims(m, f);
    Trace t;
    Net(m).forward(f.global_features.values(), f.spatial_features.values(), t, {});
    return t.prob;
}

GateValues attention_gates(const PreferenceModel& m, const FeatureBundle& f) {
    check_dims(m, f);
    Trace t;
    Net(m).forward(f.global_features.values(), f.spatial_features.values(), t, {});
    return {t.g.gate, t.s.gate};
}

Prediction predict(const PreferenceModel& m, const FeatureBundle& f, double threshold) {
    const double p = forward(m, f);
    return {p > threshold ? Label::accept : Label::reject, p};
}

LossAndGradients loss_and_gradients(const PreferenceModel& m, std::span<const LabeledExample> batch,
                                    Dropout dropout) {
    if (batch.empty()) throw ValidationError("loss over an empty batch");
    for (const LabeledExample& ex : batch) check_dims(m, ex.features);

    LossAndGradients out;
    out.gradients.assign(m.size(), 0.0);
    const Net net(m);
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    const double loss_cap = -std::log(kLogEps);
    Trace t;
    double total = 0.0;
    for (const LabeledExample& ex : batch) {
        const auto xg = ex.features.global_features.values();
        const auto xs = ex.features.spatial_features.values();
        net.forward(xg, xs, t, dropout);
        const double y = ex.label == Label::accept ? 1.0 : 0.0;
        // -log(p) = softplus(-z), -log(1-p) = softplus(z); capping equals
        // clamping p to [eps, 1-eps] inside the log.
        const double nll = y > 0.5 ? softplus(-t.logit) : softplus(t.logit);
        total += std::min(nll, loss_cap);
        net.backward(xg, xs, t, (t.prob - y) * inv_n, out.gradients.data());
    }
    out.loss = total * inv_n;
    return out;
}

}  // namespace curator
