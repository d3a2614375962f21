#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "histotile/errors.hpp"
#include "histotile/image.hpp"
#include "histotile/labels.hpp"
#include "histotile/rng.hpp"
#include "histotile/tensor.hpp"
#include "histotile/tiling.hpp"

namespace histotile {

// Residual patch classifier configuration. Patches are bilinearly downscaled
// to input_size before entering the network; widths gives the channel count
// per stage, with a stride-2 conv between stages.
struct ModelConfig {
    int input_size = 64;
    std::vector<int> widths = {8, 16, 32};
    int blocks_per_stage = 1;
    double learning_rate = 0.0001;
    double momentum = 0.9;
    bool nesterov = true;
    int batch_size = 32;
    int max_epochs = 100;
    std::uint64_t seed = 0;

    void validate() const {
        if (input_size < 1) throw ConfigError("ModelConfig: input_size must be >= 1");
        if (widths.empty()) throw ConfigError("ModelConfig: widths must be non-empty");
        for (int w : widths)
            if (w < 1) throw ConfigError("ModelConfig: widths must be >= 1");
        if (blocks_per_stage < 0)
            throw ConfigError("ModelConfig: blocks_per_stage must be >= 0");
        if (!(learning_rate > 0)) throw ConfigError("ModelConfig: learning_rate must be > 0");
        if (momentum < 0 || momentum >= 1)
            throw ConfigError("ModelConfig: momentum must be in [0,1)");
        if (batch_size < 1) throw ConfigError("ModelConfig: batch_size must be >= 1");
        if (max_epochs < 0) throw ConfigError("ModelConfig: max_epochs must be >= 0");
    }
};

struct NamedTensor {
    std::string name;
    Tensor value;
};

// Ordered collection of named parameter tensors. Order is fixed by the
// topology so that velocity/gradient collections line up index-for-index.
struct Params {
    std::vector<NamedTensor> tensors;

    Tensor& find(const std::string& name) {
        for (auto& t : tensors)
            if (t.name == name) return t.value;
        throw Error("Params: no tensor named \"" + name + "\"");
    }
    const Tensor& find(const std::string& name) const {
        for (const auto& t : tensors)
            if (t.name == name) return t.value;
        throw Error("Params: no tensor named \"" + name + "\"");
    }

    Params zeros_like() const {
        Params out;
        out.tensors.reserve(tensors.size());
        for (const auto& t : tensors)
            out.tensors.push_back({t.name, Tensor(t.value.shape)});
        return out;
    }
};

namespace detail {

struct BlockIdx {
    int c1w, c1b, c2w, c2b;
};
struct StageIdx {
    int down_w = -1, down_b = -1;
    std::vector<BlockIdx> blocks;
};
// Indices into Params::tensors. Construction order here defines both the
// init order and the serialized order.
struct NetLayout {
    int stem_w = 0, stem_b = 1;
    std::vector<StageIdx> stages;
    int fc_w = 0, fc_b = 0;
};

inline NetLayout make_layout(const ModelConfig& cfg) {
    NetLayout layout;
    int next = 2; // stem.w, stem.b
    layout.stages.resize(cfg.widths.size());
    for (std::size_t s = 0; s < cfg.widths.size(); ++s) {
        auto& stage = layout.stages[s];
        if (s > 0) {
            stage.down_w = next++;
            stage.down_b = next++;
        }
        for (int k = 0; k < cfg.blocks_per_stage; ++k)
            stage.blocks.push_back({next++, next++, next++, next++});
        // BlockIdx fields fill in declaration order: c1w, c1b, c2w, c2b
    }
    layout.fc_w = next++;
    layout.fc_b = next++;
    return layout;
}

} // namespace detail

// He-style initialization: conv and fc weights drawn from N(0, 2/fan_in),
// biases zero. Deterministic for a given config seed.
inline Params init_params(const ModelConfig& cfg) {
    cfg.validate();
    Xorshift64Star rng(derive_seed(cfg.seed, 0));
    Params params;
    auto add_conv = [&](const std::string& name, int c_out, int c_in) {
        Tensor w({c_out, c_in, 3, 3});
        double scale = std::sqrt(2.0 / (c_in * 9));
        for (auto& v : w.data) v = scale * rng.next_gaussian();
        params.tensors.push_back({name + ".w", std::move(w)});
        params.tensors.push_back({name + ".b", Tensor({c_out})});
    };

    add_conv("stem", cfg.widths[0], 3);
    for (std::size_t s = 0; s < cfg.widths.size(); ++s) {
        const std::string stage = "stage" + std::to_string(s);
        if (s > 0) add_conv(stage + ".down", cfg.widths[s], cfg.widths[s - 1]);
        for (int k = 0; k < cfg.blocks_per_stage; ++k) {
            const std::string block = stage + ".block" + std::to_string(k);
            add_conv(block + ".conv1", cfg.widths[s], cfg.widths[s]);
            add_conv(block + ".conv2", cfg.widths[s], cfg.widths[s]);
        }
    }
    {
        Tensor w({kNumClasses, cfg.widths.back()});
        double scale = std::sqrt(2.0 / cfg.widths.back());
        for (auto& v : w.data) v = scale * rng.next_gaussian();
        params.tensors.push_back({"fc.w", std::move(w)});
        params.tensors.push_back({"fc.b", Tensor({kNumClasses})});
    }
    return params;
}

namespace detail {

// 3x3 convolution, padding 1. out must be pre-shaped [c_out, oh, ow] with
// oh = (h - 1) / stride + 1.
inline void conv3x3_forward(const Tensor& in, const Tensor& w, const Tensor& b,
                            int stride, Tensor& out) {
    const int ci = in.shape[0], h = in.shape[1], wd = in.shape[2];
    const int co = out.shape[0], oh = out.shape[1], ow = out.shape[2];
    for (int oc = 0; oc < co; ++oc) {
        double* op = out.data.data() + static_cast<std::size_t>(oc) * oh * ow;
        const double bias = b.data[oc];
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) op[oy * ow + ox] = bias;
        for (int ic = 0; ic < ci; ++ic) {
            const double* ip = in.data.data() + static_cast<std::size_t>(ic) * h * wd;
            const double* wp = w.data.data() +
                (static_cast<std::size_t>(oc) * ci + ic) * 9;
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox) {
                    double acc = 0.0;
                    const int base_y = oy * stride - 1;
                    const int base_x = ox * stride - 1;
                    for (int ky = 0; ky < 3; ++ky) {
                        const int iy = base_y + ky;
                        if (iy < 0 || iy >= h) continue;
                        for (int kx = 0; kx < 3; ++kx) {
                            const int ix = base_x + kx;
                            if (ix < 0 || ix >= wd) continue;
                            acc += wp[ky * 3 + kx] * ip[iy * wd + ix];
                        }
                    }
                    op[oy * ow + ox] += acc;
                }
            }
        }
    }
}

// Gradients for conv3x3_forward. din/dw/db are accumulated into.
inline void conv3x3_backward(const Tensor& in, const Tensor& w, int stride,
                             const Tensor& dout, Tensor& din, Tensor& dw,
                             Tensor& db) {
    const int ci = in.shape[0], h = in.shape[1], wd = in.shape[2];
    const int co = dout.shape[0], oh = dout.shape[1], ow = dout.shape[2];
    for (int oc = 0; oc < co; ++oc) {
        const double* dop = dout.data.data() + static_cast<std::size_t>(oc) * oh * ow;
        double bias_grad = 0.0;
        for (int i = 0; i < oh * ow; ++i) bias_grad += dop[i];
        db.data[oc] += bias_grad;
        for (int ic = 0; ic < ci; ++ic) {
            const double* ip = in.data.data() + static_cast<std::size_t>(ic) * h * wd;
            double* dip = din.data.data() + static_cast<std::size_t>(ic) * h * wd;
            const std::size_t woff = (static_cast<std::size_t>(oc) * ci + ic) * 9;
            const double* wp = w.data.data() + woff;
            double* dwp = dw.data.data() + woff;
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox) {
                    const double g = dop[oy * ow + ox];
                    if (g == 0.0) continue;
                    const int base_y = oy * stride - 1;
                    const int base_x = ox * stride - 1;
                    for (int ky = 0; ky < 3; ++ky) {
                        const int iy = base_y + ky;
                        if (iy < 0 || iy >= h) continue;
                        for (int kx = 0; kx < 3; ++kx) {
                            const int ix = base_x + kx;
                            if (ix < 0 || ix >= wd) continue;
                            dwp[ky * 3 + kx] += g * ip[iy * wd + ix];
                            dip[iy * wd + ix] += g * wp[ky * 3 + kx];
                        }
                    }
                }
            }
        }
    }
}

inline void relu_inplace(Tensor& t) {
    for (auto& v : t.data)
        if (v < 0) v = 0;
}

// dpre = dout where pre > 0, else 0 (subgradient 0 at the kink).
inline Tensor relu_backward(const Tensor& dout, const Tensor& pre) {
    Tensor dpre(dout.shape);
    for (std::size_t i = 0; i < dout.data.size(); ++i)
        dpre.data[i] = pre.data[i] > 0 ? dout.data[i] : 0.0;
    return dpre;
}

struct BlockCache {
    Tensor in, c1_pre, c1_out, c2_out, sum_pre, out;
};
struct StageCache {
    Tensor down_pre, down_out;
    std::vector<BlockCache> blocks;
};
struct ForwardCache {
    Tensor input, stem_pre, stem_out;
    std::vector<StageCache> stages;
    std::vector<double> gap;
    std::array<double, kNumClasses> logits{};
};

inline int downsampled(int n) { return (n - 1) / 2 + 1; }

} // namespace detail

// Numerically stable softmax over 4 logits.
inline std::array<double, kNumClasses> softmax(const std::array<double, kNumClasses>& logits) {
    double max_logit = logits[0];
    for (double v : logits) max_logit = std::max(max_logit, v);
    std::array<double, kNumClasses> p{};
    double sum = 0.0;
    for (int k = 0; k < kNumClasses; ++k) {
        p[k] = std::exp(logits[k] - max_logit);
        sum += p[k];
    }
    for (auto& v : p) v /= sum;
    return p;
}

// Bilinear downscale of a patch to the network input: channel-planar tensor
// [3, size, size] with values in [0,1].
inline Tensor patch_to_input(const RgbImage& pixels, int size) {
    Tensor out({3, size, size});
    const double sx = static_cast<double>(pixels.width) / size;
    const double sy = static_cast<double>(pixels.height) / size;
    for (int c = 0; c < 3; ++c) {
        double* plane = out.data.data() + static_cast<std::size_t>(c) * size * size;
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x)
                plane[y * size + x] =
                    sample_bilinear(pixels, (x + 0.5) * sx - 0.5,
                                    (y + 0.5) * sy - 0.5, c) / 255.0;
    }
    return out;
}

// Full forward pass for one input tensor [3, S, S]. If cache is non-null the
// intermediates needed by backward_sample are kept.
inline std::array<double, kNumClasses> forward_sample(const Params& params,
                                                      const ModelConfig& cfg,
                                                      const detail::NetLayout& layout,
                                                      const Tensor& input,
                                                      detail::ForwardCache* cache) {
    if (input.shape != std::vector<int>{3, cfg.input_size, cfg.input_size})
        throw ShapeMismatchError("forward: input shape " + shape_string(input.shape) +
                                 " does not match config input_size " +
                                 std::to_string(cfg.input_size));
    using namespace detail;
    ForwardCache local;
    ForwardCache& c = cache ? *cache : local;
    c.stages.clear();
    c.input = input;

    int res = cfg.input_size;
    // stem
    Tensor pre({cfg.widths[0], res, res});
    conv3x3_forward(input, params.tensors[layout.stem_w].value,
                    params.tensors[layout.stem_b].value, 1, pre);
    c.stem_pre = pre;
    relu_inplace(pre);
    c.stem_out = std::move(pre);

    const Tensor* x = &c.stem_out;
    c.stages.resize(cfg.widths.size());
    for (std::size_t s = 0; s < cfg.widths.size(); ++s) {
        StageCache& sc = c.stages[s];
        if (s > 0) {
            res = downsampled(res);
            Tensor dpre({cfg.widths[s], res, res});
            conv3x3_forward(*x, params.tensors[layout.stages[s].down_w].value,
                            params.tensors[layout.stages[s].down_b].value, 2, dpre);
            sc.down_pre = dpre;
            relu_inplace(dpre);
            sc.down_out = std::move(dpre);
            x = &sc.down_out;
        }
        sc.blocks.resize(layout.stages[s].blocks.size());
        for (std::size_t k = 0; k < sc.blocks.size(); ++k) {
            const auto& bi = layout.stages[s].blocks[k];
            BlockCache& bc = sc.blocks[k];
            bc.in = *x;
            Tensor c1({cfg.widths[s], res, res});
            conv3x3_forward(bc.in, params.tensors[bi.c1w].value,
                            params.tensors[bi.c1b].value, 1, c1);
            bc.c1_pre = c1;
            relu_inplace(c1);
            bc.c1_out = std::move(c1);
            Tensor c2({cfg.widths[s], res, res});
            conv3x3_forward(bc.c1_out, params.tensors[bi.c2w].value,
                            params.tensors[bi.c2b].value, 1, c2);
            bc.c2_out = c2;
            // identity shortcut: out = relu(F(x) + x)
            for (std::size_t i = 0; i < c2.data.size(); ++i)
                c2.data[i] += bc.in.data[i];
            bc.sum_pre = c2;
            relu_inplace(c2);
            bc.out = std::move(c2);
            x = &bc.out;
        }
    }

    // global average pooling
    const int ch = cfg.widths.back();
    const std::size_t plane = static_cast<std::size_t>(res) * res;
    c.gap.assign(ch, 0.0);
    for (int k = 0; k < ch; ++k) {
        const double* p = x->data.data() + k * plane;
        double sum = 0.0;
        for (std::size_t i = 0; i < plane; ++i) sum += p[i];
        c.gap[k] = sum / static_cast<double>(plane);
    }

    // fully connected head
    const Tensor& fw = params.tensors[layout.fc_w].value;
    const Tensor& fb = params.tensors[layout.fc_b].value;
    for (int k = 0; k < kNumClasses; ++k) {
        double acc = fb.data[k];
        for (int j = 0; j < ch; ++j) acc += fw.data[k * ch + j] * c.gap[j];
        c.logits[k] = acc;
    }
    return softmax(c.logits);
}

// Backpropagate d(loss)/d(logits) through the cached forward pass,
// accumulating into grads (same layout as params).
inline void backward_sample(const Params& params, const ModelConfig& cfg,
                            const detail::NetLayout& layout,
                            const detail::ForwardCache& c,
                            const std::array<double, kNumClasses>& dlogits,
                            Params& grads) {
    using namespace detail;
    const int ch = cfg.widths.back();
    const Tensor& fw = params.tensors[layout.fc_w].value;
    Tensor& dfw = grads.tensors[layout.fc_w].value;
    Tensor& dfb = grads.tensors[layout.fc_b].value;

    std::vector<double> dgap(ch, 0.0);
    for (int k = 0; k < kNumClasses; ++k) {
        dfb.data[k] += dlogits[k];
        for (int j = 0; j < ch; ++j) {
            dfw.data[k * ch + j] += dlogits[k] * c.gap[j];
            dgap[j] += dlogits[k] * fw.data[k * ch + j];
        }
    }

    // last activation map resolution
    const StageCache& last_stage = c.stages.back();
    const Tensor& last_map = last_stage.blocks.empty()
                                 ? (c.stages.size() > 1 ? last_stage.down_out : c.stem_out)
                                 : last_stage.blocks.back().out;
    const int res_last = last_map.shape[1];
    const std::size_t plane = static_cast<std::size_t>(res_last) * res_last;

    Tensor dx({ch, res_last, res_last});
    for (int k = 0; k < ch; ++k) {
        const double g = dgap[k] / static_cast<double>(plane);
        double* p = dx.data.data() + k * plane;
        for (std::size_t i = 0; i < plane; ++i) p[i] = g;
    }

    for (std::size_t s = c.stages.size(); s-- > 0;) {
        const StageCache& sc = c.stages[s];
        for (std::size_t k = sc.blocks.size(); k-- > 0;) {
            const auto& bi = layout.stages[s].blocks[k];
            const BlockCache& bc = sc.blocks[k];
            Tensor dsum = relu_backward(dx, bc.sum_pre);
            // conv2 branch
            Tensor dc1_out(bc.c1_out.shape);
            conv3x3_backward(bc.c1_out, params.tensors[bi.c2w].value, 1, dsum,
                             dc1_out, grads.tensors[bi.c2w].value,
                             grads.tensors[bi.c2b].value);
            Tensor dc1_pre = relu_backward(dc1_out, bc.c1_pre);
            Tensor din(bc.in.shape);
            conv3x3_backward(bc.in, params.tensors[bi.c1w].value, 1, dc1_pre,
                             din, grads.tensors[bi.c1w].value,
                             grads.tensors[bi.c1b].value);
            // shortcut adds dsum directly
            for (std::size_t i = 0; i < din.data.size(); ++i)
                din.data[i] += dsum.data[i];
            dx = std::move(din);
        }
        if (s > 0) {
            const auto& li = layout.stages[s];
            Tensor dpre = relu_backward(dx, sc.down_pre);
            const Tensor& stage_in = s >= 2 ? (c.stages[s - 1].blocks.empty()
                                                   ? c.stages[s - 1].down_out
                                                   : c.stages[s - 1].blocks.back().out)
                                            : (c.stages[0].blocks.empty()
                                                   ? c.stem_out
                                                   : c.stages[0].blocks.back().out);
            Tensor din(stage_in.shape);
            conv3x3_backward(stage_in, params.tensors[li.down_w].value, 2, dpre,
                             din, grads.tensors[li.down_w].value,
                             grads.tensors[li.down_b].value);
            dx = std::move(din);
        }
    }

    // stem
    Tensor dstem_pre = relu_backward(dx, c.stem_pre);
    Tensor dinput(c.input.shape); // discarded, but conv backward needs a sink
    conv3x3_backward(c.input, params.tensors[layout.stem_w].value, 1, dstem_pre,
                     dinput, grads.tensors[layout.stem_w].value,
                     grads.tensors[layout.stem_b].value);
}

// Mean negative log-probability of the true class, probability floored at
// 1e-12 so a confident wrong prediction cannot produce -inf.
inline constexpr double kProbFloor = 1e-12;

inline double cross_entropy(const std::vector<std::array<double, kNumClasses>>& probs,
                            const std::vector<ClassLabel>& labels) {
    if (probs.size() != labels.size())
        throw ShapeMismatchError("cross_entropy: " + std::to_string(probs.size()) +
                                 " predictions vs " + std::to_string(labels.size()) +
                                 " labels");
    if (probs.empty()) throw Error("cross_entropy: empty input");
    double total = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        double p = probs[i][static_cast<int>(labels[i])];
        total += -std::log(std::max(p, kProbFloor));
    }
    return total / static_cast<double>(probs.size());
}

// Argmax with ties broken by the lowest class code.
inline ClassLabel argmax_label(const std::array<double, kNumClasses>& probs) {
    int best = 0;
    for (int k = 1; k < kNumClasses; ++k)
        if (probs[k] > probs[best]) best = k;
    return static_cast<ClassLabel>(best);
}

// Forward-only mean loss of a batch; used by the finite-difference oracle.
inline double batch_loss(const Params& params, const ModelConfig& cfg,
                         const std::vector<Tensor>& inputs,
                         const std::vector<ClassLabel>& labels) {
    auto layout = detail::make_layout(cfg);
    std::vector<std::array<double, kNumClasses>> probs;
    probs.reserve(inputs.size());
    for (const auto& in : inputs)
        probs.push_back(forward_sample(params, cfg, layout, in, nullptr));
    return cross_entropy(probs, labels);
}

// Mean loss and its gradients over a batch. The analytic gradient uses the
// softmax cross-entropy identity d(loss)/d(logit) = (p - onehot) / n; the
// probability floor is ignored here (it only binds below 1e-12).
inline double batch_loss_and_grads(const Params& params, const ModelConfig& cfg,
                                   const std::vector<Tensor>& inputs,
                                   const std::vector<ClassLabel>& labels,
                                   Params& grads,
                                   int* correct_out = nullptr) {
    if (inputs.size() != labels.size())
        throw ShapeMismatchError("batch_loss_and_grads: input/label size mismatch");
    if (inputs.empty()) throw Error("batch_loss_and_grads: empty batch");
    auto layout = detail::make_layout(cfg);
    const double inv_n = 1.0 / static_cast<double>(inputs.size());
    double total = 0.0;
    int correct = 0;
    detail::ForwardCache cache;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        auto probs = forward_sample(params, cfg, layout, inputs[i], &cache);
        const int truth = static_cast<int>(labels[i]);
        total += -std::log(std::max(probs[truth], kProbFloor));
        if (argmax_label(probs) == labels[i]) ++correct;
        std::array<double, kNumClasses> dlogits{};
        for (int k = 0; k < kNumClasses; ++k)
            dlogits[k] = (probs[k] - (k == truth ? 1.0 : 0.0)) * inv_n;
        backward_sample(params, cfg, layout, cache, dlogits, grads);
    }
    if (correct_out) *correct_out = correct;
    return total * inv_n;
}

} // namespace histotile
