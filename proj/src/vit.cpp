#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "solarscan/errors.hpp"
#include "solarscan/vit.hpp"

namespace solarscan {

namespace {

constexpr double kLayerNormEps = 1e-5;
constexpr double kInitStddev = 0.02;

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

double gelu_grad(double x) {
    return 0.5 * (1.0 + std::erf(x / std::sqrt(2.0))) +
           x * std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
}

// y = W x + b applied row-wise to an (R x in) activation.
void linear_forward(const Tensor& x, const LinearParam& p, Tensor& y, std::size_t rows,
                    std::size_t in, std::size_t out) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = x.data.data() + r * in;
        double* yr = y.data.data() + r * out;
        for (std::size_t o = 0; o < out; ++o) {
            double acc = p.bias[o];
            const double* w = p.weight.data.data() + o * in;
            for (std::size_t i = 0; i < in; ++i) {
                acc += w[i] * xr[i];
            }
            yr[o] = acc;
        }
    }
}

void linear_backward(const Tensor& dy, const Tensor& x, const LinearParam& p, Tensor& dx,
                     Tensor& dw, Tensor& db, std::size_t rows, std::size_t in,
                     std::size_t out) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double* dyr = dy.data.data() + r * out;
        const double* xr = x.data.data() + r * in;
        double* dxr = dx.data.data() + r * in;
        for (std::size_t o = 0; o < out; ++o) {
            const double g = dyr[o];
            if (g == 0.0) continue;
            db[o] += g;
            double* dwr = dw.data.data() + o * in;
            const double* w = p.weight.data.data() + o * in;
            for (std::size_t i = 0; i < in; ++i) {
                dwr[i] += g * xr[i];
                dxr[i] += g * w[i];
            }
        }
    }
}

// Per-row layernorm over the last dimension.
void layernorm_forward(const Tensor& x, const LayerNormParam& p, Tensor& y, Tensor& xhat,
                       Tensor& istd, std::size_t rows, std::size_t dim) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = x.data.data() + r * dim;
        double mean = 0.0;
        for (std::size_t d = 0; d < dim; ++d) mean += xr[d];
        mean /= static_cast<double>(dim);
        double var = 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
            const double c = xr[d] - mean;
            var += c * c;
        }
        var /= static_cast<double>(dim);
        const double is = 1.0 / std::sqrt(var + kLayerNormEps);
        istd[r] = is;
        double* xhr = xhat.data.data() + r * dim;
        double* yr = y.data.data() + r * dim;
        for (std::size_t d = 0; d < dim; ++d) {
            xhr[d] = (xr[d] - mean) * is;
            yr[d] = p.gamma[d] * xhr[d] + p.beta[d];
        }
    }
}

void layernorm_backward(const Tensor& dy, const Tensor& xhat, const Tensor& istd,
                        const LayerNormParam& p, Tensor& dx, Tensor& dgamma, Tensor& dbeta,
                        std::size_t rows, std::size_t dim) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double* dyr = dy.data.data() + r * dim;
        const double* xhr = xhat.data.data() + r * dim;
        double sum_dxhat = 0.0;
        double sum_dxhat_xhat = 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
            const double dxh = dyr[d] * p.gamma[d];
            sum_dxhat += dxh;
            sum_dxhat_xhat += dxh * xhr[d];
            dgamma[d] += dyr[d] * xhr[d];
            dbeta[d] += dyr[d];
        }
        const double inv_dim = 1.0 / static_cast<double>(dim);
        double* dxr = dx.data.data() + r * dim;
        for (std::size_t d = 0; d < dim; ++d) {
            const double dxh = dyr[d] * p.gamma[d];
            dxr[d] += istd[r] * (dxh - inv_dim * sum_dxhat - xhr[d] * inv_dim * sum_dxhat_xhat);
        }
    }
}

// Inverted dropout mask: entries are 0 or 1/(1-p).
Tensor draw_dropout_mask(std::size_t n, double p, Rng& rng) {
    Tensor mask({n});
    const double keep_scale = 1.0 / (1.0 - p);
    for (std::size_t i = 0; i < n; ++i) {
        mask[i] = rng.bernoulli(p) ? 0.0 : keep_scale;
    }
    return mask;
}

void apply_mask(Tensor& x, const Tensor& mask) {
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] *= mask[i];
    }
}

Tensor masked(const Tensor& x, const Tensor& mask) {
    Tensor y = x;
    if (!mask.empty()) apply_mask(y, mask);
    return y;
}

void fill_truncated_normal(Tensor& t, Rng& rng) {
    for (double& v : t.data) {
        v = rng.truncated_normal(kInitStddev);
    }
}

LinearParam init_linear(std::size_t out, std::size_t in, Rng& rng) {
    LinearParam p;
    p.weight = Tensor({out, in});
    p.bias = Tensor({out});
    fill_truncated_normal(p.weight, rng);
    return p;
}

LayerNormParam init_layernorm(std::size_t dim) {
    LayerNormParam p;
    p.gamma = Tensor({dim});
    p.beta = Tensor({dim});
    std::fill(p.gamma.data.begin(), p.gamma.data.end(), 1.0);
    return p;
}

std::string layer_prefix(std::size_t i) { return "layers." + std::to_string(i) + "."; }

}  // namespace

const std::vector<std::string>& defect_class_names() {
    static const std::vector<std::string> names = {
        "PhysicalDamage", "BirdDropping", "Clean",      "ElectricalFault", "SnowCover",
        "Soiling",        "CellDamage",   "Breakage",   "Dust"};
    return names;
}

const std::string& defect_class_name(DefectClass c) {
    return defect_class_names()[static_cast<int>(c)];
}

int defect_class_code(const std::string& name) {
    const auto& names = defect_class_names();
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == name) return static_cast<int>(i);
    }
    return -1;
}

void ViTConfig::validate() const {
    if (image_size < 1 || patch_size < 1 || image_size % patch_size != 0) {
        throw ArgumentError("image_size must be a positive multiple of patch_size");
    }
    if (hidden_dim < 1 || num_heads < 1 || hidden_dim % num_heads != 0) {
        throw ArgumentError("hidden_dim must be a positive multiple of num_heads");
    }
    if (num_layers < 1 || mlp_dim < 1) {
        throw ArgumentError("num_layers and mlp_dim must be positive");
    }
    if (num_classes < 2) {
        throw ArgumentError("num_classes must be >= 2");
    }
    if (dropout_hidden < 0.0 || dropout_hidden >= 1.0 || dropout_attention < 0.0 ||
        dropout_attention >= 1.0) {
        throw ArgumentError("dropout probabilities must be in [0,1)");
    }
}

void OptimizerConfig::validate() const {
    if (learning_rate <= 0.0) throw ArgumentError("learning_rate must be positive");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
        throw ArgumentError("beta coefficients must be in [0,1)");
    }
    if (epsilon <= 0.0) throw ArgumentError("epsilon must be positive");
    if (weight_decay < 0.0) throw ArgumentError("weight_decay must be >= 0");
}

void ViTModel::visit(const std::function<void(const std::string&, Tensor&)>& fn) {
    fn("patch_embed.weight", patch_embed.weight);
    fn("patch_embed.bias", patch_embed.bias);
    fn("cls_token", cls_token);
    fn("pos_embed", pos_embed);
    for (std::size_t i = 0; i < layers.size(); ++i) {
        EncoderLayerParam& l = layers[i];
        const std::string p = layer_prefix(i);
        fn(p + "ln1.gamma", l.ln1.gamma);
        fn(p + "ln1.beta", l.ln1.beta);
        fn(p + "attn.q.weight", l.q.weight);
        fn(p + "attn.q.bias", l.q.bias);
        fn(p + "attn.k.weight", l.k.weight);
        fn(p + "attn.k.bias", l.k.bias);
        fn(p + "attn.v.weight", l.v.weight);
        fn(p + "attn.v.bias", l.v.bias);
        fn(p + "attn.out.weight", l.out.weight);
        fn(p + "attn.out.bias", l.out.bias);
        fn(p + "ln2.gamma", l.ln2.gamma);
        fn(p + "ln2.beta", l.ln2.beta);
        fn(p + "mlp.fc1.weight", l.fc1.weight);
        fn(p + "mlp.fc1.bias", l.fc1.bias);
        fn(p + "mlp.fc2.weight", l.fc2.weight);
        fn(p + "mlp.fc2.bias", l.fc2.bias);
    }
    fn("final_ln.gamma", final_ln.gamma);
    fn("final_ln.beta", final_ln.beta);
    fn("head.weight", head.weight);
    fn("head.bias", head.bias);
}

void ViTModel::visit(const std::function<void(const std::string&, const Tensor&)>& fn) const {
    const_cast<ViTModel*>(this)->visit(
        [&fn](const std::string& name, Tensor& t) { fn(name, t); });
}

ViTModel init_model(const ViTConfig& cfg, Rng& rng) {
    cfg.validate();
    const std::size_t D = cfg.hidden_dim;
    const std::size_t T = cfg.seq_len();
    ViTModel m;
    m.cfg = cfg;
    m.patch_embed = init_linear(D, cfg.patch_dim(), rng);
    m.cls_token = Tensor({D});
    fill_truncated_normal(m.cls_token, rng);
    m.pos_embed = Tensor({T, D});
    fill_truncated_normal(m.pos_embed, rng);
    m.layers.resize(cfg.num_layers);
    for (auto& l : m.layers) {
        l.ln1 = init_layernorm(D);
        l.q = init_linear(D, D, rng);
        l.k = init_linear(D, D, rng);
        l.v = init_linear(D, D, rng);
        l.out = init_linear(D, D, rng);
        l.ln2 = init_layernorm(D);
        l.fc1 = init_linear(cfg.mlp_dim, D, rng);
        l.fc2 = init_linear(D, cfg.mlp_dim, rng);
    }
    m.final_ln = init_layernorm(D);
    m.head = init_linear(cfg.num_classes, D, rng);
    return m;
}

ForwardResult forward(const ViTModel& model, const Tensor& batch, bool training, Rng& rng) {
    const ViTConfig& cfg = model.cfg;
    const std::size_t S = cfg.image_size;
    if (batch.shape.size() != 4 || batch.shape[1] != 3 || batch.shape[2] != S ||
        batch.shape[3] != S) {
        throw ArgumentError("forward expects a B x 3 x image_size x image_size batch");
    }
    const std::size_t B = batch.shape[0];
    const std::size_t P = cfg.patch_dim();
    const std::size_t N = cfg.num_patches();
    const std::size_t T = cfg.seq_len();
    const std::size_t D = cfg.hidden_dim;
    const std::size_t H = cfg.num_heads;
    const std::size_t dh = cfg.head_dim();
    const std::size_t M = cfg.mlp_dim;
    const std::size_t ps = cfg.patch_size;
    const std::size_t per_side = S / ps;
    const double attn_scale = 1.0 / std::sqrt(static_cast<double>(dh));
    const bool drop_hidden = training && cfg.dropout_hidden > 0.0;
    const bool drop_attn = training && cfg.dropout_attention > 0.0;

    ForwardCache cache;
    cache.training = training;
    cache.batch = B;

    // Patch extraction: per patch, channel-major then row then column.
    cache.patches = Tensor({B, N, P});
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t py = 0; py < per_side; ++py) {
            for (std::size_t px = 0; px < per_side; ++px) {
                const std::size_t n = py * per_side + px;
                double* dst = cache.patches.data.data() + (b * N + n) * P;
                for (std::size_t c = 0; c < 3; ++c) {
                    for (std::size_t iy = 0; iy < ps; ++iy) {
                        for (std::size_t ix = 0; ix < ps; ++ix) {
                            dst[(c * ps + iy) * ps + ix] =
                                batch.data[((b * 3 + c) * S + py * ps + iy) * S + px * ps + ix];
                        }
                    }
                }
            }
        }
    }

    // Embedding: projected patches behind a class token, plus position.
    Tensor x({B, T, D});
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t d = 0; d < D; ++d) {
            x.data[(b * T) * D + d] = model.cls_token[d] + model.pos_embed[d];
        }
        for (std::size_t n = 0; n < N; ++n) {
            const double* patch = cache.patches.data.data() + (b * N + n) * P;
            double* row = x.data.data() + (b * T + 1 + n) * D;
            for (std::size_t d = 0; d < D; ++d) {
                double acc = model.patch_embed.bias[d];
                const double* w = model.patch_embed.weight.data.data() + d * P;
                for (std::size_t i = 0; i < P; ++i) {
                    acc += w[i] * patch[i];
                }
                row[d] = acc + model.pos_embed[(1 + n) * D + d];
            }
        }
    }
    if (drop_hidden) {
        cache.embed_mask = draw_dropout_mask(B * T * D, cfg.dropout_hidden, rng);
        apply_mask(x, cache.embed_mask);
    }

    cache.layers.resize(model.layers.size());
    const std::size_t rows = B * T;
    for (std::size_t li = 0; li < model.layers.size(); ++li) {
        const EncoderLayerParam& lp = model.layers[li];
        LayerCache& lc = cache.layers[li];
        lc.x_in = x;

        Tensor y1({B, T, D});
        lc.ln1_xhat = Tensor({B, T, D});
        lc.ln1_istd = Tensor({B, T});
        layernorm_forward(x, lp.ln1, y1, lc.ln1_xhat, lc.ln1_istd, rows, D);

        lc.q = Tensor({B, T, D});
        lc.k = Tensor({B, T, D});
        lc.v = Tensor({B, T, D});
        linear_forward(y1, lp.q, lc.q, rows, D, D);
        linear_forward(y1, lp.k, lc.k, rows, D, D);
        linear_forward(y1, lp.v, lc.v, rows, D, D);

        lc.attn = Tensor({B, H, T, T});
        if (drop_attn) {
            lc.attn_mask = draw_dropout_mask(B * H * T * T, cfg.dropout_attention, rng);
        }
        lc.context = Tensor({B, T, D});
        for (std::size_t b = 0; b < B; ++b) {
            for (std::size_t h = 0; h < H; ++h) {
                const std::size_t off = h * dh;
                double* attn_bh = lc.attn.data.data() + ((b * H + h) * T) * T;
                for (std::size_t t = 0; t < T; ++t) {
                    const double* qt = lc.q.data.data() + (b * T + t) * D + off;
                    double* arow = attn_bh + t * T;
                    double mx = -std::numeric_limits<double>::infinity();
                    for (std::size_t u = 0; u < T; ++u) {
                        const double* ku = lc.k.data.data() + (b * T + u) * D + off;
                        double dot = 0.0;
                        for (std::size_t j = 0; j < dh; ++j) dot += qt[j] * ku[j];
                        arow[u] = dot * attn_scale;
                        mx = std::max(mx, arow[u]);
                    }
                    double denom = 0.0;
                    for (std::size_t u = 0; u < T; ++u) {
                        arow[u] = std::exp(arow[u] - mx);
                        denom += arow[u];
                    }
                    for (std::size_t u = 0; u < T; ++u) arow[u] /= denom;

                    double* ct = lc.context.data.data() + (b * T + t) * D + off;
                    const double* mask =
                        lc.attn_mask.empty()
                            ? nullptr
                            : lc.attn_mask.data.data() + ((b * H + h) * T + t) * T;
                    for (std::size_t j = 0; j < dh; ++j) ct[j] = 0.0;
                    for (std::size_t u = 0; u < T; ++u) {
                        const double w = mask ? arow[u] * mask[u] : arow[u];
                        if (w == 0.0) continue;
                        const double* vu = lc.v.data.data() + (b * T + u) * D + off;
                        for (std::size_t j = 0; j < dh; ++j) ct[j] += w * vu[j];
                    }
                }
            }
        }

        Tensor attn_out({B, T, D});
        linear_forward(lc.context, lp.out, attn_out, rows, D, D);
        if (drop_hidden) {
            lc.attn_out_mask = draw_dropout_mask(B * T * D, cfg.dropout_hidden, rng);
            apply_mask(attn_out, lc.attn_out_mask);
        }
        lc.h = Tensor({B, T, D});
        for (std::size_t i = 0; i < rows * D; ++i) {
            lc.h.data[i] = x.data[i] + attn_out.data[i];
        }

        Tensor y2({B, T, D});
        lc.ln2_xhat = Tensor({B, T, D});
        lc.ln2_istd = Tensor({B, T});
        layernorm_forward(lc.h, lp.ln2, y2, lc.ln2_xhat, lc.ln2_istd, rows, D);

        lc.fc1_out = Tensor({B, T, M});
        linear_forward(y2, lp.fc1, lc.fc1_out, rows, D, M);
        lc.act = Tensor({B, T, M});
        for (std::size_t i = 0; i < rows * M; ++i) {
            lc.act.data[i] = gelu(lc.fc1_out.data[i]);
        }
        Tensor act_dropped = lc.act;
        if (drop_hidden) {
            lc.act_mask = draw_dropout_mask(B * T * M, cfg.dropout_hidden, rng);
            apply_mask(act_dropped, lc.act_mask);
        }
        Tensor mlp_out({B, T, D});
        linear_forward(act_dropped, lp.fc2, mlp_out, rows, M, D);
        if (drop_hidden) {
            lc.mlp_out_mask = draw_dropout_mask(B * T * D, cfg.dropout_hidden, rng);
            apply_mask(mlp_out, lc.mlp_out_mask);
        }
        for (std::size_t i = 0; i < rows * D; ++i) {
            x.data[i] = lc.h.data[i] + mlp_out.data[i];
        }
    }

    cache.final_in = x;
    Tensor yf({B, T, D});
    cache.fin_xhat = Tensor({B, T, D});
    cache.fin_istd = Tensor({B, T});
    layernorm_forward(x, model.final_ln, yf, cache.fin_xhat, cache.fin_istd, rows, D);

    cache.cls_repr = Tensor({B, D});
    for (std::size_t b = 0; b < B; ++b) {
        std::copy_n(yf.data.data() + (b * T) * D, D, cache.cls_repr.data.data() + b * D);
    }

    ForwardResult res;
    res.logits = Tensor({B, static_cast<std::size_t>(cfg.num_classes)});
    linear_forward(cache.cls_repr, model.head, res.logits, B, D, cfg.num_classes);
    res.cache = std::move(cache);
    return res;
}

Tensor softmax(const Tensor& logits) {
    if (logits.shape.size() != 2) {
        throw ArgumentError("softmax expects a 2-D tensor");
    }
    const std::size_t B = logits.shape[0];
    const std::size_t C = logits.shape[1];
    Tensor out = logits;
    for (std::size_t b = 0; b < B; ++b) {
        double* row = out.data.data() + b * C;
        const double mx = *std::max_element(row, row + C);
        double denom = 0.0;
        for (std::size_t c = 0; c < C; ++c) {
            row[c] = std::exp(row[c] - mx);
            denom += row[c];
        }
        for (std::size_t c = 0; c < C; ++c) row[c] /= denom;
    }
    return out;
}

LossResult cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
    const std::size_t B = logits.shape[0];
    const std::size_t C = logits.shape[1];
    if (labels.size() != B) {
        throw ArgumentError("label count must match batch size");
    }
    for (int l : labels) {
        if (l < 0 || static_cast<std::size_t>(l) >= C) {
            throw ArgumentError("label out of range");
        }
    }
    Tensor probs = softmax(logits);
    LossResult res;
    res.loss = 0.0;
    res.dlogits = probs;
    for (std::size_t b = 0; b < B; ++b) {
        const double p = probs.data[b * C + labels[b]];
        res.loss -= std::log(std::max(p, 1e-300));
    }
    res.loss /= static_cast<double>(B);
    const double inv_b = 1.0 / static_cast<double>(B);
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t c = 0; c < C; ++c) {
            double& g = res.dlogits.data[b * C + c];
            g = (g - (static_cast<std::size_t>(labels[b]) == c ? 1.0 : 0.0)) * inv_b;
        }
    }
    return res;
}

GradMap backward(const ViTModel& model, const ForwardCache& cache, const Tensor& dlogits,
                 TrainableSelector selector) {
    const ViTConfig& cfg = model.cfg;
    if (!cache.training) {
        throw ContractError("backward requires a cache from forward(training=true)");
    }
    if (dlogits.shape.size() != 2 || dlogits.shape[0] != cache.batch ||
        dlogits.shape[1] != static_cast<std::size_t>(cfg.num_classes)) {
        throw ContractError("dlogits shape does not match the cached forward pass");
    }
    if (cache.layers.size() != model.layers.size()) {
        throw ContractError("cache does not match the model's layer count");
    }
    const std::size_t B = cache.batch;
    const std::size_t T = cfg.seq_len();
    const std::size_t D = cfg.hidden_dim;
    const std::size_t H = cfg.num_heads;
    const std::size_t dh = cfg.head_dim();
    const std::size_t M = cfg.mlp_dim;
    const std::size_t N = cfg.num_patches();
    const std::size_t P = cfg.patch_dim();
    const std::size_t C = cfg.num_classes;
    const std::size_t rows = B * T;
    const double attn_scale = 1.0 / std::sqrt(static_cast<double>(dh));

    GradMap grads;
    grads["head.weight"] = Tensor({C, D});
    grads["head.bias"] = Tensor({C});
    Tensor dcls_repr({B, D});
    linear_backward(dlogits, cache.cls_repr, model.head, dcls_repr, grads["head.weight"],
                    grads["head.bias"], B, D, C);
    if (selector == TrainableSelector::HeadOnly) {
        return grads;
    }

    grads["final_ln.gamma"] = Tensor({D});
    grads["final_ln.beta"] = Tensor({D});
    Tensor dyf({B, T, D});
    for (std::size_t b = 0; b < B; ++b) {
        std::copy_n(dcls_repr.data.data() + b * D, D, dyf.data.data() + (b * T) * D);
    }
    Tensor dx({B, T, D});
    layernorm_backward(dyf, cache.fin_xhat, cache.fin_istd, model.final_ln, dx,
                       grads["final_ln.gamma"], grads["final_ln.beta"], rows, D);

    for (std::size_t li = model.layers.size(); li-- > 0;) {
        const EncoderLayerParam& lp = model.layers[li];
        const LayerCache& lc = cache.layers[li];
        const std::string pre = layer_prefix(li);

        // MLP half: x_out = h + drop(fc2(drop(gelu(fc1(ln2(h))))))
        Tensor dmlp_out = masked(dx, lc.mlp_out_mask);
        Tensor act_dropped = masked(lc.act, lc.act_mask);
        grads[pre + "mlp.fc2.weight"] = Tensor({D, M});
        grads[pre + "mlp.fc2.bias"] = Tensor({D});
        Tensor dact_dropped({B, T, M});
        linear_backward(dmlp_out, act_dropped, lp.fc2, dact_dropped,
                        grads[pre + "mlp.fc2.weight"], grads[pre + "mlp.fc2.bias"], rows, M, D);
        Tensor dfc1_out = masked(dact_dropped, lc.act_mask);
        for (std::size_t i = 0; i < rows * M; ++i) {
            dfc1_out.data[i] *= gelu_grad(lc.fc1_out.data[i]);
        }
        Tensor y2({B, T, D});
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t d = 0; d < D; ++d) {
                y2.data[r * D + d] =
                    lp.ln2.gamma[d] * lc.ln2_xhat.data[r * D + d] + lp.ln2.beta[d];
            }
        }
        grads[pre + "mlp.fc1.weight"] = Tensor({M, D});
        grads[pre + "mlp.fc1.bias"] = Tensor({M});
        Tensor dy2({B, T, D});
        linear_backward(dfc1_out, y2, lp.fc1, dy2, grads[pre + "mlp.fc1.weight"],
                        grads[pre + "mlp.fc1.bias"], rows, D, M);
        grads[pre + "ln2.gamma"] = Tensor({D});
        grads[pre + "ln2.beta"] = Tensor({D});
        Tensor dh_total = dx;  // residual path
        layernorm_backward(dy2, lc.ln2_xhat, lc.ln2_istd, lp.ln2, dh_total,
                           grads[pre + "ln2.gamma"], grads[pre + "ln2.beta"], rows, D);

        // Attention half: h = x_in + drop(out(context))
        Tensor dattn_out = masked(dh_total, lc.attn_out_mask);
        grads[pre + "attn.out.weight"] = Tensor({D, D});
        grads[pre + "attn.out.bias"] = Tensor({D});
        Tensor dcontext({B, T, D});
        linear_backward(dattn_out, lc.context, lp.out, dcontext,
                        grads[pre + "attn.out.weight"], grads[pre + "attn.out.bias"], rows, D,
                        D);

        Tensor dq({B, T, D});
        Tensor dk({B, T, D});
        Tensor dv({B, T, D});
        std::vector<double> da_drop(T), da(T), dz(T);
        for (std::size_t b = 0; b < B; ++b) {
            for (std::size_t h = 0; h < H; ++h) {
                const std::size_t off = h * dh;
                for (std::size_t t = 0; t < T; ++t) {
                    const double* dct = dcontext.data.data() + (b * T + t) * D + off;
                    const double* arow = lc.attn.data.data() + ((b * H + h) * T + t) * T;
                    const double* mask =
                        lc.attn_mask.empty()
                            ? nullptr
                            : lc.attn_mask.data.data() + ((b * H + h) * T + t) * T;
                    // dV and d(dropped attention row)
                    for (std::size_t u = 0; u < T; ++u) {
                        const double* vu = lc.v.data.data() + (b * T + u) * D + off;
                        double acc = 0.0;
                        for (std::size_t j = 0; j < dh; ++j) acc += dct[j] * vu[j];
                        da_drop[u] = acc;
                        const double w = mask ? arow[u] * mask[u] : arow[u];
                        if (w != 0.0) {
                            double* dvu = dv.data.data() + (b * T + u) * D + off;
                            for (std::size_t j = 0; j < dh; ++j) dvu[j] += w * dct[j];
                        }
                    }
                    double dot = 0.0;
                    for (std::size_t u = 0; u < T; ++u) {
                        da[u] = mask ? da_drop[u] * mask[u] : da_drop[u];
                        dot += da[u] * arow[u];
                    }
                    for (std::size_t u = 0; u < T; ++u) {
                        dz[u] = arow[u] * (da[u] - dot);
                    }
                    double* dqt = dq.data.data() + (b * T + t) * D + off;
                    for (std::size_t u = 0; u < T; ++u) {
                        if (dz[u] == 0.0) continue;
                        const double g = dz[u] * attn_scale;
                        const double* ku = lc.k.data.data() + (b * T + u) * D + off;
                        const double* qt = lc.q.data.data() + (b * T + t) * D + off;
                        double* dku = dk.data.data() + (b * T + u) * D + off;
                        for (std::size_t j = 0; j < dh; ++j) {
                            dqt[j] += g * ku[j];
                            dku[j] += g * qt[j];
                        }
                    }
                }
            }
        }

        Tensor y1({B, T, D});
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t d = 0; d < D; ++d) {
                y1.data[r * D + d] =
                    lp.ln1.gamma[d] * lc.ln1_xhat.data[r * D + d] + lp.ln1.beta[d];
            }
        }
        grads[pre + "attn.q.weight"] = Tensor({D, D});
        grads[pre + "attn.q.bias"] = Tensor({D});
        grads[pre + "attn.k.weight"] = Tensor({D, D});
        grads[pre + "attn.k.bias"] = Tensor({D});
        grads[pre + "attn.v.weight"] = Tensor({D, D});
        grads[pre + "attn.v.bias"] = Tensor({D});
        Tensor dy1({B, T, D});
        linear_backward(dq, y1, lp.q, dy1, grads[pre + "attn.q.weight"],
                        grads[pre + "attn.q.bias"], rows, D, D);
        linear_backward(dk, y1, lp.k, dy1, grads[pre + "attn.k.weight"],
                        grads[pre + "attn.k.bias"], rows, D, D);
        linear_backward(dv, y1, lp.v, dy1, grads[pre + "attn.v.weight"],
                        grads[pre + "attn.v.bias"], rows, D, D);
        grads[pre + "ln1.gamma"] = Tensor({D});
        grads[pre + "ln1.beta"] = Tensor({D});
        Tensor dx_in = dh_total;  // residual path
        layernorm_backward(dy1, lc.ln1_xhat, lc.ln1_istd, lp.ln1, dx_in,
                           grads[pre + "ln1.gamma"], grads[pre + "ln1.beta"], rows, D);
        dx = std::move(dx_in);
    }

    // Embedding gradients.
    Tensor dx0 = masked(dx, cache.embed_mask);
    grads["cls_token"] = Tensor({D});
    grads["pos_embed"] = Tensor({T, D});
    grads["patch_embed.weight"] = Tensor({D, P});
    grads["patch_embed.bias"] = Tensor({D});
    Tensor& dcls = grads["cls_token"];
    Tensor& dpos = grads["pos_embed"];
    Tensor& dpw = grads["patch_embed.weight"];
    Tensor& dpb = grads["patch_embed.bias"];
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t t = 0; t < T; ++t) {
            const double* g = dx0.data.data() + (b * T + t) * D;
            for (std::size_t d = 0; d < D; ++d) {
                dpos[t * D + d] += g[d];
            }
            if (t == 0) {
                for (std::size_t d = 0; d < D; ++d) dcls[d] += g[d];
            } else {
                const std::size_t n = t - 1;
                const double* patch = cache.patches.data.data() + (b * N + n) * P;
                for (std::size_t d = 0; d < D; ++d) {
                    if (g[d] == 0.0) continue;
                    dpb[d] += g[d];
                    double* w = dpw.data.data() + d * P;
                    for (std::size_t i = 0; i < P; ++i) {
                        w[i] += g[d] * patch[i];
                    }
                }
            }
        }
    }
    return grads;
}

void adamw_update(Tensor& param, const Tensor& grad, Tensor& m, Tensor& v, std::int64_t t,
                  const OptimizerConfig& opt, bool apply_decay) {
    const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < param.size(); ++i) {
        const double g = grad[i];
        m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * g;
        v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * g * g;
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        double step = mhat / (std::sqrt(vhat) + opt.epsilon);
        if (apply_decay) {
            step += opt.weight_decay * param[i];
        }
        param[i] -= opt.learning_rate * step;
    }
}

void adamw_step(ViTModel& model, const GradMap& grads, AdamWState& state,
                const OptimizerConfig& opt) {
    opt.validate();
    state.t += 1;
    model.visit([&](const std::string& name, Tensor& param) {
        auto it = grads.find(name);
        if (it == grads.end()) return;
        if (it->second.size() != param.size()) {
            throw ContractError("gradient shape mismatch for " + name);
        }
        auto& m = state.m[name];
        auto& v = state.v[name];
        if (m.size() != param.size()) m = Tensor(param.shape);
        if (v.size() != param.size()) v = Tensor(param.shape);
        const bool decay = name.size() > 7 && name.ends_with(".weight");
        adamw_update(param, it->second, m, v, state.t, opt, decay);
    });
}

std::vector<EpochLogEntry> train(ViTModel& model, const std::vector<LabeledImage>& dataset,
                                 const OptimizerConfig& opt, const TrainConfig& tc, Rng& rng) {
    if (dataset.empty()) {
        throw ArgumentError("training dataset is empty");
    }
    if (tc.batch_size < 1) {
        throw ArgumentError("batch_size must be positive");
    }
    opt.validate();
    for (const auto& item : dataset) {
        if (item.label < 0 || item.label >= model.cfg.num_classes) {
            throw ArgumentError("dataset label out of range");
        }
    }
    const std::size_t S = model.cfg.image_size;
    AdamWState state;
    std::vector<EpochLogEntry> log;
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < tc.epochs; ++epoch) {
        rng.shuffle(order);
        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t start = 0; start < order.size(); start += tc.batch_size) {
            const std::size_t bsz = std::min<std::size_t>(tc.batch_size, order.size() - start);
            Tensor batch({bsz, 3, S, S});
            std::vector<int> labels(bsz);
            for (std::size_t i = 0; i < bsz; ++i) {
                const LabeledImage& item = dataset[order[start + i]];
                RgbImage view = tc.augment_enabled
                                    ? augment(item.image, tc.augmentation, rng)
                                    : resize_bilinear(item.image, S, S);
                Tensor t = normalize(view, tc.norm_mean, tc.norm_std);
                std::copy(t.data.begin(), t.data.end(),
                          batch.data.begin() + i * 3 * S * S);
                labels[i] = item.label;
            }
            ForwardResult fwd = forward(model, batch, /*training=*/true, rng);
            LossResult lr = cross_entropy(fwd.logits, labels);
            GradMap grads = backward(model, fwd.cache, lr.dlogits, tc.selector);
            adamw_step(model, grads, state, opt);

            loss_sum += lr.loss * static_cast<double>(bsz);
            const std::size_t C = model.cfg.num_classes;
            for (std::size_t i = 0; i < bsz; ++i) {
                const double* row = fwd.logits.data.data() + i * C;
                std::size_t best = 0;
                for (std::size_t c = 1; c < C; ++c) {
                    if (row[c] > row[best]) best = c;
                }
                if (static_cast<int>(best) == labels[i]) ++correct;
            }
        }
        log.push_back({epoch + 1, loss_sum / static_cast<double>(dataset.size()),
                       static_cast<double>(correct) / static_cast<double>(dataset.size())});
    }
    return log;
}

Prediction predict(const ViTModel& model, const RgbImage& img,
                   const std::array<double, 3>& mean, const std::array<double, 3>& stddev) {
    const std::size_t S = model.cfg.image_size;
    RgbImage resized = resize_bilinear(img, S, S);
    Tensor t = normalize(resized, mean, stddev);
    Tensor batch({1, 3, S, S}, std::move(t.data));
    Rng rng(0);  // inference path draws nothing
    ForwardResult fwd = forward(model, batch, /*training=*/false, rng);
    Tensor probs = softmax(fwd.logits);
    Prediction p;
    p.probabilities.assign(probs.data.begin(), probs.data.end());
    std::size_t best = 0;
    for (std::size_t c = 1; c < p.probabilities.size(); ++c) {
        if (p.probabilities[c] > p.probabilities[best]) best = c;  // ties keep lowest code
    }
    p.defect = static_cast<DefectClass>(best);
    return p;
}

}  // namespace solarscan
