#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "solarscan/augment.hpp"
#include "solarscan/image.hpp"
#include "solarscan/rng.hpp"
#include "solarscan/tensor.hpp"

namespace solarscan {

// Surface anomaly taxonomy, stable codes 0..8.
enum class DefectClass : int {
    PhysicalDamage = 0,
    BirdDropping = 1,
    Clean = 2,
    ElectricalFault = 3,
    SnowCover = 4,
    Soiling = 5,
    CellDamage = 6,
    Breakage = 7,
    Dust = 8,
};

inline constexpr int kNumDefectClasses = 9;

const std::vector<std::string>& defect_class_names();
const std::string& defect_class_name(DefectClass c);
// Returns -1 for unknown names.
int defect_class_code(const std::string& name);

struct ViTConfig {
    int image_size = 224;
    int patch_size = 16;
    int hidden_dim = 768;
    int num_layers = 12;
    int num_heads = 12;
    int mlp_dim = 3072;
    int num_classes = kNumDefectClasses;
    double dropout_hidden = 0.3;
    double dropout_attention = 0.3;

    int num_patches() const {
        const int per_side = image_size / patch_size;
        return per_side * per_side;
    }
    int seq_len() const { return 1 + num_patches(); }
    int patch_dim() const { return 3 * patch_size * patch_size; }
    int head_dim() const { return hidden_dim / num_heads; }

    void validate() const;
};

struct LinearParam {
    Tensor weight;  // out x in
    Tensor bias;    // out
};

struct LayerNormParam {
    Tensor gamma;
    Tensor beta;
};

struct EncoderLayerParam {
    LayerNormParam ln1;
    LinearParam q, k, v, out;
    LayerNormParam ln2;
    LinearParam fc1, fc2;
};

struct ViTModel {
    ViTConfig cfg;
    LinearParam patch_embed;  // hidden_dim x patch_dim
    Tensor cls_token;         // hidden_dim
    Tensor pos_embed;         // seq_len x hidden_dim
    std::vector<EncoderLayerParam> layers;
    LayerNormParam final_ln;
    LinearParam head;  // num_classes x hidden_dim

    // Enumerates every parameter tensor with its canonical name, in a fixed
    // order shared by the optimizer, the serializer, and gradient checks.
    void visit(const std::function<void(const std::string&, Tensor&)>& fn);
    void visit(const std::function<void(const std::string&, const Tensor&)>& fn) const;
};

struct OptimizerConfig {
    double learning_rate = 3e-5;
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    void validate() const;
};

using GradMap = std::map<std::string, Tensor>;

enum class TrainableSelector { HeadOnly, Full };

struct LayerCache {
    Tensor x_in;       // B,T,D input to the block
    Tensor ln1_xhat;   // B,T,D
    Tensor ln1_istd;   // B,T
    Tensor q, k, v;    // B,T,D
    Tensor attn;       // B,H,T,T post-softmax probabilities
    Tensor attn_mask;  // B,H,T,T dropout scales (empty when inactive)
    Tensor context;    // B,T,D head outputs, input to the out projection
    Tensor attn_out_mask;  // B,T,D
    Tensor h;          // B,T,D residual after attention, input to the MLP half
    Tensor ln2_xhat;   // B,T,D
    Tensor ln2_istd;   // B,T
    Tensor fc1_out;    // B,T,M pre-activation
    Tensor act;        // B,T,M gelu(fc1_out)
    Tensor act_mask;   // B,T,M
    Tensor mlp_out_mask;  // B,T,D
};

struct ForwardCache {
    bool training = false;
    std::size_t batch = 0;
    Tensor patches;     // B,N,P
    Tensor embed_mask;  // B,T,D dropout after positional add
    std::vector<LayerCache> layers;
    Tensor final_in;    // B,T,D input to the final layernorm
    Tensor fin_xhat;    // B,T,D
    Tensor fin_istd;    // B,T
    Tensor cls_repr;    // B,D normalized class-token representation
};

struct ForwardResult {
    Tensor logits;  // B x num_classes
    ForwardCache cache;
};

ViTModel init_model(const ViTConfig& cfg, Rng& rng);

// batch is B x 3 x image_size x image_size. Dropout is active only when
// training=true; inference is deterministic.
ForwardResult forward(const ViTModel& model, const Tensor& batch, bool training, Rng& rng);

Tensor softmax(const Tensor& logits);

struct LossResult {
    double loss;
    Tensor dlogits;
};

LossResult cross_entropy(const Tensor& logits, const std::vector<int>& labels);

GradMap backward(const ViTModel& model, const ForwardCache& cache, const Tensor& dlogits,
                 TrainableSelector selector);

struct AdamWState {
    std::int64_t t = 0;
    std::map<std::string, Tensor> m;
    std::map<std::string, Tensor> v;
};

// Decoupled weight decay applies only to names ending in ".weight"
// (projection and MLP matrices); biases, layernorms, the class token and
// positional embeddings are excluded.
void adamw_step(ViTModel& model, const GradMap& grads, AdamWState& state,
                const OptimizerConfig& opt);

// Single-tensor AdamW update, t is the post-increment step count (>= 1).
void adamw_update(Tensor& param, const Tensor& grad, Tensor& m, Tensor& v, std::int64_t t,
                  const OptimizerConfig& opt, bool apply_decay);

struct LabeledImage {
    RgbImage image;
    int label = 0;
    std::string id;
};

struct EpochLogEntry {
    int epoch;
    double loss;
    double accuracy;
};

struct TrainConfig {
    int epochs = 10;
    int batch_size = 16;
    TrainableSelector selector = TrainableSelector::HeadOnly;
    AugmentationConfig augmentation;
    bool augment_enabled = true;
    std::array<double, 3> norm_mean = kDefaultNormMean;
    std::array<double, 3> norm_std = kDefaultNormStd;
};

std::vector<EpochLogEntry> train(ViTModel& model, const std::vector<LabeledImage>& dataset,
                                 const OptimizerConfig& opt, const TrainConfig& tc, Rng& rng);

struct Prediction {
    DefectClass defect;
    std::vector<double> probabilities;  // num_classes entries
};

Prediction predict(const ViTModel& model, const RgbImage& img,
                   const std::array<double, 3>& mean = kDefaultNormMean,
                   const std::array<double, 3>& stddev = kDefaultNormStd);

}  // namespace solarscan
