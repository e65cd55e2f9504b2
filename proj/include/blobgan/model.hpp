#pragma once

// The full generator/discriminator/encoder bundle and scene rendering.

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "blobgan/blob.hpp"
#include "blobgan/convnet.hpp"
#include "blobgan/decoder.hpp"
#include "blobgan/layout.hpp"

namespace blobgan {

struct TrainConfig {
    float lr = 0.002f;
    float beta1 = 0.0f;
    float beta2 = 0.99f;
    float r1_gamma = 100.0f;
    int r1_period = 16;
    float ema_decay = 0.999f;
    int batch = 16;
    std::int64_t steps = 20000;
    JitterRanges jitter{};
    std::uint64_t seed = 1;
    float style_mix_prob = 0.0f;     // off by default
    float blob_dropout_prob = 0.0f;  // off by default
    std::int64_t checkpoint_every = 0;  // 0: only at the end
    // Encoder training (inversion).
    std::int64_t encoder_steps = 3000;
    float encoder_lr = 0.002f;
    float encoder_beta_weight = 10.0f;
};

struct ModelConfig {
    LayoutConfig layout;
    DecoderConfig decoder;
    ConvNetConfig disc;
    ConvNetConfig encoder;
    float c = kDefaultSharpness;

    // Desk-scale defaults with consistent dimensions.
    static ModelConfig desk();
    // Throws DomainError when the parts disagree.
    void validate() const;
};

struct Model {
    ModelConfig cfg;
    TrainConfig train;
    std::int64_t step = 0;
    std::int64_t encoder_step = 0;

    ParamSet g_params;  // layout + decoder
    ParamSet g_ema;
    ParamSet d_params;
    ParamSet e_params;

    LayoutNet layout;
    Decoder decoder;
    ConvNet disc;
    ConvNet encoder;

    Tensor trunc_mean;  // [d_hidden]; empty until computed

    static Model create(const ModelConfig& cfg, std::uint64_t seed);
    // Rebuilds the architecture and takes parameter values from `from`.
    static Model with_params(const ModelConfig& cfg, const Model& from);
};

inline constexpr int kTruncationSamples = 10000;

// Fills model.trunc_mean from the EMA generator if it is empty.
void ensure_truncation_mean(Model& model, int samples = kTruncationSamples);

struct Grids {
    Var phi;                          // [B,d_in,base,base]
    std::map<std::int64_t, Var> psi;  // res -> [B,d_style,r,r]
    std::map<std::int64_t, Var> alpha;  // res -> [B,k+1,r,r]
};

Grids splat_grids(const SceneVars& scene, float c, const DecoderConfig& dec);

// Differentiable scene -> image path used by training and inversion.
Var generate(const Model& model, Binding& g, const SceneVars& scene);

struct RenderOptions {
    // Replaces the structure grid ([d_in,base,base] per scene) when set.
    std::optional<std::vector<Tensor>> phi_override;
};

struct RenderOutput {
    Tensor images;  // [B,3,R,R]
    Tensor alpha;   // [B,k+1,R,R] at output resolution
};

// Renders scenes with the given generator parameters (psi_border aware).
RenderOutput render(const Model& model, const ParamSet& g, const std::vector<BlobScene>& scenes,
                    const RenderOptions& options = {});

// Noise vector derived from a seed.
Tensor noise_for_seed(const LayoutConfig& cfg, std::uint64_t seed);

// Scenes from seeded noise; w < 1 requires model.trunc_mean.
std::vector<BlobScene> sample_scenes(const Model& model, const ParamSet& g, const std::vector<std::uint64_t>& seeds,
                                     float truncation = 1.0f);

}  // namespace blobgan
