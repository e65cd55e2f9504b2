#pragma once

// Layout network F: noise -> blob parameters, plus the flat raw-vector
// decoding shared with the encoder.

#include <random>
#include <vector>

#include "blobgan/blob.hpp"
#include "blobgan/nn.hpp"

namespace blobgan {

struct LayoutConfig {
    std::int64_t k = 5;
    std::int64_t d_in = 64;
    std::int64_t d_style = 64;
    std::int64_t d_noise = 128;
    std::int64_t d_hidden = 256;
    int layers = 8;
    float lr_mult = 0.01f;
    float s_bias_init = 1.0f;

    // Raw scalars per blob: x (2), s, two aspect scalars, rotation axis (2).
    static constexpr std::int64_t kGeometryPerBlob = 7;
    std::int64_t d_out() const { return k * (kGeometryPerBlob + d_in + d_style) + d_in + d_style; }
};

// Differentiable scene batch. x [B,k,2], s/a/theta [B,k], phi [B,k+1,d_in],
// psi [B,k+1,d_style] with row 0 the background. axis [B,k,2] is the unit
// rotation axis when the scene was decoded from a raw vector.
struct SceneVars {
    Var x, s, a, theta, phi, psi;
    Var axis;
};

// Raw vector [B,d_out] -> decoded scene.
SceneVars decode_raw(const Var& raw, const LayoutConfig& cfg);

// Constants on `tape` describing the given scenes; the psi_border field is
// not representable here and is ignored.
SceneVars scene_constants(Tape& tape, const std::vector<BlobScene>& scenes);
std::vector<BlobScene> to_scenes(const SceneVars& vars, float c);

class LayoutNet {
public:
    LayoutNet() = default;
    LayoutNet(const LayoutConfig& cfg, ParamSet& params, std::mt19937_64& rng);

    const LayoutConfig& config() const noexcept { return cfg_; }

    // Activations after the hidden layers, [B,d_hidden].
    Var trunk(Binding& b, const Var& z) const;
    Var head(Binding& b, const Var& hidden) const;
    SceneVars forward(Binding& b, const Var& z) const;

    // Blends the trunk output toward `mean` with weight w on the sample.
    SceneVars truncated(Binding& b, const Var& z, float w, const Tensor& mean) const;

    // Mean trunk activation over `samples` noise draws.
    Tensor trunk_mean(const ParamSet& params, int samples, std::uint64_t seed) const;

private:
    LayoutConfig cfg_;
    std::vector<Dense> hidden_;
    Dense head_;
};

// Throws DomainError on non-finite entries.
void check_finite(const Tensor& t, const char* what);

// Swaps psi of a random subset of blobs across the batch with probability p.
std::vector<BlobScene> style_mix(const std::vector<BlobScene>& batch, std::mt19937_64& rng, float p = 0.2f);

}  // namespace blobgan
