#pragma once

// Blob scenes and the differentiable splatting pipeline: Mahalanobis
// distance grids, opacities, front-to-back compositing and feature splats.

#include <array>
#include <optional>
#include <random>
#include <vector>

#include "blobgan/autodiff.hpp"

namespace blobgan {

inline constexpr float kDefaultSharpness = 0.02f;

struct Blob {
    std::array<float, 2> x{0.5f, 0.5f};  // (horizontal, vertical) in [0,1]
    float s = 0.0f;
    float a = 1.0f;
    float theta = 0.0f;
    std::vector<float> phi;
    std::vector<float> psi;
    // Target-image background style used when this blob's style came from
    // another scene; blends the blob border toward it (see style_swap).
    std::optional<std::vector<float>> psi_border;

    bool operator==(const Blob&) const = default;
};

// blobs[0] is the bottom layer, blobs.back() the top.
struct BlobScene {
    std::vector<Blob> blobs;
    std::vector<float> phi_bg;
    std::vector<float> psi_bg;
    float c = kDefaultSharpness;

    std::size_t k() const noexcept { return blobs.size(); }
    std::size_t d_in() const noexcept { return phi_bg.size(); }
    std::size_t d_style() const noexcept { return psi_bg.size(); }
    bool operator==(const BlobScene&) const = default;
};

// Throws DomainError on inconsistent feature sizes or a <= 0.
void validate_scene(const BlobScene& scene);

// Wraps an angle to [-pi, pi].
float wrap_angle(float theta);

// R diag(c*a, c/a) R^T, row-major.
std::array<double, 4> blob_covariance(double a, double theta, double c);

// Pixel (h, w) sits at (w/W, h/H).
Tensor mahalanobis_grid(const Blob& blob, std::int64_t height, std::int64_t width, float c);
Tensor opacity_map(const Blob& blob, std::int64_t height, std::int64_t width, float c);
// [k,H,W] opacities -> [k+1,H,W] alphas, index 0 = background.
Tensor composite(const Tensor& opacity);
// Opacities of every blob at one resolution, [k,H,W].
Tensor scene_opacity(const BlobScene& scene, std::int64_t height, std::int64_t width);

enum class Features { kStructure, kStyle };
// [d,H,W] grid of alpha-weighted features. Style splats honour psi_border.
Tensor splat(const BlobScene& scene, const Tensor& alpha, Features which);

struct JitterRanges {
    float dx = 0.04f;
    float ds = 0.5f;
    float dtheta = 0.1f;
};
BlobScene jitter(const BlobScene& scene, std::mt19937_64& rng, const JitterRanges& ranges = {});

namespace geom {

// Batched differentiable forms. Shapes: x [B,k,2], theta/a [B,k].
// Returns d [B,k,H,W].
Var mahalanobis(const Var& x, const Var& theta, const Var& a, float c, std::int64_t height, std::int64_t width);
// sigmoid(s - d), s [B,k], d [B,k,H,W].
Var opacity(const Var& d, const Var& s);
// [B,k,H,W] -> [B,k+1,H,W]
Var composite(const Var& opacity);
// alpha [B,k+1,H,W], feats [B,k+1,D] (row 0 = background) -> [B,D,H,W]
Var splat(const Var& alpha, const Var& feats);

}  // namespace geom

}  // namespace blobgan
