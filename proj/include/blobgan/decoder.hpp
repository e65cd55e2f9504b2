#pragma once

// Generator G: structure grid and per-resolution style grids -> image.

#include <map>
#include <random>
#include <vector>

#include "blobgan/nn.hpp"

namespace blobgan {

struct DecoderConfig {
    std::int64_t d_in = 64;
    std::int64_t d_style = 64;
    std::int64_t base_res = 8;
    std::int64_t out_res = 32;
    // Width at base_res, then after each x2 upsampling.
    std::vector<std::int64_t> channels{64, 32, 16};

    // Resolutions that need a style grid, ascending.
    std::vector<std::int64_t> resolutions() const;
};

// x [N,C,H,W] scaled per pixel by style / ||style|| over channels, then
// convolved ("same" padding) with weight normalized per output channel.
// style [N,C,H,W] is the affine-transformed style grid.
Var modulated_conv(const Var& x, const Var& style, const Var& weight);

class Decoder {
public:
    Decoder() = default;
    Decoder(const DecoderConfig& cfg, ParamSet& params, std::mt19937_64& rng);

    const DecoderConfig& config() const noexcept { return cfg_; }

    // phi [B,d_in,base,base]; psi maps every resolution to [B,d_style,r,r].
    // Returns images [B,3,out,out] in [-1,1].
    Var forward(Binding& b, const Var& phi, const std::map<std::int64_t, Var>& psi) const;

private:
    struct ModLayer {
        Conv affine;  // 1x1, d_style -> in channels
        Conv conv;
        std::int64_t res = 0;
        bool upsample_before = false;
    };
    Var layer_forward(Binding& b, const ModLayer& layer, const Var& x, const Var& psi) const;

    DecoderConfig cfg_;
    std::vector<ModLayer> layers_;
    Conv to_image_;
};

}  // namespace blobgan
