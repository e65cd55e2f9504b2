#pragma once

// Discriminator-shaped convolutional trunk, shared by the discriminator D
// and the inversion encoder E.

#include <random>
#include <string>
#include <vector>

#include "blobgan/nn.hpp"

namespace blobgan {

struct ConvNetConfig {
    std::int64_t in_res = 32;
    // fromRGB width, then the width after each conv+pool stage.
    std::vector<std::int64_t> channels{16, 32, 64, 64};
    std::int64_t hidden = 64;  // penultimate feature width
    std::int64_t out = 1;

    std::int64_t final_res() const;
};

class ConvNet {
public:
    ConvNet() = default;
    ConvNet(const std::string& prefix, const ConvNetConfig& cfg, ParamSet& params, std::mt19937_64& rng);

    const ConvNetConfig& config() const noexcept { return cfg_; }

    struct Output {
        Var out;       // [B,out]
        Var features;  // [B,hidden]
    };
    Output forward(Binding& b, const Var& images) const;

    // Gradient of sum_b out[b,0] w.r.t. the images, built from differentiable
    // ops so that it can itself be differentiated w.r.t. the weights.
    // Requires out == 1.
    Var input_gradient(Binding& b, const Var& images) const;

private:
    ConvNetConfig cfg_;
    Conv from_rgb_;
    std::vector<Conv> convs_;
    Dense fc_;
    Dense head_;
};

// (gamma/2) * mean over the batch of ||d D / d image||^2
Var r1_penalty(Binding& b, const ConvNet& d, const Var& images, float gamma);

}  // namespace blobgan
