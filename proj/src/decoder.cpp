#include "blobgan/decoder.hpp"

#include <cmath>

#include "blobgan/errors.hpp"
#include "blobgan/ops.hpp"

namespace blobgan {

std::vector<std::int64_t> DecoderConfig::resolutions() const {
    std::vector<std::int64_t> out;
    for (std::int64_t r = base_res; r <= out_res; r *= 2) out.push_back(r);
    return out;
}

Var modulated_conv(const Var& x, const Var& style, const Var& weight) {
    if (x.rank() != 4 || style.shape() != x.shape()) {
        throw DomainError("modulated_conv: style grid " + shape_string(style.shape()) + " does not match input " +
                          shape_string(x.shape()));
    }
    if (weight.rank() != 4 || weight.dim(1) != x.dim(1)) throw DomainError("modulated_conv: weight/input mismatch");
    Var m = ops::l2_normalize(style, 1);
    const std::int64_t o = weight.dim(0);
    const std::int64_t fan = weight.numel() / o;
    Var w = ops::reshape(ops::l2_normalize(ops::reshape(weight, {o, fan}), 1), weight.shape());
    return ops::conv2d(ops::mul(x, m), w, static_cast<int>(weight.dim(2) / 2));
}

Decoder::Decoder(const DecoderConfig& cfg, ParamSet& params, std::mt19937_64& rng) : cfg_(cfg) {
    const auto res = cfg.resolutions();
    if (res.empty() || res.back() != cfg.out_res) throw DomainError("decoder: out_res must be base_res * 2^n");
    if (cfg.channels.size() != res.size()) {
        throw DomainError("decoder: need one channel width per resolution (" + std::to_string(res.size()) + ")");
    }
    std::int64_t in = cfg.d_in;
    int idx = 0;
    auto add_layer = [&](std::int64_t out, std::int64_t r, bool up) {
        const std::string name = "decoder.l" + std::to_string(idx++);
        ModLayer l;
        l.affine = make_conv(params, name + ".affine", cfg.d_style, in, 1, rng, 1.0f);
        l.conv = make_conv(params, name + ".conv", in, out, 3, rng);
        l.res = r;
        l.upsample_before = up;
        layers_.push_back(l);
        in = out;
    };
    add_layer(cfg.channels[0], res[0], false);
    for (std::size_t i = 1; i < res.size(); ++i) {
        add_layer(cfg.channels[i], res[i], true);
        add_layer(cfg.channels[i], res[i], false);
    }
    to_image_ = make_conv(params, "decoder.to_image", in, 3, 1, rng);
}

Var Decoder::layer_forward(Binding& b, const ModLayer& layer, const Var& x, const Var& psi) const {
    Var style = conv(b, layer.affine, psi);
    Var y = modulated_conv(x, style, b[layer.conv.weight]);
    // Unit-norm modulation shrinks activations by sqrt(fan-in channels).
    y = ops::scale(y, std::sqrt(static_cast<float>(layer.conv.in)));
    return activate(add_channel_bias(y, b[layer.conv.bias]));
}

Var Decoder::forward(Binding& b, const Var& phi, const std::map<std::int64_t, Var>& psi) const {
    if (phi.rank() != 4 || phi.dim(1) != cfg_.d_in || phi.dim(2) != cfg_.base_res || phi.dim(3) != cfg_.base_res) {
        throw DomainError("decoder: structure grid must be [B," + std::to_string(cfg_.d_in) + "," +
                          std::to_string(cfg_.base_res) + "," + std::to_string(cfg_.base_res) + "], got " +
                          shape_string(phi.shape()));
    }
    Var x = phi;
    for (const ModLayer& layer : layers_) {
        auto it = psi.find(layer.res);
        if (it == psi.end()) throw DomainError("decoder: missing style grid at resolution " + std::to_string(layer.res));
        const Var& grid = it->second;
        if (grid.rank() != 4 || grid.dim(1) != cfg_.d_style || grid.dim(2) != layer.res || grid.dim(3) != layer.res) {
            throw DomainError("decoder: style grid at resolution " + std::to_string(layer.res) + " has shape " +
                              shape_string(grid.shape()));
        }
        if (layer.upsample_before) x = ops::upsample2x(x);
        x = layer_forward(b, layer, x, grid);
    }
    return ops::tanh(conv(b, to_image_, x));
}

}  // namespace blobgan
