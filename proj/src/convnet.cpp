#include "blobgan/convnet.hpp"

#include "blobgan/errors.hpp"
#include "blobgan/ops.hpp"

namespace blobgan {

std::int64_t ConvNetConfig::final_res() const {
    std::int64_t r = in_res;
    for (std::size_t i = 1; i < channels.size(); ++i) r /= 2;
    return r;
}

ConvNet::ConvNet(const std::string& prefix, const ConvNetConfig& cfg, ParamSet& params, std::mt19937_64& rng)
    : cfg_(cfg) {
    if (cfg.channels.size() < 2) throw DomainError("convnet: need at least one conv stage");
    std::int64_t r = cfg.in_res;
    for (std::size_t i = 1; i < cfg.channels.size(); ++i) {
        if (r % 2 != 0) throw DomainError("convnet: input resolution not divisible by 2^stages");
        r /= 2;
    }
    from_rgb_ = make_conv(params, prefix + ".from_rgb", 3, cfg.channels[0], 1, rng);
    for (std::size_t i = 1; i < cfg.channels.size(); ++i) {
        convs_.push_back(make_conv(params, prefix + ".conv" + std::to_string(i), cfg.channels[i - 1], cfg.channels[i],
                                   3, rng));
    }
    fc_ = make_dense(params, prefix + ".fc", cfg.channels.back() * r * r, cfg.hidden, rng);
    head_ = make_dense(params, prefix + ".head", cfg.hidden, cfg.out, rng);
}

ConvNet::Output ConvNet::forward(Binding& b, const Var& images) const {
    if (images.rank() != 4 || images.dim(1) != 3 || images.dim(2) != cfg_.in_res || images.dim(3) != cfg_.in_res) {
        throw DomainError("convnet: expected images [B,3," + std::to_string(cfg_.in_res) + "," +
                          std::to_string(cfg_.in_res) + "], got " + shape_string(images.shape()));
    }
    Var h = activate(conv(b, from_rgb_, images));
    for (const Conv& c : convs_) h = ops::avg_pool2x(activate(conv(b, c, h)));
    h = ops::reshape(h, {images.dim(0), fc_.in});
    Var feats = activate(dense(b, fc_, h));
    return {dense(b, head_, feats), feats};
}

namespace {

// d activate(x) / dx as a constant tensor.
Tensor activation_slope(const Tensor& pre) {
    ops::note_kinks(pre);
    Tensor m(pre.shape());
    for (std::int64_t i = 0; i < pre.numel(); ++i) {
        m[i] = pre[i] > 0.0f ? kActivationGain : kActivationGain * ops::kLeakySlope;
    }
    return m;
}

}  // namespace

Var ConvNet::input_gradient(Binding& b, const Var& images) const {
    if (cfg_.out != 1) throw DomainError("input_gradient needs a scalar-output network");
    Tape& tape = b.tape();
    const std::int64_t batch = images.dim(0);
    // Forward pass recording pre-activation values (leaky ReLU masks).
    std::vector<Tensor> masks;
    std::vector<std::int64_t> sizes;
    Var pre = conv(b, from_rgb_, images);
    masks.push_back(activation_slope(pre.value()));
    Var h = ops::leaky_relu(pre);
    h = ops::scale(h, kActivationGain);
    for (const Conv& c : convs_) {
        sizes.push_back(h.dim(2));
        pre = conv(b, c, h);
        masks.push_back(activation_slope(pre.value()));
        h = ops::avg_pool2x(activate(pre));
    }
    h = ops::reshape(h, {batch, fc_.in});
    Var fc_pre = dense(b, fc_, h);
    Tensor fc_mask = activation_slope(fc_pre.value());

    // Reverse sweep written with differentiable ops.
    Var g = tape.constant(Tensor::ones({batch, 1}));
    g = ops::matmul(g, dense_weight(b, head_), false, true);
    g = ops::mul(g, tape.constant(fc_mask));
    g = ops::matmul(g, dense_weight(b, fc_), false, true);
    const std::int64_t r = cfg_.final_res();
    g = ops::reshape(g, {batch, cfg_.channels.back(), r, r});
    for (std::size_t i = convs_.size(); i-- > 0;) {
        g = ops::scale(ops::upsample2x(g), 0.25f);
        g = ops::mul(g, tape.constant(masks[i + 1]));
        g = ops::conv2d_input_grad(g, conv_weight(b, convs_[i]), 1, sizes[i], sizes[i]);
    }
    g = ops::mul(g, tape.constant(masks[0]));
    return ops::conv2d_input_grad(g, conv_weight(b, from_rgb_), 0, cfg_.in_res, cfg_.in_res);
}

Var r1_penalty(Binding& b, const ConvNet& d, const Var& images, float gamma) {
    Var g = d.input_gradient(b, images);
    const float factor = 0.5f * gamma / static_cast<float>(images.dim(0));
    return ops::scale(ops::sum(ops::square(g)), factor);
}

}  // namespace blobgan
