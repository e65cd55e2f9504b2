#include "blobgan/nn.hpp"

#include <cmath>
#include <cstring>

#include "blobgan/errors.hpp"
#include "blobgan/ops.hpp"
#include "blobgan/simd/kernels.hpp"

namespace blobgan {

std::size_t ParamSet::add(std::string name, Tensor init) {
    if (find(name)) throw DomainError("duplicate parameter name " + name);
    names_.push_back(std::move(name));
    values_.push_back(std::move(init));
    return values_.size() - 1;
}

std::optional<std::size_t> ParamSet::find(std::string_view name) const {
    for (std::size_t i = 0; i < names_.size(); ++i) {
        if (names_[i] == name) return i;
    }
    return std::nullopt;
}

std::int64_t ParamSet::numel() const {
    std::int64_t n = 0;
    for (const auto& v : values_) n += v.numel();
    return n;
}

std::uint64_t ParamSet::checksum() const {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](const void* data, std::size_t len) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < len; ++i) {
            h ^= p[i];
            h *= 1099511628211ull;
        }
    };
    for (std::size_t i = 0; i < values_.size(); ++i) {
        mix(names_[i].data(), names_[i].size());
        const auto& shape = values_[i].shape();
        mix(shape.data(), shape.size() * sizeof(std::int64_t));
        mix(values_[i].data(), static_cast<std::size_t>(values_[i].numel()) * sizeof(float));
    }
    return h;
}

Binding::Binding(Tape& tape, const ParamSet& params, bool trainable)
    : tape_(&tape), params_(&params), trainable_(trainable), bound_(params.size()) {}

Var Binding::operator[](std::size_t index) {
    auto& slot = bound_.at(index);
    if (!slot) slot = tape_->leaf(params_->value(index), trainable_);
    return *slot;
}

void Binding::bind(std::size_t index, const Var& v) {
    if (v.shape() != params_->value(index).shape()) {
        throw DomainError("Binding::bind: shape mismatch for " + params_->name(index));
    }
    bound_.at(index) = v;
}

std::vector<Tensor> Binding::grads() const {
    std::vector<Tensor> out;
    out.reserve(bound_.size());
    for (std::size_t i = 0; i < bound_.size(); ++i) {
        if (bound_[i]) {
            out.push_back(tape_->grad(*bound_[i]));
        } else {
            out.emplace_back(params_->value(i).shape());
        }
    }
    return out;
}

Dense make_dense(ParamSet& params, const std::string& name, std::int64_t in, std::int64_t out, std::mt19937_64& rng,
                 float lr_mult, float bias_init) {
    Dense d;
    d.in = in;
    d.out = out;
    d.weight = params.add(name + ".w", Tensor::randn({in, out}, rng, 1.0f / lr_mult));
    d.bias = params.add(name + ".b", Tensor({out}, bias_init / lr_mult));
    d.weight_scale = lr_mult / std::sqrt(static_cast<float>(in));
    d.bias_scale = lr_mult;
    return d;
}

Var dense_weight(Binding& b, const Dense& layer) { return ops::scale(b[layer.weight], layer.weight_scale); }

Var dense(Binding& b, const Dense& layer, const Var& x) {
    Var y = ops::matmul(x, dense_weight(b, layer));
    Var bias = b[layer.bias];
    if (layer.bias_scale != 1.0f) bias = ops::scale(bias, layer.bias_scale);
    return ops::add(y, bias);
}

Conv make_conv(ParamSet& params, const std::string& name, std::int64_t in, std::int64_t out, int kernel,
               std::mt19937_64& rng, float bias_init) {
    Conv c;
    c.in = in;
    c.out = out;
    c.kernel = kernel;
    c.weight = params.add(name + ".w", Tensor::randn({out, in, kernel, kernel}, rng));
    c.bias = params.add(name + ".b", Tensor({out}, bias_init));
    c.weight_scale = 1.0f / std::sqrt(static_cast<float>(in * kernel * kernel));
    return c;
}

Var conv_weight(Binding& b, const Conv& layer) { return ops::scale(b[layer.weight], layer.weight_scale); }

Var conv(Binding& b, const Conv& layer, const Var& x) {
    Var y = ops::conv2d(x, conv_weight(b, layer), layer.kernel / 2);
    return add_channel_bias(y, b[layer.bias]);
}

Var add_channel_bias(const Var& x, const Var& bias) {
    Shape s(static_cast<std::size_t>(x.rank()), 1);
    s[1] = bias.numel();
    return ops::add(x, ops::reshape(bias, s));
}

Var activate(const Var& x) { return ops::scale(ops::leaky_relu(x), kActivationGain); }

Adam::Adam(const ParamSet& params, AdamConfig config) : config_(config) {
    for (std::size_t i = 0; i < params.size(); ++i) {
        m_.emplace_back(params.value(i).shape());
        v_.emplace_back(params.value(i).shape());
    }
}

void Adam::step(ParamSet& params, const std::vector<Tensor>& grads) {
    if (grads.size() != params.size() || m_.size() != params.size()) {
        throw DomainError("Adam::step: parameter/gradient count mismatch");
    }
    ++t_;
    const double b1t = 1.0 - std::pow(static_cast<double>(config_.beta1), static_cast<double>(t_));
    const double b2t = 1.0 - std::pow(static_cast<double>(config_.beta2), static_cast<double>(t_));
    const float step_size = static_cast<float>(config_.lr / b1t);
    const auto& k = simd::active_kernels();
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = params.value(i);
        if (grads[i].shape() != p.shape()) throw DomainError("Adam::step: gradient shape mismatch for " + params.name(i));
        k.adam(p.numel(), p.data(), grads[i].data(), m_[i].data(), v_[i].data(), config_.beta1, config_.beta2,
               step_size, static_cast<float>(b2t), config_.eps);
    }
}

void ema_update(ParamSet& ema, const ParamSet& live, float decay) {
    if (ema.size() != live.size()) throw DomainError("ema_update: parameter sets differ");
    for (std::size_t i = 0; i < ema.size(); ++i) {
        Tensor& e = ema.value(i);
        const Tensor& l = live.value(i);
        if (e.shape() != l.shape()) throw DomainError("ema_update: shape mismatch for " + ema.name(i));
        for (std::int64_t j = 0; j < e.numel(); ++j) e[j] = decay * e[j] + (1.0f - decay) * l[j];
    }
}

double grad_norm(const std::vector<Tensor>& grads) {
    double ss = 0.0;
    for (const auto& g : grads) ss += simd::active_kernels().dot(g.numel(), g.data(), g.data());
    return std::sqrt(ss);
}

}  // namespace blobgan
