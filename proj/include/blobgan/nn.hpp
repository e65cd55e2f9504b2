#pragma once

// Parameter storage, tape binding, equalized-learning-rate layers and the
// optimizer used by every network.

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "blobgan/autodiff.hpp"

namespace blobgan {

class ParamSet {
public:
    std::size_t add(std::string name, Tensor init);

    std::size_t size() const noexcept { return values_.size(); }
    const std::string& name(std::size_t i) const { return names_.at(i); }
    Tensor& value(std::size_t i) { return values_.at(i); }
    const Tensor& value(std::size_t i) const { return values_.at(i); }
    std::optional<std::size_t> find(std::string_view name) const;

    std::int64_t numel() const;
    // FNV-1a over names, shapes and raw bytes.
    std::uint64_t checksum() const;

private:
    std::vector<std::string> names_;
    std::vector<Tensor> values_;
};

// Puts parameters onto a tape on first use. Trainable bindings create
// gradient-carrying leaves; frozen ones create constants.
class Binding {
public:
    Binding(Tape& tape, const ParamSet& params, bool trainable);

    Var operator[](std::size_t index);
    // Uses `v` for parameter `index` from now on (gradient checks).
    void bind(std::size_t index, const Var& v);
    Tape& tape() const noexcept { return *tape_; }
    bool trainable() const noexcept { return trainable_; }

    // Gradients for every parameter (zeros where unused). Call after backward().
    std::vector<Tensor> grads() const;

private:
    Tape* tape_;
    const ParamSet* params_;
    bool trainable_;
    std::vector<std::optional<Var>> bound_;
};

inline constexpr float kActivationGain = 1.41421356f;  // sqrt(2)

// x [B,in] -> [B,out]. Weights stored N(0, 1/lr_mult), scaled at runtime.
struct Dense {
    std::size_t weight = 0;
    std::size_t bias = 0;
    std::int64_t in = 0;
    std::int64_t out = 0;
    float weight_scale = 1.0f;
    float bias_scale = 1.0f;
};

Dense make_dense(ParamSet& params, const std::string& name, std::int64_t in, std::int64_t out, std::mt19937_64& rng,
                 float lr_mult = 1.0f, float bias_init = 0.0f);
Var dense(Binding& b, const Dense& layer, const Var& x);
// Runtime-scaled weight [in,out] alone, for paths that reuse it.
Var dense_weight(Binding& b, const Dense& layer);

// Stride-1 square convolution with "same" padding.
struct Conv {
    std::size_t weight = 0;
    std::size_t bias = 0;
    std::int64_t in = 0;
    std::int64_t out = 0;
    int kernel = 3;
    float weight_scale = 1.0f;
};

Conv make_conv(ParamSet& params, const std::string& name, std::int64_t in, std::int64_t out, int kernel,
               std::mt19937_64& rng, float bias_init = 0.0f);
Var conv(Binding& b, const Conv& layer, const Var& x);
Var conv_weight(Binding& b, const Conv& layer);

// Adds a per-channel bias [C] to x [N,C,...].
Var add_channel_bias(const Var& x, const Var& bias);

// leaky_relu(x) * sqrt(2)
Var activate(const Var& x);

struct AdamConfig {
    float lr = 0.002f;
    float beta1 = 0.0f;
    float beta2 = 0.99f;
    float eps = 1e-8f;
};

class Adam {
public:
    Adam() = default;
    Adam(const ParamSet& params, AdamConfig config);

    void step(ParamSet& params, const std::vector<Tensor>& grads);
    std::int64_t steps() const noexcept { return t_; }
    const AdamConfig& config() const noexcept { return config_; }

private:
    AdamConfig config_;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
    std::int64_t t_ = 0;
};

// ema <- decay * ema + (1 - decay) * live
void ema_update(ParamSet& ema, const ParamSet& live, float decay);

double grad_norm(const std::vector<Tensor>& grads);

}  // namespace blobgan
