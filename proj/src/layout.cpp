#include "blobgan/layout.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "blobgan/errors.hpp"
#include "blobgan/ops.hpp"

namespace blobgan {

void check_finite(const Tensor& t, const char* what) {
    for (float v : t.values()) {
        if (!std::isfinite(v)) throw DomainError(std::string(what) + " contains non-finite values");
    }
}

SceneVars decode_raw(const Var& raw, const LayoutConfig& cfg) {
    if (raw.rank() != 2 || raw.dim(1) != cfg.d_out()) {
        throw DomainError("decode_raw: expected [B," + std::to_string(cfg.d_out()) + "], got " +
                          shape_string(raw.shape()));
    }
    const std::int64_t batch = raw.dim(0);
    const std::int64_t k = cfg.k;
    const std::int64_t ngeo = k * LayoutConfig::kGeometryPerBlob;
    Var geo = ops::reshape(ops::narrow(raw, 1, 0, ngeo), {batch, k, LayoutConfig::kGeometryPerBlob});
    SceneVars v;
    v.x = ops::sigmoid(ops::narrow(geo, 2, 0, 2));
    v.s = ops::reshape(ops::narrow(geo, 2, 2, 1), {batch, k});
    // Sigmoids of the two aspect scalars rescaled to unit product; a is the
    // first of the pair: log a = (log sig(a0) - log sig(a1)) / 2.
    Var a0 = ops::narrow(geo, 2, 3, 1);
    Var a1 = ops::narrow(geo, 2, 4, 1);
    Var log_a = ops::scale(ops::sub(ops::softplus(ops::neg(a1)), ops::softplus(ops::neg(a0))), 0.5f);
    v.a = ops::reshape(ops::exp(log_a), {batch, k});
    Var e = ops::narrow(geo, 2, 5, 2);
    v.axis = ops::l2_normalize(e, 2);
    v.theta = ops::reshape(ops::atan2(ops::narrow(e, 2, 1, 1), ops::narrow(e, 2, 0, 1)), {batch, k});
    const std::int64_t nphi = (k + 1) * cfg.d_in;
    const std::int64_t npsi = (k + 1) * cfg.d_style;
    v.phi = ops::l2_normalize(ops::reshape(ops::narrow(raw, 1, ngeo, nphi), {batch, k + 1, cfg.d_in}), 2);
    v.psi = ops::l2_normalize(ops::reshape(ops::narrow(raw, 1, ngeo + nphi, npsi), {batch, k + 1, cfg.d_style}), 2);
    return v;
}

SceneVars scene_constants(Tape& tape, const std::vector<BlobScene>& scenes) {
    if (scenes.empty()) throw DomainError("scene_constants: empty batch");
    const auto batch = static_cast<std::int64_t>(scenes.size());
    const auto k = static_cast<std::int64_t>(scenes[0].k());
    const auto din = static_cast<std::int64_t>(scenes[0].d_in());
    const auto dst = static_cast<std::int64_t>(scenes[0].d_style());
    Tensor x({batch, k, 2}), s({batch, k}), a({batch, k}), th({batch, k});
    Tensor phi({batch, k + 1, din}), psi({batch, k + 1, dst});
    for (std::int64_t b = 0; b < batch; ++b) {
        const BlobScene& sc = scenes[static_cast<std::size_t>(b)];
        validate_scene(sc);
        if (static_cast<std::int64_t>(sc.k()) != k || static_cast<std::int64_t>(sc.d_in()) != din ||
            static_cast<std::int64_t>(sc.d_style()) != dst) {
            throw DomainError("scene_constants: scenes in a batch must share k and feature sizes");
        }
        std::copy(sc.phi_bg.begin(), sc.phi_bg.end(), phi.data() + b * (k + 1) * din);
        std::copy(sc.psi_bg.begin(), sc.psi_bg.end(), psi.data() + b * (k + 1) * dst);
        for (std::int64_t i = 0; i < k; ++i) {
            const Blob& bl = sc.blobs[static_cast<std::size_t>(i)];
            const std::int64_t j = b * k + i;
            x[2 * j] = bl.x[0];
            x[2 * j + 1] = bl.x[1];
            s[j] = bl.s;
            a[j] = bl.a;
            th[j] = bl.theta;
            std::copy(bl.phi.begin(), bl.phi.end(), phi.data() + (b * (k + 1) + i + 1) * din);
            std::copy(bl.psi.begin(), bl.psi.end(), psi.data() + (b * (k + 1) + i + 1) * dst);
        }
    }
    SceneVars v;
    v.x = tape.constant(std::move(x));
    v.s = tape.constant(std::move(s));
    v.a = tape.constant(std::move(a));
    v.theta = tape.constant(std::move(th));
    v.phi = tape.constant(std::move(phi));
    v.psi = tape.constant(std::move(psi));
    return v;
}

std::vector<BlobScene> to_scenes(const SceneVars& vars, float c) {
    const Tensor& x = vars.x.value();
    const Tensor& phi = vars.phi.value();
    const Tensor& psi = vars.psi.value();
    const std::int64_t batch = x.dim(0);
    const std::int64_t k = x.dim(1);
    const std::int64_t din = phi.dim(2);
    const std::int64_t dst = psi.dim(2);
    std::vector<BlobScene> out(static_cast<std::size_t>(batch));
    for (std::int64_t b = 0; b < batch; ++b) {
        BlobScene& sc = out[static_cast<std::size_t>(b)];
        sc.c = c;
        const float* pb = phi.data() + b * (k + 1) * din;
        const float* sb = psi.data() + b * (k + 1) * dst;
        sc.phi_bg.assign(pb, pb + din);
        sc.psi_bg.assign(sb, sb + dst);
        for (std::int64_t i = 0; i < k; ++i) {
            const std::int64_t j = b * k + i;
            Blob bl;
            bl.x = {x[2 * j], x[2 * j + 1]};
            bl.s = vars.s.value()[j];
            bl.a = vars.a.value()[j];
            bl.theta = wrap_angle(vars.theta.value()[j]);
            bl.phi.assign(pb + (i + 1) * din, pb + (i + 2) * din);
            bl.psi.assign(sb + (i + 1) * dst, sb + (i + 2) * dst);
            sc.blobs.push_back(std::move(bl));
        }
    }
    return out;
}

LayoutNet::LayoutNet(const LayoutConfig& cfg, ParamSet& params, std::mt19937_64& rng) : cfg_(cfg) {
    if (cfg.k < 1 || cfg.layers < 1) throw DomainError("LayoutNet: need k >= 1 and at least one hidden layer");
    std::int64_t in = cfg.d_noise;
    for (int i = 0; i < cfg.layers; ++i) {
        hidden_.push_back(make_dense(params, "layout.fc" + std::to_string(i), in, cfg.d_hidden, rng, cfg.lr_mult));
        in = cfg.d_hidden;
    }
    head_ = make_dense(params, "layout.head", in, cfg.d_out(), rng, cfg.lr_mult);
    Tensor& bias = params.value(head_.bias);
    for (std::int64_t i = 0; i < cfg.k; ++i) {
        bias[i * LayoutConfig::kGeometryPerBlob + 2] = cfg.s_bias_init / head_.bias_scale;
    }
}

Var LayoutNet::trunk(Binding& b, const Var& z) const {
    if (z.rank() != 2 || z.dim(1) != cfg_.d_noise) {
        throw DomainError("layout: z must be [B," + std::to_string(cfg_.d_noise) + "]");
    }
    check_finite(z.value(), "layout noise");
    Var h = z;
    for (const Dense& layer : hidden_) h = activate(dense(b, layer, h));
    return h;
}

Var LayoutNet::head(Binding& b, const Var& hidden) const { return dense(b, head_, hidden); }

SceneVars LayoutNet::forward(Binding& b, const Var& z) const { return decode_raw(head(b, trunk(b, z)), cfg_); }

SceneVars LayoutNet::truncated(Binding& b, const Var& z, float w, const Tensor& mean) const {
    if (mean.numel() == 0) throw StateError("truncation requested without a cached trunk mean");
    if (mean.numel() != cfg_.d_hidden) throw DomainError("truncation mean has the wrong size");
    Var h = trunk(b, z);
    if (w == 1.0f) return decode_raw(head(b, h), cfg_);
    Var m = b.tape().constant(mean.reshaped({1, cfg_.d_hidden}));
    Var blended = ops::add(ops::scale(m, 1.0f - w), ops::scale(h, w));
    return decode_raw(head(b, blended), cfg_);
}

Tensor LayoutNet::trunk_mean(const ParamSet& params, int samples, std::uint64_t seed) const {
    if (samples < 1) throw DomainError("trunk_mean needs at least one sample");
    std::mt19937_64 rng(seed);
    std::vector<double> acc(static_cast<std::size_t>(cfg_.d_hidden), 0.0);
    constexpr int kChunk = 256;
    for (int done = 0; done < samples; done += kChunk) {
        const int n = std::min(kChunk, samples - done);
        Tape tape;
        Binding b(tape, params, false);
        Var h = trunk(b, tape.constant(Tensor::randn({n, cfg_.d_noise}, rng)));
        for (int i = 0; i < n; ++i)
            for (std::int64_t j = 0; j < cfg_.d_hidden; ++j) acc[static_cast<std::size_t>(j)] += h.value()[i * cfg_.d_hidden + j];
    }
    Tensor mean({cfg_.d_hidden});
    for (std::int64_t j = 0; j < cfg_.d_hidden; ++j) mean[j] = static_cast<float>(acc[static_cast<std::size_t>(j)] / samples);
    return mean;
}

std::vector<BlobScene> style_mix(const std::vector<BlobScene>& batch, std::mt19937_64& rng, float p) {
    if (batch.size() < 2 || p <= 0.0f) return batch;
    std::vector<BlobScene> out = batch;
    if (std::uniform_real_distribution<float>(0.0f, 1.0f)(rng) >= p) return out;
    const std::size_t k = batch[0].k();
    const auto count = std::uniform_int_distribution<std::size_t>(0, k)(rng);
    std::vector<std::size_t> blobs(k);
    std::iota(blobs.begin(), blobs.end(), 0);
    std::shuffle(blobs.begin(), blobs.end(), rng);
    std::vector<std::size_t> perm(batch.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::rotate(perm.begin(), perm.begin() + 1, perm.end());
    for (std::size_t c = 0; c < count; ++c) {
        const std::size_t i = blobs[c];
        for (std::size_t s = 0; s < batch.size(); ++s) out[s].blobs[i].psi = batch[perm[s]].blobs[i].psi;
    }
    return out;
}

}  // namespace blobgan
