#include "blobgan/model.hpp"

#include "blobgan/errors.hpp"
#include "blobgan/ops.hpp"

namespace blobgan {

ModelConfig ModelConfig::desk() {
    ModelConfig m;
    m.encoder.hidden = 256;
    m.encoder.out = m.layout.d_out();
    return m;
}

void ModelConfig::validate() const {
    if (decoder.d_in != layout.d_in || decoder.d_style != layout.d_style) {
        throw DomainError("model config: decoder feature sizes differ from the layout network's");
    }
    if (disc.in_res != decoder.out_res || encoder.in_res != decoder.out_res) {
        throw DomainError("model config: discriminator/encoder resolution differs from the decoder output");
    }
    if (disc.out != 1) throw DomainError("model config: discriminator must output one scalar");
    if (encoder.out != layout.d_out()) throw DomainError("model config: encoder head must match the layout vector");
    if (!(c > 0.0f)) throw DomainError("model config: c must be positive");
}

Model Model::create(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Model m;
    m.cfg = cfg;
    std::mt19937_64 rng(seed);
    m.layout = LayoutNet(cfg.layout, m.g_params, rng);
    m.decoder = Decoder(cfg.decoder, m.g_params, rng);
    m.disc = ConvNet("disc", cfg.disc, m.d_params, rng);
    m.encoder = ConvNet("encoder", cfg.encoder, m.e_params, rng);
    m.g_ema = m.g_params;
    return m;
}

Model Model::with_params(const ModelConfig& cfg, const Model& from) {
    Model m = create(cfg, 0);
    m.train = from.train;
    m.step = from.step;
    m.encoder_step = from.encoder_step;
    m.trunc_mean = from.trunc_mean;
    auto copy = [](ParamSet& dst, const ParamSet& src, const char* what) {
        if (dst.size() != src.size()) throw FormatError("tensors", std::string(what) + ": parameter count mismatch");
        for (std::size_t i = 0; i < dst.size(); ++i) {
            if (dst.value(i).shape() != src.value(i).shape() || dst.name(i) != src.name(i)) {
                throw FormatError("tensors", std::string(what) + ": parameter " + dst.name(i) + " mismatch");
            }
            dst.value(i) = src.value(i);
        }
    };
    copy(m.g_params, from.g_params, "generator");
    copy(m.g_ema, from.g_ema, "generator EMA");
    copy(m.d_params, from.d_params, "discriminator");
    copy(m.e_params, from.e_params, "encoder");
    return m;
}

void ensure_truncation_mean(Model& model, int samples) {
    if (model.trunc_mean.numel() == 0) model.trunc_mean = model.layout.trunk_mean(model.g_ema, samples, 0x7a11);
}

Grids splat_grids(const SceneVars& scene, float c, const DecoderConfig& dec) {
    Grids grids;
    for (std::int64_t r : dec.resolutions()) {
        Var d = geom::mahalanobis(scene.x, scene.theta, scene.a, c, r, r);
        Var alpha = geom::composite(geom::opacity(d, scene.s));
        grids.alpha[r] = alpha;
        grids.psi[r] = geom::splat(alpha, scene.psi);
        if (r == dec.base_res) grids.phi = geom::splat(alpha, scene.phi);
    }
    return grids;
}

Var generate(const Model& model, Binding& g, const SceneVars& scene) {
    Grids grids = splat_grids(scene, model.cfg.c, model.cfg.decoder);
    return model.decoder.forward(g, grids.phi, grids.psi);
}

namespace {

Tensor stack(const std::vector<Tensor>& parts) {
    Shape s = parts.at(0).shape();
    s.insert(s.begin(), static_cast<std::int64_t>(parts.size()));
    Tensor out(s);
    const std::int64_t per = parts[0].numel();
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (parts[i].shape() != parts[0].shape()) throw DomainError("stack: shape mismatch");
        std::copy_n(parts[i].data(), per, out.data() + static_cast<std::int64_t>(i) * per);
    }
    return out;
}

}  // namespace

RenderOutput render(const Model& model, const ParamSet& g, const std::vector<BlobScene>& scenes,
                    const RenderOptions& options) {
    if (scenes.empty()) throw DomainError("render: no scenes");
    const DecoderConfig& dec = model.cfg.decoder;
    for (const auto& sc : scenes) {
        validate_scene(sc);
        if (static_cast<std::int64_t>(sc.d_in()) != dec.d_in || static_cast<std::int64_t>(sc.d_style()) != dec.d_style) {
            throw DomainError("render: scene feature sizes do not match the model");
        }
    }
    if (options.phi_override && options.phi_override->size() != scenes.size()) {
        throw DomainError("render: phi_override needs one grid per scene");
    }
    std::vector<Tensor> phis;
    std::map<std::int64_t, std::vector<Tensor>> psis;
    std::vector<Tensor> alphas_out;
    for (std::size_t i = 0; i < scenes.size(); ++i) {
        const BlobScene& sc = scenes[i];
        for (std::int64_t r : dec.resolutions()) {
            Tensor alpha = composite(scene_opacity(sc, r, r));
            psis[r].push_back(splat(sc, alpha, Features::kStyle));
            if (r == dec.base_res) {
                if (options.phi_override) {
                    const Tensor& ov = (*options.phi_override)[i];
                    if (ov.shape() != Shape{dec.d_in, dec.base_res, dec.base_res}) {
                        throw DomainError("render: phi_override grid has shape " + shape_string(ov.shape()));
                    }
                    phis.push_back(ov);
                } else {
                    phis.push_back(splat(sc, alpha, Features::kStructure));
                }
            }
            if (r == dec.out_res) alphas_out.push_back(alpha);
        }
    }
    Tape tape;
    Binding b(tape, g, false);
    std::map<std::int64_t, Var> psi_vars;
    for (auto& [r, list] : psis) psi_vars[r] = tape.constant(stack(list));
    RenderOutput out;
    out.images = model.decoder.forward(b, tape.constant(stack(phis)), psi_vars).value();
    // Scenes may differ in blob count, so alpha is only stacked when uniform.
    bool uniform = true;
    for (const auto& a : alphas_out) uniform = uniform && a.shape() == alphas_out[0].shape();
    if (uniform) out.alpha = stack(alphas_out);
    return out;
}

Tensor noise_for_seed(const LayoutConfig& cfg, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return Tensor::randn({cfg.d_noise}, rng);
}

std::vector<BlobScene> sample_scenes(const Model& model, const ParamSet& g, const std::vector<std::uint64_t>& seeds,
                                     float truncation) {
    if (seeds.empty()) return {};
    if (!(truncation >= 0.0f && truncation <= 1.0f)) throw DomainError("truncation must lie in [0,1]");
    const auto& lc = model.cfg.layout;
    Tensor z({static_cast<std::int64_t>(seeds.size()), lc.d_noise});
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        Tensor zi = noise_for_seed(lc, seeds[i]);
        std::copy_n(zi.data(), lc.d_noise, z.data() + static_cast<std::int64_t>(i) * lc.d_noise);
    }
    Tape tape;
    Binding b(tape, g, false);
    Var zv = tape.constant(std::move(z));
    SceneVars sv = truncation == 1.0f ? model.layout.forward(b, zv)
                                      : model.layout.truncated(b, zv, truncation, model.trunc_mean);
    return to_scenes(sv, model.cfg.c);
}

}  // namespace blobgan
