#include "blobgan/inversion.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>

#include "blobgan/errors.hpp"
#include "blobgan/ops.hpp"
#include "blobgan/toy_data.hpp"

namespace blobgan {

SceneVars encode(const Model& model, Binding& e, const Var& images) {
    return decode_raw(model.encoder.forward(e, images).out, model.cfg.layout);
}

Var beta_loss(const SceneVars& pred, const SceneVars& truth) {
    auto mse = [](const Var& a, const Var& b) { return ops::mean(ops::square(ops::sub(a, b))); };
    Var total = mse(pred.x, truth.x);
    total = ops::add(total, mse(pred.s, truth.s));
    total = ops::add(total, mse(pred.a, truth.a));
    total = ops::add(total, mse(pred.axis, truth.axis));
    total = ops::add(total, mse(pred.phi, truth.phi));
    total = ops::add(total, mse(pred.psi, truth.psi));
    return ops::scale(total, 1.0f / 6.0f);
}

Var perceptual_distance(const Model& model, Binding& d, const Var& a, const Var& b) {
    Var fa = model.disc.forward(d, a).features;
    Var fb = model.disc.forward(d, b).features;
    return ops::mean(ops::square(ops::sub(fa, fb)));
}

InversionLoss inversion_loss(const Model& model, Binding& e, Binding& g, Binding& d, const Var& real, const Var& fake,
                             const SceneVars& beta_fake, float lambda) {
    auto mse = [](const Var& a, const Var& b) { return ops::mean(ops::square(ops::sub(a, b))); };
    InversionLoss out;
    Var recon_real = generate(model, g, encode(model, e, real));
    SceneVars pred_fake = encode(model, e, fake);
    Var recon_fake = generate(model, g, pred_fake);
    out.perc_real = perceptual_distance(model, d, real, recon_real);
    out.perc_fake = perceptual_distance(model, d, fake, recon_fake);
    out.l2_real = mse(real, recon_real);
    out.l2_fake = mse(fake, recon_fake);
    out.beta = beta_loss(pred_fake, beta_fake);
    out.total = ops::add(ops::add(ops::add(out.perc_real, out.perc_fake), ops::add(out.l2_real, out.l2_fake)),
                         ops::scale(out.beta, lambda));
    return out;
}

void train_encoder(Model& model, std::int64_t steps, std::ostream* log) {
    const TrainConfig& tc = model.train;
    const std::int64_t half = std::max(1, tc.batch / 2);
    Adam adam(model.e_params, AdamConfig{tc.encoder_lr, tc.beta1, tc.beta2, 1e-8f});
    ToySceneGenerator data(tc.seed ^ 0x5bd1e995ull, model.cfg.decoder.out_res);
    std::mt19937_64 rng(tc.seed ^ 0xe17c0de5ull);
    for (std::int64_t step = 0; step < steps; ++step) {
        const auto t0 = std::chrono::steady_clock::now();
        Tensor real = data.batch(half);
        Tape tape;
        Binding e(tape, model.e_params, true);
        Binding g(tape, model.g_ema, false);
        Binding d(tape, model.d_params, false);
        SceneVars truth = model.layout.forward(g, tape.constant(Tensor::randn({half, model.cfg.layout.d_noise}, rng)));
        Var fake = ops::detach(generate(model, g, truth));
        InversionLoss loss = inversion_loss(model, e, g, d, tape.constant(real), fake, truth, tc.encoder_beta_weight);
        const double value = loss.total.value().item();
        if (!std::isfinite(value)) throw StateError("non-finite encoder loss at step " + std::to_string(step));
        tape.backward(loss.total);
        adam.step(model.e_params, e.grads());
        ++model.encoder_step;
        if (log) {
            char buf[128];
            const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
            std::snprintf(buf, sizeof(buf), "%lld\t%.9g\t%.9g\t%.3f", static_cast<long long>(step), value,
                          static_cast<double>(loss.beta.value().item()), ms);
            *log << buf << '\n';
        }
    }
}

double rmse(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) throw DomainError("rmse: shapes differ");
    double acc = 0.0;
    for (std::int64_t i = 0; i < a.numel(); ++i) {
        const double d = static_cast<double>(a[i]) - b[i];
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(std::max<std::int64_t>(1, a.numel())));
}

namespace {

// Free parameters of one scene during refinement.
enum Slot { kX, kS, kLogA, kTheta, kPhi, kPsi };

ParamSet scene_params(const SceneVars& v) {
    ParamSet p;
    p.add("x", v.x.value());
    p.add("s", v.s.value());
    Tensor log_a = v.a.value();
    for (auto& a : log_a.values()) a = std::log(a);
    p.add("log_a", std::move(log_a));
    p.add("theta", v.theta.value());
    p.add("phi", v.phi.value());
    p.add("psi", v.psi.value());
    return p;
}

SceneVars scene_from_params(Binding& b) {
    SceneVars v;
    v.x = b[kX];
    v.s = b[kS];
    v.a = ops::exp(b[kLogA]);
    v.theta = b[kTheta];
    v.phi = ops::l2_normalize(b[kPhi], 2);
    v.psi = ops::l2_normalize(b[kPsi], 2);
    return v;
}

}  // namespace

InversionResult invert(const Model& model, const Tensor& image, const InvertOptions& options) {
    const std::int64_t res = model.cfg.decoder.out_res;
    if (image.shape() != Shape{3, res, res}) {
        throw DomainError("invert: image must be [3," + std::to_string(res) + "," + std::to_string(res) + "], got " +
                          shape_string(image.shape()));
    }
    check_finite(image, "invert image");
    if (options.refine_steps < 0) throw DomainError("invert: refine_steps must be >= 0");
    const Tensor target = image.reshaped({1, 3, res, res});

    ParamSet params;
    BlobScene encoded;
    {
        Tape tape;
        Binding e(tape, model.e_params, false);
        SceneVars v = encode(model, e, tape.constant(target));
        params = scene_params(v);
        encoded = to_scenes(v, model.cfg.c).front();
    }
    InversionResult result;
    Adam adam(params, AdamConfig{options.lr, 0.9f, 0.999f, 1e-8f});
    double best = std::numeric_limits<double>::infinity();
    ParamSet best_params = params;
    int best_step = 0;
    for (int step = 0; step <= options.refine_steps; ++step) {
        Tape tape;
        Binding p(tape, params, true);
        Binding g(tape, model.g_ema, false);
        Binding d(tape, model.d_params, false);
        Var recon = generate(model, g, scene_from_params(p));
        const double err = rmse(recon.value(), target);
        Var img = tape.constant(target);
        Var loss = ops::add(perceptual_distance(model, d, img, recon), ops::mean(ops::square(ops::sub(recon, img))));
        const double value = loss.value().item();
        if (!std::isfinite(value) || !std::isfinite(err)) {
            result.non_finite = true;
            if (step == 0) result.initial_rmse = err;
            break;
        }
        if (step == 0) result.initial_rmse = err;
        if (err < best) {
            best = err;
            best_params = params;
            best_step = step;
        }
        if (step > 0) result.trace.push_back(best);
        if (step == options.refine_steps) break;
        tape.backward(loss);
        adam.step(params, p.grads());
    }
    if (best_step == 0) {
        result.scene = std::move(encoded);
    } else {
        Tape tape;
        Binding b(tape, best_params, false);
        result.scene = to_scenes(scene_from_params(b), model.cfg.c).front();
    }
    result.rmse = best;
    return result;
}

}  // namespace blobgan
