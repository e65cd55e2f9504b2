#include "blobgan/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "blobgan/errors.hpp"
#include "blobgan/ops.hpp"

namespace blobgan {

Var nonsat_d_loss(const Var& d_real, const Var& d_fake) {
    return ops::add(ops::mean(ops::softplus(ops::neg(d_real))), ops::mean(ops::softplus(d_fake)));
}

Var nonsat_g_loss(const Var& d_fake) { return ops::mean(ops::softplus(ops::neg(d_fake))); }

SceneVars jitter_vars(const SceneVars& scene, std::mt19937_64& rng, const JitterRanges& r) {
    Tape& tape = scene.x.tape();
    auto noise = [&](const Shape& s, float range) { return tape.constant(Tensor::uniform(s, rng, -range, range)); };
    SceneVars out = scene;
    out.x = ops::add(scene.x, noise(scene.x.shape(), r.dx));
    out.s = ops::add(scene.s, noise(scene.s.shape(), r.ds));
    out.theta = ops::add(scene.theta, noise(scene.theta.shape(), r.dtheta));
    return out;
}

std::string StepLog::line() const {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%lld\t%.9g\t%.9g\t%.9g\t%.9g\t%.9g\t%.3f", static_cast<long long>(step), loss_d,
                  loss_g, r1, grad_norm_g, grad_norm_d, wall_ms);
    return buf;
}

namespace {

AdamConfig adam_config(const TrainConfig& t, float lr) { return AdamConfig{lr, t.beta1, t.beta2, 1e-8f}; }

// Sets s to -10 for blobs dropped with probability p.
SceneVars drop_blobs(const SceneVars& scene, std::mt19937_64& rng, float p) {
    Tape& tape = scene.s.tape();
    Tensor keep(scene.s.shape()), fill(scene.s.shape());
    std::bernoulli_distribution drop(p);
    for (std::int64_t i = 0; i < keep.numel(); ++i) {
        const bool d = drop(rng);
        keep[i] = d ? 0.0f : 1.0f;
        fill[i] = d ? -10.0f : 0.0f;
    }
    SceneVars out = scene;
    out.s = ops::add(ops::mul(scene.s, tape.constant(keep)), tape.constant(fill));
    return out;
}

// Permutes psi of a random subset of blobs across the batch.
SceneVars mix_styles(const SceneVars& scene, std::mt19937_64& rng, float p) {
    const std::int64_t batch = scene.psi.dim(0);
    const std::int64_t rows = scene.psi.dim(1);
    const std::int64_t d = scene.psi.dim(2);
    if (batch < 2 || std::uniform_real_distribution<float>(0, 1)(rng) >= p) return scene;
    const std::int64_t k = rows - 1;
    const auto count = std::uniform_int_distribution<std::int64_t>(0, k)(rng);
    std::vector<std::int64_t> blobs(static_cast<std::size_t>(k));
    std::iota(blobs.begin(), blobs.end(), 1);
    std::shuffle(blobs.begin(), blobs.end(), rng);
    std::vector<bool> swapped(static_cast<std::size_t>(rows), false);
    for (std::int64_t c = 0; c < count; ++c) swapped[static_cast<std::size_t>(blobs[static_cast<std::size_t>(c)])] = true;
    const std::int64_t n = batch * rows;
    Tensor perm({n, n});
    for (std::int64_t b = 0; b < batch; ++b)
        for (std::int64_t i = 0; i < rows; ++i) {
            const std::int64_t src_b = swapped[static_cast<std::size_t>(i)] ? (b + 1) % batch : b;
            perm[(b * rows + i) * n + src_b * rows + i] = 1.0f;
        }
    SceneVars out = scene;
    Var flat = ops::reshape(scene.psi, {n, d});
    out.psi = ops::reshape(ops::matmul(scene.psi.tape().constant(std::move(perm)), flat), {batch, rows, d});
    return out;
}

bool finite(double v) { return std::isfinite(v); }

}  // namespace

Trainer::Trainer(Model& model)
    : model_(model),
      opt_g_(model.g_params, adam_config(model.train, model.train.lr)),
      opt_d_(model.d_params, adam_config(model.train, model.train.lr)),
      data_(model.train.seed ^ 0x9e3779b97f4a7c15ull, model.cfg.decoder.out_res),
      rng_(model.train.seed) {}

StepLog Trainer::step() {
    const auto t0 = std::chrono::steady_clock::now();
    const TrainConfig& tc = model_.train;
    const LayoutConfig& lc = model_.cfg.layout;
    const std::int64_t batch = tc.batch;
    StepLog log;
    log.step = model_.step;

    auto fake_scene = [&](Binding& g) {
        Var z = g.tape().constant(Tensor::randn({batch, lc.d_noise}, rng_));
        SceneVars sv = model_.layout.forward(g, z);
        if (tc.style_mix_prob > 0.0f) sv = mix_styles(sv, rng_, tc.style_mix_prob);
        if (tc.blob_dropout_prob > 0.0f) sv = drop_blobs(sv, rng_, tc.blob_dropout_prob);
        return jitter_vars(sv, rng_, tc.jitter);
    };

    // Discriminator.
    Tensor real = data_.batch(batch);
    std::vector<Tensor> grads_d;
    {
        Tape tape;
        Binding g(tape, model_.g_params, false);
        Binding d(tape, model_.d_params, true);
        Var fake = generate(model_, g, fake_scene(g));
        Var loss = nonsat_d_loss(model_.disc.forward(d, tape.constant(real)).out, model_.disc.forward(d, fake).out);
        log.loss_d = loss.value().item();
        if (!finite(log.loss_d)) throw StateError("non-finite discriminator loss at step " + std::to_string(log.step));
        tape.backward(loss);
        grads_d = d.grads();
    }
    if (tc.r1_period > 0 && model_.step % tc.r1_period == 0) {
        Tape tape;
        Binding d(tape, model_.d_params, true);
        Var r1 = r1_penalty(d, model_.disc, tape.constant(real), tc.r1_gamma);
        log.r1 = r1.value().item();
        if (!finite(log.r1)) throw StateError("non-finite R1 penalty at step " + std::to_string(log.step));
        tape.backward(ops::scale(r1, static_cast<float>(tc.r1_period)));
        std::vector<Tensor> extra = d.grads();
        for (std::size_t i = 0; i < grads_d.size(); ++i)
            for (std::int64_t j = 0; j < grads_d[i].numel(); ++j) grads_d[i][j] += extra[i][j];
    }

    // Generator.
    std::vector<Tensor> grads_g;
    {
        Tape tape;
        Binding g(tape, model_.g_params, true);
        Binding d(tape, model_.d_params, false);
        Var fake = generate(model_, g, fake_scene(g));
        Var loss = nonsat_g_loss(model_.disc.forward(d, fake).out);
        log.loss_g = loss.value().item();
        if (!finite(log.loss_g)) throw StateError("non-finite generator loss at step " + std::to_string(log.step));
        tape.backward(loss);
        grads_g = g.grads();
    }
    log.grad_norm_d = grad_norm(grads_d);
    log.grad_norm_g = grad_norm(grads_g);
    opt_d_.step(model_.d_params, grads_d);
    opt_g_.step(model_.g_params, grads_g);
    ema_update(model_.g_ema, model_.g_params, tc.ema_decay);
    ++model_.step;
    log.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return log;
}

void Trainer::run(std::ostream* log, const CheckpointFn& checkpoint) {
    const TrainConfig& tc = model_.train;
    while (model_.step < tc.steps) {
        StepLog entry;
        try {
            entry = step();
        } catch (const StateError&) {
            if (checkpoint) checkpoint(model_, true);
            throw;
        }
        if (log) *log << entry.line() << '\n';
        if (checkpoint && tc.checkpoint_every > 0 && model_.step % tc.checkpoint_every == 0 && model_.step < tc.steps) {
            checkpoint(model_, false);
        }
    }
    if (log) log->flush();
    if (checkpoint) checkpoint(model_, false);
}

}  // namespace blobgan
