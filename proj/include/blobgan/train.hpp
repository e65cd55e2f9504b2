#pragma once

// Adversarial training on procedural toy scenes.

#include <functional>
#include <ostream>
#include <random>
#include <string>

#include "blobgan/model.hpp"
#include "blobgan/toy_data.hpp"

namespace blobgan {

// softplus(-d_real) + softplus(d_fake), batch means.
Var nonsat_d_loss(const Var& d_real, const Var& d_fake);
// softplus(-d_fake), batch mean.
Var nonsat_g_loss(const Var& d_fake);

// Adds uniform noise to x, s and theta (generated scenes only).
SceneVars jitter_vars(const SceneVars& scene, std::mt19937_64& rng, const JitterRanges& ranges);

struct StepLog {
    std::int64_t step = 0;
    double loss_d = 0, loss_g = 0, r1 = 0, grad_norm_g = 0, grad_norm_d = 0, wall_ms = 0;

    // Tab-separated: step, loss_D, loss_G, r1, grad_norm_G, grad_norm_D, wall_ms.
    std::string line() const;
};

class Trainer {
public:
    explicit Trainer(Model& model);

    // One discriminator update followed by one generator update. Throws
    // StateError on a non-finite loss (parameters are left untouched).
    StepLog step();

    // Runs model.train.steps - model.step further steps. `checkpoint` is
    // called at the configured cadence and, with diagnostic = true, before
    // rethrowing a non-finite-loss error.
    using CheckpointFn = std::function<void(const Model&, bool diagnostic)>;
    void run(std::ostream* log, const CheckpointFn& checkpoint = {});

private:
    Model& model_;
    Adam opt_g_;
    Adam opt_d_;
    ToySceneGenerator data_;
    std::mt19937_64 rng_;
};

}  // namespace blobgan
