#pragma once

// Encoder E (image -> layout vector) and per-image refinement of the blob
// parameters against a frozen generator.

#include <ostream>
#include <vector>

#include "blobgan/model.hpp"

namespace blobgan {

// decode_raw(E(images)).
SceneVars encode(const Model& model, Binding& e, const Var& images);

// Mean over attributes (x, s, a, rotation axis, phi, psi) of each
// attribute's mean squared error; the angle enters as its unit axis.
Var beta_loss(const SceneVars& pred, const SceneVars& truth);

// Mean squared distance of frozen-discriminator penultimate features.
Var perceptual_distance(const Model& model, Binding& d, const Var& a, const Var& b);

struct InversionLoss {
    Var total;
    Var perc_real, perc_fake, l2_real, l2_fake, beta;
};

// Perc(real, G(E(real))) + Perc(fake, G(E(fake))) + L2(real) + L2(fake)
// + lambda * beta_loss(E(fake), beta_fake). g and d are frozen bindings.
InversionLoss inversion_loss(const Model& model, Binding& e, Binding& g, Binding& d, const Var& real, const Var& fake,
                             const SceneVars& beta_fake, float lambda);

// Trains E for `steps` further steps on half toy, half generated batches
// (EMA generator), advancing model.encoder_step. Logs
// "step<TAB>loss<TAB>beta<TAB>wall_ms" lines.
void train_encoder(Model& model, std::int64_t steps, std::ostream* log = nullptr);

struct InvertOptions {
    int refine_steps = 200;
    float lr = 0.01f;
};

struct InversionResult {
    BlobScene scene;                 // best scene found
    double initial_rmse = 0.0;       // raw encoder prediction
    double rmse = 0.0;               // best-so-far at the end
    std::vector<double> trace;       // best-so-far RMSE after each refinement step
    bool non_finite = false;         // refinement hit a non-finite loss and stopped
};

// image [3,R,R] in [-1,1].
InversionResult invert(const Model& model, const Tensor& image, const InvertOptions& options = {});

// Root mean squared difference of two equally shaped tensors.
double rmse(const Tensor& a, const Tensor& b);

}  // namespace blobgan
