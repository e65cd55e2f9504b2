#pragma once

// Blob-level scene edits, cross-scene style swaps, constrained layout
// sampling (auto-complete) and an edit-consistency measure on toy renders.

#include <array>
#include <optional>
#include <string_view>
#include <vector>

#include "blobgan/blob.hpp"
#include "blobgan/layout.hpp"
#include "blobgan/toy_data.hpp"

namespace blobgan {

inline constexpr float kRemovedSize = -10.0f;

enum class EditKind { kMove, kRemove, kResize, kRotate, kClone, kRestyle, kRestructure };

std::string_view edit_kind_name(EditKind kind);
std::optional<EditKind> parse_edit_kind(std::string_view name);

struct EditCommand {
    EditKind kind = EditKind::kMove;
    std::size_t target = 0;             // blob index
    std::array<float, 2> dx{0.0f, 0.0f};  // move
    float s = kRemovedSize;             // remove: size override
    float ds = 0.0f;                    // resize
    float dtheta = 0.0f;                // rotate
    std::array<float, 2> new_x{0.5f, 0.5f};  // clone
    std::optional<std::size_t> insert_at;    // clone; default target + 1 (just above)
    std::vector<float> psi;     // restyle
    std::vector<float> psi_bg;  // restyle: background of the scene psi came from; empty = none
    std::vector<float> phi;     // restructure

    bool operator==(const EditCommand&) const = default;
};

// Pure. Throws DomainError for a bad index or payload size.
BlobScene apply_edit(const BlobScene& scene, const EditCommand& cmd);
BlobScene apply_edits(const BlobScene& scene, const std::vector<EditCommand>& cmds);

// src with blob i restyled from tgt: psi from tgt.blobs[i], border blended
// toward tgt's background. Geometry is untouched.
BlobScene style_swap(const BlobScene& src, const BlobScene& tgt, std::size_t i);

enum class Attribute { kX, kS, kA, kTheta, kPhi, kPsi };

std::string_view attribute_name(Attribute attr);
std::optional<Attribute> parse_attribute(std::string_view name);

// index 0 is the background (phi and psi only); blob i is index i + 1.
struct Constraint {
    std::size_t index = 0;
    Attribute attribute = Attribute::kPhi;
    std::vector<float> value;
};
using ConstraintSet = std::vector<Constraint>;

// Throws DomainError for duplicates, bad indices or value sizes.
void validate_constraints(const ConstraintSet& constraints, const LayoutConfig& cfg);

// Constraints taking every listed attribute of `scene` as target.
ConstraintSet constraints_from_scene(const BlobScene& scene, const std::vector<std::pair<std::size_t, Attribute>>& which);

struct AutocompleteOptions {
    int iters = 300;
    float lr = 0.01f;
    float beta1 = 0.9f;
    float beta2 = 0.9f;  // short memory: gradients shrink steadily near the target
    std::uint64_t seed = 0;      // draws z_init when z_init is empty
    Tensor z_init;               // [d_noise]
    int stall_window = 50;
};

struct AutocompleteResult {
    BlobScene scene;
    double initial_loss = 0.0;
    double final_loss = 0.0;     // constraint loss at the returned z
    std::vector<double> trace;   // loss before each step
    bool stalled = false;        // loss failed to decrease for stall_window consecutive steps
    Tensor z;
};

// Mean over constraints of the per-attribute mean squared error. Angle
// differences are wrapped to [-pi, pi].
Var constraint_loss(const SceneVars& scene, const ConstraintSet& constraints);

// Optimizes the layout noise with Adam (network frozen) so that the decoded
// attributes match the constraints, then sets constrained attributes exactly.
AutocompleteResult autocomplete(const LayoutNet& net, const ParamSet& params, const ConstraintSet& constraints,
                                float c, const AutocompleteOptions& options = {});

struct ConsistencyReport {
    std::array<double, kToyCategories> iou{};
    std::array<bool, kToyCategories> present{};  // class seen in either image
    double unchanged = 0.0;  // fraction of pixels keeping their label
};

// Compares toy-detector label maps of two renders [3,H,W].
ConsistencyReport edit_consistency(const Tensor& before, const Tensor& after, float threshold = 0.25f);

}  // namespace blobgan
