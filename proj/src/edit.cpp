#include "blobgan/edit.hpp"

#include <cmath>
#include <set>

#include "blobgan/errors.hpp"
#include "blobgan/ops.hpp"

namespace blobgan {
namespace {

constexpr std::array<std::string_view, 7> kEditNames{"move", "remove", "resize", "rotate", "clone", "restyle",
                                                     "restructure"};
constexpr std::array<std::string_view, 6> kAttrNames{"x", "s", "a", "theta", "phi", "psi"};

void check_target(const BlobScene& scene, std::size_t target) {
    if (target >= scene.k()) {
        throw DomainError("edit target " + std::to_string(target) + " out of range for " + std::to_string(scene.k()) +
                          " blobs");
    }
}

void check_size(const std::vector<float>& v, std::size_t want, const char* what) {
    if (v.size() != want) {
        throw DomainError(std::string(what) + " has " + std::to_string(v.size()) + " entries, expected " +
                          std::to_string(want));
    }
}

}  // namespace

std::string_view edit_kind_name(EditKind kind) { return kEditNames.at(static_cast<std::size_t>(kind)); }

std::optional<EditKind> parse_edit_kind(std::string_view name) {
    for (std::size_t i = 0; i < kEditNames.size(); ++i)
        if (kEditNames[i] == name) return static_cast<EditKind>(i);
    return std::nullopt;
}

std::string_view attribute_name(Attribute attr) { return kAttrNames.at(static_cast<std::size_t>(attr)); }

std::optional<Attribute> parse_attribute(std::string_view name) {
    for (std::size_t i = 0; i < kAttrNames.size(); ++i)
        if (kAttrNames[i] == name) return static_cast<Attribute>(i);
    return std::nullopt;
}

BlobScene apply_edit(const BlobScene& scene, const EditCommand& cmd) {
    check_target(scene, cmd.target);
    BlobScene out = scene;
    Blob& b = out.blobs[cmd.target];
    switch (cmd.kind) {
        case EditKind::kMove:
            b.x[0] += cmd.dx[0];
            b.x[1] += cmd.dx[1];
            break;
        case EditKind::kRemove:
            b.s = cmd.s;
            break;
        case EditKind::kResize:
            b.s += cmd.ds;
            break;
        case EditKind::kRotate:
            b.theta = wrap_angle(b.theta + cmd.dtheta);
            break;
        case EditKind::kClone: {
            const std::size_t at = cmd.insert_at.value_or(cmd.target + 1);
            if (at > scene.k()) throw DomainError("clone insertion index " + std::to_string(at) + " out of range");
            Blob copy = scene.blobs[cmd.target];
            copy.x = cmd.new_x;
            out.blobs.insert(out.blobs.begin() + static_cast<std::ptrdiff_t>(at), std::move(copy));
            break;
        }
        case EditKind::kRestyle:
            check_size(cmd.psi, scene.d_style(), "restyle psi");
            b.psi = cmd.psi;
            if (cmd.psi_bg.empty()) {
                b.psi_border.reset();
            } else {
                check_size(cmd.psi_bg, scene.d_style(), "restyle psi_bg");
                b.psi_border = cmd.psi_bg;
            }
            break;
        case EditKind::kRestructure:
            check_size(cmd.phi, scene.d_in(), "restructure phi");
            b.phi = cmd.phi;
            break;
    }
    if (!std::isfinite(b.x[0]) || !std::isfinite(b.x[1]) || !std::isfinite(b.s) || !std::isfinite(b.theta)) {
        throw DomainError("edit produced a non-finite blob parameter");
    }
    return out;
}

BlobScene apply_edits(const BlobScene& scene, const std::vector<EditCommand>& cmds) {
    BlobScene out = scene;
    for (const auto& cmd : cmds) out = apply_edit(out, cmd);
    return out;
}

BlobScene style_swap(const BlobScene& src, const BlobScene& tgt, std::size_t i) {
    check_target(src, i);
    check_target(tgt, i);
    if (src.d_style() != tgt.d_style()) throw DomainError("style_swap: style dimensions differ");
    BlobScene out = src;
    out.blobs[i].psi = tgt.blobs[i].psi;
    out.blobs[i].psi_border = tgt.psi_bg;
    return out;
}

void validate_constraints(const ConstraintSet& constraints, const LayoutConfig& cfg) {
    std::set<std::pair<std::size_t, Attribute>> seen;
    for (const Constraint& c : constraints) {
        const std::string where = "constraint on index " + std::to_string(c.index) + " " +
                                  std::string(attribute_name(c.attribute));
        if (c.index > static_cast<std::size_t>(cfg.k)) throw DomainError(where + ": index out of range");
        if (c.index == 0 && c.attribute != Attribute::kPhi && c.attribute != Attribute::kPsi) {
            throw DomainError(where + ": the background only has phi and psi");
        }
        if (!seen.insert({c.index, c.attribute}).second) throw DomainError(where + ": duplicate");
        std::size_t want = 1;
        if (c.attribute == Attribute::kX) want = 2;
        if (c.attribute == Attribute::kPhi) want = static_cast<std::size_t>(cfg.d_in);
        if (c.attribute == Attribute::kPsi) want = static_cast<std::size_t>(cfg.d_style);
        check_size(c.value, want, where.c_str());
        for (float v : c.value)
            if (!std::isfinite(v)) throw DomainError(where + ": non-finite target");
        if (c.attribute == Attribute::kA && !(c.value[0] > 0.0f)) throw DomainError(where + ": aspect must be positive");
    }
}

ConstraintSet constraints_from_scene(const BlobScene& scene,
                                     const std::vector<std::pair<std::size_t, Attribute>>& which) {
    ConstraintSet out;
    for (const auto& [index, attr] : which) {
        Constraint c{index, attr, {}};
        if (index == 0) {
            if (attr == Attribute::kPhi) c.value = scene.phi_bg;
            else if (attr == Attribute::kPsi) c.value = scene.psi_bg;
            else throw DomainError("the background only has phi and psi");
        } else {
            if (index > scene.k()) throw DomainError("constraint index out of range");
            const Blob& b = scene.blobs[index - 1];
            switch (attr) {
                case Attribute::kX: c.value = {b.x[0], b.x[1]}; break;
                case Attribute::kS: c.value = {b.s}; break;
                case Attribute::kA: c.value = {b.a}; break;
                case Attribute::kTheta: c.value = {b.theta}; break;
                case Attribute::kPhi: c.value = b.phi; break;
                case Attribute::kPsi: c.value = b.psi; break;
            }
        }
        out.push_back(std::move(c));
    }
    return out;
}

namespace {

// The constrained attribute of sample 0 as a flat Var.
Var select(const SceneVars& v, const Constraint& c) {
    const auto i = static_cast<std::int64_t>(c.index);
    switch (c.attribute) {
        case Attribute::kX: return ops::reshape(ops::narrow(ops::narrow(v.x, 0, 0, 1), 1, i - 1, 1), {2});
        case Attribute::kS: return ops::reshape(ops::narrow(ops::narrow(v.s, 0, 0, 1), 1, i - 1, 1), {1});
        case Attribute::kA: return ops::reshape(ops::narrow(ops::narrow(v.a, 0, 0, 1), 1, i - 1, 1), {1});
        case Attribute::kTheta: return ops::reshape(ops::narrow(ops::narrow(v.theta, 0, 0, 1), 1, i - 1, 1), {1});
        case Attribute::kPhi: return ops::reshape(ops::narrow(ops::narrow(v.phi, 0, 0, 1), 1, i, 1), {v.phi.dim(2)});
        case Attribute::kPsi: return ops::reshape(ops::narrow(ops::narrow(v.psi, 0, 0, 1), 1, i, 1), {v.psi.dim(2)});
    }
    throw DomainError("unknown attribute");
}

}  // namespace

Var constraint_loss(const SceneVars& scene, const ConstraintSet& constraints) {
    Tape& tape = scene.x.tape();
    if (constraints.empty()) return tape.constant(Tensor::scalar(0.0f));
    Var total;
    bool first = true;
    for (const Constraint& c : constraints) {
        Var got = select(scene, c);
        Tensor target({static_cast<std::int64_t>(c.value.size())}, c.value);
        Var diff = ops::sub(got, tape.constant(target));
        if (c.attribute == Attribute::kTheta) {
            // Shift by the multiple of 2*pi that wraps the difference.
            const float d = diff.value()[0];
            diff = ops::add_scalar(diff, wrap_angle(d) - d);
        }
        Var term = ops::mean(ops::square(diff));
        total = first ? term : ops::add(total, term);
        first = false;
    }
    return ops::scale(total, 1.0f / static_cast<float>(constraints.size()));
}

AutocompleteResult autocomplete(const LayoutNet& net, const ParamSet& params, const ConstraintSet& constraints,
                                float c, const AutocompleteOptions& options) {
    const LayoutConfig& cfg = net.config();
    if (options.iters < 0) throw DomainError("autocomplete: iters must be >= 0");
    validate_constraints(constraints, cfg);
    ParamSet z_set;
    if (options.z_init.numel() > 0) {
        if (options.z_init.numel() != cfg.d_noise) throw DomainError("autocomplete: z_init has the wrong size");
        z_set.add("z", options.z_init.reshaped({1, cfg.d_noise}));
    } else {
        std::mt19937_64 rng(options.seed);
        z_set.add("z", Tensor::randn({1, cfg.d_noise}, rng));
    }
    Adam adam(z_set, AdamConfig{options.lr, options.beta1, options.beta2, 1e-8f});
    AutocompleteResult result;
    auto evaluate = [&](bool with_grad, std::vector<Tensor>* grads) {
        Tape tape;
        Binding frozen(tape, params, false);
        Binding zb(tape, z_set, with_grad);
        SceneVars v = net.forward(frozen, zb[0]);
        Var loss = constraint_loss(v, constraints);
        if (with_grad && !constraints.empty()) {
            tape.backward(loss);
            *grads = zb.grads();
        }
        return std::pair{static_cast<double>(loss.value().item()), to_scenes(v, c).front()};
    };
    int rising = 0;
    double prev = 0.0;
    for (int it = 0; it < options.iters && !constraints.empty(); ++it) {
        std::vector<Tensor> grads;
        const double loss = evaluate(true, &grads).first;
        if (!std::isfinite(loss)) break;
        result.trace.push_back(loss);
        if (it > 0) {
            rising = loss >= prev ? rising + 1 : 0;
            if (rising >= options.stall_window) result.stalled = true;
        }
        prev = loss;
        adam.step(z_set, grads);
    }
    auto [final_loss, scene] = evaluate(false, nullptr);
    result.initial_loss = result.trace.empty() ? final_loss : result.trace.front();
    result.final_loss = final_loss;
    for (const Constraint& k : constraints) {
        if (k.index == 0) {
            (k.attribute == Attribute::kPhi ? scene.phi_bg : scene.psi_bg) = k.value;
            continue;
        }
        Blob& b = scene.blobs[k.index - 1];
        switch (k.attribute) {
            case Attribute::kX: b.x = {k.value[0], k.value[1]}; break;
            case Attribute::kS: b.s = k.value[0]; break;
            case Attribute::kA: b.a = k.value[0]; break;
            case Attribute::kTheta: b.theta = wrap_angle(k.value[0]); break;
            case Attribute::kPhi: b.phi = k.value; break;
            case Attribute::kPsi: b.psi = k.value; break;
        }
    }
    result.scene = std::move(scene);
    result.z = z_set.value(0).reshaped({cfg.d_noise});
    return result;
}

ConsistencyReport edit_consistency(const Tensor& before, const Tensor& after, float threshold) {
    if (before.shape() != after.shape()) throw DomainError("edit_consistency: image shapes differ");
    const Tensor lb = detect_labels(before, threshold);
    const Tensor la = detect_labels(after, threshold);
    ConsistencyReport r;
    std::array<std::int64_t, kToyCategories> inter{}, uni{};
    std::int64_t same = 0;
    for (std::int64_t p = 0; p < lb.numel(); ++p) {
        const int b = static_cast<int>(lb[p]);
        const int a = static_cast<int>(la[p]);
        same += a == b;
        for (int cat = 0; cat < kToyCategories; ++cat) {
            const bool in_b = b == cat + 1, in_a = a == cat + 1;
            inter[static_cast<std::size_t>(cat)] += in_b && in_a;
            uni[static_cast<std::size_t>(cat)] += in_b || in_a;
        }
    }
    for (std::size_t cat = 0; cat < kToyCategories; ++cat) {
        r.present[cat] = uni[cat] > 0;
        r.iou[cat] = uni[cat] > 0 ? static_cast<double>(inter[cat]) / static_cast<double>(uni[cat]) : 1.0;
    }
    r.unchanged = lb.numel() ? static_cast<double>(same) / static_cast<double>(lb.numel()) : 1.0;
    return r;
}

}  // namespace blobgan
