#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "blobgan/edit.hpp"
#include "blobgan/errors.hpp"
#include "blobgan/model.hpp"
#include "gradcheck.hpp"

namespace {

using namespace blobgan;
using blobgan::testing::random_scene;
using blobgan::testing::tiny_model_config;

constexpr float kPi = std::numbers::pi_v<float>;

EditCommand move(std::size_t i, float dx, float dy) { return {.kind = EditKind::kMove, .target = i, .dx = {dx, dy}}; }

Tensor alphas(const BlobScene& s, std::int64_t res = 16) { return composite(scene_opacity(s, res, res)); }

TEST(Edit, ZeroMoveIsIdentity) {
    std::mt19937_64 rng(1);
    BlobScene s = random_scene(rng, 4, 3, 3);
    EXPECT_EQ(apply_edit(s, move(2, 0.0f, 0.0f)), s);
    EXPECT_EQ(apply_edits(s, {}), s);
}

TEST(Edit, EachKindTouchesOnlyItsField) {
    std::mt19937_64 rng(2);
    BlobScene s = random_scene(rng, 3, 3, 2);
    BlobScene m = apply_edit(s, move(1, 0.1f, -0.2f));
    EXPECT_FLOAT_EQ(m.blobs[1].x[0], s.blobs[1].x[0] + 0.1f);
    EXPECT_FLOAT_EQ(m.blobs[1].x[1], s.blobs[1].x[1] - 0.2f);
    m.blobs[1].x = s.blobs[1].x;
    EXPECT_EQ(m, s);

    BlobScene r = apply_edit(s, {.kind = EditKind::kResize, .target = 0, .ds = 0.5f});
    EXPECT_FLOAT_EQ(r.blobs[0].s, s.blobs[0].s + 0.5f);
    BlobScene t = apply_edit(s, {.kind = EditKind::kRotate, .target = 2, .dtheta = 2.0f * kPi});
    EXPECT_NEAR(std::remainder(t.blobs[2].theta - s.blobs[2].theta, 2.0 * std::numbers::pi), 0.0, 1e-5);
    BlobScene p = apply_edit(s, {.kind = EditKind::kRestructure, .target = 0, .phi = {1, 2, 3}});
    EXPECT_EQ(p.blobs[0].phi, (std::vector<float>{1, 2, 3}));
    BlobScene st = apply_edit(s, {.kind = EditKind::kRestyle, .target = 1, .psi = {4, 5}, .psi_bg = {6, 7}});
    EXPECT_EQ(st.blobs[1].psi, (std::vector<float>{4, 5}));
    EXPECT_EQ(*st.blobs[1].psi_border, (std::vector<float>{6, 7}));
    BlobScene cleared = apply_edit(st, {.kind = EditKind::kRestyle, .target = 1, .psi = {4, 5}});
    EXPECT_FALSE(cleared.blobs[1].psi_border.has_value());
}

TEST(Edit, RemovedBlobAlphaIsBoundedBySigmoidOfSize) {
    std::mt19937_64 rng(3);
    const float bound = 1.0f / (1.0f + std::exp(10.0f));
    for (int trial = 0; trial < 20; ++trial) {
        BlobScene s = random_scene(rng, 5, 2, 2);
        const std::size_t i = static_cast<std::size_t>(trial % 5);
        Tensor a = alphas(apply_edit(s, {.kind = EditKind::kRemove, .target = i}));
        const std::int64_t hw = 16 * 16;
        for (std::int64_t p = 0; p < hw; ++p) {
            ASSERT_LE(a[static_cast<std::int64_t>(i + 1) * hw + p], bound * 1.0001f);
        }
    }
}

TEST(Edit, CloneThenRemoveRestoresAlphas) {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        BlobScene s = random_scene(rng, 4, 2, 2);
        const std::size_t i = static_cast<std::size_t>(trial % 4);
        BlobScene cloned = apply_edit(s, {.kind = EditKind::kClone, .target = i, .new_x = {0.3f, 0.7f}});
        ASSERT_EQ(cloned.k(), 5u);
        EXPECT_EQ(cloned.blobs[i + 1].x, (std::array<float, 2>{0.3f, 0.7f}));
        BlobScene gone = apply_edit(cloned, {.kind = EditKind::kRemove, .target = i + 1});
        Tensor want = alphas(s), got = alphas(gone);
        const std::int64_t hw = 16 * 16;
        for (std::int64_t row = 0, src = 0; row < 6; ++row) {
            if (row == static_cast<std::int64_t>(i) + 2) continue;  // the clone
            for (std::int64_t p = 0; p < hw; ++p) ASSERT_NEAR(got[row * hw + p], want[src * hw + p], 1e-4);
            ++src;
        }
    }
}

TEST(Edit, CloneInsertionIndex) {
    std::mt19937_64 rng(5);
    BlobScene s = random_scene(rng, 3, 2, 2);
    BlobScene bottom = apply_edit(s, {.kind = EditKind::kClone, .target = 2, .insert_at = 0});
    EXPECT_EQ(bottom.blobs[0].phi, s.blobs[2].phi);
    BlobScene top = apply_edit(s, {.kind = EditKind::kClone, .target = 0, .insert_at = 3});
    EXPECT_EQ(top.blobs[3].psi, s.blobs[0].psi);
    EXPECT_THROW(apply_edit(s, {.kind = EditKind::kClone, .target = 0, .insert_at = 4}), DomainError);
}

TEST(Edit, NegatedEditsInvert) {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<float> u(-0.3f, 0.3f);
    for (int trial = 0; trial < 50; ++trial) {
        BlobScene s = random_scene(rng, 3, 2, 2);
        const std::size_t i = static_cast<std::size_t>(trial % 3);
        const float dx = u(rng), dy = u(rng), ds = u(rng), dt = u(rng);
        BlobScene back = apply_edits(s, {move(i, dx, dy), move(i, -dx, -dy),
                                         {.kind = EditKind::kResize, .target = i, .ds = ds},
                                         {.kind = EditKind::kResize, .target = i, .ds = -ds},
                                         {.kind = EditKind::kRotate, .target = i, .dtheta = dt},
                                         {.kind = EditKind::kRotate, .target = i, .dtheta = -dt}});
        // Float addition rounds, so the round trip holds to a few ulps.
        EXPECT_NEAR(back.blobs[i].x[0], s.blobs[i].x[0], 1e-6);
        EXPECT_NEAR(back.blobs[i].x[1], s.blobs[i].x[1], 1e-6);
        EXPECT_NEAR(back.blobs[i].s, s.blobs[i].s, 1e-6);
        EXPECT_NEAR(std::remainder(back.blobs[i].theta - s.blobs[i].theta, 2.0 * std::numbers::pi), 0.0, 1e-6);
    }
}

TEST(Edit, DyadicStepsInvertExactly) {
    std::mt19937_64 rng(7);
    BlobScene s = random_scene(rng, 2, 2, 2);
    s.blobs[0].x = {0.5f, 0.25f};
    s.blobs[0].s = 1.5f;
    EXPECT_EQ(apply_edits(s, {move(0, 0.125f, -0.0625f), move(0, -0.125f, 0.0625f),
                              {.kind = EditKind::kResize, .target = 0, .ds = 0.75f},
                              {.kind = EditKind::kResize, .target = 0, .ds = -0.75f}}),
              s);
}

TEST(Edit, RejectsBadCommands) {
    std::mt19937_64 rng(8);
    BlobScene s = random_scene(rng, 2, 3, 2);
    EXPECT_THROW(apply_edit(s, move(2, 0, 0)), DomainError);
    EXPECT_THROW(apply_edit(s, {.kind = EditKind::kRestyle, .target = 0, .psi = {1}}), DomainError);
    EXPECT_THROW(apply_edit(s, {.kind = EditKind::kRestyle, .target = 0, .psi = {1, 2}, .psi_bg = {1}}), DomainError);
    EXPECT_THROW(apply_edit(s, {.kind = EditKind::kRestructure, .target = 0, .phi = {1, 2}}), DomainError);
    EXPECT_THROW(apply_edit(s, move(0, INFINITY, 0)), DomainError);
}

TEST(Edit, KindNamesRoundTrip) {
    for (int k = 0; k < 7; ++k) {
        auto kind = static_cast<EditKind>(k);
        EXPECT_EQ(parse_edit_kind(edit_kind_name(kind)), kind);
    }
    EXPECT_FALSE(parse_edit_kind("teleport").has_value());
    for (int a = 0; a < 6; ++a) {
        auto attr = static_cast<Attribute>(a);
        EXPECT_EQ(parse_attribute(attribute_name(attr)), attr);
    }
}

// One blob at the centre pixel of an 8x8 grid.
BlobScene centred_scene(float s) {
    BlobScene sc;
    Blob b;
    b.x = {0.5f, 0.5f};
    b.s = s;
    b.phi = {0.0f};
    b.psi = {1.0f, -1.0f};
    sc.blobs = {b};
    sc.phi_bg = {0.0f};
    sc.psi_bg = {0.25f, 0.5f};
    return sc;
}

float style_at_centre(const BlobScene& sc, std::int64_t ch) {
    Tensor grid = splat(sc, alphas(sc, 8), Features::kStyle);
    return grid[ch * 64 + 4 * 8 + 4];
}

TEST(StyleSwap, EvenSplitBlendsTowardTargetBackground) {
    // alpha_blob = alpha_bg = 0.5 at the centre: 0.5 psi_i + 0.5 psi_bg(target).
    BlobScene src = centred_scene(0.0f);
    BlobScene tgt = centred_scene(0.0f);
    tgt.blobs[0].psi = {2.0f, 3.0f};
    tgt.psi_bg = {-4.0f, 8.0f};
    BlobScene out = style_swap(src, tgt, 0);
    EXPECT_EQ(out.blobs[0].psi, tgt.blobs[0].psi);
    EXPECT_EQ(out.blobs[0].x, src.blobs[0].x);
    EXPECT_NEAR(style_at_centre(out, 0), 0.5f * 2.0f + 0.5f * -4.0f, 1e-6);
    EXPECT_NEAR(style_at_centre(out, 1), 0.5f * 3.0f + 0.5f * 8.0f, 1e-6);
}

TEST(StyleSwap, OpaqueCoreTakesTheNewStyle) {
    BlobScene src = centred_scene(30.0f);
    BlobScene tgt = centred_scene(0.0f);
    tgt.blobs[0].psi = {2.0f, 3.0f};
    tgt.psi_bg = {-4.0f, 8.0f};
    BlobScene out = style_swap(src, tgt, 0);
    EXPECT_NEAR(style_at_centre(out, 0), 2.0f, 1e-6);
    EXPECT_NEAR(style_at_centre(out, 1), 3.0f, 1e-6);
}

TEST(StyleSwap, SwappingWithItselfKeepsTheStyleGrid) {
    std::mt19937_64 rng(9);
    BlobScene s = random_scene(rng, 4, 2, 3);
    BlobScene out = style_swap(s, s, 1);
    Tensor a = alphas(s);
    EXPECT_LT(max_abs_diff(splat(out, a, Features::kStyle), splat(s, a, Features::kStyle)), 1e-6f);
    EXPECT_EQ(splat(out, a, Features::kStructure), splat(s, a, Features::kStructure));
}

class Autocomplete : public ::testing::Test {
protected:
    Model model = Model::create(tiny_model_config(), 11);

    BlobScene sample(std::uint64_t seed) { return sample_scenes(model, model.g_ema, {seed}).at(0); }
    AutocompleteOptions seeded(std::uint64_t seed, int iters = 300) {
        AutocompleteOptions o;
        o.iters = iters;
        o.z_init = noise_for_seed(model.cfg.layout, seed);
        return o;
    }
};

TEST_F(Autocomplete, OwnConstraintsGiveZeroLossAtTheStart) {
    BlobScene s = sample(5);
    ConstraintSet cs = constraints_from_scene(
        s, {{0, Attribute::kPhi}, {0, Attribute::kPsi}, {1, Attribute::kX}, {2, Attribute::kTheta}, {2, Attribute::kA}});
    AutocompleteResult r = autocomplete(model.layout, model.g_ema, cs, model.cfg.c, seeded(5, 10));
    EXPECT_EQ(r.initial_loss, 0.0);
    EXPECT_EQ(r.trace.at(0), 0.0);
    EXPECT_EQ(r.final_loss, 0.0);
    EXPECT_EQ(r.scene, s);
}

TEST_F(Autocomplete, EmptyConstraintsReturnTheSeededSample) {
    AutocompleteResult r = autocomplete(model.layout, model.g_ema, {}, model.cfg.c, seeded(6));
    EXPECT_EQ(r.scene, sample(6));
    EXPECT_EQ(r.final_loss, 0.0);
    EXPECT_TRUE(r.trace.empty());
}

TEST_F(Autocomplete, LowersLossAndSetsConstrainedValuesExactly) {
    BlobScene target = sample(100);
    ConstraintSet cs = constraints_from_scene(target, {{0, Attribute::kPhi}, {0, Attribute::kPsi}});
    const auto before = model.g_ema.checksum();
    AutocompleteResult r = autocomplete(model.layout, model.g_ema, cs, model.cfg.c, seeded(7));
    EXPECT_EQ(model.g_ema.checksum(), before);
    EXPECT_GT(r.initial_loss, 0.0);
    EXPECT_LT(r.final_loss, 0.1 * r.initial_loss);
    EXPECT_EQ(r.scene.phi_bg, target.phi_bg);
    EXPECT_EQ(r.scene.psi_bg, target.psi_bg);
    EXPECT_EQ(r.trace.size(), 300u);
}

TEST_F(Autocomplete, SeedDeterminism) {
    BlobScene target = sample(100);
    ConstraintSet cs = constraints_from_scene(target, {{1, Attribute::kX}});
    auto a = autocomplete(model.layout, model.g_ema, cs, model.cfg.c, seeded(3, 40));
    auto b = autocomplete(model.layout, model.g_ema, cs, model.cfg.c, seeded(3, 40));
    EXPECT_EQ(a.trace, b.trace);
    EXPECT_EQ(a.scene, b.scene);
}

TEST_F(Autocomplete, RejectsBadConstraintSets) {
    const LayoutConfig& lc = model.cfg.layout;
    EXPECT_THROW(validate_constraints({{0, Attribute::kX, {0.5f, 0.5f}}}, lc), DomainError);
    EXPECT_THROW(validate_constraints({{3, Attribute::kS, {1.0f}}}, lc), DomainError);
    EXPECT_THROW(validate_constraints({{1, Attribute::kS, {1.0f}}, {1, Attribute::kS, {2.0f}}}, lc), DomainError);
    EXPECT_THROW(validate_constraints({{1, Attribute::kPhi, {1.0f}}}, lc), DomainError);
    EXPECT_THROW(validate_constraints({{1, Attribute::kA, {-1.0f}}}, lc), DomainError);
    EXPECT_THROW(validate_constraints({{1, Attribute::kS, {NAN}}}, lc), DomainError);
    EXPECT_NO_THROW(validate_constraints({{2, Attribute::kTheta, {1.0f}}}, lc));
}

TEST(ConstraintLoss, AngleTargetsWrap) {
    Tape tape;
    SceneVars v;
    v.x = tape.constant(Tensor({1, 1, 2}, 0.5f));
    v.s = tape.constant(Tensor({1, 1}, 0.0f));
    v.a = tape.constant(Tensor({1, 1}, 1.0f));
    v.theta = tape.constant(Tensor({1, 1}, 3.0f));
    v.phi = tape.constant(Tensor({1, 2, 1}, 0.0f));
    v.psi = tape.constant(Tensor({1, 2, 1}, 0.0f));
    const float wrapped = 3.0f - 2.0f * kPi;
    EXPECT_NEAR(constraint_loss(v, {{1, Attribute::kTheta, {wrapped}}}).value().item(), 0.0, 1e-10);
    // Per-attribute means, then the mean over constraints.
    const float got = constraint_loss(v, {{1, Attribute::kX, {0.0f, 1.5f}}, {1, Attribute::kS, {2.0f}}}).value().item();
    EXPECT_NEAR(got, 0.5 * (0.5 * (0.25 + 1.0) + 4.0), 1e-6);
}

TEST(Consistency, IdenticalImagesAreFullyConsistent) {
    ToySceneGenerator gen(3);
    Tensor img = gen.next().image;
    ConsistencyReport r = edit_consistency(img, img);
    EXPECT_EQ(r.unchanged, 1.0);
    for (double v : r.iou) EXPECT_EQ(v, 1.0);
}

TEST(Consistency, MatchesLabelSetOracle) {
    ToySceneGenerator gen(4);
    for (int trial = 0; trial < 10; ++trial) {
        Tensor a = gen.next().image, b = gen.next().image;
        ConsistencyReport r = edit_consistency(a, b);
        Tensor la = detect_labels(a), lb = detect_labels(b);
        std::int64_t same = 0;
        for (std::int64_t p = 0; p < la.numel(); ++p) same += la[p] == lb[p];
        EXPECT_DOUBLE_EQ(r.unchanged, static_cast<double>(same) / static_cast<double>(la.numel()));
        for (int cat = 0; cat < kToyCategories; ++cat) {
            std::set<std::int64_t> in_a, in_b, both, either;
            for (std::int64_t p = 0; p < la.numel(); ++p) {
                if (la[p] == cat + 1) in_a.insert(p);
                if (lb[p] == cat + 1) in_b.insert(p);
            }
            std::set_intersection(in_a.begin(), in_a.end(), in_b.begin(), in_b.end(), std::inserter(both, both.end()));
            std::set_union(in_a.begin(), in_a.end(), in_b.begin(), in_b.end(), std::inserter(either, either.end()));
            EXPECT_EQ(r.present[static_cast<std::size_t>(cat)], !either.empty());
            const double want = either.empty() ? 1.0 : static_cast<double>(both.size()) / either.size();
            EXPECT_DOUBLE_EQ(r.iou[static_cast<std::size_t>(cat)], want);
        }
    }
}

}  // namespace
