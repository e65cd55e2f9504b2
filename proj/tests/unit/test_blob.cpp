#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "blobgan/blob.hpp"
#include "blobgan/errors.hpp"
#include "blobgan/ops.hpp"
#include "gradcheck.hpp"

namespace {

using namespace blobgan;
using blobgan::testing::check_gradients;
using blobgan::testing::random_scene;

constexpr double kPi = std::numbers::pi;

TEST(Covariance, IsotropicCase) {
    auto m = blob_covariance(1.0, 0.0, 0.02);
    EXPECT_NEAR(m[0], 0.02, 1e-15);
    EXPECT_NEAR(m[1], 0.0, 1e-15);
    EXPECT_NEAR(m[3], 0.02, 1e-15);
}

TEST(Covariance, AxisAlignedAndRotated) {
    auto m = blob_covariance(2.0, 0.0, 0.02);
    EXPECT_NEAR(m[0], 0.04, 1e-12);
    EXPECT_NEAR(m[3], 0.01, 1e-12);
    auto r = blob_covariance(2.0, kPi / 2, 0.02);
    EXPECT_NEAR(r[0], 0.01, 1e-12);
    EXPECT_NEAR(r[1], 0.0, 1e-12);
    EXPECT_NEAR(r[3], 0.04, 1e-12);
}

TEST(Covariance, DeterminantIsCSquaredAndRejectsBadInput) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.1, 5.0);
    for (int i = 0; i < 50; ++i) {
        const double a = u(rng), th = u(rng), c = u(rng) * 0.01;
        auto m = blob_covariance(a, th, c);
        EXPECT_NEAR(m[0] * m[3] - m[1] * m[2], c * c, 1e-12 * (1 + c * c));
        EXPECT_DOUBLE_EQ(m[1], m[2]);
    }
    EXPECT_THROW(blob_covariance(0.0, 0.0, 0.02), DomainError);
    EXPECT_THROW(blob_covariance(1.0, 0.0, -1.0), DomainError);
}

// Quadratic form with the explicitly inverted covariance matrix.
double mahalanobis_oracle(const Blob& b, double px, double py, double c) {
    auto m = blob_covariance(b.a, b.theta, c);
    const double det = m[0] * m[3] - m[1] * m[2];
    const double i00 = m[3] / det, i01 = -m[1] / det, i11 = m[0] / det;
    const double dx = px - b.x[0], dy = py - b.x[1];
    return dx * dx * i00 + 2 * dx * dy * i01 + dy * dy * i11;
}

TEST(Mahalanobis, OffsetExample) {
    Blob b;
    b.x = {0.4f, 0.5f};
    // pixel (h=8, w=8) of 16x16 is (0.5, 0.5): offset (0.1, 0)
    Tensor d = mahalanobis_grid(b, 16, 16, 0.02f);
    EXPECT_NEAR(d.at({8, 8}), 0.5f, 1e-5f);
    b.x = {0.5f, 0.5f};
    EXPECT_EQ(mahalanobis_grid(b, 16, 16, 0.02f).at({8, 8}), 0.0f);
}

TEST(Mahalanobis, MatchesInverseCovarianceOracle) {
    std::mt19937_64 rng(4);
    for (int t = 0; t < 20; ++t) {
        Blob b = random_scene(rng, 1, 1, 1).blobs[0];
        Tensor d = mahalanobis_grid(b, 8, 12, 0.02f);
        for (int h = 0; h < 8; ++h)
            for (int w = 0; w < 12; ++w) {
                const double want = mahalanobis_oracle(b, w / 12.0, h / 8.0, 0.02);
                ASSERT_NEAR(d.at({h, w}), want, 1e-4 * (1 + want));
                ASSERT_GE(d.at({h, w}), 0.0f);
            }
    }
}

TEST(Mahalanobis, RotationInvariance) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-0.3, 0.3);
    for (int t = 0; t < 50; ++t) {
        Blob b;
        b.a = 1.7f;
        b.x = {0.5f, 0.5f};
        const double rx = u(rng), ry = u(rng), th = u(rng) * 10;
        const double d0 = mahalanobis_oracle(b, 0.5 + rx, 0.5 + ry, 0.02);
        b.theta = static_cast<float>(th);
        const double qx = std::cos(th) * rx - std::sin(th) * ry;
        const double qy = std::sin(th) * rx + std::cos(th) * ry;
        EXPECT_NEAR(mahalanobis_oracle(b, 0.5 + qx, 0.5 + qy, 0.02), d0, 1e-6 * (1 + d0));
    }
}

TEST(Mahalanobis, EmptyGridIsDomainError) {
    EXPECT_THROW(mahalanobis_grid(Blob{}, 0, 4, 0.02f), DomainError);
}

TEST(Opacity, Examples) {
    Blob b;
    b.x = {0.5f, 0.5f};
    EXPECT_NEAR(opacity_map(b, 16, 16, 0.02f).at({8, 8}), 0.5f, 1e-7f);
    b.s = 2.0f;
    EXPECT_NEAR(opacity_map(b, 16, 16, 0.02f).at({8, 8}), 1.0 / (1.0 + std::exp(-2.0)), 1e-6);
    b.s = -10.0f;
    Tensor off = opacity_map(b, 16, 16, 0.02f);
    for (float v : off.values()) EXPECT_LE(v, 1.0 / (1.0 + std::exp(10.0)) + 1e-9);
}

TEST(Opacity, MonotoneInDistanceAndSize) {
    Blob b;
    b.x = {0.0f, 0.0f};
    Tensor o = opacity_map(b, 1, 16, 0.02f);
    for (int w = 1; w < 16; ++w) EXPECT_LE(o.at({0, w}), o.at({0, w - 1}));
    b.s = 1.0f;
    Tensor o2 = opacity_map(b, 1, 16, 0.02f);
    for (int w = 0; w < 16; ++w) EXPECT_GE(o2.at({0, w}), o.at({0, w}));
}

TEST(Composite, HandExamples) {
    Tensor one = composite(Tensor({1, 1, 1}, {0.7f}));
    EXPECT_NEAR(one[1], 0.7f, 1e-7f);
    EXPECT_NEAR(one[0], 0.3f, 1e-7f);
    Tensor two = composite(Tensor({2, 1, 1}, {0.5f, 0.5f}));
    EXPECT_NEAR(two[2], 0.5f, 1e-7f);
    EXPECT_NEAR(two[1], 0.25f, 1e-7f);
    EXPECT_NEAR(two[0], 0.25f, 1e-7f);
    Tensor occ = composite(Tensor({3, 1, 1}, {0.3f, 0.9f, 1.0f}));
    EXPECT_EQ(occ[3], 1.0f);
    EXPECT_EQ(occ[0], 0.0f);
    EXPECT_EQ(occ[1], 0.0f);
    EXPECT_EQ(occ[2], 0.0f);
}

// alpha_i = o_i * prod_{j>i} (1 - o_j), evaluated term by term.
Tensor composite_oracle(const Tensor& o) {
    const auto k = o.dim(0), hw = o.dim(1) * o.dim(2);
    Tensor out({k + 1, o.dim(1), o.dim(2)});
    for (std::int64_t p = 0; p < hw; ++p) {
        for (std::int64_t i = 0; i <= k; ++i) {
            double v = i == 0 ? 1.0 : o[(i - 1) * hw + p];
            for (std::int64_t j = i + 1; j <= k; ++j) v *= 1.0 - o[(j - 1) * hw + p];
            out[i * hw + p] = static_cast<float>(v);
        }
    }
    return out;
}

TEST(Composite, MatchesProductOracleAndPartitionOfUnity) {
    std::mt19937_64 rng(6);
    for (int t = 0; t < 100; ++t) {
        const int k = 1 + t % 8;
        Tensor o = Tensor::uniform({k, 4, 5}, rng, 0.0f, 1.0f);
        Tensor al = composite(o);
        EXPECT_LT(max_abs_diff(al, composite_oracle(o)), 1e-6f);
        for (std::int64_t p = 0; p < 20; ++p) {
            double s = 0;
            for (int i = 0; i <= k; ++i) s += al[i * 20 + p];
            ASSERT_NEAR(s, 1.0, 1e-6);
            for (int i = 1; i <= k; ++i) {
                ASSERT_GE(al[i * 20 + p], 0.0f);
                ASSERT_LE(al[i * 20 + p], o[(i - 1) * 20 + p] + 1e-7f);
            }
        }
    }
}

TEST(Composite, OcclusionMonotonicity) {
    std::mt19937_64 rng(7);
    for (int t = 0; t < 50; ++t) {
        Tensor o = Tensor::uniform({5, 3, 3}, rng, 0.0f, 1.0f);
        Tensor before = composite(o);
        const int j = 2 + t % 3;
        for (std::int64_t p = 0; p < 9; ++p) o[j * 9 + p] = std::min(1.0f, o[j * 9 + p] + 0.2f);
        Tensor after = composite(o);
        for (int i = 0; i <= j; ++i)  // alpha index i is blob i-1, below blob j
            for (std::int64_t p = 0; p < 9; ++p) ASSERT_LE(after[i * 9 + p], before[i * 9 + p] + 1e-7f);
    }
}

Tensor splat_loop_oracle(const BlobScene& scene, const Tensor& alpha, bool style) {
    const auto d = static_cast<std::int64_t>(style ? scene.d_style() : scene.d_in());
    const auto h = alpha.dim(1), w = alpha.dim(2);
    Tensor out({d, h, w});
    for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t x = 0; x < w; ++x)
            for (std::int64_t c = 0; c < d; ++c) {
                double acc = alpha.at({0, y, x}) * (style ? scene.psi_bg : scene.phi_bg)[c];
                for (std::size_t i = 0; i < scene.k(); ++i) {
                    const auto& f = style ? scene.blobs[i].psi : scene.blobs[i].phi;
                    acc += alpha.at({static_cast<std::int64_t>(i) + 1, y, x}) * f[c];
                }
                out.at({c, y, x}) = static_cast<float>(acc);
            }
    return out;
}

TEST(Splat, MatchesLoopOracle) {
    std::mt19937_64 rng(8);
    for (int t = 0; t < 20; ++t) {
        BlobScene scene = random_scene(rng, 3, 4, 5);
        Tensor al = composite(scene_opacity(scene, 8, 8));
        EXPECT_LT(max_abs_diff(splat(scene, al, Features::kStructure), splat_loop_oracle(scene, al, false)), 1e-6f);
        EXPECT_LT(max_abs_diff(splat(scene, al, Features::kStyle), splat_loop_oracle(scene, al, true)), 1e-6f);
    }
}

TEST(Splat, TrivialCasesAndErrors) {
    std::mt19937_64 rng(9);
    BlobScene scene = random_scene(rng, 2, 3, 3);
    Tensor bg_only({3, 2, 2});
    for (int p = 0; p < 4; ++p) bg_only[p] = 1.0f;
    Tensor g = splat(scene, bg_only, Features::kStructure);
    for (int c = 0; c < 3; ++c)
        for (int p = 0; p < 4; ++p) EXPECT_FLOAT_EQ(g[c * 4 + p], scene.phi_bg[c]);
    Tensor top({3, 1, 1}, {0.0f, 0.0f, 1.0f});
    Tensor gt = splat(scene, top, Features::kStructure);
    for (int c = 0; c < 3; ++c) EXPECT_FLOAT_EQ(gt[c], scene.blobs[1].phi[c]);
    scene.blobs[0].phi.push_back(0.0f);
    EXPECT_THROW(splat(scene, top, Features::kStructure), DomainError);
}

TEST(Splat, LinearInFeatures) {
    std::mt19937_64 rng(10);
    BlobScene a = random_scene(rng, 3, 4, 4);
    BlobScene b = a;
    BlobScene sum = a;
    for (std::size_t i = 0; i < 3; ++i)
        for (int c = 0; c < 4; ++c) {
            b.blobs[i].phi[c] = static_cast<float>(i + c) * 0.1f;
            sum.blobs[i].phi[c] = a.blobs[i].phi[c] + 2.0f * b.blobs[i].phi[c];
        }
    for (int c = 0; c < 4; ++c) sum.phi_bg[c] = a.phi_bg[c] + 2.0f * b.phi_bg[c];
    Tensor al = composite(scene_opacity(a, 6, 6));
    Tensor ga = splat(a, al, Features::kStructure);
    Tensor gb = splat(b, al, Features::kStructure);
    Tensor gs = splat(sum, al, Features::kStructure);
    for (std::int64_t i = 0; i < gs.numel(); ++i) EXPECT_NEAR(gs[i], ga[i] + 2.0f * gb[i], 1e-5f);
}

TEST(Jitter, BoundsOnlyTouchesXSTheta) {
    std::mt19937_64 init(7);
    BlobScene scene = random_scene(init, 10, 3, 3);
    std::mt19937_64 r1(7), r2(7);
    BlobScene j1 = jitter(scene, r1);
    BlobScene j2 = jitter(scene, r2);
    EXPECT_EQ(j1, j2);
    for (std::size_t i = 0; i < scene.k(); ++i) {
        const Blob& a = scene.blobs[i];
        const Blob& b = j1.blobs[i];
        EXPECT_LE(std::abs(a.x[0] - b.x[0]), 0.04f + 1e-6f);
        EXPECT_LE(std::abs(a.x[1] - b.x[1]), 0.04f + 1e-6f);
        EXPECT_LE(std::abs(a.s - b.s), 0.5f + 1e-6f);
        EXPECT_LE(std::abs(wrap_angle(a.theta - b.theta)), 0.1f + 1e-6f);
        EXPECT_EQ(a.a, b.a);
        EXPECT_EQ(a.phi, b.phi);
        EXPECT_EQ(a.psi, b.psi);
    }
    std::mt19937_64 r3(7);
    EXPECT_EQ(jitter(scene, r3, JitterRanges{0, 0, 0}), scene);
}

TEST(Opacity, TranslationEquivariance) {
    Blob b;
    b.x = {0.25f, 0.5f};
    b.a = 1.3f;
    b.theta = 0.4f;
    Tensor o = opacity_map(b, 16, 16, 0.02f);
    b.x = {0.25f + 3.0f / 16, 0.5f - 2.0f / 16};
    Tensor shifted = opacity_map(b, 16, 16, 0.02f);
    for (int h = 2; h < 16; ++h)
        for (int w = 0; w < 13; ++w) EXPECT_NEAR(shifted.at({h - 2, w + 3}), o.at({h, w}), 1e-5f);
}

TEST(GeomGradients, AllStagesMatchFiniteDifferences) {
    std::mt19937_64 rng(11);
    for (int t = 0; t < 20; ++t) {
        const int k = 1 + t % 3;
        Tensor x = Tensor::uniform({2, k, 2}, rng, 0.2f, 0.8f);
        Tensor th = Tensor::uniform({2, k}, rng, -3.0f, 3.0f);
        Tensor a = Tensor::uniform({2, k}, rng, 0.5f, 2.0f);
        Tensor s = Tensor::uniform({2, k}, rng, -1.0f, 2.0f);
        auto maha = [](Tape&, const std::vector<Var>& v) { return geom::mahalanobis(v[0], v[1], v[2], 0.5f, 4, 5); };
        EXPECT_GRADS(check_gradients(maha, {x, th, a}, rng));
        auto opac = [](Tape&, const std::vector<Var>& v) {
            return geom::opacity(geom::mahalanobis(v[0], v[1], v[2], 0.5f, 4, 5), v[3]);
        };
        EXPECT_GRADS(check_gradients(opac, {x, th, a, s}, rng));
        auto comp = [](Tape&, const std::vector<Var>& v) { return geom::composite(v[0]); };
        EXPECT_GRADS(check_gradients(comp, {Tensor::uniform({2, k, 3, 3}, rng, 0.05f, 0.95f)}, rng));
        auto spl = [](Tape&, const std::vector<Var>& v) { return geom::splat(v[0], v[1]); };
        EXPECT_GRADS(check_gradients(spl, {Tensor::uniform({2, k + 1, 3, 3}, rng, 0.0f, 1.0f),
                                           Tensor::randn({2, k + 1, 4}, rng)}, rng));
    }
}

}  // namespace
