#include "blobgan/blob.hpp"

#include <cmath>
#include <numbers>

#include "blobgan/errors.hpp"
#include "blobgan/ops.hpp"

namespace blobgan {

void validate_scene(const BlobScene& scene) {
    if (!(scene.c > 0.0f)) throw DomainError("scene sharpness c must be positive");
    for (std::size_t i = 0; i < scene.blobs.size(); ++i) {
        const Blob& b = scene.blobs[i];
        const std::string where = "blob " + std::to_string(i);
        if (!(b.a > 0.0f)) throw DomainError(where + ": aspect ratio must be positive");
        if (b.phi.size() != scene.d_in()) throw DomainError(where + ": phi has wrong dimension");
        if (b.psi.size() != scene.d_style()) throw DomainError(where + ": psi has wrong dimension");
        if (b.psi_border && b.psi_border->size() != scene.d_style()) {
            throw DomainError(where + ": psi_border has wrong dimension");
        }
    }
}

float wrap_angle(float theta) {
    constexpr double kPi = std::numbers::pi;
    double t = std::remainder(static_cast<double>(theta), 2.0 * kPi);
    return static_cast<float>(t);
}

std::array<double, 4> blob_covariance(double a, double theta, double c) {
    if (!(a > 0.0) || !(c > 0.0)) throw DomainError("blob_covariance needs a > 0 and c > 0");
    const double cs = std::cos(theta);
    const double sn = std::sin(theta);
    const double l0 = c * a;
    const double l1 = c / a;
    // R = [[cs, -sn], [sn, cs]]
    return {cs * cs * l0 + sn * sn * l1, cs * sn * (l0 - l1), cs * sn * (l0 - l1), sn * sn * l0 + cs * cs * l1};
}

namespace {

struct SceneVars {
    Var x, theta, a, s;
};

SceneVars scene_geometry(Tape& tape, const BlobScene& scene) {
    const auto k = static_cast<std::int64_t>(scene.k());
    Tensor x({1, k, 2}), theta({1, k}), a({1, k}), s({1, k});
    for (std::int64_t i = 0; i < k; ++i) {
        const Blob& b = scene.blobs[static_cast<std::size_t>(i)];
        x[2 * i] = b.x[0];
        x[2 * i + 1] = b.x[1];
        theta[i] = b.theta;
        a[i] = b.a;
        s[i] = b.s;
    }
    return {tape.constant(std::move(x)), tape.constant(std::move(theta)), tape.constant(std::move(a)),
            tape.constant(std::move(s))};
}

void check_grid(std::int64_t height, std::int64_t width) {
    if (height <= 0 || width <= 0) throw DomainError("grid extents must be positive");
}

}  // namespace

Tensor mahalanobis_grid(const Blob& blob, std::int64_t height, std::int64_t width, float c) {
    check_grid(height, width);
    BlobScene scene;
    scene.blobs.push_back(Blob{blob.x, blob.s, blob.a, blob.theta, {}, {}, std::nullopt});
    Tape tape;
    SceneVars v = scene_geometry(tape, scene);
    return geom::mahalanobis(v.x, v.theta, v.a, c, height, width).value().reshaped({height, width});
}

Tensor opacity_map(const Blob& blob, std::int64_t height, std::int64_t width, float c) {
    check_grid(height, width);
    BlobScene scene;
    scene.blobs.push_back(Blob{blob.x, blob.s, blob.a, blob.theta, {}, {}, std::nullopt});
    Tape tape;
    SceneVars v = scene_geometry(tape, scene);
    Var d = geom::mahalanobis(v.x, v.theta, v.a, c, height, width);
    return geom::opacity(d, v.s).value().reshaped({height, width});
}

Tensor scene_opacity(const BlobScene& scene, std::int64_t height, std::int64_t width) {
    check_grid(height, width);
    const auto k = static_cast<std::int64_t>(scene.k());
    if (k == 0) return Tensor({0, height, width});
    Tape tape;
    SceneVars v = scene_geometry(tape, scene);
    Var d = geom::mahalanobis(v.x, v.theta, v.a, scene.c, height, width);
    return geom::opacity(d, v.s).value().reshaped({k, height, width});
}

Tensor composite(const Tensor& opacity) {
    if (opacity.rank() != 3) throw DomainError("composite expects [k,H,W] opacities");
    Tape tape;
    Var o = tape.constant(opacity.reshaped({1, opacity.dim(0), opacity.dim(1), opacity.dim(2)}));
    return geom::composite(o).value().reshaped({opacity.dim(0) + 1, opacity.dim(1), opacity.dim(2)});
}

Tensor splat(const BlobScene& scene, const Tensor& alpha, Features which) {
    const bool style = which == Features::kStyle;
    const auto k = static_cast<std::int64_t>(scene.k());
    const std::vector<float>& bg = style ? scene.psi_bg : scene.phi_bg;
    const auto d = static_cast<std::int64_t>(bg.size());
    if (alpha.rank() != 3 || alpha.dim(0) != k + 1) {
        throw DomainError("splat: alpha must be [k+1,H,W] with k=" + std::to_string(k));
    }
    const std::int64_t h = alpha.dim(1);
    const std::int64_t w = alpha.dim(2);
    Tensor feats({1, k + 1, d});
    std::copy(bg.begin(), bg.end(), feats.data());
    bool any_border = false;
    for (std::int64_t i = 0; i < k; ++i) {
        const Blob& b = scene.blobs[static_cast<std::size_t>(i)];
        const std::vector<float>& f = style ? b.psi : b.phi;
        if (static_cast<std::int64_t>(f.size()) != d) {
            throw DomainError("splat: blob " + std::to_string(i) + " feature dimension " + std::to_string(f.size()) +
                              " != " + std::to_string(d));
        }
        std::copy(f.begin(), f.end(), feats.data() + (i + 1) * d);
        any_border = any_border || (style && b.psi_border.has_value());
    }
    Tape tape;
    Var av = tape.constant(alpha.reshaped({1, k + 1, h, w}));
    Tensor grid = geom::splat(av, tape.constant(std::move(feats))).value().reshaped({d, h, w});
    if (!any_border) return grid;

    // Moves part of the background share to each swapped blob's border
    // style: w_i = alpha_i * min(1, alpha_0 / sum over swapped alpha_j).
    const std::int64_t hw = h * w;
    std::vector<double> denom(static_cast<std::size_t>(hw), 0.0);
    for (std::int64_t i = 0; i < k; ++i) {
        if (!scene.blobs[static_cast<std::size_t>(i)].psi_border) continue;
        for (std::int64_t p = 0; p < hw; ++p) denom[static_cast<std::size_t>(p)] += alpha[(i + 1) * hw + p];
    }
    for (std::int64_t i = 0; i < k; ++i) {
        const auto& border = scene.blobs[static_cast<std::size_t>(i)].psi_border;
        if (!border) continue;
        for (std::int64_t p = 0; p < hw; ++p) {
            const double den = denom[static_cast<std::size_t>(p)];
            if (den <= 0.0) continue;
            const double wgt = alpha[(i + 1) * hw + p] * std::min(1.0, alpha[p] / den);
            for (std::int64_t ch = 0; ch < d; ++ch) {
                grid[ch * hw + p] += static_cast<float>(wgt * ((*border)[static_cast<std::size_t>(ch)] - bg[static_cast<std::size_t>(ch)]));
            }
        }
    }
    return grid;
}

BlobScene jitter(const BlobScene& scene, std::mt19937_64& rng, const JitterRanges& ranges) {
    BlobScene out = scene;
    auto draw = [&rng](float r) {
        if (r == 0.0f) return 0.0f;
        return std::uniform_real_distribution<float>(-r, r)(rng);
    };
    for (Blob& b : out.blobs) {
        b.x[0] += draw(ranges.dx);
        b.x[1] += draw(ranges.dx);
        b.s += draw(ranges.ds);
        b.theta = wrap_angle(b.theta + draw(ranges.dtheta));
    }
    return out;
}

namespace geom {

Var mahalanobis(const Var& x, const Var& theta, const Var& a, float c, std::int64_t height, std::int64_t width) {
    check_grid(height, width);
    if (x.rank() != 3 || x.dim(2) != 2) throw DomainError("mahalanobis: x must be [B,k,2]");
    const std::int64_t batch = x.dim(0);
    const std::int64_t k = x.dim(1);
    if (theta.shape() != Shape{batch, k} || a.shape() != Shape{batch, k}) {
        throw DomainError("mahalanobis: theta and a must be [B,k]");
    }
    if (!(c > 0.0f)) throw DomainError("mahalanobis: c must be positive");
    const std::int64_t hw = height * width;
    std::vector<float> gx(static_cast<std::size_t>(hw)), gy(static_cast<std::size_t>(hw));
    for (std::int64_t h = 0; h < height; ++h) {
        for (std::int64_t w = 0; w < width; ++w) {
            gx[static_cast<std::size_t>(h * width + w)] = static_cast<float>(w) / static_cast<float>(width);
            gy[static_cast<std::size_t>(h * width + w)] = static_cast<float>(h) / static_cast<float>(height);
        }
    }
    Tensor out({batch, k, height, width});
    const float inv_c = 1.0f / c;
    for (std::int64_t bk = 0; bk < batch * k; ++bk) {
        const float cs = std::cos(theta.value()[bk]);
        const float sn = std::sin(theta.value()[bk]);
        const float av = a.value()[bk];
        const float x0 = x.value()[2 * bk];
        const float x1 = x.value()[2 * bk + 1];
        float* d = out.data() + bk * hw;
        for (std::int64_t p = 0; p < hw; ++p) {
            const float dx = gx[static_cast<std::size_t>(p)] - x0;
            const float dy = gy[static_cast<std::size_t>(p)] - x1;
            const float u0 = cs * dx + sn * dy;
            const float u1 = cs * dy - sn * dx;
            d[p] = (u0 * u0 / av + av * u1 * u1) * inv_c;
        }
    }
    return x.tape().record(std::move(out), {x, theta, a}, [x, theta, a, inv_c, hw, gx, gy](Tape& tape, const Tensor&,
                                                                                          const Tensor& g) {
        const std::int64_t n = theta.numel();
        float* gxs = x.requires_grad() ? tape.grad_slot(x).data() : nullptr;
        float* gth = theta.requires_grad() ? tape.grad_slot(theta).data() : nullptr;
        float* ga = a.requires_grad() ? tape.grad_slot(a).data() : nullptr;
        for (std::int64_t bk = 0; bk < n; ++bk) {
            const float cs = std::cos(theta.value()[bk]);
            const float sn = std::sin(theta.value()[bk]);
            const float av = a.value()[bk];
            const float x0 = x.value()[2 * bk];
            const float x1 = x.value()[2 * bk + 1];
            const float* gp = g.data() + bk * hw;
            double acc_x0 = 0.0, acc_x1 = 0.0, acc_th = 0.0, acc_a = 0.0;
            for (std::int64_t p = 0; p < hw; ++p) {
                const float dx = gx[static_cast<std::size_t>(p)] - x0;
                const float dy = gy[static_cast<std::size_t>(p)] - x1;
                const float u0 = cs * dx + sn * dy;
                const float u1 = cs * dy - sn * dx;
                const float gu0 = gp[p] * 2.0f * u0 / av;  // dL/du0
                const float gu1 = gp[p] * 2.0f * av * u1;  // dL/du1
                // du0/dx0 = -cs, du1/dx0 = sn; du0/dx1 = -sn, du1/dx1 = -cs
                acc_x0 += -cs * gu0 + sn * gu1;
                acc_x1 += -sn * gu0 - cs * gu1;
                // du0/dtheta = u1, du1/dtheta = -u0
                acc_th += gu0 * u1 - gu1 * u0;
                acc_a += gp[p] * (u1 * u1 - u0 * u0 / (av * av));
            }
            if (gxs) {
                gxs[2 * bk] += static_cast<float>(acc_x0 * inv_c);
                gxs[2 * bk + 1] += static_cast<float>(acc_x1 * inv_c);
            }
            if (gth) gth[bk] += static_cast<float>(acc_th * inv_c);
            if (ga) ga[bk] += static_cast<float>(acc_a * inv_c);
        }
    });
}

Var opacity(const Var& d, const Var& s) {
    if (d.rank() != 4 || s.shape() != Shape{d.dim(0), d.dim(1)}) {
        throw DomainError("opacity: expected d [B,k,H,W] and s [B,k]");
    }
    return ops::sigmoid(ops::sub(ops::reshape(s, {d.dim(0), d.dim(1), 1, 1}), d));
}

Var composite(const Var& opacity) {
    if (opacity.rank() != 4) throw DomainError("composite: expected [B,k,H,W]");
    const std::int64_t batch = opacity.dim(0);
    const std::int64_t k = opacity.dim(1);
    const std::int64_t hw = opacity.dim(2) * opacity.dim(3);
    Tensor out({batch, k + 1, opacity.dim(2), opacity.dim(3)});
    std::vector<float> trans(static_cast<std::size_t>(hw));
    for (std::int64_t b = 0; b < batch; ++b) {
        const float* o = opacity.value().data() + b * k * hw;
        float* al = out.data() + b * (k + 1) * hw;
        std::fill(trans.begin(), trans.end(), 1.0f);
        for (std::int64_t i = k - 1; i >= 0; --i) {
            for (std::int64_t p = 0; p < hw; ++p) {
                al[(i + 1) * hw + p] = o[i * hw + p] * trans[static_cast<std::size_t>(p)];
                trans[static_cast<std::size_t>(p)] *= 1.0f - o[i * hw + p];
            }
        }
        std::copy(trans.begin(), trans.end(), al);
    }
    return opacity.tape().record(std::move(out), {opacity}, [opacity, batch, k, hw](Tape& tape, const Tensor&,
                                                                                    const Tensor& g) {
        float* go_all = tape.grad_slot(opacity).data();
        // T_m: transmittance above blob m; S_m: running background-side sum.
        std::vector<float> trans(static_cast<std::size_t>(k * hw));
        std::vector<float> run(static_cast<std::size_t>(hw));
        for (std::int64_t b = 0; b < batch; ++b) {
            const float* o = opacity.value().data() + b * k * hw;
            const float* ga = g.data() + b * (k + 1) * hw;
            float* go = go_all + b * k * hw;
            for (std::int64_t p = 0; p < hw; ++p) trans[static_cast<std::size_t>((k - 1) * hw + p)] = 1.0f;
            for (std::int64_t i = k - 1; i > 0; --i) {
                for (std::int64_t p = 0; p < hw; ++p) {
                    trans[static_cast<std::size_t>((i - 1) * hw + p)] =
                        trans[static_cast<std::size_t>(i * hw + p)] * (1.0f - o[i * hw + p]);
                }
            }
            std::copy_n(ga, hw, run.begin());
            for (std::int64_t i = 0; i < k; ++i) {
                for (std::int64_t p = 0; p < hw; ++p) {
                    const float gi = ga[(i + 1) * hw + p];
                    const float oi = o[i * hw + p];
                    float& s = run[static_cast<std::size_t>(p)];
                    go[i * hw + p] += trans[static_cast<std::size_t>(i * hw + p)] * (gi - s);
                    s = s * (1.0f - oi) + gi * oi;
                }
            }
        }
    });
}

Var splat(const Var& alpha, const Var& feats) {
    if (alpha.rank() != 4 || feats.rank() != 3 || feats.dim(0) != alpha.dim(0) || feats.dim(1) != alpha.dim(1)) {
        throw DomainError("splat: alpha " + shape_string(alpha.shape()) + " and features " +
                          shape_string(feats.shape()) + " disagree");
    }
    const std::int64_t batch = alpha.dim(0);
    const std::int64_t h = alpha.dim(2);
    const std::int64_t w = alpha.dim(3);
    Var flat = ops::reshape(alpha, {batch, alpha.dim(1), h * w});
    Var grid = ops::bmm(feats, flat, true, false);
    return ops::reshape(grid, {batch, feats.dim(2), h, w});
}

}  // namespace geom
}  // namespace blobgan
