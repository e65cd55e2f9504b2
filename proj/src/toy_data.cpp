#include "blobgan/toy_data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "blobgan/errors.hpp"

namespace blobgan {

const char* category_name(ToyCategory c) {
    switch (c) {
        case ToyCategory::kBed: return "bed";
        case ToyCategory::kWindow: return "window";
        case ToyCategory::kLamp: return "lamp";
        case ToyCategory::kPlant: return "plant";
    }
    return "?";
}

std::array<float, 3> category_color(ToyCategory c) {
    switch (c) {
        case ToyCategory::kBed: return {0.80f, 0.18f, 0.18f};
        case ToyCategory::kWindow: return {0.55f, 0.78f, 0.98f};
        case ToyCategory::kLamp: return {0.98f, 0.88f, 0.20f};
        case ToyCategory::kPlant: return {0.15f, 0.60f, 0.22f};
    }
    return {0, 0, 0};
}

ToySceneGenerator::ToySceneGenerator(std::uint64_t seed, std::int64_t resolution) : rng_(seed), res_(resolution) {
    if (resolution < 4) throw DomainError("toy scenes need resolution >= 4");
}

namespace {

struct Shape2 {
    bool ellipse;
    float cx, cy, hw, hh;  // center and half extents in [0,1] units

    bool contains(float px, float py) const {
        const float dx = (px - cx) / hw;
        const float dy = (py - cy) / hh;
        if (ellipse) return dx * dx + dy * dy <= 1.0f;
        return std::abs(dx) <= 1.0f && std::abs(dy) <= 1.0f;
    }
};

}  // namespace

ToySample ToySceneGenerator::next() {
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    auto range = [&](float lo, float hi) { return lo + (hi - lo) * u(rng_); };
    const std::int64_t hw = res_ * res_;
    ToySample sample;
    sample.image = Tensor({3, res_, res_});

    // Low-saturation wall (top) to floor (bottom) gradient.
    std::array<float, 3> top{}, bottom{};
    const float wall = range(0.45f, 0.70f);
    const float floor = range(0.35f, 0.60f);
    for (int ch = 0; ch < 3; ++ch) {
        top[ch] = wall + range(-0.04f, 0.04f);
        bottom[ch] = floor + range(-0.04f, 0.04f);
    }
    for (std::int64_t y = 0; y < res_; ++y) {
        const float t = static_cast<float>(y) / static_cast<float>(res_ - 1);
        for (std::int64_t x = 0; x < res_; ++x)
            for (int ch = 0; ch < 3; ++ch) sample.image[ch * hw + y * res_ + x] = (1 - t) * top[ch] + t * bottom[ch];
    }

    std::array<int, kToyCategories> cats{};
    std::iota(cats.begin(), cats.end(), 0);
    std::shuffle(cats.begin(), cats.end(), rng_);
    const int count = std::uniform_int_distribution<int>(2, 4)(rng_);
    std::vector<ToyCategory> chosen;
    for (int i = 0; i < count; ++i) chosen.push_back(static_cast<ToyCategory>(cats[static_cast<std::size_t>(i)]));
    // Paint back to front: windows on the wall first, small items last.
    std::sort(chosen.begin(), chosen.end(), [](ToyCategory a, ToyCategory b) {
        static constexpr int kOrder[] = {1, 0, 3, 2};  // bed, window, lamp, plant
        return kOrder[static_cast<int>(a)] < kOrder[static_cast<int>(b)];
    });

    std::vector<int> owner(static_cast<std::size_t>(hw), -1);
    for (std::size_t oi = 0; oi < chosen.size(); ++oi) {
        Shape2 s{};
        switch (chosen[oi]) {
            case ToyCategory::kBed:
                s = {false, range(0.35f, 0.65f), range(0.68f, 0.80f), range(0.18f, 0.26f), range(0.10f, 0.15f)};
                break;
            case ToyCategory::kWindow:
                s = {false, range(0.25f, 0.75f), range(0.18f, 0.30f), range(0.10f, 0.16f), range(0.08f, 0.13f)};
                break;
            case ToyCategory::kLamp:
                s = {true, range(0.15f, 0.85f), range(0.35f, 0.60f), range(0.05f, 0.08f), range(0.06f, 0.09f)};
                break;
            case ToyCategory::kPlant:
                s = {true, u(rng_) < 0.5f ? range(0.10f, 0.25f) : range(0.75f, 0.90f), range(0.60f, 0.85f),
                     range(0.07f, 0.10f), range(0.10f, 0.14f)};
                break;
        }
        auto color = category_color(chosen[oi]);
        for (auto& c : color) c = std::clamp(c + range(-0.05f, 0.05f), 0.0f, 1.0f);
        for (std::int64_t y = 0; y < res_; ++y)
            for (std::int64_t x = 0; x < res_; ++x) {
                const float px = (static_cast<float>(x) + 0.5f) / static_cast<float>(res_);
                const float py = (static_cast<float>(y) + 0.5f) / static_cast<float>(res_);
                if (!s.contains(px, py)) continue;
                owner[static_cast<std::size_t>(y * res_ + x)] = static_cast<int>(oi);
                for (int ch = 0; ch < 3; ++ch) sample.image[ch * hw + y * res_ + x] = color[ch];
            }
    }
    for (std::size_t oi = 0; oi < chosen.size(); ++oi) {
        ToyObject obj{chosen[oi], Tensor({res_, res_})};
        for (std::int64_t p = 0; p < hw; ++p) obj.mask[p] = owner[static_cast<std::size_t>(p)] == static_cast<int>(oi);
        if (std::any_of(obj.mask.values().begin(), obj.mask.values().end(), [](float v) { return v > 0; })) {
            sample.objects.push_back(std::move(obj));
        }
    }
    for (auto& v : sample.image.values()) v = 2.0f * v - 1.0f;
    return sample;
}

Tensor ToySceneGenerator::batch(std::int64_t n, std::vector<ToySample>* keep) {
    Tensor out({n, 3, res_, res_});
    const std::int64_t per = 3 * res_ * res_;
    for (std::int64_t i = 0; i < n; ++i) {
        ToySample s = next();
        std::copy_n(s.image.data(), per, out.data() + i * per);
        if (keep) keep->push_back(std::move(s));
    }
    return out;
}

Tensor detect_labels(const Tensor& image, float threshold) {
    if (image.rank() != 3 || image.dim(0) != 3) throw DomainError("detect_labels expects [3,H,W]");
    const std::int64_t hw = image.dim(1) * image.dim(2);
    Tensor labels({image.dim(1), image.dim(2)});
    for (std::int64_t p = 0; p < hw; ++p) {
        float best = threshold * threshold;
        int label = 0;
        for (int c = 0; c < kToyCategories; ++c) {
            const auto col = category_color(static_cast<ToyCategory>(c));
            float d2 = 0.0f;
            for (int ch = 0; ch < 3; ++ch) {
                const float v = 0.5f * (image[ch * hw + p] + 1.0f) - col[ch];
                d2 += v * v;
            }
            if (d2 < best) {
                best = d2;
                label = c + 1;
            }
        }
        labels[p] = static_cast<float>(label);
    }
    return labels;
}

std::vector<ToyObject> detect_objects(const Tensor& image, float threshold) {
    Tensor labels = detect_labels(image, threshold);
    std::vector<ToyObject> out;
    for (int c = 0; c < kToyCategories; ++c) {
        ToyObject obj{static_cast<ToyCategory>(c), Tensor(labels.shape())};
        bool any = false;
        for (std::int64_t p = 0; p < labels.numel(); ++p) {
            if (labels[p] == static_cast<float>(c + 1)) {
                obj.mask[p] = 1.0f;
                any = true;
            }
        }
        if (any) out.push_back(std::move(obj));
    }
    return out;
}

}  // namespace blobgan
