#pragma once

// Procedural "room" scenes: a vertical-gradient background with 2-4
// flat-colored furniture objects, each with an exact visibility mask.

#include <array>
#include <random>
#include <vector>

#include "blobgan/tensor.hpp"

namespace blobgan {

enum class ToyCategory { kBed = 0, kWindow = 1, kLamp = 2, kPlant = 3 };
inline constexpr int kToyCategories = 4;

const char* category_name(ToyCategory c);
// Nominal RGB in [0,1].
std::array<float, 3> category_color(ToyCategory c);

struct ToyObject {
    ToyCategory category;
    Tensor mask;  // [H,W], 1 where the object is visible
};

struct ToySample {
    Tensor image;  // [3,H,W] in [-1,1]
    std::vector<ToyObject> objects;
};

class ToySceneGenerator {
public:
    explicit ToySceneGenerator(std::uint64_t seed, std::int64_t resolution = 32);

    ToySample next();
    // [n,3,H,W]; samples are appended to `keep` when given.
    Tensor batch(std::int64_t n, std::vector<ToySample>* keep = nullptr);

private:
    std::mt19937_64 rng_;
    std::int64_t res_;
};

// Per-pixel label from the nearest category color: 0 = background,
// 1 + category otherwise. image [3,H,W] in [-1,1].
Tensor detect_labels(const Tensor& image, float threshold = 0.25f);
// One mask per category present in the label map.
std::vector<ToyObject> detect_objects(const Tensor& image, float threshold = 0.25f);

}  // namespace blobgan
