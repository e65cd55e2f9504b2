#pragma once

// Distribution and edit-fidelity metrics over feature vectors.

#include <filesystem>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "blobgan/model.hpp"

namespace blobgan {

inline constexpr double kFrechetShrinkage = 1e-6;

// Features are rows of [N,D]. Fits Gaussians (unbiased covariance plus
// shrinkage * I) and returns |mu_a - mu_b|^2 + Tr(Sa + Sb - 2 (Sa Sb)^1/2).
// With shrinkage 0 a singular covariance throws DomainError.
double frechet_distance(const Tensor& a, const Tensor& b, double shrinkage = kFrechetShrinkage);

struct PrecisionRecall {
    double precision = 0.0;
    double recall = 0.0;
};

// k-NN radius manifolds; each set needs more than nn_k points.
PrecisionRecall precision_recall(const Tensor& real, const Tensor& fake, int nn_k = 3);

// Mean L2 distance between paired rows.
double paired_distance(const Tensor& before, const Tensor& after);
// Mean L2 distance over all unordered pairs of rows (at least two).
double global_diversity(const Tensor& feats);

// images [N,3,H,W] -> features [N,D].
using FeatureExtractor = std::function<Tensor(const Tensor&)>;

// Penultimate discriminator features (the default).
FeatureExtractor disc_features(const Model& model, int chunk = 64);
// Pixels averaged over factor x factor cells.
FeatureExtractor raw_pixels(int factor = 4);

// Ordered "key = value" report.
class MetricReport {
public:
    void add(std::string key, double value);
    const std::vector<std::pair<std::string, double>>& entries() const noexcept { return entries_; }
    std::string text() const;
    void write(const std::filesystem::path& path) const;

private:
    std::vector<std::pair<std::string, double>> entries_;
};

}  // namespace blobgan
