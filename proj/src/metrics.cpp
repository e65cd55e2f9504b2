#include "blobgan/metrics.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "blobgan/errors.hpp"
#include "blobgan/io/image.hpp"
#include "blobgan/ops.hpp"

namespace blobgan {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXd to_matrix(const Tensor& t, const char* what) {
    if (t.rank() != 2) throw DomainError(std::string(what) + ": features must be [N,D]");
    MatrixXd m(t.dim(0), t.dim(1));
    for (std::int64_t i = 0; i < t.dim(0); ++i)
        for (std::int64_t j = 0; j < t.dim(1); ++j) m(i, j) = t[i * t.dim(1) + j];
    if (!m.allFinite()) throw DomainError(std::string(what) + ": non-finite features");
    return m;
}

void moments(const MatrixXd& x, double shrinkage, VectorXd& mean, MatrixXd& cov) {
    mean = x.colwise().mean();
    const MatrixXd centered = x.rowwise() - mean.transpose();
    const double denom = x.rows() > 1 ? static_cast<double>(x.rows() - 1) : 1.0;
    cov = centered.transpose() * centered / denom;
    cov += shrinkage * MatrixXd::Identity(x.cols(), x.cols());
}

MatrixXd sqrt_psd(const MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(0.5 * (m + m.transpose()));
    if (eig.info() != Eigen::Success) throw DomainError("frechet_distance: eigendecomposition failed");
    const VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

std::vector<double> knn_radii(const MatrixXd& x, int k) {
    const auto n = x.rows();
    std::vector<double> radii(static_cast<std::size_t>(n));
    std::vector<double> d(static_cast<std::size_t>(n - 1));
    for (Eigen::Index i = 0; i < n; ++i) {
        std::size_t c = 0;
        for (Eigen::Index j = 0; j < n; ++j)
            if (j != i) d[c++] = (x.row(i) - x.row(j)).norm();
        std::nth_element(d.begin(), d.begin() + (k - 1), d.end());
        radii[static_cast<std::size_t>(i)] = d[static_cast<std::size_t>(k - 1)];
    }
    return radii;
}

double coverage(const MatrixXd& manifold, const std::vector<double>& radii, const MatrixXd& probes) {
    std::int64_t inside = 0;
    for (Eigen::Index i = 0; i < probes.rows(); ++i) {
        for (Eigen::Index j = 0; j < manifold.rows(); ++j) {
            if ((probes.row(i) - manifold.row(j)).norm() <= radii[static_cast<std::size_t>(j)]) {
                ++inside;
                break;
            }
        }
    }
    return static_cast<double>(inside) / static_cast<double>(probes.rows());
}

}  // namespace

double frechet_distance(const Tensor& a, const Tensor& b, double shrinkage) {
    const MatrixXd xa = to_matrix(a, "frechet_distance");
    const MatrixXd xb = to_matrix(b, "frechet_distance");
    if (xa.cols() != xb.cols()) throw DomainError("frechet_distance: feature dimensions differ");
    if (xa.rows() < 2 || xb.rows() < 2) throw DomainError("frechet_distance: need at least two samples per set");
    VectorXd ma, mb;
    MatrixXd ca, cb;
    moments(xa, shrinkage, ma, ca);
    moments(xb, shrinkage, mb, cb);
    if (!(shrinkage > 0.0)) {
        for (const MatrixXd* c : {&ca, &cb}) {
            const VectorXd ev = Eigen::SelfAdjointEigenSolver<MatrixXd>(*c, Eigen::EigenvaluesOnly).eigenvalues();
            if (!(ev.minCoeff() > 1e-12 * std::max(1.0, ev.maxCoeff()))) {
                throw DomainError("frechet_distance: degenerate covariance without shrinkage");
            }
        }
    }
    // Tr (Sa Sb)^1/2 = Tr (Sa^1/2 Sb Sa^1/2)^1/2, which is symmetric PSD.
    const MatrixXd ra = sqrt_psd(ca);
    const double cross = sqrt_psd(ra * cb * ra).trace();
    const double value = (ma - mb).squaredNorm() + ca.trace() + cb.trace() - 2.0 * cross;
    if (!std::isfinite(value)) throw DomainError("frechet_distance: numerical failure");
    return std::max(0.0, value);
}

PrecisionRecall precision_recall(const Tensor& real, const Tensor& fake, int nn_k) {
    if (nn_k < 1) throw DomainError("precision_recall: nn_k must be >= 1");
    const MatrixXd r = to_matrix(real, "precision_recall");
    const MatrixXd f = to_matrix(fake, "precision_recall");
    if (r.cols() != f.cols()) throw DomainError("precision_recall: feature dimensions differ");
    if (r.rows() <= nn_k || f.rows() <= nn_k) {
        throw DomainError("precision_recall: each set needs more than nn_k = " + std::to_string(nn_k) + " points");
    }
    PrecisionRecall out;
    out.precision = coverage(r, knn_radii(r, nn_k), f);
    out.recall = coverage(f, knn_radii(f, nn_k), r);
    return out;
}

double paired_distance(const Tensor& before, const Tensor& after) {
    const MatrixXd a = to_matrix(before, "paired_distance");
    const MatrixXd b = to_matrix(after, "paired_distance");
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw DomainError("paired_distance: sets differ in size");
    if (a.rows() == 0) throw DomainError("paired_distance: empty sets");
    return (a - b).rowwise().norm().mean();
}

double global_diversity(const Tensor& feats) {
    const MatrixXd x = to_matrix(feats, "global_diversity");
    if (x.rows() < 2) throw DomainError("global_diversity: need at least two images");
    double acc = 0.0;
    std::int64_t pairs = 0;
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index j = i + 1; j < x.rows(); ++j, ++pairs) acc += (x.row(i) - x.row(j)).norm();
    return acc / static_cast<double>(pairs);
}

FeatureExtractor disc_features(const Model& model, int chunk) {
    return [&model, chunk](const Tensor& images) {
        if (images.rank() != 4) throw DomainError("disc_features: images must be [N,3,H,W]");
        const std::int64_t n = images.dim(0);
        const std::int64_t per = images.numel() / std::max<std::int64_t>(1, n);
        const std::int64_t width = model.cfg.disc.hidden;
        Tensor out({n, width});
        for (std::int64_t start = 0; start < n; start += chunk) {
            const std::int64_t m = std::min<std::int64_t>(chunk, n - start);
            Tensor part({m, images.dim(1), images.dim(2), images.dim(3)});
            std::copy_n(images.data() + start * per, m * per, part.data());
            Tape tape;
            Binding d(tape, model.d_params, false);
            Tensor f = model.disc.forward(d, tape.constant(std::move(part))).features.value();
            std::copy_n(f.data(), m * width, out.data() + start * width);
        }
        return out;
    };
}

FeatureExtractor raw_pixels(int factor) {
    if (factor < 1) throw DomainError("raw_pixels: factor must be >= 1");
    return [factor](const Tensor& images) {
        if (images.rank() != 4) throw DomainError("raw_pixels: images must be [N,C,H,W]");
        const std::int64_t n = images.dim(0), c = images.dim(1), h = images.dim(2), w = images.dim(3);
        if (h % factor || w % factor) throw DomainError("raw_pixels: size not divisible by factor");
        const std::int64_t ho = h / factor, wo = w / factor;
        Tensor out({n, c * ho * wo});
        const float inv = 1.0f / static_cast<float>(factor * factor);
        for (std::int64_t i = 0; i < n; ++i)
            for (std::int64_t ch = 0; ch < c; ++ch)
                for (std::int64_t y = 0; y < ho; ++y)
                    for (std::int64_t x = 0; x < wo; ++x) {
                        float acc = 0.0f;
                        for (std::int64_t dy = 0; dy < factor; ++dy)
                            for (std::int64_t dx = 0; dx < factor; ++dx)
                                acc += images[((i * c + ch) * h + y * factor + dy) * w + x * factor + dx];
                        out[i * c * ho * wo + (ch * ho + y) * wo + x] = acc * inv;
                    }
        return out;
    };
}

void MetricReport::add(std::string key, double value) { entries_.emplace_back(std::move(key), value); }

std::string MetricReport::text() const {
    std::string out;
    char buf[64];
    for (const auto& [k, v] : entries_) {
        std::snprintf(buf, sizeof(buf), "%.9g", v);
        out += k + " = " + buf + "\n";
    }
    return out;
}

void MetricReport::write(const std::filesystem::path& path) const { io::write_file(path, text()); }

}  // namespace blobgan
