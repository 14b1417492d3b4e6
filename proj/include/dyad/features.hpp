#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <string>
#include <vector>

#include "dyad/common.hpp"
#include "dyad/ingest.hpp"

namespace dyad {

inline constexpr std::size_t kHistogramBins = 32;
inline constexpr std::size_t kHandcraftedDim = 2 * kHistogramBins;

// ---------------------------------------------------------------------------
// Handcrafted appearance features: a 32-bin intensity histogram (per-frame
// histograms normalized to sum 1, then averaged over the segment) followed by
// a 32-bin histogram of absolute inter-frame pixel differences, normalized to
// sum 1. Intensities and differences are 8-bit, so bin = value / 8.
// ---------------------------------------------------------------------------

inline FeatureVector extract_handcrafted(const GrayVideo& video, std::size_t begin,
                                         std::size_t end) {
    if (end > video.frame_count() || begin >= end)
        throw std::invalid_argument("extract_handcrafted: frame range out of bounds");
    std::size_t frames = end - begin;
    if (frames < 2) throw std::invalid_argument("extract_handcrafted: segment needs >= 2 frames");

    std::size_t pixels = video.pixel_count();
    FeatureVector out;
    out.values.assign(kHandcraftedDim, 0.0);

    for (std::size_t f = begin; f < end; ++f) {
        std::vector<std::size_t> hist(kHistogramBins, 0);
        for (std::uint8_t v : video.frames[f]) ++hist[v >> 3];
        for (std::size_t b = 0; b < kHistogramBins; ++b)
            out.values[b] += static_cast<double>(hist[b]) / static_cast<double>(pixels);
    }
    for (std::size_t b = 0; b < kHistogramBins; ++b) out.values[b] /= static_cast<double>(frames);

    std::vector<std::size_t> diff_hist(kHistogramBins, 0);
    for (std::size_t f = begin; f + 1 < end; ++f) {
        const auto& a = video.frames[f];
        const auto& b = video.frames[f + 1];
        for (std::size_t k = 0; k < pixels; ++k)
            ++diff_hist[static_cast<std::uint8_t>(std::abs(int(a[k]) - int(b[k]))) >> 3];
    }
    double total = static_cast<double>((frames - 1) * pixels);
    for (std::size_t b = 0; b < kHistogramBins; ++b)
        out.values[kHistogramBins + b] = static_cast<double>(diff_hist[b]) / total;

    return out;
}

inline FeatureVector extract_handcrafted(const GrayVideo& video, const SegmentView& segment) {
    return extract_handcrafted(video, segment.begin, segment.end);
}

// ---------------------------------------------------------------------------
// PCA via cyclic Jacobi on the sample covariance. Components are orthonormal,
// ordered by nonincreasing eigenvalue, and sign-normalized so the first
// coordinate of magnitude > 1e-12 is positive.
// ---------------------------------------------------------------------------

struct PcaModel {
    std::vector<double> mean;                     // dim d
    std::vector<std::vector<double>> components;  // k rows of dim d
    std::vector<double> eigenvalues;              // k values, nonincreasing

    std::size_t input_dim() const { return mean.size(); }
    std::size_t output_dim() const { return components.size(); }
};

namespace detail {

// One cyclic Jacobi sweep schedule; converges when the off-diagonal norm
// drops below 1e-10 of the (rotation-invariant) Frobenius norm.
inline void jacobi_eigen_symmetric(std::vector<std::vector<double>>& a,
                                   std::vector<std::vector<double>>& vectors) {
    std::size_t d = a.size();
    vectors.assign(d, std::vector<double>(d, 0.0));
    for (std::size_t i = 0; i < d; ++i) vectors[i][i] = 1.0;

    double frob = 0.0;
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) frob += a[i][j] * a[i][j];
    frob = std::sqrt(frob);
    if (frob == 0.0) return;
    const double tol = 1e-10 * frob;

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = i + 1; j < d; ++j) off += 2.0 * a[i][j] * a[i][j];
        if (std::sqrt(off) < tol) break;

        for (std::size_t p = 0; p < d; ++p) {
            for (std::size_t q = p + 1; q < d; ++q) {
                if (a[p][q] == 0.0) continue;
                double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                double t = (theta >= 0.0 ? 1.0 : -1.0) /
                           (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;

                for (std::size_t k = 0; k < d; ++k) {
                    double akp = a[k][p], akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < d; ++k) {
                    double apk = a[p][k], aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < d; ++k) {
                    double vkp = vectors[k][p], vkq = vectors[k][q];
                    vectors[k][p] = c * vkp - s * vkq;
                    vectors[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
}

}  // namespace detail

inline PcaModel pca_fit(const std::vector<FeatureVector>& features, std::size_t k) {
    if (features.size() < 2) throw std::invalid_argument("pca_fit: need at least 2 samples");
    std::size_t d = features.front().dim();
    for (const auto& f : features)
        if (f.dim() != d) throw std::invalid_argument("pca_fit: inconsistent feature dimensions");
    if (k < 1 || k > d) throw std::invalid_argument("pca_fit: k must be in [1, dim]");

    PcaModel model;
    model.mean.assign(d, 0.0);
    for (const auto& f : features)
        for (std::size_t j = 0; j < d; ++j) model.mean[j] += f.values[j];
    for (double& m : model.mean) m /= static_cast<double>(features.size());

    std::vector<std::vector<double>> cov(d, std::vector<double>(d, 0.0));
    for (const auto& f : features) {
        for (std::size_t i = 0; i < d; ++i) {
            double di = f.values[i] - model.mean[i];
            for (std::size_t j = i; j < d; ++j)
                cov[i][j] += di * (f.values[j] - model.mean[j]);
        }
    }
    double denom = static_cast<double>(features.size() - 1);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i; j < d; ++j) {
            cov[i][j] /= denom;
            cov[j][i] = cov[i][j];
        }

    std::vector<std::vector<double>> vectors;
    detail::jacobi_eigen_symmetric(cov, vectors);

    std::vector<std::size_t> order(d);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return cov[a][a] > cov[b][b]; });

    model.components.resize(k);
    model.eigenvalues.resize(k);
    for (std::size_t c = 0; c < k; ++c) {
        std::size_t col = order[c];
        model.eigenvalues[c] = cov[col][col];
        auto& comp = model.components[c];
        comp.resize(d);
        for (std::size_t j = 0; j < d; ++j) comp[j] = vectors[j][col];

        double norm = std::sqrt(std::inner_product(comp.begin(), comp.end(), comp.begin(), 0.0));
        if (norm > 0.0)
            for (double& x : comp) x /= norm;
        for (double x : comp) {
            if (std::abs(x) > 1e-12) {
                if (x < 0.0)
                    for (double& y : comp) y = -y;
                break;
            }
        }
    }
    return model;
}

inline FeatureVector pca_transform(const PcaModel& model, const FeatureVector& f) {
    if (f.dim() != model.input_dim())
        throw std::invalid_argument("pca_transform: dimension mismatch");
    FeatureVector out;
    out.segment_id = f.segment_id;
    out.values.resize(model.output_dim());
    for (std::size_t c = 0; c < model.output_dim(); ++c) {
        double acc = 0.0;
        for (std::size_t j = 0; j < model.input_dim(); ++j)
            acc += (f.values[j] - model.mean[j]) * model.components[c][j];
        out.values[c] = acc;
    }
    return out;
}

// ---------------------------------------------------------------------------
// PCA1: magic "PCA1", u32 d, u32 k, mean (d f32), components (k x d f32).
// Eigenvalues are not persisted; transforms do not need them.
// ---------------------------------------------------------------------------

inline void save_pca(const std::string& path, const PcaModel& model) {
    detail::ByteWriter w(path);
    w.write_magic("PCA1");
    w.write_u32(static_cast<std::uint32_t>(model.input_dim()));
    w.write_u32(static_cast<std::uint32_t>(model.output_dim()));
    for (double m : model.mean) w.write_f32(static_cast<float>(m));
    for (const auto& comp : model.components)
        for (double x : comp) w.write_f32(static_cast<float>(x));
    w.close();
}

inline PcaModel load_pca(const std::string& path) {
    auto bytes = detail::read_file_bytes(path);
    detail::ByteReader r(bytes, path);
    r.expect_magic("PCA1");
    std::size_t d = r.read_u32();
    std::size_t k = r.read_u32();
    if (k > d) throw std::runtime_error(path + ": malformed header (k > d)");
    PcaModel model;
    model.mean.resize(d);
    for (double& m : model.mean) m = r.read_f32();
    model.components.assign(k, std::vector<double>(d));
    model.eigenvalues.assign(k, 0.0);
    for (auto& comp : model.components)
        for (double& x : comp) x = r.read_f32();
    r.expect_end();
    return model;
}

}  // namespace dyad
