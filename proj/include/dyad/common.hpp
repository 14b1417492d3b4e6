#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace dyad {

// Splitmix-style 64-bit generator. All randomness in the pipeline flows
// through this so a fixed seed reproduces bit-identical artifacts on any
// platform; the standard <random> distributions are not portable that way.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    /// Uniform in [0,1).
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform in (0,1), endpoints excluded.
    double next_open() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

    /// Uniform integer in [0, n).
    std::uint64_t next_below(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("next_below: empty range");
        return next_u64() % n;
    }

    /// In-place Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(next_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    /// First k entries of a shuffled [0, n): a uniform sample without replacement.
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k) {
        if (k > n) throw std::invalid_argument("sample_without_replacement: k > n");
        std::vector<std::size_t> idx(n);
        for (std::size_t i = 0; i < n; ++i) idx[i] = i;
        for (std::size_t i = 0; i < k; ++i) {
            std::size_t j = i + static_cast<std::size_t>(next_below(n - i));
            std::swap(idx[i], idx[j]);
        }
        idx.resize(k);
        return idx;
    }

private:
    std::uint64_t state_;
};

/// Decorrelated seed for a numbered stream (tree index, training pass, video).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    SplitMix64 g(seed ^ (0x9E3779B97F4A7C15ull * (stream + 1)));
    return g.next_u64();
}

/// Min-max normalization over a batch; a constant batch maps to all 0.5.
inline std::vector<double> min_max_normalize(const std::vector<double>& values) {
    if (values.empty()) throw std::invalid_argument("min_max_normalize: empty batch");
    double lo = values.front(), hi = values.front();
    for (double v : values) {
        if (v < lo) lo = v;
        if (v > hi) hi = v;
    }
    std::vector<double> out(values.size());
    if (hi == lo) {
        for (double& v : out) v = 0.5;
        return out;
    }
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - lo) / (hi - lo);
    return out;
}

/// Appearance or motion representation of one segment.
struct FeatureVector {
    std::size_t segment_id = 0;
    std::vector<double> values;

    std::size_t dim() const { return values.size(); }
};

/// Dense per-pixel motion between two consecutive frames.
struct FlowField {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<float> u;  // horizontal displacement, row-major
    std::vector<float> v;  // vertical displacement, row-major

    std::size_t pixel_count() const { return width * height; }
};

}  // namespace dyad
