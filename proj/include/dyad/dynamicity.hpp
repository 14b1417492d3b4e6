#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <vector>

#include "dyad/common.hpp"
#include "dyad/ingest.hpp"

namespace dyad {

inline constexpr std::size_t kMotionHistogramBins = 32;

// ---------------------------------------------------------------------------
// Exhaustive block matching. Frame A is tiled into block x block cells (edge
// cells truncated); each cell searches every displacement in
// [-search, search]^2 whose displaced cell stays inside frame B and keeps the
// one with minimal sum of absolute differences. Ties break on smallest
// |dx|+|dy|, then smallest dy, then smallest dx; (0,0) is always a candidate,
// so identical frames produce a zero field. Every pixel of a cell takes the
// cell's displacement.
// ---------------------------------------------------------------------------

inline FlowField estimate_flow(const GrayVideo& video, std::size_t frame_a, std::size_t frame_b,
                               std::size_t block = 8, int search = 4) {
    if (frame_a >= video.frame_count() || frame_b >= video.frame_count())
        throw std::invalid_argument("estimate_flow: frame index out of range");
    if (block < 1) throw std::invalid_argument("estimate_flow: block must be >= 1");
    if (search < 0) throw std::invalid_argument("estimate_flow: search must be >= 0");
    if (video.width < block || video.height < block)
        throw std::invalid_argument("estimate_flow: frame smaller than block");

    const auto& a = video.frames[frame_a];
    const auto& b = video.frames[frame_b];
    const std::size_t w = video.width, h = video.height;

    FlowField flow;
    flow.width = w;
    flow.height = h;
    flow.u.assign(w * h, 0.0f);
    flow.v.assign(w * h, 0.0f);

    for (std::size_t by = 0; by < h; by += block) {
        for (std::size_t bx = 0; bx < w; bx += block) {
            std::size_t bw = std::min(block, w - bx);
            std::size_t bh = std::min(block, h - by);

            long best_sad = std::numeric_limits<long>::max();
            int best_dx = 0, best_dy = 0, best_l1 = 0;
            for (int dy = -search; dy <= search; ++dy) {
                long sy = static_cast<long>(by) + dy;
                if (sy < 0 || sy + static_cast<long>(bh) > static_cast<long>(h)) continue;
                for (int dx = -search; dx <= search; ++dx) {
                    long sx = static_cast<long>(bx) + dx;
                    if (sx < 0 || sx + static_cast<long>(bw) > static_cast<long>(w)) continue;

                    long sad = 0;
                    for (std::size_t y = 0; y < bh; ++y) {
                        const std::uint8_t* pa = a.data() + (by + y) * w + bx;
                        const std::uint8_t* pb = b.data() + (sy + y) * w + sx;
                        for (std::size_t x = 0; x < bw; ++x)
                            sad += std::abs(int(pa[x]) - int(pb[x]));
                    }

                    int l1 = std::abs(dx) + std::abs(dy);
                    bool better = sad < best_sad ||
                                  (sad == best_sad &&
                                   (l1 < best_l1 ||
                                    (l1 == best_l1 &&
                                     (dy < best_dy || (dy == best_dy && dx < best_dx)))));
                    if (better) {
                        best_sad = sad;
                        best_dx = dx;
                        best_dy = dy;
                        best_l1 = l1;
                    }
                }
            }

            for (std::size_t y = 0; y < bh; ++y)
                for (std::size_t x = 0; x < bw; ++x) {
                    flow.u[(by + y) * w + bx + x] = static_cast<float>(best_dx);
                    flow.v[(by + y) * w + bx + x] = static_cast<float>(best_dy);
                }
        }
    }
    return flow;
}

/// Flow fields for every consecutive frame pair of a segment (p frames -> p-1 fields).
inline std::vector<FlowField> estimate_segment_flow(const GrayVideo& video,
                                                    const SegmentView& segment,
                                                    std::size_t block = 8, int search = 4) {
    if (segment.frame_count() < 2)
        throw std::invalid_argument("estimate_segment_flow: segment needs >= 2 frames");
    std::vector<FlowField> fields;
    fields.reserve(segment.frame_count() - 1);
    for (std::size_t f = segment.begin; f + 1 < segment.end; ++f)
        fields.push_back(estimate_flow(video, f, f + 1, block, search));
    return fields;
}

// ---------------------------------------------------------------------------
// Dynamicity: per-pixel L1 displacement, averaged over the frame, averaged
// over the segment, min-max normalized over the batch.
// ---------------------------------------------------------------------------

/// |u_k| + |v_k|: absolute displacement of pixel k, movement in any direction.
inline double pixel_displacement(const FlowField& flow, std::size_t k) {
    if (k >= flow.pixel_count()) throw std::out_of_range("pixel_displacement: index out of range");
    return std::abs(static_cast<double>(flow.u[k])) + std::abs(static_cast<double>(flow.v[k]));
}

inline double frame_dynamicity(const FlowField& flow) {
    if (flow.pixel_count() == 0) throw std::invalid_argument("frame_dynamicity: empty field");
    double sum = 0.0;
    for (std::size_t k = 0; k < flow.pixel_count(); ++k) sum += pixel_displacement(flow, k);
    return sum / static_cast<double>(flow.pixel_count());
}

struct DynamicityScore {
    std::vector<double> per_frame;  // D_i for each frame pair
    double segment_value = 0.0;     // mean of per_frame
    double normalized = 0.0;        // set by normalize_dynamicity
};

inline DynamicityScore segment_dynamicity(const std::vector<FlowField>& flows) {
    if (flows.empty()) throw std::invalid_argument("segment_dynamicity: empty flow list");
    DynamicityScore score;
    score.per_frame.reserve(flows.size());
    for (const auto& f : flows) score.per_frame.push_back(frame_dynamicity(f));
    score.segment_value =
        std::accumulate(score.per_frame.begin(), score.per_frame.end(), 0.0) /
        static_cast<double>(score.per_frame.size());
    return score;
}

/// Min-max over the batch of segment values; a constant batch maps to all 0.5.
inline std::vector<double> normalize_dynamicity(const std::vector<double>& segment_values) {
    return min_max_normalize(segment_values);
}

// ---------------------------------------------------------------------------
// Motion features for the dynamicity regressor: a 32-bin histogram of the
// per-pixel displacements S_k pooled over the whole segment (range
// [0, 2*search], overflow into the last bin, normalized to sum 1) plus the
// mean and the max displacement. 34 values total.
// ---------------------------------------------------------------------------

inline constexpr std::size_t kMotionFeatureDim = kMotionHistogramBins + 2;

inline FeatureVector motion_features(const std::vector<FlowField>& flows, int search) {
    if (flows.empty()) throw std::invalid_argument("motion_features: empty flow list");
    if (search < 1) throw std::invalid_argument("motion_features: search must be >= 1");

    const double range = 2.0 * search;
    std::vector<std::size_t> hist(kMotionHistogramBins, 0);
    std::size_t total = 0;
    double sum = 0.0, peak = 0.0;
    for (const auto& f : flows) {
        for (std::size_t k = 0; k < f.pixel_count(); ++k) {
            double s = pixel_displacement(f, k);
            auto bin = static_cast<std::size_t>(std::min(
                static_cast<double>(kMotionHistogramBins - 1),
                std::floor(s / range * static_cast<double>(kMotionHistogramBins))));
            ++hist[bin];
            sum += s;
            peak = std::max(peak, s);
            ++total;
        }
    }
    if (total == 0) throw std::invalid_argument("motion_features: empty flow fields");

    FeatureVector out;
    out.values.resize(kMotionFeatureDim);
    for (std::size_t b = 0; b < kMotionHistogramBins; ++b)
        out.values[b] = static_cast<double>(hist[b]) / static_cast<double>(total);
    out.values[kMotionHistogramBins] = sum / static_cast<double>(total);
    out.values[kMotionHistogramBins + 1] = peak;
    return out;
}

}  // namespace dyad
