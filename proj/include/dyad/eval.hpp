#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "dyad/ingest.hpp"

namespace dyad {

// ---------------------------------------------------------------------------
// Natural cubic spline through (x, y) knots with strictly increasing x.
// Second derivatives vanish at both ends; evaluation outside the knot range
// extends the boundary values as constants.
// ---------------------------------------------------------------------------

class CubicSpline {
public:
    CubicSpline(std::vector<double> x, std::vector<double> y)
        : x_(std::move(x)), y_(std::move(y)) {
        if (x_.size() != y_.size() || x_.empty())
            throw std::invalid_argument("CubicSpline: knot arrays must be nonempty and equal");
        for (std::size_t i = 1; i < x_.size(); ++i)
            if (!(x_[i] > x_[i - 1]))
                throw std::invalid_argument("CubicSpline: knots must be strictly increasing");
        if (x_.size() < 3) {
            m_.assign(x_.size(), 0.0);  // natural spline over <3 knots is linear
            return;
        }

        // Tridiagonal system for the interior second derivatives; m[0] and
        // m[n-1] stay zero.
        std::size_t n = x_.size();
        std::vector<double> lower(n, 0.0), diag(n, 0.0), upper(n, 0.0), rhs(n, 0.0);
        for (std::size_t i = 1; i + 1 < n; ++i) {
            double h0 = x_[i] - x_[i - 1];
            double h1 = x_[i + 1] - x_[i];
            lower[i] = h0 / 6.0;
            diag[i] = (h0 + h1) / 3.0;
            upper[i] = h1 / 6.0;
            rhs[i] = (y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0;
        }
        // Thomas algorithm over indices 1..n-2.
        for (std::size_t i = 2; i + 1 < n; ++i) {
            double factor = lower[i] / diag[i - 1];
            diag[i] -= factor * upper[i - 1];
            rhs[i] -= factor * rhs[i - 1];
        }
        m_.assign(n, 0.0);
        m_[n - 2] = rhs[n - 2] / diag[n - 2];
        for (std::size_t i = n - 2; i-- > 1;) m_[i] = (rhs[i] - upper[i] * m_[i + 1]) / diag[i];
    }

    double operator()(double t) const {
        if (t <= x_.front()) return y_.front();
        if (t >= x_.back()) return y_.back();
        std::size_t hi =
            static_cast<std::size_t>(std::upper_bound(x_.begin(), x_.end(), t) - x_.begin());
        std::size_t lo = hi - 1;
        double h = x_[hi] - x_[lo];
        double a = (x_[hi] - t) / h;
        double b = (t - x_[lo]) / h;
        return a * y_[lo] + b * y_[hi] +
               ((a * a * a - a) * m_[lo] + (b * b * b - b) * m_[hi]) * h * h / 6.0;
    }

private:
    std::vector<double> x_, y_, m_;
};

// ---------------------------------------------------------------------------
// Segment scores to frame scores: spline knots sit at segment-center frame
// indices, frames outside the first/last knot take the boundary score, and
// every value is clamped to [0,1]. A single segment degenerates to a constant.
// ---------------------------------------------------------------------------

inline std::vector<double> interpolate_to_frames(const std::vector<double>& segment_scores,
                                                 const std::vector<SegmentView>& views) {
    if (segment_scores.size() != views.size())
        throw std::invalid_argument("interpolate_to_frames: one score per segment required");
    if (views.empty()) throw std::invalid_argument("interpolate_to_frames: no segments");
    for (std::size_t i = 0; i < views.size(); ++i) {
        if (views[i].frame_count() == 0)
            throw std::invalid_argument("interpolate_to_frames: empty segment");
        if (i > 0 && views[i].begin != views[i - 1].end)
            throw std::invalid_argument("interpolate_to_frames: segments must be contiguous");
    }
    if (views.front().begin != 0)
        throw std::invalid_argument("interpolate_to_frames: segments must start at frame 0");

    std::size_t frame_count = views.back().end;
    std::vector<double> frames(frame_count);
    if (views.size() < 2) {
        double c = std::clamp(segment_scores.front(), 0.0, 1.0);
        std::fill(frames.begin(), frames.end(), c);
        return frames;
    }

    std::vector<double> knots(views.size());
    for (std::size_t i = 0; i < views.size(); ++i)
        knots[i] = (static_cast<double>(views[i].begin) + static_cast<double>(views[i].end) - 1.0) / 2.0;

    CubicSpline spline(knots, segment_scores);
    for (std::size_t f = 0; f < frame_count; ++f)
        frames[f] = std::clamp(spline(static_cast<double>(f)), 0.0, 1.0);
    return frames;
}

// ---------------------------------------------------------------------------
// Frame-level ROC and AUC. Thresholds sweep the distinct score values from
// high to low, ties grouped into a single step; AUC by the trapezoid rule, so
// tied scores count half, matching the Mann-Whitney statistic.
// ---------------------------------------------------------------------------

struct RocCurve {
    std::vector<std::pair<double, double>> points;  // (fpr, tpr) from (0,0) to (1,1)
    double auc = 0.0;
};

inline RocCurve roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) throw std::invalid_argument("roc_auc: length mismatch");
    if (scores.empty()) throw std::invalid_argument("roc_auc: empty input");
    std::size_t positives = 0;
    for (int label : labels) {
        if (label != 0 && label != 1) throw std::invalid_argument("roc_auc: labels must be 0/1");
        positives += static_cast<std::size_t>(label);
    }
    std::size_t negatives = scores.size() - positives;
    if (positives == 0 || negatives == 0)
        throw std::invalid_argument("roc_auc: both classes must be present");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    RocCurve curve;
    curve.points.emplace_back(0.0, 0.0);
    std::size_t tp = 0, fp = 0;
    double auc = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        double value = scores[order[i]];
        std::size_t group_tp = 0, group_fp = 0;
        while (i < order.size() && scores[order[i]] == value) {
            if (labels[order[i]] == 1)
                ++group_tp;
            else
                ++group_fp;
            ++i;
        }
        double fpr0 = static_cast<double>(fp) / static_cast<double>(negatives);
        double tpr0 = static_cast<double>(tp) / static_cast<double>(positives);
        tp += group_tp;
        fp += group_fp;
        double fpr1 = static_cast<double>(fp) / static_cast<double>(negatives);
        double tpr1 = static_cast<double>(tp) / static_cast<double>(positives);
        auc += (fpr1 - fpr0) * (tpr0 + tpr1) / 2.0;
        curve.points.emplace_back(fpr1, tpr1);
    }
    curve.auc = auc;
    return curve;
}

/// Fraction of ground-truth-normal frames scored above tau.
inline double false_alarm_rate(const std::vector<double>& scores, const std::vector<int>& labels,
                               double tau) {
    if (scores.size() != labels.size())
        throw std::invalid_argument("false_alarm_rate: length mismatch");
    std::size_t normal = 0, alarms = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] == 0) {
            ++normal;
            if (scores[i] > tau) ++alarms;
        }
    }
    if (normal == 0) throw std::invalid_argument("false_alarm_rate: no negative frames");
    return static_cast<double>(alarms) / static_cast<double>(normal);
}

}  // namespace dyad
