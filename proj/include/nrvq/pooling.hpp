#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "nrvq/errors.hpp"
#include "nrvq/niqe.hpp"

namespace nrvq {

enum class PoolingMethod { weighted, mean };

inline const char* to_string(PoolingMethod m) {
    return m == PoolingMethod::weighted ? "weighted" : "mean";
}

// Video-level score. total_weight is the weight mass that actually entered
// the average; fallback_used marks an all-outlier series that was pooled
// with the plain mean instead.
struct PooledScore {
    double score = 0.0;
    PoolingMethod method = PoolingMethod::weighted;
    double total_weight = 0.0;
    std::size_t frames_total = 0;
    std::size_t frames_zero_weight = 0;
    bool fallback_used = false;
};

inline constexpr double kOutlierScoreThreshold = 40.0;
inline constexpr double kDarkFrameLumaThreshold = 16.0;

struct FrameDiagnostics {
    std::int64_t frame_index = 0;
    bool dark_frame = false;
    bool outlier_score = false;
    double weight = 0.0;
};

// Outlier-suppressing weighting coefficient:
//   k = 1            for m in [0, 15)
//   k = -0.04*m + 1.6 for m in [15, 40)
//   k = 0            for m in [40, inf)
// Continuous on [0, inf), non-increasing, k in [0, 1].
inline double weight(double m) {
    if (!std::isfinite(m) || m < 0.0)
        throw InvalidScore("weight: frame score must be finite and non-negative");
    if (m < 15.0) return 1.0;
    if (m < kOutlierScoreThreshold) return -0.04 * m + 1.6;
    return 0.0;
}

namespace detail {

// Neumaier compensated accumulator. Adding an exact zero leaves the state
// untouched, so zero-weight frames cannot move a total at all.
class CompensatedSum {
public:
    void add(double x) {
        const double t = sum_ + x;
        if (std::fabs(sum_) >= std::fabs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }

    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

// Scores in canonical (ascending) order: pooling sums become independent of
// the frame order presented by the caller.
inline std::vector<double> canonical_scores(const FrameScoreSeries& frames) {
    std::vector<double> m;
    m.reserve(frames.size());
    for (const FrameScore& f : frames) m.push_back(f.score);
    std::sort(m.begin(), m.end());
    return m;
}

}  // namespace detail

// Plain arithmetic mean baseline.
inline PooledScore pool_mean(const FrameScoreSeries& frames) {
    if (frames.empty()) throw EmptySeries("pool_mean: no frames");

    PooledScore out;
    out.method = PoolingMethod::mean;
    out.frames_total = frames.size();

    detail::CompensatedSum sum;
    for (const double m : detail::canonical_scores(frames)) {
        if (weight(m) == 0.0) ++out.frames_zero_weight;
        sum.add(m);
    }
    out.score = sum.value() / static_cast<double>(frames.size());
    out.total_weight = static_cast<double>(frames.size());
    return out;
}

// Outlier-suppressing weighted average:
//   Score_V = sum(m_i * k_i) / sum(k_i)
// When every weight is zero (an all-outlier series) the plain mean is used
// instead and fallback_used is set, so the video still gets a reportable
// number without hiding what happened.
inline PooledScore pool_weighted(const FrameScoreSeries& frames) {
    if (frames.empty()) throw EmptySeries("pool_weighted: no frames");

    PooledScore out;
    out.method = PoolingMethod::weighted;
    out.frames_total = frames.size();

    detail::CompensatedSum num, den;
    for (const double m : detail::canonical_scores(frames)) {
        const double k = weight(m);
        if (k == 0.0) ++out.frames_zero_weight;
        num.add(m * k);
        den.add(k);
    }

    out.total_weight = den.value();
    if (out.total_weight > 0.0) {
        out.score = num.value() / out.total_weight;
    } else {
        out.fallback_used = true;
        out.total_weight = 0.0;
        out.score = pool_mean(frames).score;
    }
    return out;
}

// One record per frame: dark-frame flag (mean luma below studio black),
// outlier flag (score at or past the zero-weight threshold) and the weight
// the frame would receive.
inline std::vector<FrameDiagnostics> diagnose_frames(const FrameScoreSeries& frames) {
    std::vector<FrameDiagnostics> out;
    out.reserve(frames.size());
    for (const FrameScore& f : frames) {
        FrameDiagnostics d;
        d.frame_index = f.frame_index;
        d.dark_frame = f.mean_luma < kDarkFrameLumaThreshold;
        d.outlier_score = f.score >= kOutlierScoreThreshold;
        d.weight = weight(f.score);
        out.push_back(d);
    }
    return out;
}

}  // namespace nrvq
