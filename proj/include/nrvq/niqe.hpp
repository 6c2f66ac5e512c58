#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "nrvq/core_math.hpp"
#include "nrvq/errors.hpp"
#include "nrvq/image_ops.hpp"

namespace nrvq {

inline constexpr int kFeatureDim = 36;

// 36 quality-aware features per patch. Layout, frozen and recorded in the
// model file:
//   per scale (full resolution, then 2x downsampled):
//     [0]  GGD alpha of the MSCN coefficients
//     [1]  GGD sigma^2
//     [2..17] per orientation H, V, D1, D2: AGGD alpha, mean, sigma_l^2, sigma_r^2
using FeatureVector = std::array<double, kFeatureDim>;

// Normalization constants baked into every score. Recorded in the model file
// so scores are only compared across identical settings.
struct NssSettings {
    int window_half_extent = kWindowHalfExtent;
    double window_sigma = kWindowSigma;
    double normalization_c = kNormalizationC;
    std::string border = "reflect";
    std::string downsample = "box2";

    bool operator==(const NssSettings&) const = default;
};

struct NiqeSettings {
    int patch_size = 96;
    double sharpness_fraction = 0.75;
    NssSettings nss;
};

// Pristine model: MVG over the 36-dim feature space plus everything needed
// to score new frames the same way the corpus was processed.
struct NiqeModel {
    MvgModel mvg;
    int patch_size = 96;
    double sharpness_fraction = 0.75;
    NssSettings nss;
    std::string corpus_descriptor;
};

// Per-frame result. Lower score = better quality. A frame whose patches all
// degenerate (solid color, black) gets the sentinel score and a flag instead
// of an error so batch runs keep going; the pooling layer assigns it zero
// weight.
struct FrameScore {
    std::int64_t frame_index = 0;
    double score = 0.0;
    int patch_count = 0;
    double mean_luma = 0.0;
    bool degenerate_frame = false;
    bool covariance_fallback = false;
};

using FrameScoreSeries = std::vector<FrameScore>;

inline constexpr double kDegenerateFrameScore = 100.0;

struct PatchOrigin {
    int x = 0;
    int y = 0;

    bool operator==(const PatchOrigin&) const = default;
};

namespace detail {

inline void validate_niqe_settings(int patch_size, double sharpness_fraction) {
    if (patch_size < 20 || patch_size % 2 != 0)
        throw InvalidParameter("patch_size must be even and at least 20");
    if (!(sharpness_fraction > 0.0) || sharpness_fraction > 1.0)
        throw InvalidParameter("sharpness_fraction must be in (0, 1]");
}

inline MscnField slice_field(const MscnField& field, int x0, int y0, int size) {
    MscnField out;
    out.width = size;
    out.height = size;
    out.values.resize(static_cast<std::size_t>(size) * size);
    out.sigma_field.assign(out.values.size(), 0.0);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
            out.values[static_cast<std::size_t>(y) * size + x] = field.value_at(x0 + x, y0 + y);
    return out;
}

// 18 features of one scale: GGD of the MSCN slice, AGGD of its four
// pairwise-product fields.
inline void scale_features(const MscnField& field, int x0, int y0, int size, double* out) {
    const MscnField patch = slice_field(field, x0, y0, size);

    const GgdParams g = fit_ggd(patch.values);
    out[0] = g.alpha;
    out[1] = g.sigma * g.sigma;

    const PairwiseProducts prods = pairwise_products(patch);
    int pos = 2;
    for (const RealField* f : {&prods.h, &prods.v, &prods.d1, &prods.d2}) {
        const AggdParams a = fit_aggd(f->values);
        out[pos++] = a.alpha;
        out[pos++] = a.mean;
        out[pos++] = a.sigma_left * a.sigma_left;
        out[pos++] = a.sigma_right * a.sigma_right;
    }
}

}  // namespace detail

// Both NSS scales of one plane, computed once and shared across its patches.
struct FrameNss {
    MscnField scale1;
    MscnField scale2;
};

inline FrameNss compute_frame_nss(const LumaPlane& plane) {
    return FrameNss{mscn(plane), mscn(downsample2(plane))};
}

// Feature extraction against precomputed NSS fields. The patch must lie
// fully inside the plane at both scales.
inline FeatureVector extract_patch_features(const FrameNss& nss, PatchOrigin origin,
                                            int patch_size) {
    detail::validate_niqe_settings(patch_size, 1.0);
    const int x2 = origin.x / 2;
    const int y2 = origin.y / 2;
    const int half = patch_size / 2;
    if (origin.x < 0 || origin.y < 0 || origin.x + patch_size > nss.scale1.width ||
        origin.y + patch_size > nss.scale1.height || x2 + half > nss.scale2.width ||
        y2 + half > nss.scale2.height)
        throw PatchOutOfBounds("extract_patch_features: patch exceeds plane at some scale");

    FeatureVector out{};
    detail::scale_features(nss.scale1, origin.x, origin.y, patch_size, out.data());
    detail::scale_features(nss.scale2, x2, y2, half, out.data() + kFeatureDim / 2);

    for (const double v : out)
        if (!std::isfinite(v)) throw DegenerateInput("extract_patch_features: non-finite feature");
    return out;
}

inline FeatureVector extract_patch_features(const LumaPlane& plane, PatchOrigin origin,
                                            int patch_size) {
    return extract_patch_features(compute_frame_nss(plane), origin, patch_size);
}

// Non-overlapping tiling from (0,0); a tile is kept when its mean local
// standard deviation reaches `fraction` of the sharpest tile's. Right/bottom
// remainders that do not fill a whole patch are dropped.
inline std::vector<PatchOrigin> select_sharp_patches(const MscnField& field, int patch_size,
                                                     double fraction) {
    detail::validate_niqe_settings(patch_size, fraction);
    const int nx = field.width / patch_size;
    const int ny = field.height / patch_size;
    if (nx < 1 || ny < 1)
        throw NoPatchesFit("select_sharp_patches: plane smaller than one patch");

    std::vector<double> sharpness(static_cast<std::size_t>(nx) * ny, 0.0);
    double max_sharpness = 0.0;
    for (int ty = 0; ty < ny; ++ty) {
        for (int tx = 0; tx < nx; ++tx) {
            long double acc = 0.0L;
            for (int y = ty * patch_size; y < (ty + 1) * patch_size; ++y)
                for (int x = tx * patch_size; x < (tx + 1) * patch_size; ++x)
                    acc += field.sigma_at(x, y);
            const double s = static_cast<double>(
                acc / (static_cast<long double>(patch_size) * patch_size));
            sharpness[static_cast<std::size_t>(ty) * nx + tx] = s;
            max_sharpness = std::max(max_sharpness, s);
        }
    }

    std::vector<PatchOrigin> kept;
    const double threshold = fraction * max_sharpness;
    for (int ty = 0; ty < ny; ++ty)
        for (int tx = 0; tx < nx; ++tx)
            if (sharpness[static_cast<std::size_t>(ty) * nx + tx] >= threshold)
                kept.push_back(PatchOrigin{tx * patch_size, ty * patch_size});
    return kept;
}

// Retained-and-fitted features of one frame. Patches whose fits degenerate
// (flat content) are counted and skipped.
struct FramePatchFeatures {
    std::vector<FeatureVector> features;
    int patches_retained = 0;
    int patches_degenerate = 0;
};

inline FramePatchFeatures frame_patch_features(const LumaPlane& plane, int patch_size,
                                               double sharpness_fraction) {
    detail::validate_niqe_settings(patch_size, sharpness_fraction);
    if (plane.width < patch_size || plane.height < patch_size)
        throw NoPatchesFit("frame does not fit a single patch");

    const FrameNss nss = compute_frame_nss(plane);
    const auto origins = select_sharp_patches(nss.scale1, patch_size, sharpness_fraction);

    FramePatchFeatures out;
    out.patches_retained = static_cast<int>(origins.size());
    out.features.reserve(origins.size());
    for (const PatchOrigin origin : origins) {
        try {
            out.features.push_back(extract_patch_features(nss, origin, patch_size));
        } catch (const DegenerateInput&) {
            ++out.patches_degenerate;
        }
    }
    return out;
}

namespace detail {

inline Eigen::MatrixXd feature_matrix(const std::vector<FeatureVector>& features) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(features.size()), kFeatureDim);
    for (std::size_t i = 0; i < features.size(); ++i)
        for (int j = 0; j < kFeatureDim; ++j)
            m(static_cast<Eigen::Index>(i), j) = features[i][static_cast<std::size_t>(j)];
    return m;
}

inline Eigen::VectorXd feature_mean(const std::vector<FeatureVector>& features) {
    Eigen::VectorXd mean(kFeatureDim);
    for (int j = 0; j < kFeatureDim; ++j) {
        long double acc = 0.0L;
        for (const auto& f : features) acc += f[static_cast<std::size_t>(j)];
        mean(j) = static_cast<double>(acc / static_cast<long double>(features.size()));
    }
    return mean;
}

}  // namespace detail

// Fits the pristine MVG from pooled patch features.
inline NiqeModel train_model_from_features(const std::vector<FeatureVector>& features,
                                           const NiqeSettings& settings,
                                           std::string corpus_descriptor = {}) {
    detail::validate_niqe_settings(settings.patch_size, settings.sharpness_fraction);
    if (features.empty())
        throw DegenerateInput("train_model: no usable patches in the corpus");
    if (features.size() < static_cast<std::size_t>(kFeatureDim + 1))
        throw InsufficientPatches("train_model: need at least 37 usable patches");

    NiqeModel model;
    model.mvg = fit_mvg(detail::feature_matrix(features));
    model.patch_size = settings.patch_size;
    model.sharpness_fraction = settings.sharpness_fraction;
    model.nss = settings.nss;
    model.corpus_descriptor = std::move(corpus_descriptor);
    return model;
}

inline NiqeModel train_model(const std::vector<LumaPlane>& pristine_frames,
                             const NiqeSettings& settings = {},
                             std::string corpus_descriptor = {}) {
    std::vector<FeatureVector> pooled;
    for (const LumaPlane& frame : pristine_frames) {
        auto fp = frame_patch_features(frame, settings.patch_size, settings.sharpness_fraction);
        pooled.insert(pooled.end(), fp.features.begin(), fp.features.end());
    }
    return train_model_from_features(pooled, settings, std::move(corpus_descriptor));
}

// NIQE score of one frame: distance between the pristine MVG and an MVG of
// the frame's own retained-patch features. With fewer than 37 usable patches
// the frame-side covariance cannot be fit; the pristine covariance is reused
// and the fallback is flagged. A frame with no usable patches at all gets the
// sentinel score with degenerate_frame set.
inline FrameScore score_frame(const LumaPlane& plane, const NiqeModel& model,
                              std::int64_t frame_index = 0) {
    FrameScore result;
    result.frame_index = frame_index;
    result.mean_luma = plane.mean_luma();

    const auto fp = frame_patch_features(plane, model.patch_size, model.sharpness_fraction);
    result.patch_count = static_cast<int>(fp.features.size());

    if (fp.features.empty()) {
        result.score = kDegenerateFrameScore;
        result.degenerate_frame = true;
        return result;
    }

    MvgModel frame_mvg;
    if (fp.features.size() >= static_cast<std::size_t>(kFeatureDim + 1)) {
        frame_mvg = fit_mvg(detail::feature_matrix(fp.features));
    } else {
        frame_mvg.mean = detail::feature_mean(fp.features);
        frame_mvg.covariance = model.mvg.covariance;
        frame_mvg.sample_count = fp.features.size();
        result.covariance_fallback = true;
    }

    result.score = mvg_distance(model.mvg, frame_mvg);
    return result;
}

}  // namespace nrvq
