#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "nrvq/errors.hpp"

namespace nrvq {

// One frame's 8-bit luma samples, row-major.
struct LumaPlane {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> samples;

    LumaPlane() = default;
    LumaPlane(int w, int h, std::uint8_t fill = 0)
        : width(w), height(h), samples(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {}

    std::uint8_t at(int x, int y) const {
        return samples[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)];
    }
    std::uint8_t& at(int x, int y) {
        return samples[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)];
    }

    double mean_luma() const {
        if (samples.empty()) return 0.0;
        long double acc = 0.0L;
        for (const std::uint8_t s : samples) acc += s;
        return static_cast<double>(acc / static_cast<long double>(samples.size()));
    }
};

// Real-valued field co-registered with a luma plane.
struct RealField {
    int width = 0;
    int height = 0;
    std::vector<double> values;

    double at(int x, int y) const {
        return values[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)];
    }
};

// Locally normalized coefficients plus the local standard deviations they
// were computed from. Dimensions equal the source plane's.
struct MscnField {
    int width = 0;
    int height = 0;
    std::vector<double> values;
    std::vector<double> sigma_field;

    double value_at(int x, int y) const {
        return values[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)];
    }
    double sigma_at(int x, int y) const {
        return sigma_field[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)];
    }
};

struct PairwiseProducts {
    RealField h;   // v(i,j)   * v(i,j+1)
    RealField v;   // v(i,j)   * v(i+1,j)
    RealField d1;  // v(i,j)   * v(i+1,j+1)
    RealField d2;  // v(i,j)   * v(i+1,j-1)
};

// Normalization settings. These are fixed constants of the toolkit; they are
// recorded in every model file so scores are only compared across identical
// settings.
inline constexpr int kWindowHalfExtent = 3;
inline constexpr double kWindowSigma = 7.0 / 6.0;
inline constexpr double kNormalizationC = 1.0;  // on the 0-255 intensity scale

// Circularly symmetric normalized Gaussian kernel of size (2*half_extent+1)^2.
inline Eigen::MatrixXd gaussian_window(int half_extent, double sigma) {
    if (half_extent < 1)
        throw InvalidParameter("gaussian_window: half_extent must be >= 1");
    if (!(sigma > 0.0))
        throw InvalidParameter("gaussian_window: sigma must be > 0");

    const int size = 2 * half_extent + 1;
    Eigen::MatrixXd kernel(size, size);
    double total = 0.0;
    for (int dy = -half_extent; dy <= half_extent; ++dy) {
        for (int dx = -half_extent; dx <= half_extent; ++dx) {
            const double w = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
            kernel(dy + half_extent, dx + half_extent) = w;
            total += w;
        }
    }
    kernel /= total;
    return kernel;
}

namespace detail {

// Mirror reflection with edge repeat: -1 -> 0, -2 -> 1, n -> n-1, n+1 -> n-2.
// A single reflection suffices because the window half-extent is smaller
// than the minimum accepted plane size.
inline int reflect_index(int i, int n) {
    if (i < 0) return -1 - i;
    if (i >= n) return 2 * n - 1 - i;
    return i;
}

inline std::vector<double> gaussian_taps(int half_extent, double sigma) {
    std::vector<double> taps(static_cast<std::size_t>(2 * half_extent + 1));
    double total = 0.0;
    for (int t = -half_extent; t <= half_extent; ++t) {
        const double w = std::exp(-(t * t) / (2.0 * sigma * sigma));
        taps[static_cast<std::size_t>(t + half_extent)] = w;
        total += w;
    }
    for (double& w : taps) w /= total;
    return taps;
}

}  // namespace detail

// Mean-subtracted contrast-normalized coefficients:
//   mscn = (I - mu) / (sigma + C)
// with mu and sigma the Gaussian-weighted local mean and standard deviation
// over a 7x7 window (sigma 7/6) on the 0-255 scale, borders mirror-reflected.
// The filter is separable; the two-pass form equals the direct 7x7 window.
inline MscnField mscn(const LumaPlane& plane) {
    const int he = kWindowHalfExtent;
    const int size = 2 * he + 1;
    if (plane.width < size || plane.height < size)
        throw PlaneTooSmall("mscn: plane must be at least 7x7");

    const auto taps = detail::gaussian_taps(he, kWindowSigma);
    const int w = plane.width;
    const int h = plane.height;
    const std::size_t count = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);

    // a constant plane normalizes to exactly zero; the filtered path would
    // leave ~1e-15 rounding residue instead
    const auto [lo, hi] = std::minmax_element(plane.samples.begin(), plane.samples.end());
    if (*lo == *hi) {
        MscnField flat;
        flat.width = w;
        flat.height = h;
        flat.values.assign(count, 0.0);
        flat.sigma_field.assign(count, 0.0);
        return flat;
    }

    // horizontal pass over I and I^2
    std::vector<double> row_mean(count), row_sq(count);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double m = 0.0, s = 0.0;
            for (int t = -he; t <= he; ++t) {
                const double k = taps[static_cast<std::size_t>(t + he)];
                const double v = plane.at(detail::reflect_index(x + t, w), y);
                m += k * v;
                s += k * v * v;
            }
            row_mean[static_cast<std::size_t>(y) * w + x] = m;
            row_sq[static_cast<std::size_t>(y) * w + x] = s;
        }
    }

    MscnField out;
    out.width = w;
    out.height = h;
    out.values.resize(count);
    out.sigma_field.resize(count);

    // vertical pass, then normalize
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double mu = 0.0, m2 = 0.0;
            for (int t = -he; t <= he; ++t) {
                const double k = taps[static_cast<std::size_t>(t + he)];
                const std::size_t idx =
                    static_cast<std::size_t>(detail::reflect_index(y + t, h)) * w + x;
                mu += k * row_mean[idx];
                m2 += k * row_sq[idx];
            }
            const double var = std::max(m2 - mu * mu, 0.0);
            const double sd = std::sqrt(var);
            const std::size_t idx = static_cast<std::size_t>(y) * w + x;
            out.sigma_field[idx] = sd;
            out.values[idx] = (plane.at(x, y) - mu) / (sd + kNormalizationC);
        }
    }
    return out;
}

// Neighboring-coefficient products along the four orientations. Output
// dimensions shrink by one along each shifted axis.
inline PairwiseProducts pairwise_products(const MscnField& field) {
    if (field.width < 2 || field.height < 2)
        throw PlaneTooSmall("pairwise_products: field must be at least 2x2");

    const int w = field.width;
    const int h = field.height;

    PairwiseProducts out;
    out.h = RealField{w - 1, h, std::vector<double>(static_cast<std::size_t>(w - 1) * h)};
    out.v = RealField{w, h - 1, std::vector<double>(static_cast<std::size_t>(w) * (h - 1))};
    out.d1 = RealField{w - 1, h - 1, std::vector<double>(static_cast<std::size_t>(w - 1) * (h - 1))};
    out.d2 = RealField{w - 1, h - 1, std::vector<double>(static_cast<std::size_t>(w - 1) * (h - 1))};

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double v0 = field.value_at(x, y);
            if (x + 1 < w)
                out.h.values[static_cast<std::size_t>(y) * (w - 1) + x] = v0 * field.value_at(x + 1, y);
            if (y + 1 < h)
                out.v.values[static_cast<std::size_t>(y) * w + x] = v0 * field.value_at(x, y + 1);
            if (x + 1 < w && y + 1 < h)
                out.d1.values[static_cast<std::size_t>(y) * (w - 1) + x] = v0 * field.value_at(x + 1, y + 1);
            if (x >= 1 && y + 1 < h)
                out.d2.values[static_cast<std::size_t>(y) * (w - 1) + (x - 1)] = v0 * field.value_at(x - 1, y + 1);
        }
    }
    return out;
}

// Dyadic downsampling: every output sample is the rounded average of the
// corresponding 2x2 block; odd trailing rows/columns are dropped.
inline LumaPlane downsample2(const LumaPlane& plane) {
    if (plane.width < 2 || plane.height < 2)
        throw PlaneTooSmall("downsample2: plane must be at least 2x2");

    LumaPlane out(plane.width / 2, plane.height / 2);
    for (int y = 0; y < out.height; ++y) {
        for (int x = 0; x < out.width; ++x) {
            const unsigned sum = unsigned(plane.at(2 * x, 2 * y)) + plane.at(2 * x + 1, 2 * y) +
                                 plane.at(2 * x, 2 * y + 1) + plane.at(2 * x + 1, 2 * y + 1);
            out.at(x, y) = static_cast<std::uint8_t>((sum + 2) / 4);
        }
    }
    return out;
}

}  // namespace nrvq
