#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "nrvq/errors.hpp"

namespace nrvq {

// Generalized Gaussian shape/scale pair. alpha = 2 is the Gaussian case,
// alpha = 1 the Laplacian. sigma is the RMS of the samples (second moment).
struct GgdParams {
    double alpha = 0.0;
    double sigma = 0.0;
};

// Asymmetric generalized Gaussian. sigma_left/sigma_right are one-sided RMS
// values over the strictly negative / strictly positive samples; mean is the
// location term implied by the fitted shape and the scale difference.
struct AggdParams {
    double alpha = 0.0;
    double mean = 0.0;
    double sigma_left = 0.0;
    double sigma_right = 0.0;
};

// Multivariate Gaussian over a feature space: sample mean, sample covariance
// (n-1 normalization, exactly symmetric) and the number of rows it was fit on.
struct MvgModel {
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;
    std::size_t sample_count = 0;

    Eigen::Index dim() const { return mean.size(); }
};

namespace detail {

// GGD moment ratio r(alpha) = Gamma(2/a)^2 / (Gamma(1/a) * Gamma(3/a)).
// r is strictly increasing on [0.2, 10] (checked by the unit tests), rising
// from ~0.063 toward the uniform-distribution limit 0.75.
inline double ggd_ratio(double alpha) {
    const double g2 = std::tgamma(2.0 / alpha);
    return g2 * g2 / (std::tgamma(1.0 / alpha) * std::tgamma(3.0 / alpha));
}

// Precomputed lookup grid for moment matching: alpha in [0.2, 10], step 1e-3,
// nearest-ratio selection. Built once, shared by every fit.
class AlphaRatioGrid {
public:
    static constexpr double kAlphaLo = 0.2;
    static constexpr double kAlphaStep = 1e-3;
    static constexpr int kPoints = 9801;

    AlphaRatioGrid() : ratios_(kPoints) {
        for (int k = 0; k < kPoints; ++k) ratios_[k] = ggd_ratio(alpha_at(k));
    }

    static double alpha_at(int k) { return kAlphaLo + kAlphaStep * k; }

    double ratio_at(int k) const { return ratios_[k]; }

    // Nearest grid alpha for a target ratio; out-of-range targets clamp to the
    // grid ends.
    double nearest_alpha(double ratio) const {
        const auto it = std::lower_bound(ratios_.begin(), ratios_.end(), ratio);
        if (it == ratios_.begin()) return alpha_at(0);
        if (it == ratios_.end()) return alpha_at(kPoints - 1);
        const int hi = static_cast<int>(it - ratios_.begin());
        const int lo = hi - 1;
        return (ratio - ratios_[lo] <= ratios_[hi] - ratio) ? alpha_at(lo) : alpha_at(hi);
    }

private:
    std::vector<double> ratios_;
};

inline const AlphaRatioGrid& alpha_grid() {
    static const AlphaRatioGrid grid;
    return grid;
}

}  // namespace detail

// Fits a zero-mean GGD by moment matching: the empirical ratio
// (mean|x|)^2 / mean(x^2) picks alpha off the precomputed grid, sigma comes
// from the raw second moment.
inline GgdParams fit_ggd(std::span<const double> samples) {
    if (samples.size() < 100)
        throw DegenerateInput("fit_ggd: need at least 100 samples");

    long double sum_abs = 0.0L, sum_sq = 0.0L;
    double lo = samples[0], hi = samples[0];
    for (const double x : samples) {
        sum_abs += std::fabs(x);
        sum_sq += static_cast<long double>(x) * x;
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    if (!(lo < hi))
        throw DegenerateInput("fit_ggd: zero sample variance");

    const double n = static_cast<double>(samples.size());
    const double mean_abs = static_cast<double>(sum_abs) / n;
    const double mean_sq = static_cast<double>(sum_sq) / n;
    const double ratio = mean_abs * mean_abs / mean_sq;

    return GgdParams{detail::alpha_grid().nearest_alpha(ratio), std::sqrt(mean_sq)};
}

// Fits an asymmetric GGD. One-sided RMS scales come from the strictly
// negative / strictly positive samples; alpha is matched through the
// asymmetry-corrected ratio on the same grid as fit_ggd; the mean follows
// from the fitted parameters as (sigma_r - sigma_l) * Gamma(2/a) / Gamma(1/a).
inline AggdParams fit_aggd(std::span<const double> samples) {
    if (samples.size() < 100)
        throw DegenerateInput("fit_aggd: need at least 100 samples");

    long double neg_sq = 0.0L, pos_sq = 0.0L, sum_abs = 0.0L;
    std::size_t neg_n = 0, pos_n = 0;
    for (const double x : samples) {
        if (x < 0.0) {
            neg_sq += static_cast<long double>(x) * x;
            sum_abs -= x;
            ++neg_n;
        } else if (x > 0.0) {
            pos_sq += static_cast<long double>(x) * x;
            sum_abs += x;
            ++pos_n;
        }
    }
    if (neg_n == 0 || pos_n == 0)
        throw DegenerateInput("fit_aggd: need samples on both sides of zero");

    const double n = static_cast<double>(samples.size());
    const double mean_sq = static_cast<double>(neg_sq + pos_sq) / n;
    if (!(mean_sq > 0.0))
        throw DegenerateInput("fit_aggd: zero sample variance");

    const double sigma_l = std::sqrt(static_cast<double>(neg_sq) / static_cast<double>(neg_n));
    const double sigma_r = std::sqrt(static_cast<double>(pos_sq) / static_cast<double>(pos_n));

    const double g = sigma_l / sigma_r;
    const double mean_abs = static_cast<double>(sum_abs) / n;
    const double rhat = mean_abs * mean_abs / mean_sq;
    const double rhat_norm =
        rhat * (g * g * g + 1.0) * (g + 1.0) / ((g * g + 1.0) * (g * g + 1.0));

    const double alpha = detail::alpha_grid().nearest_alpha(rhat_norm);
    const double mean =
        (sigma_r - sigma_l) * std::tgamma(2.0 / alpha) / std::tgamma(1.0 / alpha);

    return AggdParams{alpha, mean, sigma_l, sigma_r};
}

// Sample mean + covariance over feature rows. Accumulates in long double so
// the result is insensitive to row order; the covariance is written as an
// exactly symmetric matrix.
inline MvgModel fit_mvg(const Eigen::Ref<const Eigen::MatrixXd>& features) {
    const Eigen::Index n = features.rows();
    const Eigen::Index d = features.cols();
    if (n < d + 1)
        throw InsufficientPatches("fit_mvg: need more rows than dimensions");

    std::vector<long double> mean_acc(static_cast<std::size_t>(d), 0.0L);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < d; ++j)
            mean_acc[static_cast<std::size_t>(j)] += features(i, j);

    Eigen::VectorXd mean(d);
    for (Eigen::Index j = 0; j < d; ++j)
        mean(j) = static_cast<double>(mean_acc[static_cast<std::size_t>(j)] / n);

    std::vector<long double> cov_acc(static_cast<std::size_t>(d * d), 0.0L);
    std::vector<double> centered(static_cast<std::size_t>(d));
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < d; ++j)
            centered[static_cast<std::size_t>(j)] = features(i, j) - mean(j);
        for (Eigen::Index j = 0; j < d; ++j) {
            const long double cj = centered[static_cast<std::size_t>(j)];
            for (Eigen::Index k = j; k < d; ++k)
                cov_acc[static_cast<std::size_t>(j * d + k)] +=
                    cj * centered[static_cast<std::size_t>(k)];
        }
    }

    Eigen::MatrixXd cov(d, d);
    for (Eigen::Index j = 0; j < d; ++j) {
        for (Eigen::Index k = j; k < d; ++k) {
            const double v =
                static_cast<double>(cov_acc[static_cast<std::size_t>(j * d + k)] / (n - 1));
            cov(j, k) = v;
            cov(k, j) = v;
        }
    }

    return MvgModel{std::move(mean), std::move(cov), static_cast<std::size_t>(n)};
}

// Distance between two MVG models:
//   sqrt( (m1-m2)^T ((S1+S2)/2)^-1 (m1-m2) )
// The pooled covariance is inverted through a Cholesky factorization; if that
// fails, a ridge of 1e-8 * trace/dim is added once and the factorization is
// retried before giving up with SingularCovariance.
inline double mvg_distance(const MvgModel& a, const MvgModel& b) {
    const Eigen::Index d = a.mean.size();
    if (b.mean.size() != d || a.covariance.rows() != d || a.covariance.cols() != d ||
        b.covariance.rows() != d || b.covariance.cols() != d)
        throw DimensionMismatch("mvg_distance: model dimensions differ");

    Eigen::MatrixXd pooled = 0.5 * (a.covariance + b.covariance);
    const Eigen::VectorXd diff = a.mean - b.mean;

    Eigen::LLT<Eigen::MatrixXd> llt(pooled);
    if (llt.info() != Eigen::Success) {
        const double ridge = 1e-8 * pooled.trace() / static_cast<double>(d);
        if (!(ridge > 0.0))
            throw SingularCovariance("mvg_distance: pooled covariance is singular");
        pooled.diagonal().array() += ridge;
        llt.compute(pooled);
        if (llt.info() != Eigen::Success)
            throw SingularCovariance("mvg_distance: pooled covariance is singular");
    }

    const double q = diff.dot(llt.solve(diff));
    return std::sqrt(std::max(q, 0.0));
}

// Standard sample Pearson correlation, two-pass and clamped to [-1, 1].
inline double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size())
        throw DegenerateInput("pearson: length mismatch");
    if (x.size() < 3)
        throw DegenerateInput("pearson: need at least 3 points");

    const double n = static_cast<double>(x.size());
    long double sx = 0.0L, sy = 0.0L;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
    }
    const double mx = static_cast<double>(sx / n);
    const double my = static_cast<double>(sy / n);

    long double sxx = 0.0L, syy = 0.0L, sxy = 0.0L;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxx += static_cast<long double>(dx) * dx;
        syy += static_cast<long double>(dy) * dy;
        sxy += static_cast<long double>(dx) * dy;
    }
    if (!(sxx > 0.0L) || !(syy > 0.0L))
        throw DegenerateInput("pearson: constant sequence");

    const double r = static_cast<double>(sxy / std::sqrt(sxx * syy));
    return std::clamp(r, -1.0, 1.0);
}

}  // namespace nrvq
