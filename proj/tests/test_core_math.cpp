#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "nrvq/core_math.hpp"
#include "support/samplers.hpp"

using namespace nrvq;

TEST_CASE("alpha ratio grid is strictly increasing") {
    const auto& grid = detail::alpha_grid();
    for (int k = 1; k < detail::AlphaRatioGrid::kPoints; ++k)
        REQUIRE(grid.ratio_at(k) > grid.ratio_at(k - 1));
    REQUIRE(grid.nearest_alpha(detail::ggd_ratio(2.0)) == Catch::Approx(2.0).margin(1e-9));
    REQUIRE(grid.nearest_alpha(-1.0) == Catch::Approx(0.2));
    REQUIRE(grid.nearest_alpha(2.0) == Catch::Approx(10.0));
}

TEST_CASE("fit_ggd recovers known distributions") {
    std::mt19937_64 rng(42);

    SECTION("standard normal") {
        const auto xs = oracle::sample_normal(rng, 1.0, 100000);
        const auto p = fit_ggd(xs);
        REQUIRE(p.alpha == Catch::Approx(2.0).margin(0.1));
        REQUIRE(p.sigma == Catch::Approx(1.0).margin(0.05));
    }
    SECTION("Laplace(0,1)") {
        const auto xs = oracle::sample_laplace(rng, 1.0, 100000);
        const auto p = fit_ggd(xs);
        REQUIRE(p.alpha == Catch::Approx(1.0).margin(0.1));
    }
}

TEST_CASE("fit_ggd rejects degenerate input") {
    REQUIRE_THROWS_AS(fit_ggd(std::vector<double>(1000, 0.0)), DegenerateInput);
    REQUIRE_THROWS_AS(fit_ggd(std::vector<double>(1000, 3.5)), DegenerateInput);
    REQUIRE_THROWS_AS(fit_ggd(std::vector<double>(99, 1.0)), DegenerateInput);
}

TEST_CASE("fit_ggd scale equivariance") {
    std::mt19937_64 rng(7);
    const auto xs = oracle::sample_ggd(rng, 1.5, 1.0, 100000);
    const auto base = fit_ggd(xs);
    for (const double c : {0.25, 3.0, 117.0}) {
        std::vector<double> scaled(xs.size());
        std::transform(xs.begin(), xs.end(), scaled.begin(), [&](double x) { return c * x; });
        const auto p = fit_ggd(scaled);
        REQUIRE(std::fabs(p.alpha - base.alpha) <= 1e-3 + 1e-12);
        REQUIRE(p.sigma == Catch::Approx(c * base.sigma).epsilon(0.01));
    }
}

TEST_CASE("fit_aggd symmetric input balances the sides") {
    std::mt19937_64 rng(11);
    SECTION("gaussian") {
        const auto xs = oracle::sample_normal(rng, 1.0, 100000);
        const auto p = fit_aggd(xs);
        const double rel = std::fabs(p.sigma_left - p.sigma_right) /
                           std::max(p.sigma_left, p.sigma_right);
        REQUIRE(rel < 0.05);
        REQUIRE(p.mean == Catch::Approx(0.0).margin(0.05));
    }
    SECTION("laplace") {
        const auto xs = oracle::sample_laplace(rng, 1.0, 100000);
        const auto p = fit_aggd(xs);
        const double rel = std::fabs(p.sigma_left - p.sigma_right) /
                           std::max(p.sigma_left, p.sigma_right);
        REQUIRE(rel < 0.05);
    }
}

TEST_CASE("fit_aggd recovers planted parameters") {
    std::mt19937_64 rng(123);
    const auto xs = oracle::sample_aggd(rng, 1.5, 0.5, 2.0, 100000);
    const auto p = fit_aggd(xs);
    REQUIRE(p.alpha == Catch::Approx(1.5).epsilon(0.10));
    REQUIRE(p.sigma_left == Catch::Approx(0.5).epsilon(0.10));
    REQUIRE(p.sigma_right == Catch::Approx(2.0).epsilon(0.10));
    // mean is defined by the fitted parameters
    const double eta =
        (p.sigma_right - p.sigma_left) * std::tgamma(2.0 / p.alpha) / std::tgamma(1.0 / p.alpha);
    REQUIRE(p.mean == Catch::Approx(eta).margin(1e-12));
}

TEST_CASE("fit_aggd rejects one-sided input") {
    std::vector<double> pos(1000);
    std::iota(pos.begin(), pos.end(), 1.0);
    REQUIRE_THROWS_AS(fit_aggd(pos), DegenerateInput);
    std::vector<double> neg(1000);
    for (std::size_t i = 0; i < neg.size(); ++i) neg[i] = -1.0 - double(i);
    REQUIRE_THROWS_AS(fit_aggd(neg), DegenerateInput);
    REQUIRE_THROWS_AS(fit_aggd(std::vector<double>{1.0, -1.0}), DegenerateInput);
}

TEST_CASE("fit_mvg basic contracts") {
    SECTION("identical rows give zero covariance") {
        Eigen::MatrixXd m(40, 3);
        Eigen::RowVector3d v(1.5, -2.0, 7.0);
        for (int i = 0; i < 40; ++i) m.row(i) = v;
        const auto model = fit_mvg(m);
        REQUIRE(model.sample_count == 40);
        REQUIRE((model.mean.transpose() - v).norm() == 0.0);
        REQUIRE(model.covariance.norm() == 0.0);
    }
    SECTION("unit variance noise gives near-identity covariance") {
        std::mt19937_64 rng(19);
        std::normal_distribution<double> d(0.0, 1.0);
        Eigen::MatrixXd m(1000, 36);
        for (int i = 0; i < m.rows(); ++i)
            for (int j = 0; j < m.cols(); ++j) m(i, j) = d(rng);
        const auto model = fit_mvg(m);
        const Eigen::MatrixXd err =
            model.covariance - Eigen::MatrixXd::Identity(36, 36);
        REQUIRE(err.cwiseAbs().maxCoeff() < 0.15);
    }
    SECTION("boundary row count") {
        REQUIRE_THROWS_AS(fit_mvg(Eigen::MatrixXd::Random(36, 36)), InsufficientPatches);
        REQUIRE_NOTHROW(fit_mvg(Eigen::MatrixXd::Random(37, 36)));
    }
}

TEST_CASE("fit_mvg covariance is symmetric PSD and order-free") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> d(0.0, 1.0);
    Eigen::MatrixXd m(200, 12);
    for (int i = 0; i < m.rows(); ++i) {
        const double shift = d(rng);
        for (int j = 0; j < m.cols(); ++j) m(i, j) = 3.0 * d(rng) + shift;
    }
    const auto model = fit_mvg(m);

    REQUIRE((model.covariance - model.covariance.transpose()).norm() == 0.0);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(model.covariance);
    REQUIRE(es.eigenvalues().minCoeff() >= -1e-9 * model.covariance.trace());

    // permuting rows leaves mean and covariance unchanged within 1e-12
    std::vector<int> perm(static_cast<std::size_t>(m.rows()));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Eigen::MatrixXd shuffled(m.rows(), m.cols());
    for (int i = 0; i < m.rows(); ++i) shuffled.row(i) = m.row(perm[static_cast<std::size_t>(i)]);
    const auto model2 = fit_mvg(shuffled);
    REQUIRE((model.mean - model2.mean).cwiseAbs().maxCoeff() < 1e-12);
    REQUIRE((model.covariance - model2.covariance).cwiseAbs().maxCoeff() < 1e-12);
}

namespace {

MvgModel make_model(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
    return MvgModel{mean, cov, 100};
}

}  // namespace

TEST_CASE("mvg_distance hand-computable cases") {
    const Eigen::Index d = 36;
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);
    Eigen::VectorXd zero = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd e0 = zero;
    e0(0) = 1.0;

    SECTION("identical models") {
        const auto a = make_model(zero, eye);
        REQUIRE(mvg_distance(a, a) <= 1e-9);
    }
    SECTION("identity covariances, unit offset") {
        const auto a = make_model(zero, eye);
        const auto b = make_model(e0, eye);
        REQUIRE(mvg_distance(a, b) == Catch::Approx(1.0).margin(1e-9));
    }
    SECTION("4x identity covariances, unit offset") {
        const auto a = make_model(zero, 4.0 * eye);
        const auto b = make_model(e0, 4.0 * eye);
        REQUIRE(mvg_distance(a, b) == Catch::Approx(0.5).margin(1e-9));
    }
}

TEST_CASE("mvg_distance symmetry, positivity and offset monotonicity") {
    std::mt19937_64 rng(77);
    std::normal_distribution<double> d(0.0, 1.0);
    const Eigen::Index dim = 8;
    Eigen::MatrixXd base = Eigen::MatrixXd::Zero(dim, dim);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) base(i, j) = d(rng);
    const Eigen::MatrixXd cov1 = base * base.transpose() + Eigen::MatrixXd::Identity(dim, dim);
    const Eigen::MatrixXd cov2 = 2.0 * Eigen::MatrixXd::Identity(dim, dim);

    Eigen::VectorXd dir(dim);
    for (int i = 0; i < dim; ++i) dir(i) = d(rng);
    dir.normalize();

    double prev = -1.0;
    for (const double t : {0.0, 0.5, 1.0, 2.0, 4.0}) {
        const auto a = make_model(Eigen::VectorXd::Zero(dim), cov1);
        const auto b = make_model((t * dir).eval(), cov2);
        const double dist = mvg_distance(a, b);
        const double dist_rev = mvg_distance(b, a);
        REQUIRE(dist == dist_rev);  // exact symmetry
        REQUIRE(dist >= 0.0);
        REQUIRE(dist > prev - 1e-15);
        prev = dist;
    }
}

TEST_CASE("mvg_distance error paths") {
    const auto a = make_model(Eigen::VectorXd::Zero(4), Eigen::MatrixXd::Identity(4, 4));
    const auto b = make_model(Eigen::VectorXd::Zero(5), Eigen::MatrixXd::Identity(5, 5));
    REQUIRE_THROWS_AS(mvg_distance(a, b), DimensionMismatch);

    const auto z1 = make_model(Eigen::VectorXd::Zero(4), Eigen::MatrixXd::Zero(4, 4));
    auto z2 = make_model(Eigen::VectorXd::Ones(4), Eigen::MatrixXd::Zero(4, 4));
    REQUIRE_THROWS_AS(mvg_distance(z1, z2), SingularCovariance);
}

TEST_CASE("mvg_distance tolerates rank-deficient covariance via ridge") {
    // rank-1 covariance: plain Cholesky fails, the ridge retry succeeds
    const Eigen::Index dim = 6;
    Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(dim, 1.0, 2.0);
    const Eigen::MatrixXd rank1 = v * v.transpose();
    const auto a = make_model(Eigen::VectorXd::Zero(dim), rank1);
    const auto b = make_model(Eigen::VectorXd::Ones(dim), rank1);
    const double dist = mvg_distance(a, b);
    REQUIRE(std::isfinite(dist));
    REQUIRE(dist >= 0.0);
}

TEST_CASE("pearson reference values") {
    REQUIRE(pearson(std::vector<double>{1, 2, 3, 4}, std::vector<double>{1, 2, 3, 4}) ==
            Catch::Approx(1.0).margin(1e-12));
    REQUIRE(pearson(std::vector<double>{1, 2, 3}, std::vector<double>{3, 2, 1}) ==
            Catch::Approx(-1.0).margin(1e-12));
    REQUIRE(pearson(std::vector<double>{1, 2, 3}, std::vector<double>{2, 4, 7}) ==
            Catch::Approx(15.0 / std::sqrt(228.0)).margin(1e-9));
}

TEST_CASE("pearson affine invariance") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> x(20), y(20);
        for (std::size_t i = 0; i < x.size(); ++i) {
            x[i] = u(rng);
            y[i] = u(rng);
        }
        const double r = pearson(x, y);
        const double a = std::fabs(u(rng)) + 0.1;
        const double b = u(rng);
        std::vector<double> yt(y.size());
        std::transform(y.begin(), y.end(), yt.begin(), [&](double v) { return a * v + b; });
        REQUIRE(pearson(x, yt) == Catch::Approx(r).margin(1e-12));
        std::vector<double> xt(x.size());
        std::transform(x.begin(), x.end(), xt.begin(), [&](double v) { return a * v + b; });
        REQUIRE(pearson(xt, y) == Catch::Approx(r).margin(1e-12));
    }
}

TEST_CASE("pearson error paths") {
    REQUIRE_THROWS_AS(pearson(std::vector<double>{1, 2}, std::vector<double>{1, 2}),
                      DegenerateInput);
    REQUIRE_THROWS_AS(pearson(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2}),
                      DegenerateInput);
    REQUIRE_THROWS_AS(pearson(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}),
                      DegenerateInput);
}
