#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "nrvq/pooling.hpp"

using namespace nrvq;

namespace {

FrameScoreSeries series(std::vector<double> scores, double mean_luma = 128.0) {
    FrameScoreSeries out;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        FrameScore f;
        f.frame_index = static_cast<std::int64_t>(i);
        f.score = scores[i];
        f.patch_count = 1;
        f.mean_luma = mean_luma;
        out.push_back(f);
    }
    return out;
}

}  // namespace

TEST_CASE("weight branch values") {
    REQUIRE(weight(10.0) == 1.0);
    REQUIRE(weight(0.0) == 1.0);
    REQUIRE(weight(40.0) == 0.0);
    REQUIRE(weight(1000.0) == 0.0);
    REQUIRE(weight(20.0) == Catch::Approx(0.8).margin(1e-12));
    REQUIRE(weight(15.0) == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(weight(39.999) == Catch::Approx(4e-5).margin(1e-9));
}

TEST_CASE("weight continuity and monotonicity") {
    for (const double knot : {15.0, 40.0}) {
        for (const double eps : {1e-6, 1e-9, 1e-12}) {
            REQUIRE(std::fabs(weight(knot - eps) - weight(knot + eps)) <= 0.04 * 2 * eps + 1e-15);
        }
    }
    double prev = 2.0;
    for (double m = 0.0; m <= 80.0; m += 0.01) {
        const double k = weight(m);
        REQUIRE(k <= prev);
        REQUIRE(k >= 0.0);
        REQUIRE(k <= 1.0);
        prev = k;
    }
}

TEST_CASE("weight rejects invalid scores") {
    REQUIRE_THROWS_AS(weight(-0.001), InvalidScore);
    REQUIRE_THROWS_AS(weight(std::numeric_limits<double>::quiet_NaN()), InvalidScore);
    REQUIRE_THROWS_AS(weight(std::numeric_limits<double>::infinity()), InvalidScore);
}

TEST_CASE("pool_weighted reference cases") {
    SECTION("constant series") {
        const auto p = pool_weighted(series({10, 10, 10}));
        REQUIRE(p.score == Catch::Approx(10.0).margin(1e-15));
        REQUIRE(p.total_weight == 3.0);
        REQUIRE(p.frames_total == 3);
        REQUIRE(p.frames_zero_weight == 0);
        REQUIRE(!p.fallback_used);
    }
    SECTION("outlier dropped entirely") {
        const auto p = pool_weighted(series({10, 50}));
        REQUIRE(p.score == 10.0);
        REQUIRE(p.frames_zero_weight == 1);
        REQUIRE(!p.fallback_used);
    }
    SECTION("all outliers fall back to the mean") {
        const auto p = pool_weighted(series({50, 60}));
        REQUIRE(p.score == Catch::Approx(55.0).margin(1e-12));
        REQUIRE(p.fallback_used);
        REQUIRE(p.total_weight == 0.0);
        REQUIRE(p.frames_zero_weight == 2);
    }
    SECTION("ramp frames get partial weight") {
        // m=20 -> k=0.8: score = (10*1 + 20*0.8) / 1.8
        const auto p = pool_weighted(series({10, 20}));
        REQUIRE(p.score == Catch::Approx(26.0 / 1.8).margin(1e-12));
    }
    SECTION("empty series") {
        REQUIRE_THROWS_AS(pool_weighted({}), EmptySeries);
    }
}

TEST_CASE("pool_mean reference cases") {
    REQUIRE(pool_mean(series({10, 50})).score == 30.0);
    REQUIRE(pool_mean(series({7})).score == 7.0);
    REQUIRE(pool_mean(series({10, 50})).total_weight == 2.0);
    REQUIRE(pool_mean(series({10, 50})).method == PoolingMethod::mean);
    REQUIRE_THROWS_AS(pool_mean({}), EmptySeries);
}

TEST_CASE("pool_weighted is exactly permutation invariant") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(0.0, 60.0);
    std::vector<double> scores(257);
    for (auto& s : scores) s = u(rng);
    scores[13] = 1e-9;
    scores[77] = 59.999;

    const auto reference = pool_weighted(series(scores));
    for (int trial = 0; trial < 20; ++trial) {
        std::shuffle(scores.begin(), scores.end(), rng);
        const auto p = pool_weighted(series(scores));
        REQUIRE(p.score == reference.score);  // bit-exact
        REQUIRE(p.total_weight == reference.total_weight);
    }
}

TEST_CASE("adding outlier frames never changes the weighted score") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 39.0);
    std::vector<double> scores(64);
    for (auto& s : scores) s = u(rng);
    const auto reference = pool_weighted(series(scores));

    for (const double outlier : {40.0, 77.3, 100.0, 1e6}) {
        auto augmented = scores;
        augmented.push_back(outlier);
        std::shuffle(augmented.begin(), augmented.end(), rng);
        const auto p = pool_weighted(series(augmented));
        REQUIRE(p.score == reference.score);  // bit-exact
        REQUIRE(p.frames_zero_weight == 1);
    }
}

TEST_CASE("pool_weighted equals pool_mean when every score is below 15") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.0, 14.999);
    std::vector<double> scores(101);
    for (auto& s : scores) s = u(rng);
    const auto w = pool_weighted(series(scores));
    const auto m = pool_mean(series(scores));
    REQUIRE(std::fabs(w.score - m.score) <= 1e-12);
}

TEST_CASE("weighted score stays inside the span of weighted frames") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(0.0, 80.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> scores(32);
        for (auto& s : scores) s = u(rng);
        const auto p = pool_weighted(series(scores));
        if (p.fallback_used) continue;
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (const double s : scores)
            if (weight(s) > 0.0) {
                lo = std::min(lo, s);
                hi = std::max(hi, s);
            }
        REQUIRE(p.score >= lo - 1e-12);
        REQUIRE(p.score <= hi + 1e-12);
    }
}

TEST_CASE("diagnose_frames thresholds") {
    FrameScoreSeries s;
    FrameScore dark;
    dark.frame_index = 0;
    dark.score = 80.0;
    dark.mean_luma = 5.0;
    FrameScore normal;
    normal.frame_index = 1;
    normal.score = 12.0;
    normal.mean_luma = 120.0;
    FrameScore edge;
    edge.frame_index = 2;
    edge.score = 39.999;
    edge.mean_luma = 16.0;
    s = {dark, normal, edge};

    const auto d = diagnose_frames(s);
    REQUIRE(d.size() == 3);

    REQUIRE(d[0].dark_frame);
    REQUIRE(d[0].outlier_score);
    REQUIRE(d[0].weight == 0.0);

    REQUIRE(!d[1].dark_frame);
    REQUIRE(!d[1].outlier_score);
    REQUIRE(d[1].weight == 1.0);

    REQUIRE(!d[2].dark_frame);  // luma 16 is not below the threshold
    REQUIRE(!d[2].outlier_score);
    REQUIRE(d[2].weight == Catch::Approx(4e-5).margin(1e-9));
}
