#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <doctest.h>

#include "sqbox/envs/generators.hpp"
#include "sqbox/errors.hpp"
#include "sqbox/multibox.hpp"
#include "sqbox/rng.hpp"

using namespace sqbox;

namespace {

// First m rows pinned to mean 0, sample sd 1 (m-1 denominator), followed by
// calibration rows at chosen distances from 0.
PointSet pinned_1d(const std::vector<double>& calibration) {
    std::vector<double> data = {1.0, -1.0, 1.0, -1.0, 0.0};  // m = 5
    // mean 0; sum sq = 4, denominator 4 -> sd exactly 1.
    data.insert(data.end(), calibration.begin(), calibration.end());
    return PointSet(std::move(data), 5 + calibration.size(), 1);
}

}  // namespace

TEST_CASE("fit_sbox pinned 1-d example") {
    PointSet points = pinned_1d({0.5, 1.0, 1.5, 2.0});
    BoxInterval box =
        fit_sbox(points, 5, 0.2, QuantileStrategy::strict());
    CHECK(box.beta == 2.0);
    CHECK(box.center[0] == 0.0);
    CHECK(box.scale[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(box.lower()[0] == doctest::Approx(-2.0).epsilon(1e-15));
    CHECK(box.upper()[0] == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("fit_sbox identical points abort") {
    std::vector<double> data(20, 3.0);
    PointSet points(std::move(data), 10, 2);
    CHECK_THROWS_AS(fit_sbox(points, 4, 0.5, QuantileStrategy::strict()),
                    AllScalesZero);
}

TEST_CASE("fit_sbox zero-scale dimension replaced by smallest nonzero") {
    // Column 0 constant over the first m rows, column 1 has sd 1; the zero
    // scale must be replaced by 1, so both dimensions share the same scale.
    std::vector<double> data = {
        5.0, 1.0, 5.0, -1.0, 5.0, 1.0, 5.0, -1.0, 5.0, 0.0,  // m = 5 rows
        5.5, 0.0, 4.5, 0.5,  6.0, 0.0, 5.0, 1.5,             // calibration
    };
    PointSet points(std::move(data), 9, 2);
    BoxInterval box =
        fit_sbox(points, 5, 0.2, QuantileStrategy::strict());
    CHECK(box.scale[0] == doctest::Approx(box.scale[1]).epsilon(1e-15));
    CHECK(box.scale[1] == doctest::Approx(1.0).epsilon(1e-15));
    // Scores are max(|x0 - 5|, |x1|)/1: {0.5, 0.5, 1.0, 1.5}; k = 4 -> 1.5.
    CHECK(box.beta == 1.5);
}

TEST_CASE("fit_sbox location and scale come only from the first m rows") {
    Rng rng(4, 1);
    std::vector<double> head;
    for (int i = 0; i < 30; ++i) head.push_back(rng.normal(2.0, 3.0));
    std::vector<double> a = head, b = head;
    for (int i = 0; i < 40; ++i) {
        double shared = rng.normal(0.0, 1.0);
        a.push_back(shared);
        b.push_back(shared * 4.0 + 1.0);  // different calibration rows
    }
    BoxInterval ba = fit_sbox(PointSet(std::move(a), 70, 1), 30, 0.2,
                              QuantileStrategy::strict());
    BoxInterval bb = fit_sbox(PointSet(std::move(b), 70, 1), 30, 0.2,
                              QuantileStrategy::strict());
    CHECK(ba.center[0] == bb.center[0]);
    CHECK(ba.scale[0] == bb.scale[0]);
}

TEST_CASE("fit_sbox calibration-row permutation invariance") {
    Rng rng(5, 2);
    std::vector<double> data;
    for (int i = 0; i < 200; ++i) data.push_back(rng.normal(0.0, 1.0));
    PointSet base(std::vector<double>(data), 100, 2);
    BoxInterval reference =
        fit_sbox(base, 20, 0.1, QuantileStrategy::strict());
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<double> shuffled(data);
        // permute whole calibration rows (rows 20..99)
        for (std::size_t i = 100; i > 21; --i) {
            std::size_t j = 20 + rng.uniform_below(i - 20);
            std::swap(shuffled[(i - 1) * 2], shuffled[j * 2]);
            std::swap(shuffled[(i - 1) * 2 + 1], shuffled[j * 2 + 1]);
        }
        BoxInterval permuted = fit_sbox(PointSet(std::move(shuffled), 100, 2),
                                        20, 0.1, QuantileStrategy::strict());
        CHECK(permuted.beta == reference.beta);
        CHECK(permuted.center == reference.center);
    }
}

TEST_CASE("fit_sbox monotone in delta and dominated by the CI variant") {
    PointSet points = gen_gaussian(400, 3, 0.5, 99);
    double prev = std::numeric_limits<double>::infinity();
    for (double delta : {0.02, 0.05, 0.1, 0.2, 0.4}) {
        BoxInterval box =
            fit_sbox(points, 50, delta, QuantileStrategy::strict());
        CHECK(box.beta <= prev);
        prev = box.beta;
        BoxInterval ci =
            fit_sbox(points, 50, delta, QuantileStrategy::ucb_for(delta));
        CHECK(ci.beta >= box.beta);
    }
}

TEST_CASE("fit_sbox split validation") {
    PointSet points = gen_gaussian(20, 2, 0.0, 7);
    CHECK_THROWS_AS(fit_sbox(points, 19, 0.5, QuantileStrategy::strict()),
                    BadSplit);
    CHECK_THROWS_AS(fit_sbox(points, 1, 0.5, QuantileStrategy::strict()),
                    BadSplit);
    CHECK_THROWS_AS(fit_sbox(points, 10, 0.01, QuantileStrategy::strict()),
                    DeltaTooSmall);
}

TEST_CASE("fit_bonferroni matches fit_sbox in one dimension") {
    PointSet points = gen_gaussian(300, 1, 0.0, 11);
    BoxInterval sbox = fit_sbox(points, 40, 0.2, QuantileStrategy::strict());
    BoxInterval bonf = fit_bonferroni(points, 40, 0.2);
    CHECK(bonf.beta == 1.0);
    CHECK(bonf.lower()[0] == doctest::Approx(sbox.lower()[0]).epsilon(1e-14));
    CHECK(bonf.upper()[0] == doctest::Approx(sbox.upper()[0]).epsilon(1e-14));
}

TEST_CASE("fit_bonferroni per-dimension strict computation") {
    // Each coordinate must reproduce the 1-d SBox at level delta/d on the
    // same split.
    PointSet points = gen_gaussian(500, 4, 0.3, 21);
    const long m = 50;
    const double delta = 0.2;
    BoxInterval bonf = fit_bonferroni(points, m, delta);
    for (std::size_t j = 0; j < 4; ++j) {
        std::vector<double> column;
        for (std::size_t i = 0; i < points.rows(); ++i)
            column.push_back(points.at(i, j));
        BoxInterval one = fit_sbox(PointSet(std::move(column), 500, 1), m,
                                   delta / 4.0, QuantileStrategy::strict());
        CHECK(bonf.lower()[j] == doctest::Approx(one.lower()[0]).epsilon(1e-14));
        CHECK(bonf.upper()[j] == doctest::Approx(one.upper()[0]).epsilon(1e-14));
    }
    CHECK_THROWS_AS(fit_bonferroni(points, 485, 0.2), DeltaTooSmall);
}

TEST_CASE("box_contains closed boundary semantics") {
    BoxInterval box;
    box.center = {0.0, 1.0};
    box.scale = {1.0, 2.0};
    box.beta = 1.0;
    CHECK(box_contains(box, {0.0, 1.0}));
    CHECK(box_contains(box, {1.0, 3.0}));   // exactly on the face
    CHECK(box_contains(box, {-1.0, -1.0}));
    CHECK_FALSE(box_contains(box, {1.0 + 1e-12, 0.0}));
    CHECK_THROWS_AS(box_contains(box, {0.0}), DimensionMismatch);
}

TEST_CASE("calibration coverage is at least the conformal rank") {
    // On the calibration rows themselves, the number of scores <= beta is at
    // least the strict index k by the order-statistic definition.
    Rng rng(31, 8);
    for (int rep = 0; rep < 100; ++rep) {
        long n = 40 + static_cast<long>(rng.uniform_below(300));
        long m = 5 + static_cast<long>(rng.uniform_below(20));
        long d = 1 + static_cast<long>(rng.uniform_below(4));
        double delta = 0.1 + 0.4 * rng.uniform01();
        std::vector<double> data(static_cast<std::size_t>(n * d));
        for (double& v : data) v = rng.normal(0.0, 1.0);
        PointSet points(std::move(data), n, d);
        BoxInterval box;
        try {
            box = fit_sbox(points, m, delta, QuantileStrategy::strict());
        } catch (const AllScalesZero&) {
            continue;
        }
        long covered = 0;
        for (long i = m; i < n; ++i) {
            std::vector<double> x(d);
            for (long j = 0; j < d; ++j) x[j] = points.at(i, j);
            covered += box_contains(box, x) ? 1 : 0;
        }
        long k = conformal_index(n - m, delta);
        CHECK(covered >= k);
    }
}

TEST_CASE("bonferroni is conservative under strong correlation") {
    PointSet train = gen_gaussian(2000, 10, 0.9, 123);
    PointSet test = gen_gaussian(4000, 10, 0.9, 321);
    BoxInterval sbox = fit_sbox(train, 50, 0.2, QuantileStrategy::strict());
    BoxInterval bonf = fit_bonferroni(train, 50, 0.2);
    long sbox_hits = 0, bonf_hits = 0;
    for (std::size_t i = 0; i < test.rows(); ++i) {
        std::vector<double> x(10);
        for (std::size_t j = 0; j < 10; ++j) x[j] = test.at(i, j);
        sbox_hits += box_contains(sbox, x) ? 1 : 0;
        bonf_hits += box_contains(bonf, x) ? 1 : 0;
    }
    CHECK(bonf_hits > sbox_hits);
}
