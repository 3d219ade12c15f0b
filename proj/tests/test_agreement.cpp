#include "taskexposure/agreement.hpp"
#include "taskexposure/common.hpp"

#include <doctest.h>

#include <cmath>

using namespace taskexposure;

namespace {

double cov_pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxy += x[i] * y[i];
        sxx += x[i] * x[i];
        syy += y[i] * y[i];
    }
    return (n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
}

// Interval alpha by enumerating ordered pairs of values within and across units.
double pairwise_alpha(const RatingMatrix& m) {
    std::vector<std::vector<double>> units;
    for (std::size_t i = 0; i < m[0].size(); ++i) {
        std::vector<double> u;
        for (const auto& rater : m) {
            if (rater[i]) u.push_back(*rater[i]);
        }
        if (u.size() >= 2) units.push_back(u);
    }
    double n = 0;
    std::vector<double> all;
    for (const auto& u : units) {
        n += static_cast<double>(u.size());
        all.insert(all.end(), u.begin(), u.end());
    }
    double Do = 0;
    for (const auto& u : units) {
        double s = 0;
        for (std::size_t a = 0; a < u.size(); ++a)
            for (std::size_t b = 0; b < u.size(); ++b)
                if (a != b) s += (u[a] - u[b]) * (u[a] - u[b]);
        Do += s / static_cast<double>(u.size() - 1);
    }
    Do /= n;
    double De = 0;
    for (std::size_t a = 0; a < all.size(); ++a)
        for (std::size_t b = 0; b < all.size(); ++b)
            if (a != b) De += (all[a] - all[b]) * (all[a] - all[b]);
    De /= n * (n - 1);
    return 1.0 - Do / De;
}

} // namespace

TEST_SUITE("agreement") {

TEST_CASE("pearson against covariance formula") {
    const std::vector<double> x{0.1, 0.4, 0.35, 0.8, 0.9, 0.2};
    const std::vector<double> y{0.2, 0.5, 0.3, 0.7, 0.95, 0.1};
    CHECK(std::abs(pearson(x, y) - cov_pearson(x, y)) <= 1e-12);
    CHECK(pearson({1, 2, 3}, {3, 2, 1}) == doctest::Approx(-1.0));
    CHECK_THROWS_AS(pearson({1, 1, 1}, {1, 2, 3}), PreconditionError);
    CHECK_THROWS_AS(pearson({1}, {1}), PreconditionError);
    CHECK_THROWS_AS(pearson({1, 2}, {1, 2, 3}), PreconditionError);
}

TEST_CASE("spearman by rank formula") {
    CHECK(spearman({1, 2, 3, 4}, {1, 3, 2, 4}) == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(average_ranks({10, 20, 20, 30}) == std::vector<double>{1, 2.5, 2.5, 4});
    const std::vector<double> x{0.3, 0.1, 0.9, 0.5, 0.7};
    const std::vector<double> y{0.2, 0.4, 0.8, 0.6, 0.9};
    // no ties: 1 - 6 sum d^2 / (n(n^2-1))
    const auto rx = average_ranks(x), ry = average_ranks(y);
    double d2 = 0;
    for (std::size_t i = 0; i < 5; ++i) d2 += (rx[i] - ry[i]) * (rx[i] - ry[i]);
    CHECK(std::abs(spearman(x, y) - (1 - 6 * d2 / (5 * 24))) <= 1e-12);
}

TEST_CASE("krippendorff hand case") {
    const RatingMatrix m{{0.0, 1.0}, {1.0, 0.0}};
    CHECK(krippendorff_alpha(m) == doctest::Approx(-0.5).epsilon(1e-12));
}

TEST_CASE("krippendorff against pair enumeration with missing values") {
    const RatingMatrix m{{0.1, 0.5, 0.9, std::nullopt, 0.4, 0.7},
                         {0.2, 0.4, 0.8, 0.3, std::nullopt, 0.6},
                         {0.1, 0.6, std::nullopt, 0.2, 0.5, 0.9}};
    CHECK(std::abs(krippendorff_alpha(m) - pairwise_alpha(m)) <= 1e-9);
    const RatingMatrix perfect{{0.1, 0.5, 0.9}, {0.1, 0.5, 0.9}};
    CHECK(krippendorff_alpha(perfect) == doctest::Approx(1.0));
}

TEST_CASE("krippendorff degenerate inputs") {
    CHECK_THROWS_AS(krippendorff_alpha({{0.5, 0.5}, {0.5, 0.5}}), PreconditionError);
    CHECK_THROWS_AS(krippendorff_alpha({{0.5, 0.1}}), PreconditionError);
    CHECK_THROWS_AS(krippendorff_alpha({{0.5, 0.1}, {0.5}}), PreconditionError);
    CHECK_THROWS_AS(krippendorff_alpha({{0.5, std::nullopt}, {std::nullopt, 0.1}}), PreconditionError);
}

}
