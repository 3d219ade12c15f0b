#include "taskexposure/agreement.hpp"

#include "taskexposure/common.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace taskexposure {

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw PreconditionError("pearson: length mismatch");
    if (x.size() < 2) throw PreconditionError("pearson: need at least two values");
    const double n = static_cast<double>(x.size());
    CompensatedSum sx, sy;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx.add(x[i]);
        sy.add(y[i]);
    }
    const double mx = sx.value() / n;
    const double my = sy.value() / n;
    CompensatedSum sxy, sxx, syy;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy.add(dx * dy);
        sxx.add(dx * dx);
        syy.add(dy * dy);
    }
    if (sxx.value() <= 0.0 || syy.value() <= 0.0) throw PreconditionError("pearson: zero variance");
    const double r = sxy.value() / std::sqrt(sxx.value() * syy.value());
    return std::clamp(r, -1.0, 1.0);
}

std::vector<double> average_ranks(const std::vector<double>& x) {
    std::vector<std::size_t> idx(x.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> ranks(x.size());
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
        const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
        i = j + 1;
    }
    return ranks;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw PreconditionError("spearman: length mismatch");
    return pearson(average_ranks(x), average_ranks(y));
}

double krippendorff_alpha(const RatingMatrix& ratings) {
    if (ratings.size() < 2) throw PreconditionError("krippendorff_alpha: need at least two raters");
    const std::size_t items = ratings.front().size();
    for (const auto& row : ratings) {
        if (row.size() != items) throw PreconditionError("krippendorff_alpha: raters rate different item counts");
    }
    // Coincidence matrix o[c][k] over the distinct values.
    std::map<double, std::map<double, double>> o;
    for (std::size_t u = 0; u < items; ++u) {
        std::vector<double> values;
        for (const auto& row : ratings) {
            if (row[u]) values.push_back(*row[u]);
        }
        const std::size_t m = values.size();
        if (m < 2) continue;
        for (std::size_t a = 0; a < m; ++a) {
            for (std::size_t b = 0; b < m; ++b) {
                if (a != b) o[values[a]][values[b]] += 1.0 / static_cast<double>(m - 1);
            }
        }
    }
    if (o.empty()) throw PreconditionError("krippendorff_alpha: no item has two or more ratings");
    std::map<double, double> n_c;
    double n = 0.0;
    for (const auto& [c, row] : o) {
        for (const auto& [k, v] : row) {
            n_c[c] += v;
            n += v;
        }
    }
    CompensatedSum observed, expected;
    for (const auto& [c, row] : o) {
        for (const auto& [k, v] : row) observed.add(v * (c - k) * (c - k));
    }
    for (const auto& [c, nc] : n_c) {
        for (const auto& [k, nk] : n_c) expected.add(nc * nk * (c - k) * (c - k));
    }
    const double Do = observed.value() / n;
    const double De = expected.value() / (n * (n - 1.0));
    if (!(De > 0.0)) throw PreconditionError("krippendorff_alpha: zero expected disagreement (constant ratings)");
    return 1.0 - Do / De;
}

} // namespace taskexposure
