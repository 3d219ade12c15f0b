#include "taskexposure/clustering.hpp"
#include "taskexposure/random.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <set>

using namespace taskexposure;

namespace {

// Minimum within-cluster sum of squares over every labelling with all k labels used.
double brute_force_inertia(const std::vector<Point>& pts, std::size_t k) {
    const std::size_t n = pts.size();
    const std::size_t d = pts[0].size();
    std::vector<std::size_t> label(n, 0);
    double best = std::numeric_limits<double>::infinity();
    for (;;) {
        std::vector<std::size_t> count(k, 0);
        std::vector<Point> sum(k, Point(d, 0.0));
        for (std::size_t i = 0; i < n; ++i) {
            ++count[label[i]];
            for (std::size_t j = 0; j < d; ++j) sum[label[i]][j] += pts[i][j];
        }
        if (std::all_of(count.begin(), count.end(), [](std::size_t c) { return c > 0; })) {
            double cost = 0;
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < d; ++j) {
                    const double diff = pts[i][j] - sum[label[i]][j] / static_cast<double>(count[label[i]]);
                    cost += diff * diff;
                }
            }
            best = std::min(best, cost);
        }
        std::size_t pos = 0;
        while (pos < n && ++label[pos] == k) label[pos++] = 0;
        if (pos == n) break;
    }
    return best;
}

// Cyclic Jacobi eigenvalue iteration on a symmetric matrix.
void jacobi_eigen(std::vector<std::vector<double>> a, std::vector<double>& values,
                  std::vector<std::vector<double>>& vectors) {
    const std::size_t n = a.size();
    vectors.assign(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) vectors[i][i] = 1.0;
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
        if (off < 1e-30) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                if (std::abs(a[p][q]) < 1e-300) continue;
                const double theta = (a[q][q] - a[p][p]) / (2 * a[p][q]);
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1));
                const double c = 1 / std::sqrt(t * t + 1), s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a[k][p], akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a[p][k], aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = vectors[k][p], vkq = vectors[k][q];
                    vectors[k][p] = c * vkp - s * vkq;
                    vectors[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    values.resize(n);
    for (std::size_t i = 0; i < n; ++i) values[i] = a[i][i];
}

std::vector<Point> gaussian_points(std::size_t n, std::size_t d, std::uint64_t seed, std::vector<double> scale) {
    Rng rng(seed);
    std::vector<Point> pts(n, Point(d));
    for (auto& p : pts)
        for (std::size_t j = 0; j < d; ++j) p[j] = scale[j] * standard_normal(rng);
    return pts;
}

} // namespace

TEST_SUITE("clustering") {

TEST_CASE("k-means matches exhaustive partition oracle") {
    for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
        for (std::size_t k : {2u, 3u}) {
            const std::size_t n = k == 2 ? 12 : 10;
            Rng rng(seed * 31 + k);
            std::vector<Point> pts(n, Point(2));
            for (std::size_t i = 0; i < n; ++i) {
                const double cx = static_cast<double>(i % k) * 4.0;
                pts[i] = {cx + standard_normal(rng), standard_normal(rng)};
            }
            CAPTURE(seed);
            CAPTURE(k);
            const auto r = kmeans(pts, k, seed);
            CHECK(r.inertia == doctest::Approx(brute_force_inertia(pts, k)).epsilon(1e-9));
        }
    }
}

TEST_CASE("two blobs recovered") {
    Rng rng(9);
    std::vector<Point> pts;
    for (int i = 0; i < 12; ++i) {
        const double c = i < 6 ? 0.0 : 10.0;
        pts.push_back({c + 0.5 * standard_normal(rng), c + 0.5 * standard_normal(rng)});
    }
    const auto r = kmeans(pts, 2, 4);
    for (int i = 1; i < 6; ++i) CHECK(r.assignments[static_cast<std::size_t>(i)] == r.assignments[0]);
    for (int i = 7; i < 12; ++i) CHECK(r.assignments[static_cast<std::size_t>(i)] == r.assignments[6]);
    CHECK(r.assignments[0] != r.assignments[6]);
}

TEST_CASE("k-means degenerate k") {
    const std::vector<Point> pts{{0, 0}, {2, 0}, {4, 3}};
    const auto one = kmeans(pts, 1, 1);
    CHECK(one.centroids[0][0] == doctest::Approx(2.0));
    CHECK(one.centroids[0][1] == doctest::Approx(1.0));
    const auto all = kmeans(pts, 3, 1);
    CHECK(all.inertia == doctest::Approx(0.0));
    CHECK(std::set<std::size_t>(all.assignments.begin(), all.assignments.end()).size() == 3);
    CHECK_THROWS_AS(kmeans(pts, 4, 1), PreconditionError);
    CHECK_THROWS_AS(kmeans({}, 1, 1), PreconditionError);
    CHECK_THROWS_AS(kmeans(pts, 0, 1), PreconditionError);
    CHECK_THROWS_AS(kmeans({{0, 0}, {1}}, 1, 1), PreconditionError);
}

TEST_CASE("k-means deterministic, inertia non-increasing, fixpoint") {
    const auto pts = gaussian_points(80, 3, 21, {1, 1, 1});
    const auto a = kmeans(pts, 5, 77);
    const auto b = kmeans(pts, 5, 77);
    CHECK(a.assignments == b.assignments);
    CHECK(a.inertia == b.inertia);
    for (std::size_t i = 1; i < a.inertia_history.size(); ++i) {
        CHECK(a.inertia_history[i] <= a.inertia_history[i - 1] + 1e-12);
    }
    CHECK(a.converged);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < a.centroids.size(); ++c) {
            if (squared_distance(pts[i], a.centroids[c]) < squared_distance(pts[i], a.centroids[best])) best = c;
        }
        CHECK(a.assignments[i] == best);
    }
}

TEST_CASE("role clusters named by ascending mean") {
    const std::pair<double, double> seeds[] = {{0.38, 0.12}, {0.48, 0.16}, {0.59, 0.16}, {0.70, 0.14}};
    Rng rng(5);
    std::vector<std::pair<double, double>> roles;
    std::vector<int> truth;
    for (int rep = 0; rep < 25; ++rep) {
        for (int c = 3; c >= 0; --c) {
            roles.push_back({seeds[c].first + 0.005 * standard_normal(rng), seeds[c].second + 0.005 * standard_normal(rng)});
            truth.push_back(c);
        }
    }
    const auto rc = cluster_roles(roles, 3);
    for (std::size_t i = 0; i < roles.size(); ++i) CHECK(static_cast<int>(rc.labels[i]) == truth[i]);
    for (std::size_t c = 1; c < 4; ++c) CHECK(rc.centroids[c].first > rc.centroids[c - 1].first);
    CHECK(exposure_cluster_name(ExposureCluster::Automation) == "Automation");

    auto permuted = roles;
    std::reverse(permuted.begin(), permuted.end());
    const auto rp = cluster_roles(permuted, 3);
    for (std::size_t i = 0; i < roles.size(); ++i) CHECK(rp.labels[roles.size() - 1 - i] == rc.labels[i]);
}

TEST_CASE("role clusters need distinct points") {
    std::vector<std::pair<double, double>> same(10, {0.5, 0.1});
    CHECK_THROWS_AS(cluster_roles(same, 1), PreconditionError);
    CHECK_THROWS_AS(cluster_roles({{0.1, 0.1}, {0.2, 0.2}, {0.3, 0.3}}, 1), PreconditionError);
}

TEST_CASE("text normalization") {
    CHECK(normalize_text("Managing 3 visa applications!") == "manage visa application");
    Diagnostics d;
    CHECK(normalize_text("", Stopwords::english(), &d).empty());
    CHECK(d.count("empty_normalized_text") == 1);
    for (const char* s : {"Processes claims and policies", "Coaching staff; scheduled meetings", "the of and"}) {
        const std::string once = normalize_text(s);
        CHECK(normalize_text(once) == once);
    }
    CHECK(lemmatize("policies") == "policy");
    CHECK(lemmatize("process") == "process");
    CHECK(lemmatize("status") == "status");
}

TEST_CASE("shipped stopword file matches built-in list") {
    const auto file = Stopwords::load(std::string(TE_SOURCE_DIR) + "/data/stopwords.txt");
    CHECK(file.size() == Stopwords::english().size());
    CHECK(file.contains("the"));
}

TEST_CASE("pca against Jacobi eigen oracle") {
    const auto pts = gaussian_points(60, 5, 8, {3.0, 2.0, 1.0, 0.5, 0.25});
    const auto m = fit_pca(pts, 3);
    const std::size_t n = pts.size(), d = 5;
    Point mean(d, 0.0);
    for (const auto& p : pts)
        for (std::size_t j = 0; j < d; ++j) mean[j] += p[j] / static_cast<double>(n);
    std::vector<std::vector<double>> cov(d, std::vector<double>(d, 0.0));
    for (const auto& p : pts)
        for (std::size_t a = 0; a < d; ++a)
            for (std::size_t b = 0; b < d; ++b) cov[a][b] += (p[a] - mean[a]) * (p[b] - mean[b]) / static_cast<double>(n - 1);
    std::vector<double> vals;
    std::vector<std::vector<double>> vecs;
    jacobi_eigen(cov, vals, vecs);
    std::vector<std::size_t> order(d);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vals[a] > vals[b]; });
    double total = 0;
    for (double v : vals) total += v;
    for (std::size_t c = 0; c < 3; ++c) {
        CHECK(m.explained_variance[c] == doctest::Approx(vals[order[c]]).epsilon(1e-9));
        CHECK(m.explained_variance_ratio[c] == doctest::Approx(vals[order[c]] / total).epsilon(1e-9));
        double dot = 0;
        for (std::size_t j = 0; j < d; ++j) dot += m.components[c][j] * vecs[j][order[c]];
        CHECK(std::abs(dot) == doctest::Approx(1.0).epsilon(1e-8));
    }
    for (std::size_t a = 0; a < 3; ++a)
        for (std::size_t b = 0; b < 3; ++b) {
            double dot = 0;
            for (std::size_t j = 0; j < d; ++j) dot += m.components[a][j] * m.components[b][j];
            CHECK(std::abs(dot - (a == b ? 1.0 : 0.0)) <= 1e-6);
        }
    // reconstruction error equals the discarded eigenvalues
    double err = 0;
    for (const auto& p : pts) err += squared_distance(p, m.reconstruct(m.project(p)));
    err /= static_cast<double>(n - 1);
    CHECK(err == doctest::Approx(vals[order[3]] + vals[order[4]]).epsilon(1e-6));
}

TEST_CASE("pca exact subspace and shapes") {
    Rng rng(2);
    std::vector<Point> pts;
    for (int i = 0; i < 20; ++i) {
        const double a = standard_normal(rng), b = standard_normal(rng);
        pts.push_back({a + b, a - b, 2 * a, 3 * b, 1.0});
    }
    const auto m = fit_pca(pts, 2);
    for (const auto& p : pts) CHECK(squared_distance(p, m.reconstruct(m.project(p))) <= 1e-18);
    CHECK_THROWS_AS(fit_pca(pts, 3), DataError);
    const auto wide = gaussian_points(40, 768, 3, std::vector<double>(768, 1.0));
    const auto mw = fit_pca(wide, 25);
    CHECK(mw.project(wide[0]).size() == 25);
    CHECK(mw.output_dim() == 25);
    const auto round = ProjectionModel::from_json(mw.to_json());
    CHECK(round.project(wide[1]) == mw.project(wide[1]));
}

TEST_CASE("isotropic sample has roughly equal variance ratios") {
    const auto pts = gaussian_points(4000, 4, 12, {1, 1, 1, 1});
    const auto m = fit_pca(pts, 4);
    for (double r : m.explained_variance_ratio) CHECK(r == doctest::Approx(0.25).epsilon(0.15));
}

TEST_CASE("taxonomy recovers constructed groups") {
    const std::size_t dim = 40;
    MockProvider m(MockProvider::Options{true, dim});
    Rng rng(4);
    std::vector<std::string> tasks;
    for (std::size_t g = 0; g < 10; ++g) {
        for (std::size_t j = 0; j < 3; ++j) {
            const std::string text = "group" + std::to_string(g) + " item" + std::to_string(j);
            Embedding v(dim, 0.0);
            v[g] = 10.0;
            for (double& x : v) x += 0.05 * standard_normal(rng);
            m.add_embedding(text, v);
            tasks.push_back(text);
        }
    }
    m.set_responder([](const StructuredRequest&) { return std::optional<std::string>(R"({"label": "Records Management"})"); });
    TaxonomyOptions opt;
    opt.policy.backoff_base = std::chrono::milliseconds(0);
    Diagnostics d;
    // strict mock: responder unused, labels fall back to placeholders
    const auto strict = build_taxonomy(tasks, m, 6, opt, d);
    CHECK(d.count("label_failed") > 0);
    CHECK(strict.categories[0].label == "cluster-0");
    for (std::size_t g = 0; g < 10; ++g) {
        const auto c = strict.assignment[g * 3].first;
        CHECK(strict.assignment[g * 3 + 1].first == c);
        CHECK(strict.assignment[g * 3 + 2].first == c);
        CHECK(strict.categories[c].size == 3);
        CHECK(strict.categories[c].subcategories.size() == 3);
    }

    MockProvider loose(MockProvider::Options{false, dim});
    for (std::size_t i = 0; i < tasks.size(); ++i) loose.add_embedding(tasks[i], m.embed({tasks[i]})[0]);
    loose.set_responder([](const StructuredRequest&) { return std::optional<std::string>(R"({"label": "Records Management"})"); });
    Diagnostics d2;
    const auto labelled = build_taxonomy(tasks, loose, 6, opt, d2);
    CHECK(d2.empty());
    CHECK(labelled.category_label(0) == "Records Management");
    CHECK(labelled.subcategory_label(5) == "Records Management");
    CHECK(labelled.assignment == strict.assignment);

    std::vector<std::string> keys;
    for (std::size_t i = 0; i < tasks.size(); ++i) keys.push_back("k" + std::to_string(i));
    const std::string table = taxonomy_table(labelled, keys);
    CHECK(std::count(table.begin(), table.end(), '\n') == 31);

    CHECK_THROWS_AS(build_taxonomy({"a", "b"}, loose, 6, opt, d2), PreconditionError);
}

}
