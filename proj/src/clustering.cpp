#include "taskexposure/clustering.hpp"

#include "taskexposure/prompts.hpp"
#include "taskexposure/random.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

using json = nlohmann::json;

namespace taskexposure {

double squared_distance(const Point& a, const Point& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

namespace {

std::size_t nearest(const Point& p, const std::vector<Point>& centroids, double* dist = nullptr) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.size(); ++c) {
        const double d = squared_distance(p, centroids[c]);
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    if (dist) *dist = best_d;
    return best;
}

std::vector<Point> kmeanspp(const std::vector<Point>& points, std::size_t k, Rng& rng) {
    const std::size_t n = points.size();
    std::vector<Point> centroids;
    centroids.reserve(k);
    centroids.push_back(points[uniform_index(rng, n)]);
    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(points[i], centroids[0]);
    while (centroids.size() < k) {
        double total = 0.0;
        for (double d : d2) total += d;
        std::size_t pick = 0;
        if (total > 0.0) {
            const double r = uniform_unit(rng) * total;
            double cum = 0.0;
            pick = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                cum += d2[i];
                if (cum > r && d2[i] > 0.0) {
                    pick = i;
                    break;
                }
            }
            while (d2[pick] <= 0.0 && pick > 0) --pick;
        } else {
            pick = static_cast<std::size_t>(uniform_index(rng, n));
        }
        centroids.push_back(points[pick]);
        for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(points[i], centroids.back()));
    }
    return centroids;
}

KMeansResult lloyd(const std::vector<Point>& points, std::vector<Point> centroids, std::size_t max_iter) {
    const std::size_t n = points.size();
    const std::size_t k = centroids.size();
    const std::size_t dim = points.front().size();
    KMeansResult r;
    r.assignments.assign(n, std::numeric_limits<std::size_t>::max());
    std::vector<double> dist(n);
    for (std::size_t iter = 0; iter < max_iter; ++iter) {
        bool changed = false;
        CompensatedSum inertia;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t c = nearest(points[i], centroids, &dist[i]);
            inertia.add(dist[i]);
            if (c != r.assignments[i]) {
                r.assignments[i] = c;
                changed = true;
            }
        }
        r.inertia_history.push_back(inertia.value());
        r.iterations = iter + 1;
        if (!changed) {
            r.converged = true;
            break;
        }
        std::vector<Point> sums(k, Point(dim, 0.0));
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            auto& s = sums[r.assignments[i]];
            for (std::size_t d = 0; d < dim; ++d) s[d] += points[i][d];
            ++counts[r.assignments[i]];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) {
                // Reseed at the point currently farthest from its centroid.
                std::size_t far = 0;
                for (std::size_t i = 1; i < n; ++i) {
                    if (dist[i] > dist[far]) far = i;
                }
                centroids[c] = points[far];
                dist[far] = 0.0;
                continue;
            }
            for (std::size_t d = 0; d < dim; ++d) centroids[c][d] = sums[c][d] / static_cast<double>(counts[c]);
        }
    }
    // Final centroids are the means of the terminal assignment.
    std::vector<Point> sums(k, Point(dim, 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t d = 0; d < dim; ++d) sums[r.assignments[i]][d] += points[i][d];
        ++counts[r.assignments[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
        if (counts[c] == 0) continue;
        for (std::size_t d = 0; d < dim; ++d) centroids[c][d] = sums[c][d] / static_cast<double>(counts[c]);
    }
    CompensatedSum inertia;
    for (std::size_t i = 0; i < n; ++i) inertia.add(squared_distance(points[i], centroids[r.assignments[i]]));
    r.inertia = inertia.value();
    r.centroids = std::move(centroids);
    return r;
}

} // namespace

KMeansResult kmeans(const std::vector<Point>& points, std::size_t k, std::uint64_t seed, const KMeansOptions& options) {
    if (points.empty()) throw PreconditionError("kmeans: no points");
    if (k == 0) throw PreconditionError("kmeans: k must be positive");
    if (k > points.size()) {
        throw PreconditionError("kmeans: k=" + std::to_string(k) + " exceeds " + std::to_string(points.size()) +
                                " points");
    }
    const std::size_t dim = points.front().size();
    if (dim == 0) throw PreconditionError("kmeans: zero-dimensional points");
    for (const auto& p : points) {
        if (p.size() != dim) throw PreconditionError("kmeans: points have differing dimensions");
    }
    Rng rng(seed);
    KMeansResult best;
    bool have = false;
    for (std::size_t run = 0; run < std::max<std::size_t>(1, options.restarts); ++run) {
        KMeansResult r = lloyd(points, kmeanspp(points, k, rng), std::max<std::size_t>(1, options.max_iter));
        if (!have || r.inertia < best.inertia) {
            best = std::move(r);
            have = true;
        }
    }
    return best;
}

// ---------------------------------------------------------- exposure clusters

std::string exposure_cluster_name(ExposureCluster c) {
    switch (c) {
    case ExposureCluster::Low: return "Low";
    case ExposureCluster::Augmentation: return "Augmentation";
    case ExposureCluster::Adaptation: return "Adaptation";
    case ExposureCluster::Automation: return "Automation";
    }
    return "Low";
}

RoleClustering cluster_roles(const std::vector<std::pair<double, double>>& roles, std::uint64_t seed,
                             const KMeansOptions& options) {
    if (roles.size() < 4) throw PreconditionError("cluster_roles needs at least 4 roles");
    std::vector<std::size_t> order(roles.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return roles[a] < roles[b]; });
    std::size_t distinct = 1;
    for (std::size_t i = 1; i < order.size(); ++i) {
        if (roles[order[i]] != roles[order[i - 1]]) ++distinct;
    }
    if (distinct < 4) {
        throw PreconditionError("cluster_roles: only " + std::to_string(distinct) +
                                " distinct (mean, std) points; 4 clusters are undefined");
    }
    std::vector<Point> pts;
    pts.reserve(order.size());
    for (std::size_t i : order) pts.push_back({roles[i].first, roles[i].second});
    const KMeansResult km = kmeans(pts, 4, seed, options);

    std::array<std::size_t, 4> by_mean{0, 1, 2, 3};
    std::sort(by_mean.begin(), by_mean.end(), [&](std::size_t a, std::size_t b) {
        if (km.centroids[a][0] != km.centroids[b][0]) return km.centroids[a][0] < km.centroids[b][0];
        return km.centroids[a][1] < km.centroids[b][1];
    });
    std::array<ExposureCluster, 4> name_of{};
    for (std::size_t rank = 0; rank < 4; ++rank) name_of[by_mean[rank]] = static_cast<ExposureCluster>(rank);

    RoleClustering out;
    out.labels.resize(roles.size());
    out.inertia = km.inertia;
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
        const ExposureCluster c = name_of[km.assignments[pos]];
        out.labels[order[pos]] = c;
        ++out.counts[static_cast<std::size_t>(c)];
    }
    for (std::size_t c = 0; c < 4; ++c) {
        out.centroids[static_cast<std::size_t>(name_of[c])] = {km.centroids[c][0], km.centroids[c][1]};
    }
    return out;
}

// ------------------------------------------------------------------- text

namespace {

std::string letters_only(std::string_view word) {
    std::string out;
    for (unsigned char c : word) {
        if (!std::isalpha(c)) return {};
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

bool has_vowel(std::string_view s) { return s.find_first_of("aeiouy") != std::string_view::npos; }

bool ends_with(std::string_view s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

std::string repair_stem(std::string stem) {
    const std::size_t n = stem.size();
    if (n >= 2 && stem[n - 1] == stem[n - 2] && std::string_view("aeiouylsz").find(stem[n - 1]) == std::string_view::npos) {
        stem.pop_back();
        return stem;
    }
    static const char* restore[] = {"at", "iz", "is", "ys", "ag", "bl", "uc", "ur", "ir", "ul", "iv", "ov", "ac", "ak"};
    for (const char* s : restore) {
        if (ends_with(stem, s)) return stem + "e";
    }
    return stem;
}

std::string lemmatize_once(const std::string& w) {
    const std::size_t n = w.size();
    if (n > 4 && ends_with(w, "ies")) return w.substr(0, n - 3) + "y";
    if (ends_with(w, "sses")) return w.substr(0, n - 2);
    if (n > 3 && ends_with(w, "s") && !ends_with(w, "ss") && !ends_with(w, "us") && !ends_with(w, "is")) {
        return w.substr(0, n - 1);
    }
    if (n > 5 && ends_with(w, "ing")) {
        const std::string stem = w.substr(0, n - 3);
        if (stem.size() >= 3 && has_vowel(stem)) return repair_stem(stem);
    }
    if (n > 4 && ends_with(w, "ed") && !ends_with(w, "eed")) {
        const std::string stem = w.substr(0, n - 2);
        if (stem.size() >= 3 && has_vowel(stem)) return repair_stem(stem);
    }
    return w;
}

} // namespace

std::string lemmatize(const std::string& word) {
    std::string cur = word;
    for (int guard = 0; guard < 16; ++guard) {
        std::string next = lemmatize_once(cur);
        if (next == cur) break;
        cur = std::move(next);
    }
    return cur;
}

const Stopwords& Stopwords::english() {
    static const Stopwords list = from_text(
        "i me my myself we our ours ourselves you your yours yourself yourselves he him his himself she her hers "
        "herself it its itself they them their theirs themselves what which who whom this that these those am is "
        "are was were be been being have has had having do does did doing a an the and but if or because as until "
        "while of at by for with about against between into through during before after above below to from up "
        "down in out on off over under again further then once here there when where why how all any both each few "
        "more most other some such no nor not only own same so than too very s t can will just don should now d ll "
        "m o re ve y ain aren couldn didn doesn hadn hasn haven isn ma mightn mustn needn shan shouldn wasn weren "
        "won wouldn");
    return list;
}

Stopwords Stopwords::from_text(std::string_view text) {
    Stopwords s;
    std::istringstream in{std::string(text)};
    for (std::string w; in >> w;) {
        if (w.front() == '#') {
            std::string rest;
            std::getline(in, rest);
            continue;
        }
        const std::string clean = letters_only(w);
        if (!clean.empty()) s.words_.insert(clean);
    }
    return s;
}

Stopwords Stopwords::load(const std::string& path) { return from_text(read_file(path)); }

std::string normalize_text(std::string_view text, const Stopwords& stopwords, Diagnostics* diag) {
    std::string cleaned;
    cleaned.reserve(text.size());
    for (unsigned char c : text) {
        cleaned.push_back(std::isalpha(c) ? static_cast<char>(std::tolower(c)) : ' ');
    }
    std::istringstream in(cleaned);
    std::string out;
    for (std::string w; in >> w;) {
        if (stopwords.contains(w)) continue;
        w = lemmatize(w);
        if (stopwords.contains(w)) continue;
        if (!out.empty()) out.push_back(' ');
        out += w;
    }
    if (out.empty() && diag) diag->info("empty_normalized_text", "text normalized to empty: '" + std::string(text) + "'");
    return out;
}

// -------------------------------------------------------------------- PCA

Point ProjectionModel::project(const Point& x) const {
    if (x.size() != mean.size()) throw PreconditionError("project: dimension mismatch");
    Point z(components.size(), 0.0);
    for (std::size_t c = 0; c < components.size(); ++c) {
        double s = 0.0;
        for (std::size_t d = 0; d < x.size(); ++d) s += (x[d] - mean[d]) * components[c][d];
        z[c] = s;
    }
    return z;
}

std::vector<Point> ProjectionModel::project(const std::vector<Point>& xs) const {
    std::vector<Point> out;
    out.reserve(xs.size());
    for (const auto& x : xs) out.push_back(project(x));
    return out;
}

Point ProjectionModel::reconstruct(const Point& z) const {
    if (z.size() != components.size()) throw PreconditionError("reconstruct: dimension mismatch");
    Point x = mean;
    for (std::size_t c = 0; c < components.size(); ++c) {
        for (std::size_t d = 0; d < x.size(); ++d) x[d] += z[c] * components[c][d];
    }
    return x;
}

json ProjectionModel::to_json() const {
    return json{{"mean", mean},
                {"components", components},
                {"explained_variance", explained_variance},
                {"explained_variance_ratio", explained_variance_ratio}};
}

ProjectionModel ProjectionModel::from_json(const json& j) {
    ProjectionModel m;
    m.mean = j.at("mean").get<Point>();
    m.components = j.at("components").get<std::vector<Point>>();
    m.explained_variance = j.value("explained_variance", std::vector<double>{});
    m.explained_variance_ratio = j.value("explained_variance_ratio", std::vector<double>{});
    for (const auto& c : m.components) {
        if (c.size() != m.mean.size()) throw DataError("projection model: component dimension mismatch");
    }
    return m;
}

ProjectionModel fit_pca(const std::vector<Point>& vectors, std::size_t out_dim) {
    if (vectors.empty()) throw PreconditionError("fit_pca: no vectors");
    if (out_dim == 0) throw PreconditionError("fit_pca: out_dim must be positive");
    const std::size_t n = vectors.size();
    const std::size_t d = vectors.front().size();
    if (out_dim > d) throw PreconditionError("fit_pca: out_dim exceeds input dimension");
    Eigen::MatrixXd X(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        if (vectors[i].size() != d) throw PreconditionError("fit_pca: vectors have differing dimensions");
        for (std::size_t j = 0; j < d; ++j) X(i, j) = vectors[i][j];
    }
    const Eigen::RowVectorXd mu = X.colwise().mean();
    X.rowwise() -= mu;
    const double denom = n > 1 ? static_cast<double>(n - 1) : 1.0;
    const double total_var = X.squaredNorm() / denom;

    Eigen::VectorXd evals;
    Eigen::MatrixXd evecs; // columns are principal axes in input space
    if (n < d) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(X * X.transpose());
        evals = es.eigenvalues().reverse() / denom;
        const Eigen::MatrixXd U = es.eigenvectors().rowwise().reverse();
        evecs = Eigen::MatrixXd::Zero(d, n);
        for (std::size_t c = 0; c < n; ++c) {
            const double lambda = evals(static_cast<Eigen::Index>(c)) * denom;
            if (lambda > 0.0) evecs.col(static_cast<Eigen::Index>(c)) = X.transpose() * U.col(static_cast<Eigen::Index>(c)) / std::sqrt(lambda);
        }
    } else {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(X.transpose() * X / denom);
        evals = es.eigenvalues().reverse();
        evecs = es.eigenvectors().rowwise().reverse();
    }
    const double top = evals.size() > 0 ? std::max(0.0, evals(0)) : 0.0;
    std::size_t rank = 0;
    for (Eigen::Index i = 0; i < evals.size(); ++i) {
        if (evals(i) > 1e-10 * top && evals(i) > 1e-300) ++rank;
    }
    if (rank < out_dim) {
        throw DataError("fit_pca: data has rank " + std::to_string(rank) + ", below out_dim " + std::to_string(out_dim));
    }
    ProjectionModel m;
    m.mean.assign(mu.data(), mu.data() + d);
    for (std::size_t c = 0; c < out_dim; ++c) {
        Eigen::VectorXd v = evecs.col(static_cast<Eigen::Index>(c));
        v.normalize();
        Eigen::Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v(arg) < 0) v = -v;
        m.components.emplace_back(v.data(), v.data() + d);
        const double ev = evals(static_cast<Eigen::Index>(c));
        m.explained_variance.push_back(ev);
        m.explained_variance_ratio.push_back(total_var > 0.0 ? ev / total_var : 0.0);
    }
    return m;
}

// --------------------------------------------------------------- taxonomy

const std::string& TaskTaxonomy::category_label(std::size_t task) const {
    return categories.at(assignment.at(task).first).label;
}

const std::string& TaskTaxonomy::subcategory_label(std::size_t task) const {
    const auto [c, s] = assignment.at(task);
    return categories.at(c).subcategories.at(s).label;
}

TaskTaxonomy build_taxonomy(const std::vector<std::string>& tasks, Provider& provider, std::uint64_t seed,
                            const TaxonomyOptions& options, Diagnostics& diag) {
    if (tasks.size() < options.min_tasks) {
        throw PreconditionError("build_taxonomy needs at least " + std::to_string(options.min_tasks) + " tasks, got " +
                                std::to_string(tasks.size()));
    }
    std::vector<std::string> unique;
    std::map<std::string, std::size_t> index_of;
    std::vector<std::size_t> row_of(tasks.size());
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        if (tasks[i].empty()) throw PreconditionError("build_taxonomy: task " + std::to_string(i) + " is empty");
        auto [it, inserted] = index_of.emplace(tasks[i], unique.size());
        if (inserted) unique.push_back(tasks[i]);
        row_of[i] = it->second;
    }
    EmbeddingBatch emb = embed_texts(provider, unique, options.policy);
    if (!emb.failures.empty()) {
        throw ProviderError("embedding failed for " + std::to_string(emb.failures.size()) + " texts: " +
                            emb.failures.front().second);
    }
    std::vector<Point> vectors;
    vectors.reserve(tasks.size());
    for (std::size_t i = 0; i < tasks.size(); ++i) vectors.push_back(*emb.vectors[row_of[i]]);

    TaskTaxonomy tax;
    tax.projection = fit_pca(vectors, options.pca_dim);
    const std::vector<Point> projected = tax.projection.project(vectors);
    const KMeansResult top = kmeans(projected, options.categories, derive_seed(seed, "taxonomy"), options.kmeans);

    tax.assignment.assign(tasks.size(), {0, 0});
    tax.categories.resize(options.categories);
    std::vector<StructuredRequest> requests;
    std::vector<std::pair<std::size_t, std::optional<std::size_t>>> request_target;
    auto add_label_request = [&](const std::vector<std::size_t>& members, const std::string& tag,
                                 std::size_t cat, std::optional<std::size_t> sub) {
        Rng rng(derive_seed(seed, "label-" + tag));
        std::vector<std::string> sample;
        for (std::size_t idx : sample_without_replacement(rng, members.size(), options.label_sample)) {
            sample.push_back(tasks[members[idx]]);
        }
        requests.push_back(label_request("cluster-" + tag, sample));
        request_target.emplace_back(cat, sub);
    };
    for (std::size_t c = 0; c < options.categories; ++c) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < tasks.size(); ++i) {
            if (top.assignments[i] == c) members.push_back(i);
        }
        Category& cat = tax.categories[c];
        cat.id = c;
        cat.size = members.size();
        cat.label = "cluster-" + std::to_string(c);
        if (members.empty()) continue;
        add_label_request(members, std::to_string(c), c, std::nullopt);

        std::vector<Point> sub_points;
        for (std::size_t i : members) sub_points.push_back(projected[i]);
        const std::size_t k = std::min(options.subcategories, members.size());
        const KMeansResult sub =
            kmeans(sub_points, k, derive_seed(seed, "taxonomy-" + std::to_string(c)), options.kmeans);
        cat.subcategories.resize(k);
        for (std::size_t s = 0; s < k; ++s) {
            cat.subcategories[s].id = s;
            cat.subcategories[s].label = "cluster-" + std::to_string(c) + "." + std::to_string(s);
        }
        std::vector<std::vector<std::size_t>> sub_members(k);
        for (std::size_t m = 0; m < members.size(); ++m) {
            tax.assignment[members[m]] = {c, sub.assignments[m]};
            sub_members[sub.assignments[m]].push_back(members[m]);
        }
        for (std::size_t s = 0; s < k; ++s) {
            cat.subcategories[s].size = sub_members[s].size();
            if (!sub_members[s].empty()) {
                add_label_request(sub_members[s], std::to_string(c) + "." + std::to_string(s), c, s);
            }
        }
    }
    BatchResult labels = submit_batch(provider, requests, options.policy, options.cache);
    for (std::size_t r = 0; r < requests.size(); ++r) {
        const auto [c, sub] = request_target[r];
        std::string& target = sub ? tax.categories[c].subcategories[*sub].label : tax.categories[c].label;
        if (const auto* resp = labels.find(requests[r].request_id)) {
            target = trim(resp->payload.at("label").get<std::string>());
        } else {
            const BatchFailure* f = labels.report.failure_for(requests[r].request_id);
            diag.warn("label_failed", requests[r].request_id + ": using placeholder label" +
                                          (f ? " (" + failure_class_name(f->failure) + ": " + f->message + ")" : ""));
        }
    }
    return tax;
}

std::string taxonomy_table(const TaskTaxonomy& taxonomy, const std::vector<std::string>& task_keys) {
    if (task_keys.size() != taxonomy.assignment.size()) throw PreconditionError("taxonomy_table: key count mismatch");
    std::ostringstream out;
    out << "task_key\tcategory_id\tcategory_label\tsubcategory_id\tsubcategory_label\n";
    for (std::size_t i = 0; i < task_keys.size(); ++i) {
        const auto [c, s] = taxonomy.assignment[i];
        out << task_keys[i] << '\t' << c << '\t' << taxonomy.categories[c].label << '\t' << c << '.' << s << '\t'
            << taxonomy.categories[c].subcategories.at(s).label << '\n';
    }
    return out.str();
}

} // namespace taskexposure
