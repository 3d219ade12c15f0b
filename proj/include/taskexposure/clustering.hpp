#pragma once

#include "taskexposure/common.hpp"
#include "taskexposure/llm.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace taskexposure {

using Point = std::vector<double>;

struct KMeansOptions {
    std::size_t max_iter = 300;
    std::size_t restarts = 10;
};

struct KMeansResult {
    std::vector<std::size_t> assignments;
    std::vector<Point> centroids;
    double inertia = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
    /// Inertia after each assignment step of the winning restart.
    std::vector<double> inertia_history;
};

/// k-means++ seeding and Lloyd iterations, best of `restarts` by inertia.
/// Throws PreconditionError on empty input, ragged dimensions, k == 0 or
/// k > |points|.
KMeansResult kmeans(const std::vector<Point>& points, std::size_t k, std::uint64_t seed,
                    const KMeansOptions& options = {});

double squared_distance(const Point& a, const Point& b);

// ---------------------------------------------------------- exposure clusters

enum class ExposureCluster { Low, Augmentation, Adaptation, Automation };

std::string exposure_cluster_name(ExposureCluster c);

struct RoleClustering {
    std::vector<ExposureCluster> labels; // aligned with input
    std::array<std::pair<double, double>, 4> centroids{}; // (mean, std) indexed by cluster
    std::array<std::size_t, 4> counts{};
    double inertia = 0.0;
};

/// k=4 on raw (E_j, sigma_j); clusters named by ascending centroid mean.
/// Throws PreconditionError with fewer than 4 distinct points.
RoleClustering cluster_roles(const std::vector<std::pair<double, double>>& roles, std::uint64_t seed,
                             const KMeansOptions& options = {});

// ------------------------------------------------------------------- text

class Stopwords {
public:
    /// Built-in English list (same as data/stopwords.txt).
    static const Stopwords& english();
    static Stopwords from_text(std::string_view text);
    static Stopwords load(const std::string& path);

    bool contains(const std::string& word) const { return words_.count(word) > 0; }
    std::size_t size() const { return words_.size(); }

private:
    std::set<std::string> words_;
};

/// Suffix-rule lemma, iterated to a fixpoint.
std::string lemmatize(const std::string& word);

/// lowercase, strip digits and punctuation, drop stopwords, lemmatize.
/// An empty result is reported to `diag` when given.
std::string normalize_text(std::string_view text, const Stopwords& stopwords = Stopwords::english(),
                           Diagnostics* diag = nullptr);

// -------------------------------------------------------------------- PCA

struct ProjectionModel {
    Point mean;
    std::vector<Point> components; // out_dim rows of input_dim
    std::vector<double> explained_variance;
    std::vector<double> explained_variance_ratio;

    std::size_t input_dim() const { return mean.size(); }
    std::size_t output_dim() const { return components.size(); }

    Point project(const Point& x) const;
    std::vector<Point> project(const std::vector<Point>& xs) const;
    Point reconstruct(const Point& z) const;

    nlohmann::json to_json() const;
    static ProjectionModel from_json(const nlohmann::json& j);
};

/// Mean-centred projection on the top `out_dim` principal components.
/// Throws DataError naming the achieved rank when it is below `out_dim`.
ProjectionModel fit_pca(const std::vector<Point>& vectors, std::size_t out_dim = 25);

// --------------------------------------------------------------- taxonomy

struct TaxonomyOptions {
    std::size_t categories = 10;
    std::size_t subcategories = 3;
    std::size_t pca_dim = 25;
    std::size_t label_sample = 200;
    std::size_t min_tasks = 30;
    KMeansOptions kmeans;
    BatchPolicy policy;
    ResponseCache* cache = nullptr;
};

struct Subcategory {
    std::size_t id = 0;
    std::string label;
    std::size_t size = 0;
};

struct Category {
    std::size_t id = 0;
    std::string label;
    std::size_t size = 0;
    std::vector<Subcategory> subcategories;
};

struct TaskTaxonomy {
    std::vector<Category> categories;
    std::vector<std::pair<std::size_t, std::size_t>> assignment; // (category, subcategory) per task
    ProjectionModel projection;

    const std::string& category_label(std::size_t task) const;
    const std::string& subcategory_label(std::size_t task) const;
};

/// embed -> PCA -> k-means categories -> k-means subcategories -> sampled labels.
/// Throws PreconditionError with fewer than `min_tasks` tasks or empty
/// texts, ProviderError when embedding fails.
TaskTaxonomy build_taxonomy(const std::vector<std::string>& tasks, Provider& provider, std::uint64_t seed,
                            const TaxonomyOptions& options, Diagnostics& diag);

/// Rows: task_key, category_id, category_label, subcategory_id, subcategory_label.
std::string taxonomy_table(const TaskTaxonomy& taxonomy, const std::vector<std::string>& task_keys);

} // namespace taskexposure
