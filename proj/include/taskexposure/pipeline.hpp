#pragma once

#include "taskexposure/common.hpp"
#include "taskexposure/exposure.hpp"
#include "taskexposure/llm.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace taskexposure {

inline constexpr int kArtifactSchemaVersion = 1;

struct ProviderConfig {
    std::string kind = "mock"; // mock | remote
    std::string fixtures;      // mock fixture file, optional
    bool strict = false;       // mock: refuse unfixtured requests
    RemoteOptions remote;
};

struct PipelineConfig {
    std::string config_dir = ".";

    std::string corpus;
    std::string fte_table;
    std::string salary_table;
    std::string profession_table;
    double population_total = 0.0; // 0: sum of FTE cells
    std::string grade_map;
    std::string vocabulary;
    std::string stopwords;
    std::size_t min_department_vacancies = 1;
    bool scrub_personal_data = true;

    ProviderConfig provider;
    BatchPolicy batch;
    std::size_t max_description_chars = 12000;

    double delta = kDefaultDelta;
    double theta = 0.8;
    std::vector<double> theta_grid;
    std::vector<double> sensitivity_deltas{0.75, 0.5, 1.0};
    std::uint64_t seed = 42;

    std::size_t exposure_clusters = 4;
    std::size_t categories = 10;
    std::size_t subcategories = 3;
    std::size_t pca_dim = 25;
    std::size_t label_sample = 200;
    std::size_t taxonomy_min_tasks = 30;

    double rake_tol = 1e-6;
    std::size_t rake_max_iter = 30;

    double redesign_fraction = 0.10;
    std::vector<std::string> redesign_variants{"focus", "augment_reorder", "new_tasks"};

    std::string cache_dir;
    std::string output_dir = "out";

    PipelineConfig();

    /// Overrides fields present in `j`; relative paths resolve against
    /// `base_dir`. Throws PreconditionError on unknown keys or bad types.
    void apply_json(const nlohmann::json& j, const std::string& base_dir);
    nlohmann::json to_json() const;

    /// delta in (0,1], theta grid within [0,1], paths resolvable.
    /// Throws PreconditionError for values, DataError for paths.
    void validate() const;

    /// `base` (defaults plus flags) overridden by the file.
    static PipelineConfig load(const std::string& path, PipelineConfig base = {});
};

enum class Stage { Ingest, Extract, Weight, Cluster, Rake, Savings, Redesign, Report };

inline constexpr Stage kStages[] = {Stage::Ingest, Stage::Extract,  Stage::Weight,   Stage::Cluster,
                                    Stage::Rake,   Stage::Savings,  Stage::Redesign, Stage::Report};

std::string stage_name(Stage s);
std::optional<Stage> stage_from_name(std::string_view name);
const std::vector<Stage>& upstream_of(Stage s);
/// Topological order of the stage graph; throws std::logic_error on a cycle.
std::vector<Stage> stage_order();

struct StageArtifact {
    std::string stage;
    int schema_version = kArtifactSchemaVersion;
    std::string input_hash;
    std::string content_hash;
    std::string produced_at;
    std::map<std::string, std::string> upstream; // stage -> content hash
    std::map<std::string, std::string> files;    // file -> sha256
    nlohmann::json failures = nlohmann::json::array();

    nlohmann::json to_json() const;
    static StageArtifact from_json(const nlohmann::json& j);
};

/// Upstream artifacts are missing or out of date.
class StaleUpstreamError : public DataError {
public:
    using DataError::DataError;
};

struct StageStatus {
    enum class State { Missing, Stale, Current };
    State state = State::Missing;
    std::string reason;
};

struct StageResult {
    Stage stage = Stage::Ingest;
    StageArtifact artifact;
    bool skipped = false; // current already, nothing done
    Diagnostics diagnostics;
};

std::unique_ptr<Provider> make_provider(const ProviderConfig& config);

class Pipeline {
public:
    /// Uses `provider` when given, otherwise builds one from the config.
    explicit Pipeline(PipelineConfig config, Provider* provider = nullptr);
    ~Pipeline();

    const PipelineConfig& config() const { return config_; }
    std::string stage_dir(Stage s) const;
    std::string manifest_path(Stage s) const;
    std::optional<StageArtifact> manifest(Stage s) const;

    /// Hash of the stage's config slice, input files and upstream content hashes.
    std::string expected_input_hash(Stage s) const;
    StageStatus status(Stage s) const;

    /// Throws StaleUpstreamError when an upstream stage is not current.
    StageResult run(Stage s, bool force = false);
    /// Runs every stage that is not current, in order.
    std::vector<StageResult> run_all(bool force = false);

private:
    Provider& provider();
    ResponseCache* cache();
    nlohmann::json config_slice(Stage s) const;

    StageArtifact run_ingest(Diagnostics& diag);
    StageArtifact run_extract(Diagnostics& diag);
    StageArtifact run_weight(Diagnostics& diag);
    StageArtifact run_cluster(Diagnostics& diag);
    StageArtifact run_rake(Diagnostics& diag);
    StageArtifact run_savings(Diagnostics& diag);
    StageArtifact run_redesign(Diagnostics& diag);
    StageArtifact run_report(Diagnostics& diag);

    PipelineConfig config_;
    Provider* provider_ = nullptr;
    std::unique_ptr<Provider> owned_provider_;
    std::unique_ptr<ResponseCache> cache_;
};

/// Line-delimited JSON helpers.
std::vector<nlohmann::json> read_jsonl(const std::string& path);
std::string to_jsonl(const std::vector<nlohmann::json>& rows);

/// UTC timestamp, or SOURCE_DATE_EPOCH when set.
std::string timestamp_now();

} // namespace taskexposure
