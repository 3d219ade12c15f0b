#pragma once

#include "taskexposure/common.hpp"
#include "taskexposure/corpus.hpp"
#include "taskexposure/llm.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace taskexposure {

inline constexpr double kHoursPerWeek = 37.0;
inline constexpr double kDefaultDelta = 0.75;

enum class Band { VeryLow, Low, Medium, High };

std::string band_name(Band b);

struct Classification {
    Band band = Band::VeryLow;
    int h = 0;
};

/// Fixed cutpoints 0.3 / 0.5 / 0.7. Throws PreconditionError outside [0,1].
Classification classify_exposure(double e);

struct TaskRecord {
    int task_number = 0;
    std::string task_details;
    double exposure = 0.0;
    Band band = Band::VeryLow;
    int h = 0;

    bool operator==(const TaskRecord&) const = default;
};

TaskRecord make_task(int task_number, std::string details, double exposure);

class DecayWeights {
public:
    /// D_t = delta^(t-1) / sum. Throws PreconditionError unless T >= 1 and 0 < delta <= 1.
    static DecayWeights decay(std::size_t T, double delta);
    static DecayWeights equal(std::size_t T);
    /// Arbitrary non-negative shares, normalized to sum to one.
    static DecayWeights from_values(std::vector<double> values);

    double delta() const { return delta_; } // NaN for from_values
    const std::vector<double>& raw() const { return raw_; }
    const std::vector<double>& normalized() const { return normalized_; }
    std::size_t size() const { return normalized_.size(); }
    double operator[](std::size_t i) const { return normalized_[i]; }

private:
    double delta_ = 1.0;
    std::vector<double> raw_;
    std::vector<double> normalized_;
};

DecayWeights decay_weights(std::size_t T, double delta);

struct RoleExposure {
    double E = 0.0;     // weighted mean exposure
    double sigma = 0.0; // weighted population std
    double H = 0.0;     // high-band time share
    double M = 0.0;     // medium-band time share
    std::vector<double> hours_per_task;
    std::optional<std::vector<double>> value_per_task;
    std::optional<double> salary;
};

/// Throws PreconditionError on a length mismatch or empty task list.
RoleExposure role_exposure(const std::vector<TaskRecord>& tasks, const DecayWeights& w,
                           std::optional<double> salary = std::nullopt);

// ------------------------------------------------------------ extraction

enum class ExtractionStatus { Ok, Dropped, Failed };
std::string extraction_status_name(ExtractionStatus s);

struct ExtractionOutcome {
    std::string vacancy_id;
    ExtractionStatus status = ExtractionStatus::Failed;
    std::vector<TaskRecord> tasks;
    bool used_summary = false;
    std::string detail;
};

struct ExtractionOptions {
    BatchPolicy policy;
    ResponseCache* cache = nullptr;
    std::size_t max_description_chars = 12000;
    std::size_t min_tasks = 2;
};

/// Description pass for every vacancy, then a summary pass for roles that
/// yielded fewer than `min_tasks`. Outcomes are aligned with `vacancies`.
std::vector<ExtractionOutcome> extract_corpus(const std::vector<Vacancy>& vacancies, Provider& provider,
                                              const ExtractionOptions& options, Diagnostics& diag,
                                              BatchReport* report = nullptr);

ExtractionOutcome extract_role_tasks(const Vacancy& v, Provider& provider, const ExtractionOptions& options,
                                     Diagnostics& diag);

/// Turns an extraction payload into contiguous 1..T task records (array order).
std::vector<TaskRecord> tasks_from_payload(const nlohmann::json& payload);

// ----------------------------------------------------- external task lists

struct Weighting {
    bool equal = true;
    double delta = kDefaultDelta;

    static Weighting equal_weights() { return {true, 1.0}; }
    static Weighting decay(double d) { return {false, d}; }
};

struct TaskListScore {
    std::vector<double> scores;
    double mean = 0.0;
    double std = 0.0;
};

/// Scores an ordered task list with the scoring prompt and aggregates it.
/// Throws ProviderError when the provider or schema check fails.
TaskListScore score_task_list(const std::vector<std::string>& tasks, Provider& provider, Weighting weighting,
                              const BatchPolicy& policy = {}, ResponseCache* cache = nullptr);

/// Aggregates already-scored tasks under a weighting.
TaskListScore aggregate_scores(const std::vector<double>& scores, Weighting weighting);

// ----------------------------------------------------------- stage output

/// One exposure-stage line per task:
/// vacancy_id, task_number, task_details, e_t, band, h_t, D_t, hours, value.
nlohmann::json exposure_line(const std::string& vacancy_id, const TaskRecord& task, double weight, double hours,
                             std::optional<double> value);

} // namespace taskexposure
