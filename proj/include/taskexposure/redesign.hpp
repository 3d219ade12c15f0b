#pragma once

#include "taskexposure/common.hpp"
#include "taskexposure/exposure.hpp"
#include "taskexposure/llm.hpp"
#include "taskexposure/prompts.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace taskexposure {

struct RedesignRole {
    std::string key;
    std::string title;
    std::string department;
    std::string grade;
    std::string context; // summary and description
    std::vector<TaskRecord> tasks;
    DecayWeights weights = DecayWeights::equal(1);
    std::optional<double> salary;
    double sample_weight = 1.0;

    double H() const;
    std::vector<int> automated() const;
    std::vector<int> surviving() const;
    double freed_share() const;
    double weight_of(int task_number) const;
    const TaskRecord& task(int task_number) const;
};

/// Indices of roles with at least one high task and H < theta.
std::vector<std::size_t> eligible_roles(const std::vector<RedesignRole>& roles, double theta);

enum class Variant { Focus, AugmentReorder, NewTasks };
std::string variant_name(Variant v);

struct ThemeSet {
    std::array<bool, 6> flags{};

    std::size_t count() const;
    nlohmann::json to_json() const;
    static ThemeSet from_payload(const nlohmann::json& payload);
};

struct PlanTask {
    int task_number = 0;
    std::string details;
    std::string label;    // "No change" / "Augmented" for AugmentReorder
    std::string category; // enum value, set for NewTasks
    double post_weight = 0.0;
    bool is_new = false;
};

struct RedesignPlan {
    std::string key;
    Variant variant = Variant::Focus;
    std::vector<int> automated;
    double freed_share = 0.0;
    std::optional<int> focus_task;
    std::string reasoning;
    std::optional<ThemeSet> themes;
    std::vector<PlanTask> tasks; // post-redesign order

    double post_weight_sum() const;
    nlohmann::json to_json() const;
};

struct FocusChoice {
    int task_number = 0;
    std::string reasoning;
    bool forced = false; // single surviving task, provider not consulted
};

struct RedesignOptions {
    double delta = kDefaultDelta;
    BatchPolicy policy;
    ResponseCache* cache = nullptr;
};

/// Post weights of surviving tasks: the focus task absorbs the freed share.
/// Throws PreconditionError if `focus_task` is automated or unknown.
std::map<int, double> apply_focus(const RedesignRole& role, int focus_task);

/// Failed roles come back as nullopt with a diagnostic.
std::vector<std::optional<FocusChoice>> select_focus(const std::vector<const RedesignRole*>& roles,
                                                     Provider& provider, const RedesignOptions& options,
                                                     Diagnostics& diag, BatchReport* report = nullptr);
std::optional<FocusChoice> select_focus(const RedesignRole& role, Provider& provider, const RedesignOptions& options,
                                        Diagnostics& diag);

RedesignPlan focus_plan(const RedesignRole& role, const FocusChoice& choice);

std::vector<std::optional<ThemeSet>> tag_themes(const std::vector<std::string>& reasonings, Provider& provider,
                                                const RedesignOptions& options, Diagnostics& diag,
                                                BatchReport* report = nullptr);

/// Share of reasonings carrying each theme (weighted when weights given).
std::array<double, 6> theme_shares(const std::vector<ThemeSet>& themes, const std::vector<double>& weights = {});

std::vector<std::optional<RedesignPlan>> augment_reorder(const std::vector<const RedesignRole*>& roles,
                                                         Provider& provider, const RedesignOptions& options,
                                                         Diagnostics& diag, BatchReport* report = nullptr);
std::optional<RedesignPlan> augment_reorder(const RedesignRole& role, Provider& provider,
                                            const RedesignOptions& options, Diagnostics& diag);

std::vector<std::optional<RedesignPlan>> propose_new_tasks(const std::vector<const RedesignRole*>& roles,
                                                           Provider& provider, const RedesignOptions& options,
                                                           Diagnostics& diag, BatchReport* report = nullptr);
std::optional<RedesignPlan> propose_new_tasks(const RedesignRole& role, Provider& provider,
                                              const RedesignOptions& options, Diagnostics& diag);

/// Per stratum round(fraction * n) indices (at least one), sampled without
/// replacement with a per-stratum seed. Returns sorted indices.
std::vector<std::size_t> stratified_sample(const std::vector<std::string>& strata, double fraction,
                                           std::uint64_t seed);

/// Category of an original task: (role index, task_number) -> label or "".
using CategoryLookup = std::function<std::string(std::size_t, int)>;

inline constexpr const char* kUncategorized = "uncategorized";

struct TimeShiftRow {
    std::string category;
    std::array<std::optional<double>, 5> share{}; // pre, proportional, focus, reorder, new tasks
};

struct TimeShiftReport {
    std::array<bool, 5> present{};
    std::vector<TimeShiftRow> rows;
    double hours_per_week = kHoursPerWeek;

    /// (share - pre share) * hours * 60, rounded only when printed.
    std::optional<double> minutes_delta(const TimeShiftRow& row, std::size_t column) const;
    std::string table() const;
};

/// `plans[i]` holds any variants run for `roles[i]`.
TimeShiftReport time_shift_report(const std::vector<RedesignRole>& roles,
                                  const std::vector<std::vector<RedesignPlan>>& plans,
                                  const CategoryLookup& category_of, double hours_per_week = kHoursPerWeek);

/// Proportional baseline: automated tasks removed, survivors renormalized.
std::map<int, double> proportional_post_weights(const RedesignRole& role);

/// Nine weighted-quantile cutpoints splitting salaries into deciles.
std::vector<double> salary_decile_cutpoints(const std::vector<double>& salaries, const std::vector<double>& weights);
/// 1..10.
int decile_of(double salary, const std::vector<double>& cutpoints);

} // namespace taskexposure
