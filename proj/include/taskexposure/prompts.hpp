#pragma once

#include "taskexposure/llm.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <string>
#include <utility>
#include <vector>

namespace taskexposure {

/// Numbered task as shown to the model.
struct PromptTask {
    int task_number = 0;
    std::string details;
};

inline constexpr std::array<const char*, 10> kTaskCategories = {
    "policy_development", "records_management",     "admin_support",   "team_leadership",
    "performance_planning", "stakeholder_engagement", "risk_management", "data_analysis",
    "service_delivery",   "prison_management"};

/// "admin_support" -> "Admin Support".
std::string category_display_name(std::string_view category);

inline constexpr std::array<const char*, 6> kThemeNames = {
    "strategic_leadership_and_vision",   "stakeholder_management_and_communication",
    "risk_and_quality_management",       "innovation_and_process_excellence",
    "human_centric_leadership",          "complex_problem_resolution"};

Schema extraction_schema();
Schema scores_schema();
Schema label_schema();
Schema focus_schema();
Schema theme_discovery_schema();
Schema theme_schema();
Schema reorder_schema();
Schema new_tasks_schema();

StructuredRequest extraction_request(std::string request_id, const std::string& text, std::size_t max_chars);
StructuredRequest scoring_request(std::string request_id, const std::vector<std::string>& tasks);
StructuredRequest label_request(std::string request_id, const std::vector<std::string>& sampled_tasks);
StructuredRequest focus_request(std::string request_id, const std::string& job_title,
                                const std::vector<PromptTask>& surviving);
StructuredRequest theme_discovery_request(std::string request_id, const std::vector<std::string>& reasonings);
StructuredRequest theme_request(std::string request_id, const std::string& reasoning);
StructuredRequest reorder_request(std::string request_id, const std::string& job_title, const std::string& job_context,
                                  const std::vector<PromptTask>& surviving);
StructuredRequest new_tasks_request(std::string request_id, const std::string& job_title,
                                    const std::string& department, const std::string& job_context,
                                    const std::vector<PromptTask>& automated,
                                    const std::vector<PromptTask>& surviving);

/// Structural checks beyond the schema.
ValidationResult check_scores(const nlohmann::json& payload, std::size_t n_tasks);
ValidationResult check_focus(const nlohmann::json& payload, const std::vector<int>& surviving);
ValidationResult check_themes(const nlohmann::json& payload);
ValidationResult check_reorder(const nlohmann::json& payload, const std::vector<int>& surviving);
ValidationResult check_new_tasks(const nlohmann::json& payload, const std::vector<int>& surviving,
                                 std::size_t max_new);

/// Deterministic keyword-driven answers for every request kind, built from
/// the request context. Lets the mock provider drive a full pipeline run
/// without per-request fixtures.
std::optional<std::string> heuristic_response(const StructuredRequest& request);

} // namespace taskexposure
