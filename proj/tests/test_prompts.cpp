#include "taskexposure/prompts.hpp"

#include <doctest.h>

using namespace taskexposure;
using nlohmann::json;

namespace {

ValidationResult full(const StructuredRequest& r, const json& payload) {
    auto v = r.output_schema.validate(payload);
    if (v.ok() && r.check) return r.check(v.payload);
    return v;
}

std::vector<PromptTask> survivors() { return {{2, "Brief senior stakeholders"}, {4, "Lead the team"}, {5, "Plan budgets"}}; }

} // namespace

TEST_SUITE("prompts") {

TEST_CASE("extraction truncates on a utf-8 boundary") {
    const std::string text = "caf\xC3\xA9 work";
    const auto r = extraction_request("x", text, 4);
    CHECK(r.context["text"] == "caf");
    CHECK(r.user_prompt.find("caf") != std::string::npos);
}

TEST_CASE("scores must cover exactly the supplied tasks") {
    const auto r = scoring_request("s", {"a", "b"});
    CHECK(full(r, json{{"scores", {{"1", 0.1}, {"2", 0.9}}}}).ok());
    CHECK(full(r, json{{"scores", {{"1", 0.1}}}}).error == ErrorClass::MissingField);
    CHECK(full(r, json{{"scores", {{"1", 0.1}, {"2", 0.2}, {"3", 0.3}}}}).error == ErrorClass::ReferenceViolation);
    CHECK(full(r, json{{"scores", {{"1", 1.1}, {"2", 0.2}}}}).error == ErrorClass::RangeViolation);
}

TEST_CASE("extraction scores outside [0,1] rejected") {
    const auto r = extraction_request("x", "text", 100);
    CHECK(full(r, json{{"tasks", {{{"task_number", 1}, {"task_details", "a"}, {"exposure_score", 0.5}}}}}).ok());
    CHECK(full(r, json{{"tasks", {{{"task_number", 1}, {"task_details", "a"}, {"exposure_score", 1.01}}}}}).error ==
          ErrorClass::RangeViolation);
    CHECK(full(r, json{{"tasks", {{{"task_number", 1}, {"task_details", "a"}}}}}).error == ErrorClass::MissingField);
}

TEST_CASE("focus must name a surviving task") {
    const auto r = focus_request("f", "Officer", survivors());
    CHECK(full(r, json{{"task_number", 4}, {"reasoning", "leadership"}}).ok());
    CHECK(full(r, json{{"task_number", 1}, {"reasoning", "x"}}).error == ErrorClass::ReferenceViolation);
    CHECK(full(r, json{{"task_number", 4}, {"reasoning", ""}}).error != ErrorClass::None);
}

TEST_CASE("theme flags between one and three") {
    const auto r = theme_request("t", "because");
    json j;
    for (const char* n : kThemeNames) j[n] = 0;
    CHECK(full(r, j).error == ErrorClass::CardinalityViolation);
    j[kThemeNames[0]] = 1;
    CHECK(full(r, j).ok());
    j[kThemeNames[1]] = 1;
    j[kThemeNames[2]] = 1;
    CHECK(full(r, j).ok());
    j[kThemeNames[3]] = 1;
    CHECK(full(r, j).error == ErrorClass::CardinalityViolation);
    j[kThemeNames[3]] = 2;
    CHECK(full(r, j).error == ErrorClass::EnumViolation);
}

TEST_CASE("reorder must be a permutation with valid labels") {
    const auto r = reorder_request("r", "Officer", "ctx", survivors());
    auto t = [](int n, const char* label) {
        return json{{"task_number", n}, {"label", label}, {"new_task_details", ""}};
    };
    CHECK(full(r, json{{"tasks", {t(5, "Augmented"), t(2, "No change"), t(4, "No change")}}}).ok());
    CHECK(full(r, json{{"tasks", {t(5, "No change"), t(2, "No change")}}}).error == ErrorClass::PermutationViolation);
    CHECK(full(r, json{{"tasks", {t(5, "No change"), t(5, "No change"), t(2, "No change")}}}).error ==
          ErrorClass::PermutationViolation);
    CHECK(full(r, json{{"tasks", {t(1, "No change"), t(2, "No change"), t(4, "No change")}}}).error ==
          ErrorClass::PermutationViolation);
    CHECK(full(r, json{{"tasks", {t(5, "Removed"), t(2, "No change"), t(4, "No change")}}}).error ==
          ErrorClass::EnumViolation);
}

TEST_CASE("new tasks capped at the automated count") {
    const std::vector<PromptTask> automated{{1, "Type letters"}, {3, "File records"}};
    const auto r = new_tasks_request("n", "Officer", "HO", "ctx", automated, survivors());
    auto t = [](int n, const char* cat) {
        return json{{"task_number", n}, {"task_details", "d"}, {"task_category", cat}};
    };
    const json base = {t(2, "admin_support"), t(4, "team_leadership"), t(5, "data_analysis")};
    json ok = base;
    ok.push_back(t(-1, "data_analysis"));
    ok.push_back(t(-2, "risk_management"));
    CHECK(full(r, json{{"tasks", ok}}).ok());
    CHECK(full(r, json{{"tasks", base}}).ok());
    json over = ok;
    over.push_back(t(-3, "admin_support"));
    CHECK(full(r, json{{"tasks", over}}).error == ErrorClass::CapExceeded);
    json missing = {t(2, "admin_support"), t(-1, "data_analysis")};
    CHECK(full(r, json{{"tasks", missing}}).error == ErrorClass::PermutationViolation);
    json bad_cat = base;
    bad_cat.push_back(t(-1, "astrology"));
    CHECK(full(r, json{{"tasks", bad_cat}}).error == ErrorClass::EnumViolation);
    json ref = base;
    ref.push_back(t(1, "admin_support"));
    CHECK(full(r, json{{"tasks", ref}}).error == ErrorClass::ReferenceViolation);
}

TEST_CASE("category display names") {
    CHECK(category_display_name("admin_support") == "Admin Support");
    CHECK(category_display_name("policy_development") == "Policy Development");
}

TEST_CASE("heuristic answers pass their own validation") {
    const std::vector<PromptTask> automated{{1, "Type and file correspondence"}};
    std::vector<StructuredRequest> reqs{
        extraction_request("e", "Intro.\n\xE2\x80\xA2 Draft policy briefings for ministers\n\xE2\x80\xA2 Manage a team of 5\n", 1000),
        scoring_request("s", {"Enter data into the case system", "Lead the team"}),
        label_request("l", {"Draft policy", "Write briefings"}),
        focus_request("f", "Officer", survivors()),
        theme_request("t", "Leadership of the team matters most and strategic direction."),
        reorder_request("r", "Officer", "ctx", survivors()),
        new_tasks_request("n", "Officer", "HO", "ctx", automated, survivors()),
    };
    for (const auto& r : reqs) {
        CAPTURE(r.kind);
        const auto raw = heuristic_response(r);
        REQUIRE(raw.has_value());
        const auto v = validate_payload(*raw, r.output_schema);
        REQUIRE(v.ok());
        if (r.check) CHECK(r.check(v.payload).ok());
    }
    const auto e = json::parse(*heuristic_response(reqs[0]));
    CHECK(e["tasks"].size() == 2);
}

TEST_CASE("heuristic scores data entry above leadership") {
    const auto s = json::parse(*heuristic_response(scoring_request("s", {"Enter data into the case system",
                                                                          "Lead and motivate the team"})));
    CHECK(s["scores"]["1"].get<double>() > s["scores"]["2"].get<double>());
}

}
