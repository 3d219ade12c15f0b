#include "taskexposure/redesign.hpp"

#include <doctest.h>

#include <cmath>
#include <set>

using namespace taskexposure;
using nlohmann::json;

namespace {

RedesignRole sample_role() {
    RedesignRole r;
    r.key = "pmo";
    r.title = "Project Management Officer";
    r.department = "HO";
    r.grade = "HEO/SEO";
    const double e[] = {0.8, 0.9, 0.6, 0.4, 0.3, 0.2};
    for (int i = 0; i < 6; ++i) r.tasks.push_back(make_task(i + 1, "task " + std::to_string(i + 1), e[i]));
    r.weights = DecayWeights::from_values({0.30, 0.23, 0.17, 0.13, 0.10, 0.07});
    r.salary = 38680.0;
    return r;
}

RedesignOptions fast() {
    RedesignOptions o;
    o.policy.backoff_base = std::chrono::milliseconds(0);
    return o;
}

bool within_ulps(double a, double b, int ulps) {
    double x = b;
    for (int i = 0; i < ulps; ++i) x = std::nextafter(x, a);
    return x == a || std::abs(a - b) <= std::abs(x - b);
}

} // namespace

TEST_SUITE("redesign") {

TEST_CASE("role accessors") {
    const auto r = sample_role();
    CHECK(r.H() == doctest::Approx(0.53));
    CHECK(r.automated() == std::vector<int>{1, 2});
    CHECK(r.surviving() == std::vector<int>{3, 4, 5, 6});
    CHECK(r.freed_share() == doctest::Approx(0.53));
    CHECK_THROWS_AS(r.task(9), PreconditionError);
}

TEST_CASE("eligibility") {
    auto none = sample_role();
    for (auto& t : none.tasks) t = make_task(t.task_number, t.task_details, 0.1);
    auto mostly = sample_role();
    for (auto& t : mostly.tasks) t = make_task(t.task_number, t.task_details, t.task_number <= 5 ? 0.9 : 0.1);
    const std::vector<RedesignRole> roles{none, mostly, sample_role()};
    CHECK(mostly.H() == doctest::Approx(0.93));
    CHECK(eligible_roles(roles, 0.8) == std::vector<std::size_t>{2});
    CHECK(eligible_roles(roles, 0.95) == std::vector<std::size_t>{1, 2});
}

TEST_CASE("focus task absorbs freed share") {
    const auto r = sample_role();
    const auto post = apply_focus(r, 3);
    CHECK(post.size() == 4);
    CHECK(post.at(3) == doctest::Approx(0.70));
    CHECK(within_ulps(post.at(3) - r.weight_of(3), r.freed_share(), 4));
    double s = 0;
    for (const auto& [n, w] : post) s += w;
    CHECK(std::abs(s - 1.0) <= 1e-9);
    CHECK(post.at(4) == r.weight_of(4));
    CHECK_THROWS_AS(apply_focus(r, 1), PreconditionError);
    CHECK_THROWS_AS(apply_focus(r, 42), PreconditionError);
}

TEST_CASE("focus selection via provider and forced single survivor") {
    auto r = sample_role();
    MockProvider m;
    std::vector<PromptTask> surv;
    for (int n : r.surviving()) surv.push_back({n, r.task(n).task_details});
    m.add_fixture(focus_request("x", r.title, surv), R"({"task_number": 4, "reasoning": "Stakeholder work needs people."})");
    Diagnostics d;
    const auto c = select_focus(r, m, fast(), d);
    REQUIRE(c);
    CHECK(c->task_number == 4);
    CHECK_FALSE(c->forced);
    const auto plan = focus_plan(r, *c);
    CHECK(plan.focus_task == 4);
    CHECK(plan.post_weight_sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(plan.to_json()["variant"] == "focus");

    auto single = sample_role();
    for (auto& t : single.tasks) t = make_task(t.task_number, t.task_details, t.task_number == 6 ? 0.1 : 0.9);
    MockProvider empty;
    const auto forced = select_focus(single, empty, fast(), d);
    REQUIRE(forced);
    CHECK(forced->forced);
    CHECK(forced->task_number == 6);
    CHECK(empty.completion_calls() == 0);
}

TEST_CASE("focus naming an automated task is rejected") {
    auto r = sample_role();
    MockProvider m;
    std::vector<PromptTask> surv;
    for (int n : r.surviving()) surv.push_back({n, r.task(n).task_details});
    m.add_fixture(focus_request("x", r.title, surv), R"({"task_number": 1, "reasoning": "x"})");
    Diagnostics d;
    CHECK_FALSE(select_focus(r, m, fast(), d).has_value());
    CHECK(d.count("focus_failed") == 1);
}

TEST_CASE("themes tagged and shared") {
    MockProvider m;
    json four;
    json two;
    for (std::size_t i = 0; i < 6; ++i) {
        four[kThemeNames[i]] = i < 4 ? 1 : 0;
        two[kThemeNames[i]] = i == 0 || i == 5 ? 1 : 0;
    }
    m.add_fixture(theme_request("", "too many"), four.dump());
    m.add_fixture(theme_request("", "fine"), two.dump());
    Diagnostics d;
    const auto t = tag_themes({"too many", "fine"}, m, fast(), d);
    CHECK_FALSE(t[0].has_value());
    REQUIRE(t[1].has_value());
    CHECK(t[1]->count() == 2);
    CHECK(d.count("themes_failed") == 1);
    ThemeSet a, b;
    a.flags[0] = true;
    b.flags[0] = true;
    b.flags[1] = true;
    const auto shares = theme_shares({a, b}, {3.0, 1.0});
    CHECK(shares[0] == doctest::Approx(1.0));
    CHECK(shares[1] == doctest::Approx(0.25));
    CHECK(shares[2] == 0.0);
}

TEST_CASE("augment and reorder uses decay weights on the new order") {
    auto r = sample_role();
    std::vector<PromptTask> surv;
    for (int n : r.surviving()) surv.push_back({n, r.task(n).task_details});
    MockProvider m;
    m.add_fixture(reorder_request("", r.title, r.context, surv), json{{"tasks",
        {{{"task_number", 5}, {"label", "Augmented"}, {"new_task_details", "Track spend with AI alerts"}},
         {{"task_number", 3}, {"label", "No change"}, {"new_task_details", "ignored"}},
         {{"task_number", 6}, {"label", "No change"}, {"new_task_details", ""}},
         {{"task_number", 4}, {"label", "Augmented"}, {"new_task_details", ""}}}}}.dump());
    Diagnostics d;
    const auto plan = augment_reorder(r, m, fast(), d);
    REQUIRE(plan);
    const auto w = DecayWeights::decay(4, kDefaultDelta);
    REQUIRE(plan->tasks.size() == 4);
    CHECK(plan->tasks[0].task_number == 5);
    CHECK(plan->tasks[0].details == "Track spend with AI alerts");
    CHECK(plan->tasks[1].details == "task 3");
    CHECK(plan->tasks[3].details == "task 4");
    for (std::size_t i = 0; i < 4; ++i) CHECK(plan->tasks[i].post_weight == w[i]);
    CHECK(std::abs(plan->post_weight_sum() - 1.0) <= 1e-9);
}

TEST_CASE("new tasks within the cap") {
    auto r = sample_role();
    std::vector<PromptTask> surv, autom;
    for (int n : r.surviving()) surv.push_back({n, r.task(n).task_details});
    for (int n : r.automated()) autom.push_back({n, r.task(n).task_details});
    auto t = [](int n, const char* cat) { return json{{"task_number", n}, {"task_details", "d" + std::to_string(n)}, {"task_category", cat}}; };
    MockProvider ok;
    ok.add_fixture(new_tasks_request("", r.title, r.department, r.context, autom, surv),
                   json{{"tasks", {t(-1, "data_analysis"), t(3, "admin_support"), t(4, "stakeholder_engagement"),
                                   t(5, "admin_support"), t(6, "team_leadership")}}}.dump());
    Diagnostics d;
    const auto plan = propose_new_tasks(r, ok, fast(), d);
    REQUIRE(plan);
    CHECK(plan->tasks.size() == 5);
    CHECK(plan->tasks[0].is_new);
    CHECK(plan->tasks[0].post_weight == DecayWeights::decay(5, kDefaultDelta)[0]);
    CHECK(std::abs(plan->post_weight_sum() - 1.0) <= 1e-9);

    MockProvider over;
    over.add_fixture(new_tasks_request("", r.title, r.department, r.context, autom, surv),
                     json{{"tasks", {t(-1, "data_analysis"), t(-2, "data_analysis"), t(-3, "data_analysis"),
                                     t(3, "admin_support"), t(4, "admin_support"), t(5, "admin_support"),
                                     t(6, "admin_support")}}}.dump());
    CHECK_FALSE(propose_new_tasks(r, over, fast(), d).has_value());
    CHECK(d.count("new_tasks_failed") == 1);
}

TEST_CASE("stratified sampling") {
    std::vector<std::string> strata;
    for (int i = 0; i < 10; ++i) strata.push_back("A");
    for (int i = 0; i < 4; ++i) strata.push_back("B");
    const auto s = stratified_sample(strata, 0.1, 7);
    CHECK(s.size() == 2);
    CHECK(s[0] < 10);
    CHECK(s[1] >= 10);
    CHECK(stratified_sample(strata, 0.1, 7) == s);
    CHECK(stratified_sample(strata, 1.0, 7).size() == 14);
    CHECK(stratified_sample(strata, 0.5, 7).size() == 7);
    CHECK_THROWS_AS(stratified_sample(strata, 0.0, 7), PreconditionError);
}

TEST_CASE("proportional baseline") {
    const auto r = sample_role();
    const auto p = proportional_post_weights(r);
    CHECK(p.at(3) == doctest::Approx(0.17 / 0.47));
    double s = 0;
    for (const auto& [n, w] : p) s += w;
    CHECK(s == doctest::Approx(1.0));
}

TEST_CASE("time shift columns sum to one hundred percent") {
    const auto r = sample_role();
    const char* cats[] = {"", "Records", "Records", "Stakeholders", "Admin", "Leadership", "Stakeholders"};
    const CategoryLookup lookup = [&](std::size_t, int n) { return std::string(cats[n]); };
    auto focus = focus_plan(r, {3, "why", false});
    RedesignPlan fresh;
    fresh.key = r.key;
    fresh.variant = Variant::NewTasks;
    const auto w = DecayWeights::decay(2, kDefaultDelta);
    fresh.tasks = {{-1, "new", "", "data_analysis", w[0], true}, {3, "old", "", "admin_support", w[1], false}};
    const auto rep = time_shift_report({r}, {{focus, fresh}}, lookup);
    CHECK(rep.present[0]);
    CHECK(rep.present[1]);
    CHECK(rep.present[2]);
    CHECK_FALSE(rep.present[3]);
    CHECK(rep.present[4]);
    for (std::size_t col : {0u, 1u, 2u, 4u}) {
        double s = 0;
        for (const auto& row : rep.rows) s += row.share[col].value_or(0.0);
        CHECK(std::abs(s - 1.0) <= 1e-9);
    }
    const auto it = std::find_if(rep.rows.begin(), rep.rows.end(), [](const TimeShiftRow& row) { return row.category == "Records"; });
    REQUIRE(it != rep.rows.end());
    CHECK(*it->share[0] == doctest::Approx(0.53));
    CHECK(*it->share[2] == 0.0);
    CHECK(*rep.minutes_delta(*it, 1) == doctest::Approx(-0.53 * 37 * 60));
    const auto sh = std::find_if(rep.rows.begin(), rep.rows.end(), [](const TimeShiftRow& row) { return row.category == "Stakeholders"; });
    REQUIRE(sh != rep.rows.end());
    CHECK(*sh->share[0] == doctest::Approx(0.24));
    CHECK(*sh->share[2] == doctest::Approx(0.77));
    CHECK(*sh->share[4] == doctest::Approx(w[1]));
    const auto da = std::find_if(rep.rows.begin(), rep.rows.end(), [](const TimeShiftRow& row) { return row.category == "Data Analysis"; });
    REQUIRE(da != rep.rows.end());
    CHECK(*da->share[4] == doctest::Approx(w[0]));
    const std::string table = rep.table();
    CHECK(table.rfind("task_category\tpre_automation_pct\tpost_automation_pct\tfocus_task_pct\tnew_tasks_pct\t", 0) == 0);
}

TEST_CASE("salary deciles") {
    std::vector<double> s, w;
    for (int i = 1; i <= 100; ++i) {
        s.push_back(1000.0 * i);
        w.push_back(1.0);
    }
    const auto cut = salary_decile_cutpoints(s, w);
    REQUIRE(cut.size() == 9);
    CHECK(cut[0] == 10000.0);
    CHECK(cut[8] == 90000.0);
    CHECK(decile_of(5000, cut) == 1);
    CHECK(decile_of(10000, cut) == 1);
    CHECK(decile_of(10001, cut) == 2);
    CHECK(decile_of(99000, cut) == 10);
    CHECK_THROWS_AS(salary_decile_cutpoints({}, {}), PreconditionError);
}

}
