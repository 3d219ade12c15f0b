#include "taskexposure/redesign.hpp"

#include "taskexposure/random.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>

using json = nlohmann::json;

namespace taskexposure {

double RedesignRole::H() const {
    CompensatedSum h;
    for (std::size_t t = 0; t < tasks.size(); ++t) h.add(weights[t] * tasks[t].h);
    return h.value();
}

std::vector<int> RedesignRole::automated() const {
    std::vector<int> out;
    for (const auto& t : tasks) {
        if (t.h == 1) out.push_back(t.task_number);
    }
    return out;
}

std::vector<int> RedesignRole::surviving() const {
    std::vector<int> out;
    for (const auto& t : tasks) {
        if (t.h == 0) out.push_back(t.task_number);
    }
    return out;
}

double RedesignRole::freed_share() const {
    CompensatedSum s;
    for (std::size_t t = 0; t < tasks.size(); ++t) {
        if (tasks[t].h == 1) s.add(weights[t]);
    }
    return s.value();
}

double RedesignRole::weight_of(int task_number) const {
    for (std::size_t t = 0; t < tasks.size(); ++t) {
        if (tasks[t].task_number == task_number) return weights[t];
    }
    throw PreconditionError(key + ": no task " + std::to_string(task_number));
}

const TaskRecord& RedesignRole::task(int task_number) const {
    for (const auto& t : tasks) {
        if (t.task_number == task_number) return t;
    }
    throw PreconditionError(key + ": no task " + std::to_string(task_number));
}

std::vector<std::size_t> eligible_roles(const std::vector<RedesignRole>& roles, double theta) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < roles.size(); ++i) {
        if (roles[i].automated().empty()) continue;
        if (roles[i].H() < theta) out.push_back(i);
    }
    return out;
}

std::string variant_name(Variant v) {
    switch (v) {
    case Variant::Focus: return "focus";
    case Variant::AugmentReorder: return "augment_reorder";
    case Variant::NewTasks: return "new_tasks";
    }
    return "focus";
}

std::size_t ThemeSet::count() const { return static_cast<std::size_t>(std::count(flags.begin(), flags.end(), true)); }

json ThemeSet::to_json() const {
    json j = json::object();
    for (std::size_t i = 0; i < flags.size(); ++i) j[kThemeNames[i]] = flags[i] ? 1 : 0;
    return j;
}

ThemeSet ThemeSet::from_payload(const json& payload) {
    ThemeSet t;
    for (std::size_t i = 0; i < t.flags.size(); ++i) t.flags[i] = payload.at(kThemeNames[i]).get<int>() == 1;
    return t;
}

double RedesignPlan::post_weight_sum() const {
    CompensatedSum s;
    for (const auto& t : tasks) s.add(t.post_weight);
    return s.value();
}

json RedesignPlan::to_json() const {
    json tasks_j = json::array();
    for (const auto& t : tasks) {
        json tj{{"task_number", t.task_number}, {"details", t.details}, {"post_weight", t.post_weight}};
        if (!t.label.empty()) tj["label"] = t.label;
        if (!t.category.empty()) tj["category"] = t.category;
        if (t.is_new) tj["is_new"] = true;
        tasks_j.push_back(std::move(tj));
    }
    json j{{"key", key},
           {"variant", variant_name(variant)},
           {"automated", automated},
           {"freed_share", freed_share},
           {"tasks", tasks_j}};
    if (focus_task) j["focus_task"] = *focus_task;
    if (!reasoning.empty()) j["reasoning"] = reasoning;
    if (themes) j["themes"] = themes->to_json();
    return j;
}

std::map<int, double> apply_focus(const RedesignRole& role, int focus_task) {
    const TaskRecord& focus = role.task(focus_task);
    if (focus.h == 1) {
        throw PreconditionError(role.key + ": focus task " + std::to_string(focus_task) + " is automated");
    }
    const double freed = role.freed_share();
    std::map<int, double> post;
    for (std::size_t t = 0; t < role.tasks.size(); ++t) {
        if (role.tasks[t].h == 1) continue;
        post[role.tasks[t].task_number] = role.weights[t];
    }
    post[focus_task] = role.weight_of(focus_task) + freed;
    return post;
}

namespace {

std::vector<PromptTask> prompt_tasks(const RedesignRole& role, bool automated) {
    std::vector<PromptTask> out;
    for (const auto& t : role.tasks) {
        if ((t.h == 1) == automated) out.push_back({t.task_number, t.task_details});
    }
    return out;
}

void record_failure(const BatchResult& r, const std::string& request_id, const std::string& what, Diagnostics& diag) {
    const BatchFailure* f = r.report.failure_for(request_id);
    diag.warn(what + "_failed", request_id + (f ? ": " + failure_class_name(f->failure) + " " +
                                                      error_class_name(f->validation) + " " + f->message
                                                : ": no response"));
}

} // namespace

std::vector<std::optional<FocusChoice>> select_focus(const std::vector<const RedesignRole*>& roles,
                                                     Provider& provider, const RedesignOptions& options,
                                                     Diagnostics& diag, BatchReport* report) {
    std::vector<std::optional<FocusChoice>> out(roles.size());
    std::vector<StructuredRequest> requests;
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < roles.size(); ++i) {
        const auto surviving = prompt_tasks(*roles[i], false);
        if (surviving.empty()) {
            diag.warn("focus_failed", roles[i]->key + ": no surviving task");
            continue;
        }
        if (surviving.size() == 1) {
            out[i] = FocusChoice{surviving.front().task_number, "only remaining task", true};
            continue;
        }
        requests.push_back(focus_request(roles[i]->key + "#focus", roles[i]->title, surviving));
        idx.push_back(i);
    }
    if (requests.empty()) return out;
    BatchResult r = submit_batch(provider, requests, options.policy, options.cache);
    for (std::size_t k = 0; k < requests.size(); ++k) {
        if (const auto* resp = r.find(requests[k].request_id)) {
            out[idx[k]] = FocusChoice{resp->payload.at("task_number").get<int>(),
                                      resp->payload.at("reasoning").get<std::string>(), false};
        } else {
            record_failure(r, requests[k].request_id, "focus", diag);
        }
    }
    if (report) report->merge(r.report);
    return out;
}

std::optional<FocusChoice> select_focus(const RedesignRole& role, Provider& provider, const RedesignOptions& options,
                                        Diagnostics& diag) {
    return select_focus(std::vector<const RedesignRole*>{&role}, provider, options, diag).front();
}

RedesignPlan focus_plan(const RedesignRole& role, const FocusChoice& choice) {
    const auto post = apply_focus(role, choice.task_number);
    RedesignPlan plan;
    plan.key = role.key;
    plan.variant = Variant::Focus;
    plan.automated = role.automated();
    plan.freed_share = role.freed_share();
    plan.focus_task = choice.task_number;
    plan.reasoning = choice.reasoning;
    for (const auto& t : role.tasks) {
        if (t.h == 1) continue;
        plan.tasks.push_back({t.task_number, t.task_details, "", "", post.at(t.task_number), false});
    }
    return plan;
}

std::vector<std::optional<ThemeSet>> tag_themes(const std::vector<std::string>& reasonings, Provider& provider,
                                                const RedesignOptions& options, Diagnostics& diag,
                                                BatchReport* report) {
    std::vector<StructuredRequest> requests;
    for (std::size_t i = 0; i < reasonings.size(); ++i) {
        requests.push_back(theme_request("reasoning-" + std::to_string(i), reasonings[i]));
    }
    std::vector<std::optional<ThemeSet>> out(reasonings.size());
    if (requests.empty()) return out;
    BatchResult r = submit_batch(provider, requests, options.policy, options.cache);
    for (std::size_t i = 0; i < requests.size(); ++i) {
        if (const auto* resp = r.find(requests[i].request_id)) {
            out[i] = ThemeSet::from_payload(resp->payload);
        } else {
            record_failure(r, requests[i].request_id, "themes", diag);
        }
    }
    if (report) report->merge(r.report);
    return out;
}

std::array<double, 6> theme_shares(const std::vector<ThemeSet>& themes, const std::vector<double>& weights) {
    if (!weights.empty() && weights.size() != themes.size()) throw PreconditionError("theme_shares: weight count mismatch");
    std::array<CompensatedSum, 6> hits;
    CompensatedSum total;
    for (std::size_t i = 0; i < themes.size(); ++i) {
        const double w = weights.empty() ? 1.0 : weights[i];
        total.add(w);
        for (std::size_t f = 0; f < 6; ++f) {
            if (themes[i].flags[f]) hits[f].add(w);
        }
    }
    std::array<double, 6> out{};
    if (total.value() <= 0.0) return out;
    for (std::size_t f = 0; f < 6; ++f) out[f] = hits[f].value() / total.value();
    return out;
}

std::vector<std::optional<RedesignPlan>> augment_reorder(const std::vector<const RedesignRole*>& roles,
                                                         Provider& provider, const RedesignOptions& options,
                                                         Diagnostics& diag, BatchReport* report) {
    std::vector<std::optional<RedesignPlan>> out(roles.size());
    std::vector<StructuredRequest> requests;
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < roles.size(); ++i) {
        const auto surviving = prompt_tasks(*roles[i], false);
        if (surviving.empty()) continue;
        requests.push_back(reorder_request(roles[i]->key + "#reorder", roles[i]->title, roles[i]->context, surviving));
        idx.push_back(i);
    }
    if (requests.empty()) return out;
    BatchResult r = submit_batch(provider, requests, options.policy, options.cache);
    for (std::size_t k = 0; k < requests.size(); ++k) {
        const RedesignRole& role = *roles[idx[k]];
        const auto* resp = r.find(requests[k].request_id);
        if (!resp) {
            record_failure(r, requests[k].request_id, "reorder", diag);
            continue;
        }
        const auto& tasks = resp->payload.at("tasks");
        const DecayWeights w = DecayWeights::decay(tasks.size(), options.delta);
        RedesignPlan plan;
        plan.key = role.key;
        plan.variant = Variant::AugmentReorder;
        plan.automated = role.automated();
        plan.freed_share = role.freed_share();
        for (std::size_t pos = 0; pos < tasks.size(); ++pos) {
            const int n = tasks[pos].at("task_number").get<int>();
            const std::string label = tasks[pos].at("label").get<std::string>();
            std::string details = tasks[pos].at("new_task_details").get<std::string>();
            if (label == "No change" || trim(details).empty()) details = role.task(n).task_details;
            plan.tasks.push_back({n, details, label, "", w[pos], false});
        }
        out[idx[k]] = std::move(plan);
    }
    if (report) report->merge(r.report);
    return out;
}

std::optional<RedesignPlan> augment_reorder(const RedesignRole& role, Provider& provider,
                                            const RedesignOptions& options, Diagnostics& diag) {
    return augment_reorder(std::vector<const RedesignRole*>{&role}, provider, options, diag).front();
}

std::vector<std::optional<RedesignPlan>> propose_new_tasks(const std::vector<const RedesignRole*>& roles,
                                                           Provider& provider, const RedesignOptions& options,
                                                           Diagnostics& diag, BatchReport* report) {
    std::vector<std::optional<RedesignPlan>> out(roles.size());
    std::vector<StructuredRequest> requests;
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < roles.size(); ++i) {
        const auto automated = prompt_tasks(*roles[i], true);
        const auto surviving = prompt_tasks(*roles[i], false);
        if (automated.empty()) {
            diag.warn("new_tasks_failed", roles[i]->key + ": no automated tasks");
            continue;
        }
        requests.push_back(new_tasks_request(roles[i]->key + "#new_tasks", roles[i]->title, roles[i]->department,
                                             roles[i]->context, automated, surviving));
        idx.push_back(i);
    }
    if (requests.empty()) return out;
    BatchResult r = submit_batch(provider, requests, options.policy, options.cache);
    for (std::size_t k = 0; k < requests.size(); ++k) {
        const RedesignRole& role = *roles[idx[k]];
        const auto* resp = r.find(requests[k].request_id);
        if (!resp) {
            record_failure(r, requests[k].request_id, "new_tasks", diag);
            continue;
        }
        const auto& tasks = resp->payload.at("tasks");
        RedesignPlan plan;
        plan.key = role.key;
        plan.variant = Variant::NewTasks;
        plan.automated = role.automated();
        plan.freed_share = role.freed_share();
        if (!tasks.empty()) {
            const DecayWeights w = DecayWeights::decay(tasks.size(), options.delta);
            for (std::size_t pos = 0; pos < tasks.size(); ++pos) {
                const int n = tasks[pos].at("task_number").get<int>();
                plan.tasks.push_back({n, tasks[pos].at("task_details").get<std::string>(), "",
                                      tasks[pos].at("task_category").get<std::string>(), w[pos], n < 0});
            }
        }
        out[idx[k]] = std::move(plan);
    }
    if (report) report->merge(r.report);
    return out;
}

std::optional<RedesignPlan> propose_new_tasks(const RedesignRole& role, Provider& provider,
                                              const RedesignOptions& options, Diagnostics& diag) {
    return propose_new_tasks(std::vector<const RedesignRole*>{&role}, provider, options, diag).front();
}

std::vector<std::size_t> stratified_sample(const std::vector<std::string>& strata, double fraction,
                                           std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction <= 1.0)) throw PreconditionError("stratified_sample: fraction must lie in (0,1]");
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < strata.size(); ++i) groups[strata[i]].push_back(i);
    std::vector<std::size_t> out;
    for (const auto& [name, members] : groups) {
        const auto n = members.size();
        const std::size_t take = std::clamp<std::size_t>(
            static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n))), 1, n);
        Rng rng(derive_seed(seed, "stratum:" + name));
        for (std::size_t k : sample_without_replacement(rng, n, take)) out.push_back(members[k]);
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::map<int, double> proportional_post_weights(const RedesignRole& role) {
    std::map<int, double> post;
    CompensatedSum surviving;
    for (std::size_t t = 0; t < role.tasks.size(); ++t) {
        if (role.tasks[t].h == 0) surviving.add(role.weights[t]);
    }
    if (!(surviving.value() > 0.0)) return post;
    for (std::size_t t = 0; t < role.tasks.size(); ++t) {
        if (role.tasks[t].h == 0) post[role.tasks[t].task_number] = role.weights[t] / surviving.value();
    }
    return post;
}

std::optional<double> TimeShiftReport::minutes_delta(const TimeShiftRow& row, std::size_t column) const {
    if (column == 0 || column >= 5 || !row.share[column] || !row.share[0]) return std::nullopt;
    return (*row.share[column] - *row.share[0]) * hours_per_week * 60.0;
}

std::string TimeShiftReport::table() const {
    static const char* names[5] = {"pre_automation", "post_automation", "focus_task", "augment_reorder",
                                   "new_tasks"};
    std::ostringstream out;
    out << "task_category";
    for (std::size_t c = 0; c < 5; ++c) {
        if (present[c]) out << '\t' << names[c] << "_pct";
    }
    for (std::size_t c = 1; c < 5; ++c) {
        if (present[c]) out << '\t' << names[c] << "_delta_min";
    }
    out << '\n';
    for (const auto& row : rows) {
        out << row.category;
        for (std::size_t c = 0; c < 5; ++c) {
            if (present[c]) out << '\t' << std::fixed << std::setprecision(2) << 100.0 * row.share[c].value_or(0.0);
        }
        for (std::size_t c = 1; c < 5; ++c) {
            if (!present[c]) continue;
            const auto d = minutes_delta(row, c);
            out << '\t' << std::fixed << std::setprecision(0) << (d ? std::round(*d) + 0.0 : 0.0);
        }
        out << '\n';
    }
    return out.str();
}

TimeShiftReport time_shift_report(const std::vector<RedesignRole>& roles,
                                  const std::vector<std::vector<RedesignPlan>>& plans,
                                  const CategoryLookup& category_of, double hours_per_week) {
    if (plans.size() != roles.size()) throw PreconditionError("time_shift_report: plans and roles differ in length");
    TimeShiftReport report;
    report.hours_per_week = hours_per_week;
    std::array<std::map<std::string, CompensatedSum>, 5> mass;
    std::array<CompensatedSum, 5> total;
    std::set<std::string> categories;
    auto cat = [&](std::size_t role, int task) {
        std::string c = category_of ? category_of(role, task) : std::string{};
        return c.empty() ? std::string(kUncategorized) : c;
    };
    auto add = [&](std::size_t column, const std::string& c, double w) {
        mass[column][c].add(w);
        categories.insert(c);
    };
    for (std::size_t i = 0; i < roles.size(); ++i) {
        const RedesignRole& role = roles[i];
        const double w = role.sample_weight;
        total[0].add(w);
        report.present[0] = true;
        for (std::size_t t = 0; t < role.tasks.size(); ++t) add(0, cat(i, role.tasks[t].task_number), w * role.weights[t]);
        const auto prop = proportional_post_weights(role);
        if (!prop.empty()) {
            total[1].add(w);
            report.present[1] = true;
            for (const auto& [n, share] : prop) add(1, cat(i, n), w * share);
        }
        for (const auto& plan : plans[i]) {
            const std::size_t column = plan.variant == Variant::Focus ? 2 : plan.variant == Variant::AugmentReorder ? 3 : 4;
            report.present[column] = true;
            total[column].add(w);
            for (const auto& t : plan.tasks) {
                const std::string c = t.is_new ? (t.category.empty() ? std::string(kUncategorized)
                                                                     : category_display_name(t.category))
                                               : cat(i, t.task_number);
                add(column, c, w * t.post_weight);
            }
        }
    }
    for (const auto& c : categories) {
        TimeShiftRow row;
        row.category = c;
        for (std::size_t col = 0; col < 5; ++col) {
            if (!report.present[col]) continue;
            auto it = mass[col].find(c);
            const double m = it == mass[col].end() ? 0.0 : it->second.value();
            row.share[col] = total[col].value() > 0.0 ? m / total[col].value() : 0.0;
        }
        report.rows.push_back(std::move(row));
    }
    return report;
}

std::vector<double> salary_decile_cutpoints(const std::vector<double>& salaries, const std::vector<double>& weights) {
    if (salaries.size() != weights.size()) throw PreconditionError("salary deciles: weight count mismatch");
    if (salaries.empty()) throw PreconditionError("salary deciles: no salaries");
    std::vector<std::size_t> idx(salaries.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return salaries[a] < salaries[b]; });
    CompensatedSum total;
    for (double w : weights) {
        if (!(w >= 0.0)) throw PreconditionError("salary deciles: negative weight");
        total.add(w);
    }
    if (!(total.value() > 0.0)) throw PreconditionError("salary deciles: weights sum to zero");
    std::vector<double> cut;
    for (int q = 1; q <= 9; ++q) {
        const double target = total.value() * q / 10.0;
        double cum = 0.0;
        double value = salaries[idx.back()];
        for (std::size_t i : idx) {
            cum += weights[i];
            if (cum >= target - 1e-12 * total.value()) {
                value = salaries[i];
                break;
            }
        }
        cut.push_back(value);
    }
    return cut;
}

int decile_of(double salary, const std::vector<double>& cutpoints) {
    int d = 1;
    for (double c : cutpoints) {
        if (salary > c) ++d;
    }
    return d;
}

} // namespace taskexposure
