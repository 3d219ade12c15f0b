#include "taskexposure/prompts.hpp"

#include "taskexposure/common.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

using json = nlohmann::json;

namespace taskexposure {

namespace {

std::string numbered(const std::vector<PromptTask>& tasks) {
    std::string out;
    for (const auto& t : tasks) out += "\n" + std::to_string(t.task_number) + ". " + t.details;
    return out;
}

json tasks_json(const std::vector<PromptTask>& tasks) {
    json arr = json::array();
    for (const auto& t : tasks) arr.push_back({{"task_number", t.task_number}, {"details", t.details}});
    return arr;
}

std::vector<std::string> category_values() { return {kTaskCategories.begin(), kTaskCategories.end()}; }

std::string truncate_utf8(const std::string& text, std::size_t max_chars) {
    if (max_chars == 0 || text.size() <= max_chars) return text;
    std::size_t cut = max_chars;
    while (cut > 0 && (static_cast<unsigned char>(text[cut]) & 0xC0) == 0x80) --cut;
    return text.substr(0, cut);
}

} // namespace

std::string category_display_name(std::string_view category) {
    std::string out;
    bool upper = true;
    for (char c : category) {
        if (c == '_') {
            out.push_back(' ');
            upper = true;
        } else {
            out.push_back(upper ? static_cast<char>(std::toupper(static_cast<unsigned char>(c))) : c);
            upper = false;
        }
    }
    return out;
}

Schema extraction_schema() {
    return Schema::object({{"tasks", Schema::array(Schema::object({
                                         {"task_number", Schema::integer()},
                                         {"task_details", Schema::string(true)},
                                         {"exposure_score", Schema::number(0.0, 1.0)},
                                     }))}});
}

Schema scores_schema() { return Schema::object({{"scores", Schema::map(Schema::number(0.0, 1.0))}}); }

Schema label_schema() { return Schema::object({{"label", Schema::string(true)}}); }

Schema focus_schema() {
    return Schema::object({{"task_number", Schema::integer()}, {"reasoning", Schema::string(true)}});
}

Schema theme_discovery_schema() {
    return Schema::object({{"query_output", Schema::array(Schema::object({
                                                {"label", Schema::string(true)},
                                                {"description", Schema::string()},
                                            }))}});
}

Schema theme_schema() {
    std::vector<Schema::Field> fields;
    for (const char* name : kThemeNames) fields.push_back({name, Schema::integer_enum({0, 1})});
    return Schema::object(std::move(fields));
}

Schema reorder_schema() {
    return Schema::object({{"tasks", Schema::array(Schema::object({
                                         {"task_number", Schema::integer()},
                                         {"label", Schema::string_enum({"No change", "Augmented"})},
                                         {"new_task_details", Schema::string()},
                                     }))}});
}

Schema new_tasks_schema() {
    return Schema::object({{"tasks", Schema::array(Schema::object({
                                         {"task_number", Schema::integer()},
                                         {"task_details", Schema::string(true)},
                                         {"task_category", Schema::string_enum(category_values())},
                                     }))}});
}

StructuredRequest extraction_request(std::string request_id, const std::string& text, std::size_t max_chars) {
    const std::string body = truncate_utf8(text, max_chars);
    StructuredRequest r;
    r.request_id = std::move(request_id);
    r.kind = "extract";
    r.system_prompt =
        "You identify the tasks described in job adverts and judge how far each could be automated with "
        "generative AI.";
    r.user_prompt =
        "List the tasks in this job advert using the given format, in the order they appear. Leave out anything "
        "about recruitment, onboarding, working hours or working conditions. Give each task an exposure_score "
        "between 0 and 1 for how much of it generative AI could automate.\n<job_description>" +
        body + "</job_description>";
    r.output_schema = extraction_schema();
    r.context = {{"text", body}};
    return r;
}

StructuredRequest scoring_request(std::string request_id, const std::vector<std::string>& tasks) {
    std::string listing;
    json ctx = json::array();
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        listing += "\n" + std::to_string(i + 1) + ": " + tasks[i];
        ctx.push_back(tasks[i]);
    }
    StructuredRequest r;
    r.request_id = std::move(request_id);
    r.kind = "score";
    r.system_prompt = "You judge how far individual job tasks could be automated with generative AI.";
    r.user_prompt =
        "Return a score between 0 and 1 for each task below, keyed by its number, for how much of the task "
        "generative AI could automate.\n<tasks>" +
        listing + "\n</tasks>";
    r.output_schema = scores_schema();
    const std::size_t n = tasks.size();
    r.check = [n](const json& p) { return check_scores(p, n); };
    r.context = {{"tasks", ctx}};
    return r;
}

StructuredRequest label_request(std::string request_id, const std::vector<std::string>& sampled_tasks) {
    std::string listing;
    for (const auto& t : sampled_tasks) listing += "\n- " + t;
    StructuredRequest r;
    r.request_id = std::move(request_id);
    r.kind = "label";
    r.system_prompt = "You write short, human-readable names for groups of similar job tasks.";
    r.user_prompt = "Give one short label that describes this group of tasks.\n<tasks>" + listing + "\n</tasks>";
    r.output_schema = label_schema();
    r.context = {{"tasks", sampled_tasks}};
    return r;
}

StructuredRequest focus_request(std::string request_id, const std::string& job_title,
                                const std::vector<PromptTask>& surviving) {
    StructuredRequest r;
    r.request_id = std::move(request_id);
    r.kind = "focus";
    r.user_prompt = "Some of the work of a " + job_title +
                    " is now done by AI, which frees up their time. These are the tasks they still do:" +
                    numbered(surviving) +
                    "\nWhich one task should absorb the freed time to make them most productive? Answer with its "
                    "task_number and a brief reasoning.";
    r.output_schema = focus_schema();
    std::vector<int> ids;
    for (const auto& t : surviving) ids.push_back(t.task_number);
    r.check = [ids](const json& p) { return check_focus(p, ids); };
    r.context = {{"title", job_title}, {"surviving", tasks_json(surviving)}};
    return r;
}

StructuredRequest theme_discovery_request(std::string request_id, const std::vector<std::string>& reasonings) {
    std::string listing;
    for (const auto& t : reasonings) listing += "\n- " + t;
    StructuredRequest r;
    r.request_id = std::move(request_id);
    r.kind = "theme_discovery";
    r.user_prompt =
        "Each statement below explains why a worker whose routine tasks were automated chose one remaining task "
        "to spend their freed time on. Find the recurring themes across the statements and give each a label and "
        "a one-line description." +
        listing;
    r.output_schema = theme_discovery_schema();
    r.context = {{"reasonings", reasonings}};
    return r;
}

StructuredRequest theme_request(std::string request_id, const std::string& reasoning) {
    std::string codebook;
    for (const char* name : kThemeNames) codebook += "\n- " + std::string(name);
    StructuredRequest r;
    r.request_id = std::move(request_id);
    r.kind = "themes";
    r.user_prompt =
        "A worker explained why they chose a task to focus on after part of their job was automated. Mark each "
        "theme below 1 if it is present in the explanation and 0 otherwise. Mark between one and three themes." +
        codebook + "\nExplanation:\n" + reasoning;
    r.output_schema = theme_schema();
    r.check = [](const json& p) { return check_themes(p); };
    r.context = {{"reasoning", reasoning}};
    return r;
}

StructuredRequest reorder_request(std::string request_id, const std::string& job_title, const std::string& job_context,
                                  const std::vector<PromptTask>& surviving) {
    StructuredRequest r;
    r.request_id = std::move(request_id);
    r.kind = "reorder";
    r.system_prompt = "You advise on how job tasks change when organisations adopt digital and AI tools.";
    r.user_prompt =
        "Part of the work of a " + job_title +
        " is now done by AI. For each remaining task, label it 'No change' and keep its wording, or label it "
        "'Augmented' and describe the AI-assisted version. Then return every task once, most important first.\n"
        "<tasks>" +
        numbered(surviving) + "\n</tasks>\n<job_context>" + job_context + "</job_context>";
    r.output_schema = reorder_schema();
    std::vector<int> ids;
    for (const auto& t : surviving) ids.push_back(t.task_number);
    r.check = [ids](const json& p) { return check_reorder(p, ids); };
    r.context = {{"title", job_title}, {"surviving", tasks_json(surviving)}};
    return r;
}

StructuredRequest new_tasks_request(std::string request_id, const std::string& job_title,
                                    const std::string& department, const std::string& job_context,
                                    const std::vector<PromptTask>& automated,
                                    const std::vector<PromptTask>& surviving) {
    std::string categories;
    for (const char* c : kTaskCategories) categories += std::string(categories.empty() ? "" : ", ") + c;
    StructuredRequest r;
    r.request_id = std::move(request_id);
    r.kind = "new_tasks";
    r.system_prompt = "You help public-sector employers plan for the effects of AI on their roles.";
    r.user_prompt =
        "AI is changing the " + job_title + " role in " + department +
        ". The automated tasks below leave the role. Return the redesigned role as a list of tasks ordered by "
        "importance: every remaining task keeps its number, and you may add up to " +
        std::to_string(automated.size()) +
        " new tasks with negative numbers. Add none if nothing useful comes to mind. Every task needs a category "
        "from: " +
        categories + ".\n<role_context>" + job_context + "</role_context>\n<automated_tasks>" + numbered(automated) +
        "\n</automated_tasks>\n<remaining_tasks>" + numbered(surviving) + "\n</remaining_tasks>";
    r.output_schema = new_tasks_schema();
    std::vector<int> ids;
    for (const auto& t : surviving) ids.push_back(t.task_number);
    const std::size_t cap = automated.size();
    r.check = [ids, cap](const json& p) { return check_new_tasks(p, ids, cap); };
    r.context = {{"title", job_title}, {"automated", tasks_json(automated)}, {"surviving", tasks_json(surviving)}};
    return r;
}

// --------------------------------------------------------------- checks

ValidationResult check_scores(const json& payload, std::size_t n_tasks) {
    const auto& scores = payload.at("scores");
    for (std::size_t i = 1; i <= n_tasks; ++i) {
        if (!scores.contains(std::to_string(i))) {
            return ValidationResult::reject(ErrorClass::MissingField, "/scores/" + std::to_string(i),
                                            "no score for task " + std::to_string(i));
        }
    }
    if (scores.size() != n_tasks) {
        return ValidationResult::reject(ErrorClass::ReferenceViolation, "/scores",
                                        "scores reference tasks that were not supplied");
    }
    return ValidationResult::accept(payload);
}

ValidationResult check_focus(const json& payload, const std::vector<int>& surviving) {
    const int n = payload.at("task_number").get<int>();
    if (std::find(surviving.begin(), surviving.end(), n) == surviving.end()) {
        return ValidationResult::reject(ErrorClass::ReferenceViolation, "/task_number",
                                        "task " + std::to_string(n) + " is not a surviving task");
    }
    return ValidationResult::accept(payload);
}

ValidationResult check_themes(const json& payload) {
    int set = 0;
    for (const char* name : kThemeNames) set += payload.at(name).get<int>();
    if (set < 1 || set > 3) {
        return ValidationResult::reject(ErrorClass::CardinalityViolation, "",
                                        std::to_string(set) + " themes set; between 1 and 3 required");
    }
    return ValidationResult::accept(payload);
}

ValidationResult check_reorder(const json& payload, const std::vector<int>& surviving) {
    std::multiset<int> got;
    for (const auto& t : payload.at("tasks")) got.insert(t.at("task_number").get<int>());
    const std::multiset<int> want(surviving.begin(), surviving.end());
    if (got != want) {
        return ValidationResult::reject(ErrorClass::PermutationViolation, "/tasks",
                                        "returned tasks are not a permutation of the surviving tasks");
    }
    return ValidationResult::accept(payload);
}

ValidationResult check_new_tasks(const json& payload, const std::vector<int>& surviving, std::size_t max_new) {
    std::set<int> seen;
    std::size_t n_new = 0;
    for (const auto& t : payload.at("tasks")) {
        const int n = t.at("task_number").get<int>();
        if (!seen.insert(n).second) {
            return ValidationResult::reject(ErrorClass::PermutationViolation, "/tasks",
                                            "task " + std::to_string(n) + " appears twice");
        }
        if (n < 0) {
            ++n_new;
        } else if (std::find(surviving.begin(), surviving.end(), n) == surviving.end()) {
            return ValidationResult::reject(ErrorClass::ReferenceViolation, "/tasks",
                                            "task " + std::to_string(n) + " is neither surviving nor new");
        }
    }
    if (n_new > max_new) {
        return ValidationResult::reject(ErrorClass::CapExceeded, "/tasks",
                                        std::to_string(n_new) + " new tasks exceed the cap of " +
                                            std::to_string(max_new));
    }
    for (int s : surviving) {
        if (!seen.count(s)) {
            return ValidationResult::reject(ErrorClass::PermutationViolation, "/tasks",
                                            "surviving task " + std::to_string(s) + " is missing");
        }
    }
    return ValidationResult::accept(payload);
}

// ------------------------------------------------------------ heuristics

namespace {

const std::vector<std::pair<std::string, std::vector<std::string>>>& category_keywords() {
    static const std::vector<std::pair<std::string, std::vector<std::string>>> table = {
        {"policy_development", {"policy", "legislat", "strateg", "guidance", "regulat", "minister", "briefing"}},
        {"records_management", {"record", "file", "archiv", "document", "version control", "log", "register"}},
        {"admin_support", {"schedul", "meeting", "minute", "diary", "correspond", "administ", "booking", "invoice"}},
        {"team_leadership", {"lead", "team", "line manag", "mentor", "coach", "supervis"}},
        {"performance_planning", {"plan", "performance", "budget", "programme", "project", "objective", "spend"}},
        {"stakeholder_engagement", {"stakeholder", "engag", "partner", "liais", "communicat", "relationship"}},
        {"risk_management", {"risk", "assur", "complian", "audit", "quality", "secur", "governance"}},
        {"data_analysis", {"data", "analys", "statist", "model", "evidence", "research", "insight"}},
        {"service_delivery", {"deliver", "service", "case", "operation", "applicat", "customer", "visa"}},
        {"prison_management", {"prison", "offender", "custody", "inmate", "rehabilit", "probation"}},
    };
    return table;
}

std::size_t count_hits(const std::string& lower, const std::vector<std::string>& words) {
    std::size_t n = 0;
    for (const auto& w : words) {
        if (lower.find(w) != std::string::npos) ++n;
    }
    return n;
}

std::string best_category(const std::string& text) {
    const std::string lower = to_lower(text);
    std::string best = "service_delivery";
    std::size_t best_hits = 0;
    for (const auto& [cat, words] : category_keywords()) {
        const std::size_t hits = count_hits(lower, words);
        if (hits > best_hits) {
            best = cat;
            best_hits = hits;
        }
    }
    return best;
}

double heuristic_score(const std::string& text) {
    static const std::vector<std::string> routine = {
        "schedul", "minute",  "draft",   "record", "log",     "file",     "data",    "report", "updat",
        "maintain", "spreadsheet", "database", "document", "invoice", "correspond", "compil", "summar", "enter",
        "monitor", "process"};
    static const std::vector<std::string> human = {
        "lead",    "team",   "stakeholder", "negotiat", "inspect", "visit",   "coach", "mentor",  "prisoner",
        "custody", "safeguard", "empath", "face-to-face", "site", "represent", "judgement", "decision"};
    const std::string lower = to_lower(text);
    const double raw = 0.5 + 0.1 * static_cast<double>(count_hits(lower, routine)) -
                       0.1 * static_cast<double>(count_hits(lower, human));
    const std::string digest = sha256_hex(lower);
    const int jitter = static_cast<int>(static_cast<unsigned char>(digest[0]) % 3) - 1;
    const double s = std::clamp(raw + 0.1 * jitter, 0.1, 0.9);
    return std::round(s * 10.0) / 10.0;
}

std::vector<std::string> split_tasks(const std::string& text) {
    static const std::string bullet = "\xe2\x80\xa2";
    std::vector<std::string> bullets;
    std::vector<std::string> sentences;
    for (auto line : split(text, '\n')) {
        std::string t = trim(line);
        bool is_bullet = false;
        if (t.rfind(bullet, 0) == 0) {
            t = trim(t.substr(bullet.size()));
            is_bullet = true;
        } else if (!t.empty() && (t[0] == '-' || t[0] == '*')) {
            t = trim(t.substr(1));
            is_bullet = true;
        }
        if (t.empty()) continue;
        if (is_bullet) {
            bullets.push_back(t);
            continue;
        }
        std::string cur;
        for (std::size_t i = 0; i < t.size(); ++i) {
            cur.push_back(t[i]);
            const bool end = (t[i] == '.' || t[i] == ';' || t[i] == '!' || t[i] == '?') &&
                             (i + 1 == t.size() || t[i + 1] == ' ');
            if (end) {
                sentences.push_back(trim(cur));
                cur.clear();
            }
        }
        if (!trim(cur).empty()) sentences.push_back(trim(cur));
    }
    static const std::vector<std::string> excluded = {"interview", "salary", "working hours", "apply", "pension",
                                                      "benefit", "onboarding", "flexible working", "recruitment"};
    auto keep = [&](const std::string& s) {
        std::size_t words = 0;
        std::istringstream ss(s);
        for (std::string w; ss >> w;) ++words;
        return words >= 4 && count_hits(to_lower(s), excluded) == 0;
    };
    std::vector<std::string> out;
    for (const auto& s : bullets.empty() ? sentences : bullets) {
        if (keep(s)) out.push_back(s);
        if (out.size() == 12) break;
    }
    return out;
}

std::string focus_reasoning(const std::string& category) {
    static const std::map<std::string, std::string> text = {
        {"team_leadership", "Mentoring and developing the team is human work that lifts everyone's capability."},
        {"stakeholder_engagement",
         "Building relationships and communicating with stakeholders keeps partners engaged and aligned."},
        {"risk_management", "Managing risk and assuring quality protects delivery and compliance."},
        {"policy_development", "Setting strategic direction and shaping policy has long-term impact."},
        {"performance_planning", "Improving plans and processes creates efficiency across the programme."},
        {"data_analysis", "Complex analysis needs human judgement to solve problems the tools cannot."},
        {"prison_management", "Working with people in custody needs empathy and human judgement."},
    };
    auto it = text.find(category);
    return it != text.end() ? it->second
                            : "This task needs human judgement to resolve complex problems and improve the service.";
}

json theme_flags(const std::string& reasoning) {
    static const std::vector<std::vector<std::string>> words = {
        {"strateg", "direction", "policy", "vision", "long-term"},
        {"stakeholder", "relationship", "communicat", "engag"},
        {"risk", "quality", "assur", "complian", "secur"},
        {"improv", "innovat", "process", "moderni", "transform", "efficien"},
        {"mentor", "team", "people", "empath", "coach", "human work"},
        {"complex", "judgement", "judgment", "analys", "investigat", "problem"},
    };
    const std::string lower = to_lower(reasoning);
    json flags = json::object();
    int set = 0;
    for (std::size_t i = 0; i < kThemeNames.size(); ++i) {
        const bool on = set < 3 && count_hits(lower, words[i]) > 0;
        flags[kThemeNames[i]] = on ? 1 : 0;
        set += on ? 1 : 0;
    }
    if (set == 0) flags["complex_problem_resolution"] = 1;
    return flags;
}

} // namespace

std::optional<std::string> heuristic_response(const StructuredRequest& request) {
    const json& ctx = request.context;
    if (request.kind == "extract") {
        json tasks = json::array();
        int n = 0;
        for (const auto& t : split_tasks(ctx.value("text", std::string{}))) {
            tasks.push_back({{"task_number", ++n}, {"task_details", t}, {"exposure_score", heuristic_score(t)}});
        }
        return json{{"tasks", tasks}}.dump();
    }
    if (request.kind == "score") {
        json scores = json::object();
        std::size_t i = 0;
        for (const auto& t : ctx.at("tasks")) scores[std::to_string(++i)] = heuristic_score(t.get<std::string>());
        return json{{"scores", scores}}.dump();
    }
    if (request.kind == "label") {
        std::map<std::string, std::size_t> votes;
        for (const auto& t : ctx.at("tasks")) ++votes[best_category(t.get<std::string>())];
        std::string best;
        std::size_t best_n = 0;
        for (const auto& [cat, words] : category_keywords()) {
            if (votes[cat] > best_n) {
                best = cat;
                best_n = votes[cat];
            }
        }
        return json{{"label", category_display_name(best.empty() ? "service_delivery" : best)}}.dump();
    }
    if (request.kind == "focus") {
        int best = 0;
        double best_score = 2.0;
        std::string best_details;
        for (const auto& t : ctx.at("surviving")) {
            const std::string d = t.at("details").get<std::string>();
            const double s = heuristic_score(d);
            if (s < best_score) {
                best = t.at("task_number").get<int>();
                best_score = s;
                best_details = d;
            }
        }
        return json{{"task_number", best}, {"reasoning", focus_reasoning(best_category(best_details))}}.dump();
    }
    if (request.kind == "themes") return theme_flags(ctx.value("reasoning", std::string{})).dump();
    if (request.kind == "theme_discovery") {
        json out = json::array();
        for (const char* name : kThemeNames) out.push_back({{"label", name}, {"description", name}});
        return json{{"query_output", out}}.dump();
    }
    if (request.kind == "reorder") {
        std::vector<std::tuple<double, int, std::string>> rows;
        for (const auto& t : ctx.at("surviving")) {
            const std::string d = t.at("details").get<std::string>();
            rows.emplace_back(heuristic_score(d), t.at("task_number").get<int>(), d);
        }
        std::stable_sort(rows.begin(), rows.end(),
                         [](const auto& a, const auto& b) { return std::get<0>(a) < std::get<0>(b); });
        json tasks = json::array();
        for (const auto& [score, n, d] : rows) {
            const bool augmented = score >= 0.5;
            tasks.push_back({{"task_number", n},
                             {"label", augmented ? "Augmented" : "No change"},
                             {"new_task_details", augmented ? d + " (using AI drafting and analysis tools)" : d}});
        }
        return json{{"tasks", tasks}}.dump();
    }
    if (request.kind == "new_tasks") {
        json tasks = json::array();
        const auto& automated = ctx.at("automated");
        if (!automated.empty()) {
            tasks.push_back({{"task_number", -1},
                             {"task_details", "Assure the quality of AI-produced outputs that replaced: " +
                                                  automated.at(0).at("details").get<std::string>()},
                             {"task_category", "risk_management"}});
        }
        for (const auto& t : ctx.at("surviving")) {
            const std::string d = t.at("details").get<std::string>();
            tasks.push_back({{"task_number", t.at("task_number")}, {"task_details", d},
                             {"task_category", best_category(d)}});
        }
        return json{{"tasks", tasks}}.dump();
    }
    return std::nullopt;
}

} // namespace taskexposure
