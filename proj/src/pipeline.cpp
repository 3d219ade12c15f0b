#include "taskexposure/pipeline.hpp"

#include "taskexposure/clustering.hpp"
#include "taskexposure/corpus.hpp"
#include "taskexposure/prompts.hpp"
#include "taskexposure/raking.hpp"
#include "taskexposure/random.hpp"
#include "taskexposure/redesign.hpp"
#include "taskexposure/report.hpp"
#include "taskexposure/savings.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace taskexposure {

// ------------------------------------------------------------------ config

namespace {

std::string resolve(const std::string& base, const std::string& p) {
    if (p.empty()) return p;
    fs::path path(p);
    if (path.is_absolute()) return path.lexically_normal().string();
    return (fs::path(base) / path).lexically_normal().string();
}

template <typename T>
T field(const json& j, const char* key) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw PreconditionError(std::string("config key '") + key + "': " + e.what());
    }
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw PreconditionError("config " + where + " must be an object");
    for (const auto& [k, v] : j.items()) {
        if (!allowed.count(k)) throw PreconditionError("unknown config key '" + where + k + "'");
    }
}

std::string file_hash(const std::string& path) {
    if (path.empty()) return "";
    return sha256_hex(read_file(path));
}

} // namespace

PipelineConfig::PipelineConfig() : theta_grid(default_theta_grid()) {}

void PipelineConfig::apply_json(const json& j, const std::string& base_dir) {
    check_keys(j,
               {"corpus", "reference", "grade_map", "vocabulary", "stopwords", "min_department_vacancies",
                "scrub_personal_data", "provider", "batch", "max_description_chars", "delta", "theta", "theta_grid",
                "sensitivity_deltas", "seed", "clusters", "rake", "redesign", "cache_dir", "output_dir"},
               "");
    config_dir = base_dir;
    if (j.contains("corpus")) corpus = resolve(base_dir, field<std::string>(j, "corpus"));
    if (j.contains("reference")) {
        const json& r = j.at("reference");
        check_keys(r, {"fte", "salary", "profession", "population_total"}, "reference.");
        if (r.contains("fte")) fte_table = resolve(base_dir, field<std::string>(r, "fte"));
        if (r.contains("salary")) salary_table = resolve(base_dir, field<std::string>(r, "salary"));
        if (r.contains("profession")) profession_table = resolve(base_dir, field<std::string>(r, "profession"));
        if (r.contains("population_total")) population_total = field<double>(r, "population_total");
    }
    if (j.contains("grade_map")) grade_map = resolve(base_dir, field<std::string>(j, "grade_map"));
    if (j.contains("vocabulary")) vocabulary = resolve(base_dir, field<std::string>(j, "vocabulary"));
    if (j.contains("stopwords")) stopwords = resolve(base_dir, field<std::string>(j, "stopwords"));
    if (j.contains("min_department_vacancies")) {
        min_department_vacancies = field<std::size_t>(j, "min_department_vacancies");
    }
    if (j.contains("scrub_personal_data")) scrub_personal_data = field<bool>(j, "scrub_personal_data");
    if (j.contains("provider")) {
        const json& p = j.at("provider");
        check_keys(p,
                   {"kind", "fixtures", "strict", "base_url", "chat_path", "embeddings_path", "model",
                    "embedding_model", "api_key_env", "temperature", "max_tokens", "timeout_seconds", "embedding_dim"},
                   "provider.");
        if (p.contains("kind")) provider.kind = field<std::string>(p, "kind");
        if (p.contains("fixtures")) provider.fixtures = resolve(base_dir, field<std::string>(p, "fixtures"));
        if (p.contains("strict")) provider.strict = field<bool>(p, "strict");
        auto& r = provider.remote;
        if (p.contains("base_url")) r.base_url = field<std::string>(p, "base_url");
        if (p.contains("chat_path")) r.chat_path = field<std::string>(p, "chat_path");
        if (p.contains("embeddings_path")) r.embeddings_path = field<std::string>(p, "embeddings_path");
        if (p.contains("model")) r.model = field<std::string>(p, "model");
        if (p.contains("embedding_model")) r.embedding_model = field<std::string>(p, "embedding_model");
        if (p.contains("api_key_env")) r.api_key_env = field<std::string>(p, "api_key_env");
        if (p.contains("temperature")) r.temperature = field<double>(p, "temperature");
        if (p.contains("max_tokens")) r.max_tokens = field<int>(p, "max_tokens");
        if (p.contains("timeout_seconds")) r.timeout_seconds = field<int>(p, "timeout_seconds");
        if (p.contains("embedding_dim")) r.embedding_dim = field<std::size_t>(p, "embedding_dim");
    }
    if (j.contains("batch")) {
        const json& b = j.at("batch");
        check_keys(b, {"max_in_flight", "max_attempts", "backoff_ms"}, "batch.");
        if (b.contains("max_in_flight")) batch.max_in_flight = field<std::size_t>(b, "max_in_flight");
        if (b.contains("max_attempts")) batch.max_attempts = field<std::size_t>(b, "max_attempts");
        if (b.contains("backoff_ms")) batch.backoff_base = std::chrono::milliseconds(field<long>(b, "backoff_ms"));
    }
    if (j.contains("max_description_chars")) max_description_chars = field<std::size_t>(j, "max_description_chars");
    if (j.contains("delta")) delta = field<double>(j, "delta");
    if (j.contains("theta")) theta = field<double>(j, "theta");
    if (j.contains("theta_grid")) theta_grid = field<std::vector<double>>(j, "theta_grid");
    if (j.contains("sensitivity_deltas")) sensitivity_deltas = field<std::vector<double>>(j, "sensitivity_deltas");
    if (j.contains("seed")) seed = field<std::uint64_t>(j, "seed");
    if (j.contains("clusters")) {
        const json& c = j.at("clusters");
        check_keys(c, {"exposure", "categories", "subcategories", "pca_dim", "label_sample", "min_tasks"},
                   "clusters.");
        if (c.contains("exposure")) exposure_clusters = field<std::size_t>(c, "exposure");
        if (c.contains("categories")) categories = field<std::size_t>(c, "categories");
        if (c.contains("subcategories")) subcategories = field<std::size_t>(c, "subcategories");
        if (c.contains("pca_dim")) pca_dim = field<std::size_t>(c, "pca_dim");
        if (c.contains("label_sample")) label_sample = field<std::size_t>(c, "label_sample");
        if (c.contains("min_tasks")) taxonomy_min_tasks = field<std::size_t>(c, "min_tasks");
    }
    if (j.contains("rake")) {
        const json& r = j.at("rake");
        check_keys(r, {"tol", "max_iter"}, "rake.");
        if (r.contains("tol")) rake_tol = field<double>(r, "tol");
        if (r.contains("max_iter")) rake_max_iter = field<std::size_t>(r, "max_iter");
    }
    if (j.contains("redesign")) {
        const json& r = j.at("redesign");
        check_keys(r, {"sample_fraction", "variants"}, "redesign.");
        if (r.contains("sample_fraction")) redesign_fraction = field<double>(r, "sample_fraction");
        if (r.contains("variants")) redesign_variants = field<std::vector<std::string>>(r, "variants");
    }
    if (j.contains("cache_dir")) cache_dir = resolve(base_dir, field<std::string>(j, "cache_dir"));
    if (j.contains("output_dir")) output_dir = resolve(base_dir, field<std::string>(j, "output_dir"));
}

json PipelineConfig::to_json() const {
    const auto& r = provider.remote;
    return json{{"corpus", corpus},
                {"reference",
                 {{"fte", fte_table},
                  {"salary", salary_table},
                  {"profession", profession_table},
                  {"population_total", population_total}}},
                {"grade_map", grade_map},
                {"vocabulary", vocabulary},
                {"stopwords", stopwords},
                {"min_department_vacancies", min_department_vacancies},
                {"scrub_personal_data", scrub_personal_data},
                {"provider",
                 {{"kind", provider.kind},
                  {"fixtures", provider.fixtures},
                  {"strict", provider.strict},
                  {"base_url", r.base_url},
                  {"chat_path", r.chat_path},
                  {"embeddings_path", r.embeddings_path},
                  {"model", r.model},
                  {"embedding_model", r.embedding_model},
                  {"api_key_env", r.api_key_env},
                  {"temperature", r.temperature},
                  {"max_tokens", r.max_tokens},
                  {"timeout_seconds", r.timeout_seconds},
                  {"embedding_dim", r.embedding_dim}}},
                {"batch",
                 {{"max_in_flight", batch.max_in_flight},
                  {"max_attempts", batch.max_attempts},
                  {"backoff_ms", batch.backoff_base.count()}}},
                {"max_description_chars", max_description_chars},
                {"delta", delta},
                {"theta", theta},
                {"theta_grid", theta_grid},
                {"sensitivity_deltas", sensitivity_deltas},
                {"seed", seed},
                {"clusters",
                 {{"exposure", exposure_clusters},
                  {"categories", categories},
                  {"subcategories", subcategories},
                  {"pca_dim", pca_dim},
                  {"label_sample", label_sample},
                  {"min_tasks", taxonomy_min_tasks}}},
                {"rake", {{"tol", rake_tol}, {"max_iter", rake_max_iter}}},
                {"redesign", {{"sample_fraction", redesign_fraction}, {"variants", redesign_variants}}},
                {"cache_dir", cache_dir},
                {"output_dir", output_dir}};
}

void PipelineConfig::validate() const {
    if (!(delta > 0.0 && delta <= 1.0)) throw PreconditionError("delta must lie in (0,1]");
    if (!(theta >= 0.0 && theta <= 1.0)) throw PreconditionError("theta must lie in [0,1]");
    if (theta_grid.empty()) throw PreconditionError("theta_grid is empty");
    for (double t : theta_grid) {
        if (!(t >= 0.0 && t <= 1.0)) throw PreconditionError("theta_grid value " + std::to_string(t) + " outside [0,1]");
    }
    for (double d : sensitivity_deltas) {
        if (!(d > 0.0 && d <= 1.0)) throw PreconditionError("sensitivity delta " + std::to_string(d) + " outside (0,1]");
    }
    if (exposure_clusters != 4) throw PreconditionError("clusters.exposure must be 4 (the four named clusters)");
    if (categories == 0 || subcategories == 0 || pca_dim == 0) throw PreconditionError("cluster counts must be positive");
    if (!(redesign_fraction > 0.0 && redesign_fraction <= 1.0)) {
        throw PreconditionError("redesign.sample_fraction must lie in (0,1]");
    }
    for (const auto& v : redesign_variants) {
        if (v != "focus" && v != "augment_reorder" && v != "new_tasks") {
            throw PreconditionError("unknown redesign variant '" + v + "'");
        }
    }
    if (provider.kind != "mock" && provider.kind != "remote") {
        throw PreconditionError("provider.kind must be mock or remote");
    }
    if (batch.max_in_flight == 0 || batch.max_attempts == 0) throw PreconditionError("batch limits must be positive");
    if (!(rake_tol > 0.0) || rake_max_iter == 0) throw PreconditionError("rake tol and max_iter must be positive");

    auto need = [](const std::string& path, const char* what) {
        if (path.empty()) throw DataError(std::string("config: ") + what + " path is not set");
        if (!fs::exists(path)) throw DataError(std::string("config: ") + what + " not found at " + path);
    };
    auto optional = [](const std::string& path, const char* what) {
        if (!path.empty() && !fs::exists(path)) throw DataError(std::string("config: ") + what + " not found at " + path);
    };
    need(corpus, "corpus");
    need(fte_table, "reference.fte");
    need(salary_table, "reference.salary");
    need(profession_table, "reference.profession");
    optional(grade_map, "grade_map");
    optional(vocabulary, "vocabulary");
    optional(stopwords, "stopwords");
    optional(provider.fixtures, "provider.fixtures");
    if (output_dir.empty()) throw DataError("config: output_dir is not set");
}

PipelineConfig PipelineConfig::load(const std::string& path, PipelineConfig base) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw PreconditionError("config " + path + " is not valid JSON: " + e.what());
    }
    const std::string dir = fs::absolute(fs::path(path)).parent_path().lexically_normal().string();
    if (base.output_dir == "out") base.output_dir = resolve(dir, "out");
    base.apply_json(j, dir);
    return base;
}

// ------------------------------------------------------------------ stages

std::string stage_name(Stage s) {
    switch (s) {
    case Stage::Ingest: return "ingest";
    case Stage::Extract: return "extract";
    case Stage::Weight: return "weight";
    case Stage::Cluster: return "cluster";
    case Stage::Rake: return "rake";
    case Stage::Savings: return "savings";
    case Stage::Redesign: return "redesign";
    case Stage::Report: return "report";
    }
    return "ingest";
}

std::optional<Stage> stage_from_name(std::string_view name) {
    for (Stage s : kStages) {
        if (stage_name(s) == name) return s;
    }
    return std::nullopt;
}

const std::vector<Stage>& upstream_of(Stage s) {
    static const std::map<Stage, std::vector<Stage>> graph{
        {Stage::Ingest, {}},
        {Stage::Extract, {Stage::Ingest}},
        {Stage::Weight, {Stage::Ingest, Stage::Extract}},
        {Stage::Cluster, {Stage::Weight}},
        {Stage::Rake, {Stage::Ingest, Stage::Weight}},
        {Stage::Savings, {Stage::Weight, Stage::Rake}},
        {Stage::Redesign, {Stage::Ingest, Stage::Weight, Stage::Rake}},
        {Stage::Report, {Stage::Weight, Stage::Cluster, Stage::Rake, Stage::Savings, Stage::Redesign}},
    };
    return graph.at(s);
}

std::vector<Stage> stage_order() {
    std::vector<Stage> order;
    std::map<Stage, int> mark; // 1 visiting, 2 done
    std::function<void(Stage)> visit = [&](Stage s) {
        if (mark[s] == 2) return;
        if (mark[s] == 1) throw std::logic_error("stage graph has a cycle through " + stage_name(s));
        mark[s] = 1;
        for (Stage u : upstream_of(s)) {
            if (u == s) throw std::logic_error("stage " + stage_name(s) + " reads its own output");
            visit(u);
        }
        mark[s] = 2;
        order.push_back(s);
    };
    for (Stage s : kStages) visit(s);
    return order;
}

json StageArtifact::to_json() const {
    return json{{"stage", stage},
                {"schema_version", schema_version},
                {"input_hash", input_hash},
                {"content_hash", content_hash},
                {"produced_at", produced_at},
                {"upstream", upstream},
                {"files", files},
                {"failures", failures}};
}

StageArtifact StageArtifact::from_json(const json& j) {
    StageArtifact a;
    a.stage = j.at("stage").get<std::string>();
    a.schema_version = j.at("schema_version").get<int>();
    a.input_hash = j.at("input_hash").get<std::string>();
    a.content_hash = j.at("content_hash").get<std::string>();
    a.produced_at = j.value("produced_at", "");
    a.upstream = j.value("upstream", std::map<std::string, std::string>{});
    a.files = j.value("files", std::map<std::string, std::string>{});
    a.failures = j.value("failures", json::array());
    return a;
}

std::vector<json> read_jsonl(const std::string& path) {
    std::istringstream in(read_file(path));
    std::vector<json> rows;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (trim(line).empty()) continue;
        try {
            rows.push_back(json::parse(line));
        } catch (const json::parse_error& e) {
            throw DataError(path + ":" + std::to_string(n) + ": " + e.what());
        }
    }
    return rows;
}

std::string to_jsonl(const std::vector<json>& rows) {
    std::string out;
    for (const auto& r : rows) {
        out += r.dump();
        out += '\n';
    }
    return out;
}

std::string timestamp_now() {
    std::time_t t = std::time(nullptr);
    if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) {
        try {
            t = static_cast<std::time_t>(std::stoll(epoch));
        } catch (const std::exception&) {
        }
    }
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::unique_ptr<Provider> make_provider(const ProviderConfig& config) {
    if (config.kind == "remote") return std::make_unique<RemoteProvider>(config.remote);
    if (config.kind != "mock") throw PreconditionError("unknown provider kind '" + config.kind + "'");
    auto mock = std::make_unique<MockProvider>(MockProvider::Options{config.strict, config.remote.embedding_dim});
    if (!config.fixtures.empty()) mock->load_fixture_file(config.fixtures);
    if (!config.strict) mock->set_responder(heuristic_response);
    return mock;
}

// --------------------------------------------------------------- pipeline

namespace {

struct Writer {
    std::string dir;
    StageArtifact& artifact;

    void write(const std::string& name, const std::string& contents) {
        write_file((fs::path(dir) / name).string(), contents);
        artifact.files[name] = sha256_hex(contents);
    }
};

json failures_json(const BatchReport& report) {
    json out = json::array();
    for (const auto& f : report.failed) {
        out.push_back({{"request_id", f.request_id},
                       {"failure", failure_class_name(f.failure)},
                       {"validation", error_class_name(f.validation)},
                       {"message", f.message}});
    }
    return out;
}

std::string diagnostics_jsonl(const Diagnostics& diag) {
    std::vector<json> rows;
    for (const auto& d : diag.entries()) {
        const char* sev = d.severity == Severity::Info ? "info" : d.severity == Severity::Warning ? "warning" : "error";
        rows.push_back({{"severity", sev}, {"code", d.code}, {"message", d.message}});
    }
    return to_jsonl(rows);
}

json cell_json(const Cell& c) {
    switch (c.state) {
    case Cell::State::Value: return c.value;
    case Cell::State::Suppressed: return "c";
    case Cell::State::Missing: return nullptr;
    }
    return nullptr;
}

Cell cell_from(const json& j) {
    if (j.is_number()) return Cell::of(j.get<double>());
    if (j.is_string() && j.get<std::string>() == "c") return Cell::suppressed();
    return Cell{};
}

json reference_json(const ReferenceTables& ref) {
    auto table = [](const std::map<DeptGradeKey, Cell>& t) {
        json rows = json::array();
        for (const auto& [k, c] : t) rows.push_back({{"department", k.first}, {"grade", grade_name(k.second)}, {"cell", cell_json(c)}});
        return rows;
    };
    json prof = json::array();
    for (const auto& [p, c] : ref.profession_fte) prof.push_back({{"profession", p}, {"cell", cell_json(c)}});
    return json{{"fte", table(ref.fte)},
                {"median_salary", table(ref.median_salary)},
                {"profession_fte", prof},
                {"population_total", ref.population_total}};
}

ReferenceTables reference_from(const json& j) {
    ReferenceTables ref;
    auto table = [](const json& rows, std::map<DeptGradeKey, Cell>& t) {
        for (const auto& r : rows) {
            auto g = grade_from_name(r.at("grade").get<std::string>());
            if (!g) throw DataError("reference artifact: bad grade " + r.at("grade").dump());
            t[{r.at("department").get<std::string>(), *g}] = cell_from(r.at("cell"));
        }
    };
    table(j.at("fte"), ref.fte);
    table(j.at("median_salary"), ref.median_salary);
    for (const auto& r : j.at("profession_fte")) ref.profession_fte[r.at("profession").get<std::string>()] = cell_from(r.at("cell"));
    ref.population_total = j.at("population_total").get<double>();
    return ref;
}

Vacancy vacancy_from(const json& j) {
    Vacancy v;
    v.vacancy_id = j.at("vacancy_id").get<std::string>();
    v.title = j.value("title", "");
    v.department = j.at("department").get<std::string>();
    v.grade_raw = j.value("grade_raw", "");
    v.grade = grade_from_name(j.at("grade").get<std::string>()).value_or(GradeBucket::Unmapped);
    v.profession = j.value("profession", "Other");
    v.posting_date = j.value("posting_date", "");
    v.closing_date = j.value("closing_date", "");
    v.job_summary = j.value("job_summary", "");
    v.job_description = j.value("job_description", "");
    return v;
}

std::optional<double> opt_number(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
}

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

struct RoleData {
    std::string key;
    std::string title;
    std::string department;
    std::string grade;
    std::string profession;
    std::optional<double> salary;
    double E = 0.0, sigma = 0.0, H = 0.0, M = 0.0;
    std::vector<TaskRecord> tasks;
};

Band band_from(const std::string& name) {
    for (Band b : {Band::VeryLow, Band::Low, Band::Medium, Band::High}) {
        if (band_name(b) == name) return b;
    }
    throw DataError("unknown band '" + name + "'");
}

std::vector<RoleData> load_roles(const std::string& weight_dir) {
    std::vector<RoleData> roles;
    std::map<std::string, std::size_t> index;
    for (const auto& r : read_jsonl((fs::path(weight_dir) / "roles.jsonl").string())) {
        RoleData d;
        d.key = r.at("vacancy_id").get<std::string>();
        d.title = r.value("title", "");
        d.department = r.at("department").get<std::string>();
        d.grade = r.at("grade").get<std::string>();
        d.profession = r.at("profession").get<std::string>();
        d.salary = opt_number(r, "salary");
        d.E = r.at("E").get<double>();
        d.sigma = r.at("sigma").get<double>();
        d.H = r.at("H").get<double>();
        d.M = r.at("M").get<double>();
        index[d.key] = roles.size();
        roles.push_back(std::move(d));
    }
    for (const auto& t : read_jsonl((fs::path(weight_dir) / "exposure.jsonl").string())) {
        auto it = index.find(t.at("vacancy_id").get<std::string>());
        if (it == index.end()) throw DataError("exposure line for unknown role " + t.at("vacancy_id").dump());
        TaskRecord rec;
        rec.task_number = t.at("task_number").get<int>();
        rec.task_details = t.at("task_details").get<std::string>();
        rec.exposure = t.at("e_t").get<double>();
        rec.band = band_from(t.at("band").get<std::string>());
        rec.h = t.at("h_t").get<int>();
        roles[it->second].tasks.push_back(std::move(rec));
    }
    return roles;
}

std::map<std::string, double> load_weights(const std::string& rake_dir) {
    std::map<std::string, double> w;
    for (const auto& r : read_jsonl((fs::path(rake_dir) / "weights.jsonl").string())) {
        if (r.value("synthetic", false)) continue;
        w[r.at("key").get<std::string>()] = r.at("weight").get<double>();
    }
    return w;
}

json sweep_point_json(const SweepPoint& p) {
    return json{{"theta", p.theta},
                {"C", p.C},
                {"P", p.P},
                {"P_upper", p.P_upper},
                {"ratio", std::isinf(p.ratio) ? json("inf") : json(p.ratio)},
                {"n_cost", p.n_cost},
                {"n_prod", p.n_prod},
                {"n_noimpact", p.n_noimpact},
                {"freed_hours", p.freed_hours},
                {"n_no_salary", p.n_no_salary}};
}

SweepPoint sweep_point_from(const json& j) {
    SweepPoint p;
    p.theta = j.at("theta").get<double>();
    p.C = j.at("C").get<double>();
    p.P = j.at("P").get<double>();
    p.P_upper = j.at("P_upper").get<double>();
    p.ratio = j.at("ratio").is_string() ? std::numeric_limits<double>::infinity() : j.at("ratio").get<double>();
    p.n_cost = j.at("n_cost").get<std::size_t>();
    p.n_prod = j.at("n_prod").get<std::size_t>();
    p.n_noimpact = j.at("n_noimpact").get<std::size_t>();
    p.freed_hours = j.at("freed_hours").get<double>();
    p.n_no_salary = j.at("n_no_salary").get<std::size_t>();
    return p;
}

RedesignPlan plan_from(const json& j) {
    RedesignPlan p;
    p.key = j.at("key").get<std::string>();
    const std::string v = j.at("variant").get<std::string>();
    p.variant = v == "focus" ? Variant::Focus : v == "augment_reorder" ? Variant::AugmentReorder : Variant::NewTasks;
    p.automated = j.at("automated").get<std::vector<int>>();
    p.freed_share = j.at("freed_share").get<double>();
    if (j.contains("focus_task")) p.focus_task = j.at("focus_task").get<int>();
    p.reasoning = j.value("reasoning", "");
    if (j.contains("themes")) p.themes = ThemeSet::from_payload(j.at("themes"));
    for (const auto& t : j.at("tasks")) {
        PlanTask pt;
        pt.task_number = t.at("task_number").get<int>();
        pt.details = t.at("details").get<std::string>();
        pt.label = t.value("label", "");
        pt.category = t.value("category", "");
        pt.post_weight = t.at("post_weight").get<double>();
        pt.is_new = t.value("is_new", false);
        p.tasks.push_back(std::move(pt));
    }
    return p;
}

RedesignRole redesign_role(const RoleData& r, const std::map<std::string, Vacancy>& vacancies, double delta,
                           double weight) {
    RedesignRole role;
    role.key = r.key;
    role.title = r.title;
    role.department = r.department;
    role.grade = r.grade;
    role.tasks = r.tasks;
    role.weights = DecayWeights::decay(r.tasks.size(), delta);
    role.salary = r.salary;
    role.sample_weight = weight;
    if (auto it = vacancies.find(r.key); it != vacancies.end()) {
        role.context = trim(it->second.job_summary + "\n" + it->second.job_description);
    }
    return role;
}

} // namespace

Pipeline::Pipeline(PipelineConfig config, Provider* provider) : config_(std::move(config)), provider_(provider) {
    config_.validate();
    stage_order();
}

Pipeline::~Pipeline() = default;

Provider& Pipeline::provider() {
    if (!provider_) {
        owned_provider_ = make_provider(config_.provider);
        provider_ = owned_provider_.get();
    }
    return *provider_;
}

ResponseCache* Pipeline::cache() {
    if (config_.cache_dir.empty()) return nullptr;
    if (!cache_) cache_ = std::make_unique<ResponseCache>(config_.cache_dir);
    return cache_.get();
}

std::string Pipeline::stage_dir(Stage s) const { return (fs::path(config_.output_dir) / stage_name(s)).string(); }

std::string Pipeline::manifest_path(Stage s) const { return (fs::path(stage_dir(s)) / "manifest.json").string(); }

std::optional<StageArtifact> Pipeline::manifest(Stage s) const {
    const std::string path = manifest_path(s);
    if (!fs::exists(path)) return std::nullopt;
    try {
        return StageArtifact::from_json(json::parse(read_file(path)));
    } catch (const json::exception&) {
        return std::nullopt;
    }
}

json Pipeline::config_slice(Stage s) const {
    const auto& c = config_;
    auto provider_slice = [&] {
        json p{{"kind", c.provider.kind}};
        if (c.provider.kind == "mock") {
            p["strict"] = c.provider.strict;
            p["fixtures"] = file_hash(c.provider.fixtures);
            p["embedding_dim"] = c.provider.remote.embedding_dim;
        } else {
            const auto& r = c.provider.remote;
            p["base_url"] = r.base_url;
            p["model"] = r.model;
            p["embedding_model"] = r.embedding_model;
            p["temperature"] = r.temperature;
            p["max_tokens"] = r.max_tokens;
            p["embedding_dim"] = r.embedding_dim;
        }
        return p;
    };
    switch (s) {
    case Stage::Ingest:
        return json{{"corpus", file_hash(c.corpus)},
                    {"fte", file_hash(c.fte_table)},
                    {"salary", file_hash(c.salary_table)},
                    {"profession", file_hash(c.profession_table)},
                    {"grade_map", file_hash(c.grade_map)},
                    {"vocabulary", file_hash(c.vocabulary)},
                    {"population_total", c.population_total},
                    {"min_department_vacancies", c.min_department_vacancies},
                    {"scrub_personal_data", c.scrub_personal_data}};
    case Stage::Extract:
        return json{{"provider", provider_slice()}, {"max_description_chars", c.max_description_chars}};
    case Stage::Weight: return json{{"delta", c.delta}};
    case Stage::Cluster:
        return json{{"seed", c.seed},
                    {"categories", c.categories},
                    {"subcategories", c.subcategories},
                    {"pca_dim", c.pca_dim},
                    {"label_sample", c.label_sample},
                    {"min_tasks", c.taxonomy_min_tasks},
                    {"stopwords", file_hash(c.stopwords)},
                    {"provider", provider_slice()}};
    case Stage::Rake: return json{{"tol", c.rake_tol}, {"max_iter", c.rake_max_iter}};
    case Stage::Savings:
        return json{{"delta", c.delta}, {"theta_grid", c.theta_grid}, {"sensitivity_deltas", c.sensitivity_deltas}};
    case Stage::Redesign:
        return json{{"delta", c.delta},
                    {"theta", c.theta},
                    {"seed", c.seed},
                    {"sample_fraction", c.redesign_fraction},
                    {"variants", c.redesign_variants},
                    {"provider", provider_slice()}};
    case Stage::Report: return json{{"delta", c.delta}, {"theta", c.theta}};
    }
    return json::object();
}

std::string Pipeline::expected_input_hash(Stage s) const {
    json up = json::object();
    for (Stage u : upstream_of(s)) {
        auto m = manifest(u);
        up[stage_name(u)] = m ? m->content_hash : "";
    }
    const json h{{"stage", stage_name(s)},
                 {"schema_version", kArtifactSchemaVersion},
                 {"config", config_slice(s)},
                 {"upstream", up}};
    return sha256_hex(h.dump());
}

StageStatus Pipeline::status(Stage s) const {
    auto m = manifest(s);
    if (!m) return {StageStatus::State::Missing, "no artifact"};
    for (Stage u : upstream_of(s)) {
        const StageStatus us = status(u);
        if (us.state != StageStatus::State::Current) {
            return {StageStatus::State::Stale, "upstream " + stage_name(u) + " is not current (" + us.reason + ")"};
        }
        auto um = manifest(u);
        auto it = m->upstream.find(stage_name(u));
        if (it == m->upstream.end() || it->second != um->content_hash) {
            return {StageStatus::State::Stale, "upstream " + stage_name(u) + " was rebuilt"};
        }
    }
    if (m->schema_version != kArtifactSchemaVersion) return {StageStatus::State::Stale, "schema version changed"};
    if (m->input_hash != expected_input_hash(s)) return {StageStatus::State::Stale, "configuration or inputs changed"};
    for (const auto& [name, sha] : m->files) {
        const auto path = (fs::path(stage_dir(s)) / name).string();
        if (!fs::exists(path)) return {StageStatus::State::Stale, "file " + name + " is missing"};
        if (sha256_hex(read_file(path)) != sha) return {StageStatus::State::Stale, "file " + name + " was modified"};
    }
    return {StageStatus::State::Current, "up to date"};
}

StageResult Pipeline::run(Stage s, bool force) {
    for (Stage u : upstream_of(s)) {
        const StageStatus us = status(u);
        if (us.state != StageStatus::State::Current) {
            throw StaleUpstreamError("cannot run " + stage_name(s) + ": upstream stage " + stage_name(u) + " is " +
                                     (us.state == StageStatus::State::Missing ? "missing" : "stale") + " (" +
                                     us.reason + "); run `" + stage_name(u) + "` first");
        }
    }
    StageResult result;
    result.stage = s;
    if (!force && status(s).state == StageStatus::State::Current) {
        result.artifact = *manifest(s);
        result.skipped = true;
        return result;
    }
    fs::create_directories(stage_dir(s));
    fs::remove(manifest_path(s));

    StageArtifact a;
    switch (s) {
    case Stage::Ingest: a = run_ingest(result.diagnostics); break;
    case Stage::Extract: a = run_extract(result.diagnostics); break;
    case Stage::Weight: a = run_weight(result.diagnostics); break;
    case Stage::Cluster: a = run_cluster(result.diagnostics); break;
    case Stage::Rake: a = run_rake(result.diagnostics); break;
    case Stage::Savings: a = run_savings(result.diagnostics); break;
    case Stage::Redesign: a = run_redesign(result.diagnostics); break;
    case Stage::Report: a = run_report(result.diagnostics); break;
    }
    Writer w{stage_dir(s), a};
    w.write("diagnostics.jsonl", diagnostics_jsonl(result.diagnostics));

    a.stage = stage_name(s);
    a.schema_version = kArtifactSchemaVersion;
    a.input_hash = expected_input_hash(s);
    for (Stage u : upstream_of(s)) a.upstream[stage_name(u)] = manifest(u)->content_hash;
    std::string content;
    for (const auto& [name, sha] : a.files) content += name + '\t' + sha + '\n';
    a.content_hash = sha256_hex(content);
    a.produced_at = timestamp_now();
    write_file(manifest_path(s), a.to_json().dump(2) + "\n");
    result.artifact = a;
    return result;
}

std::vector<StageResult> Pipeline::run_all(bool force) {
    std::vector<StageResult> out;
    for (Stage s : stage_order()) out.push_back(run(s, force));
    return out;
}

StageArtifact Pipeline::run_ingest(Diagnostics& diag) {
    StageArtifact a;
    Writer w{stage_dir(Stage::Ingest), a};
    const GradeMapper mapper = config_.grade_map.empty() ? GradeMapper::defaults() : GradeMapper::load(config_.grade_map);
    ParseOptions opts{&mapper, config_.scrub_personal_data};
    auto vacancies = parse_vacancies_file(config_.corpus, diag, opts);
    vacancies = filter_departments(std::move(vacancies), config_.min_department_vacancies, diag);
    ReferenceTables ref = load_reference_tables(config_.fte_table, config_.salary_table, config_.profession_table,
                                                config_.population_total);
    if (!config_.vocabulary.empty()) {
        const ControlledVocabulary vocab = ControlledVocabulary::load(config_.vocabulary);
        ref.validate(vocab);
        const std::set<std::string> depts(vocab.departments.begin(), vocab.departments.end());
        for (const auto& v : vacancies) {
            if (!depts.empty() && !depts.count(v.department)) {
                diag.warn("unknown_department", v.vacancy_id + ": department " + v.department + " not in vocabulary");
            }
        }
    }
    std::vector<json> rows;
    for (const auto& v : vacancies) {
        json j = vacancy_to_json(v);
        j["salary"] = opt_json(join_salary(v, ref, diag));
        rows.push_back(std::move(j));
    }
    if (rows.empty()) throw DataError("ingest: no vacancies left after parsing and filtering");
    w.write("vacancies.jsonl", to_jsonl(rows));
    w.write("reference.json", reference_json(ref).dump(2) + "\n");
    return a;
}

StageArtifact Pipeline::run_extract(Diagnostics& diag) {
    StageArtifact a;
    Writer w{stage_dir(Stage::Extract), a};
    std::vector<Vacancy> vacancies;
    for (const auto& j : read_jsonl((fs::path(stage_dir(Stage::Ingest)) / "vacancies.jsonl").string())) {
        vacancies.push_back(vacancy_from(j));
    }
    ExtractionOptions opts;
    opts.policy = config_.batch;
    opts.cache = cache();
    opts.max_description_chars = config_.max_description_chars;
    BatchReport report;
    const auto outcomes = extract_corpus(vacancies, provider(), opts, diag, &report);
    std::vector<json> rows;
    std::size_t ok = 0;
    for (const auto& o : outcomes) {
        json tasks = json::array();
        for (const auto& t : o.tasks) {
            tasks.push_back({{"task_number", t.task_number}, {"task_details", t.task_details}, {"exposure_score", t.exposure}});
        }
        if (o.status == ExtractionStatus::Ok) ++ok;
        rows.push_back({{"vacancy_id", o.vacancy_id},
                        {"status", extraction_status_name(o.status)},
                        {"used_summary", o.used_summary},
                        {"detail", o.detail},
                        {"tasks", tasks}});
    }
    if (ok == 0 && !report.failed.empty()) {
        throw ProviderError("extract: every request failed; first failure: " + report.failed.front().message);
    }
    w.write("tasks.jsonl", to_jsonl(rows));
    a.failures = failures_json(report);
    return a;
}

StageArtifact Pipeline::run_weight(Diagnostics& diag) {
    StageArtifact a;
    Writer w{stage_dir(Stage::Weight), a};
    std::map<std::string, json> vacancies;
    for (auto& j : read_jsonl((fs::path(stage_dir(Stage::Ingest)) / "vacancies.jsonl").string())) {
        vacancies[j.at("vacancy_id").get<std::string>()] = j;
    }
    std::vector<json> roles, lines;
    for (const auto& row : read_jsonl((fs::path(stage_dir(Stage::Extract)) / "tasks.jsonl").string())) {
        if (row.at("status").get<std::string>() != extraction_status_name(ExtractionStatus::Ok)) continue;
        const std::string id = row.at("vacancy_id").get<std::string>();
        auto vit = vacancies.find(id);
        if (vit == vacancies.end()) {
            diag.warn("unknown_role", id + ": extracted but not in the ingest artifact");
            continue;
        }
        const json& v = vit->second;
        std::vector<TaskRecord> tasks;
        for (const auto& t : row.at("tasks")) {
            tasks.push_back(make_task(t.at("task_number").get<int>(), t.at("task_details").get<std::string>(),
                                      t.at("exposure_score").get<double>()));
        }
        const std::optional<double> salary = opt_number(v, "salary");
        const DecayWeights D = DecayWeights::decay(tasks.size(), config_.delta);
        const RoleExposure e = role_exposure(tasks, D, salary);
        for (std::size_t t = 0; t < tasks.size(); ++t) {
            lines.push_back(exposure_line(id, tasks[t], D[t], e.hours_per_task[t],
                                          e.value_per_task ? std::optional<double>((*e.value_per_task)[t]) : std::nullopt));
        }
        roles.push_back({{"vacancy_id", id},
                         {"title", v.value("title", "")},
                         {"department", v.at("department")},
                         {"grade", v.at("grade")},
                         {"profession", v.at("profession")},
                         {"salary", opt_json(salary)},
                         {"n_tasks", tasks.size()},
                         {"E", e.E},
                         {"sigma", e.sigma},
                         {"H", e.H},
                         {"M", e.M}});
    }
    if (roles.empty()) throw DataError("weight: no role has extracted tasks");
    w.write("roles.jsonl", to_jsonl(roles));
    w.write("exposure.jsonl", to_jsonl(lines));
    return a;
}

StageArtifact Pipeline::run_cluster(Diagnostics& diag) {
    StageArtifact a;
    Writer w{stage_dir(Stage::Cluster), a};
    const auto roles = load_roles(stage_dir(Stage::Weight));
    std::vector<std::pair<double, double>> points;
    for (const auto& r : roles) points.emplace_back(r.E, r.sigma);
    KMeansOptions km;
    RoleClustering rc;
    try {
        rc = cluster_roles(points, derive_seed(config_.seed, "exposure-clusters"), km);
    } catch (const PreconditionError& e) {
        throw DataError(std::string("cluster: ") + e.what());
    }
    std::vector<json> rows;
    for (std::size_t i = 0; i < roles.size(); ++i) {
        rows.push_back({{"vacancy_id", roles[i].key},
                        {"E", roles[i].E},
                        {"sigma", roles[i].sigma},
                        {"cluster", exposure_cluster_name(rc.labels[i])}});
    }
    w.write("role_clusters.jsonl", to_jsonl(rows));
    json centroids = json::array();
    for (std::size_t c = 0; c < 4; ++c) {
        centroids.push_back({{"cluster", exposure_cluster_name(static_cast<ExposureCluster>(c))},
                             {"mean", rc.centroids[c].first},
                             {"std", rc.centroids[c].second},
                             {"n", rc.counts[c]}});
    }
    w.write("clusters.json", json{{"centroids", centroids}, {"inertia", rc.inertia}}.dump(2) + "\n");

    const Stopwords stop = config_.stopwords.empty() ? Stopwords::english() : Stopwords::load(config_.stopwords);
    std::vector<std::string> keys, texts;
    for (const auto& r : roles) {
        for (const auto& t : r.tasks) {
            std::string text = normalize_text(t.task_details, stop, &diag);
            if (text.empty()) text = to_lower(trim(t.task_details));
            if (text.empty()) continue;
            keys.push_back(r.key + "#" + std::to_string(t.task_number));
            texts.push_back(std::move(text));
        }
    }
    std::vector<json> tax_rows;
    json labels = json::array();
    if (texts.size() < config_.taxonomy_min_tasks) {
        diag.warn("taxonomy_skipped", std::to_string(texts.size()) + " tasks, fewer than " +
                                          std::to_string(config_.taxonomy_min_tasks));
    } else {
        TaxonomyOptions to;
        to.categories = config_.categories;
        to.subcategories = config_.subcategories;
        to.pca_dim = config_.pca_dim;
        to.label_sample = config_.label_sample;
        to.min_tasks = config_.taxonomy_min_tasks;
        to.policy = config_.batch;
        to.cache = cache();
        TaskTaxonomy tax;
        try {
            tax = build_taxonomy(texts, provider(), config_.seed, to, diag);
        } catch (const PreconditionError& e) {
            throw DataError(std::string("cluster: ") + e.what());
        }
        for (std::size_t i = 0; i < keys.size(); ++i) {
            const auto [c, s] = tax.assignment[i];
            tax_rows.push_back({{"task_key", keys[i]},
                                {"category_id", c},
                                {"category_label", tax.category_label(i)},
                                {"subcategory_id", std::to_string(c) + "." + std::to_string(s)},
                                {"subcategory_label", tax.subcategory_label(i)}});
        }
        for (const auto& c : tax.categories) {
            json subs = json::array();
            for (const auto& s : c.subcategories) subs.push_back({{"id", s.id}, {"label", s.label}, {"size", s.size}});
            labels.push_back({{"id", c.id}, {"label", c.label}, {"size", c.size}, {"subcategories", subs}});
        }
    }
    w.write("taxonomy.jsonl", to_jsonl(tax_rows));
    w.write("taxonomy_labels.json", json{{"categories", labels}}.dump(2) + "\n");
    return a;
}

StageArtifact Pipeline::run_rake(Diagnostics& diag) {
    StageArtifact a;
    Writer w{stage_dir(Stage::Rake), a};
    const ReferenceTables ref =
        reference_from(json::parse(read_file((fs::path(stage_dir(Stage::Ingest)) / "reference.json").string())));
    const auto roles = load_roles(stage_dir(Stage::Weight));
    std::set<std::string> depts;
    for (const auto& r : roles) {
        if (ref.has_department(r.department)) depts.insert(r.department);
    }
    MarginalSet marginals = marginals_from_reference(ref, {depts.begin(), depts.end()});
    WeightedSample sample;
    for (const auto& r : roles) {
        const bool known = marginals.department.count(r.department) && marginals.grade.count(r.grade) &&
                           marginals.profession.count(r.profession);
        if (!known) {
            diag.warn("unraked_role", r.key + ": (" + r.department + ", " + r.grade + ", " + r.profession +
                                          ") has no population marginal");
            continue;
        }
        sample.rows.push_back({r.key, r.department, r.grade, r.profession, 1.0, false});
    }
    if (sample.rows.empty()) throw DataError("rake: no role matches the population marginals");
    sample = append_other_depts(std::move(sample), marginals);
    sample = rake(std::move(sample), marginals, RakeOptions{config_.rake_tol, config_.rake_max_iter}, diag);
    sample = scale_to_population(std::move(sample), marginals.N);

    std::vector<json> rows;
    for (const auto& r : sample.rows) {
        rows.push_back({{"key", r.key},
                        {"department", r.department},
                        {"grade", r.grade},
                        {"profession", r.profession},
                        {"weight", r.weight},
                        {"synthetic", r.synthetic}});
    }
    w.write("weights.jsonl", to_jsonl(rows));
    json shares = json::object();
    for (Dimension d : kRakingOrder) {
        shares[dimension_name(d)] = {{"target", marginals.targets(d)}, {"achieved", weighted_shares(sample, d)}};
    }
    w.write("rake_summary.json", json{{"iterations", sample.iterations},
                                      {"converged", sample.converged},
                                      {"residual", sample.residual},
                                      {"history", sample.history},
                                      {"N", marginals.N},
                                      {"total_weight", sample.total_weight()},
                                      {"marginals", shares}}
                                     .dump(2) + "\n");
    return a;
}

StageArtifact Pipeline::run_savings(Diagnostics& diag) {
    StageArtifact a;
    Writer w{stage_dir(Stage::Savings), a};
    const auto roles = load_roles(stage_dir(Stage::Weight));
    const auto weights = load_weights(stage_dir(Stage::Rake));
    std::vector<SavingsInput> inputs;
    std::vector<RawRole> raw;
    std::vector<double> wv;
    for (const auto& r : roles) {
        auto it = weights.find(r.key);
        if (it == weights.end()) {
            diag.info("unweighted_role", r.key + ": no raked weight; left out of savings");
            continue;
        }
        inputs.push_back({r.key, r.H, r.M, r.salary});
        raw.push_back({r.key, r.tasks, r.salary});
        wv.push_back(it->second);
    }
    if (inputs.empty()) throw DataError("savings: no weighted roles");
    const SweepCurve curve = sweep(inputs, wv, config_.theta_grid);
    std::vector<json> pts;
    for (const auto& p : curve.points) pts.push_back(sweep_point_json(p));
    w.write("sweep.jsonl", to_jsonl(pts));

    std::vector<json> per_role;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const RoleSavings s = role_savings(inputs[i], config_.theta, &diag);
        per_role.push_back({{"vacancy_id", inputs[i].key},
                            {"weight", wv[i]},
                            {"H", s.H},
                            {"class", savings_class_name(s.cls)},
                            {"C", opt_json(s.C)},
                            {"P", opt_json(s.P)},
                            {"P_upper", opt_json(s.P_upper)},
                            {"freed_hours", s.freed_hours}});
    }
    w.write("role_savings.jsonl", to_jsonl(per_role));

    std::vector<double> deltas = config_.sensitivity_deltas;
    if (std::find(deltas.begin(), deltas.end(), config_.delta) == deltas.end()) deltas.push_back(config_.delta);
    const auto curves = decay_sensitivity(raw, wv, deltas, config_.theta_grid);
    std::vector<json> sens;
    for (const auto& [d, c] : curves) {
        for (const auto& p : c.points) {
            json j = sweep_point_json(p);
            j["delta"] = d;
            sens.push_back(std::move(j));
        }
    }
    w.write("sensitivity.jsonl", to_jsonl(sens));
    return a;
}

StageArtifact Pipeline::run_redesign(Diagnostics& diag) {
    StageArtifact a;
    Writer w{stage_dir(Stage::Redesign), a};
    const auto data = load_roles(stage_dir(Stage::Weight));
    const auto weights = load_weights(stage_dir(Stage::Rake));
    std::map<std::string, Vacancy> vacancies;
    for (const auto& j : read_jsonl((fs::path(stage_dir(Stage::Ingest)) / "vacancies.jsonl").string())) {
        Vacancy v = vacancy_from(j);
        vacancies.emplace(v.vacancy_id, std::move(v));
    }
    std::vector<RedesignRole> roles;
    for (const auto& r : data) {
        auto it = weights.find(r.key);
        if (it == weights.end()) continue;
        roles.push_back(redesign_role(r, vacancies, config_.delta, it->second));
    }
    const auto eligible = eligible_roles(roles, config_.theta);
    std::vector<std::string> strata;
    for (std::size_t i : eligible) strata.push_back(roles[i].department + "|" + roles[i].grade);
    std::vector<const RedesignRole*> selected;
    if (!eligible.empty()) {
        for (std::size_t k : stratified_sample(strata, config_.redesign_fraction, derive_seed(config_.seed, "redesign-sample"))) {
            selected.push_back(&roles[eligible[k]]);
        }
    }
    RedesignOptions opts;
    opts.delta = config_.delta;
    opts.policy = config_.batch;
    opts.cache = cache();
    BatchReport report;
    auto wants = [&](const char* v) {
        return std::find(config_.redesign_variants.begin(), config_.redesign_variants.end(), v) !=
               config_.redesign_variants.end();
    };
    std::vector<std::vector<RedesignPlan>> plans(selected.size());
    if (!selected.empty() && wants("focus")) {
        const auto choices = select_focus(selected, provider(), opts, diag, &report);
        std::vector<std::string> reasonings;
        std::vector<std::size_t> owner;
        for (std::size_t i = 0; i < selected.size(); ++i) {
            if (!choices[i]) continue;
            plans[i].push_back(focus_plan(*selected[i], *choices[i]));
            reasonings.push_back(choices[i]->reasoning);
            owner.push_back(i);
        }
        const auto themes = tag_themes(reasonings, provider(), opts, diag, &report);
        for (std::size_t k = 0; k < owner.size(); ++k) plans[owner[k]].back().themes = themes[k];
    }
    if (!selected.empty() && wants("augment_reorder")) {
        const auto out = augment_reorder(selected, provider(), opts, diag, &report);
        for (std::size_t i = 0; i < selected.size(); ++i) {
            if (out[i]) plans[i].push_back(*out[i]);
        }
    }
    if (!selected.empty() && wants("new_tasks")) {
        const auto out = propose_new_tasks(selected, provider(), opts, diag, &report);
        for (std::size_t i = 0; i < selected.size(); ++i) {
            if (out[i]) plans[i].push_back(*out[i]);
        }
    }
    std::vector<json> plan_rows, sample_rows;
    std::vector<double> freed;
    for (std::size_t i = 0; i < selected.size(); ++i) {
        sample_rows.push_back({{"vacancy_id", selected[i]->key},
                               {"department", selected[i]->department},
                               {"grade", selected[i]->grade},
                               {"H", selected[i]->H()},
                               {"freed_share", selected[i]->freed_share()},
                               {"weight", selected[i]->sample_weight}});
        freed.push_back(selected[i]->freed_share());
        for (const auto& p : plans[i]) plan_rows.push_back(p.to_json());
    }
    std::optional<double> median;
    if (!freed.empty()) {
        std::sort(freed.begin(), freed.end());
        const std::size_t n = freed.size();
        median = n % 2 ? freed[n / 2] : (freed[n / 2 - 1] + freed[n / 2]) / 2.0;
    }
    w.write("sample.jsonl", to_jsonl(sample_rows));
    w.write("plans.jsonl", to_jsonl(plan_rows));
    w.write("summary.json", json{{"n_roles", roles.size()},
                                 {"n_eligible", eligible.size()},
                                 {"n_sampled", selected.size()},
                                 {"n_plans", plan_rows.size()},
                                 {"median_freed_share", opt_json(median)}}
                                .dump(2) + "\n");
    a.failures = failures_json(report);
    return a;
}

StageArtifact Pipeline::run_report(Diagnostics& diag) {
    StageArtifact a;
    Writer w{stage_dir(Stage::Report), a};
    const auto roles = load_roles(stage_dir(Stage::Weight));
    const auto weights = load_weights(stage_dir(Stage::Rake));

    std::vector<Band> bands;
    std::vector<double> E, Ew, sigma;
    for (const auto& r : roles) {
        for (const auto& t : r.tasks) bands.push_back(t.band);
        auto it = weights.find(r.key);
        if (it == weights.end()) continue;
        E.push_back(r.E);
        Ew.push_back(it->second);
    }
    w.write("band_distribution.tsv", band_distribution_table(bands));
    w.write("exposure_histogram.tsv", exposure_histogram_table(E, Ew));

    std::vector<ExposureCluster> labels;
    std::vector<double> cE, cS;
    for (const auto& j : read_jsonl((fs::path(stage_dir(Stage::Cluster)) / "role_clusters.jsonl").string())) {
        const std::string name = j.at("cluster").get<std::string>();
        for (std::size_t c = 0; c < 4; ++c) {
            if (exposure_cluster_name(static_cast<ExposureCluster>(c)) == name) labels.push_back(static_cast<ExposureCluster>(c));
        }
        cE.push_back(j.at("E").get<double>());
        cS.push_back(j.at("sigma").get<double>());
    }
    w.write("cluster_summary.tsv", cluster_summary_table(cluster_summary(labels, cE, cS)));

    std::map<std::string, std::string> category_of;
    for (const auto& j : read_jsonl((fs::path(stage_dir(Stage::Cluster)) / "taxonomy.jsonl").string())) {
        category_of[j.at("task_key").get<std::string>()] = j.at("category_label").get<std::string>();
    }

    SweepCurve curve;
    for (const auto& j : read_jsonl((fs::path(stage_dir(Stage::Savings)) / "sweep.jsonl").string())) {
        curve.points.push_back(sweep_point_from(j));
    }
    w.write("sweep.tsv", sweep_table(curve));

    std::map<double, SweepCurve> curves;
    for (const auto& j : read_jsonl((fs::path(stage_dir(Stage::Savings)) / "sensitivity.jsonl").string())) {
        curves[j.at("delta").get<double>()].points.push_back(sweep_point_from(j));
    }
    bool on_grid = false;
    for (const auto& p : curve.points) on_grid = on_grid || std::abs(p.theta - config_.theta) < 1e-12;
    if (on_grid) {
        w.write("decay_sensitivity.tsv", decay_sensitivity_table(curves, config_.theta, config_.delta));
    } else {
        diag.warn("sensitivity_skipped", "theta " + std::to_string(config_.theta) + " is not on the sweep grid");
    }

    std::map<std::string, std::vector<RedesignPlan>> by_role;
    for (const auto& j : read_jsonl((fs::path(stage_dir(Stage::Redesign)) / "plans.jsonl").string())) {
        RedesignPlan p = plan_from(j);
        by_role[p.key].push_back(std::move(p));
    }
    std::vector<RedesignRole> shift_roles;
    std::vector<std::vector<RedesignPlan>> shift_plans;
    std::map<std::string, Vacancy> no_vacancies;
    for (const auto& r : roles) {
        auto pit = by_role.find(r.key);
        if (pit == by_role.end()) continue;
        auto wit = weights.find(r.key);
        shift_roles.push_back(redesign_role(r, no_vacancies, config_.delta, wit == weights.end() ? 0.0 : wit->second));
        shift_plans.push_back(pit->second);
    }
    const CategoryLookup lookup = [&](std::size_t i, int task) {
        auto it = category_of.find(shift_roles[i].key + "#" + std::to_string(task));
        return it == category_of.end() ? std::string{} : it->second;
    };
    w.write("time_shift.tsv", time_shift_report(shift_roles, shift_plans, lookup).table());

    std::vector<ThemeSet> themes;
    std::vector<double> theme_w;
    std::vector<double> salaries, salary_w;
    for (const auto& r : roles) {
        auto it = weights.find(r.key);
        if (it == weights.end() || !r.salary) continue;
        salaries.push_back(*r.salary);
        salary_w.push_back(it->second);
    }
    std::vector<DecileFocus> deciles;
    const auto cut = salaries.empty() ? std::vector<double>{} : salary_decile_cutpoints(salaries, salary_w);
    for (std::size_t i = 0; i < shift_roles.size(); ++i) {
        for (const auto& p : shift_plans[i]) {
            if (p.variant != Variant::Focus) continue;
            if (p.themes) {
                themes.push_back(*p.themes);
                theme_w.push_back(shift_roles[i].sample_weight);
            }
            if (shift_roles[i].salary && !cut.empty() && p.focus_task) {
                std::string c = lookup(i, *p.focus_task);
                deciles.push_back({decile_of(*shift_roles[i].salary, cut), c.empty() ? kUncategorized : c,
                                   shift_roles[i].sample_weight});
            }
        }
    }
    w.write("themes.tsv", theme_table(theme_shares(themes, theme_w), themes.size()));
    w.write("focus_deciles.tsv", focus_decile_table(deciles));

    const SweepPoint* at = nullptr;
    for (const auto& p : curve.points) {
        if (std::abs(p.theta - config_.theta) < 1e-12) at = &p;
    }
    json summary{{"theta", config_.theta}, {"delta", config_.delta}, {"n_roles", roles.size()}, {"n_weighted", E.size()}};
    if (at) summary["at_theta"] = sweep_point_json(*at);
    w.write("summary.json", summary.dump(2) + "\n");
    return a;
}

} // namespace taskexposure
