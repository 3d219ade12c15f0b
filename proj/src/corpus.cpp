#include "taskexposure/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

using json = nlohmann::json;

namespace taskexposure {

namespace {

constexpr std::string_view kSuppressionToken = "c";

bool is_date(std::string_view s) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
    for (std::size_t i : {0, 1, 2, 3, 5, 6, 8, 9}) {
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    }
    const int month = (s[5] - '0') * 10 + (s[6] - '0');
    const int day = (s[8] - '0') * 10 + (s[9] - '0');
    return month >= 1 && month <= 12 && day >= 1 && day <= 31;
}

std::optional<std::string> optional_string(const json& rec, const char* key) {
    auto it = rec.find(key);
    if (it == rec.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw std::invalid_argument(std::string("field '") + key + "' is not a string");
    return it->get<std::string>();
}

std::string required_string(const json& rec, const char* key) {
    auto v = optional_string(rec, key);
    if (!v) throw std::invalid_argument(std::string("missing field '") + key + "'");
    return *v;
}

std::optional<double> parse_number(std::string_view s) {
    std::string cleaned;
    for (char c : s) {
        if (c != ',' && c != '\xa3' && !std::isspace(static_cast<unsigned char>(c))) cleaned.push_back(c);
    }
    // strip a UTF-8 pound sign if present
    if (cleaned.rfind("\xc2", 0) == 0) cleaned.erase(0, 1);
    if (cleaned.empty()) return std::nullopt;
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(cleaned.data(), cleaned.data() + cleaned.size(), value);
    if (ec != std::errc{} || ptr != cleaned.data() + cleaned.size()) return std::nullopt;
    return value;
}

Cell parse_cell(std::string_view raw, std::string_view context) {
    const std::string t = trim(raw);
    if (t.empty()) return Cell{};
    if (to_lower(t) == kSuppressionToken) return Cell::suppressed();
    auto v = parse_number(t);
    if (!v || *v < 0.0) throw DataError("invalid table cell '" + t + "' at " + std::string(context));
    return Cell::of(*v);
}

char detect_delimiter(std::string_view header) {
    return header.find('\t') != std::string_view::npos ? '\t' : ',';
}

std::vector<std::string> nonempty_lines(std::string_view text) {
    std::vector<std::string> lines;
    for (auto& line : split(text, '\n')) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!trim(line).empty()) lines.push_back(line);
    }
    return lines;
}

} // namespace

std::string grade_name(GradeBucket g) {
    switch (g) {
    case GradeBucket::AA_AO: return "AA/AO";
    case GradeBucket::EO: return "EO";
    case GradeBucket::HEO_SEO: return "HEO/SEO";
    case GradeBucket::G6_G7: return "G6/G7";
    case GradeBucket::SCS: return "SCS";
    case GradeBucket::Unmapped: return "Unmapped";
    }
    return "Unmapped";
}

std::optional<GradeBucket> grade_from_name(std::string_view name) {
    for (GradeBucket g : {GradeBucket::AA_AO, GradeBucket::EO, GradeBucket::HEO_SEO,
                          GradeBucket::G6_G7, GradeBucket::SCS, GradeBucket::Unmapped}) {
        if (grade_name(g) == name) return g;
    }
    return std::nullopt;
}

std::string normalize_grade_text(std::string_view raw) {
    std::string out;
    bool pending_space = false;
    for (unsigned char c : raw) {
        if (std::isalnum(c)) {
            if (pending_space && !out.empty()) out.push_back(' ');
            pending_space = false;
            out.push_back(static_cast<char>(std::tolower(c)));
        } else {
            pending_space = true;
        }
    }
    return out;
}

GradeMapper::GradeMapper(std::vector<Rule> rules) : rules_(std::move(rules)) {
    for (auto& r : rules_) r.pattern = normalize_grade_text(r.pattern);
}

GradeMapper GradeMapper::defaults() {
    using M = Match;
    using G = GradeBucket;
    return GradeMapper({
        {M::Exact, "unmapped", G::Unmapped},
        {M::Contains, "senior civil service", G::SCS},
        {M::Contains, "scs", G::SCS},
        {M::Contains, "deputy director", G::SCS},
        {M::Contains, "director general", G::SCS},
        {M::Contains, "permanent secretary", G::SCS},
        {M::Contains, "director", G::SCS},
        {M::Contains, "grade 6", G::G6_G7},
        {M::Contains, "grade 7", G::G6_G7},
        {M::Contains, "g6", G::G6_G7},
        {M::Contains, "g7", G::G6_G7},
        {M::Contains, "senior executive officer", G::HEO_SEO},
        {M::Contains, "higher executive officer", G::HEO_SEO},
        {M::Contains, "heo", G::HEO_SEO},
        {M::Contains, "seo", G::HEO_SEO},
        {M::Contains, "executive officer", G::EO},
        {M::Contains, "eo", G::EO},
        {M::Contains, "administrative officer", G::AA_AO},
        {M::Contains, "administrative assistant", G::AA_AO},
        {M::Contains, "administrative", G::AA_AO},
        {M::Contains, "aa", G::AA_AO},
        {M::Contains, "ao", G::AA_AO},
    });
}

GradeMapper GradeMapper::from_tsv(std::string_view text) {
    std::vector<Rule> rules;
    std::size_t line_no = 0;
    for (auto& line : split(text, '\n')) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        auto cols = split(line, '\t');
        if (cols.size() != 3) {
            throw DataError("grade map line " + std::to_string(line_no) + ": expected 3 tab-separated columns");
        }
        const std::string kind = to_lower(trim(cols[0]));
        Match match;
        if (kind == "exact") {
            match = Match::Exact;
        } else if (kind == "contains") {
            match = Match::Contains;
        } else {
            throw DataError("grade map line " + std::to_string(line_no) + ": unknown match kind '" + kind + "'");
        }
        auto bucket = grade_from_name(trim(cols[2]));
        if (!bucket) {
            throw DataError("grade map line " + std::to_string(line_no) + ": unknown bucket '" + trim(cols[2]) + "'");
        }
        rules.push_back({match, trim(cols[1]), *bucket});
    }
    return GradeMapper(std::move(rules));
}

GradeMapper GradeMapper::load(const std::string& path) { return from_tsv(read_file(path)); }

GradeBucket GradeMapper::map(std::string_view grade_raw) const {
    const std::string text = normalize_grade_text(grade_raw);
    if (text.empty()) return GradeBucket::Unmapped;
    const std::string padded = " " + text + " ";
    for (const auto& rule : rules_) {
        if (rule.pattern.empty()) continue;
        if (rule.match == Match::Exact) {
            if (text == rule.pattern) return rule.bucket;
        } else if (padded.find(" " + rule.pattern + " ") != std::string::npos) {
            return rule.bucket;
        }
    }
    return GradeBucket::Unmapped;
}

GradeBucket map_grade(std::string_view grade_raw) {
    static const GradeMapper mapper = GradeMapper::defaults();
    return mapper.map(grade_raw);
}

std::string scrub_personal_data(std::string_view text) {
    static const std::regex email(R"([A-Za-z0-9._%+\-]+@[A-Za-z0-9.\-]+\.[A-Za-z]{2,})");
    // UK-style numbers: +44 / 0 prefix followed by 9-10 more digits with
    // optional spaces, dashes or a bracketed area code.
    static const std::regex phone(R"((\+44\s?\(0\)\s?|\+44\s?|\b0)(\d[\s\-\)\(]?){9,10}\b)");
    if (text.find('@') == std::string_view::npos &&
        std::none_of(text.begin(), text.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
        return std::string(text);
    }
    std::string out = std::regex_replace(std::string(text), email, "[removed]");
    return std::regex_replace(out, phone, "[removed]");
}

json vacancy_to_json(const Vacancy& v) {
    return json{{"vacancy_id", v.vacancy_id},
                {"title", v.title},
                {"department", v.department},
                {"grade_raw", v.grade_raw},
                {"grade", grade_name(v.grade)},
                {"profession", v.profession},
                {"posting_date", v.posting_date},
                {"closing_date", v.closing_date},
                {"job_summary", v.job_summary},
                {"job_description", v.job_description}};
}

std::string serialize_vacancy(const Vacancy& v) { return vacancy_to_json(v).dump(); }

std::vector<Vacancy> parse_vacancies(std::istream& source, Diagnostics& diag, const ParseOptions& options) {
    if (!source) throw DataError("vacancy source is not readable");
    const GradeMapper defaults = options.mapper ? GradeMapper{} : GradeMapper::defaults();
    const GradeMapper& mapper = options.mapper ? *options.mapper : defaults;

    std::vector<Vacancy> out;
    std::set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(source, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        const std::string where = "line " + std::to_string(line_no);
        try {
            const json rec = json::parse(line);
            if (!rec.is_object()) throw std::invalid_argument("record is not an object");
            Vacancy v;
            v.vacancy_id = trim(required_string(rec, "vacancy_id"));
            if (v.vacancy_id.empty()) throw std::invalid_argument("empty vacancy_id");
            v.department = trim(required_string(rec, "department"));
            if (v.department.empty()) throw std::invalid_argument("empty department");
            // Accept "grade_raw" (our serialized form) or "grade" (raw extracts).
            if (auto raw = optional_string(rec, "grade_raw")) {
                v.grade_raw = *raw;
            } else {
                v.grade_raw = required_string(rec, "grade");
            }
            v.job_description = required_string(rec, "job_description");
            v.job_summary = optional_string(rec, "job_summary").value_or("");
            v.title = optional_string(rec, "title").value_or("");
            auto prof = optional_string(rec, "profession");
            v.profession = prof && !trim(*prof).empty() ? trim(*prof) : "Other";
            v.posting_date = optional_string(rec, "posting_date").value_or("");
            v.closing_date = optional_string(rec, "closing_date").value_or("");
            for (const std::string* d : {&v.posting_date, &v.closing_date}) {
                if (!d->empty() && !is_date(*d)) throw std::invalid_argument("bad date '" + *d + "'");
            }
            if (options.scrub_personal_data) {
                v.job_summary = scrub_personal_data(v.job_summary);
                v.job_description = scrub_personal_data(v.job_description);
            }
            if (trim(v.job_description).empty() && trim(v.job_summary).empty()) {
                throw std::invalid_argument("both job_description and job_summary are empty");
            }
            v.grade = mapper.map(v.grade_raw);
            if (!seen.insert(v.vacancy_id).second) {
                diag.warn("duplicate_id", where + ": duplicate vacancy_id '" + v.vacancy_id + "' skipped");
                continue;
            }
            out.push_back(std::move(v));
        } catch (const json::exception& e) {
            diag.warn("malformed_record", where + ": " + e.what());
        } catch (const std::invalid_argument& e) {
            diag.warn("malformed_record", where + ": " + e.what());
        }
    }
    if (source.bad()) throw DataError("error while reading vacancy source");
    return out;
}

std::vector<Vacancy> parse_vacancies_file(const std::string& path, Diagnostics& diag, const ParseOptions& options) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open vacancy corpus: " + path);
    return parse_vacancies(in, diag, options);
}

ControlledVocabulary ControlledVocabulary::from_json(const json& j) {
    ControlledVocabulary v;
    v.departments = j.value("departments", std::vector<std::string>{});
    v.grades = j.value("grades", std::vector<std::string>{});
    v.professions = j.value("professions", std::vector<std::string>{});
    return v;
}

ControlledVocabulary ControlledVocabulary::load(const std::string& path) {
    try {
        return from_json(json::parse(read_file(path)));
    } catch (const json::exception& e) {
        throw DataError("invalid vocabulary file " + path + ": " + e.what());
    }
}

Cell ReferenceTables::fte_at(const std::string& dept, GradeBucket g) const {
    auto it = fte.find({dept, g});
    return it == fte.end() ? Cell{} : it->second;
}

Cell ReferenceTables::salary_at(const std::string& dept, GradeBucket g) const {
    auto it = median_salary.find({dept, g});
    return it == median_salary.end() ? Cell{} : it->second;
}

bool ReferenceTables::has_department(const std::string& dept) const {
    for (const auto& table : {&fte, &median_salary}) {
        auto it = table->lower_bound({dept, GradeBucket::AA_AO});
        if (it != table->end() && it->first.first == dept) return true;
    }
    return false;
}

std::vector<std::string> ReferenceTables::departments() const {
    std::set<std::string> names;
    for (const auto& [key, cell] : fte) names.insert(key.first);
    for (const auto& [key, cell] : median_salary) names.insert(key.first);
    return {names.begin(), names.end()};
}

void ReferenceTables::validate(const ControlledVocabulary& vocab) const {
    auto contains = [](const std::vector<std::string>& list, const std::string& s) {
        return list.empty() || std::find(list.begin(), list.end(), s) != list.end();
    };
    for (const auto* table : {&fte, &median_salary}) {
        for (const auto& [key, cell] : *table) {
            if (!contains(vocab.departments, key.first)) {
                throw DataError("reference table department '" + key.first + "' not in vocabulary");
            }
            if (!contains(vocab.grades, grade_name(key.second))) {
                throw DataError("reference table grade '" + grade_name(key.second) + "' not in vocabulary");
            }
        }
    }
    for (const auto& [prof, cell] : profession_fte) {
        if (!contains(vocab.professions, prof)) {
            throw DataError("reference table profession '" + prof + "' not in vocabulary");
        }
    }
}

std::vector<std::string> split_delimited(std::string_view line, char delimiter) {
    std::vector<std::string> fields;
    std::string current;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    current.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                current.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == delimiter) {
            fields.push_back(std::move(current));
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    fields.push_back(std::move(current));
    return fields;
}

std::map<DeptGradeKey, Cell> parse_grade_table(std::string_view text) {
    const auto lines = nonempty_lines(text);
    if (lines.empty()) throw DataError("grade table is empty");
    const char delim = detect_delimiter(lines.front());
    const auto header = split_delimited(lines.front(), delim);
    if (header.size() < 2) throw DataError("grade table header needs department plus grade columns");
    std::vector<GradeBucket> columns;
    for (std::size_t i = 1; i < header.size(); ++i) {
        const std::string name = trim(header[i]);
        auto g = grade_from_name(name);
        if (!g || *g == GradeBucket::Unmapped) {
            // tolerate free-text headers ("Grades 6 and 7") through the mapper
            g = map_grade(name);
            if (*g == GradeBucket::Unmapped) throw DataError("grade table: unknown grade column '" + name + "'");
        }
        columns.push_back(*g);
    }
    std::map<DeptGradeKey, Cell> table;
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const auto cells = split_delimited(lines[r], delim);
        if (cells.size() != header.size()) {
            throw DataError("grade table row " + std::to_string(r + 1) + ": expected " +
                            std::to_string(header.size()) + " fields");
        }
        const std::string dept = trim(cells[0]);
        if (dept.empty()) throw DataError("grade table row " + std::to_string(r + 1) + ": empty department");
        for (std::size_t c = 0; c < columns.size(); ++c) {
            const Cell cell = parse_cell(cells[c + 1], "row " + std::to_string(r + 1));
            if (!table.emplace(DeptGradeKey{dept, columns[c]}, cell).second) {
                throw DataError("grade table: duplicate cell for " + dept + "/" + grade_name(columns[c]));
            }
        }
    }
    return table;
}

std::map<std::string, Cell> parse_profession_table(std::string_view text) {
    const auto lines = nonempty_lines(text);
    if (lines.empty()) throw DataError("profession table is empty");
    const char delim = detect_delimiter(lines.front());
    std::map<std::string, Cell> table;
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const auto cells = split_delimited(lines[r], delim);
        if (cells.size() != 2) throw DataError("profession table row " + std::to_string(r + 1) + ": expected 2 fields");
        const std::string prof = trim(cells[0]);
        if (!table.emplace(prof, parse_cell(cells[1], "row " + std::to_string(r + 1))).second) {
            throw DataError("profession table: duplicate profession '" + prof + "'");
        }
    }
    return table;
}

ReferenceTables load_reference_tables(const std::string& fte_path, const std::string& salary_path,
                                      const std::string& profession_path, double population_total) {
    ReferenceTables ref;
    ref.fte = parse_grade_table(read_file(fte_path));
    ref.median_salary = parse_grade_table(read_file(salary_path));
    if (!profession_path.empty()) ref.profession_fte = parse_profession_table(read_file(profession_path));
    if (population_total > 0.0) {
        ref.population_total = population_total;
    } else {
        CompensatedSum total;
        for (const auto& [key, cell] : ref.fte) {
            if (cell.has_value()) total.add(cell.value);
        }
        ref.population_total = total.value();
    }
    return ref;
}

std::optional<double> join_salary(const Vacancy& v, const ReferenceTables& ref, Diagnostics& diag) {
    if (v.grade == GradeBucket::Unmapped) {
        diag.warn("unmapped_grade", v.vacancy_id + ": grade '" + v.grade_raw + "' is unmapped; no salary");
        return std::nullopt;
    }
    if (!ref.has_department(v.department)) {
        diag.warn("unknown_department", v.vacancy_id + ": department '" + v.department + "' not in salary table");
        return std::nullopt;
    }
    const Cell cell = ref.salary_at(v.department, v.grade);
    switch (cell.state) {
    case Cell::State::Value: return cell.value;
    case Cell::State::Suppressed:
        diag.info("suppressed_salary", v.vacancy_id + ": salary suppressed for " + v.department + "/" +
                                           grade_name(v.grade));
        return std::nullopt;
    case Cell::State::Missing:
        diag.warn("missing_salary", v.vacancy_id + ": no salary cell for " + v.department + "/" +
                                        grade_name(v.grade));
        return std::nullopt;
    }
    return std::nullopt;
}

std::vector<Vacancy> filter_departments(std::vector<Vacancy> vacancies, std::size_t min_vacancies,
                                        Diagnostics& diag) {
    if (min_vacancies <= 1) return vacancies;
    std::map<std::string, std::size_t> counts;
    for (const auto& v : vacancies) ++counts[v.department];
    std::vector<Vacancy> kept;
    kept.reserve(vacancies.size());
    for (auto& v : vacancies) {
        if (counts[v.department] >= min_vacancies) kept.push_back(std::move(v));
    }
    for (const auto& [dept, n] : counts) {
        if (n < min_vacancies) {
            diag.info("department_filtered", dept + ": " + std::to_string(n) + " vacancies below threshold " +
                                                 std::to_string(min_vacancies));
        }
    }
    return kept;
}

} // namespace taskexposure
