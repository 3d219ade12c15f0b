#pragma once

#include "taskexposure/common.hpp"

#include <nlohmann/json.hpp>

#include <istream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace taskexposure {

enum class GradeBucket { AA_AO, EO, HEO_SEO, G6_G7, SCS, Unmapped };

inline constexpr GradeBucket kMappedGrades[] = {GradeBucket::AA_AO, GradeBucket::EO,
                                                GradeBucket::HEO_SEO, GradeBucket::G6_G7,
                                                GradeBucket::SCS};

/// Canonical display name: "AA/AO", "EO", "HEO/SEO", "G6/G7", "SCS", "Unmapped".
std::string grade_name(GradeBucket g);
std::optional<GradeBucket> grade_from_name(std::string_view name);

/// Lowercases, turns every non-alphanumeric byte into a space and collapses runs.
std::string normalize_grade_text(std::string_view raw);

/// Ordered first-match rule table from free-text grades to buckets. Rules are
/// either whole-string (`exact`) or word-boundary phrase (`contains`) matches on
/// normalized text. Anything unmatched maps to Unmapped.
class GradeMapper {
public:
    enum class Match { Exact, Contains };
    struct Rule {
        Match match;
        std::string pattern; // normalized
        GradeBucket bucket;
    };

    GradeMapper() = default;
    explicit GradeMapper(std::vector<Rule> rules);

    /// Shipped defaults (also in data/grade_map.tsv).
    static GradeMapper defaults();

    /// Tab-separated `match<TAB>pattern<TAB>bucket`, `#` comments allowed.
    static GradeMapper from_tsv(std::string_view text);
    static GradeMapper load(const std::string& path);

    GradeBucket map(std::string_view grade_raw) const;
    const std::vector<Rule>& rules() const { return rules_; }

private:
    std::vector<Rule> rules_;
};

/// Maps with the shipped default rule table.
GradeBucket map_grade(std::string_view grade_raw);

struct Vacancy {
    std::string vacancy_id;
    std::string title;
    std::string department;
    std::string grade_raw;
    GradeBucket grade = GradeBucket::Unmapped;
    std::string profession = "Other";
    std::string posting_date; // YYYY-MM-DD or empty
    std::string closing_date;
    std::string job_summary;
    std::string job_description;

    bool operator==(const Vacancy&) const = default;
};

/// Replaces e-mail addresses and phone numbers with "[removed]".
std::string scrub_personal_data(std::string_view text);

nlohmann::json vacancy_to_json(const Vacancy& v);
std::string serialize_vacancy(const Vacancy& v);

struct ParseOptions {
    const GradeMapper* mapper = nullptr; // defaults when null
    bool scrub_personal_data = true;
};

/// Parses one JSON-object-per-line vacancy stream. Malformed lines and
/// duplicate ids are skipped and reported as diagnostics. Throws DataError
/// if the stream itself is unreadable.
std::vector<Vacancy> parse_vacancies(std::istream& source, Diagnostics& diag,
                                     const ParseOptions& options = {});
std::vector<Vacancy> parse_vacancies_file(const std::string& path, Diagnostics& diag,
                                          const ParseOptions& options = {});

/// A reference-table cell: a count/amount, suppressed ("c"), or absent.
struct Cell {
    enum class State { Value, Suppressed, Missing };
    State state = State::Missing;
    double value = 0.0;

    static Cell of(double v) { return {State::Value, v}; }
    static Cell suppressed() { return {State::Suppressed, 0.0}; }
    bool has_value() const { return state == State::Value; }
};

struct ControlledVocabulary {
    std::vector<std::string> departments;
    std::vector<std::string> grades;
    std::vector<std::string> professions;

    static ControlledVocabulary from_json(const nlohmann::json& j);
    static ControlledVocabulary load(const std::string& path);
};

using DeptGradeKey = std::pair<std::string, GradeBucket>;

struct ReferenceTables {
    std::map<DeptGradeKey, Cell> fte;
    std::map<DeptGradeKey, Cell> median_salary;
    std::map<std::string, Cell> profession_fte;
    double population_total = 0.0;

    Cell fte_at(const std::string& dept, GradeBucket g) const;
    Cell salary_at(const std::string& dept, GradeBucket g) const;
    bool has_department(const std::string& dept) const;
    std::vector<std::string> departments() const;

    /// Throws DataError for keys outside the vocabularies.
    void validate(const ControlledVocabulary& vocab) const;
};

/// Reads a wide department-by-grade table: header `department,<grade>...`,
/// one row per department. Cells are numbers, the suppression token "c",
/// or empty (missing). Tab-delimited when the header contains a tab.
std::map<DeptGradeKey, Cell> parse_grade_table(std::string_view text);

/// Reads `profession,fte` rows with header.
std::map<std::string, Cell> parse_profession_table(std::string_view text);

/// Loads tables from paths; population_total defaults to the sum of
/// unsuppressed FTE cells when `population_total` is not positive.
ReferenceTables load_reference_tables(const std::string& fte_path,
                                      const std::string& salary_path,
                                      const std::string& profession_path,
                                      double population_total = 0.0);

/// Median salary for the vacancy's (department, grade); nullopt with a
/// diagnostic when unmapped, missing or suppressed.
std::optional<double> join_salary(const Vacancy& v, const ReferenceTables& ref, Diagnostics& diag);

/// Drops vacancies from departments with fewer than `min_vacancies` records.
std::vector<Vacancy> filter_departments(std::vector<Vacancy> vacancies, std::size_t min_vacancies,
                                        Diagnostics& diag);

/// Splits a delimited line honouring double-quoted fields.
std::vector<std::string> split_delimited(std::string_view line, char delimiter);

} // namespace taskexposure
