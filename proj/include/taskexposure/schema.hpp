#pragma once

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace taskexposure {

/// Why a structured payload was rejected.
enum class ErrorClass {
    None,
    ParseError,
    MissingField,
    TypeMismatch,
    RangeViolation,
    EnumViolation,
    ReferenceViolation,
    PermutationViolation,
    CardinalityViolation,
    CapExceeded,
};

std::string error_class_name(ErrorClass c);

struct ValidationResult {
    ErrorClass error = ErrorClass::None;
    std::string path;    // JSON-pointer-ish location, "" for root
    std::string message;
    nlohmann::json payload;

    bool ok() const { return error == ErrorClass::None; }

    static ValidationResult accept(nlohmann::json payload);
    static ValidationResult reject(ErrorClass c, std::string path, std::string message);
};

/// Minimal structured-output schema: nested objects, arrays, string-keyed
/// maps and scalars with ranges and enums.
class Schema {
public:
    enum class Kind { Object, Array, Map, String, Integer, Number, Boolean };

    struct Field;

    static Schema object(std::vector<Field> fields);
    static Schema array(Schema items, std::optional<std::size_t> min_items = std::nullopt,
                        std::optional<std::size_t> max_items = std::nullopt);
    static Schema map(Schema values);
    static Schema string(bool non_empty = false);
    static Schema string_enum(std::vector<std::string> values);
    static Schema integer(std::optional<double> minimum = std::nullopt,
                          std::optional<double> maximum = std::nullopt);
    static Schema integer_enum(std::vector<long long> values);
    static Schema number(std::optional<double> minimum = std::nullopt,
                         std::optional<double> maximum = std::nullopt);
    static Schema boolean();

    Schema& describe(std::string text);

    Kind kind() const { return kind_; }
    bool empty() const { return kind_ == Kind::Object && fields_.empty(); }
    const std::vector<Field>& fields() const { return fields_; }

    /// Draft 2020-12 JSON Schema rendering, used for remote structured output
    /// and for request fingerprints.
    nlohmann::json to_json_schema() const;

    ValidationResult validate(const nlohmann::json& value) const;

private:
    ErrorClass check(const nlohmann::json& value, const std::string& path, std::string& message) const;

    Kind kind_ = Kind::Object;
    std::vector<Field> fields_;
    std::vector<Schema> items_; // one element for Array and Map
    std::optional<double> minimum_;
    std::optional<double> maximum_;
    std::optional<std::size_t> min_items_;
    std::optional<std::size_t> max_items_;
    std::vector<std::string> string_enum_;
    std::vector<long long> integer_enum_;
    bool non_empty_ = false;
    std::string description_;
};

struct Schema::Field {
    std::string name;
    Schema schema;
    bool required = true;
};

/// Parses `raw` as JSON and checks it against `schema`.
ValidationResult validate_payload(std::string_view raw, const Schema& schema);

} // namespace taskexposure
