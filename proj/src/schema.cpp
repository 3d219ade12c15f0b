#include "taskexposure/schema.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

using json = nlohmann::json;

namespace taskexposure {

std::string error_class_name(ErrorClass c) {
    switch (c) {
    case ErrorClass::None: return "None";
    case ErrorClass::ParseError: return "ParseError";
    case ErrorClass::MissingField: return "MissingField";
    case ErrorClass::TypeMismatch: return "TypeMismatch";
    case ErrorClass::RangeViolation: return "RangeViolation";
    case ErrorClass::EnumViolation: return "EnumViolation";
    case ErrorClass::ReferenceViolation: return "ReferenceViolation";
    case ErrorClass::PermutationViolation: return "PermutationViolation";
    case ErrorClass::CardinalityViolation: return "CardinalityViolation";
    case ErrorClass::CapExceeded: return "CapExceeded";
    }
    return "Unknown";
}

ValidationResult ValidationResult::accept(json payload) {
    ValidationResult r;
    r.payload = std::move(payload);
    return r;
}

ValidationResult ValidationResult::reject(ErrorClass c, std::string path, std::string message) {
    ValidationResult r;
    r.error = c;
    r.path = std::move(path);
    r.message = std::move(message);
    return r;
}

Schema Schema::object(std::vector<Field> fields) {
    Schema s;
    s.kind_ = Kind::Object;
    s.fields_ = std::move(fields);
    return s;
}

Schema Schema::array(Schema items, std::optional<std::size_t> min_items, std::optional<std::size_t> max_items) {
    Schema s;
    s.kind_ = Kind::Array;
    s.items_.push_back(std::move(items));
    s.min_items_ = min_items;
    s.max_items_ = max_items;
    return s;
}

Schema Schema::map(Schema values) {
    Schema s;
    s.kind_ = Kind::Map;
    s.items_.push_back(std::move(values));
    return s;
}

Schema Schema::string(bool non_empty) {
    Schema s;
    s.kind_ = Kind::String;
    s.non_empty_ = non_empty;
    return s;
}

Schema Schema::string_enum(std::vector<std::string> values) {
    Schema s;
    s.kind_ = Kind::String;
    s.string_enum_ = std::move(values);
    return s;
}

Schema Schema::integer(std::optional<double> minimum, std::optional<double> maximum) {
    Schema s;
    s.kind_ = Kind::Integer;
    s.minimum_ = minimum;
    s.maximum_ = maximum;
    return s;
}

Schema Schema::integer_enum(std::vector<long long> values) {
    Schema s;
    s.kind_ = Kind::Integer;
    s.integer_enum_ = std::move(values);
    return s;
}

Schema Schema::number(std::optional<double> minimum, std::optional<double> maximum) {
    Schema s;
    s.kind_ = Kind::Number;
    s.minimum_ = minimum;
    s.maximum_ = maximum;
    return s;
}

Schema Schema::boolean() {
    Schema s;
    s.kind_ = Kind::Boolean;
    return s;
}

Schema& Schema::describe(std::string text) {
    description_ = std::move(text);
    return *this;
}

json Schema::to_json_schema() const {
    json j;
    switch (kind_) {
    case Kind::Object: {
        j["type"] = "object";
        json props = json::object();
        json required = json::array();
        for (const auto& f : fields_) {
            props[f.name] = f.schema.to_json_schema();
            if (f.required) required.push_back(f.name);
        }
        j["properties"] = props;
        j["required"] = required;
        j["additionalProperties"] = false;
        break;
    }
    case Kind::Array:
        j["type"] = "array";
        j["items"] = items_.front().to_json_schema();
        if (min_items_) j["minItems"] = *min_items_;
        if (max_items_) j["maxItems"] = *max_items_;
        break;
    case Kind::Map:
        j["type"] = "object";
        j["additionalProperties"] = items_.front().to_json_schema();
        break;
    case Kind::String:
        j["type"] = "string";
        if (!string_enum_.empty()) j["enum"] = string_enum_;
        if (non_empty_) j["minLength"] = 1;
        break;
    case Kind::Integer:
        j["type"] = "integer";
        if (!integer_enum_.empty()) j["enum"] = integer_enum_;
        break;
    case Kind::Number:
        j["type"] = "number";
        break;
    case Kind::Boolean:
        j["type"] = "boolean";
        break;
    }
    if (minimum_) j["minimum"] = *minimum_;
    if (maximum_) j["maximum"] = *maximum_;
    if (!description_.empty()) j["description"] = description_;
    return j;
}

namespace {

std::string fmt_number(double v) {
    std::ostringstream ss;
    ss << v;
    return ss.str();
}

ErrorClass check_range(double v, const std::optional<double>& lo, const std::optional<double>& hi,
                       const std::string& path, std::string& message) {
    if ((lo && v < *lo) || (hi && v > *hi)) {
        message = path + ": " + fmt_number(v) + " outside [" + (lo ? fmt_number(*lo) : "-inf") + ", " +
                  (hi ? fmt_number(*hi) : "inf") + "]";
        return ErrorClass::RangeViolation;
    }
    return ErrorClass::None;
}

} // namespace

ErrorClass Schema::check(const json& value, const std::string& path, std::string& message) const {
    auto mismatch = [&](const char* expected) {
        message = path + ": expected " + expected + ", got " + value.type_name();
        return ErrorClass::TypeMismatch;
    };
    switch (kind_) {
    case Kind::Object: {
        if (!value.is_object()) return mismatch("object");
        for (const auto& f : fields_) {
            auto it = value.find(f.name);
            if (it == value.end() || it->is_null()) {
                if (f.required) {
                    message = path + "/" + f.name + ": required field missing";
                    return ErrorClass::MissingField;
                }
                continue;
            }
            if (auto e = f.schema.check(*it, path + "/" + f.name, message); e != ErrorClass::None) return e;
        }
        return ErrorClass::None;
    }
    case Kind::Array: {
        if (!value.is_array()) return mismatch("array");
        if ((min_items_ && value.size() < *min_items_) || (max_items_ && value.size() > *max_items_)) {
            message = path + ": " + std::to_string(value.size()) + " items outside allowed count";
            return ErrorClass::CardinalityViolation;
        }
        for (std::size_t i = 0; i < value.size(); ++i) {
            if (auto e = items_.front().check(value[i], path + "/" + std::to_string(i), message);
                e != ErrorClass::None) {
                return e;
            }
        }
        return ErrorClass::None;
    }
    case Kind::Map: {
        if (!value.is_object()) return mismatch("object");
        for (auto it = value.begin(); it != value.end(); ++it) {
            if (auto e = items_.front().check(it.value(), path + "/" + it.key(), message); e != ErrorClass::None) {
                return e;
            }
        }
        return ErrorClass::None;
    }
    case Kind::String: {
        if (!value.is_string()) return mismatch("string");
        const auto& s = value.get_ref<const std::string&>();
        if (!string_enum_.empty() && std::find(string_enum_.begin(), string_enum_.end(), s) == string_enum_.end()) {
            message = path + ": '" + s + "' is not an allowed value";
            return ErrorClass::EnumViolation;
        }
        if (non_empty_ && s.find_first_not_of(" \t\r\n") == std::string::npos) {
            message = path + ": empty string";
            return ErrorClass::RangeViolation;
        }
        return ErrorClass::None;
    }
    case Kind::Integer: {
        long long v = 0;
        if (value.is_number_integer()) {
            v = value.get<long long>();
        } else if (value.is_number_float() && std::isfinite(value.get<double>()) &&
                   std::floor(value.get<double>()) == value.get<double>()) {
            v = static_cast<long long>(value.get<double>());
        } else {
            return mismatch("integer");
        }
        if (!integer_enum_.empty() &&
            std::find(integer_enum_.begin(), integer_enum_.end(), v) == integer_enum_.end()) {
            message = path + ": " + std::to_string(v) + " is not an allowed value";
            return ErrorClass::EnumViolation;
        }
        return check_range(static_cast<double>(v), minimum_, maximum_, path, message);
    }
    case Kind::Number: {
        if (!value.is_number()) return mismatch("number");
        const double v = value.get<double>();
        if (!std::isfinite(v)) {
            message = path + ": non-finite number";
            return ErrorClass::RangeViolation;
        }
        return check_range(v, minimum_, maximum_, path, message);
    }
    case Kind::Boolean:
        if (!value.is_boolean()) return mismatch("boolean");
        return ErrorClass::None;
    }
    return ErrorClass::None;
}

ValidationResult Schema::validate(const json& value) const {
    std::string message;
    const ErrorClass e = check(value, "", message);
    if (e != ErrorClass::None) {
        const auto colon = message.find(':');
        return ValidationResult::reject(e, colon == std::string::npos ? "" : message.substr(0, colon), message);
    }
    return ValidationResult::accept(value);
}

ValidationResult validate_payload(std::string_view raw, const Schema& schema) {
    json parsed;
    try {
        parsed = json::parse(raw);
    } catch (const json::exception& e) {
        return ValidationResult::reject(ErrorClass::ParseError, "", e.what());
    }
    return schema.validate(parsed);
}

} // namespace taskexposure
