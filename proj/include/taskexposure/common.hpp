#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace taskexposure {

/// Thrown when an operation's precondition is violated by caller input
/// (bad parameter range, empty input, length mismatch).
class PreconditionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Thrown for malformed or inconsistent data (unreadable files, bad tables,
/// infeasible raking cells).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Thrown when a provider cannot be reached or configured.
class ProviderError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Severity { Info, Warning, Error };

struct Diagnostic {
    Severity severity = Severity::Warning;
    std::string code;
    std::string message;
};

/// Collects non-fatal problems reported while processing a stream.
class Diagnostics {
public:
    void info(std::string code, std::string message);
    void warn(std::string code, std::string message);
    void error(std::string code, std::string message);

    const std::vector<Diagnostic>& entries() const { return entries_; }
    std::size_t count(std::string_view code) const;
    bool empty() const { return entries_.empty(); }
    void clear() { entries_.clear(); }
    void append(const Diagnostics& other);

private:
    std::vector<Diagnostic> entries_;
};

/// Neumaier-compensated running sum.
class CompensatedSum {
public:
    void add(double x);
    double value() const { return sum_ + compensation_; }

private:
    double sum_ = 0.0;
    double compensation_ = 0.0;
};

double compensated_sum(std::span<const double> values);

/// Lowercase hex SHA-256 of the given bytes.
std::string sha256_hex(std::string_view data);

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char delimiter);

/// Reads a whole file; throws DataError when unreadable.
std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

} // namespace taskexposure
