#pragma once

#include <stdexcept>
#include <string>

namespace crseval {

// Coarse failure category, used by the CLI to pick an exit code:
//   config -> 2, upstream -> 3, data -> 4.
enum class ErrorKind { config, upstream, data };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& w) : Error(ErrorKind::config, w) {}
};

// Data-contract violations: bad corpus lines, duplicate ids, broken invariants.
struct DataError : Error {
    explicit DataError(const std::string& w) : Error(ErrorKind::data, w) {}
};

struct DuplicateIdError : DataError {
    explicit DuplicateIdError(const std::string& id)
        : DataError("duplicate item_id: " + id), item_id(id) {}
    std::string item_id;
};

struct ParseError : DataError {
    ParseError(const std::string& path, size_t line, const std::string& detail)
        : DataError(path + ":" + std::to_string(line) + ": " + detail),
          line_number(line) {}
    size_t line_number;
};

// Backend produced output that the strict preference parser rejected even
// after the configured retries. Carries the raw output for diagnosis.
struct PreferenceParseError : DataError {
    explicit PreferenceParseError(const std::string& raw)
        : DataError("unparseable preference output: " + raw), raw_output(raw) {}
    std::string raw_output;
};

struct LeakageError : DataError {
    explicit LeakageError(const std::string& w) : DataError(w) {}
};

struct JudgeParseError : DataError {
    explicit JudgeParseError(const std::string& raw)
        : DataError("unparseable judge output: " + raw), raw_output(raw) {}
    std::string raw_output;
};

struct BackendUnavailable : Error {
    explicit BackendUnavailable(const std::string& w)
        : Error(ErrorKind::upstream, w) {}
};

struct ScriptExhausted : Error {
    explicit ScriptExhausted(const std::string& w)
        : Error(ErrorKind::upstream, w) {}
};

struct AdapterUnavailable : Error {
    explicit AdapterUnavailable(const std::string& w)
        : Error(ErrorKind::upstream, w) {}
};

// The CRS returned a slate that breaks its contract (wrong size, duplicate
// or unknown item ids).
struct AdapterContractViolation : DataError {
    explicit AdapterContractViolation(const std::string& w) : DataError(w) {}
};

} // namespace crseval
