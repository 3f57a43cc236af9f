#pragma once

#include <cstddef>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <string>

namespace jointpred {

/// Base of every error thrown by the library. `kind()` is a stable
/// machine-readable tag used by the CLI error record.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}
    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

#define JOINTPRED_ERROR(Name)                                              \
    class Name : public Error {                                            \
    public:                                                                \
        explicit Name(const std::string& what) : Error(#Name, what) {}     \
    }

JOINTPRED_ERROR(NonFiniteValue);
JOINTPRED_ERROR(DuplicateTimestamp);
JOINTPRED_ERROR(InsufficientData);
JOINTPRED_ERROR(EmptySeries);
JOINTPRED_ERROR(OrderTooHigh);
JOINTPRED_ERROR(DegenerateInput);
JOINTPRED_ERROR(SchemaMismatch);
JOINTPRED_ERROR(NoUsableFeatures);
JOINTPRED_ERROR(NoDonorRows);
JOINTPRED_ERROR(SingularSystem);
JOINTPRED_ERROR(NotEnoughRows);
JOINTPRED_ERROR(Unsupported);
JOINTPRED_ERROR(TooFewParticipants);
JOINTPRED_ERROR(EmptyFusion);
JOINTPRED_ERROR(EmptyInput);
JOINTPRED_ERROR(LengthMismatch);
JOINTPRED_ERROR(VersionMismatch);
JOINTPRED_ERROR(IoError);

#undef JOINTPRED_ERROR

class InvalidConfig : public Error {
public:
    InvalidConfig(std::string field, const std::string& reason)
        : Error("InvalidConfig", "invalid config field '" + field + "': " + reason),
          field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

class SchemaError : public Error {
public:
    SchemaError(std::string column, const std::string& reason)
        : Error("SchemaError", "schema error at column '" + column + "': " + reason),
          column_(std::move(column)) {}
    const std::string& column() const noexcept { return column_; }

private:
    std::string column_;
};

class ParseError : public Error {
public:
    ParseError(std::size_t row, std::string column, const std::string& reason)
        : Error("ParseError", "parse error at row " + std::to_string(row) + ", column '" +
                                  column + "': " + reason),
          row_(row), column_(std::move(column)) {}
    std::size_t row() const noexcept { return row_; }
    const std::string& column() const noexcept { return column_; }

private:
    std::size_t row_;
    std::string column_;
};

// Warnings are routed through a process-wide sink so callers (CLI, tests)
// can capture them. The sink is called under a mutex.
namespace diag {

using Sink = std::function<void(const std::string&)>;

inline std::mutex& sink_mutex() {
    static std::mutex m;
    return m;
}

inline Sink& sink() {
    static Sink s;
    return s;
}

inline void set_warning_sink(Sink s) {
    std::lock_guard lock(sink_mutex());
    sink() = std::move(s);
}

inline void warn(const std::string& message) {
    std::lock_guard lock(sink_mutex());
    if (sink()) sink()(message);
}

}  // namespace diag
}  // namespace jointpred
