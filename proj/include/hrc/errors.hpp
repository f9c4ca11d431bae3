#pragma once

#include <stdexcept>
#include <string>

namespace hrc {

// Every failure the library reports derives from Error so callers can catch
// one type at the boundary (CLI, HTTP handlers) and still dispatch on kind().
enum class ErrorKind {
    invalid_input,
    degenerate_geometry,
    integration_divergence,
    plan_parse,
    unresolved_symbol,
    naming,
    transport,
    skill_miss,
    illegal_transition,
    library,
    unknown_predicate,
    io,
    planning_failure,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

const char* to_string(ErrorKind kind) noexcept;

}  // namespace hrc
