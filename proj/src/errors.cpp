#include "hrc/errors.hpp"

namespace hrc {

const char* to_string(ErrorKind kind) noexcept
{
    switch (kind) {
    case ErrorKind::invalid_input: return "invalid_input";
    case ErrorKind::degenerate_geometry: return "degenerate_geometry";
    case ErrorKind::integration_divergence: return "integration_divergence";
    case ErrorKind::plan_parse: return "plan_parse";
    case ErrorKind::unresolved_symbol: return "unresolved_symbol";
    case ErrorKind::naming: return "naming";
    case ErrorKind::transport: return "transport";
    case ErrorKind::skill_miss: return "skill_miss";
    case ErrorKind::illegal_transition: return "illegal_transition";
    case ErrorKind::library: return "library";
    case ErrorKind::unknown_predicate: return "unknown_predicate";
    case ErrorKind::io: return "io";
    case ErrorKind::planning_failure: return "planning_failure";
    }
    return "unknown";
}

}  // namespace hrc
