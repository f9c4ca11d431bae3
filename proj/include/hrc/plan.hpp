#pragma once

#include "hrc/geometry.hpp"

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hrc {

enum class MotionKind { move_to_position, gripper_control, base_cycle_move, close_move, rotate_waist, dmp_publish };

const char* to_string(MotionKind kind) noexcept;
std::optional<MotionKind> parse_motion_kind(std::string_view text);

struct MotionFunction {
    MotionKind kind = MotionKind::move_to_position;
    std::string arg;

    std::string str() const;  // kind(arg)
    bool operator==(const MotionFunction&) const = default;
};

/// Positional symbols (move_to_position targets) split into base name and
/// suffix: "plate_above" -> {"plate", "_above"}.
struct SymbolParts {
    std::string base;
    std::string suffix;  // "", "_above", "_inside", "_handle", "_knob"
};
SymbolParts split_symbol(std::string_view symbol);

/// Symbols the simulator resolves from the scene itself.
bool is_library_constant(std::string_view symbol);

struct SubTask {
    std::string description;
    std::vector<MotionFunction> motions;
    std::optional<std::string> skill_name;
    /// Positional symbol a stored skill is anchored to; its bound position
    /// shifts the skill's goals.
    std::optional<std::string> anchor;
};

enum class Horizon { short_horizon, long_horizon };

struct Plan {
    std::string task_text;
    Horizon horizon = Horizon::short_horizon;
    std::vector<SubTask> subtasks;
    std::map<std::string, Vec3> bound_symbols;
    /// Symbol -> label of the perceived object it was bound to.
    std::map<std::string, std::string> symbol_labels;
};

/// Parses the line-oriented plan language:
///   subtask: <description>
///   mf: <kind>(<arg>)
/// Blank lines and lines starting with '#' are ignored. Every subtask must
/// carry at least one motion. Throws Error(plan_parse) with the offending line.
std::vector<SubTask> parse_plan_dsl(std::string_view text);

/// Inverse of parse_plan_dsl (without comments).
std::string format_plan_dsl(const std::vector<SubTask>& subtasks);

/// Motion symbols that must be bound for execution: every move_to_position
/// and close_move argument plus skill anchors.
std::vector<std::string> positional_symbols(const Plan& plan);

/// True when every positional symbol is bound or a library constant.
bool symbol_closed(const Plan& plan);

}  // namespace hrc
