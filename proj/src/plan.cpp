#include "hrc/plan.hpp"

#include "hrc/errors.hpp"

#include <algorithm>
#include <cctype>
#include <array>
#include <sstream>

namespace hrc {

namespace {

constexpr std::array<std::pair<MotionKind, std::string_view>, 6> kKinds{{
    {MotionKind::move_to_position, "move_to_position"},
    {MotionKind::gripper_control, "gripper_control"},
    {MotionKind::base_cycle_move, "base_cycle_move"},
    {MotionKind::close_move, "close_move"},
    {MotionKind::rotate_waist, "rotate_waist"},
    {MotionKind::dmp_publish, "dmp_publish"},
}};

std::string_view trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

[[noreturn]] void parse_error(std::size_t line_no, std::string_view line, const std::string& why)
{
    throw Error(ErrorKind::plan_parse,
                "plan line " + std::to_string(line_no) + ": " + why + ": '" + std::string(line) + "'");
}

bool valid_arg(std::string_view arg)
{
    return !arg.empty() && std::all_of(arg.begin(), arg.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '-';
    });
}

}  // namespace

const char* to_string(MotionKind kind) noexcept
{
    for (const auto& [k, name] : kKinds) {
        if (k == kind) {
            return name.data();
        }
    }
    return "unknown";
}

std::optional<MotionKind> parse_motion_kind(std::string_view text)
{
    for (const auto& [k, name] : kKinds) {
        if (name == text) {
            return k;
        }
    }
    return std::nullopt;
}

std::string MotionFunction::str() const { return std::string(to_string(kind)) + "(" + arg + ")"; }

SymbolParts split_symbol(std::string_view symbol)
{
    for (std::string_view suffix : {"_above", "_inside", "_handle", "_knob"}) {
        if (symbol.size() > suffix.size() && symbol.ends_with(suffix)) {
            return {std::string(symbol.substr(0, symbol.size() - suffix.size())), std::string(suffix)};
        }
    }
    return {std::string(symbol), {}};
}

bool is_library_constant(std::string_view symbol)
{
    return symbol == "init" || symbol == "handover" || symbol.starts_with("clearance");
}

std::vector<SubTask> parse_plan_dsl(std::string_view text)
{
    std::vector<SubTask> out;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto end = text.find('\n', pos);
        const std::string_view raw = text.substr(pos, end == std::string_view::npos ? text.size() - pos : end - pos);
        pos = end == std::string_view::npos ? text.size() + 1 : end + 1;
        ++line_no;
        const std::string_view line = trim(raw);
        if (line.empty() || line.front() == '#') {
            continue;
        }
        if (line.starts_with("subtask:")) {
            const auto desc = trim(line.substr(8));
            if (desc.empty()) {
                parse_error(line_no, line, "empty subtask description");
            }
            if (!out.empty() && out.back().motions.empty()) {
                parse_error(line_no, line, "previous subtask has no motion functions");
            }
            out.push_back({std::string(desc), {}, std::nullopt, std::nullopt});
        } else if (line.starts_with("mf:")) {
            if (out.empty()) {
                parse_error(line_no, line, "motion function before any subtask");
            }
            const auto call = trim(line.substr(3));
            const auto open = call.find('(');
            if (open == std::string_view::npos || call.back() != ')') {
                parse_error(line_no, line, "expected kind(arg)");
            }
            const auto kind = parse_motion_kind(trim(call.substr(0, open)));
            if (!kind) {
                parse_error(line_no, line, "unknown motion function");
            }
            const auto arg = trim(call.substr(open + 1, call.size() - open - 2));
            if (!valid_arg(arg)) {
                parse_error(line_no, line, "invalid argument");
            }
            out.back().motions.push_back({*kind, std::string(arg)});
        } else {
            parse_error(line_no, line, "unrecognized line");
        }
    }
    if (out.empty()) {
        throw Error(ErrorKind::plan_parse, "plan: no subtasks");
    }
    if (out.back().motions.empty()) {
        throw Error(ErrorKind::plan_parse, "plan: subtask '" + out.back().description + "' has no motion functions");
    }
    return out;
}

std::string format_plan_dsl(const std::vector<SubTask>& subtasks)
{
    std::ostringstream os;
    for (const auto& st : subtasks) {
        os << "subtask: " << st.description << '\n';
        for (const auto& m : st.motions) {
            os << "mf: " << m.str() << '\n';
        }
    }
    return os.str();
}

std::vector<std::string> positional_symbols(const Plan& plan)
{
    std::vector<std::string> out;
    for (const auto& st : plan.subtasks) {
        for (const auto& m : st.motions) {
            if (m.kind == MotionKind::move_to_position || m.kind == MotionKind::close_move) {
                out.push_back(m.arg);
            }
        }
        if (st.anchor) {
            out.push_back(*st.anchor);
        }
    }
    return out;
}

bool symbol_closed(const Plan& plan)
{
    const auto symbols = positional_symbols(plan);
    return std::all_of(symbols.begin(), symbols.end(), [&](const std::string& s) {
        return plan.bound_symbols.count(s) > 0 || is_library_constant(s);
    });
}

}  // namespace hrc
