#include "hrc/errors.hpp"
#include "hrc/planner.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <sstream>

namespace hrc {

namespace {

constexpr std::array<std::string_view, 10> kOrdinals{"first", "second", "third",   "fourth", "fifth",
                                                     "sixth", "seventh", "eighth", "ninth",  "tenth"};

std::vector<std::string> words(const std::string& text)
{
    std::istringstream in(text);
    std::vector<std::string> out;
    for (std::string w; in >> w;) {
        out.push_back(w);
    }
    return out;
}

std::string join(const std::vector<std::string>& w, std::size_t from, std::size_t to, char sep = ' ')
{
    std::string out;
    for (std::size_t i = from; i < to && i < w.size(); ++i) {
        if (!out.empty()) {
            out += sep;
        }
        out += w[i];
    }
    return out;
}

void replace_phrase(std::string& s, const std::string& from, const std::string& to)
{
    // Whole-word replacement on a space-separated string.
    const std::string padded_from = " " + from + " ";
    std::string padded = " " + s + " ";
    for (auto pos = padded.find(padded_from); pos != std::string::npos; pos = padded.find(padded_from, pos + to.size() + 1)) {
        padded.replace(pos, padded_from.size(), " " + to + " ");
    }
    s = padded.substr(1, padded.size() - 2);
}

bool is_article(const std::string& w) { return w == "the" || w == "a" || w == "an" || w == "one"; }

std::optional<ObjectRef> parse_object(const std::vector<std::string>& w, std::size_t from, std::size_t to)
{
    std::vector<std::string> rest;
    ObjectRef ref;
    for (std::size_t i = from; i < to && i < w.size(); ++i) {
        const auto& t = w[i];
        if (is_article(t)) {
            continue;
        }
        const auto ord = std::find(kOrdinals.begin(), kOrdinals.end(), t);
        if (ord != kOrdinals.end()) {
            ref.which = ObjectRef::Which::index;
            ref.index = static_cast<int>(ord - kOrdinals.begin()) + 1;
        } else if (t == "left" || t == "leftmost") {
            ref.which = ObjectRef::Which::index;
            ref.index = 1;
        } else if (t == "middle" || t == "center" || t == "centre") {
            ref.which = ObjectRef::Which::middle;
        } else if (t == "right" || t == "rightmost" || t == "last") {
            ref.which = ObjectRef::Which::rightmost;
        } else {
            rest.push_back(t);
        }
    }
    if (rest.empty()) {
        return std::nullopt;
    }
    std::string name = join(rest, 0, rest.size(), '_');
    // Labels such as cup2 carry their own index.
    const auto digits = name.find_last_not_of("0123456789");
    if (digits != std::string::npos && digits + 1 < name.size()) {
        ref.which = ObjectRef::Which::index;
        ref.index = std::stoi(name.substr(digits + 1));
        name.erase(digits + 1);
    }
    ref.name = name;
    return ref;
}

std::size_t find_word(const std::vector<std::string>& w, std::initializer_list<std::string_view> any, std::size_t from)
{
    for (std::size_t i = from; i < w.size(); ++i) {
        for (auto a : any) {
            if (w[i] == a) {
                return i;
            }
        }
    }
    return std::string::npos;
}

MotionFunction mf(MotionKind kind, std::string arg) { return {kind, std::move(arg)}; }

int count_of(const PromptContext& context, const std::string& name)
{
    for (const auto& [n, c] : context.scene_inventory) {
        if (n == name) {
            return c;
        }
    }
    return 0;
}

std::vector<MotionFunction> carry(const std::string& object, const std::string& grip, const std::string& destination)
{
    return {mf(MotionKind::move_to_position, "init"),      mf(MotionKind::move_to_position, object),
            mf(MotionKind::gripper_control, grip),         mf(MotionKind::move_to_position, "init"),
            mf(MotionKind::move_to_position, destination), mf(MotionKind::gripper_control, "open"),
            mf(MotionKind::move_to_position, "init")};
}

}  // namespace

std::string ObjectRef::symbol(int count) const
{
    switch (which) {
    case Which::index: return name + std::to_string(index);
    case Which::rightmost: return count >= 1 ? name + std::to_string(count) : name;
    case Which::middle: return count % 2 == 1 ? name + std::to_string((count + 1) / 2) : name;
    case Which::any: break;
    }
    return name;
}

std::string ObjectRef::phrase() const
{
    std::string n = name;
    std::replace(n.begin(), n.end(), '_', ' ');
    switch (which) {
    case Which::index:
        if (index >= 1 && index <= static_cast<int>(kOrdinals.size())) {
            return "the " + std::string(kOrdinals[index - 1]) + " " + n;
        }
        return "the " + n + std::to_string(index);
    case Which::middle: return "the middle " + n;
    case Which::rightmost: return "the right " + n;
    case Which::any: break;
    }
    return "the " + n;
}

std::string normalize_task(const std::string& text)
{
    std::string s;
    for (char c : text) {
        const auto u = static_cast<unsigned char>(c);
        s += std::isalnum(u) || c == '_' ? static_cast<char>(std::tolower(u)) : ' ';
    }
    s = join(words(s), 0, std::string::npos);
    for (const auto& [from, to] : std::initializer_list<std::pair<const char*, const char*>>{
             {"heat up", "warm up"},
             {"heat", "warm up"},
             {"turn on", "power on"},
             {"switch on", "power on"},
             {"pick up", "pick"},
             {"grab", "pick"},
             {"place", "put"},
             {"shut", "close"},
             {"onto", "on"},
             {"inside", "into"},
             {"tidy up", "clean"},
             {"tidy", "clean"},
             {"clear", "clean"},
         }) {
        replace_phrase(s, from, to);
    }
    return s;
}

std::vector<std::string> split_clauses(const std::string& text)
{
    const auto w = words(normalize_task(text));
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= w.size(); ++i) {
        if (i < w.size() && w[i] != "then") {
            continue;
        }
        std::size_t end = i;
        if (end > start && w[end - 1] == "and") {
            --end;
        }
        if (end > start) {
            out.push_back(join(w, start, end));
        }
        start = i + 1;
    }
    return out;
}

std::optional<TaskPattern> match_task(const std::string& text)
{
    const std::string norm = normalize_task(text);
    if (norm.empty()) {
        throw Error(ErrorKind::invalid_input, "task text is empty");
    }
    const auto w = words(norm);
    auto object_from = [&](std::size_t from, std::size_t to = std::string::npos) { return parse_object(w, from, to); };
    auto single = [&](TaskAction a, std::size_t from) -> std::optional<TaskPattern> {
        auto obj = object_from(from);
        if (!obj) {
            return std::nullopt;
        }
        return TaskPattern{a, *obj, std::nullopt};
    };

    if (w.size() >= 2 && w[0] == "warm" && w[1] == "up") {
        return single(TaskAction::warm_up, 2);
    }
    if (w.size() >= 2 && w[0] == "power" && w[1] == "on") {
        return single(TaskAction::power_on, 2);
    }
    if (w[0] == "roast") {
        return single(TaskAction::roast, 1);
    }
    if (w[0] == "open") {
        return single(TaskAction::open, 1);
    }
    if (w[0] == "close") {
        return single(TaskAction::close, 1);
    }
    if (w[0] == "pick") {
        return single(TaskAction::pick, 1);
    }
    if (w[0] == "clean") {
        auto obj = object_from(1);
        if (obj && obj->name == "table") {
            return TaskPattern{TaskAction::clean, *obj, std::nullopt};
        }
        return std::nullopt;
    }
    if (w[0] == "put" || w[0] == "move" || w[0] == "stack") {
        const auto prep = find_word(w, {"on", "into", "in", "to"}, 1);
        if (prep == std::string::npos) {
            return std::nullopt;
        }
        auto obj = object_from(1, prep);
        auto target = object_from(prep + 1);
        if (!obj || !target) {
            return std::nullopt;
        }
        TaskAction a = TaskAction::put_on;
        if (w[0] == "stack") {
            if (w[prep] != "on") {
                return std::nullopt;
            }
            a = TaskAction::stack;
        } else if (w[prep] == "into" || w[prep] == "in") {
            a = TaskAction::put_in;
        } else if (w[prep] == "to") {
            if (target->name.rfind("clearance", 0) != 0) {
                return std::nullopt;
            }
            a = TaskAction::clear_away;
        }
        return TaskPattern{a, *obj, *target};
    }
    return std::nullopt;
}

std::vector<std::string> decompose_pattern(const TaskPattern& p, const std::vector<std::string>& table_objects)
{
    switch (p.action) {
    case TaskAction::warm_up:
        return {"open the microwave", "put " + p.object.phrase() + " into the microwave", "close the microwave",
                "power on the microwave"};
    case TaskAction::roast:
        return {"open the oven", "put " + p.object.phrase() + " into oven", "close the oven", "power on the oven"};
    case TaskAction::clean: {
        std::vector<std::string> out;
        std::map<std::string, int> total;
        for (const auto& n : table_objects) {
            ++total[n];
        }
        std::map<std::string, int> seen;
        for (const auto& n : table_objects) {
            ObjectRef ref{n, ObjectRef::Which::any, 0};
            if (total[n] > 1) {
                ref.which = ObjectRef::Which::index;
                ref.index = ++seen[n];
            }
            out.push_back("put " + ref.phrase() + " in the storage");
        }
        return out;
    }
    default: break;
    }
    return {};
}

std::vector<MotionFunction> basic_motions(const TaskPattern& p, const PromptContext& context)
{
    const std::string obj = p.object.symbol(count_of(context, p.object.name));
    const auto grip_it = context.grips.find(p.object.name);
    const std::string grip = grip_it == context.grips.end() ? "close" : grip_it->second;
    const std::string target = p.target ? p.target->symbol(count_of(context, p.target->name)) : std::string();
    switch (p.action) {
    case TaskAction::put_on: return carry(obj, grip, target);
    case TaskAction::put_in: return carry(obj, grip, target + "_inside");
    case TaskAction::stack: return carry(obj, grip, target + "_above");
    case TaskAction::clear_away: return carry(obj, grip, target);
    case TaskAction::pick: return carry(obj, grip, "handover");
    case TaskAction::open: {
        const bool handleless = std::find(context.handleless.begin(), context.handleless.end(), p.object.name) !=
                                context.handleless.end();
        return {mf(MotionKind::move_to_position, handleless ? obj : obj + "_handle"),
                mf(MotionKind::gripper_control, "close"), mf(MotionKind::base_cycle_move, "radius_door2axis"),
                mf(MotionKind::gripper_control, "open")};
    }
    case TaskAction::close: return {mf(MotionKind::close_move, obj)};
    case TaskAction::power_on: return {mf(MotionKind::move_to_position, obj + "_knob"), mf(MotionKind::rotate_waist, "90")};
    case TaskAction::warm_up:
    case TaskAction::roast:
    case TaskAction::clean: break;
    }
    return {};
}

std::string skill_name(const std::string& description, const std::vector<MotionFunction>& basic)
{
    std::string target;
    for (const auto& m : basic) {
        if ((m.kind == MotionKind::move_to_position && !is_library_constant(m.arg)) || m.kind == MotionKind::close_move) {
            target = m.arg;
            break;
        }
    }
    if (target.empty()) {
        throw Error(ErrorKind::naming, "no target in the motions of '" + description + "'");
    }
    const auto w = words(normalize_task(description));
    const std::string target_base = split_symbol(target).base;
    std::vector<std::string> action;
    for (const auto& t : w) {
        if (is_article(t) || t == target_base || t == target) {
            break;
        }
        action.push_back(t);
    }
    if (action.empty()) {
        throw Error(ErrorKind::naming, "no action verb in '" + description + "'");
    }
    return join(action, 0, action.size(), '_') + "_" + target;
}

}  // namespace hrc
