#include "hrc/planner.hpp"

#include "hrc/errors.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <set>

namespace hrc {

const char* to_string(PlanStatus status) noexcept
{
    switch (status) {
    case PlanStatus::ok: return "ok";
    case PlanStatus::parse_error: return "parse_error";
    case PlanStatus::clarification: return "clarification";
    case PlanStatus::unresolved: return "unresolved";
    case PlanStatus::naming_error: return "naming_error";
    case PlanStatus::planning_failure: return "planning_failure";
    }
    return "unknown";
}

// ---------------------------------------------------------------------------
// WorldModel

const WorldObject* WorldModel::geometry(const LabeledObject& obj) const
{
    if (!scene) {
        return nullptr;
    }
    if (!obj.source_id.empty()) {
        if (const auto* o = scene->find(obj.source_id)) {
            return o;
        }
    }
    const auto same = scene->by_name(obj.name);
    return same.empty() ? nullptr : same.front();
}

std::vector<std::pair<std::string, int>> WorldModel::inventory() const { return hrc::inventory(objects); }

std::vector<const LabeledObject*> WorldModel::table_objects() const
{
    std::vector<const LabeledObject*> out;
    if (!scene) {
        return out;
    }
    const auto tables = scene->by_name("table");
    if (tables.empty()) {
        return out;
    }
    const Box top = tables.front()->box();
    for (const auto& o : objects) {
        const auto* g = geometry(o);
        if (g && g->movable() && top.contains_planar(o.position_world, 0.02) &&
            o.position_world.z() >= top.top() - 0.05) {
            out.push_back(&o);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Binding

namespace {

const LabeledObject* find_label(const WorldModel& world, const std::string& label)
{
    for (const auto& o : world.objects) {
        if (o.label == label) {
            return &o;
        }
    }
    return nullptr;
}

std::vector<const LabeledObject*> of_class(const WorldModel& world, const std::string& name)
{
    std::vector<const LabeledObject*> out;
    for (const auto& o : world.objects) {
        if (o.name == name) {
            out.push_back(&o);
        }
    }
    return out;
}

[[noreturn]] void unresolved(const std::string& symbol, const std::string& why)
{
    throw Error(ErrorKind::unresolved_symbol, "symbol '" + symbol + "': " + why);
}

Vec3 symbol_position(const std::string& symbol, const std::string& suffix, const LabeledObject& obj,
                     const WorldObject* g)
{
    const Vec3& p = obj.position_world;
    if (suffix == "_above") {
        return p + Vec3(0.0, 0.0, 0.010);
    }
    if (!g) {
        if (suffix.empty()) {
            return p;
        }
        unresolved(symbol, "no geometry known for '" + obj.name + "'");
    }
    const Vec3 offset = p - g->position;
    if (suffix == "_inside") {
        return g->inside_point() + offset;
    }
    if (suffix == "_handle") {
        if (!g->articulation || !g->articulation->has_handle) {
            unresolved(symbol, "'" + obj.name + "' has no handle");
        }
        return g->handle() + offset;
    }
    if (suffix == "_knob") {
        if (!g->knob) {
            unresolved(symbol, "'" + obj.name + "' has no knob");
        }
        return *g->knob + offset;
    }
    if (g->articulation && !g->articulation->has_handle) {
        return g->grasp_point() + offset;
    }
    return p;
}

}  // namespace

Binding bind_symbols(const std::vector<SubTask>& subtasks, const WorldModel& world,
                     const std::map<std::string, std::string>& choices, std::string* ambiguous)
{
    Plan probe;
    probe.subtasks = subtasks;
    Binding out;
    for (const auto& symbol : positional_symbols(probe)) {
        if (is_library_constant(symbol) || out.positions.count(symbol)) {
            continue;
        }
        const auto parts = split_symbol(symbol);
        const LabeledObject* obj = find_label(world, parts.base);
        if (!obj) {
            const auto same = of_class(world, parts.base);
            if (same.empty()) {
                unresolved(symbol, "no object '" + parts.base + "' in view");
            }
            if (same.size() == 1) {
                obj = same.front();
            } else if (const auto it = choices.find(parts.base); it != choices.end()) {
                obj = find_label(world, it->second);
                if (!obj) {
                    unresolved(symbol, "chosen label '" + it->second + "' not in view");
                }
            } else {
                if (ambiguous && ambiguous->empty()) {
                    *ambiguous = parts.base;
                }
                continue;
            }
        }
        out.positions[symbol] = symbol_position(symbol, parts.suffix, *obj, world.geometry(*obj));
        out.labels[symbol] = obj->label;
    }
    return out;
}

std::optional<std::string> resolve_choice(const std::string& answer, const std::string& name, const WorldModel& world)
{
    const int count = static_cast<int>(of_class(world, name).size());
    std::string text = normalize_task(answer);
    if (!text.empty() && std::all_of(text.begin(), text.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
        text = name + text;
    }
    for (const auto& attempt : {"pick " + text, "pick " + text + " " + name}) {
        const auto m = match_task(attempt);
        if (!m || m->object.name != name || m->object.which == ObjectRef::Which::any) {
            continue;
        }
        const std::string label = m->object.symbol(count);
        if (find_label(world, label)) {
            return label;
        }
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Obstacle removal

namespace {

struct Occupant {
    LabeledObject obj;
    bool present = true;
};

}  // namespace

Plan inject_obstacle_removal(const Plan& plan, const Binding& binding, const WorldModel& world, const Vec3& robot_base)
{
    std::vector<Occupant> workspace;
    for (const auto& o : world.objects) {
        const auto* g = world.geometry(o);
        if (g && g->movable()) {
            workspace.push_back({o, true});
        }
    }
    auto occupant = [&](const std::string& label) -> Occupant* {
        for (auto& w : workspace) {
            if (w.obj.label == label) {
                return &w;
            }
        }
        return nullptr;
    };

    Plan out = plan;
    out.subtasks.clear();
    std::set<std::string> removed;
    int slot = 1;

    auto position_of = [&](const std::string& symbol) -> std::optional<Vec3> {
        if (const auto it = out.bound_symbols.find(symbol); it != out.bound_symbols.end()) {
            return it->second;
        }
        if (world.scene) {
            return world.scene->constant(symbol);
        }
        return std::nullopt;
    };

    // Moves objects carried by a sub-task to where it leaves them.
    auto apply_effects = [&](const SubTask& st) {
        std::string carried;
        std::string last_target;
        for (const auto& m : st.motions) {
            if (m.kind == MotionKind::move_to_position) {
                last_target = m.arg;
            } else if (m.kind == MotionKind::gripper_control) {
                if (m.arg.rfind("close", 0) == 0) {
                    const auto it = out.symbol_labels.find(last_target);
                    carried = it == out.symbol_labels.end() ? std::string() : it->second;
                } else if (!carried.empty()) {
                    if (auto* occ = occupant(carried)) {
                        const auto dest = position_of(last_target);
                        const auto suffix = split_symbol(last_target).suffix;
                        if (!dest || suffix == "_inside" || last_target == "handover") {
                            occ->present = false;
                        } else {
                            occ->obj.position_world = *dest;
                        }
                    }
                    carried.clear();
                }
            }
        }
    };

    std::function<void(const SubTask&, int)> schedule = [&](const SubTask& st, int depth) {
        if (depth > 4) {
            throw Error(ErrorKind::planning_failure, "obstacle removal does not converge");
        }
        std::set<std::string> own;
        Plan probe;
        probe.subtasks = {st};
        for (const auto& s : positional_symbols(probe)) {
            if (const auto it = out.symbol_labels.find(s); it != out.symbol_labels.end()) {
                own.insert(it->second);
            }
        }
        for (const auto& s : positional_symbols(probe)) {
            if (is_library_constant(s)) {
                continue;
            }
            const auto target = position_of(s);
            if (!target) {
                continue;
            }
            std::vector<LabeledObject> others;
            for (const auto& w : workspace) {
                if (w.present && !own.count(w.obj.label)) {
                    others.push_back(w.obj);
                }
            }
            if (others.empty()) {
                continue;
            }
            const auto report = identify_obstacles(*target, robot_base, others);
            for (const auto& ob : report.obstacles) {
                if (removed.count(ob.label)) {
                    throw Error(ErrorKind::planning_failure, "'" + ob.label + "' blocks again after removal");
                }
                const std::string place = slot == 1 ? "clearance" : "clearance" + std::to_string(slot);
                const Vec3 place_pos = *world.scene->constant(place);
                std::vector<LabeledObject> around;
                for (const auto& w : workspace) {
                    if (w.present && w.obj.label != ob.label && !removed.count(w.obj.label)) {
                        around.push_back(w.obj);
                    }
                }
                if (!around.empty() && !identify_obstacles(place_pos, robot_base, around).obstacles.empty()) {
                    throw Error(ErrorKind::planning_failure, "clearance zone '" + place + "' is blocked");
                }
                const auto* g = world.geometry(ob);
                SubTask removal;
                removal.description = "move the " + ob.label + " to the " + place;
                removal.motions = {{MotionKind::move_to_position, "init"},
                                   {MotionKind::move_to_position, ob.label},
                                   {MotionKind::gripper_control, g ? g->grip : "close"},
                                   {MotionKind::move_to_position, "init"},
                                   {MotionKind::move_to_position, place},
                                   {MotionKind::gripper_control, "open"},
                                   {MotionKind::move_to_position, "init"}};
                out.bound_symbols[ob.label] = ob.position_world;
                out.symbol_labels[ob.label] = ob.label;
                removed.insert(ob.label);
                ++slot;
                schedule(removal, depth + 1);
            }
        }
        out.subtasks.push_back(st);
        apply_effects(st);
    };

    out.bound_symbols = binding.positions;
    out.symbol_labels = binding.labels;
    for (const auto& st : plan.subtasks) {
        schedule(st, 0);
    }
    out.horizon = out.subtasks.size() >= 2 ? Horizon::long_horizon : Horizon::short_horizon;
    return out;
}

// ---------------------------------------------------------------------------
// Planner

Planner::Planner(std::shared_ptr<LanguageBackend> backend, PromptContext prompts, PlannerOptions options)
    : backend_(std::move(backend)), prompts_(std::move(prompts)), options_(std::move(options))
{
    if (!backend_) {
        throw Error(ErrorKind::invalid_input, "planner needs a backend");
    }
}

PromptContext Planner::context_for(const WorldModel& world) const
{
    PromptContext c = prompts_;
    c.scene_inventory = world.inventory();
    c.grips.clear();
    c.handleless.clear();
    c.table_objects.clear();
    for (const auto& o : world.objects) {
        const auto* g = world.geometry(o);
        if (!g) {
            continue;
        }
        if (g->grip != "close") {
            c.grips[o.name] = g->grip;
        }
        if (g->articulation && !g->articulation->has_handle &&
            std::find(c.handleless.begin(), c.handleless.end(), o.name) == c.handleless.end()) {
            c.handleless.push_back(o.name);
        }
    }
    for (const auto* o : world.table_objects()) {
        c.table_objects.push_back(o->name);
    }
    return c;
}

std::vector<SubTask> Planner::generate(const std::string& task, const WorldModel& world, std::string* raw) const
{
    std::string text = backend_->generate(context_for(world), task);
    if (options_.raw_filter) {
        text = options_.raw_filter(text);
    }
    if (raw) {
        *raw = text;
    }
    return parse_plan_dsl(text);
}

Horizon Planner::classify(const std::string& task, const WorldModel& world) const
{
    return generate(task, world).size() >= 2 ? Horizon::long_horizon : Horizon::short_horizon;
}

std::vector<std::string> Planner::decompose(const std::string& task, const WorldModel& world) const
{
    std::vector<std::string> out;
    for (const auto& st : generate(task, world)) {
        out.push_back(st.description);
    }
    return out;
}

SubTask Planner::substitute(SubTask subtask, const DmpLibrary& library) const
{
    std::string name;
    try {
        name = skill_name(subtask.description, subtask.motions);
    } catch (const Error&) {
        return subtask;
    }
    if (const auto* skill = library.skill(name)) {
        subtask.motions = skill->motions;
        subtask.skill_name = name;
        subtask.anchor = skill->anchor;
    }
    return subtask;
}

PlanResult Planner::plan(const std::string& task, const WorldModel& world, const DmpLibrary& library,
                         const std::map<std::string, std::string>& choices) const
{
    PlanResult r;
    r.plan.task_text = task;
    std::vector<SubTask> subtasks;
    try {
        subtasks = generate(task, world, &r.raw_text);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::plan_parse) {
            throw;
        }
        r.status = PlanStatus::parse_error;
        r.message = e.what();
        return r;
    }
    for (auto& st : subtasks) {
        st = substitute(std::move(st), library);
    }
    r.plan.subtasks = subtasks;
    r.plan.horizon = subtasks.size() >= 2 ? Horizon::long_horizon : Horizon::short_horizon;

    Binding binding;
    try {
        binding = bind_symbols(subtasks, world, choices, &r.ambiguous_name);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::unresolved_symbol) {
            throw;
        }
        r.status = PlanStatus::unresolved;
        r.message = e.what();
        return r;
    }
    r.plan.bound_symbols = binding.positions;
    r.plan.symbol_labels = binding.labels;
    if (!r.ambiguous_name.empty()) {
        r.status = PlanStatus::clarification;
        r.message = kClarificationQuestion;
        return r;
    }
    if (options_.remove_obstacles && world.scene) {
        try {
            r.plan = inject_obstacle_removal(r.plan, binding, world, world.scene->robot.base);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::planning_failure) {
                throw;
            }
            r.status = PlanStatus::planning_failure;
            r.message = e.what();
            return r;
        }
    }
    return r;
}

}  // namespace hrc
