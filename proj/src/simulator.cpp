#include "hrc/simulator.hpp"

#include "hrc/errors.hpp"
#include "hrc/perception.hpp"
#include "hrc/planner.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hrc {

using nlohmann::json;

namespace {

constexpr double kGripperSeconds = 0.5;
constexpr double kWaistRadPerSecond = 1.0;
constexpr double kClosedAngle = 0.05;
constexpr double kSlotTolerance = 0.05;

bool closed(double aperture) { return aperture < 0.5; }

double planar(const Vec3& a, const Vec3& b) { return std::hypot(a.x() - b.x(), a.y() - b.y()); }

json vec(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

std::string class_of(const std::string& symbol)
{
    std::string base = split_symbol(symbol).base;
    while (!base.empty() && std::isdigit(static_cast<unsigned char>(base.back()))) {
        base.pop_back();
    }
    return base;
}

bool same_object(const WorldObject& a, const WorldObject& b)
{
    return a.position == b.position && a.state.door_angle == b.state.door_angle && a.state.latched == b.state.latched &&
           a.state.powered == b.state.powered && a.state.push == b.state.push;
}

}  // namespace

std::optional<double> gripper_aperture(const std::string& mode)
{
    if (mode == "open") return 1.0;
    if (mode == "close") return 0.0;
    if (mode == "close_low") return 0.35;
    return std::nullopt;
}

std::string event_to_json(const EventRecord& e)
{
    json changed = json::array();
    for (const auto& o : e.changed_objects) {
        changed.push_back({{"id", o.id},
                           {"name", o.name},
                           {"position", vec(o.position)},
                           {"door_angle", o.state.door_angle},
                           {"latched", o.state.latched},
                           {"powered", o.state.powered}});
    }
    json robot{{"base", vec(e.robot.base)},
               {"ee", vec(e.robot.ee)},
               {"aperture", e.robot.aperture},
               {"held", e.robot.held ? json(*e.robot.held) : json(nullptr)},
               {"waist", e.robot.waist_angle}};
    return json{{"t", e.t}, {"motion", e.motion}, {"robot", robot}, {"changed_objects", changed}}.dump();
}

Simulator::Simulator(Scene scene, const DmpLibrary* library, SimConfig config)
    : scene_(std::move(scene)), library_(library), config_(std::move(config))
{
    robot_.base = scene_.robot.base;
    robot_.ee = scene_.robot.init_ee;
    home_base_ = robot_.base;
}

void Simulator::restore(const Snapshot& s)
{
    scene_ = s.scene;
    robot_ = s.robot;
    time_ = s.time;
}

Vec3 Simulator::clamp_to_reach(const Vec3& p) const
{
    Vec3 q = p;
    const Eigen::Vector2d base(robot_.base.x(), robot_.base.y());
    Eigen::Vector2d d(p.x() - base.x(), p.y() - base.y());
    if (d.norm() > scene_.robot.reach_radius) {
        d *= scene_.robot.reach_radius / d.norm();
        q.x() = base.x() + d.x();
        q.y() = base.y() + d.y();
    }
    q.z() = std::clamp(q.z(), scene_.robot.lift_min, scene_.robot.lift_max);
    return q;
}

bool Simulator::reachable(const Vec3& p) const
{
    return planar(p, robot_.base) <= scene_.robot.reach_radius + 1e-9 && p.z() >= scene_.robot.lift_min - 1e-9 &&
           p.z() <= scene_.robot.lift_max + 1e-9;
}

WorldObject* Simulator::held_object() { return robot_.held ? scene_.find(*robot_.held) : nullptr; }

std::optional<Vec3> Simulator::resolve(const std::string& symbol, const Plan& plan) const
{
    if (auto c = scene_.constant(symbol)) {
        return c;
    }
    const auto it = plan.bound_symbols.find(symbol);
    if (it == plan.bound_symbols.end()) {
        return std::nullopt;
    }
    return it->second;
}

Simulator::StepStatus Simulator::step_ee(const Vec3& p, bool demo)
{
    const double tol = config_.track_tolerance;
    robot_.ee = p;
    time_ += config_.dt;

    if (robot_.released_door) {
        const WorldObject* d = scene_.find(*robot_.released_door);
        if (!d || (d->handle() - p).norm() > 2.0 * tol) {
            robot_.released_door.reset();
        }
    }

    WorldObject* held = held_object();
    for (auto& obj : scene_.objects) {
        if (!obj.articulation || obj.articulation->kind != ArticulationKind::press_pull || obj.state.door_angle > 0.0) {
            continue;
        }
        const auto& a = *obj.articulation;
        const Vec3 rel = p - a.handle_at(0.0);
        const double depth = -rel.dot(a.outward);
        const double lateral = (rel + depth * a.outward).norm();
        if (lateral <= tol && depth > -tol) {
            obj.state.push = std::clamp(depth, 0.0, a.max_push());
            if (obj.state.push >= a.latch_travel - 1e-12) {
                obj.state.latched = false;
            }
        } else if (&obj != held) {
            obj.state.push = 0.0;
        }
    }

    if (held) {
        if (held->movable()) {
            held->position = p;
            return {};
        }
        const auto& a = *held->articulation;
        auto& st = held->state;
        if (!(a.kind == ArticulationKind::press_pull && st.latched)) {
            st.door_angle = a.nearest_angle(p);
            if (st.door_angle > 0.0) {
                st.push = 0.0;
            }
        }
        const double deviation = (p - a.handle_at(st.door_angle, st.push)).norm();
        if (deviation > tol) {
            std::ostringstream os;
            os << "end effector left the door track of " << held->name << " by " << deviation << " m";
            robot_.held.reset();
            robot_.released_door = held->id;
            if (demo) {
                return {true, "grip slipped off " + held->name};
            }
            return {false, os.str()};
        }
        return {};
    }

    for (auto& obj : scene_.objects) {
        if (!obj.articulation || obj.state.door_angle <= 0.0 || robot_.released_door == obj.id) {
            continue;
        }
        const auto& a = *obj.articulation;
        if ((p - a.handle_at(obj.state.door_angle)).norm() > tol) {
            continue;
        }
        const double angle = a.nearest_angle(p);
        if (angle < obj.state.door_angle && (p - a.handle_at(angle)).norm() <= tol) {
            obj.state.door_angle = angle;
            if (a.kind == ArticulationKind::press_pull && angle == 0.0) {
                obj.state.latched = true;
            }
        }
    }
    return {};
}

Simulator::StepStatus Simulator::travel(const Vec3& target, bool demo)
{
    const Vec3 start = robot_.ee;
    const double dist = (target - start).norm();
    const auto n = std::max<long>(1, static_cast<long>(std::ceil(dist / (config_.ee_speed * config_.dt))));
    StepStatus last;
    for (long i = 1; i <= n; ++i) {
        auto s = step_ee(start + (target - start) * (static_cast<double>(i) / static_cast<double>(n)), demo);
        if (!s.ok) {
            return s;
        }
        if (!s.reason.empty()) {
            last = s;
        }
    }
    return last;
}

Simulator::StepStatus Simulator::grasp()
{
    WorldObject* best = nullptr;
    double best_d = config_.grasp_radius;
    for (auto& obj : scene_.objects) {
        if (obj.fixed && !obj.articulation) {
            continue;
        }
        const double d = (obj.grasp_point() - robot_.ee).norm();
        if (d <= best_d) {
            best_d = d;
            best = &obj;
        }
    }
    if (!best) {
        return {false, "nothing to grasp within " + std::to_string(config_.grasp_radius) + " m of the gripper"};
    }
    robot_.held = best->id;
    if (best->movable()) {
        best->position = robot_.ee;
    }
    if (robot_.released_door == best->id) {
        robot_.released_door.reset();
    }
    return {};
}

void Simulator::release()
{
    WorldObject* obj = held_object();
    robot_.held.reset();
    if (!obj) {
        return;
    }
    if (obj->articulation) {
        robot_.released_door = obj->id;
    } else {
        settle(*obj);
    }
}

void Simulator::settle(WorldObject& obj)
{
    const Vec3 p = obj.position;
    const double half = 0.5 * obj.size.z();
    double floor = 0.0;
    for (const auto& o : scene_.objects) {
        if (&o != &obj && o.cavity && o.cavity->contains(p)) {
            floor = o.cavity->bottom();
            break;
        }
    }
    double rest = floor;
    for (const auto& o : scene_.objects) {
        if (&o == &obj) {
            continue;
        }
        const Box b = o.box();
        if (b.contains_planar(p) && b.top() <= p.z() + half + 1e-9 && b.top() >= floor - 1e-9) {
            rest = std::max(rest, b.top());
        }
    }
    obj.position.z() = rest + half;
}

Simulator::StepStatus Simulator::set_aperture(double aperture, bool demo)
{
    StepStatus s;
    if (closed(aperture) && !robot_.held) {
        s = grasp();
        if (!s.ok && demo) {
            s = {};
        }
    } else if (!closed(aperture) && robot_.held) {
        release();
    }
    if (s.ok) {
        robot_.aperture = aperture;
    }
    return s;
}

MotionResult Simulator::move_to(const MotionFunction& m, const Plan& plan)
{
    const auto target = resolve(m.arg, plan);
    if (!target) {
        return {m, false, "unbound symbol '" + m.arg + "'"};
    }
    if (m.arg == "init") {
        time_ += planar(robot_.base, home_base_) / config_.base_speed;
        robot_.base = home_base_;
    }
    if (!reachable(*target)) {
        return {m, false, "target '" + m.arg + "' is out of reach"};
    }
    for (const auto& obj : scene_.objects) {
        if (obj.articulation && obj.cavity && obj.cavity->contains(*target) && !obj.door_open_enough()) {
            return {m, false, "interior of " + obj.name + " unreachable: door closed"};
        }
    }
    const auto s = travel(*target);
    return {m, s.ok, s.reason};
}

MotionResult Simulator::gripper(const MotionFunction& m)
{
    const auto aperture = gripper_aperture(m.arg);
    if (!aperture) {
        return {m, false, "unknown gripper mode '" + m.arg + "'"};
    }
    time_ += kGripperSeconds;
    const auto s = set_aperture(*aperture, false);
    return {m, s.ok, s.reason};
}

MotionResult Simulator::base_cycle(const MotionFunction& m)
{
    WorldObject* door = held_object();
    if (!door || !door->articulation) {
        return {m, false, "base_cycle_move needs a grasped door"};
    }
    const auto& a = *door->articulation;
    if (a.kind == ArticulationKind::horizontal_hinge) {
        return {m, false, "wrong-articulation: " + door->name + " door hinges horizontally"};
    }
    if (door->state.latched) {
        return {m, false, door->name + " door is latched"};
    }
    const double start = door->state.door_angle;
    const Vec3 offset = robot_.ee - a.handle_at(start, door->state.push);
    const double step = config_.ee_speed * config_.dt / a.radius_door2axis;
    const auto n = std::max<long>(1, static_cast<long>(std::ceil((a.open_angle - start) / step)));
    Vec3 prev = a.handle_at(start, door->state.push);
    for (long i = 1; i <= n; ++i) {
        const double angle = start + (a.open_angle - start) * static_cast<double>(i) / static_cast<double>(n);
        const Vec3 h = a.handle_at(angle);
        robot_.base.x() += h.x() - prev.x();
        robot_.base.y() += h.y() - prev.y();
        prev = h;
        const auto s = step_ee(h + offset, false);
        if (!s.ok) {
            return {m, false, s.reason};
        }
    }
    return {m, true, {}};
}

MotionResult Simulator::close_push(const MotionFunction& m, const Plan& plan)
{
    const auto bound = resolve(m.arg, plan);
    if (!bound) {
        return {m, false, "unbound symbol '" + m.arg + "'"};
    }
    WorldObject* door = nullptr;
    Vec3 delta = Vec3::Zero();
    double best = 0.0;
    for (auto& obj : scene_.objects) {
        if (obj.name != class_of(m.arg) || !obj.articulation) {
            continue;
        }
        const Vec3 expected = obj.articulation->has_handle ? obj.position : obj.articulation->handle_at(0.0);
        const double d = (*bound - expected).norm();
        if (!door || d < best) {
            door = &obj;
            best = d;
            delta = *bound - expected;
        }
    }
    if (!door) {
        return {m, false, "no door named '" + class_of(m.arg) + "'"};
    }
    const auto& a = *door->articulation;
    if (a.kind == ArticulationKind::horizontal_hinge) {
        return {m, false, "wrong-articulation: " + door->name + " door hinges horizontally"};
    }
    if (robot_.held) {
        return {m, false, "cannot push a door while holding " + *robot_.held};
    }
    if (door->state.door_angle > kClosedAngle) {
        const Vec3 approach = a.handle_at(door->state.door_angle) + delta;
        if (!reachable(approach)) {
            return {m, false, door->name + " handle is out of reach"};
        }
        if (auto s = travel(approach); !s.ok) {
            return {m, false, s.reason};
        }
        const double start = door->state.door_angle;
        const double step = config_.ee_speed * config_.dt / a.radius_door2axis;
        const auto n = std::max<long>(1, static_cast<long>(std::ceil(start / step)));
        for (long i = 1; i <= n; ++i) {
            const double angle = start * (1.0 - static_cast<double>(i) / static_cast<double>(n));
            if (auto s = step_ee(a.handle_at(angle) + delta, false); !s.ok) {
                return {m, false, s.reason};
            }
        }
    }
    if (door->state.door_angle > kClosedAngle) {
        return {m, false, door->name + " door did not close"};
    }
    return {m, true, {}};
}

MotionResult Simulator::rotate(const MotionFunction& m)
{
    double deg = 0.0;
    try {
        std::size_t used = 0;
        deg = std::stod(m.arg, &used);
        if (used != m.arg.size()) {
            throw std::invalid_argument(m.arg);
        }
    } catch (const std::exception&) {
        return {m, false, "rotate_waist needs an angle in degrees, got '" + m.arg + "'"};
    }
    const double rad = deg * M_PI / 180.0;
    robot_.waist_angle += rad;
    time_ += std::abs(rad) / kWaistRadPerSecond;
    WorldObject* knob_owner = nullptr;
    for (auto& obj : scene_.objects) {
        if (obj.knob && (*obj.knob - robot_.ee).norm() <= config_.grasp_radius) {
            knob_owner = &obj;
            break;
        }
    }
    if (!knob_owner) {
        return {m, false, "no knob within reach of the gripper"};
    }
    if (std::abs(deg) >= config_.power_threshold_deg) {
        knob_owner->state.powered = true;
    }
    return {m, true, {}};
}

MotionResult Simulator::publish(const MotionFunction& m, const Plan& plan, const SubTask& subtask)
{
    std::string key = m.arg;
    if (const auto f = config_.skill_key_faults.find(key); f != config_.skill_key_faults.end()) {
        key = f->second;
    }
    const dmp::DmpModel* model = library_ ? library_->model(key) : nullptr;
    if (!model) {
        return {m, false, "skill-miss: no model named '" + key + "'"};
    }
    if (model->dims() != 4) {
        return {m, false, "model '" + key + "' is not a position plus aperture model"};
    }
    Vec3 shift = Vec3::Zero();
    if (subtask.skill_name && subtask.anchor && library_) {
        const SkillRecord* skill = library_->skill(*subtask.skill_name);
        const auto anchor = resolve(*subtask.anchor, plan);
        if (skill && anchor) {
            shift = *anchor - skill->anchor_position;
        }
    }
    Eigen::VectorXd y0(4), g(4);
    y0 << robot_.ee, model->y0_demo(3);
    g << model->g_demo.head<3>() + shift, model->g_demo(3);

    dmp::Trajectory traj;
    try {
        traj = dmp::rollout(*model, y0, g, model->config.tau, config_.dt);
    } catch (const Error& e) {
        return {m, false, e.what()};
    }
    if (auto s = set_aperture(y0(3), false); !s.ok) {
        return {m, false, s.reason};
    }
    for (Eigen::Index k = 1; k < traj.y.rows(); ++k) {
        const Vec3 p = traj.y.row(k).head<3>().transpose();
        if (!reachable(p)) {
            return {m, false, "skill '" + key + "' leaves the reach envelope"};
        }
        if (auto s = step_ee(p, false); !s.ok) {
            return {m, false, s.reason};
        }
    }
    if (auto s = set_aperture(g(3), false); !s.ok) {
        return {m, false, s.reason};
    }
    return {m, true, {}};
}

MotionResult Simulator::execute(const MotionFunction& motion, const Plan& plan, const SubTask& subtask)
{
    const Scene before = scene_;
    MotionResult r;
    switch (motion.kind) {
    case MotionKind::move_to_position: r = move_to(motion, plan); break;
    case MotionKind::gripper_control: r = gripper(motion); break;
    case MotionKind::base_cycle_move: r = base_cycle(motion); break;
    case MotionKind::close_move: r = close_push(motion, plan); break;
    case MotionKind::rotate_waist: r = rotate(motion); break;
    case MotionKind::dmp_publish: r = publish(motion, plan, subtask); break;
    }
    log_event(motion.str(), before);
    return r;
}

bool Simulator::mirror(const Vec3& p, double aperture, std::string* warning)
{
    const Vec3 q = clamp_to_reach(p);
    const bool clamped = (q - p).norm() > 1e-12;
    const auto s = travel(q, true);
    std::string note = s.reason;
    set_aperture(aperture, true);
    if (clamped) {
        note = note.empty() ? "sample clamped to the reach envelope" : note;
    }
    if (warning) {
        *warning = note;
    }
    return !clamped;
}

void Simulator::log_event(const std::string& label, const Scene& before)
{
    EventRecord e{time_, label, robot_, {}};
    for (const auto& o : scene_.objects) {
        const WorldObject* b = before.find(o.id);
        if (!b || !same_object(*b, o)) {
            e.changed_objects.push_back(o);
        }
    }
    events_.push_back(std::move(e));
}

std::string Simulator::event_log() const
{
    std::string out;
    for (const auto& e : events_) {
        out += event_to_json(e);
        out += '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------

ExecutionOutcome run_plan(Simulator& sim, const Plan& plan)
{
    ExecutionOutcome out;
    std::map<std::string, std::string> choices;
    for (const auto& [symbol, label] : plan.symbol_labels) {
        const std::string base = split_symbol(symbol).base;
        if (base == class_of(label)) {
            choices[base] = label;
        }
    }
    const Scene before = sim.scene();
    for (const auto& sub : plan.subtasks) {
        for (const auto& m : sub.motions) {
            auto r = sim.execute(m, plan, sub);
            out.per_motion_results.push_back(r);
            if (!r.ok) {
                out.failure_reason = sub.description + ": " + m.str() + ": " + r.reason;
                return out;
            }
        }
        try {
            if (!check_success(sub.description, before, sim.scene(), choices, &sim.robot())) {
                out.failure_reason = "sub-task '" + sub.description + "' did not reach its goal";
                return out;
            }
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::unknown_predicate) {
                out.failure_reason = e.what();
                return out;
            }
        }
        ++out.subtasks_completed;
    }
    out.executed = true;
    try {
        out.task_success = check_success(plan.task_text, before, sim.scene(), choices, &sim.robot());
        if (!out.task_success) {
            out.failure_reason = "task goal not reached";
        }
    } catch (const Error& e) {
        out.failure_reason = e.what();
    }
    return out;
}

namespace {

struct PredicateContext {
    const Scene& before;
    const Scene& after;
    const std::map<std::string, std::string>& choices;
    const RobotState* robot;
    std::vector<LabeledObject> labeled;
};

const WorldObject& resolve_ref(const ObjectRef& ref, const PredicateContext& c)
{
    int count = 0;
    for (const auto& l : c.labeled) {
        count += l.name == ref.name ? 1 : 0;
    }
    std::string label = ref.symbol(count);
    if (label == ref.name) {
        if (count == 1) {
            label = ref.name + "1";
        } else if (const auto it = c.choices.find(ref.name); it != c.choices.end()) {
            label = it->second;
        } else if (count == 0) {
            throw Error(ErrorKind::unresolved_symbol, "no '" + ref.name + "' in the scene");
        } else {
            throw Error(ErrorKind::unresolved_symbol, "'" + ref.name + "' is ambiguous");
        }
    }
    for (const auto& l : c.labeled) {
        if (l.label == label) {
            if (const WorldObject* o = c.after.find(l.source_id)) {
                return *o;
            }
        }
    }
    throw Error(ErrorKind::unresolved_symbol, "no object labeled '" + label + "'");
}

bool holds(const PredicateContext& c, const WorldObject& o) { return c.robot && c.robot->held == o.id; }

bool evaluate(const std::string& text, const PredicateContext& c);

bool conjunction(const std::vector<std::string>& parts, const PredicateContext& c)
{
    for (std::size_t i = 0; i < parts.size(); ++i) {
        const auto sub = match_task(parts[i]);
        if (sub && sub->action == TaskAction::open) {
            const bool superseded = std::any_of(parts.begin() + static_cast<long>(i) + 1, parts.end(), [&](const auto& later) {
                const auto lp = match_task(later);
                return lp && lp->action == TaskAction::close && lp->object.name == sub->object.name;
            });
            if (superseded) {
                continue;
            }
        }
        if (!evaluate(parts[i], c)) {
            return false;
        }
    }
    return true;
}

bool evaluate_pattern(const TaskPattern& p, const std::string& text, const PredicateContext& c)
{
    switch (p.action) {
    case TaskAction::warm_up:
    case TaskAction::roast:
    case TaskAction::clean: {
        WorldModel world{c.labeled, &c.before};
        std::vector<std::string> table;
        for (const auto* o : world.table_objects()) {
            table.push_back(o->name);
        }
        return conjunction(decompose_pattern(p, table), c);
    }
    default: break;
    }

    const WorldObject& obj = resolve_ref(p.object, c);
    switch (p.action) {
    case TaskAction::open:
        return obj.articulation && obj.state.door_angle >= 0.9 * obj.articulation->open_angle;
    case TaskAction::close: return obj.articulation && obj.state.door_angle <= kClosedAngle;
    case TaskAction::power_on: return obj.state.powered;
    case TaskAction::pick: return !holds(c, obj) && planar(obj.position, c.after.handover) <= kSlotTolerance;
    case TaskAction::clear_away: {
        const auto slot = c.after.constant(p.target->symbol(0));
        if (!slot) {
            throw Error(ErrorKind::unknown_predicate, "no clearance slot in '" + text + "'");
        }
        return !holds(c, obj) && planar(obj.position, *slot) <= kSlotTolerance;
    }
    case TaskAction::put_on:
    case TaskAction::stack: {
        const WorldObject& target = resolve_ref(*p.target, c);
        return !holds(c, obj) && planar(obj.position, target.position) <= target.place_margin &&
               obj.box().bottom() >= target.box().top() - 0.005;
    }
    case TaskAction::put_in: {
        const WorldObject& target = resolve_ref(*p.target, c);
        const Box in = target.interior();
        return !holds(c, obj) && planar(obj.position, in.center) <= target.place_margin && in.contains(obj.position);
    }
    default: break;
    }
    throw Error(ErrorKind::unknown_predicate, "no success predicate for '" + text + "'");
}

bool evaluate(const std::string& text, const PredicateContext& c)
{
    if (const auto clauses = split_clauses(text); clauses.size() > 1) {
        return conjunction(clauses, c);
    }
    const auto p = match_task(text);
    if (!p) {
        throw Error(ErrorKind::unknown_predicate, "no success predicate for '" + text + "'");
    }
    return evaluate_pattern(*p, text, c);
}

}  // namespace

bool check_success(const std::string& task_text, const Scene& before, const Scene& after,
                   const std::map<std::string, std::string>& choices, const RobotState* robot)
{
    std::vector<NamedPoint> points;
    for (const auto& o : before.objects) {
        points.push_back({o.name, o.position, o.id});
    }
    PredicateContext c{before, after, choices, robot, sort_and_label(points, before.lateral_axis)};
    return evaluate(task_text, c);
}

}  // namespace hrc
