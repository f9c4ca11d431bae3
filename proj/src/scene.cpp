#include "hrc/scene.hpp"

#include "hrc/errors.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace hrc {

using nlohmann::json;

const char* to_string(ArticulationKind kind) noexcept
{
    switch (kind) {
    case ArticulationKind::vertical_hinge: return "vertical_hinge";
    case ArticulationKind::horizontal_hinge: return "horizontal_hinge";
    case ArticulationKind::press_pull: return "press_pull";
    }
    return "unknown";
}

namespace {

Vec3 ground(const Vec3& v) { return {v.x(), v.y(), 0.0}; }

// Sign of the rotation about +z that swings the closed direction toward outward.
double swing_sign(const ArticulationModel& a)
{
    const Vec3 tangent = Vec3::UnitZ().cross(ground(a.closed_direction));
    return tangent.dot(a.outward) >= 0.0 ? 1.0 : -1.0;
}

Vec3 rotate_z(const Vec3& v, double angle)
{
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    return {c * v.x() - s * v.y(), s * v.x() + c * v.y(), v.z()};
}

}  // namespace

Vec3 ArticulationModel::handle_at(double angle, double push) const
{
    switch (kind) {
    case ArticulationKind::horizontal_hinge:
        return axis_position + radius_door2axis * (std::cos(angle) * closed_direction + std::sin(angle) * outward);
    case ArticulationKind::press_pull:
    case ArticulationKind::vertical_hinge: {
        const Vec3 u0 = ground(closed_direction).normalized();
        Vec3 p = axis_position + radius_door2axis * rotate_z(u0, swing_sign(*this) * angle);
        if (kind == ArticulationKind::press_pull) {
            p -= push * outward;
        }
        return p;
    }
    }
    return axis_position;
}

double ArticulationModel::nearest_angle(const Vec3& p) const
{
    const Vec3 rel = p - axis_position;
    double angle = 0.0;
    if (kind == ArticulationKind::horizontal_hinge) {
        angle = std::atan2(rel.dot(outward), rel.dot(closed_direction));
    } else {
        const Vec3 u0 = ground(closed_direction).normalized();
        const Vec3 r = ground(rel);
        const double cross = u0.x() * r.y() - u0.y() * r.x();
        angle = swing_sign(*this) * std::atan2(cross, u0.dot(r));
    }
    if (angle >= 0.0 && angle <= open_angle) {
        return angle;
    }
    const double d0 = (handle_at(0.0) - p).norm();
    const double d1 = (handle_at(open_angle) - p).norm();
    return d0 <= d1 ? 0.0 : open_angle;
}

bool Box::contains_planar(const Vec3& p, double slack) const
{
    return std::abs(p.x() - center.x()) <= 0.5 * size.x() + slack &&
           std::abs(p.y() - center.y()) <= 0.5 * size.y() + slack;
}

bool Box::contains(const Vec3& p, double slack) const
{
    return contains_planar(p, slack) && p.z() >= bottom() - slack && p.z() <= top() + slack;
}

Vec3 WorldObject::handle() const
{
    if (!articulation) {
        return position;
    }
    return articulation->handle_at(state.door_angle, state.push);
}

Vec3 WorldObject::grasp_point() const { return articulation ? handle() : position; }

Vec3 WorldObject::inside_point() const
{
    const Box in = interior();
    Vec3 p = in.center;
    p.z() = std::max(in.center.z() - 0.02, in.bottom() + 0.01);
    return p;
}

bool WorldObject::door_open_enough() const
{
    return !articulation || state.door_angle >= 0.9 * articulation->open_angle;
}

const WorldObject* Scene::find(const std::string& id) const
{
    for (const auto& o : objects) {
        if (o.id == id) {
            return &o;
        }
    }
    return nullptr;
}

WorldObject* Scene::find(const std::string& id)
{
    for (auto& o : objects) {
        if (o.id == id) {
            return &o;
        }
    }
    return nullptr;
}

std::optional<Vec3> Scene::constant(std::string_view symbol) const
{
    if (symbol == "init") {
        return robot.init_ee;
    }
    if (symbol == "handover") {
        return handover;
    }
    if (symbol.starts_with("clearance")) {
        const auto rest = symbol.substr(9);
        int slot = 1;
        if (!rest.empty()) {
            slot = 0;
            for (char c : rest) {
                if (c < '0' || c > '9') {
                    return std::nullopt;
                }
                slot = slot * 10 + (c - '0');
            }
            if (slot < 1) {
                return std::nullopt;
            }
        }
        return clearance + 0.1 * (slot - 1) * lateral_axis;
    }
    return std::nullopt;
}

std::vector<const WorldObject*> Scene::by_name(const std::string& name) const
{
    std::vector<const WorldObject*> out;
    for (const auto& o : objects) {
        if (o.name == name) {
            out.push_back(&o);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

Vec3 vec3(const json& j, const char* what)
{
    if (!j.is_array() || j.size() != 3) {
        throw Error(ErrorKind::invalid_input, std::string("scene: ") + what + " must be a 3-element array");
    }
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

ArticulationKind parse_kind(const std::string& s)
{
    if (s == "vertical_hinge") return ArticulationKind::vertical_hinge;
    if (s == "horizontal_hinge") return ArticulationKind::horizontal_hinge;
    if (s == "press_pull") return ArticulationKind::press_pull;
    throw Error(ErrorKind::invalid_input, "scene: unknown articulation kind '" + s + "'");
}

ArticulationModel parse_articulation(const json& j)
{
    ArticulationModel a;
    a.kind = parse_kind(j.at("kind").get<std::string>());
    a.axis_position = vec3(j.at("axis_position"), "axis_position");
    a.radius_door2axis = j.at("radius_door2axis").get<double>();
    a.open_angle = j.value("open_angle", a.open_angle);
    a.latch_travel = j.value("latch_travel", 0.0);
    if (j.contains("closed_direction")) a.closed_direction = vec3(j["closed_direction"], "closed_direction");
    if (j.contains("outward")) a.outward = vec3(j["outward"], "outward");
    a.closed_direction.normalize();
    a.outward.normalize();
    a.has_handle = j.value("has_handle", true);
    if (!(a.radius_door2axis > 0.0)) {
        throw Error(ErrorKind::invalid_input, "scene: radius_door2axis must be positive");
    }
    if (!(a.open_angle > 0.0) || a.open_angle > M_PI) {
        throw Error(ErrorKind::invalid_input, "scene: open_angle must lie in (0, pi]");
    }
    if (a.kind == ArticulationKind::press_pull && !(a.latch_travel > 0.0)) {
        throw Error(ErrorKind::invalid_input, "scene: press_pull articulation needs latch_travel > 0");
    }
    return a;
}

json articulation_json(const ArticulationModel& a)
{
    json j{{"kind", to_string(a.kind)},
           {"axis_position", to_json(a.axis_position)},
           {"radius_door2axis", a.radius_door2axis},
           {"open_angle", a.open_angle},
           {"closed_direction", to_json(a.closed_direction)},
           {"outward", to_json(a.outward)},
           {"has_handle", a.has_handle}};
    if (a.kind == ArticulationKind::press_pull) {
        j["latch_travel"] = a.latch_travel;
    }
    return j;
}

Mat3 mat3(const json& j)
{
    if (!j.is_array() || j.size() != 3) {
        throw Error(ErrorKind::invalid_input, "scene: rotation must be a 3x3 array");
    }
    Mat3 m;
    for (int r = 0; r < 3; ++r) {
        const Vec3 row = vec3(j[r], "rotation row");
        m.row(r) = row.transpose();
    }
    return m;
}

}  // namespace

Scene parse_scene(const std::string& json_text)
{
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::invalid_input, std::string("scene: malformed JSON: ") + e.what());
    }
    try {
        Scene scene;
        if (j.contains("lateral_axis")) {
            scene.lateral_axis = vec3(j["lateral_axis"], "lateral_axis").normalized();
        }
        if (j.contains("camera")) {
            const auto& cam = j["camera"];
            const auto& k = cam.at("intrinsics");
            scene.intrinsics = CameraIntrinsics(k.at("fx").get<double>(), k.at("fy").get<double>(),
                                                k.at("cx").get<double>(), k.at("cy").get<double>());
            const auto& t = cam.at("extrinsics_T_c_w");
            scene.camera_to_world = RigidTransform(mat3(t.at("rotation")), vec3(t.at("translation"), "translation"));
        }
        if (j.contains("robot")) {
            const auto& r = j["robot"];
            if (r.contains("base")) scene.robot.base = vec3(r["base"], "robot.base");
            if (r.contains("init_ee")) scene.robot.init_ee = vec3(r["init_ee"], "robot.init_ee");
            scene.robot.reach_radius = r.value("reach_radius", scene.robot.reach_radius);
            if (r.contains("lift_range")) {
                scene.robot.lift_min = r["lift_range"].at(0).get<double>();
                scene.robot.lift_max = r["lift_range"].at(1).get<double>();
            }
        }
        if (j.contains("clearance")) scene.clearance = vec3(j["clearance"], "clearance");
        if (j.contains("handover")) scene.handover = vec3(j["handover"], "handover");

        std::size_t index = 0;
        for (const auto& o : j.at("objects")) {
            WorldObject obj;
            obj.name = o.at("name").get<std::string>();
            obj.id = o.value("id", obj.name + "#" + std::to_string(index));
            obj.position = vec3(o.at("position"), "position");
            obj.size = vec3(o.at("size"), "size");
            if ((obj.size.array() <= 0.0).any()) {
                throw Error(ErrorKind::invalid_input, "scene: object '" + obj.name + "' needs positive size");
            }
            if (o.contains("articulation")) obj.articulation = parse_articulation(o["articulation"]);
            if (o.contains("state")) {
                const auto& s = o["state"];
                obj.state.door_angle = s.value("door_angle", 0.0);
                obj.state.latched = s.value("latched", false);
                obj.state.powered = s.value("powered", false);
            } else if (obj.articulation && obj.articulation->kind == ArticulationKind::press_pull) {
                obj.state.latched = true;
            }
            if (obj.articulation &&
                (obj.state.door_angle < 0.0 || obj.state.door_angle > obj.articulation->open_angle)) {
                throw Error(ErrorKind::invalid_input, "scene: door_angle of '" + obj.name + "' outside limits");
            }
            obj.surface = o.value("surface", "");
            obj.fixed = o.value("fixed", false);
            obj.place_margin = o.value("place_margin", obj.place_margin);
            obj.grip = o.value("grip", std::string("close"));
            if (o.contains("knob")) obj.knob = vec3(o["knob"], "knob");
            if (o.contains("cavity")) {
                obj.cavity = Box{vec3(o["cavity"].at("center"), "cavity.center"), vec3(o["cavity"].at("size"), "cavity.size")};
            }
            scene.objects.push_back(std::move(obj));
            ++index;
        }
        return scene;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::invalid_input, std::string("scene: ") + e.what());
    }
}

Scene load_scene(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorKind::io, "scene: cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_scene(ss.str());
}

std::string scene_to_json(const Scene& scene)
{
    json j;
    j["lateral_axis"] = to_json(scene.lateral_axis);
    json rot = json::array();
    for (int r = 0; r < 3; ++r) {
        rot.push_back(to_json(scene.camera_to_world.rotation().row(r).transpose()));
    }
    j["camera"] = {{"intrinsics",
                    {{"fx", scene.intrinsics.fx()},
                     {"fy", scene.intrinsics.fy()},
                     {"cx", scene.intrinsics.cx()},
                     {"cy", scene.intrinsics.cy()}}},
                   {"extrinsics_T_c_w", {{"rotation", rot}, {"translation", to_json(scene.camera_to_world.translation())}}}};
    j["robot"] = {{"base", to_json(scene.robot.base)},
                  {"init_ee", to_json(scene.robot.init_ee)},
                  {"reach_radius", scene.robot.reach_radius},
                  {"lift_range", {scene.robot.lift_min, scene.robot.lift_max}}};
    j["clearance"] = to_json(scene.clearance);
    j["handover"] = to_json(scene.handover);
    json objects = json::array();
    for (const auto& o : scene.objects) {
        json jo{{"id", o.id},
                {"name", o.name},
                {"position", to_json(o.position)},
                {"size", to_json(o.size)},
                {"state", {{"door_angle", o.state.door_angle}, {"latched", o.state.latched}, {"powered", o.state.powered}}},
                {"surface", o.surface},
                {"fixed", o.fixed},
                {"place_margin", o.place_margin},
                {"grip", o.grip}};
        if (o.articulation) jo["articulation"] = articulation_json(*o.articulation);
        if (o.knob) jo["knob"] = to_json(*o.knob);
        if (o.cavity) jo["cavity"] = {{"center", to_json(o.cavity->center)}, {"size", to_json(o.cavity->size)}};
        objects.push_back(std::move(jo));
    }
    j["objects"] = std::move(objects);
    return j.dump(2);
}

}  // namespace hrc
