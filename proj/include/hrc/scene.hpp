#pragma once

#include "hrc/geometry.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hrc {

enum class ArticulationKind { vertical_hinge, horizontal_hinge, press_pull };

const char* to_string(ArticulationKind kind) noexcept;

/// Door geometry. The handle point at door angle theta is
///   vertical hinge / press-pull: axis + r * Rz(+-theta) closed_direction, the
///     sign chosen so the handle swings toward `outward`;
///   horizontal hinge: axis + r (cos theta closed_direction + sin theta outward).
/// A press-pull door additionally slides inward by `push` along -outward
/// while closed.
struct ArticulationModel {
    ArticulationKind kind = ArticulationKind::vertical_hinge;
    Vec3 axis_position = Vec3::Zero();
    double radius_door2axis = 0.3;
    double open_angle = 1.5707963267948966;
    double latch_travel = 0.0;
    Vec3 closed_direction = Vec3::UnitY();
    Vec3 outward = -Vec3::UnitX();
    /// Doors without a handle expose their grasp point under the bare object name.
    bool has_handle = true;

    Vec3 handle_at(double angle, double push = 0.0) const;
    /// Angle in [0, open_angle] whose handle point is nearest to p.
    double nearest_angle(const Vec3& p) const;
    /// Maximum inward slide of a press-pull door.
    double max_push() const { return 1.5 * latch_travel; }
};

struct ObjectState {
    double door_angle = 0.0;
    bool latched = false;
    bool powered = false;
    double push = 0.0;
};

struct Box {
    Vec3 center = Vec3::Zero();
    Vec3 size = Vec3::Zero();

    double bottom() const { return center.z() - 0.5 * size.z(); }
    double top() const { return center.z() + 0.5 * size.z(); }
    bool contains_planar(const Vec3& p, double slack = 0.0) const;
    bool contains(const Vec3& p, double slack = 0.0) const;
};

struct WorldObject {
    std::string id;
    std::string name;
    Vec3 position = Vec3::Zero();
    Vec3 size = Vec3::Constant(0.05);
    std::optional<ArticulationModel> articulation;
    ObjectState state;
    std::string surface;
    bool fixed = false;
    double place_margin = 0.0115;
    std::optional<Vec3> knob;
    std::optional<Box> cavity;
    /// Gripper mode used to pick this object.
    std::string grip = "close";

    Box box() const { return {position, size}; }
    /// Interior volume: the explicit cavity or the object's own box.
    Box interior() const { return cavity ? *cavity : box(); }
    bool movable() const { return !fixed && !articulation; }
    Vec3 handle() const;
    /// Where a gripper takes hold of the object (door handle for articulated objects).
    Vec3 grasp_point() const;
    /// Release point for placing something inside.
    Vec3 inside_point() const;
    bool door_open_enough() const;
};

struct RobotConfig {
    Vec3 base = Vec3::Zero();  // x, y, heading
    Vec3 init_ee = Vec3(0.35, 0.0, 0.8);
    double reach_radius = 1.3;
    double lift_min = 0.0;
    double lift_max = 1.4;
};

struct Scene {
    Vec3 lateral_axis = Vec3::UnitY();
    CameraIntrinsics intrinsics{525.0, 525.0, 319.5, 239.5};
    RigidTransform camera_to_world;
    RobotConfig robot;
    Vec3 clearance = Vec3(0.0, -0.6, 0.72);
    Vec3 handover = Vec3(0.3, 0.0, 0.9);
    std::vector<WorldObject> objects;

    const WorldObject* find(const std::string& id) const;
    WorldObject* find(const std::string& id);
    /// Position of a library constant (init, handover, clearance,
    /// clearance2, ...); nullopt for anything else. Clearance slots are
    /// spaced 0.1 m along the lateral axis.
    std::optional<Vec3> constant(std::string_view symbol) const;
    /// Objects whose class name is `name`, in scene order.
    std::vector<const WorldObject*> by_name(const std::string& name) const;
};

Scene load_scene(const std::filesystem::path& path);
Scene parse_scene(const std::string& json_text);
std::string scene_to_json(const Scene& scene);

}  // namespace hrc
