#pragma once

#include "hrc/dmp.hpp"
#include "hrc/plan.hpp"
#include "hrc/scene.hpp"
#include "hrc/skill_library.hpp"

#include <string>
#include <utility>
#include <vector>

namespace hrc {

/// One teleoperation sample: gripper position and aperture (0 closed, 1 open).
struct DemoSample {
    double t = 0.0;
    Vec3 p = Vec3::Zero();
    double aperture = 1.0;
};

inline constexpr double kDemoRate = 60.0;

/// Demonstration of a door sub-task ("open the oven", "close the oven",
/// "open the cabinet", ...) generated from the true scene geometry, starting
/// at the robot's initial end-effector pose. Throws Error(invalid_input) for
/// sub-tasks it has no script for.
std::vector<DemoSample> scripted_demo(const std::string& description, const Scene& scene, double rate = kDemoRate);

struct DemoSegment {
    std::string name;
    std::vector<DemoSample> samples;
};

/// Splits a demonstration wherever the aperture crosses 0.5. Pieces shorter
/// than three samples are appended to the piece before them. Names are
/// `name`, `name_ex`, `name_ex2`, ...
std::vector<DemoSegment> segment_demo(const std::vector<DemoSample>& samples, const std::string& name);

/// (x, y, z, aperture) trajectory of a segment with time starting at zero.
dmp::Trajectory to_trajectory(const DemoSegment& segment);

/// DMP settings for skills fitted from demonstrations: forcing scaled by
/// (g - y0), which stays well conditioned when a dimension passes through its
/// goal halfway through a segment.
dmp::DmpConfig skill_config();

struct TaughtSkill {
    SkillRecord skill;
    std::vector<std::pair<std::string, dmp::DmpModel>> models;
};

/// Fits one model per segment and builds the skill that replaces
/// `basic.motions`. The anchor is the first positional symbol of the basic
/// motions; `anchor_position` is where that symbol was bound while teaching.
TaughtSkill teach_skill(const SubTask& basic, const std::vector<DemoSample>& samples, const Vec3& anchor_position,
                        const dmp::DmpConfig& config = skill_config());

/// First positional symbol of a motion list (library constants skipped,
/// close_move arguments included).
std::optional<std::string> anchor_symbol(const std::vector<MotionFunction>& motions);

}  // namespace hrc
