#pragma once

#include "hrc/plan.hpp"
#include "hrc/scene.hpp"
#include "hrc/skill_library.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace hrc {

struct RobotState {
    Vec3 base = Vec3::Zero();  // x, y, heading
    Vec3 ee = Vec3::Zero();
    double aperture = 1.0;
    std::optional<std::string> held;  // object id
    double waist_angle = 0.0;          // rad
    /// Door just let go of; it ignores push contact until the gripper moves away.
    std::optional<std::string> released_door;
};

struct SimConfig {
    double dt = 0.002;
    double ee_speed = 0.25;
    double base_speed = 0.3;
    double grasp_radius = 0.03;
    double track_tolerance = 0.02;
    double power_threshold_deg = 45.0;
    /// Skill lookups are redirected through this map (fault injection).
    std::map<std::string, std::string> skill_key_faults;
};

/// Aperture commanded by each gripper mode.
std::optional<double> gripper_aperture(const std::string& mode);

struct MotionResult {
    MotionFunction motion;
    bool ok = true;
    std::string reason;
};

struct ExecutionOutcome {
    bool executed = false;  // every motion ran without failure
    std::vector<MotionResult> per_motion_results;
    bool task_success = false;
    std::optional<std::string> failure_reason;
    /// Sub-tasks that ran to completion and met their own predicate.
    std::size_t subtasks_completed = 0;
};

/// One record per motion boundary.
struct EventRecord {
    double t = 0.0;
    std::string motion;
    RobotState robot;
    std::vector<WorldObject> changed_objects;
};

std::string event_to_json(const EventRecord& e);

/// Kinematic kitchen world. Single-threaded; copy it to fork a world.
class Simulator {
public:
    explicit Simulator(Scene scene, const DmpLibrary* library = nullptr, SimConfig config = {});

    const Scene& scene() const { return scene_; }
    const RobotState& robot() const { return robot_; }
    double time() const { return time_; }
    const SimConfig& config() const { return config_; }
    void set_library(const DmpLibrary* library) { library_ = library; }
    void set_config(SimConfig config) { config_ = std::move(config); }

    /// Executes one motion of `subtask` (which belongs to `plan`). A failed
    /// motion leaves the world where the failure happened.
    MotionResult execute(const MotionFunction& motion, const Plan& plan, const SubTask& subtask);

    /// Demonstration mirroring: the end effector jumps (in small sub-steps)
    /// to `p`, clamped to the reach envelope, and the gripper follows
    /// `aperture`. Returns false when the sample had to be clamped.
    bool mirror(const Vec3& p, double aperture, std::string* warning = nullptr);

    const std::vector<EventRecord>& events() const { return events_; }
    /// Event log as JSON lines.
    std::string event_log() const;
    void log_event(const std::string& label, const Scene& before);

    struct Snapshot {
        Scene scene;
        RobotState robot;
        double time = 0.0;
    };
    Snapshot save() const { return {scene_, robot_, time_}; }
    void restore(const Snapshot& s);

    Vec3 clamp_to_reach(const Vec3& p) const;
    bool reachable(const Vec3& p) const;

private:
    struct StepStatus {
        bool ok = true;
        std::string reason;
    };

    std::optional<Vec3> resolve(const std::string& symbol, const Plan& plan) const;
    StepStatus step_ee(const Vec3& p, bool demo);
    StepStatus travel(const Vec3& target, bool demo = false);
    StepStatus set_aperture(double aperture, bool demo);
    StepStatus grasp();
    void release();
    void settle(WorldObject& obj);

    MotionResult move_to(const MotionFunction& m, const Plan& plan);
    MotionResult gripper(const MotionFunction& m);
    MotionResult base_cycle(const MotionFunction& m);
    MotionResult close_push(const MotionFunction& m, const Plan& plan);
    MotionResult rotate(const MotionFunction& m);
    MotionResult publish(const MotionFunction& m, const Plan& plan, const SubTask& subtask);

    WorldObject* held_object();

    Scene scene_;
    const DmpLibrary* library_;
    SimConfig config_;
    RobotState robot_;
    Vec3 home_base_;
    double time_ = 0.0;
    std::vector<EventRecord> events_;
};

/// Runs sub-tasks in order, checking each sub-task's own predicate after
/// it finishes and stopping at the first failure. Object labels in every
/// predicate refer to the world as it was when the plan started.
ExecutionOutcome run_plan(Simulator& sim, const Plan& plan);

/// Success predicate of a task. Object references are resolved against
/// `before` (left-to-right labels of the true positions, `choices` picking
/// among same-name objects) and evaluated on `after`. Throws
/// Error(unknown_predicate) for tasks outside the predicate table.
bool check_success(const std::string& task_text, const Scene& before, const Scene& after,
                   const std::map<std::string, std::string>& choices = {}, const RobotState* robot = nullptr);

}  // namespace hrc
