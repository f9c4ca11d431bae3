#pragma once

#include "hrc/demos.hpp"
#include "hrc/perception.hpp"
#include "hrc/planner.hpp"
#include "hrc/simulator.hpp"
#include "hrc/skill_library.hpp"

#include <json.hpp>

#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace hrc {

enum class Phase { idle, planning, executing, paused, demonstrating, fitting, awaiting_clarification };

const char* to_string(Phase phase) noexcept;

struct Cursor {
    std::size_t subtask = 0;
    std::size_t motion = 0;
};

struct SessionConfig {
    DetectorConfig detector{0.011, 0.12, 0.0};
    std::uint64_t seed = 7;
    SimConfig sim;
    double gap_limit_s = 2.0;
    double max_demo_s = 120.0;
};

struct DemonstrationRecording {
    std::string id;
    std::vector<DemoSample> samples;
    std::string subject_subtask;
    std::string proposed_skill_name;
    std::vector<std::string> warnings;
};

/// Result of the last task run by the session.
struct TaskRecord {
    std::string task;
    std::string status;  // success, failed, not_executable, clarification_cancelled, cancelled
    std::string reason;
};

struct Reply {
    bool ok = true;
    std::string message;
};

struct Transition {
    Phase from;
    std::string command;
    Phase to;

    bool operator==(const Transition&) const = default;
};

/// The live loop: plan, execute motion by motion, pause, take a
/// demonstration, fit and store it, resume. Not thread-safe; the server
/// serializes access. Commands issued in the wrong phase throw
/// Error(illegal_transition) and change nothing.
class Session {
public:
    Session(Scene scene, std::shared_ptr<DmpLibrary> library, std::shared_ptr<LanguageBackend> backend,
            PromptContext prompts, SessionConfig config = {});
    Session(const Session&) = delete;
    Session& operator=(const Session&) = delete;

    Phase phase() const { return phase_; }
    const Cursor& cursor() const { return cursor_; }
    const std::optional<Plan>& plan() const { return plan_; }
    const std::optional<std::string>& pending_question() const { return pending_question_; }
    const std::optional<TaskRecord>& last_task() const { return last_task_; }
    const std::optional<DemonstrationRecording>& recording() const { return recording_; }
    const Simulator& simulator() const { return sim_; }
    const DmpLibrary& library() const { return *library_; }

    Reply submit(const std::string& text);
    Reply clarify(const std::string& answer);
    void pause();
    /// From paused, or from fitting once a skill is committed. The current
    /// sub-task is recompiled first so a new skill replaces its motions.
    void resume();
    /// Executes the motion under the cursor. Returns true while executing.
    bool step();
    /// Steps until the phase leaves executing or `max_steps` motions ran.
    void run(std::size_t max_steps = 100000);

    void begin_demo();
    /// `received_at` is the arrival time used by check_stream_gap; it
    /// defaults to the sample's own timestamp.
    Reply demo_sample(const DemoSample& sample, std::optional<double> received_at = std::nullopt);
    /// Aborts the demonstration when no sample arrived for longer than the gap limit.
    bool check_stream_gap(double now);
    Reply end_demo();
    Reply commit(const std::string& recording_id, const std::optional<std::string>& name = std::nullopt,
                 bool replace = false);
    void cancel();
    /// Back to idle with the initial world and perception seed.
    void reset();

    nlohmann::json state_json() const;
    nlohmann::json plan_json() const;
    nlohmann::json scene_json() const;
    nlohmann::json library_json() const;

    /// Server-to-client frames, numbered from 0.
    std::vector<nlohmann::json> frames_since(std::size_t seq) const;
    std::size_t frame_count() const { return frames_base_ + frames_.size(); }

    const std::vector<Transition>& transitions() const { return transitions_; }
    static const std::vector<Transition>& declared_transitions();

private:
    void require(std::initializer_list<Phase> phases, const char* command) const;
    void transition(const char* command, Phase to);
    Reply plan_task();
    void finish(const std::string& status, const std::string& reason);
    void recompile_current();
    void discard_demo();
    SubTask basic_subtask(const SubTask& sub) const;
    void emit(nlohmann::json frame);
    void emit_log(const std::string& level, const std::string& message);
    void emit_new_events();

    Scene initial_scene_;
    std::shared_ptr<DmpLibrary> library_;
    Planner planner_;
    SessionConfig config_;
    SyntheticDetector detector_;
    std::mt19937_64 rng_;
    Simulator sim_;

    Phase phase_ = Phase::idle;
    std::string task_;
    WorldModel world_;
    std::vector<LabeledObject> perceived_;
    std::map<std::string, std::string> choices_;
    std::string ambiguous_name_;
    std::optional<Plan> plan_;
    Cursor cursor_;
    Scene task_before_;
    std::optional<std::string> pending_question_;
    std::optional<TaskRecord> last_task_;

    std::optional<Simulator::Snapshot> demo_snapshot_;
    std::optional<DemonstrationRecording> recording_;
    std::optional<double> last_received_;
    bool committed_ = false;
    int recording_counter_ = 0;

    std::size_t events_seen_ = 0;
    std::vector<nlohmann::json> frames_;
    std::size_t frames_base_ = 0;
    std::vector<Transition> transitions_;
};

nlohmann::json plan_to_json(const Plan& plan);

}  // namespace hrc
