#pragma once

#include "hrc/perception.hpp"
#include "hrc/plan.hpp"
#include "hrc/scene.hpp"
#include "hrc/skill_library.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace hrc {

inline constexpr const char* kClarificationQuestion =
    "There are multiple objects share the same name, which one do you prefer?";

struct PromptContext {
    std::string role_text;
    std::string library_text;
    std::string example_text;
    std::string ambiguity_text;
    std::vector<std::pair<std::string, int>> scene_inventory;
    /// Gripper mode per class when it is not plain "close".
    std::map<std::string, std::string> grips;
    /// Articulated classes whose door has no handle.
    std::vector<std::string> handleless;
    /// Classes of the objects on the table, left to right within a class.
    std::vector<std::string> table_objects;

    /// Reads role.txt, library.txt, examples.txt and ambiguity.txt.
    static PromptContext load(const std::filesystem::path& dir);
    /// Directory of the prompt assets shipped with the build.
    static std::filesystem::path default_dir();

    /// System prompt: the four texts plus the inventory line.
    std::string render() const;
};

/// Produces Plan DSL text for a task.
class LanguageBackend {
public:
    virtual ~LanguageBackend() = default;
    virtual std::string name() const = 0;
    virtual std::string generate(const PromptContext& context, const std::string& task) = 0;
};

/// Deterministic template planner. Tasks it cannot match produce a DSL
/// comment only, which then fails to parse.
class RuleBackend : public LanguageBackend {
public:
    std::string name() const override { return "rule"; }
    std::string generate(const PromptContext& context, const std::string& task) override;
};

struct RemoteConfig {
    std::string endpoint = "http://127.0.0.1:8000/v1/chat/completions";
    std::string model = "gpt-4-turbo";
    std::string api_key_env = "HRC_LLM_API_KEY";
    int max_retries = 2;
    double timeout_s = 60.0;
};

/// OpenAI-style chat completion endpoint, temperature fixed at 0.
class RemoteBackend : public LanguageBackend {
public:
    explicit RemoteBackend(RemoteConfig config = {}) : config_(std::move(config)) {}
    std::string name() const override { return "remote"; }
    /// Throws Error(transport) after the retry budget is spent.
    std::string generate(const PromptContext& context, const std::string& task) override;

private:
    RemoteConfig config_;
};

// ---------------------------------------------------------------------------
// Task text analysis shared by the rulebook, naming and success checks.

enum class TaskAction { put_on, put_in, stack, open, close, power_on, pick, warm_up, roast, clean, clear_away };

/// Object phrase from a task: class name plus an optional 1-based index
/// (from an ordinal, a left/middle/right word or a label such as cup2).
struct ObjectRef {
    enum class Which { any, index, middle, rightmost };
    std::string name;
    Which which = Which::any;
    int index = 0;

    /// Plan symbol given the number of instances of the class: the label
    /// when the instance is determined, else the class name.
    std::string symbol(int count) const;
    /// "the apple", "the first bottle".
    std::string phrase() const;
};

struct TaskPattern {
    TaskAction action;
    ObjectRef object;
    std::optional<ObjectRef> target;
};

/// Lowercases, drops punctuation and maps paraphrases onto the canonical
/// verbs ("heat" -> "warm up", "switch on" -> "power on", ...).
std::string normalize_task(const std::string& text);

/// Normalized clauses of a sequenced request ("a, then b" or "a and then b").
std::vector<std::string> split_clauses(const std::string& text);

/// Throws Error(invalid_input) for empty text; nullopt when no pattern fits.
std::optional<TaskPattern> match_task(const std::string& text);

/// Sub-task descriptions of a long task; a single entry for short tasks.
/// `table_objects` lists the class of every object on the table, left to
/// right within a class, and is only consulted for the clean-table task.
std::vector<std::string> decompose_pattern(const TaskPattern& pattern,
                                           const std::vector<std::string>& table_objects);

/// Basic-library motions of a short task. Instance counts, grips and
/// handle-less doors come from the context.
std::vector<MotionFunction> basic_motions(const TaskPattern& pattern, const PromptContext& context);

// ---------------------------------------------------------------------------

/// What the planner knows about the world: perceived labeled objects plus
/// the static geometry of their source objects.
struct WorldModel {
    std::vector<LabeledObject> objects;
    const Scene* scene = nullptr;

    /// Scene object a perceived record stands for (by source id, else first of its class).
    const WorldObject* geometry(const LabeledObject& obj) const;
    std::vector<std::pair<std::string, int>> inventory() const;
    /// Movable objects whose perceived center lies on the table top, in
    /// class order then left to right.
    std::vector<const LabeledObject*> table_objects() const;
};

enum class PlanStatus { ok, parse_error, clarification, unresolved, naming_error, planning_failure };

const char* to_string(PlanStatus status) noexcept;

struct Binding {
    std::map<std::string, Vec3> positions;
    /// Symbol -> label of the object it refers to.
    std::map<std::string, std::string> labels;
};

struct PlanResult {
    PlanStatus status = PlanStatus::ok;
    Plan plan;
    std::string raw_text;
    std::string message;
    /// Class name the clarification question is about.
    std::string ambiguous_name;

    bool executable() const { return status != PlanStatus::parse_error; }
};

struct PlannerOptions {
    bool remove_obstacles = true;
    /// Applied to the backend text before parsing (fault injection).
    std::function<std::string(const std::string&)> raw_filter;
};

class Planner {
public:
    Planner(std::shared_ptr<LanguageBackend> backend, PromptContext prompts, PlannerOptions options = {});

    /// Full pipeline: generate, parse, substitute library skills, bind
    /// symbols, inject obstacle removal. `choices` maps an ambiguous class
    /// name to the label the operator picked.
    PlanResult plan(const std::string& task, const WorldModel& world, const DmpLibrary& library,
                    const std::map<std::string, std::string>& choices = {}) const;

    Horizon classify(const std::string& task, const WorldModel& world) const;
    std::vector<std::string> decompose(const std::string& task, const WorldModel& world) const;
    /// Parsed but unbound and unsubstituted sub-tasks.
    std::vector<SubTask> generate(const std::string& task, const WorldModel& world, std::string* raw = nullptr) const;

    /// Replaces the motions of a sub-task by its stored skill when the library has one.
    SubTask substitute(SubTask subtask, const DmpLibrary& library) const;

    const PromptContext& prompts() const { return prompts_; }
    LanguageBackend& backend() const { return *backend_; }

private:
    PromptContext context_for(const WorldModel& world) const;

    std::shared_ptr<LanguageBackend> backend_;
    PromptContext prompts_;
    PlannerOptions options_;
};

/// `<action>_<target>` from the leading verb of the description and the
/// first positional symbol of its basic motions (init excluded; close_move
/// contributes its argument). Throws Error(naming).
std::string skill_name(const std::string& description, const std::vector<MotionFunction>& basic);

/// Positions for every positional symbol of the plan. Throws
/// Error(unresolved_symbol) for unknown objects; ambiguous references
/// yield the class name through `ambiguous` and leave the symbol unbound.
Binding bind_symbols(const std::vector<SubTask>& subtasks, const WorldModel& world,
                                         const std::map<std::string, std::string>& choices,
                                         std::string* ambiguous);

/// Resolves an answer to the clarification question ("cup2", "the left one",
/// "second", ...) to a label of class `name`. nullopt when it does not fit.
std::optional<std::string> resolve_choice(const std::string& answer, const std::string& name, const WorldModel& world);

/// Prepends removal sub-tasks for movable objects that block a sub-task
/// target. Throws Error(planning_failure) when the clearance zone is blocked.
Plan inject_obstacle_removal(const Plan& plan, const Binding& binding, const WorldModel& world,
                             const Vec3& robot_base);

}  // namespace hrc
