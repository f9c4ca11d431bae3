#pragma once

#include "hrc/perception.hpp"
#include "hrc/planner.hpp"
#include "hrc/scene.hpp"
#include "hrc/simulator.hpp"
#include "hrc/skill_library.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace hrc {

struct FaultFlags {
    /// Skill name -> wrong key used for the library lookup.
    std::map<std::string, std::string> skill_key_faults;
    /// Strips the motions of the last sub-task from the generated plan text.
    bool empty_subtask = false;
};

/// One row of a task suite. Trials of a row differ only by seed.
struct TrialSpec {
    std::string label;
    std::string task_text;
    std::filesystem::path scene_file;
    std::optional<double> noise_half_width;  // suite default when unset
    std::optional<double> miss_probability;
    std::optional<std::uint64_t> seed;
    std::optional<int> trials;  // overrides the experiment's count
    /// Skills loaded from disk before teaching.
    std::optional<std::filesystem::path> dmp_library;
    /// Sub-task descriptions taught by a scripted demonstration, in the
    /// noiseless world, before the trials run.
    std::vector<std::string> teach;
    std::map<std::string, std::string> choices;
    FaultFlags faults;
};

struct TaskSuite {
    std::vector<TrialSpec> tasks;
};

/// Reads a suite file:
///   {"scene": "...", "tasks": [{"label", "task", "teach"?, "choices"?,
///     "dmp_library"?, "noise"?, "miss"?, "seed"?, "trials"?, "scene"?,
///     "faults"? {"skill_key", "empty_subtask"}}]}
/// Relative paths are resolved against the suite file's directory.
TaskSuite load_task_suite(const std::filesystem::path& path);
TaskSuite parse_task_suite(const std::string& json_text, const std::filesystem::path& base_dir = {});

struct ExperimentConfig {
    int trials = 23;
    std::uint64_t seed = 7;
    DetectorConfig detector{0.011, 0.12, 0.0};
    SimConfig sim;
    /// 0 uses the hardware concurrency.
    unsigned workers = 0;
};

struct TrialRecord {
    std::string label;
    int trial = 0;
    bool executable = false;
    bool feasible = false;
    bool success = false;
    std::string plan_status;
    std::string failure_reason;
    std::string feasibility_reason;
};

struct TaskMetrics {
    std::string label;
    int trials = 0;
    int executable = 0;
    int feasible = 0;
    int success = 0;

    double executability() const { return trials ? static_cast<double>(executable) / trials : 0.0; }
    double feasibility() const { return trials ? static_cast<double>(feasible) / trials : 0.0; }
    double success_rate() const { return trials ? static_cast<double>(success) / trials : 0.0; }
};

struct MetricsReport {
    std::vector<TaskMetrics> rows;  // suite order
    TaskMetrics total;
    std::vector<TrialRecord> records;
};

/// Copies every skill of `from` with the models it publishes.
void copy_library(const DmpLibrary& from, DmpLibrary& to, bool replace);

/// Library a row starts its trials with: the row's dmp_library (if any)
/// plus one skill per `teach` entry, fitted from a scripted demonstration
/// recorded while the task runs in the noiseless world.
std::shared_ptr<DmpLibrary> prepare_library(const TrialSpec& spec, const Scene& scene, const PromptContext& prompts,
                                            const SimConfig& sim = {});

/// Executes one trial: perceive, plan, run (success); then plan again with
/// the same perceived objects at their true positions and run that
/// (feasibility).
TrialRecord run_trial(const TrialSpec& spec, const Scene& scene, const DmpLibrary& library,
                      const PromptContext& prompts, const DetectorConfig& detector, const SimConfig& sim,
                      std::uint64_t seed, int trial);

/// Throws Error(invalid_input) for trials < 1. An unreadable or invalid
/// scene file throws before any trial runs.
MetricsReport run_experiment(const TaskSuite& suite, const ExperimentConfig& config, const PromptContext& prompts);

/// "csv" or "text". Throws Error(invalid_input) for an empty report or an unknown format.
std::string emit_report(const MetricsReport& report, const std::string& format);
/// One CSV line per trial.
std::string emit_trials_csv(const MetricsReport& report);

struct DiscrepancyStats {
    std::size_t count = 0;
    double min = 0.0;
    double median = 0.0;
    double max = 0.0;
};

/// Planar distance between localized detections and their ground-truth
/// objects over `seconds` of frames at `rate_hz`. Throws Error(invalid_input)
/// when no detection was produced.
DiscrepancyStats perception_discrepancy_study(const Scene& scene, const DetectorConfig& detector, double seconds,
                                              std::uint64_t seed, double rate_hz = 10.0);

}  // namespace hrc
