// Command-line front end: plan, simulate, teach, bench, perception, serve.

#include "hrc/demos.hpp"
#include "hrc/errors.hpp"
#include "hrc/harness.hpp"
#include "hrc/server.hpp"
#include "hrc/session.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <random>
#include <thread>

using namespace hrc;
using nlohmann::json;

namespace {

std::atomic<bool> g_stop{false};

void write_file(const std::string& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorKind::io, "cannot write " + path);
    }
    out << text;
}

struct Common {
    std::string scene = "scenes/kitchen.json";
    std::string prompts;
    double noise = 0.011;
    double miss = 0.0;
    std::uint64_t seed = 7;

    PromptContext prompt_context() const
    {
        return PromptContext::load(prompts.empty() ? PromptContext::default_dir() : std::filesystem::path(prompts));
    }
    DetectorConfig detector() const { return {noise, DetectorConfig{}.noise_spread, miss}; }
};

void add_common(CLI::App* app, Common& c, bool perception = true)
{
    app->add_option("--scene", c.scene, "Scene file")->capture_default_str();
    app->add_option("--prompts", c.prompts, "Prompt asset directory");
    if (perception) {
        app->add_option("--noise", c.noise, "Detector noise half-width (m)")->capture_default_str();
        app->add_option("--miss", c.miss, "Detector miss probability")->capture_default_str();
        app->add_option("--seed", c.seed, "Perception seed")->capture_default_str();
    }
}

std::map<std::string, std::string> parse_choices(const std::vector<std::string>& items)
{
    std::map<std::string, std::string> out;
    for (const auto& item : items) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorKind::invalid_input, "--choice expects name=label, got '" + item + "'");
        }
        out[item.substr(0, eq)] = item.substr(eq + 1);
    }
    return out;
}

std::vector<LabeledObject> perceive(const Scene& scene, const Common& c)
{
    std::mt19937_64 rng(c.seed);
    return localize(SyntheticDetector(c.detector()).detect(scene, rng), scene);
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Language-planned kitchen manipulation with demonstrated skills"};
    app.require_subcommand(1);

    Common common;
    std::string task;
    std::string library_dir;
    std::vector<std::string> choices;

    auto* plan_cmd = app.add_subcommand("plan", "Print the plan for a task");
    add_common(plan_cmd, common);
    plan_cmd->add_option("task", task, "Task text")->required();
    plan_cmd->add_option("--library", library_dir, "DMP library directory");
    plan_cmd->add_option("--choice", choices, "Resolve an ambiguous class: name=label");

    std::string events_out;
    auto* sim_cmd = app.add_subcommand("simulate", "Plan and run a task once");
    add_common(sim_cmd, common);
    sim_cmd->add_option("task", task, "Task text")->required();
    sim_cmd->add_option("--library", library_dir, "DMP library directory");
    sim_cmd->add_option("--choice", choices, "Resolve an ambiguous class: name=label");
    sim_cmd->add_option("--events", events_out, "Write the event log (JSON lines)");

    std::vector<std::string> teach_entries;
    bool replace = false;
    auto* teach_cmd = app.add_subcommand("teach", "Fit skills from scripted demonstrations into a library");
    add_common(teach_cmd, common, false);
    teach_cmd->add_option("task", task, "Task whose sub-tasks are demonstrated")->required();
    teach_cmd->add_option("--subtask", teach_entries, "Sub-task to demonstrate (repeatable)")->required();
    teach_cmd->add_option("--library", library_dir, "DMP library directory")->required();
    teach_cmd->add_flag("--replace", replace, "Overwrite skills of the same name");

    std::string tasks_file;
    std::string out_file;
    std::string format = "csv";
    std::string trials_out;
    int trials = 23;
    unsigned workers = 0;
    auto* bench_cmd = app.add_subcommand("bench", "Run a task suite and report executability, feasibility and success");
    bench_cmd->add_option("--tasks", tasks_file, "Task-suite JSON")->required();
    bench_cmd->add_option("--trials", trials, "Trials per task")->capture_default_str();
    bench_cmd->add_option("--seed", common.seed, "Base seed")->capture_default_str();
    bench_cmd->add_option("--noise", common.noise, "Detector noise half-width (m)")->capture_default_str();
    bench_cmd->add_option("--miss", common.miss, "Detector miss probability")->capture_default_str();
    bench_cmd->add_option("--prompts", common.prompts, "Prompt asset directory");
    bench_cmd->add_option("--out", out_file, "Report file (stdout when omitted)");
    bench_cmd->add_option("--format", format, "csv or text")->capture_default_str();
    bench_cmd->add_option("--trials-out", trials_out, "Per-trial CSV");
    bench_cmd->add_option("--workers", workers, "Worker threads (0 = all cores)");

    double seconds = 5.0;
    double rate = 10.0;
    auto* perception_cmd = app.add_subcommand("perception", "Discrepancy of synthetic detections against ground truth");
    add_common(perception_cmd, common);
    perception_cmd->add_option("--seconds", seconds, "Window length")->capture_default_str();
    perception_cmd->add_option("--rate", rate, "Frames per second")->capture_default_str();

    std::string host = "127.0.0.1";
    int port = 8765;
    int step_ms = 200;
    auto* serve_cmd = app.add_subcommand("serve", "Run the session server");
    add_common(serve_cmd, common);
    serve_cmd->add_option("--library", library_dir, "DMP library directory (in memory when omitted)");
    serve_cmd->add_option("--host", host)->capture_default_str();
    serve_cmd->add_option("--port", port, "0 picks a free port")->capture_default_str();
    serve_cmd->add_option("--step-delay-ms", step_ms, "Pause between motions")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*plan_cmd || *sim_cmd) {
            const Scene scene = load_scene(common.scene);
            const DmpLibrary library = library_dir.empty() ? DmpLibrary() : DmpLibrary(library_dir);
            const Planner planner(std::make_shared<RuleBackend>(), common.prompt_context());
            const WorldModel world{perceive(scene, common), &scene};
            const PlanResult r = planner.plan(task, world, library, parse_choices(choices));
            if (*plan_cmd) {
                std::cout << "# status: " << to_string(r.status) << (r.message.empty() ? "" : " (" + r.message + ")")
                          << '\n';
                std::cout << (r.status == PlanStatus::ok ? format_plan_dsl(r.plan.subtasks) : r.raw_text);
                return r.status == PlanStatus::ok ? 0 : 2;
            }
            if (r.status != PlanStatus::ok) {
                std::cerr << "not executable: " << to_string(r.status) << ": " << r.message << '\n';
                return 2;
            }
            Simulator sim(scene, &library);
            const ExecutionOutcome out = run_plan(sim, r.plan);
            json j{{"task", task},
                   {"executed", out.executed},
                   {"task_success", out.task_success},
                   {"subtasks_completed", out.subtasks_completed},
                   {"sim_time", sim.time()}};
            if (out.failure_reason) {
                j["failure_reason"] = *out.failure_reason;
            }
            std::cout << format_plan_dsl(r.plan.subtasks) << j.dump(2) << '\n';
            if (!events_out.empty()) {
                write_file(events_out, sim.event_log());
            }
            return out.task_success ? 0 : 1;
        }

        if (*teach_cmd) {
            TrialSpec spec;
            spec.label = task;
            spec.task_text = task;
            spec.teach = teach_entries;
            const Scene scene = load_scene(common.scene);
            const auto taught = prepare_library(spec, scene, common.prompt_context());
            DmpLibrary disk(library_dir);
            copy_library(*taught, disk, replace);
            for (const auto& name : taught->skill_names()) {
                std::cout << "stored " << name << '\n';
            }
            return 0;
        }

        if (*bench_cmd) {
            const TaskSuite suite = load_task_suite(tasks_file);
            ExperimentConfig config;
            config.trials = trials;
            config.seed = common.seed;
            config.detector = common.detector();
            config.workers = workers;
            const MetricsReport report = run_experiment(suite, config, common.prompt_context());
            const std::string doc = emit_report(report, format);
            if (out_file.empty()) {
                std::cout << doc;
            } else {
                write_file(out_file, doc);
                std::cout << emit_report(report, "text");
            }
            if (!trials_out.empty()) {
                write_file(trials_out, emit_trials_csv(report));
            }
            return 0;
        }

        if (*perception_cmd) {
            const DiscrepancyStats s =
                perception_discrepancy_study(load_scene(common.scene), common.detector(), seconds, common.seed, rate);
            std::cout << json{{"detections", s.count}, {"min", s.min}, {"median", s.median}, {"max", s.max}}.dump(2)
                      << '\n';
            return 0;
        }

        if (*serve_cmd) {
            auto library = library_dir.empty() ? std::make_shared<DmpLibrary>() : std::make_shared<DmpLibrary>(library_dir);
            SessionConfig config;
            config.detector = common.detector();
            config.seed = common.seed;
            Session session(load_scene(common.scene), library, std::make_shared<RuleBackend>(),
                            common.prompt_context(), config);
            ServerOptions options;
            options.host = host;
            options.port = port;
            options.step_delay = std::chrono::milliseconds(step_ms);
            SessionServer server(session, options);
            std::signal(SIGINT, [](int) { g_stop = true; });
            std::signal(SIGTERM, [](int) { g_stop = true; });
            std::cout << "listening on http://" << host << ':' << server.start() << std::endl;
            while (!g_stop) {
                std::this_thread::sleep_for(std::chrono::milliseconds(100));
            }
            server.stop();
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
        return 3;
    }
    return 0;
}
