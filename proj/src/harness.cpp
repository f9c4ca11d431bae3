#include "hrc/harness.hpp"

#include "hrc/demos.hpp"
#include "hrc/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <random>
#include <set>
#include <sstream>
#include <thread>

namespace hrc {

using nlohmann::json;

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p)
{
    std::filesystem::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

std::string drop_last_subtask_motions(const std::string& raw)
{
    std::istringstream in(raw);
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) {
        lines.push_back(line);
    }
    std::size_t last = lines.size();
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (lines[i].rfind("subtask:", 0) == 0) {
            last = i;
        }
    }
    std::string out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (i > last && lines[i].rfind("mf:", 0) == 0) {
            continue;
        }
        out += lines[i] + '\n';
    }
    return out;
}

PlannerOptions planner_options(const FaultFlags& faults)
{
    PlannerOptions o;
    if (faults.empty_subtask) {
        o.raw_filter = drop_last_subtask_motions;
    }
    return o;
}

PlanResult plan_safely(const Planner& planner, const std::string& task, const WorldModel& world,
                       const DmpLibrary& library, const std::map<std::string, std::string>& choices)
{
    try {
        return planner.plan(task, world, library, choices);
    } catch (const Error& e) {
        PlanResult r;
        // No plan text reached the parser (backend failure, empty request).
        r.status = PlanStatus::parse_error;
        r.message = e.what();
        return r;
    }
}

struct RunResult {
    bool success = false;
    std::string reason;
};

RunResult execute(const PlanResult& r, const Scene& scene, const DmpLibrary& library, const SimConfig& sim_config)
{
    if (r.status != PlanStatus::ok) {
        return {false, std::string(to_string(r.status)) + ": " + r.message};
    }
    Simulator sim(scene, &library, sim_config);
    const ExecutionOutcome out = run_plan(sim, r.plan);
    return {out.task_success, out.task_success ? "" : out.failure_reason.value_or("task goal not reached")};
}

std::vector<LabeledObject> noiseless_view(const Scene& scene)
{
    std::mt19937_64 rng(0);
    return localize(SyntheticDetector({0.0, 0.0, 0.0}).detect(scene, rng), scene);
}

std::string percent(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f%%", 100.0 * v);
    return buf;
}

std::string csv_field(const std::string& s)
{
    if (s.find_first_of(",\"\n") == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (char c : s) {
        out += c == '"' ? std::string("\"\"") : std::string(1, c);
    }
    return out + '"';
}

}  // namespace

void copy_library(const DmpLibrary& from, DmpLibrary& to, bool replace)
{
    for (const auto& name : from.skill_names()) {
        const SkillRecord& skill = *from.skill(name);
        std::vector<std::pair<std::string, dmp::DmpModel>> models;
        for (const auto& m : skill.motions) {
            if (m.kind == MotionKind::dmp_publish) {
                if (const auto* model = from.model(m.arg)) {
                    models.emplace_back(m.arg, *model);
                }
            }
        }
        to.commit(skill, models, replace);
    }
}

TaskSuite parse_task_suite(const std::string& json_text, const std::filesystem::path& base_dir)
{
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::invalid_input, std::string("task suite: ") + e.what());
    }
    TaskSuite suite;
    try {
        const std::string default_scene = j.value("scene", std::string());
        for (const auto& t : j.at("tasks")) {
            TrialSpec s;
            s.task_text = t.at("task").get<std::string>();
            s.label = t.value("label", s.task_text);
            const std::string scene = t.value("scene", default_scene);
            if (scene.empty()) {
                throw Error(ErrorKind::invalid_input, "task suite: no scene for '" + s.label + "'");
            }
            s.scene_file = resolve(base_dir, scene);
            if (t.contains("noise")) s.noise_half_width = t["noise"].get<double>();
            if (t.contains("miss")) s.miss_probability = t["miss"].get<double>();
            if (t.contains("seed")) s.seed = t["seed"].get<std::uint64_t>();
            if (t.contains("trials")) s.trials = t["trials"].get<int>();
            if (t.contains("dmp_library")) s.dmp_library = resolve(base_dir, t["dmp_library"].get<std::string>());
            s.teach = t.value("teach", std::vector<std::string>{});
            s.choices = t.value("choices", std::map<std::string, std::string>{});
            if (t.contains("faults")) {
                const auto& f = t["faults"];
                s.faults.skill_key_faults = f.value("skill_key", std::map<std::string, std::string>{});
                s.faults.empty_subtask = f.value("empty_subtask", false);
            }
            suite.tasks.push_back(std::move(s));
        }
    } catch (const json::exception& e) {
        throw Error(ErrorKind::invalid_input, std::string("task suite: ") + e.what());
    }
    if (suite.tasks.empty()) {
        throw Error(ErrorKind::invalid_input, "task suite lists no tasks");
    }
    return suite;
}

TaskSuite load_task_suite(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorKind::io, "cannot open task suite " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_task_suite(ss.str(), path.parent_path());
}

std::shared_ptr<DmpLibrary> prepare_library(const TrialSpec& spec, const Scene& scene, const PromptContext& prompts,
                                            const SimConfig& sim_config)
{
    auto library = std::make_shared<DmpLibrary>();
    if (spec.dmp_library) {
        copy_library(DmpLibrary(*spec.dmp_library), *library, true);
    }
    if (spec.teach.empty()) {
        return library;
    }

    Planner planner(std::make_shared<RuleBackend>(), prompts);
    const WorldModel world{noiseless_view(scene), &scene};
    PlanResult r = planner.plan(spec.task_text, world, *library, spec.choices);
    if (r.status != PlanStatus::ok) {
        throw Error(ErrorKind::invalid_input,
                    "cannot teach '" + spec.label + "': " + to_string(r.status) + ": " + r.message);
    }
    std::set<std::string> pending;
    for (const auto& t : spec.teach) {
        pending.insert(normalize_task(t));
    }

    Simulator sim(scene, library.get(), sim_config);
    for (auto& sub : r.plan.subtasks) {
        const std::string key = normalize_task(sub.description);
        if (pending.count(key) && !sub.skill_name) {
            const auto generated = planner.generate(sub.description, world);
            if (generated.size() != 1) {
                throw Error(ErrorKind::invalid_input, "teach entry '" + sub.description + "' is not a single sub-task");
            }
            const SubTask& basic = generated.front();
            const auto anchor = anchor_symbol(basic.motions);
            std::optional<Vec3> anchor_position;
            if (anchor) {
                anchor_position = sim.scene().constant(*anchor);
                if (const auto it = r.plan.bound_symbols.find(*anchor); !anchor_position && it != r.plan.bound_symbols.end()) {
                    anchor_position = it->second;
                }
            }
            if (!anchor_position) {
                throw Error(ErrorKind::naming, "sub-task '" + sub.description + "' has no anchor position");
            }
            const TaughtSkill taught = teach_skill(basic, scripted_demo(sub.description, sim.scene()), *anchor_position);
            library->commit(taught.skill, taught.models, true);
            sub = planner.substitute(sub, *library);
            pending.erase(key);
        }
        for (const auto& m : sub.motions) {
            const MotionResult res = sim.execute(m, r.plan, sub);
            if (!res.ok) {
                throw Error(ErrorKind::invalid_input, "teaching run of '" + spec.label + "' failed at " + m.str() +
                                                          ": " + res.reason);
            }
        }
    }
    if (!pending.empty()) {
        throw Error(ErrorKind::invalid_input, "teach entry '" + *pending.begin() + "' is not a sub-task of '" +
                                                  spec.task_text + "'");
    }
    return library;
}

TrialRecord run_trial(const TrialSpec& spec, const Scene& scene, const DmpLibrary& library,
                      const PromptContext& prompts, const DetectorConfig& detector, const SimConfig& sim_config,
                      std::uint64_t seed, int trial)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(trial)};
    std::mt19937_64 rng(seq);
    const auto perceived = localize(SyntheticDetector(detector).detect(scene, rng), scene);

    const Planner planner(std::make_shared<RuleBackend>(), prompts, planner_options(spec.faults));
    SimConfig sim = sim_config;
    for (const auto& [from, to] : spec.faults.skill_key_faults) {
        sim.skill_key_faults[from] = to;
    }
    TrialRecord rec;
    rec.label = spec.label;
    rec.trial = trial;

    const PlanResult noisy = plan_safely(planner, spec.task_text, WorldModel{perceived, &scene}, library, spec.choices);
    rec.plan_status = to_string(noisy.status);
    rec.executable = noisy.executable();
    const RunResult run = execute(noisy, scene, library, sim);
    rec.success = run.success;
    rec.failure_reason = run.reason;

    const PlanResult twin = plan_safely(planner, spec.task_text, WorldModel{with_true_positions(perceived, scene), &scene},
                                        library, spec.choices);
    const RunResult twin_run = execute(twin, scene, library, sim);
    rec.feasible = twin_run.success;
    rec.feasibility_reason = twin_run.reason;
    return rec;
}

MetricsReport run_experiment(const TaskSuite& suite, const ExperimentConfig& config, const PromptContext& prompts)
{
    if (config.trials < 1) {
        throw Error(ErrorKind::invalid_input, "run_experiment: trials must be at least 1");
    }
    if (suite.tasks.empty()) {
        throw Error(ErrorKind::invalid_input, "run_experiment: the suite is empty");
    }
    for (const auto& t : suite.tasks) {
        if (t.trials && *t.trials < 1) {
            throw Error(ErrorKind::invalid_input, "run_experiment: '" + t.label + "' needs at least 1 trial");
        }
    }

    // Load every scene and teach every library before the first trial.
    std::map<std::filesystem::path, Scene> scenes;
    for (const auto& t : suite.tasks) {
        if (!scenes.count(t.scene_file)) {
            scenes.emplace(t.scene_file, load_scene(t.scene_file));
        }
    }
    std::vector<std::shared_ptr<DmpLibrary>> libraries;
    for (const auto& t : suite.tasks) {
        libraries.push_back(prepare_library(t, scenes.at(t.scene_file), prompts, config.sim));
    }

    struct Job {
        std::size_t row;
        int trial;
    };
    std::vector<Job> jobs;
    for (std::size_t i = 0; i < suite.tasks.size(); ++i) {
        for (int k = 0; k < suite.tasks[i].trials.value_or(config.trials); ++k) {
            jobs.push_back({i, k});
        }
    }
    std::vector<TrialRecord> records(jobs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t j; (j = next++) < jobs.size();) {
            const TrialSpec& spec = suite.tasks[jobs[j].row];
            DetectorConfig det = config.detector;
            if (spec.noise_half_width) det.noise_half_width = *spec.noise_half_width;
            if (spec.miss_probability) det.miss_probability = *spec.miss_probability;
            records[j] = run_trial(spec, scenes.at(spec.scene_file), *libraries[jobs[j].row], prompts, det, config.sim,
                                   spec.seed.value_or(config.seed), jobs[j].trial);
        }
    };
    unsigned n = config.workers ? config.workers : std::max(1u, std::thread::hardware_concurrency());
    n = std::min<unsigned>(n, static_cast<unsigned>(jobs.size()));
    std::vector<std::thread> pool;
    for (unsigned w = 1; w < n; ++w) {
        pool.emplace_back(worker);
    }
    worker();
    for (auto& t : pool) {
        t.join();
    }

    MetricsReport report;
    report.total.label = "Total";
    for (std::size_t i = 0; i < suite.tasks.size(); ++i) {
        report.rows.push_back({suite.tasks[i].label, 0, 0, 0, 0});
    }
    for (std::size_t j = 0; j < jobs.size(); ++j) {
        for (TaskMetrics* m : {&report.rows[jobs[j].row], &report.total}) {
            ++m->trials;
            m->executable += records[j].executable;
            m->feasible += records[j].feasible;
            m->success += records[j].success;
        }
    }
    report.records = std::move(records);
    return report;
}

std::string emit_report(const MetricsReport& report, const std::string& format)
{
    if (report.rows.empty()) {
        throw Error(ErrorKind::invalid_input, "emit_report: the report is empty");
    }
    std::vector<const TaskMetrics*> rows;
    for (const auto& r : report.rows) rows.push_back(&r);
    rows.push_back(&report.total);

    std::ostringstream os;
    if (format == "csv") {
        os << "task,trials,executability,feasibility,success_rate\n";
        for (const auto* r : rows) {
            os << csv_field(r->label) << ',' << r->trials << ',' << percent(r->executability()) << ','
               << percent(r->feasibility()) << ',' << percent(r->success_rate()) << '\n';
        }
        return os.str();
    }
    if (format == "text") {
        const std::vector<std::string> head{"Tasks", "Num of trials", "Executability", "Feasibility", "Success rate"};
        std::vector<std::vector<std::string>> cells{head};
        for (const auto* r : rows) {
            cells.push_back({r->label, std::to_string(r->trials), percent(r->executability()),
                             percent(r->feasibility()), percent(r->success_rate())});
        }
        std::vector<std::size_t> width(head.size(), 0);
        for (const auto& row : cells) {
            for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
        }
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i == 1 || i + 1 == cells.size()) {
                for (std::size_t c = 0; c < width.size(); ++c) {
                    os << (c ? "  " : "") << std::string(width[c], '-');
                }
                os << '\n';
            }
            for (std::size_t c = 0; c < cells[i].size(); ++c) {
                if (c == 0) {
                    os << std::left << std::setw(static_cast<int>(width[c])) << cells[i][c];
                } else {
                    os << "  " << std::right << std::setw(static_cast<int>(width[c])) << cells[i][c];
                }
            }
            os << '\n';
        }
        return os.str();
    }
    throw Error(ErrorKind::invalid_input, "emit_report: unknown format '" + format + "' (csv, text)");
}

std::string emit_trials_csv(const MetricsReport& report)
{
    std::ostringstream os;
    os << "task,trial,executable,feasible,success,plan_status,failure_reason,feasibility_reason\n";
    for (const auto& r : report.records) {
        os << csv_field(r.label) << ',' << r.trial << ',' << r.executable << ',' << r.feasible << ',' << r.success
           << ',' << r.plan_status << ',' << csv_field(r.failure_reason) << ',' << csv_field(r.feasibility_reason)
           << '\n';
    }
    return os.str();
}

DiscrepancyStats perception_discrepancy_study(const Scene& scene, const DetectorConfig& detector, double seconds,
                                              std::uint64_t seed, double rate_hz)
{
    if (!(seconds > 0.0) || !(rate_hz > 0.0)) {
        throw Error(ErrorKind::invalid_input, "perception study: duration and rate must be positive");
    }
    std::mt19937_64 rng(seed);
    const SyntheticDetector det(detector);
    const auto frames = static_cast<int>(std::lround(seconds * rate_hz));
    std::vector<double> d;
    for (int f = 0; f < frames; ++f) {
        for (const auto& obj : localize(det.detect(scene, rng), scene)) {
            if (const WorldObject* truth = scene.find(obj.source_id)) {
                d.push_back(std::hypot(obj.position_world.x() - truth->position.x(), obj.position_world.y() - truth->position.y()));
            }
        }
    }
    if (d.empty()) {
        throw Error(ErrorKind::invalid_input, "perception study: no detections");
    }
    std::sort(d.begin(), d.end());
    const std::size_t n = d.size();
    const double median = n % 2 ? d[n / 2] : 0.5 * (d[n / 2 - 1] + d[n / 2]);
    return {n, d.front(), median, d.back()};
}

}  // namespace hrc
