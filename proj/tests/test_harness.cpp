#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hrc/errors.hpp"
#include "hrc/harness.hpp"

#include <cmath>
#include <sstream>

using namespace hrc;

namespace {

const PromptContext& prompts()
{
    static const PromptContext p = PromptContext::load(HRC_SOURCE_DIR "/assets/prompts/v1");
    return p;
}

TaskSuite table(const char* name) { return load_task_suite(std::string(HRC_SOURCE_DIR "/tasks/") + name); }

std::vector<std::string> lines(const std::string& text)
{
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

const TaskMetrics& row(const MetricsReport& r, const std::string& label)
{
    for (const auto& m : r.rows) {
        if (m.label == label) return m;
    }
    FAIL("no row " << label);
    return r.total;
}

// Two-sided exact binomial p-value: total mass of outcomes no more likely than k.
double binomial_p_value(int k, int n, double p)
{
    auto pmf = [&](int i) {
        return std::exp(std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0) + i * std::log(p) +
                        (n - i) * std::log1p(-p));
    };
    const double observed = pmf(k);
    double total = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double q = pmf(i);
        if (q <= observed * (1.0 + 1e-9)) total += q;
    }
    return std::min(1.0, total);
}

}  // namespace

TEST_CASE("suite files resolve paths and reject malformed input")
{
    const TaskSuite s = parse_task_suite(R"({
        "scene": "scenes/a.json",
        "tasks": [
            {"label": "A", "task": "Open the oven", "teach": ["open the oven"], "noise": 0.0, "miss": 0.1,
             "seed": 3, "trials": 5, "choices": {"bottle": "bottle2"}, "dmp_library": "lib",
             "faults": {"skill_key": {"open_oven_handle": "x"}, "empty_subtask": true}},
            {"task": "Clean the table", "scene": "/abs/b.json"}
        ]})",
                                         "/base");
    REQUIRE(s.tasks.size() == 2);
    const TrialSpec& a = s.tasks[0];
    CHECK(a.label == "A");
    CHECK(a.scene_file == std::filesystem::path("/base/scenes/a.json"));
    CHECK(a.noise_half_width == 0.0);
    CHECK(a.miss_probability == 0.1);
    CHECK(a.seed == 3u);
    CHECK(a.trials == 5);
    CHECK(a.teach == std::vector<std::string>{"open the oven"});
    CHECK(a.choices.at("bottle") == "bottle2");
    CHECK(*a.dmp_library == std::filesystem::path("/base/lib"));
    CHECK(a.faults.skill_key_faults.at("open_oven_handle") == "x");
    CHECK(a.faults.empty_subtask);
    CHECK(s.tasks[1].label == "Clean the table");
    CHECK(s.tasks[1].scene_file == std::filesystem::path("/abs/b.json"));

    CHECK_THROWS_AS(parse_task_suite("{"), Error);
    CHECK_THROWS_AS(parse_task_suite(R"({"scene": "a", "tasks": []})"), Error);
    CHECK_THROWS_AS(parse_task_suite(R"({"tasks": [{"task": "x"}]})"), Error);
    CHECK_THROWS_AS(parse_task_suite(R"({"scene": "a", "tasks": [{"label": "x"}]})"), Error);
    CHECK_THROWS_AS(load_task_suite(HRC_SOURCE_DIR "/tasks/missing.json"), Error);
}

TEST_CASE("23-trial table: success never exceeds feasibility and reports are reproducible")
{
    const TaskSuite suite = table("table1.json");
    ExperimentConfig config;
    const MetricsReport noisy = run_experiment(suite, config, prompts());
    REQUIRE(noisy.rows.size() == 7);
    for (const auto& m : noisy.rows) {
        CHECK(m.trials == 23);
        CHECK(m.success <= m.feasible);
        CHECK(m.feasible <= m.executable);
    }
    CHECK(noisy.total.trials == 7 * 23);
    CHECK(noisy.records.size() == 7u * 23u);

    const std::string csv = emit_report(noisy, "csv");
    const auto rows = lines(csv);
    REQUIRE(rows.size() == 9);
    CHECK(rows[0] == "task,trials,executability,feasibility,success_rate");
    CHECK(rows[8].rfind("Total,161,", 0) == 0);

    ExperimentConfig serial = config;
    serial.workers = 1;
    CHECK(emit_report(run_experiment(suite, serial, prompts()), "csv") == csv);
    CHECK(emit_trials_csv(run_experiment(suite, config, prompts())) == emit_trials_csv(noisy));

    ExperimentConfig clean = config;
    clean.detector.noise_half_width = 0.0;
    const MetricsReport exact = run_experiment(suite, clean, prompts());
    for (const auto& m : exact.rows) {
        CHECK_MESSAGE(m.success == m.feasible, m.label);
    }
}

TEST_CASE("emitting rejects empty reports and unknown formats")
{
    MetricsReport empty;
    CHECK_THROWS_AS(emit_report(empty, "csv"), Error);
    MetricsReport one;
    one.rows.push_back({"A", 4, 4, 3, 1});
    one.total = one.rows[0];
    one.total.label = "Total";
    CHECK_THROWS_AS(emit_report(one, "xml"), Error);
    CHECK(lines(emit_report(one, "csv"))[1] == "A,4,100.0%,75.0%,25.0%");
    const std::string text = emit_report(one, "text");
    CHECK(text.find("Total") != std::string::npos);
    CHECK(text.find("75.0%") != std::string::npos);
}

TEST_CASE("a bad scene or trial count aborts before any trial")
{
    TaskSuite suite = table("table1.json");
    suite.tasks[3].scene_file = HRC_SOURCE_DIR "/scenes/nowhere.json";
    CHECK_THROWS_AS(run_experiment(suite, {}, prompts()), Error);
    ExperimentConfig zero;
    zero.trials = 0;
    CHECK_THROWS_AS(run_experiment(table("table1.json"), zero, prompts()), Error);
}

TEST_CASE("empty library against one demonstration")
{
    const MetricsReport r = run_experiment(table("table2.json"), {}, prompts());
    for (const char* label : {"Open oven", "Open cabinet"}) {
        const auto& m = row(r, label);
        CHECK(m.trials == 1);
        CHECK(m.executable == 1);
        CHECK(m.feasible == 0);
        CHECK(m.success == 0);
    }
    for (const char* label : {"Open oven (HRC)", "Open cabinet (HRC)"}) {
        const auto& m = row(r, label);
        CHECK(m.trials == 23);
        CHECK(m.feasible == 23);
    }
}

TEST_CASE("fault injection lowers the matching metric")
{
    TaskSuite suite = table("table1.json");
    TrialSpec roast = suite.tasks[6];
    TrialSpec wrong_key = roast;
    wrong_key.label = "wrong key";
    wrong_key.faults.skill_key_faults["open_oven_handle"] = "close_oven_handle";
    TrialSpec hollow = suite.tasks[0];
    hollow.label = "empty subtask";
    hollow.faults.empty_subtask = true;
    ExperimentConfig config;
    config.trials = 5;
    const MetricsReport r = run_experiment({{roast, wrong_key, hollow}}, config, prompts());
    CHECK(row(r, roast.label).feasible == 5);
    CHECK(row(r, "wrong key").executable == 5);
    CHECK(row(r, "wrong key").feasible == 0);
    CHECK(row(r, "empty subtask").executable == 0);
    for (const auto& rec : r.records) {
        if (rec.label == "wrong key") CHECK(rec.feasibility_reason.find("skill-miss") != std::string::npos);
    }
}

TEST_CASE("chain success is consistent with the product of independent step rates")
{
    const std::filesystem::path scene = HRC_SOURCE_DIR "/tests/data/chain.json";
    const char* ord[] = {"first", "second", "third"};
    TaskSuite suite;
    std::string chain;
    for (int i = 0; i < 3; ++i) {
        TrialSpec s;
        s.label = ord[i];
        s.task_text = std::string("Put the ") + ord[i] + " apple on the " + ord[i] + " plate";
        s.scene_file = scene;
        s.trials = 400;
        chain += (i ? ", then put the " : "Put the ") + std::string(ord[i]) + " apple on the " + ord[i] + " plate";
        suite.tasks.push_back(s);
    }
    TrialSpec c;
    c.label = "chain";
    c.task_text = chain;
    c.scene_file = scene;
    c.trials = 300;
    c.seed = 1234;
    suite.tasks.push_back(c);

    const MetricsReport r = run_experiment(suite, {}, prompts());
    double product = 1.0;
    for (int i = 0; i < 3; ++i) {
        const auto& m = row(r, ord[i]);
        CHECK(m.feasible == m.trials);
        CHECK(m.success < m.trials);
        product *= m.success_rate();
    }
    const auto& m = row(r, "chain");
    CHECK(m.feasible == m.trials);
    const double pv = binomial_p_value(m.success, m.trials, product);
    MESSAGE("chain " << m.success << "/" << m.trials << " vs product of step rates " << product << ", p = " << pv);
    CHECK(pv >= 0.05);
}

TEST_CASE("perception discrepancy study")
{
    const Scene scene = load_scene(HRC_SOURCE_DIR "/scenes/kitchen.json");
    const DiscrepancyStats s = perception_discrepancy_study(scene, {0.011, 0.12, 0.0}, 5.0, 7);
    CHECK(s.count > 0);
    CHECK(s.median >= 0.010);
    CHECK(s.median <= 0.012);
    CHECK(s.min <= s.median);
    CHECK(s.max >= s.median);
}
