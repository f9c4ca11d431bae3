// Acceptance suite: one line per criterion, each backed by doctest cases in
// the unit-test binaries, with a wall-clock budget.

#include <array>
#include <chrono>
#include <cstdio>
#include <iostream>
#include <regex>
#include <string>
#include <vector>

namespace {

struct Suite {
    std::string binary;
    std::vector<std::string> cases;
};

struct Criterion {
    std::string name;
    std::vector<Suite> suites;
    double budget_s;
};

struct Run {
    bool ok = false;
    std::string detail;
};

Run run_suite(const Suite& s)
{
    std::string filter;
    for (const auto& c : s.cases) {
        filter += (filter.empty() ? "" : ",") + c;
    }
    const std::string cmd = std::string(HRC_TEST_DIR) + "/" + s.binary + " --no-colors=true --test-case=\"" + filter +
                            "\" 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) {
        return {false, "cannot start " + s.binary};
    }
    std::string out;
    std::array<char, 4096> buf{};
    while (fgets(buf.data(), buf.size(), pipe)) {
        out += buf.data();
    }
    const int status = pclose(pipe);

    std::smatch m;
    static const std::regex summary(R"(test cases:\s*(\d+)\s*\|\s*(\d+) passed\s*\|\s*(\d+) failed)");
    if (!std::regex_search(out, m, summary)) {
        return {false, s.binary + ": no summary"};
    }
    const auto ran = std::stoul(m[1]);
    const auto failed = std::stoul(m[3]);
    if (status != 0 || failed || ran != s.cases.size()) {
        return {false, s.binary + ": " + std::to_string(ran) + " run, " + std::to_string(failed) + " failed of " +
                           std::to_string(s.cases.size())};
    }
    return {true, {}};
}

}  // namespace

int main()
{
    const std::vector<Criterion> criteria{
        {"empty library vs one demonstration (oven and cabinet)",
         {{"test_harness", {"empty library against one demonstration"}}},
         30.0},
        {"one-shot teaching through the session API",
         {{"test_session", {"one-shot: a failed request succeeds on resubmission after one demonstration"}}},
         30.0},
        {"DMP suite (convergence, fit-reproduce RMSE, normalization, fixed point)",
         {{"test_dmp",
           {"random models reach the goal", "fit-reproduce RMSE stays within 5% of the demo range",
            "min-jerk fit reproduces within 0.02 and agrees with a dense-basis refit",
            "constant weights normalize to c * x", "zero weights with y0 = g stay at the fixed point"}}},
         10.0},
        {"geometry suite (round trips, labeling oracle, triangle oracle, no objects)",
         {{"test_geometry",
           {"projection round trip", "rigid transform matches a matrix-multiply oracle and inverts",
            "labeling equals the brute-force grouping on random scenes",
            "triangle membership equals the barycentric oracle", "obstacle triangle examples"}}},
         60.0},
        {"planner goldens",
         {{"test_planner",
           {"golden: put the apple on the plate", "golden: open the microwave", "golden: warm-up decomposition",
            "golden: clean table with one cup and two bottles", "golden: roast decomposition"}}},
         60.0},
        {"harness identities over 23 trials and perception median",
         {{"test_harness",
           {"23-trial table: success never exceeds feasibility and reports are reproducible",
            "perception discrepancy study"}}},
         120.0},
        {"session transition closure and pause atomicity",
         {{"test_session",
           {"every command sequence up to seven long stays on declared transitions",
            "pausing between motions matches an uninterrupted run"}}},
         120.0},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Run result{true, {}};
        for (const auto& s : c.suites) {
            if (Run r = run_suite(s); !r.ok) {
                result = r;
                break;
            }
        }
        const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (result.ok && elapsed > c.budget_s) {
            result = {false, "over budget of " + std::to_string(c.budget_s) + " s"};
        }
        char timing[64];
        std::snprintf(timing, sizeof timing, "%.2f s", elapsed);
        std::cout << (result.ok ? "PASS" : "FAIL") << "  " << c.name << "  (" << timing << ")"
                  << (result.detail.empty() ? "" : "  " + result.detail) << '\n';
        failures += !result.ok;
    }
    return failures ? 1 : 0;
}
