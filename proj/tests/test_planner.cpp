#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hrc/demos.hpp"
#include "hrc/errors.hpp"
#include "hrc/planner.hpp"

#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <cstdlib>
#include <random>
#include <thread>

using namespace hrc;

namespace {

Scene kitchen() { return load_scene(HRC_SOURCE_DIR "/scenes/kitchen.json"); }

PromptContext prompts() { return PromptContext::load(HRC_SOURCE_DIR "/assets/prompts/v1"); }

std::vector<LabeledObject> truth(const Scene& scene)
{
    std::mt19937_64 rng(0);
    return localize(SyntheticDetector({0.0, 0.0, 0.0}).detect(scene, rng), scene);
}

std::vector<std::string> motions(const SubTask& st)
{
    std::vector<std::string> out;
    for (const auto& m : st.motions) out.push_back(m.str());
    return out;
}

std::vector<std::string> descriptions(const Plan& p)
{
    std::vector<std::string> out;
    for (const auto& st : p.subtasks) out.push_back(st.description);
    return out;
}

struct Fixture {
    Scene scene = kitchen();
    WorldModel world{truth(scene), &scene};
    Planner planner{std::make_shared<RuleBackend>(), prompts()};
    DmpLibrary library;

    PlanResult plan(const std::string& task, const std::map<std::string, std::string>& choices = {})
    {
        world.scene = &scene;
        return planner.plan(task, world, library, choices);
    }
};

const std::vector<std::string> kPut{"move_to_position(init)", "move_to_position(apple)",
                                    "gripper_control(close_low)", "move_to_position(init)",
                                    "move_to_position(plate)", "gripper_control(open)", "move_to_position(init)"};
const std::vector<std::string> kOpenMicrowave{"move_to_position(microwave_handle)", "gripper_control(close)",
                                              "base_cycle_move(radius_door2axis)", "gripper_control(open)"};

}  // namespace

TEST_CASE("golden: put the apple on the plate")
{
    Fixture f;
    const auto r = f.plan("Put the apple on the plate");
    REQUIRE(r.status == PlanStatus::ok);
    REQUIRE(r.plan.subtasks.size() == 1);
    CHECK(motions(r.plan.subtasks[0]) == kPut);
    CHECK(r.plan.horizon == Horizon::short_horizon);
}

TEST_CASE("golden: open the microwave")
{
    Fixture f;
    const auto r = f.plan("Open the microwave");
    REQUIRE(r.status == PlanStatus::ok);
    CHECK(motions(r.plan.subtasks.at(0)) == kOpenMicrowave);
    CHECK(f.planner.classify("Open the microwave", f.world) == Horizon::short_horizon);
}

TEST_CASE("golden: warm-up decomposition")
{
    Fixture f;
    const std::vector<std::string> expect{"open the microwave", "put the apple into the microwave",
                                          "close the microwave", "power on the microwave"};
    CHECK(f.planner.decompose("Warm up the apple", f.world) == expect);
    CHECK(f.planner.classify("Warm up the apple", f.world) == Horizon::long_horizon);
    const auto r = f.plan("Warm up the apple");
    REQUIRE(r.status == PlanStatus::ok);
    CHECK(motions(r.plan.subtasks[2]) == std::vector<std::string>{"close_move(microwave)"});
    CHECK(motions(r.plan.subtasks[3]) ==
          std::vector<std::string>{"move_to_position(microwave_knob)", "rotate_waist(90)"});
}

TEST_CASE("golden: clean table with one cup and two bottles")
{
    Fixture f;
    const std::vector<std::string> expect{"put the cup in the storage", "put the first bottle in the storage",
                                          "put the second bottle in the storage"};
    CHECK(f.planner.decompose("Clean the table", f.world) == expect);
    const auto r = f.plan("Clean the table");
    REQUIRE(r.status == PlanStatus::ok);
    CHECK(descriptions(r.plan) == expect);
    CHECK(r.plan.subtasks[1].motions[1].str() == "move_to_position(bottle1)");
    CHECK(r.plan.subtasks[2].motions[1].str() == "move_to_position(bottle2)");
}

TEST_CASE("golden: roast decomposition")
{
    Fixture f;
    const std::vector<std::string> expect{"open the oven", "put the apple into oven", "close the oven",
                                          "power on the oven"};
    CHECK(f.planner.decompose("Roast the apple", f.world) == expect);
}

TEST_CASE("stored skills replace basic motions")
{
    Fixture f;
    const auto basic = f.plan("Open the oven");
    REQUIRE(basic.status == PlanStatus::ok);
    CHECK(motions(basic.plan.subtasks[0]) ==
          std::vector<std::string>{"move_to_position(oven_handle)", "gripper_control(close)",
                                   "base_cycle_move(radius_door2axis)", "gripper_control(open)"});

    const auto taught = teach_skill(f.planner.generate("open the oven", f.world).at(0),
                                    scripted_demo("open the oven", f.scene), basic.plan.bound_symbols.at("oven_handle"));
    f.library.commit(taught.skill, taught.models);
    const auto r = f.plan("Open the oven");
    REQUIRE(r.status == PlanStatus::ok);
    CHECK(motions(r.plan.subtasks[0]) ==
          std::vector<std::string>{"dmp_publish(open_oven_handle)", "dmp_publish(open_oven_handle_ex)"});
    CHECK(r.plan.subtasks[0].skill_name == "open_oven_handle");
    CHECK(r.plan.subtasks[0].anchor == "oven_handle");
}

TEST_CASE("skill names")
{
    auto name = [](const std::string& d, std::vector<MotionFunction> m) { return skill_name(d, m); };
    CHECK(name("open the oven", {{MotionKind::move_to_position, "oven_handle"}, {MotionKind::gripper_control, "close"}}) ==
          "open_oven_handle");
    CHECK(name("close the oven", {{MotionKind::close_move, "oven"}}) == "close_oven");
    CHECK(name("open the cabinet", {{MotionKind::move_to_position, "cabinet"}}) == "open_cabinet");
    CHECK(name("put the apple on the plate", {{MotionKind::move_to_position, "init"},
                                              {MotionKind::move_to_position, "apple"}}) == "put_apple");
    CHECK_THROWS_AS(name("open the oven", {{MotionKind::move_to_position, "init"}}), Error);
}

TEST_CASE("duplicate class names ask the clarification question")
{
    Fixture f;
    const auto r = f.plan("Pick the bottle");
    CHECK(r.status == PlanStatus::clarification);
    CHECK(r.message == "There are multiple objects share the same name, which one do you prefer?");
    CHECK(r.ambiguous_name == "bottle");
    CHECK(resolve_choice("the right one", "bottle", f.world) == "bottle2");
    CHECK(resolve_choice("bottle1", "bottle", f.world) == "bottle1");
    CHECK(resolve_choice("second", "bottle", f.world) == "bottle2");
    CHECK_FALSE(resolve_choice("the purple one", "bottle", f.world));

    const auto chosen = f.plan("Pick the bottle", {{"bottle", "bottle2"}});
    REQUIRE(chosen.status == PlanStatus::ok);
    CHECK(chosen.plan.symbol_labels.at("bottle") == "bottle2");
}

TEST_CASE("ordinals and sides pick an instance")
{
    Fixture f;
    const auto r = f.plan("Pick the second bottle");
    REQUIRE(r.status == PlanStatus::ok);
    CHECK(r.plan.subtasks.back().motions[1].str() == "move_to_position(bottle2)");
    const auto l = f.plan("Pick the left bottle");
    REQUIRE(l.status == PlanStatus::ok);
    CHECK(l.plan.subtasks.back().motions[1].str() == "move_to_position(bottle1)");
}

TEST_CASE("paraphrases map onto the canonical verbs")
{
    CHECK(normalize_task("Heat up the apple!") == "warm up the apple");
    CHECK(normalize_task("Switch on the oven") == "power on the oven");
    CHECK(normalize_task("Shut the microwave.") == "close the microwave");
}

TEST_CASE("unknown or empty requests")
{
    Fixture f;
    const auto r = f.plan("Dance with the fridge");
    CHECK(r.status == PlanStatus::parse_error);
    CHECK_FALSE(r.executable());
    CHECK_THROWS_AS(f.plan("   "), Error);
    CHECK(f.plan("Open the fridge").status == PlanStatus::unresolved);
}

TEST_CASE("unknown objects do not bind")
{
    Fixture f;
    f.world.objects.erase(std::remove_if(f.world.objects.begin(), f.world.objects.end(),
                                         [](const LabeledObject& o) { return o.name == "plate"; }),
                          f.world.objects.end());
    const auto r = f.plan("Put the apple on the plate");
    CHECK(r.status == PlanStatus::unresolved);
    CHECK(r.executable());
}

TEST_CASE("sequenced clauses become consecutive sub-tasks")
{
    Fixture f;
    CHECK(split_clauses("Put the apple on the plate, then open the microwave") ==
          std::vector<std::string>{"put the apple on the plate", "open the microwave"});
    CHECK(split_clauses("open the oven and then close the oven") ==
          std::vector<std::string>{"open the oven", "close the oven"});
    const auto r = f.plan("Put the apple on the plate, then open the microwave");
    REQUIRE(r.status == PlanStatus::ok);
    CHECK(descriptions(r.plan) == std::vector<std::string>{"put the apple on the plate", "open the microwave"});
    CHECK(r.plan.horizon == Horizon::long_horizon);
}

TEST_CASE("an object between the robot and the target is moved away first")
{
    auto j = nlohmann::json::parse(scene_to_json(kitchen()));
    j["objects"].push_back({{"name", "bottle"},
                            {"position", {0.35, -0.27, 0.79}},
                            {"size", {0.06, 0.06, 0.18}},
                            {"surface", "table"}});
    Fixture f;
    f.scene = parse_scene(j.dump());
    f.world = WorldModel{truth(f.scene), &f.scene};
    const auto r = f.plan("Put the cup in the storage");
    REQUIRE(r.status == PlanStatus::ok);
    REQUIRE(r.plan.subtasks.size() == 2);
    CHECK(r.plan.subtasks[0].description == "move the bottle3 to the clearance");
    CHECK(r.plan.subtasks[0].motions[4].str() == "move_to_position(clearance)");

    Planner no_removal(std::make_shared<RuleBackend>(), prompts(), PlannerOptions{false, {}});
    CHECK(no_removal.plan("Put the cup in the storage", f.world, f.library).plan.subtasks.size() == 1);
}

TEST_CASE("raw filter runs before parsing")
{
    Fixture f;
    PlannerOptions o;
    o.raw_filter = [](const std::string&) { return std::string("subtask: open the oven\n"); };
    Planner broken(std::make_shared<RuleBackend>(), prompts(), o);
    const auto r = broken.plan("Open the oven", f.world, f.library);
    CHECK(r.status == PlanStatus::parse_error);
}

TEST_CASE("prompt rendering lists the scene")
{
    Fixture f;
    PromptContext c = prompts();
    c.scene_inventory = f.world.inventory();
    const std::string text = c.render();
    CHECK(text.find("bottle x2") != std::string::npos);
    CHECK(text.find(kClarificationQuestion) != std::string::npos);
}

TEST_CASE("remote backend against a local chat-completion server")
{
    httplib::Server server;
    std::atomic<int> calls{0};
    std::string seen_auth;
    nlohmann::json seen_body;
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        if (calls++ == 0) {
            res.status = 503;
            return;
        }
        seen_auth = req.get_header_value("Authorization");
        seen_body = nlohmann::json::parse(req.body);
        const std::string dsl = "subtask: open the microwave\nmf: move_to_position(microwave_handle)\n"
                                "mf: gripper_control(close)\nmf: base_cycle_move(radius_door2axis)\n"
                                "mf: gripper_control(open)\n";
        res.set_content(nlohmann::json{{"choices", {{{"message", {{"role", "assistant"}, {"content", dsl}}}}}}}.dump(),
                        "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread t([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    ::setenv("HRC_TEST_KEY", "secret", 1);
    RemoteConfig cfg;
    cfg.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
    cfg.api_key_env = "HRC_TEST_KEY";
    cfg.timeout_s = 5;
    Fixture f;
    Planner remote(std::make_shared<RemoteBackend>(cfg), prompts());
    const auto r = remote.plan("Open the microwave", f.world, f.library);
    CHECK(r.status == PlanStatus::ok);
    CHECK(motions(r.plan.subtasks.at(0)) == kOpenMicrowave);
    CHECK(calls == 2);
    CHECK(seen_auth == "Bearer secret");
    CHECK(seen_body["temperature"] == 0);
    CHECK(seen_body["messages"][1]["content"] == "Open the microwave");

    RemoteConfig dead = cfg;
    dead.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/missing";
    dead.max_retries = 1;
    RemoteBackend failing(dead);
    try {
        failing.generate(prompts(), "Open the microwave");
        FAIL("expected a transport error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::transport);
    }
    server.stop();
    t.join();
}
