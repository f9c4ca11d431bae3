#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hrc/demos.hpp"
#include "hrc/server.hpp"

#include <httplib.h>
#include <json.hpp>

#include <sstream>

using namespace hrc;
using nlohmann::json;

namespace {

struct Live {
    std::shared_ptr<DmpLibrary> library = std::make_shared<DmpLibrary>();
    Session session;
    SessionServer server;
    httplib::Client client;

    explicit Live(bool auto_run)
        : session(load_scene(HRC_SOURCE_DIR "/scenes/kitchen.json"), library, std::make_shared<RuleBackend>(),
                  PromptContext::load(HRC_SOURCE_DIR "/assets/prompts/v1"), config()),
          server(session, options(auto_run)),
          client("127.0.0.1", server.start())
    {
        client.set_read_timeout(10, 0);
    }

    static SessionConfig config()
    {
        SessionConfig c;
        c.detector = {0.0, 0.0, 0.0};
        return c;
    }
    static ServerOptions options(bool auto_run)
    {
        ServerOptions o;
        o.port = 0;
        o.step_delay = std::chrono::milliseconds(0);
        o.auto_run = auto_run;
        return o;
    }

    std::pair<int, json> post(const std::string& path, const json& body = json::object())
    {
        auto r = client.Post(path, body.dump(), "application/json");
        REQUIRE(r);
        return {r->status, json::parse(r->body)};
    }
    json get(const std::string& path)
    {
        auto r = client.Get(path);
        REQUIRE(r);
        REQUIRE(r->status == 200);
        return json::parse(r->body);
    }
    std::vector<json> frames(std::size_t since = 0)
    {
        auto r = client.Get("/stream?follow=0&since=" + std::to_string(since));
        REQUIRE(r);
        CHECK(r->get_header_value("Content-Type") == "application/x-ndjson");
        std::vector<json> out;
        std::istringstream in(r->body);
        for (std::string line; std::getline(in, line);) out.push_back(json::parse(line));
        return out;
    }
};

}  // namespace

TEST_CASE("status codes")
{
    Live live(false);
    CHECK(live.get("/state")["phase"] == "idle");
    CHECK(live.get("/plan").is_null());

    auto [s1, b1] = live.post("/pause");
    CHECK(s1 == 409);
    CHECK(b1["kind"] == "illegal_transition");
    CHECK(b1["phase"] == "idle");

    auto r = live.client.Post("/task", "{not json", "application/json");
    REQUIRE(r);
    CHECK(r->status == 400);
    auto [s2, b2] = live.post("/task", {{"words", "x"}});
    CHECK(s2 == 400);
    auto [s3, b3] = live.post("/task", {{"text", "Sing a song"}});
    CHECK(s3 == 422);
    CHECK(b3["ok"] == false);
    CHECK(b3["state"]["last_task"]["status"] == "not_executable");
    CHECK(live.client.Get("/nowhere")->status == 404);
}

TEST_CASE("a task stepped over HTTP succeeds and streams numbered frames")
{
    Live live(false);
    auto [status, body] = live.post("/task", {{"text", "Put the apple on the plate"}});
    CHECK(status == 200);
    CHECK(body["state"]["phase"] == "executing");
    const json plan = live.get("/plan");
    CHECK(plan["subtasks"].size() >= 1);
    CHECK(plan["dsl"].get<std::string>().find("mf: move_to_position(apple)") != std::string::npos);
    for (int i = 0; i < 100 && live.get("/state")["phase"] == "executing"; ++i) {
        CHECK(live.post("/step").first == 200);
    }
    const json state = live.get("/state");
    CHECK(state["phase"] == "idle");
    CHECK(state["last_task"]["status"] == "success");
    CHECK(live.get("/scene")["robot_state"]["held"].is_null());

    const auto frames = live.frames();
    REQUIRE(frames.size() > 5);
    std::set<std::string> types;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        CHECK(frames[i]["seq"] == i);
        types.insert(frames[i]["type"]);
    }
    CHECK(types.count("state"));
    CHECK(types.count("log"));
    CHECK(live.frames(frames.size()).empty());
}

TEST_CASE("demonstration uploaded as NDJSON frames becomes a skill")
{
    Live live(false);
    live.post("/task", {{"text", "Open the oven"}});
    const json subtasks = live.get("/plan")["subtasks"];
    while (subtasks[live.get("/state")["cursor"]["subtask"].get<std::size_t>()]["description"] != "open the oven") {
        REQUIRE(live.post("/step").first == 200);
    }
    CHECK(live.post("/pause").first == 200);
    auto [bs, begin] = live.post("/demo/begin");
    CHECK(bs == 200);
    const std::string id = begin["recording_id"];

    std::ostringstream nd;
    for (const auto& s : scripted_demo("open the oven", live.session.simulator().scene())) {
        nd << json{{"type", "demo_sample"}, {"t", s.t}, {"x", s.p.x()}, {"y", s.p.y()}, {"z", s.p.z()}, {"aperture", s.aperture}}
                  .dump()
           << '\n';
    }
    nd << "{\"type\": \"wave\"}\n";
    nd << "garbage\n";
    auto up = live.client.Post("/stream", nd.str(), "application/x-ndjson");
    REQUIRE(up);
    CHECK(up->status == 200);
    const json upload = json::parse(up->body);
    CHECK(upload["accepted"].get<int>() > 10);
    CHECK(upload["rejected"].size() == 2);

    auto [es, end] = live.post("/demo/end");
    CHECK(es == 200);
    CHECK(end["recording_id"] == id);
    CHECK(live.post("/resume").first == 409);
    auto [cs, commit] = live.post("/skill/commit", {{"recording_id", id}});
    CHECK(cs == 200);
    CHECK(commit["message"] == "open_oven_handle");
    const json lib = live.get("/library");
    CHECK(lib["skills"][0]["name"] == "open_oven_handle");
    CHECK(lib["entries"].size() >= 2);
    auto [again, again_body] = live.post("/skill/commit", {{"recording_id", id}});
    CHECK(again == 422);

    CHECK(live.post("/resume").first == 200);
    for (int i = 0; i < 100 && live.get("/state")["phase"] == "executing"; ++i) live.post("/step");
    CHECK(live.get("/state")["last_task"]["status"] == "success");
}

TEST_CASE("auto-run executes and a follower stream sees it finish")
{
    Live live(true);
    std::vector<json> seen;
    std::string buffer;
    std::thread follower([&] {
        httplib::Client c("127.0.0.1", live.server.port());
        c.set_read_timeout(10, 0);
        c.Get("/stream?since=0", [&](const char* data, std::size_t n) {
            buffer.append(data, n);
            for (std::size_t nl; (nl = buffer.find('\n')) != std::string::npos;) {
                seen.push_back(json::parse(buffer.substr(0, nl)));
                buffer.erase(0, nl + 1);
                const json& f = seen.back();
                if (f["type"] == "state" && f.contains("last_task") && f["phase"] == "idle") return false;
            }
            return true;
        });
    });
    CHECK(live.post("/task", {{"text", "Put the apple on the plate"}}).first == 200);
    follower.join();
    REQUIRE_FALSE(seen.empty());
    CHECK(seen.back()["last_task"]["status"] == "success");
    for (std::size_t i = 1; i < seen.size(); ++i) CHECK(seen[i]["seq"] == seen[i - 1]["seq"].get<std::size_t>() + 1);
    live.server.stop();
}
