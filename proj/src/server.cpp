#include "hrc/server.hpp"

#include "hrc/errors.hpp"

#include <httplib.h>
#include <json.hpp>

#include <sstream>

namespace hrc {

using nlohmann::json;

namespace {

void send(httplib::Response& res, int status, const json& body)
{
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

int status_for(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::illegal_transition:
    case ErrorKind::library: return 409;
    case ErrorKind::invalid_input:
    case ErrorKind::plan_parse:
    case ErrorKind::unresolved_symbol:
    case ErrorKind::naming: return 400;
    default: return 500;
    }
}

json parse_body(const httplib::Request& req)
{
    if (req.body.empty()) {
        return json::object();
    }
    try {
        return json::parse(req.body);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::invalid_input, std::string("request body is not JSON: ") + e.what());
    }
}

}  // namespace

SessionServer::SessionServer(Session& session, ServerOptions options)
    : session_(session), options_(std::move(options)), http_(std::make_unique<httplib::Server>())
{
    routes();
}

SessionServer::~SessionServer() { stop(); }

double SessionServer::now() const
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_).count();
}

void SessionServer::routes()
{
    // Runs `fn` under the session lock and turns library errors into HTTP codes.
    auto command = [this](auto fn) {
        return [this, fn](const httplib::Request& req, httplib::Response& res) {
            try {
                std::lock_guard lock(mutex_);
                json out = fn(parse_body(req));
                out["state"] = session_.state_json();
                send(res, out.value("ok", true) ? 200 : 422, out);
            } catch (const Error& e) {
                std::lock_guard lock(mutex_);
                send(res, status_for(e.kind()),
                     {{"ok", false}, {"error", e.what()}, {"kind", to_string(e.kind())}, {"phase", to_string(session_.phase())}});
            } catch (const json::exception& e) {
                send(res, 400, {{"ok", false}, {"error", e.what()}, {"kind", "invalid_input"}});
            }
            changed_.notify_all();
        };
    };
    auto reply = [](const Reply& r) { return json{{"ok", r.ok}, {"message", r.message}}; };

    http_->Post("/task", command([this, reply](const json& b) { return reply(session_.submit(b.at("text").get<std::string>())); }));
    http_->Post("/clarify",
                command([this, reply](const json& b) { return reply(session_.clarify(b.at("answer").get<std::string>())); }));
    http_->Post("/pause", command([this](const json&) { session_.pause(); return json{{"ok", true}}; }));
    http_->Post("/resume", command([this](const json&) { session_.resume(); return json{{"ok", true}}; }));
    http_->Post("/cancel", command([this](const json&) { session_.cancel(); return json{{"ok", true}}; }));
    http_->Post("/reset", command([this](const json&) { session_.reset(); return json{{"ok", true}}; }));
    http_->Post("/step", command([this](const json&) { session_.step(); return json{{"ok", true}}; }));
    http_->Post("/demo/begin", command([this](const json&) {
        session_.begin_demo();
        return json{{"ok", true}, {"recording_id", session_.recording()->id}};
    }));
    http_->Post("/demo/end", command([this](const json&) {
        const Reply r = session_.end_demo();
        return json{{"ok", r.ok}, {"message", r.message}, {"recording_id", r.ok ? json(r.message) : json(nullptr)}};
    }));
    http_->Post("/skill/commit", command([this, reply](const json& b) {
        std::optional<std::string> name;
        if (b.contains("name") && !b["name"].is_null()) {
            name = b["name"].get<std::string>();
        }
        return reply(session_.commit(b.at("recording_id").get<std::string>(), name, b.value("replace", false)));
    }));

    auto query = [this](auto fn) {
        return [this, fn](const httplib::Request&, httplib::Response& res) {
            std::lock_guard lock(mutex_);
            send(res, 200, fn());
        };
    };
    http_->Get("/state", query([this] { return session_.state_json(); }));
    http_->Get("/plan", query([this] { return session_.plan_json(); }));
    http_->Get("/scene", query([this] { return session_.scene_json(); }));
    http_->Get("/library", query([this] { return session_.library_json(); }));

    http_->Get("/stream", [this](const httplib::Request& req, httplib::Response& res) {
        auto next = std::make_shared<std::size_t>(req.has_param("since") ? std::stoul(req.get_param_value("since")) : 0);
        const bool follow = !req.has_param("follow") || req.get_param_value("follow") != "0";
        res.set_chunked_content_provider("application/x-ndjson", [this, next, follow](std::size_t, httplib::DataSink& sink) {
            std::vector<json> frames;
            {
                std::unique_lock lock(mutex_);
                if (follow && session_.frame_count() <= *next) {
                    changed_.wait_for(lock, std::chrono::milliseconds(200));
                }
                frames = session_.frames_since(*next);
                *next = session_.frame_count();
            }
            for (const auto& f : frames) {
                const std::string line = f.dump() + "\n";
                if (!sink.write(line.data(), line.size())) {
                    return false;
                }
            }
            if (!follow || !running_) {
                sink.done();
                return true;
            }
            return sink.is_writable();
        });
    });

    http_->Post("/stream", [this](const httplib::Request& req, httplib::Response& res) {
        std::istringstream in(req.body);
        int accepted = 0;
        json rejected = json::array();
        int line_no = 0;
        for (std::string line; std::getline(in, line);) {
            ++line_no;
            if (line.find_first_not_of(" \t\r") == std::string::npos) {
                continue;
            }
            try {
                const json f = json::parse(line);
                if (f.at("type").get<std::string>() != "demo_sample") {
                    throw Error(ErrorKind::invalid_input, "unknown frame type '" + f["type"].get<std::string>() + "'");
                }
                const DemoSample s{f.at("t").get<double>(),
                                   Vec3(f.at("x").get<double>(), f.at("y").get<double>(), f.at("z").get<double>()),
                                   f.at("aperture").get<double>()};
                std::lock_guard lock(mutex_);
                const Reply r = session_.demo_sample(s, now());
                if (r.ok) {
                    ++accepted;
                } else {
                    rejected.push_back({{"line", line_no}, {"reason", r.message}});
                }
            } catch (const std::exception& e) {
                rejected.push_back({{"line", line_no}, {"reason", e.what()}});
            }
        }
        changed_.notify_all();
        std::lock_guard lock(mutex_);
        send(res, 200, {{"accepted", accepted}, {"rejected", rejected}, {"state", session_.state_json()}});
    });
}

int SessionServer::start()
{
    if (running_) {
        return port_;
    }
    if (options_.port == 0) {
        port_ = http_->bind_to_any_port(options_.host);
    } else {
        port_ = http_->bind_to_port(options_.host, options_.port) ? options_.port : -1;
    }
    if (port_ <= 0) {
        throw Error(ErrorKind::io, "cannot bind " + options_.host + ":" + std::to_string(options_.port));
    }
    running_ = true;
    listen_thread_ = std::thread([this] { http_->listen_after_bind(); });
    runner_thread_ = std::thread([this] { runner(); });
    http_->wait_until_ready();
    return port_;
}

void SessionServer::runner()
{
    while (running_) {
        bool stepped = false;
        {
            std::unique_lock lock(mutex_);
            if (session_.check_stream_gap(now())) {
                changed_.notify_all();
            }
            if (options_.auto_run && session_.phase() == Phase::executing) {
                try {
                    session_.step();
                } catch (const std::exception&) {
                }
                stepped = true;
            } else {
                changed_.wait_for(lock, std::chrono::milliseconds(50));
            }
        }
        if (stepped) {
            changed_.notify_all();
            std::this_thread::sleep_for(options_.step_delay);
        }
    }
}

void SessionServer::stop()
{
    if (!running_.exchange(false)) {
        return;
    }
    changed_.notify_all();
    http_->stop();
    if (listen_thread_.joinable()) {
        listen_thread_.join();
    }
    if (runner_thread_.joinable()) {
        runner_thread_.join();
    }
}

}  // namespace hrc
