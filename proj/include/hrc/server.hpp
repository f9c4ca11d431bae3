#pragma once

#include "hrc/session.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

namespace httplib {
class Server;
}

namespace hrc {

struct ServerOptions {
    std::string host = "127.0.0.1";
    int port = 8765;  // 0 picks a free port
    /// Pause between executed motions so a client can interrupt.
    std::chrono::milliseconds step_delay{200};
    bool auto_run = true;
};

/// JSON over HTTP in front of one Session.
///   POST /task {text}, /pause, /resume, /clarify {answer}, /cancel, /reset,
///        /step, /demo/begin, /demo/end, /skill/commit {recording_id, name?, replace?}
///   GET  /plan, /scene, /library, /state
///   GET  /stream?since=N&follow=0|1  server frames as NDJSON (chunked)
///   POST /stream  NDJSON client frames ({"type":"demo_sample",t,x,y,z,aperture})
class SessionServer {
public:
    SessionServer(Session& session, ServerOptions options = {});
    ~SessionServer();
    SessionServer(const SessionServer&) = delete;
    SessionServer& operator=(const SessionServer&) = delete;

    /// Binds and serves on background threads. Returns the bound port.
    int start();
    void stop();
    int port() const { return port_; }

private:
    void routes();
    void runner();
    double now() const;

    Session& session_;
    ServerOptions options_;
    std::unique_ptr<httplib::Server> http_;
    std::mutex mutex_;
    std::condition_variable changed_;
    std::atomic<bool> running_{false};
    std::thread listen_thread_;
    std::thread runner_thread_;
    int port_ = 0;
    std::chrono::steady_clock::time_point epoch_ = std::chrono::steady_clock::now();
};

}  // namespace hrc
