#include "hrc/errors.hpp"
#include "hrc/planner.hpp"

#include <httplib.h>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>

#ifndef HRC_PROMPT_DIR
#define HRC_PROMPT_DIR "assets/prompts/v1"
#endif

namespace hrc {

namespace {

std::string read_text(const std::filesystem::path& p)
{
    std::ifstream in(p);
    if (!in) {
        throw Error(ErrorKind::io, "prompt asset missing: " + p.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

PromptContext PromptContext::load(const std::filesystem::path& dir)
{
    PromptContext c;
    c.role_text = read_text(dir / "role.txt");
    c.library_text = read_text(dir / "library.txt");
    c.example_text = read_text(dir / "examples.txt");
    c.ambiguity_text = read_text(dir / "ambiguity.txt");
    return c;
}

std::filesystem::path PromptContext::default_dir()
{
    if (const char* env = std::getenv("HRC_PROMPT_DIR")) {
        return env;
    }
    return HRC_PROMPT_DIR;
}

std::string PromptContext::render() const
{
    std::ostringstream os;
    os << role_text << '\n' << library_text << '\n' << example_text << '\n' << ambiguity_text << '\n';
    os << "Objects in view:";
    for (const auto& [name, count] : scene_inventory) {
        os << ' ' << name << " x" << count << ';';
    }
    os << '\n';
    for (const auto& [name, grip] : grips) {
        os << "Grip " << name << " with " << grip << ".\n";
    }
    for (const auto& name : handleless) {
        os << "The " << name << " door has no handle; move to " << name << " itself.\n";
    }
    if (!table_objects.empty()) {
        os << "On the table:";
        for (const auto& name : table_objects) {
            os << ' ' << name;
        }
        os << '\n';
    }
    return os.str();
}

std::string RuleBackend::generate(const PromptContext& context, const std::string& task)
{
    std::ostringstream os;
    os << "# task: " << normalize_task(task) << '\n';
    std::vector<std::string> descriptions;
    for (const auto& clause : split_clauses(task)) {
        const auto pattern = match_task(clause);
        if (!pattern) {
            os << "# no rule matches '" << clause << "'\n";
            return os.str();
        }
        auto parts = decompose_pattern(*pattern, context.table_objects);
        if (parts.empty() && pattern->action != TaskAction::clean) {
            parts.push_back(clause);
        }
        descriptions.insert(descriptions.end(), parts.begin(), parts.end());
    }
    if (descriptions.empty()) {
        match_task(task);
    }
    for (const auto& d : descriptions) {
        os << "subtask: " << d << '\n';
        const auto sub = match_task(d);
        if (!sub) {
            continue;
        }
        for (const auto& m : basic_motions(*sub, context)) {
            os << "mf: " << m.str() << '\n';
        }
    }
    return os.str();
}

std::string RemoteBackend::generate(const PromptContext& context, const std::string& task)
{
    const auto scheme_end = config_.endpoint.find("://");
    const auto path_start = config_.endpoint.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    if (scheme_end == std::string::npos || path_start == std::string::npos) {
        throw Error(ErrorKind::transport, "remote backend: endpoint must look like http://host:port/path");
    }
    const std::string base = config_.endpoint.substr(0, path_start);
    const std::string path = config_.endpoint.substr(path_start);

    nlohmann::json body{{"model", config_.model},
                        {"temperature", 0},
                        {"messages",
                         {{{"role", "system"}, {"content", context.render()}}, {{"role", "user"}, {"content", task}}}}};
    httplib::Headers headers;
    if (const char* key = std::getenv(config_.api_key_env.c_str())) {
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    httplib::Client client(base);
    const auto secs = static_cast<time_t>(config_.timeout_s);
    client.set_connection_timeout(secs, 0);
    client.set_read_timeout(secs, 0);

    std::string last_error;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        auto res = client.Post(path, headers, body.dump(), "application/json");
        if (!res) {
            last_error = httplib::to_string(res.error());
            continue;
        }
        if (res->status != 200) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        try {
            const auto j = nlohmann::json::parse(res->body);
            return j.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            last_error = std::string("malformed response: ") + e.what();
        }
    }
    throw Error(ErrorKind::transport, "remote backend: " + std::to_string(config_.max_retries + 1) +
                                          " attempts failed, last: " + last_error);
}

}  // namespace hrc
