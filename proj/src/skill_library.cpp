#include "hrc/skill_library.hpp"

#include "hrc/errors.hpp"

#include <json.hpp>

#include <chrono>
#include <ctime>
#include <fstream>
#include <sstream>

namespace hrc {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json vec_json(const Eigen::VectorXd& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Eigen::VectorXd vec_from(const json& j)
{
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::string read_file(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::io, "library: cannot read " + p.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& p, const std::string& text)
{
    const fs::path tmp = p.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw Error(ErrorKind::io, "library: cannot write " + p.string());
        }
        out << text;
    }
    fs::rename(tmp, p);
}

json motions_json(const std::vector<MotionFunction>& motions)
{
    json arr = json::array();
    for (const auto& m : motions) {
        arr.push_back(m.str());
    }
    return arr;
}

std::vector<MotionFunction> motions_from(const json& arr)
{
    std::string dsl = "subtask: stored\n";
    for (const auto& m : arr) {
        dsl += "mf: " + m.get<std::string>() + "\n";
    }
    if (arr.empty()) {
        return {};
    }
    return parse_plan_dsl(dsl).front().motions;
}

std::string skill_to_json(const SkillRecord& s, const std::string& created_at)
{
    json j{{"name", s.name},
           {"created_at", created_at},
           {"subtask", s.subtask},
           {"motions", motions_json(s.motions)},
           {"replaced_motions", motions_json(s.replaced_motions)},
           {"created_from", s.created_from}};
    if (s.anchor) {
        j["anchor"] = {{"symbol", *s.anchor},
                       {"position", {s.anchor_position.x(), s.anchor_position.y(), s.anchor_position.z()}}};
    }
    return j.dump(2) + "\n";
}

SkillRecord skill_from_json(const std::string& text)
{
    const json j = json::parse(text);
    SkillRecord s;
    s.name = j.at("name").get<std::string>();
    s.subtask = j.value("subtask", "");
    s.motions = motions_from(j.at("motions"));
    s.replaced_motions = motions_from(j.value("replaced_motions", json::array()));
    s.created_from = j.value("created_from", "");
    if (j.contains("anchor")) {
        s.anchor = j["anchor"].at("symbol").get<std::string>();
        const auto p = j["anchor"].at("position").get<std::vector<double>>();
        s.anchor_position = Vec3(p.at(0), p.at(1), p.at(2));
    }
    return s;
}

}  // namespace

std::string utc_timestamp()
{
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string dmp_to_json(const std::string& name, const dmp::DmpModel& model, const std::string& created_at)
{
    json weights = json::array();
    for (Eigen::Index d = 0; d < model.weights.rows(); ++d) {
        weights.push_back(vec_json(model.weights.row(d).transpose()));
    }
    json degenerate = json::array();
    for (std::size_t d = 0; d < model.degenerate.size(); ++d) {
        if (model.degenerate[d]) {
            degenerate.push_back(d);
        }
    }
    json config{{"alpha", model.config.alpha},
                {"beta", model.config.beta},
                {"alpha_x", model.config.alpha_x},
                {"n_basis", model.config.n_basis},
                {"tau", model.config.tau}};
    if (model.config.scale == dmp::ForcingScale::goal_minus_start) {
        config["forcing_scale"] = "goal_minus_start";
    }
    json j{{"name", name},
           {"created_at", created_at},
           {"config", config},
           {"dims", model.dims()},
           {"weights", weights},
           {"y0_demo", vec_json(model.y0_demo)},
           {"g_demo", vec_json(model.g_demo)},
           {"basis_centers", vec_json(model.basis_centers)},
           {"basis_widths", vec_json(model.basis_widths)},
           {"degenerate_dims", degenerate}};
    return j.dump(2) + "\n";
}

dmp::DmpModel dmp_from_json(const std::string& text, std::string* name)
{
    try {
        const json j = json::parse(text);
        dmp::DmpModel m;
        const auto& c = j.at("config");
        m.config.alpha = c.at("alpha").get<double>();
        m.config.beta = c.at("beta").get<double>();
        m.config.alpha_x = c.at("alpha_x").get<double>();
        m.config.n_basis = c.at("n_basis").get<int>();
        m.config.tau = c.at("tau").get<double>();
        if (c.value("forcing_scale", "goal_minus_state") == "goal_minus_start") {
            m.config.scale = dmp::ForcingScale::goal_minus_start;
        }
        dmp::validate(m.config);
        const auto dims = j.at("dims").get<std::size_t>();
        const auto& w = j.at("weights");
        if (w.size() != dims) {
            throw Error(ErrorKind::library, "dmp document: weights rows != dims");
        }
        m.weights.resize(static_cast<Eigen::Index>(dims), m.config.n_basis);
        for (std::size_t d = 0; d < dims; ++d) {
            const Eigen::VectorXd row = vec_from(w[d]);
            if (row.size() != m.config.n_basis) {
                throw Error(ErrorKind::library, "dmp document: weight row length != n_basis");
            }
            m.weights.row(static_cast<Eigen::Index>(d)) = row.transpose();
        }
        m.y0_demo = vec_from(j.at("y0_demo"));
        m.g_demo = vec_from(j.at("g_demo"));
        m.basis_centers = vec_from(j.at("basis_centers"));
        m.basis_widths = vec_from(j.at("basis_widths"));
        m.degenerate.assign(dims, false);
        for (const auto& d : j.at("degenerate_dims")) {
            m.degenerate.at(d.get<std::size_t>()) = true;
        }
        if (static_cast<std::size_t>(m.y0_demo.size()) != dims || static_cast<std::size_t>(m.g_demo.size()) != dims ||
            m.basis_centers.size() != m.config.n_basis || m.basis_widths.size() != m.config.n_basis) {
            throw Error(ErrorKind::library, "dmp document: vector sizes inconsistent");
        }
        if (name) {
            *name = j.at("name").get<std::string>();
        }
        return m;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::library, std::string("dmp document: ") + e.what());
    }
}

DmpLibrary::DmpLibrary() : clock_(utc_timestamp) {}

DmpLibrary::DmpLibrary(fs::path dir, Clock clock) : dir_(std::move(dir)), clock_(clock ? std::move(clock) : utc_timestamp)
{
    fs::create_directories(*dir_);
    reload();
}

void DmpLibrary::reload()
{
    if (!dir_) {
        return;
    }
    skills_.clear();
    models_.clear();
    entries_.clear();
    const fs::path index = *dir_ / "library.json";
    if (!fs::exists(index)) {
        return;
    }
    try {
        const json j = json::parse(read_file(index));
        for (const auto& e : j.at("skills")) {
            LibraryEntry entry{e.at("name").get<std::string>(), e.at("file").get<std::string>(),
                               e.value("created_at", ""), e.value("version", 1), e.value("kind", "dmp")};
            const std::string text = read_file(*dir_ / entry.file);
            if (entry.kind == "skill") {
                skills_[entry.name] = skill_from_json(text);
            } else {
                models_[entry.name] = dmp_from_json(text);
            }
            entries_.push_back(std::move(entry));
        }
    } catch (const json::exception& e) {
        throw Error(ErrorKind::library, std::string("library index: ") + e.what());
    }
}

const SkillRecord* DmpLibrary::skill(const std::string& name) const
{
    const auto it = skills_.find(name);
    return it == skills_.end() ? nullptr : &it->second;
}

const dmp::DmpModel* DmpLibrary::model(const std::string& name) const
{
    const auto it = models_.find(name);
    return it == models_.end() ? nullptr : &it->second;
}

std::vector<std::string> DmpLibrary::skill_names() const
{
    std::vector<std::string> out;
    for (const auto& [name, _] : skills_) {
        out.push_back(name);
    }
    return out;
}

void DmpLibrary::write_index() const
{
    json arr = json::array();
    for (const auto& e : entries_) {
        arr.push_back({{"name", e.name}, {"file", e.file}, {"created_at", e.created_at}, {"version", e.version},
                       {"kind", e.kind}});
    }
    write_file(*dir_ / "library.json", json{{"skills", arr}}.dump(2) + "\n");
}

void DmpLibrary::archive(const std::string& file, int version) const
{
    const fs::path src = *dir_ / file;
    if (!fs::exists(src)) {
        return;
    }
    fs::create_directories(*dir_ / "archive");
    fs::rename(src, *dir_ / "archive" / (file + ".v" + std::to_string(version)));
}

std::string DmpLibrary::created_at(const std::string& name, const std::string& kind) const
{
    for (const auto& e : entries_) {
        if (e.name == name && e.kind == kind) {
            return e.created_at;
        }
    }
    return {};
}

void DmpLibrary::upsert_entry(const std::string& name, const std::string& file, const std::string& kind)
{
    for (auto& e : entries_) {
        if (e.name == name && e.kind == kind) {
            if (dir_) {
                archive(e.file, e.version);
            }
            e.created_at = clock_();
            ++e.version;
            e.file = file;
            return;
        }
    }
    entries_.push_back({name, file, clock_(), 1, kind});
}

void DmpLibrary::commit(const SkillRecord& skill, const std::vector<std::pair<std::string, dmp::DmpModel>>& models,
                        bool replace)
{
    if (skill.name.empty()) {
        throw Error(ErrorKind::library, "commit: skill name is empty");
    }
    if (!replace) {
        if (has_skill(skill.name)) {
            throw Error(ErrorKind::library, "commit: skill '" + skill.name + "' already exists");
        }
        for (const auto& [name, _] : models) {
            if (has_model(name)) {
                throw Error(ErrorKind::library, "commit: dmp '" + name + "' already exists");
            }
        }
    }
    for (const auto& [name, model] : models) {
        const std::string file = name + ".dmp.json";
        upsert_entry(name, file, "dmp");
        if (dir_) {
            write_file(*dir_ / file, dmp_to_json(name, model, created_at(name, "dmp")));
        }
        models_[name] = model;
    }
    const std::string file = skill.name + ".skill.json";
    upsert_entry(skill.name, file, "skill");
    if (dir_) {
        write_file(*dir_ / file, skill_to_json(skill, created_at(skill.name, "skill")));
        write_index();
    }
    skills_[skill.name] = skill;
}

}  // namespace hrc
