#pragma once

#include "hrc/dmp.hpp"
#include "hrc/geometry.hpp"
#include "hrc/plan.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace hrc {

/// Motion sequence that replaces a sub-task's basic motions once a human has
/// demonstrated it.
struct SkillRecord {
    std::string name;
    std::string subtask;
    std::vector<MotionFunction> motions;
    std::vector<MotionFunction> replaced_motions;
    std::optional<std::string> anchor;
    Vec3 anchor_position = Vec3::Zero();
    std::string created_from;
};

struct LibraryEntry {
    std::string name;
    std::string file;
    std::string created_at;
    int version = 1;
    std::string kind;  // "dmp" or "skill"
};

std::string dmp_to_json(const std::string& name, const dmp::DmpModel& model, const std::string& created_at);
dmp::DmpModel dmp_from_json(const std::string& text, std::string* name = nullptr);

/// DMP and skill store. With a directory every change is written through:
/// `<name>.dmp.json` per model, `<name>.skill.json` per skill record and a
/// `library.json` index. Replacing an existing name moves the old files to
/// `archive/` untouched.
class DmpLibrary {
public:
    using Clock = std::function<std::string()>;

    DmpLibrary();  // in memory only
    explicit DmpLibrary(std::filesystem::path dir, Clock clock = {});

    const std::optional<std::filesystem::path>& directory() const { return dir_; }

    bool has_skill(const std::string& name) const { return skills_.count(name) > 0; }
    const SkillRecord* skill(const std::string& name) const;
    bool has_model(const std::string& name) const { return models_.count(name) > 0; }
    const dmp::DmpModel* model(const std::string& name) const;

    std::vector<std::string> skill_names() const;
    const std::vector<LibraryEntry>& entries() const { return entries_; }

    /// Stores a skill with its models. Throws Error(library) when any name is
    /// taken and `replace` is false.
    void commit(const SkillRecord& skill, const std::vector<std::pair<std::string, dmp::DmpModel>>& models,
                bool replace = false);

    /// Re-reads the directory.
    void reload();

private:
    void write_index() const;
    void archive(const std::string& file, int version) const;
    std::string created_at(const std::string& name, const std::string& kind) const;
    void upsert_entry(const std::string& name, const std::string& file, const std::string& kind);

    std::optional<std::filesystem::path> dir_;
    Clock clock_;
    std::map<std::string, SkillRecord> skills_;
    std::map<std::string, dmp::DmpModel> models_;
    std::vector<LibraryEntry> entries_;
};

std::string utc_timestamp();

}  // namespace hrc
