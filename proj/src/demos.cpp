#include "hrc/demos.hpp"

#include "hrc/errors.hpp"
#include "hrc/planner.hpp"

#include <algorithm>
#include <cmath>

namespace hrc {

namespace {

constexpr double kHandSpeed = 0.2;   // m/s
constexpr double kArcSpeed = 0.15;   // m/s along the handle arc
constexpr double kPressDepth = 0.025;
constexpr double kStandOff = 0.04;

double min_jerk(double s) { return s * s * s * (10.0 - 15.0 * s + 6.0 * s * s); }

class DemoBuilder {
public:
    DemoBuilder(const Vec3& start, double rate) : dt_(1.0 / rate) { samples_.push_back({0.0, start, 1.0}); }

    const Vec3& last() const { return samples_.back().p; }

    void line(const Vec3& to, double aperture, double speed = kHandSpeed)
    {
        const Vec3 from = last();
        const double duration = std::max(0.5, (to - from).norm() / speed);
        path(duration, aperture, [&](double s) { return Vec3(from + (to - from) * s); });
    }

    void arc(const ArticulationModel& a, double from, double to, double aperture)
    {
        const double duration = std::max(0.5, a.radius_door2axis * std::abs(to - from) / kArcSpeed);
        path(duration, aperture, [&](double s) { return a.handle_at(from + (to - from) * s); });
    }

    void hold(int count, double aperture)
    {
        for (int i = 0; i < count; ++i) {
            samples_.push_back({samples_.back().t + dt_, last(), aperture});
        }
    }

    std::vector<DemoSample> take() { return std::move(samples_); }

private:
    template <class F>
    void path(double duration, double aperture, F at)
    {
        const auto n = std::max<long>(1, std::lround(duration / dt_));
        const double t0 = samples_.back().t;
        for (long i = 1; i <= n; ++i) {
            samples_.push_back({t0 + static_cast<double>(i) * dt_, at(min_jerk(static_cast<double>(i) / n)), aperture});
        }
    }

    double dt_;
    std::vector<DemoSample> samples_;
};

// Unit direction the handle moves in while the door closes.
Vec3 closing_tangent(const ArticulationModel& a, double angle)
{
    const double h = 1e-4;
    return (a.handle_at(std::max(0.0, angle - h)) - a.handle_at(angle)).normalized();
}

}  // namespace

std::vector<DemoSample> scripted_demo(const std::string& description, const Scene& scene, double rate)
{
    const auto pattern = match_task(description);
    if (!pattern || (pattern->action != TaskAction::open && pattern->action != TaskAction::close)) {
        throw Error(ErrorKind::invalid_input, "no scripted demonstration for '" + description + "'");
    }
    const auto instances = scene.by_name(pattern->object.name);
    const int index = pattern->object.which == ObjectRef::Which::index ? pattern->object.index : 1;
    if (instances.empty() || index < 1 || index > static_cast<int>(instances.size()) ||
        !instances[index - 1]->articulation) {
        throw Error(ErrorKind::invalid_input, "no door '" + pattern->object.name + "' to demonstrate on");
    }
    const WorldObject& door = *instances[index - 1];
    const ArticulationModel& a = *door.articulation;
    const double angle = door.state.door_angle;

    DemoBuilder b(scene.robot.init_ee, rate);
    if (pattern->action == TaskAction::open) {
        if (a.kind == ArticulationKind::press_pull) {
            const Vec3 face = a.handle_at(0.0);
            b.line(face + kStandOff * a.outward, 1.0);
            b.line(face - kPressDepth * a.outward, 1.0, 0.05);
            b.hold(6, 0.0);
            b.line(face, 0.0, 0.05);
        } else {
            b.line(a.handle_at(angle), 1.0);
            b.hold(6, 0.0);
        }
        b.arc(a, angle, a.open_angle, 0.0);
        b.hold(2, 1.0);
    } else {
        const Vec3 handle = a.handle_at(angle);
        b.line(handle - kStandOff * closing_tangent(a, angle), 1.0);
        b.line(handle, 1.0, 0.1);
        b.arc(a, angle, 0.0, 1.0);
    }
    return b.take();
}

std::vector<DemoSegment> segment_demo(const std::vector<DemoSample>& samples, const std::string& name)
{
    std::vector<std::vector<DemoSample>> pieces;
    for (const auto& s : samples) {
        if (pieces.empty() || (s.aperture < 0.5) != (pieces.back().back().aperture < 0.5)) {
            pieces.emplace_back();
        }
        pieces.back().push_back(s);
    }
    std::vector<DemoSegment> out;
    for (auto& piece : pieces) {
        if (piece.size() < 3 && !out.empty()) {
            auto& prev = out.back().samples;
            prev.insert(prev.end(), piece.begin(), piece.end());
            continue;
        }
        std::string n = name;
        if (out.size() == 1) {
            n += "_ex";
        } else if (out.size() > 1) {
            n += "_ex" + std::to_string(out.size());
        }
        out.push_back({n, std::move(piece)});
    }
    return out;
}

dmp::Trajectory to_trajectory(const DemoSegment& segment)
{
    const auto n = static_cast<Eigen::Index>(segment.samples.size());
    dmp::Trajectory traj{Eigen::VectorXd(n), Eigen::MatrixXd(n, 4)};
    const double t0 = n > 0 ? segment.samples.front().t : 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
        const auto& s = segment.samples[static_cast<std::size_t>(k)];
        traj.t(k) = s.t - t0;
        traj.y.row(k) << s.p.x(), s.p.y(), s.p.z(), s.aperture;
    }
    return traj;
}

dmp::DmpConfig skill_config()
{
    dmp::DmpConfig c;
    c.scale = dmp::ForcingScale::goal_minus_start;
    return c;
}

std::optional<std::string> anchor_symbol(const std::vector<MotionFunction>& motions)
{
    for (const auto& m : motions) {
        if ((m.kind == MotionKind::move_to_position && !is_library_constant(m.arg)) || m.kind == MotionKind::close_move) {
            return m.arg;
        }
    }
    return std::nullopt;
}

TaughtSkill teach_skill(const SubTask& basic, const std::vector<DemoSample>& samples, const Vec3& anchor_position,
                        const dmp::DmpConfig& config)
{
    TaughtSkill out;
    SkillRecord& skill = out.skill;
    skill.name = skill_name(basic.description, basic.motions);
    skill.subtask = basic.description;
    skill.replaced_motions = basic.motions;
    skill.anchor = anchor_symbol(basic.motions);
    skill.anchor_position = anchor_position;
    skill.created_from = "demonstration";
    for (const auto& seg : segment_demo(samples, skill.name)) {
        const auto traj = to_trajectory(seg);
        dmp::validate(traj);
        out.models.emplace_back(seg.name, dmp::fit_dmp(traj, config));
        skill.motions.push_back({MotionKind::dmp_publish, seg.name});
    }
    if (skill.motions.empty()) {
        throw Error(ErrorKind::invalid_input, "demonstration of '" + basic.description + "' has no samples");
    }
    return out;
}

}  // namespace hrc
