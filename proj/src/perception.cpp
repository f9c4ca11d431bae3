#include "hrc/perception.hpp"

#include "hrc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hrc {

void validate(const PixelDetection& det)
{
    if (!(det.depth > 0.0)) {
        throw Error(ErrorKind::invalid_input, "detection '" + det.name + "': depth must be positive");
    }
    const auto& b = det.bbox;
    if (!(b[0] <= det.u && det.u <= b[2] && b[1] <= det.v && det.v <= b[3])) {
        throw Error(ErrorKind::invalid_input, "detection '" + det.name + "': bbox does not contain (u, v)");
    }
    if (!(det.confidence >= 0.0 && det.confidence <= 1.0)) {
        throw Error(ErrorKind::invalid_input, "detection '" + det.name + "': confidence outside [0, 1]");
    }
}

Vec3 backproject(const PixelDetection& det, const CameraIntrinsics& k)
{
    return backproject(det.u, det.v, det.depth, k);
}

std::vector<LabeledObject> sort_and_label(const std::vector<NamedPoint>& detections, const Vec3& lateral_axis)
{
    std::vector<std::string> classes;
    for (const auto& d : detections) {
        if (std::find(classes.begin(), classes.end(), d.name) == classes.end()) {
            classes.push_back(d.name);
        }
    }

    std::vector<LabeledObject> labeled;
    labeled.reserve(detections.size());
    for (const auto& name : classes) {
        std::vector<const NamedPoint*> members;
        for (const auto& d : detections) {
            if (d.name == name) {
                members.push_back(&d);
            }
        }
        std::stable_sort(members.begin(), members.end(), [&](const NamedPoint* a, const NamedPoint* b) {
            return a->position.dot(lateral_axis) < b->position.dot(lateral_axis);
        });
        int k = 1;
        for (const auto* m : members) {
            labeled.push_back({name + std::to_string(k), name, m->position, k, m->source_id});
            ++k;
        }
    }
    return labeled;
}

DetectionTriangle DetectionTriangle::make(const Vec3& target, const Vec3& robot_base)
{
    const Eigen::Vector2d apex(robot_base.x(), robot_base.y());
    const Eigen::Vector2d mid(target.x(), target.y());
    const Eigen::Vector2d axis = mid - apex;
    const double height = axis.norm();
    if (height <= 1e-6) {
        throw Error(ErrorKind::degenerate_geometry, "identify_obstacles: target coincides with robot base");
    }
    const double side = 2.0 * height / std::sqrt(3.0);
    const Eigen::Vector2d perp(-axis.y() / height, axis.x() / height);
    return {apex, mid + 0.5 * side * perp, mid - 0.5 * side * perp};
}

bool DetectionTriangle::contains(const Vec3& p, double eps) const
{
    // Signed distances to each edge, positive inside for a CCW triangle.
    const Eigen::Vector2d q(p.x(), p.y());
    const std::array<Eigen::Vector2d, 3> v{apex, right, left};
    const double orient = (v[1] - v[0]).x() * (v[2] - v[0]).y() - (v[1] - v[0]).y() * (v[2] - v[0]).x();
    const double sign = orient >= 0.0 ? 1.0 : -1.0;
    for (int i = 0; i < 3; ++i) {
        const Eigen::Vector2d e = v[(i + 1) % 3] - v[i];
        const Eigen::Vector2d w = q - v[i];
        const double dist = sign * (e.x() * w.y() - e.y() * w.x()) / e.norm();
        if (dist < -eps) {
            return false;
        }
    }
    return true;
}

ObstacleReport identify_obstacles(const Vec3& target, const Vec3& robot_base,
                                  const std::vector<LabeledObject>& workspace, const std::string& target_label)
{
    const auto tri = DetectionTriangle::make(target, robot_base);
    ObstacleReport report;
    if (workspace.empty()) {
        report.no_objects = true;
        return report;
    }
    for (const auto& obj : workspace) {
        if ((!target_label.empty() && obj.label == target_label) || (obj.position_world - target).norm() <= 1e-9) {
            continue;
        }
        if (tri.contains(obj.position_world)) {
            report.obstacles.push_back(obj);
        }
    }
    const Eigen::Vector2d base(robot_base.x(), robot_base.y());
    std::stable_sort(report.obstacles.begin(), report.obstacles.end(),
                     [&](const LabeledObject& a, const LabeledObject& b) {
                         const double da = (Eigen::Vector2d(a.position_world.x(), a.position_world.y()) - base).norm();
                         const double db = (Eigen::Vector2d(b.position_world.x(), b.position_world.y()) - base).norm();
                         return da < db;
                     });
    return report;
}

std::vector<PixelDetection> SyntheticDetector::detect(const Scene& scene, std::mt19937_64& rng) const
{
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const RigidTransform world_to_camera = scene.camera_to_world.inverse();
    const double h = config_.noise_half_width;

    std::vector<PixelDetection> out;
    for (const auto& obj : scene.objects) {
        // Draw every variate even for misses so one object's miss does not
        // shift the noise of the others.
        const double miss = unit(rng);
        const double heading = 2.0 * M_PI * unit(rng);
        const double magnitude = h * (1.0 - config_.noise_spread + 2.0 * config_.noise_spread * unit(rng));
        if (miss < config_.miss_probability) {
            continue;
        }
        Vec3 p = obj.position;
        p.x() += magnitude * std::cos(heading);
        p.y() += magnitude * std::sin(heading);

        const Vec3 pc = world_to_camera.apply(p);
        if (!(pc.z() > 0.0)) {
            continue;
        }
        const Vec3 uvd = project(pc, scene.intrinsics);
        const double half_u = 0.5 * scene.intrinsics.fx() * std::max(obj.size.x(), obj.size.y()) / pc.z();
        const double half_v = 0.5 * scene.intrinsics.fy() * obj.size.z() / pc.z();
        PixelDetection det;
        det.name = obj.name;
        det.u = uvd.x();
        det.v = uvd.y();
        det.depth = uvd.z();
        det.bbox = {det.u - half_u, det.v - half_v, det.u + half_u, det.v + half_v};
        det.confidence = 0.9;
        det.source_id = obj.id;
        out.push_back(det);
    }
    return out;
}

std::vector<LabeledObject> localize(const std::vector<PixelDetection>& detections, const Scene& scene)
{
    std::vector<NamedPoint> points;
    points.reserve(detections.size());
    for (const auto& det : detections) {
        validate(det);
        points.push_back({det.name, to_world(backproject(det, scene.intrinsics), scene.camera_to_world), det.source_id});
    }
    return sort_and_label(points, scene.lateral_axis);
}

std::vector<LabeledObject> with_true_positions(const std::vector<LabeledObject>& perceived, const Scene& scene)
{
    std::vector<LabeledObject> out = perceived;
    for (auto& o : out) {
        if (const auto* src = scene.find(o.source_id)) {
            o.position_world = src->position;
        }
    }
    return out;
}

std::vector<std::pair<std::string, int>> inventory(const std::vector<LabeledObject>& objects)
{
    std::vector<std::pair<std::string, int>> inv;
    for (const auto& o : objects) {
        auto it = std::find_if(inv.begin(), inv.end(), [&](const auto& e) { return e.first == o.name; });
        if (it == inv.end()) {
            inv.emplace_back(o.name, 1);
        } else {
            ++it->second;
        }
    }
    return inv;
}

}  // namespace hrc
