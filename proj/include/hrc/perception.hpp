#pragma once

#include "hrc/geometry.hpp"
#include "hrc/scene.hpp"

#include <array>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace hrc {

struct PixelDetection {
    std::string name;
    double u = 0.0;
    double v = 0.0;
    double depth = 0.0;
    std::array<double, 4> bbox{};  // u_min, v_min, u_max, v_max
    double confidence = 1.0;
    /// Scene object the synthetic detector generated this from; empty for
    /// detections that come from outside.
    std::string source_id;
};

/// Throws Error(invalid_input) unless depth > 0, the bbox contains (u, v) and
/// confidence lies in [0, 1].
void validate(const PixelDetection& det);

Vec3 backproject(const PixelDetection& det, const CameraIntrinsics& k);

struct LabeledObject {
    std::string label;  // <name><k>
    std::string name;
    Vec3 position_world = Vec3::Zero();
    int index_in_class = 0;  // 1-based
    std::string source_id;
};

struct NamedPoint {
    std::string name;
    Vec3 position = Vec3::Zero();
    std::string source_id;
};

/// Groups points by class (classes in first-appearance order) and labels each
/// class left to right along `lateral_axis` as name1..nameK. Equal lateral
/// coordinates keep input order.
std::vector<LabeledObject> sort_and_label(const std::vector<NamedPoint>& detections,
                                          const Vec3& lateral_axis = Vec3::UnitY());

struct ObstacleReport {
    bool no_objects = false;
    /// Objects strictly inside the detection triangle (boundary inclusive),
    /// nearest to the robot first.
    std::vector<LabeledObject> obstacles;
};

/// Planar equilateral detection triangle with its apex at the robot base and
/// the midpoint of the opposite side at the target.
struct DetectionTriangle {
    Eigen::Vector2d apex;
    Eigen::Vector2d left;
    Eigen::Vector2d right;

    static DetectionTriangle make(const Vec3& target, const Vec3& robot_base);
    bool contains(const Vec3& p, double eps = 1e-9) const;
};

/// Objects at the target position or labeled `target_label` are never reported.
ObstacleReport identify_obstacles(const Vec3& target, const Vec3& robot_base,
                                  const std::vector<LabeledObject>& workspace,
                                  const std::string& target_label = {});

/// Perturbs ground-truth positions before rendering detections. The planar
/// offset has a uniformly random heading and a magnitude drawn uniformly from
/// [(1 - spread) h, (1 + spread) h]; height is not perturbed.
struct DetectorConfig {
    double noise_half_width = 0.011;
    double noise_spread = 0.12;
    double miss_probability = 0.02;
};

class SyntheticDetector {
public:
    explicit SyntheticDetector(DetectorConfig config = {}) : config_(config) {}

    const DetectorConfig& config() const { return config_; }

    /// One frame of pixel detections for every object of the scene.
    std::vector<PixelDetection> detect(const Scene& scene, std::mt19937_64& rng) const;

private:
    DetectorConfig config_;
};

/// Turns pixel detections into world-frame labeled objects.
std::vector<LabeledObject> localize(const std::vector<PixelDetection>& detections, const Scene& scene);

/// Labeled objects with the ground-truth position of their source object.
std::vector<LabeledObject> with_true_positions(const std::vector<LabeledObject>& perceived, const Scene& scene);

/// Class names and counts in first-appearance order.
std::vector<std::pair<std::string, int>> inventory(const std::vector<LabeledObject>& objects);

}  // namespace hrc
