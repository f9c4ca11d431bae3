#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hrc/errors.hpp"
#include "hrc/geometry.hpp"
#include "hrc/harness.hpp"
#include "hrc/perception.hpp"
#include "hrc/scene.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

using namespace hrc;

namespace {

// Cramer's rule on K x = (u, v, 1).
std::array<double, 3> cramer(const double K[3][3], const double b[3])
{
    auto det = [](const double m[3][3]) {
        return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
               m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    };
    const double d = det(K);
    std::array<double, 3> x{};
    for (int c = 0; c < 3; ++c) {
        double m[3][3];
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                m[i][j] = j == c ? b[i] : K[i][j];
            }
        }
        x[c] = det(m) / d;
    }
    return x;
}

// Labels by scanning classes in first-appearance order and picking the
// remaining minimum (first index on ties) repeatedly.
std::map<std::size_t, std::string> brute_force_labels(const std::vector<NamedPoint>& pts, const Vec3& axis)
{
    std::map<std::size_t, std::string> out;
    std::vector<std::string> seen;
    for (const auto& p : pts) {
        if (std::find(seen.begin(), seen.end(), p.name) != seen.end()) {
            continue;
        }
        seen.push_back(p.name);
        std::vector<bool> used(pts.size(), false);
        for (int k = 1;; ++k) {
            std::size_t best = pts.size();
            for (std::size_t i = 0; i < pts.size(); ++i) {
                if (pts[i].name != p.name || used[i]) continue;
                if (best == pts.size() || pts[i].position.dot(axis) < pts[best].position.dot(axis)) best = i;
            }
            if (best == pts.size()) break;
            used[best] = true;
            out[best] = p.name + std::to_string(k);
        }
    }
    return out;
}

bool barycentric_inside(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c,
                        const Eigen::Vector2d& p)
{
    const double den = (b.y() - c.y()) * (a.x() - c.x()) + (c.x() - b.x()) * (a.y() - c.y());
    const double l1 = ((b.y() - c.y()) * (p.x() - c.x()) + (c.x() - b.x()) * (p.y() - c.y())) / den;
    const double l2 = ((c.y() - a.y()) * (p.x() - c.x()) + (a.x() - c.x()) * (p.y() - c.y())) / den;
    const double l3 = 1.0 - l1 - l2;
    return l1 >= 0.0 && l2 >= 0.0 && l3 >= 0.0;
}

LabeledObject at(const std::string& label, double x, double y)
{
    return {label, label.substr(0, label.size() - 1), Vec3(x, y, 0.0), 1, label};
}

Scene kitchen() { return load_scene(HRC_SOURCE_DIR "/scenes/kitchen.json"); }

}  // namespace

TEST_CASE("backprojection matches a 3x3 linear solve")
{
    const CameraIntrinsics k(525.0, 530.0, 319.5, 239.5);
    const Vec3 p = backproject(400.0, 300.0, 1.37, k);
    const double K[3][3] = {{525.0, 0.0, 319.5}, {0.0, 530.0, 239.5}, {0.0, 0.0, 1.0}};
    const double b[3] = {400.0, 300.0, 1.0};
    const auto x = cramer(K, b);
    for (int i = 0; i < 3; ++i) {
        CHECK(std::abs(p(i) - 1.37 * x[i]) <= 1e-12);
    }
}

TEST_CASE("projection round trip")
{
    const CameraIntrinsics k(525.0, 530.0, 319.5, 239.5);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 640.0), v(0.0, 480.0), d(0.2, 6.0);
    for (int i = 0; i < 1000; ++i) {
        const double uu = u(rng), vv = v(rng), dd = d(rng);
        const Vec3 back = project(backproject(uu, vv, dd, k), k);
        CHECK((back - Vec3(uu, vv, dd)).norm() <= 1e-9);
    }
}

TEST_CASE("singular intrinsics are rejected")
{
    CHECK_THROWS_AS(CameraIntrinsics(0.0, 530.0, 319.5, 239.5), Error);
    CHECK_THROWS_AS(CameraIntrinsics(525.0, 0.0, 319.5, 239.5), Error);
}

TEST_CASE("rigid transform matches a matrix-multiply oracle and inverts")
{
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        Mat3 a;
        for (int i = 0; i < 9; ++i) a(i / 3, i % 3) = n(rng);
        Mat3 r = Eigen::HouseholderQR<Mat3>(a).householderQ();
        if (r.determinant() < 0) r.col(0) *= -1.0;
        const Vec3 t(n(rng), n(rng), n(rng));
        const Vec3 p(n(rng), n(rng), n(rng));
        const RigidTransform tf(r, t);
        Vec3 oracle;
        for (int i = 0; i < 3; ++i) {
            oracle(i) = t(i);
            for (int j = 0; j < 3; ++j) oracle(i) += r(i, j) * p(j);
        }
        CHECK((tf.apply(p) - oracle).norm() <= 1e-12);
        CHECK((tf.inverse().apply(tf.apply(p)) - p).norm() <= 1e-9);
    }
}

TEST_CASE("labels follow the lateral order within each class")
{
    const std::vector<NamedPoint> pts{{"cup", {2, 0, 0}, "a"}, {"bottle", {0, 0, 0}, "b"}, {"cup", {1, 0, 0}, "c"},
                                      {"bottle", {3, 0, 0}, "d"}};
    const auto labeled = sort_and_label(pts, Vec3::UnitX());
    std::map<std::string, std::string> by_source;
    for (const auto& l : labeled) by_source[l.source_id] = l.label;
    CHECK(by_source["c"] == "cup1");
    CHECK(by_source["a"] == "cup2");
    CHECK(by_source["b"] == "bottle1");
    CHECK(by_source["d"] == "bottle2");

    const auto cups = sort_and_label({{"cup", {0, -0.3, 0}, "l"}, {"cup", {0, 0.3, 0}, "r"}, {"cup", {0, 0, 0}, "m"}});
    for (const auto& l : cups) {
        if (l.source_id == "m") CHECK(l.label == "cup2");
    }
}

TEST_CASE("labeling equals the brute-force grouping on random scenes")
{
    std::mt19937_64 rng(99);
    std::uniform_int_distribution<int> count(0, 12), cls(0, 3);
    std::uniform_real_distribution<double> coord(-1.0, 1.0);
    std::uniform_int_distribution<int> grid(-3, 3);
    const std::vector<std::string> names{"cup", "bottle", "apple", "plate"};
    for (int scene = 0; scene < 1000; ++scene) {
        std::vector<NamedPoint> pts;
        const int n = count(rng);
        for (int i = 0; i < n; ++i) {
            // Half of the scenes use a coarse grid so ties occur.
            const double y = scene % 2 ? 0.1 * grid(rng) : coord(rng);
            pts.push_back({names[cls(rng)], {coord(rng), y, coord(rng)}, std::to_string(i)});
        }
        const auto oracle = brute_force_labels(pts, Vec3::UnitY());
        const auto labeled = sort_and_label(pts);
        REQUIRE(labeled.size() == pts.size());
        for (const auto& l : labeled) {
            CHECK(l.label == oracle.at(std::stoul(l.source_id)));
        }
    }
}

TEST_CASE("obstacle triangle examples")
{
    const Vec3 base(0, 0, 0), target(1, 0, 0);
    const auto report = identify_obstacles(target, base, {at("bottle1", 0.5, 0.1), at("cup1", 0.5, 0.5)});
    REQUIRE(report.obstacles.size() == 1);
    CHECK(report.obstacles[0].label == "bottle1");
    CHECK(identify_obstacles(target, base, {}).no_objects);
    CHECK(identify_obstacles(target, base, {at("cup1", 0.5, 0.2886)}).obstacles.size() == 1);
    CHECK(identify_obstacles(target, base, {at("cup1", 0.5, 0.2888)}).obstacles.empty());
    CHECK_THROWS_AS(identify_obstacles(base, base, {}), Error);
}

TEST_CASE("obstacles come nearest first and never include the target")
{
    const auto report = identify_obstacles({1, 0, 0}, {0, 0, 0},
                                           {at("cup1", 0.7, 0.0), at("bottle1", 0.3, 0.05), at("plate1", 1.0, 0.0),
                                            at("bottle2", 0.5, -0.1)},
                                           "plate1");
    REQUIRE(report.obstacles.size() == 3);
    CHECK(report.obstacles[0].label == "bottle1");
    CHECK(report.obstacles[1].label == "bottle2");
    CHECK(report.obstacles[2].label == "cup1");
}

TEST_CASE("triangle membership equals the barycentric oracle")
{
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> c(-2.0, 2.0);
    int inside = 0;
    for (int t = 0; t < 50; ++t) {
        Vec3 base(c(rng), c(rng), 0), target(c(rng), c(rng), 0);
        const auto tri = DetectionTriangle::make(target, base);
        for (int i = 0; i < 200; ++i) {
            const Vec3 p(c(rng), c(rng), c(rng));
            const bool expect = barycentric_inside(tri.apex, tri.left, tri.right, {p.x(), p.y()});
            CHECK(tri.contains(p) == expect);
            inside += expect;
        }
        // The triangle is equilateral with its apex at the base.
        CHECK((tri.left - tri.apex).norm() == doctest::Approx((tri.right - tri.apex).norm()));
        CHECK((tri.left - tri.right).norm() == doctest::Approx((tri.left - tri.apex).norm()));
    }
    CHECK(inside > 100);
}

TEST_CASE("noiseless detection localizes every object exactly")
{
    const Scene scene = kitchen();
    std::mt19937_64 rng(1);
    const auto objs = localize(SyntheticDetector({0.0, 0.0, 0.0}).detect(scene, rng), scene);
    CHECK(objs.size() == scene.objects.size());
    for (const auto& o : objs) {
        CHECK((o.position_world - scene.find(o.source_id)->position).norm() <= 1e-9);
    }
}

TEST_CASE("detector noise is planar with magnitude in the configured band")
{
    const Scene scene = kitchen();
    std::mt19937_64 rng(4);
    const SyntheticDetector det({0.011, 0.12, 0.0});
    for (int f = 0; f < 50; ++f) {
        for (const auto& o : localize(det.detect(scene, rng), scene)) {
            const Vec3 d = o.position_world - scene.find(o.source_id)->position;
            CHECK(std::abs(d.z()) <= 1e-9);
            const double r = std::hypot(d.x(), d.y());
            CHECK(r >= 0.011 * 0.88 - 1e-9);
            CHECK(r <= 0.011 * 1.12 + 1e-9);
        }
    }
    std::mt19937_64 rng2(4);
    CHECK(SyntheticDetector({0.011, 0.12, 1.0}).detect(scene, rng2).empty());
}

TEST_CASE("discrepancy study")
{
    const Scene scene = kitchen();
    const auto s = perception_discrepancy_study(scene, {0.011, 0.12, 0.0}, 5.0, 7);
    CHECK(s.count == 50 * scene.objects.size());
    CHECK(s.median >= 0.010);
    CHECK(s.median <= 0.012);
    CHECK(s.max <= 0.011 * std::sqrt(2.0));

    const auto zero = perception_discrepancy_study(scene, {0.0, 0.12, 0.0}, 5.0, 7);
    CHECK(zero.max <= 1e-9);

    // Independent uniform square noise: the sampled maximum never exceeds h * sqrt(2).
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-0.011, 0.011);
    double worst = 0.0;
    for (int i = 0; i < 100000; ++i) worst = std::max(worst, std::hypot(u(rng), u(rng)));
    CHECK(worst <= 0.011 * std::sqrt(2.0));

    CHECK_THROWS_AS(perception_discrepancy_study(scene, {0.011, 0.12, 1.0}, 5.0, 7), Error);
}

TEST_CASE("pixel detections are validated")
{
    PixelDetection d;
    d.name = "cup";
    d.u = 10;
    d.v = 10;
    d.depth = 1.0;
    d.bbox = {5, 5, 15, 15};
    CHECK_NOTHROW(validate(d));
    d.depth = 0.0;
    CHECK_THROWS_AS(validate(d), Error);
    d.depth = 1.0;
    d.bbox = {11, 5, 15, 15};
    CHECK_THROWS_AS(validate(d), Error);
    d.bbox = {5, 5, 15, 15};
    d.confidence = 1.5;
    CHECK_THROWS_AS(validate(d), Error);
}
