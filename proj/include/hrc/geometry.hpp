#pragma once

#include <Eigen/Dense>

namespace hrc {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Pinhole intrinsics. The constructor rejects a singular K.
class CameraIntrinsics {
public:
    CameraIntrinsics(double fx, double fy, double cx, double cy);

    double fx() const { return fx_; }
    double fy() const { return fy_; }
    double cx() const { return cx_; }
    double cy() const { return cy_; }
    Mat3 matrix() const;

private:
    double fx_, fy_, cx_, cy_;
};

/// Camera-to-world rigid transform: p_w = R p_c + t.
class RigidTransform {
public:
    RigidTransform();
    RigidTransform(const Mat3& rotation, const Vec3& translation);

    const Mat3& rotation() const { return rotation_; }
    const Vec3& translation() const { return translation_; }

    Vec3 apply(const Vec3& p) const { return rotation_ * p + translation_; }
    RigidTransform inverse() const;

private:
    Mat3 rotation_;
    Vec3 translation_;
};

/// Camera-frame point for pixel (u, v) at the given depth: depth * K^-1 (u, v, 1).
Vec3 backproject(double u, double v, double depth, const CameraIntrinsics& k);

/// Inverse of backproject. Returns (u, v, depth).
Vec3 project(const Vec3& p_camera, const CameraIntrinsics& k);

inline Vec3 to_world(const Vec3& p_camera, const RigidTransform& t) { return t.apply(p_camera); }

}  // namespace hrc
