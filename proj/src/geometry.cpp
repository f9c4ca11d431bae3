#include "hrc/geometry.hpp"

#include "hrc/errors.hpp"

#include <cmath>

namespace hrc {

CameraIntrinsics::CameraIntrinsics(double fx, double fy, double cx, double cy)
    : fx_(fx), fy_(fy), cx_(cx), cy_(cy)
{
    if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(cx) || !std::isfinite(cy)) {
        throw Error(ErrorKind::invalid_input, "camera intrinsics: fx, fy must be positive and cx, cy finite");
    }
}

Mat3 CameraIntrinsics::matrix() const
{
    Mat3 k;
    k << fx_, 0.0, cx_, 0.0, fy_, cy_, 0.0, 0.0, 1.0;
    return k;
}

RigidTransform::RigidTransform() : rotation_(Mat3::Identity()), translation_(Vec3::Zero()) {}

RigidTransform::RigidTransform(const Mat3& rotation, const Vec3& translation)
    : rotation_(rotation), translation_(translation)
{
    const double orth = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
    if (!(orth <= 1e-9) || !(std::abs(rotation.determinant() - 1.0) <= 1e-9) || !translation.allFinite()) {
        throw Error(ErrorKind::invalid_input, "rigid transform: rotation must be orthonormal with det +1");
    }
}

RigidTransform RigidTransform::inverse() const
{
    RigidTransform inv;
    inv.rotation_ = rotation_.transpose();
    inv.translation_ = -(rotation_.transpose() * translation_);
    return inv;
}

Vec3 backproject(double u, double v, double depth, const CameraIntrinsics& k)
{
    if (!(depth > 0.0)) {
        throw Error(ErrorKind::invalid_input, "backproject: depth must be positive");
    }
    // K^-1 in closed form; the z row is exactly 1 so z = depth exactly.
    return {depth * (u - k.cx()) / k.fx(), depth * (v - k.cy()) / k.fy(), depth};
}

Vec3 project(const Vec3& p_camera, const CameraIntrinsics& k)
{
    if (!(p_camera.z() > 0.0)) {
        throw Error(ErrorKind::invalid_input, "project: point is behind the camera");
    }
    return {k.fx() * p_camera.x() / p_camera.z() + k.cx(), k.fy() * p_camera.y() / p_camera.z() + k.cy(),
            p_camera.z()};
}

}  // namespace hrc
