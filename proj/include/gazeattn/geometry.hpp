#pragma once

// Frames, rigid transforms and gaze rays.
//
// Pose naming follows the homogeneous-transform convention: a pose with
// from_frame = A and to_frame = B is the transform aHb. Its matrix maps
// coordinates expressed in B into A, so compose(aHb, bHc) = aHc.
// Units are millimetres; angles leave this module in degrees.

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <utility>

#include "gazeattn/error.hpp"

namespace gazeattn::geometry {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

inline double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / std::numbers::pi; }

class FrameId {
 public:
  enum class Kind { World, TrackerBase, ScreenCentre, Custom };

  static FrameId world() { return FrameId(Kind::World, "world"); }
  static FrameId tracker_base() { return FrameId(Kind::TrackerBase, "tracker_base"); }
  static FrameId screen_centre() { return FrameId(Kind::ScreenCentre, "screen_centre"); }
  static FrameId custom(std::string label) { return FrameId(Kind::Custom, std::move(label)); }

  Kind kind() const { return kind_; }
  const std::string& label() const { return label_; }

  friend bool operator==(const FrameId& a, const FrameId& b) {
    return a.kind_ == b.kind_ && a.label_ == b.label_;
  }

 private:
  FrameId(Kind kind, std::string label) : kind_(kind), label_(std::move(label)) {}

  Kind kind_;
  std::string label_;
};

struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  FrameId from_frame = FrameId::world();
  FrameId to_frame = FrameId::world();

  static Pose identity(FrameId from, FrameId to) {
    return Pose{Mat3::Identity(), Vec3::Zero(), std::move(from), std::move(to)};
  }

  /// Boundary conversion; the quaternion need not be normalised.
  static Pose from_quaternion(const Eigen::Quaterniond& q, const Vec3& t, FrameId from,
                              FrameId to) {
    return Pose{q.normalized().toRotationMatrix(), t, std::move(from), std::move(to)};
  }

  Vec3 transform_point(const Vec3& p) const { return rotation * p + translation; }
  Vec3 transform_direction(const Vec3& d) const { return rotation * d; }

  Mat4 homogeneous() const {
    Mat4 h = Mat4::Identity();
    h.topLeftCorner<3, 3>() = rotation;
    h.topRightCorner<3, 1>() = translation;
    return h;
  }

  bool is_rigid(double tol = 1e-9) const {
    return (rotation * rotation.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol &&
           std::abs(rotation.determinant() - 1.0) <= tol;
  }
};

inline Pose compose(const Pose& a, const Pose& b) {
  if (!(a.to_frame == b.from_frame)) {
    throw Error(ErrorKind::FrameMismatch,
                "cannot compose " + a.from_frame.label() + "->" + a.to_frame.label() + " with " +
                    b.from_frame.label() + "->" + b.to_frame.label());
  }
  return Pose{a.rotation * b.rotation, a.rotation * b.translation + a.translation, a.from_frame,
              b.to_frame};
}

inline Pose invert(const Pose& p) {
  Mat3 rt = p.rotation.transpose();
  return Pose{rt, -(rt * p.translation), p.to_frame, p.from_frame};
}

struct GazeRay {
  Vec3 origin = Vec3::Zero();
  Vec3 direction = Vec3::UnitZ();
  FrameId frame = FrameId::world();

  Vec3 at(double lambda) const { return origin + lambda * direction; }
};

/// Gaze ray from both eye positions and the tracker's on-screen gaze point,
/// all expressed in the screen-centre frame. Origin is the eye midpoint.
inline GazeRay local_gaze(const Vec3& eye_left, const Vec3& eye_right, const Vec3& screen_point) {
  Vec3 origin = 0.5 * (eye_left + eye_right);
  Vec3 d = screen_point - origin;
  double len = d.norm();
  if (!(len > 0.0) || !std::isfinite(len)) {
    throw Error(ErrorKind::DegenerateRay, "screen point coincides with the eye midpoint");
  }
  return GazeRay{origin, d / len, FrameId::screen_centre()};
}

/// Single-eye variant used when the tracker only reports one eye. The result
/// is flagged so callers can treat it as a degraded sample.
struct MonocularGaze {
  GazeRay ray;
  bool degraded = true;
};

inline MonocularGaze local_gaze_monocular(const Vec3& eye, const Vec3& screen_point) {
  return MonocularGaze{local_gaze(eye, eye, screen_point), true};
}

/// Stored tracker-base-to-screen transform bHc, captured while the tracker is
/// attached to the calibration screen.
inline Pose calibrate_tracker_to_screen(const Pose& world_to_screen, const Pose& world_to_tracker) {
  if (!(world_to_screen.from_frame == world_to_tracker.from_frame)) {
    throw Error(ErrorKind::FrameMismatch, "calibration poses must share the reference frame");
  }
  return compose(invert(world_to_tracker), world_to_screen);
}

/// Gaze in world coordinates once the tracker has left the screen:
/// wHc = wHb * bHc, then wg = wHc * cg.
inline GazeRay world_gaze(const Pose& world_to_tracker, const Pose& stored_base_to_screen,
                          const GazeRay& local) {
  Pose world_to_screen = compose(world_to_tracker, stored_base_to_screen);
  if (!(local.frame == world_to_screen.to_frame)) {
    throw Error(ErrorKind::FrameMismatch, "local gaze must be expressed in " +
                                              world_to_screen.to_frame.label() + ", got " +
                                              local.frame.label());
  }
  Vec3 dir = world_to_screen.transform_direction(local.direction);
  return GazeRay{world_to_screen.transform_point(local.origin), dir.normalized(),
                 world_to_screen.from_frame};
}

/// Rigidly re-express a ray through `pose` (ray must live in pose.to_frame).
inline GazeRay transform_ray(const Pose& pose, const GazeRay& ray) {
  if (!(ray.frame == pose.to_frame)) {
    throw Error(ErrorKind::FrameMismatch, "ray frame does not match pose");
  }
  return GazeRay{pose.transform_point(ray.origin), pose.transform_direction(ray.direction),
                 pose.from_frame};
}

/// Angle between two gaze directions, degrees in [0, 180].
inline double angular_shift(const Vec3& a, const Vec3& b) {
  double c = a.dot(b) / (a.norm() * b.norm());
  return rad_to_deg(std::acos(std::clamp(c, -1.0, 1.0)));
}

inline double angular_shift(const GazeRay& a, const GazeRay& b) {
  if (!(a.frame == b.frame)) {
    throw Error(ErrorKind::FrameMismatch, "gaze rays live in different frames");
  }
  return angular_shift(a.direction, b.direction);
}

/// Screen rectangle. Pose maps screen-centre coordinates into the frame the
/// rays are expressed in: local x right, y up, z out of the front face.
struct ScreenPlane {
  Pose pose = Pose::identity(FrameId::world(), FrameId::screen_centre());
  double width = 915.0;
  double height = 515.0;

  Vec3 normal() const { return pose.rotation.col(2); }
  Vec3 to_world(const Vec2& p) const { return pose.transform_point(Vec3(p.x(), p.y(), 0.0)); }
  bool contains(const Vec2& p) const {
    return std::abs(p.x()) <= 0.5 * width && std::abs(p.y()) <= 0.5 * height;
  }
};

inline constexpr double kParallelTolerance = 1e-9;

/// Where the ray meets the plane in screen coordinates (mm from the centre).
/// Empty when parallel, when the hit is behind the origin or on the back
/// face, or (with `bounded`) outside the rectangle.
inline std::optional<Vec2> ray_plane_intersection(const GazeRay& ray, const ScreenPlane& plane,
                                                  bool bounded = true) {
  if (!(ray.frame == plane.pose.from_frame)) {
    throw Error(ErrorKind::FrameMismatch, "ray and screen are expressed in different frames");
  }
  const Vec3 n = plane.normal();
  const double denom = n.dot(ray.direction);
  if (std::abs(denom) < kParallelTolerance || denom > 0.0) return std::nullopt;
  const double lambda = n.dot(plane.pose.translation - ray.origin) / denom;
  if (lambda < 0.0) return std::nullopt;
  const Vec3 rel = ray.at(lambda) - plane.pose.translation;
  Vec2 p(plane.pose.rotation.col(0).dot(rel), plane.pose.rotation.col(1).dot(rel));
  if (bounded && !plane.contains(p)) return std::nullopt;
  return p;
}

}  // namespace gazeattn::geometry
