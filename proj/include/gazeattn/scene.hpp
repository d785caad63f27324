#pragma once

#include "gazeattn/game.hpp"
#include "gazeattn/geometry.hpp"

namespace gazeattn {

/// Physical layout shared by the simulated user and the live service: the
/// game screen at the world origin, facing a viewer whose eyes sit on the
/// screen normal through its centre.
struct Scene {
  geometry::ScreenPlane screen;
  geometry::Vec3 eye = geometry::Vec3(0.0, 0.0, 700.0);

  static Scene for_game(const game::GameConfig& cfg, double eye_distance = 700.0) {
    Scene s;
    s.screen.width = cfg.screen_width;
    s.screen.height = cfg.screen_height;
    s.eye = geometry::Vec3(0.0, 0.0, eye_distance);
    return s;
  }

  double eye_distance() const { return eye.z(); }

  /// Ray from the eye through a screen point (screen mm).
  geometry::GazeRay ray_to(const geometry::Vec2& p) const {
    return geometry::GazeRay{eye, (screen.to_world(p) - eye).normalized(),
                             screen.pose.from_frame};
  }
};

}  // namespace gazeattn
