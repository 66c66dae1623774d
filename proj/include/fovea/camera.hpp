#pragma once

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "fovea/dual_quaternion.hpp"
#include "fovea/quaternion.hpp"

namespace fovea {

// Tool tip and optical center closer than this is a geometric degeneracy;
// the collision constraints exclude it by a wide margin.
inline constexpr double kMinLineSeparation = 1e-3;  // m

struct PinholeIntrinsics {
  double focal_length{0.075};    // m
  double pixel_pitch_x{2.5e-6};  // m/px
  double pixel_pitch_y{2.5e-6};  // m/px
  int width{1920};               // px
  int height{1080};              // px

  void validate() const {
    if (!(focal_length > 0.0) || !(pixel_pitch_x > 0.0) || !(pixel_pitch_y > 0.0)) {
      throw std::invalid_argument("PinholeIntrinsics: f, s_x, s_y must be > 0");
    }
  }
};

// One tracked pixel and the line direction it determines.
struct LineMeasurement {
  Quaternion direction;  // pure unit, optical frame
  double u{0.0};
  double v{0.0};
  double timestamp{0.0};
};

// Direction of the sight line through a center-adjusted pixel (u, v):
//   (u s_x i + v s_y j - f k) / norm.
// Never singular: the denominator is at least f.
inline Quaternion measure_line_direction(const PinholeIntrinsics& intr, double u,
                                         double v) {
  const double px = u * intr.pixel_pitch_x;
  const double py = v * intr.pixel_pitch_y;
  const double pz = -intr.focal_length;
  const double n = std::sqrt(px * px + py * py + pz * pz);
  return {0.0, px / n, py / n, pz / n};
}

// World-frame direction from the optical center t2 to the tool tip t1.
inline Quaternion estimated_line_direction(const Quaternion& t1,
                                           const Quaternion& t2) {
  const Quaternion h = t1 - t2;
  const double n = h.norm();
  if (n <= kMinLineSeparation) {
    throw std::domain_error("estimated_line_direction: points closer than d_min");
  }
  return (1.0 / n) * h;
}

// Maps a world-frame line direction into the optical frame: Ad(r2*) l.
inline Quaternion to_optical_frame(const Quaternion& r2,
                                   const Quaternion& l_world) {
  return adjoint(r2.conj(), l_world);
}

struct PixelProjection {
  double u{0.0};
  double v{0.0};
  bool behind_camera{false};
};

// Projects a world point through the camera pose; the optical axis is -k in
// the optical frame, so points in front have negative k-component there.
inline PixelProjection project_point(const PinholeIntrinsics& intr,
                                     const DualQuaternion& camera_pose,
                                     const Quaternion& p_world) {
  const Quaternion r = camera_pose.rotation();
  const Quaternion t = camera_pose.translation();
  const Quaternion rel = p_world - t;
  if (rel.norm() < kMinLineSeparation) {
    throw std::domain_error("project_point: point at the optical center");
  }
  const Quaternion c = adjoint(r.conj(), rel);
  PixelProjection out;
  if (c.z >= 0.0) {
    out.behind_camera = true;
    return out;
  }
  const double scale = -intr.focal_length / c.z;
  out.u = scale * c.x / intr.pixel_pitch_x;
  out.v = scale * c.y / intr.pixel_pitch_y;
  return out;
}

// Center-adjusted pixel inside a centered w x h subregion?
inline bool in_subregion(double u, double v, double sub_width, double sub_height) {
  return std::abs(u) <= 0.5 * sub_width && std::abs(v) <= 0.5 * sub_height;
}

inline bool in_image(const PinholeIntrinsics& intr, double u, double v) {
  return in_subregion(u, v, static_cast<double>(intr.width),
                      static_cast<double>(intr.height));
}

// Jacobian of l = h / ||h|| with respect to whatever drives h, given
// vec4(h-dot) = Jh * u. For pure h this is
//   (I/||h|| + A1) Jh,  A1 = 0.5 ||h||^-3 H+4(h) (H+4(h) + H-4(h)).
inline Eigen::MatrixXd unit_vector_jacobian(const Quaternion& h,
                                            const Eigen::MatrixXd& jh) {
  const double n = h.norm();
  if (n <= kMinLineSeparation) {
    throw std::domain_error("unit_vector_jacobian: degenerate direction");
  }
  const Mat4 hp = hamilton_plus4(h);
  const Mat4 a1 = 0.5 / (n * n * n) * (hp * (hp + hamilton_minus4(h)));
  return (Mat4::Identity() / n + a1) * jh;
}

}  // namespace fovea
