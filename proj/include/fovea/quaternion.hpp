#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace fovea {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat4 = Eigen::Matrix4d;

inline constexpr double kUnitTolerance = 1e-12;
inline constexpr double kPureTolerance = 1e-12;

// Quaternion w + x i + y j + z k, stored in the vec4 order (w, x, y, z).
struct Quaternion {
  double w{0.0};
  double x{0.0};
  double y{0.0};
  double z{0.0};

  constexpr Quaternion() = default;
  constexpr Quaternion(double w_, double x_, double y_, double z_)
      : w(w_), x(x_), y(y_), z(z_) {}

  static Quaternion pure(const Vec3& v) { return {0.0, v.x(), v.y(), v.z()}; }

  // Rotation of `angle` radians about a unit axis.
  static Quaternion rotation(double angle, const Vec3& axis) {
    const double n = axis.norm();
    if (std::abs(n - 1.0) > 1e-9) {
      throw std::domain_error("Quaternion::rotation: axis must be unit, norm=" +
                              std::to_string(n));
    }
    const double h = 0.5 * angle;
    const double s = std::sin(h);
    return {std::cos(h), axis.x() * s, axis.y() * s, axis.z() * s};
  }

  double norm_squared() const { return w * w + x * x + y * y + z * z; }
  double norm() const { return std::sqrt(norm_squared()); }

  bool is_pure(double tol = kPureTolerance) const { return std::abs(w) <= tol; }
  bool is_unit(double tol = kUnitTolerance) const {
    return std::abs(norm() - 1.0) <= tol;
  }

  Quaternion conj() const { return {w, -x, -y, -z}; }

  Quaternion normalized() const {
    const double n = norm();
    if (n == 0.0) {
      throw std::domain_error("Quaternion::normalized: zero norm");
    }
    return {w / n, x / n, y / n, z / n};
  }
};

inline Quaternion operator+(const Quaternion& a, const Quaternion& b) {
  return {a.w + b.w, a.x + b.x, a.y + b.y, a.z + b.z};
}

inline Quaternion operator-(const Quaternion& a, const Quaternion& b) {
  return {a.w - b.w, a.x - b.x, a.y - b.y, a.z - b.z};
}

inline Quaternion operator-(const Quaternion& a) {
  return {-a.w, -a.x, -a.y, -a.z};
}

inline Quaternion operator*(double s, const Quaternion& q) {
  return {s * q.w, s * q.x, s * q.y, s * q.z};
}

inline Quaternion operator*(const Quaternion& q, double s) { return s * q; }

// Hamilton product.
inline Quaternion operator*(const Quaternion& a, const Quaternion& b) {
  return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
          a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
          a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
          a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}

inline Quaternion qmul(const Quaternion& a, const Quaternion& b) {
  return a * b;
}

inline double dot(const Quaternion& a, const Quaternion& b) {
  return a.w * b.w + a.x * b.x + a.y * b.y + a.z * b.z;
}

// Pure-quaternion cross product, (ab - ba)/2.
inline Quaternion cross(const Quaternion& a, const Quaternion& b) {
  return 0.5 * (a * b - b * a);
}

inline Vec4 vec4(const Quaternion& q) { return {q.w, q.x, q.y, q.z}; }

inline Quaternion from_vec4(const Vec4& v) { return {v(0), v(1), v(2), v(3)}; }

// vec3 of a pure quaternion. Non-pure input is a domain error.
inline Vec3 vec3(const Quaternion& q, double tol = kPureTolerance) {
  if (!q.is_pure(tol)) {
    throw std::domain_error("vec3: quaternion is not pure, w=" +
                            std::to_string(q.w));
  }
  return {q.x, q.y, q.z};
}

inline Quaternion from_vec3(const Vec3& v) { return Quaternion::pure(v); }

// H+4(a): vec4(a b) = H+4(a) vec4(b).
inline Mat4 hamilton_plus4(const Quaternion& q) {
  Mat4 m;
  m << q.w, -q.x, -q.y, -q.z,
       q.x,  q.w, -q.z,  q.y,
       q.y,  q.z,  q.w, -q.x,
       q.z, -q.y,  q.x,  q.w;
  return m;
}

// H-4(b): vec4(a b) = H-4(b) vec4(a).
inline Mat4 hamilton_minus4(const Quaternion& q) {
  Mat4 m;
  m << q.w, -q.x, -q.y, -q.z,
       q.x,  q.w,  q.z, -q.y,
       q.y, -q.z,  q.w,  q.x,
       q.z,  q.y, -q.x,  q.w;
  return m;
}

// C4: vec4(q*) = C4 vec4(q).
inline Mat4 conjugation_map4() {
  return Vec4(1.0, -1.0, -1.0, -1.0).asDiagonal();
}

// Ad(r) p = r p r* for unit r and pure p.
inline Quaternion adjoint(const Quaternion& r, const Quaternion& p,
                          double unit_tol = 1e-9) {
  if (std::abs(r.norm() - 1.0) > unit_tol) {
    throw std::domain_error("adjoint: rotation must be unit, norm=" +
                            std::to_string(r.norm()));
  }
  return r * p * r.conj();
}

// d/ds [r v r*] as a function of vec4(r-dot), for fixed v:
//   vec4(rd v r* + r v rd*) = [H-4(v r*) + H+4(r v) C4] vec4(rd).
inline Mat4 adjoint_jacobian_wrt_rotation(const Quaternion& r,
                                          const Quaternion& v) {
  return hamilton_minus4(v * r.conj()) +
         hamilton_plus4(r * v) * conjugation_map4();
}

}  // namespace fovea
