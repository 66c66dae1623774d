#pragma once

#include <stdexcept>
#include <utility>

#include "fovea/quaternion.hpp"

namespace fovea {

inline constexpr double kUnitDualTolerance = 1e-10;

// Dual quaternion p + eps d with eps != 0, eps^2 = 0.
// Unit dual quaternions represent poses: x = r + 0.5 eps t r.
struct DualQuaternion {
  Quaternion p;  // primary
  Quaternion d;  // dual

  constexpr DualQuaternion() : p(1.0, 0.0, 0.0, 0.0), d() {}
  constexpr DualQuaternion(const Quaternion& primary, const Quaternion& dual)
      : p(primary), d(dual) {}

  static DualQuaternion identity() { return {}; }

  // Pose from unit rotation r and pure translation t.
  static DualQuaternion from_pose(const Quaternion& r, const Quaternion& t) {
    return {r, 0.5 * (t * r)};
  }

  static DualQuaternion from_rotation(const Quaternion& r) {
    return {r, Quaternion{}};
  }

  static DualQuaternion from_translation(const Quaternion& t) {
    return {Quaternion{1.0, 0.0, 0.0, 0.0}, 0.5 * t};
  }

  DualQuaternion conj() const { return {p.conj(), d.conj()}; }

  bool is_unit(double tol = kUnitDualTolerance) const {
    return std::abs(p.norm() - 1.0) <= tol && std::abs(dot(p, d)) <= tol;
  }

  // Rotation part of a unit dual quaternion.
  Quaternion rotation() const { return p; }

  // Translation t = 2 d p* of a unit dual quaternion.
  Quaternion translation() const { return 2.0 * (d * p.conj()); }

  // Projects back onto the unit manifold: normalizes the primary part and
  // removes the dual component parallel to it.
  DualQuaternion normalized() const {
    const Quaternion pn = p.normalized();
    const double n = p.norm();
    const Quaternion dn = (1.0 / n) * d;
    return {pn, dn - dot(dn, pn) * pn};
  }
};

inline DualQuaternion operator+(const DualQuaternion& a,
                                const DualQuaternion& b) {
  return {a.p + b.p, a.d + b.d};
}

inline DualQuaternion operator-(const DualQuaternion& a,
                                const DualQuaternion& b) {
  return {a.p - b.p, a.d - b.d};
}

inline DualQuaternion operator*(double s, const DualQuaternion& q) {
  return {s * q.p, s * q.d};
}

// (p + eps d)(p' + eps d') = p p' + eps (p d' + d p').
inline DualQuaternion operator*(const DualQuaternion& a,
                                const DualQuaternion& b) {
  return {a.p * b.p, a.p * b.d + a.d * b.p};
}

inline DualQuaternion pose_compose(const DualQuaternion& a,
                                   const DualQuaternion& b) {
  if (!a.is_unit() || !b.is_unit()) {
    throw std::domain_error("pose_compose: inputs must be unit dual quaternions");
  }
  return a * b;
}

struct RotationTranslation {
  Quaternion rotation;
  Quaternion translation;  // pure
};

// Inverts x = r + 0.5 eps t r: returns (r, t) with t = 2 d p*.
inline RotationTranslation pose_decompose(const DualQuaternion& x) {
  if (!x.is_unit()) {
    throw std::domain_error("pose_decompose: input must be a unit dual quaternion");
  }
  return {x.rotation(), x.translation()};
}

// Plucker line: pure unit direction l and moment p_l x l.
struct PluckerLine {
  Quaternion direction;
  Quaternion moment;

  // Line through `point` with unit direction `dir` (both pure).
  static PluckerLine through_point(const Quaternion& dir,
                                   const Quaternion& point) {
    if (!dir.is_pure(1e-9) || std::abs(dir.norm() - 1.0) > 1e-9) {
      throw std::domain_error("PluckerLine: direction must be pure and unit");
    }
    return {dir, cross(point, dir)};
  }
};

}  // namespace fovea
