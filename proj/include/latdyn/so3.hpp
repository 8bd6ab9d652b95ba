#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "latdyn/errors.hpp"

namespace latdyn::so3 {

// Axis-angle vector: direction = axis, magnitude = angle in radians.
using AxisAngle = std::array<double, 3>;

// Unit quaternion, canonicalized so w >= 0 (tie: first nonzero component
// positive). q and -q denote the same rotation.
class Rotation {
 public:
  Rotation() = default;  // identity
  Rotation(double w, double x, double y, double z);

  // Trusted constructor for deserialization: verifies unit norm within tol
  // and canonicalizes the sign, but does not renormalize, so stored bytes
  // survive a load/save round trip.
  static Rotation from_unit(double w, double x, double y, double z, double tol = 1e-9);

  double w() const { return w_; }
  double x() const { return x_; }
  double y() const { return y_; }
  double z() const { return z_; }

  // Conjugate of a unit quaternion; no renormalization, so q^-1 * q cancels
  // exactly to the identity. A half-turn (w = 0) is its own inverse.
  Rotation inverse() const {
    if (w_ == 0.0) return *this;
    Rotation r;
    r.w_ = w_;
    r.x_ = -x_;
    r.y_ = -y_;
    r.z_ = -z_;
    return r;
  }

  // Hamilton product, renormalized and canonicalized.
  Rotation operator*(const Rotation& o) const;

  // 3x3 rotation matrix, row-major.
  std::array<double, 9> matrix() const;

  double norm() const;

  bool approx_equal(const Rotation& o, double tol = 1e-12) const;

 private:
  double w_ = 1.0, x_ = 0.0, y_ = 0.0, z_ = 0.0;

  void normalize_canonicalize();
};

Rotation exp_map(const AxisAngle& v);
AxisAngle log_map(const Rotation& r);

// Ra^{-1} * Rb
Rotation relative_rotation(const Rotation& ra, const Rotation& rb);

double angle_of(const Rotation& r);

// T frames x J joints of unit quaternions.
struct RotationSequence {
  std::size_t joints = 0;
  std::size_t frames = 0;
  std::vector<Rotation> data;  // frame-major: data[t * joints + j]
  double frame_interval = 1.0;

  RotationSequence() = default;
  RotationSequence(std::size_t t, std::size_t j, double dt = 1.0)
      : joints(j), frames(t), data(t * j), frame_interval(dt) {
    if (t < 1 || j < 1) throw DimensionError("RotationSequence: T >= 1 and J >= 1 required");
  }

  Rotation& at(std::size_t t, std::size_t j) { return data[t * joints + j]; }
  const Rotation& at(std::size_t t, std::size_t j) const { return data[t * joints + j]; }
};

// T x J fields of axis-angle vectors, frame-major like RotationSequence.
using AxisAngleField = std::vector<AxisAngle>;

// xi_t^j = log(R_ref^T R_t^j); zero where the frame equals the reference.
AxisAngleField pose_to_reference(const RotationSequence& seq,
                                 const std::vector<Rotation>& ref);

// omega_t^j = (1/dt) log(R_{t-1}^T R_t); zero at t = 0.
AxisAngleField angular_velocity(const RotationSequence& seq);

// Forward finite difference of a T x J field; zero at t = 0.
AxisAngleField finite_difference(const AxisAngleField& f, std::size_t frames,
                                 std::size_t joints, double dt);

inline AxisAngleField angular_acceleration(const AxisAngleField& omega,
                                           std::size_t frames, std::size_t joints,
                                           double dt) {
  return finite_difference(omega, frames, joints, dt);
}

inline AxisAngleField angular_jerk(const AxisAngleField& alpha, std::size_t frames,
                                   std::size_t joints, double dt) {
  return finite_difference(alpha, frames, joints, dt);
}

}  // namespace latdyn::so3
