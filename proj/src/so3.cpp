#include "latdyn/so3.hpp"

#include <cmath>

namespace latdyn::so3 {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kSmallAngle = 1e-4;   // Taylor branch below this
constexpr double kNearPiGap = 1e-4;    // matrix branch above pi - this
}  // namespace

Rotation::Rotation(double w, double x, double y, double z) : w_(w), x_(x), y_(y), z_(z) {
  normalize_canonicalize();
}

void Rotation::normalize_canonicalize() {
  double n = std::sqrt(w_ * w_ + x_ * x_ + y_ * y_ + z_ * z_);
  if (n == 0.0) throw DimensionError("Rotation: zero quaternion");
  w_ /= n;
  x_ /= n;
  y_ /= n;
  z_ /= n;
  double sign = 0.0;
  if (w_ != 0.0) sign = w_;
  else if (x_ != 0.0) sign = x_;
  else if (y_ != 0.0) sign = y_;
  else sign = z_;
  if (sign < 0.0) {
    w_ = -w_;
    x_ = -x_;
    y_ = -y_;
    z_ = -z_;
  }
}

Rotation Rotation::from_unit(double w, double x, double y, double z, double tol) {
  double n = std::sqrt(w * w + x * x + y * y + z * z);
  if (std::abs(n - 1.0) > tol)
    throw FormatError("Rotation::from_unit: quaternion norm " + std::to_string(n) +
                      " is not 1");
  double sign;
  if (w != 0.0) sign = w;
  else if (x != 0.0) sign = x;
  else if (y != 0.0) sign = y;
  else sign = z;
  Rotation r;
  double s = sign < 0.0 ? -1.0 : 1.0;
  r.w_ = s * w;
  r.x_ = s * x;
  r.y_ = s * y;
  r.z_ = s * z;
  return r;
}

Rotation Rotation::operator*(const Rotation& o) const {
  return Rotation(w_ * o.w_ - x_ * o.x_ - y_ * o.y_ - z_ * o.z_,
                  w_ * o.x_ + x_ * o.w_ + y_ * o.z_ - z_ * o.y_,
                  w_ * o.y_ - x_ * o.z_ + y_ * o.w_ + z_ * o.x_,
                  w_ * o.z_ + x_ * o.y_ - y_ * o.x_ + z_ * o.w_);
}

std::array<double, 9> Rotation::matrix() const {
  double w = w_, x = x_, y = y_, z = z_;
  return {1 - 2 * (y * y + z * z), 2 * (x * y - w * z),     2 * (x * z + w * y),
          2 * (x * y + w * z),     1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
          2 * (x * z - w * y),     2 * (y * z + w * x),     1 - 2 * (x * x + y * y)};
}

double Rotation::norm() const {
  return std::sqrt(w_ * w_ + x_ * x_ + y_ * y_ + z_ * z_);
}

bool Rotation::approx_equal(const Rotation& o, double tol) const {
  return std::abs(w_ - o.w_) < tol && std::abs(x_ - o.x_) < tol &&
         std::abs(y_ - o.y_) < tol && std::abs(z_ - o.z_) < tol;
}

Rotation exp_map(const AxisAngle& v) {
  double angle = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
  double half = 0.5 * angle;
  double k;  // sin(angle/2) / angle
  if (angle < kSmallAngle) {
    k = 0.5 - angle * angle / 48.0;
  } else {
    k = std::sin(half) / angle;
  }
  return Rotation(std::cos(half), k * v[0], k * v[1], k * v[2]);
}

double angle_of(const Rotation& r) {
  double n = std::sqrt(r.x() * r.x() + r.y() * r.y() + r.z() * r.z());
  return 2.0 * std::atan2(n, r.w());
}

AxisAngle log_map(const Rotation& r) {
  double n = std::sqrt(r.x() * r.x() + r.y() * r.y() + r.z() * r.z());
  double angle = 2.0 * std::atan2(n, r.w());  // in [0, pi] since w >= 0

  if (angle < kSmallAngle) {
    // second-order Taylor of angle / sin(angle/2) / 2... scale = angle/n with
    // n = sin(angle/2): angle/n = 2/w * (1 - n^2 / (3 w^2))
    double w = r.w();
    double s = 2.0 / w * (1.0 - (n * n) / (3.0 * w * w));
    return {s * r.x(), s * r.y(), s * r.z()};
  }

  if (angle > kPi - kNearPiGap) {
    // Axis from the rotation matrix diagonal: u_i^2 = (R_ii - cos a)/(1 - cos a).
    auto m = r.matrix();
    double ca = std::cos(angle);
    double d = 1.0 - ca;
    double u0 = std::sqrt(std::max(0.0, (m[0] - ca) / d));
    double u1 = std::sqrt(std::max(0.0, (m[4] - ca) / d));
    double u2 = std::sqrt(std::max(0.0, (m[8] - ca) / d));
    // Signs from the symmetric off-diagonal products u_i u_j = (R_ij + R_ji)/(2d),
    // anchored at the largest component.
    if (u0 >= u1 && u0 >= u2) {
      if (m[1] + m[3] < 0.0) u1 = -u1;
      if (m[2] + m[6] < 0.0) u2 = -u2;
    } else if (u1 >= u2) {
      if (m[1] + m[3] < 0.0) u0 = -u0;
      if (m[5] + m[7] < 0.0) u2 = -u2;
    } else {
      if (m[2] + m[6] < 0.0) u0 = -u0;
      if (m[5] + m[7] < 0.0) u1 = -u1;
    }
    // Orient like the quaternion vector part so log(R^-1) = -log(R) holds
    // approaching pi.
    double d_q = u0 * r.x() + u1 * r.y() + u2 * r.z();
    double sgn = d_q < 0.0 ? -1.0 : 1.0;
    return {sgn * angle * u0, sgn * angle * u1, sgn * angle * u2};
  }

  double s = angle / n;
  return {s * r.x(), s * r.y(), s * r.z()};
}

Rotation relative_rotation(const Rotation& ra, const Rotation& rb) {
  // Identical rotations give exactly the identity; the rounded Hamilton
  // product would leave ~1e-17 residue in the vector part.
  if (ra.w() == rb.w() && ra.x() == rb.x() && ra.y() == rb.y() && ra.z() == rb.z())
    return Rotation();
  return ra.inverse() * rb;
}

AxisAngleField pose_to_reference(const RotationSequence& seq,
                                 const std::vector<Rotation>& ref) {
  if (ref.size() != seq.joints)
    throw DimensionError("pose_to_reference: reference has " + std::to_string(ref.size()) +
                         " joints, sequence has " + std::to_string(seq.joints));
  AxisAngleField out(seq.frames * seq.joints);
  for (std::size_t t = 0; t < seq.frames; ++t)
    for (std::size_t j = 0; j < seq.joints; ++j)
      out[t * seq.joints + j] = log_map(relative_rotation(ref[j], seq.at(t, j)));
  return out;
}

AxisAngleField angular_velocity(const RotationSequence& seq) {
  AxisAngleField out(seq.frames * seq.joints, {0.0, 0.0, 0.0});
  double inv_dt = 1.0 / seq.frame_interval;
  for (std::size_t t = 1; t < seq.frames; ++t)
    for (std::size_t j = 0; j < seq.joints; ++j) {
      AxisAngle v = log_map(relative_rotation(seq.at(t - 1, j), seq.at(t, j)));
      out[t * seq.joints + j] = {v[0] * inv_dt, v[1] * inv_dt, v[2] * inv_dt};
    }
  return out;
}

AxisAngleField finite_difference(const AxisAngleField& f, std::size_t frames,
                                 std::size_t joints, double dt) {
  if (f.size() != frames * joints)
    throw DimensionError("finite_difference: field size does not match T x J");
  AxisAngleField out(frames * joints, {0.0, 0.0, 0.0});
  double inv_dt = 1.0 / dt;
  for (std::size_t t = 1; t < frames; ++t)
    for (std::size_t j = 0; j < joints; ++j) {
      const AxisAngle& a = f[t * joints + j];
      const AxisAngle& b = f[(t - 1) * joints + j];
      out[t * joints + j] = {(a[0] - b[0]) * inv_dt, (a[1] - b[1]) * inv_dt,
                             (a[2] - b[2]) * inv_dt};
    }
  return out;
}

}  // namespace latdyn::so3
