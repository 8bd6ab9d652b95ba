#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "latdyn/linalg.hpp"
#include "latdyn/so3.hpp"

namespace latdyn {

// The 14 anatomical groups in canonical layout order, then the 6 bilateral
// (left, right) pairs in leg-to-wrist order. The layout is fixed so that
// descriptors and checkpoints stay stable across runs.
struct JointGroupMap {
  static constexpr std::size_t kNumGroups = 14;
  static constexpr std::size_t kNumPairs = 6;

  // Canonical group-name order.
  static const std::array<std::string, kNumGroups>& group_names();
  // Pairs as (left index, right index) into the canonical group order.
  static const std::array<std::pair<std::size_t, std::size_t>, kNumPairs>& pairs();

  std::array<std::vector<std::size_t>, kNumGroups> groups;

  // Throws ConfigError on empty groups, DimensionError on out-of-range joints.
  void validate(std::size_t num_joints) const;

  // Built-in map for a generic 24-joint skeleton.
  static JointGroupMap default24();
};

inline constexpr std::size_t kPoseDescriptorDim =
    6 * JointGroupMap::kNumGroups + 2 * JointGroupMap::kNumPairs;
static_assert(kPoseDescriptorDim == 96);

struct GroupStats {
  double mean_mag_xi = 0.0;
  double mean_mag_omega = 0.0;
  double mean_mag_alpha = 0.0;
  double mean_mag_eta = 0.0;
  double coherent_xi = 0.0;     // || E xi ||
  double coherent_omega = 0.0;  // || E omega ||
};

// Per-frame slices of the four kinematic fields for one frame t.
struct KinematicsFrame {
  const so3::AxisAngle* xi;
  const so3::AxisAngle* omega;
  const so3::AxisAngle* alpha;
  const so3::AxisAngle* eta;
  std::size_t joints;
};

GroupStats group_stats(const KinematicsFrame& kin, const std::vector<std::size_t>& group);

// [ E|omega|_L - E|omega|_R, E|alpha|_L - E|alpha|_R ]
std::array<double, 2> symmetry_features(const GroupStats& left, const GroupStats& right);

// Precomputed kinematics for a whole sequence; pose_descriptor() indexes into it.
struct SequenceKinematics {
  std::size_t frames = 0;
  std::size_t joints = 0;
  so3::AxisAngleField xi, omega, alpha, eta;

  static SequenceKinematics compute(const so3::RotationSequence& seq,
                                    const std::vector<so3::Rotation>& ref);

  KinematicsFrame frame(std::size_t t) const {
    return {xi.data() + t * joints, omega.data() + t * joints,
            alpha.data() + t * joints, eta.data() + t * joints, joints};
  }
};

// The 96-d f_pose at frame t: 14 groups x 6 scalars, then 6 pairs x 2.
Vec pose_descriptor(const SequenceKinematics& kin, std::size_t t, const JointGroupMap& map);

// All frames as a T x 96 matrix.
Matrix pose_descriptors(const so3::RotationSequence& seq,
                        const std::vector<so3::Rotation>& ref, const JointGroupMap& map);

// f_state = [z; v; |v|_2], length 2 d_z + 1.
Vec state_feature(const Vec& z, const Vec& v);

}  // namespace latdyn
