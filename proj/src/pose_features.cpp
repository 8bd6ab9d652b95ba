#include "latdyn/pose_features.hpp"

#include <algorithm>
#include <cmath>

namespace latdyn {

const std::array<std::string, JointGroupMap::kNumGroups>& JointGroupMap::group_names() {
  static const std::array<std::string, kNumGroups> names = {
      "left_upper_leg", "right_upper_leg", "left_lower_leg", "right_lower_leg",
      "left_foot",      "right_foot",      "left_upper_arm", "right_upper_arm",
      "left_lower_arm", "right_lower_arm", "left_wrist",     "right_wrist",
      "core",           "head"};
  return names;
}

const std::array<std::pair<std::size_t, std::size_t>, JointGroupMap::kNumPairs>&
JointGroupMap::pairs() {
  static const std::array<std::pair<std::size_t, std::size_t>, kNumPairs> p = {
      {{0, 1}, {2, 3}, {4, 5}, {6, 7}, {8, 9}, {10, 11}}};
  return p;
}

void JointGroupMap::validate(std::size_t num_joints) const {
  for (std::size_t g = 0; g < kNumGroups; ++g) {
    if (groups[g].empty())
      throw ConfigError("JointGroupMap: group '" + group_names()[g] + "' is empty");
    for (std::size_t j : groups[g])
      if (j >= num_joints)
        throw ConfigError("JointGroupMap: group '" + group_names()[g] + "' references joint " +
                          std::to_string(j) + " but skeleton has " +
                          std::to_string(num_joints) + " joints");
  }
}

JointGroupMap JointGroupMap::default24() {
  // Generic 24-joint skeleton (pelvis-rooted, SMPL-style joint order).
  JointGroupMap m;
  m.groups = {{{1},       // left_upper_leg
               {2},       // right_upper_leg
               {4},       // left_lower_leg
               {5},       // right_lower_leg
               {7, 10},   // left_foot
               {8, 11},   // right_foot
               {13, 16},  // left_upper_arm
               {14, 17},  // right_upper_arm
               {18},      // left_lower_arm
               {19},      // right_lower_arm
               {20, 22},  // left_wrist
               {21, 23},  // right_wrist
               {0, 3, 6, 9},  // core
               {12, 15}}};    // head
  return m;
}

namespace {
double mag(const so3::AxisAngle& a) {
  return std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]);
}
}  // namespace

namespace {
// Sum in ascending value order: the result then depends only on the multiset
// of addends, so shuffling joints within a group is bit-exactly invariant.
double ordered_sum(std::vector<double>& vals) {
  std::sort(vals.begin(), vals.end());
  double s = 0.0;
  for (double v : vals) s += v;
  return s;
}
}  // namespace

GroupStats group_stats(const KinematicsFrame& kin, const std::vector<std::size_t>& group) {
  if (group.empty()) throw ConfigError("group_stats: empty joint group");
  std::size_t n = group.size();
  std::vector<double> mxi(n), momega(n), malpha(n), meta(n);
  std::array<std::vector<double>, 3> cxi, comega;
  for (int k = 0; k < 3; ++k) {
    cxi[k].resize(n);
    comega[k].resize(n);
  }
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t j = group[i];
    mxi[i] = mag(kin.xi[j]);
    momega[i] = mag(kin.omega[j]);
    malpha[i] = mag(kin.alpha[j]);
    meta[i] = mag(kin.eta[j]);
    for (int k = 0; k < 3; ++k) {
      cxi[k][i] = kin.xi[j][k];
      comega[k][i] = kin.omega[j][k];
    }
  }
  double inv_n = 1.0 / static_cast<double>(n);
  GroupStats s;
  s.mean_mag_xi = ordered_sum(mxi) * inv_n;
  s.mean_mag_omega = ordered_sum(momega) * inv_n;
  s.mean_mag_alpha = ordered_sum(malpha) * inv_n;
  s.mean_mag_eta = ordered_sum(meta) * inv_n;
  so3::AxisAngle sum_xi, sum_omega;
  for (int k = 0; k < 3; ++k) {
    sum_xi[k] = ordered_sum(cxi[k]) * inv_n;
    sum_omega[k] = ordered_sum(comega[k]) * inv_n;
  }
  s.coherent_xi = mag(sum_xi);
  s.coherent_omega = mag(sum_omega);
  return s;
}

std::array<double, 2> symmetry_features(const GroupStats& left, const GroupStats& right) {
  return {left.mean_mag_omega - right.mean_mag_omega,
          left.mean_mag_alpha - right.mean_mag_alpha};
}

SequenceKinematics SequenceKinematics::compute(const so3::RotationSequence& seq,
                                               const std::vector<so3::Rotation>& ref) {
  SequenceKinematics k;
  k.frames = seq.frames;
  k.joints = seq.joints;
  k.xi = so3::pose_to_reference(seq, ref);
  k.omega = so3::angular_velocity(seq);
  k.alpha = so3::angular_acceleration(k.omega, seq.frames, seq.joints, seq.frame_interval);
  k.eta = so3::angular_jerk(k.alpha, seq.frames, seq.joints, seq.frame_interval);
  return k;
}

Vec pose_descriptor(const SequenceKinematics& kin, std::size_t t, const JointGroupMap& map) {
  if (t >= kin.frames) throw DimensionError("pose_descriptor: frame index out of range");
  map.validate(kin.joints);
  KinematicsFrame fr = kin.frame(t);

  std::array<GroupStats, JointGroupMap::kNumGroups> stats;
  Vec out;
  out.reserve(kPoseDescriptorDim);
  for (std::size_t g = 0; g < JointGroupMap::kNumGroups; ++g) {
    stats[g] = group_stats(fr, map.groups[g]);
    out.push_back(stats[g].mean_mag_xi);
    out.push_back(stats[g].mean_mag_omega);
    out.push_back(stats[g].mean_mag_alpha);
    out.push_back(stats[g].mean_mag_eta);
    out.push_back(stats[g].coherent_xi);
    out.push_back(stats[g].coherent_omega);
  }
  for (const auto& [l, r] : JointGroupMap::pairs()) {
    auto sym = symmetry_features(stats[l], stats[r]);
    out.push_back(sym[0]);
    out.push_back(sym[1]);
  }
  return out;
}

Matrix pose_descriptors(const so3::RotationSequence& seq,
                        const std::vector<so3::Rotation>& ref, const JointGroupMap& map) {
  SequenceKinematics kin = SequenceKinematics::compute(seq, ref);
  Matrix out(seq.frames, kPoseDescriptorDim);
  for (std::size_t t = 0; t < seq.frames; ++t) {
    Vec d = pose_descriptor(kin, t, map);
    std::copy(d.begin(), d.end(), out.row(t));
  }
  return out;
}

Vec state_feature(const Vec& z, const Vec& v) {
  if (z.size() != v.size())
    throw DimensionError("state_feature: z has length " + std::to_string(z.size()) +
                         ", v has length " + std::to_string(v.size()));
  Vec out;
  out.reserve(2 * z.size() + 1);
  out.insert(out.end(), z.begin(), z.end());
  out.insert(out.end(), v.begin(), v.end());
  out.push_back(norm2(v));
  return out;
}

}  // namespace latdyn
