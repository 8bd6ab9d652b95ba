#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "latdyn/pose_features.hpp"
#include "latdyn/rng.hpp"

using namespace latdyn;
using so3::AxisAngle;
using so3::Rotation;
using so3::RotationSequence;

namespace {

RotationSequence random_sequence(std::size_t T, std::size_t J, std::uint64_t seed) {
  Rng rng(seed);
  RotationSequence seq(T, J);
  for (auto& q : seq.data)
    q = so3::exp_map({rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)});
  return seq;
}

std::vector<Rotation> frame0(const RotationSequence& seq) {
  return std::vector<Rotation>(seq.data.begin(), seq.data.begin() + seq.joints);
}

}  // namespace

TEST_CASE("descriptor width is exactly 96") {
  CHECK(kPoseDescriptorDim == 96);
  auto seq = random_sequence(6, 24, 1);
  Matrix d = pose_descriptors(seq, frame0(seq), JointGroupMap::default24());
  CHECK(d.rows == 6);
  CHECK(d.cols == 96);
}

TEST_CASE("static sequence yields all-zero descriptors") {
  Rng rng(2);
  RotationSequence seq(8, 24);
  for (std::size_t j = 0; j < 24; ++j) {
    Rotation r = so3::exp_map({rng.normal(), rng.normal(), rng.normal()});
    for (std::size_t t = 0; t < 8; ++t) seq.at(t, j) = r;
  }
  Matrix d = pose_descriptors(seq, frame0(seq), JointGroupMap::default24());
  for (double x : d.data) CHECK(x == 0.0);
}

TEST_CASE("group_stats closed forms") {
  // one-joint group, xi = (0,0,theta), rest zero
  AxisAngle xi = {0, 0, 0.6}, zero = {0, 0, 0};
  KinematicsFrame kin{&xi, &zero, &zero, &zero, 1};
  GroupStats s = group_stats(kin, {0});
  CHECK(s.mean_mag_xi == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(s.mean_mag_omega == 0.0);
  CHECK(s.mean_mag_alpha == 0.0);
  CHECK(s.mean_mag_eta == 0.0);
  CHECK(s.coherent_xi == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(s.coherent_omega == 0.0);

  // two joints with opposite omega: E|w| = w, |E w| = 0
  AxisAngle xis[2] = {{0, 0, 0}, {0, 0, 0}};
  AxisAngle oms[2] = {{0.4, 0, 0}, {-0.4, 0, 0}};
  AxisAngle zs[2] = {{0, 0, 0}, {0, 0, 0}};
  KinematicsFrame kin2{xis, oms, zs, zs, 2};
  GroupStats s2 = group_stats(kin2, {0, 1});
  CHECK(s2.mean_mag_omega == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(s2.coherent_omega == 0.0);

  CHECK_THROWS_AS(group_stats(kin2, {}), ConfigError);
}

TEST_CASE("symmetry features") {
  GroupStats l, r;
  l.mean_mag_omega = 0.3;
  r.mean_mag_omega = 0.1;
  l.mean_mag_alpha = 0.05;
  r.mean_mag_alpha = 0.2;
  auto f = symmetry_features(l, r);
  CHECK(f[0] == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(f[1] == doctest::Approx(-0.15).epsilon(1e-15));
  auto g = symmetry_features(r, l);
  CHECK(g[0] == -f[0]);
  CHECK(g[1] == -f[1]);
  CHECK(symmetry_features(l, l)[0] == 0.0);
}

TEST_CASE("within-group permutation invariance is bit-exact") {
  auto map = JointGroupMap::default24();
  auto seq = random_sequence(10, 24, 3);
  auto ref = frame0(seq);
  Matrix base = pose_descriptors(seq, ref, map);

  // core group {0,3,6,9}: permute the joint streams within the group
  RotationSequence perm = seq;
  std::vector<std::size_t> core = {0, 3, 6, 9};
  std::vector<std::size_t> shuffled = {6, 9, 0, 3};
  std::vector<Rotation> pref = ref;
  for (std::size_t t = 0; t < seq.frames; ++t)
    for (std::size_t k = 0; k < core.size(); ++k)
      perm.at(t, core[k]) = seq.at(t, shuffled[k]);
  for (std::size_t k = 0; k < core.size(); ++k) pref[core[k]] = ref[shuffled[k]];

  Matrix pd = pose_descriptors(perm, pref, map);
  CHECK(pd.rows == base.rows);
  for (std::size_t i = 0; i < base.data.size(); ++i) CHECK(pd.data[i] == base.data[i]);
}

TEST_CASE("non-negativity and Jensen property") {
  auto map = JointGroupMap::default24();
  auto seq = random_sequence(12, 24, 4);
  auto ref = frame0(seq);
  auto kin = SequenceKinematics::compute(seq, ref);
  for (std::size_t t = 0; t < 12; ++t) {
    auto frame = kin.frame(t);
    for (const auto& grp : map.groups) {
      GroupStats s = group_stats(frame, grp);
      CHECK(s.mean_mag_xi >= 0.0);
      CHECK(s.mean_mag_omega >= 0.0);
      CHECK(s.mean_mag_alpha >= 0.0);
      CHECK(s.mean_mag_eta >= 0.0);
      CHECK(s.coherent_xi <= s.mean_mag_xi + 1e-12);
      CHECK(s.coherent_omega <= s.mean_mag_omega + 1e-12);
    }
  }
}

TEST_CASE("mirror test negates the 12 symmetry entries") {
  auto map = JointGroupMap::default24();
  auto seq = random_sequence(9, 24, 5);
  auto ref = frame0(seq);

  // exchange the full joint streams of each bilateral pair
  RotationSequence mir = seq;
  std::vector<Rotation> mref = ref;
  const auto& pairs = JointGroupMap::pairs();
  for (const auto& [li, ri] : pairs) {
    const auto& lg = map.groups[li];
    const auto& rg = map.groups[ri];
    REQUIRE(lg.size() == rg.size());
    for (std::size_t k = 0; k < lg.size(); ++k) {
      for (std::size_t t = 0; t < seq.frames; ++t) {
        mir.at(t, lg[k]) = seq.at(t, rg[k]);
        mir.at(t, rg[k]) = seq.at(t, lg[k]);
      }
      std::swap(mref[lg[k]], mref[rg[k]]);
    }
  }
  Matrix base = pose_descriptors(seq, ref, map);
  Matrix m = pose_descriptors(mir, mref, map);
  for (std::size_t t = 0; t < 9; ++t) {
    // group blocks of each pair swap
    for (const auto& [li, ri] : pairs)
      for (std::size_t k = 0; k < 6; ++k) {
        CHECK(m(t, li * 6 + k) == base(t, ri * 6 + k));
        CHECK(m(t, ri * 6 + k) == base(t, li * 6 + k));
      }
    // the 12 symmetry entries negate
    for (std::size_t p = 0; p < 6; ++p)
      for (std::size_t k = 0; k < 2; ++k)
        CHECK(m(t, 84 + p * 2 + k) == -base(t, 84 + p * 2 + k));
  }
}

TEST_CASE("state_feature") {
  Vec f = state_feature({0, 0}, {0, 0});
  for (double x : f) CHECK(x == 0.0);

  Vec g = state_feature({1, 2}, {3, 4});
  CHECK(g.size() == 5);
  CHECK(g[0] == 1.0);
  CHECK(g[1] == 2.0);
  CHECK(g[2] == 3.0);
  CHECK(g[3] == 4.0);
  CHECK(g[4] == doctest::Approx(5.0).epsilon(1e-15));

  Vec h = state_feature({1, 2}, {-6, -8});
  CHECK(h[4] == doctest::Approx(10.0).epsilon(1e-15));
  CHECK(std::abs(h[4] - std::sqrt(h[2] * h[2] + h[3] * h[3])) < 1e-12);

  CHECK_THROWS_AS(state_feature({1, 2}, {1}), DimensionError);
}

TEST_CASE("group map validation") {
  auto map = JointGroupMap::default24();
  map.validate(24);
  CHECK_THROWS_AS(map.validate(20), ConfigError);  // joints 20..23 out of range
  map.groups[0].clear();
  CHECK_THROWS_AS(map.validate(24), ConfigError);
}
