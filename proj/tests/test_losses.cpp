#include <random>

#include "doctest.h"
#include "hamr/errors.hpp"
#include "hamr/losses.hpp"
#include "oracles.hpp"

using namespace hamr;
using hamr::testing::uniform;

namespace {

Joints3D chain_joints(std::initializer_list<Eigen::Vector3d> pts) {
  Joints3D j;
  int k = 0;
  for (const auto& p : pts) j.points.row(k++) = p.transpose();
  return j;
}

const FingerChain kChain{0, 1, 2, 3};

}  // namespace

TEST_CASE("loss_keypoints") {
  Points2 a = Points2::Zero(), b = Points2::Zero();
  Availability only_first{};
  only_first[0] = true;
  CHECK(loss_keypoints(a, b, all_available()) == 0.0);
  b(0, 0) = 3.0;
  b(0, 1) = 4.0;
  b(3, 0) = 100.0;
  CHECK(loss_keypoints(a, b, only_first) == 25.0);

  std::mt19937_64 rng(2);
  Points3 p, q;
  Availability mask{};
  for (int k = 0; k < kNumPoints; ++k) {
    mask[k] = uniform(rng, 0, 1) < 0.7;
    for (int c = 0; c < 3; ++c) {
      p(k, c) = uniform(rng, -1, 1);
      q(k, c) = uniform(rng, -1, 1);
    }
  }
  double sum = 0.0;
  int n = 0;
  for (int k = 0; k < kNumPoints; ++k) {
    if (!mask[k]) continue;
    for (int c = 0; c < 3; ++c) sum += (p(k, c) - q(k, c)) * (p(k, c) - q(k, c));
    ++n;
  }
  CHECK(std::abs(loss_keypoints(p, q, mask) - sum / n) < 1e-12);
  Availability none{};
  CHECK(loss_keypoints(p, q, none) == 0.0);
}

TEST_CASE("loss_geo on hand-checked chains") {
  const FingerChain chains[] = {kChain};
  CHECK(loss_geo(chain_joints({{0, 0, 0}, {1, 1, 1}, {2, 2, 2}, {3, 3, 3}}), chains) == 0.0);
  // convex arc: both cross products along +z
  CHECK(loss_geo(chain_joints({{0, 0, 0}, {1, 0, 0}, {2, 1, 0}, {2, 2, 0}}), chains) == 0.0);
  // staircase: the turns alternate, so the direction term fires with product -1
  CHECK(loss_geo(chain_joints({{2, 1, 0}, {1, 1, 0}, {1, 0, 0}, {0, 0, 0}}), chains) == 1.0);
  // V_ab = (1,1,0), V_bc = (1,-1,0), V_cd = (1,1,0)
  // V_ab x V_bc = (0,0,-2), V_bc x V_cd = (0,0,2), product -4, hinge 4 -> 16
  CHECK(loss_geo(chain_joints({{2, 1, 0}, {1, 0, 0}, {0, 1, 0}, {-1, 0, 0}}), chains) == 16.0);
}

TEST_CASE("loss_geo invariances and gradient") {
  std::mt19937_64 rng(9);
  const FingerChain chains[] = {kChain, {4, 5, 6, 7}, {8, 9, 10, 11}};
  for (int trial = 0; trial < 20; ++trial) {
    Joints3D j;
    for (int k = 0; k < kNumPoints; ++k)
      for (int c = 0; c < 3; ++c) j.points(k, c) = uniform(rng, -1, 1);
    const double base = loss_geo(j, chains);
    CHECK(base >= 0.0);

    const Eigen::Matrix3d rot = testing::angle_axis({uniform(rng, -2, 2), uniform(rng, -2, 2), uniform(rng, -2, 2)});
    Joints3D moved;
    moved.points = (j.points * rot.transpose()).rowwise() + Eigen::RowVector3d(1, -2, 3);
    CHECK(loss_geo(moved, chains) == doctest::Approx(base).epsilon(1e-9));

    Points3 grad;
    CHECK(loss_geo(j, chains, grad) == doctest::Approx(base).epsilon(1e-14));
    const double h = 1e-6;
    for (int k = 0; k < 12; ++k)
      for (int c = 0; c < 3; ++c) {
        Joints3D p = j, m = j;
        p.points(k, c) += h;
        m.points(k, c) -= h;
        CHECK(grad(k, c) == doctest::Approx((loss_geo(p, chains) - loss_geo(m, chains)) / (2 * h)).epsilon(1e-5));
      }
  }
}

TEST_CASE("loss_geo coplanarity term is degree six") {
  const FingerChain chains[] = {kChain};
  // convex curl, off-plane tip: only the coplanarity term is active
  const Joints3D j = chain_joints({{0, 0, 0.3}, {1, 0, 0}, {2, 1, 0}, {2, 2, 0}});
  Joints3D scaled = j;
  scaled.points *= 2.0;
  CHECK(loss_geo(scaled, chains) == doctest::Approx(64.0 * loss_geo(j, chains)));
}

TEST_CASE("loss_cam, loss_seg, total_loss") {
  CHECK(loss_cam({1, 2, 3}, {1, 2, 3}) == 0.0);
  CHECK(loss_cam({3, 2, 3}, {1, 2, 3}) == 4.0);
  CHECK(loss_cam({1.5, 0.25, -1}, {1, 2, 3}) == doctest::Approx(0.25 + 1.75 * 1.75 + 16));

  const Mask ones(4, 4, 1.0), zeros(4, 4, 0.0);
  CHECK(loss_seg(ones, ones) == 0.0);
  CHECK(loss_seg(ones, zeros) == 1.0);
  Mask half = zeros;
  half.data.topRows(2) = 1.0;
  CHECK(loss_seg(half, zeros) == 0.5);
  CHECK_THROWS_AS(loss_seg(ones, Mask(3, 4)), InvalidArgument);

  const LossTerms unit{1, 1, 1, 1, 1, 1};
  CHECK(total_loss(unit, LossWeights{}).total == doctest::Approx(1112.1).epsilon(1e-15));
  CHECK(total_loss(unit, LossWeights{0, 0, 0, 0, 0, 0}).total == 0.0);
  LossTerms only_2d;
  only_2d.l2d = 25;
  CHECK(total_loss(only_2d, LossWeights{0, 1, 0, 0, 0, 0}).total == 25.0);
  LossTerms bad;
  bad.geo = NAN;
  CHECK_THROWS_WITH_AS(total_loss(bad, {}), doctest::Contains("geo"), InvalidState);
  CHECK_THROWS_AS(total_loss(unit, LossWeights{-1, 0, 0, 0, 0, 0}), InvalidArgument);
}
