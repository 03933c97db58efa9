#include <cmath>
#include <map>
#include <random>

#include "doctest.h"
#include "hamr/errors.hpp"
#include "hamr/pose.hpp"
#include "hamr/skinning.hpp"
#include "hamr/toy_model.hpp"
#include "oracles.hpp"

using namespace hamr;
using hamr::testing::uniform;

namespace {

const HandModel& toy() {
  static const HandModel model = build_toy_model();
  return model;
}

JointPositions random_theta(std::mt19937_64& rng, double spread) {
  JointPositions theta = toy().rest_pose;
  for (int k = 0; k < theta.rows(); ++k)
    for (int c = 0; c < 3; ++c) theta(k, c) += uniform(rng, -spread, spread);
  return theta;
}

ShapeVector random_beta(std::mt19937_64& rng) {
  ShapeVector b;
  for (int i = 0; i < kNumShape; ++i) b[i] = uniform(rng, -1.0, 1.0);
  return b;
}

}  // namespace

TEST_CASE("toy model passes validation") {
  const auto report = validate_model(toy());
  CHECK_MESSAGE(report.ok(), report.summary());
  CHECK(toy().num_joints() == kNumModelJoints);
  CHECK(toy().pose_basis.cols() == 9 * (kNumModelJoints - 1));
}

TEST_CASE("toy mesh is closed and outward facing") {
  const auto& m = toy();
  CHECK(testing::signed_volume(m.template_vertices, m.faces) > 0.0);
  std::map<std::pair<int, int>, int> directed;
  for (int f = 0; f < m.faces.rows(); ++f)
    for (int c = 0; c < 3; ++c) ++directed[{m.faces(f, c), m.faces(f, (c + 1) % 3)}];
  for (const auto& [e, count] : directed) {
    CHECK(count == 1);
    CHECK(directed.count({e.second, e.first}) == 1);
  }
}

TEST_CASE("rest pose reproduces the template") {
  const auto mesh = lbs_forward(toy(), {}, PoseParams{toy().rest_pose});
  CHECK((mesh.vertices - toy().template_vertices).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("skinning matches the naive per-vertex oracle") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const ShapeVector beta = random_beta(rng);
    const JointPositions theta = random_theta(rng, 1.0);
    const auto mesh = lbs_forward(toy(), ShapeParams{beta}, PoseParams{theta});
    const auto ref = testing::naive_lbs(toy(), beta, theta);
    CHECK((mesh.vertices - ref).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("rodrigues agrees with angle-axis and its jacobian with finite differences") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const double scale = trial < 10 ? 1e-9 : 2.0;
    const Eigen::Vector3d v(uniform(rng, -scale, scale), uniform(rng, -scale, scale), uniform(rng, -scale, scale));
    CHECK((rodrigues(v) - testing::angle_axis(v)).cwiseAbs().maxCoeff() < 1e-12);
    const auto jac = rodrigues_jacobian(v);
    for (int i = 0; i < 3; ++i) {
      const double h = 1e-6;
      Eigen::Vector3d p = v, m = v;
      p[i] += h;
      m[i] -= h;
      const Eigen::Matrix3d fd = (rodrigues(p) - rodrigues(m)) / (2 * h);
      CHECK((fd - jac[i]).cwiseAbs().maxCoeff() < 1e-7);
    }
  }
}

TEST_CASE("skinner backward matches finite differences") {
  std::mt19937_64 rng(5);
  const Skinner skinner(toy());
  for (int trial = 0; trial < 3; ++trial) {
    const ShapeVector beta = random_beta(rng);
    const JointPositions theta = random_theta(rng, 0.8);
    Vertices weights(toy().num_vertices(), 3);
    for (int i = 0; i < weights.rows(); ++i)
      for (int c = 0; c < 3; ++c) weights(i, c) = uniform(rng, -1.0, 1.0);
    auto objective = [&](const ShapeVector& b, const JointPositions& t) {
      return skinner.forward(ShapeParams{b}, PoseParams{t}).cwiseProduct(weights).sum();
    };
    Skinner::Tape tape;
    skinner.forward(ShapeParams{beta}, PoseParams{theta}, tape);
    ShapeVector g_beta = ShapeVector::Zero();
    JointPositions g_theta = JointPositions::Zero(theta.rows(), 3);
    skinner.backward(tape, weights, g_beta, g_theta);
    const double h = 1e-6;
    for (int s = 0; s < kNumShape; ++s) {
      ShapeVector p = beta, m = beta;
      p[s] += h;
      m[s] -= h;
      CHECK(g_beta[s] == doctest::Approx((objective(p, theta) - objective(m, theta)) / (2 * h)).epsilon(1e-6));
    }
    for (int k = 0; k < theta.rows(); ++k)
      for (int c = 0; c < 3; ++c) {
        JointPositions p = theta, m = theta;
        p(k, c) += h;
        m(k, c) -= h;
        const double fd = (objective(beta, p) - objective(beta, m)) / (2 * h);
        CHECK(g_theta(k, c) == doctest::Approx(fd).epsilon(1e-6).scale(1.0));
      }
  }
}

TEST_CASE("forward kinematics keeps the root fixed at rest") {
  const auto rest = rest_joints(toy(), {});
  const auto transforms = forward_kinematics(toy(), PoseParams{toy().rest_pose}, rest);
  for (const auto& t : transforms) CHECK((t - Eigen::Matrix4d::Identity()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("validate_model reports broken invariants") {
  SUBCASE("skinning row") {
    HandModel m = toy();
    m.skinning_weights(7, 0) += 0.5;
    const auto report = validate_model(m);
    REQUIRE_FALSE(report.ok());
    CHECK(report.summary().find("7") != std::string::npos);
  }
  SUBCASE("cycle") {
    HandModel m = toy();
    m.joint_parents[1] = 2;
    m.joint_parents[2] = 1;
    CHECK_FALSE(validate_model(m).ok());
  }
  SUBCASE("face index") {
    HandModel m = toy();
    m.faces(0, 0) = m.num_vertices();
    CHECK_FALSE(validate_model(m).ok());
  }
  SUBCASE("non-finite basis") {
    HandModel m = toy();
    m.shape_basis(0, 0) = NAN;
    CHECK_FALSE(validate_model(m).ok());
  }
}

TEST_CASE("regress_joints rejects mismatched meshes") {
  CHECK_THROWS_AS(regress_joints(toy(), Vertices::Zero(3, 3)), InvalidArgument);
}
