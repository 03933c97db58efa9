#include "doctest.h"
#include "hamr/errors.hpp"
#include "hamr/losses.hpp"
#include "hamr/synth.hpp"
#include "hamr/toy_model.hpp"

using namespace hamr;

TEST_CASE("synthesize is a deterministic function of seed and index") {
  const HandModel model = build_toy_model();
  const SynthSample a = synthesize(model, 7, 3);
  const SynthSample b = synthesize(model, 7, 3);
  const SynthSample c = synthesize(model, 7, 4);
  CHECK(a.sample.id == "synth-7-3");
  CHECK(a.truth.to_vector() == b.truth.to_vector());
  CHECK(a.sample.mask->data.isApprox(b.sample.mask->data));
  CHECK(a.truth.to_vector() != c.truth.to_vector());
  CHECK(synthesize(model, 8, 3).truth.to_vector() != a.truth.to_vector());
}

TEST_CASE("synthetic annotations are exact functions of the generating state") {
  const HandModel model = build_toy_model();
  SynthConfig config;
  config.image_size = {96, 160};
  for (int i = 0; i < 10; ++i) {
    CAPTURE(i);
    const SynthSample s = synthesize(model, 1, i, config);
    const ParamState& t = s.truth;
    CHECK((t.theta.theta - model.rest_pose).cwiseAbs().maxCoeff() <= config.perturbation + 1e-12);
    CHECK(t.beta.beta.cwiseAbs().maxCoeff() <= config.shape_range);

    const Mesh mesh = lbs_forward(model, t.beta, t.theta);
    CHECK((mesh.vertices - s.mesh.vertices).cwiseAbs().maxCoeff() == 0.0);
    const Joints3D joints = regress_joints(model, mesh);
    CHECK((joints.points - s.sample.joints3d->points).cwiseAbs().maxCoeff() == 0.0);
    CHECK((project(joints, t.cam).points - s.sample.keypoints2d->points).cwiseAbs().maxCoeff() < 1e-9);

    REQUIRE(s.sample.gt_cam);
    CHECK(s.sample.gt_cam->s == doctest::Approx(t.cam.s).epsilon(1e-12));
    CHECK(std::abs(s.sample.gt_cam->tx - t.cam.tx) < 1e-9);
    CHECK(std::abs(s.sample.gt_cam->ty - t.cam.ty) < 1e-9);

    CHECK(s.sample.image_size == config.image_size);
    REQUIRE(s.sample.mask);
    CHECK(s.sample.mask->size() == config.image_size);
    CHECK((s.sample.mask->data - rasterize_mask(mesh, t.cam, config.image_size).data).abs().maxCoeff() == 0.0);
    const double covered = s.sample.mask->data.sum() / static_cast<double>(s.sample.mask->data.size());
    CHECK(covered > 0.05);
    CHECK(covered < 0.9);

    // generated fingers are planar and curl one way
    CHECK(loss_geo(joints, model.finger_chains) < 1e-12);
  }
}

TEST_CASE("zero perturbation gives the rest pose") {
  const HandModel model = build_toy_model();
  SynthConfig config;
  config.perturbation = 0.0;
  config.shape_range = 0.0;
  const SynthSample s = synthesize(model, 5, 0, config);
  CHECK(s.truth.theta.theta == model.rest_pose);
  CHECK(s.truth.beta.beta == ShapeVector::Zero());
}

TEST_CASE("SynthConfig validation") {
  SynthConfig bad;
  bad.perturbation = -0.1;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = {};
  bad.image_size = {0, 10};
  CHECK_THROWS_AS(synthesize(build_toy_model(), 1, 0, bad), InvalidArgument);
}
