#include <fstream>
#include <sstream>

#include "doctest.h"
#include "hamr/errors.hpp"
#include "hamr/io.hpp"
#include "hamr/synth.hpp"
#include "hamr/toy_model.hpp"
#include "scratch_dir.hpp"

using namespace hamr;
using hamr::testing::ScratchDir;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

void check_same_sample(const Sample& a, const Sample& b) {
  CHECK(a.id == b.id);
  CHECK(a.image_size == b.image_size);
  REQUIRE(a.keypoints2d.has_value() == b.keypoints2d.has_value());
  if (a.keypoints2d) {
    CHECK(a.keypoints2d->points == b.keypoints2d->points);
    CHECK(a.keypoints2d->available == b.keypoints2d->available);
  }
  REQUIRE(a.joints3d.has_value() == b.joints3d.has_value());
  if (a.joints3d) {
    CHECK(a.joints3d->points == b.joints3d->points);
    CHECK(a.joints3d->available == b.joints3d->available);
  }
  REQUIRE(a.mask.has_value() == b.mask.has_value());
  if (a.mask) CHECK((a.mask->data == b.mask->data).all());
  REQUIRE(a.gt_cam.has_value() == b.gt_cam.has_value());
  if (a.gt_cam) CHECK(a.gt_cam->as_vector() == b.gt_cam->as_vector());
}

}  // namespace

TEST_CASE("model files") {
  ScratchDir dir("io-model");
  const HandModel model = build_toy_model();
  save_model(model, dir / "toy.json");

  SUBCASE("round trip") {
    const HandModel back = load_model(dir / "toy.json");
    CHECK(back.name == model.name);
    CHECK(back.pose_feature == model.pose_feature);
    CHECK(back.template_vertices == model.template_vertices);
    CHECK(back.faces == model.faces);
    CHECK(back.joint_parents == model.joint_parents);
    CHECK(back.skinning_weights == model.skinning_weights);
    CHECK(back.joint_regressor == model.joint_regressor);
    CHECK(back.shape_basis == model.shape_basis);
    CHECK(back.pose_basis == model.pose_basis);
    CHECK(back.rest_pose == model.rest_pose);
    CHECK(back.fingertip_vertex_ids == model.fingertip_vertex_ids);
    CHECK(back.finger_chains == model.finger_chains);
    CHECK(back.skeleton_edges == model.skeleton_edges);
  }
  SUBCASE("truncated file") {
    const std::string text = slurp(dir / "toy.json");
    spit(dir / "cut.json", text.substr(0, text.size() / 2));
    CHECK_THROWS_AS(load_model(dir / "cut.json"), ParseError);
  }
  SUBCASE("version mismatch") {
    Json j = model_to_json(model);
    j["version"] = "hamr-model/0";
    CHECK_THROWS_AS(model_from_json(j), VersionMismatch);
  }
  SUBCASE("bad skinning row") {
    Json j = model_to_json(model);
    j["skinning_weights"][17][0] = 2.0;
    try {
      (void)model_from_json(j);
      FAIL("expected a validation error");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("skinning_weights row 17") != std::string::npos);
    }
  }
  SUBCASE("wrong row length") {
    Json j = model_to_json(model);
    j["template_vertices"][3] = {1.0, 2.0};
    CHECK_THROWS_AS(model_from_json(j), ParseError);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(load_model(dir / "nope.json"), FileError); }
}

TEST_CASE("PGM masks") {
  ScratchDir dir("io-pgm");
  Mask m(3, 5);
  m.data(0, 0) = 1.0;
  m.data(2, 4) = 1.0;
  m.data(1, 2) = 128.0 / 255.0;
  write_pgm(m, dir / "m.pgm");
  const std::string bytes = slurp(dir / "m.pgm");
  CHECK(bytes.substr(0, 11) == "P5\n5 3\n255\n");
  CHECK(bytes.size() == 11 + 15);
  const Mask back = read_pgm(dir / "m.pgm");
  CHECK(back.size() == m.size());
  CHECK((back.data == m.data).all());

  spit(dir / "comment.pgm", std::string("P5 # a comment\n2 1\n255\n") + '\xff' + '\x00');
  const Mask c = read_pgm(dir / "comment.pgm");
  CHECK(c.data(0, 0) == 1.0);
  CHECK(c.data(0, 1) == 0.0);
  spit(dir / "short.pgm", "P5\n4 4\n255\nab");
  CHECK_THROWS_AS(read_pgm(dir / "short.pgm"), ParseError);
  spit(dir / "ascii.pgm", "P2\n1 1\n255\n0\n");
  CHECK_THROWS_AS(read_pgm(dir / "ascii.pgm"), ParseError);
}

TEST_CASE("OBJ export") {
  ScratchDir dir("io-obj");
  Mesh tri;
  tri.vertices.resize(3, 3);
  tri.vertices << 0, 0, 0, 1, 0, 0, 0, 1, 0;
  tri.faces.resize(1, 3);
  tri.faces << 0, 1, 2;
  CHECK(mesh_to_obj(tri) == "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n");

  const HandModel model = build_toy_model();
  const Mesh rest = lbs_forward(model, {}, {model.rest_pose});
  export_mesh(rest, dir / "rest.obj");
  const std::string text = slurp(dir / "rest.obj");
  int v_lines = 0, f_lines = 0;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    v_lines += line.rfind("v ", 0) == 0;
    f_lines += line.rfind("f ", 0) == 0;
  }
  CHECK(v_lines == model.num_vertices());
  CHECK(f_lines == model.faces.rows());

  const SynthSample s = synthesize(model, 3, 0);
  export_mesh(s.mesh, dir / "posed.obj");
  const Mesh back = read_obj(dir / "posed.obj");
  CHECK(back.vertices == s.mesh.vertices);
  CHECK(back.faces == s.mesh.faces);
  export_mesh(s.mesh, dir / "again.obj");
  CHECK(slurp(dir / "posed.obj") == slurp(dir / "again.obj"));
}

TEST_CASE("datasets") {
  ScratchDir dir("io-data");

  SUBCASE("2D-only line") {
    std::string points = "[";
    for (int k = 0; k < kNumPoints; ++k) points += (k ? "," : "") + std::string(k == 3 ? "null" : "[1.5, 2.5]");
    points += "]";
    spit(dir / "d.jsonl", R"({"id": "a", "image_size": [240, 320], "keypoints2d": )" + points + "}\n\n");
    const std::vector<Sample> samples = load_dataset(dir / "d.jsonl");
    REQUIRE(samples.size() == 1);
    CHECK(samples[0].id == "a");
    CHECK(samples[0].image_size == ImageSize{240, 320});
    REQUIRE(samples[0].keypoints2d);
    CHECK_FALSE(samples[0].keypoints2d->available[3]);
    CHECK(samples[0].keypoints2d->available[4]);
    CHECK(samples[0].keypoints2d->points(4, 1) == 2.5);
    CHECK_FALSE(samples[0].joints3d);
    CHECK_FALSE(samples[0].mask);
    CHECK_FALSE(samples[0].gt_cam);
  }
  SUBCASE("synth round trip") {
    const HandModel model = build_toy_model();
    std::vector<Sample> samples;
    for (int i = 0; i < 3; ++i) samples.push_back(synthesize(model, 11, i).sample);
    save_dataset(samples, dir.path());
    const std::vector<Sample> back = load_dataset(dir / "samples.jsonl");
    REQUIRE(back.size() == samples.size());
    for (std::size_t i = 0; i < back.size(); ++i) check_same_sample(back[i], samples[i]);

    auto lazy = read_dataset(dir / "samples.jsonl", MaskLoading::Lazy);
    CHECK_FALSE(lazy[0].sample.mask);
    CHECK(lazy[0].mask_path == "synth-11-0.mask.pgm");
    load_mask(lazy[0], dir / "samples.jsonl");
    check_same_sample(lazy[0].sample, samples[0]);
  }
  SUBCASE("missing mask file") {
    spit(dir / "d.jsonl", R"({"id": "a", "image_size": [8, 8], "mask_path": "gone.pgm"})" "\n");
    CHECK_THROWS_AS(load_dataset(dir / "d.jsonl"), FileError);
    CHECK_THROWS_AS(read_dataset(dir / "d.jsonl", MaskLoading::Lazy), FileError);
  }
  SUBCASE("malformed lines name their line number") {
    const std::string good = R"({"id": "a", "image_size": [8, 8], "gt_cam": [1, 0, 0]})";
    for (const std::string bad : {std::string(R"({"id": "b", "image_size": [8, 8], "gt_cam": [1, 0]})"),
                                  std::string(R"({"id": "b", "image_size": [8, 8], "joints3d": [[1, 2, 3]]})"),
                                  std::string(R"({"id": "b", "image_size": [8, 8]})"),
                                  std::string(R"({"id": "b", "image_size": [8, 8], "extra": 1, "gt_cam": [1, 0, 0]})"),
                                  std::string(R"({"id": "b", "image_size": [8, 8)")}) {
      CAPTURE(bad);
      spit(dir / "d.jsonl", good + "\n" + bad + "\n");
      try {
        (void)load_dataset(dir / "d.jsonl");
        FAIL("expected a parse error");
      } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("d.jsonl:2:") != std::string::npos);
      }
    }
  }
}

TEST_CASE("parameter, weight and schedule files") {
  const HandModel model = build_toy_model();
  const ParamState p = synthesize(model, 2, 0).truth;
  CHECK(params_from_json(params_to_json(p), 16).to_vector() == p.to_vector());
  CHECK(params_from_json(Json::parse(Json{{"state", params_to_json(p)}}.dump()), 16).to_vector() == p.to_vector());
  CHECK_THROWS_AS(params_from_json(params_to_json(p), 15), ParseError);

  LossWeights w;
  w.lambda_seg = 3.5;
  const LossWeights wb = weights_from_json(weights_to_json(w));
  CHECK(wb.lambda_seg == 3.5);
  CHECK(wb.lambda_3d == w.lambda_3d);
  CHECK(weights_from_json(Json::parse(R"({"lambda_ht": 0})")).lambda_ht == 0.0);
  CHECK(weights_from_json(Json::parse(R"({"lambda_ht": 0})")).lambda_2d == LossWeights{}.lambda_2d);
  CHECK_THROWS_AS(weights_from_json(Json::parse(R"({"lambda_typo": 1})")), InvalidArgument);
  CHECK_THROWS_AS(weights_from_json(Json::parse(R"({"lambda_2d": -1})")), InvalidArgument);

  FitSchedule s;
  s.stages[2].terms.ht = false;
  s.step_rule = StepRule::SteepestDescent;
  s.memory = 7;
  s.objective.silhouette_sharpness = 2.0;
  s.objective.heatmap.sigma2 = 1.5;
  const FitSchedule sb = schedule_from_json(schedule_to_json(s));
  CHECK(schedule_to_json(sb) == schedule_to_json(s));
  CHECK_FALSE(sb.stages[2].terms.ht);
  CHECK(sb.stages[2].terms.l3d);
  CHECK(sb.stages[0].scope == StageScope::CameraAndRoot);

  const FitSchedule partial = schedule_from_json(
      Json::parse(R"({"stages": [{"scope": "all", "max_iterations": 5, "terms": ["l2d", "seg"]}], "grad_tol": 1e-6})"));
  REQUIRE(partial.stages.size() == 1);
  CHECK(partial.stages[0].terms.seg);
  CHECK_FALSE(partial.stages[0].terms.l3d);
  CHECK(partial.grad_tol == 1e-6);
  CHECK(partial.memory == FitSchedule{}.memory);
  CHECK_THROWS_AS(schedule_from_json(Json::parse(R"({"stages": [{"scope": "some", "max_iterations": 5}]})")),
                  InvalidArgument);
  CHECK_THROWS_AS(schedule_from_json(Json::parse(R"({"memroy": 3})")), InvalidArgument);
  CHECK_THROWS_AS(schedule_from_json(Json::parse(R"({"armijo_c": 2})")), InvalidArgument);
}

TEST_CASE("reports") {
  PckCurve c;
  c.thresholds = {0.0, 0.5};
  c.values = {0.25, 1.0};
  c.auc = 0.625;
  CHECK(pck_to_csv(c) == "threshold,pck\n0,0.25\n0.5,1\n");
  CHECK(pck_to_json(c)["auc"] == 0.625);

  FitResult r;
  r.state.theta = PoseParams::zeros(16);
  r.trace = {{0, 0, {}}, {0, 1, {}}};
  r.termination = Termination::IterationCap;
  const Json j = fit_result_to_json(r, "x");
  CHECK(j["id"] == "x");
  CHECK(j["termination"] == "iteration_cap");
  CHECK(j["trace"].size() == 2);
  CHECK(params_from_json(j, 16).theta.theta == r.state.theta.theta);
}
