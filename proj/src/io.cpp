#include "hamr/io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "hamr/errors.hpp"

namespace hamr {

namespace fs = std::filesystem;

namespace {

template <typename Derived>
Json rows_to_json(const Eigen::DenseBase<Derived>& m) {
  Json out = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

const Json& field(const Json& j, const char* key) {
  if (!j.is_object()) throw ParseError("expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(std::string("missing field '") + key + "'");
  return *it;
}

double number(const Json& j, const std::string& what) {
  if (!j.is_number()) throw ParseError(what + ": expected a number");
  return j.get<double>();
}

int integer(const Json& j, const std::string& what) {
  if (!j.is_number_integer()) throw ParseError(what + ": expected an integer");
  return j.get<int>();
}

// Row lists into a matrix; `cols` < 0 takes the width of the first row.
template <typename Matrix>
Matrix rows_from_json(const Json& j, const std::string& what, Eigen::Index cols = -1) {
  if (!j.is_array()) throw ParseError(what + ": expected a list of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  if (cols < 0) cols = rows > 0 && j[0].is_array() ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Json& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw ParseError(what + ": row " + std::to_string(r) + " must have " + std::to_string(cols) + " entries");
    for (Eigen::Index c = 0; c < cols; ++c) {
      const Json& v = row[static_cast<std::size_t>(c)];
      if constexpr (std::is_integral_v<typename Matrix::Scalar>)
        m(r, c) = integer(v, what);
      else
        m(r, c) = number(v, what);
    }
  }
  return m;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FileError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FileError("cannot write " + path.string());
}

Json parse_json(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ParseError(what + ": " + e.what());
  }
}

template <int D>
Json points_to_json(const Eigen::Matrix<double, kNumPoints, D, Eigen::RowMajor>& points, const Availability& available) {
  Json out = Json::array();
  for (int i = 0; i < kNumPoints; ++i) {
    if (!available[i]) {
      out.push_back(nullptr);
      continue;
    }
    Json p = Json::array();
    for (int d = 0; d < D; ++d) p.push_back(points(i, d));
    out.push_back(std::move(p));
  }
  return out;
}

template <int D>
void points_from_json(const Json& j, const std::string& what, Eigen::Matrix<double, kNumPoints, D, Eigen::RowMajor>& points,
                      Availability& available) {
  if (!j.is_array() || j.size() != kNumPoints)
    throw ParseError(what + ": expected " + std::to_string(kNumPoints) + " points");
  for (int i = 0; i < kNumPoints; ++i) {
    const Json& p = j[static_cast<std::size_t>(i)];
    if (p.is_null()) {
      available[i] = false;
      points.row(i).setZero();
      continue;
    }
    if (!p.is_array() || p.size() != D)
      throw ParseError(what + ": point " + std::to_string(i) + " must have " + std::to_string(D) + " coordinates");
    for (int d = 0; d < D; ++d) points(i, d) = number(p[static_cast<std::size_t>(d)], what);
    available[i] = true;
  }
}

Json camera_to_json(const CameraParams& cam) { return Json::array({cam.s, cam.tx, cam.ty}); }

CameraParams camera_from_json(const Json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3) throw ParseError(what + ": expected [s, tx, ty]");
  return {number(j[0], what), number(j[1], what), number(j[2], what)};
}

void check_keys(const Json& j, std::initializer_list<const char*> keys, const std::string& what) {
  if (!j.is_object()) throw ParseError(what + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* k : keys) known = known || key == k;
    if (!known) throw InvalidArgument(what + ": unknown key '" + key + "'");
  }
}

void read_double(const Json& j, const char* key, double& out, const std::string& what) {
  if (auto it = j.find(key); it != j.end()) out = number(*it, what + "." + key);
}

void read_int(const Json& j, const char* key, int& out, const std::string& what) {
  if (auto it = j.find(key); it != j.end()) out = integer(*it, what + "." + key);
}

constexpr std::array<const char*, 6> kTermNames{"l3d", "l2d", "geo", "cam", "ht", "seg"};

std::array<bool*, 6> term_flags(LossTermSet& t) { return {&t.l3d, &t.l2d, &t.geo, &t.cam, &t.ht, &t.seg}; }

}  // namespace

Json model_to_json(const HandModel& model) {
  Json j;
  j["version"] = kModelVersion;
  j["name"] = model.name;
  j["pose_feature"] = model.pose_feature;
  j["template_vertices"] = rows_to_json(model.template_vertices);
  j["faces"] = rows_to_json(model.faces);
  j["joint_parents"] = model.joint_parents;
  j["skinning_weights"] = rows_to_json(model.skinning_weights);
  j["joint_regressor"] = rows_to_json(model.joint_regressor);
  j["shape_basis"] = rows_to_json(model.shape_basis);
  j["pose_basis"] = rows_to_json(model.pose_basis);
  j["rest_pose"] = rows_to_json(model.rest_pose);
  j["fingertip_vertex_ids"] = model.fingertip_vertex_ids;
  j["finger_chains"] = model.finger_chains;
  Json edges = Json::array();
  for (const auto& [child, parent] : model.skeleton_edges) edges.push_back({child, parent});
  j["skeleton_edges"] = std::move(edges);
  return j;
}

HandModel model_from_json(const Json& j) {
  if (!j.is_object()) throw ParseError("model: expected an object");
  const Json& version = field(j, "version");
  if (!version.is_string()) throw ParseError("model: version must be a string");
  if (version.get<std::string>() != kModelVersion)
    throw VersionMismatch("model version '" + version.get<std::string>() + "', expected '" + kModelVersion + "'");

  HandModel m;
  try {
    m.name = field(j, "name").get<std::string>();
    if (auto it = j.find("pose_feature"); it != j.end()) m.pose_feature = it->get<std::string>();
    m.template_vertices = rows_from_json<Vertices>(field(j, "template_vertices"), "template_vertices", 3);
    m.faces = rows_from_json<Faces>(field(j, "faces"), "faces", 3);
    m.joint_parents = field(j, "joint_parents").get<std::vector<int>>();
    m.skinning_weights = rows_from_json<Eigen::MatrixXd>(field(j, "skinning_weights"), "skinning_weights");
    m.joint_regressor = rows_from_json<Eigen::MatrixXd>(field(j, "joint_regressor"), "joint_regressor");
    m.shape_basis = rows_from_json<Eigen::MatrixXd>(field(j, "shape_basis"), "shape_basis");
    m.pose_basis = rows_from_json<Eigen::MatrixXd>(field(j, "pose_basis"), "pose_basis");
    m.rest_pose = rows_from_json<JointPositions>(field(j, "rest_pose"), "rest_pose", 3);
    m.fingertip_vertex_ids = field(j, "fingertip_vertex_ids").get<std::array<int, kNumFingertips>>();
    m.finger_chains = field(j, "finger_chains").get<std::array<FingerChain, kNumChains>>();
    for (const Json& e : field(j, "skeleton_edges")) {
      const auto pair = e.get<std::array<int, 2>>();
      m.skeleton_edges.emplace_back(pair[0], pair[1]);
    }
  } catch (const Json::exception& e) {
    throw ParseError(std::string("model: ") + e.what());
  }

  const ValidationReport report = validate_model(m);
  if (!report.ok()) throw ValidationError("invalid model:\n" + report.summary());
  return m;
}

void save_model(const HandModel& model, const fs::path& path) { write_file(path, model_to_json(model).dump() + "\n"); }

HandModel load_model(const fs::path& path) {
  return model_from_json(parse_json(read_file(path), path.string()));
}

void write_pgm(const Mask& mask, const fs::path& path) {
  std::string bytes = "P5\n" + std::to_string(mask.width()) + " " + std::to_string(mask.height()) + "\n255\n";
  const auto header = bytes.size();
  bytes.resize(header + static_cast<std::size_t>(mask.width()) * static_cast<std::size_t>(mask.height()));
  std::size_t k = header;
  for (int r = 0; r < mask.height(); ++r)
    for (int c = 0; c < mask.width(); ++c) {
      const double v = mask.data(r, c);
      if (!std::isfinite(v)) throw InvalidArgument("write_pgm: non-finite pixel");
      bytes[k++] = static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * std::clamp(v, 0.0, 1.0))));
    }
  write_file(path, bytes);
}

Mask read_pgm(const fs::path& path) {
  const std::string bytes = read_file(path);
  std::size_t pos = 0;
  auto fail = [&](const std::string& why) { return ParseError(path.string() + ": " + why); };
  auto next_token = [&]() {
    for (;;) {
      while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
      if (pos < bytes.size() && bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        continue;
      }
      break;
    }
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (start == pos) throw fail("truncated header");
    return bytes.substr(start, pos - start);
  };
  auto next_int = [&]() {
    const std::string t = next_token();
    if (t.find_first_not_of("0123456789") != std::string::npos || t.size() > 9) throw fail("bad header field '" + t + "'");
    return std::stoi(t);
  };

  if (next_token() != "P5") throw fail("not a binary PGM");
  const int width = next_int();
  const int height = next_int();
  const int maxval = next_int();
  if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 65535) throw fail("bad header");
  ++pos;  // single whitespace before the raster
  const std::size_t depth = maxval < 256 ? 1 : 2;
  const std::size_t count = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  if (bytes.size() < pos + count * depth) throw fail("truncated raster");

  Mask mask(height, width);
  const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
  for (std::size_t i = 0; i < count; ++i) {
    const unsigned v = depth == 1 ? raw[i] : (unsigned{raw[2 * i]} << 8) | raw[2 * i + 1];
    mask.data(static_cast<Eigen::Index>(i / width), static_cast<Eigen::Index>(i % width)) =
        static_cast<double>(v) / maxval;
  }
  return mask;
}

std::string mesh_to_obj(const Mesh& mesh) {
  std::string out;
  char line[128];
  for (Eigen::Index i = 0; i < mesh.vertices.rows(); ++i) {
    std::snprintf(line, sizeof line, "v %.17g %.17g %.17g\n", mesh.vertices(i, 0), mesh.vertices(i, 1),
                  mesh.vertices(i, 2));
    out += line;
  }
  for (Eigen::Index f = 0; f < mesh.faces.rows(); ++f) {
    std::snprintf(line, sizeof line, "f %d %d %d\n", mesh.faces(f, 0) + 1, mesh.faces(f, 1) + 1, mesh.faces(f, 2) + 1);
    out += line;
  }
  return out;
}

void export_mesh(const Mesh& mesh, const fs::path& path) { write_file(path, mesh_to_obj(mesh)); }

Mesh read_obj(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::vector<Eigen::Vector3d> vertices;
  std::vector<Eigen::Vector3i> faces;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      Eigen::Vector3d v;
      if (!(ls >> v[0] >> v[1] >> v[2])) throw ParseError(path.string() + ":" + std::to_string(line_no) + ": bad vertex");
      vertices.push_back(v);
    } else if (tag == "f") {
      std::vector<int> ids;
      std::string token;
      while (ls >> token) ids.push_back(std::stoi(token.substr(0, token.find('/'))) - 1);
      if (ids.size() != 3) throw ParseError(path.string() + ":" + std::to_string(line_no) + ": only triangles are supported");
      faces.emplace_back(ids[0], ids[1], ids[2]);
    }
  }
  Mesh mesh;
  mesh.vertices.resize(static_cast<Eigen::Index>(vertices.size()), 3);
  for (std::size_t i = 0; i < vertices.size(); ++i) mesh.vertices.row(static_cast<Eigen::Index>(i)) = vertices[i];
  mesh.faces.resize(static_cast<Eigen::Index>(faces.size()), 3);
  for (std::size_t i = 0; i < faces.size(); ++i) {
    if (faces[i].minCoeff() < 0 || faces[i].maxCoeff() >= static_cast<int>(vertices.size()))
      throw ParseError(path.string() + ": face index out of range");
    mesh.faces.row(static_cast<Eigen::Index>(i)) = faces[i];
  }
  return mesh;
}

Json sample_to_json(const Sample& sample, const std::string& mask_path) {
  Json j;
  j["id"] = sample.id;
  j["image_size"] = {sample.image_size.height, sample.image_size.width};
  if (sample.keypoints2d) j["keypoints2d"] = points_to_json<2>(sample.keypoints2d->points, sample.keypoints2d->available);
  if (sample.joints3d) j["joints3d"] = points_to_json<3>(sample.joints3d->points, sample.joints3d->available);
  if (!mask_path.empty()) j["mask_path"] = mask_path;
  if (sample.gt_cam) j["gt_cam"] = camera_to_json(*sample.gt_cam);
  return j;
}

DatasetRecord sample_from_json(const Json& j) {
  check_keys(j, {"id", "image_size", "keypoints2d", "joints3d", "mask_path", "gt_cam"}, "sample");
  DatasetRecord rec;
  Sample& s = rec.sample;
  const Json& id = field(j, "id");
  if (!id.is_string()) throw ParseError("id must be a string");
  s.id = id.get<std::string>();
  const Json& size = field(j, "image_size");
  if (!size.is_array() || size.size() != 2) throw ParseError("image_size: expected [height, width]");
  s.image_size = {integer(size[0], "image_size"), integer(size[1], "image_size")};
  if (auto it = j.find("keypoints2d"); it != j.end() && !it->is_null()) {
    Keypoints2D k;
    points_from_json<2>(*it, "keypoints2d", k.points, k.available);
    s.keypoints2d = k;
  }
  if (auto it = j.find("joints3d"); it != j.end() && !it->is_null()) {
    Joints3D k;
    points_from_json<3>(*it, "joints3d", k.points, k.available);
    s.joints3d = k;
  }
  if (auto it = j.find("mask_path"); it != j.end() && !it->is_null()) {
    if (!it->is_string() || it->get<std::string>().empty()) throw ParseError("mask_path must be a non-empty string");
    rec.mask_path = it->get<std::string>();
  }
  if (auto it = j.find("gt_cam"); it != j.end() && !it->is_null()) s.gt_cam = camera_from_json(*it, "gt_cam");
  return rec;
}

std::vector<DatasetRecord> read_dataset(const fs::path& path, MaskLoading loading) {
  std::istringstream in(read_file(path));
  std::vector<DatasetRecord> records;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    DatasetRecord rec;
    try {
      rec = sample_from_json(parse_json(line, "json"));
    } catch (const ParseError& e) {
      throw ParseError(where + ": " + e.what());
    } catch (const InvalidArgument& e) {
      throw ParseError(where + ": " + e.what());
    }
    if (!rec.mask_path.empty()) {
      const fs::path mask = path.parent_path() / rec.mask_path;
      if (!fs::is_regular_file(mask)) throw FileError(where + ": referenced mask " + mask.string() + " does not exist");
      if (loading == MaskLoading::Eager) load_mask(rec, path);
    }
    try {
      rec.sample.validate();
    } catch (const InvalidArgument& e) {
      throw ParseError(where + ": " + e.what());
    }
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<Sample> load_dataset(const fs::path& path) {
  std::vector<Sample> samples;
  for (auto& rec : read_dataset(path, MaskLoading::Eager)) samples.push_back(std::move(rec.sample));
  return samples;
}

void load_mask(DatasetRecord& record, const fs::path& dataset_path) {
  if (record.mask_path.empty() || record.sample.mask) return;
  record.sample.mask = read_pgm(dataset_path.parent_path() / record.mask_path);
}

void save_dataset(const std::vector<Sample>& samples, const fs::path& dir, const std::string& file_name) {
  std::string lines;
  for (const Sample& s : samples) {
    std::string mask_path;
    if (s.mask) {
      mask_path = s.id + ".mask.pgm";
      write_pgm(*s.mask, dir / mask_path);
    }
    lines += sample_to_json(s, mask_path).dump() + "\n";
  }
  write_file(dir / file_name, lines);
}

Json params_to_json(const ParamState& state) {
  Json j;
  j["beta"] = std::vector<double>(state.beta.beta.data(), state.beta.beta.data() + kNumShape);
  j["theta"] = rows_to_json(state.theta.theta);
  j["cam"] = camera_to_json(state.cam);
  return j;
}

ParamState params_from_json(const Json& j, int num_joints) {
  if (j.is_object() && j.contains("state")) return params_from_json(j["state"], num_joints);
  ParamState s;
  const Json& beta = field(j, "beta");
  if (!beta.is_array() || beta.size() != kNumShape) throw ParseError("beta: expected 10 values");
  for (int i = 0; i < kNumShape; ++i) s.beta.beta[i] = number(beta[static_cast<std::size_t>(i)], "beta");
  s.theta.theta = rows_from_json<JointPositions>(field(j, "theta"), "theta", 3);
  if (s.theta.theta.rows() != num_joints)
    throw ParseError("theta: expected " + std::to_string(num_joints) + " rows");
  s.cam = camera_from_json(field(j, "cam"), "cam");
  return s;
}

Json weights_to_json(const LossWeights& w) {
  return {{"lambda_3d", w.lambda_3d}, {"lambda_2d", w.lambda_2d},   {"lambda_geo", w.lambda_geo},
          {"lambda_cam", w.lambda_cam}, {"lambda_ht", w.lambda_ht}, {"lambda_seg", w.lambda_seg}};
}

LossWeights weights_from_json(const Json& j) {
  check_keys(j, {"lambda_3d", "lambda_2d", "lambda_geo", "lambda_cam", "lambda_ht", "lambda_seg"}, "weights");
  LossWeights w;
  read_double(j, "lambda_3d", w.lambda_3d, "weights");
  read_double(j, "lambda_2d", w.lambda_2d, "weights");
  read_double(j, "lambda_geo", w.lambda_geo, "weights");
  read_double(j, "lambda_cam", w.lambda_cam, "weights");
  read_double(j, "lambda_ht", w.lambda_ht, "weights");
  read_double(j, "lambda_seg", w.lambda_seg, "weights");
  w.validate();
  return w;
}

Json schedule_to_json(const FitSchedule& s) {
  Json stages = Json::array();
  for (FitStage stage : s.stages) {
    Json terms = Json::array();
    const auto flags = term_flags(stage.terms);
    for (std::size_t i = 0; i < flags.size(); ++i)
      if (*flags[i]) terms.push_back(kTermNames[i]);
    stages.push_back({{"scope", stage.scope == StageScope::CameraAndRoot ? "camera_root" : "all"},
                      {"max_iterations", stage.max_iterations},
                      {"terms", std::move(terms)}});
  }
  const ObjectiveOptions& o = s.objective;
  return {{"stages", std::move(stages)},
          {"step_rule", s.step_rule == StepRule::Lbfgs ? "lbfgs" : "steepest_descent"},
          {"grad_tol", s.grad_tol},
          {"rel_tol", s.rel_tol},
          {"armijo_c", s.armijo_c},
          {"backtrack", s.backtrack},
          {"max_backtracks", s.max_backtracks},
          {"memory", s.memory},
          {"beta_bound", s.beta_bound},
          {"objective",
           {{"rotation_penalty_weight", o.rotation_penalty_weight},
            {"rotation_limit", o.rotation_limit},
            {"silhouette_sharpness", o.silhouette_sharpness},
            {"heatmap", {{"height", o.heatmap.height}, {"width", o.heatmap.width}, {"sigma2", o.heatmap.sigma2}}}}}};
}

FitSchedule schedule_from_json(const Json& j) {
  check_keys(j,
             {"stages", "step_rule", "grad_tol", "rel_tol", "armijo_c", "backtrack", "max_backtracks", "memory",
              "beta_bound", "objective"},
             "schedule");
  FitSchedule s;
  if (auto it = j.find("stages"); it != j.end()) {
    if (!it->is_array()) throw ParseError("schedule.stages: expected a list");
    s.stages.clear();
    for (const Json& st : *it) {
      check_keys(st, {"scope", "max_iterations", "terms"}, "schedule.stages");
      FitStage stage;
      const std::string scope = field(st, "scope").get<std::string>();
      if (scope == "camera_root")
        stage.scope = StageScope::CameraAndRoot;
      else if (scope == "all")
        stage.scope = StageScope::All;
      else
        throw InvalidArgument("schedule.stages: unknown scope '" + scope + "'");
      stage.max_iterations = integer(field(st, "max_iterations"), "schedule.stages.max_iterations");
      if (auto terms = st.find("terms"); terms != st.end()) {
        if (!terms->is_array()) throw ParseError("schedule.stages.terms: expected a list");
        auto flags = term_flags(stage.terms);
        for (bool* f : flags) *f = false;
        for (const Json& name : *terms) {
          const std::string n = name.is_string() ? name.get<std::string>() : "";
          std::size_t i = 0;
          while (i < kTermNames.size() && n != kTermNames[i]) ++i;
          if (i == kTermNames.size()) throw InvalidArgument("schedule.stages.terms: unknown term '" + n + "'");
          *flags[i] = true;
        }
      }
      s.stages.push_back(stage);
    }
  }
  if (auto it = j.find("step_rule"); it != j.end()) {
    const std::string rule = it->is_string() ? it->get<std::string>() : "";
    if (rule == "lbfgs")
      s.step_rule = StepRule::Lbfgs;
    else if (rule == "steepest_descent")
      s.step_rule = StepRule::SteepestDescent;
    else
      throw InvalidArgument("schedule.step_rule: unknown rule '" + rule + "'");
  }
  read_double(j, "grad_tol", s.grad_tol, "schedule");
  read_double(j, "rel_tol", s.rel_tol, "schedule");
  read_double(j, "armijo_c", s.armijo_c, "schedule");
  read_double(j, "backtrack", s.backtrack, "schedule");
  read_int(j, "max_backtracks", s.max_backtracks, "schedule");
  read_int(j, "memory", s.memory, "schedule");
  read_double(j, "beta_bound", s.beta_bound, "schedule");
  if (auto it = j.find("objective"); it != j.end()) {
    const Json& o = *it;
    check_keys(o, {"rotation_penalty_weight", "rotation_limit", "silhouette_sharpness", "heatmap"}, "schedule.objective");
    read_double(o, "rotation_penalty_weight", s.objective.rotation_penalty_weight, "objective");
    read_double(o, "rotation_limit", s.objective.rotation_limit, "objective");
    read_double(o, "silhouette_sharpness", s.objective.silhouette_sharpness, "objective");
    if (auto h = o.find("heatmap"); h != o.end()) {
      check_keys(*h, {"height", "width", "sigma2"}, "schedule.objective.heatmap");
      read_int(*h, "height", s.objective.heatmap.height, "heatmap");
      read_int(*h, "width", s.objective.heatmap.width, "heatmap");
      read_double(*h, "sigma2", s.objective.heatmap.sigma2, "heatmap");
    }
  }
  s.validate();
  return s;
}

Json breakdown_to_json(const LossBreakdown& loss) {
  const LossTerms& t = loss.terms;
  return {{"l3d", t.l3d}, {"l2d", t.l2d}, {"geo", t.geo}, {"cam", t.cam}, {"ht", t.ht}, {"seg", t.seg},
          {"rotation_penalty", loss.rotation_penalty}, {"total", loss.total}};
}

Json fit_result_to_json(const FitResult& result, const std::string& id) {
  Json trace = Json::array();
  for (const TraceEntry& e : result.trace) trace.push_back({e.stage, e.iteration, e.loss.total});
  return {{"id", id},
          {"state", params_to_json(result.state)},
          {"iterations", result.iterations},
          {"converged", result.converged},
          {"termination", to_string(result.termination)},
          {"final_loss", breakdown_to_json(result.final_loss)},
          {"trace", std::move(trace)}};
}

Json pck_to_json(const PckCurve& curve) {
  return {{"thresholds", curve.thresholds}, {"values", curve.values}, {"auc", curve.auc}};
}

std::string pck_to_csv(const PckCurve& curve) {
  std::string out = "threshold,pck\n";
  char line[96];
  for (std::size_t i = 0; i < curve.thresholds.size(); ++i) {
    std::snprintf(line, sizeof line, "%.17g,%.17g\n", curve.thresholds[i], curve.values[i]);
    out += line;
  }
  return out;
}

Json read_json_file(const fs::path& path) { return parse_json(read_file(path), path.string()); }

void write_text_file(const fs::path& path, const std::string& text) { write_file(path, text); }

}  // namespace hamr
