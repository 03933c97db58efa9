#include "hamr/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <ostream>
#include <thread>

#include "CLI11.hpp"
#include "hamr/errors.hpp"
#include "hamr/io.hpp"
#include "hamr/metrics.hpp"
#include "hamr/synth.hpp"
#include "hamr/toy_model.hpp"

namespace hamr {

namespace fs = std::filesystem;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

HandModel resolve_model(const std::string& name) {
  if (name.empty() || name == "toy") return build_toy_model();
  return load_model(name);
}

ImageSize parse_resolution(const std::string& text) {
  const auto x = text.find_first_of("xX");
  try {
    if (x == std::string::npos) throw std::invalid_argument(text);
    std::size_t used_h = 0;
    std::size_t used_w = 0;
    const int h = std::stoi(text.substr(0, x), &used_h);
    const int w = std::stoi(text.substr(x + 1), &used_w);
    if (used_h != x || used_w != text.size() - x - 1 || h <= 0 || w <= 0) throw std::invalid_argument(text);
    return {h, w};
  } catch (const std::logic_error&) {
    throw UsageError("--resolution expects HxW with positive integers, got '" + text + "'");
  }
}

// Inline JSON when the argument starts with '{', a file path otherwise.
Json json_argument(const std::string& arg) {
  const auto first = arg.find_first_not_of(" \t\n");
  if (first != std::string::npos && arg[first] == '{') {
    try {
      return Json::parse(arg);
    } catch (const Json::parse_error& e) {
      throw ParseError(std::string("inline JSON: ") + e.what());
    }
  }
  return read_json_file(arg);
}

int thread_count() {
  if (const char* env = std::getenv("HAMR_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// Runs body(i) for i in [0, n) on up to HAMR_THREADS threads. Every index
// runs; the first exception (lowest index) is rethrown afterwards.
template <typename Body>
void parallel_for(std::size_t n, Body body) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        body(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto threads = std::min<std::size_t>(static_cast<std::size_t>(thread_count()), n);
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

Mask render_binary(const Mesh& mesh, const CameraParams& cam, ImageSize image, ImageSize mask) {
  Points2D points = project_vertices(mesh.vertices, cam);
  points.col(0) *= static_cast<double>(mask.width) / image.width;
  points.col(1) *= static_cast<double>(mask.height) / image.height;
  return rasterize_coverage(points, mesh.faces, mask);
}

struct Options {
  std::string model = "toy";
  std::string dataset;
  std::string sample;
  std::string out;
  std::string weights;
  std::string schedule;
  std::string params;
  std::string fits;
  std::string csv;
  std::string resolution = "128x128";
  std::uint64_t seed = 0;
  double perturb = 0.4;
  double shape_range = 1.0;
  int count = 1;
  double pck_min = 0.0;
  double pck_max = 0.05;
  int pck_steps = 21;
};

int run_synth(const Options& o, std::ostream& out) {
  const HandModel model = resolve_model(o.model);
  SynthConfig config;
  config.perturbation = o.perturb;
  config.shape_range = o.shape_range;
  config.image_size = parse_resolution(o.resolution);
  config.validate();
  if (o.count <= 0) throw UsageError("--count must be positive");

  std::vector<Sample> samples;
  for (int i = 0; i < o.count; ++i) {
    const SynthSample s = synthesize(model, o.seed, i, config);
    write_text_file(fs::path(o.out) / (s.sample.id + ".params.json"), params_to_json(s.truth).dump(2) + "\n");
    samples.push_back(s.sample);
    out << s.sample.id << '\n';
  }
  save_dataset(samples, o.out);
  return 0;
}

int run_fit(const Options& o, std::ostream& out) {
  const HandModel model = resolve_model(o.model);
  const LossWeights weights = o.weights.empty() ? LossWeights{} : weights_from_json(json_argument(o.weights));
  const FitSchedule schedule = o.schedule.empty() ? FitSchedule{} : schedule_from_json(json_argument(o.schedule));

  std::vector<Sample> samples = load_dataset(o.dataset);
  if (!o.sample.empty()) {
    std::erase_if(samples, [&](const Sample& s) { return s.id != o.sample; });
    if (samples.empty()) throw InvalidArgument("no sample with id '" + o.sample + "' in " + o.dataset);
  }

  std::vector<std::string> lines(samples.size());
  parallel_for(samples.size(), [&](std::size_t i) {
    const Sample& s = samples[i];
    const FitResult r = fit(model, s, weights, schedule);
    write_text_file(fs::path(o.out) / (s.id + ".fit.json"), fit_result_to_json(r, s.id).dump(2) + "\n");
    export_mesh(r.mesh, fs::path(o.out) / (s.id + ".obj"));
    lines[i] = s.id + " iterations=" + std::to_string(r.iterations) + " termination=" + to_string(r.termination) +
               " loss=" + Json(r.final_loss.total).dump();
  });
  for (const auto& l : lines) out << l << '\n';
  return 0;
}

int run_eval(const Options& o, std::ostream& out) {
  const HandModel model = resolve_model(o.model);
  if (o.pck_steps <= 0 || !(o.pck_max > o.pck_min)) throw UsageError("PCK range needs --pck-max > --pck-min and --pck-steps > 0");
  const std::vector<Sample> samples = load_dataset(o.dataset);

  struct Row {
    Json report;
    std::vector<double> errors3d;
    std::optional<double> mpjpe;
    std::optional<double> error2d;
    std::optional<double> iou;
  };
  std::vector<Row> rows(samples.size());
  parallel_for(samples.size(), [&](std::size_t i) {
    const Sample& s = samples[i];
    const Json fit_json = read_json_file(fs::path(o.fits) / (s.id + ".fit.json"));
    const ParamState state = params_from_json(fit_json, model.num_joints());
    const Mesh mesh = lbs_forward(model, state.beta, state.theta);
    const Joints3D joints = regress_joints(model, mesh);
    Row& row = rows[i];
    row.report["id"] = s.id;
    if (s.joints3d) {
      row.errors3d = joint_errors(joints, *s.joints3d);
      row.mpjpe = mpjpe(joints, *s.joints3d);
      row.report["mpjpe"] = *row.mpjpe;
    }
    if (s.keypoints2d) {
      const std::vector<double> e = joint_errors(project(joints, state.cam), *s.keypoints2d);
      double sum = 0.0;
      for (double v : e) sum += v;
      row.error2d = e.empty() ? 0.0 : sum / static_cast<double>(e.size());
      row.report["keypoint_error_px"] = *row.error2d;
    }
    if (s.mask) {
      row.iou = mask_iou(render_binary(mesh, state.cam, s.image_size, s.mask->size()), *s.mask);
      row.report["iou"] = *row.iou;
    }
  });

  Json report;
  report["count"] = samples.size();
  Json per_sample = Json::array();
  std::vector<double> pooled;
  std::vector<double> ious;
  double mpjpe_sum = 0.0;
  double error2d_sum = 0.0;
  int n3d = 0;
  int n2d = 0;
  for (const Row& r : rows) {
    per_sample.push_back(r.report);
    pooled.insert(pooled.end(), r.errors3d.begin(), r.errors3d.end());
    if (r.mpjpe) mpjpe_sum += *r.mpjpe, ++n3d;
    if (r.error2d) error2d_sum += *r.error2d, ++n2d;
    if (r.iou) ious.push_back(*r.iou);
  }
  report["mpjpe"] = n3d ? Json(mpjpe_sum / n3d) : Json();
  report["keypoint_error_px"] = n2d ? Json(error2d_sum / n2d) : Json();
  report["miou"] = ious.empty() ? Json() : Json(mean_iou(ious));
  std::optional<PckCurve> curve;
  if (!pooled.empty()) curve = pck_auc(pooled, threshold_grid(o.pck_min, o.pck_max, o.pck_steps));
  report["pck"] = curve ? pck_to_json(*curve) : Json();
  report["samples"] = std::move(per_sample);

  const std::string text = report.dump(2) + "\n";
  if (o.out.empty())
    out << text;
  else
    write_text_file(o.out, text);
  if (!o.csv.empty()) {
    if (!curve) throw InvalidArgument("--csv needs samples with 3D joints");
    write_text_file(o.csv, pck_to_csv(*curve));
  }
  return 0;
}

int run_render(const Options& o, std::ostream& out) {
  const HandModel model = resolve_model(o.model);
  const ParamState state = params_from_json(read_json_file(o.params), model.num_joints());
  const ImageSize size = parse_resolution(o.resolution);
  const Mesh mesh = lbs_forward(model, state.beta, state.theta);
  export_mesh(mesh, o.out + ".obj");
  write_pgm(rasterize_mask(mesh, state.cam, size), o.out + ".mask.pgm");
  out << o.out << ".obj\n" << o.out << ".mask.pgm\n";
  return 0;
}

int run_validate(const Options& o, std::ostream& out, std::ostream& err) {
  try {
    const HandModel model = resolve_model(o.model);
    out << "ok: " << model.name << ", " << model.num_vertices() << " vertices, " << model.faces.rows() << " faces, "
        << model.num_joints() << " joints\n";
    return 0;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << '\n';
  } catch (const VersionMismatch& e) {
    err << "version mismatch: " << e.what() << '\n';
  } catch (const ValidationError& e) {
    err << "validation error: " << e.what() << '\n';
  }
  return 1;
}

}  // namespace

int cli_run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Parametric hand mesh fitting", "hamr"};
  app.require_subcommand(1);
  Options o;

  auto* synth = app.add_subcommand("synth", "Write synthetic samples with exact annotations and their parameters");
  synth->add_option("--model", o.model, "Model file, or 'toy'")->capture_default_str();
  synth->add_option("--seed", o.seed, "Random seed")->capture_default_str();
  synth->add_option("--perturb", o.perturb, "Pose perturbation bound, radians")->capture_default_str();
  synth->add_option("--shape-range", o.shape_range, "Shape coefficient bound")->capture_default_str();
  synth->add_option("--resolution", o.resolution, "Image size HxW")->capture_default_str();
  synth->add_option("--count", o.count, "Number of samples")->capture_default_str();
  synth->add_option("--out", o.out, "Output directory")->required();

  auto* fit_cmd = app.add_subcommand("fit", "Fit the model to every sample of a dataset");
  fit_cmd->add_option("--model", o.model, "Model file, or 'toy'")->capture_default_str();
  fit_cmd->add_option("--dataset", o.dataset, "JSON-lines dataset")->required();
  fit_cmd->add_option("--sample", o.sample, "Only fit the sample with this id");
  fit_cmd->add_option("--weights", o.weights, "Loss weights: JSON file or inline object");
  fit_cmd->add_option("--schedule", o.schedule, "Fit schedule: JSON file or inline object");
  fit_cmd->add_option("--out", o.out, "Output directory")->required();

  auto* eval = app.add_subcommand("eval", "Score fit results against a dataset");
  eval->add_option("--model", o.model, "Model file, or 'toy'")->capture_default_str();
  eval->add_option("--dataset", o.dataset, "JSON-lines dataset")->required();
  eval->add_option("--fits", o.fits, "Directory holding <id>.fit.json files")->required();
  eval->add_option("--out", o.out, "Report path (stdout when omitted)");
  eval->add_option("--csv", o.csv, "Write the PCK curve as CSV");
  eval->add_option("--pck-min", o.pck_min, "Smallest PCK threshold, model units")->capture_default_str();
  eval->add_option("--pck-max", o.pck_max, "Largest PCK threshold, model units")->capture_default_str();
  eval->add_option("--pck-steps", o.pck_steps, "Number of PCK thresholds")->capture_default_str();

  auto* render = app.add_subcommand("render", "Write the mesh and binary mask of a parameter file");
  render->add_option("--model", o.model, "Model file, or 'toy'")->capture_default_str();
  render->add_option("--params", o.params, "Parameter or fit result JSON")->required();
  render->add_option("--resolution", o.resolution, "Image size HxW")->capture_default_str();
  render->add_option("--out", o.out, "Output path stem")->required();

  auto* validate = app.add_subcommand("validate", "Check a model file");
  validate->add_option("--model", o.model, "Model file")->required();

  auto* toy = app.add_subcommand("toy", "Write the built-in toy model");
  toy->add_option("--out", o.out, "Output path")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (synth->parsed()) return run_synth(o, out);
    if (fit_cmd->parsed()) return run_fit(o, out);
    if (eval->parsed()) return run_eval(o, out);
    if (render->parsed()) return run_render(o, out);
    if (validate->parsed()) return run_validate(o, out, err);
    save_model(build_toy_model(), o.out);
    return 0;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace hamr
