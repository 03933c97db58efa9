#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hamr/heatmap.hpp"
#include "hamr/losses.hpp"
#include "hamr/rasterizer.hpp"
#include "hamr/skinning.hpp"

namespace hamr {

/// Theta = {beta, theta, cam}. As a flat vector: beta (10), then theta row
/// by row (3K), then (s, tx, ty).
struct ParamState {
  ShapeParams beta;
  PoseParams theta;
  CameraParams cam;

  static constexpr int dimension(int num_joints) { return kNumShape + 3 * num_joints + 3; }
  [[nodiscard]] Eigen::VectorXd to_vector() const;
  static ParamState from_vector(const Eigen::VectorXd& x, int num_joints);
};

struct Sample {
  std::string id;
  ImageSize image_size;
  std::optional<Keypoints2D> keypoints2d;
  std::optional<Joints3D> joints3d;
  std::optional<Mask> mask;  // may differ in resolution from image_size
  std::optional<CameraParams> gt_cam;

  [[nodiscard]] bool has_annotation() const { return keypoints2d || joints3d || mask || gt_cam; }
  /// Throws InvalidArgument on an empty sample or a non-positive image size.
  void validate() const;
};

/// Settings of the objective that are not loss weights.
struct ObjectiveOptions {
  double rotation_penalty_weight = 100.0;
  double rotation_limit = 0.9 * 3.14159265358979323846;
  double silhouette_sharpness = 4.0;  // 1 / mask pixels
  HeatmapConfig heatmap;
};

struct LossAndGrad {
  LossBreakdown breakdown;
  Eigen::VectorXd gradient;  // ParamState layout
};

/// Total loss over the annotations present in the sample, plus the rotation
/// soft limit, and its gradient. Keeps the per-model and per-sample
/// precomputation (skinning tables, silhouette topology, target heatmaps).
class Objective {
 public:
  Objective(const HandModel& model, const Sample& sample, const LossWeights& weights,
            const ObjectiveOptions& options = {});

  [[nodiscard]] LossBreakdown value(const ParamState& state) const;
  [[nodiscard]] LossAndGrad evaluate(const ParamState& state) const;

  [[nodiscard]] const HandModel& model() const { return *model_; }
  [[nodiscard]] const Sample& sample() const { return *sample_; }

 private:
  LossBreakdown run(const ParamState& state, Eigen::VectorXd* gradient) const;

  const HandModel* model_;
  const Sample* sample_;
  LossWeights weights_;
  ObjectiveOptions options_;
  Skinner skinner_;
  SilhouetteTopology topology_;
  std::optional<Heatmaps> target_heatmaps_;
};

LossAndGrad loss_and_grad(const HandModel& model, const ParamState& state, const Sample& sample,
                          const LossWeights& weights, const ObjectiveOptions& options = {});

/// Start point: beta = 0, theta = rest pose, camera from the annotations.
ParamState init_params(const HandModel& model, const Sample& sample);

enum class StageScope {
  CameraAndRoot,  // (s, tx, ty) and the root rotation against lambda_2d * L_2D
  All,            // every parameter against the full loss
};

enum class StepRule {
  Lbfgs,            // limited-memory quasi-Newton direction, Armijo backtracking
  SteepestDescent,  // negative gradient, Armijo backtracking
};

/// Which loss terms a stage minimizes; the weights still come from
/// LossWeights.
struct LossTermSet {
  bool l3d = true;
  bool l2d = true;
  bool geo = true;
  bool cam = true;
  bool ht = true;
  bool seg = true;

  [[nodiscard]] LossWeights apply(LossWeights w) const;
};

struct FitStage {
  StageScope scope = StageScope::All;
  int max_iterations = 0;
  LossTermSet terms;  // ignored by CameraAndRoot, which uses L_2D only
};

/// Default stages: camera and root against the 2D keypoints; every parameter
/// against the 3D terms (3D joints, geometry, camera); then all smooth
/// terms; then the full loss with the silhouette.
std::vector<FitStage> default_stages();

struct FitSchedule {
  std::vector<FitStage> stages = default_stages();
  StepRule step_rule = StepRule::Lbfgs;
  double grad_tol = 1e-8;
  double rel_tol = 1e-10;
  double armijo_c = 1e-4;
  double backtrack = 0.5;
  int max_backtracks = 60;
  int memory = 40;
  double beta_bound = 5.0;
  ObjectiveOptions objective;

  void validate() const;
};

enum class Termination {
  None,                 // zero-iteration schedule
  GradientTolerance,
  RelativeImprovement,
  IterationCap,
  LineSearchStalled,    // no decrease found along either direction
};

const char* to_string(Termination t);

struct TraceEntry {
  int stage = 0;
  int iteration = 0;  // 0 is the stage's starting point
  LossBreakdown loss;  // objective of that stage
};

struct FitResult {
  ParamState state;
  Mesh mesh;
  std::vector<TraceEntry> trace;
  int iterations = 0;
  bool converged = false;
  Termination termination = Termination::None;
  LossBreakdown final_loss;  // full objective at the final state
};

FitResult fit(const HandModel& model, const Sample& sample, const LossWeights& weights,
              const FitSchedule& schedule = {});

/// Same, from a given start point.
FitResult fit_from(const HandModel& model, const Sample& sample, const LossWeights& weights,
                   const FitSchedule& schedule, const ParamState& start);

}  // namespace hamr
