#include "hamr/fitter.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "hamr/errors.hpp"

namespace hamr {

namespace {

constexpr int kCamOffset(int num_joints) { return kNumShape + 3 * num_joints; }

struct Bounds {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
};

// One stage of descent over a subset of the flat parameters. Works in
// internal coordinates: the camera becomes (s / s0, s tx / s0, s ty / s0),
// scale relative to the start and offsets in pixels over s0, so the camera
// scale and the angles share a step size and a shift of the 2D annotation is
// a plain translation of the coordinates.
class Descent {
 public:
  Descent(const Objective& objective, const FitSchedule& schedule, std::vector<int> active, const ParamState& start)
      : objective_(objective),
        schedule_(schedule),
        active_(std::move(active)),
        num_joints_(objective.model().num_joints()),
        cam_(kCamOffset(num_joints_)),
        s0_(std::max(std::abs(start.cam.s), 1e-12)),
        base_(to_internal(start.to_vector())),
        bounds_(active_.size()) {
    for (std::size_t i = 0; i < active_.size(); ++i) {
      if (active_[i] == cam_) bounds_[i].lo = 0.0;
      if (active_[i] < kNumShape) bounds_[i] = {-schedule.beta_bound, schedule.beta_bound};
    }
  }

  Termination run(int stage, int cap, std::vector<TraceEntry>& trace, int& iterations) {
    Eigen::VectorXd z = gather(base_);
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = clamp(i, z[i]);
    Eval current;
    if (!evaluate(z, current)) throw InvalidState("fit: objective is not finite at the starting point");
    base_ = scatter(z);
    trace.push_back({stage, 0, current.loss});

    for (int it = 1; it <= cap; ++it) {
      if (current.grad.norm() < schedule_.grad_tol) return Termination::GradientTolerance;

      Eval next;
      Eigen::VectorXd z_next;
      bool accepted = false;
      if (schedule_.step_rule == StepRule::Lbfgs && !memory_.empty()) {
        Eigen::VectorXd d = lbfgs_direction(current.grad);
        if (current.grad.dot(d) < 0.0) accepted = line_search(z, current, d, 1.0, z_next, next);
      }
      if (!accepted) {
        memory_.clear();
        const Eigen::VectorXd d = -current.grad;
        accepted = line_search(z, current, d, 1.0 / current.grad.norm(), z_next, next);
      }
      if (!accepted) return Termination::LineSearchStalled;

      const Eigen::VectorXd s = z_next - z;
      const Eigen::VectorXd y = next.grad - current.grad;
      if (s.dot(y) > 1e-12 * s.norm() * y.norm()) {
        memory_.push_back({s, y});
        if (static_cast<int>(memory_.size()) > schedule_.memory) memory_.pop_front();
      }
      const double previous = current.loss.total;
      z = z_next;
      current = std::move(next);
      base_ = scatter(z);
      ++iterations;
      trace.push_back({stage, it, current.loss});
      const double denom = std::max(std::abs(previous), std::numeric_limits<double>::min());
      if ((previous - current.loss.total) / denom < schedule_.rel_tol) return Termination::RelativeImprovement;
    }
    return Termination::IterationCap;
  }

  [[nodiscard]] ParamState state() const { return ParamState::from_vector(to_external(base_), num_joints_); }

 private:
  struct Eval {
    LossBreakdown loss;
    Eigen::VectorXd grad;  // scaled coordinates
  };
  struct Pair {
    Eigen::VectorXd s, y;
  };

  double clamp(Eigen::Index i, double v) const {
    const auto& b = bounds_[static_cast<std::size_t>(i)];
    return std::clamp(v, b.lo, b.hi);
  }

  Eigen::VectorXd to_internal(Eigen::VectorXd x) const {
    const double s = x[cam_];
    x[cam_ + 1] *= s / s0_;
    x[cam_ + 2] *= s / s0_;
    x[cam_] = s / s0_;
    return x;
  }

  Eigen::VectorXd to_external(Eigen::VectorXd z) const {
    const double sigma = z[cam_];
    z[cam_] = sigma * s0_;
    z[cam_ + 1] /= sigma;
    z[cam_ + 2] /= sigma;
    return z;
  }

  // Gradient in internal coordinates from the gradient at external point x.
  Eigen::VectorXd internal_grad(const Eigen::VectorXd& x, Eigen::VectorXd g) const {
    const double sigma = x[cam_] / s0_;
    const double g_s = g[cam_], g_tx = g[cam_ + 1], g_ty = g[cam_ + 2];
    g[cam_] = s0_ * g_s - (x[cam_ + 1] * g_tx + x[cam_ + 2] * g_ty) / sigma;
    g[cam_ + 1] = g_tx / sigma;
    g[cam_ + 2] = g_ty / sigma;
    return g;
  }

  Eigen::VectorXd gather(const Eigen::VectorXd& z_full) const {
    Eigen::VectorXd z(static_cast<Eigen::Index>(active_.size()));
    for (std::size_t i = 0; i < active_.size(); ++i) z[static_cast<Eigen::Index>(i)] = z_full[active_[i]];
    return z;
  }

  Eigen::VectorXd scatter(const Eigen::VectorXd& z) const {
    Eigen::VectorXd z_full = base_;
    for (std::size_t i = 0; i < active_.size(); ++i) z_full[active_[i]] = z[static_cast<Eigen::Index>(i)];
    return z_full;
  }

  bool evaluate(const Eigen::VectorXd& z, Eval& out) const {
    const Eigen::VectorXd x = to_external(scatter(z));
    if (!x.allFinite()) return false;
    LossAndGrad lg;
    try {
      lg = objective_.evaluate(ParamState::from_vector(x, num_joints_));
    } catch (const InvalidState&) {
      return false;
    } catch (const InvalidArgument&) {
      return false;
    }
    if (!std::isfinite(lg.breakdown.total) || !lg.gradient.allFinite()) return false;
    out.loss = lg.breakdown;
    out.grad = gather(internal_grad(x, lg.gradient));
    return out.grad.allFinite();
  }

  Eigen::VectorXd lbfgs_direction(const Eigen::VectorXd& g) const {
    Eigen::VectorXd q = g;
    std::vector<double> alpha(memory_.size());
    for (int i = static_cast<int>(memory_.size()) - 1; i >= 0; --i) {
      const auto& m = memory_[static_cast<std::size_t>(i)];
      alpha[static_cast<std::size_t>(i)] = m.s.dot(q) / m.y.dot(m.s);
      q -= alpha[static_cast<std::size_t>(i)] * m.y;
    }
    const auto& last = memory_.back();
    q *= last.s.dot(last.y) / last.y.squaredNorm();
    for (std::size_t i = 0; i < memory_.size(); ++i) {
      const auto& m = memory_[i];
      const double b = m.y.dot(q) / m.y.dot(m.s);
      q += (alpha[i] - b) * m.s;
    }
    return -q;
  }

  bool line_search(const Eigen::VectorXd& z, const Eval& at, const Eigen::VectorXd& d, double step,
                   Eigen::VectorXd& z_out, Eval& out) const {
    for (int j = 0; j <= schedule_.max_backtracks; ++j, step *= schedule_.backtrack) {
      Eigen::VectorXd trial = z + step * d;
      for (Eigen::Index i = 0; i < trial.size(); ++i) trial[i] = clamp(i, trial[i]);
      const double slope = at.grad.dot(trial - z);
      if (!(slope < 0.0)) continue;
      Eval e;
      if (!evaluate(trial, e)) continue;
      if (e.loss.total <= at.loss.total + schedule_.armijo_c * slope && e.loss.total <= at.loss.total) {
        z_out = std::move(trial);
        out = std::move(e);
        return true;
      }
    }
    return false;
  }

  const Objective& objective_;
  const FitSchedule& schedule_;
  std::vector<int> active_;
  int num_joints_;
  int cam_;
  double s0_;
  Eigen::VectorXd base_;  // internal coordinates
  std::vector<Bounds> bounds_;
  std::deque<Pair> memory_;
};

}  // namespace

Eigen::VectorXd ParamState::to_vector() const {
  const int k_count = static_cast<int>(theta.theta.rows());
  Eigen::VectorXd x(dimension(k_count));
  x.head<kNumShape>() = beta.beta;
  for (int k = 0; k < k_count; ++k) x.segment<3>(kNumShape + 3 * k) = theta.theta.row(k).transpose();
  x.tail<3>() = cam.as_vector();
  return x;
}

ParamState ParamState::from_vector(const Eigen::VectorXd& x, int num_joints) {
  if (x.size() != dimension(num_joints)) throw InvalidArgument("ParamState: vector has the wrong length");
  ParamState out;
  out.beta.beta = x.head<kNumShape>();
  out.theta = PoseParams::zeros(num_joints);
  for (int k = 0; k < num_joints; ++k) out.theta.theta.row(k) = x.segment<3>(kNumShape + 3 * k).transpose();
  out.cam = CameraParams::from_vector(x.tail<3>());
  return out;
}

void Sample::validate() const {
  if (image_size.height <= 0 || image_size.width <= 0) {
    throw InvalidArgument("sample " + id + ": image size must be positive");
  }
  if (!has_annotation()) throw InvalidArgument("sample " + id + ": no annotation");
  if (mask && (mask->height() <= 0 || mask->width() <= 0)) throw InvalidArgument("sample " + id + ": empty mask");
}

Objective::Objective(const HandModel& model, const Sample& sample, const LossWeights& weights,
                     const ObjectiveOptions& options)
    : model_(&model),
      sample_(&sample),
      weights_(weights),
      options_(options),
      skinner_(model),
      topology_(model.faces) {
  sample.validate();
  weights.validate();
  options.heatmap.validate();
  if (!(options.silhouette_sharpness > 0.0)) throw InvalidArgument("silhouette sharpness must be positive");
  if (!(options.rotation_penalty_weight >= 0.0)) throw InvalidArgument("rotation penalty weight must be >= 0");
  if (sample.keypoints2d && weights.lambda_ht > 0.0) {
    target_heatmaps_ = render_heatmaps(*sample.keypoints2d, sample.image_size, options.heatmap);
  }
}

LossBreakdown Objective::value(const ParamState& state) const { return run(state, nullptr); }

LossAndGrad Objective::evaluate(const ParamState& state) const {
  LossAndGrad out;
  out.breakdown = run(state, &out.gradient);
  return out;
}

LossBreakdown Objective::run(const ParamState& state, Eigen::VectorXd* gradient) const {
  const HandModel& model = *model_;
  const Sample& sample = *sample_;
  const LossWeights& w = weights_;
  const int k_count = model.num_joints();
  const bool want_grad = gradient != nullptr;
  const CameraParams& cam = state.cam;

  Skinner::Tape tape;
  skinner_.forward(state.beta, state.theta, tape);
  const Vertices& vertices = tape.vertices;
  const Joints3D joints = regress_joints(model, vertices);

  LossTerms terms;
  Points3 g_joints = Points3::Zero();
  Vertices g_vertices;
  if (want_grad) g_vertices = Vertices::Zero(vertices.rows(), 3);
  Eigen::Vector3d g_cam = Eigen::Vector3d::Zero();

  if (sample.joints3d && w.lambda_3d > 0.0) {
    Points3 g;
    terms.l3d = loss_keypoints(joints.points, sample.joints3d->points, sample.joints3d->available, g);
    g_joints += w.lambda_3d * g;
  }

  if (sample.keypoints2d && (w.lambda_2d > 0.0 || w.lambda_ht > 0.0)) {
    const Keypoints2D& gt = *sample.keypoints2d;
    const Keypoints2D pred = project(joints, cam);
    Points2 g_pixels = Points2::Zero();
    if (w.lambda_2d > 0.0) {
      Points2 g;
      terms.l2d = loss_keypoints(pred.points, gt.points, gt.available, g);
      g_pixels += w.lambda_2d * g;
    }
    if (w.lambda_ht > 0.0) {
      Points2 g;
      terms.ht = heatmap_loss_and_grad(pred, *target_heatmaps_, sample.image_size, gt.available, g);
      g_pixels += w.lambda_ht * g;
    }
    for (int k = 0; k < kNumPoints; ++k) {
      g_joints(k, 0) += cam.s * g_pixels(k, 0);
      g_joints(k, 1) += cam.s * g_pixels(k, 1);
      g_cam[0] += g_pixels(k, 0) * (joints.points(k, 0) + cam.tx) + g_pixels(k, 1) * (joints.points(k, 1) + cam.ty);
      g_cam[1] += cam.s * g_pixels(k, 0);
      g_cam[2] += cam.s * g_pixels(k, 1);
    }
  }

  if (w.lambda_geo > 0.0) {
    Points3 g;
    terms.geo = loss_geo(joints, model.finger_chains, g);
    g_joints += w.lambda_geo * g;
  }

  if (sample.gt_cam && w.lambda_cam > 0.0) {
    terms.cam = loss_cam(cam, *sample.gt_cam);
    g_cam += w.lambda_cam * 2.0 * (cam.as_vector() - sample.gt_cam->as_vector());
  }

  if (sample.mask && w.lambda_seg > 0.0) {
    const Mask& gt = *sample.mask;
    if (!(cam.s > 0.0)) throw InvalidArgument("camera scale must be positive");
    // image pixels to mask pixels
    const double mx = static_cast<double>(gt.width()) / sample.image_size.width;
    const double my = static_cast<double>(gt.height()) / sample.image_size.height;
    Points2D points(vertices.rows(), 2);
    points.col(0) = (cam.s * mx) * (vertices.col(0).array() + cam.tx);
    points.col(1) = (cam.s * my) * (vertices.col(1).array() + cam.ty);
    const SoftSilhouette soft = rasterize_soft(points, topology_, gt.size(), options_.silhouette_sharpness);
    const MaskData diff = soft.mask.data - gt.data;
    terms.seg = diff.abs().mean();
    if (want_grad) {
      const MaskData g_pixels = diff.sign() * (w.lambda_seg / static_cast<double>(diff.size()));
      Points2D g_points = Points2D::Zero(points.rows(), 2);
      soft_silhouette_backward(soft, g_pixels, points, g_points);
      g_vertices.col(0) += (cam.s * mx) * g_points.col(0);
      g_vertices.col(1) += (cam.s * my) * g_points.col(1);
      g_cam[0] += mx * g_points.col(0).dot((vertices.col(0).array() + cam.tx).matrix()) +
                  my * g_points.col(1).dot((vertices.col(1).array() + cam.ty).matrix());
      g_cam[1] += cam.s * mx * g_points.col(0).sum();
      g_cam[2] += cam.s * my * g_points.col(1).sum();
    }
  }

  LossBreakdown out = total_loss(terms, w);

  JointPositions g_theta = JointPositions::Zero(k_count, 3);
  double penalty = 0.0;
  for (int k = 0; k < k_count; ++k) {
    const Eigen::Vector3d v = state.theta.theta.row(k).transpose();
    const double n = v.norm();
    const double excess = n - options_.rotation_limit;
    if (excess <= 0.0) continue;
    penalty += excess * excess;
    g_theta.row(k) += (options_.rotation_penalty_weight * 2.0 * excess / n) * v.transpose();
  }
  out.rotation_penalty = options_.rotation_penalty_weight * penalty;
  if (!std::isfinite(out.rotation_penalty)) throw InvalidState("non-finite loss term: rotation_penalty");
  out.total += out.rotation_penalty;

  if (want_grad) {
    g_vertices += model.joint_regressor * g_joints.topRows<kNumModelJoints>();
    for (int t = 0; t < kNumFingertips; ++t) {
      g_vertices.row(model.fingertip_vertex_ids[t]) += g_joints.row(kNumModelJoints + t);
    }
    ShapeVector g_beta = ShapeVector::Zero();
    skinner_.backward(tape, g_vertices, g_beta, g_theta);
    ParamState g;
    g.beta.beta = g_beta;
    g.theta.theta = g_theta;
    g.cam = CameraParams::from_vector(g_cam);
    *gradient = g.to_vector();
  }
  return out;
}

LossAndGrad loss_and_grad(const HandModel& model, const ParamState& state, const Sample& sample,
                          const LossWeights& weights, const ObjectiveOptions& options) {
  return Objective(model, sample, weights, options).evaluate(state);
}

ParamState init_params(const HandModel& model, const Sample& sample) {
  sample.validate();
  ParamState out;
  out.theta.theta = model.rest_pose;
  const double width = sample.image_size.width;
  const double height = sample.image_size.height;
  const Joints3D rest = regress_joints(model, model.template_vertices);

  if (sample.keypoints2d && sample.joints3d) {
    try {
      out.cam = camera_from_pairs(*sample.joints3d, *sample.keypoints2d, model.skeleton_edges);
      return out;
    } catch (const DegenerateInput&) {
      // fall through to the 2D-only rule
    }
  }

  if (sample.keypoints2d) {
    const Keypoints2D& kp = *sample.keypoints2d;
    Eigen::Vector2d lo2 = Eigen::Vector2d::Constant(INFINITY), hi2 = -lo2;
    Eigen::Vector2d lo3 = lo2, hi3 = hi2;
    Eigen::Vector2d centroid2 = Eigen::Vector2d::Zero(), centroid3 = Eigen::Vector2d::Zero();
    int count = 0;
    for (int k = 0; k < kNumPoints; ++k) {
      if (!kp.available[k]) continue;
      const Eigen::Vector2d p = kp.points.row(k).transpose();
      const Eigen::Vector2d q = rest.points.row(k).head<2>().transpose();
      lo2 = lo2.cwiseMin(p);
      hi2 = hi2.cwiseMax(p);
      lo3 = lo3.cwiseMin(q);
      hi3 = hi3.cwiseMax(q);
      centroid2 += p;
      centroid3 += q;
      ++count;
    }
    if (count > 0) {
      centroid2 /= count;
      centroid3 /= count;
      const double diag2 = (hi2 - lo2).norm();
      const double diag3 = (hi3 - lo3).norm();
      if (diag2 > 0.0 && diag3 > 0.0) {
        out.cam.s = diag2 / diag3;
      } else {
        const double mesh_width = model.template_vertices.col(0).maxCoeff() - model.template_vertices.col(0).minCoeff();
        out.cam.s = width / mesh_width;
      }
      out.cam.tx = centroid2.x() / out.cam.s - centroid3.x();
      out.cam.ty = centroid2.y() / out.cam.s - centroid3.y();
      return out;
    }
  }

  const auto& v = model.template_vertices;
  const double mesh_width = v.col(0).maxCoeff() - v.col(0).minCoeff();
  if (!(mesh_width > 0.0)) throw DegenerateInput("init_params: rest mesh has zero width");
  out.cam.s = width / mesh_width;
  out.cam.tx = 0.5 * width / out.cam.s - 0.5 * (v.col(0).maxCoeff() + v.col(0).minCoeff());
  out.cam.ty = 0.5 * height / out.cam.s - 0.5 * (v.col(1).maxCoeff() + v.col(1).minCoeff());
  return out;
}

LossWeights LossTermSet::apply(LossWeights w) const {
  if (!l3d) w.lambda_3d = 0.0;
  if (!l2d) w.lambda_2d = 0.0;
  if (!geo) w.lambda_geo = 0.0;
  if (!cam) w.lambda_cam = 0.0;
  if (!ht) w.lambda_ht = 0.0;
  if (!seg) w.lambda_seg = 0.0;
  return w;
}

std::vector<FitStage> default_stages() {
  LossTermSet skeleton;
  skeleton.l2d = false;
  skeleton.ht = false;
  skeleton.seg = false;
  LossTermSet smooth;
  smooth.seg = false;
  return {
      {StageScope::CameraAndRoot, 200, {}},
      {StageScope::All, 1000, skeleton},
      {StageScope::All, 1000, smooth},
      {StageScope::All, 2000, {}},
  };
}

void FitSchedule::validate() const {
  for (const auto& stage : stages) {
    if (stage.max_iterations < 0) throw InvalidArgument("schedule: iteration caps must be >= 0");
  }
  if (!(grad_tol >= 0.0) || !(rel_tol >= 0.0)) throw InvalidArgument("schedule: tolerances must be >= 0");
  if (!(armijo_c > 0.0 && armijo_c < 1.0)) throw InvalidArgument("schedule: armijo_c must be in (0, 1)");
  if (!(backtrack > 0.0 && backtrack < 1.0)) throw InvalidArgument("schedule: backtrack must be in (0, 1)");
  if (max_backtracks < 0 || memory < 1) throw InvalidArgument("schedule: max_backtracks >= 0 and memory >= 1");
  if (!(beta_bound > 0.0)) throw InvalidArgument("schedule: beta_bound must be positive");
}

const char* to_string(Termination t) {
  switch (t) {
    case Termination::None: return "none";
    case Termination::GradientTolerance: return "gradient_tolerance";
    case Termination::RelativeImprovement: return "relative_improvement";
    case Termination::IterationCap: return "iteration_cap";
    case Termination::LineSearchStalled: return "line_search_stalled";
  }
  return "unknown";
}

FitResult fit(const HandModel& model, const Sample& sample, const LossWeights& weights, const FitSchedule& schedule) {
  return fit_from(model, sample, weights, schedule, init_params(model, sample));
}

FitResult fit_from(const HandModel& model, const Sample& sample, const LossWeights& weights,
                   const FitSchedule& schedule, const ParamState& start) {
  sample.validate();
  weights.validate();
  schedule.validate();
  const int k_count = model.num_joints();
  if (start.theta.theta.rows() != k_count) throw InvalidArgument("fit: start state has the wrong joint count");

  FitResult result;
  result.state = start;
  for (std::size_t si = 0; si < schedule.stages.size(); ++si) {
    const FitStage& stage = schedule.stages[si];
    if (stage.max_iterations == 0) continue;
    LossWeights stage_weights = weights;
    std::vector<int> active;
    if (stage.scope == StageScope::CameraAndRoot) {
      if (!sample.keypoints2d || weights.lambda_2d == 0.0) continue;
      stage_weights = LossWeights{0.0, weights.lambda_2d, 0.0, 0.0, 0.0, 0.0};
      const int root = model.joint_parents.empty() ? 0 : static_cast<int>(
          std::find(model.joint_parents.begin(), model.joint_parents.end(), -1) - model.joint_parents.begin());
      for (int c = 0; c < 3; ++c) active.push_back(kNumShape + 3 * root + c);
      for (int c = 0; c < 3; ++c) active.push_back(kCamOffset(k_count) + c);
    } else {
      stage_weights = stage.terms.apply(weights);
      for (int i = 0; i < ParamState::dimension(k_count); ++i) active.push_back(i);
    }
    const Objective objective(model, sample, stage_weights, schedule.objective);
    Descent descent(objective, schedule, std::move(active), result.state);
    result.termination = descent.run(static_cast<int>(si), stage.max_iterations, result.trace, result.iterations);
    result.state = descent.state();
  }
  result.converged = result.termination == Termination::GradientTolerance ||
                     result.termination == Termination::RelativeImprovement;
  result.mesh = lbs_forward(model, result.state.beta, result.state.theta);
  result.final_loss = Objective(model, sample, weights, schedule.objective).value(result.state);
  return result;
}

}  // namespace hamr
