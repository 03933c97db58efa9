#pragma once

#include <array>
#include <vector>

#include "hamr/image.hpp"
#include "hamr/model.hpp"
#include "hamr/pose.hpp"

namespace hamr {

/// Projected 2D vertex positions in mask pixel coordinates.
using Points2D = Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>;

/// Edge-to-face adjacency of a triangle mesh; the part of silhouette
/// extraction that does not depend on vertex positions.
class SilhouetteTopology {
 public:
  struct Edge {
    int a;
    int b;
    std::vector<int> opposite;  // third vertex of every face sharing the edge
  };

  explicit SilhouetteTopology(const Faces& faces);

  [[nodiscard]] const Faces& faces() const { return faces_; }
  [[nodiscard]] const std::vector<Edge>& edges() const { return edges_; }

 private:
  Faces faces_;
  std::vector<Edge> edges_;
};

/// A piece of a mesh edge that lies on the outline of the projected
/// silhouette: the points a + t (b - a) for t in [t0, t1]. An end cut by
/// another face records that face's edge (c, d); -1 when the end is a vertex.
struct BoundaryPiece {
  int a;
  int b;
  double t0;
  double t1;
  std::array<int, 2> clip0{-1, -1};
  std::array<int, 2> clip1{-1, -1};
};

/// Soft silhouette plus what its backward pass needs.
struct SoftSilhouette {
  struct Hit {
    int piece = -1;      // -1: saturated or on the boundary, no gradient
    double t = 0.0;      // position of the nearest boundary point along a -> b
    double sign = 0.0;   // +1 inside, -1 outside
    double distance = 0.0;
  };

  Mask mask;
  Mask coverage;  // the binary silhouette the signs were taken from
  std::vector<BoundaryPiece> pieces;
  std::vector<Hit> hits;  // per pixel, row-major
  double sharpness = 0.0;
};

/// Distances beyond this multiple of 1/sharpness are clamped; the sigmoid is
/// saturated to double precision there.
inline constexpr double kSoftSaturation = 40.0;

Points2D project_vertices(const Vertices& vertices, const CameraParams& cam);

/// 1 where the pixel centre lies inside (or on the edge of) any projected
/// non-degenerate face.
Mask rasterize_coverage(const Points2D& points, const Faces& faces, ImageSize size);

/// Outline of the union of projected faces: mesh edges whose neighbourhood is
/// not covered on both sides, minus the portions hidden inside other faces.
std::vector<BoundaryPiece> silhouette_boundary(const Points2D& points, const SilhouetteTopology& topology);

SoftSilhouette rasterize_soft(const Points2D& points, const SilhouetteTopology& topology, ImageSize size,
                              double sharpness);

/// Accumulates dL/dpoints given dL/dpixel for every pixel of the soft mask.
/// The nearest boundary point is differentiated as a perpendicular foot, a
/// vertex, or the crossing of two edges; the choice itself is held fixed.
/// Crossings at shallow angles (sine below 0.25) move with their own edge
/// only, which is an approximation.
void soft_silhouette_backward(const SoftSilhouette& soft, const MaskData& grad_pixels, const Points2D& points,
                              Points2D& grad_points);

Mask rasterize_mask(const Mesh& mesh, const CameraParams& cam, ImageSize size);

/// sigmoid(sharpness * signed distance to the silhouette outline), in pixels.
Mask rasterize_soft(const Mesh& mesh, const CameraParams& cam, ImageSize size, double sharpness);

/// |a and b| / |a or b| after thresholding at 0.5; 1 when both are empty.
double mask_iou(const Mask& a, const Mask& b);

}  // namespace hamr
