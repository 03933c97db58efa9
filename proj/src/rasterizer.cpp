#include "hamr/rasterizer.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "hamr/errors.hpp"

namespace hamr {

namespace {

double cross2(const Eigen::Vector2d& a, const Eigen::Vector2d& b) { return a.x() * b.y() - a.y() * b.x(); }

Eigen::Vector2d point(const Points2D& points, int i) { return points.row(i).transpose(); }

void check_size(ImageSize size) {
  if (size.height <= 0 || size.width <= 0) throw InvalidArgument("rasterizer: image size must be positive");
}

void check_camera(const CameraParams& cam) {
  if (!(cam.s > 0.0) || !std::isfinite(cam.s)) throw InvalidArgument("rasterizer: camera scale must be positive");
}

struct Box {
  double x0, y0, x1, y1;
};

// Uniform bucket grid over a rectangle; items are registered in every cell
// their box overlaps, clamped to the grid.
class BucketGrid {
 public:
  BucketGrid(Box extent, double cell) : extent_(extent), cell_(cell) {
    nx_ = std::max(1, static_cast<int>(std::ceil((extent.x1 - extent.x0) / cell)));
    ny_ = std::max(1, static_cast<int>(std::ceil((extent.y1 - extent.y0) / cell)));
    cells_.resize(static_cast<std::size_t>(nx_) * ny_);
  }

  [[nodiscard]] int nx() const { return nx_; }
  [[nodiscard]] int ny() const { return ny_; }
  [[nodiscard]] double cell() const { return cell_; }

  [[nodiscard]] int column(double x) const {
    return std::clamp(static_cast<int>(std::floor((x - extent_.x0) / cell_)), 0, nx_ - 1);
  }
  [[nodiscard]] int row(double y) const {
    return std::clamp(static_cast<int>(std::floor((y - extent_.y0) / cell_)), 0, ny_ - 1);
  }

  void insert(const Box& box, int item) {
    for (int j = row(box.y0); j <= row(box.y1); ++j)
      for (int i = column(box.x0); i <= column(box.x1); ++i) cells_[index(i, j)].push_back(item);
  }

  [[nodiscard]] const std::vector<int>& at(int i, int j) const { return cells_[index(i, j)]; }

 private:
  [[nodiscard]] std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * nx_ + i; }

  Box extent_;
  double cell_;
  int nx_ = 1;
  int ny_ = 1;
  std::vector<std::vector<int>> cells_;
};

Box bounds_of(std::initializer_list<Eigen::Vector2d> pts) {
  Box b{INFINITY, INFINITY, -INFINITY, -INFINITY};
  for (const auto& p : pts) {
    b.x0 = std::min(b.x0, p.x());
    b.y0 = std::min(b.y0, p.y());
    b.x1 = std::max(b.x1, p.x());
    b.y1 = std::max(b.y1, p.y());
  }
  return b;
}

bool overlaps(const Box& a, const Box& b) { return a.x0 <= b.x1 && b.x0 <= a.x1 && a.y0 <= b.y1 && b.y0 <= a.y1; }

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

constexpr double kMinCrossingSine = 0.25;

}  // namespace

SilhouetteTopology::SilhouetteTopology(const Faces& faces) : faces_(faces) {
  std::map<std::pair<int, int>, std::size_t> lookup;
  for (int f = 0; f < faces.rows(); ++f) {
    for (int c = 0; c < 3; ++c) {
      const int u = faces(f, c);
      const int v = faces(f, (c + 1) % 3);
      const int w = faces(f, (c + 2) % 3);
      const auto key = std::minmax(u, v);
      auto [it, inserted] = lookup.try_emplace({key.first, key.second}, edges_.size());
      if (inserted) edges_.push_back({key.first, key.second, {}});
      edges_[it->second].opposite.push_back(w);
    }
  }
}

Points2D project_vertices(const Vertices& vertices, const CameraParams& cam) {
  Points2D out(vertices.rows(), 2);
  out.col(0) = cam.s * (vertices.col(0).array() + cam.tx);
  out.col(1) = cam.s * (vertices.col(1).array() + cam.ty);
  return out;
}

Mask rasterize_coverage(const Points2D& points, const Faces& faces, ImageSize size) {
  check_size(size);
  Mask mask(size.height, size.width, 0.0);
  for (int f = 0; f < faces.rows(); ++f) {
    Eigen::Vector2d p0 = point(points, faces(f, 0));
    Eigen::Vector2d p1 = point(points, faces(f, 1));
    Eigen::Vector2d p2 = point(points, faces(f, 2));
    const double area = cross2(p1 - p0, p2 - p0);
    if (area == 0.0 || !std::isfinite(area)) continue;
    if (area < 0.0) std::swap(p1, p2);
    const Box box = bounds_of({p0, p1, p2});
    const int c0 = std::max(0, static_cast<int>(std::ceil(box.x0 - 0.5)));
    const int c1 = std::min(size.width - 1, static_cast<int>(std::floor(box.x1 - 0.5)));
    const int r0 = std::max(0, static_cast<int>(std::ceil(box.y0 - 0.5)));
    const int r1 = std::min(size.height - 1, static_cast<int>(std::floor(box.y1 - 0.5)));
    for (int r = r0; r <= r1; ++r) {
      for (int c = c0; c <= c1; ++c) {
        const Eigen::Vector2d q(c + 0.5, r + 0.5);
        if (cross2(p1 - p0, q - p0) >= 0.0 && cross2(p2 - p1, q - p1) >= 0.0 && cross2(p0 - p2, q - p2) >= 0.0) {
          mask.data(r, c) = 1.0;
        }
      }
    }
  }
  return mask;
}

std::vector<BoundaryPiece> silhouette_boundary(const Points2D& points, const SilhouetteTopology& topology) {
  const Faces& faces = topology.faces();
  const int face_count = static_cast<int>(faces.rows());
  std::vector<BoundaryPiece> pieces;
  if (face_count == 0 || points.rows() == 0) return pieces;

  // Positively oriented copies of the non-degenerate faces.
  std::vector<std::array<Eigen::Vector2d, 3>> tri(face_count);
  std::vector<std::array<int, 3>> corner(face_count);
  std::vector<char> usable(face_count, 0);
  Box extent{INFINITY, INFINITY, -INFINITY, -INFINITY};
  for (int f = 0; f < face_count; ++f) {
    Eigen::Vector2d p0 = point(points, faces(f, 0));
    Eigen::Vector2d p1 = point(points, faces(f, 1));
    Eigen::Vector2d p2 = point(points, faces(f, 2));
    const double area = cross2(p1 - p0, p2 - p0);
    if (area == 0.0 || !std::isfinite(area)) continue;
    corner[f] = {faces(f, 0), faces(f, 1), faces(f, 2)};
    if (area < 0.0) {
      std::swap(p1, p2);
      std::swap(corner[f][1], corner[f][2]);
    }
    tri[f] = {p0, p1, p2};
    usable[f] = 1;
    const Box b = bounds_of({p0, p1, p2});
    extent = {std::min(extent.x0, b.x0), std::min(extent.y0, b.y0), std::max(extent.x1, b.x1),
              std::max(extent.y1, b.y1)};
  }
  if (!std::isfinite(extent.x0)) return pieces;

  const double span = std::max(extent.x1 - extent.x0, extent.y1 - extent.y0);
  BucketGrid grid(extent, std::max(span / 32.0, 1e-9));
  for (int f = 0; f < face_count; ++f) {
    if (usable[f]) grid.insert(bounds_of({tri[f][0], tri[f][1], tri[f][2]}), f);
  }

  std::vector<int> stamp(face_count, -1);
  struct Cover {
    double lo, hi;
    std::array<int, 2> lo_edge, hi_edge;
    bool operator<(const Cover& o) const { return lo < o.lo; }
  };
  std::vector<Cover> covered;
  const auto& edges = topology.edges();
  for (int e = 0; e < static_cast<int>(edges.size()); ++e) {
    const auto& edge = edges[e];
    const Eigen::Vector2d pa = point(points, edge.a);
    const Eigen::Vector2d pb = point(points, edge.b);
    const Eigen::Vector2d dir = pb - pa;
    if (dir.squaredNorm() == 0.0) continue;

    bool left = false;
    bool right = false;
    for (int c : edge.opposite) {
      const double o = cross2(dir, point(points, c) - pa);
      left = left || o > 0.0;
      right = right || o < 0.0;
    }
    if (left && right) continue;

    covered.clear();
    const Box box = bounds_of({pa, pb});
    for (int j = grid.row(box.y0); j <= grid.row(box.y1); ++j) {
      for (int i = grid.column(box.x0); i <= grid.column(box.x1); ++i) {
        for (int f : grid.at(i, j)) {
          if (stamp[f] == e) continue;
          stamp[f] = e;
          bool has_a = false;
          bool has_b = false;
          for (int c = 0; c < 3; ++c) {
            has_a = has_a || faces(f, c) == edge.a;
            has_b = has_b || faces(f, c) == edge.b;
          }
          if (has_a && has_b) continue;
          const auto& t = tri[f];
          if (!overlaps(box, bounds_of({t[0], t[1], t[2]}))) continue;
          // Open parameter interval of the segment strictly inside the face.
          Cover cover{0.0, 1.0, {-1, -1}, {-1, -1}};
          for (int c = 0; c < 3 && cover.lo < cover.hi; ++c) {
            const Eigen::Vector2d& q0 = t[c];
            const Eigen::Vector2d& q1 = t[(c + 1) % 3];
            const double f0 = cross2(q1 - q0, pa - q0);
            const double f1 = cross2(q1 - q0, pb - q0);
            const std::array<int, 2> side{corner[f][c], corner[f][(c + 1) % 3]};
            if (f0 <= 0.0 && f1 <= 0.0) {
              cover.hi = cover.lo;
            } else if (f0 <= 0.0 || f1 <= 0.0) {
              const double cut = f0 / (f0 - f1);
              if (f0 > 0.0 && cut < cover.hi) {
                cover.hi = cut;
                cover.hi_edge = side;
              } else if (f0 <= 0.0 && cut > cover.lo) {
                cover.lo = cut;
                cover.lo_edge = side;
              }
            }
          }
          if (cover.lo < cover.hi) covered.push_back(cover);
        }
      }
    }

    std::sort(covered.begin(), covered.end());
    double cursor = 0.0;
    std::array<int, 2> cursor_edge{-1, -1};
    for (const auto& cover : covered) {
      if (cover.lo > cursor) pieces.push_back({edge.a, edge.b, cursor, cover.lo, cursor_edge, cover.lo_edge});
      if (cover.hi > cursor) {
        cursor = cover.hi;
        cursor_edge = cover.hi_edge;
      }
    }
    if (cursor < 1.0) pieces.push_back({edge.a, edge.b, cursor, 1.0, cursor_edge, {-1, -1}});
  }
  return pieces;
}

SoftSilhouette rasterize_soft(const Points2D& points, const SilhouetteTopology& topology, ImageSize size,
                              double sharpness) {
  check_size(size);
  if (!(sharpness > 0.0) || !std::isfinite(sharpness)) {
    throw InvalidArgument("rasterize_soft: sharpness must be positive");
  }
  SoftSilhouette out;
  out.sharpness = sharpness;
  out.coverage = rasterize_coverage(points, topology.faces(), size);
  out.pieces = silhouette_boundary(points, topology);
  out.mask = Mask(size.height, size.width, 0.0);
  out.hits.assign(static_cast<std::size_t>(size.height) * size.width, {});

  const double band = kSoftSaturation / sharpness;
  const Box image{0.0, 0.0, static_cast<double>(size.width), static_cast<double>(size.height)};
  const Box reach{-band, -band, size.width + band, size.height + band};
  BucketGrid grid(image, 4.0);

  std::vector<Eigen::Vector2d> seg_start(out.pieces.size());
  std::vector<Eigen::Vector2d> seg_dir(out.pieces.size());
  for (int p = 0; p < static_cast<int>(out.pieces.size()); ++p) {
    const auto& piece = out.pieces[p];
    const Eigen::Vector2d a = point(points, piece.a);
    const Eigen::Vector2d d = point(points, piece.b) - a;
    seg_start[p] = a;
    seg_dir[p] = d;
    const Box b = bounds_of({a + piece.t0 * d, a + piece.t1 * d});
    if (overlaps(b, reach)) grid.insert(b, p);
  }

  const int max_ring = std::max(grid.nx(), grid.ny());
  for (int r = 0; r < size.height; ++r) {
    for (int c = 0; c < size.width; ++c) {
      const Eigen::Vector2d q(c + 0.5, r + 0.5);
      const int ci = grid.column(q.x());
      const int cj = grid.row(q.y());
      double best = INFINITY;
      int best_piece = -1;
      double best_t = 0.0;
      for (int ring = 0; ring <= max_ring; ++ring) {
        for (int j = cj - ring; j <= cj + ring; ++j) {
          if (j < 0 || j >= grid.ny()) continue;
          const bool edge_row = j == cj - ring || j == cj + ring;
          for (int i = ci - ring; i <= ci + ring; i += edge_row ? 1 : 2 * ring) {
            if (i >= 0 && i < grid.nx()) {
              for (int p : grid.at(i, j)) {
                const auto& piece = out.pieces[p];
                const Eigen::Vector2d& d = seg_dir[p];
                const double t =
                    std::clamp((q - seg_start[p]).dot(d) / d.squaredNorm(), piece.t0, piece.t1);
                const double dist = (seg_start[p] + t * d - q).norm();
                if (dist < best) {
                  best = dist;
                  best_piece = p;
                  best_t = t;
                }
              }
            }
            if (ring == 0) break;
          }
        }
        const double cleared = ring * grid.cell();
        if (best <= cleared || cleared >= band) break;
      }

      const bool inside = out.coverage.data(r, c) > 0.5;
      const double sign = inside ? 1.0 : -1.0;
      auto& hit = out.hits[static_cast<std::size_t>(r) * size.width + c];
      hit.sign = sign;
      if (best < band) {
        hit.distance = best;
        if (best > 0.0) {
          hit.piece = best_piece;
          hit.t = best_t;
        }
        out.mask.data(r, c) = sigmoid(sharpness * sign * best);
      } else {
        hit.distance = band;
        out.mask.data(r, c) = sigmoid(sign * kSoftSaturation);
      }
    }
  }
  return out;
}

void soft_silhouette_backward(const SoftSilhouette& soft, const MaskData& grad_pixels, const Points2D& points,
                              Points2D& grad_points) {
  if (grad_pixels.rows() != soft.mask.height() || grad_pixels.cols() != soft.mask.width()) {
    throw InvalidArgument("soft_silhouette_backward: gradient image has wrong size");
  }
  if (grad_points.rows() != points.rows()) grad_points = Points2D::Zero(points.rows(), 2);
  const int width = soft.mask.width();
  for (std::size_t idx = 0; idx < soft.hits.size(); ++idx) {
    const auto& hit = soft.hits[idx];
    if (hit.piece < 0) continue;
    const int r = static_cast<int>(idx) / width;
    const int c = static_cast<int>(idx) % width;
    const double g_pixel = grad_pixels(r, c);
    if (g_pixel == 0.0) continue;
    const double value = soft.mask.data(r, c);
    const double coeff = g_pixel * soft.sharpness * value * (1.0 - value) * hit.sign;
    const auto& piece = soft.pieces[hit.piece];
    const Eigen::Vector2d a = point(points, piece.a);
    const Eigen::Vector2d b = point(points, piece.b);
    const Eigen::Vector2d nearest = a + hit.t * (b - a);
    const Eigen::Vector2d g = coeff * (nearest - Eigen::Vector2d(c + 0.5, r + 0.5)) / hit.distance;
    const std::array<int, 2>* clip = nullptr;
    if (hit.t == piece.t0 && piece.clip0[0] >= 0) clip = &piece.clip0;
    if (hit.t == piece.t1 && piece.clip1[0] >= 0) clip = &piece.clip1;
    if (clip != nullptr) {
      // Crossings of nearly parallel edges slide fast and only briefly;
      // there the point is carried by its own edge instead.
      const Eigen::Vector2d f = point(points, (*clip)[1]) - point(points, (*clip)[0]);
      if (std::abs(cross2(b - a, f)) < kMinCrossingSine * (b - a).norm() * f.norm()) clip = nullptr;
    }
    if (clip == nullptr) {
      grad_points.row(piece.a) += ((1.0 - hit.t) * g).transpose();
      grad_points.row(piece.b) += (hit.t * g).transpose();
      continue;
    }
    // nearest = a + t (b - a) with t = cross(c - a, f) / cross(b - a, f),
    // f = d - c, the crossing of the two edge lines.
    const Eigen::Vector2d pc = point(points, (*clip)[0]);
    const Eigen::Vector2d pd = point(points, (*clip)[1]);
    const Eigen::Vector2d e = b - a;
    const Eigen::Vector2d f = pd - pc;
    const Eigen::Vector2d w = pc - a;
    const double denom = cross2(e, f);
    const double t = hit.t;
    const double s = g.dot(e) / denom;
    auto perp = [](const Eigen::Vector2d& v) { return Eigen::Vector2d(v.y(), -v.x()); };
    grad_points.row(piece.a) += ((1.0 - t) * (g - s * perp(f))).transpose();
    grad_points.row(piece.b) += (t * (g - s * perp(f))).transpose();
    grad_points.row((*clip)[0]) += (s * (perp(f) + perp(w)) - s * t * perp(e)).transpose();
    grad_points.row((*clip)[1]) += (s * t * perp(e) - s * perp(w)).transpose();
  }
}

Mask rasterize_mask(const Mesh& mesh, const CameraParams& cam, ImageSize size) {
  check_camera(cam);
  return rasterize_coverage(project_vertices(mesh.vertices, cam), mesh.faces, size);
}

Mask rasterize_soft(const Mesh& mesh, const CameraParams& cam, ImageSize size, double sharpness) {
  check_camera(cam);
  const SilhouetteTopology topology(mesh.faces);
  return rasterize_soft(project_vertices(mesh.vertices, cam), topology, size, sharpness).mask;
}

double mask_iou(const Mask& a, const Mask& b) {
  if (a.height() != b.height() || a.width() != b.width()) throw InvalidArgument("mask_iou: mask dimensions differ");
  const auto fa = a.data >= 0.5;
  const auto fb = b.data >= 0.5;
  const double inter = (fa && fb).count();
  const double uni = (fa || fb).count();
  return uni == 0.0 ? 1.0 : inter / uni;
}

}  // namespace hamr
