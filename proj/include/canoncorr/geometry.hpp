#pragma once

#include <Eigen/Core>
#include <Eigen/LU>

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace canoncorr {

using Point3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Continuous pixel coordinate, x to the right and y down.
struct Pixel {
  double x = 0.0;
  double y = 0.0;

  bool operator==(const Pixel&) const = default;
};

struct PointCloud {
  std::vector<Point3> points;
  // Source pixel of each point, when the cloud came from a depth map.
  std::optional<std::vector<Pixel>> provenance;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }

  /// Throws InvalidInput when a coordinate is non-finite or provenance length
  /// disagrees with the point count.
  void validate() const;
};

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;

  /// Pinhole with the given vertical field of view, square pixels and the
  /// principal point at the image center.
  static CameraIntrinsics from_vertical_fov(double fov_degrees, int width,
                                            int height);

  bool operator==(const CameraIntrinsics&) const = default;
};

/// Default vertical field of view used when a dataset carries no intrinsics.
inline constexpr double kDefaultVerticalFovDegrees = 53.13;

/// Similarity transform M = s[R|T] acting on homogeneous points, so that
/// M·x = s·(R·x) + s·T. Note that the translation is scaled as well.
struct SimilarityTransform {
  double s = 1.0;
  Mat3 R = Mat3::Identity();
  Point3 T = Point3::Zero();

  static SimilarityTransform identity() { return {}; }

  Point3 apply(const Point3& x) const { return s * (R * x + T); }

  /// Translation of the affine form x -> A·x + t, i.e. t = s·T.
  Point3 offset() const { return s * T; }
  Mat3 linear() const { return s * R; }

  SimilarityTransform inverse() const;

  /// Throws InvalidInput unless s > 0 and R is a proper rotation within 1e-9.
  void validate() const;
};

/// (lhs ∘ rhs): applying the result equals applying rhs first, then lhs.
SimilarityTransform compose(const SimilarityTransform& lhs,
                            const SimilarityTransform& rhs);

/// Lifts a pixel with known depth into the camera frame: d·A⁻¹·[u, v, 1]ᵀ.
Point3 backproject(const Pixel& kp, double depth, const CameraIntrinsics& cam);

/// Inverse pinhole; the point must lie in front of the camera.
Pixel project(const Point3& p, const CameraIntrinsics& cam);

/// Relative singular-value floor under which the cross-covariance is treated
/// as rank deficient (collinear or coincident sources).
inline constexpr double kDegenerateSingularRatio = 1e-12;

/// Closed-form least-squares similarity (Umeyama) mapping src onto dst by
/// index: minimizes Σ‖dst_i − M·src_i‖². With with_scale=false, s is fixed
/// to 1 and only the rigid part is estimated.
SimilarityTransform umeyama_align(std::span<const Point3> src,
                                  std::span<const Point3> dst,
                                  bool with_scale = true);
SimilarityTransform umeyama_align(const PointCloud& src, const PointCloud& dst,
                                  bool with_scale = true);

PointCloud apply_transform(const SimilarityTransform& m, const PointCloud& pc);

/// Sum of squared residuals Σ‖dst_i − M·src_i‖².
double alignment_residual(const SimilarityTransform& m,
                          std::span<const Point3> src,
                          std::span<const Point3> dst);

/// k points closest to pc[seed] (seed included), ordered by (distance, index).
std::vector<std::size_t> knn_neighbors(std::span<const Point3> points,
                                       std::size_t seed, std::size_t k);
std::vector<std::size_t> knn_neighbors(const PointCloud& pc, std::size_t seed,
                                       std::size_t k);

inline constexpr std::size_t kDefaultGraphDegree = 8;

/// Symmetric k-nearest-neighbour graph with Euclidean edge weights, stored as
/// adjacency lists sorted by neighbour index.
class NeighborGraph {
 public:
  struct Edge {
    std::size_t to;
    double weight;
  };

  NeighborGraph() = default;
  NeighborGraph(std::span<const Point3> points, std::size_t degree);

  std::size_t size() const { return adjacency_.size(); }
  const std::vector<Edge>& edges(std::size_t node) const {
    return adjacency_[node];
  }

 private:
  std::vector<std::vector<Edge>> adjacency_;
};

/// Grows a surface neighbourhood from the seed: each step takes the unvisited
/// point with the smallest graph distance to the seed through the points
/// selected so far (Dijkstra order), until k points are chosen or the seed's
/// connected component is exhausted. The result is ordered by selection and
/// may therefore be shorter than k.
std::vector<std::size_t> geodesic_neighbors(const NeighborGraph& graph,
                                            std::size_t seed, std::size_t k);
std::vector<std::size_t> geodesic_neighbors(
    const PointCloud& pc, std::size_t seed, std::size_t k,
    std::size_t graph_degree = kDefaultGraphDegree);

}  // namespace canoncorr
