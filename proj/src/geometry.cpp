#include "canoncorr/geometry.hpp"

#include "canoncorr/error.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <sstream>
#include <string>

namespace canoncorr {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidInput: return "invalid input";
    case ErrorKind::Underdetermined: return "underdetermined";
    case ErrorKind::Degenerate: return "degenerate configuration";
    case ErrorKind::Numeric: return "numeric error";
    case ErrorKind::InsufficientData: return "insufficient data";
    case ErrorKind::TrainingFailed: return "training failed";
    case ErrorKind::Load: return "load error";
    case ErrorKind::Reference: return "reference error";
    case ErrorKind::UnsupportedAnnotation: return "unsupported annotation";
    case ErrorKind::UndefinedSimilarity: return "undefined similarity";
    case ErrorKind::Io: return "io error";
    case ErrorKind::Config: return "config error";
  }
  return "error";
}

namespace {

bool finite(const Point3& p) { return p.allFinite(); }

}  // namespace

void PointCloud::validate() const {
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!finite(points[i])) {
      throw Error(ErrorKind::InvalidInput,
                  "point " + std::to_string(i) + " has a non-finite component");
    }
  }
  if (provenance && provenance->size() != points.size()) {
    throw Error(ErrorKind::InvalidInput,
                "provenance length does not match point count");
  }
}

CameraIntrinsics CameraIntrinsics::from_vertical_fov(double fov_degrees,
                                                     int width, int height) {
  const double half = 0.5 * fov_degrees * M_PI / 180.0;
  const double f = 0.5 * height / std::tan(half);
  return {f, f, 0.5 * width - 0.5, 0.5 * height - 0.5};
}

SimilarityTransform SimilarityTransform::inverse() const {
  // x = R^T (y / s - T)  =>  s' = 1/s, R' = R^T, T' = -s R^T T.
  SimilarityTransform inv;
  inv.s = 1.0 / s;
  inv.R = R.transpose();
  inv.T = -s * (inv.R * T);
  return inv;
}

void SimilarityTransform::validate() const {
  if (!(s > 0.0) || !std::isfinite(s)) {
    throw Error(ErrorKind::InvalidInput, "similarity scale must be positive");
  }
  const double orth = (R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (!(orth <= 1e-9) || std::abs(R.determinant() - 1.0) > 1e-9) {
    throw Error(ErrorKind::InvalidInput, "R is not a proper rotation");
  }
  if (!T.allFinite()) {
    throw Error(ErrorKind::InvalidInput, "translation is not finite");
  }
}

SimilarityTransform compose(const SimilarityTransform& lhs,
                            const SimilarityTransform& rhs) {
  // lhs(rhs(x)) = s1 R1 (s2 R2 x + s2 T2) + s1 T1
  //             = s1 s2 (R1 R2 x + R1 T2 + T1 / s2).
  SimilarityTransform out;
  out.s = lhs.s * rhs.s;
  out.R = lhs.R * rhs.R;
  out.T = lhs.R * rhs.T + lhs.T / rhs.s;
  return out;
}

Point3 backproject(const Pixel& kp, double depth, const CameraIntrinsics& cam) {
  if (!(cam.fx > 0.0) || !(cam.fy > 0.0)) {
    throw Error(ErrorKind::InvalidInput, "focal lengths must be positive");
  }
  if (!(depth > 0.0) || !std::isfinite(depth)) {
    throw Error(ErrorKind::InvalidInput, "depth must be positive and finite");
  }
  if (!std::isfinite(kp.x) || !std::isfinite(kp.y)) {
    throw Error(ErrorKind::InvalidInput, "keypoint is not finite");
  }
  return {(kp.x - cam.cx) / cam.fx * depth, (kp.y - cam.cy) / cam.fy * depth,
          depth};
}

Pixel project(const Point3& p, const CameraIntrinsics& cam) {
  if (!(p.z() > 0.0)) {
    throw Error(ErrorKind::InvalidInput, "point is behind the camera");
  }
  return {cam.fx * p.x() / p.z() + cam.cx, cam.fy * p.y() / p.z() + cam.cy};
}

SimilarityTransform umeyama_align(std::span<const Point3> src,
                                  std::span<const Point3> dst,
                                  bool with_scale) {
  if (src.size() != dst.size()) {
    throw Error(ErrorKind::InvalidInput,
                "alignment needs equally sized point sets");
  }
  const std::size_t n = src.size();
  if (n < 3) {
    throw Error(ErrorKind::Underdetermined,
                "alignment needs at least 3 correspondences, got " +
                    std::to_string(n));
  }

  Point3 mu_src = Point3::Zero();
  Point3 mu_dst = Point3::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    mu_src += src[i];
    mu_dst += dst[i];
  }
  mu_src /= static_cast<double>(n);
  mu_dst /= static_cast<double>(n);

  Mat3 cov = Mat3::Zero();
  double var_src = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Point3 a = src[i] - mu_src;
    const Point3 b = dst[i] - mu_dst;
    cov += b * a.transpose();
    var_src += a.squaredNorm();
  }
  cov /= static_cast<double>(n);
  var_src /= static_cast<double>(n);

  Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Point3 sv = svd.singularValues();
  if (!(sv(0) > 0.0) || sv(1) < kDegenerateSingularRatio * sv(0) ||
      !(var_src > 0.0)) {
    throw Error(ErrorKind::Degenerate,
                "correspondences are collinear or coincident");
  }

  const Mat3& U = svd.matrixU();
  const Mat3& V = svd.matrixV();
  Point3 signs = Point3::Ones();
  if (U.determinant() * V.determinant() < 0.0) signs(2) = -1.0;

  SimilarityTransform m;
  m.R = U * signs.asDiagonal() * V.transpose();
  m.s = with_scale ? sv.dot(signs) / var_src : 1.0;
  // dst ≈ s R src + t with t = mu_dst - s R mu_src, and T = t / s.
  m.T = (mu_dst - m.s * (m.R * mu_src)) / m.s;
  return m;
}

SimilarityTransform umeyama_align(const PointCloud& src, const PointCloud& dst,
                                  bool with_scale) {
  return umeyama_align(std::span<const Point3>(src.points),
                       std::span<const Point3>(dst.points), with_scale);
}

PointCloud apply_transform(const SimilarityTransform& m, const PointCloud& pc) {
  PointCloud out;
  out.points.reserve(pc.points.size());
  const Mat3 a = m.linear();
  const Point3 t = m.offset();
  for (const auto& p : pc.points) out.points.push_back(a * p + t);
  out.provenance = pc.provenance;
  return out;
}

double alignment_residual(const SimilarityTransform& m,
                          std::span<const Point3> src,
                          std::span<const Point3> dst) {
  const Mat3 a = m.linear();
  const Point3 t = m.offset();
  double r = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    r += (dst[i] - (a * src[i] + t)).squaredNorm();
  }
  return r;
}

std::vector<std::size_t> knn_neighbors(std::span<const Point3> points,
                                       std::size_t seed, std::size_t k) {
  const std::size_t n = points.size();
  if (seed >= n) {
    throw Error(ErrorKind::InvalidInput, "seed index out of range");
  }
  if (k < 1 || k > n) {
    throw Error(ErrorKind::InvalidInput,
                "k must lie in [1, " + std::to_string(n) + "], got " +
                    std::to_string(k));
  }
  std::vector<std::pair<double, std::size_t>> order(n);
  const Point3& origin = points[seed];
  for (std::size_t i = 0; i < n; ++i) {
    order[i] = {(points[i] - origin).squaredNorm(), i};
  }
  std::partial_sort(order.begin(), order.begin() + static_cast<long>(k),
                    order.end());
  std::vector<std::size_t> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = order[i].second;
  return out;
}

std::vector<std::size_t> knn_neighbors(const PointCloud& pc, std::size_t seed,
                                       std::size_t k) {
  return knn_neighbors(std::span<const Point3>(pc.points), seed, k);
}

NeighborGraph::NeighborGraph(std::span<const Point3> points,
                             std::size_t degree) {
  if (degree < 1) {
    throw Error(ErrorKind::InvalidInput, "graph degree must be at least 1");
  }
  const std::size_t n = points.size();
  adjacency_.assign(n, {});
  const std::size_t take = std::min(degree, n == 0 ? 0 : n - 1);
  std::vector<std::pair<double, std::size_t>> order;
  order.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    order.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) order.emplace_back((points[j] - points[i]).squaredNorm(), j);
    }
    std::partial_sort(order.begin(), order.begin() + static_cast<long>(take),
                      order.end());
    for (std::size_t e = 0; e < take; ++e) {
      const std::size_t j = order[e].second;
      const double w = std::sqrt(order[e].first);
      adjacency_[i].push_back({j, w});
      adjacency_[j].push_back({i, w});
    }
  }
  for (auto& list : adjacency_) {
    std::sort(list.begin(), list.end(),
              [](const Edge& a, const Edge& b) { return a.to < b.to; });
    list.erase(std::unique(list.begin(), list.end(),
                           [](const Edge& a, const Edge& b) {
                             return a.to == b.to;
                           }),
               list.end());
  }
}

std::vector<std::size_t> geodesic_neighbors(const NeighborGraph& graph,
                                            std::size_t seed, std::size_t k) {
  const std::size_t n = graph.size();
  if (seed >= n) {
    throw Error(ErrorKind::InvalidInput, "seed index out of range");
  }
  if (k < 1 || k > n) {
    throw Error(ErrorKind::InvalidInput,
                "k must lie in [1, " + std::to_string(n) + "], got " +
                    std::to_string(k));
  }
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  std::vector<char> done(n, 0);
  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> frontier;
  dist[seed] = 0.0;
  frontier.emplace(0.0, seed);

  std::vector<std::size_t> out;
  out.reserve(k);
  while (!frontier.empty() && out.size() < k) {
    const auto [d, node] = frontier.top();
    frontier.pop();
    if (done[node] || d > dist[node]) continue;
    done[node] = 1;
    out.push_back(node);
    for (const auto& e : graph.edges(node)) {
      const double nd = d + e.weight;
      if (!done[e.to] && nd < dist[e.to]) {
        dist[e.to] = nd;
        frontier.emplace(nd, e.to);
      }
    }
  }
  return out;
}

std::vector<std::size_t> geodesic_neighbors(const PointCloud& pc,
                                            std::size_t seed, std::size_t k,
                                            std::size_t graph_degree) {
  if (k > pc.size()) {
    throw Error(ErrorKind::InvalidInput, "k exceeds the number of points");
  }
  NeighborGraph graph(std::span<const Point3>(pc.points), graph_degree);
  return geodesic_neighbors(graph, seed, k);
}

}  // namespace canoncorr
