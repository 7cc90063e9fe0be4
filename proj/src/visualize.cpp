#include "canoncorr/dataio.hpp"

#include "canoncorr/error.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace canoncorr {

std::string export_ply(const PointCloud& cloud, const std::vector<Rgb>& colors) {
  cloud.validate();
  if (colors.size() != cloud.size()) {
    throw Error(ErrorKind::InvalidInput,
                "got " + std::to_string(colors.size()) + " colors for " +
                    std::to_string(cloud.size()) + " points");
  }
  std::string out = "ply\nformat ascii 1.0\nelement vertex " +
                    std::to_string(cloud.size()) +
                    "\nproperty float x\nproperty float y\nproperty float z\n"
                    "property uchar red\nproperty uchar green\nproperty uchar blue\n"
                    "end_header\n";
  char line[128];
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.points[i];
    std::snprintf(line, sizeof line, "%.6g %.6g %.6g %d %d %d\n", p.x(), p.y(), p.z(),
                  colors[i][0], colors[i][1], colors[i][2]);
    out += line;
  }
  return out;
}

ad::Tensor pca_project(const ad::Tensor& features, std::size_t components) {
  if (features.shape.size() != 2) {
    throw Error(ErrorKind::InvalidInput, "pca expects an N×D matrix, got " +
                                             ad::shape_str(features.shape));
  }
  const auto n = static_cast<Eigen::Index>(features.rows());
  const auto d = static_cast<Eigen::Index>(features.cols());
  ad::Tensor out = ad::Tensor::zeros({features.rows(), components});
  if (n == 0 || d == 0) return out;

  Eigen::MatrixXd X(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      X(i, j) = features.data[static_cast<std::size_t>(i * d + j)];
    }
  }
  for (double v : features.data) {
    if (!std::isfinite(v)) throw Error(ErrorKind::InvalidInput, "non-finite feature");
  }
  X.rowwise() -= X.colwise().mean();

  // Principal directions as columns of V (D × k), largest variance first.
  Eigen::MatrixXd V;
  std::vector<double> vars;
  if (n < d) {
    // Gram trick: eigenvectors u of X·Xᵀ map to directions Xᵀu.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(X * X.transpose());
    V.resize(d, 0);
    for (Eigen::Index k = n - 1; k >= 0; --k) {
      V.conservativeResize(d, V.cols() + 1);
      V.col(V.cols() - 1) = X.transpose() * es.eigenvectors().col(k);
      vars.push_back(es.eigenvalues()(k));
    }
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(X.transpose() * X);
    V = es.eigenvectors().rowwise().reverse();
    for (Eigen::Index k = d - 1; k >= 0; --k) vars.push_back(es.eigenvalues()(k));
  }

  const double scale = std::max(1.0, vars.empty() ? 0.0 : vars.front());
  for (std::size_t c = 0; c < components && c < vars.size(); ++c) {
    auto v = V.col(static_cast<Eigen::Index>(c));
    // Directions without variance carry no information; leave them zero.
    if (!(vars[c] > 1e-12 * scale) || v.norm() == 0.0) continue;
    v.normalize();
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    const Eigen::VectorXd proj = X * v;
    for (Eigen::Index i = 0; i < n; ++i) out.at(static_cast<std::size_t>(i), c) = proj(i);
  }
  return out;
}

std::vector<Rgb> pca_colors(const ad::Tensor& features) {
  const ad::Tensor proj = pca_project(features, 3);
  const std::size_t n = proj.rows();
  std::vector<Rgb> out(n, Rgb{128, 128, 128});
  for (std::size_t c = 0; c < 3; ++c) {
    double lo = 0.0, hi = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      lo = i == 0 ? proj.at(i, c) : std::min(lo, proj.at(i, c));
      hi = i == 0 ? proj.at(i, c) : std::max(hi, proj.at(i, c));
    }
    if (!(hi - lo > 1e-12)) continue;
    for (std::size_t i = 0; i < n; ++i) {
      const double t = (proj.at(i, c) - lo) / (hi - lo);
      out[i][c] = static_cast<std::uint8_t>(std::lround(255.0 * t));
    }
  }
  return out;
}

std::string encode_ppm(int width, int height, const std::vector<Rgb>& pixels) {
  if (width <= 0 || height <= 0 ||
      pixels.size() != static_cast<std::size_t>(width) * height) {
    throw Error(ErrorKind::InvalidInput, "pixel count does not match image size");
  }
  std::string out = "P6\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  for (const auto& p : pixels) out.append(reinterpret_cast<const char*>(p.data()), 3);
  return out;
}

}  // namespace canoncorr
