#pragma once

// Random rigid and similarity fixtures shared by the geometry tests and the
// acceptance runner.

#include "canoncorr/geometry.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace canoncorr::testing {

inline Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  return q.toRotationMatrix();
}

inline std::vector<Point3> random_points(std::mt19937_64& rng, std::size_t count,
                                  double spread = 1.0) {
  std::normal_distribution<double> n(0.0, spread);
  std::vector<Point3> pts(count);
  for (auto& p : pts) p = Point3(n(rng), n(rng), n(rng));
  return pts;
}

inline SimilarityTransform random_similarity(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> scale(0.5, 2.0);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  SimilarityTransform m;
  m.s = scale(rng);
  m.R = random_rotation(rng);
  Point3 t(unit(rng), unit(rng), unit(rng));
  t *= 5.0 * std::abs(unit(rng)) / std::max(1.0, t.norm());
  m.T = t;
  return m;
}

inline std::vector<Point3> apply_all(const SimilarityTransform& m,
                              const std::vector<Point3>& pts) {
  std::vector<Point3> out;
  for (const auto& p : pts) out.push_back(m.apply(p));
  return out;
}

}  // namespace canoncorr::testing
