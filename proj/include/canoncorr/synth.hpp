#pragma once

#include "canoncorr/evaluation.hpp"
#include "canoncorr/features.hpp"
#include "canoncorr/geometry.hpp"
#include "canoncorr/prototype.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace canoncorr {

/// Rigid rotation of one template part about a pivot. Angles are drawn from
/// [−range, range] per instance.
struct Joint {
  Point3 pivot = Point3::Zero();
  Point3 axis = Point3::UnitZ();
  double range = 0.0;
};

struct SyntheticCategory {
  std::string name;
  // Dense surface samples, zero centroid and unit RMS norm.
  std::vector<Point3> template_points;
  // Part of each template point; 0 is the static body, p > 0 moves with
  // joints[p − 1].
  std::vector<int> part;
  std::vector<Joint> joints;
  // Surface connectivity of the template (symmetric knn graph).
  NeighborGraph surface;

  // Template indices of labeled keypoints. Keypoint id i is seen[i]; unseen
  // keypoints follow with ids seen.size() + j.
  std::vector<std::size_t> seen_keypoints;
  std::vector<std::size_t> unseen_keypoints;
  // Keypoint ids that have a left/right counterpart.
  std::vector<int> symmetric_ids;

  double scale_min = 0.8;
  double scale_max = 1.25;
  double deform_amplitude = 0.06;
  double articulation_scale = 1.0;
  std::uint64_t seed = 0;

  // Backbone stand-in: sinusoidal encoding with this many frequency bands
  // (feature dimension 6·bands), mixed by a fixed orthogonal matrix.
  std::size_t frequency_bands = 4;
  Eigen::MatrixXd feature_mixing;

  std::size_t feature_dim() const { return 6 * frequency_bands; }

  std::size_t num_keypoints() const {
    return seen_keypoints.size() + unseen_keypoints.size();
  }
  std::size_t template_index(int keypoint_id) const;
};

/// Built-in templates: "quadruped" (body, four legs, head, tail; articulated)
/// and "boxcar" (box with cabin and wheels; rigid).
SyntheticCategory make_category(const std::string& name, std::uint64_t seed);
std::vector<std::string> builtin_categories();

struct RenderConfig {
  int width = 64;
  int height = 64;
  double vertical_fov_degrees = kDefaultVerticalFovDegrees;
  double camera_distance = 6.5;
  double min_elevation_degrees = -15.0;
  double max_elevation_degrees = 45.0;
  int splat_radius = 1;
  // Depth band treated as one surface when resolving overlapping splats.
  double surface_thickness = 0.15;
  double feature_noise = 0.05;
  // Keypoints count as visible when the surface point that wins their pixel
  // lies within this template distance.
  double visibility_tolerance = 0.3;
};

/// World → camera: x_cam = R·(x − center).
struct CameraPose {
  Mat3 R = Mat3::Identity();
  Point3 center = Point3::Zero();

  Point3 to_camera(const Point3& x) const { return R * (x - center); }
};

struct SyntheticInstance {
  std::string image_id;
  std::vector<Point3> points;  // deformed template, object frame
  CameraPose pose;
  CameraIntrinsics intrinsics;
  DepthMap depth;
  Mask mask;
  FeatureGrid features;
  // Template index seen at each pixel, −1 on background.
  Grid2<int> correspondence;
  // One entry per keypoint id (seen, then unseen).
  std::vector<Keypoint> keypoints;
};

/// Features of a canonical point: sinusoidal encoding of its template
/// coordinates mixed by the category's fixed orthogonal matrix (no noise).
std::vector<double> canonical_features(const SyntheticCategory& cat,
                                       const Point3& canonical);

/// Anisotropic scaling, smooth displacement and articulation of the template
/// (object frame).
std::vector<Point3> deform_template(const SyntheticCategory& cat,
                                    std::uint64_t instance_seed);

SyntheticInstance generate_instance(const SyntheticCategory& cat,
                                    std::uint64_t instance_seed,
                                    const RenderConfig& cfg = {});

/// Converts an instance into a training sample annotated with the seen
/// keypoints only.
TrainingSample to_training_sample(const SyntheticCategory& cat,
                                  const SyntheticInstance& inst);

/// Mask-extent box (x, y, w, h) of an instance, in pixels.
BBox mask_bbox(const Mask& mask);

struct TestImage {
  FeatureGrid features;
  Mask mask;
  DepthMap depth;
  CameraIntrinsics intrinsics;
  // All visible keypoints (seen and unseen ids).
  std::vector<Keypoint> keypoints;
  BBox bbox;
};

struct Benchmark {
  SyntheticCategory category;
  std::vector<TrainingSample> train;
  std::map<std::string, TestImage> images;
  std::vector<EvalPair> val_pairs;
  std::vector<EvalPair> seen_pairs;
  std::vector<EvalPair> unseen_pairs;
};

struct BenchmarkConfig {
  std::size_t n_train = 200;
  std::size_t n_val = 10;
  std::size_t n_test_pairs = 50;
  std::uint64_t seed = 0;
  RenderConfig render;
};

Benchmark make_benchmark(const SyntheticCategory& cat,
                         const BenchmarkConfig& cfg);

}  // namespace canoncorr
