#include "canoncorr/synth.hpp"

#include "canoncorr/error.hpp"

#include <Eigen/Geometry>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <set>

namespace canoncorr {

namespace {

constexpr double kPi = 3.14159265358979323846;
// Surface samples per unit area of the un-normalized template.
constexpr double kSurfaceDensity = 1100.0;

struct TemplateBuilder {
  std::mt19937_64 rng;
  std::vector<Point3> points;
  std::vector<int> part;

  explicit TemplateBuilder(std::uint64_t seed) : rng(seed) {}

  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  }
  std::size_t count(double area) {
    return static_cast<std::size_t>(std::ceil(area * kSurfaceDensity));
  }
  void add(const Point3& p, int id) {
    points.push_back(p);
    part.push_back(id);
  }

  void ellipsoid(const Point3& c, const Point3& axes, int id) {
    // Thomsen's approximation of the surface area.
    const double p = 1.6075;
    const double ap = std::pow(axes.x(), p), bp = std::pow(axes.y(), p),
                 cp = std::pow(axes.z(), p);
    const double area =
        4 * kPi * std::pow((ap * bp + ap * cp + bp * cp) / 3.0, 1.0 / p);
    std::normal_distribution<double> n(0.0, 1.0);
    const std::size_t m = count(area);
    for (std::size_t i = 0; i < m;) {
      // Rejection on the surface-area element keeps the density uniform.
      Point3 u(n(rng), n(rng), n(rng));
      if (u.norm() < 1e-12) continue;
      u.normalize();
      const Point3 q = u.cwiseProduct(axes);
      // Area element of the sphere → ellipsoid map, relative to its maximum.
      const double w = u.cwiseQuotient(axes).norm() * axes.minCoeff();
      if (uniform(0.0, 1.0) > std::min(1.0, w)) continue;
      add(c + q, id);
      ++i;
    }
  }

  void sphere(const Point3& c, double r, int id) {
    ellipsoid(c, Point3::Constant(r), id);
  }

  // Side of a cylinder from a to b, with optional end caps.
  void cylinder(const Point3& a, const Point3& b, double r, bool cap_a,
                bool cap_b, int id) {
    const Point3 axis = (b - a).normalized();
    Point3 e1 = axis.unitOrthogonal();
    Point3 e2 = axis.cross(e1);
    const double len = (b - a).norm();
    const std::size_t m = count(2 * kPi * r * len);
    for (std::size_t i = 0; i < m; ++i) {
      const double t = uniform(0.0, 1.0), th = uniform(0.0, 2 * kPi);
      add(a + t * (b - a) + r * (std::cos(th) * e1 + std::sin(th) * e2), id);
    }
    auto cap = [&](const Point3& c) {
      const std::size_t mc = count(kPi * r * r);
      for (std::size_t i = 0; i < mc; ++i) {
        const double rr = r * std::sqrt(uniform(0.0, 1.0)),
                     th = uniform(0.0, 2 * kPi);
        add(c + rr * (std::cos(th) * e1 + std::sin(th) * e2), id);
      }
    };
    if (cap_a) cap(a);
    if (cap_b) cap(b);
  }

  void box(const Point3& lo, const Point3& hi, int id) {
    const Point3 ext = hi - lo;
    for (int axis = 0; axis < 3; ++axis) {
      const int u = (axis + 1) % 3, v = (axis + 2) % 3;
      const std::size_t m = count(ext(u) * ext(v));
      for (int side = 0; side < 2; ++side) {
        for (std::size_t i = 0; i < m; ++i) {
          Point3 p;
          p(axis) = side ? hi(axis) : lo(axis);
          p(u) = uniform(lo(u), hi(u));
          p(v) = uniform(lo(v), hi(v));
          add(p, id);
        }
      }
    }
  }

  std::size_t nearest(const Point3& target, int id) const {
    std::size_t best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (part[i] != id) continue;
      const double d = (points[i] - target).squaredNorm();
      if (d < bd) {
        bd = d;
        best = i;
      }
    }
    return best;
  }
};

struct KeypointSpec {
  Point3 at;
  int part;
};

void finish(SyntheticCategory& cat, TemplateBuilder& b,
            const std::vector<KeypointSpec>& seen,
            const std::vector<KeypointSpec>& unseen) {
  for (const auto& k : seen) cat.seen_keypoints.push_back(b.nearest(k.at, k.part));
  for (const auto& k : unseen) cat.unseen_keypoints.push_back(b.nearest(k.at, k.part));

  Point3 c = Point3::Zero();
  for (const auto& p : b.points) c += p;
  c /= static_cast<double>(b.points.size());
  double ms = 0.0;
  for (const auto& p : b.points) ms += (p - c).squaredNorm();
  const double rms = std::sqrt(ms / static_cast<double>(b.points.size()));
  for (auto& p : b.points) p = (p - c) / rms;
  for (auto& j : cat.joints) j.pivot = (j.pivot - c) / rms;

  cat.template_points = std::move(b.points);
  cat.part = std::move(b.part);
  cat.surface = NeighborGraph(cat.template_points, kDefaultGraphDegree);

  std::mt19937_64 rng(mix_seed(cat.seed, 77));
  std::normal_distribution<double> n(0.0, 1.0);
  const auto d = static_cast<long>(cat.feature_dim());
  Eigen::MatrixXd g(d, d);
  for (long i = 0; i < d; ++i) {
    for (long j = 0; j < d; ++j) g(i, j) = n(rng);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  cat.feature_mixing = qr.householderQ() * Eigen::MatrixXd::Identity(d, d);
}

SyntheticCategory make_quadruped(std::uint64_t seed) {
  SyntheticCategory cat;
  cat.name = "quadruped";
  cat.seed = seed;
  TemplateBuilder b(mix_seed(seed, 70));

  b.ellipsoid({0, 0, 0}, {1.0, 0.35, 0.3}, 0);
  const double hx[4] = {0.6, 0.6, -0.6, -0.6};
  const double hz[4] = {0.17, -0.17, 0.17, -0.17};
  for (int l = 0; l < 4; ++l) {
    b.cylinder({hx[l], -0.15, hz[l]}, {hx[l], -0.95, hz[l]}, 0.08, false, true,
               l + 1);
    cat.joints.push_back({Point3(hx[l], -0.15, hz[l]), Point3::UnitZ(), 0.35});
  }
  b.cylinder({0.8, 0.15, 0}, {1.15, 0.45, 0}, 0.1, false, false, 5);
  b.sphere({1.25, 0.5, 0}, 0.22, 5);
  b.cylinder({1.3, 0.45, 0}, {1.55, 0.4, 0}, 0.08, false, true, 5);
  cat.joints.push_back({Point3(0.8, 0.15, 0), Point3::UnitZ(), 0.3});
  b.cylinder({-0.95, 0.1, 0}, {-1.45, 0.4, 0}, 0.04, false, true, 6);
  cat.joints.push_back({Point3(-0.95, 0.1, 0), Point3::UnitZ(), 0.4});

  const std::vector<KeypointSpec> seen{
      {{1.55, 0.4, 0}, 5},        // nose
      {{1.25, 0.72, 0}, 5},       // head top
      {{-1.45, 0.4, 0}, 6},       // tail tip
      {{0.3, 0.35, 0}, 0},        // back
      {{0.6, -0.9, 0.25}, 1},     // feet
      {{0.6, -0.9, -0.25}, 2},
      {{-0.6, -0.9, 0.25}, 3},
      {{-0.6, -0.9, -0.25}, 4},
      {{0.55, 0, 0.25}, 0},       // shoulders
      {{0.55, 0, -0.25}, 0},
      {{-0.55, 0, 0.25}, 0},      // hips
      {{-0.55, 0, -0.25}, 0},
  };
  const std::vector<KeypointSpec> unseen{
      {{0.6, -0.55, 0.25}, 1},    // knees
      {{0.6, -0.55, -0.25}, 2},
      {{-0.6, -0.55, 0.25}, 3},
      {{-0.6, -0.55, -0.25}, 4},
      {{0.98, -0.05, 0}, 0},      // chest
      {{0, -0.1, 0.29}, 0},       // flank
  };
  cat.symmetric_ids = {4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15};
  finish(cat, b, seen, unseen);
  return cat;
}

SyntheticCategory make_boxcar(std::uint64_t seed) {
  SyntheticCategory cat;
  cat.name = "boxcar";
  cat.seed = seed;
  cat.articulation_scale = 0.0;
  TemplateBuilder b(mix_seed(seed, 71));

  b.box({-1, -0.3, -0.45}, {1, 0.2, 0.45}, 0);
  b.box({-0.5, 0.2, -0.4}, {0.4, 0.55, 0.4}, 0);
  for (double x : {0.65, -0.65}) {
    for (double z : {0.45, -0.45}) {
      const double out = z > 0 ? 0.55 : -0.55;
      b.cylinder({x, -0.3, z}, {x, -0.3, out}, 0.2, false, true, 0);
    }
  }

  const std::vector<KeypointSpec> seen{
      {{1, 0.2, 0.45}, 0},   {{1, 0.2, -0.45}, 0},   {{-1, 0.2, 0.45}, 0},
      {{-1, 0.2, -0.45}, 0}, {{1, -0.3, 0.45}, 0},   {{1, -0.3, -0.45}, 0},
      {{-1, -0.3, 0.45}, 0}, {{-1, -0.3, -0.45}, 0}, {{0.65, -0.3, 0.55}, 0},
      {{0.65, -0.3, -0.55}, 0}, {{-0.65, -0.3, 0.55}, 0},
      {{-0.65, -0.3, -0.55}, 0},
  };
  const std::vector<KeypointSpec> unseen{
      {{0.4, 0.55, 0.4}, 0},  {{0.4, 0.55, -0.4}, 0}, {{-0.5, 0.55, 0.4}, 0},
      {{-0.5, 0.55, -0.4}, 0}, {{1, -0.05, 0}, 0},    {{-1, -0.05, 0}, 0},
  };
  cat.symmetric_ids = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15};
  finish(cat, b, seen, unseen);
  return cat;
}

Mat3 look_at(const Point3& eye) {
  const Point3 f = (-eye).normalized();
  const Point3 r = f.cross(Point3::UnitY()).normalized();
  const Point3 d = f.cross(r);
  Mat3 R;
  R.row(0) = r.transpose();
  R.row(1) = d.transpose();
  R.row(2) = f.transpose();
  return R;
}

}  // namespace

std::size_t SyntheticCategory::template_index(int keypoint_id) const {
  if (keypoint_id < 0 || static_cast<std::size_t>(keypoint_id) >= num_keypoints()) {
    throw Error(ErrorKind::InvalidInput,
                "keypoint id " + std::to_string(keypoint_id) + " out of range");
  }
  const auto k = static_cast<std::size_t>(keypoint_id);
  return k < seen_keypoints.size() ? seen_keypoints[k]
                                   : unseen_keypoints[k - seen_keypoints.size()];
}

std::vector<std::string> builtin_categories() { return {"boxcar", "quadruped"}; }

SyntheticCategory make_category(const std::string& name, std::uint64_t seed) {
  if (name == "quadruped") return make_quadruped(seed);
  if (name == "boxcar") return make_boxcar(seed);
  throw Error(ErrorKind::Config, "unknown synthetic category '" + name + "'");
}

std::vector<double> canonical_features(const SyntheticCategory& cat,
                                       const Point3& x) {
  const auto d = static_cast<long>(cat.feature_dim());
  Eigen::VectorXd pe(d);
  long k = 0;
  for (std::size_t l = 0; l < cat.frequency_bands; ++l) {
    const double w = std::ldexp(kPi / 4, static_cast<int>(l));
    for (int a = 0; a < 3; ++a) {
      pe(k++) = std::sin(w * x(a));
      pe(k++) = std::cos(w * x(a));
    }
  }
  const Eigen::VectorXd f = cat.feature_mixing * pe;
  return {f.data(), f.data() + d};
}

std::vector<Point3> deform_template(const SyntheticCategory& cat,
                                    std::uint64_t instance_seed) {
  std::mt19937_64 rng(mix_seed(cat.seed, instance_seed, 1));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<Eigen::AngleAxisd> rot;
  for (const auto& j : cat.joints) {
    const double a = (2 * unit(rng) - 1) * j.range * cat.articulation_scale;
    rot.emplace_back(a, j.axis.normalized());
  }
  Point3 scale;
  for (int a = 0; a < 3; ++a) {
    scale(a) = cat.scale_min + (cat.scale_max - cat.scale_min) * unit(rng);
  }
  constexpr int kWaves = 4;
  Point3 dir[kWaves], freq[kWaves];
  double phase[kWaves];
  for (int w = 0; w < kWaves; ++w) {
    dir[w] = Point3(normal(rng), normal(rng), normal(rng)).normalized();
    freq[w] = Point3(normal(rng), normal(rng), normal(rng)).normalized() *
              (1.0 + unit(rng));
    phase[w] = 2 * kPi * unit(rng);
  }

  std::vector<Point3> out(cat.template_points.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    Point3 p = cat.template_points[i];
    if (const int part = cat.part[i]; part > 0) {
      const auto& j = cat.joints[static_cast<std::size_t>(part - 1)];
      p = j.pivot + rot[static_cast<std::size_t>(part - 1)] * (p - j.pivot);
    }
    p = p.cwiseProduct(scale);
    if (cat.deform_amplitude != 0.0) {
      Point3 d = Point3::Zero();
      for (int w = 0; w < kWaves; ++w) {
        d += dir[w] * std::sin(freq[w].dot(cat.template_points[i]) + phase[w]);
      }
      p += cat.deform_amplitude / std::sqrt(double(kWaves)) * d;
    }
    out[i] = p;
  }
  return out;
}

SyntheticInstance generate_instance(const SyntheticCategory& cat,
                                    std::uint64_t instance_seed,
                                    const RenderConfig& cfg) {
  if (cfg.width <= 0 || cfg.height <= 0 || cfg.splat_radius < 0) {
    throw Error(ErrorKind::InvalidInput, "invalid render configuration");
  }
  SyntheticInstance inst;
  inst.image_id = cat.name + "_" + std::to_string(instance_seed);
  inst.points = deform_template(cat, instance_seed);

  std::mt19937_64 rng(mix_seed(cat.seed, instance_seed, 2));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double az = 2 * kPi * unit(rng);
  const double el = (cfg.min_elevation_degrees +
                     (cfg.max_elevation_degrees - cfg.min_elevation_degrees) *
                         unit(rng)) *
                    kPi / 180.0;
  const Point3 eye = cfg.camera_distance *
                     Point3(std::cos(el) * std::sin(az), std::sin(el),
                            std::cos(el) * std::cos(az));
  inst.pose.R = look_at(eye);
  inst.pose.center = eye;
  inst.intrinsics = CameraIntrinsics::from_vertical_fov(
      cfg.vertical_fov_degrees, cfg.width, cfg.height);

  const int w = cfg.width, h = cfg.height, r = cfg.splat_radius;
  // Two-pass splatting: the nearest depth per pixel first, then among the
  // splats on that front surface (within surface_thickness) the one whose
  // projection is closest to the pixel centre.
  std::vector<Point3> cam(inst.points.size());
  std::vector<Pixel> proj(inst.points.size());
  std::vector<char> front(inst.points.size(), 0);
  for (std::size_t i = 0; i < inst.points.size(); ++i) {
    cam[i] = inst.pose.to_camera(inst.points[i]);
    front[i] = cam[i].z() > 0.0;
    if (front[i]) proj[i] = project(cam[i], inst.intrinsics);
  }
  auto for_each_splat = [&](auto&& fn) {
    for (std::size_t i = 0; i < cam.size(); ++i) {
      if (!front[i]) continue;
      const long cx = std::lround(proj[i].x), cy = std::lround(proj[i].y);
      for (long y = cy - r; y <= cy + r; ++y) {
        for (long x = cx - r; x <= cx + r; ++x) {
          const int xi = static_cast<int>(x), yi = static_cast<int>(y);
          if (xi >= 0 && yi >= 0 && xi < w && yi < h) fn(i, xi, yi);
        }
      }
    }
  };
  Grid2<double> zmin(w, h, std::numeric_limits<double>::infinity());
  for_each_splat([&](std::size_t i, int x, int y) {
    zmin.at(x, y) = std::min(zmin.at(x, y), cam[i].z());
  });
  Grid2<double> best(w, h, std::numeric_limits<double>::infinity());
  Grid2<double> zbuf(w, h, 0.0);
  inst.correspondence = Grid2<int>(w, h, -1);
  for_each_splat([&](std::size_t i, int x, int y) {
    if (cam[i].z() > zmin.at(x, y) + cfg.surface_thickness) return;
    const double d2 = (proj[i].x - x) * (proj[i].x - x) + (proj[i].y - y) * (proj[i].y - y);
    if (!(d2 < best.at(x, y))) return;
    best.at(x, y) = d2;
    zbuf.at(x, y) = cam[i].z();
    inst.correspondence.at(x, y) = static_cast<int>(i);
  });

  inst.depth = DepthMap(w, h, 0.0);
  inst.mask = Mask(w, h, 0);
  const std::size_t dim = cat.feature_dim();
  inst.features = FeatureGrid(static_cast<std::size_t>(h),
                              static_cast<std::size_t>(w), dim, w, h);
  std::mt19937_64 noise_rng(mix_seed(cat.seed, instance_seed, 3));
  std::normal_distribution<double> noise(0.0, 1.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      auto cell = inst.features.cell(static_cast<std::size_t>(y),
                                     static_cast<std::size_t>(x));
      const int idx = inst.correspondence.at(x, y);
      if (idx < 0) {
        for (auto& v : cell) v = cfg.feature_noise * noise(noise_rng);
        continue;
      }
      inst.depth.at(x, y) = zbuf.at(x, y);
      inst.mask.at(x, y) = 1;
      const auto f = canonical_features(
          cat, cat.template_points[static_cast<std::size_t>(idx)]);
      for (std::size_t d = 0; d < dim; ++d) {
        cell[d] = f[d] + cfg.feature_noise * noise(noise_rng);
      }
    }
  }

  for (std::size_t k = 0; k < cat.num_keypoints(); ++k) {
    const std::size_t t = cat.template_index(static_cast<int>(k));
    Keypoint kp;
    kp.id = static_cast<int>(k);
    const Point3 pc = inst.pose.to_camera(inst.points[t]);
    if (pc.z() > 0.0) {
      kp.px = project(pc, inst.intrinsics);
      const int x = static_cast<int>(std::lround(kp.px.x));
      const int y = static_cast<int>(std::lround(kp.px.y));
      if (inst.features.contains(kp.px) && inst.mask.inside(x, y)) {
        const int win = inst.correspondence.at(x, y);
        kp.visible =
            win >= 0 &&
            (cat.template_points[static_cast<std::size_t>(win)] -
             cat.template_points[t])
                    .norm() <= cfg.visibility_tolerance;
      }
    }
    inst.keypoints.push_back(kp);
  }
  return inst;
}

TrainingSample to_training_sample(const SyntheticCategory& cat,
                                  const SyntheticInstance& inst) {
  TrainingSample s;
  s.image_id = inst.image_id;
  s.features = inst.features;
  s.depth = inst.depth;
  s.mask = inst.mask;
  s.intrinsics = inst.intrinsics;
  for (const auto& kp : inst.keypoints) {
    if (static_cast<std::size_t>(kp.id) < cat.seen_keypoints.size()) {
      s.keypoints.push_back(kp);
    }
  }
  return s;
}

BBox mask_bbox(const Mask& mask) {
  int x0 = mask.width, y0 = mask.height, x1 = -1, y1 = -1;
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (!mask.at(x, y)) continue;
      x0 = std::min(x0, x);
      y0 = std::min(y0, y);
      x1 = std::max(x1, x);
      y1 = std::max(y1, y);
    }
  }
  if (x1 < 0) return {};
  return {double(x0), double(y0), double(x1 - x0 + 1), double(y1 - y0 + 1)};
}

namespace {

TestImage to_test_image(const SyntheticInstance& inst) {
  TestImage img;
  img.features = inst.features;
  img.mask = inst.mask;
  img.depth = inst.depth;
  img.intrinsics = inst.intrinsics;
  for (const auto& kp : inst.keypoints) {
    if (kp.visible) img.keypoints.push_back(kp);
  }
  img.bbox = mask_bbox(inst.mask);
  return img;
}

std::string image_name(const std::string& cat, const char* split,
                       std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%04zu", split, i);
  return cat + "_" + buf;
}

// Keypoints visible in both images whose id passes the filter.
std::vector<EvalKeypoint> shared_keypoints(const SyntheticCategory& cat,
                                           const SyntheticInstance& a,
                                           const SyntheticInstance& b,
                                           bool unseen) {
  std::vector<EvalKeypoint> out;
  const std::set<int> sym(cat.symmetric_ids.begin(), cat.symmetric_ids.end());
  for (std::size_t k = 0; k < cat.num_keypoints(); ++k) {
    const bool is_unseen = k >= cat.seen_keypoints.size();
    if (is_unseen != unseen) continue;
    if (!a.keypoints[k].visible || !b.keypoints[k].visible) continue;
    out.push_back({static_cast<int>(k), a.keypoints[k].px, b.keypoints[k].px,
                   sym.count(static_cast<int>(k)) > 0});
  }
  return out;
}

}  // namespace

Benchmark make_benchmark(const SyntheticCategory& cat,
                         const BenchmarkConfig& cfg) {
  if (cfg.n_train < 1 || cfg.n_test_pairs < 1) {
    throw Error(ErrorKind::InvalidInput,
                "benchmark needs at least one training instance and test pair");
  }
  Benchmark bench;
  bench.category = cat;
  for (std::size_t i = 0; i < cfg.n_train; ++i) {
    auto inst = generate_instance(cat, mix_seed(cfg.seed, 10, i), cfg.render);
    inst.image_id = image_name(cat.name, "train", i);
    bench.train.push_back(to_training_sample(cat, inst));
  }

  // Pairs of fresh instances; a pair is kept once it shares at least one
  // visible keypoint in every requested variant.
  std::uint64_t counter = 0;
  auto make_pairs = [&](const char* split, std::uint64_t stream, std::size_t n,
                        bool with_unseen, std::vector<EvalPair>& seen_out,
                        std::vector<EvalPair>* unseen_out) {
    for (std::size_t p = 0; p < n;) {
      const std::uint64_t s = counter++;
      auto src = generate_instance(cat, mix_seed(cfg.seed, stream, 2 * s), cfg.render);
      auto tgt = generate_instance(cat, mix_seed(cfg.seed, stream, 2 * s + 1), cfg.render);
      auto seen_kps = shared_keypoints(cat, src, tgt, false);
      auto unseen_kps = shared_keypoints(cat, src, tgt, true);
      const BBox box = mask_bbox(tgt.mask);
      if (seen_kps.empty() || (with_unseen && unseen_kps.empty()) ||
          box.w <= 0 || box.h <= 0) {
        if (counter > 100 * (n + 1)) {
          throw Error(ErrorKind::InsufficientData,
                      "could not draw pairs with shared visible keypoints");
        }
        continue;
      }
      src.image_id = image_name(cat.name, split, 2 * p);
      tgt.image_id = image_name(cat.name, split, 2 * p + 1);
      seen_out.push_back({src.image_id, tgt.image_id, cat.name,
                          std::move(seen_kps), box});
      if (unseen_out) {
        unseen_out->push_back({src.image_id, tgt.image_id, cat.name,
                               std::move(unseen_kps), box});
      }
      bench.images.emplace(src.image_id, to_test_image(src));
      bench.images.emplace(tgt.image_id, to_test_image(tgt));
      ++p;
    }
  };
  make_pairs("val", 11, cfg.n_val, false, bench.val_pairs, nullptr);
  counter = 0;
  make_pairs("test", 12, cfg.n_test_pairs, true, bench.seen_pairs,
             &bench.unseen_pairs);
  return bench;
}

}  // namespace canoncorr
