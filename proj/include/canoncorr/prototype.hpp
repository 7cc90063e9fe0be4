#pragma once

#include "canoncorr/autodiff.hpp"
#include "canoncorr/features.hpp"
#include "canoncorr/geometry.hpp"
#include "canoncorr/optim.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace canoncorr {

template <class T>
struct Grid2 {
  int width = 0;
  int height = 0;
  std::vector<T> data;

  Grid2() = default;
  Grid2(int w, int h, T fill = T{})
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  T& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  const T& at(int x, int y) const {
    return data[static_cast<std::size_t>(y) * width + x];
  }
  bool inside(int x, int y) const {
    return x >= 0 && y >= 0 && x < width && y < height;
  }
};

/// Depth in meters; 0 marks an invalid pixel.
using DepthMap = Grid2<double>;
using Mask = Grid2<std::uint8_t>;

struct Keypoint {
  int id = 0;
  Pixel px;
  bool visible = false;
};

struct TrainingSample {
  std::string image_id;
  FeatureGrid features;
  DepthMap depth;
  Mask mask;
  CameraIntrinsics intrinsics;
  std::vector<Keypoint> keypoints;
};

/// Per-category learned state. P holds canonical keypoints (K×3), Z their
/// descriptors (K×M); the temperature is stored as log τ.
struct CanonicalPrototype {
  std::string category;
  ad::Tensor P;
  ad::Tensor Z;
  ad::Tensor log_tau;

  std::size_t num_keypoints() const { return P.rows(); }
  std::size_t descriptor_dim() const { return Z.cols(); }
  double tau() const;

  std::vector<ad::Tensor*> parameters();

  /// Zero centroid and unit root-mean-square norm for the rows of P.
  void renormalize();
};

inline constexpr double kInitialTau = 0.07;
inline constexpr std::size_t kMinAlignmentKeypoints = 4;

struct PrototypeInit {
  std::size_t num_keypoints = 0;
  std::size_t descriptor_dim = 32;
  std::uint64_t seed = 0;
  double missing_sigma = 0.05;
};

CanonicalPrototype init_prototype(std::span<const TrainingSample> samples,
                                  std::string category,
                                  const PrototypeInit& init);

enum class Sampling { Geodesic, Knn };

const char* to_string(Sampling s);
Sampling sampling_from_string(const std::string& s);

struct DenseConfig {
  std::size_t max_points = 1024;
  std::size_t n_seeds = 32;
  std::size_t k_neighbors = 16;
  std::size_t graph_degree = kDefaultGraphDegree;
  Sampling sampling = Sampling::Geodesic;
};

/// Everything about a sample that does not depend on trainable parameters:
/// cleaned keypoints with their posed 3D positions and backbone features, and
/// the subsampled dense object pixels with theirs.
struct PreparedSample {
  std::string image_id;
  std::vector<int> kp_ids;
  std::vector<Pixel> kp_pixels;
  std::vector<Point3> kp_posed;
  ad::Tensor kp_features;  // V×D

  std::vector<Pixel> dense_pixels;
  std::vector<Point3> dense_posed;
  ad::Tensor dense_features;  // N×D
  NeighborGraph posed_graph;

  std::size_t dropped_keypoints = 0;
};

/// Drops keypoints that fall outside the image, off the mask or on invalid
/// depth, and subsamples the mask to at most cfg.max_points pixels on a
/// regular stride.
PreparedSample prepare_sample(const TrainingSample& sample,
                              std::size_t num_keypoints,
                              const DenseConfig& cfg);

/// Stop-gradient choices made during one loss evaluation: the alignment
/// transforms and sampled neighbourhoods. Recording them once and replaying
/// keeps the loss a smooth function of the parameters, which is what the
/// tape differentiates.
struct AlignmentCache {
  struct Neighborhood {
    bool canonical_seeded = true;
    std::vector<std::size_t> indices;
    SimilarityTransform transform;
  };
  bool recorded = false;
  std::optional<SimilarityTransform> keypoint_transform;
  std::vector<Neighborhood> neighborhoods;
};

/// Tape leaves for the trainable state, bound once per tape.
struct BoundPrototype {
  ad::Var P;
  ad::Var Z;
  ad::Var log_tau;

  static BoundPrototype bind(ad::Tape& tape, CanonicalPrototype& proto);
};

struct CanonicalMapResult {
  ad::Var coords;   // N×3
  ad::Var weights;  // N×K
};

/// Σᵢ wᵢ·pᵢ with w = softmax over keypoints of sim(zᵢ, φ)/τ.
CanonicalMapResult canonical_map(const BoundPrototype& proto, ad::Var phi);

/// Plain evaluation of the canonical map (no tape).
struct CanonicalMapValues {
  std::vector<Point3> coords;
  std::vector<std::vector<double>> weights;
};
CanonicalMapValues canonical_map_values(const CanonicalPrototype& proto,
                                        const ad::Tensor& phi);

/// Σᵢ ‖pᵢ − M̂·k̄ᵢ‖₁ over visible keypoints with M̂ the closed-form similarity
/// from posed to canonical keypoints, held constant. Empty when the sample
/// has fewer than 4 keypoints or they are degenerate.
std::optional<ad::Var> prototype_alignment_loss(const BoundPrototype& proto,
                                                const PreparedSample& sample,
                                                AlignmentCache* cache = nullptr);

/// Mean cross-entropy of each visible keypoint's projected feature against
/// its own canonical descriptor. Empty without visible keypoints.
std::optional<ad::Var> descriptor_loss(const BoundPrototype& proto,
                                       const PreparedSample& sample,
                                       ProjectionHead& head);

/// Bidirectional local rigidity between posed and canonical dense points:
/// canonical-space knn neighbourhoods aligned posed→canonical, plus posed
/// neighbourhoods (geodesic or knn) aligned canonical→posed, each term an L1
/// residual averaged over its neighbourhoods. Empty when the mask has too few
/// points or no neighbourhood yields a valid alignment.
std::optional<ad::Var> dense_geom_loss(const BoundPrototype& proto,
                                       const PreparedSample& sample,
                                       ProjectionHead& head,
                                       const DenseConfig& cfg,
                                       std::uint64_t seed,
                                       AlignmentCache* cache = nullptr);

/// Same loss evaluated on explicit canonical/posed point sets (bypasses the
/// attention map). Used for fixtures.
std::optional<ad::Var> dense_geom_loss_points(ad::Var canonical,
                                              std::span<const Point3> posed,
                                              const NeighborGraph* posed_graph,
                                              const DenseConfig& cfg,
                                              std::uint64_t seed,
                                              AlignmentCache* cache = nullptr);

/// Optional caller-supplied extra objective added to the total.
using ExternalLoss = std::function<std::optional<ad::Var>(
    ad::Tape&, const BoundPrototype&, const PreparedSample&, ProjectionHead&)>;

struct LossConfig {
  double lambda_z = 0.3;
  bool use_alignment = true;
  bool use_descriptor = true;
  bool use_geom = true;
  DenseConfig dense;
  ExternalLoss external;
};

struct LossBreakdown {
  double l_P = 0.0;
  double l_Z = 0.0;
  double l_geom = 0.0;
  std::optional<double> l_external;
  double total = 0.0;
  bool alignment_skipped = false;
  bool dense_skipped = false;
  /// Scalar root on the tape; invalid when every term was skipped.
  ad::Var root;
};

/// total = l_P + λ_Z·l_Z + l_geom + l_external.
double combine_losses(double l_P, double l_Z, double l_geom,
                      std::optional<double> l_external, double lambda_z);

LossBreakdown total_loss(ad::Tape& tape, const BoundPrototype& proto,
                         const PreparedSample& sample, ProjectionHead& head,
                         const LossConfig& cfg, std::uint64_t seed,
                         AlignmentCache* cache = nullptr);

struct TrainConfig {
  int epochs = 2;
  double lr = 1.25e-3;
  double weight_decay = 1e-3;
  double lambda_z = 0.3;
  bool use_geom = true;
  DenseConfig dense;
  std::uint64_t seed = 0;
  std::int64_t eval_every = 5000;
  std::size_t batch_size = 1;
  std::size_t descriptor_dim = 32;
  std::size_t head_hidden = 0;
  OneCycleParams schedule;
  ExternalLoss external;
};

struct StepLog {
  std::int64_t step = 0;
  double l_P = 0.0;
  double l_Z = 0.0;
  double l_geom = 0.0;
  double total = 0.0;
  double lr = 0.0;
};

/// Validation score (higher is better), typically PCK@0.1 on a held-out
/// split. Called at every eval_every steps and after the last step.
using ValidationFn =
    std::function<double(const CanonicalPrototype&, const ProjectionHead&)>;

struct TrainResult {
  CanonicalPrototype prototype;
  ProjectionHead head;
  std::vector<StepLog> log;
  std::optional<double> best_validation;
  std::int64_t best_step = 0;
  std::size_t skipped_alignment = 0;
  std::size_t skipped_dense = 0;
};

/// Initial state shared by train() and checkpoint inspection.
struct ModelState {
  CanonicalPrototype prototype;
  ProjectionHead head;
};
ModelState init_model(std::span<const TrainingSample> samples,
                      std::size_t num_keypoints, const std::string& category,
                      const TrainConfig& cfg);

TrainResult train(std::span<const TrainingSample> samples,
                  std::size_t num_keypoints, const std::string& category,
                  const TrainConfig& cfg, const ValidationFn& validate = {});

/// Mean total loss over samples with fixed seeds, for monitoring.
double mean_total_loss(std::span<const PreparedSample> samples,
                       CanonicalPrototype& proto, ProjectionHead& head,
                       const LossConfig& cfg, std::uint64_t seed);

/// Deterministic 64-bit mixing of a seed with extra words.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

}  // namespace canoncorr
