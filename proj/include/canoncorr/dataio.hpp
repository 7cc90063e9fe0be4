#pragma once

#include "canoncorr/autodiff.hpp"
#include "canoncorr/evaluation.hpp"
#include "canoncorr/features.hpp"
#include "canoncorr/geometry.hpp"
#include "canoncorr/prototype.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace canoncorr {

// ---------------------------------------------------------------------------
// Annotations (SPair-style JSON; see docs/annotation_format.md)

struct AnnotatedImage {
  std::string imname;
  int width = 0;
  int height = 0;
  std::optional<CameraIntrinsics> intrinsics;
  // kps[id]: pixel, or empty when the keypoint is not visible.
  std::vector<std::optional<Pixel>> kps;
  BBox bbox;  // stored on disk as bndbox [xmin, ymin, xmax, ymax]
  std::optional<std::vector<bool>> geo_aware;
  // Data files relative to the annotation file.
  std::string features;
  std::string depth;
  std::string mask;
  nlohmann::json extra = nlohmann::json::object();
};

struct AnnotatedPair {
  std::string src_imname;
  std::string trg_imname;
  std::vector<int> kps_ids;
  nlohmann::json extra = nlohmann::json::object();
};

struct AnnotationFile {
  std::string category;
  std::size_t num_keypoints = 0;
  std::vector<AnnotatedImage> images;
  std::vector<AnnotatedPair> pairs;
  nlohmann::json extra = nlohmann::json::object();

  const AnnotatedImage* find(const std::string& imname) const;
};

/// Parses and validates. Errors carry the source name and, for syntax
/// errors, the byte offset.
AnnotationFile parse_annotations(const std::string& text,
                                 const std::string& source = "<memory>");
AnnotationFile load_annotations(const std::filesystem::path& path);

/// Canonical text form: sorted keys, two-space indent, trailing newline.
std::string dump_annotations(const AnnotationFile& file);
void save_annotations(const std::filesystem::path& path,
                      const AnnotationFile& file);

/// Evaluation pairs of an annotation file: each pair's kps_ids visible in
/// both images, with the target box.
std::vector<EvalPair> eval_pairs(const AnnotationFile& file);
/// All visible annotated points per image.
AnnotatedPoints annotated_points(const AnnotationFile& file);

// ---------------------------------------------------------------------------
// Tensors: "FTEN", u16 version, u8 dtype (1 = f32, 2 = f64), u32 rank,
// u32 dims[rank], little-endian row-major payload.

enum class DType : std::uint8_t { F32 = 1, F64 = 2 };
inline constexpr std::uint16_t kTensorVersion = 1;

std::string encode_tensor(const ad::Tensor& t, DType dtype = DType::F64);
ad::Tensor decode_tensor(const std::string& bytes,
                         const std::string& source = "<memory>");
void save_tensor(const std::filesystem::path& path, const ad::Tensor& t,
                 DType dtype = DType::F64);
ad::Tensor load_tensor(const std::filesystem::path& path);

/// rows × cols × dim tensor ↔ feature grid (image size travels separately).
ad::Tensor grid_to_tensor(const FeatureGrid& grid);
FeatureGrid tensor_to_grid(const ad::Tensor& t, int image_width,
                           int image_height);
ad::Tensor depth_to_tensor(const DepthMap& depth);
DepthMap tensor_to_depth(const ad::Tensor& t);

// ---------------------------------------------------------------------------
// Masks: binary PGM (P5, maxval 255); a pixel is set iff its value > 127.

Mask decode_mask(const std::string& bytes, const std::string& source = "<memory>");
std::string encode_mask(const Mask& mask);
Mask load_mask(const std::filesystem::path& path);
void save_mask(const std::filesystem::path& path, const Mask& mask);

// ---------------------------------------------------------------------------
// Checkpoints: "C3DP", u16 version, then length-prefixed fields (layout in
// binary_io.cpp). Deterministic: no timestamps.

struct Checkpoint {
  CanonicalPrototype prototype;
  ProjectionHead head;
  std::map<std::string, std::string> config;
  std::vector<StepLog> log_tail;
  std::string metadata;
};

inline constexpr std::uint16_t kCheckpointVersion = 1;

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes,
                             const std::string& source = "<memory>");
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Visualization

using Rgb = std::array<std::uint8_t, 3>;

/// ASCII PLY with x y z red green blue per vertex, 6 significant digits.
std::string export_ply(const PointCloud& points, const std::vector<Rgb>& colors);

/// Projection of centred features onto their top-3 principal directions
/// (N × 3; missing components are zero). Each direction's largest-magnitude
/// loading is made positive.
ad::Tensor pca_project(const ad::Tensor& features, std::size_t components = 3);

/// PCA projections min-max rescaled to [0, 255] per channel; channels
/// without variance are 128.
std::vector<Rgb> pca_colors(const ad::Tensor& features);

/// Binary PPM (P6).
std::string encode_ppm(int width, int height, const std::vector<Rgb>& pixels);

// ---------------------------------------------------------------------------

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

}  // namespace canoncorr
