#pragma once

#include "canoncorr/geometry.hpp"

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace canoncorr {

/// Axis-aligned box in pixels.
struct BBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  bool operator==(const BBox&) const = default;
};

struct EvalKeypoint {
  int id = 0;
  Pixel src;
  Pixel tgt;  // ground truth in the target image
  std::optional<bool> geo_aware;
};

struct EvalPair {
  std::string src_image;
  std::string tgt_image;
  std::string category;
  std::vector<EvalKeypoint> keypoints;
  BBox tgt_bbox;
};

/// One prediction per keypoint of each pair, in pair order. An absent entry
/// is a missing prediction.
using Predictions = std::vector<std::vector<std::optional<Pixel>>>;

enum class Aggregation { PerImage, PerPoint };
enum class MetricKind { Pck, PckDagger };

const char* to_string(Aggregation a);
const char* to_string(MetricKind m);
Aggregation aggregation_from_string(const std::string& s);

struct CategoryScore {
  std::string category;
  double score = 0.0;
  std::size_t n_pairs = 0;
  std::size_t n_points = 0;
};

struct PckReport {
  MetricKind metric = MetricKind::Pck;
  Aggregation aggregation = Aggregation::PerImage;
  double alpha = 0.1;
  std::vector<CategoryScore> categories;  // sorted by name
  double average = 0.0;                   // unweighted mean over categories
  std::size_t missing = 0;
};

struct PckOptions {
  // Throw instead of counting a missing prediction as incorrect.
  bool strict = false;
};

/// Correct iff ‖pred − gt‖ ≤ alpha·max(w, h) of the target box.
PckReport pck_at(std::span<const EvalPair> pairs, const Predictions& preds,
                 double alpha, Aggregation agg, const PckOptions& opt = {});

/// Annotated points of each target image: keypoint id → pixel.
using AnnotatedPoints = std::map<std::string, std::map<int, Pixel>>;

/// As pck_at, and additionally the ground truth must be strictly the closest
/// annotated target point to the prediction.
PckReport pck_dagger(std::span<const EvalPair> pairs, const Predictions& preds,
                     double alpha, Aggregation agg,
                     const AnnotatedPoints& annotated,
                     const PckOptions& opt = {});

/// Keeps only geo-aware keypoints; pairs left empty are dropped.
std::vector<EvalPair> geo_subset_filter(std::span<const EvalPair> pairs);

enum class ReportFormat { Text, Csv };

/// Deterministic rendering; scores as percentages with one decimal.
std::string emit_report(const PckReport& report, ReportFormat format);
std::string emit_reports(std::span<const PckReport> reports,
                         ReportFormat format);

}  // namespace canoncorr
