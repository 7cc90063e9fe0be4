#pragma once

#include "canoncorr/evaluation.hpp"
#include "canoncorr/features.hpp"

#include <functional>

#include <span>
#include <string>
#include <vector>

namespace canoncorr {

enum class MatchMethod { Nn, SoftWindow };

const char* to_string(MatchMethod m);
MatchMethod match_method_from_string(const std::string& s);

struct MatchResult {
  Pixel px;
  double peak = 0.0;  // similarity at the hard argmax cell
  std::size_t row = 0;
  std::size_t col = 0;
  MatchMethod method = MatchMethod::Nn;
};

/// Cosine similarity of one descriptor against every cell, row-major.
/// Cells with a zero descriptor score 0.
struct SimilarityMap {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

/// Bilinear sample of the grid at a pixel, projected by the head.
std::vector<double> extract_descriptor(const FeatureGrid& grid,
                                       const ProjectionHead& head,
                                       const Pixel& px);

/// Throws UndefinedSimilarity for a zero-norm descriptor.
SimilarityMap similarity_map(std::span<const double> desc,
                             const FeatureGrid& target);

/// Target grids are expected already projected by the head
/// (ProjectionHead::apply). Ties go to the first cell in row-major order.
MatchResult match_nn(std::span<const double> desc, const FeatureGrid& target);

inline constexpr std::size_t kDefaultWindow = 15;
inline constexpr double kDefaultSoftTemperature = 0.04;

/// Hard argmax, then a softmax(sim/temp)-weighted mean of cell centres over
/// the window × window patch around it, clipped at the borders.
MatchResult match_soft_window(std::span<const double> desc,
                              const FeatureGrid& target,
                              std::size_t window = kDefaultWindow,
                              double temp = kDefaultSoftTemperature);

MatchResult soft_window_from_map(const SimilarityMap& sim,
                                 const FeatureGrid& target, std::size_t window,
                                 double temp);

struct MatchConfig {
  MatchMethod method = MatchMethod::SoftWindow;
  std::size_t window = kDefaultWindow;
  double temperature = kDefaultSoftTemperature;
};

/// Feature grid of an image by id, or nullptr when unavailable.
using GridLookup = std::function<const FeatureGrid*(const std::string&)>;

/// Predicted target pixel for every keypoint of every pair. Pairs whose
/// source or target grid is unavailable get no predictions.
Predictions predict_pairs(std::span<const EvalPair> pairs,
                          const GridLookup& grids, const ProjectionHead& head,
                          const MatchConfig& cfg);

}  // namespace canoncorr
