#include "canoncorr/matching.hpp"

#include "canoncorr/error.hpp"

#include <algorithm>
#include <map>
#include <cmath>
#include <string>

namespace canoncorr {

const char* to_string(MatchMethod m) {
  return m == MatchMethod::Nn ? "nn" : "soft_window";
}

MatchMethod match_method_from_string(const std::string& s) {
  if (s == "nn") return MatchMethod::Nn;
  if (s == "soft_window") return MatchMethod::SoftWindow;
  throw Error(ErrorKind::Config,
              "unknown match method '" + s + "' (expected nn|soft_window)");
}

std::vector<double> extract_descriptor(const FeatureGrid& grid,
                                       const ProjectionHead& head,
                                       const Pixel& px) {
  return head.apply(grid.sample(px));
}

SimilarityMap similarity_map(std::span<const double> desc,
                             const FeatureGrid& target) {
  if (desc.size() != target.dim) {
    throw Error(ErrorKind::InvalidInput,
                "descriptor has dimension " + std::to_string(desc.size()) +
                    ", target grid " + std::to_string(target.dim));
  }
  double qn = 0.0;
  for (double v : desc) qn += v * v;
  qn = std::sqrt(qn);
  if (!(qn > 0.0)) {
    throw Error(ErrorKind::UndefinedSimilarity,
                "cosine similarity of a zero-norm descriptor");
  }
  SimilarityMap map{target.rows, target.cols,
                    std::vector<double>(target.rows * target.cols, 0.0)};
  for (std::size_t r = 0; r < target.rows; ++r) {
    for (std::size_t c = 0; c < target.cols; ++c) {
      auto cell = target.cell(r, c);
      double dot = 0.0, n2 = 0.0;
      for (std::size_t d = 0; d < cell.size(); ++d) {
        dot += desc[d] * cell[d];
        n2 += cell[d] * cell[d];
      }
      if (n2 > 0.0) {
        map.values[r * target.cols + c] =
            std::clamp(dot / (qn * std::sqrt(n2)), -1.0, 1.0);
      }
    }
  }
  return map;
}

namespace {

std::size_t argmax(const SimilarityMap& sim) {
  if (sim.values.empty()) {
    throw Error(ErrorKind::InvalidInput, "empty target grid");
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < sim.values.size(); ++i) {
    if (sim.values[i] > sim.values[best]) best = i;
  }
  return best;
}

}  // namespace

MatchResult match_nn(std::span<const double> desc, const FeatureGrid& target) {
  const auto sim = similarity_map(desc, target);
  const std::size_t i = argmax(sim);
  MatchResult m;
  m.row = i / sim.cols;
  m.col = i % sim.cols;
  m.px = target.cell_center(m.row, m.col);
  m.peak = sim.values[i];
  m.method = MatchMethod::Nn;
  return m;
}

MatchResult soft_window_from_map(const SimilarityMap& sim,
                                 const FeatureGrid& target, std::size_t window,
                                 double temp) {
  if (window < 1 || window % 2 == 0) {
    throw Error(ErrorKind::InvalidInput, "window must be odd and positive");
  }
  if (!(temp > 0.0)) {
    throw Error(ErrorKind::InvalidInput, "temperature must be positive");
  }
  const std::size_t i = argmax(sim);
  MatchResult m;
  m.row = i / sim.cols;
  m.col = i % sim.cols;
  m.peak = sim.values[i];
  m.method = MatchMethod::SoftWindow;

  const std::size_t half = window / 2;
  const std::size_t r0 = m.row > half ? m.row - half : 0;
  const std::size_t c0 = m.col > half ? m.col - half : 0;
  const std::size_t r1 = std::min(sim.rows - 1, m.row + half);
  const std::size_t c1 = std::min(sim.cols - 1, m.col + half);
  // Shift by the peak so the largest exponent is exactly zero.
  double wsum = 0.0, x = 0.0, y = 0.0;
  for (std::size_t r = r0; r <= r1; ++r) {
    for (std::size_t c = c0; c <= c1; ++c) {
      const double w = std::exp((sim.at(r, c) - m.peak) / temp);
      const Pixel p = target.cell_center(r, c);
      wsum += w;
      x += w * p.x;
      y += w * p.y;
    }
  }
  m.px = {x / wsum, y / wsum};
  return m;
}

MatchResult match_soft_window(std::span<const double> desc,
                              const FeatureGrid& target, std::size_t window,
                              double temp) {
  return soft_window_from_map(similarity_map(desc, target), target, window, temp);
}

Predictions predict_pairs(std::span<const EvalPair> pairs,
                          const GridLookup& grids, const ProjectionHead& head,
                          const MatchConfig& cfg) {
  std::map<std::string, FeatureGrid> projected;
  Predictions out(pairs.size());
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto& pair = pairs[p];
    const FeatureGrid* src = grids(pair.src_image);
    const FeatureGrid* tgt_raw = grids(pair.tgt_image);
    if (!src || !tgt_raw) continue;
    auto it = projected.find(pair.tgt_image);
    if (it == projected.end()) {
      it = projected.emplace(pair.tgt_image, head.apply(*tgt_raw)).first;
    }
    const FeatureGrid& tgt = it->second;
    for (const auto& kp : pair.keypoints) {
      const auto desc = extract_descriptor(*src, head, kp.src);
      const MatchResult m =
          cfg.method == MatchMethod::Nn
              ? match_nn(desc, tgt)
              : match_soft_window(desc, tgt, cfg.window, cfg.temperature);
      out[p].push_back(m.px);
    }
  }
  return out;
}

}  // namespace canoncorr
