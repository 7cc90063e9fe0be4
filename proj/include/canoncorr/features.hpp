#pragma once

#include "canoncorr/autodiff.hpp"
#include "canoncorr/geometry.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace canoncorr {

/// Dense H_f×W_f×D descriptor field covering an image of image_width ×
/// image_height pixels. Cell (i, j) is centred on pixel
/// ((j + 0.5)·sx − 0.5, (i + 0.5)·sy − 0.5) with s = image / grid.
struct FeatureGrid {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t dim = 0;
  int image_width = 0;
  int image_height = 0;
  std::vector<double> data;  // row-major rows × cols × dim

  FeatureGrid() = default;
  FeatureGrid(std::size_t rows, std::size_t cols, std::size_t dim,
              int image_width, int image_height);

  std::span<const double> cell(std::size_t r, std::size_t c) const {
    return {&data[(r * cols + c) * dim], dim};
  }
  std::span<double> cell(std::size_t r, std::size_t c) {
    return {&data[(r * cols + c) * dim], dim};
  }

  double scale_x() const { return static_cast<double>(image_width) / cols; }
  double scale_y() const { return static_cast<double>(image_height) / rows; }

  Pixel cell_center(std::size_t r, std::size_t c) const;

  bool contains(const Pixel& px) const;

  /// Bilinear interpolation at a continuous pixel; grid coordinates are
  /// clamped to the outermost cell centres. Throws InvalidInput when the
  /// pixel lies outside [−0.5, size − 0.5] on either axis.
  std::vector<double> sample(const Pixel& px) const;

  /// Stacks bilinear samples into an N×D matrix tensor.
  ad::Tensor sample_rows(std::span<const Pixel> pixels) const;
};

/// Affine map from backbone features (D) to descriptors (M), one layer or two
/// stacked affine layers (a linear bottleneck, no activation in between).
struct ProjectionHead {
  struct Layer {
    ad::Tensor weight;  // in × out
    ad::Tensor bias;    // 1 × out
  };
  std::vector<Layer> layers;

  /// Gaussian weights with std 1/sqrt(in) and zero biases. hidden == 0 gives
  /// a single layer.
  static ProjectionHead create(std::size_t in_dim, std::size_t out_dim,
                               std::size_t hidden, std::uint64_t seed);

  std::size_t in_dim() const;
  std::size_t out_dim() const;

  std::vector<ad::Tensor*> parameters();

  /// Records the head on a tape. The weights are bound as parameter leaves.
  ad::Var forward(ad::Tape& tape, ad::Var x);
  /// Same computation with plain arithmetic.
  std::vector<double> apply(std::span<const double> x) const;
  /// Projects every cell of a grid, keeping the grid geometry.
  FeatureGrid apply(const FeatureGrid& grid) const;
};

}  // namespace canoncorr
