#include "canoncorr/features.hpp"

#include "canoncorr/error.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace canoncorr {

FeatureGrid::FeatureGrid(std::size_t r, std::size_t c, std::size_t d, int iw,
                         int ih)
    : rows(r), cols(c), dim(d), image_width(iw), image_height(ih),
      data(r * c * d, 0.0) {
  if (r == 0 || c == 0 || d == 0 || iw <= 0 || ih <= 0) {
    throw Error(ErrorKind::InvalidInput, "feature grid dimensions must be positive");
  }
}

Pixel FeatureGrid::cell_center(std::size_t r, std::size_t c) const {
  return {(static_cast<double>(c) + 0.5) * scale_x() - 0.5,
          (static_cast<double>(r) + 0.5) * scale_y() - 0.5};
}

bool FeatureGrid::contains(const Pixel& px) const {
  return px.x >= -0.5 && px.y >= -0.5 && px.x <= image_width - 0.5 &&
         px.y <= image_height - 0.5;
}

std::vector<double> FeatureGrid::sample(const Pixel& px) const {
  if (!std::isfinite(px.x) || !std::isfinite(px.y) || !contains(px)) {
    throw Error(ErrorKind::InvalidInput,
                "pixel (" + std::to_string(px.x) + ", " + std::to_string(px.y) +
                    ") outside the image");
  }
  const double gx = std::clamp((px.x + 0.5) / scale_x() - 0.5, 0.0,
                               static_cast<double>(cols - 1));
  const double gy = std::clamp((px.y + 0.5) / scale_y() - 0.5, 0.0,
                               static_cast<double>(rows - 1));
  const auto x0 = static_cast<std::size_t>(std::floor(gx));
  const auto y0 = static_cast<std::size_t>(std::floor(gy));
  const std::size_t x1 = std::min(x0 + 1, cols - 1);
  const std::size_t y1 = std::min(y0 + 1, rows - 1);
  const double fx = gx - static_cast<double>(x0);
  const double fy = gy - static_cast<double>(y0);
  const double w00 = (1 - fx) * (1 - fy), w01 = fx * (1 - fy);
  const double w10 = (1 - fx) * fy, w11 = fx * fy;
  std::vector<double> out(dim);
  auto c00 = cell(y0, x0), c01 = cell(y0, x1), c10 = cell(y1, x0),
       c11 = cell(y1, x1);
  for (std::size_t d = 0; d < dim; ++d) {
    out[d] = w00 * c00[d] + w01 * c01[d] + w10 * c10[d] + w11 * c11[d];
  }
  return out;
}

ad::Tensor FeatureGrid::sample_rows(std::span<const Pixel> pixels) const {
  ad::Tensor out = ad::Tensor::zeros({pixels.size(), dim});
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    const auto f = sample(pixels[i]);
    std::copy(f.begin(), f.end(), out.data.begin() + static_cast<long>(i * dim));
  }
  return out;
}

ProjectionHead ProjectionHead::create(std::size_t in_dim, std::size_t out_dim,
                                      std::size_t hidden, std::uint64_t seed) {
  if (in_dim == 0 || out_dim == 0) {
    throw Error(ErrorKind::InvalidInput, "projection head dimensions must be positive");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  ProjectionHead head;
  std::vector<std::size_t> dims{in_dim};
  if (hidden > 0) dims.push_back(hidden);
  dims.push_back(out_dim);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const std::size_t in = dims[l], out = dims[l + 1];
    const double sd = 1.0 / std::sqrt(static_cast<double>(in));
    std::vector<double> w(in * out);
    for (auto& x : w) x = sd * normal(rng);
    head.layers.push_back({ad::Tensor({in, out}, std::move(w), true),
                           ad::Tensor::zeros({1, out}, true)});
  }
  return head;
}

std::size_t ProjectionHead::in_dim() const {
  return layers.empty() ? 0 : layers.front().weight.shape[0];
}

std::size_t ProjectionHead::out_dim() const {
  return layers.empty() ? 0 : layers.back().weight.shape[1];
}

std::vector<ad::Tensor*> ProjectionHead::parameters() {
  std::vector<ad::Tensor*> out;
  for (auto& l : layers) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

ad::Var ProjectionHead::forward(ad::Tape& tape, ad::Var x) {
  const std::size_t n = x.shape().at(0);
  ad::Var ones = tape.constant(ad::Tensor({n, 1}, std::vector<double>(n, 1.0)));
  ad::Var h = x;
  for (auto& l : layers) {
    ad::Var w = tape.param(l.weight);
    ad::Var b = tape.param(l.bias);
    h = ad::add(ad::matmul(h, w), ad::matmul(ones, b));
  }
  return h;
}

std::vector<double> ProjectionHead::apply(std::span<const double> x) const {
  if (x.size() != in_dim()) {
    throw Error(ErrorKind::InvalidInput,
                "head expects " + std::to_string(in_dim()) +
                    "-d features, got " + std::to_string(x.size()));
  }
  std::vector<double> h(x.begin(), x.end());
  for (const auto& l : layers) {
    const std::size_t in = l.weight.shape[0], out = l.weight.shape[1];
    std::vector<double> next(l.bias.data.begin(), l.bias.data.end());
    for (std::size_t i = 0; i < in; ++i) {
      const double v = h[i];
      for (std::size_t j = 0; j < out; ++j) next[j] += v * l.weight.data[i * out + j];
    }
    h = std::move(next);
  }
  return h;
}

FeatureGrid ProjectionHead::apply(const FeatureGrid& grid) const {
  FeatureGrid out(grid.rows, grid.cols, out_dim(), grid.image_width,
                  grid.image_height);
  for (std::size_t r = 0; r < grid.rows; ++r) {
    for (std::size_t c = 0; c < grid.cols; ++c) {
      const auto d = apply(grid.cell(r, c));
      std::copy(d.begin(), d.end(), out.cell(r, c).begin());
    }
  }
  return out;
}

}  // namespace canoncorr
