#pragma once

// Evaluation fixtures shared by the unit tests and the acceptance runner.

#include "canoncorr/evaluation.hpp"

#include <random>

namespace canoncorr::testing {

struct EvalFixture {
  std::vector<EvalPair> pairs;
  Predictions preds;
  AnnotatedPoints annotated;
};

/// Two categories, a few pairs each, keypoints scattered over 100×80 images,
/// predictions near the ground truth with occasional misses.
inline EvalFixture random_eval_fixture(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> ux(0.0, 99.0), uy(0.0, 79.0), u01(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 6.0);
  EvalFixture f;
  const int n_pairs = 1 + static_cast<int>(rng() % 6);
  for (int p = 0; p < n_pairs; ++p) {
    EvalPair pair;
    pair.category = p % 2 ? "cat_b" : "cat_a";
    pair.src_image = "src" + std::to_string(p);
    pair.tgt_image = "tgt" + std::to_string(p);
    pair.tgt_bbox = {5.0, 5.0, 20.0 + 60.0 * u01(rng), 20.0 + 50.0 * u01(rng)};
    auto& all = f.annotated[pair.tgt_image];
    const int n_kp = 1 + static_cast<int>(rng() % 8);
    auto& row = f.preds.emplace_back();
    for (int k = 0; k < n_kp; ++k) {
      const Pixel tgt{ux(rng), uy(rng)};
      all[k] = tgt;
      pair.keypoints.push_back({k, {ux(rng), uy(rng)}, tgt, u01(rng) < 0.5});
      row.push_back(u01(rng) < 0.2 ? Pixel{ux(rng), uy(rng)}
                                   : Pixel{tgt.x + noise(rng), tgt.y + noise(rng)});
    }
    // Annotated points without a pair keypoint.
    for (int k = n_kp; k < n_kp + 3; ++k) all[k] = {ux(rng), uy(rng)};
    f.pairs.push_back(std::move(pair));
  }
  return f;
}

/// Hand-enumerated aggregation fixture: pair sizes 2/2 with 2 and 0 correct,
/// and 3/1 with 3 and 0 correct. Threshold 0.1·100 = 10 px.
inline EvalFixture aggregation_fixture(bool uneven) {
  EvalFixture f;
  const int sizes[2] = {uneven ? 3 : 2, uneven ? 1 : 2};
  for (int p = 0; p < 2; ++p) {
    EvalPair pair{"s" + std::to_string(p), "t" + std::to_string(p), "cat", {}, {0, 0, 100, 50}};
    auto& row = f.preds.emplace_back();
    for (int k = 0; k < sizes[p]; ++k) {
      const Pixel gt{10.0 + 20.0 * k, 20.0};
      pair.keypoints.push_back({k, gt, gt, std::nullopt});
      row.push_back(p == 0 ? Pixel{gt.x + 3.0, gt.y} : Pixel{gt.x, gt.y + 25.0});
    }
    f.pairs.push_back(std::move(pair));
  }
  return f;
}

}  // namespace canoncorr::testing
