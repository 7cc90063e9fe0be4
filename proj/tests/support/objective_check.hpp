#pragma once

// Finite-difference check of the full training objective (alignment +
// descriptor + dense geometry) summed over a small synthetic batch. Shared by
// the prototype tests and the acceptance runner.

#include "canoncorr/autodiff.hpp"
#include "canoncorr/prototype.hpp"
#include "canoncorr/synth.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace canoncorr::testing {

struct ObjectiveCheck {
  double max_rel_error = 0.0;
  double value = 0.0;
  std::size_t n_params = 0;
  std::size_t dense_terms = 0;
};

inline ObjectiveCheck full_objective_grad_check(std::uint64_t seed,
                                                std::size_t n_images = 5,
                                                std::size_t max_points = 64) {
  const SyntheticCategory cat = make_category("quadruped", seed);
  std::vector<TrainingSample> samples;
  for (std::size_t i = 0; i < n_images; ++i) {
    samples.push_back(to_training_sample(
        cat, generate_instance(cat, mix_seed(seed, 99, i), RenderConfig{})));
  }
  const std::size_t k = cat.seen_keypoints.size();

  TrainConfig tc;
  tc.seed = seed;
  tc.descriptor_dim = 8;
  ModelState model = init_model(samples, k, "quadruped", tc);
  // P is initialized from one of these images, whose alignment residuals are
  // then exactly zero: the L1 kink, where central differences read 0. Move to
  // a generic point.
  std::mt19937_64 rng(mix_seed(seed, 98));
  std::normal_distribution<double> jitter(0.0, 0.02);
  for (auto& v : model.prototype.P.data) v += jitter(rng);
  model.prototype.renormalize();
  // At the default temperature some neighbourhoods put all their attention on
  // one keypoint; their held-constant fit is then exact to ~1e-7 and the L1
  // residuals again sit on the kink. A softer temperature keeps the point
  // generic.
  model.prototype.log_tau.data[0] = std::log(0.25);

  LossConfig lc;
  lc.dense.max_points = max_points;
  lc.dense.n_seeds = 4;
  lc.dense.k_neighbors = 8;
  std::vector<PreparedSample> prepared;
  for (const auto& s : samples) prepared.push_back(prepare_sample(s, k, lc.dense));

  std::vector<ad::Tensor*> params = model.prototype.parameters();
  for (auto* p : model.head.parameters()) params.push_back(p);

  ObjectiveCheck out;
  for (auto* p : params) out.n_params += p->data.size();

  // Stop-gradient choices are recorded on the first evaluation and replayed
  // at every probe, so the objective is a smooth function of the parameters.
  std::vector<AlignmentCache> caches(prepared.size());
  const ad::ScalarFn f = [&](ad::Tape& tape, std::span<const ad::Var>) {
    auto bound = BoundPrototype::bind(tape, model.prototype);
    std::vector<ad::Var> terms;
    for (std::size_t i = 0; i < prepared.size(); ++i) {
      auto lb = total_loss(tape, bound, prepared[i], model.head, lc, mix_seed(seed, 7, i),
                           &caches[i]);
      if (lb.root.valid()) terms.push_back(lb.root);
    }
    std::vector<double> w(terms.size(), 1.0);
    return ad::weighted_sum(terms, w);
  };
  out.max_rel_error = ad::grad_check(f, params, 1e-6);
  ad::Tape tape;
  out.value = f(tape, {}).item();
  for (const auto& c : caches) out.dense_terms += c.neighborhoods.size();
  return out;
}

}  // namespace canoncorr::testing
