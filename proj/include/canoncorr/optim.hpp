#pragma once

#include "canoncorr/autodiff.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace canoncorr {

struct AdamWParams {
  double lr = 1.25e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-3;
};

struct OptimizerState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::int64_t t = 0;
};

/// One AdamW update using each parameter's accumulated grad. Weight decay is
/// decoupled: param ← param·(1 − lr·wd) before the bias-corrected Adam term.
/// The state is lazily sized on the first call.
void adamw_step(std::span<ad::Tensor* const> params, OptimizerState& state,
                const AdamWParams& hp);

struct OneCycleParams {
  double max_lr = 1.25e-3;
  double pct_start = 0.3;
  double div_factor = 25.0;
  double final_div = 1e4;
};

/// Cosine warm-up from max_lr/div_factor to max_lr over the first
/// round(pct_start·total) steps, then cosine annealing down to
/// max_lr/div_factor/final_div at the last step.
double one_cycle_lr(std::int64_t step, std::int64_t total_steps,
                    const OneCycleParams& p = {});

}  // namespace canoncorr
