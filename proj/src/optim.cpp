#include "canoncorr/optim.hpp"

#include "canoncorr/error.hpp"

#include <cmath>
#include <string>

namespace canoncorr {

void adamw_step(std::span<ad::Tensor* const> params, OptimizerState& state,
                const AdamWParams& hp) {
  if (!(hp.lr >= 0.0) || !(hp.beta1 >= 0.0 && hp.beta1 < 1.0) ||
      !(hp.beta2 >= 0.0 && hp.beta2 < 1.0) || !(hp.eps > 0.0)) {
    throw Error(ErrorKind::InvalidInput, "adamw: invalid hyperparameters");
  }
  if (state.m.empty()) {
    for (const auto* p : params) {
      state.m.emplace_back(p->data.size(), 0.0);
      state.v.emplace_back(p->data.size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) {
    throw Error(ErrorKind::InvalidInput,
                "adamw: optimizer state tracks " +
                    std::to_string(state.m.size()) + " parameters, got " +
                    std::to_string(params.size()));
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto* p = params[k];
    if (state.m[k].size() != p->data.size() ||
        (!p->grad.empty() && p->grad.size() != p->data.size())) {
      throw Error(ErrorKind::InvalidInput,
                  "adamw: shape mismatch for parameter " + std::to_string(k));
    }
  }

  state.t += 1;
  const double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(state.t));
  const double decay = 1.0 - hp.lr * hp.weight_decay;
  for (std::size_t k = 0; k < params.size(); ++k) {
    ad::Tensor& p = *params[k];
    auto& m = state.m[k];
    auto& v = state.v[k];
    for (std::size_t i = 0; i < p.data.size(); ++i) {
      const double g = p.grad.empty() ? 0.0 : p.grad[i];
      m[i] = hp.beta1 * m[i] + (1.0 - hp.beta1) * g;
      v[i] = hp.beta2 * v[i] + (1.0 - hp.beta2) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p.data[i] = p.data[i] * decay - hp.lr * mhat / (std::sqrt(vhat) + hp.eps);
    }
  }
}

double one_cycle_lr(std::int64_t step, std::int64_t total_steps,
                    const OneCycleParams& p) {
  if (total_steps < 1 || step < 0 || step >= total_steps) {
    throw Error(ErrorKind::InvalidInput,
                "one_cycle_lr: step " + std::to_string(step) +
                    " outside [0, " + std::to_string(total_steps) + ")");
  }
  if (!(p.pct_start > 0.0 && p.pct_start < 1.0) || !(p.div_factor > 0.0) ||
      !(p.final_div > 0.0) || !(p.max_lr > 0.0)) {
    throw Error(ErrorKind::InvalidInput, "one_cycle_lr: invalid parameters");
  }
  const double initial = p.max_lr / p.div_factor;
  const double final_lr = initial / p.final_div;
  const auto peak = static_cast<std::int64_t>(
      std::llround(p.pct_start * static_cast<double>(total_steps)));
  auto cosine = [](double from, double to, double frac) {
    return to + (from - to) * 0.5 * (1.0 + std::cos(M_PI * frac));
  };
  if (step <= peak) {
    if (peak == 0) return p.max_lr;
    return cosine(initial, p.max_lr,
                  static_cast<double>(step) / static_cast<double>(peak));
  }
  const std::int64_t span = total_steps - 1 - peak;
  return cosine(p.max_lr, final_lr,
                static_cast<double>(step - peak) / static_cast<double>(span));
}

}  // namespace canoncorr
