#pragma once

// Finite-difference checks for every tape primitive on random shapes.
// Shared by the unit tests and the acceptance runner.

#include "canoncorr/autodiff.hpp"

#include <functional>
#include <random>
#include <string>
#include <vector>

namespace canoncorr::testing {

struct PrimitiveCase {
  std::string name;
  // Builds parameters for one random case and returns the scalar function.
  std::function<void(std::mt19937_64&, std::vector<ad::Tensor>&,
                     ad::ScalarFn&)> make;
};

inline ad::Tensor random_tensor(std::mt19937_64& rng, ad::Shape shape,
                                double lo = -1.0, double hi = 1.0,
                                double min_abs = 0.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  ad::Tensor t = ad::Tensor::zeros(std::move(shape), true);
  for (auto& x : t.data) {
    do {
      x = u(rng);
    } while (std::abs(x) < min_abs);
  }
  return t;
}

// Contracts an arbitrary output against fixed random weights so every output
// element reaches the scalar with a distinct coefficient.
inline ad::Var contract(ad::Var y, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ad::Tensor w = random_tensor(rng, y.shape());
  w.requires_grad = false;
  w.grad.clear();
  return ad::sum(ad::mul(y, y.tape()->constant(std::move(w))));
}

inline std::pair<std::size_t, std::size_t> random_dims(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> d(1, 6);
  const std::size_t r = d(rng);
  return {r, d(rng)};
}

inline std::vector<PrimitiveCase> primitive_cases() {
  using ad::Var;
  std::vector<PrimitiveCase> cases;
  auto binary = [&](std::string name, std::function<Var(Var, Var)> op,
                    bool positive = false) {
    cases.push_back({std::move(name), [=](std::mt19937_64& rng, auto& params, auto& f) {
                       auto [r, c] = random_dims(rng);
                       params.push_back(random_tensor(rng, {r, c}));
                       params.push_back(random_tensor(rng, {r, c}, positive ? 0.5 : -1.0, 1.5));
                       const auto seed = rng();
                       f = [op, seed](ad::Tape&, std::span<const Var> v) {
                         return contract(op(v[0], v[1]), seed);
                       };
                     }});
  };
  binary("add", [](Var a, Var b) { return ad::add(a, b); });
  binary("sub", [](Var a, Var b) { return ad::sub(a, b); });
  binary("mul", [](Var a, Var b) { return ad::mul(a, b); });

  cases.push_back({"scale_const", [](std::mt19937_64& rng, auto& params, auto& f) {
                     auto [r, c] = random_dims(rng);
                     params.push_back(random_tensor(rng, {r, c}));
                     const double k = std::uniform_real_distribution<double>(-3, 3)(rng);
                     const auto seed = rng();
                     f = [k, seed](ad::Tape&, std::span<const Var> v) {
                       return contract(ad::scale(v[0], k), seed);
                     };
                   }});
  cases.push_back({"scale_var", [](std::mt19937_64& rng, auto& params, auto& f) {
                     auto [r, c] = random_dims(rng);
                     params.push_back(random_tensor(rng, {r, c}));
                     params.push_back(random_tensor(rng, {1}));
                     const auto seed = rng();
                     f = [seed](ad::Tape&, std::span<const Var> v) {
                       return contract(ad::scale(v[0], v[1]), seed);
                     };
                   }});
  cases.push_back({"matmul", [](std::mt19937_64& rng, auto& params, auto& f) {
                     auto [n, k] = random_dims(rng);
                     const std::size_t m = std::uniform_int_distribution<std::size_t>(1, 6)(rng);
                     params.push_back(random_tensor(rng, {n, k}));
                     params.push_back(random_tensor(rng, {k, m}));
                     const auto seed = rng();
                     f = [seed](ad::Tape&, std::span<const Var> v) {
                       return contract(ad::matmul(v[0], v[1]), seed);
                     };
                   }});
  auto reduction = [&](std::string name, std::function<Var(Var)> op,
                       double lo, double hi, double min_abs) {
    cases.push_back({std::move(name), [=](std::mt19937_64& rng, auto& params, auto& f) {
                       auto [r, c] = random_dims(rng);
                       params.push_back(random_tensor(rng, {r, c}, lo, hi, min_abs));
                       f = [op](ad::Tape&, std::span<const Var> v) {
                         // Squared so that the check also exercises a
                         // non-unit upstream gradient.
                         Var y = op(v[0]);
                         return ad::mul(y, y);
                       };
                     }});
  };
  reduction("sum", [](Var a) { return ad::sum(a); }, -1, 1, 0);
  reduction("mean", [](Var a) { return ad::mean(a); }, -1, 1, 0);
  reduction("l1_norm", [](Var a) { return ad::l1_norm(a); }, -1, 1, 0.05);
  reduction("l2_norm", [](Var a) { return ad::l2_norm(a); }, -1, 1, 0.05);

  cases.push_back({"cosine_similarity", [](std::mt19937_64& rng, auto& params, auto& f) {
                     auto [n, m] = random_dims(rng);
                     const std::size_t k = std::uniform_int_distribution<std::size_t>(1, 6)(rng);
                     params.push_back(random_tensor(rng, {n, m}, -1, 1, 0.1));
                     params.push_back(random_tensor(rng, {k, m}, -1, 1, 0.1));
                     const auto seed = rng();
                     f = [seed](ad::Tape&, std::span<const Var> v) {
                       return contract(ad::cosine_similarity(v[0], v[1]), seed);
                     };
                   }});
  for (std::size_t axis : {0u, 1u}) {
    cases.push_back({"softmax_axis" + std::to_string(axis),
                     [axis](std::mt19937_64& rng, auto& params, auto& f) {
                       auto [r, c] = random_dims(rng);
                       params.push_back(random_tensor(rng, {r, c}, -3, 3));
                       const auto seed = rng();
                       f = [seed, axis](ad::Tape&, std::span<const Var> v) {
                         return contract(ad::softmax(v[0], axis), seed);
                       };
                     }});
  }
  cases.push_back({"log", [](std::mt19937_64& rng, auto& params, auto& f) {
                     auto [r, c] = random_dims(rng);
                     params.push_back(random_tensor(rng, {r, c}, 0.2, 3.0));
                     const auto seed = rng();
                     f = [seed](ad::Tape&, std::span<const Var> v) {
                       return contract(ad::log(v[0]), seed);
                     };
                   }});
  cases.push_back({"exp", [](std::mt19937_64& rng, auto& params, auto& f) {
                     auto [r, c] = random_dims(rng);
                     params.push_back(random_tensor(rng, {r, c}, -2, 2));
                     const auto seed = rng();
                     f = [seed](ad::Tape&, std::span<const Var> v) {
                       return contract(ad::exp(v[0]), seed);
                     };
                   }});
  cases.push_back({"gather_rows", [](std::mt19937_64& rng, auto& params, auto& f) {
                     auto [r, c] = random_dims(rng);
                     params.push_back(random_tensor(rng, {r, c}));
                     std::uniform_int_distribution<std::size_t> pick(0, r - 1);
                     std::vector<std::size_t> rows(1 + r * 2);
                     for (auto& x : rows) x = pick(rng);  // repeats included
                     const auto seed = rng();
                     f = [rows, seed](ad::Tape&, std::span<const Var> v) {
                       return contract(ad::gather_rows(v[0], rows), seed);
                     };
                   }});
  cases.push_back({"weighted_sum", [](std::mt19937_64& rng, auto& params, auto& f) {
                     auto [r, c] = random_dims(rng);
                     const std::size_t terms = std::uniform_int_distribution<std::size_t>(1, 4)(rng);
                     std::vector<double> w(terms);
                     for (std::size_t i = 0; i < terms; ++i) {
                       params.push_back(random_tensor(rng, {r, c}));
                       w[i] = std::uniform_real_distribution<double>(-2, 2)(rng);
                     }
                     const auto seed = rng();
                     f = [w, seed](ad::Tape&, std::span<const Var> v) {
                       return contract(ad::weighted_sum(v, w), seed);
                     };
                   }});
  return cases;
}

struct SuiteOutcome {
  double worst = 0.0;
  std::string worst_case;
  int cases_run = 0;
};

// Runs `repeats` random instances of every primitive at step 1e-5.
inline SuiteOutcome run_primitive_suite(int repeats, std::uint64_t seed) {
  SuiteOutcome out;
  std::mt19937_64 rng(seed);
  for (const auto& c : primitive_cases()) {
    for (int i = 0; i < repeats; ++i) {
      std::vector<ad::Tensor> params;
      ad::ScalarFn f;
      c.make(rng, params, f);
      std::vector<ad::Tensor*> ptrs;
      for (auto& p : params) ptrs.push_back(&p);
      const double err = ad::grad_check(f, ptrs, 1e-5);
      ++out.cases_run;
      if (err > out.worst) {
        out.worst = err;
        out.worst_case = c.name;
      }
    }
  }
  return out;
}

}  // namespace canoncorr::testing
