#include "canoncorr/autodiff.hpp"

#include "canoncorr/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace canoncorr::ad {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape s, std::vector<double> d, bool rg)
    : shape(std::move(s)), data(std::move(d)), requires_grad(rg) {
  if (numel(shape) != data.size()) {
    throw Error(ErrorKind::InvalidInput,
                "tensor data length " + std::to_string(data.size()) +
                    " does not match shape " + shape_str(shape));
  }
  if (requires_grad) grad.assign(data.size(), 0.0);
}

Tensor Tensor::zeros(Shape s, bool rg) {
  const std::size_t n = numel(s);
  return Tensor(std::move(s), std::vector<double>(n, 0.0), rg);
}

Tensor Tensor::scalar(double v, bool rg) { return Tensor({1}, {v}, rg); }

Tensor Tensor::matrix(std::size_t rows, std::size_t cols,
                      std::vector<double> d, bool rg) {
  return Tensor({rows, cols}, std::move(d), rg);
}

double Tensor::item() const {
  if (data.size() != 1) {
    throw Error(ErrorKind::InvalidInput,
                "item() on tensor of shape " + shape_str(shape));
  }
  return data[0];
}

void Tensor::zero_grad() {
  if (requires_grad) grad.assign(data.size(), 0.0);
}

const Tensor& Var::value() const { return tape_->value(id_); }

Var Tape::param(Tensor& p) {
  Node n;
  n.op = "param";
  n.value = p;
  n.value.grad.clear();
  n.param = &p;
  n.needs_grad = p.requires_grad;
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Var Tape::constant(Tensor value) {
  Node n;
  n.op = "constant";
  n.value = std::move(value);
  n.value.requires_grad = false;
  n.value.grad.clear();
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Var Tape::record(std::string op, Tensor value, std::vector<Var> inputs,
                 Backward backward) {
  for (std::size_t i = 0; i < value.data.size(); ++i) {
    if (!std::isfinite(value.data[i])) {
      throw Error(ErrorKind::Numeric,
                  "node #" + std::to_string(nodes_.size()) + " (" + op +
                      ") produced a non-finite value at element " +
                      std::to_string(i));
    }
  }
  Node n;
  n.op = std::move(op);
  n.value = std::move(value);
  for (const auto& in : inputs) {
    if (in.tape() != this) {
      throw Error(ErrorKind::InvalidInput, "operand recorded on another tape");
    }
    n.needs_grad = n.needs_grad || nodes_[in.id()].needs_grad;
  }
  if (n.needs_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

std::vector<double>& Tape::grad_of(const Var& v) {
  auto& node = nodes_[v.id()];
  if (node.grad.empty()) node.grad.assign(node.value.data.size(), 0.0);
  return node.grad;
}

void Tape::backward(Var root) {
  if (root.tape() != this) {
    throw Error(ErrorKind::InvalidInput, "root recorded on another tape");
  }
  if (nodes_[root.id()].value.data.size() != 1) {
    throw Error(ErrorKind::InvalidInput, "backward needs a scalar root");
  }
  for (auto& n : nodes_) n.grad.clear();
  grad_of(root)[0] = 1.0;
  for (std::size_t i = root.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.needs_grad || n.grad.empty()) continue;
    if (n.param) {
      auto& g = n.param->grad;
      if (g.size() != n.grad.size()) g.assign(n.grad.size(), 0.0);
      for (std::size_t j = 0; j < g.size(); ++j) g[j] += n.grad[j];
    } else if (n.backward) {
      // Copy: the closure may grow other nodes' buffers but never this one.
      const std::vector<double> gout = n.grad;
      n.backward(gout);
    }
  }
}

namespace {

Tape& tape_of(const Var& a, const Var& b) {
  if (!a.valid() || a.tape() != b.tape()) {
    throw Error(ErrorKind::InvalidInput, "operands belong to different tapes");
  }
  return *a.tape();
}

void require_same_shape(const char* op, const Var& a, const Var& b) {
  if (a.shape() != b.shape()) {
    throw Error(ErrorKind::InvalidInput,
                std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                    " vs " + shape_str(b.shape()));
  }
}

void require_rank2(const char* op, const Var& a) {
  if (a.shape().size() != 2) {
    throw Error(ErrorKind::InvalidInput,
                std::string(op) + ": expected a matrix, got " +
                    shape_str(a.shape()));
  }
}

void accumulate(Tape& t, const Var& v, const std::vector<double>& g,
                double factor = 1.0) {
  if (!t.needs_grad(v)) return;
  auto& dst = t.grad_of(v);
  for (std::size_t i = 0; i < g.size(); ++i) dst[i] += factor * g[i];
}

}  // namespace

Var add(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same_shape("add", a, b);
  Tensor out = a.value();
  out.requires_grad = false;
  const auto& bd = b.value().data;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += bd[i];
  return t.record("add", std::move(out), {a, b},
                  [&t, a, b](const std::vector<double>& g) {
                    accumulate(t, a, g);
                    accumulate(t, b, g);
                  });
}

Var sub(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same_shape("sub", a, b);
  Tensor out = a.value();
  const auto& bd = b.value().data;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] -= bd[i];
  return t.record("sub", std::move(out), {a, b},
                  [&t, a, b](const std::vector<double>& g) {
                    accumulate(t, a, g);
                    accumulate(t, b, g, -1.0);
                  });
}

Var scale(Var a, double c) {
  Tape& t = *a.tape();
  Tensor out = a.value();
  for (auto& x : out.data) x *= c;
  return t.record("scale", std::move(out), {a},
                  [&t, a, c](const std::vector<double>& g) {
                    accumulate(t, a, g, c);
                  });
}

Var scale(Var a, Var s) {
  Tape& t = tape_of(a, s);
  if (s.value().size() != 1) {
    throw Error(ErrorKind::InvalidInput,
                "scale: factor must hold one element, got " +
                    shape_str(s.shape()));
  }
  const double c = s.value().data[0];
  Tensor out = a.value();
  for (auto& x : out.data) x *= c;
  return t.record("scale_var", std::move(out), {a, s},
                  [&t, a, s, c](const std::vector<double>& g) {
                    accumulate(t, a, g, c);
                    if (t.needs_grad(s)) {
                      const auto& ad = t.value(a.id()).data;
                      double acc = 0.0;
                      for (std::size_t i = 0; i < g.size(); ++i) {
                        acc += g[i] * ad[i];
                      }
                      t.grad_of(s)[0] += acc;
                    }
                  });
}

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_rank2("matmul", a);
  require_rank2("matmul", b);
  const std::size_t n = a.shape()[0], k = a.shape()[1], m = b.shape()[1];
  if (b.shape()[0] != k) {
    throw Error(ErrorKind::InvalidInput,
                "matmul: inner dimensions differ " + shape_str(a.shape()) +
                    " x " + shape_str(b.shape()));
  }
  Tensor out = Tensor::zeros({n, m});
  const auto& ad = a.value().data;
  const auto& bd = b.value().data;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ad[i * k + p];
      if (av == 0.0) continue;
      const double* brow = &bd[p * m];
      double* orow = &out.data[i * m];
      for (std::size_t j = 0; j < m; ++j) orow[j] += av * brow[j];
    }
  }
  return t.record(
      "matmul", std::move(out), {a, b},
      [&t, a, b, n, k, m](const std::vector<double>& g) {
        const auto& ad = t.value(a.id()).data;
        const auto& bd = t.value(b.id()).data;
        if (t.needs_grad(a)) {
          auto& ga = t.grad_of(a);
          // dA = G · Bᵀ
          for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t p = 0; p < k; ++p) {
              double acc = 0.0;
              for (std::size_t j = 0; j < m; ++j) {
                acc += g[i * m + j] * bd[p * m + j];
              }
              ga[i * k + p] += acc;
            }
          }
        }
        if (t.needs_grad(b)) {
          auto& gb = t.grad_of(b);
          // dB = Aᵀ · G
          for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t p = 0; p < k; ++p) {
              const double av = ad[i * k + p];
              if (av == 0.0) continue;
              for (std::size_t j = 0; j < m; ++j) {
                gb[p * m + j] += av * g[i * m + j];
              }
            }
          }
        }
      });
}

Var mul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same_shape("mul", a, b);
  Tensor out = a.value();
  const auto& bd = b.value().data;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= bd[i];
  return t.record("mul", std::move(out), {a, b},
                  [&t, a, b](const std::vector<double>& g) {
                    const auto& ad = t.value(a.id()).data;
                    const auto& bd = t.value(b.id()).data;
                    if (t.needs_grad(a)) {
                      auto& ga = t.grad_of(a);
                      for (std::size_t i = 0; i < g.size(); ++i) {
                        ga[i] += g[i] * bd[i];
                      }
                    }
                    if (t.needs_grad(b)) {
                      auto& gb = t.grad_of(b);
                      for (std::size_t i = 0; i < g.size(); ++i) {
                        gb[i] += g[i] * ad[i];
                      }
                    }
                  });
}

Var sum(Var a) {
  Tape& t = *a.tape();
  double s = 0.0;
  for (double x : a.value().data) s += x;
  return t.record("sum", Tensor::scalar(s), {a},
                  [&t, a](const std::vector<double>& g) {
                    if (!t.needs_grad(a)) return;
                    for (auto& x : t.grad_of(a)) x += g[0];
                  });
}

Var mean(Var a) {
  Tape& t = *a.tape();
  const std::size_t n = a.value().size();
  if (n == 0) throw Error(ErrorKind::InvalidInput, "mean of empty tensor");
  double s = 0.0;
  for (double x : a.value().data) s += x;
  const double inv = 1.0 / static_cast<double>(n);
  return t.record("mean", Tensor::scalar(s * inv), {a},
                  [&t, a, inv](const std::vector<double>& g) {
                    if (!t.needs_grad(a)) return;
                    for (auto& x : t.grad_of(a)) x += g[0] * inv;
                  });
}

Var l1_norm(Var a) {
  Tape& t = *a.tape();
  double s = 0.0;
  for (double x : a.value().data) s += std::abs(x);
  return t.record("l1_norm", Tensor::scalar(s), {a},
                  [&t, a](const std::vector<double>& g) {
                    if (!t.needs_grad(a)) return;
                    const auto& ad = t.value(a.id()).data;
                    auto& ga = t.grad_of(a);
                    for (std::size_t i = 0; i < ad.size(); ++i) {
                      const double sgn = (ad[i] > 0.0) - (ad[i] < 0.0);
                      ga[i] += g[0] * sgn;
                    }
                  });
}

Var l2_norm(Var a) {
  Tape& t = *a.tape();
  double s = 0.0;
  for (double x : a.value().data) s += x * x;
  const double norm = std::sqrt(s);
  return t.record("l2_norm", Tensor::scalar(norm), {a},
                  [&t, a, norm](const std::vector<double>& g) {
                    if (!t.needs_grad(a) || norm == 0.0) return;
                    const auto& ad = t.value(a.id()).data;
                    auto& ga = t.grad_of(a);
                    for (std::size_t i = 0; i < ad.size(); ++i) {
                      ga[i] += g[0] * ad[i] / norm;
                    }
                  });
}

Var cosine_similarity(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_rank2("cosine_similarity", a);
  require_rank2("cosine_similarity", b);
  const std::size_t n = a.shape()[0], m = a.shape()[1], k = b.shape()[0];
  if (b.shape()[1] != m) {
    throw Error(ErrorKind::InvalidInput,
                "cosine_similarity: feature widths differ " +
                    shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  const auto& ad = a.value().data;
  const auto& bd = b.value().data;
  auto row_norms = [m](const std::vector<double>& d, std::size_t rows,
                       const char* which) {
    std::vector<double> out(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < m; ++c) s += d[r * m + c] * d[r * m + c];
      out[r] = std::sqrt(s);
      if (out[r] == 0.0) {
        throw Error(ErrorKind::Numeric,
                    std::string("cosine_similarity: zero-norm row ") +
                        std::to_string(r) + " in " + which);
      }
    }
    return out;
  };
  auto na = row_norms(ad, n, "lhs");
  auto nb = row_norms(bd, k, "rhs");
  Tensor out = Tensor::zeros({n, k});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      double dot = 0.0;
      for (std::size_t c = 0; c < m; ++c) dot += ad[i * m + c] * bd[j * m + c];
      out.data[i * k + j] = dot / (na[i] * nb[j]);
    }
  }
  return t.record(
      "cosine_similarity", std::move(out), {a, b},
      [&t, a, b, n, m, k, na = std::move(na),
       nb = std::move(nb)](const std::vector<double>& g) {
        const auto& ad = t.value(a.id()).data;
        const auto& bd = t.value(b.id()).data;
        // cos_ij = a_i·b_j / (|a_i||b_j|)
        // d cos_ij / d a_i = b_j / (|a_i||b_j|) − cos_ij · a_i / |a_i|²
        std::vector<double> cosv(n * k);
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < k; ++j) {
            double dot = 0.0;
            for (std::size_t c = 0; c < m; ++c) {
              dot += ad[i * m + c] * bd[j * m + c];
            }
            cosv[i * k + j] = dot / (na[i] * nb[j]);
          }
        }
        if (t.needs_grad(a)) {
          auto& ga = t.grad_of(a);
          for (std::size_t i = 0; i < n; ++i) {
            double self_coef = 0.0;
            for (std::size_t j = 0; j < k; ++j) {
              const double gij = g[i * k + j];
              if (gij == 0.0) continue;
              const double w = gij / (na[i] * nb[j]);
              for (std::size_t c = 0; c < m; ++c) {
                ga[i * m + c] += w * bd[j * m + c];
              }
              self_coef += gij * cosv[i * k + j];
            }
            const double inv2 = 1.0 / (na[i] * na[i]);
            for (std::size_t c = 0; c < m; ++c) {
              ga[i * m + c] -= self_coef * inv2 * ad[i * m + c];
            }
          }
        }
        if (t.needs_grad(b)) {
          auto& gb = t.grad_of(b);
          for (std::size_t j = 0; j < k; ++j) {
            double self_coef = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
              const double gij = g[i * k + j];
              if (gij == 0.0) continue;
              const double w = gij / (na[i] * nb[j]);
              for (std::size_t c = 0; c < m; ++c) {
                gb[j * m + c] += w * ad[i * m + c];
              }
              self_coef += gij * cosv[i * k + j];
            }
            const double inv2 = 1.0 / (nb[j] * nb[j]);
            for (std::size_t c = 0; c < m; ++c) {
              gb[j * m + c] -= self_coef * inv2 * bd[j * m + c];
            }
          }
        }
      });
}

Var softmax(Var a, std::size_t axis) {
  Tape& t = *a.tape();
  const Shape& sh = a.shape();
  if (sh.empty() || sh.size() > 2 || axis >= sh.size()) {
    throw Error(ErrorKind::InvalidInput,
                "softmax: invalid axis " + std::to_string(axis) +
                    " for shape " + shape_str(sh));
  }
  // View as (outer × len × inner) with the softmax running over len.
  const std::size_t rows = sh[0];
  const std::size_t cols = sh.size() == 2 ? sh[1] : 1;
  const std::size_t len = axis == 0 ? rows : cols;
  const std::size_t groups = axis == 0 ? cols : rows;
  const std::size_t stride = axis == 0 ? cols : 1;
  auto base = [axis, cols](std::size_t gidx) {
    return axis == 0 ? gidx : gidx * cols;
  };

  Tensor out = a.value();
  out.requires_grad = false;
  for (std::size_t gi = 0; gi < groups; ++gi) {
    const std::size_t b0 = base(gi);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < len; ++i) mx = std::max(mx, out.data[b0 + i * stride]);
    double z = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      double& v = out.data[b0 + i * stride];
      v = std::exp(v - mx);
      z += v;
    }
    for (std::size_t i = 0; i < len; ++i) out.data[b0 + i * stride] /= z;
  }
  // The output lands at the next node slot; its value is the saved y.
  const std::size_t out_id = t.size();
  return t.record(
      "softmax", std::move(out), {a},
      [&t, a, out_id, groups, len, stride, base](const std::vector<double>& g) {
        if (!t.needs_grad(a)) return;
        const auto& y = t.value(out_id).data;
        auto& ga = t.grad_of(a);
        for (std::size_t gi = 0; gi < groups; ++gi) {
          const std::size_t b0 = base(gi);
          double dot = 0.0;
          for (std::size_t i = 0; i < len; ++i) {
            const std::size_t idx = b0 + i * stride;
            dot += g[idx] * y[idx];
          }
          for (std::size_t i = 0; i < len; ++i) {
            const std::size_t idx = b0 + i * stride;
            ga[idx] += y[idx] * (g[idx] - dot);
          }
        }
      });
}

Var log(Var a) {
  Tape& t = *a.tape();
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    if (!(out.data[i] > 0.0)) {
      throw Error(ErrorKind::Numeric,
                  "log of non-positive value at element " + std::to_string(i));
    }
    out.data[i] = std::log(out.data[i]);
  }
  return t.record("log", std::move(out), {a},
                  [&t, a](const std::vector<double>& g) {
                    if (!t.needs_grad(a)) return;
                    const auto& ad = t.value(a.id()).data;
                    auto& ga = t.grad_of(a);
                    for (std::size_t i = 0; i < ad.size(); ++i) {
                      ga[i] += g[i] / ad[i];
                    }
                  });
}

Var exp(Var a) {
  Tape& t = *a.tape();
  Tensor out = a.value();
  for (auto& x : out.data) x = std::exp(x);
  const std::size_t out_id = t.size();
  return t.record("exp", std::move(out), {a},
                   [&t, a, out_id](const std::vector<double>& g) {
                     if (!t.needs_grad(a)) return;
                     const auto& y = t.value(out_id).data;
                     auto& ga = t.grad_of(a);
                     for (std::size_t i = 0; i < y.size(); ++i) {
                       ga[i] += g[i] * y[i];
                     }
                   });
}

Var gather_rows(Var a, std::span<const std::size_t> rows) {
  Tape& t = *a.tape();
  require_rank2("gather_rows", a);
  const std::size_t n = a.shape()[0], m = a.shape()[1];
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  Tensor out = Tensor::zeros({idx.size(), m});
  const auto& ad = a.value().data;
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= n) {
      throw Error(ErrorKind::InvalidInput,
                  "gather_rows: row " + std::to_string(idx[r]) +
                      " out of range for " + shape_str(a.shape()));
    }
    std::copy_n(&ad[idx[r] * m], m, &out.data[r * m]);
  }
  return t.record("gather_rows", std::move(out), {a},
                  [&t, a, m, idx = std::move(idx)](const std::vector<double>& g) {
                    if (!t.needs_grad(a)) return;
                    auto& ga = t.grad_of(a);
                    for (std::size_t r = 0; r < idx.size(); ++r) {
                      for (std::size_t c = 0; c < m; ++c) {
                        ga[idx[r] * m + c] += g[r * m + c];
                      }
                    }
                  });
}

Var weighted_sum(std::span<const Var> xs, std::span<const double> weights) {
  if (xs.empty() || xs.size() != weights.size()) {
    throw Error(ErrorKind::InvalidInput,
                "weighted_sum: need equally many (nonzero) terms and weights");
  }
  Tape& t = *xs[0].tape();
  Tensor out = Tensor::zeros(xs[0].shape());
  for (std::size_t k = 0; k < xs.size(); ++k) {
    if (xs[k].tape() != &t) {
      throw Error(ErrorKind::InvalidInput, "weighted_sum: mixed tapes");
    }
    if (xs[k].shape() != out.shape) {
      throw Error(ErrorKind::InvalidInput,
                  "weighted_sum: shape mismatch " + shape_str(xs[k].shape()) +
                      " vs " + shape_str(out.shape));
    }
    const auto& d = xs[k].value().data;
    for (std::size_t i = 0; i < d.size(); ++i) out.data[i] += weights[k] * d[i];
  }
  std::vector<Var> inputs(xs.begin(), xs.end());
  std::vector<double> w(weights.begin(), weights.end());
  return t.record("weighted_sum", std::move(out), inputs,
                  [&t, inputs, w](const std::vector<double>& g) {
                    for (std::size_t k = 0; k < inputs.size(); ++k) {
                      accumulate(t, inputs[k], g, w[k]);
                    }
                  });
}

Var stop_gradient(Var a) {
  return a.tape()->constant(a.value());
}

GradCheckResult grad_check_full(const ScalarFn& f,
                                std::span<Tensor* const> params, double eps) {
  if (!(eps > 0.0)) {
    throw Error(ErrorKind::InvalidInput, "grad_check: eps must be positive");
  }
  GradCheckResult res;
  for (Tensor* p : params) {
    p->requires_grad = true;
    p->grad.assign(p->data.size(), 0.0);
  }
  {
    Tape tape;
    std::vector<Var> leaves;
    for (Tensor* p : params) leaves.push_back(tape.param(*p));
    Var out = f(tape, leaves);
    if (!std::isfinite(out.item())) {
      throw Error(ErrorKind::Numeric, "grad_check: function value not finite");
    }
    tape.backward(out);
  }
  auto eval = [&]() {
    Tape tape;
    std::vector<Var> leaves;
    for (Tensor* p : params) leaves.push_back(tape.param(*p));
    const double v = f(tape, leaves).item();
    if (!std::isfinite(v)) {
      throw Error(ErrorKind::Numeric,
                  "grad_check: function value not finite at a probe point");
    }
    return v;
  };
  for (Tensor* p : params) {
    res.analytic.push_back(p->grad);
    std::vector<double> numeric(p->data.size());
    for (std::size_t i = 0; i < p->data.size(); ++i) {
      const double orig = p->data[i];
      p->data[i] = orig + eps;
      const double fp = eval();
      p->data[i] = orig - eps;
      const double fm = eval();
      p->data[i] = orig;
      numeric[i] = (fp - fm) / (2.0 * eps);
      const double a = res.analytic.back()[i];
      const double denom =
          std::max({std::abs(a), std::abs(numeric[i]), kGradCheckFloor});
      res.max_rel_error =
          std::max(res.max_rel_error, std::abs(a - numeric[i]) / denom);
    }
    res.numeric.push_back(std::move(numeric));
  }
  return res;
}

double grad_check(const ScalarFn& f, std::span<Tensor* const> params,
                  double eps) {
  return grad_check_full(f, params, eps).max_rel_error;
}

}  // namespace canoncorr::ad
