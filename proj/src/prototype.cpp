#include "canoncorr/prototype.hpp"

#include "canoncorr/error.hpp"
#include "canoncorr/log.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

namespace canoncorr {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  auto splitmix = [](std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  };
  return splitmix(splitmix(splitmix(seed) ^ a) ^ (b * 0x632be59bd9b4e019ULL));
}

const char* to_string(Sampling s) {
  return s == Sampling::Geodesic ? "geodesic" : "knn";
}

Sampling sampling_from_string(const std::string& s) {
  if (s == "geodesic") return Sampling::Geodesic;
  if (s == "knn") return Sampling::Knn;
  throw Error(ErrorKind::Config,
              "unknown sampling mode '" + s + "' (expected geodesic|knn)");
}

double CanonicalPrototype::tau() const { return std::exp(log_tau.item()); }

std::vector<ad::Tensor*> CanonicalPrototype::parameters() {
  return {&P, &Z, &log_tau};
}

void CanonicalPrototype::renormalize() {
  const std::size_t k = P.rows();
  if (k == 0) return;
  Point3 c = Point3::Zero();
  for (std::size_t i = 0; i < k; ++i) c += Point3(P.at(i, 0), P.at(i, 1), P.at(i, 2));
  c /= static_cast<double>(k);
  double ms = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t d = 0; d < 3; ++d) {
      P.at(i, d) -= c(static_cast<long>(d));
      ms += P.at(i, d) * P.at(i, d);
    }
  }
  const double rms = std::sqrt(ms / static_cast<double>(k));
  if (rms > 0.0) {
    for (auto& x : P.data) x /= rms;
  }
}

namespace {

bool on_object(const TrainingSample& s, const Pixel& px, int& ix, int& iy) {
  ix = static_cast<int>(std::lround(px.x));
  iy = static_cast<int>(std::lround(px.y));
  return s.mask.inside(ix, iy) && s.mask.at(ix, iy) != 0 &&
         s.depth.at(ix, iy) > 0.0;
}

std::vector<Point3> rows_to_points(const ad::Tensor& t) {
  std::vector<Point3> out(t.rows());
  for (std::size_t i = 0; i < t.rows(); ++i) {
    out[i] = Point3(t.at(i, 0), t.at(i, 1), t.at(i, 2));
  }
  return out;
}

ad::Tensor points_to_rows(std::span<const Point3> pts) {
  ad::Tensor t = ad::Tensor::zeros({pts.size(), 3});
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t d = 0; d < 3; ++d) t.at(i, d) = pts[i](static_cast<long>(d));
  }
  return t;
}

}  // namespace

CanonicalPrototype init_prototype(std::span<const TrainingSample> samples,
                                  std::string category,
                                  const PrototypeInit& init) {
  if (init.num_keypoints == 0 || init.descriptor_dim == 0) {
    throw Error(ErrorKind::InvalidInput,
                "prototype needs at least one keypoint and descriptor dimension");
  }
  DenseConfig no_dense;
  no_dense.max_points = 0;
  std::optional<PreparedSample> best;
  for (const auto& s : samples) {
    PreparedSample p = prepare_sample(s, init.num_keypoints, no_dense);
    if (p.kp_ids.size() >= kMinAlignmentKeypoints &&
        (!best || p.kp_ids.size() > best->kp_ids.size())) {
      best = std::move(p);
    }
  }
  if (!best) {
    throw Error(ErrorKind::InsufficientData,
                "no sample of category '" + category + "' has at least " +
                    std::to_string(kMinAlignmentKeypoints) +
                    " usable visible keypoints");
  }

  std::mt19937_64 rng(init.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  CanonicalPrototype proto;
  proto.category = std::move(category);
  proto.P = ad::Tensor::zeros({init.num_keypoints, 3}, true);

  Point3 c = Point3::Zero();
  for (const auto& p : best->kp_posed) c += p;
  c /= static_cast<double>(best->kp_posed.size());
  double ms = 0.0;
  for (const auto& p : best->kp_posed) ms += (p - c).squaredNorm();
  const double rms = std::sqrt(ms / static_cast<double>(best->kp_posed.size()));

  std::vector<char> placed(init.num_keypoints, 0);
  for (std::size_t v = 0; v < best->kp_ids.size(); ++v) {
    const auto id = static_cast<std::size_t>(best->kp_ids[v]);
    const Point3 q = (best->kp_posed[v] - c) / rms;
    for (std::size_t d = 0; d < 3; ++d) proto.P.at(id, d) = q(static_cast<long>(d));
    placed[id] = 1;
  }
  for (std::size_t i = 0; i < init.num_keypoints; ++i) {
    if (placed[i]) continue;
    for (std::size_t d = 0; d < 3; ++d) {
      proto.P.at(i, d) = init.missing_sigma * normal(rng);
    }
  }
  proto.renormalize();

  proto.Z = ad::Tensor::zeros({init.num_keypoints, init.descriptor_dim}, true);
  for (std::size_t i = 0; i < init.num_keypoints; ++i) {
    double n2 = 0.0;
    for (std::size_t d = 0; d < init.descriptor_dim; ++d) {
      const double x = normal(rng);
      proto.Z.at(i, d) = x;
      n2 += x * x;
    }
    const double inv = 1.0 / std::sqrt(n2);
    for (std::size_t d = 0; d < init.descriptor_dim; ++d) proto.Z.at(i, d) *= inv;
  }
  proto.log_tau = ad::Tensor::scalar(std::log(kInitialTau), true);
  return proto;
}

PreparedSample prepare_sample(const TrainingSample& s,
                              std::size_t num_keypoints,
                              const DenseConfig& cfg) {
  PreparedSample out;
  out.image_id = s.image_id;
  if (s.mask.width != s.depth.width || s.mask.height != s.depth.height) {
    throw Error(ErrorKind::InvalidInput,
                "sample '" + s.image_id + "': mask and depth sizes differ");
  }

  std::set<int> seen;
  for (const auto& kp : s.keypoints) {
    if (!kp.visible) continue;
    int ix = 0, iy = 0;
    const bool id_ok =
        kp.id >= 0 && static_cast<std::size_t>(kp.id) < num_keypoints;
    if (!id_ok || !seen.insert(kp.id).second || !s.features.contains(kp.px) ||
        !on_object(s, kp.px, ix, iy)) {
      ++out.dropped_keypoints;
      log_warn("sample '" + s.image_id + "': dropping keypoint " +
               std::to_string(kp.id) +
               " (unknown id, duplicate, outside the image or off the mask)");
      continue;
    }
    out.kp_ids.push_back(kp.id);
    out.kp_pixels.push_back(kp.px);
    out.kp_posed.push_back(backproject(kp.px, s.depth.at(ix, iy), s.intrinsics));
  }
  out.kp_features = s.features.sample_rows(out.kp_pixels);

  if (cfg.max_points == 0) return out;

  std::vector<std::pair<int, int>> pixels;
  for (int stride = 1;; ++stride) {
    pixels.clear();
    for (int y = 0; y < s.mask.height; y += stride) {
      for (int x = 0; x < s.mask.width; x += stride) {
        if (s.mask.at(x, y) && s.depth.at(x, y) > 0.0) pixels.emplace_back(x, y);
      }
    }
    if (pixels.size() <= cfg.max_points) break;
  }
  for (const auto& [x, y] : pixels) {
    const Pixel px{static_cast<double>(x), static_cast<double>(y)};
    out.dense_pixels.push_back(px);
    out.dense_posed.push_back(backproject(px, s.depth.at(x, y), s.intrinsics));
  }
  out.dense_features = s.features.sample_rows(out.dense_pixels);
  if (cfg.sampling == Sampling::Geodesic && !out.dense_posed.empty()) {
    out.posed_graph = NeighborGraph(out.dense_posed, cfg.graph_degree);
  }
  return out;
}

BoundPrototype BoundPrototype::bind(ad::Tape& tape, CanonicalPrototype& proto) {
  return {tape.param(proto.P), tape.param(proto.Z), tape.param(proto.log_tau)};
}

CanonicalMapResult canonical_map(const BoundPrototype& proto, ad::Var phi) {
  if (phi.shape().size() != 2 || phi.shape()[1] != proto.Z.shape()[1]) {
    throw Error(ErrorKind::InvalidInput,
                "canonical_map: feature shape " + ad::shape_str(phi.shape()) +
                    " does not match descriptors " +
                    ad::shape_str(proto.Z.shape()));
  }
  ad::Var sim = ad::cosine_similarity(phi, proto.Z);
  ad::Var inv_tau = ad::exp(ad::scale(proto.log_tau, -1.0));
  ad::Var weights = ad::softmax(ad::scale(sim, inv_tau), 1);
  return {ad::matmul(weights, proto.P), weights};
}

CanonicalMapValues canonical_map_values(const CanonicalPrototype& proto,
                                        const ad::Tensor& phi) {
  // Evaluated on a private tape holding constants only.
  ad::Tape tape;
  BoundPrototype b{tape.constant(proto.P), tape.constant(proto.Z),
                   tape.constant(proto.log_tau)};
  auto res = canonical_map(b, tape.constant(phi));
  CanonicalMapValues out;
  out.coords = rows_to_points(res.coords.value());
  const auto& w = res.weights.value();
  out.weights.resize(w.rows());
  for (std::size_t i = 0; i < w.rows(); ++i) {
    out.weights[i].assign(w.data.begin() + static_cast<long>(i * w.cols()),
                          w.data.begin() + static_cast<long>((i + 1) * w.cols()));
  }
  return out;
}

std::optional<ad::Var> prototype_alignment_loss(const BoundPrototype& proto,
                                                const PreparedSample& sample,
                                                AlignmentCache* cache) {
  if (sample.kp_ids.size() < kMinAlignmentKeypoints) return std::nullopt;
  ad::Tape& tape = *proto.P.tape();
  std::vector<std::size_t> rows(sample.kp_ids.begin(), sample.kp_ids.end());
  ad::Var canon = ad::gather_rows(proto.P, rows);

  std::optional<SimilarityTransform> m;
  if (cache && cache->recorded) {
    m = cache->keypoint_transform;
  } else {
    const auto dst = rows_to_points(canon.value());
    try {
      m = umeyama_align(std::span<const Point3>(sample.kp_posed),
                        std::span<const Point3>(dst), true);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Degenerate) throw;
      log_warn("sample '" + sample.image_id +
               "': degenerate keypoint alignment, skipped");
    }
    if (cache) cache->keypoint_transform = m;
  }
  if (!m) return std::nullopt;

  std::vector<Point3> target(sample.kp_posed.size());
  for (std::size_t i = 0; i < target.size(); ++i) target[i] = m->apply(sample.kp_posed[i]);
  return ad::l1_norm(ad::sub(canon, tape.constant(points_to_rows(target))));
}

std::optional<ad::Var> descriptor_loss(const BoundPrototype& proto,
                                       const PreparedSample& sample,
                                       ProjectionHead& head) {
  const std::size_t v = sample.kp_ids.size();
  if (v == 0) return std::nullopt;
  ad::Tape& tape = *proto.P.tape();
  const std::size_t k = proto.Z.shape()[0];
  ad::Var phi = head.forward(tape, tape.constant(sample.kp_features));
  ad::Var sim = ad::cosine_similarity(phi, proto.Z);
  ad::Var inv_tau = ad::exp(ad::scale(proto.log_tau, -1.0));
  ad::Var logp = ad::log(ad::softmax(ad::scale(sim, inv_tau), 1));
  ad::Tensor onehot = ad::Tensor::zeros({v, k});
  for (std::size_t i = 0; i < v; ++i) {
    onehot.at(i, static_cast<std::size_t>(sample.kp_ids[i])) = 1.0;
  }
  return ad::scale(ad::sum(ad::mul(tape.constant(std::move(onehot)), logp)),
                   -1.0 / static_cast<double>(v));
}

std::optional<ad::Var> dense_geom_loss_points(ad::Var canonical,
                                              std::span<const Point3> posed,
                                              const NeighborGraph* posed_graph,
                                              const DenseConfig& cfg,
                                              std::uint64_t seed,
                                              AlignmentCache* cache) {
  ad::Tape& tape = *canonical.tape();
  const std::size_t n = canonical.shape().at(0);
  if (n != posed.size()) {
    throw Error(ErrorKind::InvalidInput,
                "dense_geom_loss: canonical and posed point counts differ");
  }
  if (cfg.k_neighbors < 3 || n < cfg.k_neighbors + 1) return std::nullopt;

  AlignmentCache local;
  AlignmentCache& rec = cache ? *cache : local;
  if (!rec.recorded) {
    rec.neighborhoods.clear();
    const auto canon_pts = rows_to_points(canonical.value());
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::optional<NeighborGraph> own_graph;
    if (cfg.sampling == Sampling::Geodesic &&
        (!posed_graph || posed_graph->size() != n)) {
      own_graph.emplace(posed, cfg.graph_degree);
      posed_graph = &*own_graph;
    }
    auto gather = [](std::span<const Point3> pts,
                     const std::vector<std::size_t>& idx) {
      std::vector<Point3> out(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) out[i] = pts[idx[i]];
      return out;
    };
    auto try_align = [](const std::vector<Point3>& src,
                        const std::vector<Point3>& dst)
        -> std::optional<SimilarityTransform> {
      try {
        return umeyama_align(std::span<const Point3>(src),
                             std::span<const Point3>(dst), true);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::Degenerate &&
            e.kind() != ErrorKind::Underdetermined) {
          throw;
        }
        return std::nullopt;
      }
    };
    // Canonical-space seeds: C_q ≈ M_c2b·B_q.
    for (std::size_t q = 0; q < cfg.n_seeds; ++q) {
      auto idx = knn_neighbors(std::span<const Point3>(canon_pts), pick(rng),
                               cfg.k_neighbors);
      auto m = try_align(gather(posed, idx), gather(canon_pts, idx));
      if (m) rec.neighborhoods.push_back({true, std::move(idx), *m});
    }
    // Posed-space seeds: B_r ≈ M_b2c·C_r.
    for (std::size_t r = 0; r < cfg.n_seeds; ++r) {
      const std::size_t s = pick(rng);
      auto idx = cfg.sampling == Sampling::Geodesic
                     ? geodesic_neighbors(*posed_graph, s, cfg.k_neighbors)
                     : knn_neighbors(posed, s, cfg.k_neighbors);
      auto m = try_align(gather(canon_pts, idx), gather(posed, idx));
      if (m) rec.neighborhoods.push_back({false, std::move(idx), *m});
    }
    rec.recorded = true;
  }

  std::vector<ad::Var> to_canonical, to_posed;
  for (const auto& nb : rec.neighborhoods) {
    ad::Var c = ad::gather_rows(canonical, nb.indices);
    std::vector<Point3> b(nb.indices.size());
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = posed[nb.indices[i]];
    if (nb.canonical_seeded) {
      for (auto& p : b) p = nb.transform.apply(p);
      to_canonical.push_back(
          ad::l1_norm(ad::sub(c, tape.constant(points_to_rows(b)))));
    } else {
      // M·C = C·(sR)ᵀ + 1·(sT)ᵀ
      const Mat3 a = nb.transform.linear();
      ad::Tensor at = ad::Tensor::zeros({3, 3});
      for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
          at.at(i, j) = a(static_cast<long>(j), static_cast<long>(i));
        }
      }
      const Point3 t = nb.transform.offset();
      ad::Tensor offs = ad::Tensor::zeros({b.size(), 3});
      for (std::size_t i = 0; i < b.size(); ++i) {
        for (std::size_t d = 0; d < 3; ++d) offs.at(i, d) = t(static_cast<long>(d));
      }
      ad::Var mapped = ad::add(ad::matmul(c, tape.constant(std::move(at))),
                               tape.constant(std::move(offs)));
      to_posed.push_back(
          ad::l1_norm(ad::sub(tape.constant(points_to_rows(b)), mapped)));
    }
  }
  std::vector<ad::Var> terms;
  std::vector<double> weights;
  for (const auto& v : to_canonical) {
    terms.push_back(v);
    weights.push_back(1.0 / static_cast<double>(to_canonical.size()));
  }
  for (const auto& v : to_posed) {
    terms.push_back(v);
    weights.push_back(1.0 / static_cast<double>(to_posed.size()));
  }
  if (terms.empty()) return std::nullopt;
  return ad::weighted_sum(terms, weights);
}

std::optional<ad::Var> dense_geom_loss(const BoundPrototype& proto,
                                       const PreparedSample& sample,
                                       ProjectionHead& head,
                                       const DenseConfig& cfg,
                                       std::uint64_t seed,
                                       AlignmentCache* cache) {
  if (sample.dense_pixels.size() < cfg.k_neighbors + 1) return std::nullopt;
  ad::Tape& tape = *proto.P.tape();
  ad::Var phi = head.forward(tape, tape.constant(sample.dense_features));
  auto cm = canonical_map(proto, phi);
  const NeighborGraph* graph =
      sample.posed_graph.size() == sample.dense_posed.size() ? &sample.posed_graph
                                                             : nullptr;
  return dense_geom_loss_points(cm.coords, sample.dense_posed, graph, cfg, seed,
                                cache);
}

double combine_losses(double l_P, double l_Z, double l_geom,
                      std::optional<double> l_external, double lambda_z) {
  return l_P + lambda_z * l_Z + l_geom + l_external.value_or(0.0);
}

LossBreakdown total_loss(ad::Tape& tape, const BoundPrototype& proto,
                         const PreparedSample& sample, ProjectionHead& head,
                         const LossConfig& cfg, std::uint64_t seed,
                         AlignmentCache* cache) {
  LossBreakdown out;
  std::vector<ad::Var> terms;
  std::vector<double> weights;
  if (cfg.use_alignment) {
    if (auto l = prototype_alignment_loss(proto, sample, cache)) {
      out.l_P = l->item();
      terms.push_back(*l);
      weights.push_back(1.0);
    } else {
      out.alignment_skipped = true;
    }
  }
  if (cfg.use_descriptor) {
    if (auto l = descriptor_loss(proto, sample, head)) {
      out.l_Z = l->item();
      terms.push_back(*l);
      weights.push_back(cfg.lambda_z);
    }
  }
  if (cfg.use_geom) {
    if (auto l = dense_geom_loss(proto, sample, head, cfg.dense, seed, cache)) {
      out.l_geom = l->item();
      terms.push_back(*l);
      weights.push_back(1.0);
    } else {
      out.dense_skipped = true;
    }
  }
  if (cfg.external) {
    if (auto l = cfg.external(tape, proto, sample, head)) {
      out.l_external = l->item();
      terms.push_back(*l);
      weights.push_back(1.0);
    }
  }
  if (cache) cache->recorded = true;
  out.total = combine_losses(out.l_P, out.l_Z, out.l_geom, out.l_external,
                             cfg.lambda_z);
  if (!terms.empty()) out.root = ad::weighted_sum(terms, weights);
  return out;
}

namespace {

ProjectionHead make_head(std::span<const TrainingSample> samples,
                         const TrainConfig& cfg) {
  const std::size_t in = samples.empty() ? 0 : samples.front().features.dim;
  return ProjectionHead::create(in, cfg.descriptor_dim, cfg.head_hidden,
                                mix_seed(cfg.seed, 2));
}

LossConfig loss_config(const TrainConfig& cfg) {
  LossConfig lc;
  lc.lambda_z = cfg.lambda_z;
  lc.use_geom = cfg.use_geom;
  lc.dense = cfg.dense;
  lc.external = cfg.external;
  return lc;
}

}  // namespace

ModelState init_model(std::span<const TrainingSample> samples,
                      std::size_t num_keypoints, const std::string& category,
                      const TrainConfig& cfg) {
  PrototypeInit init;
  init.num_keypoints = num_keypoints;
  init.descriptor_dim = cfg.descriptor_dim;
  init.seed = mix_seed(cfg.seed, 1);
  return {init_prototype(samples, category, init), make_head(samples, cfg)};
}

TrainResult train(std::span<const TrainingSample> samples,
                  std::size_t num_keypoints, const std::string& category,
                  const TrainConfig& cfg, const ValidationFn& validate) {
  if (samples.empty()) {
    throw Error(ErrorKind::InsufficientData, "no training samples");
  }
  if (cfg.epochs < 0 || cfg.batch_size == 0 || cfg.eval_every <= 0) {
    throw Error(ErrorKind::Config, "invalid training schedule");
  }
  ModelState model = init_model(samples, num_keypoints, category, cfg);
  TrainResult res{model.prototype, model.head, {}, std::nullopt, 0, 0, 0};
  if (cfg.epochs == 0) return res;

  DenseConfig dense = cfg.dense;
  if (!cfg.use_geom) dense.max_points = 0;
  std::vector<PreparedSample> prepared;
  prepared.reserve(samples.size());
  for (const auto& s : samples) prepared.push_back(prepare_sample(s, num_keypoints, dense));

  const LossConfig lc = loss_config(cfg);
  const std::size_t n = prepared.size();
  const std::size_t steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  const auto total_steps =
      static_cast<std::int64_t>(steps_per_epoch) * cfg.epochs;
  OneCycleParams sched = cfg.schedule;
  sched.max_lr = cfg.lr;

  CanonicalPrototype& proto = res.prototype;
  ProjectionHead& head = res.head;
  std::vector<ad::Tensor*> params = proto.parameters();
  for (auto* p : head.parameters()) params.push_back(p);
  OptimizerState opt;

  std::optional<ModelState> best;
  std::vector<std::size_t> order(n);
  std::int64_t step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 shuffle_rng(mix_seed(cfg.seed, 3, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    std::size_t contributing = 0;

    for (std::size_t b0 = 0; b0 < n; b0 += cfg.batch_size, ++step) {
      const std::size_t b1 = std::min(n, b0 + cfg.batch_size);
      for (auto* p : params) p->zero_grad();
      StepLog entry;
      entry.step = step;
      const double inv_b = 1.0 / static_cast<double>(b1 - b0);
      bool any = false;
      for (std::size_t b = b0; b < b1; ++b) {
        const std::size_t idx = order[b];
        ad::Tape tape;
        auto bound = BoundPrototype::bind(tape, proto);
        auto lb = total_loss(tape, bound, prepared[idx], head, lc,
                             mix_seed(cfg.seed, 4, static_cast<std::uint64_t>(step) * n + idx));
        res.skipped_alignment += lb.alignment_skipped;
        res.skipped_dense += (cfg.use_geom && lb.dense_skipped);
        entry.l_P += inv_b * lb.l_P;
        entry.l_Z += inv_b * lb.l_Z;
        entry.l_geom += inv_b * lb.l_geom;
        entry.total += inv_b * lb.total;
        if (lb.root.valid()) {
          any = true;
          tape.backward(ad::scale(lb.root, inv_b));
        }
      }
      entry.lr = one_cycle_lr(step, total_steps, sched);
      if (any) {
        ++contributing;
        AdamWParams hp;
        hp.lr = entry.lr;
        hp.weight_decay = cfg.weight_decay;
        adamw_step(params, opt, hp);
        proto.renormalize();
      }
      res.log.push_back(entry);

      const bool last = step + 1 == total_steps;
      if (validate && ((step + 1) % cfg.eval_every == 0 || last)) {
        const double score = validate(proto, head);
        log_info("step " + std::to_string(step + 1) + ": validation " +
                 std::to_string(score));
        if (!res.best_validation || score > *res.best_validation) {
          res.best_validation = score;
          res.best_step = step + 1;
          best = ModelState{proto, head};
        }
      }
    }
    if (contributing == 0) {
      throw Error(ErrorKind::TrainingFailed,
                  "every sample was skipped in epoch " + std::to_string(epoch));
    }
  }
  if (best) {
    res.prototype = std::move(best->prototype);
    res.head = std::move(best->head);
  }
  return res;
}

double mean_total_loss(std::span<const PreparedSample> samples,
                       CanonicalPrototype& proto, ProjectionHead& head,
                       const LossConfig& cfg, std::uint64_t seed) {
  double acc = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    ad::Tape tape;
    auto bound = BoundPrototype::bind(tape, proto);
    acc += total_loss(tape, bound, samples[i], head, cfg, mix_seed(seed, 5, i)).total;
  }
  return samples.empty() ? 0.0 : acc / static_cast<double>(samples.size());
}

}  // namespace canoncorr
