#include "canoncorr/cli.hpp"

#include "canoncorr/dataio.hpp"
#include "canoncorr/error.hpp"
#include "canoncorr/log.hpp"
#include "canoncorr/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <set>
#include <sstream>

namespace canoncorr {

namespace fs = std::filesystem;
using nlohmann::json;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config:
      return 2;
    case ErrorKind::TrainingFailed:
      return 4;
    default:
      return 3;
  }
}

std::string content_hash(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

RunConfig default_run_config() {
  RunConfig cfg;
  const char* env = std::getenv("CANONCORR_OUT_DIR");
  cfg.out_dir = env && *env ? env : "out";
  return cfg;
}

// ---------------------------------------------------------------------------
// Settings

namespace {

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const std::string& expected) {
  throw Error(ErrorKind::Config,
              "invalid value '" + value + "' for " + key + " (expected " + expected + ")");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size() && std::isfinite(d)) return d;
  } catch (const std::exception&) {
  }
  bad_value(key, v, "a number");
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) {
    bad_value(key, v, "a non-negative integer");
  }
  try {
    return std::stoull(v);
  } catch (const std::exception&) {
    bad_value(key, v, "a non-negative integer");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value(key, v, "true|false");
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
  return out;
}

struct Setting {
  std::string key;
  std::string help;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <class Field>
Setting size_setting(std::string key, std::string help, Field field) {
  return {key, std::move(help),
          [key, field](RunConfig& c, const std::string& v) {
            field(c) = static_cast<std::remove_reference_t<decltype(field(c))>>(to_uint(key, v));
          },
          [field](const RunConfig& c) {
            return std::to_string(field(const_cast<RunConfig&>(c)));
          }};
}

template <class Field>
Setting double_setting(std::string key, std::string help, Field field) {
  return {key, std::move(help),
          [key, field](RunConfig& c, const std::string& v) { field(c) = to_double(key, v); },
          [field](const RunConfig& c) { return fmt_double(field(const_cast<RunConfig&>(c))); }};
}

template <class Field>
Setting bool_setting(std::string key, std::string help, Field field) {
  return {key, std::move(help),
          [key, field](RunConfig& c, const std::string& v) { field(c) = to_bool(key, v); },
          [field](const RunConfig& c) {
            return std::string(field(const_cast<RunConfig&>(c)) ? "true" : "false");
          }};
}

template <class Field>
Setting path_setting(std::string key, std::string help, Field field,
                     bool allow_empty = false) {
  return {key, std::move(help),
          [key, field, allow_empty](RunConfig& c, const std::string& v) {
            if (v.empty() && !allow_empty) bad_value(key, v, "a path");
            field(c) = v;
          },
          [field](const RunConfig& c) { return field(const_cast<RunConfig&>(c)).string(); }};
}

const std::vector<Setting>& settings() {
  static const std::vector<Setting> all = {
      path_setting("data", "dataset root (synth output, train/eval/viz input)",
                   [](RunConfig& c) -> fs::path& { return c.data_dir; }),
      path_setting("out", "output directory", [](RunConfig& c) -> fs::path& { return c.out_dir; }),
      path_setting("checkpoints", "checkpoint directory for eval/viz (default: out)",
                   [](RunConfig& c) -> fs::path& { return c.checkpoint_dir; }, true),
      {"categories", "comma-separated category filter (empty = all)",
       [](RunConfig& c, const std::string& v) { c.categories = split_list(v); },
       [](const RunConfig& c) { return join(c.categories); }},
      size_setting("seed", "global seed", [](RunConfig& c) -> std::uint64_t& { return c.seed; }),
      size_setting("n_train", "synth: training instances per category",
                   [](RunConfig& c) -> std::size_t& { return c.n_train; }),
      size_setting("n_val", "synth: validation pairs per category",
                   [](RunConfig& c) -> std::size_t& { return c.n_val; }),
      size_setting("n_test_pairs", "synth: test pairs per category and variant",
                   [](RunConfig& c) -> std::size_t& { return c.n_test_pairs; }),
      {"epochs", "train: passes over the training set",
       [](RunConfig& c, const std::string& v) {
         c.train.epochs = static_cast<int>(to_uint("epochs", v));
       },
       [](const RunConfig& c) { return std::to_string(c.train.epochs); }},
      double_setting("lr", "train: peak learning rate", [](RunConfig& c) -> double& { return c.train.lr; }),
      double_setting("weight_decay", "train: AdamW decoupled weight decay",
                     [](RunConfig& c) -> double& { return c.train.weight_decay; }),
      double_setting("lambda_z", "train: descriptor loss weight",
                     [](RunConfig& c) -> double& { return c.train.lambda_z; }),
      bool_setting("use_geom", "train: enable the dense geometric loss",
                   [](RunConfig& c) -> bool& { return c.train.use_geom; }),
      {"sampling", "train: posed neighbourhoods, geodesic|knn",
       [](RunConfig& c, const std::string& v) {
         try {
           c.train.dense.sampling = sampling_from_string(v);
         } catch (const Error&) {
           bad_value("sampling", v, "geodesic|knn");
         }
       },
       [](const RunConfig& c) { return std::string(to_string(c.train.dense.sampling)); }},
      size_setting("max_points", "train: dense pixels per image",
                   [](RunConfig& c) -> std::size_t& { return c.train.dense.max_points; }),
      size_setting("n_seeds", "train: neighbourhood seeds per image and direction",
                   [](RunConfig& c) -> std::size_t& { return c.train.dense.n_seeds; }),
      size_setting("k_neighbors", "train: neighbourhood size",
                   [](RunConfig& c) -> std::size_t& { return c.train.dense.k_neighbors; }),
      size_setting("graph_degree", "train: knn graph degree for geodesic sampling",
                   [](RunConfig& c) -> std::size_t& { return c.train.dense.graph_degree; }),
      size_setting("descriptor_dim", "train: descriptor dimension",
                   [](RunConfig& c) -> std::size_t& { return c.train.descriptor_dim; }),
      size_setting("head_hidden", "train: hidden width of the head (0 = single layer)",
                   [](RunConfig& c) -> std::size_t& { return c.train.head_hidden; }),
      size_setting("batch_size", "train: images per step",
                   [](RunConfig& c) -> std::size_t& { return c.train.batch_size; }),
      {"eval_every", "train: validation interval in steps",
       [](RunConfig& c, const std::string& v) {
         c.train.eval_every = static_cast<std::int64_t>(to_uint("eval_every", v));
       },
       [](const RunConfig& c) { return std::to_string(c.train.eval_every); }},
      {"method", "eval: matching, nn|soft_window",
       [](RunConfig& c, const std::string& v) {
         try {
           c.match.method = match_method_from_string(v);
         } catch (const Error&) {
           bad_value("method", v, "nn|soft_window");
         }
       },
       [](const RunConfig& c) { return std::string(to_string(c.match.method)); }},
      size_setting("window", "eval: soft-argmax window (odd)",
                   [](RunConfig& c) -> std::size_t& { return c.match.window; }),
      double_setting("temperature", "eval: soft-argmax temperature",
                     [](RunConfig& c) -> double& { return c.match.temperature; }),
      {"alphas", "eval: comma-separated PCK thresholds",
       [](RunConfig& c, const std::string& v) {
         c.alphas.clear();
         for (const auto& a : split_list(v)) {
           const double d = to_double("alphas", a);
           if (!(d > 0.0)) bad_value("alphas", a, "positive thresholds");
           c.alphas.push_back(d);
         }
         if (c.alphas.empty()) bad_value("alphas", v, "at least one threshold");
       },
       [](const RunConfig& c) {
         std::vector<std::string> s;
         for (double a : c.alphas) s.push_back(fmt_double(a));
         return join(s);
       }},
      {"aggregation", "eval: per_image, per_point or both",
       [](RunConfig& c, const std::string& v) {
         c.aggregations.clear();
         for (const auto& a : split_list(v)) {
           try {
             c.aggregations.push_back(aggregation_from_string(a));
           } catch (const Error&) {
             bad_value("aggregation", a, "per_image|per_point");
           }
         }
         if (c.aggregations.empty()) bad_value("aggregation", v, "at least one aggregation");
       },
       [](const RunConfig& c) {
         std::vector<std::string> s;
         for (auto a : c.aggregations) s.push_back(to_string(a));
         return join(s);
       }},
      {"splits", "eval: annotation files to evaluate",
       [](RunConfig& c, const std::string& v) {
         c.splits = split_list(v);
         if (c.splits.empty()) bad_value("splits", v, "at least one split");
       },
       [](const RunConfig& c) { return join(c.splits); }},
      bool_setting("oracle", "eval: debug, predict the ground truth",
                   [](RunConfig& c) -> bool& { return c.oracle; }),
      double_setting("max_skipped", "eval: fail when a larger fraction of pairs is skipped",
                     [](RunConfig& c) -> double& { return c.max_skipped; }),
      size_setting("viz_samples", "viz: training images to overlay",
                   [](RunConfig& c) -> std::size_t& { return c.viz_samples; }),
      size_setting("viz_pixels", "viz: object pixels per image",
                   [](RunConfig& c) -> std::size_t& { return c.viz_pixels; }),
  };
  return all;
}

const Setting& find_setting(const std::string& key) {
  for (const auto& s : settings()) {
    if (s.key == key) return s;
  }
  throw Error(ErrorKind::Config, "unknown config key '" + key + "'");
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& s : settings()) k.push_back(s.key);
    return k;
  }();
  return keys;
}

std::string config_help(const std::string& key) { return find_setting(key).help; }

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
  find_setting(key).set(cfg, trim(value));
}

std::vector<std::pair<std::string, std::string>> parse_config_text(
    const std::string& text, const std::string& source) {
  std::vector<std::pair<std::string, std::string>> out;
  std::stringstream ss(text);
  std::string line;
  for (int no = 1; std::getline(ss, line); ++no) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::Config,
                  source + ":" + std::to_string(no) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    if (std::find(config_keys().begin(), config_keys().end(), key) == config_keys().end()) {
      throw Error(ErrorKind::Config,
                  source + ":" + std::to_string(no) + ": unknown config key '" + key + "'");
    }
    out.emplace_back(std::move(key), trim(line.substr(eq + 1)));
  }
  return out;
}

std::map<std::string, std::string> dump_settings(const RunConfig& cfg) {
  std::map<std::string, std::string> out;
  for (const auto& s : settings()) out[s.key] = s.get(cfg);
  return out;
}

// ---------------------------------------------------------------------------
// Shared helpers

namespace {

bool selected(const RunConfig& cfg, const std::string& category) {
  return cfg.categories.empty() ||
         std::find(cfg.categories.begin(), cfg.categories.end(), category) !=
             cfg.categories.end();
}

/// Category directories under data_dir, sorted; validated up front.
std::vector<std::string> dataset_categories(const RunConfig& cfg, const std::string& required) {
  if (!fs::is_directory(cfg.data_dir)) {
    throw Error(ErrorKind::Io, "data directory not found: " + cfg.data_dir.string());
  }
  std::vector<std::string> cats;
  for (const auto& e : fs::directory_iterator(cfg.data_dir)) {
    if (e.is_directory() && fs::exists(e.path() / required)) {
      cats.push_back(e.path().filename().string());
    }
  }
  std::sort(cats.begin(), cats.end());
  for (const auto& want : cfg.categories) {
    if (std::find(cats.begin(), cats.end(), want) == cats.end()) {
      throw Error(ErrorKind::Io, "category '" + want + "' has no " + required + " under " +
                                     cfg.data_dir.string());
    }
  }
  std::erase_if(cats, [&](const std::string& c) { return !selected(cfg, c); });
  if (cats.empty()) {
    throw Error(ErrorKind::Io, "no category with " + required + " under " +
                                   cfg.data_dir.string());
  }
  return cats;
}

fs::path checkpoint_root(const RunConfig& cfg) {
  return cfg.checkpoint_dir.empty() ? cfg.out_dir : cfg.checkpoint_dir;
}

FeatureGrid load_grid(const fs::path& base, const AnnotatedImage& img) {
  if (img.features.empty()) {
    throw Error(ErrorKind::Load, img.imname + ": no feature file");
  }
  return tensor_to_grid(load_tensor(base / img.features), img.width, img.height);
}

TrainingSample load_sample(const fs::path& base, const AnnotatedImage& img) {
  TrainingSample s;
  s.image_id = img.imname;
  s.features = load_grid(base, img);
  if (img.depth.empty() || img.mask.empty()) {
    throw Error(ErrorKind::Load, img.imname + ": training images need depth and mask files");
  }
  s.depth = tensor_to_depth(load_tensor(base / img.depth));
  s.mask = load_mask(base / img.mask);
  if (s.depth.width != img.width || s.depth.height != img.height ||
      s.mask.width != img.width || s.mask.height != img.height) {
    throw Error(ErrorKind::Load, img.imname + ": depth/mask size differs from the image");
  }
  s.intrinsics = img.intrinsics.value_or(
      CameraIntrinsics::from_vertical_fov(kDefaultVerticalFovDegrees, img.width, img.height));
  for (std::size_t k = 0; k < img.kps.size(); ++k) {
    s.keypoints.push_back({static_cast<int>(k), img.kps[k].value_or(Pixel{}),
                           img.kps[k].has_value()});
  }
  return s;
}

std::string loss_csv(const std::vector<StepLog>& log) {
  std::string out = "step,l_P,l_Z,l_geom,total,lr\n";
  char line[256];
  for (const auto& s : log) {
    std::snprintf(line, sizeof line, "%lld,%.9g,%.9g,%.9g,%.9g,%.9g\n",
                  static_cast<long long>(s.step), s.l_P, s.l_Z, s.l_geom, s.total, s.lr);
    out += line;
  }
  return out;
}

double validation_pck(const std::vector<EvalPair>& pairs,
                      const std::map<std::string, FeatureGrid>& grids,
                      const ProjectionHead& head, const MatchConfig& match) {
  const GridLookup lookup = [&](const std::string& id) -> const FeatureGrid* {
    auto it = grids.find(id);
    return it == grids.end() ? nullptr : &it->second;
  };
  const auto preds = predict_pairs(pairs, lookup, head, match);
  return pck_at(pairs, preds, 0.1, Aggregation::PerImage).average;
}

}  // namespace

// ---------------------------------------------------------------------------
// synth

namespace {

struct SynthWriter {
  fs::path root;  // <out>/<cat>
  std::string prefix;  // <cat>/
  std::map<std::string, std::string> hashes;  // path relative to out → hash

  void write(const std::string& rel, const std::string& bytes) {
    write_file(root / rel, bytes);
    hashes[prefix + rel] = content_hash(bytes);
  }

  AnnotatedImage image(const std::string& id, const FeatureGrid& features,
                       const DepthMap& depth, const Mask& mask,
                       const CameraIntrinsics& k, const BBox& box,
                       std::size_t num_keypoints) {
    AnnotatedImage img;
    img.imname = id;
    img.width = mask.width;
    img.height = mask.height;
    img.intrinsics = k;
    img.kps.resize(num_keypoints);
    img.bbox = box;
    img.features = "features/" + id + ".ften";
    img.depth = "depth/" + id + ".ften";
    img.mask = "mask/" + id + ".pgm";
    write(img.features, encode_tensor(grid_to_tensor(features), DType::F32));
    write(img.depth, encode_tensor(depth_to_tensor(depth), DType::F32));
    write(img.mask, encode_mask(mask));
    return img;
  }
};

}  // namespace

void cmd_synth(const RunConfig& cfg) {
  std::vector<std::string> names;
  for (const auto& n : builtin_categories()) {
    if (selected(cfg, n)) names.push_back(n);
  }
  for (const auto& want : cfg.categories) {
    if (std::find(names.begin(), names.end(), want) == names.end()) {
      throw Error(ErrorKind::Config, "unknown synthetic category '" + want + "'");
    }
  }
  json manifest;
  manifest["seed"] = cfg.seed;
  manifest["categories"] = json::object();
  std::map<std::string, std::string> hashes;

  for (const auto& name : names) {
    log_info("synth: " + name);
    const SyntheticCategory cat = make_category(name, cfg.seed);
    BenchmarkConfig bc;
    bc.n_train = cfg.n_train;
    bc.n_val = cfg.n_val;
    bc.n_test_pairs = cfg.n_test_pairs;
    bc.seed = cfg.seed;
    const Benchmark bench = make_benchmark(cat, bc);
    const std::size_t nk = cat.num_keypoints();
    const std::size_t n_seen = cat.seen_keypoints.size();
    std::vector<bool> geo(nk, false);
    for (int id : cat.symmetric_ids) geo[static_cast<std::size_t>(id)] = true;

    SynthWriter w{cfg.out_dir / name, name + "/", {}};
    json instances = json::array();

    AnnotationFile train{name, nk, {}, {}, json::object()};
    for (const auto& s : bench.train) {
      auto img = w.image(s.image_id, s.features, s.depth, s.mask, s.intrinsics,
                         mask_bbox(s.mask), nk);
      for (const auto& kp : s.keypoints) {
        if (kp.visible) img.kps[static_cast<std::size_t>(kp.id)] = kp.px;
      }
      train.images.push_back(std::move(img));
      instances.push_back(s.image_id);
    }
    w.write("train.json", dump_annotations(train));

    // Test images are shared by the seen and unseen files; validation images
    // only carry seen keypoints.
    std::map<std::string, AnnotatedImage> written;
    auto test_image = [&](const std::string& id, bool seen_only) {
      auto it = written.find(id);
      if (it == written.end()) {
        const TestImage& t = bench.images.at(id);
        auto img = w.image(id, t.features, t.depth, t.mask, t.intrinsics, t.bbox, nk);
        for (const auto& kp : t.keypoints) {
          const auto k = static_cast<std::size_t>(kp.id);
          if (!seen_only || k < n_seen) img.kps[k] = kp.px;
        }
        if (!seen_only) img.geo_aware = geo;
        it = written.emplace(id, std::move(img)).first;
        instances.push_back(id);
      }
      return it->second;
    };
    auto annotation = [&](const std::vector<EvalPair>& pairs, bool seen_only) {
      AnnotationFile f{name, nk, {}, {}, json::object()};
      std::set<std::string> have;
      for (const auto& p : pairs) {
        for (const auto* id : {&p.src_image, &p.tgt_image}) {
          if (have.insert(*id).second) f.images.push_back(test_image(*id, seen_only));
        }
        AnnotatedPair ap{p.src_image, p.tgt_image, {}, json::object()};
        for (const auto& kp : p.keypoints) ap.kps_ids.push_back(kp.id);
        f.pairs.push_back(std::move(ap));
      }
      return f;
    };
    w.write("val.json", dump_annotations(annotation(bench.val_pairs, true)));
    w.write("test_seen.json", dump_annotations(annotation(bench.seen_pairs, false)));
    w.write("test_unseen.json", dump_annotations(annotation(bench.unseen_pairs, false)));

    std::vector<int> seen_ids, unseen_ids;
    for (std::size_t k = 0; k < nk; ++k) {
      (k < n_seen ? seen_ids : unseen_ids).push_back(static_cast<int>(k));
    }
    manifest["categories"][name] = {{"n_train", bench.train.size()},
                                     {"n_val_pairs", bench.val_pairs.size()},
                                     {"n_test_pairs", bench.seen_pairs.size()},
                                     {"seen_keypoints", seen_ids},
                                     {"unseen_keypoints", unseen_ids},
                                     {"instances", instances}};
    hashes.insert(w.hashes.begin(), w.hashes.end());
  }
  manifest["files"] = hashes;
  write_file(cfg.out_dir / "manifest.json", manifest.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// train

void cmd_train(const RunConfig& cfg) {
  const auto cats = dataset_categories(cfg, "train.json");
  std::size_t trained = 0;
  for (const auto& cat : cats) {
    const fs::path dir = cfg.data_dir / cat;
    const AnnotationFile ann = load_annotations(dir / "train.json");
    std::vector<TrainingSample> samples;
    int max_id = -1;
    for (const auto& img : ann.images) {
      samples.push_back(load_sample(dir, img));
      for (const auto& kp : samples.back().keypoints) {
        if (kp.visible) max_id = std::max(max_id, kp.id);
      }
    }
    // The prototype covers the keypoint ids seen in training.
    const auto k = static_cast<std::size_t>(max_id + 1);

    std::vector<EvalPair> val_pairs;
    std::map<std::string, FeatureGrid> val_grids;
    if (fs::exists(dir / "val.json")) {
      const AnnotationFile val = load_annotations(dir / "val.json");
      val_pairs = eval_pairs(val);
      std::erase_if(val_pairs, [](const EvalPair& p) { return p.keypoints.empty(); });
      for (const auto& img : val.images) val_grids.emplace(img.imname, load_grid(dir, img));
    }
    ValidationFn validate;
    if (!val_pairs.empty()) {
      validate = [&](const CanonicalPrototype&, const ProjectionHead& head) {
        return validation_pck(val_pairs, val_grids, head, cfg.match);
      };
    }

    TrainResult res;
    try {
      if (max_id < 0) throw Error(ErrorKind::InsufficientData, "no visible keypoints");
      res = train(samples, k, cat, cfg.train, validate);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::InsufficientData) throw;
      log_warn("train: skipping " + cat + ": " + e.what());
      continue;
    }

    Checkpoint ck{res.prototype, res.head, dump_settings(cfg), {}, {}};
    ck.config.erase("out");
    ck.config.erase("data");
    ck.config.erase("checkpoints");
    const std::size_t tail = std::min<std::size_t>(res.log.size(), 100);
    ck.log_tail.assign(res.log.end() - static_cast<std::ptrdiff_t>(tail), res.log.end());
    json meta = {{"num_train", samples.size()},
                 {"steps", res.log.size()},
                 {"skipped_alignment", res.skipped_alignment},
                 {"skipped_dense", res.skipped_dense}};
    if (res.best_validation) {
      meta["best_validation"] = *res.best_validation;
      meta["best_step"] = res.best_step;
    }
    ck.metadata = meta.dump();
    save_checkpoint(cfg.out_dir / cat / "checkpoint.c3dp", ck);
    write_file(cfg.out_dir / cat / "loss.csv", loss_csv(res.log));
    log_info("train: " + cat + " done, " + std::to_string(res.log.size()) + " steps");
    ++trained;
  }
  if (trained == 0) {
    throw Error(ErrorKind::TrainingFailed, "every category was skipped");
  }
}

// ---------------------------------------------------------------------------
// eval

void cmd_eval(const RunConfig& cfg) {
  const auto cats = dataset_categories(cfg, cfg.splits.front() + ".json");
  json summary = json::object();

  for (const auto& split : cfg.splits) {
    std::vector<EvalPair> all_pairs;
    Predictions all_preds;
    AnnotatedPoints all_points;
    std::size_t skipped = 0, total = 0;

    for (const auto& cat : cats) {
      const fs::path dir = cfg.data_dir / cat;
      const AnnotationFile ann = load_annotations(dir / (split + ".json"));
      auto points = annotated_points(ann);
      all_points.insert(points.begin(), points.end());

      std::map<std::string, FeatureGrid> grids;
      for (const auto& img : ann.images) {
        if (img.features.empty() || !fs::exists(dir / img.features)) continue;
        grids.emplace(img.imname, load_grid(dir, img));
      }
      std::vector<EvalPair> pairs;
      for (auto& p : eval_pairs(ann)) {
        ++total;
        if (!grids.count(p.src_image) || !grids.count(p.tgt_image)) {
          ++skipped;
          continue;
        }
        pairs.push_back(std::move(p));
      }

      Predictions preds;
      if (cfg.oracle) {
        for (const auto& p : pairs) {
          auto& row = preds.emplace_back();
          for (const auto& kp : p.keypoints) row.push_back(kp.tgt);
        }
      } else {
        const fs::path ckpt = checkpoint_root(cfg) / cat / "checkpoint.c3dp";
        if (!fs::exists(ckpt)) throw Error(ErrorKind::Io, "missing checkpoint " + ckpt.string());
        const Checkpoint ck = load_checkpoint(ckpt);
        const GridLookup lookup = [&](const std::string& id) -> const FeatureGrid* {
          auto it = grids.find(id);
          return it == grids.end() ? nullptr : &it->second;
        };
        preds = predict_pairs(pairs, lookup, ck.head, cfg.match);
      }
      all_pairs.insert(all_pairs.end(), pairs.begin(), pairs.end());
      all_preds.insert(all_preds.end(), preds.begin(), preds.end());
    }

    if (total > 0 && static_cast<double>(skipped) > cfg.max_skipped * static_cast<double>(total)) {
      throw Error(ErrorKind::Load, split + ": " + std::to_string(skipped) + " of " +
                                       std::to_string(total) +
                                       " pairs skipped for missing features");
    }
    if (skipped > 0) {
      log_warn(split + ": skipped " + std::to_string(skipped) + " pairs with missing features");
    }

    std::vector<PckReport> reports;
    for (double alpha : cfg.alphas) {
      for (auto agg : cfg.aggregations) {
        reports.push_back(pck_at(all_pairs, all_preds, alpha, agg));
        reports.push_back(pck_dagger(all_pairs, all_preds, alpha, agg, all_points));
      }
    }
    const std::string header = "# split " + split + ": " + std::to_string(total - skipped) +
                               " pairs evaluated, " + std::to_string(skipped) + " skipped\n";
    write_file(cfg.out_dir / "eval" / (split + ".txt"),
               header + emit_reports(reports, ReportFormat::Text));
    write_file(cfg.out_dir / "eval" / (split + ".csv"),
               emit_reports(reports, ReportFormat::Csv));
    summary[split] = {{"pairs", total}, {"skipped_pairs", skipped}};
  }
  write_file(cfg.out_dir / "eval" / "summary.json", summary.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// viz

namespace {

// Evenly spaced hues, full saturation.
Rgb hue_color(std::size_t i, std::size_t n) {
  const double h = 6.0 * static_cast<double>(i) / static_cast<double>(std::max<std::size_t>(n, 1));
  const double x = 1.0 - std::abs(std::fmod(h, 2.0) - 1.0);
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(h)) {
    case 0: r = 1; g = x; break;
    case 1: r = x; g = 1; break;
    case 2: g = 1; b = x; break;
    case 3: g = x; b = 1; break;
    case 4: r = x; b = 1; break;
    default: r = 1; b = x; break;
  }
  auto u8 = [](double v) { return static_cast<std::uint8_t>(std::lround(255.0 * v)); };
  return {u8(r), u8(g), u8(b)};
}

}  // namespace

void cmd_viz(const RunConfig& cfg) {
  const auto cats = dataset_categories(cfg, "train.json");
  for (const auto& cat : cats) {
    const fs::path ckpt = checkpoint_root(cfg) / cat / "checkpoint.c3dp";
    if (!fs::exists(ckpt)) throw Error(ErrorKind::Io, "missing checkpoint " + ckpt.string());
    const Checkpoint ck = load_checkpoint(ckpt);
    const auto& proto = ck.prototype;
    const std::size_t k = proto.num_keypoints();
    const fs::path dir = cfg.data_dir / cat;
    const fs::path out = cfg.out_dir / cat / "viz";

    PointCloud cloud;
    std::vector<Rgb> colors;
    for (std::size_t i = 0; i < k; ++i) {
      cloud.points.emplace_back(proto.P.at(i, 0), proto.P.at(i, 1), proto.P.at(i, 2));
      colors.push_back(hue_color(i, k));
    }

    // Descriptors of sampled object pixels across images, coloured by a
    // joint PCA so the same part gets the same colour in every instance.
    const AnnotationFile ann = load_annotations(dir / "train.json");
    DenseConfig dense;
    dense.max_points = cfg.viz_pixels;
    std::vector<std::vector<double>> phi_rows;
    for (std::size_t s = 0; s < std::min(cfg.viz_samples, ann.images.size()); ++s) {
      const TrainingSample sample = load_sample(dir, ann.images[s]);
      const PreparedSample prep = prepare_sample(sample, k, dense);
      const std::size_t d = prep.dense_features.cols();
      for (std::size_t r = 0; r < prep.dense_pixels.size(); ++r) {
        phi_rows.push_back(ck.head.apply(std::span<const double>(
            prep.dense_features.data.data() + r * d, d)));
      }

      // Per-image PCA of the projected feature grid (object cells only).
      const FeatureGrid proj = ck.head.apply(sample.features);
      ad::Tensor cells = ad::Tensor::zeros({proj.rows * proj.cols, proj.dim});
      cells.data = proj.data;
      auto pix = pca_colors(cells);
      for (std::size_t r = 0; r < proj.rows; ++r) {
        for (std::size_t c = 0; c < proj.cols; ++c) {
          const Pixel p = proj.cell_center(r, c);
          const int x = std::clamp(static_cast<int>(std::lround(p.x)), 0, sample.mask.width - 1);
          const int y = std::clamp(static_cast<int>(std::lround(p.y)), 0, sample.mask.height - 1);
          if (!sample.mask.at(x, y)) pix[r * proj.cols + c] = Rgb{0, 0, 0};
        }
      }
      write_file(out / ("pca_" + sample.image_id + ".ppm"),
                 encode_ppm(static_cast<int>(proj.cols), static_cast<int>(proj.rows), pix));
    }

    if (!phi_rows.empty()) {
      const std::size_t m = phi_rows.front().size();
      ad::Tensor phi = ad::Tensor::zeros({phi_rows.size(), m});
      for (std::size_t r = 0; r < phi_rows.size(); ++r) {
        std::copy(phi_rows[r].begin(), phi_rows[r].end(), phi.data.begin() + static_cast<std::ptrdiff_t>(r * m));
      }
      const auto mapped = canonical_map_values(proto, phi);
      const auto pca = pca_colors(phi);
      cloud.points.insert(cloud.points.end(), mapped.coords.begin(), mapped.coords.end());
      colors.insert(colors.end(), pca.begin(), pca.end());
    }
    write_file(out / "canonical.ply", export_ply(cloud, colors));
    log_info("viz: " + cat + ": " + std::to_string(cloud.size()) + " vertices");
  }
}

}  // namespace canoncorr
