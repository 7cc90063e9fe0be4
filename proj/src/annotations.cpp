#include "canoncorr/dataio.hpp"

#include "canoncorr/error.hpp"

#include <cmath>
#include <set>

namespace canoncorr {

using nlohmann::json;

namespace {

// Field-level parse helpers. `where` is a JSON-path-like location used in
// error messages.
[[noreturn]] void fail(const std::string& source, const std::string& where,
                       const std::string& what) {
  throw Error(ErrorKind::Load, source + ": " + where + ": " + what);
}

const json& field(const json& obj, const char* key, const std::string& source,
                  const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) fail(source, where, std::string("missing field '") + key + "'");
  return *it;
}

double number(const json& v, const std::string& source, const std::string& where) {
  if (!v.is_number()) fail(source, where, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) fail(source, where, "non-finite number");
  return d;
}

long integer(const json& v, const std::string& source, const std::string& where) {
  if (!v.is_number_integer()) fail(source, where, "expected an integer");
  return v.get<long>();
}

std::string text(const json& v, const std::string& source, const std::string& where) {
  if (!v.is_string()) fail(source, where, "expected a string");
  return v.get<std::string>();
}

const json& array(const json& v, const std::string& source, const std::string& where) {
  if (!v.is_array()) fail(source, where, "expected an array");
  return v;
}

json extras(const json& obj, std::initializer_list<const char*> known) {
  json out = json::object();
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool k = false;
    for (const char* name : known) k = k || it.key() == name;
    if (!k) out[it.key()] = it.value();
  }
  return out;
}

AnnotatedImage parse_image(const json& j, std::size_t num_kps,
                           const std::string& src, const std::string& at) {
  if (!j.is_object()) fail(src, at, "expected an object");
  AnnotatedImage img;
  img.imname = text(field(j, "imname", src, at), src, at + ".imname");
  img.width = static_cast<int>(integer(field(j, "width", src, at), src, at + ".width"));
  img.height = static_cast<int>(integer(field(j, "height", src, at), src, at + ".height"));
  if (img.width <= 0 || img.height <= 0) fail(src, at, "image size must be positive");

  if (auto it = j.find("intrinsics"); it != j.end() && !it->is_null()) {
    const std::string w = at + ".intrinsics";
    CameraIntrinsics k;
    k.fx = number(field(*it, "fx", src, w), src, w + ".fx");
    k.fy = number(field(*it, "fy", src, w), src, w + ".fy");
    k.cx = number(field(*it, "cx", src, w), src, w + ".cx");
    k.cy = number(field(*it, "cy", src, w), src, w + ".cy");
    if (!(k.fx > 0.0) || !(k.fy > 0.0)) fail(src, w, "focal lengths must be positive");
    img.intrinsics = k;
  }

  const json& kps = array(field(j, "kps", src, at), src, at + ".kps");
  if (kps.size() != num_kps) {
    fail(src, at + ".kps",
         "has " + std::to_string(kps.size()) + " entries, expected num_keypoints = " +
             std::to_string(num_kps));
  }
  for (std::size_t k = 0; k < kps.size(); ++k) {
    const std::string w = at + ".kps[" + std::to_string(k) + "]";
    if (kps[k].is_null()) {
      img.kps.emplace_back();
      continue;
    }
    if (!kps[k].is_array() || kps[k].size() != 2) fail(src, w, "expected [x, y] or null");
    const Pixel px{number(kps[k][0], src, w), number(kps[k][1], src, w)};
    if (px.x < -0.5 || px.y < -0.5 || px.x > img.width - 0.5 ||
        px.y > img.height - 0.5) {
      fail(src, w, "keypoint outside the image");
    }
    img.kps.emplace_back(px);
  }

  const json& bb = array(field(j, "bndbox", src, at), src, at + ".bndbox");
  if (bb.size() != 4) fail(src, at + ".bndbox", "expected [xmin, ymin, xmax, ymax]");
  double b[4];
  for (int i = 0; i < 4; ++i) b[i] = number(bb[static_cast<std::size_t>(i)], src, at + ".bndbox");
  if (!(b[0] >= 0 && b[1] >= 0 && b[0] < b[2] && b[1] < b[3] && b[2] <= img.width &&
        b[3] <= img.height)) {
    fail(src, at + ".bndbox", "box is empty or outside the image");
  }
  img.bbox = {b[0], b[1], b[2] - b[0], b[3] - b[1]};

  if (auto it = j.find("geo_aware"); it != j.end() && !it->is_null()) {
    const json& g = array(*it, src, at + ".geo_aware");
    if (g.size() != num_kps) fail(src, at + ".geo_aware", "length must equal num_keypoints");
    std::vector<bool> flags;
    for (const auto& v : g) {
      if (!v.is_boolean()) fail(src, at + ".geo_aware", "expected booleans");
      flags.push_back(v.get<bool>());
    }
    img.geo_aware = std::move(flags);
  }
  for (auto [key, dst] : {std::pair{"features", &img.features},
                          std::pair{"depth", &img.depth},
                          std::pair{"mask", &img.mask}}) {
    if (auto it = j.find(key); it != j.end()) *dst = text(*it, src, at + "." + key);
  }
  img.extra = extras(j, {"imname", "width", "height", "intrinsics", "kps", "bndbox",
                         "geo_aware", "features", "depth", "mask"});
  return img;
}

}  // namespace

const AnnotatedImage* AnnotationFile::find(const std::string& imname) const {
  for (const auto& img : images) {
    if (img.imname == imname) return &img;
  }
  return nullptr;
}

AnnotationFile parse_annotations(const std::string& bytes, const std::string& src) {
  json root;
  try {
    root = json::parse(bytes);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Load, src + ": syntax error at byte " +
                                     std::to_string(e.byte) + ": " + e.what());
  }
  if (!root.is_object()) fail(src, "$", "expected an object");

  AnnotationFile file;
  file.category = text(field(root, "category", src, "$"), src, "$.category");
  if (file.category.empty()) fail(src, "$.category", "must not be empty");
  const long nk = integer(field(root, "num_keypoints", src, "$"), src, "$.num_keypoints");
  if (nk < 1) fail(src, "$.num_keypoints", "must be at least 1");
  file.num_keypoints = static_cast<std::size_t>(nk);

  std::set<std::string> names;
  const json& images = array(field(root, "images", src, "$"), src, "$.images");
  for (std::size_t i = 0; i < images.size(); ++i) {
    const std::string at = "$.images[" + std::to_string(i) + "]";
    auto img = parse_image(images[i], file.num_keypoints, src, at);
    if (!names.insert(img.imname).second) {
      fail(src, at, "duplicate image name '" + img.imname + "'");
    }
    file.images.push_back(std::move(img));
  }

  const json& pairs = array(field(root, "pairs", src, "$"), src, "$.pairs");
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const std::string at = "$.pairs[" + std::to_string(i) + "]";
    const json& j = pairs[i];
    if (!j.is_object()) fail(src, at, "expected an object");
    AnnotatedPair p;
    p.src_imname = text(field(j, "src_imname", src, at), src, at + ".src_imname");
    p.trg_imname = text(field(j, "trg_imname", src, at), src, at + ".trg_imname");
    for (const auto* name : {&p.src_imname, &p.trg_imname}) {
      if (!names.count(*name)) {
        throw Error(ErrorKind::Reference,
                    src + ": " + at + ": unknown image '" + *name + "'");
      }
    }
    std::set<long> ids;
    for (const auto& v : array(field(j, "kps_ids", src, at), src, at + ".kps_ids")) {
      const long id = integer(v, src, at + ".kps_ids");
      if (id < 0 || id >= nk) fail(src, at + ".kps_ids", "keypoint id out of range");
      if (!ids.insert(id).second) {
        fail(src, at + ".kps_ids", "duplicate keypoint id " + std::to_string(id));
      }
      p.kps_ids.push_back(static_cast<int>(id));
    }
    p.extra = extras(j, {"src_imname", "trg_imname", "kps_ids"});
    file.pairs.push_back(std::move(p));
  }
  file.extra = extras(root, {"category", "num_keypoints", "images", "pairs"});
  return file;
}

AnnotationFile load_annotations(const std::filesystem::path& path) {
  return parse_annotations(read_file(path), path.string());
}

std::string dump_annotations(const AnnotationFile& file) {
  json root = file.extra;
  root["category"] = file.category;
  root["num_keypoints"] = file.num_keypoints;
  json images = json::array();
  for (const auto& img : file.images) {
    json j = img.extra;
    j["imname"] = img.imname;
    j["width"] = img.width;
    j["height"] = img.height;
    if (img.intrinsics) {
      j["intrinsics"] = {{"fx", img.intrinsics->fx}, {"fy", img.intrinsics->fy},
                         {"cx", img.intrinsics->cx}, {"cy", img.intrinsics->cy}};
    }
    json kps = json::array();
    for (const auto& k : img.kps) kps.push_back(k ? json::array({k->x, k->y}) : json());
    j["kps"] = std::move(kps);
    j["bndbox"] = {img.bbox.x, img.bbox.y, img.bbox.x + img.bbox.w,
                   img.bbox.y + img.bbox.h};
    if (img.geo_aware) j["geo_aware"] = *img.geo_aware;
    if (!img.features.empty()) j["features"] = img.features;
    if (!img.depth.empty()) j["depth"] = img.depth;
    if (!img.mask.empty()) j["mask"] = img.mask;
    images.push_back(std::move(j));
  }
  root["images"] = std::move(images);
  json pairs = json::array();
  for (const auto& p : file.pairs) {
    json j = p.extra;
    j["src_imname"] = p.src_imname;
    j["trg_imname"] = p.trg_imname;
    j["kps_ids"] = p.kps_ids;
    pairs.push_back(std::move(j));
  }
  root["pairs"] = std::move(pairs);
  return root.dump(2) + "\n";
}

void save_annotations(const std::filesystem::path& path, const AnnotationFile& file) {
  write_file(path, dump_annotations(file));
}

std::vector<EvalPair> eval_pairs(const AnnotationFile& file) {
  std::vector<EvalPair> out;
  for (const auto& p : file.pairs) {
    const AnnotatedImage* s = file.find(p.src_imname);
    const AnnotatedImage* t = file.find(p.trg_imname);
    if (!s || !t) {
      throw Error(ErrorKind::Reference, "pair references an unknown image");
    }
    EvalPair ep{s->imname, t->imname, file.category, {}, t->bbox};
    for (int id : p.kps_ids) {
      const auto k = static_cast<std::size_t>(id);
      if (!s->kps[k] || !t->kps[k]) continue;
      std::optional<bool> geo;
      if (t->geo_aware) geo = (*t->geo_aware)[k];
      ep.keypoints.push_back({id, *s->kps[k], *t->kps[k], geo});
    }
    out.push_back(std::move(ep));
  }
  return out;
}

AnnotatedPoints annotated_points(const AnnotationFile& file) {
  AnnotatedPoints out;
  for (const auto& img : file.images) {
    auto& pts = out[img.imname];
    for (std::size_t k = 0; k < img.kps.size(); ++k) {
      if (img.kps[k]) pts[static_cast<int>(k)] = *img.kps[k];
    }
  }
  return out;
}

}  // namespace canoncorr
