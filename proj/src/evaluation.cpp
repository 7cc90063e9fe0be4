#include "canoncorr/evaluation.hpp"

#include "canoncorr/error.hpp"
#include "canoncorr/log.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace canoncorr {

const char* to_string(Aggregation a) {
  return a == Aggregation::PerImage ? "per_image" : "per_point";
}

const char* to_string(MetricKind m) {
  return m == MetricKind::Pck ? "pck" : "pck_dagger";
}

Aggregation aggregation_from_string(const std::string& s) {
  if (s == "per_image") return Aggregation::PerImage;
  if (s == "per_point") return Aggregation::PerPoint;
  throw Error(ErrorKind::Config,
              "unknown aggregation '" + s + "' (expected per_image|per_point)");
}

namespace {

double dist(const Pixel& a, const Pixel& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

// Shared driver: `correct` decides one keypoint given its prediction.
template <class Correct>
PckReport score(std::span<const EvalPair> pairs, const Predictions& preds,
                double alpha, Aggregation agg, const PckOptions& opt,
                MetricKind metric, Correct&& correct) {
  if (!(alpha > 0.0)) {
    throw Error(ErrorKind::InvalidInput, "alpha must be positive");
  }
  if (preds.size() != pairs.size()) {
    throw Error(ErrorKind::InvalidInput,
                "got predictions for " + std::to_string(preds.size()) +
                    " pairs, expected " + std::to_string(pairs.size()));
  }
  struct Acc {
    std::vector<double> image_scores;
    std::size_t hits = 0;
    std::size_t n_pairs = 0;
    std::size_t n_points = 0;
  };
  std::map<std::string, Acc> acc;
  PckReport rep;
  rep.metric = metric;
  rep.aggregation = agg;
  rep.alpha = alpha;

  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto& pair = pairs[p];
    if (!(pair.tgt_bbox.w > 0.0) || !(pair.tgt_bbox.h > 0.0)) {
      throw Error(ErrorKind::InvalidInput,
                  "pair " + pair.src_image + "→" + pair.tgt_image +
                      " has an empty target box");
    }
    if (pair.keypoints.empty()) continue;
    const double thr = alpha * std::max(pair.tgt_bbox.w, pair.tgt_bbox.h);
    std::size_t hits = 0;
    for (std::size_t k = 0; k < pair.keypoints.size(); ++k) {
      const auto& kp = pair.keypoints[k];
      const std::optional<Pixel> pred =
          k < preds[p].size() ? preds[p][k] : std::nullopt;
      if (!pred) {
        const std::string what = "missing prediction for keypoint " +
                                 std::to_string(kp.id) + " of pair " +
                                 pair.src_image + "→" + pair.tgt_image;
        if (opt.strict) throw Error(ErrorKind::InvalidInput, what);
        ++rep.missing;
        log_warn(what);
        continue;
      }
      if (dist(*pred, kp.tgt) <= thr && correct(pair, kp, *pred)) ++hits;
    }
    auto& a = acc[pair.category];
    a.image_scores.push_back(static_cast<double>(hits) /
                             static_cast<double>(pair.keypoints.size()));
    a.hits += hits;
    a.n_pairs += 1;
    a.n_points += pair.keypoints.size();
  }

  for (auto& [cat, a] : acc) {
    // Summed in sorted order so the result does not depend on pair order.
    std::sort(a.image_scores.begin(), a.image_scores.end());
    double image_sum = 0.0;
    for (double v : a.image_scores) image_sum += v;
    const double s = agg == Aggregation::PerImage
                         ? image_sum / static_cast<double>(a.n_pairs)
                         : static_cast<double>(a.hits) / static_cast<double>(a.n_points);
    rep.categories.push_back({cat, s, a.n_pairs, a.n_points});
  }
  if (!rep.categories.empty()) {
    double sum = 0.0;
    for (const auto& c : rep.categories) sum += c.score;
    rep.average = sum / static_cast<double>(rep.categories.size());
  }
  return rep;
}

}  // namespace

PckReport pck_at(std::span<const EvalPair> pairs, const Predictions& preds,
                 double alpha, Aggregation agg, const PckOptions& opt) {
  return score(pairs, preds, alpha, agg, opt, MetricKind::Pck,
               [](const EvalPair&, const EvalKeypoint&, const Pixel&) {
                 return true;
               });
}

PckReport pck_dagger(std::span<const EvalPair> pairs, const Predictions& preds,
                     double alpha, Aggregation agg,
                     const AnnotatedPoints& annotated, const PckOptions& opt) {
  return score(
      pairs, preds, alpha, agg, opt, MetricKind::PckDagger,
      [&](const EvalPair& pair, const EvalKeypoint& kp, const Pixel& pred) {
        const auto it = annotated.find(pair.tgt_image);
        if (it == annotated.end()) {
          throw Error(ErrorKind::InvalidInput,
                      "no annotated points for target image " + pair.tgt_image);
        }
        // The target must be strictly closer than every other annotated
        // point; a tie counts as incorrect.
        const double d_gt = dist(pred, kp.tgt);
        for (const auto& [id, px] : it->second) {
          if (id != kp.id && dist(pred, px) <= d_gt) return false;
        }
        return true;
      });
}

std::vector<EvalPair> geo_subset_filter(std::span<const EvalPair> pairs) {
  std::vector<EvalPair> out;
  for (const auto& pair : pairs) {
    EvalPair kept = pair;
    kept.keypoints.clear();
    for (const auto& kp : pair.keypoints) {
      if (!kp.geo_aware) {
        throw Error(ErrorKind::UnsupportedAnnotation,
                    "pair " + pair.src_image + "→" + pair.tgt_image +
                        ": keypoint " + std::to_string(kp.id) +
                        " has no geo-aware flag");
      }
      if (*kp.geo_aware) kept.keypoints.push_back(kp);
    }
    if (!kept.keypoints.empty()) out.push_back(std::move(kept));
  }
  return out;
}

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string percent(double score) { return fmt("%.1f", 100.0 * score); }

std::size_t total_pairs(const PckReport& r) {
  std::size_t n = 0;
  for (const auto& c : r.categories) n += c.n_pairs;
  return n;
}

std::size_t total_points(const PckReport& r) {
  std::size_t n = 0;
  for (const auto& c : r.categories) n += c.n_points;
  return n;
}

std::string csv_rows(const PckReport& r) {
  std::string out;
  auto row = [&](const std::string& cat, double s, std::size_t np,
                 std::size_t nk) {
    out += cat + "," + to_string(r.metric) + "," + fmt("%g", r.alpha) + "," +
           to_string(r.aggregation) + "," + percent(s) + "," +
           std::to_string(np) + "," + std::to_string(nk) + "\n";
  };
  for (const auto& c : r.categories) row(c.category, c.score, c.n_pairs, c.n_points);
  if (!r.categories.empty()) row("avg", r.average, total_pairs(r), total_points(r));
  return out;
}

std::string text_table(const PckReport& r) {
  std::string out = "# " + std::string(to_string(r.metric)) + " @ alpha=" +
                    fmt("%g", r.alpha) + " (" + to_string(r.aggregation) + ")\n";
  char line[160];
  std::snprintf(line, sizeof line, "%-16s %8s %8s %8s\n", "category", "score",
                "pairs", "points");
  out += line;
  auto row = [&](const std::string& cat, double s, std::size_t np,
                 std::size_t nk) {
    std::snprintf(line, sizeof line, "%-16s %8s %8zu %8zu\n", cat.c_str(),
                  percent(s).c_str(), np, nk);
    out += line;
  };
  for (const auto& c : r.categories) row(c.category, c.score, c.n_pairs, c.n_points);
  if (!r.categories.empty()) row("avg", r.average, total_pairs(r), total_points(r));
  return out;
}

constexpr const char* kCsvHeader =
    "category,metric,alpha,aggregation,score,n_pairs,n_points\n";

}  // namespace

std::string emit_report(const PckReport& report, ReportFormat format) {
  if (format == ReportFormat::Csv) return kCsvHeader + csv_rows(report);
  return text_table(report);
}

std::string emit_reports(std::span<const PckReport> reports,
                         ReportFormat format) {
  std::string out = format == ReportFormat::Csv ? kCsvHeader : "";
  for (std::size_t i = 0; i < reports.size(); ++i) {
    if (format == ReportFormat::Csv) {
      out += csv_rows(reports[i]);
    } else {
      if (i > 0) out += "\n";
      out += text_table(reports[i]);
    }
  }
  return out;
}

}  // namespace canoncorr
