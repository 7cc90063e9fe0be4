#pragma once

#include "canoncorr/error.hpp"
#include "canoncorr/evaluation.hpp"
#include "canoncorr/matching.hpp"
#include "canoncorr/prototype.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace canoncorr {

/// Everything a command needs. Every field is reachable through a config key
/// (see config_keys()); a config file and command-line flags both go through
/// apply_setting.
struct RunConfig {
  std::string command;
  std::filesystem::path data_dir = "data";
  std::filesystem::path out_dir;  // default: $CANONCORR_OUT_DIR, else "out"
  std::filesystem::path checkpoint_dir;  // eval/viz input; default out_dir
  std::vector<std::string> categories;   // empty = all

  // synth
  std::size_t n_train = 200;
  std::size_t n_val = 10;
  std::size_t n_test_pairs = 50;
  std::uint64_t seed = 0;

  // train
  TrainConfig train;

  // eval
  MatchConfig match;
  std::vector<double> alphas{0.01, 0.05, 0.1};
  std::vector<Aggregation> aggregations{Aggregation::PerImage, Aggregation::PerPoint};
  std::vector<std::string> splits{"test_seen", "test_unseen"};
  bool oracle = false;  // debug: predict the ground truth
  double max_skipped = 0.1;

  // viz
  std::size_t viz_samples = 4;
  std::size_t viz_pixels = 256;
};

RunConfig default_run_config();

/// Known keys, in help order.
const std::vector<std::string>& config_keys();
std::string config_help(const std::string& key);

/// Throws Config for unknown keys or unparsable values.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);

/// `key = value` lines; '#' starts a comment; blank lines ignored.
std::vector<std::pair<std::string, std::string>> parse_config_text(
    const std::string& text, const std::string& source = "<config>");

/// Current value of every key, as apply_setting would accept it.
std::map<std::string, std::string> dump_settings(const RunConfig& cfg);

/// Writes <out>/<cat>/{train,val,test_seen,test_unseen}.json with their
/// features/, depth/ and mask/ files, and <out>/manifest.json.
void cmd_synth(const RunConfig& cfg);
/// Trains every category under data_dir; writes <out>/<cat>/checkpoint.c3dp
/// and <out>/<cat>/loss.csv.
void cmd_train(const RunConfig& cfg);
/// Writes <out>/eval/<split>.{txt,csv} and <out>/eval/summary.json.
void cmd_eval(const RunConfig& cfg);
/// Writes <out>/<cat>/viz/canonical.ply and PCA feature images.
void cmd_viz(const RunConfig& cfg);

/// 0 success, 2 bad config, 3 data error, 4 training failure.
int exit_code(ErrorKind kind);

/// FNV-1a, 64 bit, as 16 hex digits. Used for manifest file hashes.
std::string content_hash(const std::string& bytes);

}  // namespace canoncorr
