#include "canoncorr/cli.hpp"
#include "canoncorr/dataio.hpp"
#include "canoncorr/error.hpp"
#include "canoncorr/log.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <map>

using namespace canoncorr;

int main(int argc, char** argv) {
  CLI::App app{"Canonical-prototype semantic correspondence: synth | train | eval | viz"};
  app.require_subcommand(1);

  std::string config_file;
  bool verbose = false, quiet = false;
  std::map<std::string, std::string> flags;
  std::map<std::string, CLI::App*> subs;

  const std::map<std::string, std::string> about = {
      {"synth", "generate a synthetic benchmark"},
      {"train", "train one prototype per category"},
      {"eval", "evaluate checkpoints with PCK and PCK-dagger"},
      {"viz", "export canonical point clouds and PCA feature images"},
  };
  for (const auto& [name, help] : about) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("-c,--config", config_file, "key = value config file");
    sub->add_flag("-v,--verbose", verbose, "progress on stderr");
    sub->add_flag("-q,--quiet", quiet, "errors only");
    for (const auto& key : config_keys()) {
      sub->add_option("--" + key, flags[key], config_help(key));
    }
    subs[name] = sub;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    set_log_level(quiet ? LogLevel::Quiet : verbose ? LogLevel::Info : LogLevel::Warn);
    RunConfig cfg = default_run_config();
    for (const auto& [name, sub] : subs) {
      if (sub->parsed()) cfg.command = name;
    }
    if (!config_file.empty()) {
      for (const auto& [k, v] : parse_config_text(read_file(config_file), config_file)) {
        apply_setting(cfg, k, v);
      }
    }
    // Flags override the file.
    CLI::App* sub = subs.at(cfg.command);
    for (const auto& key : config_keys()) {
      if (sub->count("--" + key) > 0) apply_setting(cfg, key, flags[key]);
    }

    if (cfg.command == "synth") cmd_synth(cfg);
    if (cfg.command == "train") cmd_train(cfg);
    if (cfg.command == "eval") cmd_eval(cfg);
    if (cfg.command == "viz") cmd_viz(cfg);
  } catch (const Error& e) {
    std::fprintf(stderr, "canoncorr: %s: %s\n", to_string(e.kind()), e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "canoncorr: %s\n", e.what());
    return 3;
  }
  return 0;
}
