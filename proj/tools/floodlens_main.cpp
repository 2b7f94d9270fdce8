// floodlens -- staged two-corpus discourse analysis pipeline.
//
// Usage: floodlens <stage> --config pipeline.cfg [--out DIR] [--seed N]
// where <stage> is one of ingest, prep, topics, keywords, embed, relevance,
// report, run-all. Exit codes: 0 ok, 2 bad configuration, 3 stage failure.

#include <iostream>
#include <set>
#include <string>

#include <CLI11.hpp>

#include "floodlens/pipeline.hpp"
#include "floodlens/util.hpp"

namespace fl = floodlens;

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out_dir;
  std::int64_t seed = -1;
  bool seed_set = false;
  std::size_t threads = 0;
};

void add_common(CLI::App* cmd, CommonOpts* opts) {
  cmd->add_option("--config", opts->config_path, "pipeline configuration file")
      ->required();
  cmd->add_option("--out", opts->out_dir, "output directory (overrides config)");
  cmd->add_option("--seed", opts->seed, "random seed (overrides config)")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--threads", opts->threads, "worker thread bound (overrides config)");
}

int run(const CommonOpts& opts, const std::set<fl::Stage>& stages, bool needs_seed_flag) {
  try {
    if (needs_seed_flag && !opts.seed_set) {
      std::cerr << "error: --seed is required for this stage\n";
      return 2;
    }
    fl::PipelineConfig config = fl::parse_config(opts.config_path);
    if (!opts.out_dir.empty()) config.out_dir = opts.out_dir;
    if (opts.seed_set) config.seed = static_cast<std::uint64_t>(opts.seed);
    if (opts.threads > 0) config.threads = opts.threads;

    fl::RunResult result = fl::run_pipeline(config, stages);
    for (fl::Stage s : result.stages_run)
      std::cerr << "[floodlens] stage " << fl::stage_name(s) << " done\n";
    std::cerr << "[floodlens] manifest: " << result.manifest_path << "\n";
    return 0;
  } catch (const fl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"floodlens: topic modelling and relevance scoring over posts "
               "and public submissions"};
  app.require_subcommand(1);

  struct SubSpec {
    const char* name;
    const char* help;
    std::set<fl::Stage> stages;
    bool needs_seed;
  };
  const std::vector<SubSpec> specs = {
      {"ingest", "load and validate both corpora", {fl::Stage::ingest}, false},
      {"prep", "clean, tokenize and build bags of words", {fl::Stage::prep}, false},
      {"topics", "fit LDA with coherence-based K selection", {fl::Stage::topics}, true},
      {"keywords", "RCA keyword ranking per topic", {fl::Stage::keywords}, false},
      {"embed", "embed cleaned documents", {fl::Stage::embed}, false},
      {"relevance", "reference core + relevance index + deciles",
       {fl::Stage::relevance}, true},
      {"report", "plot-ready evaluation tables", {fl::Stage::report}, false},
      {"run-all", "run every stage in order",
       {fl::Stage::ingest, fl::Stage::prep, fl::Stage::topics, fl::Stage::keywords,
        fl::Stage::embed, fl::Stage::relevance, fl::Stage::report},
       true},
  };

  std::vector<CommonOpts> opts(specs.size());
  std::vector<CLI::App*> cmds;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    CLI::App* cmd = app.add_subcommand(specs[i].name, specs[i].help);
    add_common(cmd, &opts[i]);
    cmds.push_back(cmd);
  }

  CLI11_PARSE(app, argc, argv);

  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (cmds[i]->parsed()) {
      opts[i].seed_set = cmds[i]->count("--seed") > 0;
      return run(opts[i], specs[i].stages, specs[i].needs_seed);
    }
  }
  return 2;
}
