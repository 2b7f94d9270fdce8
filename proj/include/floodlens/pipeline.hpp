// pipeline.hpp -- staged orchestration of the whole run: each stage reads
// its predecessors' artifacts from the output directory, writes its own, and
// records every output file's SHA-256 in manifest.json.

#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "floodlens/embed.hpp"
#include "floodlens/relevance.hpp"
#include "floodlens/report.hpp"
#include "floodlens/topics.hpp"

namespace floodlens {

enum class Stage { ingest, prep, topics, keywords, embed, relevance, report };

const char* stage_name(Stage s);
std::vector<Stage> all_stages();

struct LdaStageConfig {
  std::vector<std::uint32_t> k_candidates = {2, 3, 4, 6};
  double alpha = 0.0;  // 0 = 50/K
  double beta = 0.01;
  std::uint32_t iterations = 1000;
  std::uint32_t burn_in = 500;
};

struct PipelineConfig {
  // paths (relative entries in the config file resolve against its directory)
  std::string tweets_path;
  std::string submissions_manifest;
  std::string stopwords_path;
  std::string cache_path;  // empty: <out>/embed.cache
  std::string out_dir;

  // prep
  std::uint32_t min_df = 5;
  double max_df_frac = 0.5;
  int max_ngram = 5;

  // topics
  LdaStageConfig tweets_lda;
  LdaStageConfig submissions_lda;
  std::size_t top_words = 10;

  // embedding
  EmbeddingBackendSpec backend;
  std::size_t batch_size = 32;
  std::size_t max_parallel = 4;
  RetryPolicy retry;

  // relevance
  double ref_quantile = 0.95;
  double epsilon = 1e-4;
  LambdaMode lambda_mode = LambdaMode::per_tweet;

  // keywords
  std::int64_t keyword_min_count = 3;
  std::size_t keyword_top_k = 25;

  // report
  std::size_t report_bins = 0;  // 0 = Freedman-Diaconis
  NgramStat ngram_stat = NgramStat::total_occurrences;
  bool timeline_zero_fill = false;

  std::optional<std::uint64_t> seed;
  std::size_t threads = 1;

  void validate(const std::set<Stage>& stages) const;
};

PipelineConfig parse_config(const std::string& path);

struct RunResult {
  std::vector<Stage> stages_run;
  std::string manifest_path;
};

// Runs the requested stages in dependency order. Missing prerequisite
// artifacts raise Error("missing stage: <name>").
RunResult run_pipeline(const PipelineConfig& config, const std::set<Stage>& stages);

}  // namespace floodlens
