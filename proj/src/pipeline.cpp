#include "floodlens/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "floodlens/hash.hpp"
#include "floodlens/keywords.hpp"
#include "floodlens/rng.hpp"
#include "floodlens/util.hpp"

namespace floodlens {

namespace fs = std::filesystem;
using nlohmann::json;

const char* stage_name(Stage s) {
  switch (s) {
    case Stage::ingest: return "ingest";
    case Stage::prep: return "prep";
    case Stage::topics: return "topics";
    case Stage::keywords: return "keywords";
    case Stage::embed: return "embed";
    case Stage::relevance: return "relevance";
    case Stage::report: return "report";
  }
  return "?";
}

std::vector<Stage> all_stages() {
  return {Stage::ingest, Stage::prep,      Stage::topics, Stage::keywords,
          Stage::embed,  Stage::relevance, Stage::report};
}

void PipelineConfig::validate(const std::set<Stage>& stages) const {
  if (out_dir.empty()) throw ConfigError("config: output directory not set");
  if (stages.count(Stage::ingest)) {
    if (tweets_path.empty()) throw ConfigError("config: tweets path not set");
    if (submissions_manifest.empty())
      throw ConfigError("config: submissions manifest not set");
  }
  if (stages.count(Stage::prep) && stopwords_path.empty())
    throw ConfigError("config: stopwords path not set");
  if ((stages.count(Stage::topics) || stages.count(Stage::relevance)) && !seed)
    throw ConfigError("config: seed is required for the topics and relevance stages");
  if (!(max_df_frac > 0.0 && max_df_frac <= 1.0))
    throw ConfigError("config: max_df_frac must be in (0, 1]");
  if (min_df < 1) throw ConfigError("config: min_df must be >= 1");
  if (max_ngram < 1 || max_ngram > 5)
    throw ConfigError("config: max_ngram must be in [1, 5]");
  if (!(ref_quantile > 0.0 && ref_quantile <= 1.0))
    throw ConfigError("config: relevance.q must be in (0, 1]");
  if (!(epsilon > 0.0 && epsilon <= 0.1))
    throw ConfigError("config: relevance.epsilon must be in (0, 0.1]");
  if (threads < 1) throw ConfigError("config: threads must be >= 1");
  if (stages.count(Stage::embed)) backend.validate();
}

namespace {

std::string resolve_path(const fs::path& base, const std::string& p) {
  if (p.empty()) return p;
  fs::path path(p);
  if (path.is_absolute()) return p;
  return (base / path).lexically_normal().string();
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    std::uint64_t v = std::stoull(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: " + key + " expects an unsigned integer, got \"" + value + "\"");
  }
}

double parse_f64(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: " + key + " expects a number, got \"" + value + "\"");
  }
}

std::vector<std::uint32_t> parse_u32_list(const std::string& key, const std::string& value) {
  std::vector<std::uint32_t> out;
  for (const auto& part : split(value, ',')) {
    const std::string item = trim(part);
    if (item.empty()) continue;
    out.push_back(static_cast<std::uint32_t>(parse_u64(key, item)));
  }
  if (out.empty()) throw ConfigError("config: " + key + " expects at least one value");
  return out;
}

bool set_lda_key(LdaStageConfig* lda, const std::string& field, const std::string& key,
                 const std::string& value) {
  if (field == "k_candidates") lda->k_candidates = parse_u32_list(key, value);
  else if (field == "alpha") lda->alpha = parse_f64(key, value);
  else if (field == "beta") lda->beta = parse_f64(key, value);
  else if (field == "iterations") lda->iterations = static_cast<std::uint32_t>(parse_u64(key, value));
  else if (field == "burn_in") lda->burn_in = static_cast<std::uint32_t>(parse_u64(key, value));
  else return false;
  return true;
}

}  // namespace

PipelineConfig parse_config(const std::string& path) {
  PipelineConfig config;
  const fs::path base = fs::path(path).parent_path();
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }

  std::size_t line_no = 0;
  for (const auto& raw_line : split(text, '\n')) {
    ++line_no;
    std::string line = raw_line;
    // full-line and " #" inline comments
    if (auto pos = line.find('#'); pos != std::string::npos &&
        (pos == 0 || line[pos - 1] == ' ' || line[pos - 1] == '\t'))
      line = line.substr(0, pos);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: line " + std::to_string(line_no) + " is not key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));

    if (key == "tweets") config.tweets_path = resolve_path(base, value);
    else if (key == "submissions") config.submissions_manifest = resolve_path(base, value);
    else if (key == "stopwords") config.stopwords_path = resolve_path(base, value);
    else if (key == "cache") config.cache_path = resolve_path(base, value);
    else if (key == "out") config.out_dir = resolve_path(base, value);
    else if (key == "min_df") config.min_df = static_cast<std::uint32_t>(parse_u64(key, value));
    else if (key == "max_df_frac") config.max_df_frac = parse_f64(key, value);
    else if (key == "max_ngram") config.max_ngram = static_cast<int>(parse_u64(key, value));
    else if (key == "top_words") config.top_words = parse_u64(key, value);
    else if (starts_with(key, "tweets.") &&
             set_lda_key(&config.tweets_lda, key.substr(7), key, value)) {}
    else if (starts_with(key, "submissions.") &&
             set_lda_key(&config.submissions_lda, key.substr(12), key, value)) {}
    else if (key == "embed.kind") {
      if (value == "local") config.backend.kind = BackendKind::local;
      else if (value == "remote") config.backend.kind = BackendKind::remote;
      else throw ConfigError("config: embed.kind must be local or remote");
    } else if (key == "embed.endpoint") config.backend.endpoint = value;
    else if (key == "embed.model") config.backend.model = value;
    else if (key == "embed.dim") config.backend.dim = static_cast<std::uint32_t>(parse_u64(key, value));
    else if (key == "embed.hash_seed") config.backend.hash_seed = parse_u64(key, value);
    else if (key == "embed.batch_size") config.batch_size = parse_u64(key, value);
    else if (key == "embed.max_parallel") config.max_parallel = parse_u64(key, value);
    else if (key == "embed.max_retries") config.retry.max_retries = static_cast<int>(parse_u64(key, value));
    else if (key == "relevance.q") config.ref_quantile = parse_f64(key, value);
    else if (key == "relevance.epsilon") config.epsilon = parse_f64(key, value);
    else if (key == "relevance.lambda_mode") {
      if (value == "per_tweet") config.lambda_mode = LambdaMode::per_tweet;
      else if (value == "global") config.lambda_mode = LambdaMode::global;
      else throw ConfigError("config: relevance.lambda_mode must be per_tweet or global");
    } else if (key == "keywords.min_count") {
      config.keyword_min_count = static_cast<std::int64_t>(parse_u64(key, value));
    } else if (key == "keywords.top_k") config.keyword_top_k = parse_u64(key, value);
    else if (key == "report.bins") config.report_bins = parse_u64(key, value);
    else if (key == "report.ngram_stat") {
      if (value == "total") config.ngram_stat = NgramStat::total_occurrences;
      else if (value == "distinct") config.ngram_stat = NgramStat::distinct_ngrams;
      else throw ConfigError("config: report.ngram_stat must be total or distinct");
    } else if (key == "report.zero_fill") {
      if (value == "true") config.timeline_zero_fill = true;
      else if (value == "false") config.timeline_zero_fill = false;
      else throw ConfigError("config: report.zero_fill must be true or false");
    } else if (key == "seed") config.seed = parse_u64(key, value);
    else if (key == "threads") config.threads = parse_u64(key, value);
    else throw ConfigError("config: unknown key \"" + key + "\" at line " +
                           std::to_string(line_no));
  }
  return config;
}

namespace {

// ---------------------------------------------------------------------------
// Artifact bookkeeping

struct StageContext {
  const PipelineConfig& config;
  fs::path out;
  json manifest;  // stage -> {relative path -> sha256}

  explicit StageContext(const PipelineConfig& cfg) : config(cfg), out(cfg.out_dir) {
    fs::create_directories(out);
    const fs::path manifest_file = out / "manifest.json";
    if (fs::exists(manifest_file)) {
      manifest = json::parse(read_file(manifest_file.string()), nullptr, false);
      if (manifest.is_discarded()) manifest = json::object();
    } else {
      manifest = json::object();
    }
  }

  std::string write_artifact(Stage stage, const std::string& rel,
                             std::string_view content) {
    const fs::path path = out / rel;
    fs::create_directories(path.parent_path());
    write_file(path.string(), content);
    manifest[stage_name(stage)][rel] = sha256_hex(content);
    return path.string();
  }

  void record_artifact(Stage stage, const std::string& rel) {
    manifest[stage_name(stage)][rel] = sha256_file_hex((out / rel).string());
  }

  void finish_stage() {
    write_file((out / "manifest.json").string(), manifest.dump(2) + "\n");
  }

  std::string artifact(const std::string& rel) const { return (out / rel).string(); }
  bool has_artifact(const std::string& rel) const { return fs::exists(out / rel); }
};

const std::vector<std::pair<Stage, std::vector<Stage>>>& stage_dependencies() {
  static const std::vector<std::pair<Stage, std::vector<Stage>>> deps = {
      {Stage::ingest, {}},
      {Stage::prep, {Stage::ingest}},
      {Stage::topics, {Stage::prep}},
      {Stage::keywords, {Stage::prep, Stage::topics}},
      {Stage::embed, {Stage::prep}},
      {Stage::relevance, {Stage::embed}},
      {Stage::report, {Stage::ingest, Stage::prep, Stage::topics, Stage::relevance}},
  };
  return deps;
}

std::string stage_marker(Stage s) {
  switch (s) {
    case Stage::ingest: return "corpus/tweets.jsonl";
    case Stage::prep: return "prep/tweets/clean.jsonl";
    case Stage::topics: return "topics/tweets/dominant.csv";
    case Stage::keywords: return "keywords/tweets/rca.csv";
    case Stage::embed: return "embed/tweets.emb";
    case Stage::relevance: return "relevance/relevance.csv";
    case Stage::report: return "report/projection.csv";
  }
  return "";
}

// ---------------------------------------------------------------------------
// Intermediate artifact formats

std::string clean_docs_to_jsonl(const std::vector<CleanDoc>& docs) {
  std::string out;
  for (const auto& d : docs) {
    json j;
    j["doc_id"] = d.doc_id;
    j["text"] = d.text;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<CleanDoc> clean_docs_from_jsonl(const std::string& content) {
  std::vector<CleanDoc> docs;
  std::istringstream in(content);
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    json j = json::parse(line);
    docs.push_back({j.at("doc_id").get<std::string>(), j.at("text").get<std::string>()});
  }
  return docs;
}

std::string token_docs_to_jsonl(const std::vector<TokenDoc>& docs) {
  std::string out;
  for (const auto& d : docs) {
    json j;
    j["doc_id"] = d.doc_id;
    j["sentences"] = d.sentences;
    out += j.dump();
    out += '\n';
  }
  return out;
}

// N-gram counts are derived data; recount them from the stored sentences.
std::vector<TokenDoc> token_docs_from_jsonl(const std::string& content, int max_ngram) {
  std::vector<TokenDoc> docs;
  std::istringstream in(content);
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    json j = json::parse(line);
    TokenDoc d;
    d.doc_id = j.at("doc_id").get<std::string>();
    d.sentences = j.at("sentences").get<std::vector<std::vector<std::string>>>();
    d.ngram_counts = extract_ngrams(d.sentences, max_ngram);
    docs.push_back(std::move(d));
  }
  return docs;
}

std::string vocab_to_csv(const Vocabulary& vocab) {
  std::string out = "index,term,df\n";
  for (std::size_t i = 0; i < vocab.size(); ++i)
    out += csv_row({std::to_string(i), vocab.terms[i], std::to_string(vocab.df[i])});
  return out;
}

Vocabulary vocab_from_csv(const std::string& content, std::size_t total_docs) {
  Vocabulary vocab;
  vocab.total_docs = total_docs;
  auto rows = parse_csv(content);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() == 1 && rows[r][0].empty()) continue;
    if (rows[r].size() != 3) throw Error("vocab.csv: bad row " + std::to_string(r));
    vocab.index[rows[r][1]] = static_cast<std::uint32_t>(vocab.terms.size());
    vocab.terms.push_back(rows[r][1]);
    vocab.df.push_back(static_cast<std::uint32_t>(std::stoul(rows[r][2])));
  }
  return vocab;
}

std::string bows_to_text(const std::vector<BowDoc>& bows) {
  std::string out;
  for (const auto& b : bows) {
    out += b.doc_id;
    for (const auto& [term, count] : b.counts)
      out += " " + std::to_string(term) + ":" + std::to_string(count);
    out += '\n';
  }
  return out;
}

std::vector<BowDoc> bows_from_text(const std::string& content) {
  std::vector<BowDoc> bows;
  std::istringstream in(content);
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    auto parts = split(line, ' ');
    BowDoc b;
    b.doc_id = parts[0];
    for (std::size_t i = 1; i < parts.size(); ++i) {
      auto colon = parts[i].find(':');
      if (colon == std::string::npos) throw Error("bow.txt: bad entry " + parts[i]);
      b.counts.emplace_back(
          static_cast<std::uint32_t>(std::stoul(parts[i].substr(0, colon))),
          static_cast<std::uint32_t>(std::stoul(parts[i].substr(colon + 1))));
    }
    bows.push_back(std::move(b));
  }
  return bows;
}

std::map<std::string, std::uint32_t> dominant_from_csv(const std::string& content) {
  std::map<std::string, std::uint32_t> out;
  auto rows = parse_csv(content);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() == 1 && rows[r][0].empty()) continue;
    if (rows[r].size() != 2) throw Error("dominant.csv: bad row " + std::to_string(r));
    out[rows[r][0]] = static_cast<std::uint32_t>(std::stoul(rows[r][1]));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Stages

void run_ingest(StageContext& ctx) {
  auto tweets = load_tweets(ctx.config.tweets_path);
  auto submissions = load_submissions(ctx.config.submissions_manifest);
  Corpus corpus = Corpus::build(std::move(tweets.tweets), std::move(submissions.submissions),
                                {ctx.config.tweets_path, ctx.config.submissions_manifest});
  ValidationReport validation = validate_corpus(corpus);

  ctx.write_artifact(Stage::ingest, "corpus/tweets.jsonl", tweets_to_jsonl(corpus.tweets));
  ctx.write_artifact(Stage::ingest, "corpus/submissions.jsonl",
                     submissions_to_jsonl(corpus.submissions));
  json report;
  report["tweets"] = {{"loaded", tweets.report.loaded},
                      {"skipped", tweets.report.skipped},
                      {"diagnostics", tweets.report.diagnostics}};
  report["submissions"] = {{"loaded", submissions.report.loaded},
                           {"skipped", submissions.report.skipped},
                           {"diagnostics", submissions.report.diagnostics}};
  report["validation"] = {{"duplicate_ids", validation.duplicate_ids},
                          {"empty_text_ids", validation.empty_text_ids},
                          {"geo_violations", validation.geo_violations}};
  ctx.write_artifact(Stage::ingest, "corpus/validation.json", report.dump(2) + "\n");
}

struct PrepInput {
  std::string name;  // "tweets" | "submissions"
  std::vector<std::pair<std::string, std::string>> docs;  // (id, raw text)
};

void prep_one(StageContext& ctx, const PrepInput& input, const StopwordSet& stopwords) {
  std::vector<CleanDoc> clean;
  clean.reserve(input.docs.size());
  for (const auto& [id, text] : input.docs) clean.push_back({id, clean_text(text)});

  std::vector<TokenDoc> tokens;
  tokens.reserve(clean.size());
  for (const auto& c : clean)
    tokens.push_back(tokenize_document(c, stopwords, ctx.config.max_ngram));

  PrepReport report;
  auto [vocab, bows] = build_bow(tokens, ctx.config.min_df, ctx.config.max_df_frac, &report);

  const std::string dir = "prep/" + input.name + "/";
  ctx.write_artifact(Stage::prep, dir + "clean.jsonl", clean_docs_to_jsonl(clean));
  ctx.write_artifact(Stage::prep, dir + "tokens.jsonl", token_docs_to_jsonl(tokens));
  ctx.write_artifact(Stage::prep, dir + "vocab.csv", vocab_to_csv(vocab));
  ctx.write_artifact(Stage::prep, dir + "bow.txt", bows_to_text(bows));
  json j = {{"docs_in", report.docs_in},
            {"docs_out", report.docs_out},
            {"dropped_empty", report.dropped_empty},
            {"vocab_size", report.vocab_size}};
  ctx.write_artifact(Stage::prep, dir + "report.json", j.dump(2) + "\n");
}

void run_prep(StageContext& ctx) {
  const StopwordSet stopwords = load_stopwords(ctx.config.stopwords_path);

  PrepInput tweets{"tweets", {}};
  auto loaded = load_tweets(ctx.artifact("corpus/tweets.jsonl"));
  for (const auto& t : loaded.tweets) tweets.docs.emplace_back(t.id, t.text);

  PrepInput submissions{"submissions", {}};
  auto subs = submissions_from_jsonl(read_file(ctx.artifact("corpus/submissions.jsonl")));
  for (const auto& s : subs) submissions.docs.emplace_back(s.id, s.text);

  prep_one(ctx, tweets, stopwords);
  prep_one(ctx, submissions, stopwords);
}

void topics_one(StageContext& ctx, const std::string& name, const LdaStageConfig& lda) {
  const std::string prep_dir = "prep/" + name + "/";
  auto bows = bows_from_text(read_file(ctx.artifact(prep_dir + "bow.txt")));
  auto vocab = vocab_from_csv(read_file(ctx.artifact(prep_dir + "vocab.csv")), bows.size());

  LdaConfig base;
  base.alpha = lda.alpha;
  base.beta = lda.beta;
  base.iterations = lda.iterations;
  base.burn_in = lda.burn_in;
  // Distinct substream per corpus so the two chains are independent.
  base.seed = mix_seed(*ctx.config.seed, fnv1a64(name));

  CoherenceReport coherence = select_topic_count(
      bows, static_cast<std::uint32_t>(vocab.size()), lda.k_candidates, base,
      ctx.config.top_words);
  LdaConfig chosen = base;
  chosen.topics = coherence.chosen_k;
  LdaModel model = fit_lda(bows, static_cast<std::uint32_t>(vocab.size()), chosen);

  const std::string dir = "topics/" + name + "/";

  std::string phi_csv;
  for (std::uint32_t k = 0; k < model.num_topics; ++k) {
    for (std::uint32_t w = 0; w < model.vocab_size; ++w) {
      if (w) phi_csv += ',';
      phi_csv += format_double(model.phi_at(k, w));
    }
    phi_csv += '\n';
  }
  ctx.write_artifact(Stage::topics, dir + "phi.csv", phi_csv);

  std::string theta_csv;
  for (std::size_t d = 0; d < model.doc_ids.size(); ++d) {
    auto row = model.theta_row(d);
    for (std::uint32_t k = 0; k < model.num_topics; ++k) {
      if (k) theta_csv += ',';
      theta_csv += format_double(row[k]);
    }
    theta_csv += '\n';
  }
  ctx.write_artifact(Stage::topics, dir + "theta.csv", theta_csv);

  json topics_json = json::array();
  for (std::uint32_t k = 0; k < model.num_topics; ++k) {
    json words = json::array();
    for (std::uint32_t w : model.top_words(k, ctx.config.top_words))
      words.push_back({{"term", vocab.terms[w]}, {"prob", model.phi_at(k, w)}});
    topics_json.push_back({{"topic", k}, {"words", words}});
  }
  ctx.write_artifact(Stage::topics, dir + "topics.json", topics_json.dump(2) + "\n");

  json coherence_json;
  coherence_json["variant"] = coherence.variant;
  coherence_json["chosen_k"] = coherence.chosen_k;
  json entries = json::array();
  for (const auto& e : coherence.entries)
    entries.push_back({{"k", e.k}, {"score", e.score}});
  coherence_json["candidates"] = entries;
  ctx.write_artifact(Stage::topics, dir + "coherence.json", coherence_json.dump(2) + "\n");

  std::string dominant_csv = "doc_id,topic\n";
  for (std::size_t d = 0; d < model.doc_ids.size(); ++d)
    dominant_csv += csv_row({model.doc_ids[d], std::to_string(dominant_topic(model, d))});
  ctx.write_artifact(Stage::topics, dir + "dominant.csv", dominant_csv);
}

void run_topics(StageContext& ctx) {
  topics_one(ctx, "tweets", ctx.config.tweets_lda);
  topics_one(ctx, "submissions", ctx.config.submissions_lda);
}

void keywords_one(StageContext& ctx, const std::string& name) {
  auto tokens = token_docs_from_jsonl(
      read_file(ctx.artifact("prep/" + name + "/tokens.jsonl")), ctx.config.max_ngram);
  auto dominant = dominant_from_csv(
      read_file(ctx.artifact("topics/" + name + "/dominant.csv")));
  const json topics_json =
      json::parse(read_file(ctx.artifact("topics/" + name + "/topics.json")));
  const std::uint32_t num_topics = static_cast<std::uint32_t>(topics_json.size());

  // Only documents that survived the bow build carry a dominant topic.
  std::vector<TokenDoc> docs;
  std::vector<std::uint32_t> topics;
  for (auto& doc : tokens) {
    auto it = dominant.find(doc.doc_id);
    if (it == dominant.end()) continue;
    topics.push_back(it->second);
    docs.push_back(std::move(doc));
  }

  auto profile = topic_ngram_counts(docs, topics, num_topics);
  auto table = rca_scores(profile);
  auto ranked = rank_keywords(table, ctx.config.keyword_top_k, ctx.config.keyword_min_count);

  std::string rca_csv = "topic,ngram,n,f_ti,rca\n";
  for (std::size_t t = 0; t < table.rows.size(); ++t) {
    for (const auto& [gram, entry] : table.rows[t]) {
      rca_csv += csv_row({std::to_string(t), gram, std::to_string(ngram_length(gram)),
                          std::to_string(entry.frequency), format_double(entry.rca)});
    }
  }
  const std::string dir = "keywords/" + name + "/";
  ctx.write_artifact(Stage::keywords, dir + "rca.csv", rca_csv);

  json keywords_json = json::array();
  for (std::size_t t = 0; t < ranked.size(); ++t) {
    json list = json::array();
    for (const auto& kw : ranked[t])
      list.push_back({{"ngram", kw.ngram},
                      {"n", kw.length},
                      {"f_ti", kw.frequency},
                      {"rca", kw.rca}});
    keywords_json.push_back({{"topic", t}, {"candidates", list}});
  }
  ctx.write_artifact(Stage::keywords, dir + "keywords.json", keywords_json.dump(2) + "\n");
}

void run_keywords(StageContext& ctx) {
  keywords_one(ctx, "tweets");
  keywords_one(ctx, "submissions");
}

void run_embed(StageContext& ctx) {
  std::string cache = ctx.config.cache_path.empty()
                          ? (ctx.out / "embed.cache").string()
                          : ctx.config.cache_path;
  fs::create_directories(fs::path(cache).parent_path());
  for (const std::string name : {"tweets", "submissions"}) {
    auto docs = clean_docs_from_jsonl(
        read_file(ctx.artifact("prep/" + name + "/clean.jsonl")));
    EmbedReport report;
    EmbeddingMatrix matrix =
        embed_corpus(docs, ctx.config.backend, cache, &report, ctx.config.batch_size,
                     ctx.config.max_parallel, ctx.config.retry);
    const std::string rel = "embed/" + name + ".emb";
    fs::create_directories(ctx.out / "embed");
    save_embedding_matrix(matrix, ctx.artifact(rel));
    ctx.record_artifact(Stage::embed, rel);
    std::cerr << "[embed] " << name << ": " << matrix.rows() << " docs, dim "
              << matrix.dim << ", cache hits " << report.cache_hits
              << ", backend calls " << report.backend_calls << ", empty "
              << report.empty_docs << "\n";
    for (const auto& d : report.diagnostics) std::cerr << "[embed] " << d << "\n";
  }
}

void run_relevance(StageContext& ctx) {
  EmbeddingMatrix submissions = load_embedding_matrix(ctx.artifact("embed/submissions.emb"));
  EmbeddingMatrix tweets = load_embedding_matrix(ctx.artifact("embed/tweets.emb"));
  if (submissions.backend_id != tweets.backend_id)
    throw Error("relevance: tweet and submission embeddings use different backends");

  ReferenceCorpus ref = select_reference_core(submissions, ctx.config.ref_quantile);
  ScoreReport scored = score_corpus(tweets, ref, ctx.config.lambda_mode,
                                    ctx.config.epsilon, ctx.config.threads);

  json core;
  core["selected_ids"] = ref.selected_ids;
  core["q"] = ref.quantile;
  core["dim"] = ref.dim;
  core["dropped_zero"] = ref.dropped_zero;
  core["backend_id"] = submissions.backend_id;
  core["diagnostics"] = ref.diagnostics;
  ctx.write_artifact(Stage::relevance, "relevance/reference_core.json", core.dump(2) + "\n");

  json score_report;
  score_report["excluded"] = scored.excluded_ids;
  score_report["lambda_mode"] =
      ctx.config.lambda_mode == LambdaMode::per_tweet ? "per_tweet" : "global";
  if (ctx.config.lambda_mode == LambdaMode::global)
    score_report["global_lambda"] = scored.global_lambda;
  ctx.write_artifact(Stage::relevance, "relevance/score_report.json",
                     score_report.dump(2) + "\n");

  const bool partitionable = scored.scores.size() >= 10;
  std::map<std::string, int> deciles;
  if (partitionable) {
    DecileResult deciled = decile_partition(scored.scores);
    for (const auto& s : deciled.scores) deciles[s.tweet_id] = s.decile;
  }
  std::string csv = "tweet_id,index,lambda,decile\n";
  for (const auto& s : scored.scores) {
    auto it = deciles.find(s.tweet_id);
    csv += csv_row({s.tweet_id, format_double(s.index), format_double(s.lambda),
                    it == deciles.end() ? "" : std::to_string(it->second)});
  }
  ctx.write_artifact(Stage::relevance, "relevance/relevance.csv", csv);
  if (!partitionable)
    throw Error("relevance: fewer than 10 scored posts; indices written but decile "
                "partition is unavailable");
}

struct RelevanceCsv {
  std::set<std::string> top_ids, bottom_ids;
};

RelevanceCsv relevance_from_csv(const std::string& content) {
  RelevanceCsv out;
  auto rows = parse_csv(content);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() == 1 && rows[r][0].empty()) continue;
    if (rows[r].size() != 4) throw Error("relevance.csv: bad row " + std::to_string(r));
    if (rows[r][3] == "1") out.top_ids.insert(rows[r][0]);
    else if (rows[r][3] == "10") out.bottom_ids.insert(rows[r][0]);
  }
  return out;
}

void run_report(StageContext& ctx) {
  auto tweets = load_tweets(ctx.artifact("corpus/tweets.jsonl")).tweets;
  auto submissions = submissions_from_jsonl(read_file(ctx.artifact("corpus/submissions.jsonl")));
  auto tweet_tokens = token_docs_from_jsonl(
      read_file(ctx.artifact("prep/tweets/tokens.jsonl")), ctx.config.max_ngram);
  auto tweet_dominant = dominant_from_csv(read_file(ctx.artifact("topics/tweets/dominant.csv")));
  auto sub_dominant =
      dominant_from_csv(read_file(ctx.artifact("topics/submissions/dominant.csv")));
  auto relevance = relevance_from_csv(read_file(ctx.artifact("relevance/relevance.csv")));

  std::uint32_t tweet_topics = 0;
  for (const auto& [id, k] : tweet_dominant) tweet_topics = std::max(tweet_topics, k + 1);

  // Fig.-4-style density of per-post N-gram counts, top vs bottom decile.
  NgramDensityReport density =
      ngram_density_report(tweet_tokens, relevance.top_ids, relevance.bottom_ids,
                           ctx.config.report_bins, ctx.config.ngram_stat);
  std::string density_csv = "group,bin_lo,bin_hi,density\n";
  for (std::size_t b = 0; b + 1 < density.edges.size(); ++b)
    density_csv += csv_row({"top", format_double(density.edges[b]),
                            format_double(density.edges[b + 1]),
                            format_double(density.top_density[b])});
  for (std::size_t b = 0; b + 1 < density.edges.size(); ++b)
    density_csv += csv_row({"bottom", format_double(density.edges[b]),
                            format_double(density.edges[b + 1]),
                            format_double(density.bottom_density[b])});
  ctx.write_artifact(Stage::report, "report/ngram_density.csv", density_csv);

  auto assoc = term_association(tweet_tokens, relevance.top_ids, relevance.bottom_ids);
  std::string assoc_csv = "term,c_rel,c_irrel,precision,assoc\n";
  for (const auto& row : assoc)
    assoc_csv += csv_row({row.term, std::to_string(row.c_rel), std::to_string(row.c_irrel),
                          format_double(row.precision), format_double(row.association)});
  ctx.write_artifact(Stage::report, "report/term_association.csv", assoc_csv);

  TopicTimeline timeline = topic_timeline(tweets, tweet_dominant, tweet_topics,
                                          ctx.config.timeline_zero_fill);
  std::string timeline_csv = "date,topic,count\n";
  for (const auto& cell : timeline.cells)
    timeline_csv += csv_row({cell.date, std::to_string(cell.topic),
                             std::to_string(cell.count)});
  ctx.write_artifact(Stage::report, "report/timeline.csv", timeline_csv);

  auto write_geo = [&](const GeoBinReport& geo, const std::string& rel) {
    std::string csv = "bin,topic,count\n";
    for (const auto& bin : geo.bins)
      for (const auto& [topic, count] : bin.topic_counts)
        csv += csv_row({bin.key, std::to_string(topic), std::to_string(count)});
    ctx.write_artifact(Stage::report, rel, csv);
  };
  write_geo(geo_aggregate_grid(tweets, tweet_dominant), "report/geo.csv");
  write_geo(geo_aggregate_postcode(submissions, sub_dominant), "report/geo_submissions.csv");

  // Fig.-1-style 2D projection over both corpora in one shared map.
  EmbeddingMatrix tweet_emb = load_embedding_matrix(ctx.artifact("embed/tweets.emb"));
  EmbeddingMatrix sub_emb = load_embedding_matrix(ctx.artifact("embed/submissions.emb"));
  if (tweet_emb.backend_id != sub_emb.backend_id || tweet_emb.dim != sub_emb.dim)
    throw Error("report: tweet and submission embeddings are incompatible");
  EmbeddingMatrix merged;
  merged.backend_id = tweet_emb.backend_id;
  merged.dim = tweet_emb.dim;
  std::vector<char> kinds;
  {
    std::size_t i = 0, j = 0;
    auto push_row = [&](const EmbeddingMatrix& m, std::size_t r, char kind) {
      merged.doc_ids.push_back(m.doc_ids[r]);
      auto row = m.row(r);
      merged.data.insert(merged.data.end(), row.begin(), row.end());
      kinds.push_back(kind);
    };
    while (i < tweet_emb.rows() || j < sub_emb.rows()) {
      if (j >= sub_emb.rows() ||
          (i < tweet_emb.rows() && tweet_emb.doc_ids[i] <= sub_emb.doc_ids[j]))
        push_row(tweet_emb, i++, 't');
      else
        push_row(sub_emb, j++, 's');
    }
  }
  ProjectionResult proj = pca_projection(merged);
  std::string proj_csv = "doc_id,kind,x,y\n";
  for (std::size_t r = 0; r < merged.rows(); ++r)
    proj_csv += csv_row({merged.doc_ids[r], kinds[r] == 't' ? "tweet" : "submission",
                         format_double(proj.coords[r][0]),
                         format_double(proj.coords[r][1])});
  ctx.write_artifact(Stage::report, "report/projection.csv", proj_csv);
}

}  // namespace

RunResult run_pipeline(const PipelineConfig& config, const std::set<Stage>& stages) {
  config.validate(stages);
  StageContext ctx(config);

  RunResult result;
  for (const auto& [stage, deps] : stage_dependencies()) {
    if (!stages.count(stage)) continue;
    for (Stage dep : deps) {
      if (!ctx.has_artifact(stage_marker(dep)))
        throw Error("missing stage: " + std::string(stage_name(dep)));
    }
    switch (stage) {
      case Stage::ingest: run_ingest(ctx); break;
      case Stage::prep: run_prep(ctx); break;
      case Stage::topics: run_topics(ctx); break;
      case Stage::keywords: run_keywords(ctx); break;
      case Stage::embed: run_embed(ctx); break;
      case Stage::relevance: run_relevance(ctx); break;
      case Stage::report: run_report(ctx); break;
    }
    ctx.finish_stage();
    result.stages_run.push_back(stage);
  }
  result.manifest_path = (ctx.out / "manifest.json").string();
  return result;
}

}  // namespace floodlens
