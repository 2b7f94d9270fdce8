// corpus.hpp -- the two source corpora (posts and inquiry submissions),
// their loaders and validation.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace floodlens {

struct GeoPoint {
  double lat = 0.0;
  double lon = 0.0;
};

struct Tweet {
  std::string id;
  std::int64_t created_at = 0;  // UTC epoch seconds
  std::string user_id;
  std::string text;
  std::optional<GeoPoint> geo;
  std::vector<std::string> media_refs;
};

enum class SubmitterCategory {
  resident,
  business,
  emergency,
  government,
  academic,
  organisation,
  other,
};

const char* category_name(SubmitterCategory c);
// Unknown names map to `other`; *known is set accordingly.
SubmitterCategory category_from_name(std::string_view name, bool* known);

struct Submission {
  std::string id;
  std::int64_t date = 0;  // UTC epoch days
  SubmitterCategory category = SubmitterCategory::other;
  std::optional<std::string> postcode;  // 4 digits when present
  std::string text;
  int attachment_count = 0;
};

// Both document kinds, each sorted by id. Immutable once built; safe to
// share across threads.
struct Corpus {
  std::vector<Tweet> tweets;
  std::vector<Submission> submissions;
  std::vector<std::string> source_paths;

  static Corpus build(std::vector<Tweet> tweets, std::vector<Submission> submissions,
                      std::vector<std::string> source_paths);
};

struct LoadReport {
  std::size_t loaded = 0;
  std::size_t skipped = 0;
  std::vector<std::string> diagnostics;
};

struct TweetLoadResult {
  std::vector<Tweet> tweets;  // file order
  LoadReport report;
};

struct SubmissionLoadResult {
  std::vector<Submission> submissions;  // manifest row order
  LoadReport report;
};

// One JSON object per line:
//   {"id": str, "created_at": "YYYY-MM-DDTHH:MM:SSZ", "user_id": str,
//    "text": str, "lat": float?, "lon": float?, "media": [str]?}
// Malformed lines are skipped with a line-numbered diagnostic; a duplicate
// id is fatal.
TweetLoadResult load_tweets(const std::string& path);

// Manifest CSV with header id,date,category,postcode,attachment_count,text_path.
// text_path is resolved relative to the manifest's directory. Rows whose text
// file is missing are skipped; unknown categories degrade to `other`.
SubmissionLoadResult load_submissions(const std::string& manifest_path);

struct ValidationReport {
  std::vector<std::string> duplicate_ids;
  std::vector<std::string> empty_text_ids;
  std::vector<std::string> geo_violations;  // "id: lat=... lon=..." entries

  bool clean() const {
    return duplicate_ids.empty() && empty_text_ids.empty() && geo_violations.empty();
  }
};

ValidationReport validate_corpus(const Corpus& corpus);

// Normalized artifact round-trip (sorted by id, canonical field order).
std::string tweets_to_jsonl(const std::vector<Tweet>& tweets);
std::string submissions_to_jsonl(const std::vector<Submission>& submissions);
std::vector<Submission> submissions_from_jsonl(const std::string& content);

}  // namespace floodlens
