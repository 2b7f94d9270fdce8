#include "floodlens/corpus.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "floodlens/util.hpp"

namespace floodlens {

using nlohmann::json;

const char* category_name(SubmitterCategory c) {
  switch (c) {
    case SubmitterCategory::resident: return "resident";
    case SubmitterCategory::business: return "business";
    case SubmitterCategory::emergency: return "emergency";
    case SubmitterCategory::government: return "government";
    case SubmitterCategory::academic: return "academic";
    case SubmitterCategory::organisation: return "organisation";
    case SubmitterCategory::other: return "other";
  }
  return "other";
}

SubmitterCategory category_from_name(std::string_view name, bool* known) {
  static const std::pair<const char*, SubmitterCategory> table[] = {
      {"resident", SubmitterCategory::resident},
      {"business", SubmitterCategory::business},
      {"emergency", SubmitterCategory::emergency},
      {"government", SubmitterCategory::government},
      {"academic", SubmitterCategory::academic},
      {"organisation", SubmitterCategory::organisation},
      {"other", SubmitterCategory::other},
  };
  for (const auto& [n, c] : table) {
    if (name == n) {
      if (known) *known = true;
      return c;
    }
  }
  if (known) *known = false;
  return SubmitterCategory::other;
}

Corpus Corpus::build(std::vector<Tweet> tweets, std::vector<Submission> submissions,
                     std::vector<std::string> source_paths) {
  Corpus c;
  c.tweets = std::move(tweets);
  c.submissions = std::move(submissions);
  c.source_paths = std::move(source_paths);
  std::sort(c.tweets.begin(), c.tweets.end(),
            [](const Tweet& a, const Tweet& b) { return a.id < b.id; });
  std::sort(c.submissions.begin(), c.submissions.end(),
            [](const Submission& a, const Submission& b) { return a.id < b.id; });
  return c;
}

namespace {

bool parse_tweet_line(const std::string& line, Tweet* out, std::string* why) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    *why = "not a JSON object";
    return false;
  }
  for (const char* field : {"id", "created_at", "user_id", "text"}) {
    if (!j.contains(field) || !j[field].is_string()) {
      *why = std::string("missing or non-string \"") + field + "\"";
      return false;
    }
  }
  Tweet t;
  t.id = j["id"].get<std::string>();
  t.user_id = j["user_id"].get<std::string>();
  t.text = j["text"].get<std::string>();
  if (t.id.empty()) {
    *why = "empty id";
    return false;
  }
  if (trim(t.text).empty()) {
    *why = "empty text";
    return false;
  }
  if (!parse_utc_timestamp(j["created_at"].get<std::string>(), &t.created_at)) {
    *why = "created_at is not YYYY-MM-DDTHH:MM:SSZ";
    return false;
  }
  bool has_lat = j.contains("lat"), has_lon = j.contains("lon");
  if (has_lat != has_lon) {
    *why = "lat/lon must be present together";
    return false;
  }
  if (has_lat) {
    if (!j["lat"].is_number() || !j["lon"].is_number()) {
      *why = "non-numeric lat/lon";
      return false;
    }
    t.geo = GeoPoint{j["lat"].get<double>(), j["lon"].get<double>()};
  }
  if (j.contains("media")) {
    if (!j["media"].is_array()) {
      *why = "media is not an array";
      return false;
    }
    for (const auto& m : j["media"]) {
      if (!m.is_string()) {
        *why = "media entry is not a string";
        return false;
      }
      t.media_refs.push_back(m.get<std::string>());
    }
  }
  *out = std::move(t);
  return true;
}

}  // namespace

TweetLoadResult load_tweets(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("load_tweets: cannot open " + path);

  TweetLoadResult result;
  std::unordered_set<std::string> seen_ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;  // blank lines are not records
    Tweet t;
    std::string why;
    if (!parse_tweet_line(line, &t, &why)) {
      result.report.skipped++;
      result.report.diagnostics.push_back(
          "line " + std::to_string(line_no) + ": skipped (" + why + ")");
      continue;
    }
    if (!seen_ids.insert(t.id).second) {
      throw Error("load_tweets: duplicate id \"" + t.id + "\" at line " +
                  std::to_string(line_no));
    }
    result.tweets.push_back(std::move(t));
    result.report.loaded++;
  }
  if (in.bad()) throw Error("load_tweets: read error on " + path);
  return result;
}

SubmissionLoadResult load_submissions(const std::string& manifest_path) {
  std::string content = read_file(manifest_path);
  auto rows = parse_csv(content);
  if (rows.empty())
    throw Error("load_submissions: empty manifest " + manifest_path);

  const std::vector<std::string> expected = {"id",       "date",
                                             "category", "postcode",
                                             "attachment_count", "text_path"};
  if (rows[0] != expected)
    throw Error("load_submissions: unexpected manifest header in " + manifest_path);

  std::filesystem::path base = std::filesystem::path(manifest_path).parent_path();
  SubmissionLoadResult result;
  std::unordered_set<std::string> seen_ids;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    auto skip = [&](const std::string& why) {
      result.report.skipped++;
      result.report.diagnostics.push_back(
          "row " + std::to_string(r) + ": skipped (" + why + ")");
    };
    if (row.size() == 1 && row[0].empty()) continue;  // trailing blank line
    if (row.size() != expected.size()) {
      skip("wrong column count");
      continue;
    }
    Submission s;
    s.id = row[0];
    if (s.id.empty()) {
      skip("empty id");
      continue;
    }
    if (!parse_utc_date(row[1], &s.date)) {
      skip("date is not YYYY-MM-DD");
      continue;
    }
    bool known = false;
    s.category = category_from_name(row[2], &known);
    if (!known) {
      result.report.diagnostics.push_back(
          "row " + std::to_string(r) + ": unknown category \"" + row[2] +
          "\" mapped to other");
    }
    if (!row[3].empty()) {
      bool four_digits = row[3].size() == 4 &&
                         std::all_of(row[3].begin(), row[3].end(),
                                     [](char c) { return c >= '0' && c <= '9'; });
      if (four_digits) {
        s.postcode = row[3];
      } else {
        result.report.diagnostics.push_back(
            "row " + std::to_string(r) + ": malformed postcode \"" + row[3] +
            "\" dropped");
      }
    }
    try {
      std::size_t pos = 0;
      int count = std::stoi(row[4], &pos);
      if (pos != row[4].size() || count < 0) {
        skip("attachment_count is not a non-negative integer");
        continue;
      }
      s.attachment_count = count;
    } catch (const std::exception&) {
      skip("attachment_count is not a non-negative integer");
      continue;
    }
    std::filesystem::path text_path = base / row[5];
    std::ifstream text_in(text_path, std::ios::binary);
    if (!text_in) {
      skip("text file missing: " + text_path.string());
      continue;
    }
    std::ostringstream buf;
    buf << text_in.rdbuf();
    s.text = buf.str();
    if (trim(s.text).empty()) {
      skip("empty text file: " + text_path.string());
      continue;
    }
    if (!seen_ids.insert(s.id).second)
      throw Error("load_submissions: duplicate id \"" + s.id + "\" at row " +
                  std::to_string(r));
    result.submissions.push_back(std::move(s));
    result.report.loaded++;
  }
  return result;
}

ValidationReport validate_corpus(const Corpus& corpus) {
  ValidationReport report;
  std::set<std::string> seen;
  std::set<std::string> reported;
  auto check_id = [&](const std::string& id) {
    if (!seen.insert(id).second && reported.insert(id).second)
      report.duplicate_ids.push_back(id);
  };
  for (const auto& t : corpus.tweets) {
    check_id(t.id);
    if (trim(t.text).empty()) report.empty_text_ids.push_back(t.id);
    if (t.geo) {
      if (t.geo->lat < -90.0 || t.geo->lat > 90.0 || t.geo->lon < -180.0 ||
          t.geo->lon > 180.0) {
        report.geo_violations.push_back(t.id + ": lat=" + format_double(t.geo->lat) +
                                        " lon=" + format_double(t.geo->lon));
      }
    }
  }
  for (const auto& s : corpus.submissions) {
    check_id(s.id);
    if (trim(s.text).empty()) report.empty_text_ids.push_back(s.id);
  }
  return report;
}

std::string tweets_to_jsonl(const std::vector<Tweet>& tweets) {
  std::string out;
  for (const auto& t : tweets) {
    json j;
    j["id"] = t.id;
    j["created_at"] = format_utc_timestamp(t.created_at);
    j["user_id"] = t.user_id;
    j["text"] = t.text;
    if (t.geo) {
      j["lat"] = t.geo->lat;
      j["lon"] = t.geo->lon;
    }
    if (!t.media_refs.empty()) j["media"] = t.media_refs;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::string submissions_to_jsonl(const std::vector<Submission>& submissions) {
  std::string out;
  for (const auto& s : submissions) {
    json j;
    j["id"] = s.id;
    j["date"] = format_utc_date(s.date);
    j["category"] = category_name(s.category);
    if (s.postcode) j["postcode"] = *s.postcode;
    j["attachment_count"] = s.attachment_count;
    j["text"] = s.text;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<Submission> submissions_from_jsonl(const std::string& content) {
  std::vector<Submission> out;
  std::istringstream in(content);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw Error("submissions_from_jsonl: bad record at line " + std::to_string(line_no));
    Submission s;
    s.id = j.at("id").get<std::string>();
    if (!parse_utc_date(j.at("date").get<std::string>(), &s.date))
      throw Error("submissions_from_jsonl: bad date at line " + std::to_string(line_no));
    s.category = category_from_name(j.at("category").get<std::string>(), nullptr);
    if (j.contains("postcode")) s.postcode = j["postcode"].get<std::string>();
    s.attachment_count = j.at("attachment_count").get<int>();
    s.text = j.at("text").get<std::string>();
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace floodlens
