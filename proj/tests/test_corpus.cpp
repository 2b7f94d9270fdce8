#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "floodlens/corpus.hpp"
#include "floodlens/util.hpp"
#include "test_helpers.hpp"

using namespace floodlens;
namespace fs = std::filesystem;

namespace {

std::string write_fixture(const fltest::TempDir& dir, const std::string& name,
                          const std::string& content) {
  const std::string path = (dir.path() / name).string();
  write_file(path, content);
  return path;
}

const char* kGoodTweet =
    R"({"id": "t1", "created_at": "2022-02-28T10:00:00Z", "user_id": "u1", "text": "rain"})";

}  // namespace

TEST_CASE("load_tweets: empty file gives empty list and no skips") {
  fltest::TempDir dir("corpus_empty");
  auto result = load_tweets(write_fixture(dir, "tweets.jsonl", ""));
  CHECK(result.tweets.empty());
  CHECK(result.report.skipped == 0);
}

TEST_CASE("load_tweets: valid lines pass through in file order") {
  fltest::TempDir dir("corpus_valid");
  std::string content =
      R"({"id": "t2", "created_at": "2022-02-28T10:00:00Z", "user_id": "u1", "text": "b"})"
      "\n"
      R"({"id": "t1", "created_at": "2022-02-28T10:00:01Z", "user_id": "u2", "text": "a", "lat": -28.8, "lon": 153.3})"
      "\n"
      R"({"id": "t3", "created_at": "2022-02-28T10:00:02Z", "user_id": "u3", "text": "c", "media": ["https://x/1"]})"
      "\n";
  auto result = load_tweets(write_fixture(dir, "tweets.jsonl", content));
  REQUIRE(result.tweets.size() == 3);
  CHECK(result.report.loaded == 3);
  CHECK(result.tweets[0].id == "t2");  // file order preserved
  CHECK(result.tweets[1].id == "t1");
  REQUIRE(result.tweets[1].geo.has_value());
  CHECK(result.tweets[1].geo->lat == doctest::Approx(-28.8));
  CHECK(result.tweets[2].media_refs.size() == 1);
}

TEST_CASE("load_tweets: malformed line skipped with line-number diagnostic") {
  fltest::TempDir dir("corpus_skip");
  std::string content = std::string(kGoodTweet) + "\n" +
                        R"({"id": "t2", "created_at": "2022-02-28T10:00:00Z", "user_id": "u2"})" +
                        "\n" +
                        R"({"id": "t3", "created_at": "2022-02-28T11:00:00Z", "user_id": "u3", "text": "x"})" +
                        "\n";
  auto result = load_tweets(write_fixture(dir, "tweets.jsonl", content));
  CHECK(result.tweets.size() == 2);
  CHECK(result.report.skipped == 1);
  REQUIRE(result.report.diagnostics.size() == 1);
  CHECK(result.report.diagnostics[0].find("line 2") != std::string::npos);
  CHECK(result.report.loaded + result.report.skipped == 3);
}

TEST_CASE("load_tweets: schema violations that must be skipped") {
  fltest::TempDir dir("corpus_bad");
  std::string content =
      "not json\n"
      R"({"id": "t1", "created_at": "2022-13-01T00:00:00Z", "user_id": "u", "text": "x"})" "\n"
      R"({"id": "t2", "created_at": "2022-02-28T10:00:00Z", "user_id": "u", "text": "   "})" "\n"
      R"({"id": "t3", "created_at": "2022-02-28T10:00:00Z", "user_id": "u", "text": "x", "lat": 1.0})" "\n";
  auto result = load_tweets(write_fixture(dir, "tweets.jsonl", content));
  CHECK(result.tweets.empty());
  CHECK(result.report.skipped == 4);
}

TEST_CASE("load_tweets: duplicate id is fatal") {
  fltest::TempDir dir("corpus_dup");
  std::string content = std::string(kGoodTweet) + "\n" + kGoodTweet + "\n";
  CHECK_THROWS_WITH_AS(load_tweets(write_fixture(dir, "t.jsonl", content)),
                       doctest::Contains("duplicate id"), Error);
}

TEST_CASE("load_tweets: unreadable file is fatal") {
  CHECK_THROWS_AS(load_tweets("/nonexistent/path/tweets.jsonl"), Error);
}

TEST_CASE("load_submissions: header-only manifest gives empty list") {
  fltest::TempDir dir("subs_empty");
  auto path = write_fixture(dir, "manifest.csv",
                            "id,date,category,postcode,attachment_count,text_path\n");
  auto result = load_submissions(path);
  CHECK(result.submissions.empty());
}

TEST_CASE("load_submissions: fields pass through") {
  fltest::TempDir dir("subs_ok");
  fs::create_directories(dir.path() / "txt");
  write_fixture(dir, "txt/s1.txt", "We lost power for a week.\n");
  auto path = write_fixture(dir, "manifest.csv",
                            "id,date,category,postcode,attachment_count,text_path\n"
                            "s1,2022-05-10,resident,2480,2,txt/s1.txt\n");
  auto result = load_submissions(path);
  REQUIRE(result.submissions.size() == 1);
  const auto& s = result.submissions[0];
  CHECK(s.id == "s1");
  CHECK(s.category == SubmitterCategory::resident);
  REQUIRE(s.postcode.has_value());
  CHECK(*s.postcode == "2480");
  CHECK(s.attachment_count == 2);
  CHECK(s.text.find("lost power") != std::string::npos);
  CHECK(format_utc_date(s.date) == "2022-05-10");
}

TEST_CASE("load_submissions: unknown category degrades to other with diagnostic") {
  fltest::TempDir dir("subs_cat");
  write_fixture(dir, "s1.txt", "text\n");
  auto path = write_fixture(dir, "manifest.csv",
                            "id,date,category,postcode,attachment_count,text_path\n"
                            "s1,2022-05-10,farmer,,0,s1.txt\n");
  auto result = load_submissions(path);
  REQUIRE(result.submissions.size() == 1);
  CHECK(result.submissions[0].category == SubmitterCategory::other);
  CHECK(!result.submissions[0].postcode.has_value());
  REQUIRE(result.report.diagnostics.size() == 1);
  CHECK(result.report.diagnostics[0].find("farmer") != std::string::npos);
}

TEST_CASE("load_submissions: missing text file skips the row") {
  fltest::TempDir dir("subs_missing");
  write_fixture(dir, "s1.txt", "text\n");
  auto path = write_fixture(dir, "manifest.csv",
                            "id,date,category,postcode,attachment_count,text_path\n"
                            "s1,2022-05-10,resident,,0,s1.txt\n"
                            "s2,2022-05-11,resident,,0,absent.txt\n");
  auto result = load_submissions(path);
  CHECK(result.submissions.size() == 1);
  CHECK(result.report.skipped == 1);
  CHECK(result.report.diagnostics[0].find("text file missing") != std::string::npos);
}

TEST_CASE("load_submissions: malformed postcode dropped, bad date skips row") {
  fltest::TempDir dir("subs_post");
  write_fixture(dir, "s1.txt", "text\n");
  auto path = write_fixture(dir, "manifest.csv",
                            "id,date,category,postcode,attachment_count,text_path\n"
                            "s1,2022-05-10,resident,24X0,0,s1.txt\n"
                            "s2,not-a-date,resident,2480,0,s1.txt\n");
  auto result = load_submissions(path);
  REQUIRE(result.submissions.size() == 1);
  CHECK(!result.submissions[0].postcode.has_value());
  CHECK(result.report.skipped == 1);
}

TEST_CASE("validate_corpus: clean corpus yields empty report") {
  Tweet t;
  t.id = "t1";
  t.text = "x";
  Submission s;
  s.id = "s1";
  s.text = "y";
  Corpus corpus = Corpus::build({t}, {s}, {});
  CHECK(validate_corpus(corpus).clean());
}

TEST_CASE("validate_corpus: out-of-range geo reported") {
  Tweet t;
  t.id = "t1";
  t.text = "x";
  t.geo = GeoPoint{123.0, 10.0};
  Corpus corpus = Corpus::build({t}, {}, {});
  auto report = validate_corpus(corpus);
  REQUIRE(report.geo_violations.size() == 1);
  CHECK(report.geo_violations[0].find("t1") != std::string::npos);
}

TEST_CASE("validate_corpus: duplicate id across kinds reported once") {
  Tweet t;
  t.id = "x1";
  t.text = "a";
  Submission s;
  s.id = "x1";
  s.text = "b";
  Corpus corpus = Corpus::build({t}, {s}, {});
  auto report = validate_corpus(corpus);
  REQUIRE(report.duplicate_ids.size() == 1);
  CHECK(report.duplicate_ids[0] == "x1");
}

TEST_CASE("corpus build sorts by doc id; load is deterministic") {
  fltest::TempDir dir("corpus_det");
  std::string content =
      R"({"id": "t2", "created_at": "2022-02-28T10:00:00Z", "user_id": "u1", "text": "b"})"
      "\n"
      R"({"id": "t1", "created_at": "2022-02-28T10:00:01Z", "user_id": "u2", "text": "a"})"
      "\n";
  auto path = write_fixture(dir, "tweets.jsonl", content);
  auto r1 = load_tweets(path);
  auto r2 = load_tweets(path);
  Corpus c1 = Corpus::build(r1.tweets, {}, {});
  Corpus c2 = Corpus::build(r2.tweets, {}, {});
  CHECK(c1.tweets[0].id == "t1");
  CHECK(tweets_to_jsonl(c1.tweets) == tweets_to_jsonl(c2.tweets));
}

TEST_CASE("submissions jsonl round trip") {
  Submission s;
  s.id = "s1";
  parse_utc_date("2022-05-10", &s.date);
  s.category = SubmitterCategory::emergency;
  s.postcode = "2480";
  s.text = "line one\nline two";
  s.attachment_count = 1;
  auto round = submissions_from_jsonl(submissions_to_jsonl({s}));
  REQUIRE(round.size() == 1);
  CHECK(round[0].id == s.id);
  CHECK(round[0].date == s.date);
  CHECK(round[0].category == s.category);
  CHECK(round[0].postcode == s.postcode);
  CHECK(round[0].text == s.text);
}
