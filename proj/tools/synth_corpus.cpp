// floodlens-synth -- deterministic synthetic two-corpus fixture generator.
//
// Emits a tweets JSONL file and a submissions directory (manifest CSV plus
// one text file per submission) shaped like a flood-event corpus: three
// topical vocabularies plus an off-topic one, a traffic peak during the
// event window, partial geolocation, and the usual short-post noise
// (mentions, hashtags, URLs, digits). Used to build the bundled test
// fixture; also handy for demo runs.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "floodlens/rng.hpp"
#include "floodlens/util.hpp"

namespace fl = floodlens;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::vector<std::string> kWeather = {
    "rain",     "flood",    "river",   "levee",   "rainfall", "storm",
    "water",    "rising",   "peak",    "warning", "forecast", "weather",
    "wind",     "tide",     "creek",   "catchment", "downpour", "deluge",
    "gauge",    "bureau"};
const std::vector<std::string> kRescue = {
    "rescue",   "evacuation", "shelter",   "volunteers", "donate",  "relief",
    "emergency", "helicopter", "stranded", "supplies",   "evacuate", "helping",
    "community", "support",    "recovery", "crews",      "sandbags", "appeal",
    "donations", "safety"};
const std::vector<std::string> kPolitics = {
    "government", "premier", "council",       "funding",  "inquiry",   "response",
    "failure",    "climate", "policy",        "election", "minister",  "budget",
    "blame",      "planning", "infrastructure", "resilience", "mitigation",
    "buyback",    "levy",    "reform"};
const std::vector<std::string> kNoise = {
    "song",      "remix",  "album",  "concert", "movie",  "episode", "trailer",
    "football",  "match",  "score",  "celebrity", "fashion", "recipe", "coffee",
    "holiday",   "beach",  "gaming", "stream",  "playlist", "ticket"};
const std::vector<std::string> kFiller = {
    "people", "homes", "roads", "town", "night", "morning", "help", "news",
    "photos", "area"};
const std::vector<std::string> kStopwords = {
    "the", "a", "of", "in", "to", "and", "is", "was", "for", "on", "with",
    "at", "this", "that", "are", "it"};
const std::vector<std::string> kTopicalTags = {"#nswfloods", "#floods", "#rainbomb",
                                               "#lismore"};
const std::vector<std::string> kNoiseTags = {"#nowplaying", "#fyp", "#weekend"};
const std::vector<std::string> kPostcodes = {"2480", "2470", "2478", "2460",
                                             "2440", "2000", "2750", "2756"};

std::string pick(fl::Xoshiro256ss& rng, const std::vector<std::string>& v) {
  return v[rng.next_below(static_cast<std::uint32_t>(v.size()))];
}

std::string sentence_words(fl::Xoshiro256ss& rng, const std::vector<std::string>& topic,
                           std::size_t min_len, std::size_t max_len) {
  const std::size_t len =
      min_len + rng.next_below(static_cast<std::uint32_t>(max_len - min_len + 1));
  std::string out;
  for (std::size_t i = 0; i < len; ++i) {
    if (i) out += ' ';
    const double roll = rng.next_double();
    if (roll < 0.65) out += pick(rng, topic);
    else if (roll < 0.90) out += pick(rng, kStopwords);
    else out += pick(rng, kFiller);
  }
  return out;
}

std::string random_token(fl::Xoshiro256ss& rng, std::size_t len) {
  std::string out;
  for (std::size_t i = 0; i < len; ++i)
    out += static_cast<char>('a' + rng.next_below(26));
  return out;
}

std::string make_tweet_text(fl::Xoshiro256ss& rng, const std::vector<std::string>& topic,
                            bool topical) {
  std::string text;
  if (rng.next_double() < 0.30) text += "@" + random_token(rng, 6) + " ";
  const std::size_t n_sentences = 1 + rng.next_below(3);
  for (std::size_t s = 0; s < n_sentences; ++s) {
    std::string sentence = sentence_words(rng, topic, 4, 10);
    if (rng.next_double() < 0.7) sentence[0] = static_cast<char>(sentence[0] - 'a' + 'A');
    text += sentence;
    text += rng.next_double() < 0.2 ? "!" : ".";
    text += " ";
  }
  if (rng.next_double() < 0.20)
    text += (rng.next_double() < 0.5 ? std::string("2022 ") : std::string("100mm "));
  if (rng.next_double() < 0.40)
    text += pick(rng, topical ? kTopicalTags : kNoiseTags) + " ";
  if (rng.next_double() < 0.25) text += "https://t.co/" + random_token(rng, 8);
  return fl::trim(text);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"generate a synthetic two-corpus fixture"};
  std::string out_dir;
  std::size_t n_tweets = 940;
  std::size_t n_submissions = 60;
  std::uint64_t seed = 20220228;
  app.add_option("--out", out_dir, "output directory")->required();
  app.add_option("--tweets", n_tweets, "number of tweets");
  app.add_option("--submissions", n_submissions, "number of submissions");
  app.add_option("--seed", seed, "generator seed");
  CLI11_PARSE(app, argc, argv);

  fs::create_directories(fs::path(out_dir) / "submissions" / "txt");
  fl::Xoshiro256ss rng(seed);

  std::int64_t window_start = 0;
  fl::parse_utc_timestamp("2022-02-01T00:00:00Z", &window_start);

  const std::vector<const std::vector<std::string>*> topics = {&kWeather, &kRescue,
                                                               &kPolitics};
  std::string tweets_jsonl;
  for (std::size_t i = 0; i < n_tweets; ++i) {
    char id[16];
    std::snprintf(id, sizeof(id), "t%05zu", i + 1);

    const double cls = rng.next_double();
    const bool topical = cls < 0.65;
    const std::vector<std::string>* vocab =
        topical ? topics[rng.next_below(3)] : &kNoise;

    json j;
    j["id"] = id;
    // Peak of traffic during the event window (days 21-38), long tail after.
    std::int64_t day = rng.next_double() < 0.6
                           ? 21 + static_cast<std::int64_t>(rng.next_below(18))
                           : static_cast<std::int64_t>(rng.next_below(89));
    j["created_at"] =
        fl::format_utc_timestamp(window_start + day * 86400 +
                                 static_cast<std::int64_t>(rng.next_below(86400)));
    j["user_id"] = "u" + std::to_string(1 + rng.next_below(400));
    if (i % 97 == 42) {
      j["text"] = "https://t.co/" + random_token(rng, 8);  // cleans to empty
    } else {
      j["text"] = make_tweet_text(rng, *vocab, topical);
    }
    if (rng.next_double() < 0.10) {
      double lat = -34.0 + rng.next_normal() * 2.0;
      double lon = 151.0 + rng.next_normal() * 1.5;
      j["lat"] = std::min(std::max(lat, -37.5), -28.0);
      j["lon"] = std::min(std::max(lon, 147.0), 154.0);
    }
    if (rng.next_double() < 0.15)
      j["media"] = {"https://pic.example/" + random_token(rng, 10)};
    tweets_jsonl += j.dump();
    tweets_jsonl += '\n';

    if (i == 137) tweets_jsonl += "{\"id\": \"broken1\", \"user_id\": \"u1\"}\n";
    if (i == 523) tweets_jsonl += "this line is not JSON at all\n";
  }
  fl::write_file((fs::path(out_dir) / "tweets.jsonl").string(), tweets_jsonl);

  std::int64_t may_start = 0;
  fl::parse_utc_date("2022-05-01", &may_start);
  const std::vector<std::string> categories = {"resident", "resident", "resident",
                                               "resident", "business", "emergency",
                                               "government", "academic", "organisation"};
  std::string manifest = "id,date,category,postcode,attachment_count,text_path\n";
  for (std::size_t i = 0; i < n_submissions; ++i) {
    char id[16];
    std::snprintf(id, sizeof(id), "s%03zu", i + 1);
    const std::string rel = "txt/" + std::string(id) + ".txt";

    const std::vector<std::string>* main_topic = topics[rng.next_below(3)];
    std::string text;
    const std::size_t n_sentences = 8 + rng.next_below(8);
    for (std::size_t s = 0; s < n_sentences; ++s) {
      const std::vector<std::string>* vocab =
          rng.next_double() < 0.75 ? main_topic : topics[rng.next_below(3)];
      std::string sentence = sentence_words(rng, *vocab, 6, 14);
      sentence[0] = static_cast<char>(sentence[0] - 'a' + 'A');
      text += sentence + ". ";
    }
    fl::write_file((fs::path(out_dir) / "submissions" / rel).string(),
                   fl::trim(text) + "\n");

    std::string category =
        i == 17 ? "farmer" : categories[rng.next_below(
                                 static_cast<std::uint32_t>(categories.size()))];
    std::string postcode =
        i == 29 ? "24X0"
                : (rng.next_double() < 0.15 ? std::string() : pick(rng, kPostcodes));
    manifest += fl::csv_row(
        {id, fl::format_utc_date(may_start + static_cast<std::int64_t>(rng.next_below(61))),
         category, postcode, std::to_string(rng.next_below(4)), rel});
  }
  fl::write_file((fs::path(out_dir) / "submissions" / "manifest.csv").string(), manifest);

  std::cerr << "wrote " << n_tweets << " tweets (+2 malformed lines) and "
            << n_submissions << " submissions under " << out_dir << "\n";
  return 0;
}
