#include "floodlens/keywords.hpp"

#include <algorithm>

#include "floodlens/util.hpp"

namespace floodlens {

TopicNgramProfile topic_ngram_counts(std::span<const TokenDoc> docs,
                                     std::span<const std::uint32_t> dominant_topics,
                                     std::uint32_t num_topics) {
  if (docs.size() != dominant_topics.size())
    throw Error("topic_ngram_counts: docs and dominant_topics differ in length");
  TopicNgramProfile profile;
  profile.counts.resize(num_topics);
  for (std::size_t d = 0; d < docs.size(); ++d) {
    const std::uint32_t t = dominant_topics[d];
    if (t >= num_topics) throw Error("topic_ngram_counts: topic id out of range");
    auto& row = profile.counts[t];
    for (const auto& [gram, count] : docs[d].ngram_counts) row[gram] += count;
  }
  return profile;
}

RcaTable rca_scores(const TopicNgramProfile& profile) {
  const std::uint32_t t_count = profile.num_topics();

  std::vector<double> topic_totals(t_count, 0.0);
  std::map<std::string, double> global_freq;  // sum_t f_ti
  double grand_total = 0.0;
  for (std::uint32_t t = 0; t < t_count; ++t) {
    for (const auto& [gram, f] : profile.counts[t]) {
      if (f < 0) throw Error("rca_scores: negative frequency");
      topic_totals[t] += static_cast<double>(f);
      global_freq[gram] += static_cast<double>(f);
      grand_total += static_cast<double>(f);
    }
  }
  if (grand_total <= 0.0) throw Error("rca_scores: profile has no N-gram occurrences");

  RcaTable table;
  table.rows.resize(t_count);
  for (std::uint32_t t = 0; t < t_count; ++t) {
    if (topic_totals[t] <= 0.0) {
      table.diagnostics.push_back("topic " + std::to_string(t) +
                                  " has no N-grams; RCA row omitted");
      continue;
    }
    for (const auto& [gram, f] : profile.counts[t]) {
      const double global = global_freq[gram];
      if (global <= 0.0) continue;  // no evidence anywhere: omitted, not zero
      const double share_in_topic = static_cast<double>(f) / topic_totals[t];
      const double share_overall = global / grand_total;
      table.rows[t][gram] = RcaEntry{f, share_in_topic / share_overall};
    }
  }
  return table;
}

int ngram_length(std::string_view ngram) {
  if (ngram.empty()) return 0;
  int n = 1;
  for (char c : ngram)
    if (c == ' ') ++n;
  return n;
}

std::vector<std::vector<RankedKeyword>> rank_keywords(const RcaTable& table,
                                                      std::size_t top_k,
                                                      std::int64_t min_count) {
  if (top_k < 1) throw Error("rank_keywords: top_k must be >= 1");
  std::vector<std::vector<RankedKeyword>> ranked(table.rows.size());
  for (std::size_t t = 0; t < table.rows.size(); ++t) {
    auto& list = ranked[t];
    for (const auto& [gram, entry] : table.rows[t]) {
      if (entry.frequency < min_count) continue;
      list.push_back({gram, ngram_length(gram), entry.frequency, entry.rca});
    }
    std::sort(list.begin(), list.end(), [](const RankedKeyword& a, const RankedKeyword& b) {
      if (a.length != b.length) return a.length > b.length;
      if (a.rca != b.rca) return a.rca > b.rca;
      return a.ngram < b.ngram;
    });
    if (list.size() > top_k) list.resize(top_k);
  }
  return ranked;
}

}  // namespace floodlens
