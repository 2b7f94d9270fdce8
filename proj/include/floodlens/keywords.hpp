// keywords.hpp -- revealed-comparative-advantage scoring of topic N-grams
// and the length-first keyword ranking.

#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "floodlens/textprep.hpp"

namespace floodlens {

struct TopicNgramProfile {
  // counts[t][ngram] = total frequency of the N-gram over documents whose
  // dominant topic is t.
  std::vector<std::map<std::string, std::int64_t>> counts;

  std::uint32_t num_topics() const { return static_cast<std::uint32_t>(counts.size()); }
};

TopicNgramProfile topic_ngram_counts(std::span<const TokenDoc> docs,
                                     std::span<const std::uint32_t> dominant_topics,
                                     std::uint32_t num_topics);

struct RcaEntry {
  std::int64_t frequency = 0;  // f_ti
  double rca = 0.0;
};

struct RcaTable {
  // rows[t][ngram]; N-grams with zero global frequency are omitted, and a
  // topic with no N-grams at all has an empty row plus a diagnostic.
  std::vector<std::map<std::string, RcaEntry>> rows;
  std::vector<std::string> diagnostics;
};

// RCA_ti = (f_ti / sum_k f_tk) / (sum_t f_ti / sum_t sum_k f_tk)
RcaTable rca_scores(const TopicNgramProfile& profile);

struct RankedKeyword {
  std::string ngram;
  int length = 0;  // token count N
  std::int64_t frequency = 0;
  double rca = 0.0;
};

// Per topic, ordered by token length N descending (5 -> 1), then RCA
// descending, then lexicographic. Candidates below min_count are dropped.
std::vector<std::vector<RankedKeyword>> rank_keywords(const RcaTable& table,
                                                      std::size_t top_k,
                                                      std::int64_t min_count = 3);

int ngram_length(std::string_view ngram);

}  // namespace floodlens
