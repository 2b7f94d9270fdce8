// textprep.hpp -- two-stage preprocessing: byte-level text cleaning, then
// sentence-scoped tokenization with N-gram extraction, plus the bag-of-words
// build that feeds topic modelling.
//
// Cleaning and tokenization are pure byte-level transforms (no locale, no
// wide chars), so identical input bytes give identical output bytes on every
// platform. Non-ASCII bytes are treated as symbols and removed.

#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace floodlens {

struct CleanDoc {
  std::string doc_id;
  std::string text;  // lowercase letters, single spaces, periods only
};

struct TokenDoc {
  std::string doc_id;
  std::vector<std::vector<std::string>> sentences;
  // N-grams (tokens joined by one space) for N = 1..max_n, never crossing a
  // sentence boundary. Ordered map so iteration order is reproducible.
  std::map<std::string, std::int64_t> ngram_counts;

  std::int64_t total_ngrams() const;
};

struct Vocabulary {
  std::vector<std::string> terms;                       // index -> term
  std::unordered_map<std::string, std::uint32_t> index; // term -> index
  std::vector<std::uint32_t> df;                        // per term
  std::size_t total_docs = 0;

  std::size_t size() const { return terms.size(); }
};

struct BowDoc {
  std::string doc_id;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> counts;  // (term, count), term ascending
};

struct PrepReport {
  std::size_t docs_in = 0;
  std::size_t docs_out = 0;
  std::size_t dropped_empty = 0;
  std::size_t vocab_size = 0;
};

using StopwordSet = std::unordered_set<std::string>;

// Applies, in order: lowercase; remove URLs; remove @mentions; strip '#'
// keeping the tag word; remove digits; remove everything that is not a
// letter, whitespace or '.'; collapse whitespace; trim.
std::string clean_text(std::string_view raw);

// Sentence split on '.', token split on spaces, stopwords and tokens longer
// than 17 characters dropped, empty sentences dropped.
std::vector<std::vector<std::string>> tokenize_sentences(std::string_view clean,
                                                         const StopwordSet& stopwords);

std::map<std::string, std::int64_t> extract_ngrams(
    std::span<const std::vector<std::string>> sentences, int max_n = 5);

TokenDoc tokenize_document(const CleanDoc& doc, const StopwordSet& stopwords,
                           int max_n = 5);

// Unigram vocabulary restricted to document frequency in [min_df,
// max_df_frac * D]. Documents whose bag becomes empty are dropped and
// counted in the report. Terms are indexed in lexicographic order.
std::pair<Vocabulary, std::vector<BowDoc>> build_bow(std::span<const TokenDoc> docs,
                                                     std::uint32_t min_df,
                                                     double max_df_frac,
                                                     PrepReport* report = nullptr);

// One term per line; '#' starts a comment.
StopwordSet load_stopwords(const std::string& path);
StopwordSet parse_stopwords(std::string_view content);

}  // namespace floodlens
