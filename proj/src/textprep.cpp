#include "floodlens/textprep.hpp"

#include <algorithm>

#include "floodlens/util.hpp"

namespace floodlens {

namespace {

bool is_space_byte(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_word_byte(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
         (c >= '0' && c <= '9') || c == '_';
}

// Erases s[i..) up to the next whitespace byte.
std::size_t skip_to_space(const std::string& s, std::size_t i) {
  while (i < s.size() && !is_space_byte(s[i])) ++i;
  return i;
}

}  // namespace

std::string clean_text(std::string_view raw) {
  // 1. lowercase (ASCII)
  std::string s(raw);
  for (char& c : s)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');

  // 2. URLs: http://, https:// and www. consume up to whitespace
  std::string no_urls;
  no_urls.reserve(s.size());
  for (std::size_t i = 0; i < s.size();) {
    bool at_word_start = i == 0 || !is_word_byte(s[i - 1]);
    if (at_word_start &&
        (s.compare(i, 7, "http://") == 0 || s.compare(i, 8, "https://") == 0 ||
         s.compare(i, 4, "www.") == 0)) {
      i = skip_to_space(s, i);
    } else {
      no_urls += s[i++];
    }
  }

  // 3. @mentions: '@' plus the following word
  std::string no_mentions;
  no_mentions.reserve(no_urls.size());
  for (std::size_t i = 0; i < no_urls.size();) {
    if (no_urls[i] == '@') {
      ++i;
      while (i < no_urls.size() && is_word_byte(no_urls[i])) ++i;
    } else {
      no_mentions += no_urls[i++];
    }
  }

  // 4-6. strip '#', drop digits, drop anything that is not a letter,
  // whitespace or '.'
  std::string kept;
  kept.reserve(no_mentions.size());
  for (char c : no_mentions) {
    if (c == '#') continue;
    if (c >= '0' && c <= '9') continue;
    if ((c >= 'a' && c <= 'z') || c == '.' || is_space_byte(c)) kept += c;
  }

  // 7-8. collapse whitespace runs to single spaces, trim
  std::string out;
  out.reserve(kept.size());
  bool pending_space = false;
  for (char c : kept) {
    if (is_space_byte(c)) {
      pending_space = !out.empty();
    } else {
      if (pending_space) out += ' ';
      pending_space = false;
      out += c;
    }
  }
  return out;
}

std::vector<std::vector<std::string>> tokenize_sentences(std::string_view clean,
                                                         const StopwordSet& stopwords) {
  std::vector<std::vector<std::string>> sentences;
  for (const auto& sentence_text : split(clean, '.')) {
    std::vector<std::string> tokens;
    for (const auto& tok : split(sentence_text, ' ')) {
      if (tok.empty()) continue;
      if (tok.size() > 17) continue;  // over 17 letters
      if (stopwords.count(tok)) continue;
      tokens.push_back(tok);
    }
    if (!tokens.empty()) sentences.push_back(std::move(tokens));
  }
  return sentences;
}

std::map<std::string, std::int64_t> extract_ngrams(
    std::span<const std::vector<std::string>> sentences, int max_n) {
  std::map<std::string, std::int64_t> counts;
  for (const auto& sentence : sentences) {
    for (std::size_t start = 0; start < sentence.size(); ++start) {
      std::string gram;
      for (int n = 1; n <= max_n && start + n <= sentence.size(); ++n) {
        if (n > 1) gram += ' ';
        gram += sentence[start + n - 1];
        counts[gram] += 1;
      }
    }
  }
  return counts;
}

std::int64_t TokenDoc::total_ngrams() const {
  std::int64_t total = 0;
  for (const auto& [gram, count] : ngram_counts) total += count;
  return total;
}

TokenDoc tokenize_document(const CleanDoc& doc, const StopwordSet& stopwords,
                           int max_n) {
  TokenDoc out;
  out.doc_id = doc.doc_id;
  out.sentences = tokenize_sentences(doc.text, stopwords);
  out.ngram_counts = extract_ngrams(out.sentences, max_n);
  return out;
}

std::pair<Vocabulary, std::vector<BowDoc>> build_bow(std::span<const TokenDoc> docs,
                                                     std::uint32_t min_df,
                                                     double max_df_frac,
                                                     PrepReport* report) {
  if (min_df < 1) throw Error("build_bow: min_df must be >= 1");
  if (!(max_df_frac > 0.0 && max_df_frac <= 1.0))
    throw Error("build_bow: max_df_frac must be in (0, 1]");

  const double df_ceiling = max_df_frac * static_cast<double>(docs.size());

  // Document frequency over unigrams.
  std::map<std::string, std::uint32_t> df;
  for (const auto& doc : docs) {
    std::unordered_set<std::string_view> seen;
    for (const auto& sentence : doc.sentences)
      for (const auto& tok : sentence) seen.insert(tok);
    for (auto tok : seen) df[std::string(tok)] += 1;
  }

  Vocabulary vocab;
  vocab.total_docs = docs.size();
  for (const auto& [term, d] : df) {
    if (d < min_df) continue;
    if (static_cast<double>(d) > df_ceiling) continue;
    vocab.index[term] = static_cast<std::uint32_t>(vocab.terms.size());
    vocab.terms.push_back(term);
    vocab.df.push_back(d);
  }
  if (vocab.terms.empty())
    throw Error("build_bow: vocabulary is empty after df thresholds");

  std::vector<BowDoc> bows;
  std::size_t dropped = 0;
  for (const auto& doc : docs) {
    std::map<std::uint32_t, std::uint32_t> counts;
    for (const auto& sentence : doc.sentences) {
      for (const auto& tok : sentence) {
        auto it = vocab.index.find(tok);
        if (it != vocab.index.end()) counts[it->second] += 1;
      }
    }
    if (counts.empty()) {
      ++dropped;
      continue;
    }
    BowDoc bow;
    bow.doc_id = doc.doc_id;
    bow.counts.assign(counts.begin(), counts.end());
    bows.push_back(std::move(bow));
  }

  if (report) {
    report->docs_in = docs.size();
    report->docs_out = bows.size();
    report->dropped_empty = dropped;
    report->vocab_size = vocab.size();
  }
  return {std::move(vocab), std::move(bows)};
}

StopwordSet parse_stopwords(std::string_view content) {
  StopwordSet set;
  for (const auto& raw_line : split(content, '\n')) {
    std::string line = raw_line;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (!line.empty()) set.insert(line);
  }
  return set;
}

StopwordSet load_stopwords(const std::string& path) {
  return parse_stopwords(read_file(path));
}

}  // namespace floodlens
