// Shared helpers for the test suites: scratch directories, planted-topic
// corpus generation (the LDA oracle), permutation matching, and small
// statistics used by the acceptance criteria.

#pragma once

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "floodlens/rng.hpp"
#include "floodlens/textprep.hpp"

namespace fltest {

// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("floodlens_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  std::string str() const { return path_.string(); }
  std::filesystem::path path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// A corpus sampled from a known LDA model; the generator itself is the
// oracle for topic recovery.
struct PlantedCorpus {
  std::uint32_t num_topics = 0;
  std::uint32_t vocab_size = 0;
  std::vector<double> true_phi;  // K x V row-major
  std::vector<floodlens::BowDoc> docs;
};

inline PlantedCorpus make_planted_corpus(std::uint32_t k_count, std::uint32_t vocab_size,
                                         std::size_t n_docs, std::size_t doc_len,
                                         double dominant_weight, std::uint64_t seed) {
  PlantedCorpus corpus;
  corpus.num_topics = k_count;
  corpus.vocab_size = vocab_size;
  corpus.true_phi.assign(static_cast<std::size_t>(k_count) * vocab_size, 0.0);

  // Near-disjoint supports: topic k owns an equal slice of the vocabulary.
  const std::uint32_t span = vocab_size / k_count;
  for (std::uint32_t k = 0; k < k_count; ++k)
    for (std::uint32_t w = k * span; w < (k + 1) * span; ++w)
      corpus.true_phi[static_cast<std::size_t>(k) * vocab_size + w] = 1.0 / span;

  floodlens::Xoshiro256ss rng(seed);
  for (std::size_t d = 0; d < n_docs; ++d) {
    const std::uint32_t main_topic = static_cast<std::uint32_t>(d % k_count);
    std::vector<std::uint32_t> counts(vocab_size, 0);
    for (std::size_t i = 0; i < doc_len; ++i) {
      std::uint32_t z;
      if (rng.next_double() < dominant_weight) {
        z = main_topic;
      } else {
        z = rng.next_below(k_count);
      }
      const std::uint32_t w = z * span + rng.next_below(span);
      counts[w] += 1;
    }
    floodlens::BowDoc bow;
    char id[24];
    std::snprintf(id, sizeof(id), "d%05zu", d);
    bow.doc_id = id;
    for (std::uint32_t w = 0; w < vocab_size; ++w)
      if (counts[w]) bow.counts.emplace_back(w, counts[w]);
    corpus.docs.push_back(std::move(bow));
  }
  return corpus;
}

// Minimal total-variation distance between recovered and true topics over
// all topic permutations (exact Hungarian answer for small K).
inline double matched_max_tv(const std::vector<double>& phi_a,
                             const std::vector<double>& phi_b,
                             std::uint32_t k_count, std::uint32_t vocab_size) {
  std::vector<std::vector<double>> tv(k_count, std::vector<double>(k_count, 0.0));
  for (std::uint32_t i = 0; i < k_count; ++i)
    for (std::uint32_t j = 0; j < k_count; ++j) {
      double s = 0.0;
      for (std::uint32_t w = 0; w < vocab_size; ++w)
        s += std::fabs(phi_a[static_cast<std::size_t>(i) * vocab_size + w] -
                       phi_b[static_cast<std::size_t>(j) * vocab_size + w]);
      tv[i][j] = 0.5 * s;
    }
  std::vector<std::uint32_t> perm(k_count);
  std::iota(perm.begin(), perm.end(), 0u);
  double best = std::numeric_limits<double>::infinity();
  do {
    double worst = 0.0;
    for (std::uint32_t i = 0; i < k_count; ++i) worst = std::max(worst, tv[i][perm[i]]);
    best = std::min(best, worst);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// Rank-based AUC with midranks for ties.
inline double auc(const std::vector<double>& positives, const std::vector<double>& negatives) {
  std::vector<std::pair<double, int>> all;
  for (double v : positives) all.emplace_back(v, 1);
  for (double v : negatives) all.emplace_back(v, 0);
  std::sort(all.begin(), all.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  double rank_sum = 0.0;
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i;
    while (j < all.size() && all[j].first == all[i].first) ++j;
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k)
      if (all[k].second) rank_sum += midrank;
    i = j;
  }
  const double p = static_cast<double>(positives.size());
  const double n = static_cast<double>(negatives.size());
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * n);
}

inline double sample_skewness(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= n;
  double m2 = 0.0, m3 = 0.0;
  for (double x : v) {
    const double d = x - mean;
    m2 += d * d;
    m3 += d * d * d;
  }
  m2 /= n;
  m3 /= n;
  return m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
}

}  // namespace fltest
