// relevance.hpp -- the relevance index: quantile selection of the submission
// reference core, per-reference cosine similarities, Box-Cox normalization
// with profile-likelihood lambda, inversion, and the per-post median score,
// plus decile partitioning.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "floodlens/embed.hpp"

namespace floodlens {

struct ReferenceCorpus {
  std::vector<std::string> selected_ids;
  std::uint32_t dim = 0;
  std::vector<float> rows;        // selected embeddings, row-major
  std::vector<double> row_norms;  // L2 norm per selected row
  double quantile = 0.95;
  std::size_t dropped_zero = 0;   // zero-norm submissions removed before selection
  std::vector<std::string> diagnostics;

  std::size_t size() const { return selected_ids.size(); }
  std::span<const float> row(std::size_t i) const { return {rows.data() + i * dim, dim}; }
};

// Keeps submissions whose cosine distance to the centroid of the
// L2-normalized rows is at or below the q-quantile of all such distances
// (q-quantile = ceil(q*n)-th smallest).
ReferenceCorpus select_reference_core(const EmbeddingMatrix& submissions, double q = 0.95);

struct SimilarityVector {
  std::string tweet_id;
  std::vector<double> s;  // one cosine per reference row
};

// s_i = (v . r_i) / (|v| |r_i|). A zero tweet vector is an error; the caller
// excludes such posts from ranking.
SimilarityVector similarity_vector(std::span<const float> tweet_embedding,
                                   const ReferenceCorpus& ref,
                                   const std::string& tweet_id = "");

struct BoxCoxParams {
  double lambda = 0.0;
  double epsilon = 1e-4;
  double log_likelihood = 0.0;
  bool fallback = false;  // constant input or fewer than 8 values
  std::string note;
};

inline constexpr double kBoxCoxGridLo = -5.0;
inline constexpr double kBoxCoxGridHi = 5.0;
inline constexpr double kBoxCoxGridStep = 0.01;
inline constexpr std::size_t kBoxCoxMinSamples = 8;

// Profile-likelihood grid search over [-5, 5] step 0.01 after clamping the
// values into [epsilon, 1 - epsilon]; ties prefer lambda closest to 0.
BoxCoxParams fit_boxcox_lambda(std::span<const double> s, double epsilon = 1e-4);

// y = (s^lambda - 1)/lambda (ln s at lambda = 0) on the clamped values, then
// y_scaled = -1/y. Strictly increasing in s; always positive.
std::vector<double> boxcox_transform_scale(std::span<const double> s,
                                           const BoxCoxParams& params);

double median(std::span<const double> values);  // even n: mean of central pair

struct RelevanceScore {
  std::string tweet_id;
  double index = 0.0;
  double lambda = 0.0;
  int decile = 0;  // 1..10 once partitioned; 0 = not assigned
};

RelevanceScore relevance_index(std::span<const float> tweet_embedding,
                               const ReferenceCorpus& ref,
                               const std::string& tweet_id,
                               double epsilon = 1e-4);

enum class LambdaMode { per_tweet, global };

struct ScoreReport {
  std::vector<RelevanceScore> scores;      // doc order of the input matrix
  std::vector<std::string> excluded_ids;   // zero embeddings
  double global_lambda = 0.0;              // when LambdaMode::global
};

ScoreReport score_corpus(const EmbeddingMatrix& tweets, const ReferenceCorpus& ref,
                         LambdaMode mode = LambdaMode::per_tweet,
                         double epsilon = 1e-4, std::size_t threads = 1);

struct DecileResult {
  std::vector<RelevanceScore> scores;  // sorted by index desc, id asc
  std::vector<std::string> top_ids;    // decile 1
  std::vector<std::string> bottom_ids; // decile 10
};

// Rank r (1-based, sorted by index descending, ties by tweet_id ascending)
// lands in decile k when ceil((k-1)n/10) < r <= ceil(kn/10).
DecileResult decile_partition(std::vector<RelevanceScore> scores);

}  // namespace floodlens
