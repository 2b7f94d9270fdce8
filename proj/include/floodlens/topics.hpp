// topics.hpp -- LDA by collapsed Gibbs sampling, U_Mass coherence and
// coherence-driven selection of the topic count.
//
// Reproducibility contract: a model is a pure function of (docs, vocabulary
// size, config). Documents are visited in doc_id order and every document
// draws from its own xoshiro256** substream keyed by (seed, doc_id, sweep),
// so the chain does not depend on the order documents were passed in.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "floodlens/textprep.hpp"

namespace floodlens {

struct LdaConfig {
  std::uint32_t topics = 1;        // K
  double alpha = 0.0;              // symmetric doc-topic prior; 0 means 50/K
  double beta = 0.01;              // symmetric topic-word prior
  std::uint32_t iterations = 1000; // Gibbs sweeps
  std::uint32_t burn_in = 500;     // sweeps discarded before estimation
  std::uint64_t seed = 0;

  void validate() const;
};

// Default doc-topic prior when none is configured.
inline double default_alpha(std::uint32_t k) { return 50.0 / static_cast<double>(k); }

struct LdaModel {
  std::uint32_t num_topics = 0;
  std::uint32_t vocab_size = 0;
  LdaConfig config;
  std::vector<std::string> doc_ids;              // input order
  std::vector<double> phi;                       // K x V, row-major
  std::vector<double> theta;                     // D x K, row-major
  std::vector<std::vector<std::uint32_t>> assignments;  // final sweep, per doc token

  double phi_at(std::uint32_t k, std::uint32_t w) const {
    return phi[static_cast<std::size_t>(k) * vocab_size + w];
  }
  std::span<const double> theta_row(std::size_t d) const {
    return {theta.data() + d * num_topics, num_topics};
  }
  // Term indices with highest phi, ties broken by index.
  std::vector<std::uint32_t> top_words(std::uint32_t k, std::size_t m) const;
};

// Exposed so tests can step the chain and check count conservation.
class GibbsSampler {
 public:
  GibbsSampler(std::span<const BowDoc> docs, std::uint32_t vocab_size,
               const LdaConfig& config);

  void run_sweep();  // one full pass over all documents

  std::uint32_t sweeps_done() const { return sweeps_done_; }
  std::int64_t total_tokens() const { return total_tokens_; }
  std::int64_t topic_word_count(std::uint32_t k, std::uint32_t w) const {
    return n_kw_[static_cast<std::size_t>(k) * vocab_size_ + w];
  }
  std::int64_t topic_count(std::uint32_t k) const { return n_k_[k]; }
  std::int64_t doc_topic_count(std::size_t d, std::uint32_t k) const {
    return n_dk_[d * config_.topics + k];
  }

  void accumulate_counts();  // add current counts into the estimation buffers
  LdaModel estimate() const; // smoothed phi/theta from the accumulated counts

 private:
  void sample_document(std::size_t order_index, std::uint32_t sweep);

  LdaConfig config_;
  std::uint32_t vocab_size_;
  std::vector<std::string> doc_ids_;          // input order
  std::vector<std::size_t> visit_order_;      // input indices sorted by doc_id
  std::vector<std::vector<std::uint32_t>> tokens_;  // per doc, expanded terms
  std::vector<std::vector<std::uint32_t>> z_;       // per doc, topic of each token

  std::vector<std::int64_t> n_kw_;  // K x V
  std::vector<std::int64_t> n_k_;   // K
  std::vector<std::int64_t> n_dk_;  // D x K
  std::vector<std::int64_t> n_d_;   // D

  std::vector<double> acc_n_kw_, acc_n_k_, acc_n_dk_, acc_n_d_;
  std::size_t samples_ = 0;
  std::uint32_t sweeps_done_ = 0;
  std::int64_t total_tokens_ = 0;
  std::vector<double> weight_buf_;
};

LdaModel fit_lda(std::span<const BowDoc> docs, std::uint32_t vocab_size,
                 const LdaConfig& config);

struct CoherenceResult {
  std::vector<double> per_topic;
  std::vector<std::string> diagnostics;

  double mean() const;
};

// U_Mass: for word pair (m, l), l < m in top-word order,
// log((D(w_m, w_l) + 1) / D(w_l)), averaged over the pairs of each topic.
// Words with zero document frequency are excluded and reported.
CoherenceResult umass_coherence(const std::vector<std::vector<std::uint32_t>>& top_words,
                                std::span<const BowDoc> docs);

struct CoherenceReport {
  struct Entry {
    std::uint32_t k = 0;
    double score = 0.0;
  };
  std::vector<Entry> entries;  // candidate order
  std::uint32_t chosen_k = 0;  // max score, ties -> smallest K
  std::string variant = "u_mass";
};

CoherenceReport select_topic_count(std::span<const BowDoc> docs,
                                   std::uint32_t vocab_size,
                                   const std::vector<std::uint32_t>& k_candidates,
                                   const LdaConfig& config_template,
                                   std::size_t top_m = 10);

// Argmax over the document's theta row; ties -> smallest topic index.
std::uint32_t dominant_topic(const LdaModel& model, std::size_t doc_index);

}  // namespace floodlens
