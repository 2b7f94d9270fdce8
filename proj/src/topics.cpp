#include "floodlens/topics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "floodlens/hash.hpp"
#include "floodlens/rng.hpp"
#include "floodlens/util.hpp"

namespace floodlens {

void LdaConfig::validate() const {
  if (topics < 1) throw Error("lda: topics must be >= 1");
  if (!(alpha >= 0.0)) throw Error("lda: alpha must be > 0 (or 0 for 50/K)");
  if (!(beta > 0.0)) throw Error("lda: beta must be > 0");
  if (iterations < 1) throw Error("lda: iterations must be >= 1");
  if (burn_in >= iterations) throw Error("lda: burn_in must be < iterations");
}

GibbsSampler::GibbsSampler(std::span<const BowDoc> docs, std::uint32_t vocab_size,
                           const LdaConfig& config)
    : config_(config), vocab_size_(vocab_size) {
  config_.validate();
  if (config_.alpha == 0.0) config_.alpha = default_alpha(config_.topics);
  if (docs.empty()) throw Error("lda: empty document set");
  if (vocab_size == 0) throw Error("lda: empty vocabulary");

  const std::uint32_t k_count = config_.topics;
  doc_ids_.reserve(docs.size());
  tokens_.resize(docs.size());
  z_.resize(docs.size());
  for (std::size_t d = 0; d < docs.size(); ++d) {
    doc_ids_.push_back(docs[d].doc_id);
    for (const auto& [term, count] : docs[d].counts) {
      if (term >= vocab_size) throw Error("lda: term index out of range");
      if (count == 0) throw Error("lda: zero count in bow");
      for (std::uint32_t c = 0; c < count; ++c) tokens_[d].push_back(term);
    }
    if (tokens_[d].empty()) throw Error("lda: empty document " + docs[d].doc_id);
    total_tokens_ += static_cast<std::int64_t>(tokens_[d].size());
  }

  visit_order_.resize(docs.size());
  std::iota(visit_order_.begin(), visit_order_.end(), std::size_t{0});
  std::sort(visit_order_.begin(), visit_order_.end(), [&](std::size_t a, std::size_t b) {
    return doc_ids_[a] < doc_ids_[b];
  });

  n_kw_.assign(static_cast<std::size_t>(k_count) * vocab_size_, 0);
  n_k_.assign(k_count, 0);
  n_dk_.assign(docs.size() * k_count, 0);
  n_d_.assign(docs.size(), 0);
  acc_n_kw_.assign(n_kw_.size(), 0.0);
  acc_n_k_.assign(n_k_.size(), 0.0);
  acc_n_dk_.assign(n_dk_.size(), 0.0);
  acc_n_d_.assign(n_d_.size(), 0.0);
  weight_buf_.assign(k_count, 0.0);

  // Initial assignments, one substream per document (sweep id 0).
  for (std::size_t d : visit_order_) {
    Xoshiro256ss rng(mix_seed(config_.seed, fnv1a64(doc_ids_[d]), 0));
    z_[d].resize(tokens_[d].size());
    for (std::size_t i = 0; i < tokens_[d].size(); ++i) {
      std::uint32_t k = rng.next_below(k_count);
      z_[d][i] = k;
      std::uint32_t w = tokens_[d][i];
      n_kw_[static_cast<std::size_t>(k) * vocab_size_ + w] += 1;
      n_k_[k] += 1;
      n_dk_[d * k_count + k] += 1;
      n_d_[d] += 1;
    }
  }
}

void GibbsSampler::sample_document(std::size_t d, std::uint32_t sweep) {
  const std::uint32_t k_count = config_.topics;
  const double beta = config_.beta;
  const double alpha = config_.alpha;
  const double v_beta = static_cast<double>(vocab_size_) * beta;

  Xoshiro256ss rng(mix_seed(config_.seed, fnv1a64(doc_ids_[d]), sweep));
  auto* doc_topic = &n_dk_[d * k_count];
  for (std::size_t i = 0; i < tokens_[d].size(); ++i) {
    const std::uint32_t w = tokens_[d][i];
    const std::uint32_t old_k = z_[d][i];
    n_kw_[static_cast<std::size_t>(old_k) * vocab_size_ + w] -= 1;
    n_k_[old_k] -= 1;
    doc_topic[old_k] -= 1;

    double total = 0.0;
    for (std::uint32_t k = 0; k < k_count; ++k) {
      const double w_k =
          (static_cast<double>(doc_topic[k]) + alpha) *
          (static_cast<double>(n_kw_[static_cast<std::size_t>(k) * vocab_size_ + w]) + beta) /
          (static_cast<double>(n_k_[k]) + v_beta);
      weight_buf_[k] = w_k;
      total += w_k;
    }
    double u = rng.next_double() * total;
    std::uint32_t new_k = k_count - 1;
    double cum = 0.0;
    for (std::uint32_t k = 0; k < k_count; ++k) {
      cum += weight_buf_[k];
      if (u < cum) {
        new_k = k;
        break;
      }
    }
    z_[d][i] = new_k;
    n_kw_[static_cast<std::size_t>(new_k) * vocab_size_ + w] += 1;
    n_k_[new_k] += 1;
    doc_topic[new_k] += 1;
  }
}

void GibbsSampler::run_sweep() {
  ++sweeps_done_;
  for (std::size_t d : visit_order_) sample_document(d, sweeps_done_);
}

void GibbsSampler::accumulate_counts() {
  for (std::size_t i = 0; i < n_kw_.size(); ++i)
    acc_n_kw_[i] += static_cast<double>(n_kw_[i]);
  for (std::size_t i = 0; i < n_k_.size(); ++i)
    acc_n_k_[i] += static_cast<double>(n_k_[i]);
  for (std::size_t i = 0; i < n_dk_.size(); ++i)
    acc_n_dk_[i] += static_cast<double>(n_dk_[i]);
  for (std::size_t i = 0; i < n_d_.size(); ++i)
    acc_n_d_[i] += static_cast<double>(n_d_[i]);
  ++samples_;
}

LdaModel GibbsSampler::estimate() const {
  if (samples_ == 0) throw Error("lda: no post-burn-in samples to estimate from");
  const std::uint32_t k_count = config_.topics;
  const double inv_samples = 1.0 / static_cast<double>(samples_);

  LdaModel model;
  model.num_topics = k_count;
  model.vocab_size = vocab_size_;
  model.config = config_;
  model.doc_ids = doc_ids_;
  model.assignments = z_;
  model.phi.resize(static_cast<std::size_t>(k_count) * vocab_size_);
  model.theta.resize(n_d_.size() * k_count);

  for (std::uint32_t k = 0; k < k_count; ++k) {
    const double nk = acc_n_k_[k] * inv_samples;
    const double denom = nk + static_cast<double>(vocab_size_) * config_.beta;
    for (std::uint32_t w = 0; w < vocab_size_; ++w) {
      const double nkw = acc_n_kw_[static_cast<std::size_t>(k) * vocab_size_ + w] * inv_samples;
      model.phi[static_cast<std::size_t>(k) * vocab_size_ + w] =
          (nkw + config_.beta) / denom;
    }
  }
  for (std::size_t d = 0; d < n_d_.size(); ++d) {
    const double nd = acc_n_d_[d] * inv_samples;
    const double denom = nd + static_cast<double>(k_count) * config_.alpha;
    for (std::uint32_t k = 0; k < k_count; ++k) {
      const double ndk = acc_n_dk_[d * k_count + k] * inv_samples;
      model.theta[d * k_count + k] = (ndk + config_.alpha) / denom;
    }
  }
  return model;
}

LdaModel fit_lda(std::span<const BowDoc> docs, std::uint32_t vocab_size,
                 const LdaConfig& config) {
  GibbsSampler sampler(docs, vocab_size, config);
  for (std::uint32_t it = 0; it < config.iterations; ++it) {
    sampler.run_sweep();
    if (it >= config.burn_in) sampler.accumulate_counts();
  }
  return sampler.estimate();
}

std::vector<std::uint32_t> LdaModel::top_words(std::uint32_t k, std::size_t m) const {
  std::vector<std::uint32_t> order(vocab_size);
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    return phi_at(k, a) > phi_at(k, b);
  });
  if (order.size() > m) order.resize(m);
  return order;
}

double CoherenceResult::mean() const {
  if (per_topic.empty()) return 0.0;
  double s = 0.0;
  for (double v : per_topic) s += v;
  return s / static_cast<double>(per_topic.size());
}

CoherenceResult umass_coherence(const std::vector<std::vector<std::uint32_t>>& top_words,
                                std::span<const BowDoc> docs) {
  // Document sets per needed term, for df and co-df.
  std::unordered_map<std::uint32_t, std::vector<std::uint32_t>> postings;
  for (const auto& words : top_words)
    for (std::uint32_t w : words) postings.emplace(w, std::vector<std::uint32_t>{});
  for (std::uint32_t d = 0; d < docs.size(); ++d) {
    for (const auto& [term, count] : docs[d].counts) {
      auto it = postings.find(term);
      if (it != postings.end()) it->second.push_back(d);
    }
  }
  auto co_df = [](const std::vector<std::uint32_t>& a, const std::vector<std::uint32_t>& b) {
    std::size_t i = 0, j = 0, n = 0;
    while (i < a.size() && j < b.size()) {
      if (a[i] < b[j]) ++i;
      else if (a[i] > b[j]) ++j;
      else { ++n; ++i; ++j; }
    }
    return n;
  };

  CoherenceResult result;
  for (std::size_t t = 0; t < top_words.size(); ++t) {
    const auto& all_words = top_words[t];
    std::vector<std::uint32_t> words;
    for (std::uint32_t w : all_words) {
      if (postings[w].empty()) {
        result.diagnostics.push_back("topic " + std::to_string(t) + ": term index " +
                                     std::to_string(w) +
                                     " has zero document frequency, excluded");
      } else {
        words.push_back(w);
      }
    }
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t m = 1; m < words.size(); ++m) {
      for (std::size_t l = 0; l < m; ++l) {
        const double co = static_cast<double>(co_df(postings[words[m]], postings[words[l]]));
        const double dl = static_cast<double>(postings[words[l]].size());
        sum += std::log((co + 1.0) / dl);
        ++pairs;
      }
    }
    result.per_topic.push_back(pairs ? sum / static_cast<double>(pairs) : 0.0);
  }
  return result;
}

CoherenceReport select_topic_count(std::span<const BowDoc> docs,
                                   std::uint32_t vocab_size,
                                   const std::vector<std::uint32_t>& k_candidates,
                                   const LdaConfig& config_template,
                                   std::size_t top_m) {
  if (k_candidates.empty()) throw Error("select_topic_count: no candidates");

  CoherenceReport report;
  for (std::uint32_t k : k_candidates) {
    LdaConfig config = config_template;
    config.topics = k;
    LdaModel model = fit_lda(docs, vocab_size, config);
    std::vector<std::vector<std::uint32_t>> tops;
    for (std::uint32_t t = 0; t < k; ++t) tops.push_back(model.top_words(t, top_m));
    const double score = umass_coherence(tops, docs).mean();
    report.entries.push_back({k, score});
  }
  const auto* best = &report.entries[0];
  for (const auto& e : report.entries) {
    if (e.score > best->score || (e.score == best->score && e.k < best->k)) best = &e;
  }
  report.chosen_k = best->k;
  return report;
}

std::uint32_t dominant_topic(const LdaModel& model, std::size_t doc_index) {
  auto row = model.theta_row(doc_index);
  std::uint32_t best = 0;
  for (std::uint32_t k = 1; k < row.size(); ++k)
    if (row[k] > row[best]) best = k;
  return best;
}

}  // namespace floodlens
