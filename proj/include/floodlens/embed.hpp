// embed.hpp -- document embeddings behind a pluggable backend: an HTTP
// embedding-service client and a deterministic local feature-hashing
// embedder, with an append-only content-addressed cache.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "floodlens/textprep.hpp"

namespace floodlens {

struct Embedding {
  std::string doc_id;
  std::vector<float> values;
  bool empty_doc = false;  // zero vector produced from empty text

  double l2_norm() const;
};

struct EmbeddingMatrix {
  std::string backend_id;
  std::uint32_t dim = 0;
  std::vector<std::string> doc_ids;  // sorted ascending
  std::vector<float> data;           // row-major, doc_ids.size() x dim

  std::size_t rows() const { return doc_ids.size(); }
  std::span<const float> row(std::size_t i) const {
    return {data.data() + i * dim, dim};
  }
};

// Binary matrix file round-trip (little-endian f32 components).
void save_embedding_matrix(const EmbeddingMatrix& m, const std::string& path);
EmbeddingMatrix load_embedding_matrix(const std::string& path);

enum class BackendKind { local, remote };

struct EmbeddingBackendSpec {
  BackendKind kind = BackendKind::local;
  // remote
  std::string endpoint;  // http://host:port[/prefix]
  std::string model;
  // local
  std::uint32_t dim = 256;
  std::uint64_t hash_seed = 1;

  void validate() const;
  std::string backend_id() const;
  // EMBED_ENDPOINT, when set, overrides the configured endpoint.
  std::string effective_endpoint() const;
};

struct RetryPolicy {
  int max_retries = 3;       // additional attempts after the first
  int base_delay_ms = 100;   // exponential backoff base
  int max_delay_ms = 2000;
  int timeout_seconds = 60;
};

// Signed feature hashing of unigrams and within-sentence bigrams of the
// cleaned text, L2-normalized. Pure function of (text, dim, hash_seed).
Embedding local_embed(std::string_view cleaned_text, std::uint32_t dim,
                      std::uint64_t hash_seed);

struct BatchStats {
  std::size_t requests = 0;
  std::size_t retries = 0;
  std::vector<std::size_t> batch_sizes;
};

// POST {endpoint}/v1/embed with {"model":..., "texts":[...]}; expects
// {"dim": n, "vectors": [[...], ...]} parallel to texts. Batches of at most
// batch_size are sent with up to max_parallel requests in flight; the result
// preserves input order. 429 and 5xx responses and transport timeouts are
// retried with exponential backoff and jitter; any other 4xx is fatal.
std::vector<Embedding> remote_embed_batch(const std::vector<std::string>& texts,
                                          const EmbeddingBackendSpec& spec,
                                          std::size_t batch_size,
                                          std::size_t max_parallel,
                                          const RetryPolicy& retry,
                                          BatchStats* stats = nullptr);

struct EmbedReport {
  std::size_t cache_hits = 0;
  std::size_t backend_calls = 0;  // documents actually sent to the backend
  std::size_t empty_docs = 0;
  std::vector<std::string> diagnostics;
};

// Embeds the documents, serving repeats from the cache file at cache_path
// (append-only records keyed by SHA-256 of the cleaned text + backend id).
// Rows come back in sorted doc_id order.
EmbeddingMatrix embed_corpus(std::span<const CleanDoc> docs,
                             const EmbeddingBackendSpec& spec,
                             const std::string& cache_path,
                             EmbedReport* report = nullptr,
                             std::size_t batch_size = 32,
                             std::size_t max_parallel = 4,
                             const RetryPolicy& retry = {});

}  // namespace floodlens
