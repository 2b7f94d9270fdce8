#include "floodlens/embed.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>
#include <unordered_map>

#include <httplib.h>
#include <json.hpp>

#include "floodlens/hash.hpp"
#include "floodlens/rng.hpp"
#include "floodlens/util.hpp"

namespace floodlens {

using nlohmann::json;

double Embedding::l2_norm() const {
  double s = 0.0;
  for (float v : values) s += static_cast<double>(v) * static_cast<double>(v);
  return std::sqrt(s);
}

void EmbeddingBackendSpec::validate() const {
  if (kind == BackendKind::remote) {
    if (effective_endpoint().empty() || model.empty())
      throw ConfigError("embed: remote backend needs endpoint and model");
  } else {
    if (dim < 16) throw ConfigError("embed: local backend needs dim >= 16");
  }
}

std::string EmbeddingBackendSpec::backend_id() const {
  if (kind == BackendKind::remote) return "remote:" + model;
  return "local:d=" + std::to_string(dim) + ":seed=" + std::to_string(hash_seed);
}

std::string EmbeddingBackendSpec::effective_endpoint() const {
  if (const char* env = std::getenv("EMBED_ENDPOINT"); env && *env) return env;
  return endpoint;
}

Embedding local_embed(std::string_view cleaned_text, std::uint32_t dim,
                      std::uint64_t hash_seed) {
  if (dim < 16) throw ConfigError("local_embed: dim must be >= 16");
  Embedding e;
  e.values.assign(dim, 0.0f);

  std::vector<double> acc(dim, 0.0);
  bool any_feature = false;
  auto add_feature = [&](std::string_view feature) {
    const std::uint64_t base = fnv1a64(feature);
    const std::uint64_t h1 = mix_seed(hash_seed, base, 1);
    const std::uint64_t h2 = mix_seed(hash_seed, base, 2);
    const std::size_t idx = static_cast<std::size_t>(h1 % dim);
    acc[idx] += (h2 & 1) ? 1.0 : -1.0;
    any_feature = true;
  };

  for (const auto& sentence_text : split(cleaned_text, '.')) {
    std::vector<std::string> tokens;
    for (auto& tok : split(sentence_text, ' '))
      if (!tok.empty()) tokens.push_back(std::move(tok));
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      add_feature(tokens[i]);
      if (i + 1 < tokens.size()) add_feature(tokens[i] + " " + tokens[i + 1]);
    }
  }

  if (!any_feature) {
    e.empty_doc = true;
    return e;
  }
  double norm = 0.0;
  for (double v : acc) norm += v * v;
  norm = std::sqrt(norm);
  if (norm == 0.0) {
    // All features cancelled; keep the zero vector but do not flag as empty.
    return e;
  }
  for (std::uint32_t i = 0; i < dim; ++i)
    e.values[i] = static_cast<float>(acc[i] / norm);
  return e;
}

namespace {

struct ParsedEndpoint {
  std::string base;  // scheme://host:port
  std::string prefix;
};

ParsedEndpoint parse_endpoint(const std::string& endpoint) {
  auto scheme_end = endpoint.find("://");
  if (scheme_end == std::string::npos)
    throw ConfigError("embed: endpoint must look like http://host:port, got " + endpoint);
  auto path_start = endpoint.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {endpoint, ""};
  std::string prefix = endpoint.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {endpoint.substr(0, path_start), prefix};
}

bool retryable_status(int status) {
  return status == 429 || (status >= 500 && status < 600);
}

struct BatchOutcome {
  std::vector<std::vector<float>> vectors;
  std::uint32_t dim = 0;
  std::size_t retries = 0;
  std::string error;  // non-empty on failure
};

BatchOutcome post_batch(const ParsedEndpoint& ep, const std::string& model,
                        const std::vector<std::string>& texts,
                        const RetryPolicy& retry, std::uint64_t jitter_seed) {
  BatchOutcome out;
  json req;
  req["model"] = model;
  req["texts"] = texts;
  const std::string body = req.dump();

  httplib::Client client(ep.base);
  client.set_connection_timeout(retry.timeout_seconds, 0);
  client.set_read_timeout(retry.timeout_seconds, 0);
  client.set_write_timeout(retry.timeout_seconds, 0);

  Xoshiro256ss jitter_rng(jitter_seed);
  for (int attempt = 0;; ++attempt) {
    auto res = client.Post(ep.prefix + "/v1/embed", body, "application/json");
    std::string failure;
    if (!res) {
      failure = "transport error: " + httplib::to_string(res.error());
    } else if (res->status >= 200 && res->status < 300) {
      try {
        json rep = json::parse(res->body, nullptr, false);
        if (rep.is_discarded() || !rep.contains("dim") || !rep.contains("vectors")) {
          out.error = "embed service returned malformed JSON";
          return out;
        }
        out.dim = rep["dim"].get<std::uint32_t>();
        const auto& vectors = rep["vectors"];
        if (!vectors.is_array() || vectors.size() != texts.size()) {
          out.error = "embed service returned " + std::to_string(vectors.size()) +
                      " vectors for " + std::to_string(texts.size()) + " texts";
          return out;
        }
        for (const auto& vec : vectors) {
          std::vector<float> row;
          row.reserve(out.dim);
          for (const auto& v : vec) row.push_back(v.get<float>());
          if (row.size() != out.dim) {
            out.error = "embed service vector length disagrees with dim";
            return out;
          }
          out.vectors.push_back(std::move(row));
        }
      } catch (const std::exception& e) {
        out.vectors.clear();
        out.error = std::string("embed service response unusable: ") + e.what();
      }
      return out;
    } else if (retryable_status(res->status)) {
      failure = "status " + std::to_string(res->status);
    } else {
      out.error = "embed service rejected batch: status " + std::to_string(res->status);
      return out;
    }
    if (attempt >= retry.max_retries) {
      out.error = "retries exhausted (" + failure + ")";
      return out;
    }
    ++out.retries;
    const int backoff = std::min(retry.max_delay_ms, retry.base_delay_ms << attempt);
    const int jitter = static_cast<int>(
        jitter_rng.next_below(static_cast<std::uint32_t>(retry.base_delay_ms) + 1));
    std::this_thread::sleep_for(std::chrono::milliseconds(backoff + jitter));
  }
}

}  // namespace

std::vector<Embedding> remote_embed_batch(const std::vector<std::string>& texts,
                                          const EmbeddingBackendSpec& spec,
                                          std::size_t batch_size,
                                          std::size_t max_parallel,
                                          const RetryPolicy& retry,
                                          BatchStats* stats) {
  if (texts.empty()) return {};
  if (batch_size < 1) throw ConfigError("embed: batch_size must be >= 1");
  if (max_parallel < 1) throw ConfigError("embed: max_parallel must be >= 1");
  const ParsedEndpoint ep = parse_endpoint(spec.effective_endpoint());

  const std::size_t num_batches = (texts.size() + batch_size - 1) / batch_size;
  std::vector<BatchOutcome> outcomes(num_batches);
  std::atomic<std::size_t> next_batch{0};

  auto worker = [&] {
    for (;;) {
      const std::size_t b = next_batch.fetch_add(1);
      if (b >= num_batches) return;
      const std::size_t lo = b * batch_size;
      const std::size_t hi = std::min(texts.size(), lo + batch_size);
      std::vector<std::string> chunk(texts.begin() + lo, texts.begin() + hi);
      outcomes[b] = post_batch(ep, spec.model, chunk, retry, fnv1a64(spec.model) + b);
    }
  };

  std::vector<std::thread> pool;
  const std::size_t workers = std::min(max_parallel, num_batches);
  for (std::size_t i = 0; i < workers; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  std::uint32_t dim = 0;
  std::vector<Embedding> result;
  result.reserve(texts.size());
  for (std::size_t b = 0; b < num_batches; ++b) {
    auto& oc = outcomes[b];
    if (!oc.error.empty())
      throw Error("remote_embed_batch: batch " + std::to_string(b) + " failed: " + oc.error);
    if (dim == 0) dim = oc.dim;
    if (oc.dim != dim)
      throw Error("remote_embed_batch: dimension mismatch across batches (" +
                  std::to_string(dim) + " vs " + std::to_string(oc.dim) + ")");
    if (stats) {
      stats->requests += 1;
      stats->retries += oc.retries;
      stats->batch_sizes.push_back(oc.vectors.size());
    }
    for (auto& row : oc.vectors) {
      Embedding e;
      e.values = std::move(row);
      result.push_back(std::move(e));
    }
  }
  return result;
}

namespace {

void put_u32_le(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_u64_le(std::string& out, std::uint64_t v) {
  put_u32_le(out, static_cast<std::uint32_t>(v & 0xffffffffULL));
  put_u32_le(out, static_cast<std::uint32_t>(v >> 32));
}

void put_f32_le(std::string& out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  put_u32_le(out, bits);
}

class ByteReader {
 public:
  ByteReader(const std::string& data) : data_(data) {}
  bool remaining(std::size_t n) const { return pos_ + n <= data_.size(); }
  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == data_.size(); }

  bool read_u32(std::uint32_t* v) {
    if (!remaining(4)) return false;
    const auto* p = reinterpret_cast<const unsigned char*>(data_.data() + pos_);
    *v = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
    pos_ += 4;
    return true;
  }
  bool read_u64(std::uint64_t* v) {
    std::uint32_t lo, hi;
    if (!read_u32(&lo)) return false;
    if (!read_u32(&hi)) return false;
    *v = static_cast<std::uint64_t>(lo) | (static_cast<std::uint64_t>(hi) << 32);
    return true;
  }
  bool read_f32(float* f) {
    std::uint32_t bits;
    if (!read_u32(&bits)) return false;
    std::memcpy(f, &bits, 4);
    return true;
  }
  bool read_bytes(std::size_t n, std::string* s) {
    if (!remaining(n)) return false;
    s->assign(data_, pos_, n);
    pos_ += n;
    return true;
  }

 private:
  const std::string& data_;
  std::size_t pos_ = 0;
};

constexpr std::uint32_t kMaxSaneLen = 1u << 20;

// Append-only cache keyed by (sha256 of cleaned text, backend id). A
// truncated or implausible tail ends the scan; the file is then rewritten
// from the records that did parse.
class EmbeddingCache {
 public:
  EmbeddingCache(std::string path) : path_(std::move(path)) {}

  void load(EmbedReport* report) {
    entries_.clear();
    if (!std::filesystem::exists(path_)) return;
    const std::string bytes = read_file(path_);
    ByteReader reader(bytes);
    std::string valid;
    bool corrupt = false;
    while (!reader.done()) {
      const std::size_t record_start = reader.pos();
      std::string hash, backend;
      std::uint32_t backend_len = 0, dim = 0;
      if (!reader.read_bytes(32, &hash) || !reader.read_u32(&backend_len) ||
          backend_len == 0 || backend_len > kMaxSaneLen ||
          !reader.read_bytes(backend_len, &backend) || !reader.read_u32(&dim) ||
          dim == 0 || dim > kMaxSaneLen) {
        corrupt = true;
        break;
      }
      std::vector<float> values(dim);
      bool ok = true;
      for (std::uint32_t i = 0; i < dim && ok; ++i) ok = reader.read_f32(&values[i]);
      if (!ok) {
        corrupt = true;
        break;
      }
      entries_[hash + backend] = std::move(values);
      valid.append(bytes, record_start, reader.pos() - record_start);
    }
    if (corrupt) {
      if (report)
        report->diagnostics.push_back("embed cache " + path_ +
                                      ": corrupt tail dropped, cache rebuilt");
      write_file(path_, valid);
    }
  }

  const std::vector<float>* find(const Sha256Digest& hash, const std::string& backend) const {
    auto it = entries_.find(key(hash, backend));
    return it == entries_.end() ? nullptr : &it->second;
  }

  void put(const Sha256Digest& hash, const std::string& backend,
           const std::vector<float>& values) {
    std::string record(reinterpret_cast<const char*>(hash.data()), hash.size());
    put_u32_le(record, static_cast<std::uint32_t>(backend.size()));
    record += backend;
    put_u32_le(record, static_cast<std::uint32_t>(values.size()));
    for (float v : values) put_f32_le(record, v);
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    if (!out) throw Error("embed cache: cannot append to " + path_);
    out.write(record.data(), static_cast<std::streamsize>(record.size()));
    if (!out) throw Error("embed cache: write failed on " + path_);
    entries_[key(hash, backend)] = values;
  }

 private:
  static std::string key(const Sha256Digest& hash, const std::string& backend) {
    return std::string(reinterpret_cast<const char*>(hash.data()), hash.size()) + backend;
  }

  std::string path_;
  std::unordered_map<std::string, std::vector<float>> entries_;
};

}  // namespace

void save_embedding_matrix(const EmbeddingMatrix& m, const std::string& path) {
  std::string out = "FLEMB1\n";
  put_u32_le(out, m.dim);
  put_u64_le(out, m.rows());
  put_u32_le(out, static_cast<std::uint32_t>(m.backend_id.size()));
  out += m.backend_id;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    put_u32_le(out, static_cast<std::uint32_t>(m.doc_ids[i].size()));
    out += m.doc_ids[i];
    for (float v : m.row(i)) put_f32_le(out, v);
  }
  write_file(path, out);
}

EmbeddingMatrix load_embedding_matrix(const std::string& path) {
  const std::string bytes = read_file(path);
  ByteReader reader(bytes);
  std::string magic;
  if (!reader.read_bytes(7, &magic) || magic != "FLEMB1\n")
    throw Error("embedding matrix " + path + ": bad magic");
  EmbeddingMatrix m;
  std::uint64_t rows = 0;
  std::uint32_t backend_len = 0;
  if (!reader.read_u32(&m.dim) || !reader.read_u64(&rows) ||
      !reader.read_u32(&backend_len) || !reader.read_bytes(backend_len, &m.backend_id))
    throw Error("embedding matrix " + path + ": truncated header");
  m.doc_ids.reserve(rows);
  m.data.reserve(rows * m.dim);
  for (std::uint64_t r = 0; r < rows; ++r) {
    std::uint32_t id_len = 0;
    std::string id;
    if (!reader.read_u32(&id_len) || !reader.read_bytes(id_len, &id))
      throw Error("embedding matrix " + path + ": truncated row");
    m.doc_ids.push_back(std::move(id));
    for (std::uint32_t i = 0; i < m.dim; ++i) {
      float v;
      if (!reader.read_f32(&v))
        throw Error("embedding matrix " + path + ": truncated row data");
      m.data.push_back(v);
    }
  }
  if (!reader.done()) throw Error("embedding matrix " + path + ": trailing bytes");
  return m;
}

EmbeddingMatrix embed_corpus(std::span<const CleanDoc> docs,
                             const EmbeddingBackendSpec& spec,
                             const std::string& cache_path,
                             EmbedReport* report,
                             std::size_t batch_size,
                             std::size_t max_parallel,
                             const RetryPolicy& retry) {
  spec.validate();
  const std::string backend = spec.backend_id();

  std::vector<std::size_t> order(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return docs[a].doc_id < docs[b].doc_id;
  });
  for (std::size_t i = 1; i < order.size(); ++i)
    if (docs[order[i - 1]].doc_id == docs[order[i]].doc_id)
      throw Error("embed_corpus: duplicate doc_id " + docs[order[i]].doc_id);

  EmbeddingCache cache(cache_path);
  cache.load(report);

  // Resolve each doc to a vector: empty text, cache hit, or backend miss.
  std::vector<const std::vector<float>*> resolved(docs.size(), nullptr);
  std::vector<Sha256Digest> hashes(docs.size());
  std::vector<std::size_t> empty_rows, miss_rows;
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const auto& doc = docs[order[pos]];
    if (doc.text.empty()) {
      empty_rows.push_back(pos);
      continue;
    }
    hashes[pos] = sha256(doc.text);
    if (const auto* hit = cache.find(hashes[pos], backend)) {
      resolved[pos] = hit;
      if (report) report->cache_hits += 1;
    } else {
      miss_rows.push_back(pos);
    }
  }

  std::vector<std::vector<float>> fresh(docs.size());
  if (!miss_rows.empty()) {
    if (spec.kind == BackendKind::local) {
      for (std::size_t pos : miss_rows) {
        Embedding e = local_embed(docs[order[pos]].text, spec.dim, spec.hash_seed);
        fresh[pos] = std::move(e.values);
      }
    } else {
      std::vector<std::string> texts;
      texts.reserve(miss_rows.size());
      for (std::size_t pos : miss_rows) texts.push_back(docs[order[pos]].text);
      auto embeddings = remote_embed_batch(texts, spec, batch_size, max_parallel, retry);
      for (std::size_t i = 0; i < miss_rows.size(); ++i)
        fresh[miss_rows[i]] = std::move(embeddings[i].values);
    }
    if (report) report->backend_calls += miss_rows.size();
    for (std::size_t pos : miss_rows) {
      cache.put(hashes[pos], backend, fresh[pos]);
      resolved[pos] = &fresh[pos];
    }
  }

  // Dimension: from any real vector, falling back to the local spec.
  std::uint32_t dim = 0;
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    if (resolved[pos]) {
      if (dim == 0) dim = static_cast<std::uint32_t>(resolved[pos]->size());
      if (resolved[pos]->size() != dim)
        throw Error("embed_corpus: inconsistent dimensions in cache/backend results");
    }
  }
  if (dim == 0) {
    if (spec.kind == BackendKind::local) dim = spec.dim;
    else if (!docs.empty())
      throw Error("embed_corpus: cannot determine dimension (all documents empty)");
  }

  EmbeddingMatrix matrix;
  matrix.backend_id = backend;
  matrix.dim = dim;
  matrix.data.assign(docs.size() * static_cast<std::size_t>(dim), 0.0f);
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    matrix.doc_ids.push_back(docs[order[pos]].doc_id);
    if (resolved[pos])
      std::copy(resolved[pos]->begin(), resolved[pos]->end(),
                matrix.data.begin() + pos * dim);
  }
  if (report) report->empty_docs += empty_rows.size();
  return matrix;
}

}  // namespace floodlens
