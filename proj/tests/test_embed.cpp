#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <cmath>
#include <mutex>
#include <set>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "floodlens/embed.hpp"
#include "floodlens/util.hpp"
#include "test_helpers.hpp"

using namespace floodlens;
using nlohmann::json;

namespace {

double cosine(const std::vector<float>& a, const std::vector<float>& b) {
  double num = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  return num / std::sqrt(na * nb);
}

// In-process embedding service for the client tests. Scripted failures are
// injected by text marker.
class MockServer {
 public:
  MockServer() {
    server_.Post("/v1/embed", [this](const httplib::Request& req, httplib::Response& res) {
      requests_ += 1;
      json body = json::parse(req.body);
      const auto& texts = body["texts"];
      {
        std::lock_guard<std::mutex> lock(mu_);
        batch_sizes_.push_back(texts.size());
      }
      if (fail_next_ > 0) {
        fail_next_ -= 1;
        res.status = 503;
        return;
      }
      if (!texts.empty() && texts[0].get<std::string>() == "PERMANENT-FAIL") {
        res.status = 400;
        return;
      }
      // "WIDE" texts get a wider vector, for dimension-mismatch tests
      const bool wide = !texts.empty() && texts[0].get<std::string>() == "WIDE";
      json rep;
      rep["dim"] = wide ? 8 : 4;
      json vectors = json::array();
      for (const auto& t : texts) {
        const double x = static_cast<double>(t.get<std::string>().size());
        json v = wide ? json{x, 1.0, 0.0, -x, x, 1.0, 0.0, -x} : json{x, 1.0, 0.0, -x};
        vectors.push_back(v);
      }
      rep["vectors"] = vectors;
      res.set_content(rep.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~MockServer() {
    server_.stop();
    thread_.join();
  }

  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_); }
  void fail_next(int n) { fail_next_ = n; }
  int requests() const { return requests_; }
  std::vector<std::size_t> batch_sizes() {
    std::lock_guard<std::mutex> lock(mu_);
    return batch_sizes_;
  }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> fail_next_{0};
  std::atomic<int> requests_{0};
  std::mutex mu_;
  std::vector<std::size_t> batch_sizes_;
};

EmbeddingBackendSpec remote_spec(const MockServer& server) {
  EmbeddingBackendSpec spec;
  spec.kind = BackendKind::remote;
  spec.endpoint = server.endpoint();
  spec.model = "mock-encoder";
  return spec;
}

RetryPolicy fast_retry() {
  RetryPolicy r;
  r.max_retries = 3;
  r.base_delay_ms = 1;
  r.max_delay_ms = 5;
  r.timeout_seconds = 5;
  return r;
}

}  // namespace

TEST_CASE("local_embed is deterministic and normalized") {
  Embedding a = local_embed("flood water rising. stay safe.", 64, 1);
  Embedding b = local_embed("flood water rising. stay safe.", 64, 1);
  CHECK(a.values == b.values);
  CHECK(a.l2_norm() == doctest::Approx(1.0).epsilon(1e-6));  // f32 components
  CHECK(cosine(a.values, b.values) == doctest::Approx(1.0));

  Embedding other_seed = local_embed("flood water rising. stay safe.", 64, 2);
  CHECK(a.values != other_seed.values);
}

TEST_CASE("local_embed single token has one nonzero coordinate") {
  Embedding e = local_embed("flood", 32, 7);
  int nonzero = 0;
  float magnitude = 0.0f;
  for (float v : e.values)
    if (v != 0.0f) {
      ++nonzero;
      magnitude = std::fabs(v);
    }
  CHECK(nonzero == 1);
  CHECK(magnitude == doctest::Approx(1.0f));  // +-1 after normalization
}

TEST_CASE("local_embed empty text gives flagged zero vector") {
  Embedding e = local_embed("", 32, 7);
  CHECK(e.empty_doc);
  CHECK(e.l2_norm() == 0.0);
  Embedding dots = local_embed("...", 32, 7);
  CHECK(dots.empty_doc);
}

TEST_CASE("local_embed bigrams stay within sentences") {
  // "a. b" has no bigram; "a b" does, so vectors must differ.
  Embedding split_sent = local_embed("a. b", 64, 3);
  Embedding joined = local_embed("a b", 64, 3);
  CHECK(split_sent.values != joined.values);
}

TEST_CASE("backend ids distinguish configurations") {
  EmbeddingBackendSpec local;
  local.kind = BackendKind::local;
  local.dim = 64;
  local.hash_seed = 9;
  CHECK(local.backend_id() == "local:d=64:seed=9");
  EmbeddingBackendSpec remote;
  remote.kind = BackendKind::remote;
  remote.model = "m1";
  remote.endpoint = "http://h:1";
  CHECK(remote.backend_id() == "remote:m1");
}

TEST_CASE("embedding matrix file round trip is exact") {
  fltest::TempDir dir("emb_mat");
  EmbeddingMatrix m;
  m.backend_id = "local:d=4:seed=1";
  m.dim = 4;
  m.doc_ids = {"a", "b"};
  m.data = {0.1f, -0.25f, 3.5f, 1e-30f, 0.0f, -0.0f, 42.0f, -7.125f};
  const std::string path = (dir.path() / "m.emb").string();
  save_embedding_matrix(m, path);
  EmbeddingMatrix r = load_embedding_matrix(path);
  CHECK(r.backend_id == m.backend_id);
  CHECK(r.dim == m.dim);
  CHECK(r.doc_ids == m.doc_ids);
  CHECK(r.data == m.data);  // bit-exact f32 storage
}

TEST_CASE("remote_embed_batch with zero texts makes no calls") {
  EmbeddingBackendSpec spec;
  spec.kind = BackendKind::remote;
  spec.endpoint = "http://127.0.0.1:1";  // nothing listens; must not be hit
  spec.model = "m";
  auto result = remote_embed_batch({}, spec, 4, 2, fast_retry());
  CHECK(result.empty());
}

TEST_CASE("remote_embed_batch partitions batches and preserves order") {
  MockServer server;
  std::vector<std::string> texts;
  for (int i = 0; i < 10; ++i) texts.push_back(std::string(i + 1, 'x'));
  BatchStats stats;
  auto result = remote_embed_batch(texts, remote_spec(server), 4, 3, fast_retry(), &stats);
  REQUIRE(result.size() == 10);
  CHECK(stats.requests == 3);
  std::multiset<std::size_t> sizes(stats.batch_sizes.begin(), stats.batch_sizes.end());
  CHECK(sizes == std::multiset<std::size_t>{4, 4, 2});
  for (int i = 0; i < 10; ++i) {
    REQUIRE(result[i].values.size() == 4);
    CHECK(result[i].values[0] == doctest::Approx(i + 1.0));  // input order kept
  }
}

TEST_CASE("remote_embed_batch retries transient 503s") {
  MockServer server;
  server.fail_next(2);
  BatchStats stats;
  auto result = remote_embed_batch({"hello"}, remote_spec(server), 8, 1, fast_retry(), &stats);
  REQUIRE(result.size() == 1);
  CHECK(stats.retries == 2);
  CHECK(server.requests() == 3);  // 503, 503, 200
}

TEST_CASE("remote_embed_batch gives up after retry exhaustion") {
  MockServer server;
  server.fail_next(10);
  CHECK_THROWS_WITH_AS(
      remote_embed_batch({"hello"}, remote_spec(server), 8, 1, fast_retry()),
      doctest::Contains("retries exhausted"), Error);
}

TEST_CASE("remote_embed_batch rejects dimension mismatch across batches") {
  MockServer server;
  // batch_size 1 puts "x" and "WIDE" in separate requests with dims 4 and 8
  CHECK_THROWS_WITH_AS(
      remote_embed_batch({"x", "WIDE"}, remote_spec(server), 1, 1, fast_retry()),
      doctest::Contains("dimension mismatch"), Error);
}

TEST_CASE("remote_embed_batch treats other 4xx as permanent") {
  MockServer server;
  CHECK_THROWS_WITH_AS(
      remote_embed_batch({"PERMANENT-FAIL"}, remote_spec(server), 8, 1, fast_retry()),
      doctest::Contains("status 400"), Error);
  CHECK(server.requests() == 1);  // no retry
}

TEST_CASE("EMBED_ENDPOINT overrides the configured endpoint") {
  MockServer server;
  EmbeddingBackendSpec spec;
  spec.kind = BackendKind::remote;
  spec.endpoint = "http://127.0.0.1:1";  // would fail
  spec.model = "m";
  setenv("EMBED_ENDPOINT", server.endpoint().c_str(), 1);
  auto result = remote_embed_batch({"via env"}, spec, 4, 1, fast_retry());
  unsetenv("EMBED_ENDPOINT");
  REQUIRE(result.size() == 1);
}

TEST_CASE("embed_corpus caches by content and backend") {
  fltest::TempDir dir("emb_cache");
  const std::string cache = (dir.path() / "embed.cache").string();
  EmbeddingBackendSpec spec;
  spec.kind = BackendKind::local;
  spec.dim = 32;
  spec.hash_seed = 1;

  std::vector<CleanDoc> docs = {{"d2", "flood water"}, {"d1", "stay safe"}, {"d3", ""}};

  EmbedReport first;
  EmbeddingMatrix m1 = embed_corpus(docs, spec, cache, &first);
  CHECK(first.backend_calls == 2);
  CHECK(first.cache_hits == 0);
  CHECK(first.empty_docs == 1);
  CHECK(m1.doc_ids == std::vector<std::string>{"d1", "d2", "d3"});  // sorted

  SUBCASE("second run is served entirely from cache") {
    EmbedReport second;
    EmbeddingMatrix m2 = embed_corpus(docs, spec, cache, &second);
    CHECK(second.backend_calls == 0);
    CHECK(second.cache_hits == 2);
    CHECK(m2.data == m1.data);
  }

  SUBCASE("one new doc means exactly one backend call") {
    docs.push_back({"d4", "new words here"});
    EmbedReport second;
    embed_corpus(docs, spec, cache, &second);
    CHECK(second.backend_calls == 1);
    CHECK(second.cache_hits == 2);
  }

  SUBCASE("different backend id is a separate cache entry") {
    EmbeddingBackendSpec other = spec;
    other.hash_seed = 2;
    EmbedReport second;
    embed_corpus(docs, other, cache, &second);
    CHECK(second.backend_calls == 2);
    CHECK(second.cache_hits == 0);
  }

  SUBCASE("truncated cache tail is dropped and rebuilt") {
    std::string bytes = read_file(cache);
    write_file(cache, bytes.substr(0, bytes.size() - 7));
    EmbedReport second;
    EmbeddingMatrix m2 = embed_corpus(docs, spec, cache, &second);
    REQUIRE(second.diagnostics.size() == 1);
    CHECK(second.diagnostics[0].find("corrupt tail") != std::string::npos);
    CHECK(second.backend_calls == 1);  // only the clipped record is re-embedded
    CHECK(m2.data == m1.data);
    EmbedReport third;
    embed_corpus(docs, spec, cache, &third);
    CHECK(third.backend_calls == 0);  // rebuild restored a fully valid cache
  }
}

TEST_CASE("embed_corpus zero-vector rows for empty docs, flagged in report") {
  fltest::TempDir dir("emb_empty");
  EmbeddingBackendSpec spec;
  spec.kind = BackendKind::local;
  spec.dim = 32;
  std::vector<CleanDoc> docs = {{"a", ""}, {"b", "words are here"}};
  EmbeddingMatrix m =
      embed_corpus(docs, spec, (dir.path() / "c").string(), nullptr);
  double norm0 = 0.0, norm1 = 0.0;
  for (float v : m.row(0)) norm0 += v * v;
  for (float v : m.row(1)) norm1 += v * v;
  CHECK(norm0 == 0.0);
  CHECK(norm1 > 0.0);
}

TEST_CASE("embed_corpus duplicate doc ids are fatal") {
  fltest::TempDir dir("emb_dup");
  EmbeddingBackendSpec spec;
  spec.kind = BackendKind::local;
  spec.dim = 32;
  std::vector<CleanDoc> docs = {{"a", "x"}, {"a", "y"}};
  CHECK_THROWS_AS(embed_corpus(docs, spec, (dir.path() / "c").string(), nullptr), Error);
}
