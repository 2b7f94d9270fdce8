#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "floodlens/topics.hpp"
#include "floodlens/util.hpp"
#include "test_helpers.hpp"

using namespace floodlens;

namespace {

std::vector<BowDoc> tiny_corpus() {
  // 4 docs over a 6-term vocabulary, two obvious themes.
  return {
      {"d1", {{0, 3}, {1, 2}, {2, 1}}},
      {"d2", {{0, 1}, {1, 4}}},
      {"d3", {{3, 3}, {4, 2}, {5, 1}}},
      {"d4", {{4, 2}, {5, 3}}},
  };
}

LdaConfig quick_config(std::uint32_t k, std::uint64_t seed) {
  LdaConfig config;
  config.topics = k;
  config.alpha = 0.5;
  config.beta = 0.01;
  config.iterations = 50;
  config.burn_in = 25;
  config.seed = seed;
  return config;
}

}  // namespace

TEST_CASE("K=1 degenerates to exact theta 1 and smoothed frequencies") {
  auto docs = tiny_corpus();
  LdaModel model = fit_lda(docs, 6, quick_config(1, 7));
  for (std::size_t d = 0; d < docs.size(); ++d)
    CHECK(model.theta_row(d)[0] == 1.0);

  // phi = (n_w + beta) / (N + V beta) with all tokens in the single topic.
  std::vector<double> counts(6, 0.0);
  double total = 0.0;
  for (const auto& doc : docs)
    for (auto [w, c] : doc.counts) {
      counts[w] += c;
      total += c;
    }
  for (std::uint32_t w = 0; w < 6; ++w) {
    const double expected = (counts[w] + 0.01) / (total + 6 * 0.01);
    CHECK(model.phi_at(0, w) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("phi and theta rows are normalized") {
  auto docs = tiny_corpus();
  for (std::uint32_t k : {1u, 2u, 3u}) {
    LdaModel model = fit_lda(docs, 6, quick_config(k, 11));
    for (std::uint32_t t = 0; t < k; ++t) {
      double sum = 0.0;
      for (std::uint32_t w = 0; w < 6; ++w) {
        CHECK(model.phi_at(t, w) >= 0.0);
        sum += model.phi_at(t, w);
      }
      CHECK(std::fabs(sum - 1.0) < 1e-9);
    }
    for (std::size_t d = 0; d < docs.size(); ++d) {
      double sum = 0.0;
      for (double v : model.theta_row(d)) sum += v;
      CHECK(std::fabs(sum - 1.0) < 1e-9);
    }
    for (const auto& doc_z : model.assignments)
      for (auto z : doc_z) CHECK(z < k);
  }
}

TEST_CASE("seeded determinism: identical inputs give identical models") {
  auto docs = tiny_corpus();
  LdaModel a = fit_lda(docs, 6, quick_config(3, 99));
  LdaModel b = fit_lda(docs, 6, quick_config(3, 99));
  CHECK(a.phi == b.phi);
  CHECK(a.theta == b.theta);
  CHECK(a.assignments == b.assignments);
  LdaModel c = fit_lda(docs, 6, quick_config(3, 100));
  CHECK(a.assignments != c.assignments);
}

TEST_CASE("token count is conserved across sweeps") {
  auto docs = tiny_corpus();
  GibbsSampler sampler(docs, 6, quick_config(3, 5));
  const std::int64_t total = sampler.total_tokens();
  for (int sweep = 0; sweep < 10; ++sweep) {
    sampler.run_sweep();
    std::int64_t from_kw = 0, from_k = 0;
    for (std::uint32_t k = 0; k < 3; ++k) {
      from_k += sampler.topic_count(k);
      for (std::uint32_t w = 0; w < 6; ++w) from_kw += sampler.topic_word_count(k, w);
    }
    CHECK(from_kw == total);
    CHECK(from_k == total);
    std::int64_t from_dk = 0;
    for (std::size_t d = 0; d < docs.size(); ++d)
      for (std::uint32_t k = 0; k < 3; ++k) from_dk += sampler.doc_topic_count(d, k);
    CHECK(from_dk == total);
  }
}

TEST_CASE("exchangeability: document order does not change the chain") {
  auto docs = tiny_corpus();
  LdaModel forward = fit_lda(docs, 6, quick_config(2, 21));

  std::vector<BowDoc> shuffled = {docs[2], docs[0], docs[3], docs[1]};
  LdaModel permuted = fit_lda(shuffled, 6, quick_config(2, 21));

  for (std::size_t d = 0; d < docs.size(); ++d) {
    const auto it = std::find_if(permuted.doc_ids.begin(), permuted.doc_ids.end(),
                                 [&](const std::string& id) { return id == docs[d].doc_id; });
    REQUIRE(it != permuted.doc_ids.end());
    const std::size_t pd = static_cast<std::size_t>(it - permuted.doc_ids.begin());
    auto a = forward.theta_row(d);
    auto b = permuted.theta_row(pd);
    for (std::uint32_t k = 0; k < 2; ++k) CHECK(a[k] == b[k]);
  }
}

TEST_CASE("planted 3-topic corpus is recovered") {
  auto planted = fltest::make_planted_corpus(3, 30, 500, 50, 0.8, 4242);
  LdaConfig config;
  config.topics = 3;
  config.alpha = 0.5;
  config.beta = 0.01;
  config.iterations = 200;
  config.burn_in = 100;
  config.seed = 31337;
  LdaModel model = fit_lda(planted.docs, 30, config);
  const double tv = fltest::matched_max_tv(model.phi, planted.true_phi, 3, 30);
  CHECK(tv <= 0.15);
}

TEST_CASE("umass coherence worked examples") {
  // Build documents so that D(w0) = D(w1) = D(w0 and w1) = 10 and
  // D(w2) = 10 with no co-occurrence between w2 and w3.
  std::vector<BowDoc> docs;
  for (int i = 0; i < 10; ++i)
    docs.push_back({"a" + std::to_string(i), {{0, 1}, {1, 1}}});
  for (int i = 0; i < 10; ++i)
    docs.push_back({"b" + std::to_string(i), {{2, 1}}});
  for (int i = 0; i < 5; ++i)
    docs.push_back({"c" + std::to_string(i), {{3, 1}}});

  SUBCASE("single word topic scores zero") {
    auto result = umass_coherence({{0}}, docs);
    CHECK(result.per_topic[0] == 0.0);
  }
  SUBCASE("always co-occurring pair") {
    auto result = umass_coherence({{0, 1}}, docs);
    CHECK(result.per_topic[0] == doctest::Approx(std::log(11.0 / 10.0)).epsilon(1e-12));
  }
  SUBCASE("never co-occurring pair") {
    auto result = umass_coherence({{2, 3}}, docs);
    CHECK(result.per_topic[0] == doctest::Approx(std::log(1.0 / 10.0)).epsilon(1e-12));
  }
  SUBCASE("zero-df terms are excluded with a diagnostic") {
    auto result = umass_coherence({{0, 1, 5}}, docs);
    CHECK(result.per_topic[0] == doctest::Approx(std::log(11.0 / 10.0)).epsilon(1e-12));
    CHECK(result.diagnostics.size() == 1);
  }
}

TEST_CASE("select_topic_count") {
  SUBCASE("single candidate is chosen") {
    auto docs = tiny_corpus();
    auto report = select_topic_count(docs, 6, {4}, quick_config(1, 3), 10);
    CHECK(report.chosen_k == 4);
    CHECK(report.entries.size() == 1);
  }
  SUBCASE("planted corpus selects the true K") {
    auto planted = fltest::make_planted_corpus(3, 30, 500, 50, 0.8, 777);
    LdaConfig base;
    base.alpha = 0.5;
    base.beta = 0.01;
    base.iterations = 150;
    base.burn_in = 75;
    base.seed = 2024;
    auto report = select_topic_count(planted.docs, 30, {2, 3, 4, 6}, base, 10);
    CHECK(report.chosen_k == 3);
  }
  SUBCASE("ties go to the smallest K") {
    // With one top word per topic every coherence score is exactly 0.
    auto docs = tiny_corpus();
    auto report = select_topic_count(docs, 6, {4, 2, 3}, quick_config(1, 3), 1);
    for (const auto& e : report.entries) CHECK(e.score == 0.0);
    CHECK(report.chosen_k == 2);
  }
}

TEST_CASE("dominant topic argmax with tie rules") {
  LdaModel model;
  model.num_topics = 3;
  model.vocab_size = 1;
  model.doc_ids = {"a", "b", "c"};
  model.theta = {0.7, 0.2, 0.1,   //
                 0.25, 0.5, 0.25, //
                 0.4, 0.4, 0.2};
  CHECK(dominant_topic(model, 0) == 0);
  CHECK(dominant_topic(model, 1) == 1);
  CHECK(dominant_topic(model, 2) == 0);  // tie -> smallest index

  LdaModel single;
  single.num_topics = 1;
  single.vocab_size = 1;
  single.doc_ids = {"a"};
  single.theta = {1.0};
  CHECK(dominant_topic(single, 0) == 0);
}

TEST_CASE("config validation") {
  auto docs = tiny_corpus();
  LdaConfig bad = quick_config(2, 1);
  bad.burn_in = 60;  // >= iterations
  CHECK_THROWS_AS(fit_lda(docs, 6, bad), Error);
  LdaConfig neg = quick_config(2, 1);
  neg.beta = 0.0;
  CHECK_THROWS_AS(fit_lda(docs, 6, neg), Error);
  CHECK_THROWS_AS(fit_lda(std::vector<BowDoc>{}, 6, quick_config(2, 1)), Error);
}

TEST_CASE("auto alpha resolves to 50/K") {
  auto docs = tiny_corpus();
  LdaConfig config = quick_config(2, 5);
  config.alpha = 0.0;
  LdaModel model = fit_lda(docs, 6, config);
  CHECK(model.config.alpha == doctest::Approx(25.0));
}
