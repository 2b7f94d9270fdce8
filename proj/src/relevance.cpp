#include "floodlens/relevance.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

#include "floodlens/util.hpp"

namespace floodlens {

namespace {

double dot(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return s;
}

double norm(std::span<const float> v) {
  double s = 0.0;
  for (float x : v) s += static_cast<double>(x) * static_cast<double>(x);
  return std::sqrt(s);
}

// k-th smallest with k = ceil(q*n), guarded against FP wobble in q*n.
double empirical_quantile(std::vector<double> values, double q) {
  std::size_t k = static_cast<std::size_t>(
      std::ceil(q * static_cast<double>(values.size()) - 1e-9));
  k = std::min(std::max<std::size_t>(k, 1), values.size());
  std::nth_element(values.begin(), values.begin() + (k - 1), values.end());
  return values[k - 1];
}

}  // namespace

ReferenceCorpus select_reference_core(const EmbeddingMatrix& submissions, double q) {
  if (!(q > 0.0 && q <= 1.0))
    throw Error("select_reference_core: q must be in (0, 1]");

  ReferenceCorpus ref;
  ref.dim = submissions.dim;
  ref.quantile = q;

  // Normalize usable rows; zero vectors cannot be part of the core.
  std::vector<std::size_t> usable;
  std::vector<std::vector<double>> unit_rows;
  for (std::size_t i = 0; i < submissions.rows(); ++i) {
    const double n = norm(submissions.row(i));
    if (n == 0.0) {
      ref.dropped_zero += 1;
      continue;
    }
    std::vector<double> unit(submissions.dim);
    auto row = submissions.row(i);
    for (std::size_t j = 0; j < row.size(); ++j)
      unit[j] = static_cast<double>(row[j]) / n;
    usable.push_back(i);
    unit_rows.push_back(std::move(unit));
  }
  if (usable.size() < 2)
    throw Error("select_reference_core: fewer than 2 usable submission embeddings");

  std::vector<double> centroid(submissions.dim, 0.0);
  for (const auto& unit : unit_rows)
    for (std::size_t j = 0; j < centroid.size(); ++j) centroid[j] += unit[j];
  for (double& c : centroid) c /= static_cast<double>(unit_rows.size());
  double centroid_norm = 0.0;
  for (double c : centroid) centroid_norm += c * c;
  centroid_norm = std::sqrt(centroid_norm);

  std::vector<double> distances(unit_rows.size(), 1.0);
  if (centroid_norm == 0.0) {
    ref.diagnostics.push_back(
        "centroid of normalized submissions is zero; all distances set to 1");
  } else {
    for (std::size_t i = 0; i < unit_rows.size(); ++i) {
      double cos = 0.0;
      for (std::size_t j = 0; j < centroid.size(); ++j)
        cos += unit_rows[i][j] * centroid[j];
      distances[i] = 1.0 - cos / centroid_norm;
    }
  }

  const double threshold = empirical_quantile(distances, q);
  for (std::size_t i = 0; i < unit_rows.size(); ++i) {
    if (distances[i] <= threshold) {
      const std::size_t src = usable[i];
      ref.selected_ids.push_back(submissions.doc_ids[src]);
      auto row = submissions.row(src);
      ref.rows.insert(ref.rows.end(), row.begin(), row.end());
      ref.row_norms.push_back(norm(row));
    }
  }
  return ref;
}

SimilarityVector similarity_vector(std::span<const float> tweet_embedding,
                                   const ReferenceCorpus& ref,
                                   const std::string& tweet_id) {
  if (tweet_embedding.size() != ref.dim)
    throw Error("similarity_vector: dimension mismatch");
  const double vnorm = norm(tweet_embedding);
  if (vnorm == 0.0)
    throw Error("empty-embedding: zero vector for tweet " + tweet_id);

  SimilarityVector sim;
  sim.tweet_id = tweet_id;
  sim.s.resize(ref.size());
  for (std::size_t i = 0; i < ref.size(); ++i)
    sim.s[i] = dot(tweet_embedding, ref.row(i)) / (vnorm * ref.row_norms[i]);
  return sim;
}

namespace {

double clamp_s(double v, double epsilon) {
  return std::min(std::max(v, epsilon), 1.0 - epsilon);
}

double transform_one(double s, double lambda) {
  if (lambda == 0.0) return std::log(s);
  return (std::pow(s, lambda) - 1.0) / lambda;
}

}  // namespace

BoxCoxParams fit_boxcox_lambda(std::span<const double> s, double epsilon) {
  if (!(epsilon > 0.0 && epsilon <= 0.1))
    throw Error("fit_boxcox_lambda: epsilon must be in (0, 0.1]");

  BoxCoxParams params;
  params.epsilon = epsilon;

  const std::size_t n = s.size();
  std::vector<double> logs(n);
  double log_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    logs[i] = std::log(clamp_s(s[i], epsilon));
    log_sum += logs[i];
  }

  if (n < kBoxCoxMinSamples) {
    params.fallback = true;
    params.note = "fewer than " + std::to_string(kBoxCoxMinSamples) +
                  " values; lambda fixed at 0";
    return params;
  }
  const double min_log = *std::min_element(logs.begin(), logs.end());
  const double max_log = *std::max_element(logs.begin(), logs.end());
  if (min_log == max_log) {
    params.fallback = true;
    params.note = "constant values after clamping; lambda fixed at 0";
    return params;
  }

  // LL(lambda) = (lambda - 1) * sum(ln s) - n/2 * ln(biased variance of y).
  const double half_n = static_cast<double>(n) / 2.0;
  std::vector<double> y(n);
  auto log_likelihood = [&](double lambda) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = lambda == 0.0 ? logs[i]
                           : (std::exp(lambda * logs[i]) - 1.0) / lambda;
      mean += y[i];
    }
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = y[i] - mean;
      var += d * d;
    }
    var /= static_cast<double>(n);
    if (var <= 0.0) return -std::numeric_limits<double>::infinity();
    return (lambda - 1.0) * log_sum - half_n * std::log(var);
  };

  const int steps = static_cast<int>(std::llround((kBoxCoxGridHi - kBoxCoxGridLo) / kBoxCoxGridStep));
  double best_lambda = 0.0;
  double best_ll = -std::numeric_limits<double>::infinity();
  for (int i = 0; i <= steps; ++i) {
    const double lambda = (i - steps / 2) * kBoxCoxGridStep;
    const double ll = log_likelihood(lambda);
    if (ll > best_ll ||
        (ll == best_ll && std::fabs(lambda) < std::fabs(best_lambda))) {
      best_ll = ll;
      best_lambda = lambda;
    }
  }
  params.lambda = best_lambda;
  params.log_likelihood = best_ll;
  return params;
}

std::vector<double> boxcox_transform_scale(std::span<const double> s,
                                           const BoxCoxParams& params) {
  std::vector<double> out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double v = clamp_s(s[i], params.epsilon);
    const double y = transform_one(v, params.lambda);
    if (y == 0.0)
      throw Error("boxcox_transform_scale: y = 0 after clamping (invariant breach)");
    out[i] = -1.0 / y;
  }
  return out;
}

double median(std::span<const double> values) {
  if (values.empty()) throw Error("median: empty input");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n % 2 == 1) return v[n / 2];
  return (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

RelevanceScore relevance_index(std::span<const float> tweet_embedding,
                               const ReferenceCorpus& ref,
                               const std::string& tweet_id,
                               double epsilon) {
  const SimilarityVector sim = similarity_vector(tweet_embedding, ref, tweet_id);
  const BoxCoxParams params = fit_boxcox_lambda(sim.s, epsilon);
  const std::vector<double> scaled = boxcox_transform_scale(sim.s, params);
  RelevanceScore score;
  score.tweet_id = tweet_id;
  score.lambda = params.lambda;
  score.index = median(scaled);
  return score;
}

ScoreReport score_corpus(const EmbeddingMatrix& tweets, const ReferenceCorpus& ref,
                         LambdaMode mode, double epsilon, std::size_t threads) {
  ScoreReport report;
  if (tweets.dim != ref.dim)
    throw Error("score_corpus: embedding dimension mismatch with reference corpus");

  std::vector<int> empty(tweets.rows(), 0);
  for (std::size_t i = 0; i < tweets.rows(); ++i) {
    if (norm(tweets.row(i)) == 0.0) empty[i] = 1;
  }

  BoxCoxParams global_params;
  if (mode == LambdaMode::global) {
    std::vector<double> pooled;
    for (std::size_t i = 0; i < tweets.rows(); ++i) {
      if (empty[i]) continue;
      auto sim = similarity_vector(tweets.row(i), ref, tweets.doc_ids[i]);
      pooled.insert(pooled.end(), sim.s.begin(), sim.s.end());
    }
    if (!pooled.empty()) global_params = fit_boxcox_lambda(pooled, epsilon);
    report.global_lambda = global_params.lambda;
  }

  std::vector<std::optional<RelevanceScore>> slots(tweets.rows());
  auto score_one = [&](std::size_t i) {
    if (empty[i]) return;
    if (mode == LambdaMode::per_tweet) {
      slots[i] = relevance_index(tweets.row(i), ref, tweets.doc_ids[i], epsilon);
    } else {
      auto sim = similarity_vector(tweets.row(i), ref, tweets.doc_ids[i]);
      auto scaled = boxcox_transform_scale(sim.s, global_params);
      RelevanceScore s;
      s.tweet_id = tweets.doc_ids[i];
      s.lambda = global_params.lambda;
      s.index = median(scaled);
      slots[i] = s;
    }
  };

  if (threads <= 1) {
    for (std::size_t i = 0; i < tweets.rows(); ++i) score_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (;;) {
          const std::size_t i = next.fetch_add(1);
          if (i >= tweets.rows()) return;
          score_one(i);
        }
      });
    }
    for (auto& t : pool) t.join();
  }

  for (std::size_t i = 0; i < tweets.rows(); ++i) {
    if (empty[i]) report.excluded_ids.push_back(tweets.doc_ids[i]);
    else report.scores.push_back(*slots[i]);
  }
  return report;
}

DecileResult decile_partition(std::vector<RelevanceScore> scores) {
  if (scores.size() < 10)
    throw Error("decile_partition: need at least 10 scores, got " +
                std::to_string(scores.size()));
  std::sort(scores.begin(), scores.end(),
            [](const RelevanceScore& a, const RelevanceScore& b) {
              if (a.index != b.index) return a.index > b.index;
              return a.tweet_id < b.tweet_id;
            });
  const std::size_t n = scores.size();
  // boundary[k] = ceil(k*n/10); decile k covers (boundary[k-1], boundary[k]].
  std::size_t boundaries[11];
  for (std::size_t k = 0; k <= 10; ++k) boundaries[k] = (k * n + 9) / 10;

  DecileResult result;
  std::size_t k = 1;
  for (std::size_t r = 1; r <= n; ++r) {
    while (r > boundaries[k]) ++k;
    scores[r - 1].decile = static_cast<int>(k);
    if (k == 1) result.top_ids.push_back(scores[r - 1].tweet_id);
    if (k == 10) result.bottom_ids.push_back(scores[r - 1].tweet_id);
  }
  result.scores = std::move(scores);
  return result;
}

}  // namespace floodlens
