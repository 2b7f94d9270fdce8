#include "floodlens/report.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

#include "floodlens/util.hpp"

namespace floodlens {

namespace {

double quantile_sorted(const std::vector<double>& sorted, double q) {
  std::size_t k = static_cast<std::size_t>(
      std::ceil(q * static_cast<double>(sorted.size()) - 1e-9));
  k = std::min(std::max<std::size_t>(k, 1), sorted.size());
  return sorted[k - 1];
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double median_sorted(const std::vector<double>& sorted) {
  const std::size_t n = sorted.size();
  if (n % 2 == 1) return sorted[n / 2];
  return (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0;
}

}  // namespace

NgramDensityReport ngram_density_report(std::span<const TokenDoc> docs,
                                        const std::set<std::string>& top_ids,
                                        const std::set<std::string>& bottom_ids,
                                        std::size_t bins, NgramStat stat) {
  if (top_ids.empty() || bottom_ids.empty())
    throw Error("ngram_density_report: both groups must be non-empty");
  for (const auto& id : top_ids)
    if (bottom_ids.count(id))
      throw Error("ngram_density_report: groups overlap at id " + id);

  std::vector<double> top_vals, bottom_vals;
  for (const auto& doc : docs) {
    double value = stat == NgramStat::total_occurrences
                       ? static_cast<double>(doc.total_ngrams())
                       : static_cast<double>(doc.ngram_counts.size());
    if (top_ids.count(doc.doc_id)) top_vals.push_back(value);
    else if (bottom_ids.count(doc.doc_id)) bottom_vals.push_back(value);
  }
  if (top_vals.empty() || bottom_vals.empty())
    throw Error("ngram_density_report: a group matched no documents");

  std::vector<double> pooled = top_vals;
  pooled.insert(pooled.end(), bottom_vals.begin(), bottom_vals.end());
  std::sort(pooled.begin(), pooled.end());
  const double lo = pooled.front(), hi = pooled.back();

  NgramDensityReport report;
  std::size_t nbins;
  double width;
  if (hi == lo) {
    nbins = 1;
    width = 1.0;
    report.edges = {lo - 0.5, lo + 0.5};
  } else {
    if (bins > 0) {
      nbins = bins;
    } else {
      // Freedman-Diaconis on the pooled values.
      const double iqr = quantile_sorted(pooled, 0.75) - quantile_sorted(pooled, 0.25);
      const double h = 2.0 * iqr / std::cbrt(static_cast<double>(pooled.size()));
      nbins = h > 0.0 ? static_cast<std::size_t>(std::ceil((hi - lo) / h))
                      : static_cast<std::size_t>(std::ceil(std::sqrt(
                            static_cast<double>(pooled.size()))));
      nbins = std::max<std::size_t>(nbins, 1);
    }
    width = (hi - lo) / static_cast<double>(nbins);
    for (std::size_t i = 0; i <= nbins; ++i)
      report.edges.push_back(lo + width * static_cast<double>(i));
    report.edges.back() = hi;  // guard the rightmost edge against rounding
  }

  auto histogram = [&](const std::vector<double>& vals) {
    std::vector<double> density(nbins, 0.0);
    for (double v : vals) {
      std::size_t b =
          v >= hi ? nbins - 1
                  : static_cast<std::size_t>((v - report.edges.front()) / width);
      b = std::min(b, nbins - 1);
      density[b] += 1.0;
    }
    for (std::size_t b = 0; b < nbins; ++b) {
      const double bin_width = report.edges[b + 1] - report.edges[b];
      density[b] /= static_cast<double>(vals.size()) *
                    (bin_width > 0.0 ? bin_width : 1.0);
    }
    return density;
  };
  report.top_density = histogram(top_vals);
  report.bottom_density = histogram(bottom_vals);

  std::sort(top_vals.begin(), top_vals.end());
  std::sort(bottom_vals.begin(), bottom_vals.end());
  report.top_stats = {mean_of(top_vals), median_sorted(top_vals)};
  report.bottom_stats = {mean_of(bottom_vals), median_sorted(bottom_vals)};
  return report;
}

std::vector<TermAssociationRow> term_association(std::span<const TokenDoc> docs,
                                                 const std::set<std::string>& relevant_ids,
                                                 const std::set<std::string>& irrelevant_ids,
                                                 double alpha) {
  if (relevant_ids.empty() || irrelevant_ids.empty())
    throw Error("term_association: both groups must be non-empty");
  for (const auto& id : relevant_ids)
    if (irrelevant_ids.count(id))
      throw Error("term_association: groups overlap at id " + id);

  std::map<std::string, std::array<std::int64_t, 2>> counts;  // term -> {rel, irrel}
  for (const auto& doc : docs) {
    int side;
    if (relevant_ids.count(doc.doc_id)) side = 0;
    else if (irrelevant_ids.count(doc.doc_id)) side = 1;
    else continue;
    for (const auto& sentence : doc.sentences)
      for (const auto& tok : sentence) counts[tok][side] += 1;
  }
  if (counts.empty()) return {};

  if (alpha <= 0.0) {
    double total = 0.0;
    for (const auto& [term, c] : counts)
      total += static_cast<double>(c[0] + c[1]);
    alpha = 0.01 * total / static_cast<double>(counts.size());
  }

  std::vector<TermAssociationRow> rows;
  rows.reserve(counts.size());
  for (const auto& [term, c] : counts) {
    TermAssociationRow row;
    row.term = term;
    row.c_rel = c[0];
    row.c_irrel = c[1];
    row.precision = (static_cast<double>(c[0]) + alpha) /
                    (static_cast<double>(c[0] + c[1]) + 2.0 * alpha);
    rows.push_back(std::move(row));
  }

  // Empirical-CDF rank of v in values: |{x <= v}| / N.
  auto cdf_rank_fn = [](std::vector<double> values) {
    std::sort(values.begin(), values.end());
    return [values = std::move(values)](double v) {
      const auto ub = std::upper_bound(values.begin(), values.end(), v);
      return static_cast<double>(ub - values.begin()) /
             static_cast<double>(values.size());
    };
  };
  std::vector<double> precisions, rel_counts, irrel_counts, irrel_precisions;
  for (const auto& row : rows) {
    precisions.push_back(row.precision);
    irrel_precisions.push_back(1.0 - row.precision);
    rel_counts.push_back(static_cast<double>(row.c_rel));
    irrel_counts.push_back(static_cast<double>(row.c_irrel));
  }
  auto p_rank = cdf_rank_fn(precisions);
  auto f_rank = cdf_rank_fn(rel_counts);
  auto pi_rank = cdf_rank_fn(irrel_precisions);
  auto fi_rank = cdf_rank_fn(irrel_counts);

  auto harmonic = [](double a, double b) {
    return a + b > 0.0 ? 2.0 * a * b / (a + b) : 0.0;
  };
  for (auto& row : rows) {
    row.freq_percentile = f_rank(static_cast<double>(row.c_rel));
    row.association = harmonic(p_rank(row.precision), row.freq_percentile);
    row.association_irrel = harmonic(pi_rank(1.0 - row.precision),
                                     fi_rank(static_cast<double>(row.c_irrel)));
  }
  std::sort(rows.begin(), rows.end(),
            [](const TermAssociationRow& a, const TermAssociationRow& b) {
              if (a.association != b.association) return a.association > b.association;
              return a.term < b.term;
            });
  return rows;
}

TopicTimeline topic_timeline(std::span<const Tweet> tweets,
                             const std::map<std::string, std::uint32_t>& dominant,
                             std::uint32_t num_topics, bool zero_fill) {
  std::map<std::pair<std::string, std::uint32_t>, std::size_t> cells;
  std::int64_t min_day = 0, max_day = 0;
  bool any = false;
  for (const auto& t : tweets) {
    auto it = dominant.find(t.id);
    if (it == dominant.end()) continue;
    std::int64_t day = t.created_at / 86400;
    if (t.created_at < 0 && t.created_at % 86400 != 0) day -= 1;
    cells[{format_utc_date(day), it->second}] += 1;
    if (!any || day < min_day) min_day = any ? std::min(min_day, day) : day;
    if (!any || day > max_day) max_day = any ? std::max(max_day, day) : day;
    any = true;
  }
  if (zero_fill && any) {
    for (std::int64_t day = min_day; day <= max_day; ++day)
      for (std::uint32_t k = 0; k < num_topics; ++k)
        cells.try_emplace({format_utc_date(day), k}, 0);
  }
  TopicTimeline timeline;
  for (const auto& [key, count] : cells) {
    timeline.cells.push_back({key.first, key.second, count});
    timeline.totals[key.first] += count;
  }
  return timeline;
}

namespace {

std::string grid_key(double lat, double lon) {
  double glat = std::round(lat * 10.0) / 10.0 + 0.0;  // normalize -0.0
  double glon = std::round(lon * 10.0) / 10.0 + 0.0;
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.1f,%.1f", glat, glon);
  return buf;
}

GeoBinReport bins_from_map(std::map<std::string, std::map<std::uint32_t, std::size_t>> m,
                           std::size_t excluded) {
  GeoBinReport report;
  report.excluded = excluded;
  for (auto& [key, topic_counts] : m)
    report.bins.push_back({key, std::move(topic_counts)});
  return report;
}

}  // namespace

GeoBinReport geo_aggregate_grid(std::span<const Tweet> tweets,
                                const std::map<std::string, std::uint32_t>& dominant) {
  std::map<std::string, std::map<std::uint32_t, std::size_t>> bins;
  std::size_t excluded = 0;
  for (const auto& t : tweets) {
    auto it = dominant.find(t.id);
    if (!t.geo || it == dominant.end()) {
      ++excluded;
      continue;
    }
    bins[grid_key(t.geo->lat, t.geo->lon)][it->second] += 1;
  }
  return bins_from_map(std::move(bins), excluded);
}

GeoBinReport geo_aggregate_postcode(std::span<const Submission> submissions,
                                    const std::map<std::string, std::uint32_t>& dominant) {
  std::map<std::string, std::map<std::uint32_t, std::size_t>> bins;
  std::size_t excluded = 0;
  for (const auto& s : submissions) {
    auto it = dominant.find(s.id);
    if (!s.postcode || it == dominant.end()) {
      ++excluded;
      continue;
    }
    bins[*s.postcode][it->second] += 1;
  }
  return bins_from_map(std::move(bins), excluded);
}

namespace {

// Cyclic Jacobi eigendecomposition of a symmetric matrix. Deterministic:
// fixed sweep order, scalar arithmetic only.
void jacobi_eigen(std::vector<double>& a, std::size_t d, std::vector<double>& v) {
  v.assign(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i) v[i * d + i] = 1.0;

  auto off_norm = [&] {
    double s = 0.0;
    for (std::size_t p = 0; p < d; ++p)
      for (std::size_t q = p + 1; q < d; ++q) s += a[p * d + q] * a[p * d + q];
    return s;
  };
  double diag_scale = 0.0;
  for (std::size_t i = 0; i < d; ++i) diag_scale += a[i * d + i] * a[i * d + i];
  const double tol = 1e-26 * (diag_scale + 1.0);

  for (int sweep = 0; sweep < 64 && off_norm() > tol; ++sweep) {
    for (std::size_t p = 0; p < d; ++p) {
      for (std::size_t q = p + 1; q < d; ++q) {
        const double apq = a[p * d + q];
        if (apq == 0.0) continue;
        const double app = a[p * d + p], aqq = a[q * d + q];
        const double tau = (aqq - app) / (2.0 * apq);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                         (std::fabs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        for (std::size_t i = 0; i < d; ++i) {
          const double aip = a[i * d + p], aiq = a[i * d + q];
          a[i * d + p] = c * aip - s * aiq;
          a[i * d + q] = s * aip + c * aiq;
        }
        for (std::size_t i = 0; i < d; ++i) {
          const double api = a[p * d + i], aqi = a[q * d + i];
          a[p * d + i] = c * api - s * aqi;
          a[q * d + i] = s * api + c * aqi;
        }
        for (std::size_t i = 0; i < d; ++i) {
          const double vip = v[i * d + p], viq = v[i * d + q];
          v[i * d + p] = c * vip - s * viq;
          v[i * d + q] = s * vip + c * viq;
        }
      }
    }
  }
}

}  // namespace

ProjectionResult pca_projection(const EmbeddingMatrix& embeddings) {
  const std::size_t n = embeddings.rows();
  const std::size_t d = embeddings.dim;
  if (n < 2) throw Error("pca_projection: need at least 2 documents");
  if (d < 2) throw Error("pca_projection: need at least 2 dimensions");

  std::vector<double> centered(n * d);
  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = embeddings.row(i);
    for (std::size_t j = 0; j < d; ++j) mean[j] += static_cast<double>(row[j]);
  }
  for (double& m : mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = embeddings.row(i);
    for (std::size_t j = 0; j < d; ++j)
      centered[i * d + j] = static_cast<double>(row[j]) - mean[j];
  }

  std::vector<double> cov(d * d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const double xij = centered[i * d + j];
      if (xij == 0.0) continue;
      for (std::size_t k = j; k < d; ++k)
        cov[j * d + k] += xij * centered[i * d + k];
    }
  const double denom = static_cast<double>(n - 1);
  double total_variance = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t k = j; k < d; ++k) {
      cov[j * d + k] /= denom;
      cov[k * d + j] = cov[j * d + k];
    }
    total_variance += cov[j * d + j];
  }

  ProjectionResult result;
  result.coords.assign(n, {0.0, 0.0});
  if (total_variance == 0.0) {
    result.diagnostics.push_back("zero-variance embeddings; all coordinates are 0");
    return result;
  }

  std::vector<double> a = cov, v;
  jacobi_eigen(a, d, v);

  std::vector<std::size_t> idx(d);
  for (std::size_t i = 0; i < d; ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) {
    return a[x * d + x] > a[y * d + y];
  });

  for (int comp = 0; comp < 2; ++comp) {
    const std::size_t col = idx[comp];
    std::vector<double> direction(d);
    for (std::size_t i = 0; i < d; ++i) direction[i] = v[i * d + col];
    std::size_t max_i = 0;
    for (std::size_t i = 1; i < d; ++i)
      if (std::fabs(direction[i]) > std::fabs(direction[max_i])) max_i = i;
    if (direction[max_i] < 0.0)
      for (double& x : direction) x = -x;
    for (std::size_t r = 0; r < n; ++r) {
      double proj = 0.0;
      for (std::size_t j = 0; j < d; ++j) proj += centered[r * d + j] * direction[j];
      result.coords[r][comp] = proj;
    }
    result.explained_variance[comp] = a[col * d + col];
  }
  return result;
}

}  // namespace floodlens
