// report.hpp -- plot-ready evaluation artifacts: decile N-gram density,
// term association between relevant and irrelevant posts, daily topic
// timelines, geographic bins, and a 2D PCA projection of the embeddings.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "floodlens/corpus.hpp"
#include "floodlens/embed.hpp"
#include "floodlens/textprep.hpp"

namespace floodlens {

enum class NgramStat { total_occurrences, distinct_ngrams };

struct NgramDensityReport {
  std::vector<double> edges;  // nbins + 1 shared edges
  std::vector<double> top_density, bottom_density;
  struct GroupStats {
    double mean = 0.0;
    double median = 0.0;
  } top_stats, bottom_stats;
};

// Per-tweet statistic over both groups with shared Freedman-Diaconis bins
// (or `bins` equal-width bins when bins > 0). Densities integrate to 1 per
// group.
NgramDensityReport ngram_density_report(std::span<const TokenDoc> docs,
                                        const std::set<std::string>& top_ids,
                                        const std::set<std::string>& bottom_ids,
                                        std::size_t bins = 0,
                                        NgramStat stat = NgramStat::total_occurrences);

struct TermAssociationRow {
  std::string term;
  std::int64_t c_rel = 0;
  std::int64_t c_irrel = 0;
  double precision = 0.0;      // smoothed c_rel / (c_rel + c_irrel)
  double freq_percentile = 0.0;
  double association = 0.0;        // harmonic mean of rank(precision), rank(c_rel)
  double association_irrel = 0.0;  // same construction from the irrelevant side
};

// alpha = 0 selects the default smoothing 0.01 * mean term count.
std::vector<TermAssociationRow> term_association(std::span<const TokenDoc> docs,
                                                 const std::set<std::string>& relevant_ids,
                                                 const std::set<std::string>& irrelevant_ids,
                                                 double alpha = 0.0);

struct TimelineCell {
  std::string date;  // YYYY-MM-DD (UTC)
  std::uint32_t topic = 0;
  std::size_t count = 0;
};

struct TopicTimeline {
  std::vector<TimelineCell> cells;            // sorted by (date, topic)
  std::map<std::string, std::size_t> totals;  // per date
};

// Buckets tweets by UTC calendar date and dominant topic. Dates with no
// tweets are absent unless zero_fill adds 0-count cells for every topic
// across the covered date span.
TopicTimeline topic_timeline(std::span<const Tweet> tweets,
                             const std::map<std::string, std::uint32_t>& dominant,
                             std::uint32_t num_topics, bool zero_fill = false);

struct GeoBinReport {
  struct Bin {
    std::string key;  // "lat,lon" at 0.1 degrees, or 4-digit postcode
    std::map<std::uint32_t, std::size_t> topic_counts;
  };
  std::vector<Bin> bins;  // sorted by key
  std::size_t excluded = 0;  // documents without usable location
};

GeoBinReport geo_aggregate_grid(std::span<const Tweet> tweets,
                                const std::map<std::string, std::uint32_t>& dominant);
GeoBinReport geo_aggregate_postcode(std::span<const Submission> submissions,
                                    const std::map<std::string, std::uint32_t>& dominant);

struct ProjectionResult {
  std::vector<std::array<double, 2>> coords;  // aligned with matrix rows
  std::array<double, 2> explained_variance{0.0, 0.0};
  std::vector<std::string> diagnostics;
};

// Centers columns and projects onto the top-2 principal directions computed
// by a cyclic Jacobi eigensolver. Sign convention: the largest-magnitude
// loading of each direction is positive.
ProjectionResult pca_projection(const EmbeddingMatrix& embeddings);

}  // namespace floodlens
