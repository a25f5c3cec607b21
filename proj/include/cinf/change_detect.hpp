#pragma once

#include "cinf/corpus.hpp"
#include "cinf/embedding_store.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace cinf {

enum class ChangeKind { Semantic, Lexical };

std::string to_string(ChangeKind kind);
ChangeKind parse_change_kind(std::string_view text);

struct ChangeConfig {
    double variance_floor = 1e-8;    // lower bound on each per-component variance
    double lexical_smoothing = 0.5;  // added to pre and post counts
};

struct ChangeScoreSeries {
    std::uint32_t word_id = 0;
    std::vector<std::pair<int, double>> scores;  // non-degenerate candidate years only
    int t_star = 0;
    double max_score = 0.0;
};

struct ChangeCandidate {
    std::uint32_t word_id = 0;
    ChangeKind kind = ChangeKind::Semantic;
    int t_star = 0;
    double score = 0.0;
    std::size_t rank = 0;  // 1-based
};

// Interior years of the range; the endpoints give maximally lopsided splits.
std::vector<int> candidate_years(const YearRange& years);

// Frequency-corrected squared Mahalanobis distance between the pre- and
// post-t mean embeddings:
//   sqrt(m- * m+) * sum_d (v-_d - v+_d)^2 / s_d
// with s the population variance of the word over all years. nullopt when
// the split at t is degenerate.
std::optional<double> semantic_change_score(const WordMoments& moments, int t,
                                            const ChangeConfig& config = {});

// Scores every candidate year; ties resolve to the earliest year. Throws
// DataError("unscorable word") when every candidate split is degenerate.
ChangeScoreSeries transition_point(const WordMoments& moments, std::span<const int> years,
                                   const ChangeConfig& config = {});

// Top-k words by maximal score (score desc, then word id asc). k larger than
// the number of scorable words returns them all; k <= 0 throws.
std::vector<ChangeCandidate> rank_semantic_changes(const MomentsResult& moments, long long k,
                                                   const ChangeConfig& config = {});

// Ratio of smoothed relative frequencies after and up to t; nullopt when one
// side of the split has no tokens at all.
std::optional<double> lexical_change_score(std::span<const std::uint64_t> counts,
                                           std::span<const std::uint64_t> totals,
                                           const YearRange& years, int t,
                                           const ChangeConfig& config = {});

ChangeScoreSeries lexical_series(std::uint32_t word_id, std::span<const std::uint64_t> counts,
                                 std::span<const std::uint64_t> totals, const YearRange& years,
                                 std::span<const int> candidates, const ChangeConfig& config = {});

std::vector<ChangeCandidate> rank_lexical_changes(const Vocabulary& vocab, long long k,
                                                  const ChangeConfig& config = {});

// TSV columns: word, kind, t_star, score, rank.
struct ChangeRecord {
    std::string word;
    ChangeKind kind = ChangeKind::Semantic;
    int t_star = 0;
    double score = 0.0;
    std::size_t rank = 0;
};

void write_changes_tsv(std::span<const ChangeCandidate> changes, const Vocabulary& vocab,
                       const std::filesystem::path& path);
std::vector<ChangeRecord> read_changes_tsv(const std::filesystem::path& path);

}  // namespace cinf
