#include "cinf/change_detect.hpp"

#include "cinf/error.hpp"
#include "cinf/io.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace cinf {

namespace {

void sort_and_rank(std::vector<ChangeCandidate>& all, long long k) {
    if (k <= 0) throw ConfigError("number of changes to select must be positive");
    std::sort(all.begin(), all.end(), [](const ChangeCandidate& a, const ChangeCandidate& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.word_id < b.word_id;
    });
    if (static_cast<std::size_t>(k) < all.size()) all.resize(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < all.size(); ++i) all[i].rank = i + 1;
}

void record_score(ChangeScoreSeries& series, int year, double score) {
    if (series.scores.empty() || score > series.max_score) {
        series.t_star = year;
        series.max_score = score;
    }
    series.scores.emplace_back(year, score);
}

}  // namespace

std::string to_string(ChangeKind kind) { return kind == ChangeKind::Semantic ? "semantic" : "lexical"; }

ChangeKind parse_change_kind(std::string_view text) {
    if (text == "semantic") return ChangeKind::Semantic;
    if (text == "lexical") return ChangeKind::Lexical;
    throw ConfigError("unknown change kind '" + std::string(text) + "'");
}

std::vector<int> candidate_years(const YearRange& years) {
    std::vector<int> out;
    for (int y = years.first + 1; y < years.last; ++y) out.push_back(y);
    return out;
}

std::optional<double> semantic_change_score(const WordMoments& moments, int t,
                                            const ChangeConfig& config) {
    auto split = split_means(moments, t);
    if (!split) return std::nullopt;
    const auto variance = moments.variance();
    double distance = 0.0;
    for (std::size_t d = 0; d < moments.dim(); ++d) {
        const double diff = split->difference[d];
        distance += diff * diff / std::max(variance[d], config.variance_floor);
    }
    const double scale =
        std::sqrt(static_cast<double>(split->m_minus) * static_cast<double>(split->m_plus));
    return scale * distance;
}

ChangeScoreSeries transition_point(const WordMoments& moments, std::span<const int> years,
                                   const ChangeConfig& config) {
    ChangeScoreSeries series;
    series.word_id = moments.word_id();
    for (int t : years) {
        if (auto score = semantic_change_score(moments, t, config)) record_score(series, t, *score);
    }
    if (series.scores.empty()) {
        throw DataError("unscorable word " + std::to_string(moments.word_id()) +
                        ": every candidate split is degenerate");
    }
    return series;
}

std::vector<ChangeCandidate> rank_semantic_changes(const MomentsResult& moments, long long k,
                                                   const ChangeConfig& config) {
    if (k <= 0) throw ConfigError("number of changes to select must be positive");
    const auto years = candidate_years(moments.years);
    std::vector<ChangeCandidate> all;
    for (const auto& [id, m] : moments.words) {
        ChangeScoreSeries series;
        try {
            series = transition_point(m, years, config);
        } catch (const DataError&) {
            continue;
        }
        all.push_back({id, ChangeKind::Semantic, series.t_star, series.max_score, 0});
    }
    sort_and_rank(all, k);
    return all;
}

std::optional<double> lexical_change_score(std::span<const std::uint64_t> counts,
                                           std::span<const std::uint64_t> totals,
                                           const YearRange& years, int t,
                                           const ChangeConfig& config) {
    double pre = 0.0, post = 0.0, pre_total = 0.0, post_total = 0.0;
    for (std::size_t y = 0; y < years.size(); ++y) {
        if (years.year_at(y) <= t) {
            pre += static_cast<double>(counts[y]);
            pre_total += static_cast<double>(totals[y]);
        } else {
            post += static_cast<double>(counts[y]);
            post_total += static_cast<double>(totals[y]);
        }
    }
    if (pre_total <= 0.0 || post_total <= 0.0) return std::nullopt;
    const double eps = config.lexical_smoothing;
    const double pre_rate = (pre + eps) / pre_total;
    const double post_rate = (post + eps) / post_total;
    if (pre_rate <= 0.0) return std::nullopt;
    return post_rate / pre_rate;
}

ChangeScoreSeries lexical_series(std::uint32_t word_id, std::span<const std::uint64_t> counts,
                                 std::span<const std::uint64_t> totals, const YearRange& years,
                                 std::span<const int> candidates, const ChangeConfig& config) {
    ChangeScoreSeries series;
    series.word_id = word_id;
    for (int t : candidates) {
        if (auto score = lexical_change_score(counts, totals, years, t, config)) {
            record_score(series, t, *score);
        }
    }
    return series;
}

std::vector<ChangeCandidate> rank_lexical_changes(const Vocabulary& vocab, long long k,
                                                  const ChangeConfig& config) {
    if (k <= 0) throw ConfigError("number of changes to select must be positive");
    if (vocab.year_counts.size() != vocab.size() || vocab.year_totals.size() != vocab.years.size()) {
        throw DataError("lexical change detection needs per-year counts");
    }
    const auto years = candidate_years(vocab.years);
    std::vector<ChangeCandidate> all;
    for (std::uint32_t id = 0; id < vocab.size(); ++id) {
        auto series = lexical_series(id, vocab.year_counts[id], vocab.year_totals, vocab.years, years, config);
        if (series.scores.empty()) continue;
        all.push_back({id, ChangeKind::Lexical, series.t_star, series.max_score, 0});
    }
    sort_and_rank(all, k);
    return all;
}

void write_changes_tsv(std::span<const ChangeCandidate> changes, const Vocabulary& vocab,
                       const std::filesystem::path& path) {
    std::ostringstream out;
    out << io::schema_line("changes", 1) << "\n#word\tkind\tt_star\tscore\trank\n";
    for (const auto& c : changes) {
        out << vocab.words.at(c.word_id) << '\t' << to_string(c.kind) << '\t' << c.t_star << '\t'
            << io::format_double(c.score) << '\t' << c.rank << '\n';
    }
    io::write_atomic(path, out.str());
}

std::vector<ChangeRecord> read_changes_tsv(const std::filesystem::path& path) {
    std::vector<ChangeRecord> out;
    for (const auto& line : io::read_data_lines(path, "changes")) {
        auto f = io::split(line, '\t');
        if (f.size() != 5) throw DataError(path.string() + ": bad change row '" + line + "'");
        out.push_back({f[0], parse_change_kind(f[1]), static_cast<int>(io::parse_int(f[2], "t_star")),
                       io::parse_double(f[3], "score"),
                       static_cast<std::size_t>(io::parse_int(f[4], "rank"))});
    }
    return out;
}

}  // namespace cinf
