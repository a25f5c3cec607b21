#pragma once

#include "cinf/change_detect.hpp"
#include "cinf/corpus.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cinf {

// (x - mean_year) / sd_year with the population standard deviation; a year
// whose values are all equal gets z = 0 throughout.
std::map<std::string, double> z_normalize_by_year(const std::map<std::string, double>& values,
                                                  const std::map<std::string, int>& years);

// Rank-based bins over the whole population, ties broken by doc id:
// 1 below the 50th percentile, 2 in [50, 75), 3 in [75, 90), 4 from the 90th.
// Throws DataError for fewer than four documents.
std::map<std::string, int> quantile_bins(const std::map<std::string, double>& scores);

// Output of the Hawkes stage: doc_id, alpha, kind, gamma.
struct RawInfluence {
    std::string doc_id;
    double alpha = 0.0;
    ChangeKind kind = ChangeKind::Semantic;
    double gamma = 0.0;
};
void write_raw_influence_csv(std::span<const RawInfluence> rows, const std::filesystem::path& path);
std::vector<RawInfluence> read_raw_influence_csv(const std::filesystem::path& path);

// Per-bandwidth fit summary written next to the raw influence file.
struct BandwidthReportRow {
    ChangeKind kind = ChangeKind::Semantic;
    double gamma = 0.0;
    double train_ll = 0.0;
    double heldout_ll = 0.0;
    int iterations = 0;
    bool converged = false;
    bool selected = false;
};
void write_bandwidth_report(std::span<const BandwidthReportRow> rows, const std::filesystem::path& path);
std::vector<BandwidthReportRow> read_bandwidth_report(const std::filesystem::path& path);

struct InfluenceScore {
    std::string doc_id;
    int year = 0;
    double alpha_semantic = 0.0;
    double alpha_lexical = 0.0;
    double z_semantic = 0.0;
    double z_lexical = 0.0;
    int quantile_semantic = 1;
    int quantile_lexical = 1;
    // Continuous z-scores per bandwidth of the grid, in grid order.
    std::vector<double> z_semantic_by_gamma;
    std::vector<double> z_lexical_by_gamma;
};

struct InfluenceTable {
    std::vector<double> gammas;
    double gamma_semantic = 0.0;
    double gamma_lexical = 0.0;
    std::vector<InfluenceScore> rows;
};

struct FeaturizeOptions {
    double gamma_semantic = 0.0;  // bandwidth whose scores feed the quantiles
    double gamma_lexical = 0.0;
    std::optional<int> min_year;  // restrict the population
};

// Documents missing from the raw estimates get alpha = 0.
InfluenceTable featurize(std::span<const RawInfluence> raw, const DocumentTable& documents,
                         const FeaturizeOptions& options);

void write_features_csv(const InfluenceTable& table, const std::filesystem::path& path);
InfluenceTable read_features_csv(const std::filesystem::path& path);

}  // namespace cinf
