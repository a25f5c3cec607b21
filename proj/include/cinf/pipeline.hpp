#pragma once

#include "cinf/change_detect.hpp"
#include "cinf/citation_eval.hpp"
#include "cinf/corpus.hpp"
#include "cinf/sense_classifier.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace cinf {

// Declarative pipeline settings. Relative paths resolve against the
// directory holding the config file.
struct PipelineConfig {
    std::filesystem::path corpus;
    std::filesystem::path store;
    std::filesystem::path citations;
    std::filesystem::path topics;  // empty when no topic file is used
    std::filesystem::path work_dir;
    YearRange years;
    VocabularyConfig vocabulary;
    ChangeConfig change;
    long long k_semantic = 2910;
    long long k_lexical = 2910;
    std::vector<double> gamma_grid = {0.001, 0.01, 0.1, 1.0, 10.0, 100.0};
    double heldout = 0.1;
    std::uint64_t seed = 13;
    ClassifierConfig classifier;
    std::vector<ModelTag> models = {ModelTag::M1, ModelTag::M2, ModelTag::M3, ModelTag::M4};
    int analysis_min_year = 2000;
    std::optional<int> citation_horizon;
    YearRange online_years{2001, 2014};

    // Canonical text of every setting except paths; part of each manifest.
    std::string parameter_digest;
};

// Reads the JSON config; throws ConfigError naming the offending key.
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

enum class Stage { BuildCorpus, Moments, Changes, Cascades, Fit, Featurize, Evaluate, Report };

std::string to_string(Stage stage);
Stage parse_stage(std::string_view text);
const std::vector<Stage>& all_stages();

// File names inside the work directory.
namespace artifacts {
inline constexpr const char* kVocab = "vocab.tsv";
inline constexpr const char* kCounts = "counts.tsv";
inline constexpr const char* kDocuments = "documents.tsv";
inline constexpr const char* kMoments = "moments.cmom";
inline constexpr const char* kChanges = "changes.tsv";
inline constexpr const char* kCascades = "cascades.jsonl";
inline constexpr const char* kInfluenceRaw = "influence_raw.csv";
inline constexpr const char* kBandwidth = "influence_raw.csv.bandwidth.tsv";
inline constexpr const char* kFeatures = "features.csv";
inline constexpr const char* kRegression = "regression_table.tsv";
inline constexpr const char* kCoefficients = "coefficients.csv";
inline constexpr const char* kOnline = "online_table.tsv";
inline constexpr const char* kReport = "report.txt";
inline constexpr const char* kQuantileEffects = "quantile_effects.csv";
}  // namespace artifacts

// Sidecar bandwidth report of a raw influence file.
std::filesystem::path bandwidth_report_path(const std::filesystem::path& raw_influence);

struct StageResult {
    Stage stage = Stage::BuildCorpus;
    bool skipped = false;  // manifest matched, nothing rewritten
    std::vector<std::filesystem::path> outputs;
    std::vector<std::string> notes;
};

// Runs one stage. Outputs are written atomically and recorded in
// work_dir/manifests/<stage>.json together with the input hashes; a rerun
// with unchanged inputs and settings does nothing. A missing upstream
// artifact raises UpstreamMissingError naming the stage that produces it.
StageResult run_stage(const PipelineConfig& config, Stage stage);

// Every stage in order.
std::vector<StageResult> run_all(const PipelineConfig& config);

// Summary of the evaluation artifacts: a text report plus a CSV of quantile
// effects per model (Q1 is the reference level with effect 0).
void write_report(const std::filesystem::path& work_dir, const std::filesystem::path& report,
                  const std::filesystem::path& quantile_effects);

// Fits every bandwidth for both kinds of cascades. Selection uses the seeded
// heldout split; the reported alphas come from a refit on all cascades.
struct InfluenceEstimates {
    std::vector<RawInfluence> raw;
    std::vector<BandwidthReportRow> bandwidth;
    std::vector<std::string> notes;
};
InfluenceEstimates estimate_influence(std::span<const Cascade> cascades, const DocumentTable* documents,
                                      std::optional<YearRange> years, std::span<const double> grid,
                                      double heldout, std::uint64_t seed);

// Selected bandwidth per kind from a bandwidth report; the first grid value
// when a kind has no rows.
std::pair<double, double> selected_gammas(std::span<const BandwidthReportRow> rows,
                                          std::span<const double> fallback_grid);

}  // namespace cinf
