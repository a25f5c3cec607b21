#pragma once

#include "cinf/influence.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cinf {

// doc_id -> citing year -> citations received that year.
using CitationCounts = std::map<std::string, std::map<int, double>>;

// Long form CSV: doc_id, year, count.
CitationCounts read_citations_csv(const std::filesystem::path& path);
// Wide CSV: doc_id, p1..pK; rows must sum to one within 1e-6.
std::map<std::string, std::vector<double>> read_topics_csv(const std::filesystem::path& path);

struct CitationRecord {
    std::string doc_id;
    int year = 0;  // publication year
    std::map<int, double> counts;
};

struct CitationWindows {
    double short_term = 0.0;  // years [p, p + 2]
    double future = 0.0;      // years [p + 3, p + 5]
};

// nullopt for an immature paper whose long-term window ends after `horizon`.
std::optional<CitationWindows> citation_windows(const CitationRecord& record, int horizon);

// ln(1 + future citations); z-normalization happens over the population.
std::optional<double> log_future_citations(const CitationRecord& record, int horizon);

enum class ModelTag { M1, M2, M3, M4 };
std::string to_string(ModelTag tag);
ModelTag parse_model_tag(std::string_view text);
std::vector<ModelTag> parse_model_list(std::string_view text);

// Quantile dummies (regression analysis) or one continuous z-score per
// bandwidth (online prediction).
enum class InfluenceEncoding { Quantile, PerGamma };

struct FeatureRow {
    std::string doc_id;
    int year = 0;
    double z_short = 0.0;
    std::vector<double> topics;  // empty when no topic file was given
    int quantile_lexical = 1;
    int quantile_semantic = 1;
    std::vector<double> z_lexical_by_gamma;
    std::vector<double> z_semantic_by_gamma;
    double target = 0.0;  // z-normalized ln(1 + future citations)
};

struct RowAssembly {
    std::vector<FeatureRow> rows;
    std::vector<double> gammas;
    std::size_t immature = 0;
    std::size_t before_min_year = 0;
    std::size_t missing_topics = 0;
};

struct AssemblyOptions {
    int min_year = 2000;
    std::optional<int> horizon;  // defaults to the last citing year present
};

// Joins influence features, citations and topics into regression rows.
// Short-term and future log counts are z-normalized per publication year over
// the mature population.
RowAssembly assemble_rows(const InfluenceTable& features, const CitationCounts& citations,
                          const std::map<std::string, std::vector<double>>* topics,
                          const AssemblyOptions& options);

struct DesignMatrix {
    Eigen::MatrixXd x;
    std::vector<std::string> labels;
    std::vector<std::size_t> dependent_columns;  // empty when full column rank
};

// M1 = [1, z-short]; M2 adds topics minus the first; M3 adds lexical
// influence; M4 adds semantic influence.
DesignMatrix build_design_matrix(ModelTag tag, std::span<const FeatureRow> rows,
                                 InfluenceEncoding encoding, std::span<const double> gammas = {});

// Columns that are linear combinations of earlier pivots (pivoted QR).
std::vector<std::size_t> dependent_columns(const Eigen::MatrixXd& x);

struct RegressionFit {
    ModelTag tag = ModelTag::M1;
    std::vector<std::string> labels;
    Eigen::VectorXd coefficients;
    Eigen::VectorXd standard_errors;
    double log_likelihood = 0.0;
    double residual_variance = 0.0;  // RSS / N
    std::size_t n = 0;
};

// Least squares with ML variance RSS/N; SE from sigma^2 (X'X)^-1 and
// LL = -N/2 (ln(2 pi sigma^2) + 1). Throws DataError naming the dependent
// columns when X is rank deficient.
RegressionFit fit_ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                      std::span<const std::string> labels = {});

// Upper tail of the chi-square distribution via the regularized incomplete gamma.
double chi_square_upper_tail(double statistic, double df);
double regularized_gamma_q(double a, double x);

struct LikelihoodRatio {
    double statistic = 0.0;
    double df = 0.0;
    double p_value = 1.0;
};
LikelihoodRatio likelihood_ratio_test(const RegressionFit& restricted, const RegressionFit& full, double df);

struct RegressionReport {
    std::vector<RegressionFit> fits;
    std::vector<std::pair<std::string, LikelihoodRatio>> tests;  // consecutive nested pairs
};
RegressionReport run_regressions(std::span<const FeatureRow> rows, std::span<const ModelTag> models);

struct YearResult {
    int year = 0;
    std::size_t n_test = 0;
    std::size_t n_train = 0;
    int max_train_year = 0;
    std::vector<double> mse;  // per model, NaN where the model was skipped
};

struct EvalReport {
    std::vector<ModelTag> models;
    std::vector<YearResult> years;
    std::vector<double> micro_mse;  // total squared error / total examples
    std::vector<std::string> warnings;
};

// Training rows for test year t: publication year <= t - 3.
std::vector<std::size_t> training_rows(std::span<const FeatureRow> rows, int test_year);

// Online protocol: for every test year fit on training_rows, predict the
// rows published that year. Dependent columns are dropped before fitting.
EvalReport online_predict(std::span<const FeatureRow> rows, std::span<const ModelTag> models,
                          int first_year, int last_year, std::span<const double> gammas);

void write_regression_table(const RegressionReport& report, const std::filesystem::path& path);
void write_coefficients_csv(const RegressionReport& report, const std::filesystem::path& path);
void write_online_table(const EvalReport& report, const std::filesystem::path& path);

}  // namespace cinf
