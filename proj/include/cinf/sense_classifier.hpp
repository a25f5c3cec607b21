#pragma once

#include "cinf/cascade.hpp"
#include "cinf/change_detect.hpp"
#include "cinf/corpus.hpp"
#include "cinf/embedding_store.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace cinf {

// Dense row-major design matrix.
struct FeatureMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    FeatureMatrix() = default;
    FeatureMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
    std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
    std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
};

struct LogisticModel {
    std::vector<double> weights;
    double bias = 0.0;
    double gradient_norm = 0.0;
    bool converged = false;

    double decision(std::span<const double> x) const;
    bool predict(std::span<const double> x) const { return decision(x) > 0.0; }
};

// Minimizes sum_i logloss_i + l2/2 * |w|^2 (bias unpenalized) from a zero
// start until the gradient norm is at most 1e-6. Throws DataError when only
// one class is present.
LogisticModel fit_logistic(const FeatureMatrix& features, std::span<const std::uint8_t> labels,
                           double l2_strength = 1.0);

double logistic_loss(const LogisticModel& model, const FeatureMatrix& features,
                     std::span<const std::uint8_t> labels, double l2_strength);

enum class Sense : std::uint8_t { Old = 0, New = 1 };

struct UsageLabel {
    std::uint32_t word_id = 0;
    std::uint32_t doc_id = 0;
    int year = 0;
    std::uint32_t position = 0;
    Sense provisional = Sense::Old;  // year <= t_star -> old
    Sense label = Sense::Old;
    int fold = 0;
};

struct ClassifierConfig {
    double l2_strength = 1.0;
    int folds = 4;
};

struct LabelingResult {
    std::vector<UsageLabel> labels;  // same order as the input usages
    bool fallback = false;           // too few usages on one side: provisional labels kept
};

// Provisional labels split at t_star; each usage's final label comes from a
// classifier trained on the other folds (folds stratified by provisional
// label).
LabelingResult cv_label_usages(std::uint32_t word_id, std::span<const EmbeddedUsage> usages,
                               int t_star, const ClassifierConfig& config = {});

// New-sense usages as events; nullopt when no usage was labeled new.
std::optional<Cascade> build_semantic_cascade(const std::string& word, int t_star,
                                              std::span<const UsageLabel> labels,
                                              const DocumentTable& documents);

// Every usage of the word in the corpus becomes an event.
Cascade build_lexical_cascade(const std::string& word, int t_star, const Corpus& corpus);

struct CascadeBuildReport {
    std::vector<Cascade> cascades;
    std::size_t empty_semantic = 0;
    std::size_t fallback_words = 0;
    std::size_t missing_words = 0;  // selected words without usages
};

// Builds every cascade for the selected changes. Semantic changes read their
// usages from the store; lexical changes are counted in the corpus.
CascadeBuildReport build_cascades(std::span<const ChangeRecord> changes, const Vocabulary& vocab,
                                  const Corpus& corpus, const std::filesystem::path* store,
                                  const ClassifierConfig& config = {});

}  // namespace cinf
