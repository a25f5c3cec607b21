#include "cinf/sense_classifier.hpp"

#include "cinf/error.hpp"
#include "cinf/lbfgs.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

namespace cinf {

namespace {

double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }
double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// Parameters are laid out as [w_0 .. w_{D-1}, bias].
double objective(const FeatureMatrix& x, std::span<const std::uint8_t> y, double l2,
                 std::span<const double> params, std::span<double> grad) {
    const std::size_t dim = x.cols;
    const auto w = params.first(dim);
    const double b = params[dim];
    std::fill(grad.begin(), grad.end(), 0.0);
    double loss = 0.0;
    for (std::size_t i = 0; i < x.rows; ++i) {
        const auto row = x.row(i);
        const double z = dot(w, row) + b;
        const double target = y[i] ? 1.0 : 0.0;
        loss += softplus(z) - target * z;
        const double r = sigmoid(z) - target;
        for (std::size_t d = 0; d < dim; ++d) grad[d] += r * row[d];
        grad[dim] += r;
    }
    for (std::size_t d = 0; d < dim; ++d) {
        loss += 0.5 * l2 * w[d] * w[d];
        grad[d] += l2 * w[d];
    }
    return loss;
}

}  // namespace

double LogisticModel::decision(std::span<const double> x) const { return dot(weights, x) + bias; }

LogisticModel fit_logistic(const FeatureMatrix& features, std::span<const std::uint8_t> labels,
                           double l2_strength) {
    if (labels.size() != features.rows) throw DataError("label count does not match feature rows");
    const auto positives = std::count_if(labels.begin(), labels.end(), [](auto v) { return v != 0; });
    if (positives == 0 || static_cast<std::size_t>(positives) == labels.size()) {
        throw DataError("degenerate labels: logistic regression needs both classes");
    }
    optim::LbfgsOptions options;
    options.max_iterations = 5000;
    options.gradient_tolerance = 1e-6;
    options.relative_tolerance = 0.0;
    auto result = optim::minimize(
        [&](std::span<const double> p, std::span<double> g) {
            return objective(features, labels, l2_strength, p, g);
        },
        std::vector<double>(features.cols + 1, 0.0), options);
    LogisticModel model;
    model.weights.assign(result.x.begin(), result.x.begin() + static_cast<std::ptrdiff_t>(features.cols));
    model.bias = result.x.back();
    model.gradient_norm = result.gradient_norm;
    model.converged = result.converged;
    return model;
}

double logistic_loss(const LogisticModel& model, const FeatureMatrix& features,
                     std::span<const std::uint8_t> labels, double l2_strength) {
    std::vector<double> params(model.weights);
    params.push_back(model.bias);
    std::vector<double> grad(params.size());
    return objective(features, labels, l2_strength, params, grad);
}

LabelingResult cv_label_usages(std::uint32_t word_id, std::span<const EmbeddedUsage> usages,
                               int t_star, const ClassifierConfig& config) {
    LabelingResult result;
    result.labels.resize(usages.size());
    std::size_t n_old = 0;
    for (std::size_t i = 0; i < usages.size(); ++i) {
        auto& l = result.labels[i];
        l.word_id = word_id;
        l.doc_id = usages[i].doc_id;
        l.year = usages[i].year;
        l.position = usages[i].position;
        l.provisional = l.year <= t_star ? Sense::Old : Sense::New;
        l.label = l.provisional;
        if (l.provisional == Sense::Old) ++n_old;
    }
    const std::size_t n_new = usages.size() - n_old;
    const auto folds = static_cast<std::size_t>(std::max(2, config.folds));
    if (n_old < folds || n_new < folds) {
        result.fallback = true;
        return result;
    }

    // Stratified round-robin over a deterministic order; the counter carries
    // over between classes so fold sizes differ by at most one.
    std::vector<std::size_t> order(usages.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& la = result.labels[a];
        const auto& lb = result.labels[b];
        return std::tie(la.provisional, la.year, la.doc_id, la.position, a) <
               std::tie(lb.provisional, lb.year, lb.doc_id, lb.position, b);
    });
    for (std::size_t k = 0; k < order.size(); ++k) {
        result.labels[order[k]].fold = static_cast<int>(k % folds);
    }

    const std::size_t dim = usages.empty() ? 0 : usages.front().vector.size();
    for (std::size_t fold = 0; fold < folds; ++fold) {
        std::vector<std::size_t> train;
        for (std::size_t i = 0; i < usages.size(); ++i) {
            if (static_cast<std::size_t>(result.labels[i].fold) != fold) train.push_back(i);
        }
        FeatureMatrix x(train.size(), dim);
        std::vector<std::uint8_t> y(train.size());
        for (std::size_t r = 0; r < train.size(); ++r) {
            const auto& v = usages[train[r]].vector;
            std::copy(v.begin(), v.end(), x.row(r).begin());
            y[r] = result.labels[train[r]].provisional == Sense::New ? 1 : 0;
        }
        const auto model = fit_logistic(x, y, config.l2_strength);
        std::vector<double> features(dim);
        for (std::size_t i = 0; i < usages.size(); ++i) {
            if (static_cast<std::size_t>(result.labels[i].fold) != fold) continue;
            std::copy(usages[i].vector.begin(), usages[i].vector.end(), features.begin());
            result.labels[i].label = model.predict(features) ? Sense::New : Sense::Old;
        }
    }
    return result;
}

std::optional<Cascade> build_semantic_cascade(const std::string& word, int t_star,
                                              std::span<const UsageLabel> labels,
                                              const DocumentTable& documents) {
    Cascade cascade;
    cascade.word = word;
    cascade.kind = ChangeKind::Semantic;
    cascade.t_star = t_star;
    for (const auto& l : labels) {
        if (l.label != Sense::New) continue;
        if (l.doc_id >= documents.doc_ids.size()) {
            throw DataError("usage refers to unknown document index " + std::to_string(l.doc_id));
        }
        cascade.events.push_back({l.year, documents.doc_ids[l.doc_id]});
    }
    if (cascade.events.empty()) return std::nullopt;
    sort_events(cascade);
    return cascade;
}

Cascade build_lexical_cascade(const std::string& word, int t_star, const Corpus& corpus) {
    Cascade cascade;
    cascade.word = word;
    cascade.kind = ChangeKind::Lexical;
    cascade.t_star = t_star;
    for (const auto& doc : corpus.documents) {
        for (const auto& token : doc.tokens) {
            if (token == word) cascade.events.push_back({doc.year, doc.doc_id});
        }
    }
    sort_events(cascade);
    return cascade;
}

CascadeBuildReport build_cascades(std::span<const ChangeRecord> changes, const Vocabulary& vocab,
                                  const Corpus& corpus, const std::filesystem::path* store,
                                  const ClassifierConfig& config) {
    CascadeBuildReport report;
    std::unordered_map<std::uint32_t, std::vector<EmbeddedUsage>> usages;
    std::vector<std::pair<std::uint32_t, const ChangeRecord*>> semantic;
    for (const auto& change : changes) {
        if (change.kind != ChangeKind::Semantic) continue;
        const auto id = vocab.at(change.word);
        semantic.emplace_back(id, &change);
        usages[id];
    }
    if (!semantic.empty()) {
        if (store == nullptr) throw ConfigError("semantic cascades need an embedding store");
        StoreReader reader(*store);
        EmbeddedUsage usage;
        while (reader.next(usage)) {
            auto it = usages.find(usage.word_id);
            if (it != usages.end()) it->second.push_back(usage);
        }
    }
    const auto documents = document_table(corpus);
    for (const auto& change : changes) {
        if (change.kind == ChangeKind::Lexical) {
            auto cascade = build_lexical_cascade(change.word, change.t_star, corpus);
            if (cascade.events.empty()) {
                ++report.missing_words;
                continue;
            }
            report.cascades.push_back(std::move(cascade));
            continue;
        }
        const auto id = vocab.at(change.word);
        const auto& word_usages = usages.at(id);
        if (word_usages.empty()) {
            ++report.missing_words;
            continue;
        }
        auto labeling = cv_label_usages(id, word_usages, change.t_star, config);
        if (labeling.fallback) ++report.fallback_words;
        auto cascade = build_semantic_cascade(change.word, change.t_star, labeling.labels, documents);
        if (!cascade) {
            ++report.empty_semantic;
            continue;
        }
        report.cascades.push_back(std::move(*cascade));
    }
    return report;
}

}  // namespace cinf
