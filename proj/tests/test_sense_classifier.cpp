#include "cinf/error.hpp"
#include "cinf/sense_classifier.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace cinf;

namespace {

FeatureMatrix random_features(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
    std::normal_distribution<double> normal(0.0, 1.0);
    FeatureMatrix x(rows, cols);
    for (auto& v : x.data) v = normal(rng);
    return x;
}

// Two senses: new-sense usages are shifted by `separation` in every component.
std::vector<EmbeddedUsage> two_sense_usages(std::mt19937_64& rng, std::size_t n, std::size_t dim,
                                            double separation, int t_star, std::vector<Sense>& truth) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<EmbeddedUsage> out;
    truth.clear();
    for (std::size_t i = 0; i < n; ++i) {
        EmbeddedUsage u;
        u.word_id = 5;
        u.doc_id = static_cast<std::uint32_t>(i);
        u.year = static_cast<std::uint16_t>(2000 + rng() % 20);
        const bool is_new = u.year > t_star;
        truth.push_back(is_new ? Sense::New : Sense::Old);
        for (std::size_t d = 0; d < dim; ++d) {
            u.vector.push_back(static_cast<float>(normal(rng) + (is_new ? separation : 0.0)));
        }
        out.push_back(std::move(u));
    }
    return out;
}

}  // namespace

TEST_CASE("logistic gradient matches finite differences") {
    std::mt19937_64 rng(5);
    const auto x = random_features(rng, 40, 3);
    std::vector<std::uint8_t> y(40);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = x.row(i)[0] + 0.3 * x.row(i)[1] > 0 ? 1 : 0;
    const auto model = fit_logistic(x, y, 1.0);
    CHECK(model.converged);
    CHECK(model.gradient_norm <= 1e-6);

    // At the optimum every directional finite difference vanishes.
    const double h = 1e-5;
    for (std::size_t d = 0; d <= 3; ++d) {
        auto plus = model;
        auto minus = model;
        if (d < 3) {
            plus.weights[d] += h;
            minus.weights[d] -= h;
        } else {
            plus.bias += h;
            minus.bias -= h;
        }
        const double fd = (logistic_loss(plus, x, y, 1.0) - logistic_loss(minus, x, y, 1.0)) / (2 * h);
        CHECK(std::abs(fd) < 1e-5);
    }
    // And the loss there beats nearby points.
    auto nudged = model;
    nudged.weights[0] += 0.01;
    CHECK(logistic_loss(nudged, x, y, 1.0) > logistic_loss(model, x, y, 1.0));
}

TEST_CASE("logistic loss by hand") {
    FeatureMatrix x(2, 1);
    x.data = {1.0, -2.0};
    const std::vector<std::uint8_t> y = {1, 0};
    LogisticModel m;
    m.weights = {0.5};
    m.bias = 0.25;
    // z = 0.75 (label 1), z = -0.75 (label 0); penalty 0.5 * 2 * 0.25.
    const double expected = 2.0 * std::log1p(std::exp(-0.75)) + 0.25;
    CHECK(logistic_loss(m, x, y, 2.0) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("degenerate labels are rejected") {
    std::mt19937_64 rng(1);
    const auto x = random_features(rng, 10, 2);
    CHECK_THROWS_AS(fit_logistic(x, std::vector<std::uint8_t>(10, 1)), DataError);
    CHECK_THROWS_AS(fit_logistic(x, std::vector<std::uint8_t>(10, 0)), DataError);
    CHECK_THROWS_AS(fit_logistic(x, std::vector<std::uint8_t>(9, 0)), DataError);
}

TEST_CASE("cross-validated labels recover well-separated senses") {
    std::mt19937_64 rng(17);
    std::vector<Sense> truth;
    const auto usages = two_sense_usages(rng, 400, 8, 4.0, 2009, truth);
    const auto result = cv_label_usages(5, usages, 2009);
    CHECK_FALSE(result.fallback);
    REQUIRE(result.labels.size() == usages.size());
    std::size_t agree = 0;
    std::array<std::size_t, 4> fold_sizes{};
    for (std::size_t i = 0; i < usages.size(); ++i) {
        const auto& l = result.labels[i];
        CHECK(l.doc_id == usages[i].doc_id);
        CHECK(l.provisional == (usages[i].year <= 2009 ? Sense::Old : Sense::New));
        if (l.label == truth[i]) ++agree;
        REQUIRE(l.fold >= 0);
        REQUIRE(l.fold < 4);
        ++fold_sizes[static_cast<std::size_t>(l.fold)];
    }
    CHECK(static_cast<double>(agree) / usages.size() >= 0.99);
    const auto [lo, hi] = std::minmax_element(fold_sizes.begin(), fold_sizes.end());
    CHECK(*hi - *lo <= 1);
}

TEST_CASE("labels relabel usages that contradict the split") {
    // Late usages of the old sense should be labeled old.
    std::mt19937_64 rng(2);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<EmbeddedUsage> usages;
    std::vector<Sense> truth;
    for (std::uint32_t i = 0; i < 300; ++i) {
        EmbeddedUsage u;
        u.doc_id = i;
        u.year = static_cast<std::uint16_t>(2000 + i % 20);
        const bool is_new = u.year > 2009 && i % 3 != 0;
        truth.push_back(is_new ? Sense::New : Sense::Old);
        for (int d = 0; d < 6; ++d) u.vector.push_back(static_cast<float>(normal(rng) + (is_new ? 5.0 : 0.0)));
        usages.push_back(u);
    }
    const auto result = cv_label_usages(0, usages, 2009);
    std::size_t late_old_correct = 0, late_old = 0;
    for (std::size_t i = 0; i < usages.size(); ++i) {
        if (usages[i].year > 2009 && truth[i] == Sense::Old) {
            ++late_old;
            if (result.labels[i].label == Sense::Old) ++late_old_correct;
        }
    }
    REQUIRE(late_old > 0);
    CHECK(static_cast<double>(late_old_correct) / late_old > 0.9);
}

TEST_CASE("too few usages on one side falls back to provisional labels") {
    std::mt19937_64 rng(3);
    std::vector<Sense> truth;
    auto usages = two_sense_usages(rng, 50, 4, 4.0, 2018, truth);
    for (auto& u : usages) u.year = 2000;
    usages[0].year = 2019;
    const auto result = cv_label_usages(0, usages, 2018);
    CHECK(result.fallback);
    for (std::size_t i = 0; i < usages.size(); ++i) CHECK(result.labels[i].label == result.labels[i].provisional);
}

TEST_CASE("semantic cascade collects new-sense usages") {
    DocumentTable docs;
    docs.doc_ids = {"a", "b", "c"};
    docs.years = {2001, 2002, 2003};
    std::vector<UsageLabel> labels(3);
    labels[0] = {0, 2, 2003, 0, Sense::New, Sense::New, 0};
    labels[1] = {0, 0, 2001, 0, Sense::Old, Sense::Old, 1};
    labels[2] = {0, 1, 2002, 0, Sense::New, Sense::New, 2};
    const auto cascade = build_semantic_cascade("w", 2001, labels, docs);
    REQUIRE(cascade);
    REQUIRE(cascade->events.size() == 2);
    CHECK(cascade->events[0] == CascadeEvent{2002, "b"});
    CHECK(cascade->events[1] == CascadeEvent{2003, "c"});

    for (auto& l : labels) l.label = Sense::Old;
    CHECK_FALSE(build_semantic_cascade("w", 2001, labels, docs).has_value());
    labels[0] = {0, 9, 2003, 0, Sense::New, Sense::New, 0};
    CHECK_THROWS_AS(build_semantic_cascade("w", 2001, labels, docs), DataError);
}

TEST_CASE("lexical cascade counts every usage") {
    Corpus corpus;
    corpus.documents.push_back({"d1", 2001, {"foo", "bar", "foo"}});
    corpus.documents.push_back({"d0", 2000, {"foo"}});
    const auto cascade = build_lexical_cascade("foo", 2000, corpus);
    REQUIRE(cascade.events.size() == 3);
    CHECK(cascade.events.front() == CascadeEvent{2000, "d0"});
    const auto counts = cascade.counts_by_year();
    CHECK(counts.at(2000) == 1);
    CHECK(counts.at(2001) == 2);
}
