#pragma once

#include "cinf/cascade.hpp"
#include "cinf/corpus.hpp"

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace cinf::hawkes {

// Cascades binned by year with document marks mapped to dense indices.
struct CascadeSeries {
    std::string word;
    std::vector<std::uint32_t> counts;  // n(t, w) per year of the range
    // Per year: (document index, number of events) sorted by document.
    std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> marks;

    std::uint64_t total() const;
};

struct HawkesData {
    YearRange years;
    std::vector<std::string> doc_ids;
    std::unordered_map<std::string, std::uint32_t> doc_index;
    std::vector<CascadeSeries> cascades;

    std::size_t n_docs() const { return doc_ids.size(); }
    std::size_t n_cascades() const { return cascades.size(); }
    HawkesData subset(std::span<const std::size_t> cascade_indices) const;
};

// Documents in `known_docs` take the first indices in that order; any other
// marked document follows in sorted order. Throws DataError for events
// outside `years`.
HawkesData index_cascades(std::span<const Cascade> cascades, YearRange years,
                          std::span<const std::string> known_docs = {});

// Smallest range containing every event.
YearRange event_span(std::span<const Cascade> cascades);

struct HawkesModel {
    double gamma = 1.0;
    std::vector<double> alpha;  // per document index
    std::vector<double> base;   // per cascade index
};

// lambda(t, w) = c_w + sum_{i: t_i < t} alpha_{p_i} exp(-gamma (t - t_i)).
double intensity(const HawkesModel& model, const HawkesData& data, std::size_t cascade, int year);

// sum_w sum_t n(t,w) ln lambda(t,w) - lambda(t,w), without the ln n! term.
// Throws NumericalError when lambda is zero in a bin with events.
double log_likelihood(const HawkesModel& model, const HawkesData& data);

struct HawkesGradient {
    std::vector<double> alpha;
    std::vector<double> base;
};
HawkesGradient gradient(const HawkesModel& model, const HawkesData& data);

struct FitOptions {
    double heldout_fraction = 0.1;
    std::uint64_t seed = 13;
    int max_iterations = 1000;
    double gradient_tolerance = 1e-6;
    double relative_tolerance = 1e-8;
    double alpha_init = 1e-3;  // starting lag-one excitation alpha * exp(-gamma)
};

struct HawkesFit {
    HawkesModel model;  // base rates of heldout cascades are their profile estimates
    double train_ll = 0.0;
    double heldout_ll = std::numeric_limits<double>::quiet_NaN();
    int iterations = 0;
    bool converged = false;
    double gradient_norm = 0.0;
    std::vector<std::size_t> train_cascades;
    std::vector<std::size_t> heldout_cascades;
    std::vector<double> ll_trace;  // training LL per accepted optimizer step
};

// Seeded split of cascade indices; the heldout part is round(fraction * n),
// leaving at least one training cascade.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_cascades(std::size_t n,
                                                                            double heldout_fraction,
                                                                            std::uint64_t seed);

// Maximum likelihood over alpha >= 0 and c >= 0, optimized in log space with
// L-BFGS on the training cascades. Heldout cascades keep the fitted alphas;
// their base rates are profiled one at a time before scoring.
HawkesFit fit(const HawkesData& data, double gamma, const FitOptions& options = {});

// Maximizes the one-dimensional likelihood of a single cascade over c_w with
// alpha and gamma fixed.
double profile_base_rate(const HawkesModel& model, const HawkesData& data, std::size_t cascade);

inline const std::vector<double> kDefaultGammaGrid = {0.001, 0.01, 0.1, 1.0, 10.0, 100.0};

struct BandwidthSelection {
    double best_gamma = 0.0;
    std::size_t best_index = 0;
    std::vector<double> grid;
    std::vector<std::optional<HawkesFit>> fits;  // nullopt where the fit failed
};

// One fit per bandwidth on the same seeded split; picks the best heldout
// log-likelihood (first grid entry wins ties).
BandwidthSelection select_bandwidth(const HawkesData& data, std::span<const double> grid,
                                    const FitOptions& options = {});

struct SimulationSpec {
    std::vector<double> alpha;  // per document; documents are grouped by year
    std::vector<double> base;   // per cascade
    double gamma = 1.0;
    std::size_t docs_per_year = 1;
    YearRange years;
};

struct Simulation {
    std::vector<Cascade> cascades;
    std::vector<std::string> doc_ids;  // doc k is published in year first + k / docs_per_year
};

// Discrete-time simulation: n(t,w) ~ Poisson(lambda(t,w)), each event marked
// with a uniformly drawn document published in year t.
Simulation simulate(const SimulationSpec& spec, std::uint64_t seed);

}  // namespace cinf::hawkes
