#include "cinf/hawkes.hpp"

#include "cinf/error.hpp"
#include "cinf/lbfgs.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>

namespace cinf::hawkes {

namespace {

// Excitation at every year of one cascade, by the recursion
// A(t) = e^{-gamma} (A(t-1) + sum_{marks in t-1} alpha).
void excitation(const CascadeSeries& series, std::span<const double> alpha, double decay,
                std::vector<double>& out) {
    const std::size_t n_years = series.counts.size();
    out.assign(n_years, 0.0);
    double carry = 0.0;
    for (std::size_t t = 1; t < n_years; ++t) {
        double added = 0.0;
        for (const auto& [doc, count] : series.marks[t - 1]) added += alpha[doc] * count;
        carry = decay * (carry + added);
        out[t] = carry;
    }
}

double cascade_ll(const CascadeSeries& series, double base, std::span<const double> excite) {
    double ll = 0.0;
    for (std::size_t t = 0; t < series.counts.size(); ++t) {
        const double lambda = base + excite[t];
        const auto n = series.counts[t];
        if (n > 0) {
            if (!(lambda > 0.0)) throw NumericalError("infeasible parameters: zero intensity in a bin with events");
            ll += n * std::log(lambda);
        }
        ll -= lambda;
    }
    return ll;
}

// Accumulates d LL / d alpha and returns d LL / d c for one cascade.
double cascade_gradient(const CascadeSeries& series, double base, std::span<const double> excite,
                        double decay, std::span<double> d_alpha) {
    const std::size_t n_years = series.counts.size();
    std::vector<double> g(n_years);
    double d_base = 0.0;
    for (std::size_t t = 0; t < n_years; ++t) {
        const double lambda = base + excite[t];
        const auto n = series.counts[t];
        if (n > 0 && !(lambda > 0.0)) {
            throw NumericalError("infeasible parameters: zero intensity in a bin with events");
        }
        g[t] = (n > 0 ? n / lambda : 0.0) - 1.0;
        d_base += g[t];
    }
    // Backward recursion G(s) = sum_{t > s} g(t) e^{-gamma (t - s)}.
    double tail = 0.0;
    for (std::size_t s = n_years; s-- > 0;) {
        if (s + 1 < n_years) tail = decay * (g[s + 1] + tail);
        for (const auto& [doc, count] : series.marks[s]) d_alpha[doc] += count * tail;
    }
    return d_base;
}

void check_model(const HawkesModel& model, const HawkesData& data) {
    if (model.alpha.size() != data.n_docs() || model.base.size() != data.n_cascades()) {
        throw DataError("model shape does not match the cascade data");
    }
}

double mean_count(const CascadeSeries& series) {
    return static_cast<double>(series.total()) / static_cast<double>(series.counts.size());
}

}  // namespace

std::uint64_t CascadeSeries::total() const {
    return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

HawkesData HawkesData::subset(std::span<const std::size_t> cascade_indices) const {
    HawkesData out;
    out.years = years;
    out.doc_ids = doc_ids;
    out.doc_index = doc_index;
    for (auto i : cascade_indices) out.cascades.push_back(cascades.at(i));
    return out;
}

YearRange event_span(std::span<const Cascade> cascades) {
    bool any = false;
    YearRange range{0, 0};
    for (const auto& c : cascades) {
        for (const auto& e : c.events) {
            range.first = any ? std::min(range.first, e.year) : e.year;
            range.last = any ? std::max(range.last, e.year) : e.year;
            any = true;
        }
    }
    if (!any) throw DataError("no events in any cascade");
    return range;
}

HawkesData index_cascades(std::span<const Cascade> cascades, YearRange years,
                          std::span<const std::string> known_docs) {
    HawkesData data;
    data.years = years;
    for (const auto& id : known_docs) {
        if (data.doc_index.emplace(id, static_cast<std::uint32_t>(data.doc_ids.size())).second) {
            data.doc_ids.push_back(id);
        }
    }
    std::set<std::string> extra;
    for (const auto& c : cascades) {
        for (const auto& e : c.events) {
            if (!data.doc_index.contains(e.doc_id)) extra.insert(e.doc_id);
        }
    }
    for (const auto& id : extra) {
        data.doc_index.emplace(id, static_cast<std::uint32_t>(data.doc_ids.size()));
        data.doc_ids.push_back(id);
    }
    for (const auto& c : cascades) {
        CascadeSeries series;
        series.word = c.word;
        series.counts.assign(years.size(), 0);
        std::vector<std::map<std::uint32_t, std::uint32_t>> marks(years.size());
        for (const auto& e : c.events) {
            if (!years.contains(e.year)) {
                throw DataError("cascade '" + c.word + "' has an event in " + std::to_string(e.year) +
                                ", outside " + std::to_string(years.first) + ":" + std::to_string(years.last));
            }
            const auto t = years.index(e.year);
            ++series.counts[t];
            ++marks[t][data.doc_index.at(e.doc_id)];
        }
        series.marks.resize(years.size());
        for (std::size_t t = 0; t < years.size(); ++t) {
            series.marks[t].assign(marks[t].begin(), marks[t].end());
        }
        data.cascades.push_back(std::move(series));
    }
    return data;
}

double intensity(const HawkesModel& model, const HawkesData& data, std::size_t cascade, int year) {
    check_model(model, data);
    const auto& series = data.cascades.at(cascade);
    double lambda = model.base[cascade];
    for (std::size_t s = 0; s < series.marks.size(); ++s) {
        const int event_year = data.years.year_at(s);
        if (event_year >= year) break;
        const double kernel = std::exp(-model.gamma * (year - event_year));
        for (const auto& [doc, count] : series.marks[s]) lambda += count * model.alpha[doc] * kernel;
    }
    return lambda;
}

double log_likelihood(const HawkesModel& model, const HawkesData& data) {
    check_model(model, data);
    const double decay = std::exp(-model.gamma);
    std::vector<double> excite;
    double ll = 0.0;
    for (std::size_t w = 0; w < data.n_cascades(); ++w) {
        excitation(data.cascades[w], model.alpha, decay, excite);
        ll += cascade_ll(data.cascades[w], model.base[w], excite);
    }
    return ll;
}

HawkesGradient gradient(const HawkesModel& model, const HawkesData& data) {
    check_model(model, data);
    const double decay = std::exp(-model.gamma);
    HawkesGradient grad{std::vector<double>(data.n_docs(), 0.0), std::vector<double>(data.n_cascades(), 0.0)};
    std::vector<double> excite;
    for (std::size_t w = 0; w < data.n_cascades(); ++w) {
        excitation(data.cascades[w], model.alpha, decay, excite);
        grad.base[w] = cascade_gradient(data.cascades[w], model.base[w], excite, decay, grad.alpha);
    }
    return grad;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_cascades(std::size_t n,
                                                                            double heldout_fraction,
                                                                            std::uint64_t seed) {
    if (heldout_fraction < 0.0 || heldout_fraction >= 1.0) {
        throw ConfigError("heldout fraction must lie in [0, 1)");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    auto n_heldout = static_cast<std::size_t>(std::llround(heldout_fraction * static_cast<double>(n)));
    if (n_heldout >= n) n_heldout = n > 0 ? n - 1 : 0;
    std::vector<std::size_t> heldout(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_heldout));
    std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_heldout), order.end());
    std::sort(heldout.begin(), heldout.end());
    std::sort(train.begin(), train.end());
    return {std::move(train), std::move(heldout)};
}

double profile_base_rate(const HawkesModel& model, const HawkesData& data, std::size_t cascade) {
    const auto& series = data.cascades.at(cascade);
    std::vector<double> excite;
    excitation(series, model.alpha, std::exp(-model.gamma), excite);
    const double n_bins = static_cast<double>(series.counts.size());
    const double total = static_cast<double>(series.total());
    if (total == 0.0) return 0.0;
    // The derivative sum_t n_t / (c + A_t) - T is decreasing in c and
    // nonpositive at c = total / T, so the maximizer lies in [0, total / T].
    auto slope = [&](double c) {
        double s = -n_bins;
        for (std::size_t t = 0; t < series.counts.size(); ++t) {
            if (series.counts[t] > 0) s += series.counts[t] / (c + excite[t]);
        }
        return s;
    };
    double lo = 0.0;
    double hi = total / n_bins;
    if (slope(hi) >= 0.0) return hi;
    bool needs_base = false;
    for (std::size_t t = 0; t < series.counts.size(); ++t) {
        if (series.counts[t] > 0 && excite[t] <= 0.0) needs_base = true;
    }
    if (!needs_base && slope(0.0) <= 0.0) return 0.0;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        (slope(mid) > 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

HawkesFit fit(const HawkesData& data, double gamma, const FitOptions& options) {
    if (data.cascades.empty()) throw DataError("no cascades to fit");
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ConfigError("bandwidth must be positive");
    bool any_events = false;
    for (const auto& c : data.cascades) any_events = any_events || c.total() > 0;
    if (!any_events) throw DataError("every cascade is empty");

    HawkesFit result;
    std::tie(result.train_cascades, result.heldout_cascades) =
        split_cascades(data.n_cascades(), options.heldout_fraction, options.seed);
    const HawkesData train = data.subset(result.train_cascades);

    const std::size_t n_docs = data.n_docs();
    const std::size_t n_train = train.n_cascades();
    std::vector<double> x0(n_docs + n_train);
    // Start every bandwidth at the same lag-one excitation alpha * exp(-gamma).
    for (std::size_t p = 0; p < n_docs; ++p) x0[p] = std::log(options.alpha_init) + gamma;
    for (std::size_t w = 0; w < n_train; ++w) {
        // An empty cascade has its MLE at c = 0; start it small instead.
        x0[n_docs + w] = std::log(std::max(mean_count(train.cascades[w]), 1e-6));
    }

    HawkesModel model;
    model.gamma = gamma;
    model.alpha.resize(n_docs);
    model.base.resize(n_train);
    auto unpack = [&](std::span<const double> x) {
        for (std::size_t p = 0; p < n_docs; ++p) model.alpha[p] = std::exp(x[p]);
        for (std::size_t w = 0; w < n_train; ++w) model.base[w] = std::exp(x[n_docs + w]);
    };
    auto objective = [&](std::span<const double> x, std::span<double> g) {
        unpack(x);
        double ll = 0.0;
        HawkesGradient grad;
        try {
            ll = log_likelihood(model, train);
            grad = gradient(model, train);
        } catch (const NumericalError&) {
            return std::numeric_limits<double>::infinity();
        }
        for (std::size_t p = 0; p < n_docs; ++p) g[p] = -grad.alpha[p] * model.alpha[p];
        for (std::size_t w = 0; w < n_train; ++w) g[n_docs + w] = -grad.base[w] * model.base[w];
        return -ll;
    };

    optim::LbfgsOptions lbfgs;
    lbfgs.max_iterations = options.max_iterations;
    lbfgs.gradient_tolerance = options.gradient_tolerance;
    lbfgs.relative_tolerance = options.relative_tolerance;
    auto solution = optim::minimize(objective, std::move(x0), lbfgs);
    if (!std::isfinite(solution.value)) throw NumericalError("Hawkes likelihood is not finite at the start point");

    unpack(solution.x);
    result.iterations = solution.iterations;
    result.converged = solution.converged;
    result.gradient_norm = solution.gradient_norm;
    result.train_ll = -solution.value;
    for (double v : solution.trace) result.ll_trace.push_back(-v);

    result.model.gamma = gamma;
    result.model.alpha = model.alpha;
    result.model.base.assign(data.n_cascades(), 0.0);
    for (std::size_t w = 0; w < n_train; ++w) result.model.base[result.train_cascades[w]] = model.base[w];
    if (!result.heldout_cascades.empty()) {
        for (auto w : result.heldout_cascades) {
            result.model.base[w] = profile_base_rate(result.model, data, w);
        }
        const HawkesData heldout = data.subset(result.heldout_cascades);
        HawkesModel held_model{gamma, result.model.alpha, {}};
        for (auto w : result.heldout_cascades) held_model.base.push_back(result.model.base[w]);
        result.heldout_ll = log_likelihood(held_model, heldout);
    }
    return result;
}

BandwidthSelection select_bandwidth(const HawkesData& data, std::span<const double> grid,
                                    const FitOptions& options) {
    if (grid.empty()) throw ConfigError("bandwidth grid is empty");
    BandwidthSelection selection;
    selection.grid.assign(grid.begin(), grid.end());
    bool found = false;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        try {
            auto f = fit(data, grid[i], options);
            // Without a heldout part, fall back to the training likelihood.
            const double score = std::isnan(f.heldout_ll) ? f.train_ll : f.heldout_ll;
            if (!found || score > best) {
                best = score;
                selection.best_index = i;
                selection.best_gamma = grid[i];
                found = true;
            }
            selection.fits.emplace_back(std::move(f));
        } catch (const NumericalError&) {
            selection.fits.emplace_back(std::nullopt);
        }
    }
    if (!found) throw NumericalError("every bandwidth in the grid failed to fit");
    return selection;
}

Simulation simulate(const SimulationSpec& spec, std::uint64_t seed) {
    const std::size_t n_years = spec.years.size();
    if (spec.docs_per_year == 0 || spec.alpha.size() != spec.docs_per_year * n_years) {
        throw ConfigError("simulation needs docs_per_year * years alpha values");
    }
    for (double a : spec.alpha) {
        if (!(a >= 0.0)) throw ConfigError("simulation alphas must be nonnegative");
    }
    for (double c : spec.base) {
        if (!(c >= 0.0)) throw ConfigError("simulation base rates must be nonnegative");
    }
    Simulation sim;
    for (std::size_t k = 0; k < spec.alpha.size(); ++k) sim.doc_ids.push_back("doc" + std::to_string(k));

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, spec.docs_per_year - 1);
    const double decay = std::exp(-spec.gamma);
    for (std::size_t w = 0; w < spec.base.size(); ++w) {
        Cascade cascade;
        cascade.word = "w" + std::to_string(w);
        cascade.kind = ChangeKind::Semantic;
        cascade.t_star = spec.years.first;
        double carry = 0.0;
        for (std::size_t t = 0; t < n_years; ++t) {
            const double lambda = spec.base[w] + carry;
            std::uint64_t n = 0;
            if (lambda > 0.0) n = std::poisson_distribution<std::uint64_t>(lambda)(rng);
            double added = 0.0;
            for (std::uint64_t e = 0; e < n; ++e) {
                const std::size_t doc = t * spec.docs_per_year + pick(rng);
                cascade.events.push_back({spec.years.year_at(t), sim.doc_ids[doc]});
                added += spec.alpha[doc];
            }
            carry = decay * (carry + added);
        }
        sort_events(cascade);
        sim.cascades.push_back(std::move(cascade));
    }
    return sim;
}

}  // namespace cinf::hawkes
