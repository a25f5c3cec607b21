#include "cinf/citation_eval.hpp"

#include "cinf/error.hpp"
#include "cinf/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <sstream>

namespace cinf {

namespace {

std::string fixed(double v, int digits = 3) {
    if (std::isnan(v)) return "NA";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    // Avoid printing "-0.000".
    std::string s(buf);
    if (s.find_first_not_of("-0.") == std::string::npos && s[0] == '-') s.erase(0, 1);
    return s;
}

std::string lrt_name(ModelTag a, ModelTag b) { return to_string(a) + " vs " + to_string(b); }

Eigen::VectorXd target_vector(std::span<const FeatureRow> rows, std::span<const std::size_t> idx) {
    Eigen::VectorXd y(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) y(static_cast<Eigen::Index>(i)) = rows[idx[i]].target;
    return y;
}

}  // namespace

CitationCounts read_citations_csv(const std::filesystem::path& path) {
    CitationCounts out;
    auto lines = io::read_data_lines(path, "");
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (i == 0 && lines[i].rfind("doc_id,", 0) == 0) continue;
        auto f = io::split(lines[i], ',');
        if (f.size() != 3) throw DataError(path.string() + ": bad citation row '" + lines[i] + "'");
        const double count = io::parse_double(f[2], "citation count");
        if (count < 0.0) throw DataError(path.string() + ": negative citation count for " + f[0]);
        out[f[0]][static_cast<int>(io::parse_int(f[1], "citation year"))] += count;
    }
    return out;
}

std::map<std::string, std::vector<double>> read_topics_csv(const std::filesystem::path& path) {
    std::map<std::string, std::vector<double>> out;
    auto lines = io::read_data_lines(path, "");
    std::size_t k = 0;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (i == 0 && lines[i].rfind("doc_id,", 0) == 0) continue;
        auto f = io::split(lines[i], ',');
        if (f.size() < 2) throw DataError(path.string() + ": bad topic row '" + lines[i] + "'");
        if (k == 0) k = f.size() - 1;
        if (f.size() - 1 != k) throw DataError(path.string() + ": inconsistent topic count for " + f[0]);
        std::vector<double> p;
        double sum = 0.0;
        for (std::size_t j = 1; j < f.size(); ++j) {
            p.push_back(io::parse_double(f[j], "topic probability"));
            if (p.back() < 0.0) throw DataError(path.string() + ": negative topic probability for " + f[0]);
            sum += p.back();
        }
        if (std::abs(sum - 1.0) > 1e-6) throw DataError(path.string() + ": topics of " + f[0] + " do not sum to 1");
        out[f[0]] = std::move(p);
    }
    return out;
}

std::optional<CitationWindows> citation_windows(const CitationRecord& record, int horizon) {
    if (record.year + 5 > horizon) return std::nullopt;
    CitationWindows w;
    for (const auto& [year, count] : record.counts) {
        if (year >= record.year && year <= record.year + 2) w.short_term += count;
        if (year >= record.year + 3 && year <= record.year + 5) w.future += count;
    }
    return w;
}

std::optional<double> log_future_citations(const CitationRecord& record, int horizon) {
    auto w = citation_windows(record, horizon);
    if (!w) return std::nullopt;
    return std::log1p(w->future);
}

std::string to_string(ModelTag tag) {
    switch (tag) {
    case ModelTag::M1: return "M1";
    case ModelTag::M2: return "M2";
    case ModelTag::M3: return "M3";
    case ModelTag::M4: return "M4";
    }
    return "?";
}

ModelTag parse_model_tag(std::string_view text) {
    if (text == "M1") return ModelTag::M1;
    if (text == "M2") return ModelTag::M2;
    if (text == "M3") return ModelTag::M3;
    if (text == "M4") return ModelTag::M4;
    throw ConfigError("unknown model '" + std::string(text) + "'");
}

std::vector<ModelTag> parse_model_list(std::string_view text) {
    std::vector<ModelTag> out;
    for (const auto& item : io::split(text, ',')) {
        if (!item.empty()) out.push_back(parse_model_tag(item));
    }
    if (out.empty()) throw ConfigError("empty model list");
    return out;
}

RowAssembly assemble_rows(const InfluenceTable& features, const CitationCounts& citations,
                          const std::map<std::string, std::vector<double>>* topics,
                          const AssemblyOptions& options) {
    int horizon = std::numeric_limits<int>::min();
    if (options.horizon) {
        horizon = *options.horizon;
    } else {
        for (const auto& [doc, counts] : citations) {
            if (!counts.empty()) horizon = std::max(horizon, counts.rbegin()->first);
        }
    }
    RowAssembly out;
    out.gammas = features.gammas;
    std::map<std::string, double> short_log, future_log;
    std::map<std::string, int> years;
    for (const auto& f : features.rows) {
        if (f.year < options.min_year) {
            ++out.before_min_year;
            continue;
        }
        CitationRecord record{f.doc_id, f.year, {}};
        if (auto it = citations.find(f.doc_id); it != citations.end()) record.counts = it->second;
        auto windows = citation_windows(record, horizon);
        if (!windows) {
            ++out.immature;
            continue;
        }
        FeatureRow row;
        row.doc_id = f.doc_id;
        row.year = f.year;
        row.quantile_lexical = f.quantile_lexical;
        row.quantile_semantic = f.quantile_semantic;
        row.z_lexical_by_gamma = f.z_lexical_by_gamma;
        row.z_semantic_by_gamma = f.z_semantic_by_gamma;
        if (topics) {
            if (auto it = topics->find(f.doc_id); it != topics->end()) {
                row.topics = it->second;
            } else {
                ++out.missing_topics;
            }
        }
        short_log[f.doc_id] = std::log1p(windows->short_term);
        future_log[f.doc_id] = std::log1p(windows->future);
        years[f.doc_id] = f.year;
        out.rows.push_back(std::move(row));
    }
    const auto z_short = z_normalize_by_year(short_log, years);
    const auto z_future = z_normalize_by_year(future_log, years);
    for (auto& row : out.rows) {
        row.z_short = z_short.at(row.doc_id);
        row.target = z_future.at(row.doc_id);
    }
    return out;
}

DesignMatrix build_design_matrix(ModelTag tag, std::span<const FeatureRow> rows, InfluenceEncoding encoding,
                                 std::span<const double> gammas) {
    const int level = static_cast<int>(tag);
    DesignMatrix dm;
    dm.labels = {"Constant", "Initial Citations"};
    std::size_t n_topics = 0;
    if (level >= 1) {
        if (rows.empty()) throw DataError("no rows for the design matrix");
        n_topics = rows.front().topics.size();
        for (const auto& r : rows) {
            if (r.topics.empty() || r.topics.size() != n_topics) {
                throw DataError("missing feature for document '" + r.doc_id + "': column topics");
            }
        }
        for (std::size_t k = 1; k < n_topics; ++k) dm.labels.push_back("Topic " + std::to_string(k + 1));
    }
    auto add_influence_labels = [&](const std::string& prefix, std::size_t n_gamma) {
        if (encoding == InfluenceEncoding::Quantile) {
            for (int q = 2; q <= 4; ++q) dm.labels.push_back(prefix + " Q" + std::to_string(q));
        } else {
            for (std::size_t g = 0; g < n_gamma; ++g) {
                dm.labels.push_back(prefix + " z@" +
                                    (g < gammas.size() ? io::format_double(gammas[g]) : std::to_string(g)));
            }
        }
    };
    const std::size_t n_gamma_lex = rows.empty() ? 0 : rows.front().z_lexical_by_gamma.size();
    const std::size_t n_gamma_sem = rows.empty() ? 0 : rows.front().z_semantic_by_gamma.size();
    if (level >= 2) add_influence_labels("Lex. Inf.", n_gamma_lex);
    if (level >= 3) add_influence_labels("Sem. Inf.", n_gamma_sem);

    dm.x.setZero(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dm.labels.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        const auto ii = static_cast<Eigen::Index>(i);
        Eigen::Index c = 0;
        dm.x(ii, c++) = 1.0;
        dm.x(ii, c++) = r.z_short;
        for (std::size_t k = 1; k < n_topics; ++k) dm.x(ii, c++) = r.topics[k];
        auto put_influence = [&](int quantile, const std::vector<double>& z, std::size_t n_gamma,
                                 const char* column) {
            if (encoding == InfluenceEncoding::Quantile) {
                if (quantile < 1 || quantile > 4) {
                    throw DataError("missing feature for document '" + r.doc_id + "': column " + column);
                }
                for (int q = 2; q <= 4; ++q) dm.x(ii, c++) = quantile == q ? 1.0 : 0.0;
            } else {
                if (z.size() != n_gamma) {
                    throw DataError("missing feature for document '" + r.doc_id + "': column " + column);
                }
                for (double v : z) dm.x(ii, c++) = v;
            }
        };
        if (level >= 2) put_influence(r.quantile_lexical, r.z_lexical_by_gamma, n_gamma_lex, "lexical influence");
        if (level >= 3) put_influence(r.quantile_semantic, r.z_semantic_by_gamma, n_gamma_sem, "semantic influence");
    }
    if (dm.x.rows() > 0) dm.dependent_columns = dependent_columns(dm.x);
    return dm;
}

std::vector<std::size_t> dependent_columns(const Eigen::MatrixXd& x) {
    if (x.cols() == 0) return {};
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    qr.setThreshold(1e-10);
    const auto rank = qr.rank();
    std::vector<std::size_t> out;
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index i = rank; i < x.cols(); ++i) out.push_back(static_cast<std::size_t>(perm(i)));
    std::sort(out.begin(), out.end());
    return out;
}

RegressionFit fit_ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::span<const std::string> labels) {
    const auto n = x.rows();
    const auto p = x.cols();
    if (y.size() != n) throw DataError("design and target sizes differ");
    if (n < p || p == 0) throw DataError("need at least as many rows as columns for least squares");
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    qr.setThreshold(1e-10);
    if (qr.rank() < p) {
        std::string names;
        const auto& perm = qr.colsPermutation().indices();
        std::vector<Eigen::Index> dep;
        for (Eigen::Index i = qr.rank(); i < p; ++i) dep.push_back(perm(i));
        std::sort(dep.begin(), dep.end());
        for (auto c : dep) {
            if (!names.empty()) names += ", ";
            names += static_cast<std::size_t>(c) < labels.size() ? labels[static_cast<std::size_t>(c)]
                                                                 : "column " + std::to_string(c);
        }
        throw DataError("rank-deficient design; dependent columns: " + names);
    }
    RegressionFit fit;
    fit.labels.assign(labels.begin(), labels.end());
    fit.n = static_cast<std::size_t>(n);
    fit.coefficients = qr.solve(y);
    const Eigen::VectorXd residual = y - x * fit.coefficients;
    const double rss = residual.squaredNorm();
    fit.residual_variance = rss / static_cast<double>(n);

    const Eigen::MatrixXd r = qr.matrixR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
    const Eigen::MatrixXd r_inv =
        r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
    const Eigen::MatrixXd cov_perm = r_inv * r_inv.transpose();
    const auto& perm = qr.colsPermutation();
    const Eigen::MatrixXd cov = perm * cov_perm * perm.transpose();
    fit.standard_errors = (fit.residual_variance * cov.diagonal().array()).sqrt();
    fit.log_likelihood = fit.residual_variance > 0.0
                             ? -0.5 * static_cast<double>(n) *
                                   (std::log(2.0 * std::numbers::pi * fit.residual_variance) + 1.0)
                             : std::numeric_limits<double>::infinity();
    return fit;
}

double regularized_gamma_q(double a, double x) {
    if (!(a > 0.0) || x < 0.0 || std::isnan(x)) throw DataError("invalid incomplete gamma arguments");
    if (x == 0.0) return 1.0;
    if (std::isinf(x)) return 0.0;
    const double log_prefix = -x + a * std::log(x) - std::lgamma(a);
    if (x < a + 1.0) {
        // Series for the lower function P.
        double term = 1.0 / a;
        double sum = term;
        for (int n = 1; n < 10000; ++n) {
            term *= x / (a + n);
            sum += term;
            if (std::abs(term) < std::abs(sum) * 1e-16) break;
        }
        return std::max(0.0, 1.0 - sum * std::exp(log_prefix));
    }
    // Continued fraction for Q (modified Lentz).
    constexpr double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 10000; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < 1e-16) break;
    }
    return std::exp(log_prefix) * h;
}

double chi_square_upper_tail(double statistic, double df) {
    if (!(df > 0.0)) throw DataError("chi-square degrees of freedom must be positive");
    if (statistic <= 0.0) return 1.0;
    return regularized_gamma_q(0.5 * df, 0.5 * statistic);
}

LikelihoodRatio likelihood_ratio_test(const RegressionFit& restricted, const RegressionFit& full, double df) {
    if (restricted.n != full.n) throw DataError("likelihood ratio test needs fits on identical rows");
    if (full.log_likelihood < restricted.log_likelihood - 1e-9) {
        throw DataError("nesting violated: the full model fits worse than the restricted one");
    }
    LikelihoodRatio lr;
    lr.df = df;
    lr.statistic = std::max(0.0, 2.0 * (full.log_likelihood - restricted.log_likelihood));
    if (std::isnan(lr.statistic)) lr.statistic = 0.0;  // both fits exact
    lr.p_value = chi_square_upper_tail(lr.statistic, df);
    return lr;
}

RegressionReport run_regressions(std::span<const FeatureRow> rows, std::span<const ModelTag> models) {
    RegressionReport report;
    for (auto tag : models) {
        auto dm = build_design_matrix(tag, rows, InfluenceEncoding::Quantile);
        std::vector<std::size_t> all(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) all[i] = i;
        auto fit = fit_ols(dm.x, target_vector(rows, all), dm.labels);
        fit.tag = tag;
        report.fits.push_back(std::move(fit));
    }
    for (std::size_t i = 1; i < report.fits.size(); ++i) {
        const auto& a = report.fits[i - 1];
        const auto& b = report.fits[i];
        if (static_cast<int>(b.tag) <= static_cast<int>(a.tag)) continue;
        const double df = static_cast<double>(b.coefficients.size() - a.coefficients.size());
        if (df <= 0) continue;
        report.tests.emplace_back(lrt_name(a.tag, b.tag), likelihood_ratio_test(a, b, df));
    }
    return report;
}

std::vector<std::size_t> training_rows(std::span<const FeatureRow> rows, int test_year) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].year <= test_year - 3) out.push_back(i);
    }
    return out;
}

EvalReport online_predict(std::span<const FeatureRow> rows, std::span<const ModelTag> models, int first_year,
                          int last_year, std::span<const double> gammas) {
    EvalReport report;
    report.models.assign(models.begin(), models.end());
    std::vector<double> total_se(models.size(), 0.0);
    std::vector<std::size_t> total_n(models.size(), 0);
    for (int t = first_year; t <= last_year; ++t) {
        YearResult yr;
        yr.year = t;
        const auto train = training_rows(rows, t);
        std::vector<std::size_t> test;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (rows[i].year == t) test.push_back(i);
        }
        yr.n_train = train.size();
        yr.n_test = test.size();
        yr.max_train_year = std::numeric_limits<int>::min();
        for (auto i : train) yr.max_train_year = std::max(yr.max_train_year, rows[i].year);
        yr.mse.assign(models.size(), std::numeric_limits<double>::quiet_NaN());
        if (train.empty() || test.empty()) {
            report.warnings.push_back("year " + std::to_string(t) + " skipped: " +
                                      (train.empty() ? "empty training set" : "no test papers"));
            report.years.push_back(std::move(yr));
            continue;
        }
        std::vector<FeatureRow> train_rows, test_rows;
        for (auto i : train) train_rows.push_back(rows[i]);
        for (auto i : test) test_rows.push_back(rows[i]);
        const Eigen::VectorXd y_train = target_vector(rows, train);
        const Eigen::VectorXd y_test = target_vector(rows, test);
        for (std::size_t m = 0; m < models.size(); ++m) {
            auto dm_train = build_design_matrix(models[m], train_rows, InfluenceEncoding::PerGamma, gammas);
            auto dm_test = build_design_matrix(models[m], test_rows, InfluenceEncoding::PerGamma, gammas);
            std::vector<Eigen::Index> keep;
            for (Eigen::Index c = 0; c < dm_train.x.cols(); ++c) {
                if (!std::binary_search(dm_train.dependent_columns.begin(), dm_train.dependent_columns.end(),
                                        static_cast<std::size_t>(c))) {
                    keep.push_back(c);
                }
            }
            if (train.size() < keep.size()) {
                report.warnings.push_back("year " + std::to_string(t) + " " + to_string(models[m]) +
                                          " skipped: fewer training rows than columns");
                continue;
            }
            const Eigen::MatrixXd x_train = dm_train.x(Eigen::all, keep);
            const Eigen::MatrixXd x_test = dm_test.x(Eigen::all, keep);
            const auto fit = fit_ols(x_train, y_train);
            const Eigen::VectorXd err = y_test - x_test * fit.coefficients;
            yr.mse[m] = err.squaredNorm() / static_cast<double>(test.size());
            total_se[m] += err.squaredNorm();
            total_n[m] += test.size();
        }
        report.years.push_back(std::move(yr));
    }
    for (std::size_t m = 0; m < models.size(); ++m) {
        report.micro_mse.push_back(total_n[m] > 0 ? total_se[m] / static_cast<double>(total_n[m])
                                                  : std::numeric_limits<double>::quiet_NaN());
    }
    return report;
}

void write_regression_table(const RegressionReport& report, const std::filesystem::path& path) {
    std::ostringstream out;
    out << io::schema_line("regression_table", 1) << '\n';
    out << "# topic coefficients are included as controls in M2-M4 and listed in the coefficient file\n";
    out << "Predictors";
    for (const auto& f : report.fits) out << '\t' << to_string(f.tag);
    out << '\n';
    std::vector<std::string> predictors;
    for (const auto& f : report.fits) {
        for (const auto& l : f.labels) {
            if (l.rfind("Topic ", 0) == 0) continue;
            if (std::find(predictors.begin(), predictors.end(), l) == predictors.end()) predictors.push_back(l);
        }
    }
    for (const auto& name : predictors) {
        out << name;
        for (const auto& f : report.fits) {
            auto it = std::find(f.labels.begin(), f.labels.end(), name);
            out << '\t';
            if (it == f.labels.end()) continue;
            const auto c = static_cast<Eigen::Index>(it - f.labels.begin());
            out << fixed(f.coefficients(c)) << " (" << fixed(f.standard_errors(c)) << ")";
        }
        out << '\n';
    }
    out << "Log Lik.";
    for (const auto& f : report.fits) out << '\t' << fixed(f.log_likelihood, 1);
    out << "\nN";
    for (const auto& f : report.fits) out << '\t' << f.n;
    out << '\n';
    for (const auto& [name, lr] : report.tests) {
        out << "LRT " << name << "\tchi2(" << fixed(lr.df, 0) << ")=" << fixed(lr.statistic, 3)
            << "\tp=" << io::format_double(lr.p_value) << '\n';
    }
    io::write_atomic(path, out.str());
}

void write_coefficients_csv(const RegressionReport& report, const std::filesystem::path& path) {
    std::ostringstream out;
    out << io::schema_line("coefficients", 1) << "\nmodel,predictor,coefficient,std_error\n";
    for (const auto& f : report.fits) {
        for (std::size_t c = 0; c < f.labels.size(); ++c) {
            const auto i = static_cast<Eigen::Index>(c);
            out << to_string(f.tag) << ',' << f.labels[c] << ',' << io::format_double(f.coefficients(i)) << ','
                << io::format_double(f.standard_errors(i)) << '\n';
        }
    }
    io::write_atomic(path, out.str());
}

void write_online_table(const EvalReport& report, const std::filesystem::path& path) {
    std::ostringstream out;
    out << io::schema_line("online_table", 1) << '\n';
    for (const auto& w : report.warnings) out << "# " << w << '\n';
    out << "Publication Year";
    for (auto m : report.models) out << '\t' << to_string(m);
    out << "\tn_test\tn_train\n";
    for (const auto& yr : report.years) {
        out << yr.year;
        for (double v : yr.mse) out << '\t' << fixed(v);
        out << '\t' << yr.n_test << '\t' << yr.n_train << '\n';
    }
    out << "All Years";
    for (double v : report.micro_mse) out << '\t' << fixed(v);
    std::size_t n = 0;
    for (const auto& yr : report.years) {
        if (!yr.mse.empty() && !std::isnan(yr.mse.front())) n += yr.n_test;
    }
    out << '\t' << n << "\t\n";
    io::write_atomic(path, out.str());
}

}  // namespace cinf
