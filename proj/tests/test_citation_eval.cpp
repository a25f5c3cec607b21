#include "cinf/citation_eval.hpp"
#include "cinf/error.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

using namespace cinf;

namespace {

std::filesystem::path temp_file(const std::string& name, const std::string& content) {
    const auto path = std::filesystem::temp_directory_path() / name;
    std::ofstream(path) << content;
    return path;
}

// chi-square upper tail by Simpson integration of the density.
double simpson_tail(double x, double k) {
    auto density = [k](double t) {
        return std::exp((k / 2 - 1) * std::log(t) - t / 2 - (k / 2) * std::log(2.0) - std::lgamma(k / 2));
    };
    const int n = 200000;
    const double h = x / n;
    double s = 0.0;  // density(0) = 0 for k > 2
    for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * density(i * h);
    s += density(x);
    return 1.0 - s * h / 3.0;
}

std::vector<FeatureRow> synthetic_rows(std::mt19937_64& rng, std::size_t n, std::size_t k_topics, int first_year,
                                       int n_years, std::size_t n_gamma = 1) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::gamma_distribution<double> g1(1.0, 1.0);
    std::vector<FeatureRow> rows;
    for (std::size_t i = 0; i < n; ++i) {
        FeatureRow r;
        r.doc_id = "d" + std::to_string(i);
        r.year = first_year + static_cast<int>(i % static_cast<std::size_t>(n_years));
        r.z_short = normal(rng);
        double sum = 0.0;
        for (std::size_t k = 0; k < k_topics; ++k) {
            r.topics.push_back(g1(rng));
            sum += r.topics.back();
        }
        for (auto& p : r.topics) p /= sum;
        r.quantile_lexical = 1 + static_cast<int>(rng() % 4);
        r.quantile_semantic = 1 + static_cast<int>(rng() % 4);
        for (std::size_t g = 0; g < n_gamma; ++g) {
            r.z_lexical_by_gamma.push_back(normal(rng));
            r.z_semantic_by_gamma.push_back(normal(rng));
        }
        r.target = 0.5 * r.z_short + 0.3 * r.z_semantic_by_gamma[0] + 0.5 * normal(rng);
        rows.push_back(std::move(r));
    }
    return rows;
}

}  // namespace

TEST_CASE("citation windows") {
    CitationRecord r{"p", 2012, {{2011, 9}, {2012, 1}, {2014, 2}, {2015, 4}, {2017, 8}, {2018, 100}}};
    const auto w = citation_windows(r, 2017);
    REQUIRE(w);
    CHECK(w->short_term == 3);
    CHECK(w->future == 12);
    CHECK_FALSE(citation_windows(r, 2016).has_value());
    CHECK(*log_future_citations(r, 2020) == doctest::Approx(std::log(13.0)));
}

TEST_CASE("citation and topic readers validate their input") {
    const auto c = temp_file("cinf_cit.csv", "doc_id,year,count\na,2001,2\na,2001,3\nb,2002,0\n");
    const auto counts = read_citations_csv(c);
    CHECK(counts.at("a").at(2001) == 5);
    CHECK(counts.at("b").at(2002) == 0);
    CHECK_THROWS_AS(read_citations_csv(temp_file("cinf_cit_bad.csv", "a,2001,-1\n")), DataError);

    const auto t = temp_file("cinf_top.csv", "doc_id,p1,p2\na,0.25,0.75\n");
    CHECK(read_topics_csv(t).at("a") == std::vector<double>{0.25, 0.75});
    CHECK_THROWS_AS(read_topics_csv(temp_file("cinf_top_sum.csv", "a,0.5,0.6\n")), DataError);
    CHECK_THROWS_AS(read_topics_csv(temp_file("cinf_top_k.csv", "a,0.5,0.5\nb,1.0\n")), DataError);
    CHECK_THROWS_AS(read_topics_csv(temp_file("cinf_top_neg.csv", "a,1.5,-0.5\n")), DataError);
}

TEST_CASE("model tags") {
    CHECK(parse_model_list("M1,M3") == std::vector<ModelTag>{ModelTag::M1, ModelTag::M3});
    CHECK_THROWS_AS(parse_model_tag("M5"), ConfigError);
    CHECK_THROWS_AS(parse_model_list(""), ConfigError);
}

TEST_CASE("OLS recovers an exact line") {
    Eigen::MatrixXd x(4, 2);
    x << 1, 0, 1, 1, 1, 2, 1, 3;
    Eigen::VectorXd y(4);
    y << 0, 2, 4, 6;
    const auto fit = fit_ols(x, y);
    CHECK(fit.coefficients(0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(fit.coefficients(1) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(fit.residual_variance < 1e-25);
}

TEST_CASE("OLS matches the normal-equation oracle") {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 80, p = 6;
        Eigen::MatrixXd x(n, p);
        Eigen::VectorXd y(n);
        for (int i = 0; i < n; ++i) {
            x(i, 0) = 1.0;
            for (int j = 1; j < p; ++j) x(i, j) = normal(rng);
            y(i) = normal(rng) + x(i, 1);
        }
        const auto fit = fit_ols(x, y);
        const Eigen::MatrixXd xtx = x.transpose() * x;
        const Eigen::VectorXd beta = xtx.ldlt().solve(x.transpose() * y);
        const Eigen::VectorXd resid = y - x * beta;
        const double sigma2 = resid.squaredNorm() / n;
        const Eigen::VectorXd se = (sigma2 * xtx.inverse().diagonal().array()).sqrt();
        for (int j = 0; j < p; ++j) {
            CHECK(fit.coefficients(j) == doctest::Approx(beta(j)).epsilon(1e-8));
            CHECK(fit.standard_errors(j) == doctest::Approx(se(j)).epsilon(1e-8));
        }
        CHECK(fit.residual_variance == doctest::Approx(sigma2).epsilon(1e-10));
        // Gaussian log-likelihood summed directly at the ML variance.
        double ll = 0.0;
        for (int i = 0; i < n; ++i) {
            ll += -0.5 * std::log(2 * std::numbers::pi * sigma2) - resid(i) * resid(i) / (2 * sigma2);
        }
        CHECK(fit.log_likelihood == doctest::Approx(ll).epsilon(1e-10));
        // Residuals are orthogonal to every column.
        const Eigen::VectorXd own = y - x * fit.coefficients;
        CHECK((x.transpose() * own).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("rank-deficient designs name the dependent column") {
    Eigen::MatrixXd x(5, 3);
    x << 1, 1, 2, 1, 2, 4, 1, 3, 6, 1, 4, 8, 1, 5, 10;
    Eigen::VectorXd y = Eigen::VectorXd::LinSpaced(5, 0, 1);
    const std::vector<std::string> labels = {"Constant", "a", "twice a"};
    try {
        fit_ols(x, y, labels);
        FAIL("expected a rank error");
    } catch (const DataError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("rank-deficient") != std::string::npos);
        CHECK((msg.find("twice a") != std::string::npos || msg.find(": a") != std::string::npos));
    }
    CHECK(dependent_columns(x).size() == 1);
}

TEST_CASE("design matrix layouts") {
    std::mt19937_64 rng(10);
    const auto rows = synthetic_rows(rng, 60, 20, 2000, 5);
    const auto m1 = build_design_matrix(ModelTag::M1, rows, InfluenceEncoding::Quantile);
    CHECK(m1.labels == std::vector<std::string>{"Constant", "Initial Citations"});
    const auto m4 = build_design_matrix(ModelTag::M4, rows, InfluenceEncoding::Quantile);
    REQUIRE(m4.x.cols() == 27);
    CHECK(m4.labels[2] == "Topic 2");
    CHECK(m4.labels[21] == "Lex. Inf. Q2");
    CHECK(m4.labels[26] == "Sem. Inf. Q4");
    for (Eigen::Index i = 0; i < m4.x.rows(); ++i) {
        const double lex = m4.x.row(i).segment(21, 3).sum();
        const double sem = m4.x.row(i).segment(24, 3).sum();
        CHECK(lex == (rows[static_cast<std::size_t>(i)].quantile_lexical > 1 ? 1.0 : 0.0));
        CHECK(sem == (rows[static_cast<std::size_t>(i)].quantile_semantic > 1 ? 1.0 : 0.0));
    }
    const std::vector<double> gammas = {1.0};
    const auto m3 = build_design_matrix(ModelTag::M3, rows, InfluenceEncoding::PerGamma, gammas);
    CHECK(m3.labels.back() == "Lex. Inf. z@1");

    auto broken = rows;
    broken[3].topics.clear();
    try {
        build_design_matrix(ModelTag::M2, broken, InfluenceEncoding::Quantile);
        FAIL("expected a missing feature error");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("'d3'") != std::string::npos);
    }
}

TEST_CASE("chi-square tail") {
    CHECK(std::abs(chi_square_upper_tail(7.815, 3) - 0.05) < 1e-4);
    CHECK(std::abs(chi_square_upper_tail(7.815, 3) - simpson_tail(7.815, 3)) < 1e-7);
    CHECK(std::abs(chi_square_upper_tail(3.841458820694124, 1) - 0.05) < 1e-10);
    CHECK(std::abs(chi_square_upper_tail(2.0, 2) - std::exp(-1.0)) < 1e-14);
    // Both evaluation branches.
    for (double x : {0.5, 3.0, 9.0, 40.0}) CHECK(std::abs(chi_square_upper_tail(x, 6) - simpson_tail(x, 6)) < 1e-7);
    CHECK(chi_square_upper_tail(0.0, 3) == 1.0);
    CHECK(regularized_gamma_q(1.0, 2.0) == doctest::Approx(std::exp(-2.0)).epsilon(1e-14));
}

TEST_CASE("likelihood ratio tests") {
    std::mt19937_64 rng(12);
    const auto rows = synthetic_rows(rng, 200, 3, 2000, 5);
    const std::vector<ModelTag> models = {ModelTag::M1, ModelTag::M2, ModelTag::M3, ModelTag::M4};
    const auto report = run_regressions(rows, models);
    REQUIRE(report.fits.size() == 4);
    REQUIRE(report.tests.size() == 3);
    for (std::size_t i = 1; i < 4; ++i) CHECK(report.fits[i].log_likelihood >= report.fits[i - 1].log_likelihood);
    CHECK(report.tests[0].second.df == 2);
    CHECK(report.tests[1].second.df == 3);

    const auto same = likelihood_ratio_test(report.fits[1], report.fits[1], 3);
    CHECK(same.statistic == 0.0);
    CHECK(same.p_value == 1.0);
    CHECK_THROWS_AS(likelihood_ratio_test(report.fits[3], report.fits[0], 7), DataError);
}

TEST_CASE("online training rows never reach past t - 3") {
    std::mt19937_64 rng(13);
    auto rows = synthetic_rows(rng, 300, 3, 2000, 15);
    for (int t = 2000; t <= 2016; ++t) {
        for (auto i : training_rows(rows, t)) CHECK(rows[i].year <= t - 3);
    }
    const std::vector<ModelTag> models = {ModelTag::M1, ModelTag::M4};
    const std::vector<double> gammas = {1.0};
    const auto base = online_predict(rows, models, 2005, 2014, gammas);
    for (const auto& yr : base.years) CHECK(yr.max_train_year <= yr.year - 3);

    // Scrambling targets published in (t - 3, t) or after t leaves year t unchanged.
    auto scrambled = rows;
    for (auto& r : scrambled) {
        if (r.year > 2007 && r.year != 2010) r.target = 1e6;
    }
    const auto again = online_predict(scrambled, models, 2010, 2010, gammas);
    REQUIRE(again.years.size() == 1);
    CHECK(again.years[0].mse == base.years[5].mse);
}

TEST_CASE("online prediction on realizable data") {
    std::mt19937_64 rng(14);
    auto rows = synthetic_rows(rng, 400, 3, 2000, 10);
    for (auto& r : rows) r.target = 0.7 * r.z_short - 0.2 * r.z_lexical_by_gamma[0] + 0.1;
    const std::vector<ModelTag> models = {ModelTag::M1, ModelTag::M3};
    const std::vector<double> gammas = {1.0};
    const auto report = online_predict(rows, models, 2003, 2009, gammas);
    CHECK(report.micro_mse[1] < 1e-20);
    CHECK(report.micro_mse[0] > 1e-3);

    // Micro average weights by year size.
    double se = 0.0, n = 0.0;
    for (const auto& yr : report.years) {
        se += yr.mse[0] * yr.n_test;
        n += yr.n_test;
    }
    CHECK(report.micro_mse[0] == doctest::Approx(se / n).epsilon(1e-12));

    const auto early = online_predict(rows, models, 2000, 2002, gammas);
    CHECK(early.warnings.size() == 3);
    CHECK(std::isnan(early.micro_mse[0]));
}

TEST_CASE("assembled targets are z-scored per year") {
    InfluenceTable features;
    features.gammas = {1.0};
    CitationCounts citations;
    std::map<std::string, std::vector<double>> topics;
    for (int i = 0; i < 30; ++i) {
        InfluenceScore s;
        s.doc_id = "p" + std::to_string(i);
        s.year = 1998 + i % 6;
        s.z_semantic_by_gamma = {0.0};
        s.z_lexical_by_gamma = {0.0};
        features.rows.push_back(s);
        citations[s.doc_id][s.year + 1] = i;
        citations[s.doc_id][s.year + 4] = i * i % 7;
        if (i != 0) topics[s.doc_id] = {0.5, 0.5};
    }
    AssemblyOptions options;
    options.min_year = 2000;
    options.horizon = 2007;
    const auto out = assemble_rows(features, citations, &topics, options);
    // 1998-1999 precede the analysis; 2003 is immature at horizon 2007.
    CHECK(out.before_min_year == 10);
    CHECK(out.immature == 5);
    CHECK(out.rows.size() == 15);
    CHECK(out.missing_topics == 0);
    options.horizon.reset();
    CHECK(assemble_rows(features, citations, &topics, options).immature == 5);  // last citing year is 2007
    std::map<int, std::pair<double, double>> stats;
    for (const auto& r : out.rows) {
        stats[r.year].first += r.target;
        stats[r.year].second += r.target * r.target;
    }
    for (const auto& [y, s] : stats) {
        CHECK(std::abs(s.first) < 1e-12);
        CHECK(s.second == doctest::Approx(static_cast<double>(out.rows.size()) / stats.size()));
    }
}

TEST_CASE("report files") {
    std::mt19937_64 rng(15);
    const auto rows = synthetic_rows(rng, 120, 3, 2000, 12);
    const std::vector<ModelTag> models = {ModelTag::M1, ModelTag::M2, ModelTag::M3, ModelTag::M4};
    const auto dir = std::filesystem::temp_directory_path() / "cinf_eval_files";
    std::filesystem::create_directories(dir);
    const auto report = run_regressions(rows, models);
    write_regression_table(report, dir / "table.tsv");
    write_coefficients_csv(report, dir / "coef.csv");
    const std::vector<double> gammas = {1.0};
    write_online_table(online_predict(rows, models, 2004, 2011, gammas), dir / "online.tsv");

    auto slurp = [](const std::filesystem::path& p) {
        std::ifstream in(p);
        return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    };
    const auto table = slurp(dir / "table.tsv");
    CHECK(table.find("Predictors\tM1\tM2\tM3\tM4") != std::string::npos);
    CHECK(table.find("Sem. Inf. Q4") != std::string::npos);
    CHECK(table.find("Log Lik.") != std::string::npos);
    CHECK(table.find("LRT M3 vs M4") != std::string::npos);
    CHECK(table.find("\nTopic 2") == std::string::npos);
    CHECK(slurp(dir / "coef.csv").find("model,predictor,coefficient,std_error") != std::string::npos);
    const auto online = slurp(dir / "online.tsv");
    CHECK(online.find("Publication Year\tM1\tM2\tM3\tM4") != std::string::npos);
    CHECK(online.find("All Years") != std::string::npos);
    std::filesystem::remove_all(dir);
}
