#include "cinf/cascade.hpp"
#include "cinf/change_detect.hpp"
#include "cinf/citation_eval.hpp"
#include "cinf/corpus.hpp"
#include "cinf/embedding_store.hpp"
#include "cinf/error.hpp"
#include "cinf/fixture.hpp"
#include "cinf/influence.hpp"
#include "cinf/io.hpp"
#include "cinf/pipeline.hpp"
#include "cinf/sense_classifier.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace cinf;

namespace {

std::vector<double> parse_grid(const std::string& text) {
    std::vector<double> grid;
    for (const auto& item : io::split(text, ',')) {
        if (item.empty()) continue;
        const double g = io::parse_double(item, "gamma grid");
        if (!(g > 0.0)) throw ConfigError("bandwidths must be positive");
        grid.push_back(g);
    }
    if (grid.empty()) throw ConfigError("empty gamma grid");
    return grid;
}

fs::path sibling(const fs::path& p, const std::string& name) {
    return p.has_parent_path() ? p.parent_path() / name : fs::path(name);
}

void print_stage(const StageResult& r) {
    std::cerr << to_string(r.stage) << (r.skipped ? ": up to date" : ": done") << '\n';
    for (const auto& n : r.notes) std::cerr << "  " << n << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Linguistic influence of documents from innovation cascades"};
    app.require_subcommand(1);

    // corpus build
    auto* corpus_cmd = app.add_subcommand("corpus", "Corpus loading and vocabulary");
    corpus_cmd->require_subcommand(1);
    auto* corpus_build = corpus_cmd->add_subcommand("build", "Tokenize the corpus and build the vocabulary");
    std::string corpus_input, corpus_years = "1990:2019", vocab_out = "vocab.tsv";
    std::string counts_out, docs_out;
    VocabularyConfig vocab_config;
    corpus_build->add_option("--input", corpus_input, "Corpus JSONL file")->required();
    corpus_build->add_option("--years", corpus_years, "Year range first:last")->capture_default_str();
    corpus_build->add_option("--min-count", vocab_config.min_count, "Minimum corpus count")->capture_default_str();
    corpus_build->add_option("--max-df", vocab_config.max_df, "Maximum document frequency")->capture_default_str();
    corpus_build->add_option("--out", vocab_out, "Vocabulary TSV")->capture_default_str();
    corpus_build->add_option("--counts-out", counts_out, "Yearly counts TSV (default: counts.tsv beside --out)");
    corpus_build->add_option("--docs-out", docs_out, "Document table TSV (default: documents.tsv beside --out)");

    // moments compute
    auto* moments_cmd = app.add_subcommand("moments", "Embedding moment statistics");
    moments_cmd->require_subcommand(1);
    auto* moments_compute = moments_cmd->add_subcommand("compute", "Accumulate per-word per-year moments");
    std::string store_path, vocab_path, moments_out = "moments.cmom", moments_years = "1990:2019";
    moments_compute->add_option("--store", store_path, "CEMB embedding store")->required();
    moments_compute->add_option("--vocab", vocab_path, "Vocabulary TSV")->required();
    moments_compute->add_option("--years", moments_years, "Year range")->capture_default_str();
    moments_compute->add_option("--out", moments_out, "Moments file")->capture_default_str();

    // changes detect
    auto* changes_cmd = app.add_subcommand("changes", "Innovation detection");
    changes_cmd->require_subcommand(1);
    auto* changes_detect = changes_cmd->add_subcommand("detect", "Rank semantic or lexical changes");
    std::string change_kind = "semantic", changes_out = "changes.tsv", changes_moments = "moments.cmom";
    std::string changes_vocab = "vocab.tsv", changes_counts;
    long long k = 2910;
    changes_detect->add_option("--kind", change_kind, "semantic or lexical")
        ->check(CLI::IsMember({"semantic", "lexical"}))
        ->capture_default_str();
    changes_detect->add_option("--k", k, "Number of innovations")->capture_default_str();
    changes_detect->add_option("--moments", changes_moments, "Moments file (semantic)")->capture_default_str();
    changes_detect->add_option("--vocab", changes_vocab, "Vocabulary TSV")->capture_default_str();
    changes_detect->add_option("--counts", changes_counts, "Yearly counts TSV (default: counts.tsv beside --vocab)");
    changes_detect->add_option("--out", changes_out, "Changes TSV")->capture_default_str();

    // cascades build
    auto* cascades_cmd = app.add_subcommand("cascades", "Cascade construction");
    cascades_cmd->require_subcommand(1);
    auto* cascades_build = cascades_cmd->add_subcommand("build", "Label usages and build cascades");
    std::string cascades_changes, cascades_store, cascades_corpus, cascades_vocab = "vocab.tsv";
    std::string cascades_out = "cascades.jsonl", cascades_years = "1990:2019";
    ClassifierConfig classifier;
    cascades_build->add_option("--changes", cascades_changes, "Changes TSV")->required();
    cascades_build->add_option("--store", cascades_store, "CEMB store (needed for semantic changes)");
    cascades_build->add_option("--corpus", cascades_corpus, "Corpus JSONL")->required();
    cascades_build->add_option("--vocab", cascades_vocab, "Vocabulary TSV")->capture_default_str();
    cascades_build->add_option("--years", cascades_years, "Year range")->capture_default_str();
    cascades_build->add_option("--l2", classifier.l2_strength, "Classifier L2 strength")->capture_default_str();
    cascades_build->add_option("--out", cascades_out, "Cascades JSONL")->capture_default_str();

    // hawkes fit
    auto* hawkes_cmd = app.add_subcommand("hawkes", "Influence estimation");
    hawkes_cmd->require_subcommand(1);
    auto* hawkes_fit = hawkes_cmd->add_subcommand("fit", "Fit the discrete Hawkes model over a bandwidth grid");
    std::string hawkes_cascades, gamma_grid = "0.001,0.01,0.1,1,10,100", hawkes_out = "influence_raw.csv";
    std::string hawkes_docs, hawkes_years;
    double heldout = 0.1;
    std::uint64_t seed = 13;
    hawkes_fit->add_option("--cascades", hawkes_cascades, "Cascades JSONL")->required();
    hawkes_fit->add_option("--gamma-grid", gamma_grid, "Comma separated bandwidths")->capture_default_str();
    hawkes_fit->add_option("--heldout", heldout, "Heldout cascade fraction")->capture_default_str();
    hawkes_fit->add_option("--seed", seed, "Split seed")->capture_default_str();
    hawkes_fit->add_option("--docs", hawkes_docs, "Document table; every listed document gets an alpha");
    hawkes_fit->add_option("--years", hawkes_years, "Year range (default: span of the events)");
    hawkes_fit->add_option("--out", hawkes_out, "Raw influence CSV")->capture_default_str();

    // influence featurize
    auto* influence_cmd = app.add_subcommand("influence", "Influence features");
    influence_cmd->require_subcommand(1);
    auto* featurize_cmd = influence_cmd->add_subcommand("featurize", "Per-year z-scores and quantile bins");
    std::string raw_path, meta_path, features_out = "features.csv";
    std::optional<double> gamma_sem, gamma_lex;
    std::optional<int> min_year;
    featurize_cmd->add_option("--raw", raw_path, "Raw influence CSV")->required();
    featurize_cmd->add_option("--meta", meta_path, "Document table with publication years")->required();
    featurize_cmd->add_option("--gamma-semantic", gamma_sem, "Override the selected semantic bandwidth");
    featurize_cmd->add_option("--gamma-lexical", gamma_lex, "Override the selected lexical bandwidth");
    featurize_cmd->add_option("--min-year", min_year, "First publication year of the population");
    featurize_cmd->add_option("--out", features_out, "Features CSV")->capture_default_str();

    // eval regress / online
    auto* eval_cmd = app.add_subcommand("eval", "Citation validation");
    eval_cmd->require_subcommand(1);
    std::string features_path, citations_path, topics_path, models = "M1,M2,M3,M4", eval_out;
    std::string coefficients_out, online_years = "2001:2014";
    int analysis_min_year = 2000;
    std::optional<int> horizon;
    auto add_eval_inputs = [&](CLI::App* cmd) {
        cmd->add_option("--features", features_path, "Features CSV")->required();
        cmd->add_option("--citations", citations_path, "Citations CSV")->required();
        cmd->add_option("--topics", topics_path, "Topics CSV");
        cmd->add_option("--models", models, "Models to fit")->capture_default_str();
        cmd->add_option("--min-year", analysis_min_year, "First publication year analysed")->capture_default_str();
        cmd->add_option("--horizon", horizon, "Last year with complete citation data");
    };
    auto* regress_cmd = eval_cmd->add_subcommand("regress", "OLS regressions with likelihood ratio tests");
    add_eval_inputs(regress_cmd);
    regress_cmd->add_option("--out", eval_out, "Regression table TSV")->required();
    regress_cmd->add_option("--coefficients", coefficients_out, "Coefficient CSV");
    auto* online_cmd = eval_cmd->add_subcommand("online", "Online prediction by publication year");
    add_eval_inputs(online_cmd);
    online_cmd->add_option("--years", online_years, "Test years first:last")->capture_default_str();
    online_cmd->add_option("--out", eval_out, "Online MSE table TSV")->required();

    // pipeline
    auto* run_cmd = app.add_subcommand("run", "Run a pipeline stage from a config file");
    std::string stage_name, config_path;
    run_cmd->add_option("stage", stage_name, "build-corpus|moments|changes|cascades|fit|featurize|evaluate|report|all")
        ->required();
    run_cmd->add_option("--config", config_path, "Pipeline JSON config")->required();
    auto* report_cmd = app.add_subcommand("report", "Summarize evaluation artifacts");
    std::string report_config;
    report_cmd->add_option("--config", report_config, "Pipeline JSON config")->required();

    auto* fixture_cmd = app.add_subcommand("fixture", "Write the synthetic end-to-end fixture");
    std::string fixture_dir;
    FixtureSpec fixture_spec;
    fixture_cmd->add_option("--out", fixture_dir, "Output directory")->required();
    fixture_cmd->add_option("--seed", fixture_spec.seed, "Generator seed")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : static_cast<int>(ExitCode::Config);
    }

    try {
        if (*corpus_build) {
            const auto corpus = load_corpus(corpus_input, parse_year_range(corpus_years));
            const auto vocab = build_vocabulary(corpus, vocab_config);
            const fs::path out(vocab_out);
            write_vocabulary_tsv(vocab, out);
            write_yearly_counts_tsv(vocab, counts_out.empty() ? sibling(out, "counts.tsv") : fs::path(counts_out));
            write_document_table(document_table(corpus),
                                 docs_out.empty() ? sibling(out, "documents.tsv") : fs::path(docs_out));
            std::cerr << corpus.documents.size() << " documents, " << vocab.size() << " words\n";
        } else if (*moments_compute) {
            const auto vocab = read_vocabulary(vocab_path);
            const auto years = parse_year_range(moments_years);
            const auto moments = accumulate_moments(store_path, vocab.size(), years);
            write_moments(moments, moments_out);
            std::cerr << moments.words.size() << " words, " << moments.skipped_unknown_word
                      << " unknown-word usages, " << moments.skipped_out_of_range << " out-of-range usages\n";
        } else if (*changes_detect) {
            const fs::path vp(changes_vocab);
            const auto kind = parse_change_kind(change_kind);
            std::vector<ChangeCandidate> changes;
            Vocabulary vocab;
            if (kind == ChangeKind::Semantic) {
                vocab = read_vocabulary(vp);
                changes = rank_semantic_changes(read_moments(changes_moments), k);
            } else {
                vocab = read_vocabulary(vp, changes_counts.empty() ? sibling(vp, "counts.tsv") : fs::path(changes_counts));
                changes = rank_lexical_changes(vocab, k);
            }
            write_changes_tsv(changes, vocab, changes_out);
            std::cerr << changes.size() << " " << change_kind << " innovations\n";
        } else if (*cascades_build) {
            const auto corpus = load_corpus(cascades_corpus, parse_year_range(cascades_years));
            const auto vocab = read_vocabulary(cascades_vocab);
            const auto changes = read_changes_tsv(cascades_changes);
            const fs::path store(cascades_store);
            const auto built =
                build_cascades(changes, vocab, corpus, cascades_store.empty() ? nullptr : &store, classifier);
            write_cascades_jsonl(built.cascades, cascades_out);
            std::cerr << built.cascades.size() << " cascades\n";
        } else if (*hawkes_fit) {
            const auto cascades = read_cascades_jsonl(hawkes_cascades);
            std::optional<DocumentTable> docs;
            if (!hawkes_docs.empty()) docs = read_document_table(hawkes_docs);
            std::optional<YearRange> years;
            if (!hawkes_years.empty()) years = parse_year_range(hawkes_years);
            const auto est = estimate_influence(cascades, docs ? &*docs : nullptr, years, parse_grid(gamma_grid),
                                                heldout, seed);
            write_raw_influence_csv(est.raw, hawkes_out);
            write_bandwidth_report(est.bandwidth, bandwidth_report_path(hawkes_out));
            for (const auto& n : est.notes) std::cerr << n << '\n';
        } else if (*featurize_cmd) {
            const auto raw = read_raw_influence_csv(raw_path);
            std::vector<double> grid;
            for (const auto& r : raw) grid.push_back(r.gamma);
            if (grid.empty()) throw DataError("raw influence file has no rows");
            std::vector<BandwidthReportRow> bandwidth;
            if (fs::exists(bandwidth_report_path(raw_path))) bandwidth = read_bandwidth_report(bandwidth_report_path(raw_path));
            auto [gs, gl] = selected_gammas(bandwidth, grid);
            if (gamma_sem) gs = *gamma_sem;
            if (gamma_lex) gl = *gamma_lex;
            const auto table = featurize(raw, read_document_table(meta_path), {gs, gl, min_year});
            write_features_csv(table, features_out);
        } else if (*regress_cmd || *online_cmd) {
            const auto features = read_features_csv(features_path);
            const auto citations = read_citations_csv(citations_path);
            std::optional<std::map<std::string, std::vector<double>>> topics;
            if (!topics_path.empty()) topics = read_topics_csv(topics_path);
            const auto rows =
                assemble_rows(features, citations, topics ? &*topics : nullptr, {analysis_min_year, horizon});
            const auto model_list = parse_model_list(models);
            if (*regress_cmd) {
                const auto report = run_regressions(rows.rows, model_list);
                write_regression_table(report, eval_out);
                if (!coefficients_out.empty()) write_coefficients_csv(report, coefficients_out);
            } else {
                const auto range = parse_year_range(online_years);
                const auto report = online_predict(rows.rows, model_list, range.first, range.last, rows.gammas);
                write_online_table(report, eval_out);
                for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
            }
        } else if (*run_cmd) {
            const auto config = load_pipeline_config(config_path);
            if (stage_name == "all") {
                for (const auto& r : run_all(config)) print_stage(r);
            } else {
                print_stage(run_stage(config, parse_stage(stage_name)));
            }
        } else if (*report_cmd) {
            print_stage(run_stage(load_pipeline_config(report_config), Stage::Report));
        } else if (*fixture_cmd) {
            const auto files = write_fixture(fixture_dir, fixture_spec);
            std::cout << files.config.string() << '\n';
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(ExitCode::Failure);
    }
    return 0;
}
