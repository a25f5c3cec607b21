#include "cinf/pipeline.hpp"

#include "cinf/cascade.hpp"
#include "cinf/embedding_store.hpp"
#include "cinf/error.hpp"
#include "cinf/hawkes.hpp"
#include "cinf/influence.hpp"
#include "cinf/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>

namespace cinf {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <typename T>
T get_or(const json& obj, const char* key, T fallback) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string("config key '") + key + "' has the wrong type");
    }
}

fs::path resolve(const fs::path& base, const std::string& value) {
    if (value.empty()) return {};
    fs::path p(value);
    return p.is_absolute() ? p : base / p;
}

// A required artifact and the stage that writes it (nullopt for user inputs).
struct Input {
    fs::path path;
    std::optional<Stage> producer;
};

void require(const Stage stage, const Input& input) {
    if (fs::exists(input.path)) return;
    if (input.producer) {
        throw UpstreamMissingError("stage '" + to_string(stage) + "' needs " + input.path.filename().string() +
                                   "; run stage '" + to_string(*input.producer) + "' first");
    }
    throw ConfigError("stage '" + to_string(stage) + "' input not found: " + input.path.string());
}

fs::path manifest_path(const PipelineConfig& config, Stage stage) {
    return config.work_dir / "manifests" / (to_string(stage) + ".json");
}

json hashes(const std::vector<fs::path>& files) {
    json out = json::object();
    for (const auto& f : files) out[f.filename().string()] = io::sha256_file(f);
    return out;
}

bool manifest_matches(const PipelineConfig& config, Stage stage, const json& inputs,
                      const std::vector<fs::path>& outputs) {
    const auto path = manifest_path(config, stage);
    if (!fs::exists(path)) return false;
    json manifest;
    try {
        manifest = json::parse(io::read_file(path));
    } catch (const json::exception&) {
        return false;
    }
    if (manifest.value("parameters", std::string()) != config.parameter_digest) return false;
    if (manifest.value("inputs", json::object()) != inputs) return false;
    for (const auto& out : outputs) {
        if (!fs::exists(out)) return false;
    }
    return manifest.value("outputs", json::object()) == hashes(outputs);
}

void write_manifest(const PipelineConfig& config, Stage stage, const json& inputs,
                    const std::vector<fs::path>& outputs) {
    json manifest = {{"schema", "manifest/1"},
                     {"stage", to_string(stage)},
                     {"parameters", config.parameter_digest},
                     {"inputs", inputs},
                     {"outputs", hashes(outputs)}};
    io::write_atomic(manifest_path(config, stage), manifest.dump(2) + "\n");
}

std::vector<Input> stage_inputs(const PipelineConfig& c, Stage stage) {
    const auto& w = c.work_dir;
    using S = Stage;
    switch (stage) {
    case S::BuildCorpus: return {{c.corpus, std::nullopt}};
    case S::Moments: return {{c.store, std::nullopt}, {w / artifacts::kVocab, S::BuildCorpus}};
    case S::Changes:
        return {{w / artifacts::kMoments, S::Moments},
                {w / artifacts::kVocab, S::BuildCorpus},
                {w / artifacts::kCounts, S::BuildCorpus}};
    case S::Cascades:
        return {{w / artifacts::kChanges, S::Changes},
                {c.corpus, std::nullopt},
                {c.store, std::nullopt},
                {w / artifacts::kVocab, S::BuildCorpus}};
    case S::Fit: return {{w / artifacts::kCascades, S::Cascades}, {w / artifacts::kDocuments, S::BuildCorpus}};
    case S::Featurize:
        return {{w / artifacts::kInfluenceRaw, S::Fit},
                {w / artifacts::kBandwidth, S::Fit},
                {w / artifacts::kDocuments, S::BuildCorpus}};
    case S::Evaluate: {
        std::vector<Input> in = {{w / artifacts::kFeatures, S::Featurize}, {c.citations, std::nullopt}};
        if (!c.topics.empty()) in.push_back({c.topics, std::nullopt});
        return in;
    }
    case S::Report:
        return {{w / artifacts::kRegression, S::Evaluate},
                {w / artifacts::kCoefficients, S::Evaluate},
                {w / artifacts::kOnline, S::Evaluate}};
    }
    return {};
}

std::vector<fs::path> stage_outputs(const PipelineConfig& c, Stage stage) {
    const auto& w = c.work_dir;
    switch (stage) {
    case Stage::BuildCorpus: return {w / artifacts::kVocab, w / artifacts::kCounts, w / artifacts::kDocuments};
    case Stage::Moments: return {w / artifacts::kMoments};
    case Stage::Changes: return {w / artifacts::kChanges};
    case Stage::Cascades: return {w / artifacts::kCascades};
    case Stage::Fit: return {w / artifacts::kInfluenceRaw, w / artifacts::kBandwidth};
    case Stage::Featurize: return {w / artifacts::kFeatures};
    case Stage::Evaluate: return {w / artifacts::kRegression, w / artifacts::kCoefficients, w / artifacts::kOnline};
    case Stage::Report: return {w / artifacts::kReport, w / artifacts::kQuantileEffects};
    }
    return {};
}

void execute(const PipelineConfig& c, Stage stage, StageResult& result) {
    const auto& w = c.work_dir;
    auto note = [&](std::string text) { result.notes.push_back(std::move(text)); };
    switch (stage) {
    case Stage::BuildCorpus: {
        const auto corpus = load_corpus(c.corpus, c.years);
        const auto vocab = build_vocabulary(corpus, c.vocabulary);
        write_vocabulary_tsv(vocab, w / artifacts::kVocab);
        write_yearly_counts_tsv(vocab, w / artifacts::kCounts);
        write_document_table(document_table(corpus), w / artifacts::kDocuments);
        note(std::to_string(corpus.documents.size()) + " documents, " + std::to_string(vocab.size()) + " words");
        break;
    }
    case Stage::Moments: {
        const auto vocab = read_vocabulary(w / artifacts::kVocab);
        const auto moments = accumulate_moments(c.store, vocab.size(), c.years);
        write_moments(moments, w / artifacts::kMoments);
        note(std::to_string(moments.words.size()) + " words with embeddings, " +
             std::to_string(moments.skipped_unknown_word + moments.skipped_out_of_range) + " usages skipped");
        break;
    }
    case Stage::Changes: {
        const auto vocab = read_vocabulary(w / artifacts::kVocab, w / artifacts::kCounts);
        std::vector<ChangeCandidate> changes;
        if (c.k_semantic > 0) {
            changes = rank_semantic_changes(read_moments(w / artifacts::kMoments), c.k_semantic, c.change);
        }
        if (c.k_lexical > 0) {
            auto lexical = rank_lexical_changes(vocab, c.k_lexical, c.change);
            changes.insert(changes.end(), lexical.begin(), lexical.end());
        }
        write_changes_tsv(changes, vocab, w / artifacts::kChanges);
        note(std::to_string(changes.size()) + " innovations");
        break;
    }
    case Stage::Cascades: {
        const auto corpus = load_corpus(c.corpus, c.years);
        auto vocab = read_vocabulary(w / artifacts::kVocab);
        const auto changes = read_changes_tsv(w / artifacts::kChanges);
        const auto built = build_cascades(changes, vocab, corpus, &c.store, c.classifier);
        write_cascades_jsonl(built.cascades, w / artifacts::kCascades);
        note(std::to_string(built.cascades.size()) + " cascades, " + std::to_string(built.empty_semantic) +
             " without new-sense usages, " + std::to_string(built.fallback_words) + " labeled provisionally");
        break;
    }
    case Stage::Fit: {
        const auto cascades = read_cascades_jsonl(w / artifacts::kCascades);
        const auto documents = read_document_table(w / artifacts::kDocuments);
        auto est = estimate_influence(cascades, &documents, c.years, c.gamma_grid, c.heldout, c.seed);
        write_raw_influence_csv(est.raw, w / artifacts::kInfluenceRaw);
        write_bandwidth_report(est.bandwidth, w / artifacts::kBandwidth);
        for (auto& n : est.notes) note(std::move(n));
        break;
    }
    case Stage::Featurize: {
        const auto raw = read_raw_influence_csv(w / artifacts::kInfluenceRaw);
        const auto bandwidth = read_bandwidth_report(w / artifacts::kBandwidth);
        const auto documents = read_document_table(w / artifacts::kDocuments);
        const auto [gs, gl] = selected_gammas(bandwidth, c.gamma_grid);
        FeaturizeOptions options{gs, gl, c.analysis_min_year};
        const auto table = featurize(raw, documents, options);
        write_features_csv(table, w / artifacts::kFeatures);
        note(std::to_string(table.rows.size()) + " documents featurized");
        break;
    }
    case Stage::Evaluate: {
        const auto features = read_features_csv(w / artifacts::kFeatures);
        const auto citations = read_citations_csv(c.citations);
        std::optional<std::map<std::string, std::vector<double>>> topics;
        if (!c.topics.empty()) topics = read_topics_csv(c.topics);
        AssemblyOptions options{c.analysis_min_year, c.citation_horizon};
        const auto rows = assemble_rows(features, citations, topics ? &*topics : nullptr, options);
        note(std::to_string(rows.rows.size()) + " regression rows, " + std::to_string(rows.immature) +
             " immature papers excluded");
        const auto regressions = run_regressions(rows.rows, c.models);
        write_regression_table(regressions, w / artifacts::kRegression);
        write_coefficients_csv(regressions, w / artifacts::kCoefficients);
        const auto online =
            online_predict(rows.rows, c.models, c.online_years.first, c.online_years.last, rows.gammas);
        write_online_table(online, w / artifacts::kOnline);
        for (const auto& warning : online.warnings) note(warning);
        break;
    }
    case Stage::Report:
        write_report(w, w / artifacts::kReport, w / artifacts::kQuantileEffects);
        break;
    }
}

}  // namespace

PipelineConfig load_pipeline_config(const fs::path& path) {
    json j;
    try {
        j = json::parse(io::read_file(path));
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    } catch (const DataError& e) {
        throw ConfigError(e.what());
    }
    if (!j.is_object()) throw ConfigError(path.string() + ": config must be a JSON object");
    const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");
    PipelineConfig c;
    const json paths = j.value("paths", json::object());
    if (!paths.contains("corpus")) throw ConfigError("config key 'paths.corpus' is required");
    c.corpus = resolve(base, get_or<std::string>(paths, "corpus", ""));
    c.store = resolve(base, get_or<std::string>(paths, "store", ""));
    c.citations = resolve(base, get_or<std::string>(paths, "citations", ""));
    c.topics = resolve(base, get_or<std::string>(paths, "topics", ""));
    c.work_dir = resolve(base, get_or<std::string>(paths, "work_dir", "work"));
    if (!j.contains("years")) throw ConfigError("config key 'years' is required");
    c.years = parse_year_range(get_or<std::string>(j, "years", ""));

    const json vocab = j.value("vocabulary", json::object());
    c.vocabulary.min_count = get_or<std::uint64_t>(vocab, "min_count", c.vocabulary.min_count);
    c.vocabulary.max_df = get_or<double>(vocab, "max_df", c.vocabulary.max_df);
    c.vocabulary.min_length = get_or<std::size_t>(vocab, "min_length", c.vocabulary.min_length);
    if (!(c.vocabulary.max_df > 0.0 && c.vocabulary.max_df <= 1.0)) {
        throw ConfigError("config key 'vocabulary.max_df' must lie in (0, 1]");
    }
    const json change = j.value("change", json::object());
    c.change.variance_floor = get_or<double>(change, "variance_floor", c.change.variance_floor);
    c.change.lexical_smoothing = get_or<double>(change, "lexical_smoothing", c.change.lexical_smoothing);

    c.k_semantic = get_or<long long>(j, "k_semantic", c.k_semantic);
    c.k_lexical = get_or<long long>(j, "k_lexical", c.k_lexical);
    if (c.k_semantic < 0 || c.k_lexical < 0) throw ConfigError("config keys 'k_semantic'/'k_lexical' must be >= 0");
    c.gamma_grid = get_or<std::vector<double>>(j, "gamma_grid", c.gamma_grid);
    if (c.gamma_grid.empty()) throw ConfigError("config key 'gamma_grid' must not be empty");
    for (double g : c.gamma_grid) {
        if (!(g > 0.0)) throw ConfigError("config key 'gamma_grid' needs positive values");
    }
    c.heldout = get_or<double>(j, "heldout", c.heldout);
    if (!(c.heldout >= 0.0 && c.heldout < 1.0)) throw ConfigError("config key 'heldout' must lie in [0, 1)");
    c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
    const json classifier = j.value("classifier", json::object());
    c.classifier.l2_strength = get_or<double>(classifier, "l2", c.classifier.l2_strength);
    c.classifier.folds = get_or<int>(classifier, "folds", c.classifier.folds);
    if (c.classifier.folds < 2) throw ConfigError("config key 'classifier.folds' must be >= 2");
    if (j.contains("models")) {
        c.models.clear();
        for (const auto& m : get_or<std::vector<std::string>>(j, "models", {})) c.models.push_back(parse_model_tag(m));
        if (c.models.empty()) throw ConfigError("config key 'models' must not be empty");
    }
    c.analysis_min_year = get_or<int>(j, "analysis_min_year", c.analysis_min_year);
    if (j.contains("citation_horizon") && !j.at("citation_horizon").is_null()) {
        c.citation_horizon = get_or<int>(j, "citation_horizon", 0);
    }
    if (j.contains("online_years")) c.online_years = parse_year_range(get_or<std::string>(j, "online_years", ""));

    json digest = j;
    digest.erase("paths");
    c.parameter_digest = io::sha256_hex(digest.dump());
    return c;
}

std::string to_string(Stage stage) {
    switch (stage) {
    case Stage::BuildCorpus: return "build-corpus";
    case Stage::Moments: return "moments";
    case Stage::Changes: return "changes";
    case Stage::Cascades: return "cascades";
    case Stage::Fit: return "fit";
    case Stage::Featurize: return "featurize";
    case Stage::Evaluate: return "evaluate";
    case Stage::Report: return "report";
    }
    return "?";
}

Stage parse_stage(std::string_view text) {
    for (auto s : all_stages()) {
        if (to_string(s) == text) return s;
    }
    throw ConfigError("unknown stage '" + std::string(text) + "'");
}

const std::vector<Stage>& all_stages() {
    static const std::vector<Stage> stages = {Stage::BuildCorpus, Stage::Moments,   Stage::Changes,
                                              Stage::Cascades,    Stage::Fit,       Stage::Featurize,
                                              Stage::Evaluate,    Stage::Report};
    return stages;
}

fs::path bandwidth_report_path(const fs::path& raw_influence) {
    auto p = raw_influence;
    p += ".bandwidth.tsv";
    return p;
}

StageResult run_stage(const PipelineConfig& config, Stage stage) {
    StageResult result;
    result.stage = stage;
    const auto inputs = stage_inputs(config, stage);
    for (const auto& in : inputs) {
        if (in.path.empty()) throw ConfigError("stage '" + to_string(stage) + "' needs a path that is not configured");
        require(stage, in);
    }
    std::vector<fs::path> input_paths;
    for (const auto& in : inputs) input_paths.push_back(in.path);
    const json input_hashes = hashes(input_paths);
    result.outputs = stage_outputs(config, stage);
    if (manifest_matches(config, stage, input_hashes, result.outputs)) {
        result.skipped = true;
        return result;
    }
    fs::create_directories(config.work_dir);
    execute(config, stage, result);
    write_manifest(config, stage, input_hashes, result.outputs);
    return result;
}

std::vector<StageResult> run_all(const PipelineConfig& config) {
    std::vector<StageResult> results;
    for (auto stage : all_stages()) results.push_back(run_stage(config, stage));
    return results;
}

InfluenceEstimates estimate_influence(std::span<const Cascade> cascades, const DocumentTable* documents,
                                      std::optional<YearRange> years, std::span<const double> grid,
                                      double heldout, std::uint64_t seed) {
    if (cascades.empty()) throw DataError("no cascades to fit");
    InfluenceEstimates est;
    const YearRange range = years ? *years : hawkes::event_span(cascades);
    std::span<const std::string> known;
    if (documents) known = documents->doc_ids;
    for (auto kind : {ChangeKind::Semantic, ChangeKind::Lexical}) {
        std::vector<Cascade> subset;
        for (const auto& c : cascades) {
            if (c.kind == kind && !c.events.empty()) subset.push_back(c);
        }
        if (subset.empty()) {
            est.notes.push_back("no " + to_string(kind) + " cascades; their influence is zero");
            continue;
        }
        const auto data = hawkes::index_cascades(subset, range, known);
        hawkes::FitOptions options;
        options.heldout_fraction = heldout;
        options.seed = seed;
        const auto selection = hawkes::select_bandwidth(data, grid, options);
        hawkes::FitOptions full = options;
        full.heldout_fraction = 0.0;
        for (std::size_t g = 0; g < grid.size(); ++g) {
            BandwidthReportRow row;
            row.kind = kind;
            row.gamma = grid[g];
            row.selected = g == selection.best_index;
            if (const auto& f = selection.fits[g]) {
                row.train_ll = f->train_ll;
                row.heldout_ll = f->heldout_ll;
                row.iterations = f->iterations;
                row.converged = f->converged;
            } else {
                row.train_ll = row.heldout_ll = std::numeric_limits<double>::quiet_NaN();
            }
            est.bandwidth.push_back(row);
            const auto refit = hawkes::fit(data, grid[g], full);
            for (std::size_t d = 0; d < data.doc_ids.size(); ++d) {
                est.raw.push_back({data.doc_ids[d], refit.model.alpha[d], kind, grid[g]});
            }
        }
        est.notes.push_back(to_string(kind) + ": " + std::to_string(subset.size()) + " cascades, gamma " +
                            io::format_double(selection.best_gamma) + " selected");
    }
    return est;
}

std::pair<double, double> selected_gammas(std::span<const BandwidthReportRow> rows,
                                          std::span<const double> fallback_grid) {
    if (fallback_grid.empty()) throw ConfigError("bandwidth grid is empty");
    double gs = fallback_grid.front();
    double gl = fallback_grid.front();
    for (const auto& r : rows) {
        if (!r.selected) continue;
        (r.kind == ChangeKind::Semantic ? gs : gl) = r.gamma;
    }
    return {gs, gl};
}

void write_report(const fs::path& work_dir, const fs::path& report, const fs::path& quantile_effects) {
    std::ostringstream out;
    out << io::schema_line("report", 1) << '\n';
    auto section = [&](const std::string& title, const fs::path& file) {
        out << "\n== " << title << " ==\n";
        if (!fs::exists(file)) {
            out << "(missing " << file.filename().string() << ")\n";
            return;
        }
        for (const auto& line : io::read_data_lines(file, "")) out << line << '\n';
    };
    const auto bandwidth = work_dir / artifacts::kBandwidth;
    if (fs::exists(bandwidth)) {
        out << "\n== Bandwidth selection ==\n";
        for (const auto& r : read_bandwidth_report(bandwidth)) {
            out << to_string(r.kind) << "\tgamma=" << io::format_double(r.gamma)
                << "\theldout_ll=" << io::format_double(r.heldout_ll) << (r.selected ? "\tselected" : "") << '\n';
        }
    }
    section("Regression (coefficient, standard error)", work_dir / artifacts::kRegression);
    section("Online prediction MSE", work_dir / artifacts::kOnline);
    io::write_atomic(report, out.str());

    // model, kind, quantile, coefficient, std_error with Q1 as reference.
    std::ostringstream q;
    q << io::schema_line("quantile_effects", 1) << "\nmodel,kind,quantile,coefficient,std_error\n";
    std::map<std::string, std::map<std::string, std::pair<std::string, std::string>>> by_model;
    std::vector<std::string> model_order;
    for (const auto& line : io::read_data_lines(work_dir / artifacts::kCoefficients, "coefficients")) {
        auto f = io::split(line, ',');
        if (f.size() != 4 || f[0] == "model") continue;
        if (!by_model.count(f[0])) model_order.push_back(f[0]);
        by_model[f[0]][f[1]] = {f[2], f[3]};
    }
    for (const auto& model : model_order) {
        const auto& coefs = by_model[model];
        for (const auto& [kind, prefix] : {std::pair{"lexical", "Lex. Inf."}, std::pair{"semantic", "Sem. Inf."}}) {
            if (!coefs.count(std::string(prefix) + " Q2")) continue;
            q << model << ',' << kind << ",Q1,0,0\n";
            for (int k = 2; k <= 4; ++k) {
                const auto& [c, se] = coefs.at(std::string(prefix) + " Q" + std::to_string(k));
                q << model << ',' << kind << ",Q" << k << ',' << c << ',' << se << '\n';
            }
        }
    }
    io::write_atomic(quantile_effects, q.str());
}

}  // namespace cinf
