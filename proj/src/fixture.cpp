#include "cinf/fixture.hpp"

#include "cinf/corpus.hpp"
#include "cinf/embedding_store.hpp"
#include "cinf/error.hpp"
#include "cinf/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace cinf {

namespace {

enum class TokenKind { Filler, OldSense, NewSense, Lexical };

struct PlantedToken {
    std::string word;
    TokenKind kind = TokenKind::Filler;
    std::size_t word_index = 0;
};

std::string pseudo_word(const std::string& prefix, std::size_t index) {
    std::string suffix;
    for (int i = 0; i < 3; ++i) {
        suffix.insert(suffix.begin(), static_cast<char>('a' + index % 26));
        index /= 26;
    }
    return prefix + suffix;
}

// Discrete Hawkes events from `start` to the last year; each event is a
// document index drawn from the documents of its year.
std::vector<std::pair<int, std::size_t>> hawkes_events(const FixtureSpec& spec, int start,
                                                       const std::vector<double>& alpha,
                                                       std::mt19937_64& rng) {
    std::vector<std::pair<int, std::size_t>> events;
    std::uniform_int_distribution<std::size_t> pick(0, spec.docs_per_year - 1);
    for (int t = start; t <= spec.last_year; ++t) {
        double lambda = spec.base_rate;
        for (const auto& [year, doc] : events) lambda += alpha[doc] * std::exp(-spec.hawkes_gamma * (t - year));
        const int n = std::poisson_distribution<int>(lambda)(rng);
        const std::size_t offset = static_cast<std::size_t>(t - spec.first_year) * spec.docs_per_year;
        for (int k = 0; k < n; ++k) events.emplace_back(t, offset + pick(rng));
    }
    return events;
}

std::vector<double> planted_alpha(const FixtureSpec& spec, std::size_t n_docs, std::mt19937_64& rng) {
    std::bernoulli_distribution influential(spec.influential_fraction);
    std::vector<double> alpha(n_docs);
    for (auto& a : alpha) a = influential(rng) ? spec.alpha_influential : spec.alpha_background;
    return alpha;
}

}  // namespace

FixtureFiles write_fixture(const std::filesystem::path& dir, const FixtureSpec& spec, FixtureTruth* truth) {
    if (spec.last_year - spec.first_year < 12) throw ConfigError("fixture needs at least 13 years");
    if (spec.docs_per_year == 0 || spec.dim == 0 || spec.topics < 2) throw ConfigError("bad fixture spec");
    std::filesystem::create_directories(dir);
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    const std::size_t n_years = static_cast<std::size_t>(spec.last_year - spec.first_year + 1);
    const std::size_t n_docs = n_years * spec.docs_per_year;
    FixtureTruth t;
    for (std::size_t i = 0; i < n_docs; ++i) {
        const int year = spec.first_year + static_cast<int>(i / spec.docs_per_year);
        char id[32];
        std::snprintf(id, sizeof id, "P%d_%02zu", year, i % spec.docs_per_year);
        t.doc_ids.emplace_back(id);
        t.years.push_back(year);
    }
    t.alpha_semantic = planted_alpha(spec, n_docs, rng);
    t.alpha_lexical = planted_alpha(spec, n_docs, rng);

    std::vector<std::vector<PlantedToken>> doc_tokens(n_docs);
    std::uniform_int_distribution<std::size_t> pick_doc(0, spec.docs_per_year - 1);
    auto doc_in_year = [&](int year) {
        return static_cast<std::size_t>(year - spec.first_year) * spec.docs_per_year + pick_doc(rng);
    };

    std::uniform_int_distribution<int> semantic_start(spec.first_year + 4, spec.last_year - 8);
    for (std::size_t w = 0; w < spec.semantic_words; ++w) {
        const auto word = pseudo_word("sem", w);
        const int start = semantic_start(rng);
        t.semantic_words.push_back(word);
        t.semantic_start.push_back(start);
        for (int year = spec.first_year; year <= spec.last_year; ++year) {
            const int n = std::poisson_distribution<int>(year < start ? 2.0 : 0.5)(rng);
            for (int k = 0; k < n; ++k) doc_tokens[doc_in_year(year)].push_back({word, TokenKind::OldSense, w});
        }
        for (const auto& [year, doc] : hawkes_events(spec, start, t.alpha_semantic, rng)) {
            doc_tokens[doc].push_back({word, TokenKind::NewSense, w});
        }
    }
    std::uniform_int_distribution<int> lexical_start(spec.first_year + 4, spec.last_year - 6);
    for (std::size_t w = 0; w < spec.lexical_words; ++w) {
        const auto word = pseudo_word("lex", w);
        t.lexical_words.push_back(word);
        for (const auto& [year, doc] : hawkes_events(spec, lexical_start(rng), t.alpha_lexical, rng)) {
            doc_tokens[doc].push_back({word, TokenKind::Lexical, w});
        }
    }
    std::uniform_int_distribution<std::size_t> pick_filler(0, spec.filler_words - 1);
    for (auto& tokens : doc_tokens) {
        for (std::size_t k = 0; k < spec.filler_tokens_per_doc; ++k) {
            const auto f = pick_filler(rng);
            tokens.push_back({pseudo_word("fil", f), TokenKind::Filler, f});
        }
        std::shuffle(tokens.begin(), tokens.end(), rng);
    }

    // Corpus text: planted tokens with a little noise that the tokenizer removes.
    FixtureFiles files{dir / "corpus.jsonl", dir / "embeddings.cemb", dir / "citations.csv",
                       dir / "topics.csv", dir / "pipeline.json"};
    std::ostringstream corpus_out;
    std::vector<Document> documents;
    std::uniform_int_distribution<int> noise(0, 9);
    for (std::size_t i = 0; i < n_docs; ++i) {
        std::string text;
        std::vector<std::string> tokens;
        for (std::size_t k = 0; k < doc_tokens[i].size(); ++k) {
            std::string word = doc_tokens[i][k].word;
            tokens.push_back(word);
            const int r = noise(rng);
            if (k == 0) word[0] = static_cast<char>(word[0] - 'a' + 'A');
            if (r == 0) word += ",";
            if (r == 1) word += " of";
            if (r == 2) word += " 42";
            if (!text.empty()) text += ' ';
            text += word;
        }
        text += ".";
        if (tokenize_flat(text) != tokens) throw Error("fixture text does not tokenize back to its tokens");
        corpus_out << nlohmann::json{{"doc_id", t.doc_ids[i]}, {"year", t.years[i]}, {"text", text}}.dump()
                   << '\n';
        documents.push_back(Document{t.doc_ids[i], t.years[i], std::move(tokens)});
    }
    io::write_atomic(files.corpus, corpus_out.str());

    const YearRange years{spec.first_year, spec.last_year};
    const VocabularyConfig vocab_config{5, 0.9, 3};
    const auto corpus = make_corpus(std::move(documents), years);
    const auto vocab = build_vocabulary(corpus, vocab_config);

    // Embeddings: one mean per word (two for semantic words) plus unit noise.
    auto random_vector = [&](double scale) {
        std::vector<double> v(spec.dim);
        for (auto& x : v) x = scale * normal(rng);
        return v;
    };
    std::vector<std::vector<double>> filler_mean, semantic_mean, semantic_shift, lexical_mean;
    for (std::size_t w = 0; w < spec.filler_words; ++w) filler_mean.push_back(random_vector(2.0));
    for (std::size_t w = 0; w < spec.semantic_words; ++w) {
        semantic_mean.push_back(random_vector(2.0));
        std::vector<double> shift(spec.dim);
        for (auto& s : shift) s = (normal(rng) < 0 ? -1.0 : 1.0) * spec.sense_separation;
        semantic_shift.push_back(std::move(shift));
    }
    for (std::size_t w = 0; w < spec.lexical_words; ++w) lexical_mean.push_back(random_vector(2.0));

    StoreWriter store(files.store, spec.dim);
    EmbeddedUsage usage;
    usage.vector.resize(spec.dim);
    for (std::size_t i = 0; i < n_docs; ++i) {
        for (std::size_t k = 0; k < doc_tokens[i].size(); ++k) {
            const auto& token = doc_tokens[i][k];
            const auto id = vocab.id(token.word);
            if (!id) continue;
            const std::vector<double>* mean = nullptr;
            const std::vector<double>* shift = nullptr;
            switch (token.kind) {
            case TokenKind::Filler: mean = &filler_mean[token.word_index]; break;
            case TokenKind::OldSense: mean = &semantic_mean[token.word_index]; break;
            case TokenKind::NewSense:
                mean = &semantic_mean[token.word_index];
                shift = &semantic_shift[token.word_index];
                break;
            case TokenKind::Lexical: mean = &lexical_mean[token.word_index]; break;
            }
            usage.word_id = *id;
            usage.doc_id = static_cast<std::uint32_t>(i);
            usage.year = static_cast<std::uint16_t>(t.years[i]);
            usage.position = static_cast<std::uint32_t>(k);
            for (std::size_t d = 0; d < spec.dim; ++d) {
                const double v = (*mean)[d] + (shift ? (*shift)[d] : 0.0) + normal(rng);
                usage.vector[d] = static_cast<float>(v);
            }
            store.append(usage);
        }
    }
    store.finish();

    // Citations: a per-paper quality drives both windows; the planted
    // semantic excitation raises only the future window.
    double mean_alpha = 0.0;
    for (double a : t.alpha_semantic) mean_alpha += a / static_cast<double>(n_docs);
    std::ostringstream cites;
    cites << "doc_id,year,count\n";
    for (std::size_t i = 0; i < n_docs; ++i) {
        const double quality = 0.5 * normal(rng);
        const double short_rate = std::exp(1.5 + quality);
        const double future_rate =
            std::exp(1.5 + quality + spec.citation_effect * (t.alpha_semantic[i] - mean_alpha) / 0.3);
        for (int k = 0; k <= 5; ++k) {
            const int n = std::poisson_distribution<int>(k <= 2 ? short_rate : future_rate)(rng);
            if (n > 0) cites << t.doc_ids[i] << ',' << t.years[i] + k << ',' << n << '\n';
        }
    }
    io::write_atomic(files.citations, cites.str());

    std::ostringstream topics;
    topics << "doc_id";
    for (std::size_t k = 1; k <= spec.topics; ++k) topics << ",p" << k;
    topics << '\n';
    std::gamma_distribution<double> dirichlet(1.0, 1.0);
    for (std::size_t i = 0; i < n_docs; ++i) {
        std::vector<double> p(spec.topics);
        double sum = 0.0;
        for (auto& x : p) sum += (x = dirichlet(rng));
        topics << t.doc_ids[i];
        for (double x : p) topics << ',' << io::format_double(x / sum);
        topics << '\n';
    }
    io::write_atomic(files.topics, topics.str());

    nlohmann::ordered_json config = {
        {"paths",
         {{"corpus", "corpus.jsonl"},
          {"store", "embeddings.cemb"},
          {"citations", "citations.csv"},
          {"topics", "topics.csv"},
          {"work_dir", "work"}}},
        {"years", std::to_string(spec.first_year) + ":" + std::to_string(spec.last_year)},
        {"vocabulary",
         {{"min_count", vocab_config.min_count}, {"max_df", vocab_config.max_df}, {"min_length", 3}}},
        {"k_semantic", spec.semantic_words},
        {"k_lexical", spec.lexical_words},
        {"gamma_grid", {1.0}},
        {"heldout", 0.1},
        {"seed", 13},
        {"classifier", {{"l2", 1.0}, {"folds", 4}}},
        {"models", {"M1", "M2", "M3", "M4"}},
        {"analysis_min_year", spec.first_year},
        {"citation_horizon", spec.last_year + 5},
        {"online_years", std::to_string(spec.first_year + 8) + ":" + std::to_string(spec.last_year)},
    };
    io::write_atomic(files.config, config.dump(2) + "\n");
    if (truth) *truth = std::move(t);
    return files;
}

}  // namespace cinf
