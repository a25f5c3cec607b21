#include "cinf/corpus.hpp"

#include "cinf/error.hpp"
#include "cinf/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <unordered_set>

namespace cinf {

namespace {

bool is_alpha_ascii(unsigned char c) { return std::isalpha(c) != 0; }

std::string normalize_token(std::string_view raw) {
    std::size_t begin = 0;
    std::size_t end = raw.size();
    while (begin < end && std::ispunct(static_cast<unsigned char>(raw[begin]))) ++begin;
    while (end > begin && std::ispunct(static_cast<unsigned char>(raw[end - 1]))) --end;
    std::string token(raw.substr(begin, end - begin));
    for (char& c : token) {
        if (!is_alpha_ascii(static_cast<unsigned char>(c))) return {};
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return token.size() > 2 ? token : std::string{};
}

}  // namespace

YearRange parse_year_range(std::string_view text) {
    auto colon = text.find(':');
    if (colon == std::string_view::npos) {
        throw ConfigError("year range must look like FIRST:LAST, got '" + std::string(text) + "'");
    }
    YearRange range;
    try {
        range.first = static_cast<int>(io::parse_int(text.substr(0, colon), "year range"));
        range.last = static_cast<int>(io::parse_int(text.substr(colon + 1), "year range"));
    } catch (const DataError& e) {
        throw ConfigError(e.what());
    }
    if (range.last < range.first) throw ConfigError("year range is empty: " + std::string(text));
    return range;
}

std::span<const std::string> Document::chunk(std::size_t i) const {
    const std::size_t begin = i * kChunkSize;
    const std::size_t len = std::min(kChunkSize, tokens.size() - begin);
    return std::span<const std::string>(tokens).subspan(begin, len);
}

std::optional<std::size_t> Corpus::find(std::string_view doc_id) const {
    auto it = index_.find(std::string(doc_id));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

Corpus make_corpus(std::vector<Document> documents, YearRange years) {
    Corpus corpus;
    corpus.years = years;
    for (std::size_t i = 0; i < years.size(); ++i) corpus.total_tokens_per_year[years.year_at(i)] = 0;
    std::unordered_set<std::string> seen;
    for (auto& doc : documents) {
        if (!seen.insert(doc.doc_id).second) throw DataError("duplicate doc_id '" + doc.doc_id + "'");
        if (!years.contains(doc.year)) continue;
        corpus.total_tokens_per_year[doc.year] += doc.token_count();
        corpus.index_.emplace(doc.doc_id, corpus.documents.size());
        corpus.documents.push_back(std::move(doc));
    }
    if (corpus.documents.empty()) throw DataError("empty corpus after year filtering");
    return corpus;
}

Corpus load_corpus(const std::filesystem::path& path, YearRange years) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open corpus file " + path.string());
    std::vector<Document> documents;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = path.string() + ":" + std::to_string(line_no);
        nlohmann::json record;
        try {
            record = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DataError(where + ": malformed record: " + e.what());
        }
        if (!record.is_object() || !record.contains("doc_id") || !record.contains("year") ||
            !record.contains("text") || !record["text"].is_string() ||
            !record["year"].is_number_integer()) {
            throw DataError(where + ": record needs doc_id, integer year and text");
        }
        Document doc;
        doc.doc_id = record["doc_id"].is_string() ? record["doc_id"].get<std::string>()
                                                  : record["doc_id"].dump();
        doc.year = record["year"].get<int>();
        doc.tokens = tokenize_flat(record["text"].get_ref<const std::string&>());
        documents.push_back(std::move(doc));
    }
    return make_corpus(std::move(documents), years);
}

std::vector<std::string> tokenize_flat(std::string_view text) {
    std::vector<std::string> tokens;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t start = i;
        while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (i > start) {
            auto token = normalize_token(text.substr(start, i - start));
            if (!token.empty()) tokens.push_back(std::move(token));
        }
    }
    return tokens;
}

std::vector<std::vector<std::string>> tokenize(std::string_view text) {
    auto flat = tokenize_flat(text);
    std::vector<std::vector<std::string>> chunks;
    for (std::size_t begin = 0; begin < flat.size(); begin += kChunkSize) {
        const std::size_t end = std::min(flat.size(), begin + kChunkSize);
        chunks.emplace_back(std::make_move_iterator(flat.begin() + static_cast<std::ptrdiff_t>(begin)),
                            std::make_move_iterator(flat.begin() + static_cast<std::ptrdiff_t>(end)));
    }
    return chunks;
}

std::optional<std::uint32_t> Vocabulary::id(std::string_view word) const {
    auto it = index_.find(std::string(word));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::uint32_t Vocabulary::at(std::string_view word) const {
    auto found = id(word);
    if (!found) throw DataError("word not in vocabulary: '" + std::string(word) + "'");
    return *found;
}

void Vocabulary::rebuild_index() {
    index_.clear();
    for (std::size_t i = 0; i < words.size(); ++i) index_.emplace(words[i], static_cast<std::uint32_t>(i));
}

Vocabulary build_vocabulary(const Corpus& corpus, const VocabularyConfig& config) {
    struct Stats {
        std::uint64_t count = 0;
        std::uint64_t df = 0;
        std::size_t last_doc = static_cast<std::size_t>(-1);
        std::vector<std::uint64_t> per_year;
    };
    const std::size_t n_years = corpus.years.size();
    std::unordered_map<std::string, Stats> stats;
    for (std::size_t d = 0; d < corpus.documents.size(); ++d) {
        const auto& doc = corpus.documents[d];
        const std::size_t y = corpus.years.index(doc.year);
        for (const auto& token : doc.tokens) {
            auto& s = stats[token];
            if (s.per_year.empty()) s.per_year.assign(n_years, 0);
            ++s.count;
            ++s.per_year[y];
            if (s.last_doc != d) {
                ++s.df;
                s.last_doc = d;
            }
        }
    }

    const double max_docs = config.max_df * static_cast<double>(corpus.documents.size());
    std::vector<std::string> kept;
    for (const auto& [word, s] : stats) {
        const bool alphabetic = std::all_of(word.begin(), word.end(), [](char c) {
            return is_alpha_ascii(static_cast<unsigned char>(c));
        });
        if (alphabetic && word.size() >= config.min_length && s.count >= config.min_count &&
            static_cast<double>(s.df) <= max_docs) {
            kept.push_back(word);
        }
    }
    std::sort(kept.begin(), kept.end());

    Vocabulary vocab;
    vocab.years = corpus.years;
    vocab.year_totals.reserve(n_years);
    for (std::size_t y = 0; y < n_years; ++y) {
        vocab.year_totals.push_back(corpus.total_tokens_per_year.at(corpus.years.year_at(y)));
    }
    for (auto& word : kept) {
        auto& s = stats.at(word);
        vocab.corpus_count.push_back(s.count);
        vocab.doc_freq.push_back(s.df);
        vocab.year_counts.push_back(std::move(s.per_year));
        vocab.words.push_back(std::move(word));
    }
    vocab.rebuild_index();
    return vocab;
}

std::map<int, std::uint64_t> yearly_counts(const Vocabulary& vocab, std::string_view word) {
    const auto id = vocab.at(word);
    std::map<int, std::uint64_t> out;
    for (std::size_t y = 0; y < vocab.years.size(); ++y) {
        out[vocab.years.year_at(y)] = id < vocab.year_counts.size() ? vocab.year_counts[id][y] : 0;
    }
    return out;
}

void write_vocabulary_tsv(const Vocabulary& vocab, const std::filesystem::path& path) {
    std::ostringstream out;
    out << io::schema_line("vocab", 1) << "\n#word\tid\tcorpus_count\tdoc_freq\n";
    for (std::size_t i = 0; i < vocab.size(); ++i) {
        out << vocab.words[i] << '\t' << i << '\t' << vocab.corpus_count[i] << '\t'
            << vocab.doc_freq[i] << '\n';
    }
    io::write_atomic(path, out.str());
}

void write_yearly_counts_tsv(const Vocabulary& vocab, const std::filesystem::path& path) {
    std::ostringstream out;
    out << io::schema_line("yearly_counts", 1) << "\n#word\tyear\tcount\n";
    for (std::size_t y = 0; y < vocab.years.size(); ++y) {
        out << "__total__\t" << vocab.years.year_at(y) << '\t' << vocab.year_totals[y] << '\n';
    }
    for (std::size_t i = 0; i < vocab.size(); ++i) {
        for (std::size_t y = 0; y < vocab.years.size(); ++y) {
            if (vocab.year_counts[i][y] == 0) continue;
            out << vocab.words[i] << '\t' << vocab.years.year_at(y) << '\t' << vocab.year_counts[i][y]
                << '\n';
        }
    }
    io::write_atomic(path, out.str());
}

Vocabulary read_vocabulary(const std::filesystem::path& vocab_tsv,
                           const std::optional<std::filesystem::path>& counts_tsv) {
    Vocabulary vocab;
    const auto lines = io::read_data_lines(vocab_tsv, "vocab");
    vocab.words.resize(lines.size());
    vocab.corpus_count.resize(lines.size());
    vocab.doc_freq.resize(lines.size());
    std::vector<bool> filled(lines.size(), false);
    for (const auto& line : lines) {
        auto fields = io::split(line, '\t');
        if (fields.size() != 4) throw DataError(vocab_tsv.string() + ": bad vocabulary row '" + line + "'");
        const auto id = static_cast<std::size_t>(io::parse_int(fields[1], "vocabulary id"));
        if (id >= lines.size() || filled[id]) {
            throw DataError(vocab_tsv.string() + ": vocabulary ids must be dense and unique");
        }
        filled[id] = true;
        vocab.words[id] = fields[0];
        vocab.corpus_count[id] = static_cast<std::uint64_t>(io::parse_int(fields[2], "corpus_count"));
        vocab.doc_freq[id] = static_cast<std::uint64_t>(io::parse_int(fields[3], "doc_freq"));
    }
    vocab.rebuild_index();
    if (!counts_tsv) return vocab;

    struct Row {
        std::string word;
        int year;
        std::uint64_t count;
    };
    std::vector<Row> rows;
    int first = 0;
    int last = 0;
    bool any = false;
    for (const auto& line : io::read_data_lines(*counts_tsv, "yearly_counts")) {
        auto fields = io::split(line, '\t');
        if (fields.size() != 3) throw DataError(counts_tsv->string() + ": bad row '" + line + "'");
        Row row{fields[0], static_cast<int>(io::parse_int(fields[1], "year")),
                static_cast<std::uint64_t>(io::parse_int(fields[2], "count"))};
        if (row.word == "__total__") {
            first = any ? std::min(first, row.year) : row.year;
            last = any ? std::max(last, row.year) : row.year;
            any = true;
        }
        rows.push_back(std::move(row));
    }
    if (!any) throw DataError(counts_tsv->string() + ": no __total__ rows");
    vocab.years = YearRange{first, last};
    vocab.year_totals.assign(vocab.years.size(), 0);
    vocab.year_counts.assign(vocab.size(), std::vector<std::uint64_t>(vocab.years.size(), 0));
    for (const auto& row : rows) {
        if (!vocab.years.contains(row.year)) {
            throw DataError(counts_tsv->string() + ": year outside totals range");
        }
        if (row.word == "__total__") {
            vocab.year_totals[vocab.years.index(row.year)] = row.count;
        } else if (auto id = vocab.id(row.word)) {
            vocab.year_counts[*id][vocab.years.index(row.year)] = row.count;
        }
    }
    return vocab;
}

DocumentTable document_table(const Corpus& corpus) {
    DocumentTable table;
    for (const auto& doc : corpus.documents) {
        table.doc_ids.push_back(doc.doc_id);
        table.years.push_back(doc.year);
        table.token_counts.push_back(doc.token_count());
    }
    return table;
}

void write_document_table(const DocumentTable& table, const std::filesystem::path& path) {
    std::ostringstream out;
    out << io::schema_line("documents", 1) << "\n#index\tdoc_id\tyear\tn_tokens\n";
    for (std::size_t i = 0; i < table.doc_ids.size(); ++i) {
        out << i << '\t' << table.doc_ids[i] << '\t' << table.years[i] << '\t' << table.token_counts[i]
            << '\n';
    }
    io::write_atomic(path, out.str());
}

DocumentTable read_document_table(const std::filesystem::path& path) {
    DocumentTable table;
    for (const auto& line : io::read_data_lines(path, "documents")) {
        auto fields = io::split(line, '\t');
        if (fields.size() != 4) throw DataError(path.string() + ": bad document row '" + line + "'");
        if (static_cast<std::size_t>(io::parse_int(fields[0], "index")) != table.doc_ids.size()) {
            throw DataError(path.string() + ": document indices must be sequential");
        }
        table.doc_ids.push_back(fields[1]);
        table.years.push_back(static_cast<int>(io::parse_int(fields[2], "year")));
        table.token_counts.push_back(static_cast<std::uint64_t>(io::parse_int(fields[3], "n_tokens")));
    }
    return table;
}

}  // namespace cinf
