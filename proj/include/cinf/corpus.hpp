#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace cinf {

inline constexpr std::size_t kChunkSize = 200;

// Inclusive range of publication years.
struct YearRange {
    int first = 1990;
    int last = 2019;

    bool contains(int year) const { return year >= first && year <= last; }
    std::size_t size() const { return static_cast<std::size_t>(last - first + 1); }
    std::size_t index(int year) const { return static_cast<std::size_t>(year - first); }
    int year_at(std::size_t index) const { return first + static_cast<int>(index); }
};

// Parses "1990:2019".
YearRange parse_year_range(std::string_view text);

struct Document {
    std::string doc_id;
    int year = 0;
    std::vector<std::string> tokens;  // filtered tokens, chunks are consecutive slices

    std::size_t token_count() const { return tokens.size(); }
    std::size_t chunk_count() const { return (tokens.size() + kChunkSize - 1) / kChunkSize; }
    std::span<const std::string> chunk(std::size_t i) const;
};

struct Corpus {
    std::vector<Document> documents;
    YearRange years;
    std::map<int, std::uint64_t> total_tokens_per_year;  // every year in range present

    std::optional<std::size_t> find(std::string_view doc_id) const;

private:
    friend Corpus make_corpus(std::vector<Document>, YearRange);
    std::unordered_map<std::string, std::size_t> index_;
};

// Builds a corpus from already tokenized documents, dropping those outside
// `years`. Throws DataError on duplicate ids or when nothing is left.
Corpus make_corpus(std::vector<Document> documents, YearRange years);

// Reads line-delimited JSON records {"doc_id", "year", "text"}.
Corpus load_corpus(const std::filesystem::path& path, YearRange years);

// Whitespace split, edge punctuation stripped, lowercased; keeps purely
// alphabetic tokens longer than two characters; 200-token chunks.
std::vector<std::vector<std::string>> tokenize(std::string_view text);
std::vector<std::string> tokenize_flat(std::string_view text);

struct VocabularyConfig {
    std::uint64_t min_count = 30;
    double max_df = 0.9;
    std::size_t min_length = 3;
};

struct Vocabulary {
    std::vector<std::string> words;  // id -> word, sorted
    std::vector<std::uint64_t> corpus_count;
    std::vector<std::uint64_t> doc_freq;
    YearRange years;
    std::vector<std::vector<std::uint64_t>> year_counts;  // id -> per-year counts
    std::vector<std::uint64_t> year_totals;               // all filtered tokens per year

    std::size_t size() const { return words.size(); }
    std::optional<std::uint32_t> id(std::string_view word) const;
    std::uint32_t at(std::string_view word) const;  // throws DataError

    void rebuild_index();

private:
    std::unordered_map<std::string, std::uint32_t> index_;
};

Vocabulary build_vocabulary(const Corpus& corpus, const VocabularyConfig& config = {});

// Every year of the range is present; missing years report 0.
std::map<int, std::uint64_t> yearly_counts(const Vocabulary& vocab, std::string_view word);

// Vocabulary TSV: word, id, corpus_count, doc_freq.
void write_vocabulary_tsv(const Vocabulary& vocab, const std::filesystem::path& path);
// Yearly counts TSV: word, year, count (nonzero only) plus "__total__" rows.
void write_yearly_counts_tsv(const Vocabulary& vocab, const std::filesystem::path& path);
// Reads the vocabulary TSV, and the yearly counts when a path is given.
Vocabulary read_vocabulary(const std::filesystem::path& vocab_tsv,
                           const std::optional<std::filesystem::path>& counts_tsv = std::nullopt);

// Document table: index, doc_id, year, n_tokens. The index is the document's
// position in the corpus and is the doc id used inside embedding stores.
struct DocumentTable {
    std::vector<std::string> doc_ids;
    std::vector<int> years;
    std::vector<std::uint64_t> token_counts;
};
DocumentTable document_table(const Corpus& corpus);
void write_document_table(const DocumentTable& table, const std::filesystem::path& path);
DocumentTable read_document_table(const std::filesystem::path& path);

}  // namespace cinf
