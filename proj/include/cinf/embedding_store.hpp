#pragma once

#include "cinf/corpus.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <vector>

namespace cinf {

// One contextual embedding of one token occurrence.
struct EmbeddedUsage {
    std::uint32_t word_id = 0;
    std::uint32_t doc_id = 0;  // index into the corpus document table
    std::uint16_t year = 0;
    std::uint32_t position = 0;  // token offset within the document
    std::vector<float> vector;

    friend bool operator==(const EmbeddedUsage&, const EmbeddedUsage&) = default;
};

// CEMB store, little endian:
//   header  "CEMB" | u32 version | u32 dim | u64 count
//   record  u32 word_id | u32 doc_id | u16 year | u32 position | dim x f32
inline constexpr std::uint32_t kStoreVersion = 1;
inline constexpr std::size_t kStoreHeaderBytes = 4 + 4 + 4 + 8;

class StoreWriter {
public:
    StoreWriter(const std::filesystem::path& path, std::uint32_t dim);
    StoreWriter(const StoreWriter&) = delete;
    StoreWriter& operator=(const StoreWriter&) = delete;
    ~StoreWriter();

    void append(const EmbeddedUsage& usage);
    // Patches the record count and moves the file into place.
    void finish();

    std::uint32_t dim() const { return dim_; }
    std::uint64_t count() const { return count_; }

private:
    std::filesystem::path path_;
    std::filesystem::path tmp_path_;
    std::ofstream out_;
    std::uint32_t dim_;
    std::uint64_t count_ = 0;
    bool finished_ = false;
};

class StoreReader {
public:
    explicit StoreReader(const std::filesystem::path& path);

    std::uint32_t dim() const { return dim_; }
    std::uint64_t count() const { return count_; }
    // Returns false once all records are consumed.
    bool next(EmbeddedUsage& usage);

private:
    std::filesystem::path path_;
    std::ifstream in_;
    std::uint32_t dim_ = 0;
    std::uint64_t count_ = 0;
    std::uint64_t read_ = 0;
    std::vector<char> buffer_;
};

void write_store(std::span<const EmbeddedUsage> usages, std::uint32_t dim,
                 const std::filesystem::path& path);
std::vector<EmbeddedUsage> read_store(const std::filesystem::path& path);

struct SplitStats {
    std::vector<double> v_minus;  // mean of usages with year <= t
    std::vector<double> v_plus;   // mean of usages with year > t
    std::uint64_t m_minus = 0;
    std::uint64_t m_plus = 0;
    // v_minus - v_plus computed from reference-centered sums.
    std::vector<double> difference;
};

// Per-word sufficient statistics: per-year counts and sums plus a global
// sum and centered sum of squares, so every split year is available from a
// single pass over the store. Deviations are taken from the word's first
// usage, which makes the split statistics shift-invariant whenever the
// subtraction is exact.
class WordMoments {
public:
    WordMoments() = default;
    WordMoments(std::uint32_t word_id, YearRange years, std::size_t dim);

    void add(int year, std::span<const float> vector);
    void add(int year, std::span<const double> vector);
    // Chan et al. pairwise combination; both sides must share word, years and dim.
    void merge(const WordMoments& other);

    std::uint32_t word_id() const { return word_id_; }
    const YearRange& years() const { return years_; }
    std::size_t dim() const { return dim_; }
    std::uint64_t total() const { return total_; }
    std::uint64_t year_count(int year) const { return year_count_[years_.index(year)]; }
    std::span<const double> year_sum(int year) const;
    std::span<const double> year_deviation_sum(int year) const;
    std::span<const double> reference() const { return reference_; }
    std::span<const double> global_sum() const { return global_sum_; }
    std::span<const double> sum_sq_dev() const { return m2_; }

    std::vector<double> mean() const;
    // Population variance per component (divides by the total count).
    std::vector<double> variance() const;

    // Raw state access for (de)serialization.
    std::vector<std::uint64_t>& raw_year_count() { return year_count_; }
    std::vector<double>& raw_year_sum() { return year_sum_; }
    std::vector<double>& raw_year_deviation_sum() { return year_dev_sum_; }
    std::vector<double>& raw_global_sum() { return global_sum_; }
    std::vector<double>& raw_reference() { return reference_; }
    std::vector<double>& raw_sum_sq_dev() { return m2_; }
    std::vector<double>& raw_running_mean() { return running_mean_; }
    const std::vector<std::uint64_t>& raw_year_count() const { return year_count_; }
    const std::vector<double>& raw_year_sum() const { return year_sum_; }
    const std::vector<double>& raw_year_deviation_sum() const { return year_dev_sum_; }
    const std::vector<double>& raw_reference() const { return reference_; }
    const std::vector<double>& raw_running_mean() const { return running_mean_; }
    void set_total(std::uint64_t total) { total_ = total; }

private:
    template <typename T>
    void add_impl(int year, std::span<const T> vector);

    std::uint32_t word_id_ = 0;
    YearRange years_;
    std::size_t dim_ = 0;
    std::uint64_t total_ = 0;
    std::vector<std::uint64_t> year_count_;
    std::vector<double> year_sum_;      // n_years x dim
    std::vector<double> year_dev_sum_;  // n_years x dim, relative to reference_
    std::vector<double> global_sum_;
    std::vector<double> reference_;
    std::vector<double> running_mean_;  // Welford state, relative to reference_
    std::vector<double> m2_;
};

// Means before/after the split year; nullopt when either side is empty.
std::optional<SplitStats> split_means(const WordMoments& moments, int t);

struct MomentsResult {
    std::map<std::uint32_t, WordMoments> words;
    std::uint64_t skipped_unknown_word = 0;
    std::uint64_t skipped_out_of_range = 0;
    std::size_t dim = 0;
    YearRange years;
};

// Single pass over the store. Usages whose word id is outside the vocabulary
// or whose year is outside `years` are skipped and counted.
MomentsResult accumulate_moments(StoreReader& store, std::size_t vocab_size, YearRange years);
MomentsResult accumulate_moments(const std::filesystem::path& store, std::size_t vocab_size,
                                 YearRange years);

// CMOM file: "CMOM" | u32 version | u32 dim | i32 first_year | i32 last_year |
// u64 n_words, then per word: u32 word_id | u64 total | counts | sums |
// deviation sums | global sum | reference | running mean | centered sum of
// squares (all f64).
void write_moments(const MomentsResult& moments, const std::filesystem::path& path);
MomentsResult read_moments(const std::filesystem::path& path);

}  // namespace cinf
