#include "cinf/embedding_store.hpp"

#include "cinf/error.hpp"
#include "cinf/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>

namespace cinf {

namespace {

constexpr char kStoreMagic[4] = {'C', 'E', 'M', 'B'};
constexpr char kMomentsMagic[4] = {'C', 'M', 'O', 'M'};
constexpr std::uint32_t kMomentsVersion = 1;

template <typename T>
void put_le(std::vector<char>& buf, T value) {
    using U = std::make_unsigned_t<T>;
    auto u = static_cast<U>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) buf.push_back(static_cast<char>((u >> (8 * i)) & 0xFF));
}

template <typename T>
T get_le(const char* p) {
    using U = std::make_unsigned_t<T>;
    U u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        u |= static_cast<U>(static_cast<unsigned char>(p[i])) << (8 * i);
    }
    return static_cast<T>(u);
}

void put_f32(std::vector<char>& buf, float v) { put_le(buf, std::bit_cast<std::uint32_t>(v)); }
void put_f64(std::vector<char>& buf, double v) { put_le(buf, std::bit_cast<std::uint64_t>(v)); }
float get_f32(const char* p) { return std::bit_cast<float>(get_le<std::uint32_t>(p)); }
double get_f64(const char* p) { return std::bit_cast<double>(get_le<std::uint64_t>(p)); }

std::size_t record_bytes(std::uint32_t dim) { return 4 + 4 + 2 + 4 + 4 * static_cast<std::size_t>(dim); }

}  // namespace

StoreWriter::StoreWriter(const std::filesystem::path& path, std::uint32_t dim)
    : path_(path), tmp_path_(path), dim_(dim) {
    tmp_path_ += ".tmp";
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    out_.open(tmp_path_, std::ios::binary | std::ios::trunc);
    if (!out_) throw Error("cannot write store " + tmp_path_.string());
    std::vector<char> header(kStoreMagic, kStoreMagic + 4);
    put_le(header, kStoreVersion);
    put_le(header, dim_);
    put_le(header, std::uint64_t{0});
    out_.write(header.data(), static_cast<std::streamsize>(header.size()));
}

StoreWriter::~StoreWriter() {
    if (!finished_) {
        out_.close();
        std::error_code ec;
        std::filesystem::remove(tmp_path_, ec);
    }
}

void StoreWriter::append(const EmbeddedUsage& usage) {
    if (usage.vector.size() != dim_) {
        throw DataError("store dimension mismatch: expected " + std::to_string(dim_) + ", got " +
                        std::to_string(usage.vector.size()));
    }
    std::vector<char> record;
    record.reserve(record_bytes(dim_));
    put_le(record, usage.word_id);
    put_le(record, usage.doc_id);
    put_le(record, usage.year);
    put_le(record, usage.position);
    for (float v : usage.vector) put_f32(record, v);
    out_.write(record.data(), static_cast<std::streamsize>(record.size()));
    ++count_;
}

void StoreWriter::finish() {
    if (finished_) return;
    std::vector<char> count;
    put_le(count, count_);
    out_.seekp(12);
    out_.write(count.data(), static_cast<std::streamsize>(count.size()));
    out_.close();
    if (!out_) throw Error("failed writing store " + tmp_path_.string());
    std::filesystem::rename(tmp_path_, path_);
    finished_ = true;
}

StoreReader::StoreReader(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw DataError("cannot open store " + path.string());
    char header[kStoreHeaderBytes];
    if (!in_.read(header, kStoreHeaderBytes)) throw DataError(path.string() + ": truncated store header");
    if (std::memcmp(header, kStoreMagic, 4) != 0) throw DataError(path.string() + ": not a CEMB store");
    const auto version = get_le<std::uint32_t>(header + 4);
    if (version != kStoreVersion) {
        throw DataError(path.string() + ": unsupported store version " + std::to_string(version));
    }
    dim_ = get_le<std::uint32_t>(header + 8);
    count_ = get_le<std::uint64_t>(header + 12);
    buffer_.resize(record_bytes(dim_));
}

bool StoreReader::next(EmbeddedUsage& usage) {
    if (read_ == count_) return false;
    if (!in_.read(buffer_.data(), static_cast<std::streamsize>(buffer_.size()))) {
        throw DataError(path_.string() + ": truncated at record " + std::to_string(read_));
    }
    const char* p = buffer_.data();
    usage.word_id = get_le<std::uint32_t>(p);
    usage.doc_id = get_le<std::uint32_t>(p + 4);
    usage.year = get_le<std::uint16_t>(p + 8);
    usage.position = get_le<std::uint32_t>(p + 10);
    usage.vector.resize(dim_);
    for (std::uint32_t d = 0; d < dim_; ++d) usage.vector[d] = get_f32(p + 14 + 4 * d);
    ++read_;
    return true;
}

void write_store(std::span<const EmbeddedUsage> usages, std::uint32_t dim,
                 const std::filesystem::path& path) {
    StoreWriter writer(path, dim);
    for (const auto& usage : usages) writer.append(usage);
    writer.finish();
}

std::vector<EmbeddedUsage> read_store(const std::filesystem::path& path) {
    StoreReader reader(path);
    std::vector<EmbeddedUsage> out;
    out.reserve(reader.count());
    EmbeddedUsage usage;
    while (reader.next(usage)) out.push_back(usage);
    return out;
}

WordMoments::WordMoments(std::uint32_t word_id, YearRange years, std::size_t dim)
    : word_id_(word_id),
      years_(years),
      dim_(dim),
      year_count_(years.size(), 0),
      year_sum_(years.size() * dim, 0.0),
      year_dev_sum_(years.size() * dim, 0.0),
      global_sum_(dim, 0.0),
      reference_(dim, 0.0),
      running_mean_(dim, 0.0),
      m2_(dim, 0.0) {}

template <typename T>
void WordMoments::add_impl(int year, std::span<const T> vector) {
    if (vector.size() != dim_) throw DataError("moment dimension mismatch");
    if (!years_.contains(year)) throw DataError("usage year outside moment range");
    const std::size_t y = years_.index(year);
    if (total_ == 0) {
        for (std::size_t d = 0; d < dim_; ++d) reference_[d] = static_cast<double>(vector[d]);
    }
    ++year_count_[y];
    ++total_;
    const double n = static_cast<double>(total_);
    double* sum = year_sum_.data() + y * dim_;
    double* dev_sum = year_dev_sum_.data() + y * dim_;
    for (std::size_t d = 0; d < dim_; ++d) {
        const double x = static_cast<double>(vector[d]);
        sum[d] += x;
        global_sum_[d] += x;
        // Welford on x - reference.
        const double z = x - reference_[d];
        dev_sum[d] += z;
        const double delta = z - running_mean_[d];
        running_mean_[d] += delta / n;
        m2_[d] += delta * (z - running_mean_[d]);
    }
}

void WordMoments::add(int year, std::span<const float> vector) { add_impl(year, vector); }
void WordMoments::add(int year, std::span<const double> vector) { add_impl(year, vector); }

void WordMoments::merge(const WordMoments& other) {
    if (other.word_id_ != word_id_ || other.dim_ != dim_ || other.years_.first != years_.first ||
        other.years_.last != years_.last) {
        throw DataError("cannot merge moments of different shape");
    }
    if (other.total_ == 0) return;
    if (total_ == 0) {
        *this = other;
        return;
    }
    const double na = static_cast<double>(total_);
    const double nb = static_cast<double>(other.total_);
    const double n = na + nb;
    for (std::size_t d = 0; d < dim_; ++d) {
        const double offset = other.reference_[d] - reference_[d];
        const double delta = other.running_mean_[d] + offset - running_mean_[d];
        running_mean_[d] += delta * nb / n;
        m2_[d] += other.m2_[d] + delta * delta * na * nb / n;
        global_sum_[d] += other.global_sum_[d];
    }
    for (std::size_t i = 0; i < year_sum_.size(); ++i) year_sum_[i] += other.year_sum_[i];
    for (std::size_t y = 0; y < other.year_count_.size(); ++y) {
        const double count = static_cast<double>(other.year_count_[y]);
        for (std::size_t d = 0; d < dim_; ++d) {
            year_dev_sum_[y * dim_ + d] +=
                other.year_dev_sum_[y * dim_ + d] + count * (other.reference_[d] - reference_[d]);
        }
    }
    for (std::size_t y = 0; y < year_count_.size(); ++y) year_count_[y] += other.year_count_[y];
    total_ += other.total_;
}

std::span<const double> WordMoments::year_sum(int year) const {
    return std::span<const double>(year_sum_).subspan(years_.index(year) * dim_, dim_);
}

std::span<const double> WordMoments::year_deviation_sum(int year) const {
    return std::span<const double>(year_dev_sum_).subspan(years_.index(year) * dim_, dim_);
}

std::vector<double> WordMoments::mean() const {
    std::vector<double> out(dim_, 0.0);
    if (total_ == 0) return out;
    for (std::size_t d = 0; d < dim_; ++d) out[d] = global_sum_[d] / static_cast<double>(total_);
    return out;
}

std::vector<double> WordMoments::variance() const {
    std::vector<double> out(dim_, 0.0);
    if (total_ == 0) return out;
    for (std::size_t d = 0; d < dim_; ++d) out[d] = m2_[d] / static_cast<double>(total_);
    return out;
}

std::optional<SplitStats> split_means(const WordMoments& moments, int t) {
    const auto& years = moments.years();
    const std::size_t dim = moments.dim();
    SplitStats stats;
    stats.v_minus.assign(dim, 0.0);
    stats.v_plus.assign(dim, 0.0);
    std::vector<double> dev_minus(dim, 0.0), dev_plus(dim, 0.0);
    for (int year = years.first; year <= years.last; ++year) {
        const auto count = moments.year_count(year);
        if (count == 0) continue;
        const auto sum = moments.year_sum(year);
        const auto dev = moments.year_deviation_sum(year);
        const bool pre = year <= t;
        auto& target = pre ? stats.v_minus : stats.v_plus;
        auto& dev_target = pre ? dev_minus : dev_plus;
        (pre ? stats.m_minus : stats.m_plus) += count;
        for (std::size_t d = 0; d < dim; ++d) {
            target[d] += sum[d];
            dev_target[d] += dev[d];
        }
    }
    if (stats.m_minus == 0 || stats.m_plus == 0) return std::nullopt;
    const double m_minus = static_cast<double>(stats.m_minus);
    const double m_plus = static_cast<double>(stats.m_plus);
    stats.difference.resize(dim);
    for (std::size_t d = 0; d < dim; ++d) {
        stats.v_minus[d] /= m_minus;
        stats.v_plus[d] /= m_plus;
        stats.difference[d] = dev_minus[d] / m_minus - dev_plus[d] / m_plus;
    }
    return stats;
}

MomentsResult accumulate_moments(StoreReader& store, std::size_t vocab_size, YearRange years) {
    MomentsResult result;
    result.dim = store.dim();
    result.years = years;
    EmbeddedUsage usage;
    while (store.next(usage)) {
        if (usage.word_id >= vocab_size) {
            ++result.skipped_unknown_word;
            continue;
        }
        if (!years.contains(usage.year)) {
            ++result.skipped_out_of_range;
            continue;
        }
        auto it = result.words.find(usage.word_id);
        if (it == result.words.end()) {
            it = result.words.emplace(usage.word_id, WordMoments(usage.word_id, years, result.dim)).first;
        }
        it->second.add(usage.year, std::span<const float>(usage.vector));
    }
    return result;
}

MomentsResult accumulate_moments(const std::filesystem::path& store, std::size_t vocab_size,
                                 YearRange years) {
    StoreReader reader(store);
    return accumulate_moments(reader, vocab_size, years);
}

void write_moments(const MomentsResult& moments, const std::filesystem::path& path) {
    std::vector<char> buf(kMomentsMagic, kMomentsMagic + 4);
    put_le(buf, kMomentsVersion);
    put_le(buf, static_cast<std::uint32_t>(moments.dim));
    put_le(buf, static_cast<std::int32_t>(moments.years.first));
    put_le(buf, static_cast<std::int32_t>(moments.years.last));
    put_le(buf, static_cast<std::uint64_t>(moments.words.size()));
    for (const auto& [id, m] : moments.words) {
        put_le(buf, id);
        put_le(buf, m.total());
        for (auto c : m.raw_year_count()) put_le(buf, c);
        for (auto v : m.raw_year_sum()) put_f64(buf, v);
        for (auto v : m.raw_year_deviation_sum()) put_f64(buf, v);
        for (auto v : m.global_sum()) put_f64(buf, v);
        for (auto v : m.raw_reference()) put_f64(buf, v);
        for (auto v : m.raw_running_mean()) put_f64(buf, v);
        for (auto v : m.sum_sq_dev()) put_f64(buf, v);
    }
    io::write_atomic(path, std::string_view(buf.data(), buf.size()));
}

MomentsResult read_moments(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open moments file " + path.string());
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::size_t pos = 0;
    auto need = [&](std::size_t n) {
        if (pos + n > bytes.size()) throw DataError(path.string() + ": truncated moments file");
        const char* p = bytes.data() + pos;
        pos += n;
        return p;
    };
    if (std::memcmp(need(4), kMomentsMagic, 4) != 0) throw DataError(path.string() + ": not a CMOM file");
    if (get_le<std::uint32_t>(need(4)) != kMomentsVersion) {
        throw DataError(path.string() + ": unsupported moments version");
    }
    MomentsResult result;
    result.dim = get_le<std::uint32_t>(need(4));
    result.years.first = get_le<std::int32_t>(need(4));
    result.years.last = get_le<std::int32_t>(need(4));
    const auto n_words = get_le<std::uint64_t>(need(8));
    const std::size_t n_years = result.years.size();
    for (std::uint64_t w = 0; w < n_words; ++w) {
        const auto id = get_le<std::uint32_t>(need(4));
        WordMoments m(id, result.years, result.dim);
        m.set_total(get_le<std::uint64_t>(need(8)));
        for (std::size_t y = 0; y < n_years; ++y) m.raw_year_count()[y] = get_le<std::uint64_t>(need(8));
        for (auto& v : m.raw_year_sum()) v = get_f64(need(8));
        for (auto& v : m.raw_year_deviation_sum()) v = get_f64(need(8));
        for (auto& v : m.raw_global_sum()) v = get_f64(need(8));
        for (auto& v : m.raw_reference()) v = get_f64(need(8));
        for (auto& v : m.raw_running_mean()) v = get_f64(need(8));
        for (auto& v : m.raw_sum_sq_dev()) v = get_f64(need(8));
        result.words.emplace(id, std::move(m));
    }
    return result;
}

}  // namespace cinf
