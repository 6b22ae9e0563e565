#include "counterpools/workload.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>
#include <utility>

#include "binary_io.hpp"

namespace counterpools {

namespace {

constexpr uint8_t kTraceVersion = 1;
constexpr uint64_t kTraceHeaderBytes = 4 + 1 + 8;

std::shared_ptr<const std::vector<double>> zipf_cdf(double alpha, uint64_t universe) {
    static std::mutex mu;
    static std::map<std::pair<double, uint64_t>, std::weak_ptr<const std::vector<double>>> cache;
    std::lock_guard lock(mu);
    auto& slot = cache[{alpha, universe}];
    if (auto hit = slot.lock()) return hit;

    auto cdf = std::make_shared<std::vector<double>>(universe);
    // Kahan summation keeps the tail of a 2^24-entry table accurate.
    double sum = 0, comp = 0;
    for (uint64_t r = 1; r <= universe; ++r) {
        const double y = std::pow(static_cast<double>(r), -alpha) - comp;
        const double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        (*cdf)[r - 1] = sum;
    }
    for (auto& c : *cdf) c /= sum;
    cdf->back() = 1.0;
    slot = cdf;
    return cdf;
}

}  // namespace

ZipfGenerator::ZipfGenerator(double alpha, uint64_t universe, uint64_t seed) : rng_(seed) {
    if (!(alpha > 0.0)) throw std::invalid_argument("zipf skew must be positive");
    if (universe < 1) throw std::invalid_argument("zipf universe must be non-empty");
    if (universe > kMaxUniverse) throw std::invalid_argument("zipf universe exceeds 2^27 ranks");
    cdf_ = zipf_cdf(alpha, universe);
}

uint64_t ZipfGenerator::next() {
    const double u = unit_(rng_);
    const auto it = std::upper_bound(cdf_->begin(), cdf_->end(), u);
    const auto idx = static_cast<uint64_t>(std::min<ptrdiff_t>(it - cdf_->begin(),
                                                                static_cast<ptrdiff_t>(cdf_->size()) - 1));
    return idx + 1;
}

std::vector<uint64_t> generate_zipf(const ZipfSpec& spec) {
    ZipfGenerator gen(spec.alpha, spec.universe, spec.seed);
    std::vector<uint64_t> keys(spec.length);
    for (auto& k : keys) k = gen.next();
    return keys;
}

// ---------------------------------------------------------------------------

TraceFormatError::TraceFormatError(const std::string& what, uint64_t byte_offset)
    : std::runtime_error(what + " at byte " + std::to_string(byte_offset)), offset_(byte_offset) {}

void write_trace(const std::filesystem::path& path, std::span<const uint64_t> keys) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write("CPTR", 4);
    detail::write_le<uint8_t>(out, kTraceVersion);
    detail::write_le<uint64_t>(out, keys.size());
    for (uint64_t k : keys) detail::write_le<uint64_t>(out, k);
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

void write_trace_csv(const std::filesystem::path& path, std::span<const uint64_t> keys) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    for (uint64_t k : keys) out << k << '\n';
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

TraceReader::TraceReader(const std::filesystem::path& path, TraceFormat format)
    : in_(path, std::ios::binary), format_(format) {
    if (!in_) throw std::runtime_error("cannot open " + path.string());
    if (format_ == TraceFormat::Auto) {
        format_ = path.extension() == ".csv" ? TraceFormat::Csv : TraceFormat::Binary;
    }
    if (format_ == TraceFormat::Csv) return;

    char magic[4] = {};
    in_.read(magic, 4);
    if (in_.gcount() != 4 || std::string(magic, 4) != "CPTR") {
        throw TraceFormatError("bad trace magic", 0);
    }
    char version = 0;
    if (!in_.get(version)) throw TraceFormatError("truncated trace header", 4);
    if (static_cast<uint8_t>(version) != kTraceVersion) {
        throw TraceFormatError("unsupported trace version", 4);
    }
    try {
        declared_ = detail::read_le<uint64_t>(in_, "trace header");
    } catch (const std::runtime_error&) {
        throw TraceFormatError("truncated trace header", 5);
    }
    offset_ = kTraceHeaderBytes;
}

std::optional<uint64_t> TraceReader::next() {
    if (format_ == TraceFormat::Binary) {
        if (produced_ == *declared_) return std::nullopt;
        unsigned char buf[8];
        in_.read(reinterpret_cast<char*>(buf), 8);
        if (in_.gcount() != 8) throw TraceFormatError("truncated trace record", offset_);
        uint64_t key = 0;
        for (int b = 0; b < 8; ++b) key |= static_cast<uint64_t>(buf[b]) << (8 * b);
        offset_ += 8;
        ++produced_;
        return key;
    }

    std::string line;
    while (std::getline(in_, line)) {
        const uint64_t line_start = offset_;
        offset_ += line.size() + 1;
        ++line_;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        uint64_t key = 0;
        auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), key);
        if (ec != std::errc{} || ptr != line.data() + line.size()) {
            throw TraceFormatError("invalid key on line " + std::to_string(line_), line_start);
        }
        ++produced_;
        return key;
    }
    return std::nullopt;
}

std::vector<uint64_t> read_trace(const std::filesystem::path& path, TraceFormat format) {
    TraceReader reader(path, format);
    std::vector<uint64_t> keys;
    if (auto n = reader.declared_count()) keys.reserve(*n);
    while (auto k = reader.next()) keys.push_back(*k);
    return keys;
}

// ---------------------------------------------------------------------------

std::vector<uint64_t> on_arrival_truth(std::span<const uint64_t> keys) {
    FrequencyMap seen;
    seen.reserve(keys.size() / 2 + 16);
    std::vector<uint64_t> truth(keys.size());
    for (size_t i = 0; i < keys.size(); ++i) truth[i] = ++seen[keys[i]];
    return truth;
}

FrequencyMap final_counts(std::span<const uint64_t> keys) {
    FrequencyMap counts;
    counts.reserve(keys.size() / 2 + 16);
    for (uint64_t k : keys) ++counts[k];
    return counts;
}

void OnArrivalError::record(uint64_t truth, uint64_t estimate) noexcept {
    const long double diff = static_cast<long double>(truth) - static_cast<long double>(estimate);
    sum_sq_ += diff * diff;
    ++n_;
}

double OnArrivalError::mse() const {
    if (n_ == 0) throw std::logic_error("no on-arrival samples recorded");
    return static_cast<double>(sum_sq_ / static_cast<long double>(n_));
}

double OnArrivalError::nrmse() const {
    return std::sqrt(mse()) / static_cast<double>(n_);
}

std::optional<double> heavy_hitter_are(const FrequencyMap& truth,
                                       const std::function<uint64_t(uint64_t)>& estimate,
                                       uint64_t threshold) {
    long double sum = 0;
    uint64_t members = 0;
    for (const auto& [key, f] : truth) {
        if (f < threshold) continue;
        const auto est = estimate(key);
        const long double diff = est > f ? est - f : f - est;
        sum += diff / static_cast<long double>(f);
        ++members;
    }
    if (members == 0) return std::nullopt;
    return static_cast<double>(sum / members);
}

uint64_t heavy_hitter_threshold(double theta, uint64_t n) {
    return std::max<uint64_t>(1, static_cast<uint64_t>(std::ceil(theta * static_cast<double>(n))));
}

Throughput measure_throughput(const std::function<uint64_t()>& run, int repetitions) {
    if (repetitions < 1) throw std::invalid_argument("need at least one repetition");
    using clock = std::chrono::steady_clock;
    run();
    Throughput t;
    for (int r = 0; r < repetitions; ++r) {
        const auto start = clock::now();
        const uint64_t ops = run();
        const double secs = std::chrono::duration<double>(clock::now() - start).count();
        t.samples_mops.push_back(secs > 0 ? static_cast<double>(ops) / secs / 1e6 : 0.0);
    }
    const double n = static_cast<double>(t.samples_mops.size());
    t.mean_mops = std::accumulate(t.samples_mops.begin(), t.samples_mops.end(), 0.0) / n;
    double var = 0;
    for (double s : t.samples_mops) var += (s - t.mean_mops) * (s - t.mean_mops);
    t.stddev_mops = t.samples_mops.size() > 1 ? std::sqrt(var / (n - 1)) : 0.0;
    return t;
}

}  // namespace counterpools
