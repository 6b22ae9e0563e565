#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace counterpools {

// ---------------------------------------------------------------------------
// Streams

struct ZipfSpec {
    double alpha = 1.0;
    uint64_t universe = uint64_t{1} << 24;
    uint64_t length = 5'000'000;
    uint64_t seed = 1;
};

/// Draws ranks in [1, universe] with P(rank) proportional to rank^-alpha by
/// inverse-CDF lookup. CDF tables are shared between generators with the same
/// (alpha, universe).
class ZipfGenerator {
public:
    static constexpr uint64_t kMaxUniverse = uint64_t{1} << 27;

    ZipfGenerator(double alpha, uint64_t universe, uint64_t seed);

    uint64_t next();

private:
    std::shared_ptr<const std::vector<double>> cdf_;
    std::mt19937_64 rng_;
    std::uniform_real_distribution<double> unit_{0.0, 1.0};
};

std::vector<uint64_t> generate_zipf(const ZipfSpec& spec);

// ---------------------------------------------------------------------------
// Trace files

class TraceFormatError : public std::runtime_error {
public:
    TraceFormatError(const std::string& what, uint64_t byte_offset);
    uint64_t byte_offset() const noexcept { return offset_; }

private:
    uint64_t offset_;
};

enum class TraceFormat { Auto, Binary, Csv };

/// Binary trace: "CPTR", version byte, u64 LE count, then count u64 LE keys.
void write_trace(const std::filesystem::path& path, std::span<const uint64_t> keys);
void write_trace_csv(const std::filesystem::path& path, std::span<const uint64_t> keys);

/// Streams keys from a binary or CSV trace in file order. Auto picks CSV for a
/// ".csv" extension and binary otherwise.
class TraceReader {
public:
    explicit TraceReader(const std::filesystem::path& path, TraceFormat format = TraceFormat::Auto);

    std::optional<uint64_t> next();
    /// Declared key count for binary traces.
    std::optional<uint64_t> declared_count() const noexcept { return declared_; }

private:
    std::ifstream in_;
    TraceFormat format_;
    std::optional<uint64_t> declared_;
    uint64_t produced_ = 0;
    uint64_t offset_ = 0;
    uint64_t line_ = 0;
};

std::vector<uint64_t> read_trace(const std::filesystem::path& path,
                                 TraceFormat format = TraceFormat::Auto);

// ---------------------------------------------------------------------------
// Metrics

using FrequencyMap = std::unordered_map<uint64_t, uint64_t>;

/// f_i for each position: the count of keys[i] in keys[0..i], inclusive.
std::vector<uint64_t> on_arrival_truth(std::span<const uint64_t> keys);
FrequencyMap final_counts(std::span<const uint64_t> keys);

/// On-arrival error: NRMSE = (1/n) * sqrt((1/n) * sum (f_i - est_i)^2).
class OnArrivalError {
public:
    void record(uint64_t truth, uint64_t estimate) noexcept;
    uint64_t count() const noexcept { return n_; }
    double mse() const;
    /// Throws std::logic_error when nothing has been recorded.
    double nrmse() const;

private:
    uint64_t n_ = 0;
    long double sum_sq_ = 0;
};

/// Average relative error over H = {x : final count >= threshold}. Returns
/// nullopt when H is empty ("no heavy hitters").
std::optional<double> heavy_hitter_are(const FrequencyMap& truth,
                                       const std::function<uint64_t(uint64_t)>& estimate,
                                       uint64_t threshold);

/// Count threshold for a fraction theta of a stream of length n: ceil(theta * n), at least 1.
uint64_t heavy_hitter_threshold(double theta, uint64_t n);

struct Throughput {
    double mean_mops = 0;
    double stddev_mops = 0;
    std::vector<double> samples_mops;
};

/// Runs `run` once as warmup, then `repetitions` timed times. `run` returns the
/// number of operations it performed.
Throughput measure_throughput(const std::function<uint64_t()>& run, int repetitions);

}  // namespace counterpools
