#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "counterpools/histogram.hpp"
#include "counterpools/pool.hpp"
#include "counterpools/sketch.hpp"

namespace counterpools::cli {

enum ExitCode : int { kOk = 0, kInternalError = 1, kUsageError = 2 };

/// Bad flags or flag combinations; maps to exit code 2.
class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct ExperimentRow {
    std::string algorithm;
    std::string dataset;
    uint64_t memory_bytes = 0;
    std::string pool_config;
    std::string failure_strategy;
    std::string metric_name;
    std::optional<double> metric_value;
    uint64_t seed = 0;
    double throughput_mops = 0;
    uint64_t runtime_ns = 0;
};

inline constexpr const char* kExperimentHeader =
    "algorithm,dataset,memory_bytes,pool_config,failure_strategy,metric_name,metric_value,"
    "seed,throughput_mops,runtime_ns";

/// RFC-4180 field quoting: quoted only when it holds a comma, quote, CR or LF.
std::string csv_field(std::string_view text);
std::string csv_line(const ExperimentRow& row);

/// Thread-safe CSV writer. Rows submitted for sweep point i are held back until
/// points 0..i-1 have been written, so output order does not depend on which
/// worker finishes first.
class CsvSink {
public:
    explicit CsvSink(std::ostream& out);

    void submit(size_t point, std::vector<ExperimentRow> rows);
    size_t rows_written() const;

private:
    std::ostream& out_;
    mutable std::mutex mu_;
    size_t next_point_ = 0;
    size_t rows_written_ = 0;
    std::map<size_t, std::vector<ExperimentRow>> held_;
};

// ---------------------------------------------------------------------------
// Flag values

struct DatasetSpec {
    enum class Kind { Zipf, Trace } kind = Kind::Zipf;
    double alpha = 1.0;
    uint64_t length = 100'000;
    uint64_t universe = uint64_t{1} << 24;
    std::string path;

    /// "zipf:<alpha>:<N>[:<universe>]" or "trace:<path>".
    static DatasetSpec parse(std::string_view text);
    std::string name() const;
    /// Zipf streams are drawn with `seed`; traces ignore it.
    std::vector<uint64_t> load(uint64_t seed) const;
};

struct MetricSpec {
    enum class Kind { Nrmse, Are, Throughput } kind = Kind::Nrmse;
    /// Heavy-hitter fraction for Are.
    double theta = 0;

    /// "nrmse", "throughput" or "are:<theta>", where theta is a decimal or 2^-<e>.
    static MetricSpec parse(std::string_view text);
    std::string name() const;
};

enum class Algorithm { CountMin, ConservativeUpdate };
enum class Variant { Pooled, Baseline32 };

Algorithm parse_algorithm(std::string_view text);
Variant parse_variant(std::string_view text);
/// Accepts plain bytes or a K/M suffix (1024-based).
uint64_t parse_memory(std::string_view text);

// ---------------------------------------------------------------------------
// Commands

struct SketchBenchOptions {
    std::vector<Algorithm> algorithms{Algorithm::CountMin};
    std::vector<Variant> variants{Variant::Pooled, Variant::Baseline32};
    std::vector<uint64_t> memory_bytes{64 * 1024};
    uint32_t rows = 4;
    PoolConfig pool = presets::k64_4_0_1;
    FailureStrategy failure = FailureStrategy::merge();
    DatasetSpec dataset;
    std::vector<MetricSpec> metrics{MetricSpec{}};
    std::vector<uint64_t> seeds{1};
    /// Timed repetitions for the throughput metric.
    int repetitions = 5;
    /// Run accuracy sweep points on OpenMP threads.
    bool parallel = true;
};

/// Runs every (seed, memory, algorithm, variant) point and writes one row per
/// metric through the sink. Returns the number of rows written.
size_t bench_sketch(const SketchBenchOptions& options, CsvSink& sink);

struct HistogramBenchOptions {
    std::vector<uint32_t> bucket_bits{14, 15, 16};
    uint32_t key_bits = 32;
    PoolConfig pool = presets::k64_4_0_1;
    uint32_t max_kicks = 500;
    DatasetSpec dataset;
    std::vector<uint64_t> seeds{1};
    /// Oracle comparison is skipped above this many increments.
    uint64_t exactness_limit = 10'000'000;
};

/// Rows per (bucket_bits, seed): load_factor, bytes_per_flow, table_full
/// (unplaced entries), exact (1/0, empty when skipped) and throughput.
size_t bench_histogram(const HistogramBenchOptions& options, CsvSink& sink);

struct TablesOptions {
    std::vector<PoolConfig> pools{presets::all.begin(), presets::all.end()};
    /// When set, caches are written here and read back for a bit-identity check.
    std::optional<std::string> cache_dir;
};

inline constexpr const char* kTablesHeader =
    "pool_config,budget,configurations,config_bits,offset_entries,offset_field_bits,"
    "offset_bytes,snb_entries,snb_bytes,cache_roundtrip";

void tables(const TablesOptions& options, std::ostream& out);

/// Full command line entry point; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace counterpools::cli
