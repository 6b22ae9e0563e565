#include "cli.hpp"

#include <CLI11.hpp>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>

#include "counterpools/workload.hpp"

namespace counterpools::cli {

namespace {

using clock_type = std::chrono::steady_clock;

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return ec == std::errc{} ? std::string(buf, ptr) : std::to_string(v);
}

template <class T>
T parse_number(std::string_view text, const char* what) {
    T value{};
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw UsageError(std::string("invalid ") + what + ": '" + std::string(text) + "'");
    }
    return value;
}

std::vector<std::string_view> split(std::string_view text, char sep) {
    std::vector<std::string_view> parts;
    size_t start = 0;
    while (true) {
        const size_t at = text.find(sep, start);
        parts.push_back(text.substr(start, at - start));
        if (at == std::string_view::npos) break;
        start = at + 1;
    }
    return parts;
}

uint64_t elapsed_ns(clock_type::time_point start) {
    return static_cast<uint64_t>(
        std::chrono::duration_cast<std::chrono::nanoseconds>(clock_type::now() - start).count());
}

double mops(uint64_t ops, uint64_t ns) {
    return ns == 0 ? 0.0 : static_cast<double>(ops) * 1e3 / static_cast<double>(ns);
}

/// Either sketch variant behind one interface.
struct AnySketch {
    std::unique_ptr<PooledSketch> pooled;
    std::unique_ptr<FixedSketch> fixed;

    void update(Algorithm algo, uint64_t key) {
        if (pooled) {
            algo == Algorithm::CountMin ? pooled->update(key) : pooled->conservative_update(key);
        } else {
            algo == Algorithm::CountMin ? fixed->update(key) : fixed->conservative_update(key);
        }
    }
    uint64_t query(uint64_t key) const { return pooled ? pooled->query(key) : fixed->query(key); }
    uint64_t memory_bytes() const { return pooled ? pooled->memory_bytes() : fixed->memory_bytes(); }
};

AnySketch make_sketch(const SketchBenchOptions& o, Variant variant, uint64_t memory, uint64_t seed) {
    AnySketch s;
    if (variant == Variant::Pooled) {
        s.pooled = std::make_unique<PooledSketch>(SketchOptions{memory, o.rows, o.pool, o.failure, seed});
    } else {
        s.fixed = std::make_unique<FixedSketch>(memory, o.rows, seed);
    }
    return s;
}

std::string algorithm_name(Algorithm a, Variant v) {
    return std::string(a == Algorithm::CountMin ? "cm" : "cu") +
           (v == Variant::Pooled ? "-pooled" : "-baseline32");
}

struct SeedData {
    std::vector<uint64_t> keys;
    std::vector<uint64_t> truth;  // on-arrival, only when NRMSE is requested
    FrequencyMap finals;          // only when ARE is requested
};

/// Runs `body(point)` for every point, on OpenMP threads when `parallel`.
/// The first exception thrown by any point is rethrown afterwards.
void for_each_point(size_t points, bool parallel, const std::function<void(size_t)>& body) {
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic) if (parallel)
    for (size_t p = 0; p < points; ++p) {
        try {
            body(p);
        } catch (...) {
#pragma omp critical(counterpools_cli_failure)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
}

std::unique_ptr<std::ostream> open_output(const std::string& path, std::ostream& fallback,
                                          std::ostream*& target) {
    if (path.empty() || path == "-") {
        target = &fallback;
        return nullptr;
    }
    auto file = std::make_unique<std::ofstream>(path, std::ios::trunc);
    if (!*file) throw std::runtime_error("cannot write " + path);
    target = file.get();
    return file;
}

}  // namespace

// ---------------------------------------------------------------------------
// CSV

std::string csv_field(std::string_view text) {
    if (text.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(text);
    std::string quoted = "\"";
    for (char c : text) {
        if (c == '"') quoted += '"';
        quoted += c;
    }
    quoted += '"';
    return quoted;
}

std::string csv_line(const ExperimentRow& r) {
    std::string line;
    line += csv_field(r.algorithm) + ',';
    line += csv_field(r.dataset) + ',';
    line += std::to_string(r.memory_bytes) + ',';
    line += csv_field(r.pool_config) + ',';
    line += csv_field(r.failure_strategy) + ',';
    line += csv_field(r.metric_name) + ',';
    line += (r.metric_value ? format_double(*r.metric_value) : std::string()) + ',';
    line += std::to_string(r.seed) + ',';
    line += format_double(r.throughput_mops) + ',';
    line += std::to_string(r.runtime_ns);
    return line;
}

CsvSink::CsvSink(std::ostream& out) : out_(out) { out_ << kExperimentHeader << '\n'; }

void CsvSink::submit(size_t point, std::vector<ExperimentRow> rows) {
    std::lock_guard lock(mu_);
    held_[point] = std::move(rows);
    for (auto it = held_.begin(); it != held_.end() && it->first == next_point_;
         it = held_.erase(it), ++next_point_) {
        for (const auto& r : it->second) out_ << csv_line(r) << '\n';
        rows_written_ += it->second.size();
    }
    out_.flush();
}

size_t CsvSink::rows_written() const {
    std::lock_guard lock(mu_);
    return rows_written_;
}

// ---------------------------------------------------------------------------
// Flag values

DatasetSpec DatasetSpec::parse(std::string_view text) {
    DatasetSpec d;
    if (text.rfind("trace:", 0) == 0) {
        d.kind = Kind::Trace;
        d.path = std::string(text.substr(6));
        if (d.path.empty()) throw UsageError("trace dataset needs a path");
        return d;
    }
    const auto parts = split(text, ':');
    if (parts[0] != "zipf" || parts.size() < 3 || parts.size() > 4) {
        throw UsageError("dataset must be zipf:<alpha>:<N>[:<universe>] or trace:<path>");
    }
    d.kind = Kind::Zipf;
    d.alpha = parse_number<double>(parts[1], "zipf skew");
    d.length = parse_number<uint64_t>(parts[2], "stream length");
    if (parts.size() == 4) d.universe = parse_number<uint64_t>(parts[3], "zipf universe");
    if (!(d.alpha > 0)) throw UsageError("zipf skew must be positive");
    if (d.universe < 1 || d.universe > ZipfGenerator::kMaxUniverse) {
        throw UsageError("zipf universe must be in [1, 2^27]");
    }
    return d;
}

std::string DatasetSpec::name() const {
    if (kind == Kind::Trace) return "trace:" + path;
    std::string s = "zipf:" + format_double(alpha) + ":" + std::to_string(length);
    if (universe != (uint64_t{1} << 24)) s += ":" + std::to_string(universe);
    return s;
}

std::vector<uint64_t> DatasetSpec::load(uint64_t seed) const {
    if (kind == Kind::Trace) return read_trace(path);
    return generate_zipf({alpha, universe, length, seed});
}

MetricSpec MetricSpec::parse(std::string_view text) {
    if (text == "nrmse") return {Kind::Nrmse, 0};
    if (text == "throughput") return {Kind::Throughput, 0};
    if (text.rfind("are:", 0) == 0) {
        const auto value = text.substr(4);
        double theta = 0;
        if (value.rfind("2^", 0) == 0) {
            theta = std::ldexp(1.0, parse_number<int>(value.substr(2), "theta exponent"));
        } else {
            theta = parse_number<double>(value, "theta");
        }
        if (!(theta > 0 && theta <= 1)) throw UsageError("theta must be in (0, 1]");
        return {Kind::Are, theta};
    }
    throw UsageError("metric must be nrmse, are:<theta> or throughput, got '" + std::string(text) + "'");
}

std::string MetricSpec::name() const {
    switch (kind) {
        case Kind::Nrmse: return "nrmse";
        case Kind::Throughput: return "throughput";
        case Kind::Are: return "are:" + format_double(theta);
    }
    return {};
}

Algorithm parse_algorithm(std::string_view text) {
    if (text == "cm") return Algorithm::CountMin;
    if (text == "cu") return Algorithm::ConservativeUpdate;
    throw UsageError("algorithm must be cm or cu, got '" + std::string(text) + "'");
}

Variant parse_variant(std::string_view text) {
    if (text == "pooled") return Variant::Pooled;
    if (text == "baseline32") return Variant::Baseline32;
    throw UsageError("variant must be pooled or baseline32, got '" + std::string(text) + "'");
}

uint64_t parse_memory(std::string_view text) {
    uint64_t scale = 1;
    if (!text.empty() && (text.back() == 'K' || text.back() == 'k')) {
        scale = 1024;
        text.remove_suffix(1);
    } else if (!text.empty() && (text.back() == 'M' || text.back() == 'm')) {
        scale = 1024 * 1024;
        text.remove_suffix(1);
    }
    const auto v = parse_number<uint64_t>(text, "memory size");
    if (v == 0) throw UsageError("memory size must be positive");
    return v * scale;
}

// ---------------------------------------------------------------------------
// bench-sketch

size_t bench_sketch(const SketchBenchOptions& o, CsvSink& sink) {
    if (o.algorithms.empty() || o.variants.empty() || o.memory_bytes.empty() || o.metrics.empty() ||
        o.seeds.empty()) {
        throw UsageError("every sweep list needs at least one value");
    }
    if (o.rows < 1) throw UsageError("--rows must be at least 1");
    if (o.repetitions < 1) throw UsageError("--repetitions must be at least 1");
    for (uint64_t m : o.memory_bytes) {
        for (Variant v : o.variants) {
            try {
                make_sketch(o, v, m, 1);
            } catch (const ContractError& e) {
                throw UsageError("memory " + std::to_string(m) + " bytes: " + e.what());
            }
        }
    }

    bool want_truth = false, want_finals = false, want_throughput = false;
    for (const auto& m : o.metrics) {
        want_truth |= m.kind == MetricSpec::Kind::Nrmse;
        want_finals |= m.kind == MetricSpec::Kind::Are;
        want_throughput |= m.kind == MetricSpec::Kind::Throughput;
    }

    const size_t before = sink.rows_written();
    const size_t per_seed = o.memory_bytes.size() * o.algorithms.size() * o.variants.size();
    size_t point_base = 0;
    for (uint64_t seed : o.seeds) {
        SeedData data;
        data.keys = o.dataset.load(seed);
        if (data.keys.empty()) throw UsageError("dataset is empty");
        if (want_truth) data.truth = on_arrival_truth(data.keys);
        if (want_finals) data.finals = final_counts(data.keys);
        const auto& keys = data.keys;

        // Timing-sensitive points run one at a time.
        for_each_point(per_seed, o.parallel && !want_throughput, [&](size_t local) {
            const size_t vi = local % o.variants.size();
            const size_t ai = (local / o.variants.size()) % o.algorithms.size();
            const size_t mi = local / (o.variants.size() * o.algorithms.size());
            const Variant variant = o.variants[vi];
            const Algorithm algo = o.algorithms[ai];
            const uint64_t memory = o.memory_bytes[mi];

            const auto point_start = clock_type::now();
            AnySketch sketch = make_sketch(o, variant, memory, seed);
            ExperimentRow base;
            base.algorithm = algorithm_name(algo, variant);
            base.dataset = o.dataset.name();
            base.memory_bytes = sketch.memory_bytes();
            base.pool_config = variant == Variant::Pooled ? o.pool.name() : "fixed32";
            base.failure_strategy = variant == Variant::Pooled ? o.failure.name() : "saturate";
            base.seed = seed;

            // One accuracy pass serves every accuracy metric.
            OnArrivalError nrmse;
            double pass_mops = 0;
            if (want_truth || want_finals) {
                const auto start = clock_type::now();
                for (size_t i = 0; i < keys.size(); ++i) {
                    sketch.update(algo, keys[i]);
                    if (want_truth) nrmse.record(data.truth[i], sketch.query(keys[i]));
                }
                pass_mops = mops(keys.size(), elapsed_ns(start));
            }

            std::vector<ExperimentRow> rows;
            for (const auto& metric : o.metrics) {
                ExperimentRow row = base;
                row.metric_name = metric.name();
                row.throughput_mops = pass_mops;
                switch (metric.kind) {
                    case MetricSpec::Kind::Nrmse:
                        row.metric_value = nrmse.nrmse();
                        break;
                    case MetricSpec::Kind::Are:
                        row.metric_value = heavy_hitter_are(
                            data.finals, [&](uint64_t k) { return sketch.query(k); },
                            heavy_hitter_threshold(metric.theta, keys.size()));
                        break;
                    case MetricSpec::Kind::Throughput: {
                        const auto t = measure_throughput(
                            [&] {
                                AnySketch fresh = make_sketch(o, variant, memory, seed);
                                for (uint64_t k : keys) fresh.update(algo, k);
                                return static_cast<uint64_t>(keys.size());
                            },
                            o.repetitions);
                        row.metric_value = t.mean_mops;
                        row.throughput_mops = t.mean_mops;
                        break;
                    }
                }
                row.runtime_ns = elapsed_ns(point_start);
                rows.push_back(std::move(row));
            }
            sink.submit(point_base + local, std::move(rows));
        });
        point_base += per_seed;
    }
    return sink.rows_written() - before;
}

// ---------------------------------------------------------------------------
// bench-histogram

size_t bench_histogram(const HistogramBenchOptions& o, CsvSink& sink) {
    if (o.bucket_bits.empty() || o.seeds.empty()) throw UsageError("every sweep list needs at least one value");
    for (uint32_t b : o.bucket_bits) {
        if (b < 1 || b > 26) throw UsageError("bucket exponents must be in [1, 26]");
        if (o.key_bits < b || o.key_bits > 64 || o.key_bits - b + 1 > 32) {
            throw UsageError("key width minus bucket bits must leave a fingerprint of at most 31 bits");
        }
    }
    try {
        o.pool.validate();
        if (o.pool.k > 8) throw ContractError("at most 8 slots per bucket");
    } catch (const ContractError& e) {
        throw UsageError(e.what());
    }

    const size_t before = sink.rows_written();
    size_t point = 0;
    for (uint64_t seed : o.seeds) {
        const auto keys = o.dataset.load(seed);
        const uint64_t key_limit = o.key_bits >= 64 ? ~uint64_t{0} : (uint64_t{1} << o.key_bits) - 1;
        for (uint64_t k : keys) {
            if (k > key_limit) throw UsageError("dataset key " + std::to_string(k) + " exceeds --key-bits");
        }
        const bool check = keys.size() <= o.exactness_limit;
        FrequencyMap oracle;
        if (check) oracle = final_counts(keys);

        for (uint32_t b : o.bucket_bits) {
            const auto point_start = clock_type::now();
            PooledCuckooTable table(HistogramOptions{b, o.key_bits, o.pool, seed, o.max_kicks});
            uint64_t unplaced = 0;
            const auto start = clock_type::now();
            for (uint64_t k : keys) {
                auto r = table.increment(k);
                if (!r.ok) unplaced += r.unplaced.size();
            }
            const double rate = mops(keys.size(), elapsed_ns(start));

            std::optional<double> exact;
            if (check) {
                bool same = table.occupied() == oracle.size();
                for (const auto& [k, c] : oracle) same = same && table.query(k) == c;
                exact = same ? 1.0 : 0.0;
            }
            const size_t flows = check ? oracle.size() : table.occupied();

            ExperimentRow base;
            base.algorithm = "cuckoo-pooled";
            base.dataset = o.dataset.name();
            base.memory_bytes = table.memory_bytes();
            base.pool_config = o.pool.name();
            base.failure_strategy = "migrate";
            base.seed = seed;
            base.throughput_mops = rate;

            std::vector<ExperimentRow> rows;
            const auto add = [&](const char* name, std::optional<double> value) {
                ExperimentRow row = base;
                row.metric_name = name;
                row.metric_value = value;
                row.runtime_ns = elapsed_ns(point_start);
                rows.push_back(std::move(row));
            };
            add("bucket_bits", b);
            add("load_factor", table.load_factor());
            add("bytes_per_flow", flows == 0 ? std::nullopt
                                             : std::optional<double>(static_cast<double>(table.memory_bytes()) /
                                                                     static_cast<double>(flows)));
            add("table_full", static_cast<double>(unplaced));
            add("exact", exact);
            add("throughput", rate);
            sink.submit(point++, std::move(rows));
        }
    }
    return sink.rows_written() - before;
}

// ---------------------------------------------------------------------------
// tables

void tables(const TablesOptions& o, std::ostream& out) {
    out << kTablesHeader << '\n';
    for (const auto& config : o.pools) {
        config.validate();
        const SnbTable ranks(std::max<uint32_t>(config.budget(), 1), config.k);
        const OffsetTable offsets(config, ranks);
        std::string roundtrip;
        size_t snb_bytes = ranks.serialized_bytes();
        size_t offset_bytes = offsets.serialized_bytes();
        if (o.cache_dir) {
            const std::filesystem::path dir(*o.cache_dir);
            std::filesystem::create_directories(dir);
            const auto snb_path = dir / ("snb_" + std::to_string(ranks.max_budget()) + "_" +
                                         std::to_string(ranks.max_parts()) + ".bin");
            ranks.save(snb_path);
            bool same = SnbTable::load(snb_path) == ranks;
            snb_bytes = std::filesystem::file_size(snb_path);
            if ((config.k - 1) * offsets.packed_field_bits() <= 32) {
                const auto off_path =
                    dir / ("offsets_" + std::to_string(config.n) + "_" + std::to_string(config.k) + "_" +
                           std::to_string(config.s) + "_" + std::to_string(config.i) + ".bin");
                offsets.save(off_path);
                same = same && OffsetTable::load(off_path) == offsets;
                offset_bytes = std::filesystem::file_size(off_path);
                roundtrip = same ? "identical" : "mismatch";
            } else {
                roundtrip = same ? "snb-only" : "mismatch";
            }
        }
        out << csv_field(config.name()) << ',' << config.budget() << ',' << config.configuration_count()
            << ',' << config.config_storage_bits() << ',' << offsets.size() << ','
            << offsets.packed_field_bits() << ',' << offset_bytes << ',' << ranks.raw().size() << ','
            << snb_bytes << ',' << roundtrip << '\n';
    }
}

// ---------------------------------------------------------------------------
// Command line

namespace {

template <class T, class F>
std::vector<T> parse_list(const std::vector<std::string>& items, F&& parse_one) {
    std::vector<T> out;
    for (const auto& item : items) {
        for (auto part : split(item, ',')) out.push_back(parse_one(part));
    }
    return out;
}

struct Flags {
    // shared
    std::string dataset = "zipf:1:100000";
    std::vector<std::string> seeds{"1"};
    std::string out;
    std::string pool = "default";
    // gen-trace
    std::string format = "auto";
    // bench-sketch
    std::vector<std::string> algos{"cm"};
    std::vector<std::string> variants{"pooled,baseline32"};
    std::vector<std::string> memory{"64K"};
    uint32_t rows = 4;
    std::string failure = "merge";
    std::vector<std::string> metrics{"nrmse"};
    int repetitions = 5;
    bool serial = false;
    // bench-histogram
    std::vector<std::string> bucket_bits{"14,15,16"};
    uint32_t key_bits = 32;
    uint32_t max_kicks = 500;
    // tables
    std::vector<std::string> table_pools;
    std::string cache_dir;
};

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Counter pools benchmark harness", "counterpools"};
    app.require_subcommand(1);
    Flags f;

    auto* gen = app.add_subcommand("gen-trace", "Write a Zipf stream (or convert a trace) to a trace file");
    gen->add_option("--dataset", f.dataset, "zipf:<alpha>:<N>[:<universe>] or trace:<path>")
        ->capture_default_str();
    gen->add_option("--seed", f.seeds, "Zipf seed")->capture_default_str();
    gen->add_option("--out", f.out, "Output path")->required();
    gen->add_option("--format", f.format, "auto, binary or csv")
        ->check(CLI::IsMember({"auto", "binary", "csv"}))
        ->capture_default_str();

    auto* sk = app.add_subcommand("bench-sketch", "Accuracy / throughput sweep for CM and CU sketches");
    sk->add_option("--algo", f.algos, "cm,cu")->capture_default_str();
    sk->add_option("--variant", f.variants, "pooled,baseline32")->capture_default_str();
    sk->add_option("--memory-bytes", f.memory, "Total memory per sketch, list; K/M suffixes allowed")
        ->capture_default_str();
    sk->add_option("--rows", f.rows, "Sketch rows")->capture_default_str();
    auto* sk_pool = sk->add_option("--pool-config", f.pool, "n,k,s,i or default")->capture_default_str();
    auto* sk_failure =
        sk->add_option("--failure", f.failure, "ignore, merge or offload[:fraction]")->capture_default_str();
    sk->add_option("--dataset", f.dataset, "zipf:<alpha>:<N>[:<universe>] or trace:<path>")
        ->capture_default_str();
    sk->add_option("--metric", f.metrics, "nrmse, are:<theta> (theta may be 2^-e), throughput")
        ->capture_default_str();
    sk->add_option("--seeds", f.seeds, "Seed list")->capture_default_str();
    sk->add_option("--repetitions", f.repetitions, "Timed repetitions for throughput")
        ->capture_default_str();
    sk->add_flag("--serial", f.serial, "Run sweep points one at a time");
    sk->add_option("--out", f.out, "CSV path (default standard output)");

    auto* hist = app.add_subcommand("bench-histogram", "Exact pooled cuckoo histogram sweep");
    hist->add_option("--buckets-exp", f.bucket_bits, "Bucket-count exponents, list")->capture_default_str();
    hist->add_option("--key-bits", f.key_bits, "Key width u")->capture_default_str();
    hist->add_option("--pool-config", f.pool, "n,k,s,i or default")->capture_default_str();
    hist->add_option("--max-kicks", f.max_kicks, "Eviction chain limit")->capture_default_str();
    hist->add_option("--dataset", f.dataset, "zipf:<alpha>:<N>[:<universe>] or trace:<path>")
        ->capture_default_str();
    hist->add_option("--seeds", f.seeds, "Seed list")->capture_default_str();
    hist->add_option("--out", f.out, "CSV path (default standard output)");

    auto* tab = app.add_subcommand("tables", "Build configuration tables and report their sizes");
    tab->add_option("--pool-config", f.table_pools, "n,k,s,i (repeatable; default: all presets)");
    tab->add_option("--cache-dir", f.cache_dir, "Write caches here (default $COUNTERPOOLS_TABLE_DIR)");
    tab->add_option("--out", f.out, "CSV path (default standard output)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsageError;
    }

    // Turn flag text into typed options; anything rejected here is a usage error.
    std::function<void(std::ostream&)> command;
    try {
        const auto seeds = parse_list<uint64_t>(f.seeds, [](auto s) { return parse_number<uint64_t>(s, "seed"); });
        const auto dataset = DatasetSpec::parse(f.dataset);
        const PoolConfig pool = PoolConfig::parse(f.pool);

        if (*gen) {
            if (seeds.size() != 1) throw UsageError("gen-trace takes one seed");
            const bool csv = f.format == "csv" ||
                             (f.format == "auto" && std::filesystem::path(f.out).extension() == ".csv");
            command = [=, out_path = f.out](std::ostream&) {
                const auto keys = dataset.load(seeds[0]);
                csv ? write_trace_csv(out_path, keys) : write_trace(out_path, keys);
            };
        } else if (*sk) {
            SketchBenchOptions o;
            o.algorithms = parse_list<Algorithm>(f.algos, parse_algorithm);
            o.variants = parse_list<Variant>(f.variants, parse_variant);
            o.memory_bytes = parse_list<uint64_t>(f.memory, parse_memory);
            o.rows = f.rows;
            o.pool = pool;
            o.failure = FailureStrategy::parse(f.failure);
            o.dataset = dataset;
            o.metrics = parse_list<MetricSpec>(f.metrics, MetricSpec::parse);
            o.seeds = seeds;
            o.repetitions = f.repetitions;
            o.parallel = !f.serial;
            const bool pooled = std::find(o.variants.begin(), o.variants.end(), Variant::Pooled) != o.variants.end();
            if (!pooled && (sk_pool->count() > 0 || sk_failure->count() > 0)) {
                throw UsageError("--pool-config and --failure only apply to the pooled variant");
            }
            if (o.rows < 1 || o.rows > 64) throw UsageError("--rows must be in [1, 64]");
            if (o.repetitions < 1) throw UsageError("--repetitions must be at least 1");
            command = [o](std::ostream& dest) {
                CsvSink sink(dest);
                bench_sketch(o, sink);
            };
        } else if (*hist) {
            HistogramBenchOptions o;
            o.bucket_bits = parse_list<uint32_t>(
                f.bucket_bits, [](auto s) { return parse_number<uint32_t>(s, "bucket exponent"); });
            o.key_bits = f.key_bits;
            o.pool = pool;
            o.max_kicks = f.max_kicks;
            o.dataset = dataset;
            o.seeds = seeds;
            command = [o](std::ostream& dest) {
                CsvSink sink(dest);
                bench_histogram(o, sink);
            };
        } else {
            TablesOptions o;
            if (!f.table_pools.empty()) {
                o.pools.clear();
                for (const auto& p : f.table_pools) o.pools.push_back(PoolConfig::parse(p));
            }
            for (const auto& p : o.pools) p.validate();
            if (!f.cache_dir.empty()) {
                o.cache_dir = f.cache_dir;
            } else if (const char* env = std::getenv("COUNTERPOOLS_TABLE_DIR"); env && *env) {
                o.cache_dir = env;
            }
            command = [o](std::ostream& dest) { tables(o, dest); };
        }
    } catch (const std::invalid_argument& e) {
        // UsageError and ContractError both derive from invalid_argument.
        err << "usage error: " << e.what() << "\nRun with --help for usage.\n";
        return kUsageError;
    }

    try {
        std::ostream* dest = nullptr;
        auto file = open_output(*gen ? std::string() : f.out, out, dest);
        command(*dest);
        dest->flush();
        if (!*dest) throw std::runtime_error("write failed");
        return kOk;
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return kUsageError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kInternalError;
    }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    std::vector<const char*> argv{"counterpools"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace counterpools::cli
