// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "cli.hpp"
#include "counterpools/histogram.hpp"
#include "counterpools/pool.hpp"
#include "counterpools/sketch.hpp"
#include "counterpools/snb.hpp"
#include "counterpools/workload.hpp"
#include "csv_reader.hpp"
#include "oracles.hpp"

using namespace counterpools;

namespace {

using clock_type = std::chrono::steady_clock;

struct Verdict {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (ok) return;
        if (pass) detail = what;
        pass = false;
    }
};

double seconds_since(clock_type::time_point start) {
    return std::chrono::duration<double>(clock_type::now() - start).count();
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

int failures = 0;

/// Runs `body`, which may time its own critical section by setting `timed`.
void criterion(int id, const char* title, double budget_s,
               const std::function<Verdict(double& timed)>& body) {
    double timed = -1;
    const auto start = clock_type::now();
    Verdict v;
    try {
        v = body(timed);
    } catch (const std::exception& e) {
        v.require(false, std::string("exception: ") + e.what());
    }
    const double elapsed = timed >= 0 ? timed : seconds_since(start);
    v.require(elapsed <= budget_s, "took " + fmt("%.3f", elapsed) + " s, budget " + fmt("%g", budget_s) + " s");
    if (!v.pass) ++failures;
    std::printf("criterion %2d: %s  %s [%.3f s]%s%s\n", id, v.pass ? "PASS" : "FAIL", title, elapsed,
                v.detail.empty() ? "" : "  ", v.detail.c_str());
    std::fflush(stdout);
}

Pool worked_example_pool(const PoolCodec& codec) {
    const std::vector<uint32_t> widths{10, 0, 8, 46};
    return Pool{(uint64_t{616804} << 18) | (uint64_t{255} << 10) | 713, codec.config_for_widths(widths)};
}

}  // namespace

int main() {
    criterion(1, "exact stars-and-bars constants and the five-counter worked encoding", 1e-3, [](double&) {
        Verdict v;
        v.require(snb(64, 5) == 814385, "snb(64,5)");
        v.require(snb(64, 4) == 47905, "snb(64,4)");
        v.require(snb(8, 4) == 165, "snb(8,4)");
        const SnbTable table(64, 5);
        const std::vector<uint32_t> parts{26, 20, 8, 0, 10};
        const auto c = table.encode(parts, 64);
        v.require(c == 711909, "encode gave " + std::to_string(c));
        v.require(table.decode(711909, 64, 5).parts == parts, "decode(711909) does not round-trip");
        v.detail = v.pass ? "encode = 711909" : v.detail;
        return v;
    });

    criterion(2, "worked increment 46699 -> 46509, memory 0x4b4b2402c9", 1e-3, [](double& timed) {
        Verdict v;
        const PoolCodec codec(presets::k64_4_0_1);
        Pool pool = worked_example_pool(codec);
        const auto start = clock_type::now();
        v.require(pool.config == 46699, "start config " + std::to_string(pool.config));
        v.require(codec.read(pool, 2) == 255, "C2 before");
        const auto outcome = codec.increment(pool, 2, 1);
        v.require(outcome == PoolUpdateOutcome::Resized, "increment was not a resize");
        v.require(pool.config == 46509, "config after " + std::to_string(pool.config));
        v.require(codec.counter_widths(pool) == std::vector<uint32_t>{10, 0, 9, 45}, "widths after");
        v.require(pool.memory == 0x4b4b2402c9ULL, "memory after");
        v.require(codec.read(pool, 2) == 256, "C2 after");
        timed = seconds_since(start);
        if (v.pass) v.detail = "timed after building the codec";
        return v;
    });

    criterion(3, "encode is a bijection for every n <= 12, k <= 5", 5.0, [](double&) {
        Verdict v;
        size_t checked = 0;
        for (uint32_t n = 0; n <= 12; ++n) {
            for (uint32_t k = 1; k <= 5; ++k) {
                const SnbTable table(std::max<uint32_t>(n, 1), k);
                const auto all = oracle::enumerate_partitions(n, k);
                v.require(all.size() == snb(n, k), "count mismatch at n=" + std::to_string(n));
                std::set<uint64_t> ranks;
                for (const auto& p : all) {
                    const auto c = table.encode(p, n);
                    v.require(c < snb(n, k), "rank out of range");
                    v.require(table.decode(c, n, k).parts == p, "decode mismatch");
                    ranks.insert(c);
                    ++checked;
                }
                v.require(ranks.size() == all.size(), "collision at n=" + std::to_string(n));
            }
        }
        if (v.pass) v.detail = std::to_string(checked) + " partitions";
        return v;
    });

    criterion(4, "pool differential test against a big-integer model", 30.0, [](double&) {
        Verdict v;
        std::mt19937_64 rng(4242);
        uint64_t ops = 0, model_failures = 0;
        for (const auto& cfg : presets::all) {
            const PoolCodec codec(cfg);
            for (int run = 0; run < 1000 && v.pass; ++run) {
                Pool pool = codec.empty_pool();
                oracle::PoolModel model(cfg.n, cfg.k, cfg.s, cfg.i);
                for (int step = 0; step < 250; ++step, ++ops) {
                    const auto j = static_cast<uint32_t>(rng() % cfg.k);
                    int64_t w;
                    switch (rng() % 8) {
                        case 0: w = static_cast<int64_t>(rng() % (uint64_t{1} << (rng() % 40))); break;
                        case 1: w = -static_cast<int64_t>(rng() % (model.values[j] + 1)); break;
                        default: w = static_cast<int64_t>(rng() % 64); break;
                    }
                    const bool ok = model.apply(j, w);
                    const auto outcome = codec.increment(pool, j, w);
                    model_failures += ok ? 0 : 1;
                    bool same = (outcome != PoolUpdateOutcome::PoolFailure) == ok;
                    for (uint32_t c = 0; c < cfg.k; ++c) same = same && codec.read(pool, c) == model.values[c];
                    if (!same) {
                        v.require(false, "mismatch in preset " + cfg.name() + " at op " + std::to_string(ops));
                        break;
                    }
                }
            }
        }
        v.require(ops >= 1'000'000, "only " + std::to_string(ops) + " operations");
        if (v.pass) v.detail = std::to_string(ops) + " ops, " + std::to_string(model_failures) + " pool failures";
        return v;
    });

    criterion(5, "offset table for (64,4,0,1): 47905 entries, <= 192 KB", 60.0, [](double&) {
        Verdict v;
        const SnbTable ranks(64, 4);
        const OffsetTable table(presets::k64_4_0_1, ranks);
        const double bytes = static_cast<double>(table.serialized_bytes());
        v.require(table.size() == 47905, "entries " + std::to_string(table.size()));
        v.require(bytes <= 192 * 1024, "serialized " + fmt("%.0f", bytes) + " bytes");
        v.require(std::abs(bytes / (187 * 1024) - 1) <= 0.03, "more than 3% from 187 KB");
        v.detail = fmt("%.0f bytes", bytes);
        return v;
    });

    criterion(6, "every sketch estimate is an upper bound", 60.0, [](double&) {
        Verdict v;
        const FailureStrategy strategies[] = {FailureStrategy::ignore(), FailureStrategy::offload(),
                                              FailureStrategy::merge()};
        uint64_t queries = 0, violations = 0;
        for (double alpha : {0.6, 1.0, 1.4}) {
            for (uint64_t seed : {1, 2, 3}) {
                const auto keys = generate_zipf({alpha, uint64_t{1} << 24, 100'000, seed});
                const auto truth = on_arrival_truth(keys);
                const auto finals = final_counts(keys);
                for (size_t memory : {size_t{16 * 1024}, size_t{64 * 1024}}) {
                    for (const auto& strategy : strategies) {
                        for (bool cu : {false, true}) {
                            PooledSketch s(SketchOptions{memory, 4, presets::k64_4_0_1, strategy, seed});
                            for (size_t i = 0; i < keys.size(); ++i) {
                                cu ? s.conservative_update(keys[i]) : s.update(keys[i]);
                                violations += s.query(keys[i]) < truth[i];
                            }
                            for (const auto& [k, f] : finals) violations += s.query(k) < f;
                            queries += keys.size() + finals.size();
                        }
                    }
                }
            }
        }
        v.require(violations == 0, std::to_string(violations) + " underestimates");
        v.detail = std::to_string(queries) + " queries, " + std::to_string(violations) + " violations";
        return v;
    });

    // Criteria 7 and 8 share one sweep.
    std::map<std::string, double> sweep;
    const std::vector<uint64_t> sizes{128 * 1024, 256 * 1024, 512 * 1024, 768 * 1024, 1024 * 1024};
    const std::vector<uint64_t> seeds{1, 2, 3};
    double sweep_seconds = 0;
    std::string sweep_error;
    {
        const auto start = clock_type::now();
        try {
            cli::SketchBenchOptions o;
            o.algorithms = {cli::Algorithm::CountMin};
            o.variants = {cli::Variant::Pooled, cli::Variant::Baseline32};
            o.memory_bytes = sizes;
            o.failure = FailureStrategy::merge();
            o.dataset = cli::DatasetSpec::parse("zipf:1:5000000");
            o.metrics = {cli::MetricSpec::parse("nrmse"), cli::MetricSpec::parse("are:2^-12")};
            o.seeds = seeds;
            std::ostringstream csv;
            cli::CsvSink sink(csv);
            cli::bench_sketch(o, sink);
            const auto rows = parse_csv(csv.str());
            // Rows come out in (seed, memory, algorithm, variant, metric) order.
            size_t r = 1;
            for (uint64_t seed : seeds) {
                for (uint64_t size : sizes) {
                    for (const char* variant : {"pooled", "baseline32"}) {
                        for (const char* metric : {"nrmse", "are"}) {
                            const auto& row = rows.at(r++);
                            sweep[std::string(variant) + "|" + std::to_string(size) + "|" + std::to_string(seed) +
                                  "|" + metric] = row[6].empty() ? NAN : std::stod(row[6]);
                        }
                    }
                }
            }
        } catch (const std::exception& e) {
            sweep_error = e.what();
        }
        sweep_seconds = seconds_since(start);
    }
    const auto trend = [&](const char* metric) {
        Verdict v;
        v.require(sweep_error.empty(), "sweep failed: " + sweep_error);
        if (!v.pass) return v;
        std::string wins;
        for (uint64_t seed : seeds) {
            int better = 0;
            for (uint64_t size : sizes) {
                const auto key = std::to_string(size) + "|" + std::to_string(seed) + "|" + metric;
                better += sweep.at("pooled|" + key) <= sweep.at("baseline32|" + key);
            }
            wins += (wins.empty() ? "" : ",") + std::to_string(better);
            v.require(better >= 4, "seed " + std::to_string(seed) + ": pooled better at " + std::to_string(better) + "/5");
        }
        if (v.pass) v.detail = "pooled <= baseline at " + wins + " of 5 sizes per seed";
        return v;
    };
    criterion(7, "pooled CM on-arrival NRMSE <= fixed 32-bit CM at equal memory", 600.0, [&](double& timed) {
        timed = sweep_seconds;
        return trend("nrmse");
    });
    criterion(8, "pooled CM heavy-hitter ARE <= fixed 32-bit CM at equal memory", 600.0, [&](double& timed) {
        timed = sweep_seconds;
        return trend("are");
    });

    criterion(9, "cuckoo histogram stays exact at <= 85% load", 60.0, [](double&) {
        Verdict v;
        const auto keys = generate_zipf({1.0, uint64_t{1} << 24, 1'000'000, 9});
        const auto oracle = final_counts(keys);
        uint32_t b = 1;
        while (static_cast<double>(oracle.size()) / static_cast<double>((uint64_t{1} << b) * 4) > 0.85) ++b;
        HistogramOptions options;
        options.bucket_bits = b;
        PooledCuckooTable table(options);
        uint64_t full = 0;
        for (uint64_t k : keys) full += table.increment(k).ok ? 0 : 1;
        v.require(full == 0, std::to_string(full) + " TableFull results");
        size_t wrong = 0;
        for (const auto& [k, c] : oracle) wrong += table.query(k) != c;
        v.require(wrong == 0, std::to_string(wrong) + " wrong counts");
        v.require(table.occupied() == oracle.size(), "occupancy differs from distinct keys");
        v.require(table.bits_per_slot() / 8 == 4.5, "slot storage " + fmt("%g", table.bits_per_slot() / 8) + " bytes");
        v.detail = std::to_string(oracle.size()) + " flows, 2^" + std::to_string(b) + " buckets, load " +
                   fmt("%.3f", table.load_factor()) + ", " + fmt("%g", table.bits_per_slot() / 8) + " bytes/slot";
        return v;
    });

    criterion(10, "CLI reports nonzero throughput in schema-valid CSV, 5 runs within 3 sigma", 300.0, [](double&) {
        Verdict v;
        const std::vector<std::string> header{"algorithm", "dataset", "memory_bytes", "pool_config",
                                              "failure_strategy", "metric_name", "metric_value", "seed",
                                              "throughput_mops", "runtime_ns"};
        std::map<std::string, std::vector<double>> samples;
        for (int rep = 0; rep < 5; ++rep) {
            for (const auto& args : std::vector<std::vector<std::string>>{
                     {"bench-sketch", "--memory-bytes", "64K", "--dataset", "zipf:1:1000000", "--metric",
                      "throughput", "--repetitions", "1"},
                     {"bench-histogram", "--buckets-exp", "17", "--dataset", "zipf:1:1000000"}}) {
                std::ostringstream out, err;
                const int code = cli::run(args, out, err);
                v.require(code == 0, args[0] + " exited " + std::to_string(code) + ": " + err.str());
                const auto rows = parse_csv(out.str());
                v.require(rows.size() > 1 && rows[0] == header, args[0] + " header mismatch");
                for (size_t i = 1; i < rows.size(); ++i) {
                    v.require(rows[i].size() == header.size(), "ragged row");
                    if (rows[i].size() != header.size()) continue;
                    const double t = std::stod(rows[i][8]);
                    v.require(t > 0, "zero throughput for " + rows[i][0]);
                    if (rows[i][5] == "throughput") samples[rows[i][0]].push_back(t);
                }
            }
        }
        std::string summary;
        for (const auto& [name, xs] : samples) {
            double mean = 0;
            for (double x : xs) mean += x;
            mean /= static_cast<double>(xs.size());
            double var = 0;
            for (double x : xs) var += (x - mean) * (x - mean);
            const double sd = std::sqrt(var / static_cast<double>(xs.size() - 1));
            for (double x : xs) v.require(std::abs(x - mean) <= 3 * sd, name + " sample outside 3 sigma");
            v.require(xs.size() == 5, name + " missing samples");
            summary += (summary.empty() ? "" : ", ") + name + " " + fmt("%.2f", mean) + " +- " + fmt("%.2f", sd) + " Mops/s";
        }
        if (v.pass) v.detail = summary;
        return v;
    });

    std::printf("%s: %d criteria failed\n", failures == 0 ? "ALL PASS" : "FAILURES", failures);
    return failures == 0 ? 0 : 1;
}
