#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "counterpools/pool.hpp"

namespace counterpools {

inline constexpr uint64_t kSaturatedEstimate = std::numeric_limits<uint64_t>::max();

/// What a sketch does with a pool that cannot grant the bits an update needs.
struct FailureStrategy {
    enum class Kind : uint8_t { Ignore, Offload, Merge };

    Kind kind = Kind::Merge;
    /// Offload only: secondary memory as a fraction of primary memory.
    double secondary_fraction = 0.1;

    static FailureStrategy ignore() { return {Kind::Ignore, 0.0}; }
    static FailureStrategy offload(double fraction = 0.1) { return {Kind::Offload, fraction}; }
    static FailureStrategy merge() { return {Kind::Merge, 0.0}; }

    /// "ignore", "merge", "offload" or "offload:<fraction>".
    static FailureStrategy parse(std::string_view text);
    std::string name() const;
    /// Side-state bits kept per pool (failed flag, plus a mode bit for Merge).
    uint32_t side_bits() const noexcept { return kind == Kind::Merge ? 2 : 1; }

    friend bool operator==(const FailureStrategy&, const FailureStrategy&) = default;
};

enum class PoolMode : uint8_t {
    Normal,
    /// Failed under Ignore (never touched again) or Offload (values frozen).
    Failed,
    /// Merge: ceil(k/2) fixed counters, logical counters (0,1), (2,3), ...
    MergedPairs,
    /// Merge, second level: the whole word is one counter.
    MergedSingle,
};

struct SketchOptions {
    size_t memory_bytes = 64 * 1024;
    uint32_t rows = 4;
    PoolConfig pool = presets::k64_4_0_1;
    FailureStrategy failure = FailureStrategy::merge();
    uint64_t seed = 1;
};

/// Count-Min / Conservative-Update sketch whose counters live in pools.
///
/// Each row hashes a key to a global counter index in [0, pools * k); the pool
/// is index / k and the counter within it index % k. Every point estimate is
/// an upper bound on the key's true frequency.
class PooledSketch {
public:
    /// Sizes rows so that pools, configuration numbers, side bitmaps and the
    /// optional secondary array together fit in options.memory_bytes.
    explicit PooledSketch(const SketchOptions& options);

    /// Explicit geometry; rows may differ in width. secondary_counters is only
    /// used under Offload.
    PooledSketch(std::vector<size_t> pools_per_row, const PoolConfig& pool,
                 FailureStrategy failure, uint64_t seed, size_t secondary_counters = 0);

    void update(uint64_t key, uint64_t w = 1);
    void conservative_update(uint64_t key, uint64_t w = 1);
    uint64_t query(uint64_t key) const;

    /// query() over many keys; only valid between updates.
    void query_batch(std::span<const uint64_t> keys, std::span<uint64_t> out,
                     Execution exec = Execution::Parallel) const;

    uint32_t rows() const noexcept { return static_cast<uint32_t>(rows_.size()); }
    size_t pools_in_row(uint32_t row) const noexcept { return rows_[row].pools.size(); }
    const PoolConfig& pool_config() const noexcept { return codec_->config(); }
    const FailureStrategy& failure() const noexcept { return failure_; }
    size_t secondary_counters() const noexcept { return secondary_.size(); }

    PoolMode pool_mode(uint32_t row, size_t pool) const noexcept;
    size_t pools_in_mode(PoolMode mode) const noexcept;
    /// Global counter index of key in row.
    uint64_t counter_index(uint32_t row, uint64_t key) const noexcept;
    /// The value a row contributes to query(), or nullopt when the row is skipped.
    std::optional<uint64_t> row_estimate(uint32_t row, uint64_t key) const;

    /// Recovery for a failed pool in `row`, applying `pending` to logical
    /// counter `counter` afterwards. Normally triggered by update().
    void apply_failure_strategy(uint32_t row, size_t pool, uint32_t counter, uint64_t pending);

    /// Raw access for tests that need to stage specific pool states.
    PoolArray& row_pools(uint32_t row) noexcept { return rows_[row].pools; }
    /// Logical counters of a merged pool, e.g. for k=4: (low, high) 32-bit halves.
    uint64_t merged_value(uint32_t row, size_t pool, uint32_t j) const noexcept;

    /// Pool words + configuration numbers + side bitmaps + secondary array.
    size_t memory_bytes() const noexcept;

private:
    struct Row {
        uint64_t seed = 0;
        PoolArray pools;
        std::vector<uint64_t> failed_bits;
        std::vector<uint64_t> merged_bits;
    };

    struct Geometry {
        std::vector<size_t> pools_per_row;
        size_t secondary_counters = 0;
    };
    static Geometry plan_geometry(const SketchOptions& options);
    PooledSketch(Geometry geometry, const SketchOptions& options);

    enum class Rule : uint8_t { Add, RaiseTo };

    void apply(uint32_t row, uint64_t idx, Rule rule, uint64_t amount);
    void apply_failure_strategy(uint32_t row, size_t pool, uint32_t j, Rule rule, uint64_t amount);
    void merge_pool(uint32_t row, size_t pool);
    void apply_merged(uint32_t row, size_t pool, uint32_t j, Rule rule, uint64_t amount);
    size_t secondary_slot(uint32_t row, uint64_t idx) const noexcept;
    void set_mode(Row& r, size_t pool, PoolMode mode) noexcept;

    uint32_t groups() const noexcept { return (codec_->config().k + 1) / 2; }
    uint32_t group_width() const noexcept { return codec_->config().n / groups(); }

    std::shared_ptr<const PoolCodec> codec_;
    FailureStrategy failure_;
    std::vector<Row> rows_;
    std::vector<uint32_t> secondary_;
    uint64_t secondary_seed_ = 0;
};

/// Count-Min / Conservative-Update sketch with fixed 32-bit saturating counters.
class FixedSketch {
public:
    FixedSketch(size_t memory_bytes, uint32_t rows, uint64_t seed);

    void update(uint64_t key, uint64_t w = 1);
    void conservative_update(uint64_t key, uint64_t w = 1);
    uint64_t query(uint64_t key) const;
    void query_batch(std::span<const uint64_t> keys, std::span<uint64_t> out,
                     Execution exec = Execution::Parallel) const;

    uint32_t rows() const noexcept { return static_cast<uint32_t>(seeds_.size()); }
    size_t memory_bytes() const noexcept;

private:
    uint32_t& cell(uint32_t row, uint64_t key) noexcept;
    uint32_t cell(uint32_t row, uint64_t key) const noexcept;

    std::vector<uint64_t> seeds_;
    std::vector<size_t> row_begin_;
    std::vector<uint32_t> counters_;
};

/// Per-row hash seeds derived from one user seed.
std::vector<uint64_t> derive_row_seeds(uint64_t seed, uint32_t rows);

}  // namespace counterpools
