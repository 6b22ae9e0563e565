#include "counterpools/sketch.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <random>

#include "counterpools/hashing.hpp"

namespace counterpools {

namespace {

constexpr uint64_t low_mask(uint32_t bits) noexcept {
    return bits >= 64 ? ~uint64_t{0} : (uint64_t{1} << bits) - 1;
}

constexpr uint64_t saturating_add(uint64_t a, uint64_t b) noexcept {
    return a > kSaturatedEstimate - b ? kSaturatedEstimate : a + b;
}

bool test_bit(const std::vector<uint64_t>& bits, size_t i) noexcept {
    return !bits.empty() && ((bits[i / 64] >> (i % 64)) & 1U);
}

void assign_bit(std::vector<uint64_t>& bits, size_t i, bool value) noexcept {
    if (bits.empty()) return;
    const uint64_t mask = uint64_t{1} << (i % 64);
    bits[i / 64] = value ? (bits[i / 64] | mask) : (bits[i / 64] & ~mask);
}

// Splits total units over rows, giving the first (total % rows) rows one extra.
std::vector<size_t> split_rows(size_t total, uint32_t rows) {
    std::vector<size_t> out(rows, total / rows);
    for (uint32_t r = 0; r < total % rows; ++r) ++out[r];
    return out;
}

void check_weight(uint64_t w) {
    if (w == 0 || w > static_cast<uint64_t>(std::numeric_limits<int64_t>::max())) {
        throw ContractError("sketch weight must be in [1, 2^63)");
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// FailureStrategy

FailureStrategy FailureStrategy::parse(std::string_view text) {
    if (text == "ignore") return ignore();
    if (text == "merge") return merge();
    if (text == "offload") return offload();
    constexpr std::string_view prefix = "offload:";
    if (text.substr(0, prefix.size()) == prefix) {
        const std::string rest(text.substr(prefix.size()));
        char* end = nullptr;
        const double f = std::strtod(rest.c_str(), &end);
        if (end != rest.c_str() && *end == '\0' && f > 0.0 && f < 10.0) return offload(f);
    }
    throw ContractError("failure strategy must be ignore, merge or offload[:fraction], got \"" +
                        std::string(text) + "\"");
}

std::string FailureStrategy::name() const {
    switch (kind) {
        case Kind::Ignore: return "ignore";
        case Kind::Merge: return "merge";
        case Kind::Offload: {
            char buf[32];
            std::snprintf(buf, sizeof buf, "offload:%g", secondary_fraction);
            return buf;
        }
    }
    return "unknown";
}

std::vector<uint64_t> derive_row_seeds(uint64_t seed, uint32_t rows) {
    std::mt19937_64 rng(seed);
    std::vector<uint64_t> seeds(rows);
    for (auto& s : seeds) s = rng();
    return seeds;
}

// ---------------------------------------------------------------------------
// PooledSketch

PooledSketch::PooledSketch(std::vector<size_t> pools_per_row, const PoolConfig& pool,
                           FailureStrategy failure, uint64_t seed, size_t secondary_counters)
    : codec_(shared_codec(pool)), failure_(failure) {
    if (pools_per_row.empty()) throw ContractError("sketch needs at least one row");
    const auto seeds = derive_row_seeds(seed, static_cast<uint32_t>(pools_per_row.size()) + 1);
    rows_.reserve(pools_per_row.size());
    for (size_t r = 0; r < pools_per_row.size(); ++r) {
        if (pools_per_row[r] == 0) throw ContractError("every row needs at least one pool");
        Row row;
        row.seed = seeds[r];
        row.pools = PoolArray(codec_, pools_per_row[r]);
        row.failed_bits.assign((pools_per_row[r] + 63) / 64, 0);
        if (failure_.kind == FailureStrategy::Kind::Merge) {
            row.merged_bits.assign((pools_per_row[r] + 63) / 64, 0);
        }
        rows_.push_back(std::move(row));
    }
    secondary_seed_ = seeds.back();
    if (failure_.kind == FailureStrategy::Kind::Offload) {
        if (secondary_counters == 0) throw ContractError("offload needs a non-empty secondary");
        secondary_.assign(secondary_counters, 0);
    }
}

PooledSketch::Geometry PooledSketch::plan_geometry(const SketchOptions& o) {
    o.pool.validate();
    if (o.rows == 0) throw ContractError("sketch needs at least one row");
    const uint64_t per_pool_bits =
        o.pool.n + o.pool.config_storage_bits() + o.failure.side_bits();
    const uint64_t budget_bits = static_cast<uint64_t>(o.memory_bytes) * 8;
    uint64_t primary_bits = budget_bits;
    if (o.failure.kind == FailureStrategy::Kind::Offload) {
        primary_bits = static_cast<uint64_t>(
            std::floor(static_cast<double>(budget_bits) / (1.0 + o.failure.secondary_fraction)));
    }
    const uint64_t total_pools = primary_bits / per_pool_bits;
    if (total_pools < o.rows) {
        throw ContractError("memory budget too small for " + std::to_string(o.rows) + " rows");
    }
    Geometry g;
    g.pools_per_row = split_rows(total_pools, o.rows);
    if (o.failure.kind == FailureStrategy::Kind::Offload) {
        // Side bitmaps are rounded up to bytes in memory_bytes(); leave room for that.
        const uint64_t used = (total_pools * per_pool_bits + 7) / 8 * 8;
        g.secondary_counters = used < budget_bits ? (budget_bits - used) / 32 : 0;
        if (g.secondary_counters == 0) throw ContractError("no memory left for the secondary");
    }
    return g;
}

PooledSketch::PooledSketch(const SketchOptions& options)
    : PooledSketch(plan_geometry(options), options) {}

PooledSketch::PooledSketch(Geometry g, const SketchOptions& options)
    : PooledSketch(std::move(g.pools_per_row), options.pool, options.failure, options.seed,
                   g.secondary_counters) {}

uint64_t PooledSketch::counter_index(uint32_t row, uint64_t key) const noexcept {
    const auto& r = rows_[row];
    return seeded_hash(key, r.seed) % (r.pools.size() * codec_->config().k);
}

size_t PooledSketch::secondary_slot(uint32_t row, uint64_t idx) const noexcept {
    return seeded_hash((static_cast<uint64_t>(row) << 56) ^ idx, secondary_seed_) %
           secondary_.size();
}

PoolMode PooledSketch::pool_mode(uint32_t row, size_t pool) const noexcept {
    const auto& r = rows_[row];
    const bool failed = test_bit(r.failed_bits, pool);
    const bool merged = test_bit(r.merged_bits, pool);
    if (merged) return failed ? PoolMode::MergedSingle : PoolMode::MergedPairs;
    return failed ? PoolMode::Failed : PoolMode::Normal;
}

void PooledSketch::set_mode(Row& r, size_t pool, PoolMode mode) noexcept {
    assign_bit(r.failed_bits, pool, mode == PoolMode::Failed || mode == PoolMode::MergedSingle);
    assign_bit(r.merged_bits, pool, mode == PoolMode::MergedPairs || mode == PoolMode::MergedSingle);
}

size_t PooledSketch::pools_in_mode(PoolMode mode) const noexcept {
    size_t count = 0;
    for (uint32_t row = 0; row < rows(); ++row) {
        for (size_t p = 0; p < pools_in_row(row); ++p) count += pool_mode(row, p) == mode;
    }
    return count;
}

uint64_t PooledSketch::merged_value(uint32_t row, size_t pool, uint32_t j) const noexcept {
    const uint64_t word = rows_[row].pools.word(pool);
    if (pool_mode(row, pool) == PoolMode::MergedSingle) return word & low_mask(codec_->config().n);
    const uint32_t gw = group_width();
    return (word >> ((j / 2) * gw)) & low_mask(gw);
}

std::optional<uint64_t> PooledSketch::row_estimate(uint32_t row, uint64_t key) const {
    const uint64_t idx = counter_index(row, key);
    const uint32_t k = codec_->config().k;
    const size_t pool = idx / k;
    const auto j = static_cast<uint32_t>(idx % k);
    switch (pool_mode(row, pool)) {
        case PoolMode::Normal:
            return rows_[row].pools.read(pool, j);
        case PoolMode::Failed:
            if (failure_.kind == FailureStrategy::Kind::Ignore) return std::nullopt;
            return saturating_add(rows_[row].pools.read(pool, j),
                                  secondary_[secondary_slot(row, idx)]);
        case PoolMode::MergedPairs:
        case PoolMode::MergedSingle:
            return merged_value(row, pool, j);
    }
    return std::nullopt;
}

uint64_t PooledSketch::query(uint64_t key) const {
    uint64_t best = kSaturatedEstimate;
    for (uint32_t row = 0; row < rows(); ++row) {
        if (auto v = row_estimate(row, key)) best = std::min(best, *v);
    }
    return best;
}

void PooledSketch::query_batch(std::span<const uint64_t> keys, std::span<uint64_t> out,
                               Execution exec) const {
    if (out.size() < keys.size()) throw ContractError("output span too small");
    const auto n = static_cast<int64_t>(keys.size());
    if (exec == Execution::Parallel) {
#pragma omp parallel for schedule(static)
        for (int64_t i = 0; i < n; ++i) out[i] = query(keys[i]);
    } else {
        for (int64_t i = 0; i < n; ++i) out[i] = query(keys[i]);
    }
}

void PooledSketch::update(uint64_t key, uint64_t w) {
    check_weight(w);
    for (uint32_t row = 0; row < rows(); ++row) apply(row, counter_index(row, key), Rule::Add, w);
}

void PooledSketch::conservative_update(uint64_t key, uint64_t w) {
    check_weight(w);
    const uint64_t estimate = query(key);
    if (estimate == kSaturatedEstimate) {
        // Every row is skipped (Ignore) or saturated; nothing can be raised.
        return;
    }
    const uint64_t target = saturating_add(estimate, w);
    for (uint32_t row = 0; row < rows(); ++row) {
        apply(row, counter_index(row, key), Rule::RaiseTo, target);
    }
}

void PooledSketch::apply(uint32_t row, uint64_t idx, Rule rule, uint64_t amount) {
    Row& r = rows_[row];
    const uint32_t k = codec_->config().k;
    const size_t pool = idx / k;
    const auto j = static_cast<uint32_t>(idx % k);

    switch (pool_mode(row, pool)) {
        case PoolMode::Normal: {
            uint64_t delta = amount;
            if (rule == Rule::RaiseTo) {
                const uint64_t current = r.pools.read(pool, j);
                if (current >= amount) return;
                delta = amount - current;
            }
            const auto outcome =
                delta > static_cast<uint64_t>(std::numeric_limits<int64_t>::max())
                    ? PoolUpdateOutcome::PoolFailure
                    : r.pools.increment(pool, j, static_cast<int64_t>(delta));
            if (outcome == PoolUpdateOutcome::PoolFailure) {
                apply_failure_strategy(row, pool, j, rule, amount);
            }
            return;
        }
        case PoolMode::Failed: {
            if (failure_.kind == FailureStrategy::Kind::Ignore) return;
            uint32_t& cell = secondary_[secondary_slot(row, idx)];
            constexpr uint64_t cap = std::numeric_limits<uint32_t>::max();
            if (rule == Rule::Add) {
                cell = static_cast<uint32_t>(std::min<uint64_t>(cap, uint64_t{cell} + amount));
            } else {
                const uint64_t frozen = r.pools.read(pool, j);
                if (amount > frozen) {
                    const uint64_t need = std::min<uint64_t>(cap, amount - frozen);
                    cell = static_cast<uint32_t>(std::max<uint64_t>(cell, need));
                }
            }
            return;
        }
        case PoolMode::MergedPairs:
        case PoolMode::MergedSingle:
            apply_merged(row, pool, j, rule, amount);
            return;
    }
}

void PooledSketch::apply_failure_strategy(uint32_t row, size_t pool, uint32_t j, Rule rule,
                                          uint64_t amount) {
    Row& r = rows_[row];
    switch (failure_.kind) {
        case FailureStrategy::Kind::Ignore:
            set_mode(r, pool, PoolMode::Failed);
            return;
        case FailureStrategy::Kind::Offload:
            set_mode(r, pool, PoolMode::Failed);
            apply(row, pool * codec_->config().k + j, rule, amount);
            return;
        case FailureStrategy::Kind::Merge:
            merge_pool(row, pool);
            apply_merged(row, pool, j, rule, amount);
            return;
    }
}

void PooledSketch::apply_failure_strategy(uint32_t row, size_t pool, uint32_t counter,
                                          uint64_t pending) {
    if (pool_mode(row, pool) != PoolMode::Normal) return;
    apply_failure_strategy(row, pool, counter, Rule::Add, pending);
}

void PooledSketch::merge_pool(uint32_t row, size_t pool) {
    Row& r = rows_[row];
    const auto& cfg = codec_->config();
    const uint32_t gw = group_width();
    const Pool p = r.pools.load(pool);

    std::vector<uint64_t> sums(groups(), 0);
    uint64_t total = 0;
    bool single = false;
    for (uint32_t j = 0; j < cfg.k; ++j) {
        const uint64_t v = codec_->read(p, j);
        sums[j / 2] = saturating_add(sums[j / 2], v);
        total = saturating_add(total, v);
        single |= sums[j / 2] > low_mask(gw);
    }
    if (single) {
        r.pools.word(pool) = std::min(total, low_mask(cfg.n));
        set_mode(r, pool, PoolMode::MergedSingle);
        return;
    }
    uint64_t word = 0;
    for (uint32_t g = 0; g < groups(); ++g) word |= sums[g] << (g * gw);
    r.pools.word(pool) = word;
    set_mode(r, pool, PoolMode::MergedPairs);
}

void PooledSketch::apply_merged(uint32_t row, size_t pool, uint32_t j, Rule rule,
                                uint64_t amount) {
    Row& r = rows_[row];
    const auto& cfg = codec_->config();
    uint64_t& word = r.pools.word(pool);
    const auto next_value = [&](uint64_t current) {
        return rule == Rule::Add ? saturating_add(current, amount) : std::max(current, amount);
    };

    if (pool_mode(row, pool) == PoolMode::MergedSingle) {
        word = std::min(next_value(word & low_mask(cfg.n)), low_mask(cfg.n));
        return;
    }

    const uint32_t gw = group_width();
    const uint32_t shift = (j / 2) * gw;
    const uint64_t current = (word >> shift) & low_mask(gw);
    const uint64_t updated = next_value(current);
    if (updated <= low_mask(gw)) {
        word = (word & ~(low_mask(gw) << shift)) | (updated << shift);
        return;
    }
    // A group counter overflowed: fold every group into one full-width counter.
    uint64_t total = updated;
    for (uint32_t g = 0; g < groups(); ++g) {
        if (g != j / 2) total = saturating_add(total, (word >> (g * gw)) & low_mask(gw));
    }
    word = std::min(total, low_mask(cfg.n));
    set_mode(r, pool, PoolMode::MergedSingle);
}

size_t PooledSketch::memory_bytes() const noexcept {
    const auto& cfg = codec_->config();
    const uint64_t per_pool_bits = cfg.n + cfg.config_storage_bits() + failure_.side_bits();
    uint64_t pools = 0;
    for (const auto& r : rows_) pools += r.pools.size();
    return (pools * per_pool_bits + 7) / 8 + secondary_.size() * sizeof(uint32_t);
}

// ---------------------------------------------------------------------------
// FixedSketch

FixedSketch::FixedSketch(size_t memory_bytes, uint32_t rows, uint64_t seed)
    : seeds_(derive_row_seeds(seed, rows)) {
    if (rows == 0) throw ContractError("sketch needs at least one row");
    const size_t total = memory_bytes / sizeof(uint32_t);
    if (total < rows) throw ContractError("memory budget too small for the requested rows");
    const auto widths = split_rows(total, rows);
    row_begin_.resize(rows + 1, 0);
    for (uint32_t r = 0; r < rows; ++r) row_begin_[r + 1] = row_begin_[r] + widths[r];
    counters_.assign(total, 0);
}

uint32_t& FixedSketch::cell(uint32_t row, uint64_t key) noexcept {
    const size_t width = row_begin_[row + 1] - row_begin_[row];
    return counters_[row_begin_[row] + seeded_hash(key, seeds_[row]) % width];
}

uint32_t FixedSketch::cell(uint32_t row, uint64_t key) const noexcept {
    const size_t width = row_begin_[row + 1] - row_begin_[row];
    return counters_[row_begin_[row] + seeded_hash(key, seeds_[row]) % width];
}

void FixedSketch::update(uint64_t key, uint64_t w) {
    check_weight(w);
    constexpr uint64_t cap = std::numeric_limits<uint32_t>::max();
    for (uint32_t r = 0; r < rows(); ++r) {
        uint32_t& c = cell(r, key);
        c = static_cast<uint32_t>(std::min<uint64_t>(cap, uint64_t{c} + w));
    }
}

void FixedSketch::conservative_update(uint64_t key, uint64_t w) {
    check_weight(w);
    constexpr uint64_t cap = std::numeric_limits<uint32_t>::max();
    const uint64_t target = std::min<uint64_t>(cap, query(key) + w);
    for (uint32_t r = 0; r < rows(); ++r) {
        uint32_t& c = cell(r, key);
        c = std::max(c, static_cast<uint32_t>(target));
    }
}

uint64_t FixedSketch::query(uint64_t key) const {
    uint64_t best = kSaturatedEstimate;
    for (uint32_t r = 0; r < rows(); ++r) best = std::min<uint64_t>(best, cell(r, key));
    return best;
}

void FixedSketch::query_batch(std::span<const uint64_t> keys, std::span<uint64_t> out,
                              Execution exec) const {
    if (out.size() < keys.size()) throw ContractError("output span too small");
    const auto n = static_cast<int64_t>(keys.size());
    if (exec == Execution::Parallel) {
#pragma omp parallel for schedule(static)
        for (int64_t i = 0; i < n; ++i) out[i] = query(keys[i]);
    } else {
        for (int64_t i = 0; i < n; ++i) out[i] = query(keys[i]);
    }
}

size_t FixedSketch::memory_bytes() const noexcept { return counters_.size() * sizeof(uint32_t); }

}  // namespace counterpools
