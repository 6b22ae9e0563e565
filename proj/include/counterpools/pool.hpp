#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "counterpools/snb.hpp"

namespace counterpools {

/// The (n, k, s, i) tuple: pool width, counters per pool, starting width and
/// growth granularity, all in bits.
struct PoolConfig {
    uint32_t n = 64;
    uint32_t k = 4;
    uint32_t s = 0;
    uint32_t i = 1;

    /// Number of i-bit growth steps shared by the pool, floor((n - k*s) / i).
    uint32_t budget() const noexcept { return (n - k * s) / i; }
    /// Narrowest width the leftmost counter can have: s plus the remainder
    /// that does not form a whole growth step.
    uint32_t leftmost_min_width() const noexcept { return s + (n - k * s) % i; }
    /// snb(budget(), k)
    uint64_t configuration_count() const { return snb(budget(), k); }
    /// Bits needed to store a configuration number (8, 16 or 32).
    uint32_t config_storage_bits() const;

    void validate() const;
    std::string name() const;
    /// Parses "n,k,s,i" or a preset name such as "default".
    static PoolConfig parse(std::string_view text);

    friend bool operator==(const PoolConfig&, const PoolConfig&) = default;
};

namespace presets {
inline constexpr PoolConfig k64_4_0_1{64, 4, 0, 1};
inline constexpr PoolConfig k64_5_8_4{64, 5, 8, 4};
inline constexpr PoolConfig k64_6_7_4{64, 6, 7, 4};
inline constexpr PoolConfig k64_4_12_2{64, 4, 12, 2};
inline constexpr std::array<PoolConfig, 4> all{k64_4_0_1, k64_5_8_4, k64_6_7_4, k64_4_12_2};
}  // namespace presets

/// One n-bit block plus its configuration number. Counter 0 occupies the
/// least-significant bits; the leftmost counter (index k-1) owns every bit
/// not allocated to the others.
struct Pool {
    uint64_t memory = 0;
    uint32_t config = 0;

    friend bool operator==(const Pool&, const Pool&) = default;
};

enum class PoolUpdateOutcome : uint8_t { InPlace, Resized, PoolFailure };

enum class Execution : uint8_t { Serial, Parallel };

/// Per-configuration bit offsets of every counter, plus the sentinel n.
class OffsetTable {
public:
    static constexpr uint64_t kMaxEntries = uint64_t{1} << 24;

    OffsetTable() = default;
    OffsetTable(const PoolConfig& config, const SnbTable& ranks,
                Execution exec = Execution::Parallel);

    const PoolConfig& config() const noexcept { return config_; }
    size_t size() const noexcept { return count_; }

    /// k + 1 offsets for configuration c; entry[k] == n.
    std::span<const uint8_t> entry(uint64_t c) const noexcept {
        return {offsets_.data() + c * stride_, stride_};
    }

    /// Bits per packed offset field in the cache format.
    uint32_t packed_field_bits() const noexcept { return field_bits_; }
    /// Offsets 1..k-1 packed LSB-first into one 32-bit word (offset 0 is always 0).
    uint32_t packed_entry(uint64_t c) const;
    size_t serialized_bytes() const noexcept;

    /// Cache: "CPLT", n,k,s,i as u16 LE, then packed_entry(c) as u32 LE.
    void save(const std::filesystem::path& path) const;
    static OffsetTable load(const std::filesystem::path& path);

    friend bool operator==(const OffsetTable&, const OffsetTable&) = default;

private:
    void init_layout(const PoolConfig& config);

    PoolConfig config_{};
    size_t count_ = 0;
    size_t stride_ = 0;
    uint32_t field_bits_ = 0;
    std::vector<uint8_t> offsets_;
};

/// Reads and updates pools of one configuration. Immutable and shareable.
class PoolCodec {
public:
    explicit PoolCodec(const PoolConfig& config, Execution exec = Execution::Parallel);

    const PoolConfig& config() const noexcept { return config_; }
    const OffsetTable& offsets() const noexcept { return offsets_; }
    const SnbTable& ranks() const noexcept { return ranks_; }

    /// Every counter zero, all slack owned by the leftmost counter.
    Pool empty_pool() const noexcept { return Pool{0, empty_config_}; }

    uint64_t read(const Pool& pool, uint32_t j) const;
    PoolUpdateOutcome increment(Pool& pool, uint32_t j, int64_t w) const;

    /// Counter widths indexed by counter (C0 first).
    std::vector<uint32_t> counter_widths(const Pool& pool) const;
    /// Bits the leftmost counter can give away while staying a valid width.
    uint32_t free_bits(const Pool& pool) const;

    /// Width s + m*i with minimal m such that value < 2^width.
    uint32_t canonical_width(uint64_t value) const noexcept;

    /// Configuration number for widths given in counter order; throws on
    /// widths that do not describe a valid layout.
    uint32_t config_for_widths(std::span<const uint32_t> widths) const;

private:
    uint32_t free_bits_for(uint32_t lc_size, uint64_t lc_value) const noexcept;

    PoolConfig config_;
    SnbTable ranks_;
    OffsetTable offsets_;
    uint32_t empty_config_ = 0;
};

/// Process-wide shared codec per configuration; built on first use.
std::shared_ptr<const PoolCodec> shared_codec(const PoolConfig& config);

/// Loads the offset table from COUNTERPOOLS_TABLE_DIR if present, else builds
/// it (and caches it when the directory is set).
OffsetTable load_or_build_offset_table(const PoolConfig& config, const SnbTable& ranks);

/// Pools stored as parallel arrays: n-bit words and configuration numbers
/// narrowed to PoolConfig::config_storage_bits().
class PoolArray {
public:
    PoolArray() = default;
    PoolArray(std::shared_ptr<const PoolCodec> codec, size_t count);

    size_t size() const noexcept { return words_.size(); }
    const PoolCodec& codec() const noexcept { return *codec_; }

    Pool load(size_t idx) const noexcept {
        return Pool{words_[idx], config_at(idx)};
    }
    void store(size_t idx, const Pool& p) noexcept;

    uint64_t& word(size_t idx) noexcept { return words_[idx]; }
    uint64_t word(size_t idx) const noexcept { return words_[idx]; }

    uint64_t read(size_t idx, uint32_t j) const { return codec_->read(load(idx), j); }
    PoolUpdateOutcome increment(size_t idx, uint32_t j, int64_t w);

    /// (n + config bits) per pool, rounded up to bytes over the whole array.
    size_t memory_bytes() const noexcept;

private:
    uint32_t config_at(size_t idx) const noexcept {
        switch (config_bytes_) {
            case 1: return cfg8_[idx];
            case 2: return cfg16_[idx];
            default: return cfg32_[idx];
        }
    }

    std::shared_ptr<const PoolCodec> codec_;
    std::vector<uint64_t> words_;
    std::vector<uint8_t> cfg8_;
    std::vector<uint16_t> cfg16_;
    std::vector<uint32_t> cfg32_;
    uint32_t config_bytes_ = 2;
};

}  // namespace counterpools
