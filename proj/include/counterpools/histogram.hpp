#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <random>
#include <vector>

#include "counterpools/pool.hpp"

namespace counterpools {

/// Seeded bijection on u-bit words (xorshift / odd-multiply rounds mod 2^u).
class KeyPermutation {
public:
    KeyPermutation(uint32_t bits, uint64_t seed);

    uint64_t forward(uint64_t x) const noexcept;
    uint64_t inverse(uint64_t y) const noexcept;
    uint32_t bits() const noexcept { return bits_; }

private:
    static constexpr int kRounds = 3;

    uint64_t xorshift_inverse(uint64_t y) const noexcept;

    uint32_t bits_;
    uint32_t shift_;
    uint64_t mask_;
    uint64_t mul_[kRounds];
    uint64_t mul_inv_[kRounds];
};

struct HistogramOptions {
    uint32_t bucket_bits = 17;
    uint32_t key_bits = 32;
    PoolConfig pool = presets::k64_4_0_1;
    uint64_t seed = 1;
    uint32_t max_kicks = 500;
};

struct HistogramEntry {
    uint64_t key = 0;
    uint64_t count = 0;

    friend bool operator==(const HistogramEntry&, const HistogramEntry&) = default;
};

struct IncrementResult {
    bool ok = true;
    /// Entries that an exhausted eviction chain could not place (TableFull).
    std::vector<HistogramEntry> unplaced;
};

/// Exact histogram: a cuckoo table of 2^b buckets, each one counter pool whose
/// k counters belong to k slots. A slot stores the low (u - b) bits of the
/// permuted key plus a flag saying whether it sits in its alternate bucket;
/// together with the bucket index that recovers the key exactly.
///
/// When a pool cannot grant the bits an increment needs, entries are moved to
/// their other bucket rather than losing precision.
class PooledCuckooTable {
public:
    explicit PooledCuckooTable(const HistogramOptions& options);

    IncrementResult increment(uint64_t key, uint64_t w = 1);
    uint64_t query(uint64_t key) const;

    size_t buckets() const noexcept { return pools_.size(); }
    uint32_t slots_per_bucket() const noexcept { return k_; }
    size_t slots() const noexcept { return buckets() * k_; }
    size_t occupied() const noexcept { return occupied_; }
    double load_factor() const noexcept {
        return static_cast<double>(occupied_) / static_cast<double>(slots());
    }
    uint64_t total_kicks() const noexcept { return kicks_; }

    /// Fingerprint + flag bits.
    uint32_t fingerprint_bits() const noexcept { return key_bits_ - bucket_bits_ + 1; }
    /// Fingerprint + flag + this slot's share of the pool word and configuration number.
    double bits_per_slot() const noexcept;
    /// Everything, including the per-bucket occupancy bitmaps.
    size_t memory_bytes() const noexcept;

    uint64_t primary_bucket(uint64_t key) const noexcept;
    uint64_t alternate_bucket(uint64_t bucket, uint64_t fingerprint) const noexcept;
    uint64_t fingerprint(uint64_t key) const noexcept;

    /// Visits every occupied slot with its reconstructed key.
    void for_each(const std::function<void(uint64_t bucket, uint32_t slot, uint64_t key,
                                           uint64_t count)>& fn) const;
    /// CSV: header "bucket,slot,key,count", one line per occupied slot.
    void dump_csv(std::ostream& out) const;

    /// Load factor reached by packing entries of entry_bytes into bytes_per_flow.
    static double load_at_budget(double entry_bytes, double bytes_per_flow) noexcept {
        return entry_bytes / bytes_per_flow;
    }

private:
    struct Located {
        uint64_t bucket;
        uint32_t slot;
    };
    struct InFlight {
        uint64_t fingerprint;
        uint64_t primary;
        uint64_t count;
        uint64_t target;
    };

    bool is_occupied(uint64_t bucket, uint32_t slot) const noexcept {
        return (occupancy_[bucket] >> slot) & 1U;
    }
    uint64_t slot_fingerprint(uint64_t bucket, uint32_t slot) const noexcept {
        return tags_[bucket * k_ + slot] & fp_mask_;
    }
    bool slot_flag(uint64_t bucket, uint32_t slot) const noexcept {
        return (tags_[bucket * k_ + slot] >> (key_bits_ - bucket_bits_)) & 1U;
    }
    uint64_t slot_primary(uint64_t bucket, uint32_t slot) const noexcept;
    uint64_t reconstruct(uint64_t primary, uint64_t fingerprint) const noexcept;

    std::optional<Located> find(uint64_t primary, uint64_t fingerprint) const noexcept;
    std::optional<uint32_t> try_place(uint64_t bucket, uint64_t fingerprint, uint64_t primary,
                                      uint64_t count);
    uint64_t remove(uint64_t bucket, uint32_t slot);
    IncrementResult insert(uint64_t fingerprint, uint64_t primary, uint64_t count);

    uint32_t bucket_bits_;
    uint32_t key_bits_;
    uint32_t k_;
    uint32_t max_kicks_;
    uint64_t fp_mask_;
    uint64_t alt_seed_;
    KeyPermutation perm_;
    PoolArray pools_;
    std::vector<uint32_t> tags_;
    std::vector<uint8_t> occupancy_;
    size_t occupied_ = 0;
    uint64_t kicks_ = 0;
    std::mt19937_64 rng_;
};

}  // namespace counterpools
