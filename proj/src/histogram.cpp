#include "counterpools/histogram.hpp"

#include <limits>

#include "counterpools/hashing.hpp"

namespace counterpools {

namespace {

constexpr uint64_t low_mask(uint32_t bits) noexcept {
    return bits >= 64 ? ~uint64_t{0} : (uint64_t{1} << bits) - 1;
}

uint64_t odd_inverse(uint64_t a) noexcept {
    // Newton iteration doubles the number of correct low bits each step.
    uint64_t inv = a;
    for (int it = 0; it < 6; ++it) inv *= 2 - a * inv;
    return inv;
}

}  // namespace

// ---------------------------------------------------------------------------
// KeyPermutation

KeyPermutation::KeyPermutation(uint32_t bits, uint64_t seed)
    : bits_(bits), shift_(std::max<uint32_t>(1, bits / 2 + 1)), mask_(low_mask(bits)) {
    if (bits < 1 || bits > 64) throw ContractError("key width must be in [1, 64]");
    for (int r = 0; r < kRounds; ++r) {
        mul_[r] = (mix64(seed + 0x632be59bd9b4e019ULL * (r + 1)) | 1U) & mask_;
        if (mul_[r] == 0) mul_[r] = 1;
        mul_inv_[r] = odd_inverse(mul_[r]) & mask_;
    }
}

uint64_t KeyPermutation::forward(uint64_t x) const noexcept {
    x &= mask_;
    for (int r = 0; r < kRounds; ++r) {
        x ^= x >> shift_;
        x = (x * mul_[r]) & mask_;
    }
    return x ^ (x >> shift_);
}

uint64_t KeyPermutation::xorshift_inverse(uint64_t y) const noexcept {
    uint64_t x = y;
    for (uint32_t done = shift_; done < bits_; done += shift_) x = y ^ (x >> shift_);
    return x;
}

uint64_t KeyPermutation::inverse(uint64_t y) const noexcept {
    y = xorshift_inverse(y & mask_);
    for (int r = kRounds - 1; r >= 0; --r) {
        y = (y * mul_inv_[r]) & mask_;
        y = xorshift_inverse(y);
    }
    return y;
}

// ---------------------------------------------------------------------------
// PooledCuckooTable

PooledCuckooTable::PooledCuckooTable(const HistogramOptions& o)
    : bucket_bits_(o.bucket_bits),
      key_bits_(o.key_bits),
      k_(o.pool.k),
      max_kicks_(o.max_kicks),
      fp_mask_(low_mask(o.key_bits - std::min(o.key_bits, o.bucket_bits))),
      alt_seed_(mix64(o.seed ^ 0xa0761d6478bd642fULL)),
      perm_(o.key_bits, o.seed),
      rng_(o.seed) {
    if (o.bucket_bits < 1 || o.bucket_bits > 32) throw ContractError("bucket bits must be in [1, 32]");
    if (o.key_bits < o.bucket_bits || o.key_bits > 64) {
        throw ContractError("key width must be in [bucket bits, 64]");
    }
    if (o.key_bits - o.bucket_bits + 1 > 32) {
        throw ContractError("fingerprint plus flag must fit 32 bits");
    }
    if (o.pool.k > 8) throw ContractError("at most 8 slots per bucket");
    const size_t buckets = size_t{1} << o.bucket_bits;
    pools_ = PoolArray(shared_codec(o.pool), buckets);
    tags_.assign(buckets * k_, 0);
    occupancy_.assign(buckets, 0);
}

uint64_t PooledCuckooTable::fingerprint(uint64_t key) const noexcept {
    return perm_.forward(key) & fp_mask_;
}

uint64_t PooledCuckooTable::primary_bucket(uint64_t key) const noexcept {
    return perm_.forward(key) >> (key_bits_ - bucket_bits_);
}

uint64_t PooledCuckooTable::alternate_bucket(uint64_t bucket, uint64_t fp) const noexcept {
    // Displacement in [1, B-1] so the two candidates always differ.
    const uint64_t displacement = seeded_hash(fp, alt_seed_) % (buckets() - 1) + 1;
    return bucket ^ displacement;
}

uint64_t PooledCuckooTable::slot_primary(uint64_t bucket, uint32_t slot) const noexcept {
    return slot_flag(bucket, slot) ? alternate_bucket(bucket, slot_fingerprint(bucket, slot)) : bucket;
}

uint64_t PooledCuckooTable::reconstruct(uint64_t primary, uint64_t fp) const noexcept {
    const uint32_t fp_bits = key_bits_ - bucket_bits_;
    return perm_.inverse((fp_bits >= 64 ? 0 : primary << fp_bits) | fp);
}

std::optional<PooledCuckooTable::Located> PooledCuckooTable::find(uint64_t primary,
                                                                   uint64_t fp) const noexcept {
    const uint64_t alt = alternate_bucket(primary, fp);
    for (uint32_t s = 0; s < k_; ++s) {
        if (is_occupied(primary, s) && !slot_flag(primary, s) && slot_fingerprint(primary, s) == fp) {
            return Located{primary, s};
        }
    }
    for (uint32_t s = 0; s < k_; ++s) {
        if (is_occupied(alt, s) && slot_flag(alt, s) && slot_fingerprint(alt, s) == fp) {
            return Located{alt, s};
        }
    }
    return std::nullopt;
}

std::optional<uint32_t> PooledCuckooTable::try_place(uint64_t bucket, uint64_t fp,
                                                     uint64_t primary, uint64_t count) {
    if (count > static_cast<uint64_t>(std::numeric_limits<int64_t>::max())) return std::nullopt;
    for (uint32_t s = 0; s < k_; ++s) {
        if (is_occupied(bucket, s)) continue;
        if (pools_.increment(bucket, s, static_cast<int64_t>(count)) ==
            PoolUpdateOutcome::PoolFailure) {
            continue;
        }
        const uint32_t flag = bucket == primary ? 0 : 1;
        tags_[bucket * k_ + s] =
            static_cast<uint32_t>(fp | (static_cast<uint64_t>(flag) << (key_bits_ - bucket_bits_)));
        occupancy_[bucket] |= static_cast<uint8_t>(1U << s);
        ++occupied_;
        return s;
    }
    return std::nullopt;
}

uint64_t PooledCuckooTable::remove(uint64_t bucket, uint32_t slot) {
    const uint64_t count = pools_.read(bucket, slot);
    pools_.increment(bucket, slot, -static_cast<int64_t>(count));
    occupancy_[bucket] &= static_cast<uint8_t>(~(1U << slot));
    --occupied_;
    return count;
}

IncrementResult PooledCuckooTable::increment(uint64_t key, uint64_t w) {
    if (key > low_mask(key_bits_)) throw ContractError("key exceeds the table's key width");
    if (w == 0) return {};
    const uint64_t mixed = perm_.forward(key);
    const uint64_t fp = mixed & fp_mask_;
    const uint64_t primary = mixed >> (key_bits_ - bucket_bits_);

    if (auto at = find(primary, fp)) {
        if (w <= static_cast<uint64_t>(std::numeric_limits<int64_t>::max()) &&
            pools_.increment(at->bucket, at->slot, static_cast<int64_t>(w)) !=
                PoolUpdateOutcome::PoolFailure) {
            return {};
        }
        // The pool cannot grow this counter: lift the entry out and re-home it,
        // evicting others as needed.
        const uint64_t current = pools_.read(at->bucket, at->slot);
        if (current > std::numeric_limits<uint64_t>::max() - w) {
            throw ContractError("histogram count would exceed 64 bits");
        }
        remove(at->bucket, at->slot);
        return insert(fp, primary, current + w);
    }
    return insert(fp, primary, w);
}

IncrementResult PooledCuckooTable::insert(uint64_t fp, uint64_t primary, uint64_t count) {
    const uint64_t alt = alternate_bucket(primary, fp);
    if (try_place(primary, fp, primary, count) || try_place(alt, fp, primary, count)) return {};

    std::vector<InFlight> pending{{fp, primary, count, (rng_() & 1U) ? alt : primary}};
    // Slot filled by the previous chain step; not chosen as the next victim.
    Located last_placed{std::numeric_limits<uint64_t>::max(), 0};
    uint32_t kicks = 0;
    const auto table_full = [&] {
        IncrementResult result{false, {}};
        for (const auto& p : pending) {
            result.unplaced.push_back({reconstruct(p.primary, p.fingerprint), p.count});
        }
        return result;
    };
    while (!pending.empty()) {
        const InFlight e = pending.back();
        if (auto slot = try_place(e.target, e.fingerprint, e.primary, e.count)) {
            pending.pop_back();
            last_placed = {e.target, *slot};
            continue;
        }
        if (kicks == max_kicks_) return table_full();
        ++kicks;
        ++kicks_;

        uint32_t candidates[8];
        uint32_t n = 0;
        for (uint32_t s = 0; s < k_; ++s) {
            const bool just_placed = last_placed.bucket == e.target && last_placed.slot == s;
            if (is_occupied(e.target, s) && !just_placed) candidates[n++] = s;
        }
        if (n == 0) {
            if (last_placed.bucket != e.target) return table_full();
            candidates[n++] = last_placed.slot;
        }
        const uint32_t victim = candidates[rng_() % n];

        const uint64_t v_fp = slot_fingerprint(e.target, victim);
        const uint64_t v_primary = slot_primary(e.target, victim);
        const uint64_t v_count = remove(e.target, victim);
        const uint64_t v_target = e.target == v_primary ? alternate_bucket(v_primary, v_fp) : v_primary;
        pending.push_back({v_fp, v_primary, v_count, v_target});
        last_placed.bucket = std::numeric_limits<uint64_t>::max();
    }
    return {};
}

uint64_t PooledCuckooTable::query(uint64_t key) const {
    if (key > low_mask(key_bits_)) return 0;
    const uint64_t mixed = perm_.forward(key);
    if (auto at = find(mixed >> (key_bits_ - bucket_bits_), mixed & fp_mask_)) {
        return pools_.read(at->bucket, at->slot);
    }
    return 0;
}

double PooledCuckooTable::bits_per_slot() const noexcept {
    const auto& cfg = pools_.codec().config();
    return fingerprint_bits() +
           static_cast<double>(cfg.n + cfg.config_storage_bits()) / static_cast<double>(k_);
}

size_t PooledCuckooTable::memory_bytes() const noexcept {
    const double bits = bits_per_slot() * static_cast<double>(slots()) +
                        static_cast<double>(k_) * static_cast<double>(buckets());
    return static_cast<size_t>((bits + 7) / 8);
}

void PooledCuckooTable::for_each(
    const std::function<void(uint64_t, uint32_t, uint64_t, uint64_t)>& fn) const {
    for (uint64_t b = 0; b < buckets(); ++b) {
        for (uint32_t s = 0; s < k_; ++s) {
            if (!is_occupied(b, s)) continue;
            fn(b, s, reconstruct(slot_primary(b, s), slot_fingerprint(b, s)), pools_.read(b, s));
        }
    }
}

void PooledCuckooTable::dump_csv(std::ostream& out) const {
    out << "bucket,slot,key,count\n";
    for_each([&](uint64_t b, uint32_t s, uint64_t key, uint64_t count) {
        out << b << ',' << s << ',' << key << ',' << count << '\n';
    });
}

}  // namespace counterpools
