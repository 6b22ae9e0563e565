#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

namespace counterpools {

/// Thrown when a stars-and-bars count does not fit into 64 bits.
class RangeError : public std::range_error {
public:
    using std::range_error::range_error;
};

/// Thrown when an argument violates an operation's precondition.
class ContractError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// k non-negative parts summing exactly to `budget`.
struct SizePartition {
    std::vector<uint32_t> parts;
    uint32_t budget = 0;

    bool valid() const noexcept;
    friend bool operator==(const SizePartition&, const SizePartition&) = default;
};

using ConfigNumber = uint64_t;

/// Number of k-part non-negative integer sequences summing to n, i.e. C(n+k-1, k-1).
/// Throws RangeError when the result exceeds 64 bits and ContractError for k == 0.
uint64_t snb(uint32_t n, uint32_t k);

/// Prefix sums of stars-and-bars counts used to rank and unrank partitions in
/// O(k) and O(n+k) time.
///
/// at(a, b, c) = sum_{j=0}^{c-1} snb(a - j, b), for a in [0, n], b in [1, k],
/// c in [0, a + 1]. The b index is the number of bins left after the first part
/// has been removed, so ranking a k-part partition reads row b = k - 1.
/// at(a, b, a + 1) = snb(a, b + 1) is stored as well so the unranking scan needs
/// no bounds check.
class SnbTable {
public:
    SnbTable() = default;
    SnbTable(uint32_t n, uint32_t k);

    uint32_t max_budget() const noexcept { return n_; }
    uint32_t max_parts() const noexcept { return k_; }

    uint64_t at(uint32_t a, uint32_t b, uint32_t c) const noexcept {
        return entries_[index(a, b, c)];
    }

    /// Lexicographic rank of `parts` among all partitions of `budget` into
    /// parts.size() parts.
    ConfigNumber encode(std::span<const uint32_t> parts, uint32_t budget) const;
    ConfigNumber encode(const SizePartition& p) const { return encode(p.parts, p.budget); }

    /// Inverse of encode; writes k parts into `out`.
    void decode(ConfigNumber c, uint32_t budget, std::span<uint32_t> out) const;
    SizePartition decode(ConfigNumber c, uint32_t budget, uint32_t k) const;

    std::span<const uint64_t> raw() const noexcept { return entries_; }
    /// Size of the cache file written by save().
    size_t serialized_bytes() const noexcept { return 4 + 1 + 2 + 2 + 8 * entries_.size(); }

    /// Binary cache: "SNBT", version byte, n and k as u16 LE, then raw() as u64 LE.
    void save(const std::filesystem::path& path) const;
    static SnbTable load(const std::filesystem::path& path);

    friend bool operator==(const SnbTable&, const SnbTable&) = default;

private:
    size_t index(uint32_t a, uint32_t b, uint32_t c) const noexcept {
        return (static_cast<size_t>(a) * k_ + (b - 1)) * (n_ + 2) + c;
    }

    uint32_t n_ = 0;
    uint32_t k_ = 0;
    std::vector<uint64_t> entries_;
};

/// Returns the table for (n, k), loading it from COUNTERPOOLS_TABLE_DIR when
/// that variable is set (and writing it there on a miss).
SnbTable load_or_build_snb_table(uint32_t n, uint32_t k);

}  // namespace counterpools
