#pragma once

// Independent reference implementations used only by the tests. Nothing in
// here calls into the library's ranking tables or pool code.

#include <bit>
#include <cstdint>
#include <functional>
#include <map>
#include <vector>

namespace oracle {

// Counts k-part compositions of n by dynamic programming over the first part.
inline uint64_t count_partitions(uint32_t n, uint32_t k) {
    std::vector<std::vector<uint64_t>> dp(k + 1, std::vector<uint64_t>(n + 1, 0));
    for (uint32_t a = 0; a <= n; ++a) dp[1][a] = 1;
    for (uint32_t b = 2; b <= k; ++b) {
        for (uint32_t a = 0; a <= n; ++a) {
            for (uint32_t x = 0; x <= a; ++x) dp[b][a] += dp[b - 1][a - x];
        }
    }
    return dp[k][n];
}

// All k-part compositions of n, in lexicographic order.
inline std::vector<std::vector<uint32_t>> enumerate_partitions(uint32_t n, uint32_t k) {
    std::vector<std::vector<uint32_t>> out;
    std::vector<uint32_t> cur(k, 0);
    std::function<void(uint32_t, uint32_t)> rec = [&](uint32_t idx, uint32_t rem) {
        if (idx + 1 == k) {
            cur[idx] = rem;
            out.push_back(cur);
            return;
        }
        for (uint32_t x = 0; x <= rem; ++x) {
            cur[idx] = x;
            rec(idx + 1, rem - x);
        }
    };
    rec(0, n);
    return out;
}

// Straight recursive ranking: partitions starting with a smaller first part
// precede this one.
inline uint64_t recursive_encode(const std::vector<uint32_t>& parts, uint32_t n) {
    if (parts.size() == 1) return 0;
    const auto k = static_cast<uint32_t>(parts.size());
    uint64_t xi = 0;
    for (uint32_t j = 0; j < parts[0]; ++j) xi += count_partitions(n - j, k - 1);
    std::vector<uint32_t> rest(parts.begin() + 1, parts.end());
    return xi + recursive_encode(rest, n - parts[0]);
}

// Model of a pool that keeps k exact integers and recomputes canonical
// widths. Layout-independent: failure is decided from total width demand.
struct PoolModel {
    uint32_t n, k, s, i;
    std::vector<uint64_t> values;

    PoolModel(uint32_t n_, uint32_t k_, uint32_t s_, uint32_t i_)
        : n(n_), k(k_), s(s_), i(i_), values(k_, 0) {}

    uint32_t canonical(uint64_t v) const {
        const auto bw = static_cast<uint32_t>(std::bit_width(v));
        if (bw <= s) return s;
        return s + i * ((bw - s + i - 1) / i);
    }

    // Leftmost counter width implied by the others' canonical widths.
    int64_t leftmost_width(const std::vector<uint64_t>& vals) const {
        int64_t used = 0;
        for (uint32_t j = 0; j + 1 < k; ++j) used += canonical(vals[j]);
        return static_cast<int64_t>(n) - used;
    }

    bool feasible(const std::vector<uint64_t>& vals) const {
        const int64_t lw = leftmost_width(vals);
        const int64_t lm_min = s + (n - k * s) % i;
        return lw >= lm_min && lw >= std::bit_width(vals[k - 1]);
    }

    // Returns false (and leaves the state unchanged) on pool failure.
    bool apply(uint32_t j, int64_t w) {
        auto next = values;
        const __int128 nv = static_cast<__int128>(values[j]) + w;
        if (nv < 0 || nv > static_cast<__int128>(UINT64_MAX)) return false;
        next[j] = static_cast<uint64_t>(nv);
        if (!feasible(next)) return false;
        values = std::move(next);
        return true;
    }

    std::vector<uint32_t> widths() const {
        std::vector<uint32_t> w(k);
        for (uint32_t j = 0; j + 1 < k; ++j) w[j] = canonical(values[j]);
        w[k - 1] = static_cast<uint32_t>(leftmost_width(values));
        return w;
    }
};

// Exact frequency oracle kept as an ordered map so it shares no code path
// with hash-based structures under test.
using CountMap = std::map<uint64_t, uint64_t>;

}  // namespace oracle
