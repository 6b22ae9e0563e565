#include <map>
#include <set>
#include <sstream>

#include "counterpools/histogram.hpp"
#include "counterpools/workload.hpp"
#include "doctest.h"

using namespace counterpools;

namespace {

HistogramOptions small_table(uint32_t bucket_bits, uint64_t seed = 1) {
    HistogramOptions o;
    o.bucket_bits = bucket_bits;
    o.key_bits = 32;
    o.seed = seed;
    return o;
}

}  // namespace

TEST_CASE("key permutation is a bijection") {
    for (uint32_t bits : {1U, 3U, 10U, 12U}) {
        KeyPermutation p(bits, 99);
        std::set<uint64_t> images;
        for (uint64_t x = 0; x < (uint64_t{1} << bits); ++x) {
            const uint64_t y = p.forward(x);
            REQUIRE(y < (uint64_t{1} << bits));
            REQUIRE(p.inverse(y) == x);
            images.insert(y);
        }
        CHECK(images.size() == (size_t{1} << bits));
    }
    for (uint32_t bits : {32U, 48U, 64U}) {
        KeyPermutation p(bits, 7);
        std::mt19937_64 rng(bits);
        for (int i = 0; i < 10000; ++i) {
            const uint64_t x = rng() & (bits == 64 ? ~uint64_t{0} : (uint64_t{1} << bits) - 1);
            REQUIRE(p.inverse(p.forward(x)) == x);
        }
    }
    CHECK_THROWS_AS(KeyPermutation(0, 1), ContractError);
}

TEST_CASE("alternate bucket is an involution and never the same bucket") {
    PooledCuckooTable t(small_table(10));
    std::mt19937_64 rng(5);
    for (int i = 0; i < 10000; ++i) {
        const uint64_t key = rng() & 0xffffffffULL;
        const uint64_t b = t.primary_bucket(key);
        const uint64_t fp = t.fingerprint(key);
        const uint64_t alt = t.alternate_bucket(b, fp);
        REQUIRE(alt < t.buckets());
        REQUIRE(alt != b);
        REQUIRE(t.alternate_bucket(alt, fp) == b);
    }
}

TEST_CASE("basic counting") {
    PooledCuckooTable t(small_table(8));
    CHECK(t.query(42) == 0);
    CHECK(t.increment(42).ok);
    CHECK(t.occupied() == 1);
    CHECK(t.load_factor() == doctest::Approx(1.0 / (256 * 4)));
    CHECK(t.query(42) == 1);
    CHECK(t.query(43) == 0);
    for (int i = 1; i < 1000; ++i) t.increment(42);
    CHECK(t.query(42) == 1000);
    CHECK(t.occupied() == 1);
    CHECK(t.query(uint64_t{1} << 40) == 0);
    CHECK_THROWS_AS(t.increment(uint64_t{1} << 40), ContractError);
}

TEST_CASE("slot accounting for the default geometry") {
    PooledCuckooTable t(HistogramOptions{});
    CHECK(t.buckets() == (size_t{1} << 17));
    CHECK(t.fingerprint_bits() == 16);
    CHECK(t.bits_per_slot() == doctest::Approx(36.0));
    CHECK(PooledCuckooTable::load_at_budget(8, 10) == doctest::Approx(0.8));
    CHECK(PooledCuckooTable::load_at_budget(6, 10) == doctest::Approx(0.6));
    CHECK(PooledCuckooTable::load_at_budget(4.5, 10) == doctest::Approx(0.45));
    CHECK(PooledCuckooTable::load_at_budget(t.bits_per_slot() / 8, 10) == doctest::Approx(0.45));
}

TEST_CASE("zipf counts stay exact below 85% load") {
    const uint32_t bucket_bits = 12;
    const size_t slots = (size_t{1} << bucket_bits) * 4;
    // Universe sized so that the distinct keys fill about 80% of the slots.
    const auto keys = generate_zipf({1.0, 1 << 16, 40'000, 11});
    std::map<uint64_t, uint64_t> oracle;
    for (uint64_t k : keys) ++oracle[k];
    REQUIRE(oracle.size() <= slots * 85 / 100);

    PooledCuckooTable t(small_table(bucket_bits, 3));
    for (uint64_t k : keys) REQUIRE(t.increment(k).ok);
    CHECK(t.occupied() == oracle.size());
    for (const auto& [k, c] : oracle) REQUIRE(t.query(k) == c);

    std::map<uint64_t, uint64_t> dumped;
    t.for_each([&](uint64_t, uint32_t, uint64_t key, uint64_t count) {
        REQUIRE(dumped.emplace(key, count).second);
    });
    CHECK(dumped == oracle);

    std::ostringstream csv;
    t.dump_csv(csv);
    std::istringstream lines(csv.str());
    std::string line;
    std::getline(lines, line);
    CHECK(line == "bucket,slot,key,count");
    size_t rows = 0;
    uint64_t total = 0;
    while (std::getline(lines, line)) {
        ++rows;
        total += std::stoull(line.substr(line.rfind(',') + 1));
    }
    CHECK(rows == oracle.size());
    CHECK(total == keys.size());
}

TEST_CASE("a growing counter migrates instead of losing precision") {
    PooledCuckooTable t(small_table(4));
    std::map<uint64_t, uint64_t> oracle;
    for (uint64_t k = 1; k <= 40; ++k) {
        REQUIRE(t.increment(k, 1 << 12).ok);
        oracle[k] = 1 << 12;
    }
    std::map<uint64_t, std::vector<uint64_t>> by_bucket;
    t.for_each([&](uint64_t b, uint32_t, uint64_t k, uint64_t) { by_bucket[b].push_back(k); });
    uint64_t hot = 0;
    for (const auto& entry : by_bucket) {
        if (entry.second.size() == 4) hot = entry.second.front();
    }
    REQUIRE(hot != 0);

    // Three 13-bit neighbours leave 25 bits; a 41-bit count cannot stay.
    for (int i = 0; i < 40; ++i) {
        REQUIRE(t.increment(hot, uint64_t{1} << i).ok);
        oracle[hot] += uint64_t{1} << i;
        REQUIRE(t.query(hot) == oracle[hot]);
    }
    for (const auto& [k, c] : oracle) CHECK(t.query(k) == c);
    size_t mates = 0;
    uint64_t end = 0;
    t.for_each([&](uint64_t b, uint32_t, uint64_t k, uint64_t) {
        if (k == hot) end = b;
    });
    t.for_each([&](uint64_t b, uint32_t, uint64_t k, uint64_t) { mates += b == end && k != hot; });
    CHECK(mates <= 1);
    CHECK(t.occupied() == 40);
}

TEST_CASE("an overfull table reports the entries it could not place") {
    HistogramOptions o = small_table(1);
    o.max_kicks = 50;
    PooledCuckooTable t(o);
    std::map<uint64_t, uint64_t> oracle;
    std::vector<HistogramEntry> lost;
    for (uint64_t k = 1; k <= 20; ++k) {
        auto r = t.increment(k, k);
        oracle[k] = k;
        if (!r.ok) {
            CHECK_FALSE(r.unplaced.empty());
            lost.insert(lost.end(), r.unplaced.begin(), r.unplaced.end());
        }
    }
    CHECK(t.occupied() <= 8);
    CHECK_FALSE(lost.empty());
    // Everything is either still in the table with its exact count or reported.
    std::map<uint64_t, uint64_t> seen;
    t.for_each([&](uint64_t, uint32_t, uint64_t key, uint64_t count) { seen[key] = count; });
    for (const auto& e : lost) seen[e.key] = e.count;
    CHECK(seen == oracle);
}
