#include "counterpools/snb.hpp"

#include <fstream>
#include <limits>
#include <numeric>
#include <string>

#include "binary_io.hpp"

namespace counterpools {

namespace {
constexpr uint8_t kSnbTableVersion = 1;
}

bool SizePartition::valid() const noexcept {
    if (parts.empty()) return false;
    uint64_t sum = 0;
    for (auto p : parts) sum += p;
    return sum == budget;
}

uint64_t snb(uint32_t n, uint32_t k) {
    if (k == 0) throw ContractError("snb: k must be positive");
    // C(n+k-1, k-1) built as a product of consecutive binomials; every
    // intermediate quotient is exact.
    unsigned __int128 result = 1;
    for (uint32_t i = 1; i < k; ++i) {
        result = result * (static_cast<unsigned __int128>(n) + i) / i;
        if (result > std::numeric_limits<uint64_t>::max()) {
            throw RangeError("snb(" + std::to_string(n) + ", " + std::to_string(k) +
                             ") exceeds 64 bits");
        }
    }
    return static_cast<uint64_t>(result);
}

SnbTable::SnbTable(uint32_t n, uint32_t k) : n_(n), k_(k) {
    if (n == 0 || k == 0) throw ContractError("SnbTable: n and k must be positive");
    if (n > std::numeric_limits<uint16_t>::max() || k > std::numeric_limits<uint16_t>::max()) {
        throw ContractError("SnbTable: dimensions must fit 16 bits");
    }
    entries_.assign(static_cast<size_t>(n + 1) * k * (n + 2), 0);
    for (uint32_t a = 0; a <= n; ++a) {
        for (uint32_t b = 1; b <= k; ++b) {
            uint64_t acc = 0;
            for (uint32_t c = 1; c <= a + 1; ++c) {
                const uint64_t term = snb(a - (c - 1), b);
                if (acc > std::numeric_limits<uint64_t>::max() - term) {
                    throw RangeError("SnbTable: prefix sum exceeds 64 bits");
                }
                acc += term;
                entries_[index(a, b, c)] = acc;
            }
        }
    }
}

ConfigNumber SnbTable::encode(std::span<const uint32_t> parts, uint32_t budget) const {
    if (parts.empty()) throw ContractError("encode: empty partition");
    if (budget > n_ || parts.size() > static_cast<size_t>(k_) + 1) {
        throw ContractError("encode: partition exceeds table dimensions");
    }
    const auto k = static_cast<uint32_t>(parts.size());
    ConfigNumber rank = 0;
    uint32_t rem = budget;
    for (uint32_t idx = 0; idx + 1 < k; ++idx) {
        const uint32_t x = parts[idx];
        if (x > rem) throw ContractError("encode: parts exceed budget");
        rank += at(rem, k - 1 - idx, x);
        rem -= x;
    }
    if (parts[k - 1] != rem) throw ContractError("encode: parts do not sum to budget");
    return rank;
}

void SnbTable::decode(ConfigNumber c, uint32_t budget, std::span<uint32_t> out) const {
    const auto k = static_cast<uint32_t>(out.size());
    if (k == 0) throw ContractError("decode: k must be positive");
    if (budget > n_ || k > k_ + 1) throw ContractError("decode: exceeds table dimensions");
    const uint64_t limit = k == 1 ? 1 : at(budget, k - 1, budget + 1);
    if (c >= limit) throw ContractError("decode: configuration number out of range");

    uint32_t rem = budget;
    for (uint32_t idx = 0; idx + 1 < k; ++idx) {
        const uint32_t b = k - 1 - idx;
        uint32_t rho = 0;
        while (at(rem, b, rho + 1) <= c) ++rho;
        c -= at(rem, b, rho);
        out[idx] = rho;
        rem -= rho;
    }
    out[k - 1] = rem;
}

SizePartition SnbTable::decode(ConfigNumber c, uint32_t budget, uint32_t k) const {
    SizePartition p{std::vector<uint32_t>(k), budget};
    decode(c, budget, p.parts);
    return p;
}

void SnbTable::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write("SNBT", 4);
    detail::write_le<uint8_t>(out, kSnbTableVersion);
    detail::write_le<uint16_t>(out, static_cast<uint16_t>(n_));
    detail::write_le<uint16_t>(out, static_cast<uint16_t>(k_));
    for (uint64_t e : entries_) detail::write_le<uint64_t>(out, e);
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

SnbTable SnbTable::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    detail::expect_magic(in, "SNBT", "snb table cache");
    if (detail::read_le<uint8_t>(in, "snb table version") != kSnbTableVersion) {
        throw std::runtime_error("unsupported snb table version");
    }
    SnbTable t;
    t.n_ = detail::read_le<uint16_t>(in, "snb table header");
    t.k_ = detail::read_le<uint16_t>(in, "snb table header");
    t.entries_.resize(static_cast<size_t>(t.n_ + 1) * t.k_ * (t.n_ + 2));
    for (auto& e : t.entries_) e = detail::read_le<uint64_t>(in, "snb table entries");
    return t;
}

SnbTable load_or_build_snb_table(uint32_t n, uint32_t k) {
    auto dir = detail::table_cache_dir();
    if (!dir) return SnbTable(n, k);
    const auto path = *dir / ("snb_" + std::to_string(n) + "_" + std::to_string(k) + ".bin");
    if (std::filesystem::exists(path)) {
        auto t = SnbTable::load(path);
        if (t.max_budget() == n && t.max_parts() == k) return t;
    }
    SnbTable t(n, k);
    std::filesystem::create_directories(*dir);
    t.save(path);
    return t;
}

}  // namespace counterpools
