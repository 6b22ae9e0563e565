#include "counterpools/pool.hpp"

#include <bit>
#include <charconv>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>

#include "binary_io.hpp"

namespace counterpools {

namespace {

constexpr uint64_t shl(uint64_t x, uint32_t by) noexcept { return by >= 64 ? 0 : x << by; }
constexpr uint64_t shr(uint64_t x, uint32_t by) noexcept { return by >= 64 ? 0 : x >> by; }
constexpr uint64_t low_mask(uint32_t bits) noexcept {
    return bits >= 64 ? ~uint64_t{0} : (uint64_t{1} << bits) - 1;
}

// Decodes configuration c into counter offsets (k + 1 values, last == n).
void fill_offsets(const PoolConfig& cfg, const SnbTable& ranks, uint64_t c,
                  std::span<uint32_t> multiples, uint8_t* out) {
    ranks.decode(c, cfg.budget(), multiples);
    // multiples are leftmost-first: multiples[0] belongs to counter k-1.
    uint32_t offset = 0;
    out[0] = 0;
    for (uint32_t j = 0; j + 1 < cfg.k; ++j) {
        offset += cfg.s + cfg.i * multiples[cfg.k - 1 - j];
        out[j + 1] = static_cast<uint8_t>(offset);
    }
    out[cfg.k] = static_cast<uint8_t>(cfg.n);
}

}  // namespace

uint32_t PoolConfig::config_storage_bits() const {
    const uint64_t count = configuration_count();
    if (count <= (uint64_t{1} << 8)) return 8;
    if (count <= (uint64_t{1} << 16)) return 16;
    return 32;
}

void PoolConfig::validate() const {
    if (n < 1 || n > 64) throw ContractError("pool width must be in [1, 64]");
    if (k < 1) throw ContractError("pool needs at least one counter");
    if (i < 1) throw ContractError("growth granularity must be positive");
    if (static_cast<uint64_t>(k) * s > n) throw ContractError("k * s exceeds the pool width");
}

std::string PoolConfig::name() const {
    return std::to_string(n) + "," + std::to_string(k) + "," + std::to_string(s) + "," +
           std::to_string(i);
}

PoolConfig PoolConfig::parse(std::string_view text) {
    if (text == "default") return presets::k64_4_0_1;
    std::array<uint32_t, 4> v{};
    size_t field = 0;
    const char* p = text.data();
    const char* end = text.data() + text.size();
    while (field < 4) {
        auto [next, ec] = std::from_chars(p, end, v[field]);
        if (ec != std::errc{}) break;
        ++field;
        p = next;
        if (p == end) break;
        if (*p != ',') { field = 0; break; }
        ++p;
    }
    if (field != 4 || p != end) {
        throw ContractError("pool config must be \"n,k,s,i\", got \"" + std::string(text) + "\"");
    }
    PoolConfig cfg{v[0], v[1], v[2], v[3]};
    cfg.validate();
    return cfg;
}

// ---------------------------------------------------------------------------
// OffsetTable

void OffsetTable::init_layout(const PoolConfig& config) {
    config.validate();
    const uint64_t count = config.configuration_count();
    if (count > kMaxEntries) {
        throw RangeError("offset table for " + config.name() + " would need " +
                         std::to_string(count) + " entries");
    }
    config_ = config;
    count_ = count;
    stride_ = config.k + 1;
    field_bits_ = static_cast<uint32_t>(std::bit_width(config.n - config.leftmost_min_width()));
    offsets_.assign(count_ * stride_, 0);
}

OffsetTable::OffsetTable(const PoolConfig& config, const SnbTable& ranks, Execution exec) {
    init_layout(config);
    const auto count = static_cast<int64_t>(count_);
    if (exec == Execution::Parallel) {
#pragma omp parallel
        {
            std::vector<uint32_t> multiples(config.k);
#pragma omp for schedule(static)
            for (int64_t c = 0; c < count; ++c) {
                fill_offsets(config, ranks, static_cast<uint64_t>(c), multiples,
                             offsets_.data() + c * stride_);
            }
        }
    } else {
        std::vector<uint32_t> multiples(config.k);
        for (int64_t c = 0; c < count; ++c) {
            fill_offsets(config, ranks, static_cast<uint64_t>(c), multiples,
                         offsets_.data() + c * stride_);
        }
    }
}

uint32_t OffsetTable::packed_entry(uint64_t c) const {
    if ((config_.k - 1) * field_bits_ > 32) {
        throw RangeError("offsets of " + config_.name() + " do not pack into 32 bits");
    }
    const auto e = entry(c);
    uint32_t packed = 0;
    for (uint32_t j = 1; j < config_.k; ++j) {
        packed |= static_cast<uint32_t>(e[j]) << ((j - 1) * field_bits_);
    }
    return packed;
}

size_t OffsetTable::serialized_bytes() const noexcept { return 4 + 4 * 2 + 4 * count_; }

void OffsetTable::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write("CPLT", 4);
    for (uint32_t f : {config_.n, config_.k, config_.s, config_.i}) {
        detail::write_le<uint16_t>(out, static_cast<uint16_t>(f));
    }
    for (size_t c = 0; c < count_; ++c) detail::write_le<uint32_t>(out, packed_entry(c));
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

OffsetTable OffsetTable::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    detail::expect_magic(in, "CPLT", "offset table cache");
    PoolConfig cfg;
    cfg.n = detail::read_le<uint16_t>(in, "offset table header");
    cfg.k = detail::read_le<uint16_t>(in, "offset table header");
    cfg.s = detail::read_le<uint16_t>(in, "offset table header");
    cfg.i = detail::read_le<uint16_t>(in, "offset table header");

    OffsetTable t;
    t.init_layout(cfg);
    const uint32_t field_mask = (uint32_t{1} << t.field_bits_) - 1;
    for (size_t c = 0; c < t.count_; ++c) {
        const uint32_t packed = detail::read_le<uint32_t>(in, "offset table entries");
        uint8_t* e = t.offsets_.data() + c * t.stride_;
        e[0] = 0;
        for (uint32_t j = 1; j < cfg.k; ++j) {
            e[j] = static_cast<uint8_t>((packed >> ((j - 1) * t.field_bits_)) & field_mask);
        }
        e[cfg.k] = static_cast<uint8_t>(cfg.n);
    }
    return t;
}

OffsetTable load_or_build_offset_table(const PoolConfig& config, const SnbTable& ranks) {
    auto dir = detail::table_cache_dir();
    if (!dir) return OffsetTable(config, ranks);
    const auto path = *dir / ("offsets_" + std::to_string(config.n) + "_" +
                              std::to_string(config.k) + "_" + std::to_string(config.s) + "_" +
                              std::to_string(config.i) + ".bin");
    if (std::filesystem::exists(path)) {
        auto t = OffsetTable::load(path);
        if (t.config() == config) return t;
    }
    OffsetTable t(config, ranks);
    if ((config.k - 1) * t.packed_field_bits() <= 32) {
        std::filesystem::create_directories(*dir);
        t.save(path);
    }
    return t;
}

// ---------------------------------------------------------------------------
// PoolCodec

PoolCodec::PoolCodec(const PoolConfig& config, Execution exec) : config_(config) {
    config_.validate();
    ranks_ = load_or_build_snb_table(std::max<uint32_t>(config_.budget(), 1), config_.k);
    offsets_ = exec == Execution::Parallel && detail::table_cache_dir()
                   ? load_or_build_offset_table(config_, ranks_)
                   : OffsetTable(config_, ranks_, exec);
    // Rank of [budget, 0, ..., 0]: the lexicographically largest partition.
    empty_config_ = static_cast<uint32_t>(offsets_.size() - 1);
}

uint32_t PoolCodec::canonical_width(uint64_t value) const noexcept {
    const auto bw = static_cast<uint32_t>(std::bit_width(value));
    if (bw <= config_.s) return config_.s;
    return config_.s + config_.i * ((bw - config_.s + config_.i - 1) / config_.i);
}

uint32_t PoolCodec::free_bits_for(uint32_t lc_size, uint64_t lc_value) const noexcept {
    const auto required = std::max<uint32_t>(static_cast<uint32_t>(std::bit_width(lc_value)),
                                             config_.leftmost_min_width());
    if (required >= lc_size) return 0;
    return (lc_size - required) / config_.i * config_.i;
}

uint64_t PoolCodec::read(const Pool& pool, uint32_t j) const {
    if (j >= config_.k) throw ContractError("counter index out of range");
    const auto e = offsets_.entry(pool.config);
    return shr(pool.memory, e[j]) & low_mask(e[j + 1] - e[j]);
}

PoolUpdateOutcome PoolCodec::increment(Pool& pool, uint32_t j, int64_t w) const {
    const uint32_t k = config_.k;
    if (j >= k) throw ContractError("counter index out of range");
    const auto e = offsets_.entry(pool.config);
    const uint32_t offset = e[j];
    const uint32_t next_offset = e[j + 1];
    const uint32_t size = next_offset - offset;
    const uint64_t v = shr(pool.memory, offset) & low_mask(size);

    uint64_t nv = 0;
    if (w < 0) {
        const uint64_t dec = uint64_t{0} - static_cast<uint64_t>(w);
        if (dec > v) throw ContractError("increment would make the counter negative");
        nv = v - dec;
    } else {
        if (v > std::numeric_limits<uint64_t>::max() - static_cast<uint64_t>(w)) {
            return PoolUpdateOutcome::PoolFailure;
        }
        nv = v + static_cast<uint64_t>(w);
    }

    const bool leftmost = j + 1 == k;
    const uint32_t new_size = leftmost ? size : canonical_width(nv);
    if (new_size == size) {
        if (std::bit_width(nv) > size) return PoolUpdateOutcome::PoolFailure;
        pool.memory = shl(nv, offset) | (pool.memory & ~shl(low_mask(size), offset));
        return PoolUpdateOutcome::InPlace;
    }

    const int32_t new_bits = static_cast<int32_t>(new_size) - static_cast<int32_t>(size);
    const uint32_t lc_offset = e[k - 1];
    const uint32_t lc_size = config_.n - lc_offset;
    if (new_bits > static_cast<int32_t>(free_bits_for(lc_size, shr(pool.memory, lc_offset)))) {
        return PoolUpdateOutcome::PoolFailure;
    }

    const uint64_t low = pool.memory & low_mask(offset);
    const uint64_t fresh = shl(nv, offset);
    const uint64_t high = shl(shr(pool.memory, next_offset),
                              static_cast<uint32_t>(static_cast<int32_t>(next_offset) + new_bits));
    pool.memory = high | fresh | low;

    std::array<uint32_t, 64> multiples{};
    uint32_t used = 0;
    for (uint32_t c = 0; c + 1 < k; ++c) {
        const uint32_t width = c == j ? new_size : e[c + 1] - e[c];
        const uint32_t m = (width - config_.s) / config_.i;
        multiples[k - 1 - c] = m;
        used += m;
    }
    multiples[0] = config_.budget() - used;
    pool.config = static_cast<uint32_t>(
        ranks_.encode(std::span<const uint32_t>(multiples.data(), k), config_.budget()));
    return PoolUpdateOutcome::Resized;
}

std::vector<uint32_t> PoolCodec::counter_widths(const Pool& pool) const {
    const auto e = offsets_.entry(pool.config);
    std::vector<uint32_t> widths(config_.k);
    for (uint32_t j = 0; j < config_.k; ++j) widths[j] = e[j + 1] - e[j];
    return widths;
}

uint32_t PoolCodec::free_bits(const Pool& pool) const {
    const uint32_t lc_offset = offsets_.entry(pool.config)[config_.k - 1];
    return free_bits_for(config_.n - lc_offset, shr(pool.memory, lc_offset));
}

uint32_t PoolCodec::config_for_widths(std::span<const uint32_t> widths) const {
    if (widths.size() != config_.k) throw ContractError("expected k widths");
    std::vector<uint32_t> multiples(config_.k);
    uint32_t total = 0;
    for (uint32_t j = 0; j < config_.k; ++j) total += widths[j];
    if (total != config_.n) throw ContractError("widths must sum to n");
    uint32_t used = 0;
    for (uint32_t j = 0; j + 1 < config_.k; ++j) {
        if (widths[j] < config_.s || (widths[j] - config_.s) % config_.i != 0) {
            throw ContractError("width is not of the form s + m*i");
        }
        multiples[config_.k - 1 - j] = (widths[j] - config_.s) / config_.i;
        used += multiples[config_.k - 1 - j];
    }
    if (used > config_.budget()) throw ContractError("widths exceed the growth budget");
    multiples[0] = config_.budget() - used;
    return static_cast<uint32_t>(ranks_.encode(multiples, config_.budget()));
}

std::shared_ptr<const PoolCodec> shared_codec(const PoolConfig& config) {
    static std::mutex mu;
    static std::map<std::array<uint32_t, 4>, std::shared_ptr<const PoolCodec>> cache;
    const std::array<uint32_t, 4> key{config.n, config.k, config.s, config.i};
    std::lock_guard lock(mu);
    auto& slot = cache[key];
    if (!slot) slot = std::make_shared<const PoolCodec>(config);
    return slot;
}

// ---------------------------------------------------------------------------
// PoolArray

PoolArray::PoolArray(std::shared_ptr<const PoolCodec> codec, size_t count)
    : codec_(std::move(codec)), words_(count, 0) {
    config_bytes_ = codec_->config().config_storage_bits() / 8;
    const uint32_t empty = codec_->empty_pool().config;
    switch (config_bytes_) {
        case 1: cfg8_.assign(count, static_cast<uint8_t>(empty)); break;
        case 2: cfg16_.assign(count, static_cast<uint16_t>(empty)); break;
        default: cfg32_.assign(count, empty); break;
    }
}

void PoolArray::store(size_t idx, const Pool& p) noexcept {
    words_[idx] = p.memory;
    switch (config_bytes_) {
        case 1: cfg8_[idx] = static_cast<uint8_t>(p.config); break;
        case 2: cfg16_[idx] = static_cast<uint16_t>(p.config); break;
        default: cfg32_[idx] = p.config; break;
    }
}

PoolUpdateOutcome PoolArray::increment(size_t idx, uint32_t j, int64_t w) {
    Pool p = load(idx);
    const auto outcome = codec_->increment(p, j, w);
    if (outcome != PoolUpdateOutcome::PoolFailure) store(idx, p);
    return outcome;
}

size_t PoolArray::memory_bytes() const noexcept {
    const size_t bits_per_pool = codec_->config().n + 8 * config_bytes_;
    return (words_.size() * bits_per_pool + 7) / 8;
}

}  // namespace counterpools
