#pragma once

// Little-endian helpers shared by the table cache formats.

#include <array>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <istream>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>

namespace counterpools::detail {

template <typename T>
void write_le(std::ostream& out, T value) {
    std::array<char, sizeof(T)> buf{};
    for (size_t b = 0; b < sizeof(T); ++b) {
        buf[b] = static_cast<char>((static_cast<uint64_t>(value) >> (8 * b)) & 0xFF);
    }
    out.write(buf.data(), buf.size());
}

template <typename T>
T read_le(std::istream& in, const char* what) {
    std::array<unsigned char, sizeof(T)> buf{};
    in.read(reinterpret_cast<char*>(buf.data()), buf.size());
    if (in.gcount() != static_cast<std::streamsize>(buf.size())) {
        throw std::runtime_error(std::string("truncated ") + what);
    }
    uint64_t v = 0;
    for (size_t b = 0; b < sizeof(T); ++b) {
        v |= static_cast<uint64_t>(buf[b]) << (8 * b);
    }
    return static_cast<T>(v);
}

inline void expect_magic(std::istream& in, const char (&magic)[5], const char* what) {
    char got[4] = {};
    in.read(got, 4);
    if (in.gcount() != 4 || std::string(got, 4) != std::string(magic, 4)) {
        throw std::runtime_error(std::string("bad magic in ") + what);
    }
}

inline std::optional<std::filesystem::path> table_cache_dir() {
    const char* dir = std::getenv("COUNTERPOOLS_TABLE_DIR");
    if (dir == nullptr || *dir == '\0') return std::nullopt;
    return std::filesystem::path(dir);
}

}  // namespace counterpools::detail
