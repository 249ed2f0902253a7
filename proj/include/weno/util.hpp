#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; big-endian hosts are unsupported");

namespace weno {

// CRC-32 (IEEE 802.3, reflected), used by the dataset and checkpoint containers.
std::uint32_t crc32(const void* data, std::size_t len, std::uint32_t seed = 0);

// Formats a shape like [50, 64] for error messages.
std::string shape_str(std::span<const long> shape);

// Locale-independent float formatting ('.' decimal, %.9g) for CSV output.
std::string format_g9(double v);

// Reads an entire file; throws std::runtime_error naming the path on failure.
std::vector<std::uint8_t> read_file(const std::string& path);

// Writes a buffer to path via a temporary + rename so readers never see a
// partially written file.
void write_file_atomic(const std::string& path, const void* data, std::size_t len);

inline void append_bytes(std::vector<std::uint8_t>& out, const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out.insert(out.end(), b, b + n);
}

template <typename T>
void append_pod(std::vector<std::uint8_t>& out, const T& v) {
    append_bytes(out, &v, sizeof(T));
}

}  // namespace weno
