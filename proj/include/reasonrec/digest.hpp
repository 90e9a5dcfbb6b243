#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace reasonrec {

// SHA-256 of the input bytes.
std::array<std::uint8_t, 32> sha256(std::string_view data);

// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);

// First 8 bytes of the SHA-256 as a big-endian integer; used to seed
// deterministic per-subject random streams.
std::uint64_t digest_u64(std::string_view data);

}  // namespace reasonrec
