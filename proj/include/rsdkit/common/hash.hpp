#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace rsdkit {

// 64-bit FNV-1a; stable across platforms, used for config hashes.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

// SplitMix64 finalizer: derives independent stream seeds from a master seed.
std::uint64_t mix_seed(std::uint64_t master, std::uint64_t stream);
std::uint64_t mix_seed(std::uint64_t master, std::string_view stream);

}  // namespace rsdkit
