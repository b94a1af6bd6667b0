#ifndef MVLAB_COMMON_HPP
#define MVLAB_COMMON_HPP

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#define MV_CHECK(cond, msg)                                      \
    do {                                                         \
        if (!(cond)) {                                           \
            throw std::runtime_error(std::string("mvlab: ") + (msg)); \
        }                                                        \
    } while (0)

#define MV_CHECK_ARG(cond, msg)                                  \
    do {                                                         \
        if (!(cond)) {                                           \
            throw std::invalid_argument(std::string("mvlab: ") + (msg)); \
        }                                                        \
    } while (0)

namespace mvlab {

// FNV-1a, used for content digests and per-record seed derivation. The raw
// byte form carries a distinct name: a string literal would otherwise decay
// to const void* and silently bind a seed argument as the length.
inline std::uint64_t fnv1a64_bytes(const void* data, std::size_t len,
                                   std::uint64_t seed = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t seed = 0xcbf29ce484222325ull) {
    return fnv1a64_bytes(s.data(), s.size(), seed);
}

}  // namespace mvlab

#endif  // MVLAB_COMMON_HPP
