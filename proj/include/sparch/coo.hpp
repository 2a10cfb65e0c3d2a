#pragma once

#include <cstdint>

namespace sparch {

// One sparse element in flight through the multiply/merge pipeline:
// packed 64-bit coordinate (row in the high half, col in the low half)
// plus a double value, 16 bytes total. Key order == (row, col) lex order.
struct CooElement {
    std::uint64_t key = 0;
    double value = 0.0;

    static constexpr CooElement make(std::uint32_t row, std::uint32_t col, double v) {
        return {(static_cast<std::uint64_t>(row) << 32) | col, v};
    }
    constexpr std::uint32_t row() const { return static_cast<std::uint32_t>(key >> 32); }
    constexpr std::uint32_t col() const { return static_cast<std::uint32_t>(key); }

    friend constexpr bool operator==(const CooElement&, const CooElement&) = default;
};

inline constexpr bool key_less(const CooElement& a, const CooElement& b) { return a.key < b.key; }

inline constexpr std::size_t kCooElementBytes = 16;  // 8 B packed index + 8 B value

}  // namespace sparch
