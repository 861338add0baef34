#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tneda/error.hpp"

namespace tneda {

/// Fixed-length binary solution vector x = (x_1, ..., x_N), one byte per bit.
class BitString {
public:
    BitString() = default;
    explicit BitString(std::size_t n, std::uint8_t fill = 0) : bits_(n, fill ? 1 : 0) {}
    BitString(std::initializer_list<int> bits) {
        bits_.reserve(bits.size());
        for (int b : bits) bits_.push_back(b ? 1 : 0);
    }

    /// Parses a string of '0'/'1' characters, first character is bit 0.
    static BitString from_string(std::string_view s) {
        BitString out(s.size());
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (s[i] != '0' && s[i] != '1') throw ParseError("bit string contains '" + std::string(1, s[i]) + "'");
            out.bits_[i] = static_cast<std::uint8_t>(s[i] - '0');
        }
        return out;
    }

    /// Bit i is bit (n-1-i) of `code`, so increasing codes enumerate strings lexicographically.
    static BitString from_index(std::uint64_t code, std::size_t n) {
        BitString out(n);
        for (std::size_t i = 0; i < n; ++i) out.bits_[i] = static_cast<std::uint8_t>((code >> (n - 1 - i)) & 1U);
        return out;
    }

    std::size_t size() const noexcept { return bits_.size(); }
    bool empty() const noexcept { return bits_.empty(); }

    std::uint8_t operator[](std::size_t i) const noexcept { return bits_[i]; }
    void set(std::size_t i, bool v) noexcept { bits_[i] = v ? 1 : 0; }
    void flip(std::size_t i) noexcept { bits_[i] ^= 1U; }

    std::span<const std::uint8_t> bits() const noexcept { return bits_; }

    std::size_t count() const noexcept {
        std::size_t c = 0;
        for (auto b : bits_) c += b;
        return c;
    }

    std::string to_string() const {
        std::string s(bits_.size(), '0');
        for (std::size_t i = 0; i < bits_.size(); ++i) s[i] = static_cast<char>('0' + bits_[i]);
        return s;
    }

    friend bool operator==(const BitString&, const BitString&) = default;
    friend auto operator<=>(const BitString&, const BitString&) = default;

private:
    std::vector<std::uint8_t> bits_;
};

struct BitStringHash {
    std::size_t operator()(const BitString& x) const noexcept {
        std::uint64_t h = 0xcbf29ce484222325ULL ^ x.size();
        std::uint64_t word = 0;
        int filled = 0;
        for (auto b : x.bits()) {
            word = (word << 1) | b;
            if (++filled == 64) {
                h = (h ^ word) * 0x100000001b3ULL;
                h ^= h >> 29;
                word = 0;
                filled = 0;
            }
        }
        h = (h ^ word) * 0x100000001b3ULL;
        h ^= h >> 32;
        return static_cast<std::size_t>(h);
    }
};

} // namespace tneda

template <>
struct std::hash<tneda::BitString> : tneda::BitStringHash {};
