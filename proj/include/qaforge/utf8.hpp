#pragma once

#include <cstddef>
#include <optional>
#include <string_view>

namespace qaforge::utf8 {

inline bool is_continuation(char c) { return (static_cast<unsigned char>(c) & 0xC0) == 0x80; }

// Code points in text[0, byte_offset).
inline std::size_t char_offset(std::string_view text, std::size_t byte_offset) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < byte_offset && i < text.size(); ++i) {
        if (!is_continuation(text[i])) ++n;
    }
    return n;
}

// Byte offset of the char_offset-th code point; nullopt past the end.
inline std::optional<std::size_t> byte_offset(std::string_view text, std::size_t char_offset) {
    std::size_t seen = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (is_continuation(text[i])) continue;
        if (seen == char_offset) return i;
        ++seen;
    }
    if (seen == char_offset) return text.size();
    return std::nullopt;
}

}  // namespace qaforge::utf8
