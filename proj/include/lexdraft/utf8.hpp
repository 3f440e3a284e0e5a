#pragma once

#include <string>
#include <string_view>

namespace lexdraft::utf8 {

// Strict decoding: rejects overlong forms, surrogates and truncated input.
// Throws Error(kInvalidEncoding).
std::u32string decode(std::string_view bytes);

bool is_valid(std::string_view bytes);

std::string encode(std::u32string_view text);
std::string encode(char32_t c);

// CJK unified ideographs (basic block, extension A, compatibility, SIP).
bool is_cjk(char32_t c);

bool is_space(char32_t c);

}  // namespace lexdraft::utf8
