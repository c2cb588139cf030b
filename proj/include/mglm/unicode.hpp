#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace mglm {

// Decodes UTF-8; invalid byte sequences decode to U+FFFD one byte at a time.
std::vector<char32_t> utf8_decode(std::string_view s);

void utf8_append(std::string& out, char32_t cp);
std::string utf8_encode(char32_t cp);
std::string utf8_encode(const std::vector<char32_t>& cps);

// Unicode White_Space property (full list, hardcoded).
bool is_unicode_space(char32_t cp);

// ASCII punctuation plus common CJK/fullwidth punctuation.
bool is_punctuation(char32_t cp);

// Canonical composition for the common Latin precomposed block
// (base letter + combining grave/acute/circumflex/tilde/diaeresis/ring/
// cedilla/caron). Text outside this subset passes through unchanged; input
// that is already composed is returned as-is.
std::string normalize_nfc(std::string_view s);

}  // namespace mglm
