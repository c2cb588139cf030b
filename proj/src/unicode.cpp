#include "mglm/unicode.hpp"

#include <array>
#include <unordered_map>

namespace mglm {

std::vector<char32_t> utf8_decode(std::string_view s) {
    std::vector<char32_t> out;
    out.reserve(s.size());
    size_t i = 0;
    const size_t n = s.size();
    while (i < n) {
        const unsigned char b0 = static_cast<unsigned char>(s[i]);
        if (b0 < 0x80) {
            out.push_back(b0);
            ++i;
            continue;
        }
        int len = 0;
        char32_t cp = 0;
        if ((b0 & 0xE0) == 0xC0) {
            len = 2;
            cp = b0 & 0x1F;
        } else if ((b0 & 0xF0) == 0xE0) {
            len = 3;
            cp = b0 & 0x0F;
        } else if ((b0 & 0xF8) == 0xF0) {
            len = 4;
            cp = b0 & 0x07;
        } else {
            out.push_back(0xFFFD);
            ++i;
            continue;
        }
        if (i + len > n) {
            out.push_back(0xFFFD);
            ++i;
            continue;
        }
        bool ok = true;
        for (int k = 1; k < len; ++k) {
            const unsigned char bk = static_cast<unsigned char>(s[i + k]);
            if ((bk & 0xC0) != 0x80) {
                ok = false;
                break;
            }
            cp = (cp << 6) | (bk & 0x3F);
        }
        // Reject overlong encodings and surrogates.
        if (ok && ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) ||
                   (len == 4 && cp < 0x10000) || (cp >= 0xD800 && cp <= 0xDFFF) ||
                   cp > 0x10FFFF)) {
            ok = false;
        }
        if (!ok) {
            out.push_back(0xFFFD);
            ++i;
            continue;
        }
        out.push_back(cp);
        i += len;
    }
    return out;
}

void utf8_append(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

std::string utf8_encode(char32_t cp) {
    std::string s;
    utf8_append(s, cp);
    return s;
}

std::string utf8_encode(const std::vector<char32_t>& cps) {
    std::string s;
    for (char32_t cp : cps) utf8_append(s, cp);
    return s;
}

bool is_unicode_space(char32_t cp) {
    switch (cp) {
        case 0x0009:
        case 0x000A:
        case 0x000B:
        case 0x000C:
        case 0x000D:
        case 0x0020:
        case 0x0085:
        case 0x00A0:
        case 0x1680:
        case 0x2028:
        case 0x2029:
        case 0x202F:
        case 0x205F:
        case 0x3000:
            return true;
        default:
            return cp >= 0x2000 && cp <= 0x200A;
    }
}

bool is_punctuation(char32_t cp) {
    if (cp < 0x80) {
        return (cp >= 0x21 && cp <= 0x2F) || (cp >= 0x3A && cp <= 0x40) ||
               (cp >= 0x5B && cp <= 0x60) || (cp >= 0x7B && cp <= 0x7E);
    }
    switch (cp) {
        case 0x00A1:  // inverted exclamation
        case 0x00BF:  // inverted question
        case 0x2013:  // en dash
        case 0x2014:  // em dash
        case 0x2018:
        case 0x2019:
        case 0x201C:
        case 0x201D:
        case 0x2026:  // ellipsis
        case 0x3001:  // ideographic comma
        case 0x3002:  // ideographic full stop
        case 0x3008:
        case 0x3009:
        case 0x300A:
        case 0x300B:
        case 0x300C:
        case 0x300D:
        case 0x300E:
        case 0x300F:
        case 0x3010:
        case 0x3011:
        case 0xFF01:  // fullwidth !
        case 0xFF08:
        case 0xFF09:
        case 0xFF0C:  // fullwidth comma
        case 0xFF1A:
        case 0xFF1B:
        case 0xFF1F:  // fullwidth ?
            return true;
        default:
            return false;
    }
}

namespace {

// (base << 32 | combining) -> precomposed. Latin-1 and Latin Extended-A
// forms for the eight most common combining marks.
const std::unordered_map<uint64_t, char32_t>& composition_table() {
    static const std::unordered_map<uint64_t, char32_t> table = [] {
        std::unordered_map<uint64_t, char32_t> t;
        auto put = [&t](char32_t base, char32_t mark, char32_t composed) {
            t[(static_cast<uint64_t>(base) << 32) | mark] = composed;
        };
        // grave U+0300
        put(U'A', 0x300, 0x00C0); put(U'E', 0x300, 0x00C8); put(U'I', 0x300, 0x00CC);
        put(U'O', 0x300, 0x00D2); put(U'U', 0x300, 0x00D9);
        put(U'a', 0x300, 0x00E0); put(U'e', 0x300, 0x00E8); put(U'i', 0x300, 0x00EC);
        put(U'o', 0x300, 0x00F2); put(U'u', 0x300, 0x00F9);
        // acute U+0301
        put(U'A', 0x301, 0x00C1); put(U'E', 0x301, 0x00C9); put(U'I', 0x301, 0x00CD);
        put(U'O', 0x301, 0x00D3); put(U'U', 0x301, 0x00DA); put(U'Y', 0x301, 0x00DD);
        put(U'a', 0x301, 0x00E1); put(U'e', 0x301, 0x00E9); put(U'i', 0x301, 0x00ED);
        put(U'o', 0x301, 0x00F3); put(U'u', 0x301, 0x00FA); put(U'y', 0x301, 0x00FD);
        put(U'C', 0x301, 0x0106); put(U'c', 0x301, 0x0107);
        put(U'N', 0x301, 0x0143); put(U'n', 0x301, 0x0144);
        put(U'S', 0x301, 0x015A); put(U's', 0x301, 0x015B);
        put(U'Z', 0x301, 0x0179); put(U'z', 0x301, 0x017A);
        // circumflex U+0302
        put(U'A', 0x302, 0x00C2); put(U'E', 0x302, 0x00CA); put(U'I', 0x302, 0x00CE);
        put(U'O', 0x302, 0x00D4); put(U'U', 0x302, 0x00DB);
        put(U'a', 0x302, 0x00E2); put(U'e', 0x302, 0x00EA); put(U'i', 0x302, 0x00EE);
        put(U'o', 0x302, 0x00F4); put(U'u', 0x302, 0x00FB);
        // tilde U+0303
        put(U'A', 0x303, 0x00C3); put(U'N', 0x303, 0x00D1); put(U'O', 0x303, 0x00D5);
        put(U'a', 0x303, 0x00E3); put(U'n', 0x303, 0x00F1); put(U'o', 0x303, 0x00F5);
        // diaeresis U+0308
        put(U'A', 0x308, 0x00C4); put(U'E', 0x308, 0x00CB); put(U'I', 0x308, 0x00CF);
        put(U'O', 0x308, 0x00D6); put(U'U', 0x308, 0x00DC);
        put(U'a', 0x308, 0x00E4); put(U'e', 0x308, 0x00EB); put(U'i', 0x308, 0x00EF);
        put(U'o', 0x308, 0x00F6); put(U'u', 0x308, 0x00FC); put(U'y', 0x308, 0x00FF);
        // ring above U+030A
        put(U'A', 0x30A, 0x00C5); put(U'a', 0x30A, 0x00E5);
        // caron U+030C
        put(U'C', 0x30C, 0x010C); put(U'c', 0x30C, 0x010D);
        put(U'S', 0x30C, 0x0160); put(U's', 0x30C, 0x0161);
        put(U'Z', 0x30C, 0x017D); put(U'z', 0x30C, 0x017E);
        // cedilla U+0327
        put(U'C', 0x327, 0x00C7); put(U'c', 0x327, 0x00E7);
        return t;
    }();
    return table;
}

}  // namespace

std::string normalize_nfc(std::string_view s) {
    // Fast path: pure ASCII never changes.
    bool ascii = true;
    for (char c : s) {
        if (static_cast<unsigned char>(c) >= 0x80) {
            ascii = false;
            break;
        }
    }
    if (ascii) return std::string(s);

    const std::vector<char32_t> cps = utf8_decode(s);
    std::vector<char32_t> out;
    out.reserve(cps.size());
    const auto& table = composition_table();
    for (char32_t cp : cps) {
        if (!out.empty() && cp >= 0x300 && cp <= 0x36F) {
            const uint64_t key = (static_cast<uint64_t>(out.back()) << 32) | cp;
            auto it = table.find(key);
            if (it != table.end()) {
                out.back() = it->second;
                continue;
            }
        }
        out.push_back(cp);
    }
    return utf8_encode(out);
}

}  // namespace mglm
