#include "mglm/tokenizer.hpp"

#include <algorithm>

#include "mglm/unicode.hpp"

namespace mglm {

namespace {

std::vector<std::string> tokenize_characters(std::string_view text) {
    std::vector<std::string> out;
    for (char32_t cp : utf8_decode(text)) {
        if (is_unicode_space(cp)) continue;
        out.push_back(utf8_encode(cp));
    }
    return out;
}

// Splits a whitespace-delimited word into leading punctuation, core, and
// trailing punctuation tokens.
void emit_word(const std::vector<char32_t>& word, std::vector<std::string>& out) {
    size_t lo = 0;
    size_t hi = word.size();
    std::vector<std::string> trailing;
    while (lo < hi && is_punctuation(word[lo])) {
        out.push_back(utf8_encode(word[lo]));
        ++lo;
    }
    while (hi > lo && is_punctuation(word[hi - 1])) {
        trailing.push_back(utf8_encode(word[hi - 1]));
        --hi;
    }
    if (hi > lo) {
        std::string core;
        for (size_t i = lo; i < hi; ++i) utf8_append(core, word[i]);
        out.push_back(std::move(core));
    }
    out.insert(out.end(), trailing.rbegin(), trailing.rend());
}

std::vector<std::string> tokenize_whitespace(std::string_view text) {
    std::vector<std::string> out;
    std::vector<char32_t> word;
    for (char32_t cp : utf8_decode(text)) {
        if (is_unicode_space(cp)) {
            if (!word.empty()) {
                emit_word(word, out);
                word.clear();
            }
        } else {
            word.push_back(cp);
        }
    }
    if (!word.empty()) emit_word(word, out);
    return out;
}

int singleton_coarse_id(const std::string& token, const Vocabulary& fine,
                        const Vocabulary& coarse) {
    if (!fine.contains(token)) return Vocabulary::kUnk;
    const int cid = coarse.id_of(token);
    return cid >= 0 ? cid : Vocabulary::kUnk;
}

}  // namespace

std::vector<std::string> tokenize_fine(std::string_view text, FineMode mode) {
    return mode == FineMode::character ? tokenize_characters(text) : tokenize_whitespace(text);
}

std::vector<Span> segment_coarse(const std::vector<std::string>& fine_tokens,
                                 const Vocabulary& fine, const Vocabulary& coarse,
                                 const SegmenterOptions& opts) {
    const int n = static_cast<int>(fine_tokens.size());
    std::vector<Span> spans;
    int j = 0;
    while (j < n) {
        int match_end = -1;
        int match_id = -1;
        const int k_max = std::min(n, j + std::max(1, opts.max_span));
        std::string concat;
        bool all_known = true;
        // Longest match wins; scan left to right accumulating the surface.
        for (int k = j + 1; k <= k_max; ++k) {
            all_known = all_known && fine.contains(fine_tokens[k - 1]);
            if (!all_known) break;
            concat += fine_tokens[k - 1];
            const int cid = coarse.id_of(concat);
            if (cid >= 0) {
                match_end = k;
                match_id = cid;
            }
        }
        if (match_end > j) {
            spans.push_back({j, match_end, match_id});
            j = match_end;
        } else {
            spans.push_back({j, j + 1, singleton_coarse_id(fine_tokens[j], fine, coarse)});
            ++j;
        }
    }
    return spans;
}

namespace {

TokenizedSequence assemble(std::vector<int> content_ids, std::vector<Span> content_spans,
                           std::string surface, SeqLayout layout, int max_len) {
    if (max_len < 2) {
        throw ConfigError("encode: max_len=" + std::to_string(max_len) +
                          " cannot fit the two special tokens");
    }
    // Truncate whole spans until the content fits alongside the specials.
    const int budget = max_len - 2;
    while (!content_spans.empty() && content_spans.back().end > budget) {
        content_spans.pop_back();
    }
    const int kept = content_spans.empty() ? 0 : content_spans.back().end;
    content_ids.resize(kept);

    TokenizedSequence seq;
    seq.surface = std::move(surface);
    const int first = layout == SeqLayout::autoencoding ? Vocabulary::kCls : Vocabulary::kSep;
    const int last = layout == SeqLayout::autoencoding ? Vocabulary::kSep : Vocabulary::kCls;
    seq.fine_ids.reserve(kept + 2);
    seq.fine_ids.push_back(first);
    seq.fine_ids.insert(seq.fine_ids.end(), content_ids.begin(), content_ids.end());
    seq.fine_ids.push_back(last);
    seq.spans.reserve(content_spans.size() + 2);
    seq.spans.push_back({0, 1, first});
    for (const Span& s : content_spans) {
        seq.spans.push_back({s.start + 1, s.end + 1, s.coarse_id});
    }
    seq.spans.push_back({kept + 1, kept + 2, last});
    return seq;
}

}  // namespace

TokenizedSequence encode(std::string_view text, const Vocabulary& fine, const Vocabulary& coarse,
                         FineMode mode, SeqLayout layout, int max_len,
                         const SegmenterOptions& opts) {
    const std::vector<std::string> tokens = tokenize_fine(text, mode);
    std::vector<Span> spans = segment_coarse(tokens, fine, coarse, opts);
    std::vector<int> ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) {
        const int id = fine.id_of(t);
        ids.push_back(id >= 0 ? id : Vocabulary::kUnk);
    }
    return assemble(std::move(ids), std::move(spans), std::string(text), layout, max_len);
}

TokenizedSequence encode_presegmented(const std::vector<std::vector<std::string>>& segments,
                                      const Vocabulary& fine, const Vocabulary& coarse,
                                      SeqLayout layout, int max_len) {
    std::vector<int> ids;
    std::vector<Span> spans;
    std::string surface;
    for (const auto& seg : segments) {
        if (seg.empty()) continue;
        const int start = static_cast<int>(ids.size());
        std::string concat;
        bool all_known = true;
        for (const auto& tok : seg) {
            const int id = fine.id_of(tok);
            ids.push_back(id >= 0 ? id : Vocabulary::kUnk);
            all_known = all_known && id >= 0;
            concat += tok;
            surface += tok;
        }
        const int end = static_cast<int>(ids.size());
        const int cid = all_known ? coarse.id_of(concat) : -1;
        if (cid >= 0) {
            spans.push_back({start, end, cid});
        } else {
            // Segmented word missing from the trimmed coarse vocabulary:
            // fall back to singleton spans.
            for (int i = start; i < end; ++i) {
                spans.push_back({i, i + 1, singleton_coarse_id(seg[i - start], fine, coarse)});
            }
        }
    }
    return assemble(std::move(ids), std::move(spans), std::move(surface), layout, max_len);
}

std::vector<std::vector<std::string>> parse_presegmented_line(std::string_view line) {
    static const std::string kSpanSep = utf8_encode(static_cast<char32_t>(0x241F));
    static const std::string kTokSep = utf8_encode(static_cast<char32_t>(0x2420));
    std::vector<std::vector<std::string>> segments;
    size_t pos = 0;
    const std::string text(line);
    while (pos <= text.size()) {
        size_t next = text.find(kSpanSep, pos);
        if (next == std::string::npos) next = text.size();
        const std::string span = text.substr(pos, next - pos);
        if (!span.empty()) {
            std::vector<std::string> toks;
            size_t tpos = 0;
            while (tpos <= span.size()) {
                size_t tnext = span.find(kTokSep, tpos);
                if (tnext == std::string::npos) tnext = span.size();
                if (tnext > tpos) toks.push_back(span.substr(tpos, tnext - tpos));
                if (tnext == span.size()) break;
                tpos = tnext + kTokSep.size();
            }
            if (!toks.empty()) segments.push_back(std::move(toks));
        }
        if (next == text.size()) break;
        pos = next + kSpanSep.size();
    }
    return segments;
}

TokenizedSequence to_singleton_spans(const TokenizedSequence& seq, const Vocabulary& fine,
                                     const Vocabulary& coarse) {
    TokenizedSequence out;
    out.fine_ids = seq.fine_ids;
    out.surface = seq.surface;
    out.spans.reserve(seq.fine_ids.size());
    for (int i = 0; i < seq.len(); ++i) {
        const int fid = seq.fine_ids[i];
        int cid;
        if (Vocabulary::is_special_id(fid)) {
            cid = fid;
        } else {
            cid = coarse.id_of(fine.token_of(fid));
            if (cid < 0) cid = Vocabulary::kUnk;
        }
        out.spans.push_back({i, i + 1, cid});
    }
    return out;
}

bool spans_partition(const TokenizedSequence& seq) {
    int expected = 0;
    for (const Span& s : seq.spans) {
        if (s.start != expected || s.end <= s.start) return false;
        expected = s.end;
    }
    return expected == seq.len();
}

int cls_position(SeqLayout layout, int len) {
    if (len <= 0) throw ConfigError("cls_position: empty sequence");
    return layout == SeqLayout::autoencoding ? 0 : len - 1;
}

}  // namespace mglm
