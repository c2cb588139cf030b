#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "mglm/vocab.hpp"

namespace mglm {

enum class FineMode { character, whitespace };

// [CLS] leads for auto-encoding sequences; the auto-regressive layout starts
// with [SEP] and ends with [CLS].
enum class SeqLayout { autoencoding, autoregressive };

struct Span {
    int start = 0;
    int end = 0;  // exclusive
    int coarse_id = 0;

    bool operator==(const Span&) const = default;
};

struct TokenizedSequence {
    std::vector<int> fine_ids;
    std::vector<Span> spans;
    std::string surface;

    int len() const { return static_cast<int>(fine_ids.size()); }
};

struct SegmenterOptions {
    int max_span = 8;
};

std::vector<std::string> tokenize_fine(std::string_view text, FineMode mode);

// Greedy forward longest-match over the coarse vocabulary. Multi-token
// matches require every fine token to be in the fine vocabulary; unmatched
// positions fall back to singleton spans ([UNK] coarse id when the fine
// token itself is out of vocabulary).
std::vector<Span> segment_coarse(const std::vector<std::string>& fine_tokens,
                                 const Vocabulary& fine, const Vocabulary& coarse,
                                 const SegmenterOptions& opts = {});

TokenizedSequence encode(std::string_view text, const Vocabulary& fine, const Vocabulary& coarse,
                         FineMode mode, SeqLayout layout, int max_len,
                         const SegmenterOptions& opts = {});

// Externally supplied segmentation: spans whose concatenation is not a
// coarse token decay to singleton spans.
TokenizedSequence encode_presegmented(const std::vector<std::vector<std::string>>& segments,
                                      const Vocabulary& fine, const Vocabulary& coarse,
                                      SeqLayout layout, int max_len);

// One example per line; spans separated by U+241F, fine-token boundaries
// inside a span marked by U+2420.
std::vector<std::vector<std::string>> parse_presegmented_line(std::string_view line);

// Re-partitions a sequence into per-position singleton spans (the
// single-grained baseline view). Coarse ids map each fine token to its own
// coarse entry, [UNK] for unknown fine tokens.
TokenizedSequence to_singleton_spans(const TokenizedSequence& seq, const Vocabulary& fine,
                                     const Vocabulary& coarse);

// True when spans are sorted, non-overlapping and exactly cover
// [0, len(fine_ids)).
bool spans_partition(const TokenizedSequence& seq);

int cls_position(SeqLayout layout, int len);

}  // namespace mglm
