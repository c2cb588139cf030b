#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mglm/tokenizer.hpp"
#include "mglm/vocab.hpp"

namespace mglm {

// MLM corruption plan. Spans are flagged all-or-nothing; labels carry the
// original fine id at flagged positions and -1 elsewhere.
struct MaskedExample {
    std::vector<int> input_fine;
    std::vector<Span> input_spans;
    std::vector<int> labels;
    std::vector<uint8_t> masked_flags;
};

// bound[i] = start of position i's coarse span. When scoring token i the
// model may condition only on positions strictly before bound[i].
struct VisibilityBoundary {
    std::vector<int> bound;
};

struct MaskingRates {
    double select = 0.15;   // fraction of non-special fine positions
    double mask = 0.80;     // of selected spans: everything becomes [MASK]
    double random = 0.10;   // of selected spans: random replacement
};

// Whole-span masking plan. Pure function of (seq, rates, seed): non-special
// spans are shuffled and selected until the flagged position count first
// reaches the target; each selected span draws its treatment once.
// Selection, branch and fine replacement draws come from one stream and
// coarse replacement draws from a second, so the fine-side corruption is
// independent of the coarse vocabulary.
MaskedExample plan_mlm(const TokenizedSequence& seq, const Vocabulary& fine,
                       const Vocabulary& coarse, const MaskingRates& rates, uint64_t seed);

// Same selection path as plan_mlm; the consumer runs the model in
// single-grained fusion mode, so the (still corrupted) coarse ids are
// simply unused.
MaskedExample plan_wwm_single_grained(const TokenizedSequence& seq, const Vocabulary& fine,
                                      const Vocabulary& coarse, const MaskingRates& rates,
                                      uint64_t seed);

VisibilityBoundary ar_visibility(const TokenizedSequence& seq);

std::string format_plan(const MaskedExample& ex, const Vocabulary& fine,
                        const Vocabulary& coarse);

}  // namespace mglm
