#include "mglm/masking.hpp"

#include <numeric>
#include <sstream>

#include "mglm/rng.hpp"

namespace mglm {

namespace {

bool is_special_span(const TokenizedSequence& seq, const Span& s) {
    for (int i = s.start; i < s.end; ++i) {
        if (!Vocabulary::is_special_id(seq.fine_ids[static_cast<size_t>(i)])) return false;
    }
    return true;
}

int random_content_id(const Vocabulary& v, Rng& rng) {
    const int content = v.size() - Vocabulary::kNumSpecials;
    if (content <= 0)
        throw DataError("plan_mlm: vocabulary has no content tokens to draw replacements from");
    return Vocabulary::kNumSpecials + static_cast<int>(rng.uniform_index(content));
}

}  // namespace

MaskedExample plan_mlm(const TokenizedSequence& seq, const Vocabulary& fine,
                       const Vocabulary& coarse, const MaskingRates& rates, uint64_t seed) {
    if (rates.select <= 0.0 || rates.select >= 1.0)
        throw ConfigError("plan_mlm: masking rate must be in (0, 1)");
    if (rates.mask < 0.0 || rates.random < 0.0 || rates.mask + rates.random > 1.0)
        throw ConfigError("plan_mlm: branch rates must be non-negative and sum to at most 1");
    if (!spans_partition(seq)) throw DataError("plan_mlm: spans do not partition the sequence");

    MaskedExample ex;
    ex.input_fine = seq.fine_ids;
    ex.input_spans = seq.spans;
    ex.labels.assign(seq.fine_ids.size(), -1);
    ex.masked_flags.assign(seq.fine_ids.size(), 0);

    std::vector<int> candidates;
    int content_len = 0;
    for (size_t s = 0; s < seq.spans.size(); ++s) {
        if (!is_special_span(seq, seq.spans[s])) {
            candidates.push_back(static_cast<int>(s));
            content_len += seq.spans[s].end - seq.spans[s].start;
        }
    }
    if (candidates.empty()) throw DataError("plan_mlm: nothing to mask (only special tokens)");

    Rng rng(mix_seed(seed, 1));         // selection, branch, fine replacement
    Rng coarse_rng(mix_seed(seed, 2));  // coarse replacement

    rng.shuffle(candidates);
    const double target = rates.select * content_len;
    std::vector<int> selected;
    int flagged = 0;
    for (int s : candidates) {
        if (static_cast<double>(flagged) >= target) break;
        selected.push_back(s);
        flagged += seq.spans[static_cast<size_t>(s)].end - seq.spans[static_cast<size_t>(s)].start;
    }

    for (int s : selected) {
        Span& span = ex.input_spans[static_cast<size_t>(s)];
        for (int i = span.start; i < span.end; ++i) {
            ex.labels[static_cast<size_t>(i)] = seq.fine_ids[static_cast<size_t>(i)];
            ex.masked_flags[static_cast<size_t>(i)] = 1;
        }
        const double u = rng.uniform_real();
        if (u < rates.mask) {
            for (int i = span.start; i < span.end; ++i)
                ex.input_fine[static_cast<size_t>(i)] = Vocabulary::kMask;
            span.coarse_id = Vocabulary::kMask;
        } else if (u < rates.mask + rates.random) {
            for (int i = span.start; i < span.end; ++i)
                ex.input_fine[static_cast<size_t>(i)] = random_content_id(fine, rng);
            span.coarse_id = random_content_id(coarse, coarse_rng);
        }
        // else: inputs stay unchanged, the positions are still predicted.
    }
    return ex;
}

MaskedExample plan_wwm_single_grained(const TokenizedSequence& seq, const Vocabulary& fine,
                                      const Vocabulary& coarse, const MaskingRates& rates,
                                      uint64_t seed) {
    return plan_mlm(seq, fine, coarse, rates, seed);
}

VisibilityBoundary ar_visibility(const TokenizedSequence& seq) {
    if (!spans_partition(seq))
        throw DataError("ar_visibility: spans do not partition the sequence");
    VisibilityBoundary vb;
    vb.bound.assign(seq.fine_ids.size(), 0);
    for (const Span& s : seq.spans) {
        for (int i = s.start; i < s.end; ++i) vb.bound[static_cast<size_t>(i)] = s.start;
    }
    return vb;
}

std::string format_plan(const MaskedExample& ex, const Vocabulary& fine,
                        const Vocabulary& coarse) {
    std::ostringstream os;
    for (const Span& s : ex.input_spans) {
        if (s.start > 0) os << " | ";
        for (int i = s.start; i < s.end; ++i) {
            if (i > s.start) os << ' ';
            os << fine.token_of(ex.input_fine[static_cast<size_t>(i)]);
            if (ex.masked_flags[static_cast<size_t>(i)])
                os << "<=" << fine.token_of(ex.labels[static_cast<size_t>(i)]);
        }
        os << " [" << coarse.token_of(s.coarse_id) << ']';
    }
    return os.str();
}

}  // namespace mglm
